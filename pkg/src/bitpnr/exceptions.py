"""Exception types raised by bitpnr."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class IllConditioned(ArithmeticError):
    """A matrix is too ill-conditioned to invert reliably."""

    def __init__(self, cond, threshold, what="confusion matrix"):
        self.cond = float(cond)
        self.threshold = float(threshold)
        super().__init__(
            f"{what} condition number {self.cond:.3e} exceeds threshold {self.threshold:.3e}"
        )


class IllConditionedBasis(IllConditioned):
    """The calibration basis overlap matrix cannot be inverted reliably."""

    def __init__(self, cond, threshold):
        super().__init__(cond, threshold, what="calibration basis overlap matrix")


class ExpansionTooLarge(MemoryError):
    """A truncated inverse column would exceed the configured entry budget."""

    def __init__(self, predicted, budget):
        self.predicted = int(predicted)
        self.budget = int(budget)
        super().__init__(
            f"truncated column needs up to {self.predicted} entries, budget is {self.budget}"
        )

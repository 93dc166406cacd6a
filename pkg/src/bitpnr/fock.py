"""Fock-basis primitives: binary decomposition, generalized parity,
probability vectors and the total variation distance."""

from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import DomainError

NORM_TOL = 1e-9

#: Default truncated-weight level above which :func:`coherent_distribution` warns.
TRUNCATION_WARN = 0.025


class Label(str, enum.Enum):
    MEASURED = "measured"
    IDEAL = "ideal"
    MITIGATED = "mitigated"
    CALIBRATION = "calibration"


class TruncationWarning(UserWarning):
    pass


def bit_decompose(n: int, n_bits: int) -> np.ndarray:
    """Binary digits of ``n``, least significant bit first.

    >>> bit_decompose(13, 4)
    array([1, 0, 1, 1])
    """
    n = int(n)
    if n_bits < 1 or not 0 <= n < 2**n_bits:
        raise DomainError(f"photon number {n} not representable with {n_bits} bits")
    return (n >> np.arange(n_bits)) & 1


def recompose(bits) -> int:
    bits = np.asarray(bits, dtype=np.int64)
    return int(np.sum(bits << np.arange(len(bits))))


def bit_of(k, n):
    """k-th binary digit of ``n``; vectorizes over ``n``."""
    return (np.asarray(n) >> k) & 1


def generalized_parity(k: int, n: int) -> int:
    """Eigenvalue of the k-th generalized parity operator on Fock state ``n``."""
    if k < 0 or n < 0:
        raise DomainError("bit index and photon number must be non-negative")
    return 1 - 2 * ((n >> k) & 1)


@dataclass(frozen=True)
class ProbVector:
    """A distribution over (possibly multi-mode, flattened) Fock outcomes.

    Mitigated vectors straight out of the matrix inverse may carry negative
    entries; those must be built with ``unprojected=True``.
    """

    p: np.ndarray
    label: Label = Label.MEASURED
    unprojected: bool = False

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("probability vector must be a non-empty 1-d array")
        label = Label(self.label)
        if abs(p.sum() - 1.0) > NORM_TOL:
            raise DomainError(f"probabilities sum to {p.sum():.12g}, not 1")
        if self.unprojected and label is not Label.MITIGATED:
            raise DomainError("only mitigated vectors may be unprojected")
        if not self.unprojected and np.any(p < -NORM_TOL):
            raise DomainError(f"negative entry {p.min():.3g} in a {label.value} vector")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "label", label)

    def __len__(self):
        return self.p.size

    @classmethod
    def from_counts(cls, counts, label=Label.MEASURED):
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise DomainError("histogram has no counts")
        return cls(counts / total, label)

    def to_json(self) -> str:
        return json.dumps({"label": self.label.value, "p": self.p.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ProbVector":
        obj = json.loads(text)
        return cls(obj["p"], obj.get("label", "measured"), obj.get("unprojected", False))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p"])
            for v in self.p:
                w.writerow([repr(float(v))])

    @classmethod
    def read_csv(cls, path, label=Label.MEASURED, normalize=False) -> "ProbVector":
        """Read a one-column CSV with header ``p``.

        With ``normalize=True`` an unnormalized histogram (e.g. raw counts) is
        rescaled with a warning instead of rejected.
        """
        values = read_column_csv(path, "p")
        if normalize:
            total = values.sum()
            if total <= 0:
                raise DomainError(f"{path}: histogram has no weight")
            if abs(total - 1.0) > NORM_TOL:
                warnings.warn(f"{path}: histogram sums to {total:.6g}; normalizing", stacklevel=2)
                values = values / total
        return cls(values, label)


def read_column_csv(path, column: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip() != column:
            raise DomainError(f"{path}: expected header {column!r}, got {header!r}")
        return np.array([float(row[0]) for row in reader if row], dtype=float)


def coherent_distribution(alpha_sq: float, n_max: int, warn_threshold: float = TRUNCATION_WARN):
    """Truncated, renormalized Poisson populations of a coherent state.

    Returns ``(ProbVector, truncated_weight)`` where ``truncated_weight`` is the
    Poisson mass at ``n >= n_max`` that was discarded before renormalizing.
    """
    if alpha_sq < 0:
        raise DomainError("mean photon number must be non-negative")
    if n_max < 1:
        raise DomainError("truncation must keep at least one Fock state")
    n = np.arange(n_max)
    if alpha_sq == 0:
        p = (n == 0).astype(float)
        truncated = 0.0
    else:
        p = stats.poisson.pmf(n, alpha_sq)
        truncated = float(stats.poisson.sf(n_max - 1, alpha_sq))
    if truncated > warn_threshold:
        warnings.warn(
            f"|alpha|^2={alpha_sq}: {truncated:.3%} of the population lies above n={n_max - 1}",
            TruncationWarning,
            stacklevel=2,
        )
    return ProbVector(p / p.sum(), Label.IDEAL), truncated


def fock_state(n: int, n_max: int) -> ProbVector:
    if not 0 <= n < n_max:
        raise DomainError(f"Fock state {n} outside truncation {n_max}")
    p = np.zeros(n_max)
    p[n] = 1.0
    return ProbVector(p, Label.IDEAL)


def tvd(a, b) -> float:
    """Total variation distance, half the L1 distance between two distributions."""
    a = a.p if isinstance(a, ProbVector) else np.asarray(a, dtype=float)
    b = b.p if isinstance(b, ProbVector) else np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DomainError(f"length mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def n_bits_for(n_max: int) -> int:
    n_bits = int(round(math.log2(n_max))) if n_max > 0 else 0
    if n_max < 2 or 2**n_bits != n_max:
        raise DomainError(f"dimension {n_max} is not a power of two >= 2")
    return n_bits

"""Monte Carlo simulation of the bitwise measurement, shot by shot.

Shots are processed in fixed-size chunks. Every chunk draws from its own
generator, derived from the master seed and the chunk index, so the output
does not depend on how many workers process the chunks or in which order.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError
from .fock import Label, ProbVector
from .hmm import DetectorParams

CHUNK = 1 << 16

#: Duration of one reset attempt times the storage decay rate (2.244 us / 1 ms).
ATTEMPT_EXPOSURE = 0.0046 / 2.05


class ResetKind(str, enum.Enum):
    CONSTANT = "constant_exposure"
    GEOMETRIC = "geometric"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class ResetModel:
    """Statistics of the dynamic ancilla reset that follows a readout of 1.

    ``constant_exposure`` adds exactly ``mean_attempts * attempt_exposure``
    (the analytic model's ``kappa_t_reset``). ``geometric`` draws the attempt
    count from a geometric law with the given mean, ``empirical`` from
    ``empirical_pmf`` where entry ``a`` is P(a + 1 attempts).

    ``slope_per_photon`` optionally makes the mean attempt count grow linearly
    with the photon number present at reset time; it is off by default.
    """

    kind: ResetKind = ResetKind.CONSTANT
    mean_attempts: float = 2.05
    attempt_exposure: float = ATTEMPT_EXPOSURE
    empirical_pmf: tuple | None = None
    slope_per_photon: float = 0.0

    def __post_init__(self):
        kind = ResetKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is ResetKind.EMPIRICAL:
            if self.empirical_pmf is None:
                raise DomainError("empirical reset model needs a pmf")
            pmf = np.asarray(self.empirical_pmf, dtype=float)
            if pmf.ndim != 1 or np.any(pmf < 0) or not math.isclose(pmf.sum(), 1.0, abs_tol=1e-9):
                raise DomainError("empirical pmf must be non-negative and sum to 1")
            object.__setattr__(self, "empirical_pmf", tuple(pmf / pmf.sum()))
            object.__setattr__(self, "mean_attempts", float(np.dot(np.arange(1, pmf.size + 1), pmf)))
        if self.mean_attempts < 1:
            raise DomainError("a reset needs at least one attempt on average")
        if self.attempt_exposure < 0:
            raise DomainError("attempt exposure must be non-negative")

    @classmethod
    def matching(cls, params: DetectorParams, kind=ResetKind.CONSTANT, mean_attempts=2.05, **kw):
        """Reset model whose mean exposure equals ``params.kappa_t_reset``."""
        return cls(kind, mean_attempts, params.kappa_t_reset / mean_attempts, **kw)

    @property
    def mean_exposure(self) -> float:
        return self.mean_attempts * self.attempt_exposure

    def p_more_than(self, attempts: int) -> float:
        """Probability that a reset needs more than ``attempts`` attempts."""
        if self.kind is ResetKind.GEOMETRIC:
            return (1 - 1 / self.mean_attempts) ** attempts
        if self.kind is ResetKind.EMPIRICAL:
            return float(np.sum(self.empirical_pmf[attempts:]))
        # constant mode records round(mean_attempts) attempts per reset
        return float(round(self.mean_attempts) > attempts)

    def sample(self, rng: np.random.Generator, photons: np.ndarray):
        """Attempt counts and added exposures for resets at the given photon numbers."""
        photons = np.asarray(photons)
        mean = self.mean_attempts + self.slope_per_photon * photons
        if self.kind is ResetKind.CONSTANT:
            attempts = np.full(photons.shape, int(round(self.mean_attempts)), dtype=np.int64)
            return attempts, mean * self.attempt_exposure
        if self.kind is ResetKind.GEOMETRIC:
            attempts = rng.geometric(1.0 / mean, size=photons.shape)
        else:
            pmf = np.asarray(self.empirical_pmf)
            attempts = rng.choice(np.arange(1, pmf.size + 1), p=pmf, size=photons.shape)
            if self.slope_per_photon:
                attempts = np.rint(attempts * mean / self.mean_attempts).astype(np.int64)
        return attempts, attempts * self.attempt_exposure


@dataclass
class ShotRecord:
    true_initial: int
    bits: list
    outcome: int
    reset_attempts: list
    hidden_trajectory: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "true_initial": self.true_initial,
                "bits": self.bits,
                "outcome": self.outcome,
                "reset_attempts": self.reset_attempts,
                "hidden_trajectory": self.hidden_trajectory,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "ShotRecord":
        return cls(**json.loads(line))


def _run_batch(params: DetectorParams, reset: ResetModel, initial: np.ndarray, rng):
    """Vectorized core: simulate one shot per entry of ``initial``."""
    n_bits = params.n_bits
    shots = initial.size
    n = initial.astype(np.int64).copy()
    bits = np.zeros((shots, n_bits), dtype=np.int64)
    attempts = np.zeros((shots, n_bits), dtype=np.int64)
    trajectory = np.empty((shots, n_bits + 1), dtype=np.int64)
    trajectory[:, 0] = n
    extra = np.zeros(shots)
    for k in range(n_bits):
        exposure = params.kappa_t[k] + extra
        n = rng.binomial(n, np.exp(-exposure))
        trajectory[:, k + 1] = n
        true_bit = (n >> k) & 1
        flip_p = np.where(true_bit == 1, params.eps_e[k], params.eps_g[k])
        flipped = rng.random(shots) < flip_p
        bits[:, k] = true_bit ^ flipped
        extra = np.zeros(shots)
        needs_reset = bits[:, k] == 1
        if needs_reset.any():
            a, x = reset.sample(rng, n[needs_reset])
            attempts[needs_reset, k] = a
            extra[needs_reset] = x
    outcome = bits @ (1 << np.arange(n_bits))
    return bits, outcome, attempts, trajectory


def simulate_shot(params: DetectorParams, reset: ResetModel, initial: int, rng) -> ShotRecord:
    """Simulate a single bitwise measurement of Fock state ``initial``.

    ``rng`` is a :class:`numpy.random.Generator` or a seed for one.
    """
    if not 0 <= initial < params.n_max:
        raise DomainError(f"initial Fock state {initial} outside [0, {params.n_max})")
    rng = np.random.default_rng(rng)
    bits, outcome, attempts, traj = _run_batch(params, reset, np.array([initial]), rng)
    return ShotRecord(int(initial), bits[0].tolist(), int(outcome[0]), attempts[0].tolist(), traj[0].tolist())


@dataclass
class EnsembleResult:
    counts: np.ndarray
    histogram: ProbVector
    seed: int
    shots: int
    archive: dict | None = None

    def records(self):
        """Iterate the archived shots as :class:`ShotRecord` objects."""
        if self.archive is None:
            raise ValueError("ensemble was simulated without keep_shots=True")
        a = self.archive
        for s in range(self.shots):
            yield ShotRecord(
                int(a["initial"][s]),
                a["bits"][s].tolist(),
                int(a["outcome"][s]),
                a["reset_attempts"][s].tolist(),
                a["trajectory"][s].tolist(),
            )

    def write_archive(self, path):
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(rec.to_json())
                fh.write("\n")


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def simulate_ensemble(
    params: DetectorParams,
    reset: ResetModel | None,
    p_initial,
    shots: int,
    seed: int,
    *,
    keep_shots: bool = False,
    workers: int = 1,
    chunk_size: int = CHUNK,
) -> EnsembleResult:
    """Measure ``shots`` states drawn i.i.d. from ``p_initial``.

    The outcome histogram and (with ``keep_shots``) the shot archive are
    bit-identical for a given seed whatever the value of ``workers``.
    """
    if shots < 1:
        raise DomainError("need at least one shot")
    p = p_initial.p if isinstance(p_initial, ProbVector) else np.asarray(p_initial, dtype=float)
    if p.size == 0 or p.sum() <= 0:
        raise DomainError("initial distribution is empty")
    if p.size > params.n_max:
        raise DomainError(f"initial distribution has {p.size} entries, detector resolves {params.n_max}")
    p = p / p.sum()
    if reset is None:
        reset = ResetModel.matching(params)
    n_max = params.n_max
    starts = list(range(0, shots, chunk_size))

    def run(idx):
        rng = chunk_rng(seed, idx)
        size = min(chunk_size, shots - starts[idx])
        initial = rng.choice(p.size, size=size, p=p)
        bits, outcome, attempts, traj = _run_batch(params, reset, initial, rng)
        counts = np.bincount(outcome, minlength=n_max)
        if keep_shots:
            return counts, (initial, bits, outcome, attempts, traj)
        return counts, None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(starts))))
    else:
        parts = [run(i) for i in range(len(starts))]

    counts = np.sum([c for c, _ in parts], axis=0)
    archive = None
    if keep_shots:
        cols = list(zip(*(a for _, a in parts)))
        names = ("initial", "bits", "outcome", "reset_attempts", "trajectory")
        archive = {name: np.concatenate(col) for name, col in zip(names, cols)}
    hist = ProbVector(counts / shots, Label.MEASURED)
    return EnsembleResult(counts, hist, seed, shots, archive)


def empirical_confusion(params, reset, shots_per_state: int, seed: int, workers: int = 1):
    """Estimate the confusion matrix by simulating every Fock input.

    Column ``j`` uses the seed ``(seed, j)`` so columns are independent.
    """
    n_max = params.n_max
    c = np.empty((n_max, n_max))
    for j in range(n_max):
        one_hot = np.zeros(n_max)
        one_hot[j] = 1
        sub_seed = int(np.random.SeedSequence((seed, j)).generate_state(1)[0])
        res = simulate_ensemble(params, reset, one_hot, shots_per_state, sub_seed, workers=workers)
        c[:, j] = res.counts / shots_per_state
    return c

"""Mitigation for M independently read-out modes.

The joint confusion matrix is the Kronecker product of the single-mode
ones, so any entry of its inverse is a product of single-mode inverse
entries. Nothing here materializes an ``n_max**M`` sized object; work is
proportional to the number of measured configurations.

Multi-indices are digit tuples ``(n_1, ..., n_M)``; the flat index puts
mode 1 in the most significant position, matching ``C_1 ⊗ ... ⊗ C_M``.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .exceptions import DomainError, ExpansionTooLarge

DEFAULT_BUDGET = 10_000_000


def flat_index(digits, n_max: int) -> int:
    flat = 0
    for d in digits:
        if not 0 <= d < n_max:
            raise DomainError(f"digit {d} outside [0, {n_max})")
        flat = flat * n_max + int(d)
    return flat


def digits_of(flat: int, n_max: int, n_modes: int) -> tuple:
    if not 0 <= flat < n_max**n_modes:
        raise DomainError(f"flat index {flat} outside [0, {n_max}**{n_modes})")
    out = []
    for _ in range(n_modes):
        flat, d = divmod(flat, n_max)
        out.append(d)
    return tuple(reversed(out))


@dataclass(frozen=True)
class SparseDist:
    """Measured joint distribution restricted to configurations actually seen."""

    entries: dict
    shots: int | None = None

    def __post_init__(self):
        entries = {tuple(int(d) for d in k): float(v) for k, v in self.entries.items()}
        if not entries:
            raise DomainError("sparse distribution is empty")
        if min(entries.values()) < 0:
            raise DomainError("negative probability in measured distribution")
        total = sum(entries.values())
        if abs(total - 1) > 1e-9:
            raise DomainError(f"probabilities sum to {total:.12g}, not 1")
        if len({len(k) for k in entries}) != 1:
            raise DomainError("configurations have inconsistent mode counts")
        if self.shots is not None and len(entries) > self.shots:
            raise DomainError("more distinct configurations than shots")
        object.__setattr__(self, "entries", entries)

    @property
    def n_modes(self) -> int:
        return len(next(iter(self.entries)))

    def __len__(self):
        return len(self.entries)

    def get(self, digits, default=0.0):
        return self.entries.get(tuple(digits), default)

    @classmethod
    def from_samples(cls, samples) -> "SparseDist":
        counts = Counter(tuple(int(d) for d in s) for s in samples)
        shots = sum(counts.values())
        return cls({k: v / shots for k, v in counts.items()}, shots)

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"digits": list(k), "p": v}) + "\n" for k, v in self.entries.items())

    @classmethod
    def from_jsonl(cls, text: str, shots=None) -> "SparseDist":
        entries = {}
        for line in text.splitlines():
            if line.strip():
                obj = json.loads(line)
                key = tuple(obj["digits"])
                entries[key] = entries.get(key, 0.0) + float(obj["p"])
        return cls(entries, shots)


def kron_element(mode_inverses, i, j) -> float:
    """Entry ``(i, j)`` of ``C_1^-1 ⊗ ... ⊗ C_M^-1`` from the digit tuples."""
    if not len(i) == len(j) == len(mode_inverses):
        raise DomainError("multi-index length must equal the number of modes")
    val = 1.0
    for inv, a, b in zip(mode_inverses, i, j):
        val *= inv[a, b]
        if val == 0.0:
            break
    return float(val)


def mitigate_element(mode_inverses, target, p_meas: SparseDist) -> float:
    """One entry of the mitigated joint distribution, summed over measured configurations."""
    inverses = mode_inverses.mode_inverses if isinstance(mode_inverses, ExpansionSpec) else mode_inverses
    return float(sum(kron_element(inverses, target, j) * p for j, p in p_meas.entries.items()))


def mitigate_peaks(mode_inverses, targets, p_meas: SparseDist) -> dict:
    """Mitigated values at each target configuration (measured peaks by default)."""
    if targets is None:
        targets = list(p_meas.entries)
    return {tuple(t): mitigate_element(mode_inverses, t, p_meas) for t in targets}


def entry_count(q: int, n_modes: int, n_max: int) -> int:
    """Entries per column of the inverse kept at expansion order ``q``."""
    if not 0 <= q <= n_modes:
        raise DomainError(f"order q={q} outside [0, {n_modes}]")
    return sum((n_max - 1) ** l * comb(n_modes, l) for l in range(q + 1))


@dataclass(frozen=True)
class ExpansionSpec:
    """Truncation order and single-mode inverses for the order-``q`` expansion.

    ``eps_m[m]`` is ``max |C_m^-1 - I|``; ``eps`` reports the largest of them.
    """

    q: int
    mode_inverses: tuple
    budget: int = DEFAULT_BUDGET
    eps_m: tuple = field(init=False)

    def __post_init__(self):
        invs = tuple(np.asarray(m, dtype=float) for m in self.mode_inverses)
        if not invs:
            raise DomainError("need at least one mode")
        n_max = invs[0].shape[0]
        if any(m.shape != (n_max, n_max) for m in invs):
            raise DomainError("all mode inverses must be square with equal size")
        if not 0 <= self.q <= len(invs):
            raise DomainError(f"order q={self.q} outside [0, {len(invs)}]")
        object.__setattr__(self, "mode_inverses", invs)
        object.__setattr__(self, "eps_m", tuple(float(np.abs(m - np.eye(n_max)).max()) for m in invs))

    @property
    def n_modes(self) -> int:
        return len(self.mode_inverses)

    @property
    def n_max(self) -> int:
        return self.mode_inverses[0].shape[0]

    @property
    def eps(self) -> float:
        return max(self.eps_m)


def truncated_column(spec: ExpansionSpec, j) -> dict:
    """Column ``j`` of the joint inverse, keeping rows at mode distance <= q.

    Mode distance counts the modes whose row digit differs from ``j``; such
    modes contribute an off-diagonal (order-eps) factor. Kept entries are exact
    products, diagonal factors included, and exact zeros are dropped.

    Raises:
        ExpansionTooLarge: if the predicted entry count exceeds ``spec.budget``.
    """
    j = tuple(int(d) for d in j)
    if len(j) != spec.n_modes:
        raise DomainError("multi-index length must equal the number of modes")
    predicted = entry_count(spec.q, spec.n_modes, spec.n_max)
    if predicted > spec.budget:
        raise ExpansionTooLarge(predicted, spec.budget)
    invs = spec.mode_inverses
    diag = np.array([inv[d, d] for inv, d in zip(invs, j)])
    offdiag = []
    for inv, d in zip(invs, j):
        rows = np.array([r for r in range(spec.n_max) if r != d and inv[r, d] != 0.0], dtype=int)
        offdiag.append((rows, inv[rows, d]))

    col = {}
    base = float(np.prod(diag))
    if base != 0.0:
        col[j] = base
    for ell in range(1, spec.q + 1):
        for modes in itertools.combinations(range(spec.n_modes), ell):
            rest = np.delete(diag, modes)
            rest_prod = float(np.prod(rest))
            if rest_prod == 0.0:
                continue
            choices = [list(zip(*offdiag[m])) for m in modes]
            for picks in itertools.product(*choices):
                i = list(j)
                val = rest_prod
                for m, (r, v) in zip(modes, picks):
                    i[m] = int(r)
                    val *= v
                col[tuple(i)] = val
    return col


def mitigate_truncated(spec: ExpansionSpec, p_meas: SparseDist) -> dict:
    """Order-``q`` mitigated distribution over all reachable configurations.

    Returns a dict from digit tuples to (unprojected) mitigated values; entries
    can appear where nothing was measured.
    """
    out: dict = {}
    for j, p in p_meas.entries.items():
        for i, v in truncated_column(spec, j).items():
            out[i] = out.get(i, 0.0) + v * p
    return out


def dense_kron(mats) -> np.ndarray:
    """Materialized Kronecker product; only meant for small cross-checks."""
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def simulate_multimode(mode_params, reset, ideal: dict, shots: int, seed: int):
    """Sample joint outcomes for a product of independently read-out modes.

    ``ideal`` maps digit tuples to probabilities. Each shot draws a
    configuration, then every mode is measured with its own detector; errors
    are uncorrelated between modes.
    """
    from .simulator import ResetModel, _run_batch, chunk_rng

    keys = list(ideal)
    probs = np.array([ideal[k] for k in keys], dtype=float)
    if probs.size == 0 or probs.sum() <= 0:
        raise DomainError("ideal distribution is empty")
    probs /= probs.sum()
    keys_arr = np.array(keys, dtype=np.int64)
    n_modes = keys_arr.shape[1]
    if len(mode_params) != n_modes:
        raise DomainError(f"{len(mode_params)} detectors for {n_modes} modes")
    rng = chunk_rng(seed, 0)
    which = rng.choice(len(keys), size=shots, p=probs)
    initial = keys_arr[which]
    outcomes = np.empty_like(initial)
    for m, params in enumerate(mode_params):
        r = reset if reset is not None else ResetModel.matching(params)
        _, outcomes[:, m], _, _ = _run_batch(params, r, initial[:, m], chunk_rng(seed, m + 1))
    return SparseDist.from_samples(map(tuple, outcomes))

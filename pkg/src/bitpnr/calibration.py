"""Recovery of per-bit readout error rates from single-bit calibration data.

Calibration prepares each state of a basis, lets it decay over the
preparation exposure, and reads out one bit. Observed outcome frequencies
obey ``p_cal[b] = O @ T @ e_b`` with ``O`` the basis-to-Fock overlap, ``T``
the decay over the preparation exposure and ``e_b`` the POVM diagonal for
outcome ``b``; inverting gives the POVM diagonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, IllConditionedBasis
from .fock import bit_of, coherent_distribution
from .hmm import DetectorParams, EmissionPOVM, emission_povm, transition_matrix
from .mitigation import COND_THRESHOLD, condition_number

ROW_TOL = 1e-9


@dataclass(frozen=True)
class CalibrationSet:
    """Outcome frequencies of one bit measured on a basis of prepared states.

    Attributes:
        overlap: ``O[j, m] = |<psi_j|m>|^2``; rows sum to one.
        p_cal: ``2 x n_basis`` array of P(b = 0, 1 | psi_j).
        prep_exposure: decay exposure between preparation and readout.
        bit: which bit was measured.
        shots: shots per basis state, used for uncertainty propagation.
    """

    overlap: np.ndarray
    p_cal: np.ndarray
    prep_exposure: float = 0.0040
    bit: int = 0
    shots: int | None = None

    def __post_init__(self):
        o = np.array(self.overlap, dtype=float)
        p = np.array(self.p_cal, dtype=float)
        if o.ndim != 2 or o.shape[0] != o.shape[1]:
            raise DomainError(f"overlap matrix must be square, got {o.shape}")
        if p.shape != (2, o.shape[0]):
            raise DomainError(f"p_cal must have shape (2, {o.shape[0]}), got {p.shape}")
        if np.abs(o.sum(axis=1) - 1).max() > ROW_TOL:
            raise DomainError("overlap rows must sum to 1")
        if np.abs(p.sum(axis=0) - 1).max() > ROW_TOL:
            raise DomainError("p_cal columns must sum to 1")
        if self.prep_exposure < 0:
            raise DomainError("preparation exposure must be non-negative")
        object.__setattr__(self, "overlap", o)
        object.__setattr__(self, "p_cal", p)

    @property
    def n_max(self) -> int:
        return self.overlap.shape[0]

    def to_dict(self) -> dict:
        d = {"O": self.overlap.tolist(), "p_cal": self.p_cal.tolist(), "prep_exposure": self.prep_exposure,
             "bit": self.bit}
        if self.shots is not None:
            d["shots"] = self.shots
        return d

    @classmethod
    def from_dict(cls, d) -> "CalibrationSet":
        return cls(d["O"], d["p_cal"], d.get("prep_exposure", 0.0040), d.get("bit", 0), d.get("shots"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text) -> "CalibrationSet":
        return cls.from_dict(json.loads(text))


def fock_basis(n_max):
    return np.eye(n_max)


def coherent_basis(alpha_values, n_max):
    """Overlap matrix of coherent states ``|alpha_j>`` with the Fock basis."""
    return np.array([coherent_distribution(a * a, n_max, warn_threshold=1.0)[0].p for a in alpha_values])


@dataclass(frozen=True)
class EmissionEstimate:
    povm: EmissionPOVM
    #: standard errors of ``povm.e1`` (identical for ``e0``); nan without shot counts
    sigma: np.ndarray
    #: linear map from the observed P(b=1 | psi_j) to ``povm.e1``
    response: np.ndarray
    var_p1: np.ndarray
    bit: int


def recover_emission(cal: CalibrationSet, n_max: int | None = None, threshold: float = COND_THRESHOLD):
    """POVM diagonal of the calibrated bit, ``T^-1 O^-1 p_cal[b]`` for b = 0, 1.

    Raises:
        IllConditionedBasis: if ``cond(O)`` exceeds ``threshold``.
    """
    n_max = cal.n_max if n_max is None else n_max
    if n_max != cal.n_max:
        raise DomainError(f"calibration set has {cal.n_max} states, expected {n_max}")
    cond = condition_number(cal.overlap)
    if not cond <= threshold:
        raise IllConditionedBasis(cond, threshold)
    t = transition_matrix(cal.prep_exposure, n_max)
    response = np.linalg.solve(t, np.linalg.solve(cal.overlap, np.eye(n_max)))
    e1 = response @ cal.p_cal[1]
    e0 = 1.0 - e1
    p1 = cal.p_cal[1]
    if cal.shots:
        var_p1 = p1 * (1 - p1) / cal.shots
        sigma = np.sqrt((response**2) @ var_p1)
    else:
        var_p1 = np.full(n_max, np.nan)
        sigma = var_p1.copy()
    return EmissionEstimate(EmissionPOVM(e0, e1), sigma, response, var_p1, cal.bit)


@dataclass(frozen=True)
class RateEstimate:
    eps_g: float
    eps_e: float
    sigma_g: float
    sigma_e: float


def extract_rates(est: EmissionEstimate, k: int | None = None) -> RateEstimate:
    """Average the POVM diagonal over the two parity classes of bit ``k``.

    ``eps_g`` is the mean of P(read 1) over states whose bit ``k`` is 0,
    ``eps_e`` the mean of P(read 0) over states whose bit is 1. The standard
    errors propagate the per-state binomial sampling variance through the
    linear recovery map.
    """
    k = est.bit if k is None else k
    n_max = est.povm.e1.size
    odd = bit_of(k, np.arange(n_max)).astype(bool)
    if odd.all() or not odd.any():
        raise DomainError(f"bit {k} has an empty parity class in dimension {n_max}")
    w_g = (~odd) / (~odd).sum()
    w_e = odd / odd.sum()
    eps_g = float(w_g @ est.povm.e1)
    eps_e = float(w_e @ est.povm.e0)
    # eps_e = 1 - w_e @ e1, so it shares the sensitivity of w_e @ e1
    sigma_g = float(np.sqrt(((w_g @ est.response) ** 2) @ est.var_p1))
    sigma_e = float(np.sqrt(((w_e @ est.response) ** 2) @ est.var_p1))
    return RateEstimate(eps_g, eps_e, sigma_g, sigma_e)


def calibration_probabilities(params: DetectorParams, k: int, overlap, prep_exposure=None):
    """Exact single-bit outcome probabilities ``O @ T @ e_b``, shape (2, n_basis)."""
    n_max = params.n_max
    prep = params.kappa_t[0] if prep_exposure is None else prep_exposure
    povm = emission_povm(k, params.eps_g[k], params.eps_e[k], n_max)
    t = transition_matrix(prep, n_max)
    p1 = np.asarray(overlap) @ (t @ povm.e1)
    p1 = np.clip(p1, 0.0, 1.0)
    return np.vstack([1.0 - p1, p1])


def synthesize_calibration(params: DetectorParams, k: int, overlap=None, prep_exposure=None,
                           shots: int | None = None, rng=None) -> CalibrationSet:
    """Calibration data for bit ``k`` predicted by the model.

    Without ``shots`` the frequencies are exact; with ``shots`` each basis
    state's count of ones is a binomial draw.
    """
    n_max = params.n_max
    overlap = fock_basis(n_max) if overlap is None else np.asarray(overlap, dtype=float)
    prep = params.kappa_t[0] if prep_exposure is None else prep_exposure
    p = calibration_probabilities(params, k, overlap, prep)
    if shots is not None:
        rng = np.random.default_rng(rng)
        ones = rng.binomial(shots, p[1])
        p = np.vstack([(shots - ones) / shots, ones / shots])
    return CalibrationSet(overlap, p, prep, k, shots)


def calibration_from_shots(records, n_max, prep_exposure=0.0040, overlap=None):
    """Build one :class:`CalibrationSet` per bit from single-bit shot records.

    ``records`` yields dicts with keys ``state`` (basis index), ``bit`` and
    ``outcome``. All states must have been measured equally often per bit.
    """
    counts: dict[int, np.ndarray] = {}
    for rec in records:
        k, j, b = int(rec["bit"]), int(rec["state"]), int(rec["outcome"])
        if not 0 <= j < n_max or b not in (0, 1):
            raise DomainError(f"bad calibration record {rec}")
        counts.setdefault(k, np.zeros((2, n_max), dtype=np.int64))[b, j] += 1
    overlap = fock_basis(n_max) if overlap is None else overlap
    sets = []
    for k in sorted(counts):
        c = counts[k]
        per_state = c.sum(axis=0)
        if per_state.min() == 0:
            raise DomainError(f"bit {k}: some basis states were never measured")
        shots = int(per_state.min()) if per_state.min() == per_state.max() else None
        sets.append(CalibrationSet(overlap, c / per_state, prep_exposure, k, shots))
    return sets


def calibrate(sets, kappa_t, kappa_t_reset, threshold: float = COND_THRESHOLD):
    """Assemble :class:`DetectorParams` from one calibration set per bit.

    Decay exposures are not calibrated here; they come from an independent
    lifetime measurement and are passed in.
    """
    sets = sorted(sets, key=lambda s: s.bit)
    if [s.bit for s in sets] != list(range(len(sets))):
        raise DomainError("need exactly one calibration set per bit 0..B-1")
    rates = [extract_rates(recover_emission(s, threshold=threshold)) for s in sets]
    params = DetectorParams(
        kappa_t, kappa_t_reset,
        [min(max(r.eps_g, 0.0), 1 - 1e-12) for r in rates],
        [min(max(r.eps_e, 0.0), 1 - 1e-12) for r in rates],
    )
    return params, rates

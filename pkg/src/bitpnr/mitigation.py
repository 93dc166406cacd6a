"""Single-mode error mitigation and detector diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np
import scipy.linalg as la

from .exceptions import DomainError, IllConditioned
from .fock import Label, ProbVector
from .hmm import ConfusionMatrix, DetectorParams, confusion_matrix

#: Largest condition number accepted before inversion is refused.
COND_THRESHOLD = 1e6

# double-precision SVD stops resolving the smallest singular value near 1/eps
PRECISE_ABOVE = 1e10


def condition_number(c) -> float:
    """Ratio of largest to smallest singular value."""
    c = c.c if isinstance(c, ConfusionMatrix) else np.asarray(c, dtype=float)
    s = la.svdvals(c)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


@dataclass(frozen=True)
class Inverse:
    matrix: np.ndarray
    cond: float
    residual: float


def invert_confusion(cm, threshold: float = COND_THRESHOLD) -> Inverse:
    """Invert a confusion matrix after checking its conditioning.

    Raises:
        IllConditioned: if the condition number exceeds ``threshold``.
    """
    c = cm.c if isinstance(cm, ConfusionMatrix) else np.asarray(cm, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DomainError(f"confusion matrix must be square, got shape {c.shape}")
    cond = condition_number(c)
    if not cond <= threshold:
        raise IllConditioned(cond, threshold)
    lu = la.lu_factor(c)
    inv = la.lu_solve(lu, np.eye(c.shape[0]))
    residual = float(np.abs(c @ inv - np.eye(c.shape[0])).max())
    return Inverse(inv, cond, residual)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-and-threshold: find the largest ``rho`` with
    ``u[rho] + (1 - sum(u[:rho+1])) / (rho + 1) > 0`` for ``u`` sorted
    in decreasing order, then shift and clip.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u + (1.0 - css) / ks > 0)[0][-1]
    theta = (1.0 - css[rho]) / (rho + 1)
    return np.maximum(v + theta, 0.0)


@dataclass(frozen=True)
class MitigationResult:
    mitigated: ProbVector
    raw: ProbVector
    residual_norm: float


def mitigate(c_inv, p_meas) -> MitigationResult:
    """Apply the inverse confusion matrix, then project onto the simplex.

    ``residual_norm`` is the Euclidean distance between the raw (possibly
    negative) estimate and its projection.
    """
    inv = c_inv.matrix if isinstance(c_inv, Inverse) else np.asarray(c_inv, dtype=float)
    p = p_meas.p if isinstance(p_meas, ProbVector) else np.asarray(p_meas, dtype=float)
    if inv.shape != (p.size, p.size):
        raise DomainError(f"inverse of shape {inv.shape} cannot act on length {p.size}")
    raw = inv @ p
    # inverse of a column-stochastic matrix preserves the sum up to round-off
    raw = raw + (1.0 - raw.sum()) / raw.size
    projected = project_simplex(raw)
    return MitigationResult(
        ProbVector(projected / projected.sum(), Label.MITIGATED),
        ProbVector(raw, Label.MITIGATED, unprojected=True),
        float(np.linalg.norm(raw - projected)),
    )


def extracted_bits(cm) -> float:
    """Average information per shot with a uniform prior over inputs.

    This is ``n_bits`` minus the mean entropy of the posterior over the input
    Fock state given the outcome.
    """
    c = cm.c if isinstance(cm, ConfusionMatrix) else np.asarray(cm, dtype=float)
    n = c.shape[0]
    n_bits = np.log2(n)
    row = c.sum(axis=1, keepdims=True)
    nz = c > 0
    posterior = np.divide(c, row, out=np.ones_like(c), where=row > 0)
    terms = np.zeros_like(c)
    terms[nz] = c[nz] * np.log2(posterior[nz])
    return float(n_bits + terms.sum() / n)


def _confusion_mp(params: DetectorParams):
    """Confusion matrix in mpmath arithmetic, same recursion as the float path."""
    n_max = params.n_max
    n_bits = params.n_bits

    def trans(x):
        x = mpmath.mpf(x)
        keep = mpmath.exp(-x)
        lose = -mpmath.expm1(-x)
        return mpmath.matrix(
            [[mpmath.binomial(i, j) * lose ** (i - j) * keep**j if j <= i else 0 for j in range(n_max)]
             for i in range(n_max)]
        )

    def povm(k, b):
        eg, ee = mpmath.mpf(params.eps_g[k]), mpmath.mpf(params.eps_e[k])
        return [(1 - ee if b else ee) if (i >> k) & 1 else (eg if b else 1 - eg) for i in range(n_max)]

    cache = {}

    def t_of(x):
        if x not in cache:
            cache[x] = trans(x)
        return cache[x]

    c = mpmath.matrix(n_max, n_max)
    for i in range(n_max):
        bits = [(i >> k) & 1 for k in range(n_bits)]
        beta = mpmath.matrix(povm(n_bits - 1, bits[-1]))
        for k in range(n_bits - 1, 0, -1):
            tb = t_of(params.exposure(k, bits[k - 1])) * beta
            e = povm(k - 1, bits[k - 1])
            beta = mpmath.matrix([e[r] * tb[r] for r in range(n_max)])
        row = t_of(params.kappa_t[0]) * beta
        for j in range(n_max):
            c[i, j] = row[j]
    return c


def precise_condition_number(params: DetectorParams, dps: int = 50) -> float:
    """Condition number of the model confusion matrix in extended precision."""
    with mpmath.workdps(dps):
        s = mpmath.svd_r(_confusion_mp(params), compute_uv=False)
        values = [s[r] for r in range(len(s))]
        return float(max(values) / min(values))


def model_condition_number(params: DetectorParams) -> float:
    """Condition number of ``confusion_matrix(params)``, accurate beyond 1e16."""
    cond = condition_number(confusion_matrix(params))
    if cond > PRECISE_ABOVE:
        cond = precise_condition_number(params)
    return cond


def condition_sweep(exposures, eps_g=0.01, eps_e=0.03, n_bits=4):
    """Condition number of C with every decay exposure set to each value.

    The reset exposure is swept together with the per-bit exposures.
    Returns an ``(len(exposures), 2)`` array of (exposure, cond).
    """
    exposures = np.asarray(exposures, dtype=float)
    if np.any(np.diff(exposures) < 0):
        raise DomainError("exposures must be sorted ascending")
    out = np.empty((exposures.size, 2))
    for r, x in enumerate(exposures):
        params = DetectorParams.uniform(n_bits, x, x, eps_g, eps_e)
        out[r] = x, model_condition_number(params)
    return out

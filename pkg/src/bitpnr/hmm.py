"""Hidden Markov model of the bitwise photon-number measurement.

Photon loss between bit readouts is the hidden transition; each readout of
the ancilla is an emission whose reliability is set by ``eps_g`` (reading e
when the ancilla should be g) and ``eps_e`` (reading g when it should be e).
All operators are diagonal in the Fock basis, so everything here acts on
populations only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .exceptions import DomainError
from .fock import Label, ProbVector, bit_decompose, bit_of, n_bits_for

COLUMN_TOL = 1e-10


@dataclass(frozen=True)
class DetectorParams:
    """Per-bit error parameters of a ``n_bits``-bit detector.

    Attributes:
        kappa_t: dimensionless decay exposure preceding each bit readout.
        kappa_t_reset: extra exposure added before bit ``k`` whenever bit
            ``k - 1`` read 1 and the ancilla had to be reset.
        eps_g: P(read e | ancilla should be g), per bit.
        eps_e: P(read g | ancilla should be e), per bit.
    """

    kappa_t: tuple
    kappa_t_reset: float
    eps_g: tuple
    eps_e: tuple

    def __post_init__(self):
        kt = tuple(float(x) for x in np.atleast_1d(self.kappa_t))
        eg = tuple(float(x) for x in np.atleast_1d(self.eps_g))
        ee = tuple(float(x) for x in np.atleast_1d(self.eps_e))
        if len(kt) < 1:
            raise DomainError("detector needs at least one bit")
        if not len(kt) == len(eg) == len(ee):
            raise DomainError(
                f"per-bit arrays disagree in length: kappa_t={len(kt)}, eps_g={len(eg)}, eps_e={len(ee)}"
            )
        if min(kt) < 0 or self.kappa_t_reset < 0:
            raise DomainError("decay exposures must be non-negative")
        for name, rates in (("eps_g", eg), ("eps_e", ee)):
            if any(not 0 <= r < 1 for r in rates):
                raise DomainError(f"{name} entries must lie in [0, 1): {rates}")
        object.__setattr__(self, "kappa_t", kt)
        object.__setattr__(self, "eps_g", eg)
        object.__setattr__(self, "eps_e", ee)
        object.__setattr__(self, "kappa_t_reset", float(self.kappa_t_reset))

    @property
    def n_bits(self) -> int:
        return len(self.kappa_t)

    @property
    def n_max(self) -> int:
        return 2**self.n_bits

    def exposure(self, k: int, previous_bit: int) -> float:
        """Decay exposure of the transition preceding bit ``k``."""
        extra = self.kappa_t_reset if k > 0 and previous_bit else 0.0
        return self.kappa_t[k] + extra

    def replace(self, **changes) -> "DetectorParams":
        d = self.to_dict()
        d.pop("B")
        d.update(changes)
        return DetectorParams(**d)

    def to_dict(self) -> dict:
        return {
            "B": self.n_bits,
            "kappa_t": list(self.kappa_t),
            "kappa_t_reset": self.kappa_t_reset,
            "eps_g": list(self.eps_g),
            "eps_e": list(self.eps_e),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorParams":
        missing = [k for k in ("B", "kappa_t", "kappa_t_reset", "eps_g", "eps_e") if k not in d]
        if missing:
            raise DomainError(f"missing field(s): {', '.join(missing)}")
        params = cls(d["kappa_t"], d["kappa_t_reset"], d["eps_g"], d["eps_e"])
        if int(d["B"]) != params.n_bits:
            raise DomainError(f"field B={d['B']} but kappa_t has {params.n_bits} entries")
        return params

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DetectorParams":
        return cls.from_dict(json.loads(text))

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @classmethod
    def uniform(cls, n_bits, kappa_t=0.0, kappa_t_reset=0.0, eps_g=0.0, eps_e=0.0):
        return cls((kappa_t,) * n_bits, kappa_t_reset, (eps_g,) * n_bits, (eps_e,) * n_bits)


#: Cavity exposure before bit 0 for the two preparation methods.
PREP_EXPOSURE = {"fock": 0.0040, "coherent": 0.0032}


def table1_params(prep: str = "fock") -> DetectorParams:
    """Calibrated four-bit parameters of the reference device."""
    return DetectorParams(
        kappa_t=(PREP_EXPOSURE[prep], 0.0034, 0.0034, 0.0034),
        kappa_t_reset=0.0046,
        eps_g=(0.019, 0.014, 0.011, 0.013),
        eps_e=(0.029, 0.026, 0.035, 0.033),
    )


def transition_matrix(kappa_t: float, n_max: int) -> np.ndarray:
    """Pure photon-loss transition probabilities over exposure ``kappa_t``.

    ``t[i, j]`` is the probability that ``i`` photons decay to ``j``; each photon
    survives independently with probability ``exp(-kappa_t)``. Rows sum to one.
    """
    if kappa_t < 0:
        raise DomainError(f"negative decay exposure {kappa_t}")
    if kappa_t == 0:
        return np.eye(n_max)
    i = np.arange(n_max)[:, None]
    j = np.arange(n_max)[None, :]
    # binomial form C(i,j) (1-e^-x)^(i-j) e^-jx equals C(i,j) (e^x-1)^(i-j) e^-ix
    t = stats.binom.pmf(j, i, np.exp(-kappa_t))
    t[j > i] = 0.0
    return t


class EmissionPOVM(NamedTuple):
    """Diagonals of the two POVM elements of one bit readout."""

    e0: np.ndarray
    e1: np.ndarray

    def select(self, b):
        return self.e1 if b else self.e0


def emission_povm(k: int, eps_g: float, eps_e: float, n_max: int) -> EmissionPOVM:
    """Readout outcome probabilities for bit ``k`` given ``i`` photons."""
    if not (0 <= eps_g < 1 and 0 <= eps_e < 1):
        raise DomainError(f"readout error rates must lie in [0,1): {eps_g}, {eps_e}")
    odd = bit_of(k, np.arange(n_max)).astype(bool)
    e1 = np.where(odd, 1.0 - eps_e, eps_g)
    e0 = np.where(odd, eps_e, 1.0 - eps_g)
    return EmissionPOVM(e0, e1)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Column-stochastic detector response, ``c[i, j] = P(outcome i | Fock j)``."""

    c: np.ndarray
    params_hash: str = ""

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DomainError(f"confusion matrix must be square, got shape {c.shape}")
        dev = np.abs(c.sum(axis=0) - 1).max()
        if dev > COLUMN_TOL:
            raise DomainError(f"columns deviate from unit sum by {dev:.3e}")
        if c.min() < -COLUMN_TOL or c.max() > 1 + COLUMN_TOL:
            raise DomainError("confusion matrix entries must lie in [0, 1]")
        c.flags.writeable = False
        object.__setattr__(self, "c", c)

    @property
    def n_max(self) -> int:
        return self.c.shape[0]

    def mean_infidelity(self) -> float:
        """Average over input Fock states of ``1 - C[j, j]``.

        For one-hot inputs this equals the mean total variation distance
        between the measured histogram and the ideal one.
        """
        return float(np.mean(1.0 - np.diag(self.c)))

    def write_csv(self, path, sidecar=True):
        np.savetxt(path, self.c, delimiter=",", fmt="%.17g")
        if sidecar:
            with open(sidecar_path(path), "w") as fh:
                json.dump({"params_hash": self.params_hash, "n_max": self.n_max}, fh)

    @classmethod
    def read_csv(cls, path) -> "ConfusionMatrix":
        c = np.loadtxt(path, delimiter=",", ndmin=2)
        params_hash = ""
        try:
            with open(sidecar_path(path)) as fh:
                params_hash = json.load(fh).get("params_hash", "")
        except FileNotFoundError:
            pass
        return cls(c, params_hash)


def sidecar_path(path):
    path = str(path)
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + ".json"


def confusion_matrix(params: DetectorParams, n_max: int | None = None) -> ConfusionMatrix:
    """Assemble the detector confusion matrix by summing over hidden decay paths.

    Each row (fixed outcome bitstring) is obtained with a backward recursion
    over the bit readouts, so the cost is ``O(n_bits * n_max**2)`` per outcome
    instead of enumerating ``n_max**n_bits`` paths. The reset exposure before
    bit ``k`` is conditioned on the outcome of bit ``k - 1``.
    """
    n_bits = params.n_bits
    if n_max is None:
        n_max = params.n_max
    if n_bits_for(n_max) != n_bits:
        raise DomainError(f"dimension {n_max} does not match a {n_bits}-bit detector")

    povms = [emission_povm(k, params.eps_g[k], params.eps_e[k], n_max) for k in range(n_bits)]
    t_cache: dict[float, np.ndarray] = {}

    def trans(x):
        if x not in t_cache:
            t_cache[x] = transition_matrix(x, n_max)
        return t_cache[x]

    c = np.empty((n_max, n_max))
    for i in range(n_max):
        bits = bit_decompose(i, n_bits)
        beta = povms[-1].select(bits[-1]).copy()
        for k in range(n_bits - 1, 0, -1):
            beta = povms[k - 1].select(bits[k - 1]) * (trans(params.exposure(k, bits[k - 1])) @ beta)
        c[i] = trans(params.kappa_t[0]) @ beta
    return ConfusionMatrix(c, params.fingerprint())


def apply_confusion(cm: ConfusionMatrix, p_ideal) -> ProbVector:
    """Measured populations expected for ideal populations ``p_ideal``."""
    p = p_ideal.p if isinstance(p_ideal, ProbVector) else np.asarray(p_ideal, dtype=float)
    if p.shape != (cm.n_max,):
        raise DomainError(f"distribution of length {p.size} vs {cm.n_max}x{cm.n_max} matrix")
    out = cm.c @ p
    return ProbVector(np.clip(out, 0.0, None) / out.sum(), Label.MEASURED)

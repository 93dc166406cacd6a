import itertools
import math

import numpy as np
import pytest

from bitpnr import DetectorParams, table1_params


def literal_transition(x, i, j):
    """Decay probability written exactly as the closed form, no library pmf."""
    if j > i:
        return 0.0
    return math.comb(i, j) * (math.exp(x) - 1.0) ** (i - j) * math.exp(-i * x)


def brute_force_confusion(params: DetectorParams):
    """Sum over every hidden photon-number path explicitly (n_max**n_bits paths)."""
    n_bits = params.n_bits
    n = 2**n_bits
    c = np.zeros((n, n))
    for i in range(n):
        bits = [(i >> k) & 1 for k in range(n_bits)]
        exposures = [params.kappa_t[0]] + [
            params.kappa_t[k] + (params.kappa_t_reset if bits[k - 1] else 0.0) for k in range(1, n_bits)
        ]
        for j in range(n):
            total = 0.0
            for path in itertools.product(range(n), repeat=n_bits):
                w = 1.0
                prev = j
                for k, s in enumerate(path):
                    w *= literal_transition(exposures[k], prev, s)
                    if w == 0.0:
                        break
                    true_bit = (s >> k) & 1
                    if true_bit:
                        w *= (1 - params.eps_e[k]) if bits[k] else params.eps_e[k]
                    else:
                        w *= params.eps_g[k] if bits[k] else (1 - params.eps_g[k])
                    prev = s
                total += w
            c[i, j] = total
    return c


def random_params(rng, n_bits, max_kt=0.3, max_eps=0.1):
    return DetectorParams(
        rng.uniform(0, max_kt, n_bits),
        rng.uniform(0, max_kt),
        rng.uniform(0, max_eps, n_bits),
        rng.uniform(0, max_eps, n_bits),
    )


@pytest.fixture
def table1():
    return table1_params()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

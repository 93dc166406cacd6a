import json

import numpy as np
import pytest

from bitpnr import (
    DetectorParams,
    DomainError,
    ResetKind,
    ResetModel,
    ShotRecord,
    coherent_distribution,
    confusion_matrix,
    fock_state,
    simulate_ensemble,
    simulate_shot,
    tvd,
)
from bitpnr.simulator import empirical_confusion


def test_error_free_shot_is_deterministic():
    params = DetectorParams.uniform(4)
    reset = ResetModel.matching(params)
    rng = np.random.default_rng(0)
    for _ in range(50):
        rec = simulate_shot(params, reset, 13, rng)
        assert rec.bits == [1, 0, 1, 1]
        assert rec.outcome == 13
        assert rec.hidden_trajectory == [13] * 5


def test_shot_out_of_range():
    with pytest.raises(DomainError):
        simulate_shot(DetectorParams.uniform(4), ResetModel(), 16, 0)


def test_shot_record_invariants(table1):
    reset = ResetModel.matching(table1, ResetKind.GEOMETRIC)
    res = simulate_ensemble(table1, reset, np.full(16, 1 / 16), 5000, seed=3, keep_shots=True)
    for rec in res.records():
        assert rec.outcome == sum(b << k for k, b in enumerate(rec.bits))
        assert all(a >= b for a, b in zip(rec.hidden_trajectory, rec.hidden_trajectory[1:]))
        assert rec.hidden_trajectory[0] == rec.true_initial
        assert all((a > 0) == (b == 1) for a, b in zip(rec.reset_attempts, rec.bits))


def test_shot_record_json_round_trip():
    rec = ShotRecord(9, [1, 0, 0, 1], 9, [2, 0, 0, 3], [9, 9, 9, 8, 8])
    obj = json.loads(rec.to_json())
    assert set(obj) == {"true_initial", "bits", "outcome", "reset_attempts", "hidden_trajectory"}
    assert ShotRecord.from_json(rec.to_json()) == rec


def test_error_free_coherent_histogram_matches_input():
    params = DetectorParams.uniform(4)
    p, _ = coherent_distribution(1.0, 16)
    shots = 100_000
    res = simulate_ensemble(params, None, p, shots, seed=11)
    # expected tvd of a multinomial sample is ~ sum sqrt(p(1-p)/(2 pi shots))
    bound = 5 * np.sum(np.sqrt(p.p * (1 - p.p) / shots)) / 2
    assert tvd(res.histogram, p) < bound
    assert res.histogram.p.sum() == 1.0


def test_histogram_is_counts_over_shots(table1):
    res = simulate_ensemble(table1, None, fock_state(5, 16), 1234, seed=1)
    assert res.counts.sum() == 1234
    assert np.array_equal(res.histogram.p, res.counts / 1234)


def test_fock15_raw_fidelity(table1):
    res = simulate_ensemble(table1, None, fock_state(15, 16), 100_000, seed=15)
    assert res.histogram.p[15] >= 0.80


def test_fock_basis_error_grows_with_n(table1):
    errs = []
    for n in range(16):
        res = simulate_ensemble(table1, None, fock_state(n, 16), 20_000, seed=100 + n)
        errs.append(tvd(res.histogram, fock_state(n, 16)))
    # qualitative upward trend: linear fit slope positive, top quartile worse than bottom
    slope = np.polyfit(np.arange(16), errs, 1)[0]
    assert slope > 0
    assert np.mean(errs[12:]) > 2 * np.mean(errs[:4])


def test_empirical_matches_analytic_small(table1):
    shots = 50_000
    emp = empirical_confusion(table1, None, shots, seed=2)
    c = confusion_matrix(table1).c
    mask = c > 1e-3
    z = np.abs(emp - c)[mask] / np.sqrt(c * (1 - c) / shots)[mask]
    assert z.max() < 5


def test_same_seed_same_output(table1):
    a = simulate_ensemble(table1, None, np.full(16, 1 / 16), 70_000, seed=9, keep_shots=True)
    b = simulate_ensemble(table1, None, np.full(16, 1 / 16), 70_000, seed=9, keep_shots=True, workers=4)
    c = simulate_ensemble(table1, None, np.full(16, 1 / 16), 70_000, seed=10)
    assert np.array_equal(a.counts, b.counts)
    for key in a.archive:
        assert np.array_equal(a.archive[key], b.archive[key])
    assert not np.array_equal(a.counts, c.counts)


def test_empty_distribution_rejected(table1):
    with pytest.raises(DomainError):
        simulate_ensemble(table1, None, np.zeros(16), 10, seed=0)
    with pytest.raises(DomainError):
        simulate_ensemble(table1, None, fock_state(0, 16), 0, seed=0)


def test_reset_model_means():
    geo = ResetModel(ResetKind.GEOMETRIC, 2.05)
    draws = geo.sample(np.random.default_rng(0), np.zeros(400_000, dtype=int))[0]
    assert draws.mean() == pytest.approx(2.05, abs=0.01)
    pmf = (0.649, 0.2, 0.1, 0.051)
    emp = ResetModel(ResetKind.EMPIRICAL, 1.0, empirical_pmf=pmf)
    assert emp.mean_attempts == pytest.approx(np.dot([1, 2, 3, 4], pmf), abs=1e-6)
    const = ResetModel.matching(DetectorParams.uniform(2, 0.01, 0.0046))
    assert const.mean_exposure == pytest.approx(0.0046, abs=1e-15)


def test_geometric_tail_vs_reported():
    # reported data has P(N > 1) = 0.351; a geometric law with the same mean cannot match it
    geo = ResetModel(ResetKind.GEOMETRIC, 2.05)
    assert geo.p_more_than(1) == pytest.approx(1 - 1 / 2.05)
    assert geo.p_more_than(1) == pytest.approx(0.512, abs=1e-3)
    assert abs(geo.p_more_than(1) - 0.351) > 0.1


def test_photon_dependent_reset_hook():
    model = ResetModel(ResetKind.CONSTANT, 2.0, 0.001, slope_per_photon=0.1)
    _, exposure = model.sample(None, np.array([0, 10]))
    assert exposure.tolist() == pytest.approx([0.002, 0.003])


def test_geometric_reset_close_to_constant(table1):
    # same mean exposure, so the histogram shifts only at second order
    p = np.full(16, 1 / 16)
    a = simulate_ensemble(table1, ResetModel.matching(table1), p, 200_000, seed=4)
    b = simulate_ensemble(table1, ResetModel.matching(table1, ResetKind.GEOMETRIC), p, 200_000, seed=4)
    assert tvd(a.histogram, b.histogram) < 0.01

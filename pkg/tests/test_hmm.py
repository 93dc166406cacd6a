import json

import numpy as np
import pytest

from bitpnr import (
    ConfusionMatrix,
    DetectorParams,
    DomainError,
    apply_confusion,
    confusion_matrix,
    emission_povm,
    fock_state,
    transition_matrix,
)
from conftest import brute_force_confusion, literal_transition, random_params


def test_transition_zero_exposure_is_identity():
    assert np.array_equal(transition_matrix(0.0, 16), np.eye(16))


def test_transition_examples():
    assert transition_matrix(0.0034, 16)[1, 1] == pytest.approx(np.exp(-0.0034), rel=1e-14)
    assert transition_matrix(0.0034, 16)[1, 1] == pytest.approx(0.996606, abs=1e-6)
    assert transition_matrix(0.0040, 16)[1, 0] == pytest.approx(0.003992, abs=1e-6)


def test_transition_matches_closed_form():
    for x in (1e-6, 0.0034, 0.3, 1.0):
        t = transition_matrix(x, 16)
        oracle = np.array([[literal_transition(x, i, j) for j in range(16)] for i in range(16)])
        np.testing.assert_allclose(t, oracle, rtol=1e-9, atol=1e-300)


def test_transition_small_exposure_accuracy():
    # naive e^x - 1 loses digits here; the single-loss term must stay ~ i*x
    x = 1e-12
    assert transition_matrix(x, 4)[3, 2] == pytest.approx(3 * x, rel=1e-9)


def test_transition_negative_exposure():
    with pytest.raises(DomainError):
        transition_matrix(-1e-3, 4)


def test_transition_rows_and_decay_only():
    rng = np.random.default_rng(1)
    for x in rng.uniform(0, 1, 30):
        t = transition_matrix(x, 16)
        np.testing.assert_allclose(t.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.triu(t, 1) == 0)
        assert t.min() >= 0 and t.max() <= 1


def test_transition_semigroup():
    rng = np.random.default_rng(2)
    for a, b in rng.uniform(0, 0.2, (20, 2)):
        np.testing.assert_allclose(
            transition_matrix(a, 16) @ transition_matrix(b, 16), transition_matrix(a + b, 16), atol=1e-10
        )


def test_emission_examples():
    e = emission_povm(0, 0, 0, 4)
    assert e.e0.tolist() == [1, 0, 1, 0]
    assert e.e1.tolist() == [0, 1, 0, 1]
    assert emission_povm(0, 0.019, 0.029, 16).e0[2] == pytest.approx(0.981)
    assert emission_povm(1, 0.014, 0.026, 16).e1[2] == pytest.approx(0.974)


def test_emission_complementary():
    e = emission_povm(2, 0.011, 0.035, 16)
    assert np.all(e.e0 + e.e1 == 1.0)


def test_error_free_detector_is_identity():
    cm = confusion_matrix(DetectorParams.uniform(4))
    assert np.array_equal(cm.c, np.eye(16))


@pytest.mark.parametrize("n_bits, seed", [(2, 0), (2, 1), (3, 2), (3, 3)])
def test_forward_matches_brute_force(n_bits, seed):
    params = random_params(np.random.default_rng(seed), n_bits)
    np.testing.assert_allclose(confusion_matrix(params).c, brute_force_confusion(params), atol=1e-12)


def test_columns_stochastic(table1):
    rng = np.random.default_rng(5)
    for params in [table1] + [random_params(rng, 4, 1.0, 0.5) for _ in range(10)]:
        c = confusion_matrix(params).c
        np.testing.assert_allclose(c.sum(axis=0), 1.0, atol=1e-10)


def test_table1_mean_error(table1):
    # abstract quotes 13.5 % for measured Fock data; the model lands within a few points
    assert confusion_matrix(table1).mean_infidelity() == pytest.approx(0.135, abs=0.03)


def test_decay_syndrome_eight_reads_zero():
    params = DetectorParams((0.0, 0.0, 0.0, 0.2), 0.0, (0,) * 4, (0,) * 4)
    c = confusion_matrix(params).c
    # |8> loses a photon before bit 3: 7 has b3 = 0, bits 0-2 already read 000
    assert c[0, 8] == pytest.approx(1 - np.exp(-8 * 0.2), rel=1e-12)
    assert c[0, 8] > 0.5


def test_no_photon_gain_syndromes():
    # with perfect readout an outcome needs a decay path; exhaustive at B = 2
    params = DetectorParams((0.3, 0.2), 0.1, (0, 0), (0, 0))
    c = confusion_matrix(params).c
    n = 4
    for j in range(n):
        for i in range(n):
            b0, b1 = i & 1, (i >> 1) & 1
            # s1 <= j with bit0(s1) = b0, then s2 <= s1 with bit1(s2) = b1
            reachable = any(
                (s1 & 1) == b0 and any(((s2 >> 1) & 1) == b1 for s2 in range(s1 + 1)) for s1 in range(j + 1)
            )
            if not reachable:
                assert c[i, j] == 0.0


def test_dimension_must_match():
    with pytest.raises(DomainError):
        confusion_matrix(DetectorParams.uniform(4), 8)
    with pytest.raises(DomainError):
        confusion_matrix(DetectorParams.uniform(2), 6)


def test_apply_confusion(table1):
    cm = confusion_matrix(table1)
    assert np.array_equal(apply_confusion(ConfusionMatrix(np.eye(16)), fock_state(3, 16)).p, fock_state(3, 16).p)
    np.testing.assert_allclose(apply_confusion(cm, fock_state(0, 16)).p, cm.c[:, 0], atol=1e-15)
    uniform = np.full(16, 1 / 16)
    np.testing.assert_allclose(apply_confusion(cm, uniform).p, cm.c.sum(axis=1) / 16, atol=1e-15)
    with pytest.raises(DomainError):
        apply_confusion(cm, np.ones(8) / 8)


def test_params_validation():
    with pytest.raises(DomainError):
        DetectorParams((0.1, 0.1), 0.0, (0.1,), (0.1, 0.1))
    with pytest.raises(DomainError):
        DetectorParams((0.1,), 0.0, (1.0,), (0.1,))
    with pytest.raises(DomainError):
        DetectorParams((-0.1,), 0.0, (0.0,), (0.1,))


def test_params_json_schema(table1):
    d = json.loads(table1.to_json())
    assert set(d) == {"B", "kappa_t", "kappa_t_reset", "eps_g", "eps_e"}
    assert d["B"] == 4
    assert DetectorParams.from_json(table1.to_json()) == table1
    with pytest.raises(DomainError, match="B=3"):
        DetectorParams.from_dict({**d, "B": 3})
    with pytest.raises(DomainError, match="missing"):
        DetectorParams.from_dict({"B": 4})


def test_confusion_csv_round_trip(tmp_path, table1):
    cm = confusion_matrix(table1)
    path = tmp_path / "c.csv"
    cm.write_csv(path)
    back = ConfusionMatrix.read_csv(path)
    assert np.array_equal(back.c, cm.c)
    assert back.params_hash == table1.fingerprint() == cm.params_hash
    assert json.loads((tmp_path / "c.json").read_text())["params_hash"] == cm.params_hash


def test_fingerprint_changes_with_params(table1):
    assert table1.fingerprint() != table1.replace(kappa_t_reset=0.005).fingerprint()

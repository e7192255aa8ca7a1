import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whittle_lab import BanditModel, validate
from whittle_lab.generators import (GenSpec, benchmark_model, gen_levy_matrix, gen_rand_monotone,
                                    gen_structured, generate, monotone_range, restart_matrix)
from whittle_lab.monotone import is_stochastically_monotone, tail_sums


def _valid(P):
    k = P.shape[0]
    return validate(BanditModel(P, P, np.zeros(k), np.zeros(k), 0.5)) == []


def test_p4_small():
    np.testing.assert_allclose(gen_structured("P4", 3, 0.5),
                               [[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]])


def test_p1_identity_at_one():
    np.testing.assert_array_equal(gen_structured("P1", 5, 1.0), np.eye(5))


def test_p2_monotone():
    assert is_stochastically_monotone(gen_structured("P2", 6, 0.6))


def test_band_pattern_interior_rows():
    P = gen_structured("P3", 7, 0.4)
    np.testing.assert_allclose(P[3, 1:6], [0.1, 0.2, 0.4, 0.2, 0.1])
    P = gen_structured("P1", 7, 0.4)
    np.testing.assert_allclose(P[3, 2:5], [0.3, 0.4, 0.3])


def test_boundary_folding_is_mirrored():
    for kind in ("P1", "P2", "P3"):
        P = gen_structured(kind, 6, 0.5)
        np.testing.assert_allclose(P[::-1, ::-1], P, atol=1e-15)
        assert _valid(P)


@pytest.mark.parametrize("kind", ["P1", "P2", "P3", "P4"])
def test_structured_monotone_over_range(kind):
    for k in (5, 25):
        lo, hi = monotone_range(kind, k)
        for p in np.linspace(lo, hi, 10):
            P = gen_structured(kind, k, p, require_monotone=True)
            assert _valid(P)
            assert is_stochastically_monotone(P), (kind, k, p)


def test_require_monotone_rejects():
    with pytest.raises(ValueError):
        gen_structured("P1", 5, 0.2, require_monotone=True)
    with pytest.raises(ValueError):
        gen_structured("P2", 2, 0.5)


def test_rand_monotone_exact_condition():
    for k in (5, 25):
        for seed in range(100):
            P = gen_rand_monotone(k, 5 / k if k > 5 else 1.0, seed)
            assert _valid(P)
            F = tail_sums(P)
            assert np.all(np.diff(F, axis=0) >= -1e-12)


def test_rand_monotone_zero_spread():
    P = gen_rand_monotone(6, 0.0, seed=3)
    np.testing.assert_array_equal(P, np.tile(P[0], (6, 1)))


def test_rand_monotone_deterministic():
    np.testing.assert_array_equal(gen_rand_monotone(8, 0.4, 17), gen_rand_monotone(8, 0.4, 17))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 63 - 1), k=st.integers(2, 12), d=st.floats(0.0, 1.0))
def test_rand_monotone_property(seed, k, d):
    P = gen_rand_monotone(k, d, seed)
    assert _valid(P)
    assert is_stochastically_monotone(P, tol=1e-12)


def test_levy_rows():
    P = gen_levy_matrix(25, seed=4)
    assert np.all(P > 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(P, gen_levy_matrix(25, seed=4))


def test_levy_heavy_tail():
    rng = np.random.default_rng(0)
    levy = gen_levy_matrix(25, seed=1, c=1.0)
    for _ in range(399):
        levy = np.vstack([levy, gen_levy_matrix(25, seed=int(rng.integers(2 ** 32)))])
    uni = rng.random((levy.shape[0], 25))
    uni /= uni.sum(axis=1, keepdims=True)
    assert levy.shape[0] == 10_000
    frac_levy = np.mean(levy.max(axis=1) > 0.5)
    assert frac_levy > 0.1
    assert np.mean(uni.max(axis=1) > 0.5) == 0.0


def test_generate_dispatch_and_validate():
    specs = [GenSpec("P4", 5, 0.3), GenSpec("RandMonotone", 6, 0.5, 2), GenSpec("LevyRandom", 4, 1.0, 9)]
    for spec in specs:
        assert _valid(generate(spec))
    with pytest.raises(ValueError):
        GenSpec("P9", 5, 0.5)


def test_benchmark_model():
    m = benchmark_model(gen_structured("P1", 4, 0.5))
    np.testing.assert_array_equal(m.cost_passive, [0, 1, 4, 9])
    np.testing.assert_array_equal(m.cost_active, 4.5)
    np.testing.assert_array_equal(m.p_active, restart_matrix(4))
    assert m.discount == 0.95

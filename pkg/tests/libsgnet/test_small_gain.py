import math

import numpy as np
import pytest

import libsgnet
from libsgnet import AggregationSpec, FiniteOperator, GainRow, LinfVector, PeriodicOperator


def _random_operators(agg: AggregationSpec, count: int, max_dim: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(3, max_dim + 1))
        yield FiniteOperator.from_matrix(rng.uniform(0.0, 0.3, (n, n)), agg)


def test_iterate_ones_two_cycle():
    op = FiniteOperator.from_matrix([[0.0, 2.0], [0.125, 0.0]])
    est = libsgnet.iterate_ones(op, 4)
    assert est.norms == pytest.approx((2.0, 0.25, 0.5, 0.0625))
    assert est.certified_n == 2
    assert est.upper_bound == pytest.approx(0.5)
    assert est.n_max == 4


@pytest.mark.parametrize("matrix,expected", [
    ([[0.5]], "Satisfied(1)"),
    ([[0.0, 2.0], [0.125, 0.0]], "Satisfied(2)"),
])
def test_small_gain_satisfied(matrix, expected):
    verdict = libsgnet.small_gain_check(FiniteOperator.from_matrix(matrix), 60)
    assert verdict.satisfied
    assert str(verdict) == expected


def test_small_gain_growth():
    op = FiniteOperator.from_matrix([[1.1]])
    verdict = libsgnet.small_gain_check(op, 60)
    assert verdict.status is libsgnet.SmallGainStatus.UNKNOWN
    assert verdict.n is None
    assert verdict.upper_bound == pytest.approx(1.1)
    assert str(verdict).startswith("Unknown(")

    fit = libsgnet.uges_fit(op, LinfVector.ones(), 30)
    assert fit.a == pytest.approx(1.1)
    assert not fit.uges


def test_overflow_guard():
    with pytest.raises(libsgnet.GainOverflowError):
        libsgnet.iterate_ones(FiniteOperator.from_matrix([[10.0]]), 120)
    with pytest.raises(ValueError):
        libsgnet.iterate_ones(FiniteOperator.from_matrix([[0.5]]), 0)


def test_ratio_bound_is_certified():
    op = FiniteOperator.from_matrix([[0.4, 0.3], [0.2, 0.1]])
    est = libsgnet.iterate_ones(op, 20)
    rho = libsgnet.perron_oracle(op.to_matrix())
    assert est.ratio_bound >= rho * (1 - 1e-12)
    assert est.best_bound == pytest.approx(rho, rel=1e-9)
    assert est.best_bound <= est.upper_bound


def test_spectral_bound_matches_perron():
    for op in _random_operators(AggregationSpec.sum(), 200, 10, seed=2):
        est = libsgnet.iterate_ones(op, 60)
        rho = libsgnet.perron_oracle(op.to_matrix())
        assert est.best_bound == pytest.approx(rho, rel=1e-4)
        assert est.best_bound >= rho * (1 - 1e-9)
        if rho < 0.9:
            assert est.certified_n is not None
        if rho > 1:
            assert est.certified_n is None


def test_spectral_bound_matches_cycle_mean():
    for op in _random_operators(AggregationSpec.max(), 200, 8, seed=3):
        est = libsgnet.iterate_ones(op, 120)
        rho = libsgnet.max_cycle_mean_oracle(op.to_matrix())
        assert est.best_bound == pytest.approx(rho, rel=1e-6)
        if rho < 0.9:
            assert est.certified_n is not None
        if rho > 1:
            assert est.certified_n is None


@pytest.mark.parametrize("agg,max_dim", [
    (AggregationSpec.sum(), 10),
    (AggregationSpec.max(), 8),
])
def test_decay_point_chain(agg, max_dim):
    checked = 0
    for op in _random_operators(agg, 60, max_dim, seed=5):
        verdict = libsgnet.small_gain_check(op, 60)
        if not verdict.satisfied:
            continue

        lam = libsgnet.default_lambda(verdict.estimate.best_bound)
        cert = libsgnet.synthesize_decay_point(op, lam)
        assert cert.valid
        assert cert.residual <= 1e-9
        assert cert.interiority > 0

        M, a = libsgnet.uges_constants(cert)
        assert a == lam
        s = cert.s0
        for k in range(1, 21):
            s = libsgnet.apply(op, s)
            assert libsgnet.partial_leq(s, libsgnet.scale(lam ** k * (1 + 1e-9), cert.s0))
            assert libsgnet.sup_norm(s) <= M * a ** k * libsgnet.sup_norm(cert.s0) * (1 + 1e-9)
        checked += 1

    assert checked > 0


def test_decay_point_periodic():
    op = PeriodicOperator((), (GainRow(((-1, 0.2), (1, 0.2))),))
    cert = libsgnet.synthesize_decay_point(op, 0.7)
    assert cert.valid
    assert cert.residual < 0
    assert cert.margin == 1.0
    assert not cert.s0.is_finite

    again = libsgnet.verify_decay_point(op, cert.s0, 0.7)
    assert again.residual == cert.residual
    assert cert.path(2.0) == libsgnet.scale(2.0, cert.s0)


def test_verify_decay_point():
    op = FiniteOperator.from_matrix([[0.5]])
    cert = libsgnet.verify_decay_point(op, LinfVector.finite([1.0]), 0.75)
    assert cert.residual == pytest.approx(-0.25)
    assert cert.interiority == 1.0
    assert cert.valid

    bad = libsgnet.verify_decay_point(op, LinfVector.finite([1.0]), 0.25)
    assert not bad.valid
    with pytest.raises(ValueError):
        libsgnet.uges_constants(bad)

    with pytest.raises(ValueError):
        libsgnet.verify_decay_point(op, LinfVector.finite([1.0]), 1.0)


def test_synthesis_failures():
    with pytest.raises(libsgnet.DivergenceError):
        libsgnet.synthesize_decay_point(FiniteOperator.from_matrix([[1.1]]), 0.5)

    op = FiniteOperator.from_matrix([[0.1, 0.1], [0.1, 0.1]])
    with pytest.raises(libsgnet.NotInteriorError):
        libsgnet.synthesize_decay_point(op, 0.5, LinfVector.finite([1.0, 0.0]))

    periodic = PeriodicOperator((), (GainRow(((1, 0.1),)),))
    with pytest.raises(libsgnet.NotInteriorError):
        libsgnet.synthesize_decay_point(periodic, 0.5, LinfVector.finite([1.0]))


def test_uges_fit_nilpotent():
    op = FiniteOperator.from_matrix([[0.0, 1.0], [0.0, 0.0]])
    fit = libsgnet.uges_fit(op, LinfVector.ones(), 5)
    assert fit.a == 0
    assert fit.M == 1
    assert fit.uges

    with pytest.raises(ValueError):
        libsgnet.uges_fit(op, LinfVector.zeros(), 5)
    with pytest.raises(ValueError):
        libsgnet.uges_fit(op, LinfVector.ones(), 2)


def test_oracles():
    g = [[0.0, 2.0], [0.125, 0.0]]
    assert libsgnet.perron_oracle(g) == pytest.approx(0.5)
    assert libsgnet.max_cycle_mean_oracle(g) == pytest.approx(0.5)
    assert libsgnet.max_cycle_mean_oracle([[0.3, 0.0], [0.0, 0.2]]) == pytest.approx(0.3)
    assert libsgnet.perron_oracle([]) == 0.0

    with pytest.raises(ValueError):
        libsgnet.perron_oracle([[-1.0]])
    with pytest.raises(libsgnet.OracleError):
        libsgnet.max_cycle_mean_oracle(np.full((13, 13), 0.1))
    assert math.isclose(libsgnet.max_cycle_mean_oracle(np.full((5, 5), 0.1)), 0.1)


@pytest.mark.parametrize("matrix,expected", [
    ([[0.0, 0.5], [0.5, 0.0]], 0.5),
    ([[0.3]], 0.3),
    ([[0.0, 1.0], [0.25, 0.0]], 0.5),
    ([[0.4, 0.3], [0.2, 0.1]], (0.5 + math.sqrt(0.33)) / 2),
    # reducible
    ([[0.5, 1.0], [0.0, 0.5]], 0.5),
    ([[0.3, 0.0], [1.0, 0.3]], 0.3),
    ([[0.3, 5.0, 0.0], [0.0, 0.0, 0.4], [0.0, 0.1, 0.0]], 0.3),
    # nilpotent
    ([[0.0, 1.0], [0.0, 0.0]], 0.0),
    ([[0.0, 1.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]], 0.0),
])
def test_perron_oracle(matrix, expected):
    assert abs(libsgnet.perron_oracle(matrix) - expected) <= 1e-12


def test_perron_oracle_norm_growth_fallback(caplog):
    g = [[0.4, 0.3], [0.2, 0.1]]
    assert libsgnet.perron_oracle(g, iters=1) == pytest.approx(0.7)
    assert "falling back to the norm growth" in caplog.text

    with pytest.raises(ValueError):
        libsgnet.perron_oracle(g, iters=0)


@pytest.mark.parametrize("agg,max_dim", [
    (AggregationSpec.sum(), 10),
    (AggregationSpec.max(), 8),
    (AggregationSpec.mixed(2), 8),
])
def test_iterates_are_submultiplicative(agg, max_dim):
    for op in _random_operators(agg, 30, max_dim, seed=7):
        norms = (1.0,) + libsgnet.iterate_ones(op, 20).norms
        for k in range(1, 11):
            for m in range(1, 11):
                assert norms[k + m] <= norms[k] * norms[m] * (1 + 1e-12)


def _constant_row_operators(agg: AggregationSpec, count: int, max_dim: int, seed: int):
    # every row aggregates the all-ones vector to the same value r, so
    # ||G^k 1|| = r^k and r is the spectral radius
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(3, max_dim + 1))
        r = float(rng.uniform(0.5, 1.5))
        g = rng.uniform(0.0, 0.3, (n, n)) + 1e-3
        if agg.kind is libsgnet.AggregationKind.SUM:
            g = g / g.sum(axis=1, keepdims=True) * r
        else:
            g = g / g.max(axis=1, keepdims=True) * r
        yield FiniteOperator.from_matrix(g, agg), r


@pytest.mark.parametrize("agg,rel,oracle", [
    (AggregationSpec.sum(), 1e-4, libsgnet.perron_oracle),
    (AggregationSpec.max(), 1e-6, libsgnet.max_cycle_mean_oracle),
])
def test_upper_bound_at_sixty(agg, rel, oracle):
    for op, r in _constant_row_operators(agg, 40, 8, seed=13):
        est = libsgnet.iterate_ones(op, 60)
        rho = oracle(op.to_matrix())
        assert rho == pytest.approx(r, rel=1e-9)
        assert est.upper_bound == pytest.approx(rho, rel=rel)
        if rho < 1 - 1e-3:
            assert est.certified_n is not None
        if rho > 1:
            assert est.certified_n is None


@pytest.mark.parametrize("agg,max_dim,oracle", [
    (AggregationSpec.sum(), 10, libsgnet.perron_oracle),
    (AggregationSpec.max(), 8, libsgnet.max_cycle_mean_oracle),
])
def test_upper_bound_is_sound_at_sixty(agg, max_dim, oracle):
    for op in _random_operators(agg, 200, max_dim, seed=17):
        est = libsgnet.iterate_ones(op, 60)
        rho = oracle(op.to_matrix())
        assert est.upper_bound >= rho * (1 - 1e-9)
        assert est.best_bound <= est.upper_bound
        if est.certified_n is not None:
            assert rho < 1

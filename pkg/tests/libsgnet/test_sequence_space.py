import math

import numpy as np
import pytest

import libsgnet
from libsgnet import LinfVector


@pytest.mark.parametrize("prefix,block,e_prefix,e_block", [
    ((1, 2, 1, 2), (1, 2), (), (1, 2)),
    ((3,), (1, 1, 1), (3,), (1,)),
    ((0.5, 1), (1,), (0.5,), (1,)),
    ((), (2, 3, 2, 3), (), (2, 3)),
])
def test_canonicalize(prefix, block, e_prefix, e_block):
    v = LinfVector.periodic(prefix, block)
    assert v.prefix == tuple(float(x) for x in e_prefix)
    assert v.block == tuple(float(x) for x in e_block)


def test_equality_ignores_representation():
    assert LinfVector.periodic((1, 2), (1, 2)) == LinfVector.periodic((), (1, 2))
    assert LinfVector.finite([1, 2]) == LinfVector.periodic((1, 2), (0,))
    assert hash(LinfVector.finite([1, 2])) == hash(LinfVector.periodic((1, 2), (0,)))


@pytest.mark.parametrize("values", [
    [1, -0.1],
    [math.inf],
    [math.nan],
])
def test_invalid_components(values):
    with pytest.raises(ValueError):
        LinfVector.finite(values)


def test_empty_block():
    with pytest.raises(ValueError):
        LinfVector.periodic((1,), ())


def test_component():
    v = LinfVector.periodic((5,), (1, 2))
    assert [v.component(i) for i in range(6)] == [5, 1, 2, 1, 2, 1]
    assert LinfVector.finite([3]).component(4) == 0
    with pytest.raises(IndexError):
        v.component(-1)


def test_window():
    v = LinfVector.periodic((5,), (1, 2))
    assert list(libsgnet.window(v, 6)) == [5, 1, 2, 1, 2, 1]
    assert list(libsgnet.window(LinfVector.finite([1, 2]), 4)) == [1, 2, 0, 0]


@pytest.mark.parametrize("v,sup,inf", [
    (LinfVector.finite([0.2, 0.7, 0.1]), 0.7, 0.1),
    (LinfVector.periodic((3,), (1, 2)), 3, 1),
    (LinfVector.finite([]), 0, 0),
    (LinfVector.ones(), 1, 1),
])
def test_sup_and_inf(v, sup, inf):
    assert libsgnet.sup_norm(v) == sup
    assert libsgnet.inf_component(v) == inf


def test_partial_leq():
    u = LinfVector.periodic((0.5,), (1, 0))
    v = LinfVector.ones()
    assert libsgnet.partial_leq(u, v)
    assert not libsgnet.partial_leq(v, u)
    assert libsgnet.partial_leq(v, u, slack=1.0)
    assert libsgnet.partial_leq(LinfVector.finite([1, 1]), LinfVector.finite([1, 1, 0]))


def test_affine_combine():
    u = LinfVector.periodic((), (1, 2))
    v = LinfVector.periodic((4,), (1, 1, 1))
    assert libsgnet.affine_combine(1, u, 2, v) == LinfVector.periodic((9,), (4, 3))

    mixed = libsgnet.affine_combine(1, LinfVector.finite([1, 1]), 1, LinfVector.ones())
    assert mixed == LinfVector.periodic((2, 2), (1,))

    with pytest.raises(ValueError):
        libsgnet.affine_combine(-1, u, 1, v)


def test_scale():
    assert libsgnet.scale(2, LinfVector.periodic((1,), (3,))) == LinfVector.periodic((2,), (6,))
    assert libsgnet.scale(0, LinfVector.periodic((1,), (3,))) == LinfVector.zeros()
    with pytest.raises(ValueError):
        libsgnet.scale(-1, LinfVector.ones())


def test_max_difference_and_ratio():
    u = LinfVector.finite([1, 4])
    v = LinfVector.finite([2, 2])
    assert libsgnet.max_difference(u, v) == 2
    assert libsgnet.max_difference(v, LinfVector.finite([3, 3])) == -1
    assert libsgnet.max_ratio(u, v) == 2
    assert libsgnet.max_ratio(LinfVector.finite([0, 1]), LinfVector.finite([0, 2])) == 0.5
    assert libsgnet.max_ratio(LinfVector.finite([1, 1]), LinfVector.finite([1, 0])) == math.inf


def _random_vector(rng: np.random.Generator) -> LinfVector:
    if rng.random() < 0.3:
        return LinfVector.finite(rng.uniform(0.0, 2.0, int(rng.integers(1, 6))))

    return LinfVector.periodic(rng.uniform(0.0, 2.0, int(rng.integers(0, 4))),
                               rng.uniform(0.0, 2.0, int(rng.integers(1, 4))))


@pytest.mark.parametrize("seed", range(4))
def test_norm_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        u, v = _random_vector(rng), _random_vector(rng)
        total = libsgnet.affine_combine(1.0, u, 1.0, v)
        assert libsgnet.sup_norm(total) <= (libsgnet.sup_norm(u) + libsgnet.sup_norm(v)) * (1 + 1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_order_is_transitive(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        u = _random_vector(rng)
        v = libsgnet.affine_combine(1.0, u, 1.0, _random_vector(rng))
        w = libsgnet.affine_combine(1.0, v, 1.0, _random_vector(rng))
        assert libsgnet.partial_leq(u, v)
        assert libsgnet.partial_leq(v, w)
        assert libsgnet.partial_leq(u, w)


@pytest.mark.parametrize("u,v", [
    (LinfVector.periodic((1.0,), (0.5, 2.0)), LinfVector.periodic((), (1.0, 2.0, 3.0))),
    (LinfVector.periodic((0.3, 0.1), (1.0,)), LinfVector.periodic((2.0,), (0.25, 0.5, 0.75, 1.0))),
    (LinfVector.periodic((), (0.5, 1.5)), LinfVector.finite([4.0, 1.0, 2.0])),
])
def test_periodicity_is_preserved(u, v):
    period = math.lcm(u.period, v.period or 1)
    combined = libsgnet.affine_combine(0.5, u, 2.0, v)
    assert not combined.is_finite
    assert period % combined.period == 0
    for i in range(3 * period + 5):
        assert combined.component(i) == pytest.approx(0.5 * u.component(i) + 2.0 * v.component(i))

    scaled = libsgnet.scale(3.0, u)
    assert not scaled.is_finite
    assert u.period % scaled.period == 0
    for i in range(3 * u.period + 5):
        assert scaled.component(i) == pytest.approx(3.0 * u.component(i))

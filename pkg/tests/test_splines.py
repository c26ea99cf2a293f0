import numpy as np
import pytest

from stokesbem.splines import (
    KnotVector,
    SplineError,
    eval_basis,
    greville_abscissae,
    insert_knot,
    refine_knots,
    uniform_open_knots,
)


def bezier_kv():
    return KnotVector([0, 0, 0, 1, 1, 1], 2)


def test_clamped_endpoint_values():
    bv = eval_basis(bezier_kv(), 0.0)
    assert np.allclose(bv.values, [1, 0, 0], atol=1e-15)
    bv = eval_basis(bezier_kv(), 1.0)
    assert np.allclose(bv.values, [0, 0, 1], atol=1e-15)


def test_bernstein_midpoint():
    bv = eval_basis(bezier_kv(), 0.5)
    assert np.allclose(bv.values, [0.25, 0.5, 0.25], atol=1e-15)


def test_hand_derived_cox_de_boor():
    # kv=[0,0,0,0.5,1,1,1], u=0.25: worked out by running the recursion by
    # hand (N0 = ((0.5-u)/0.5)^2, ...).
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    bv = eval_basis(kv, 0.25)
    assert np.allclose(bv.values, [0.25, 0.625, 0.125], atol=1e-14)


def test_out_of_range_raises():
    with pytest.raises(SplineError):
        eval_basis(bezier_kv(), 1.5)


def test_greville_examples():
    assert np.allclose(greville_abscissae(bezier_kv()), [0, 0.5, 1])
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    assert np.allclose(greville_abscissae(kv), [0, 0.25, 0.75, 1])
    kv = KnotVector([0, 0, 1, 2, 2], 1)
    assert np.allclose(greville_abscissae(kv), [0, 1, 2])


def test_greville_monotone_and_endpoints():
    kv = uniform_open_knots(7, 2)
    g = greville_abscissae(kv)
    assert np.all(np.diff(g) > 0)
    assert g[0] == kv.start and g[-1] == kv.end


def test_partition_of_unity():
    rng = np.random.default_rng(7)
    kv = KnotVector([0, 0, 0, 0.1, 0.3, 0.3, 0.7, 1, 1, 1], 2)
    for u in rng.uniform(0, 1, 10_000):
        bv = eval_basis(kv, u)
        assert abs(bv.values.sum() - 1.0) < 1e-13
        assert np.all(bv.values >= -1e-15) and np.all(bv.values <= 1 + 1e-15)


def test_derivative_vs_central_difference():
    rng = np.random.default_rng(11)
    kv = KnotVector([0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1], 2)
    coef = rng.normal(size=kv.n_basis)

    def f(u):
        bv = eval_basis(kv, u)
        return coef[bv.first_func: bv.first_func + 3] @ bv.values

    h = 1e-6
    for u in rng.uniform(0.01, 0.99, 100):
        bv = eval_basis(kv, u)
        d = coef[bv.first_func: bv.first_func + 3] @ bv.derivatives[0]
        fd = (f(u + h) - f(u - h)) / (2 * h)
        assert d == pytest.approx(fd, rel=1e-6, abs=1e-6)


def curve_point(kv, ctrl, u):
    bv = eval_basis(kv, u)
    return (bv.values[:, None] * ctrl[bv.first_func: bv.first_func + kv.degree + 1]).sum(axis=0)


def test_insert_knot_preserves_geometry():
    rng = np.random.default_rng(3)
    kv = bezier_kv()
    ctrl = rng.normal(size=(3, 3))
    kv2, ctrl2 = insert_knot(kv, ctrl, 0.5)
    assert kv2.n_basis == 4
    for u in np.concatenate([[0.3], rng.uniform(0, 1, 100)]):
        assert np.allclose(curve_point(kv, ctrl, u), curve_point(kv2, ctrl2, u), atol=1e-13)


def test_insert_existing_knot_to_full_multiplicity():
    rng = np.random.default_rng(5)
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    ctrl = rng.normal(size=(4, 2))
    kv2, ctrl2 = insert_knot(kv, ctrl, 0.5)  # multiplicity 2 == p: still legal
    for u in rng.uniform(0, 1, 100):
        assert np.allclose(curve_point(kv, ctrl, u), curve_point(kv2, ctrl2, u), atol=1e-13)
    with pytest.raises(SplineError):
        insert_knot(kv2, ctrl2, 0.5)  # would exceed the degree


def test_refine_knots_counts():
    kv = uniform_open_knots(4, 2)
    ctrl = np.zeros((kv.n_basis, 1))
    kv2, ctrl2 = refine_knots(kv, ctrl, [0.125, 0.375, 0.625, 0.875])
    assert kv2.n_basis == kv.n_basis + 4
    assert len(kv2.spans()) == 8

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equigame.fixpoint import (
    ContractiveMap,
    DivergenceError,
    ModulusViolation,
    a_priori_bound,
    check_closed_property_preserved,
    estimate_modulus,
    iterate_to_fixpoint,
)


def bisect(g, lo, hi, tol=1e-15):
    glo = g(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (g(mid) > 0) == (glo > 0):
            lo, glo = mid, g(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_halving_converges_to_zero():
    h = ContractiveMap(lambda x: x / 2, 1, modulus=0.5)
    res = iterate_to_fixpoint(h, [1.0], tol=1e-12)
    assert res.converged
    assert abs(res.point[0]) < 1e-11
    assert res.final_residual <= 1e-12


def test_cosine_matches_bisection():
    root = bisect(lambda x: math.cos(x) - x, 0.0, 1.0)
    res = iterate_to_fixpoint(ContractiveMap(np.cos, 1), [1.0], tol=1e-13, max_iter=1000)
    assert res.converged
    assert abs(res.point[0] - root) < 1e-12


def test_identity_converges_immediately():
    x0 = [3.0, -2.0, 7.5]
    res = iterate_to_fixpoint(ContractiveMap(lambda x: x, 3), x0)
    assert res.iterations == 0
    assert res.converged
    np.testing.assert_array_equal(res.point, x0)


def test_max_iter_reported_as_not_converged():
    res = iterate_to_fixpoint(ContractiveMap(lambda x: 0.99 * x, 1), [1.0], tol=1e-12, max_iter=5)
    assert not res.converged
    assert res.iterations == 5
    assert res.final_residual > 1e-12


def test_divergence_names_iteration():
    with pytest.raises(DivergenceError) as info:
        iterate_to_fixpoint(ContractiveMap(lambda x: 10 * x, 1), [1.0], max_iter=100)
    assert info.value.iteration > 0
    assert "k=" in str(info.value)


def test_non_finite_output_is_divergence():
    with pytest.raises(DivergenceError) as info:
        iterate_to_fixpoint(ContractiveMap(lambda x: x * np.nan, 1), [1.0])
    assert info.value.iteration == 0


def test_bad_arguments():
    h = ContractiveMap(lambda x: x / 2, 2)
    with pytest.raises(ValueError):
        iterate_to_fixpoint(h, [1.0], tol=1e-6)
    with pytest.raises(ValueError):
        iterate_to_fixpoint(h, [1.0, 1.0], tol=0.0)
    with pytest.raises(ValueError):
        ContractiveMap(lambda x: x, 1, modulus=1.0)
    with pytest.raises(ValueError):
        ContractiveMap(lambda x: np.zeros(3), 2)([1.0, 1.0])


def test_false_modulus_is_caught():
    h = ContractiveMap(lambda x: 0.9 * x, 1, modulus=0.5)
    with pytest.raises(ModulusViolation):
        iterate_to_fixpoint(h, [1.0])


def test_warmup_allows_eventual_contraction():
    # a Jordan block: |A| > 1 but A^k -> 0, so early steps may grow
    A = np.array([[0.5, 10.0], [0.0, 0.5]])
    h = ContractiveMap(lambda x: A @ x, 2, modulus=0.75)
    with pytest.raises(ModulusViolation):
        iterate_to_fixpoint(h, [0.0, 1.0], warmup=0)
    res = iterate_to_fixpoint(h, [0.0, 1.0], warmup=10, tol=1e-12)
    assert res.converged
    assert np.linalg.norm(res.point) < 1e-10


def test_orthant_preserved_by_halving():
    rep = check_closed_property_preserved(ContractiveMap(lambda x: x / 2, 2), lambda x: bool(np.all(x >= 0)), [1.0, 3.0], 200)
    assert rep and rep.final_member


def test_unit_ball_preserved_by_shrink():
    rep = check_closed_property_preserved(ContractiveMap(lambda x: 0.9 * x, 3), lambda x: np.linalg.norm(x) <= 1, [0.5, 0.5, 0.5], 300)
    assert rep.preserved


def test_violation_reported_at_first_exit():
    # 2 -> 1 -> 0.5: the second iterate leaves {x >= 1}
    rep = check_closed_property_preserved(ContractiveMap(lambda x: x / 2, 1), lambda x: x[0] >= 1, [2.0], 10)
    assert not rep
    assert rep.first_violation == 2
    assert rep.violating_point[0] == 0.5


def test_preservation_precondition():
    with pytest.raises(ValueError):
        check_closed_property_preserved(ContractiveMap(lambda x: x, 1), lambda x: x[0] > 5, [0.0], 3)


def test_estimate_modulus_examples():
    assert estimate_modulus(ContractiveMap(lambda x: x / 2, 1), [([0.0], [1.0])]) == 0.5
    assert estimate_modulus(ContractiveMap(lambda x: x, 1), [([0.0], [1.0])]) == 1.0
    assert estimate_modulus(ContractiveMap(lambda x: np.ones(1), 1), [([0.0], [1.0])]) == 0.0
    A = np.diag([0.3, 0.8])
    rng = np.random.default_rng(1)
    pairs = [(rng.normal(size=2), rng.normal(size=2)) for _ in range(500)]
    c = estimate_modulus(ContractiveMap(lambda x: A @ x, 2), pairs)
    assert 0.3 <= c <= 0.8 + 1e-12


def test_estimate_modulus_skips_coincident_pairs():
    h = ContractiveMap(lambda x: x / 4, 1)
    assert estimate_modulus(h, [([1.0], [1.0]), ([0.0], [2.0])]) == 0.25
    with pytest.raises(ValueError):
        estimate_modulus(h, [([1.0], [1.0])])


contractions = st.tuples(
    st.floats(0.05, 0.95),
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.lists(st.floats(-50, 50), min_size=2, max_size=2),
)


@settings(max_examples=60, deadline=None)
@given(contractions)
def test_step_ratios_and_a_priori_bound(params):
    c, b, x0 = params
    b = np.array(b)
    theta = 0.7
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    h = ContractiveMap(lambda x: c * (R @ x) + b, 2, modulus=c)
    res = iterate_to_fixpoint(h, x0, tol=1e-12, max_iter=5000, keep_iterates=True)
    assert res.converged
    xs = np.array(res.iterates)
    steps = np.linalg.norm(np.diff(xs, axis=0), axis=1)
    assert np.all(steps[1:] <= c * steps[:-1] + 1e-12)
    exact = np.linalg.solve(np.eye(2) - c * R, b)
    for k, xk in enumerate(xs):
        assert np.linalg.norm(xk - exact) <= a_priori_bound(c, steps[0] if len(steps) else 0.0, k) + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(-100, 100), st.floats(-100, 100))
def test_fixed_point_is_unique(c, u, v):
    tol = 1e-10
    h = ContractiveMap(lambda x: c * np.sin(x) + 1.0, 1)
    a = iterate_to_fixpoint(h, [u], tol=tol, max_iter=10_000)
    b = iterate_to_fixpoint(h, [v], tol=tol, max_iter=10_000)
    assert abs(a.point[0] - b.point[0]) <= 2 * tol

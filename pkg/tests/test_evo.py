import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equigame import evo, netecon
from equigame.evo import (
    BooleanHypothesis,
    MoranState,
    all_assignments,
    evolve_conjunction,
    evolutionary_vi_loop,
    fixation_probability_closed_form,
    fixation_probability_exact,
    moran_step,
    perf,
    reproduction_probability,
    simulate_fixation,
    transition_probabilities,
)


def fixation_by_rationals(N, r, i0):
    # gambler's ruin sum with exact arithmetic: ratio down/up is 1/r in every state
    r = Fraction(r)
    terms = [r ** -k for k in range(N)]
    return float(sum(terms[:i0]) / sum(terms))


# Moran process


def test_reproduction_probability_examples():
    assert reproduction_probability(2, 1, 1.0) == 0.5
    assert reproduction_probability(10, 3, 1.2) == pytest.approx(3.6 / 10.6, rel=1e-15)


def test_invalid_states():
    with pytest.raises(ValueError):
        MoranState(0, 0, 1.0)
    with pytest.raises(ValueError):
        MoranState(5, 6, 1.0)
    with pytest.raises(ValueError):
        MoranState(5, 2, 0.0)
    for i in (0, 5):
        with pytest.raises(ValueError):
            moran_step(MoranState(5, i, 1.0), np.random.default_rng(0))


@pytest.mark.parametrize("N", [2, 3, 5, 10])
def test_step_matches_birth_death_law(N):
    rng = np.random.default_rng(N)
    samples = 100_000
    for i in range(1, N):
        s = MoranState(N, i, 1.2)
        counts = {-1: 0, 0: 0, 1: 0}
        for _ in range(samples):
            counts[moran_step(s, rng).i - i] += 1
        up, down = transition_probabilities(N, i, 1.2)
        for k, p in ((1, up), (-1, down), (0, 1 - up - down)):
            se = math.sqrt(p * (1 - p) / samples)
            assert abs(counts[k] / samples - p) <= 4 * se + 1e-12


def test_transition_law_formula():
    up, down = transition_probabilities(10, 3, 1.2)
    p = 3.6 / 10.6
    assert up == pytest.approx(p * 7 / 10)
    assert down == pytest.approx((1 - p) * 3 / 10)


@pytest.mark.parametrize("N", [1, 2, 5, 10, 30])
def test_neutral_fixation_is_initial_fraction(N):
    for i0 in range(N + 1):
        assert abs(fixation_probability_exact(N, 1.0, i0) - i0 / N) <= 1e-12


def test_boundary_starts():
    assert fixation_probability_exact(7, 1.7, 0) == 0.0
    assert fixation_probability_exact(7, 1.7, 7) == 1.0
    est = simulate_fixation(7, 1.7, 7, 500)
    assert est.empirical == 1.0 and est.stderr == 0.0


def test_fixation_reference_value():
    v = fixation_probability_exact(10, 1.2, 1)
    assert v == pytest.approx(0.19877, abs=5e-6)
    assert abs(v - (1 - 1 / 1.2) / (1 - 1.2**-10)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 25), st.floats(0.2, 5.0), st.data())
def test_exact_solve_matches_rational_oracle(N, r, data):
    i0 = data.draw(st.integers(0, N))
    assert fixation_probability_exact(N, r, i0) == pytest.approx(fixation_by_rationals(N, r, i0), abs=1e-10)
    assert fixation_probability_closed_form(N, r, i0) == pytest.approx(fixation_by_rationals(N, r, i0), abs=1e-10)


def test_fixation_increasing_in_r():
    rs = np.linspace(0.25, 4.0, 40)
    for N, i0 in ((5, 1), (10, 3), (20, 10)):
        vals = [fixation_probability_exact(N, r, i0) for r in rs]
        assert all(b > a for a, b in zip(vals, vals[1:]))


def test_strong_selection_limit():
    v = fixation_probability_exact(5, 1e6, 1)
    assert 1 - 1e-5 < v < 1
    assert v == pytest.approx(fixation_by_rationals(5, 10**6, 1), abs=1e-12)


def test_simulation_within_three_standard_errors():
    est = simulate_fixation(10, 1.2, 1, 100_000, seed=42)
    assert abs(est.empirical - est.exact) <= 3 * est.stderr
    assert est.to_dict()["replicas"] == 100_000


def test_simulation_deterministic_and_worker_independent():
    a = simulate_fixation(8, 1.5, 2, 20_000, seed=7)
    b = simulate_fixation(8, 1.5, 2, 20_000, seed=7, workers=3)
    assert a == b
    assert simulate_fixation(8, 1.5, 2, 20_000, seed=8).empirical != a.empirical


# evolvability


def test_all_assignments_layout():
    X = all_assignments(3)
    assert X.shape == (8, 3)
    assert len({tuple(r) for r in X}) == 8
    np.testing.assert_array_equal(X[5], [True, False, True])


def test_conjunction_evaluation():
    h = BooleanHypothesis(3, {1, 3})
    assert h.evaluate([1, 0, 1]) == 1
    assert h.evaluate([1, 1, 0]) == -1
    assert np.all(BooleanHypothesis(3).evaluate_all(all_assignments(3)) == 1)
    with pytest.raises(ValueError):
        BooleanHypothesis(3, {4})


def test_perf_examples():
    f = BooleanHypothesis(2, {1, 2})
    assert perf(BooleanHypothesis(2, {1}), f) == 0.5
    assert perf(f, f) == 1.0


def test_perf_of_negation_is_minus_one():
    f = BooleanHypothesis(4, {2, 3})
    X = all_assignments(4)
    fx = f.evaluate_all(X)
    D = np.random.default_rng(0).dirichlet(np.ones(16))
    assert float(np.dot(fx * -fx, D)) == pytest.approx(-1.0, abs=1e-15)


def test_perf_rejects_bad_distribution():
    f = BooleanHypothesis(2, {1})
    with pytest.raises(ValueError):
        perf(f, f, np.full(4, 0.3))
    with pytest.raises(ValueError):
        perf(f, f, np.array([1.2, -0.2, 0, 0]))


def test_perf_sampling_mode():
    f, r = BooleanHypothesis(6, {1}), BooleanHypothesis(6, {1, 2})
    exact = perf(r, f)
    est = perf(r, f, samples=50_000, seed=3)
    assert est == perf(r, f, samples=50_000, seed=3)
    assert abs(est - exact) < 0.02


conj = st.integers(1, 6).flatmap(
    lambda n: st.tuples(st.just(n), st.frozensets(st.integers(1, n)), st.frozensets(st.integers(1, n)))
)


@settings(max_examples=100, deadline=None)
@given(conj, st.integers(0, 2**32 - 1))
def test_perf_symmetric_and_bilinear(args, seed):
    n, a, b = args
    r, f = BooleanHypothesis(n, a), BooleanHypothesis(n, b)
    D = np.random.default_rng(seed).dirichlet(np.ones(2**n))
    assert perf(r, f, D) == pytest.approx(perf(f, r, D), abs=1e-12)
    X = all_assignments(n)
    rx, fx = r.evaluate_all(X), f.evaluate_all(X)
    gx = BooleanHypothesis(n, a & b).evaluate_all(X)
    lhs = np.dot((2 * rx - 3 * gx) * fx, D)
    assert lhs == pytest.approx(2 * perf(r, f, D) - 3 * perf(BooleanHypothesis(n, a & b), f, D), abs=1e-12)
    assert -1 - 1e-12 <= perf(r, f, D) <= 1 + 1e-12


def test_empty_target_is_immediate():
    tr = evolve_conjunction(BooleanHypothesis(4), rng=0)
    assert tr.perfs == [1.0] and tr.generations_to() == 0


def test_two_literal_target_median_within_200():
    target = BooleanHypothesis(5, {2, 5})
    gens = [evolve_conjunction(target, generations=200, rng=s).generations_to() for s in range(20)]
    assert all(g is not None for g in gens)
    assert np.median(gens) <= 200


@settings(max_examples=40, deadline=None)
@given(conj, st.integers(0, 1000))
def test_evolution_stays_in_class_and_never_drops_more_than_t(args, seed):
    n, lits, start = args
    target = BooleanHypothesis(n, lits)
    t = 2.0 ** -(n + 1)
    tr = evolve_conjunction(target, generations=60, rng=seed, start=BooleanHypothesis(n, start), stop_at_optimum=False)
    for h, p in zip(tr.hypotheses, tr.perfs):
        assert isinstance(h, BooleanHypothesis) and h.n == n and h.literals <= set(range(1, n + 1))
        assert p == perf(h, target)
    for a, b, kind in zip(tr.perfs, tr.perfs[1:], tr.kinds[1:]):
        assert b - a >= -t
        if kind == "beneficial":
            assert b - a >= t
        if kind == "stay":
            assert a == b
    for a, b in zip(tr.hypotheses, tr.hypotheses[1:]):
        assert len(a.literals ^ b.literals) <= 1


# evolutionary loop over the economy


def test_population_size_and_record_shape():
    tr = evolutionary_vi_loop(netecon.paper_instance(), rounds=8, delta=0.05, rng=1)
    assert not tr.truncated
    assert len(tr.rounds) == 8
    for r in tr.rounds:
        assert len(r.fitness) == 2 and len(r.equilibrium) == 6
        assert r.extinct == int(np.argmin(r.fitness))
        assert r.parent != r.extinct
        assert r.residual <= 1e-8


def test_first_round_is_paper_equilibrium():
    tr = evolutionary_vi_loop(netecon.paper_instance(), rounds=1, delta=0.0, rng=0)
    np.testing.assert_allclose(tr.rounds[0].equilibrium, netecon.equilibrium_by_linear_solve(netecon.paper_instance()), atol=1e-6)


def test_no_mutation_gives_constant_fitness_after_first_round():
    tr = evolutionary_vi_loop(netecon.paper_instance(), rounds=6, delta=0.0, rng=3)
    F = tr.fitness_matrix()
    for row in F[2:]:
        np.testing.assert_allclose(row, F[1], rtol=1e-9)
    # two identical providers earn the same
    assert F[1, 0] == pytest.approx(F[1, 1], rel=1e-9)


def test_loop_is_deterministic_given_seed():
    a = evolutionary_vi_loop(netecon.paper_instance(), rounds=5, delta=0.05, rng=11).to_csv()
    b = evolutionary_vi_loop(netecon.paper_instance(), rounds=5, delta=0.05, rng=11).to_csv()
    assert a == b


def test_clone_copies_parent_exactly_without_jitter():
    m = netecon.paper_instance()
    m2 = evo.clone_provider(m, parent=1, slot=0)
    x = np.random.default_rng(0).uniform(0, 10, 6)
    swapped = x[[1, 0, 3, 2, 5, 4]]
    F = netecon.f_mapping(m, swapped)
    F2 = netecon.f_mapping(m2, x)
    # slot 0 now behaves like provider 1 with roles swapped
    assert F2[0] == pytest.approx(F[1])
    assert F2[2] == pytest.approx(F[3])
    assert F2[4] == pytest.approx(F[5])
    m3 = evo.clone_provider(m, parent=1, slot=0, factors=[1.5, 1.5])
    assert m3.f[0].evaluate(x) == pytest.approx(1.5 * m2.f[0].evaluate(x))
    assert m3.rho == m2.rho and m3.c == m2.c


def test_trace_truncates_on_solver_failure():
    tr = evolutionary_vi_loop(netecon.paper_instance(), rounds=3, delta=0.05, rng=0, max_iter=3)
    assert tr.truncated and tr.rounds == []
    assert "round 0" in tr.diagnostic


def test_csv_trace_header():
    tr = evolutionary_vi_loop(netecon.paper_instance(), rounds=2, delta=0.05, rng=0)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "round,fitness_1,fitness_2,extinct,residual"
    assert len(lines) == 3
    assert lines[1].split(",")[3] in ("1", "2")


def test_mean_fitness_trends_upward():
    gains = []
    for seed in range(10):
        tr = evolutionary_vi_loop(netecon.paper_instance(), rounds=50, delta=0.05, rng=seed)
        mf = [r.mean_fitness for r in tr.rounds]
        gains.append(mf[-1] - mf[0])
    assert np.median(gains) > 0


@pytest.mark.xfail(strict=True, reason="median non-decreasing fraction is about 0.75; see ledger")
def test_mean_fitness_non_decreasing_in_most_rounds():
    fracs = []
    for seed in range(10):
        tr = evolutionary_vi_loop(netecon.paper_instance(), rounds=50, delta=0.05, rng=seed)
        mf = np.array([r.mean_fitness for r in tr.rounds])
        fracs.append(np.mean(np.diff(mf) >= 0))
    assert np.median(fracs) >= 0.8


def test_loop_needs_two_providers():
    with pytest.raises(ValueError):
        evolutionary_vi_loop(netecon.zero_model(1, 1, 1), rounds=1)

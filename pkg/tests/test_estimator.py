import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from helpers import POOLS, QUADRATIC, ref_loglog, ref_scores
from logunc import oracle as orc
from logunc.errors import ContractError
from logunc.estimator import (PairStats, TimeBound, b_score, compute_pair_stats, convergence_run,
                              estimate, estimate_faithful, result_to_dict, trace_row)
from logunc.machine import builtin, curated_pool

ALL = builtin("accept-all", 1)
EVENS = builtin("accept-evens", 2)


# -- time bounds ----------------------------------------------------------------

def test_time_bound_forms():
    assert TimeBound("linear", a=3)(10) == 30
    assert TimeBound("quadratic")(7) == 49
    assert TimeBound("power", a=1, b=3)(4) == 64
    assert TimeBound("power", a=1.5, b=1.5)(4) == 12
    assert TimeBound("quadratic").budgets([1, 2, 3]).tolist() == [1, 4, 9]
    TimeBound("linear").check(500)
    with pytest.raises(ContractError):
        TimeBound("linear", a=0.5)
    with pytest.raises(ContractError):
        TimeBound("exponential")


def test_r_bound():
    t = TimeBound("quadratic")
    assert t.r_bound(8) == 64 * 8 ** 4 * 6


# -- pair statistics ---------------------------------------------------------------

def test_pair_stats_constant_accept(t):
    s = compute_pair_stats(ALL, ALL, 10, orc.constant(True), t)
    assert (s.q, s.f) == (10, 1)
    assert s.sprime_prefix == tuple(range(1, 11))


def test_pair_stats_stop_at_nonhalting(t):
    s = compute_pair_stats(ALL, ALL, 10, orc.scripted("AAR-AAAAAA"), t)
    assert (s.q, s.f) == (3, Fraction(2, 3))
    assert s.sprime_prefix == (1, 2, 3)


def test_pair_stats_latency_truncation(t):
    # latency i**2 + 1 exceeds T(10) = 100 from i = 10 on
    spec = orc.constant(True, latency=lambda i: i * i + 1)
    assert compute_pair_stats(ALL, ALL, 10, spec, t).q == 9


def test_pair_stats_evens_coin(t):
    s = compute_pair_stats(EVENS, ALL, 2000, orc.coin(0.7, 1), t)
    assert s.q == 1000
    assert abs(float(s.f) - 0.7) <= 0.08
    assert s.f * s.q == sum(orc.coin_verdict(1, 0.7, i) for i in range(2, 2001, 2))


def test_pair_stats_empty(t):
    s = compute_pair_stats(builtin("reject-all", 1), ALL, 10, orc.constant(True), t)
    assert (s.q, s.f) == (0, 0)


# -- B score ------------------------------------------------------------------------

def stats(f, q, kx, ky):
    return PairStats("x", "y", Fraction(f), q, kx, ky)


def test_b_score_examples():
    assert b_score(stats(Fraction(1, 2), 77, 3, 2), Fraction(1, 2)) == 3
    # 0.3 * 10 / (3 * sqrt(log2 log2 100)) = 0.605 < 4
    assert b_score(stats(Fraction(4, 5), 100, 4, 3), Fraction(1, 2)) == 4
    # log2 16 = 4, log2 4 = 2: 1 * 4 / sqrt 2
    assert b_score(stats(0, 16, 1, 1), 1) == pytest.approx(2.8284271, abs=1e-6)
    assert b_score(stats(0, 0, 2, 1), 1) == 2
    with pytest.raises(ContractError):
        b_score(stats(0, 4, 1, 1), Fraction(3, 2))


fractions01 = st.fractions(min_value=0, max_value=1, max_denominator=500)


@given(fractions01, st.integers(0, 10**6), st.integers(1, 20), st.integers(1, 20), fractions01)
@settings(max_examples=500)
def test_b_score_lower_bound(f, q, kx, ky, p):
    assert b_score(stats(f, q, kx, ky), p) >= kx


@given(fractions01, st.integers(0, 10**6), st.integers(1, 20), st.integers(1, 20))
@settings(max_examples=200)
def test_b_score_valley_at_f(f, q, kx, ky):
    s = stats(f, q, kx, ky)
    grid = [Fraction(j, 64) for j in range(65)]
    scores = [b_score(s, p) for p in grid]
    assert b_score(s, f) == kx == min(scores + [b_score(s, f)])
    left = [b for p, b in zip(grid, scores) if p <= f]
    right = [b for p, b in zip(grid, scores) if p >= f]
    assert all(a >= b for a, b in zip(left, left[1:]))
    assert all(a <= b for a, b in zip(right, right[1:]))


# -- estimate ------------------------------------------------------------------------

def test_constant_reject_gives_zero(t):
    pool = curated_pool([("accept-all", 3)])
    assert estimate(10, pool, orc.constant(False), t).p_hat == 0


def test_constant_accept_plateau_picks_smallest_j(t):
    # K(X)=3 dominates the deviation term (at most sqrt(10)/(3*1.316) = 0.80) for every P,
    # so every j ties at B = 3 and the strict-improvement rule keeps j = 0
    pool = curated_pool([("accept-all", 3)])
    res = estimate(10, pool, orc.constant(True), t)
    assert res.p_hat == 0 and res.b_value == 3
    assert estimate_faithful(10, pool, orc.constant(True), t).p_hat == 0


def test_constant_accept_with_unit_k(t):
    # term = (1-P) sqrt(10) / sqrt(log2 log2 10) = 2.4028 (1-P) <= 1  <=>  P >= 0.5838
    pool = curated_pool([("accept-all", 1)])
    assert estimate(10, pool, orc.constant(True), t).p_hat == Fraction(6, 10)


@pytest.mark.parametrize("seed", [1, 2, 3])
@pytest.mark.parametrize("n", [300, 2000])
def test_single_machine_closed_form(seed, n, t):
    # one machine with K=1: the plateau B = 1 starts where |F - P| sqrt(n)/sqrt(loglog n) = 1
    pool = curated_pool([("accept-all", 1)])
    spec = orc.coin(0.6, seed)
    f = Fraction(sum(orc.coin_verdict(seed, 0.6, i) for i in range(1, n + 1)), n)
    width = math.sqrt(ref_loglog(n)) / math.sqrt(n)
    expected = max(0, math.ceil(n * (float(f) - width) - 1e-9))
    assert estimate(n, pool, spec, t).j == expected


def test_vacuous_when_nothing_qualifies(t):
    pool = curated_pool([("accept-all", 5)])     # log2 10 < 5
    res = estimate(10, pool, orc.constant(True), t)
    assert res.vacuous and res.p_hat == 0 and res.pair_table == ()
    res = estimate(9, curated_pool([("accept-evens", 1)]), orc.constant(True), t)  # 9 is odd
    assert res.vacuous
    assert estimate_faithful(9, curated_pool([("accept-evens", 1)]), orc.constant(True), t).vacuous


def test_bit_cap(t):
    pool = curated_pool([("accept-all", 1), ("accept-evens", 2)])
    res = estimate(64, pool, orc.constant(True), t, bit_cap=2)
    assert {s.x for s in res.pair_table} == {"accept-all"}


def test_n_must_be_at_least_two(t):
    with pytest.raises(ContractError):
        estimate(1, POOLS["standard"], orc.constant(True), t)


def test_witnesses_and_table(t):
    res = estimate(60, POOLS["standard"], orc.coin(0.5, 4), t)
    names = {"accept-all", "accept-evens", "multiples-of-3"}
    assert len(res.pair_table) == 9
    assert res.witness_y in names and res.witness_x in names
    assert res.b_value >= 1


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_estimate_near_p(seed, t):
    # standard pool, coin 0.7: the K(X)=1 plateau shifts the answer down by about
    # sqrt(loglog 2000 / 2000) = 0.042, plus sampling noise of about 0.01
    res = estimate(2000, POOLS["standard"], orc.coin(0.7, seed), t)
    assert 0.7 - 0.042 - 3 * 0.0103 <= float(res.p_hat) <= 0.7 - 0.041 + 3 * 0.0103


def _check_against_reference(res, n):
    scores = ref_scores(res.pair_table, n)
    best = min(scores)
    assert scores[res.j] <= best + 1e-9
    assert all(s > best + 1e-12 or abs(s - best) <= 1e-9 for s in scores[:res.j])


@pytest.mark.parametrize("pool", sorted(POOLS))
@pytest.mark.parametrize("oracle_name", ["constant", "coin", "scripted"])
def test_faithful_matches_optimized(pool, oracle_name, t):
    spec = {"constant": orc.constant(True), "coin": orc.coin(0.5, 9),
            "scripted": orc.scripted("ARRA-ARAAR" * 5)}[oracle_name]
    for n in (4, 7, 12, 18, 33, 50):
        fast = estimate(n, POOLS[pool], spec, t)
        slow = estimate_faithful(n, POOLS[pool], spec, t)
        assert fast.j == slow.j
        assert fast.vacuous == slow.vacuous
        if not fast.vacuous:
            assert (fast.witness_y, fast.witness_x) == (slow.witness_y, slow.witness_x)
            assert fast.b_value == slow.b_value
            _check_against_reference(fast, n)


def test_faithful_steps_grow(t):
    steps = [estimate_faithful(n, POOLS["standard"], orc.coin(0.5, 1), t).steps_total for n in (8, 16, 32)]
    assert steps == sorted(steps) and steps[0] > 0


def test_faithful_charges_loop_machines(t):
    # a looping machine costs T(N) on every line-8 visit
    pool = curated_pool([("accept-all", 1), ("loop", 2)])
    base = estimate_faithful(8, curated_pool([("accept-all", 1)]), orc.constant(True), t).steps_total
    with_loop = estimate_faithful(8, pool, orc.constant(True), t).steps_total
    assert with_loop - base >= 9 * 64


@given(st.integers(2, 40), st.sampled_from(sorted(POOLS)), st.floats(0, 1), st.integers(0, 50))
@settings(max_examples=60, deadline=None)
def test_p_hat_on_grid(n, pool, p, seed):
    res = estimate(n, POOLS[pool], orc.coin(p, seed), QUADRATIC)
    assert isinstance(res.p_hat, Fraction)
    assert 0 <= res.j <= n and res.p_hat == Fraction(res.j, n)
    assert (res.p_hat * n).denominator == 1


def test_convergence_run(t):
    assert convergence_run([], POOLS["standard"], orc.constant(True), t) == []
    with pytest.raises(ContractError):
        convergence_run([10, 10], POOLS["standard"], orc.constant(True), t)
    trace = convergence_run([10, 40, 160, 640], POOLS["standard"], orc.constant(True), t)
    gaps = [1 - float(r.p_hat) for _, r in trace]
    assert gaps == sorted(gaps, reverse=True) and gaps[-1] < 0.1
    again = convergence_run([10, 40, 160, 640], POOLS["standard"], orc.constant(True), t)
    assert [r.j for _, r in again] == [r.j for _, r in trace]


def test_convergence_run_coin(t):
    trace = convergence_run([250, 500, 1000, 2000], POOLS["standard"], orc.coin(0.7, 1), t)
    errors = [abs(float(r.p_hat) - 0.7) for _, r in trace]
    assert errors[-1] <= 0.05
    assert errors[-1] <= errors[0]


def test_serialisation(t):
    res = estimate(30, POOLS["standard"], orc.coin(0.5, 1), t)
    row = trace_row(res)
    assert row["p_hat_num"] == res.j and row["p_hat_den"] == 30
    doc = result_to_dict(res, verbose=True)
    assert len(doc["pair_table"]) == len(res.pair_table)
    assert "pair_table" not in result_to_dict(res)
    assert trace_row(estimate(10, curated_pool([("accept-all", 9)]), orc.constant(True), t))["b_value"] == "vacuous"

"""The A_{L,T} probability assignment.

Two implementations share one scoring function:

* ``estimate`` computes each pair's statistics once and sweeps the grid
  j/N over the cached table.
* ``estimate_faithful`` walks the original triple loop, re-running every
  simulation inside the j loop, and counts simulated steps the way the
  runtime bound charges them.  It exists to check ``estimate`` against.

A pair (X, Y) scans i = 1..N for indices both machines accept within T(i)
steps and asks the oracle about each one with budget T(N); the first
oracle that fails to halt ends the scan.  Machines that do not accept N
itself within T(N) take no part (they are outside TM(N)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ContractError
from .machine import Halt, Machine, MachinePool
from .numerics import loglog
from .oracle import OracleSpec, VerdictKind, query


@dataclass(frozen=True)
class TimeBound:
    """Monotone step budget T(N) = a*N (linear), a*N**2 (quadratic) or a*N**b (power)."""
    form: str = "quadratic"
    a: float = 1
    b: float = 2

    def __post_init__(self):
        if self.form not in ("linear", "quadratic", "power"):
            raise ContractError(f"unknown time-bound form {self.form!r}")
        if self.a < 1 or self.b < 1:
            raise ContractError(f"time-bound parameters need a >= 1 and b >= 1, got a={self.a}, b={self.b}")

    @property
    def exponent(self) -> float:
        return {"linear": 1, "quadratic": 2}.get(self.form, self.b)

    def __call__(self, n: int) -> int:
        e = self.exponent
        if float(self.a).is_integer() and float(e).is_integer():
            return int(self.a) * n ** int(e)
        return math.floor(self.a * n ** e)

    def budgets(self, ns: np.ndarray) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        e = self.exponent
        if float(self.a).is_integer() and float(e).is_integer():
            return int(self.a) * ns ** int(e)
        return np.floor(self.a * ns.astype(np.float64) ** e).astype(np.int64)

    def r_bound(self, n: int) -> float:
        """T(N) * N**4 * log2 T(N)."""
        t = self(n)
        return t * n ** 4 * math.log2(t) if t > 1 else float(n ** 4)

    def check(self, n_max: int) -> None:
        prev = 0
        for n in range(1, n_max + 1):
            t = self(n)
            if t < n or t < prev:
                raise ContractError(f"T({n}) = {t} violates N <= T(N) or monotonicity")
            prev = t


@dataclass(frozen=True)
class PairStats:
    x: str
    y: str
    f: Fraction
    q: int
    kx: int
    ky: int
    sprime_prefix: tuple[int, ...] = field(default=(), repr=False)


def b_score(stats: PairStats, p: Fraction | float) -> float:
    """max(K(X), |F - P| sqrt(Q) / (K(Y) sqrt(loglog Q)))."""
    if not 0 <= p <= 1:
        raise ContractError(f"P must lie in [0, 1], got {p}")
    dev = abs(stats.f - p)
    if stats.q == 0 or dev == 0:
        return float(stats.kx)
    term = float(dev) * math.sqrt(stats.q) / (stats.ky * math.sqrt(loglog(stats.q)))
    return max(float(stats.kx), term)


def _frac(accepts: int, q: int) -> Fraction:
    return Fraction(accepts, q) if q else Fraction(0)


def compute_pair_stats(x: Machine, y: Machine, n: int, oracle: OracleSpec, t: TimeBound) -> PairStats:
    """Statistics of one pair by direct simulation (no caching)."""
    if n < 1:
        raise ContractError("n must be >= 1")
    budget = t(n)
    accepts = rejects = 0
    prefix = []
    for i in range(1, n + 1):
        if not (x.accepts(i, t(i)) and y.accepts(i, t(i))):
            continue
        v = query(oracle, i, budget)
        if v.kind is VerdictKind.NO_HALT:
            break
        prefix.append(i)
        if v.kind is VerdictKind.ACCEPT:
            accepts += 1
        else:
            rejects += 1
    q = accepts + rejects
    return PairStats(x.name, y.name, _frac(accepts, q), q, x.k, y.k, tuple(prefix))


@dataclass(frozen=True)
class EstimateResult:
    n: int
    j: int
    b_value: float
    witness_y: str | None
    witness_x: str | None
    pair_table: tuple[PairStats, ...] = field(repr=False)
    steps_total: int = 0
    vacuous: bool = False
    mode: str = "optimized"

    @property
    def p_hat(self) -> Fraction:
        return Fraction(self.j, self.n)


def bit_budget(n: int, cap: float | None = None) -> float:
    b = math.log2(n)
    return b if cap is None else min(b, cap)


def _check_n(n: int) -> None:
    if n < 2:
        raise ContractError(f"n must be >= 2, got {n}")


class _Runs:
    """Memoised machine runs and oracle queries for one estimate; tallies steps once per call site."""

    def __init__(self, oracle: OracleSpec, t: TimeBound):
        self.oracle = oracle
        self.t = t
        self.steps = 0
        self._acc: dict[tuple[int, int], bool] = {}
        self._ora: dict[int, VerdictKind] = {}

    def accepts(self, m: Machine, i: int, budget: int) -> bool:
        key = (id(m), i)
        hit = self._acc.get(key)
        if hit is None:
            out = m.run(i, budget)
            self.steps += out.steps_used
            hit = self._acc[key] = out.kind is Halt.ACCEPT
        return hit

    def verdict(self, i: int, budget: int) -> VerdictKind:
        hit = self._ora.get(i)
        if hit is None:
            v = query(self.oracle, i, budget)
            self.steps += v.steps_used
            hit = self._ora[i] = v.kind
        return hit


def estimate(n: int, pool: MachinePool, oracle: OracleSpec, t: TimeBound,
             bit_cap: float | None = None) -> EstimateResult:
    _check_n(n)
    runs = _Runs(oracle, t)
    tn = t(n)
    tm = [m for m in pool.within(bit_budget(n, bit_cap)) if runs.accepts(m, n, tn)]
    if not tm:
        return EstimateResult(n, 0, 0.0, None, None, (), runs.steps, vacuous=True)

    member = {id(m): [runs.accepts(m, i, t(i)) for i in range(1, n + 1)] for m in tm}
    table: dict[tuple[int, int], PairStats] = {}
    for y in tm:
        for x in tm:
            accepts = rejects = 0
            prefix = []
            for i, (ax, ay) in enumerate(zip(member[id(x)], member[id(y)]), 1):
                if not (ax and ay):
                    continue
                kind = runs.verdict(i, tn)
                if kind is VerdictKind.NO_HALT:
                    break
                prefix.append(i)
                if kind is VerdictKind.ACCEPT:
                    accepts += 1
                else:
                    rejects += 1
            q = accepts + rejects
            table[id(y), id(x)] = PairStats(x.name, y.name, _frac(accepts, q), q, x.k, y.k, tuple(prefix))

    best = math.inf
    best_j, wit = 0, (None, None)
    for j in range(n + 1):
        p = Fraction(j, n)
        my, my_wit = -math.inf, (None, None)
        for y in tm:
            mx, mx_x = math.inf, None
            for x in tm:
                b = b_score(table[id(y), id(x)], p)
                if b < mx:
                    mx, mx_x = b, x.name
            if mx > my:
                my, my_wit = mx, (y.name, mx_x)
        if my < best:
            best, best_j, wit = my, j, my_wit
    return EstimateResult(n, best_j, best, wit[0], wit[1], tuple(table.values()), runs.steps)


def estimate_faithful(n: int, pool: MachinePool, oracle: OracleSpec, t: TimeBound,
                      bit_cap: float | None = None) -> EstimateResult:
    """Literal triple loop; every simulation is charged every time the loop reaches it.

    A Y that accepts no X on line 8 (i.e. Y itself rejects N) is left out of
    the max instead of contributing the initial value N.
    """
    _check_n(n)
    tn = t(n)
    machines = list(pool.within(bit_budget(n, bit_cap)))
    steps = 0
    # memo only saves wall time; steps are still charged per call
    memo: dict = {}

    def run(m: Machine, i: int, budget: int):
        nonlocal steps
        key = (id(m), i, budget)
        out = memo.get(key)
        if out is None:
            out = memo[key] = m.run(i, budget)
        steps += out.steps_used
        return out.kind is Halt.ACCEPT

    def ask(i: int) -> VerdictKind:
        nonlocal steps
        key = ("L", i)
        v = memo.get(key)
        if v is None:
            v = memo[key] = query(oracle, i, tn)
        steps += v.steps_used
        return v.kind

    P, M = 0, n
    b_value, wit = 0.0, (None, None)
    pair_table: dict[tuple[str, str], PairStats] = {}
    any_y = False
    for j in range(n + 1):
        m_y, y_wit = 0, (None, None)
        for y in machines:
            m_x, x_wit = n, None
            qualified = False
            for x in machines:
                if not (run(x, n, tn) and run(y, n, tn)):
                    continue
                qualified = True
                a = r = 0
                prefix = []
                i = 1
                while i <= n:
                    if run(x, i, t(i)) and run(y, i, t(i)):
                        kind = ask(i)
                        if kind is VerdictKind.ACCEPT:
                            a += 1
                            prefix.append(i)
                        else:
                            kind = ask(i)  # the reject test is a second run of L
                            if kind is VerdictKind.REJECT:
                                r += 1
                                prefix.append(i)
                            else:
                                i = n
                    i += 1
                stats = PairStats(x.name, y.name, _frac(a, a + r), a + r, x.k, y.k, tuple(prefix))
                pair_table[y.name, x.name] = stats
                b = b_score(stats, Fraction(j, n))
                if b < m_x:
                    m_x, x_wit = b, x.name
            if qualified and m_x > m_y:
                m_y, y_wit = m_x, (y.name, x_wit)
                any_y = True
        if m_y < M:
            M, P = m_y, j
            b_value, wit = float(m_y), y_wit
    return EstimateResult(n, P, b_value if any_y else 0.0, wit[0], wit[1],
                          tuple(pair_table.values()), steps, vacuous=not any_y, mode="faithful")


def convergence_run(schedule: Sequence[int], pool: MachinePool, oracle: OracleSpec, t: TimeBound,
                    mode: str = "optimized", bit_cap: float | None = None) -> list[tuple[int, EstimateResult]]:
    schedule = list(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ContractError(f"schedule must be strictly increasing: {schedule}")
    fn = estimate_faithful if mode == "faithful" else estimate
    return [(n, fn(n, pool, oracle, t, bit_cap)) for n in schedule]


# -- serialisation ----------------------------------------------------------------

TRACE_COLUMNS = ("n", "p_hat_num", "p_hat_den", "b_value", "witness_y", "witness_x", "steps_total")


def trace_row(res: EstimateResult) -> dict:
    return {
        "n": res.n,
        "p_hat_num": res.j,
        "p_hat_den": res.n,
        "b_value": "vacuous" if res.vacuous else repr(res.b_value),
        "witness_y": res.witness_y or "",
        "witness_x": res.witness_x or "",
        "steps_total": res.steps_total,
    }


def pair_to_dict(s: PairStats) -> dict:
    return {"x": s.x, "y": s.y, "f_num": s.f.numerator, "f_den": s.f.denominator,
            "q": s.q, "kx": s.kx, "ky": s.ky}


def result_to_dict(res: EstimateResult, verbose: bool = False) -> dict:
    out = dict(trace_row(res))
    out["p_hat"] = float(res.p_hat)
    out["vacuous"] = res.vacuous
    out["mode"] = res.mode
    if verbose:
        out["pair_table"] = [pair_to_dict(s) for s in res.pair_table]
    return out


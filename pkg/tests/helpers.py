"""Shared pools, oracles and independent reference computations for the tests."""
import math
from fractions import Fraction

from logunc import oracle as orc
from logunc.estimator import TimeBound
from logunc.machine import curated_pool

QUADRATIC = TimeBound("quadratic")

# pass/fail lines printed at the end of the run by conftest
ACCEPTANCE_LINES: list[str] = []

STANDARD = (("accept-all", 1), ("accept-evens", 2), ("multiples-of-3", 3))
ODD_PATTERN = (("residue-1-mod-2", 1), ("multiples-of-4", 2), ("accept-all", 2))
DISTRACTORS = (("accept-all", 2), ("loop", 1), ("reject-all", 1), ("accept-evens", 1), ("residue-2-mod-3", 2))

POOLS = {
    "standard": curated_pool(STANDARD),
    "odd-pattern": curated_pool(ODD_PATTERN),
    "distractors": curated_pool(DISTRACTORS),
}

# A/R pattern with a sentence that never resolves at index 37
NONHALTING_SCRIPT = "".join("-" if i == 37 else ("A" if (i * 7) % 10 < 6 else "R") for i in range(1, 65))

ORACLES = {
    "constant": orc.constant(True),
    "coin-0.5": orc.coin(0.5, 1),
    "scripted-nonhalting": orc.scripted(NONHALTING_SCRIPT),
}


def ref_loglog(q):
    """log2(log2 q) with log x := 1 below 2, written out independently of logunc.numerics."""
    def lg(x):
        return 1.0 if x < 2 else math.log(x) / math.log(2)
    return lg(lg(q))


def ref_b(f, q, kx, ky, p):
    if q == 0:
        return float(kx)
    return max(float(kx), abs(float(f) - float(p)) * math.sqrt(q) / (ky * math.sqrt(ref_loglog(q))))


def ref_scores(pair_table, n):
    """max over Y of min over X of B, for every j/N, from a pair table."""
    rows = {}
    for s in pair_table:
        rows.setdefault(s.y, []).append(s)
    return [max(min(ref_b(s.f, s.q, s.kx, s.ky, Fraction(j, n)) for s in row) for row in rows.values())
            for j in range(n + 1)]

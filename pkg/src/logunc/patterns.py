"""Irreducible-pattern diagnostics.

A truth sequence is the list of indices in S with the oracle's verdict on
each.  A selector W picks the indices it accepts within T(N); r(m, W) is
the accept frequency over the first m picks.  The pattern is irreducible
with probability p when one constant c bounds

    |r(m, W) - p| * sqrt(m) / (k(W) * sqrt(loglog m))

for every selector and every m >= 3.  ``estimate_c`` reports the smallest
such c on the observed data.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractError
from .estimator import TimeBound
from .machine import Machine, MachinePool
from .numerics import loglog, loglog_array
from .oracle import OracleSpec, truth_array

ACCEPT, REJECT, NO_HALT = 1, 0, -1


def lil_envelope(m: int, k: int, c: float) -> float:
    """c * k * sqrt(loglog m) / sqrt(m)."""
    if m < 3:
        raise ContractError(f"the envelope is defined for m >= 3, got {m}")
    return c * k * math.sqrt(loglog(m)) / math.sqrt(m)


@dataclass(frozen=True)
class Truth:
    indices: np.ndarray   # members of S, strictly increasing
    verdicts: np.ndarray  # int8: 1 accept, 0 reject, -1 never halts

    def __post_init__(self):
        if len(self.indices) != len(self.verdicts):
            raise ContractError("indices and verdicts differ in length")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise ContractError("truth indices must be strictly increasing")

    @classmethod
    def from_oracle(cls, spec: OracleSpec, horizon: int, start: int = 1) -> "Truth":
        idx = np.arange(start, horizon + 1, dtype=np.int64)
        return cls(idx, truth_array(spec, idx))

    @classmethod
    def alternating(cls, horizon: int, start: int = 1) -> "Truth":
        """A, R, A, R, ... on indices start..horizon (index ``start`` is A)."""
        idx = np.arange(start, horizon + 1, dtype=np.int64)
        return cls(idx, ((idx - start) % 2 == 0).astype(np.int8))

    @classmethod
    def from_sequence(cls, verdicts: Sequence[bool | int], start: int = 1) -> "Truth":
        v = np.asarray([int(x) for x in verdicts], dtype=np.int8)
        return cls(np.arange(start, start + len(v), dtype=np.int64), v)


@dataclass(frozen=True)
class SelectorRun:
    w: str
    k: int
    selected: np.ndarray = field(repr=False)
    accept_counts: np.ndarray = field(repr=False)  # accepts among the first m picks, m = 1..

    @property
    def size(self) -> int:
        return len(self.selected)

    def r(self, m: int) -> Fraction:
        if not 1 <= m <= self.size:
            raise IndexError(f"m={m} outside 1..{self.size}")
        return Fraction(int(self.accept_counts[m - 1]), m)

    @property
    def r_values(self) -> np.ndarray:
        """r(m) for m = 3..size, as floats."""
        m = np.arange(3, self.size + 1)
        return self.accept_counts[2:] / m

    def deviation(self, p: float) -> np.ndarray:
        """Normalised deviation |r - p| sqrt(m) / (k sqrt(loglog m)) for m = 3..size."""
        m = np.arange(3, self.size + 1, dtype=np.float64)
        dev = np.abs(self.accept_counts[2:] - m * p) / np.sqrt(m)
        return dev / (self.k * np.sqrt(loglog_array(m)))


def selector_frequencies(truth: Truth, w: Machine, t: TimeBound) -> SelectorRun:
    mask = w.accept_mask(truth.indices, t.budgets(truth.indices))
    picked = truth.verdicts[mask]
    if np.any(picked == NO_HALT):
        bad = int(truth.indices[mask][np.argmax(picked == NO_HALT)])
        raise ContractError(f"selector {w.name} picked index {bad}, whose sentence is neither "
                            "proved nor refuted")
    return SelectorRun(w.name, w.k, truth.indices[mask], np.cumsum(picked == ACCEPT, dtype=np.int64))


@dataclass
class DeficiencyReport:
    p: float
    per_selector: dict[str, float]          # Phi(W): sup_m |m r - m p| / sqrt(m loglog m)
    c_by_selector: dict[str, float]         # Phi(W) / k(W)
    c_hat: float
    skipped: list[str]
    warning: str | None = None
    supplied_c: float | None = None
    violations: list[tuple[str, int]] = field(default_factory=list)
    runs: dict[str, SelectorRun] = field(default_factory=dict, repr=False)

    def c_hat_upto(self, m: int, selector: str | None = None) -> float:
        """c_hat restricted to m' <= m (optionally for one selector)."""
        names = [selector] if selector else list(self.c_by_selector)
        best = 0.0
        for name in names:
            dev = self.runs[name].deviation(self.p)[: max(0, m - 2)]
            if len(dev):
                best = max(best, float(dev.max()))
        return best

    def check(self, c: float) -> list[tuple[str, int]]:
        """(selector, m) pairs whose deviation exceeds c."""
        out = []
        for name in self.c_by_selector:
            dev = self.runs[name].deviation(self.p)
            out.extend((name, int(m) + 3) for m in np.nonzero(dev > c)[0])
        return out

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "c_hat": self.c_hat,
            "phi": self.per_selector,
            "c_by_selector": self.c_by_selector,
            "selected": {name: run.size for name, run in self.runs.items()},
            "skipped": self.skipped,
            "warning": self.warning,
            "supplied_c": self.supplied_c,
            "n_violations": len(self.violations),
            "violations": [list(v) for v in self.violations[:1000]],
        }

    def csv_rows(self, stride: int = 1) -> Iterable[tuple[str, int, float, float]]:
        """(selector, m, r, envelope) rows; the envelope uses the supplied c, else c_hat."""
        c = self.c_hat if self.supplied_c is None else self.supplied_c
        for name in self.c_by_selector:
            run = self.runs[name]
            m = np.arange(3, run.size + 1)
            env = c * run.k * np.sqrt(loglog_array(m)) / np.sqrt(m)
            for i in range(0, len(m), stride):
                yield name, int(m[i]), float(run.accept_counts[i + 2] / m[i]), float(env[i])


def estimate_c(truth: Truth, selectors: MachinePool | Sequence[Machine], p: float, t: TimeBound,
               c: float | None = None) -> DeficiencyReport:
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"p must lie in [0, 1], got {p}")
    selectors = list(selectors)
    if not selectors:
        warnings.warn("empty selector pool; c_hat is 0 by default", stacklevel=2)
        return DeficiencyReport(p, {}, {}, 0.0, [], warning="empty selector pool", supplied_c=c)
    phi, cs, skipped, runs = {}, {}, [], {}
    for w in selectors:
        run = selector_frequencies(truth, w, t)
        if run.size < 3:
            skipped.append(w.name)
            continue
        runs[w.name] = run
        c_w = float(run.deviation(p).max())
        cs[w.name] = c_w
        phi[w.name] = c_w * w.k
    report = DeficiencyReport(p, phi, cs, max(cs.values(), default=0.0), skipped,
                              supplied_c=c, runs=runs)
    if c is not None:
        report.violations = report.check(c)
    return report


# -- divergence ------------------------------------------------------------------

def _scale(m: int) -> float:
    return math.sqrt(m / loglog(m))


@dataclass(frozen=True)
class Divergence:
    selector: str
    m_low: int
    m_high: int
    growth: float      # c_hat(<= m_high) / c_hat(<= m_low)
    reference: float   # sqrt(m/loglog m) growth over the same window
    flagged: bool


def divergence(report: DeficiencyReport, selector: str, window: int = 100,
               fraction: float = 0.5) -> Divergence | None:
    """Compare c_hat growth over [m/window, m] with the sqrt(m/loglog m) growth a
    constant deviation would produce.  Flags when at least ``fraction`` of it is reached."""
    run = report.runs[selector]
    m_high = run.size
    m_low = m_high // window
    if m_low < 3:
        return None
    lo = report.c_hat_upto(m_low, selector)
    hi = report.c_hat_upto(m_high, selector)
    ref = _scale(m_high) / _scale(m_low)
    growth = hi / lo if lo > 0 else (math.inf if hi > 0 else 1.0)
    return Divergence(selector, m_low, m_high, growth, ref, lo > 0 and growth >= fraction * ref)


@dataclass
class IrreducibilitySummary:
    p: float
    c_hat: dict[int, float]
    reports: dict[int, DeficiencyReport] = field(repr=False)
    divergences: dict[int, list[Divergence]] = field(repr=False)

    @property
    def max_c_hat(self) -> float:
        return max(self.c_hat.values(), default=0.0)

    @property
    def flags(self) -> list[tuple[int, str]]:
        return [(seed, d.selector) for seed, ds in self.divergences.items() for d in ds if d.flagged]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "c_hat": {str(s): v for s, v in self.c_hat.items()},
            "max_c_hat": self.max_c_hat,
            "divergence_flags": [[s, w] for s, w in self.flags],
            "divergences": {str(s): [d.__dict__ for d in ds] for s, ds in self.divergences.items()},
        }


def irreducibility_summary(truths: Mapping[int, Truth], p: float,
                           selectors: MachinePool | Sequence[Machine], t: TimeBound,
                           window: int = 100) -> IrreducibilitySummary:
    reports, cs, divs = {}, {}, {}
    for seed in sorted(truths):
        rep = estimate_c(truths[seed], selectors, p, t)
        reports[seed] = rep
        cs[seed] = rep.c_hat
        divs[seed] = [d for d in (divergence(rep, name, window) for name in rep.runs) if d]
    return IrreducibilitySummary(p, cs, reports, divs)


def monte_carlo_irreducibility(p: float, seeds: Sequence[int], m_max: int,
                               selectors: MachinePool | Sequence[Machine], t: TimeBound,
                               window: int = 100) -> IrreducibilitySummary:
    """Coin truth (one stream per seed) on indices 1..m_max, checked against every selector."""
    if m_max < 100:
        raise ContractError("m_max must be >= 100")
    if len(seeds) < 3:
        raise ContractError("need at least 3 seeds")
    truths = {s: Truth.from_oracle(OracleSpec("coin", p=p, seed=s), m_max) for s in seeds}
    return irreducibility_summary(truths, p, selectors, t, window)

"""Stand-ins for the provability machine: coin, Benford, scripted and constant oracles.

Every oracle is a pure function of (spec, index, budget).  The coin draws
from a counter-based generator (the SplitMix64 output function evaluated
at position ``index``), so indices can be queried in any order.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BudgetError, ContractError, DecodeError, ScriptRangeError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
NEVER = math.inf

DEFAULT_EXPONENT_CAP = 200_000
LOG10_2 = math.log10(2)


class VerdictKind(Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"
    NO_HALT = "NoHaltWithinBudget"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    steps_used: int


def splitmix64(seed: int, index: int) -> int:
    """Output ``index`` of a SplitMix64 stream started at ``seed``."""
    z = (seed + (index + 1) * GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def uniform(seed: int, index: int) -> float:
    # top 53 bits -> [0, 1)
    return (splitmix64(seed, index) >> 11) * 2.0 ** -53


def coin_verdict(seed: int, p: float, index: int) -> bool:
    """True (Accept) iff the uniform draw at ``index`` falls below ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"p must lie in [0, 1], got {p}")
    return uniform(seed, index) < p


def coin_verdicts(seed: int, p: float, indices: np.ndarray) -> np.ndarray:
    """Vectorised ``coin_verdict``; bit-identical to the scalar path."""
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"p must lie in [0, 1], got {p}")
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + (idx + np.uint64(1)) * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return u < p


def benford_verdict(n: int, exponent_cap: int = DEFAULT_EXPONENT_CAP) -> bool:
    """True iff the leading decimal digit of 3**n is 1."""
    if n < 0:
        raise ContractError("exponent must be non-negative")
    if n > exponent_cap:
        raise BudgetError(f"exponent {n} exceeds the cap {exponent_cap}")
    x = 3 ** n
    # 3**n has floor(n*log10 3)+1 digits; estimate, then correct exactly
    d = int(n * 0.47712125471966244)
    t = 10 ** d
    while t > x:
        t //= 10
    while t * 10 <= x:
        t *= 10
    return x < 2 * t


def benford_digits(n_max: int) -> list[int]:
    """Leading decimal digit of 3**n for n = 0..n_max, computed incrementally."""
    out = []
    x, t = 1, 1
    for _ in range(n_max + 1):
        while t * 10 <= x:
            t *= 10
        out.append(x // t)
        x *= 3
    return out


@functools.lru_cache(maxsize=8)
def _log_constants(prec: int) -> tuple[Decimal, Decimal]:
    with localcontext() as ctx:
        ctx.prec = prec
        return Decimal(3).log10(), Decimal(2).log10()


def fractional_criterion(n: int, digits: int = 40) -> bool:
    """First digit of 3**n is 1 iff frac(n*log10 3) < log10 2 (high-precision decimal)."""
    prec = digits + len(str(n))
    log3, log2 = _log_constants(prec)
    with localcontext() as ctx:
        ctx.prec = prec
        v = n * log3
        return v - int(v) < log2


@dataclass(frozen=True)
class FrequencyReport:
    n_max: int
    accepts: int
    frequency: Fraction
    deviation: float
    digits: tuple[int, ...] = field(repr=False)

    @property
    def total(self) -> int:
        return self.n_max + 1


def frequency_report(n_max: int) -> FrequencyReport:
    if n_max < 1:
        raise ContractError("n_max must be >= 1")
    digits = benford_digits(n_max)
    accepts = sum(1 for d in digits if d == 1)
    freq = Fraction(accepts, n_max + 1)
    return FrequencyReport(n_max, accepts, freq, float(freq) - LOG10_2, tuple(digits))


# -- oracle specs ----------------------------------------------------------------

_SCRIPT_CODES = {"A": VerdictKind.ACCEPT, "R": VerdictKind.REJECT, "-": VerdictKind.NO_HALT}


def parse_script(text: str) -> tuple[VerdictKind, ...]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line not in _SCRIPT_CODES:
            raise DecodeError("script", f"line {lineno}: expected A, R or -, got {line!r}")
        out.append(_SCRIPT_CODES[line])
    return tuple(out)


def load_script(path: str | Path) -> tuple[VerdictKind, ...]:
    return parse_script(Path(path).read_text())


def script_from_string(s: str) -> tuple[VerdictKind, ...]:
    """``'AAR-A'`` -> verdict tuple; convenient in tests."""
    return tuple(_SCRIPT_CODES[c] for c in s)


@dataclass(frozen=True)
class OracleSpec:
    """Which oracle to consult and what it costs.

    ``latency`` is either a constant step cost (``math.inf`` for an oracle
    that never halts) or a callable of the index.
    """
    variant: str
    p: float = 0.5
    seed: int = 0
    latency: object = 1
    script: tuple[VerdictKind, ...] = ()
    script_start: int = 1
    accept: bool = True              # constant variant
    exponent_cap: int = DEFAULT_EXPONENT_CAP

    def __post_init__(self):
        if self.variant not in ("coin", "benford", "scripted", "constant"):
            raise ContractError(f"unknown oracle variant {self.variant!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ContractError(f"p must lie in [0, 1], got {self.p}")
        if not callable(self.latency) and not self.latency >= 1:
            raise ContractError(f"latency must be >= 1, got {self.latency}")

    def cost(self, index: int) -> float:
        lat = self.latency(index) if callable(self.latency) else self.latency
        if lat < 1:
            raise ContractError(f"latency({index}) = {lat} < 1")
        return lat

    @property
    def script_range(self) -> range:
        return range(self.script_start, self.script_start + len(self.script))

    def truth(self, index: int) -> VerdictKind:
        """The verdict the oracle eventually reaches (NO_HALT if it never does)."""
        v = self.variant
        if v == "constant":
            return VerdictKind.ACCEPT if self.accept else VerdictKind.REJECT
        if v == "coin":
            return VerdictKind.ACCEPT if coin_verdict(self.seed, self.p, index) else VerdictKind.REJECT
        if v == "benford":
            return VerdictKind.ACCEPT if benford_verdict(index, self.exponent_cap) else VerdictKind.REJECT
        if index not in self.script_range:
            raise ScriptRangeError(f"index {index} outside the scripted range "
                                   f"[{self.script_range.start}, {self.script_range.stop})")
        return self.script[index - self.script_start]


def constant(accept: bool = True, latency=1) -> OracleSpec:
    return OracleSpec("constant", accept=accept, latency=latency)


def coin(p: float, seed: int, latency=1) -> OracleSpec:
    return OracleSpec("coin", p=p, seed=seed, latency=latency)


def scripted(script: Sequence[VerdictKind] | str, start: int = 1, latency=1) -> OracleSpec:
    if isinstance(script, str):
        script = script_from_string(script)
    return OracleSpec("scripted", script=tuple(script), script_start=start, latency=latency)


def benford(latency=1, exponent_cap: int = DEFAULT_EXPONENT_CAP) -> OracleSpec:
    return OracleSpec("benford", latency=latency, exponent_cap=exponent_cap)


def query(spec: OracleSpec, index: int, budget: int) -> Verdict:
    if budget < 0:
        raise ContractError("budget must be non-negative")
    truth = spec.truth(index)
    cost = spec.cost(index)
    if truth is VerdictKind.NO_HALT or cost > budget:
        return Verdict(VerdictKind.NO_HALT, int(budget))
    return Verdict(truth, int(cost))


def truth_array(spec: OracleSpec, indices: np.ndarray) -> np.ndarray:
    """Eventual verdicts as int8 codes: 1 accept, 0 reject, -1 never halts."""
    indices = np.asarray(indices, dtype=np.int64)
    if spec.variant == "coin":
        return coin_verdicts(spec.seed, spec.p, indices).astype(np.int8)
    if spec.variant == "constant":
        return np.full(indices.shape, 1 if spec.accept else 0, dtype=np.int8)
    code = {VerdictKind.ACCEPT: 1, VerdictKind.REJECT: 0, VerdictKind.NO_HALT: -1}
    return np.array([code[spec.truth(int(i))] for i in indices], dtype=np.int8)


"""Single-tape machines over {0, 1, blank}: encoding, simulation, pools.

Encoding grammar (bit-exact, self-delimiting):

    code   := gamma(s) entry{3*s}
    gamma  := (L-1) zeros, then the L-bit binary form of s   (Elias gamma)
    entry  := op:2 write:2 next:w        with w = (s-1).bit_length()

    op     00 halt-reject | 01 halt-accept | 10 move-left | 11 move-right
    write  00 '0' | 01 '1' | 10 blank       (11 is malformed)
    next   target state, must be < s

Entries are row-major: state 0 reading 0, 1, blank, then state 1, ...
Halting entries must carry zero write/next fields, so every table has
exactly one code.  The state count fixes the total length, which makes
the code set prefix-free.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import BudgetError, DecodeError, EncodeError

BLANK = 2
SYMBOLS = (0, 1, BLANK)
SYMBOL_CHARS = "01_"

HALT_REJECT, HALT_ACCEPT, LEFT, RIGHT = 0, 1, 2, 3

DEFAULT_MAX_STATES = 64
DEFAULT_MEMBER_CAP = 200_000


class Halt(Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"
    OUT_OF_BUDGET = "OutOfBudget"


class Action(NamedTuple):
    op: int
    write: int = 0
    next: int = 0

    @property
    def halts(self) -> bool:
        return self.op in (HALT_REJECT, HALT_ACCEPT)


ACCEPT_ACTION = Action(HALT_ACCEPT)
REJECT_ACTION = Action(HALT_REJECT)

# rows[state][symbol] -> Action
Table = tuple[tuple[Action, Action, Action], ...]


@dataclass(frozen=True)
class SimOutcome:
    kind: Halt
    steps_used: int

    def __str__(self) -> str:
        return f"{self.kind.value}, steps={self.steps_used}"


@dataclass(frozen=True)
class MachineCode:
    bits: str
    table: Table

    @property
    def k(self) -> int:
        return len(self.bits)

    @property
    def n_states(self) -> int:
        return len(self.table)

    def hex(self) -> str:
        return to_hex(self.bits)


# -- bit helpers ---------------------------------------------------------

def _bits_str(bits: str | Iterable[int]) -> str:
    if isinstance(bits, str):
        if set(bits) - {"0", "1"}:
            raise DecodeError("bits", "bit string may only contain '0' and '1'")
        return bits
    return "".join("1" if b else "0" for b in bits)


def gamma_encode(n: int) -> str:
    if n <= 0:
        raise EncodeError("Elias gamma encodes positive integers only")
    b = bin(n)[2:]
    return "0" * (len(b) - 1) + b


def gamma_decode(bits: str, pos: int = 0) -> tuple[int, int]:
    """Decode one gamma code starting at ``pos``; returns (value, new_pos)."""
    zeros = 0
    while pos + zeros < len(bits) and bits[pos + zeros] == "0":
        zeros += 1
    end = pos + 2 * zeros + 1
    if end > len(bits):
        raise DecodeError("state_count", "truncated Elias gamma prefix")
    return int(bits[pos + zeros:end], 2), end


def to_hex(bits: str) -> str:
    """Hex dump with explicit bit length, e.g. ``'f8/5'``; zero-padded on the right."""
    if not bits:
        return "/0"
    pad = (-len(bits)) % 4
    value = int(bits + "0" * pad, 2)
    width = (len(bits) + pad) // 4
    return f"{value:0{width}x}/{len(bits)}"


def from_hex(text: str) -> str:
    try:
        digits, length = text.strip().split("/")
        k = int(length)
        value = int(digits, 16) if digits else 0
    except ValueError as exc:
        raise DecodeError("hex", f"expected '<hex digits>/<bit length>', got {text!r}") from exc
    total = 4 * len(digits)
    if k < 0 or k > total or total - k >= 4:
        raise DecodeError("hex", f"bit length {k} does not match {len(digits)} hex digits")
    bits = format(value, f"0{total}b") if total else ""
    if set(bits[k:]) - {"0"}:
        raise DecodeError("hex", "padding bits beyond the declared length must be zero")
    return bits[:k]


# -- encode / decode ------------------------------------------------------

def _validate_table(table: Sequence[Sequence[Action]], max_states: int) -> Table:
    s = len(table)
    if s < 1:
        raise EncodeError("table needs at least one state")
    if s > max_states:
        raise EncodeError(f"table has {s} states, more than the configured maximum {max_states}")
    rows = []
    for q, row in enumerate(table):
        if len(row) != 3:
            raise EncodeError(f"state {q}: expected 3 transitions (0, 1, blank), got {len(row)}")
        out = []
        for sym, act in zip(SYMBOLS, row):
            act = Action(*act)
            if act.op not in (HALT_REJECT, HALT_ACCEPT, LEFT, RIGHT):
                raise EncodeError(f"state {q} symbol {sym}: bad op {act.op}")
            if act.halts:
                act = Action(act.op)
            elif act.write not in SYMBOLS or not 0 <= act.next < s:
                raise EncodeError(f"state {q} symbol {sym}: bad write/next in {act}")
            out.append(act)
        rows.append(tuple(out))
    return tuple(rows)


def encode_machine(table: Sequence[Sequence[Action]], max_states: int = DEFAULT_MAX_STATES) -> MachineCode:
    table = _validate_table(table, max_states)
    s = len(table)
    w = (s - 1).bit_length()
    parts = [gamma_encode(s)]
    for row in table:
        for act in row:
            parts.append(format(act.op, "02b"))
            parts.append(format(act.write, "02b"))
            if w:
                parts.append(format(act.next, f"0{w}b"))
    return MachineCode("".join(parts), table)


def decode_machine(bits: str | Iterable[int], max_states: int = DEFAULT_MAX_STATES) -> tuple[MachineCode, int]:
    """Decode the code at the start of ``bits``; returns (machine, bits consumed)."""
    bits = _bits_str(bits)
    if not bits:
        raise DecodeError("state_count", "empty bit sequence")
    s, pos = gamma_decode(bits, 0)
    if s > max_states:
        raise DecodeError("state_count", f"{s} states exceeds the maximum {max_states}")
    w = (s - 1).bit_length()
    width = 4 + w
    end = pos + 3 * s * width
    if end > len(bits):
        raise DecodeError("transitions", f"need {end} bits for {s} states, have {len(bits)}")
    rows = []
    for q in range(s):
        row = []
        for sym in SYMBOLS:
            op = int(bits[pos:pos + 2], 2)
            write = int(bits[pos + 2:pos + 4], 2)
            nxt = int(bits[pos + 4:pos + width], 2) if w else 0
            where = f"state {q} symbol {SYMBOL_CHARS[sym]}"
            if op in (HALT_REJECT, HALT_ACCEPT):
                if write or nxt:
                    raise DecodeError("halt_padding", f"{where}: halting entry has nonzero fields")
            else:
                if write == 3:
                    raise DecodeError("write", f"{where}: write symbol 11 is undefined")
                if nxt >= s:
                    raise DecodeError("next", f"{where}: next state {nxt} >= {s}")
            row.append(Action(op, write, nxt) if op >= LEFT else Action(op))
            pos += width
        rows.append(tuple(row))
    return MachineCode(bits[:end], tuple(rows)), end


def code_length(n_states: int) -> int:
    return len(gamma_encode(n_states)) + 3 * n_states * (4 + (n_states - 1).bit_length())


# -- simulation -------------------------------------------------------------

def input_tape(n: int) -> list[int]:
    if n < 0:
        raise ValueError("inputs are natural numbers")
    return [int(c) for c in bin(n)[2:]]


def _runaway_states(table: Table, direction: int) -> frozenset[int]:
    """States from which a head sitting on fresh blank cells moves off forever."""
    doomed = set()
    for start in range(len(table)):
        seen = set()
        q = start
        while q not in seen:
            seen.add(q)
            act = table[q][BLANK]
            if act.op != direction:
                break
            q = act.next
        else:
            doomed.add(start)
    return frozenset(doomed)


_RUNAWAY_CACHE: dict[Table, tuple[frozenset[int], frozenset[int]]] = {}


def simulate(code: MachineCode | Table, n: int, budget: int) -> SimOutcome:
    """Run the machine on input ``n`` (binary, MSB first, head on the first bit).

    One applied transition, halting ones included, costs one step.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    table = code.table if isinstance(code, MachineCode) else code
    runaway = _RUNAWAY_CACHE.get(table)
    if runaway is None:
        runaway = _RUNAWAY_CACHE.setdefault(
            table, (_runaway_states(table, LEFT), _runaway_states(table, RIGHT)))
    run_left, run_right = runaway

    tape = input_tape(n)
    lo, hi = 0, len(tape)  # visited cells are tape[lo-offset .. hi)
    offset = 0
    head = 0
    q = 0
    steps = 0
    while steps < budget:
        if head < lo and q in run_left or head >= hi and q in run_right:
            return SimOutcome(Halt.OUT_OF_BUDGET, budget)
        i = head + offset
        if i < 0:
            tape[:0] = [BLANK] * (-i)
            offset -= i
            i = 0
        elif i >= len(tape):
            tape.extend([BLANK] * (i - len(tape) + 1))
        act = table[q][tape[i]]
        steps += 1
        if act.op == HALT_ACCEPT:
            return SimOutcome(Halt.ACCEPT, steps)
        if act.op == HALT_REJECT:
            return SimOutcome(Halt.REJECT, steps)
        tape[i] = act.write
        lo, hi = min(lo, head), max(hi, head + 1)
        head += 1 if act.op == RIGHT else -1
        q = act.next
    return SimOutcome(Halt.OUT_OF_BUDGET, budget)


# -- named machines -----------------------------------------------------------

def _bit_lengths(ns: np.ndarray) -> np.ndarray:
    ns = np.asarray(ns, dtype=np.int64)
    out = np.frexp(ns.astype(np.float64))[1].astype(np.int64)
    out[ns == 0] = 1
    return out


@dataclass(frozen=True)
class _Shortcut:
    """Closed-form behavior of a built-in: verdict and halting step count."""
    verdict: Callable[[int], bool | None]            # None = never halts
    steps: Callable[[int], int]                       # from the input's bit length
    verdict_array: Callable[[np.ndarray], np.ndarray]
    step_offset: int                                  # steps = bit_length + offset (or constant)
    constant_steps: bool = False


@dataclass(frozen=True, eq=False)
class Machine:
    """A pool member: a code (or a bare predicate) plus the bit length K it is charged."""
    name: str
    k: int
    code: MachineCode | None = None
    shortcut: _Shortcut | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"{self.name}: bit length must be >= 1, got {self.k}")
        if self.code is None and self.shortcut is None:
            raise ValueError(f"{self.name}: needs a code or a shortcut")

    def run(self, n: int, budget: int) -> SimOutcome:
        if self.shortcut is None:
            return simulate(self.code, n, budget)
        if budget < 0:
            raise ValueError("budget must be non-negative")
        verdict = self.shortcut.verdict(n)
        if verdict is None:
            return SimOutcome(Halt.OUT_OF_BUDGET, budget)
        need = self.shortcut.steps(n.bit_length() or 1)
        if need > budget:
            return SimOutcome(Halt.OUT_OF_BUDGET, budget)
        return SimOutcome(Halt.ACCEPT if verdict else Halt.REJECT, need)

    def accepts(self, n: int, budget: int) -> bool:
        return self.run(n, budget).kind is Halt.ACCEPT

    def accept_mask(self, ns: np.ndarray, budgets: np.ndarray) -> np.ndarray:
        """Vectorised ``accepts`` over arrays of inputs and per-input budgets."""
        ns = np.asarray(ns, dtype=np.int64)
        budgets = np.asarray(budgets)
        sc = self.shortcut
        if sc is None:
            return np.array([self.accepts(int(n), int(b)) for n, b in zip(ns, budgets)], dtype=bool)
        if sc.constant_steps:
            steps = np.full(ns.shape, sc.step_offset, dtype=np.int64)
        else:
            steps = _bit_lengths(ns) + sc.step_offset
        return sc.verdict_array(ns) & (steps <= budgets)

    def __str__(self) -> str:
        return self.name


def _row(*acts: Action) -> tuple[Action, Action, Action]:
    return tuple(acts)


def accept_all_table() -> Table:
    return (_row(ACCEPT_ACTION, ACCEPT_ACTION, ACCEPT_ACTION),)


def reject_all_table() -> Table:
    return (_row(REJECT_ACTION, REJECT_ACTION, REJECT_ACTION),)


def loop_table() -> Table:
    return (_row(Action(RIGHT, 0, 0), Action(RIGHT, 1, 0), Action(RIGHT, BLANK, 0)),)


def accept_evens_table() -> Table:
    # q0 scans right to the blank, q1 inspects the last bit
    return (
        _row(Action(RIGHT, 0, 0), Action(RIGHT, 1, 0), Action(LEFT, BLANK, 1)),
        _row(ACCEPT_ACTION, REJECT_ACTION, REJECT_ACTION),
    )


def residue_table(m: int, r: int) -> Table:
    """DFA over the input bits: state = value read so far mod m; accept iff it ends at r."""
    if m < 1 or not 0 <= r < m:
        raise ValueError(f"need m >= 1 and 0 <= r < m, got m={m}, r={r}")
    rows = []
    for q in range(m):
        on_blank = ACCEPT_ACTION if q == r else REJECT_ACTION
        rows.append(_row(
            Action(RIGHT, 0, (2 * q) % m),
            Action(RIGHT, 1, (2 * q + 1) % m),
            on_blank,
        ))
    return tuple(rows)


def _const(value):
    return lambda ns: np.full(np.shape(ns), value, dtype=bool)


def builtin(name: str, k: int) -> Machine:
    """Look up a named machine and charge it ``k`` bits.

    Names: accept-all, reject-all, loop, accept-evens, multiples-of-<m>,
    residue-<r>-mod-<m>, member-of-<a>,<b>,...
    """
    if name == "accept-all":
        sc = _Shortcut(lambda n: True, lambda b: 1, _const(True), 1, constant_steps=True)
        return Machine(name, k, encode_machine(accept_all_table()), sc)
    if name == "reject-all":
        sc = _Shortcut(lambda n: False, lambda b: 1, _const(False), 1, constant_steps=True)
        return Machine(name, k, encode_machine(reject_all_table()), sc)
    if name == "loop":
        sc = _Shortcut(lambda n: None, lambda b: 0, _const(False), 0, constant_steps=True)
        return Machine(name, k, encode_machine(loop_table()), sc)
    if name == "accept-evens":
        sc = _Shortcut(lambda n: n % 2 == 0, lambda b: b + 2, lambda ns: ns % 2 == 0, 2)
        return Machine(name, k, encode_machine(accept_evens_table()), sc)
    if name.startswith("multiples-of-"):
        m = _parse_int(name, name[len("multiples-of-"):])
        return _residue_machine(name, k, m, 0)
    if name.startswith("residue-") and "-mod-" in name:
        r_text, m_text = name[len("residue-"):].split("-mod-", 1)
        return _residue_machine(name, k, _parse_int(name, m_text), _parse_int(name, r_text))
    if name.startswith("member-of-"):
        try:
            members = frozenset(int(x) for x in name[len("member-of-"):].split(",") if x)
        except ValueError:
            raise DecodeError("machine", f"bad member list in {name!r}") from None
        lookup = np.array(sorted(members), dtype=np.int64)
        sc = _Shortcut(lambda n: n in members, lambda b: b + 1,
                       lambda ns: np.isin(ns, lookup), 1)
        return Machine(name, k, None, sc)
    raise DecodeError("machine", f"unknown built-in machine {name!r}")


def _parse_int(name: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DecodeError("machine", f"bad integer {text!r} in {name!r}") from None


def _residue_machine(name: str, k: int, m: int, r: int) -> Machine:
    if m < 1 or not 0 <= r < m:
        raise DecodeError("machine", f"{name!r}: need m >= 1 and 0 <= r < m")
    sc = _Shortcut(lambda n: n % m == r, lambda b: b + 1, lambda ns: ns % m == r, 1)
    return Machine(name, k, encode_machine(residue_table(m, r)), sc)


def from_code(code: MachineCode, k: int | None = None, name: str | None = None) -> Machine:
    return Machine(name or code.hex(), code.k if k is None else k, code)


# -- pools --------------------------------------------------------------------

@dataclass(frozen=True)
class MachinePool:
    members: tuple[Machine, ...]
    mode: str = "curated"  # or "enumerated"

    def __post_init__(self):
        names = [m.name for m in self.members]
        if len(set(names)) != len(names):
            raise ValueError(f"pool members must be distinct: {names}")
        if self.mode not in ("curated", "enumerated"):
            raise ValueError(f"unknown pool mode {self.mode!r}")

    @property
    def declared_k(self) -> dict[str, int]:
        return {m.name: m.k for m in self.members}

    def within(self, bit_budget: float) -> "MachinePool":
        """Members charged strictly fewer than ``bit_budget`` bits."""
        return MachinePool(tuple(m for m in self.members if m.k < bit_budget), self.mode)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)


def curated_pool(spec: Iterable[tuple[str, int]]) -> MachinePool:
    return MachinePool(tuple(builtin(name, k) for name, k in spec), "curated")


def _entry_bits(s: int) -> list[str]:
    """All legal entry encodings for an s-state table, in increasing bit order."""
    w = (s - 1).bit_length()
    out = []
    for op in range(4):
        if op < LEFT:
            out.append(format(op, "02b") + "00" + "0" * w)
            continue
        for write in SYMBOLS:
            for nxt in range(s):
                out.append(format(op, "02b") + format(write, "02b") + (format(nxt, f"0{w}b") if w else ""))
    return out


def pool_size(bit_budget: float) -> int:
    total = 0
    s = 1
    while code_length(s) < bit_budget:
        total += (2 + 6 * s) ** (3 * s)
        s += 1
    return total


def enumerate_pool(bit_budget: float, member_cap: int = DEFAULT_MEMBER_CAP,
                   max_states: int = DEFAULT_MAX_STATES) -> MachinePool:
    """Every valid code with k < bit_budget, sorted lexicographically by bits."""
    if bit_budget <= 0:
        raise ValueError("bit_budget must be positive")
    size = pool_size(bit_budget)
    if size > member_cap:
        raise BudgetError(f"bit budget {bit_budget} admits {size} machines, over the cap {member_cap}")
    codes = []
    s = 1
    while code_length(s) < bit_budget and s <= max_states:
        head = gamma_encode(s)
        for entries in itertools.product(_entry_bits(s), repeat=3 * s):
            bits = head + "".join(entries)
            codes.append(decode_machine(bits, max_states)[0])
        s += 1
    codes.sort(key=lambda c: c.bits)
    return MachinePool(tuple(from_code(c) for c in codes), "enumerated")


# -- plain-text tables ---------------------------------------------------------

def parse_table(text: str) -> Table:
    """Parse one transition per line.

        # state symbol -> write move next     (symbol/write in 0 1 _ ; move L/R)
        0 0 -> 0 R 0
        1 1 -> accept
        1 _ -> reject
    """
    entries: dict[tuple[int, int], Action] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            lhs, rhs = (part.split() for part in line.split("->"))
            q, sym = int(lhs[0]), SYMBOL_CHARS.index(lhs[1])
            if rhs == ["accept"]:
                act = ACCEPT_ACTION
            elif rhs == ["reject"]:
                act = REJECT_ACTION
            else:
                write, move, nxt = rhs
                act = Action({"L": LEFT, "R": RIGHT}[move], SYMBOL_CHARS.index(write), int(nxt))
        except (ValueError, KeyError, IndexError):
            raise DecodeError("table", f"line {lineno}: cannot parse {raw.strip()!r}") from None
        entries[(q, sym)] = act
    if not entries:
        raise DecodeError("table", "no transitions")
    n_states = max(q for q, _ in entries) + 1
    missing = [(q, SYMBOL_CHARS[s]) for q in range(n_states) for s in SYMBOLS if (q, s) not in entries]
    if missing:
        raise DecodeError("table", f"missing transitions for {missing}")
    return tuple(tuple(entries[(q, s)] for s in SYMBOLS) for q in range(n_states))


def format_table(table: Table) -> str:
    lines = []
    for q, row in enumerate(table):
        for sym, act in zip(SYMBOLS, row):
            if act.op == HALT_ACCEPT:
                rhs = "accept"
            elif act.op == HALT_REJECT:
                rhs = "reject"
            else:
                rhs = f"{SYMBOL_CHARS[act.write]} {'L' if act.op == LEFT else 'R'} {act.next}"
            lines.append(f"{q} {SYMBOL_CHARS[sym]} -> {rhs}")
    return "\n".join(lines) + "\n"


def parse_pool(text: str, base_dir=None) -> MachinePool:
    """Parse a pool file: one member per line.

        accept-all 1                 # built-in name, declared k
        table machines/z.tm 4        # table file (relative to base_dir), declared k
        code 8c2/13                  # hex code; k defaults to the true length
        code 8c2/13 6
    """
    from pathlib import Path

    members = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "table":
                path = Path(parts[1])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                code = encode_machine(parse_table(path.read_text()))
                members.append(from_code(code, int(parts[2]) if len(parts) > 2 else None, name=parts[1]))
            elif parts[0] == "code":
                code, used = decode_machine(from_hex(parts[1]))
                if used != code.k or code.k != len(from_hex(parts[1])):
                    raise DecodeError("code", "trailing bits after the machine code")
                members.append(from_code(code, int(parts[2]) if len(parts) > 2 else None))
            else:
                members.append(builtin(parts[0], int(parts[1])))
        except (IndexError, ValueError) as exc:
            raise DecodeError("pool", f"line {lineno}: {raw.strip()!r} ({exc})") from None
    return MachinePool(tuple(members), "curated")

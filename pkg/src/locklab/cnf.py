"""CNF encoding of netlists, miters, and an incremental SAT interface.

Literals are DIMACS-style signed integers. The encoder used by the attacks
(``Encoder``) works on *values* that are either a literal or a Python bool,
so constant nets are folded away before any clause is emitted.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from pysat.solvers import Solver

from .netlist import GateKind, Netlist, exhaustive_words, output_words, random_words

DEFAULT_CONFLICT_BUDGET = 10_000_000
DEFAULT_BACKEND = "cadical195"


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"  # resource budget exhausted


class BudgetExceeded(RuntimeError):
    """The SAT call hit its conflict budget before deciding."""


@dataclass
class SatOutcome:
    status: Status
    model: list[bool] | None = None  # model[v] for v in 1..variable_count (index 0 unused)

    @property
    def sat(self) -> bool:
        return self.status is Status.SAT

    @property
    def unsat(self) -> bool:
        return self.status is Status.UNSAT

    def value(self, lit: int | bool) -> bool:
        if isinstance(lit, bool):
            return lit
        v = self.model[abs(lit)]
        return v if lit > 0 else not v


@dataclass
class CnfFormula:
    variable_count: int = 0
    clauses: list[list[int]] = field(default_factory=list)
    net_to_var: dict[tuple[Hashable, str], int] = field(default_factory=dict)

    def __post_init__(self):
        self._solver = None
        self._fed = 0
        self._backend = DEFAULT_BACKEND

    def new_var(self) -> int:
        self.variable_count += 1
        return self.variable_count

    def add_clause(self, clause: Iterable[int]):
        c = list(clause)
        for lit in c:
            if lit == 0 or abs(lit) > self.variable_count:
                raise ValueError(f"literal {lit} out of range (1..{self.variable_count})")
        self.clauses.append(c)

    def add_clauses(self, clauses: Iterable[Iterable[int]]):
        for c in clauses:
            self.add_clause(c)

    def var(self, tag: Hashable, net: str) -> int:
        return self.net_to_var[(tag, net)]

    def copy(self) -> "CnfFormula":
        return CnfFormula(self.variable_count, [list(c) for c in self.clauses], dict(self.net_to_var))

    # -- solving -----------------------------------------------------------

    def solve(self, assumptions: Sequence[int] = (), conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET) -> SatOutcome:
        """Decide the formula under ``assumptions``; clauses added since the last call are fed incrementally."""
        if self._solver is None:
            self._solver = Solver(name=self._backend)
            self._fed = 0
        s = self._solver
        if self._fed < len(self.clauses):
            s.append_formula(self.clauses[self._fed:])
            self._fed = len(self.clauses)
        if conflict_budget is None:
            res = s.solve(assumptions=list(assumptions))
        else:
            # pysat reads a budget of 0 as "unlimited"
            s.conf_budget(max(1, conflict_budget))
            res = s.solve_limited(assumptions=list(assumptions))
        if res is None:
            return SatOutcome(Status.UNKNOWN)
        if not res:
            return SatOutcome(Status.UNSAT)
        model = [False] * (self.variable_count + 1)
        for lit in s.get_model() or ():
            if abs(lit) <= self.variable_count:
                model[abs(lit)] = lit > 0
        return SatOutcome(Status.SAT, model)

    def close(self):
        if self._solver is not None:
            self._solver.delete()
            self._solver = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def to_dimacs(self) -> str:
        lines = []
        for (tag, net), v in sorted(self.net_to_var.items(), key=lambda kv: kv[1]):
            lines.append(f"c {v} {tag} {net}")
        lines.append(f"p cnf {self.variable_count} {len(self.clauses)}")
        lines.extend(" ".join(map(str, c)) + " 0" for c in self.clauses)
        return "\n".join(lines) + "\n"


def solve(f: CnfFormula, assumptions: Sequence[int] = (),
          conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET) -> SatOutcome:
    return f.solve(assumptions, conflict_budget)


def check_model(clauses: Iterable[Sequence[int]], model: Sequence[bool]) -> bool:
    """Independent clause evaluator: True iff every clause has a true literal."""
    for c in clauses:
        if not any((model[abs(l)] if l > 0 else not model[abs(l)]) for l in c):
            return False
    return True


# -- plain Tseitin encoding ------------------------------------------------

def gate_clauses(kind: GateKind, o: int, ins: Sequence[int], new_var) -> list[list[int]]:
    """Consistency clauses for ``o = kind(ins)``; ``new_var`` supplies auxiliaries for wide XORs."""
    if kind in (GateKind.AND, GateKind.NAND):
        y = o if kind is GateKind.AND else -o
        return [[-y, a] for a in ins] + [[y] + [-a for a in ins]]
    if kind in (GateKind.OR, GateKind.NOR):
        y = o if kind is GateKind.OR else -o
        return [[y, -a] for a in ins] + [[-y] + list(ins)]
    if kind is GateKind.NOT:
        a = ins[0]
        return [[o, a], [-o, -a]]
    if kind is GateKind.BUF:
        a = ins[0]
        return [[-o, a], [o, -a]]
    if kind in (GateKind.XOR, GateKind.XNOR):
        out: list[list[int]] = []
        acc = ins[0]
        for j, b in enumerate(ins[1:], 1):
            last = j == len(ins) - 1
            t = (o if kind is GateKind.XOR else -o) if last else new_var()
            out += [[-t, acc, b], [-t, -acc, -b], [t, -acc, b], [t, acc, -b]]
            acc = t
        return out
    if kind is GateKind.MUX:
        s, d0, d1 = ins
        return [[s, -d0, o], [s, d0, -o], [-s, -d1, o], [-s, d1, -o]]
    if kind is GateKind.CONST0:
        return [[-o]]
    if kind is GateKind.CONST1:
        return [[o]]
    raise ValueError(kind)


def expected_clause_count(n: Netlist) -> int:
    total = 0
    for g in n.gates:
        k = len(g.fanins)
        if g.kind in (GateKind.AND, GateKind.NAND, GateKind.OR, GateKind.NOR):
            total += k + 1
        elif g.kind in (GateKind.NOT, GateKind.BUF):
            total += 2
        elif g.kind in (GateKind.XOR, GateKind.XNOR):
            total += 4 * (k - 1)
        elif g.kind is GateKind.MUX:
            total += 4
        else:
            total += 1
    return total


def tseitin_encode(n: Netlist, tag: Hashable = "A", f: CnfFormula | None = None,
                   shared: Mapping[str, int] | None = None) -> CnfFormula:
    """One variable per net plus per-gate consistency clauses.

    ``shared`` maps net names (inputs/keys) to existing variables of ``f``.
    """
    f = CnfFormula() if f is None else f
    shared = shared or {}
    for net in n.inputs + n.keys:
        f.net_to_var[(tag, net)] = shared[net] if net in shared else f.new_var()
    for gi in n.order:
        f.net_to_var[(tag, n.gates[gi].out)] = f.new_var()
    for gi in n.order:
        g = n.gates[gi]
        o = f.net_to_var[(tag, g.out)]
        ins = [f.net_to_var[(tag, x)] for x in g.fanins]
        f.add_clauses(gate_clauses(g.kind, o, ins, f.new_var))
    return f


class InterfaceMismatch(ValueError):
    pass


def build_miter(a: Netlist, b: Netlist, share: str = "inputs_and_keys") -> CnfFormula:
    """Two-copy miter; satisfiable iff some shared assignment makes an output differ."""
    if len(a.inputs) != len(b.inputs) or len(a.outputs) != len(b.outputs):
        raise InterfaceMismatch("netlists have different PI/PO widths")
    if share == "inputs_and_keys" and len(a.keys) != len(b.keys):
        raise InterfaceMismatch("key interfaces differ")
    if share not in ("inputs_only", "inputs_and_keys"):
        raise ValueError(f"unknown sharing regime {share!r}")
    f = tseitin_encode(a, "A")
    shared = {nb: f.var("A", na) for na, nb in zip(a.inputs, b.inputs)}
    if share == "inputs_and_keys":
        shared.update({kb: f.var("A", ka) for ka, kb in zip(a.keys, b.keys)})
    tseitin_encode(b, "B", f, shared)
    diffs = []
    for oa, ob in zip(a.outputs, b.outputs):
        x, y = f.var("A", oa), f.var("B", ob)
        d = f.new_var()
        f.add_clauses([[-d, x, y], [-d, -x, -y], [d, -x, y], [d, x, -y]])
        diffs.append(d)
    f.add_clause(diffs)
    return f


# -- constant-folding encoder ------------------------------------------------

Value = "int | bool"


class Encoder:
    """Emits clauses into a formula while folding constants and hashing AND terms.

    Values are literals (int) or bools; identical AND terms are shared via a
    structural hash local to this encoder, which is safe because every
    emitted definition is a full equivalence.
    """

    def __init__(self, f: CnfFormula):
        self.f = f
        self._and_cache: dict[tuple[int, ...], int] = {}
        self._xor_cache: dict[tuple[int, int], int] = {}

    def AND(self, vals: Iterable) -> "int | bool":
        lits = set()
        for v in vals:
            if v is False:
                return False
            if v is True:
                continue
            if -v in lits:
                return False
            lits.add(v)
        if not lits:
            return True
        if len(lits) == 1:
            return next(iter(lits))
        key = tuple(sorted(lits))
        o = self._and_cache.get(key)
        if o is None:
            o = self.f.new_var()
            self.f.clauses.extend([[-o, a] for a in key])
            self.f.clauses.append([o] + [-a for a in key])
            self._and_cache[key] = o
        return o

    def OR(self, vals: Iterable):
        return neg(self.AND(neg(v) for v in vals))

    def XOR2(self, a, b):
        if isinstance(a, bool):
            return neg(b) if a else b
        if isinstance(b, bool):
            return neg(a) if b else a
        if a == b:
            return False
        if a == -b:
            return True
        flip = (a < 0) != (b < 0)
        a, b = sorted((abs(a), abs(b)))
        o = self._xor_cache.get((a, b))
        if o is None:
            o = self.f.new_var()
            self.f.clauses.extend([[-o, a, b], [-o, -a, -b], [o, -a, b], [o, a, -b]])
            self._xor_cache[(a, b)] = o
        return -o if flip else o

    def MUX(self, s, d0, d1):
        if s is True:
            return d1
        if s is False:
            return d0
        if d0 == d1 and type(d0) is type(d1):
            return d0
        return self.OR([self.AND([s, d1]), self.AND([neg(s), d0])])

    def gate(self, kind: GateKind, ins: Sequence):
        if kind is GateKind.AND:
            return self.AND(ins)
        if kind is GateKind.NAND:
            return neg(self.AND(ins))
        if kind is GateKind.OR:
            return self.OR(ins)
        if kind is GateKind.NOR:
            return neg(self.OR(ins))
        if kind is GateKind.NOT:
            return neg(ins[0])
        if kind is GateKind.BUF:
            return ins[0]
        if kind in (GateKind.XOR, GateKind.XNOR):
            acc = ins[0]
            for b in ins[1:]:
                acc = self.XOR2(acc, b)
            return acc if kind is GateKind.XOR else neg(acc)
        if kind is GateKind.MUX:
            return self.MUX(*ins)
        if kind is GateKind.CONST0:
            return False
        if kind is GateKind.CONST1:
            return True
        raise ValueError(kind)

    def netlist(self, n: Netlist, pi_vals: Sequence, key_vals: Sequence) -> list:
        """Instantiate ``n``; returns the value of every net (compiled index order)."""
        c = n.compiled
        vals: list = [False] * c.size
        for i, v in zip(c.pi_idx, pi_vals):
            vals[i] = v
        for i, v in zip(c.key_idx, key_vals):
            vals[i] = v
        for out, kind, fi in c.ops:
            vals[out] = self.gate(kind, [vals[j] for j in fi])
        return vals

    def outputs(self, n: Netlist, pi_vals: Sequence, key_vals: Sequence) -> list:
        vals = self.netlist(n, pi_vals, key_vals)
        return [vals[i] for i in n.compiled.po_idx]

    def assert_value(self, v, target: bool) -> bool:
        """Constrain value ``v`` to ``target``; returns False if that is a constant contradiction."""
        if isinstance(v, bool):
            if v != target:
                self.f.clauses.append([])
                return False
            return True
        self.f.clauses.append([v if target else -v])
        return True

    def differ(self, xs: Sequence, ys: Sequence):
        """Value that is true iff some pair differs."""
        return self.OR(self.XOR2(x, y) for x, y in zip(xs, ys))


def neg(v):
    if isinstance(v, bool):
        return not v
    return -v


# -- equivalence checking ----------------------------------------------------

@dataclass
class EquivalenceResult:
    equivalent: bool
    counterexample: tuple[tuple[bool, ...], tuple[bool, ...]] | None = None  # (inputs, keys)
    method: str = "sat"


def random_sim_mismatch(a: Netlist, b: Netlist, vectors: int = 10_000, seed: int = 0,
                        share_keys: bool = True):
    """Return (inputs, keys) of a mismatching random vector, or None."""
    rng = random.Random(seed)
    pi = random_words(len(a.inputs), vectors, rng)
    keys = random_words(len(a.keys), vectors, rng) if share_keys else []
    oa = output_words(a, pi, keys if share_keys else [0] * len(a.keys), vectors)
    ob = output_words(b, pi, keys if share_keys else [0] * len(b.keys), vectors)
    diff = 0
    for x, y in zip(oa, ob):
        diff |= x ^ y
    if not diff:
        return None
    bit = (diff & -diff).bit_length() - 1
    return (tuple(bool(w >> bit & 1) for w in pi), tuple(bool(w >> bit & 1) for w in keys))


def check_equivalence(a: Netlist, b: Netlist, share: str = "inputs_and_keys",
                      conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET,
                      presimulate: int = 0, fixed_keys_b: Sequence[bool] | None = None) -> EquivalenceResult:
    """Combinational equivalence via a constant-folding miter.

    With ``share="inputs_only"`` the key inputs of ``b`` are either fixed
    (``fixed_keys_b``) or left free alongside ``a``'s keys, and equivalence
    means "for all inputs and keys".
    """
    if len(a.inputs) != len(b.inputs) or len(a.outputs) != len(b.outputs):
        raise InterfaceMismatch("netlists have different PI/PO widths")
    if share == "inputs_and_keys":
        if len(a.keys) != len(b.keys):
            raise InterfaceMismatch("key interfaces differ")
        if presimulate:
            cex = random_sim_mismatch(a, b, presimulate)
            if cex is not None:
                return EquivalenceResult(False, cex, "sim")
    f = CnfFormula()
    enc = Encoder(f)
    pis = [f.new_var() for _ in a.inputs]
    ka = [f.new_var() for _ in a.keys]
    if share == "inputs_and_keys":
        kb = ka
    elif fixed_keys_b is not None:
        kb = [bool(x) for x in fixed_keys_b]
    else:
        kb = [f.new_var() for _ in b.keys]
    oa = enc.outputs(a, pis, ka)
    ob = enc.outputs(b, pis, kb)
    d = enc.differ(oa, ob)
    if d is False:
        return EquivalenceResult(True)
    if d is not True:
        f.clauses.append([d])
    res = f.solve(conflict_budget=conflict_budget)
    f.close()
    if res.status is Status.UNKNOWN:
        raise BudgetExceeded("equivalence check exceeded its conflict budget")
    if res.unsat:
        return EquivalenceResult(True)
    return EquivalenceResult(False, (tuple(res.value(v) for v in pis), tuple(res.value(v) for v in ka)))


def truth_table_equal(a: Netlist, b: Netlist, share_keys: bool = True) -> bool:
    """Exhaustive comparison over all inputs (and shared keys); for small interfaces."""
    nvars = len(a.inputs) + (len(a.keys) if share_keys else 0)
    if nvars > 22:
        raise ValueError("too many inputs for exhaustive comparison")
    words = exhaustive_words(nvars)
    width = 1 << nvars
    pi = words[:len(a.inputs)]
    keys = words[len(a.inputs):] if share_keys else [0] * len(a.keys)
    return output_words(a, pi, keys, width) == output_words(b, pi, keys, width)

"""Gate-level combinational netlists: BENCH I/O, simulation, stats, fingerprints."""
from __future__ import annotations

import hashlib
import random
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Sequence

DEFAULT_KEY_PREFIX = "keyinput"


class GateKind(str, Enum):
    AND = "AND"
    OR = "OR"
    NAND = "NAND"
    NOR = "NOR"
    NOT = "NOT"
    BUF = "BUF"
    XOR = "XOR"
    XNOR = "XNOR"
    MUX = "MUX"
    CONST0 = "CONST0"
    CONST1 = "CONST1"

    def arity_ok(self, n: int) -> bool:
        if self in (GateKind.NOT, GateKind.BUF):
            return n == 1
        if self is GateKind.MUX:
            return n == 3
        if self in (GateKind.CONST0, GateKind.CONST1):
            return n == 0
        return n >= 2


COMMUTATIVE = frozenset(
    {GateKind.AND, GateKind.OR, GateKind.NAND, GateKind.NOR, GateKind.XOR, GateKind.XNOR}
)

_KIND_ALIASES = {"BUFF": GateKind.BUF, "INV": GateKind.NOT, "GND": GateKind.CONST0, "VDD": GateKind.CONST1}


class NetlistError(ValueError):
    """Structural problem in a netlist (cycle, undriven net, arity...)."""


class BenchParseError(NetlistError):
    def __init__(self, msg: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Gate:
    out: str
    kind: GateKind
    fanins: tuple[str, ...]


@dataclass(frozen=True)
class Netlist:
    """Immutable combinational netlist.

    ``gates`` keeps the construction order; ``order`` is a topological order
    over gate indices computed (and validated) once.
    """

    inputs: tuple[str, ...]
    keys: tuple[str, ...]
    outputs: tuple[str, ...]
    gates: tuple[Gate, ...]
    name: str = field(default="top", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "keys", tuple(self.keys))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "gates", tuple(self.gates))
        self._validate()

    def _validate(self):
        sources = set()
        for net in self.inputs + self.keys:
            if net in sources:
                raise NetlistError(f"duplicate input net {net!r}")
            sources.add(net)
        if set(self.inputs) & set(self.keys):
            raise NetlistError("key inputs overlap primary inputs")
        for g in self.gates:
            if not g.kind.arity_ok(len(g.fanins)):
                raise NetlistError(f"arity mismatch: {g.kind.value} with {len(g.fanins)} fanins at {g.out!r}")
            if g.out in sources:
                raise NetlistError(f"duplicate driver for net {g.out!r}")
            sources.add(g.out)
        for g in self.gates:
            for f in g.fanins:
                if f not in sources:
                    raise NetlistError(f"undriven net {f!r} (fanin of {g.out!r})")
        for o in self.outputs:
            if o not in sources:
                raise NetlistError(f"undriven primary output {o!r}")
        self.order  # raises on cycles

    # -- derived structure -------------------------------------------------

    @cached_property
    def driver(self) -> dict[str, int]:
        return {g.out: i for i, g in enumerate(self.gates)}

    @cached_property
    def order(self) -> tuple[int, ...]:
        driver = {g.out: i for i, g in enumerate(self.gates)}
        indeg = [0] * len(self.gates)
        users: list[list[int]] = [[] for _ in self.gates]
        for i, g in enumerate(self.gates):
            for f in g.fanins:
                j = driver.get(f)
                if j is not None:
                    indeg[i] += 1
                    users[j].append(i)
        ready = deque(i for i, d in enumerate(indeg) if d == 0)
        out = []
        while ready:
            i = ready.popleft()
            out.append(i)
            for u in users[i]:
                indeg[u] -= 1
                if indeg[u] == 0:
                    ready.append(u)
        if len(out) != len(self.gates):
            stuck = next(self.gates[i].out for i, d in enumerate(indeg) if d > 0)
            raise NetlistError(f"cycle detected through net {stuck!r}")
        return tuple(out)

    @cached_property
    def compiled(self) -> "_Compiled":
        return _Compiled(self)

    @property
    def p(self) -> int:
        return len(self.keys)

    @property
    def nets(self) -> list[str]:
        return list(self.inputs) + list(self.keys) + [g.out for g in self.gates]

    def fanout_counts(self) -> dict[str, int]:
        cnt = {n: 0 for n in self.nets}
        for g in self.gates:
            for f in g.fanins:
                cnt[f] += 1
        return cnt

    def replace(self, **kw) -> "Netlist":
        args = dict(inputs=self.inputs, keys=self.keys, outputs=self.outputs, gates=self.gates, name=self.name)
        args.update(kw)
        return Netlist(**args)

    def count_kinds(self) -> dict[GateKind, int]:
        out: dict[GateKind, int] = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def __repr__(self):
        return (f"Netlist({self.name!r}, pi={len(self.inputs)}, keys={len(self.keys)}, "
                f"po={len(self.outputs)}, gates={len(self.gates)})")


class _Compiled:
    """Integer-indexed view used by the simulators and encoders."""

    def __init__(self, n: Netlist):
        self.index: dict[str, int] = {}
        for net in n.inputs + n.keys:
            self.index[net] = len(self.index)
        self.n_sources = len(self.index)
        self.ops: list[tuple[int, GateKind, tuple[int, ...]]] = []
        for gi in n.order:
            g = n.gates[gi]
            self.index[g.out] = len(self.index)
        for gi in n.order:
            g = n.gates[gi]
            self.ops.append((self.index[g.out], g.kind, tuple(self.index[f] for f in g.fanins)))
        self.pi_idx = [self.index[x] for x in n.inputs]
        self.key_idx = [self.index[x] for x in n.keys]
        self.po_idx = [self.index[x] for x in n.outputs]
        self.size = len(self.index)


# -- gate evaluation ---------------------------------------------------------

def eval_gate(kind: GateKind, vals: Sequence[int], mask: int) -> int:
    """Evaluate one gate bit-parallel over ``mask``-wide words."""
    if kind is GateKind.AND or kind is GateKind.NAND:
        r = mask
        for v in vals:
            r &= v
        return r if kind is GateKind.AND else r ^ mask
    if kind is GateKind.OR or kind is GateKind.NOR:
        r = 0
        for v in vals:
            r |= v
        return r if kind is GateKind.OR else r ^ mask
    if kind is GateKind.XOR or kind is GateKind.XNOR:
        r = 0
        for v in vals:
            r ^= v
        return r if kind is GateKind.XOR else r ^ mask
    if kind is GateKind.NOT:
        return vals[0] ^ mask
    if kind is GateKind.BUF:
        return vals[0]
    if kind is GateKind.MUX:
        s, d0, d1 = vals
        return (s & d1) | ((s ^ mask) & d0)
    if kind is GateKind.CONST0:
        return 0
    if kind is GateKind.CONST1:
        return mask
    raise NetlistError(f"unknown gate kind {kind}")


def sim_words(n: Netlist, pi_words: Sequence[int], key_words: Sequence[int], width: int) -> list[int]:
    """Bit-parallel simulation; returns one ``width``-bit word per net (compiled index)."""
    c = n.compiled
    if len(pi_words) != len(c.pi_idx):
        raise ValueError(f"expected {len(c.pi_idx)} input words, got {len(pi_words)}")
    if len(key_words) != len(c.key_idx):
        raise ValueError(f"expected {len(c.key_idx)} key words, got {len(key_words)}")
    mask = (1 << width) - 1
    vals = [0] * c.size
    for i, w in zip(c.pi_idx, pi_words):
        vals[i] = w & mask
    for i, w in zip(c.key_idx, key_words):
        vals[i] = w & mask
    for out, kind, fi in c.ops:
        vals[out] = eval_gate(kind, [vals[j] for j in fi], mask)
    return vals


def output_words(n: Netlist, pi_words: Sequence[int], key_words: Sequence[int], width: int) -> list[int]:
    vals = sim_words(n, pi_words, key_words, width)
    return [vals[i] for i in n.compiled.po_idx]


def simulate(n: Netlist, inputs: Sequence[bool], key: Sequence[bool] = ()) -> list[bool]:
    if len(inputs) != len(n.inputs):
        raise ValueError(f"input vector has length {len(inputs)}, netlist has {len(n.inputs)} inputs")
    if len(key) != len(n.keys):
        raise ValueError(f"key has length {len(key)}, netlist has {len(n.keys)} key inputs")
    outs = output_words(n, [int(bool(b)) for b in inputs], [int(bool(b)) for b in key], 1)
    return [bool(w) for w in outs]


def exhaustive_words(nvars: int) -> list[int]:
    """Words enumerating all 2**nvars assignments; variable j toggles every 2**j rows."""
    total = 1 << nvars
    words = []
    for j in range(nvars):
        half = 1 << j
        w = ((1 << half) - 1) << half
        length = half << 1
        while length < total:
            w |= w << length
            length <<= 1
        words.append(w)
    return words


def random_words(count: int, width: int, rng: random.Random) -> list[int]:
    return [rng.getrandbits(width) for _ in range(count)]


# -- BENCH format ----------------------------------------------------------

_IO_RE = re.compile(r"^(INPUT|OUTPUT)\s*\(\s*([^\s()]+)\s*\)$", re.IGNORECASE)
_GATE_RE = re.compile(r"^([^\s=()]+)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)$")
_SUFFIX_RE = re.compile(r"(\d+)$")


def _key_sort_key(name: str):
    m = _SUFFIX_RE.search(name)
    return (int(m.group(1)) if m else -1, name)


def parse_bench(text: str, key_prefix: str = DEFAULT_KEY_PREFIX, name: str = "top") -> Netlist:
    inputs: list[str] = []
    keys: list[str] = []
    outputs: list[str] = []
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        col = len(raw) - len(raw.lstrip()) + 1
        m = _IO_RE.match(line)
        if m:
            what, net = m.group(1).upper(), m.group(2)
            if what == "INPUT":
                (keys if net.startswith(key_prefix) else inputs).append(net)
            else:
                outputs.append(net)
            continue
        m = _GATE_RE.match(line)
        if not m:
            raise BenchParseError(f"cannot parse {line!r}", lineno, col)
        out, kname, args = m.group(1), m.group(2).upper(), m.group(3).strip()
        kind = _KIND_ALIASES.get(kname)
        if kind is None:
            try:
                kind = GateKind(kname)
            except ValueError:
                raise BenchParseError(f"unknown gate kind {m.group(2)!r}", lineno, raw.find(m.group(2)) + 1) from None
        fanins = tuple(a.strip() for a in args.split(",")) if args else ()
        if any(not a or re.search(r"[\s()]", a) for a in fanins):
            raise BenchParseError(f"malformed fanin list {args!r}", lineno, raw.find("(") + 2)
        if not kind.arity_ok(len(fanins)):
            raise BenchParseError(f"arity mismatch: {kind.value} takes {len(fanins)} fanins", lineno, col)
        gates.append(Gate(out, kind, fanins))
    keys.sort(key=_key_sort_key)
    return Netlist(inputs, keys, outputs, gates, name=name)


def write_bench(n: Netlist) -> str:
    lines = [f"INPUT({x})" for x in n.inputs]
    lines += [f"INPUT({k})" for k in n.keys]
    lines += [f"OUTPUT({o})" for o in n.outputs]
    for g in n.gates:
        lines.append(f"{g.out} = {g.kind.value}({', '.join(g.fanins)})")
    return "\n".join(lines) + "\n"


def read_bench(path, key_prefix: str = DEFAULT_KEY_PREFIX) -> Netlist:
    from pathlib import Path

    p = Path(path)
    return parse_bench(p.read_text(encoding="utf-8"), key_prefix=key_prefix, name=p.stem)


def format_key(bits: Sequence[bool]) -> str:
    return "".join("1" if b else "0" for b in bits)


def parse_key(text: str) -> tuple[bool, ...]:
    s = text.strip()
    if any(ch not in "01" for ch in s):
        raise ValueError(f"key file must contain only 0/1 characters, got {s[:20]!r}")
    return tuple(ch == "1" for ch in s)


# -- complexity proxies ----------------------------------------------------

DEFAULT_AREA_WEIGHTS: Mapping[GateKind, int] = {
    GateKind.NOT: 1,
    GateKind.BUF: 1,
    GateKind.MUX: 4,
    GateKind.CONST0: 0,
    GateKind.CONST1: 0,
}


def gate_area(kind: GateKind, nfanin: int, weights: Mapping[GateKind, int] | None = None) -> int:
    w = DEFAULT_AREA_WEIGHTS if weights is None else weights
    if kind in w:
        return w[kind]
    # 2-input gates cost 2, each extra fanin +1
    return 2 + max(0, nfanin - 2)


@dataclass(frozen=True)
class ComplexityStats:
    gate_count: int
    depth: int
    literal_count: int
    area_proxy: float
    power_proxy: float

    def as_dict(self) -> dict:
        return {
            "gate_count": self.gate_count,
            "depth": self.depth,
            "literal_count": self.literal_count,
            "area_proxy": self.area_proxy,
            "power_proxy": self.power_proxy,
        }


STAT_FIELDS = ("gate_count", "depth", "literal_count", "area_proxy", "power_proxy")


def levels(n: Netlist) -> list[int]:
    c = n.compiled
    lv = [0] * c.size
    for out, _kind, fi in c.ops:
        lv[out] = 1 + max((lv[j] for j in fi), default=-1)
    return lv


def depth(n: Netlist) -> int:
    lv = levels(n)
    return max((lv[i] for i in n.compiled.po_idx), default=0)


def stats(n: Netlist, vectors: int = 1024, seed: int = 0,
          weights: Mapping[GateKind, int] | None = None) -> ComplexityStats:
    """Gate count, unit-delay depth, literals, area and toggle-weighted power proxies."""
    if not n.gates:
        return ComplexityStats(0, 0, 0, 0.0, 0.0)
    c = n.compiled
    rng = random.Random(seed)
    vals = sim_words(n, random_words(len(n.inputs), vectors, rng), random_words(len(n.keys), vectors, rng), vectors)
    pair_mask = (1 << (vectors - 1)) - 1
    area = 0
    power = 0.0
    literals = 0
    for out, kind, fi in c.ops:
        w = gate_area(kind, len(fi), weights)
        area += w
        literals += len(fi)
        v = vals[out]
        toggles = ((v ^ (v >> 1)) & pair_mask).bit_count()
        power += toggles / vectors * w
    return ComplexityStats(len(n.gates), depth(n), literals, float(area), round(power, 9))


# -- structural fingerprint ------------------------------------------------

def _h(*parts) -> bytes:
    m = hashlib.blake2b(digest_size=16)
    for p in parts:
        m.update(p if isinstance(p, bytes) else str(p).encode())
        m.update(b"|")
    return m.digest()


def canonical_labels(n: Netlist) -> tuple[list[bytes], list[bytes]]:
    """Per-net (cone label, context label) pairs independent of internal net names.

    Cone labels are Merkle hashes over (kind, fanin labels); context labels
    hash each net's fanout environment so that identical cones with different
    uses stay distinguishable.
    """
    c = n.compiled
    up: list[bytes] = [b""] * c.size
    for pos, i in enumerate(c.pi_idx):
        up[i] = _h("PI", pos)
    for pos, i in enumerate(c.key_idx):
        up[i] = _h("KEY", pos)
    for out, kind, fi in c.ops:
        labels = [up[j] for j in fi]
        if kind in COMMUTATIVE:
            labels.sort()
        up[out] = _h(kind.value, *labels)
    ctx: list[list[bytes]] = [[] for _ in range(c.size)]
    for pos, i in enumerate(c.po_idx):
        ctx[i].append(_h("PO", pos))
    down: list[bytes] = [b""] * c.size
    for out, kind, fi in reversed(c.ops):
        down[out] = _h(up[out], *sorted(ctx[out]))
        for pin, j in enumerate(fi):
            pin_tag = "c" if kind in COMMUTATIVE else pin
            ctx[j].append(_h(down[out], pin_tag))
    for i in range(c.n_sources):
        down[i] = _h(up[i], *sorted(ctx[i]))
    return up, down


def canonical_form(n: Netlist) -> bytes:
    up, down = canonical_labels(n)
    c = n.compiled
    gate_entries = sorted(_h(up[out], down[out]) for out, _k, _f in c.ops)
    head = f"pi={len(n.inputs)};key={len(n.keys)};po={len(n.outputs)};".encode()
    po = b"".join(up[i] for i in c.po_idx)
    return head + po + b"".join(gate_entries)


def structural_signature(n: Netlist) -> str:
    """SHA-256 hex digest of the name-independent canonical structure."""
    return hashlib.sha256(canonical_form(n)).hexdigest()


# -- logic cones -----------------------------------------------------------

def transitive_fanin(n: Netlist, roots: Iterable[str]) -> set[str]:
    seen: set[str] = set()
    stack = list(roots)
    driver = n.driver
    while stack:
        net = stack.pop()
        if net in seen:
            continue
        seen.add(net)
        gi = driver.get(net)
        if gi is not None:
            stack.extend(n.gates[gi].fanins)
    return seen


def transitive_fanout(n: Netlist, sources: Iterable[str]) -> set[str]:
    hit = set(sources)
    for gi in n.order:
        g = n.gates[gi]
        if any(f in hit for f in g.fanins):
            hit.add(g.out)
    return hit


def extract_logic_cone(n: Netlist, output: str) -> Netlist:
    if output not in n.outputs:
        raise KeyError(f"{output!r} is not a primary output")
    tfi = transitive_fanin(n, [output])
    return Netlist(
        [x for x in n.inputs if x in tfi],
        [k for k in n.keys if k in tfi],
        [output],
        [g for g in n.gates if g.out in tfi],
        name=f"{n.name}_cone_{output}",
    )


def sweep(n: Netlist) -> Netlist:
    """Drop gates that reach no primary output."""
    live = transitive_fanin(n, n.outputs)
    if len(live) >= len(n.gates) + len(n.inputs) + len(n.keys):
        return n
    return n.replace(gates=[g for g in n.gates if g.out in live])


def propagate_constants(n: Netlist, values: Mapping[str, bool]) -> Netlist:
    """Fix the given inputs to constants, fold them through the logic and sweep.

    Assigned inputs leave the interface. Gates reduced to one live fanin
    become BUF or NOT (nets keep their names); outputs that turn constant are
    driven by CONST gates.
    """
    for x in values:
        if x not in n.inputs and x not in n.keys:
            raise KeyError(f"{x!r} is not an input")
    const: dict[str, bool] = {x: bool(v) for x, v in values.items()}
    new: dict[str, Gate] = {}
    for gi in n.order:
        g = n.gates[gi]
        k = g.kind
        cv = [const.get(f) for f in g.fanins]
        live = [f for f, c in zip(g.fanins, cv) if c is None]
        res = None  # constant result
        kind, fan = k, tuple(g.fanins)
        if k in (GateKind.CONST0, GateKind.CONST1):
            res = k is GateKind.CONST1
        elif k in (GateKind.BUF, GateKind.NOT):
            if cv[0] is not None:
                res = cv[0] ^ (k is GateKind.NOT)
        elif k in (GateKind.AND, GateKind.NAND, GateKind.OR, GateKind.NOR):
            ctrl = k in (GateKind.OR, GateKind.NOR)  # controlling value
            inv = k in (GateKind.NAND, GateKind.NOR)
            if any(c is ctrl for c in cv):
                res = ctrl ^ inv
            elif not live:
                res = (not ctrl) ^ inv
            elif len(live) == 1:
                kind, fan = (GateKind.NOT if inv else GateKind.BUF), (live[0],)
            elif len(live) < len(fan):
                fan = tuple(live)
        elif k in (GateKind.XOR, GateKind.XNOR):
            flip = (k is GateKind.XNOR) ^ (sum(1 for c in cv if c) % 2 == 1)
            if not live:
                res = flip
            elif len(live) == 1:
                kind, fan = (GateKind.NOT if flip else GateKind.BUF), (live[0],)
            elif len(live) < len(fan):
                kind, fan = (GateKind.XNOR if flip else GateKind.XOR), tuple(live)
        elif k is GateKind.MUX:
            s, d0, d1 = g.fanins
            cs, c0, c1 = cv
            if cs is not None:
                pick, cp = (d1, c1) if cs else (d0, c0)
                if cp is not None:
                    res = cp
                else:
                    kind, fan = GateKind.BUF, (pick,)
            elif c0 is not None and c1 is not None:
                if c0 == c1:
                    res = c0
                else:
                    kind, fan = (GateKind.BUF if c1 else GateKind.NOT), (s,)
        if res is not None:
            const[g.out] = res
        else:
            new[g.out] = Gate(g.out, kind, fan)
    gates = []
    needed_consts: set[str] = set()
    for g in n.gates:
        ng = new.get(g.out)
        if ng is not None:
            gates.append(ng)
            needed_consts.update(f for f in ng.fanins if f in const)
    for o in n.outputs:
        if o in const:
            needed_consts.add(o)
    for c in sorted(needed_consts):
        gates.append(Gate(c, GateKind.CONST1 if const[c] else GateKind.CONST0, ()))
    out = Netlist([x for x in n.inputs if x not in values], [k for k in n.keys if k not in values],
                  list(n.outputs), gates, name=n.name)
    return sweep(out)


def fresh_namer(taken: Iterable[str], prefix: str = "n"):
    """Return a callable producing net names not in ``taken``."""
    used = set(taken)
    counter = [0]

    def fresh(hint: str | None = None) -> str:
        if hint is not None and hint not in used:
            used.add(hint)
            return hint
        while True:
            name = f"{prefix}{counter[0]}"
            counter[0] += 1
            if name not in used:
                used.add(name)
                return name

    return fresh

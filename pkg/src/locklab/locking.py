"""Reference locking schemes with known ground-truth keys."""
from __future__ import annotations

import enum
import json
import random
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .netlist import DEFAULT_KEY_PREFIX, Gate, GateKind, Netlist, fresh_namer, transitive_fanin


class LockScheme(str, enum.Enum):
    RLL = "rll"
    ANTISAT = "antisat"
    CASLOCK = "caslock"
    SFLL_POINT = "sfll_point"
    COMPOUND = "compound"


class LockingError(ValueError):
    pass


@dataclass
class LockRecord:
    scheme: LockScheme
    true_key: tuple[bool, ...]
    seed: int
    protected_output: str | None = None
    protected_pattern: tuple[bool, ...] | None = None
    insertion_sites: tuple[str, ...] = ()
    chosen_inputs: tuple[str, ...] = ()
    tree_pattern: tuple[str, ...] = ()
    key_names: tuple[str, ...] = ()
    # scheme name -> [start, stop) over key indices of the locked netlist
    key_ranges: dict[str, tuple[int, int]] = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        d["true_key"] = "".join("1" if b else "0" for b in self.true_key)
        if self.protected_pattern is not None:
            d["protected_pattern"] = "".join("1" if b else "0" for b in self.protected_pattern)
        d["key_ranges"] = {k: list(v) for k, v in self.key_ranges.items()}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "LockRecord":
        d = json.loads(text)
        d["scheme"] = LockScheme(d["scheme"])
        d["true_key"] = tuple(c == "1" for c in d["true_key"])
        if d.get("protected_pattern") is not None:
            d["protected_pattern"] = tuple(c == "1" for c in d["protected_pattern"])
        for k in ("insertion_sites", "chosen_inputs", "tree_pattern", "key_names"):
            d[k] = tuple(d.get(k, ()))
        d["key_ranges"] = {k: tuple(v) for k, v in d.get("key_ranges", {}).items()}
        return cls(**d)


def _key_names(n: Netlist, count: int, offset: int, prefix: str) -> list[str]:
    names = [f"{prefix}{offset + i}" for i in range(count)]
    clash = set(names) & set(n.nets)
    if clash:
        raise LockingError(f"key name clash: {sorted(clash)[:3]}")
    return names


def _splice_output(gates: list[Gate], net: str, fresh) -> str:
    """Rename the driver of ``net`` to a fresh name so a new gate can drive ``net``."""
    for i, g in enumerate(gates):
        if g.out == net:
            new = fresh(f"{net}_orig")
            gates[i] = Gate(new, g.kind, g.fanins)
            for j, h in enumerate(gates):
                if net in h.fanins and j != i:
                    gates[j] = Gate(h.out, h.kind, tuple(new if x == net else x for x in h.fanins))
            return new
    raise LockingError(f"net {net!r} is not driven by a gate")


def _gate_driven_outputs(n: Netlist) -> list[str]:
    drv = n.driver
    return [o for o in n.outputs if o in drv]


# -- RLL ---------------------------------------------------------------------

def lock_rll(n: Netlist, p: int, seed: int, *, key_offset: int = 0, key_prefix: str = DEFAULT_KEY_PREFIX,
             sites: Sequence[str] | None = None, key: Sequence[bool] | None = None,
             allow_output_sites: bool = False, candidates: Sequence[str] | None = None) -> tuple[Netlist, LockRecord]:
    """Insert ``p`` XOR/XNOR key gates on pseudo-randomly chosen internal nets."""
    rng = random.Random(seed)
    if p == 0:
        return n, LockRecord(LockScheme.RLL, (), seed, key_ranges={"rll": (key_offset, key_offset)})
    if sites is None:
        pool = [g.out for g in n.gates] if candidates is None else list(candidates)
        if not allow_output_sites:
            outs = set(n.outputs)
            pool = [x for x in pool if x not in outs]
        if p > len(pool):
            raise LockingError(f"p={p} exceeds the {len(pool)} available insertion sites")
        sites = rng.sample(pool, p)
    elif len(sites) != p:
        raise LockingError("sites length must equal p")
    bits = tuple(bool(b) for b in key) if key is not None else tuple(rng.random() < 0.5 for _ in range(p))
    names = _key_names(n, p, key_offset, key_prefix)
    fresh = fresh_namer(n.nets + names)
    gates = list(n.gates)
    for site, kname, bit in zip(sites, names, bits):
        kind = GateKind.XNOR if bit else GateKind.XOR
        if site in n.outputs:
            src = _splice_output(gates, site, fresh)
            gates.append(Gate(site, kind, (src, kname)))
        else:
            lk = fresh(f"{site}_lk")
            gates = [Gate(g.out, g.kind, tuple(lk if x == site else x for x in g.fanins)) for g in gates]
            gates.append(Gate(lk, kind, (site, kname)))
    locked = Netlist(n.inputs, n.keys + tuple(names), n.outputs, gates, name=f"{n.name}_rll")
    rec = LockRecord(LockScheme.RLL, bits, seed, insertion_sites=tuple(sites), key_names=tuple(names),
                     key_ranges={"rll": (len(n.keys), len(n.keys) + p)})
    return locked, rec


# -- Anti-SAT / CASLock -------------------------------------------------------

def _tree(gates: list[Gate], fresh, leaves: list[str], pattern: Sequence[str], complement_root: bool) -> str:
    """Balanced 2-input tree; level ``i`` uses ``pattern[i]`` (AND/OR)."""
    level = 0
    cur = list(leaves)
    while len(cur) > 1:
        op = pattern[level % len(pattern)] if pattern else "AND"
        nxt = []
        last_level = len(cur) <= 2
        for j in range(0, len(cur) - 1, 2):
            if last_level and complement_root:
                kind = GateKind.NAND if op == "AND" else GateKind.NOR
            else:
                kind = GateKind.AND if op == "AND" else GateKind.OR
            out = fresh("lk")
            gates.append(Gate(out, kind, (cur[j], cur[j + 1])))
            nxt.append(out)
        if len(cur) % 2:
            nxt.append(cur[-1])
        cur = nxt
        level += 1
    return cur[0]


def _choose_output_and_inputs(n: Netlist, m: int, rng: random.Random) -> tuple[str, list[str]]:
    outs = _gate_driven_outputs(n)
    if not outs:
        raise LockingError("no gate-driven primary output to protect")
    cones = {o: [x for x in n.inputs if x in transitive_fanin(n, [o])] for o in outs}
    ok = [o for o in outs if len(cones[o]) >= m]
    if not ok:
        raise LockingError(f"no output cone has {m} primary inputs")
    o = rng.choice(ok)
    return o, rng.sample(cones[o], m)


def _lock_flip(n: Netlist, p: int, seed: int, scheme: LockScheme, pattern: Sequence[str],
               key_offset: int, key_prefix: str) -> tuple[Netlist, LockRecord]:
    if p % 2 or p <= 0:
        raise LockingError("p must be a positive even number")
    m = p // 2
    if m > len(n.inputs):
        raise LockingError(f"need {m} primary inputs, netlist has {len(n.inputs)}")
    rng = random.Random(seed)
    out, xs = _choose_output_and_inputs(n, m, rng)
    half = tuple(rng.random() < 0.5 for _ in range(m))
    bits = half + half
    names = _key_names(n, p, key_offset, key_prefix)
    fresh = fresh_namer(n.nets + names, prefix="lk")
    gates = list(n.gates)
    src = _splice_output(gates, out, fresh)
    leaves_g, leaves_gb = [], []
    for j, x in enumerate(xs):
        a = fresh("lk")
        gates.append(Gate(a, GateKind.XOR, (x, names[j])))
        leaves_g.append(a)
        b = fresh("lk")
        gates.append(Gate(b, GateKind.XNOR if m == 1 else GateKind.XOR, (x, names[m + j])))
        leaves_gb.append(b)
    g = _tree(gates, fresh, leaves_g, pattern, complement_root=False)
    gb = _tree(gates, fresh, leaves_gb, pattern, complement_root=True)
    flip = fresh("lk")
    gates.append(Gate(flip, GateKind.AND, (g, gb)))
    gates.append(Gate(out, GateKind.XOR, (src, flip)))
    locked = Netlist(n.inputs, n.keys + tuple(names), n.outputs, gates, name=f"{n.name}_{scheme.value}")
    rec = LockRecord(scheme, bits, seed, protected_output=out, chosen_inputs=tuple(xs),
                     tree_pattern=tuple(pattern), key_names=tuple(names),
                     key_ranges={scheme.value: (len(n.keys), len(n.keys) + p)})
    return locked, rec


def lock_antisat(n: Netlist, p: int, seed: int, *, key_offset: int = 0,
                 key_prefix: str = DEFAULT_KEY_PREFIX) -> tuple[Netlist, LockRecord]:
    """Two complementary AND trees over ``x XOR k``; their conjunction flips the protected output."""
    return _lock_flip(n, p, seed, LockScheme.ANTISAT, ("AND",), key_offset, key_prefix)


def lock_caslock(n: Netlist, p: int, seed: int, *, key_offset: int = 0, key_prefix: str = DEFAULT_KEY_PREFIX,
                 pattern: Sequence[str] | None = None) -> tuple[Netlist, LockRecord]:
    """Anti-SAT with trees whose levels alternate AND/OR in a seeded pattern."""
    if pattern is None:
        rng = random.Random(seed ^ 0x5CA5)
        depth = max(1, (p // 2 - 1).bit_length())
        pattern = tuple(rng.choice(("AND", "OR")) for _ in range(depth))
    return _lock_flip(n, p, seed, LockScheme.CASLOCK, tuple(pattern), key_offset, key_prefix)


# -- point-function DFLT ------------------------------------------------------

def _and_of(gates: list[Gate], fresh, lits: list[str]) -> str:
    if len(lits) == 1:
        return lits[0]
    out = fresh("lk")
    gates.append(Gate(out, GateKind.AND, tuple(lits)))
    return out


def lock_sfll_point(n: Netlist, p: int, seed: int, *, key_offset: int = 0, key_prefix: str = DEFAULT_KEY_PREFIX,
                    pattern: Sequence[bool] | None = None, output: str | None = None,
                    inputs: Sequence[str] | None = None) -> tuple[Netlist, LockRecord]:
    """Perturb the protected output on one hard-coded pattern, restore it when key == pattern."""
    if p <= 0:
        raise LockingError("p must be positive")
    rng = random.Random(seed)
    if output is None or inputs is None:
        out, xs = _choose_output_and_inputs(n, p, rng)
        out = output or out
        xs = list(inputs) if inputs is not None else xs
    else:
        out, xs = output, list(inputs)
    if len(xs) != p:
        raise LockingError("need exactly p compared inputs")
    pat = tuple(bool(b) for b in pattern) if pattern is not None else tuple(rng.random() < 0.5 for _ in range(p))
    names = _key_names(n, p, key_offset, key_prefix)
    fresh = fresh_namer(n.nets + names, prefix="lk")
    gates = list(n.gates)
    src = _splice_output(gates, out, fresh)
    pert_lits = []
    for x, b in zip(xs, pat):
        if b:
            pert_lits.append(x)
        else:
            inv = fresh("lk")
            gates.append(Gate(inv, GateKind.NOT, (x,)))
            pert_lits.append(inv)
    perturb = _and_of(gates, fresh, pert_lits)
    if perturb in xs:
        # single positive literal: keep a distinct net for the critical point
        buf = fresh("lk")
        gates.append(Gate(buf, GateKind.BUF, (perturb,)))
        perturb = buf
    stripped = fresh("lk")
    gates.append(Gate(stripped, GateKind.XOR, (src, perturb)))
    eq = []
    for x, kname in zip(xs, names):
        e = fresh("lk")
        gates.append(Gate(e, GateKind.XNOR, (x, kname)))
        eq.append(e)
    restore = _and_of(gates, fresh, eq)
    gates.append(Gate(out, GateKind.XOR, (stripped, restore)))
    locked = Netlist(n.inputs, n.keys + tuple(names), n.outputs, gates, name=f"{n.name}_sfll")
    rec = LockRecord(LockScheme.SFLL_POINT, pat, seed, protected_output=out, protected_pattern=pat,
                     chosen_inputs=tuple(xs), key_names=tuple(names),
                     key_ranges={"sfll_point": (len(n.keys), len(n.keys) + p)})
    return locked, rec


def lock_compound(n: Netlist, p_rll: int, p_sfll: int, seed: int, *,
                  key_prefix: str = DEFAULT_KEY_PREFIX) -> tuple[Netlist, LockRecord]:
    """SFLL-style point lock followed by RLL on the original nets, disjoint key ranges."""
    base = len(n.keys)
    locked, rs = lock_sfll_point(n, p_sfll, seed, key_offset=base, key_prefix=key_prefix)
    original = set(g.out for g in n.gates) - set(n.outputs)
    locked2, rr = lock_rll(locked, p_rll, seed + 1, key_offset=base + p_sfll, key_prefix=key_prefix,
                           candidates=[g.out for g in locked.gates if g.out in original])
    rec = LockRecord(
        LockScheme.COMPOUND, rs.true_key + rr.true_key, seed,
        protected_output=rs.protected_output, protected_pattern=rs.protected_pattern,
        insertion_sites=rr.insertion_sites, chosen_inputs=rs.chosen_inputs,
        key_names=rs.key_names + rr.key_names,
        key_ranges={"sfll_point": (base, base + p_sfll), "rll": (base + p_sfll, base + p_sfll + p_rll)},
    )
    return locked2.replace(name=f"{n.name}_compound"), rec


def lock(n: Netlist, scheme: str | LockScheme, p: int, seed: int, p_sfll: int | None = None):
    """Dispatch by scheme name; for compound, ``p`` is the RLL budget and ``p_sfll`` the point-lock budget."""
    scheme = LockScheme(scheme)
    if n.keys:
        raise LockingError("netlist already has key inputs")
    if scheme is LockScheme.RLL:
        return lock_rll(n, p, seed)
    if scheme is LockScheme.ANTISAT:
        return lock_antisat(n, p, seed)
    if scheme is LockScheme.CASLOCK:
        return lock_caslock(n, p, seed)
    if scheme is LockScheme.SFLL_POINT:
        return lock_sfll_point(n, p, seed)
    return lock_compound(n, p, p if p_sfll is None else p_sfll, seed)


def substitute_key(n: Netlist, key: Sequence[bool]) -> Netlist:
    """Hard-wire key inputs to constants (key inputs become CONST gates)."""
    if len(key) != len(n.keys):
        raise ValueError("key length mismatch")
    consts = [Gate(k, GateKind.CONST1 if b else GateKind.CONST0, ()) for k, b in zip(n.keys, key)]
    return Netlist(n.inputs, (), n.outputs, consts + list(n.gates), name=f"{n.name}_keyed")

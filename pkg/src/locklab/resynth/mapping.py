"""Structural technology mapping of an AIG onto XOR-free gate sets."""
from __future__ import annotations

import random
from dataclasses import dataclass

from ..netlist import Gate, GateKind, Netlist, fresh_namer
from .aig import Aig, supergate

# cell set -> allowed kinds
CELL_SETS = {
    "low": frozenset({GateKind.NAND, GateKind.NOR, GateKind.NOT}),
    "medium": frozenset({GateKind.AND, GateKind.OR, GateKind.NOT, GateKind.NAND, GateKind.NOR}),
    "high": frozenset({GateKind.AND, GateKind.OR, GateKind.NOT, GateKind.NAND, GateKind.NOR,
                       GateKind.BUF, GateKind.MUX}),
}


@dataclass
class _Root:
    kind: str  # "and" | "mux"
    leaves: list[int]  # AND leaves, or [s, a, b] with node = ~(s&a) & ~(~s&b)


def _mux_match(aig: Aig, n: int, ref: list[int]):
    """Match n = ~(s & a) & ~(~s & b), i.e. ~n = s ? a : b."""
    x, y = aig.f0[n], aig.f1[n]
    if not (x & 1 and y & 1):
        return None
    nx, ny = x >> 1, y >> 1
    if aig.f0[nx] < 0 or aig.f0[ny] < 0 or ref[nx] != 1 or ref[ny] != 1:
        return None
    for s in (aig.f0[nx], aig.f1[nx]):
        a = aig.f1[nx] if s == aig.f0[nx] else aig.f0[nx]
        for t in (aig.f0[ny], aig.f1[ny]):
            if t == s ^ 1:
                b = aig.f1[ny] if t == aig.f0[ny] else aig.f0[ny]
                return [s, a, b]
    return None


def _forms(root: _Root, cells: frozenset):
    """(output polarity, kind, required leaf literals); polarity 0 = node, 1 = complement."""
    out = []
    if root.kind == "and":
        L = root.leaves
        nL = [x ^ 1 for x in L]
        for pol, kind, req in ((0, GateKind.AND, L), (0, GateKind.NOR, nL),
                               (1, GateKind.NAND, L), (1, GateKind.OR, nL)):
            if kind in cells:
                out.append((pol, kind, req))
    else:
        s, a, b = root.leaves
        # complement of node = s ? a : b  -> MUX(s, b, a)
        out.append((1, GateKind.MUX, [s, b, a]))
        out.append((0, GateKind.MUX, [s, b ^ 1, a ^ 1]))
        out.append((1, GateKind.MUX, [s ^ 1, a, b]))
        out.append((0, GateKind.MUX, [s ^ 1, a ^ 1, b ^ 1]))
    return out


def map_aig(aig: Aig, cell_set: str = "medium", max_fanin: int = 3, iterations: int = 1,
            name: str = "top", seed: int | None = None) -> Netlist:
    """Cover the AIG with gates from ``cell_set``.

    An AND supergate becomes one gate when its leaf count fits ``max_fanin``;
    otherwise the node maps to a 2-input gate and its fanins become roots.
    Gate polarities are chosen to minimise inverters, refined over
    ``iterations`` passes using the previous pass's actual demands. ``seed``
    breaks ties between equally good forms.
    """
    cells = CELL_SETS[cell_set]
    rng = random.Random(seed) if seed is not None else None
    ref = aig.refcounts()
    n_nodes = len(aig.f0)
    is_root = [False] * n_nodes
    for o in aig.outputs:
        is_root[o >> 1] = True
    roots: dict[int, _Root] = {}
    for n in range(n_nodes - 1, 0, -1):
        if not is_root[n] or aig.f0[n] < 0:
            continue
        r = None
        if GateKind.MUX in cells:
            leaves = _mux_match(aig, n, ref)
            if leaves is not None:
                r = _Root("mux", leaves)
        if r is None:
            leaves = supergate(aig, n, ref, limit=max_fanin) if max_fanin > 2 else None
            r = _Root("and", leaves if leaves is not None else [aig.f0[n], aig.f1[n]])
        roots[n] = r
        for x in r.leaves:
            is_root[x >> 1] = True

    order = sorted(roots)
    forms = {n: _forms(roots[n], cells) for n in order}
    # initial demand: AIG reference polarities
    demand = [[0, 0] for _ in range(n_nodes)]
    for n in order:
        for x in roots[n].leaves:
            demand[x >> 1][x & 1] += 1
    for o in aig.outputs:
        demand[o >> 1][o & 1] += 1

    chosen: dict[int, tuple] = {}
    for _ in range(max(1, iterations)):
        avail = [set() for _ in range(n_nodes)]
        for node in aig.inputs:
            avail[node].add(0)
        chosen = {}
        for n in order:
            want = 0 if demand[n][0] >= demand[n][1] else 1
            best = None
            for form in forms[n]:
                pol, kind, req = form
                missing = sum(1 for x in req if (x & 1) not in avail[x >> 1])
                score = (pol != want, missing, rng.random() if rng is not None else 0)
                if best is None or score < best[0]:
                    best = (score, form)
            chosen[n] = best[1]
            for x in best[1][2]:
                avail[x >> 1].add(x & 1)
            avail[n].add(best[1][0])
        new_demand = [[0, 0] for _ in range(n_nodes)]
        for n in order:
            for x in chosen[n][2]:
                new_demand[x >> 1][x & 1] += 1
        for o in aig.outputs:
            new_demand[o >> 1][o & 1] += 1
        demand = new_demand

    # emit
    taken = set(aig.input_names) | set(aig.output_names)
    fresh = fresh_namer(taken, prefix="w")
    net: dict[tuple[int, int], str] = {}
    for node, nm in zip(aig.inputs, aig.input_names):
        net[(node, 0)] = nm
    gates: list[Gate] = []

    def get(lit: int) -> str:
        key = (lit >> 1, lit & 1)
        if key in net:
            return net[key]
        other = net[(lit >> 1, 1 - (lit & 1))]
        out = fresh()
        gates.append(Gate(out, GateKind.NOT, (other,)))
        net[key] = out
        return out

    for n in order:
        pol, kind, req = chosen[n]
        fan = tuple(get(x) for x in req)
        out = fresh()
        gates.append(Gate(out, kind, fan))
        net[(n, pol)] = out

    outputs = list(aig.output_names)
    claimed: set[str] = set()
    renames: dict[str, str] = {}
    extra: list[Gate] = []
    for lit, po in zip(aig.outputs, aig.output_names):
        node = lit >> 1
        if node == 0:
            extra.append(Gate(po, GateKind.CONST1 if lit & 1 else GateKind.CONST0, ()))
            continue
        key = (node, lit & 1)
        src = net.get(key)
        if src == po:
            continue
        is_gate_net = src is not None and src not in aig.input_names
        if is_gate_net and src not in claimed and src not in renames:
            renames[src] = po
            claimed.add(src)
            continue
        if src is None:
            other = net[(node, 1 - (lit & 1))]
            extra.append(Gate(po, GateKind.NOT, (other,)))
        else:
            # a port assignment, not logic: BUF regardless of the cell set
            extra.append(Gate(po, GateKind.BUF, (src,)))
    if renames:
        gates = [Gate(renames.get(g.out, g.out), g.kind, tuple(renames.get(f, f) for f in g.fanins)) for g in gates]
        extra = [Gate(g.out, g.kind, tuple(renames.get(f, f) for f in g.fanins)) for g in extra]
    pis = aig.input_names[:aig.n_pi]
    keys = aig.input_names[aig.n_pi:]
    return Netlist(pis, keys, outputs, gates + extra, name=name)


def limit_fanout(n: Netlist, max_fanout: int) -> Netlist:
    """Insert buffer trees so no net drives more than ``max_fanout`` gate pins."""
    if max_fanout < 2:
        raise ValueError("max_fanout must be at least 2")
    users: dict[str, list[tuple[int, int]]] = {}
    for gi, g in enumerate(n.gates):
        for pin, f in enumerate(g.fanins):
            users.setdefault(f, []).append((gi, pin))
    fresh = fresh_namer(n.nets, prefix="fb")
    fanins = [list(g.fanins) for g in n.gates]
    new_gates: list[Gate] = []
    for net in n.nets:
        pins = users.get(net, [])
        if len(pins) <= max_fanout:
            continue
        # group consumers under buffers until the source fits the limit
        level = [("pin", p) for p in pins]
        while len(level) > max_fanout:
            nxt = []
            for i in range(0, len(level), max_fanout):
                chunk = level[i:i + max_fanout]
                b = fresh()
                nxt.append(("buf", b, chunk))
            level = nxt
        stack = [(net, level)]
        while stack:
            src, items = stack.pop()
            for it in items:
                if it[0] == "pin":
                    gi, pin = it[1]
                    fanins[gi][pin] = src
                else:
                    _, b, chunk = it
                    new_gates.append(Gate(b, GateKind.BUF, (src,)))
                    stack.append((b, chunk))
    gates = [Gate(g.out, g.kind, tuple(fanins[i])) for i, g in enumerate(n.gates)]
    return n.replace(gates=gates + new_gates)

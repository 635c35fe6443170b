"""And-inverter graphs with structural hashing, simplification and balancing.

Literals are ``2 * node + complement``; node 0 is constant false, so literal
0 is FALSE and literal 1 is TRUE. Nodes are created after their fanins, hence
node id order is a topological order.
"""
from __future__ import annotations

import heapq
import random
from typing import Iterable, Sequence

from ..netlist import GateKind, Netlist

FALSE = 0
TRUE = 1


def lit_not(lit: int) -> int:
    return lit ^ 1


def lit_node(lit: int) -> int:
    return lit >> 1


def lit_compl(lit: int) -> int:
    return lit & 1


class Aig:
    """Mutable AIG builder.

    ``rules`` selects simplification strength at node creation: 1 applies the
    trivial rules (constants, idempotence, contradiction), 2 additionally
    applies one-level lookahead rules through fanin AND nodes.
    """

    def __init__(self, rules: int = 1):
        self.f0: list[int] = [-1]
        self.f1: list[int] = [-1]
        self.lv: list[int] = [0]
        self.inputs: list[int] = []
        self.input_names: list[str] = []
        self.n_pi = 0
        self.outputs: list[int] = []
        self.output_names: list[str] = []
        self.rules = rules
        self._strash: dict[tuple[int, int], int] = {}

    # -- construction --------------------------------------------------------

    def add_input(self, name: str) -> int:
        node = len(self.f0)
        self.f0.append(-1)
        self.f1.append(-1)
        self.lv.append(0)
        self.inputs.append(node)
        self.input_names.append(name)
        return node << 1

    def add_output(self, lit: int, name: str):
        self.outputs.append(lit)
        self.output_names.append(name)

    def is_and(self, node: int) -> bool:
        return self.f0[node] >= 0

    def num_ands(self) -> int:
        return sum(1 for x in self.f0 if x >= 0)

    def __len__(self):
        return len(self.f0)

    def AND(self, a: int, b: int) -> int:
        if a > b:
            a, b = b, a
        if a == FALSE:
            return FALSE
        if a == TRUE:
            return b
        if a == b:
            return a
        if a == b ^ 1:
            return FALSE
        if self.rules >= 2:
            r = self._lookahead(a, b)
            if r is not None:
                return r
        key = (a, b)
        node = self._strash.get(key)
        if node is None:
            node = len(self.f0)
            self.f0.append(a)
            self.f1.append(b)
            la, lb = self.lv[a >> 1], self.lv[b >> 1]
            self.lv.append(1 + (la if la > lb else lb))
            self._strash[key] = node
        return node << 1

    def _lookahead(self, a: int, b: int):
        for x, y in ((a, b), (b, a)):
            nx = x >> 1
            if self.f0[nx] < 0:
                continue
            c0, c1 = self.f0[nx], self.f1[nx]
            if not x & 1:
                # (c0 & c1) & y
                if y == c0 or y == c1:
                    return x
                if y == c0 ^ 1 or y == c1 ^ 1:
                    return FALSE
                ny = y >> 1
                if not y & 1 and self.f0[ny] >= 0:
                    d0, d1 = self.f0[ny], self.f1[ny]
                    if c0 ^ 1 in (d0, d1) or c1 ^ 1 in (d0, d1):
                        return FALSE
            else:
                # ~(c0 & c1) & y
                if y == c0 ^ 1 or y == c1 ^ 1:
                    return y
                if y == c0:
                    return self.AND(y, c1 ^ 1)
                if y == c1:
                    return self.AND(y, c0 ^ 1)
        return None

    def OR(self, a: int, b: int) -> int:
        return self.AND(a ^ 1, b ^ 1) ^ 1

    def XOR(self, a: int, b: int) -> int:
        return self.OR(self.AND(a, b ^ 1), self.AND(a ^ 1, b))

    def MUX(self, s: int, d0: int, d1: int) -> int:
        return self.OR(self.AND(s, d1), self.AND(s ^ 1, d0))

    def AND_many(self, lits: Sequence[int]) -> int:
        acc = TRUE
        for x in lits:
            acc = self.AND(acc, x)
        return acc

    # -- analysis ------------------------------------------------------------

    def refcounts(self) -> list[int]:
        ref = [0] * len(self.f0)
        for n in range(len(self.f0)):
            if self.f0[n] >= 0:
                ref[self.f0[n] >> 1] += 1
                ref[self.f1[n] >> 1] += 1
        for o in self.outputs:
            ref[o >> 1] += 1
        return ref

    def levels(self) -> list[int]:
        return self.lv

    def depth(self) -> int:
        lv = self.levels()
        return max((lv[o >> 1] for o in self.outputs), default=0)

    def live_nodes(self) -> list[bool]:
        live = [False] * len(self.f0)
        for o in self.outputs:
            live[o >> 1] = True
        for n in range(len(self.f0) - 1, 0, -1):
            if live[n] and self.f0[n] >= 0:
                live[self.f0[n] >> 1] = True
                live[self.f1[n] >> 1] = True
        return live

    def reverse_levels(self) -> list[int]:
        """Longest distance (in AND nodes) from each node to any output."""
        rl = [-1] * len(self.f0)
        for o in self.outputs:
            rl[o >> 1] = max(rl[o >> 1], 0)
        for n in range(len(self.f0) - 1, 0, -1):
            if rl[n] >= 0 and self.f0[n] >= 0:
                for c in (self.f0[n] >> 1, self.f1[n] >> 1):
                    if rl[c] < rl[n] + 1:
                        rl[c] = rl[n] + 1
        return rl

    def tfo_of_inputs(self, input_positions: Iterable[int]) -> list[bool]:
        mark = [False] * len(self.f0)
        for pos in input_positions:
            mark[self.inputs[pos]] = True
        for n in range(len(self.f0)):
            if self.f0[n] >= 0 and (mark[self.f0[n] >> 1] or mark[self.f1[n] >> 1]):
                mark[n] = True
        return mark

    def simulate_words(self, input_words: Sequence[int], width: int) -> list[int]:
        mask = (1 << width) - 1
        vals = [0] * len(self.f0)
        for node, w in zip(self.inputs, input_words):
            vals[node] = w & mask
        f0, f1 = self.f0, self.f1
        for n in range(len(f0)):
            if f0[n] >= 0:
                a = vals[f0[n] >> 1] ^ (mask if f0[n] & 1 else 0)
                b = vals[f1[n] >> 1] ^ (mask if f1[n] & 1 else 0)
                vals[n] = a & b
        return [vals[o >> 1] ^ (mask if o & 1 else 0) for o in self.outputs]

    def clone_interface(self, rules: int | None = None) -> tuple["Aig", list[int]]:
        """New empty AIG with the same inputs; returns it and the old->new literal map seed."""
        new = Aig(self.rules if rules is None else rules)
        m = [-1] * len(self.f0)
        m[0] = FALSE
        for node, name in zip(self.inputs, self.input_names):
            m[node] = new.add_input(name)
        new.n_pi = self.n_pi
        return new, m


def map_lit(m: list[int], lit: int) -> int:
    return m[lit >> 1] ^ (lit & 1)


def from_netlist(n: Netlist, rules: int = 1) -> Aig:
    aig = Aig(rules)
    lit: dict[str, int] = {}
    for x in n.inputs:
        lit[x] = aig.add_input(x)
    aig.n_pi = len(n.inputs)
    for k in n.keys:
        lit[k] = aig.add_input(k)
    for gi in n.order:
        g = n.gates[gi]
        ins = [lit[f] for f in g.fanins]
        k = g.kind
        if k is GateKind.AND or k is GateKind.NAND:
            r = aig.AND_many(ins)
            r = r if k is GateKind.AND else r ^ 1
        elif k is GateKind.OR or k is GateKind.NOR:
            r = aig.AND_many([x ^ 1 for x in ins]) ^ 1
            r = r if k is GateKind.OR else r ^ 1
        elif k is GateKind.NOT:
            r = ins[0] ^ 1
        elif k is GateKind.BUF:
            r = ins[0]
        elif k is GateKind.XOR or k is GateKind.XNOR:
            r = ins[0]
            for x in ins[1:]:
                r = aig.XOR(r, x)
            r = r if k is GateKind.XOR else r ^ 1
        elif k is GateKind.MUX:
            r = aig.MUX(*ins)
        elif k is GateKind.CONST0:
            r = FALSE
        elif k is GateKind.CONST1:
            r = TRUE
        else:  # pragma: no cover
            raise ValueError(k)
        lit[g.out] = r
    for o in n.outputs:
        aig.add_output(lit[o], o)
    return aig


def rebuild(aig: Aig, rules: int) -> Aig:
    """Copy reachable logic through a fresh strash table (const-prop, strash, sweep)."""
    new, m = aig.clone_interface(rules)
    live = aig.live_nodes()
    f0, f1 = aig.f0, aig.f1
    for n in range(len(f0)):
        if f0[n] >= 0 and live[n]:
            m[n] = new.AND(map_lit(m, f0[n]), map_lit(m, f1[n]))
    for o, name in zip(aig.outputs, aig.output_names):
        new.add_output(map_lit(m, o), name)
    return new


def simplify(aig: Aig, rounds: int, rules: int) -> Aig:
    for _ in range(rounds):
        nxt = rebuild(aig, rules)
        same = len(nxt.f0) == len(aig.f0) and nxt.outputs == aig.outputs
        aig = nxt
        if same:
            break
    return aig


def supergate(aig: Aig, node: int, ref: list[int], limit: int | None = None,
              stop: list[bool] | None = None) -> list[int] | None:
    """Leaves of the maximal AND tree rooted at ``node``.

    Expansion goes through uncomplemented fanins that are AND nodes with a
    single reference. Returns None if the leaves exceed ``limit`` or the tree
    contains both polarities of one leaf.
    """
    leaves: list[int] = []
    stack = [aig.f1[node], aig.f0[node]]
    while stack:
        lit = stack.pop()
        c = lit >> 1
        if not lit & 1 and aig.f0[c] >= 0 and ref[c] == 1 and (stop is None or not stop[c]):
            stack.append(aig.f1[c])
            stack.append(aig.f0[c])
        else:
            leaves.append(lit)
    seen = set()
    out = []
    for x in leaves:
        if x ^ 1 in seen:
            return None
        if x not in seen:
            seen.add(x)
            out.append(x)
    if limit is not None and len(out) > limit:
        return None
    return out


def balance(aig: Aig, seed: int | None = None, key_priority: list[bool] | None = None,
            rules: int | None = None) -> Aig:
    """Depth-oriented rebalancing of AND supergates.

    Leaves are combined lowest-level first; with ``key_priority`` (a mark per
    old node) key-dependent leaves are combined last so they sit close to the
    root. ``seed`` shuffles ties between equal-level leaves.
    """
    ref = aig.refcounts()
    f0 = aig.f0
    roots = [False] * len(f0)
    for o in aig.outputs:
        roots[o >> 1] = True
    leaves_of: dict[int, list[int]] = {}
    for n in range(len(f0) - 1, 0, -1):
        if not roots[n] or f0[n] < 0:
            continue
        lv = supergate(aig, n, ref)
        if lv is None:
            lv = [aig.f0[n], aig.f1[n]]
        leaves_of[n] = lv
        for x in lv:
            roots[x >> 1] = True
    new, m = aig.clone_interface(rules)
    rng = random.Random(seed) if seed is not None else None
    lv = new.lv
    for n in range(1, len(f0)):
        if f0[n] < 0 or n not in leaves_of:
            continue
        heap = []
        for j, x in enumerate(leaves_of[n]):
            nl = map_lit(m, x)
            kp = 1 if (key_priority is not None and key_priority[x >> 1]) else 0
            tie = rng.random() if rng is not None else j
            heap.append((kp, lv[nl >> 1], tie, j, nl))
        heapq.heapify(heap)
        cnt = len(heap)
        while len(heap) > 1:
            a = heapq.heappop(heap)
            b = heapq.heappop(heap)
            r = new.AND(a[4], b[4])
            cnt += 1
            tie = rng.random() if rng is not None else cnt
            heapq.heappush(heap, (max(a[0], b[0]), lv[r >> 1], tie, cnt, r))
        m[n] = heap[0][4] if heap else TRUE
    for o, name in zip(aig.outputs, aig.output_names):
        new.add_output(map_lit(m, o), name)
    return new

"""Small built-in circuits and a seeded random-DAG generator."""
from __future__ import annotations

import math
import random

from .netlist import Gate, GateKind, Netlist, parse_bench

MAJORITY_BENCH = """\
# 3-input majority: f = ab + ac + bc
INPUT(a)
INPUT(b)
INPUT(c)
OUTPUT(f)
g1 = AND(a, b)
g2 = AND(a, c)
g3 = AND(b, c)
f = OR(g1, g2, g3)
"""

# Majority with an XOR key gate after ab and an XNOR key gate after ac;
# the correct key is k0k1 = 01.
LOCKED_MAJORITY_BENCH = """\
INPUT(a)
INPUT(b)
INPUT(c)
INPUT(keyinput0)
INPUT(keyinput1)
OUTPUT(f)
g1 = AND(a, b)
g2 = AND(a, c)
g3 = AND(b, c)
l1 = XOR(g1, keyinput0)
l2 = XNOR(g2, keyinput1)
f = OR(l1, l2, g3)
"""

C17_BENCH = """\
# ISCAS-85 c17
INPUT(G1)
INPUT(G2)
INPUT(G3)
INPUT(G6)
INPUT(G7)
OUTPUT(G22)
OUTPUT(G23)
G10 = NAND(G1, G3)
G11 = NAND(G3, G6)
G16 = NAND(G2, G11)
G19 = NAND(G11, G7)
G22 = NAND(G10, G16)
G23 = NAND(G16, G19)
"""

FULL_ADDER_BENCH = """\
INPUT(a)
INPUT(b)
INPUT(cin)
OUTPUT(s)
OUTPUT(cout)
t = XOR(a, b)
s = XOR(t, cin)
u = AND(a, b)
v = AND(t, cin)
cout = OR(u, v)
"""


def majority() -> Netlist:
    return parse_bench(MAJORITY_BENCH, name="majority")


def locked_majority() -> Netlist:
    return parse_bench(LOCKED_MAJORITY_BENCH, name="majority_locked")


def c17() -> Netlist:
    return parse_bench(C17_BENCH, name="c17")


def full_adder() -> Netlist:
    return parse_bench(FULL_ADDER_BENCH, name="full_adder")


BUILTIN = {"majority": majority, "c17": c17, "full_adder": full_adder}

_KINDS = (
    (GateKind.AND, 4),
    (GateKind.NAND, 4),
    (GateKind.OR, 3),
    (GateKind.NOR, 3),
    (GateKind.NOT, 2),
    (GateKind.XOR, 1),
    (GateKind.XNOR, 1),
    (GateKind.MUX, 1),
)


def random_circuit(n_inputs: int, n_gates: int, n_outputs: int, seed: int,
                   levels: int | None = None, name: str | None = None) -> Netlist:
    """Seeded random layered combinational DAG.

    Gates are spread over ``levels`` layers (default about 3*log2 of the gate
    count); fanins come mostly from the previous layer and otherwise from any
    earlier net, preferring nets without fanout yet so few gates dangle.
    Dangling gates become primary outputs; if there are fewer than
    ``n_outputs`` of them, the last gates are added as outputs too.
    """
    rng = random.Random(seed)
    if levels is None:
        levels = max(4, round(3 * math.log2(max(n_gates, 2))))
    levels = max(1, min(levels, n_gates))
    kinds = [k for k, w in _KINDS for _ in range(w)]
    nets = [f"i{j}" for j in range(n_inputs)]
    layer_nets = [list(nets)]
    unused = set(nets)
    gates: list[Gate] = []
    per = [n_gates // levels + (1 if j < n_gates % levels else 0) for j in range(levels)]
    gi = 0
    for size in per:
        prev = layer_nets[-1]
        cur = []
        for _ in range(size):
            kind = rng.choice(kinds)
            arity = {GateKind.NOT: 1, GateKind.MUX: 3}.get(kind, rng.choice((2, 2, 2, 3)))
            fanins: list[str] = []
            tries = 0
            while len(fanins) < arity and tries < 50:
                tries += 1
                r = rng.random()
                if unused and r < 0.35:
                    cand = rng.choice(sorted(unused))
                elif r < 0.8:
                    cand = rng.choice(prev)
                else:
                    cand = rng.choice(nets)
                if cand not in fanins:
                    fanins.append(cand)
            if len(fanins) < arity:
                kind, fanins = GateKind.NOT, fanins[:1]
            out = f"g{gi}"
            gi += 1
            gates.append(Gate(out, kind, tuple(fanins)))
            for f in fanins:
                unused.discard(f)
            cur.append(out)
        nets.extend(cur)
        unused.update(cur)
        layer_nets.append(cur)
    outputs = [g.out for g in gates if g.out in unused]
    for g in reversed(gates):
        if len(outputs) >= n_outputs:
            break
        if g.out not in outputs:
            outputs.append(g.out)
    return Netlist(nets[:n_inputs], [], sorted(outputs, key=lambda s: int(s[1:])), gates,
                   name=name or f"rand{n_gates}_s{seed}")

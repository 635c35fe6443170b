"""NPN classification of 4-input functions and a small-structure library.

Truth tables are 16-bit integers; bit ``m`` holds f(x) for the minterm with
``x_j = (m >> j) & 1``.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .aig import FALSE, TRUE, Aig

NVARS = 4
FULL = 0xFFFF
VAR_TT = (0xAAAA, 0xCCCC, 0xF0F0, 0xFF00)

# Each input transform (perm, negation mask) maps canonical-side minterm y to
# original-side minterm x with x_{perm[j]} = y_j ^ neg_j.
_TRANSFORMS: list[tuple[tuple[int, ...], int]] = [
    (perm, neg) for perm in itertools.permutations(range(NVARS)) for neg in range(1 << NVARS)
]


def _index_table() -> np.ndarray:
    idx = np.zeros((len(_TRANSFORMS), 16), dtype=np.int64)
    for t, (perm, neg) in enumerate(_TRANSFORMS):
        for y in range(16):
            x = 0
            for j in range(NVARS):
                if ((y >> j) & 1) ^ ((neg >> j) & 1):
                    x |= 1 << perm[j]
            idx[t, y] = x
    return idx


_IDX = _index_table()
_POW = (1 << np.arange(16, dtype=np.int64))


@lru_cache(maxsize=None)
def npn_canon(tt: int) -> tuple[int, tuple[int, ...], int, int]:
    """Return (canonical tt, perm, input negation mask, output negation)."""
    bits = (tt >> np.arange(16)) & 1
    vals = (bits[_IDX] * _POW).sum(axis=1)
    both = np.concatenate([vals, vals ^ FULL])
    best = int(np.argmin(both))
    out_neg = best >= len(_TRANSFORMS)
    perm, neg = _TRANSFORMS[best % len(_TRANSFORMS)]
    return int(both[best]), perm, neg, int(out_neg)


def apply_transform(tt: int, perm, neg, out_neg) -> int:
    t = _TRANSFORMS.index((tuple(perm), neg))
    bits = (tt >> np.arange(16)) & 1
    v = int((bits[_IDX[t]] * _POW).sum())
    return v ^ FULL if out_neg else v


# -- ISOP and factoring ----------------------------------------------------------

def _cofactors(tt: int, var: int) -> tuple[int, int]:
    m = VAR_TT[var]
    s = 1 << var
    hi = tt & m
    lo = tt & ~m & FULL
    return (lo | (lo << s)) & FULL, (hi | (hi >> s)) & FULL


def isop(on: int, upper: int, var: int = NVARS - 1) -> tuple[list[tuple[int, int]], int]:
    """Minato-Morreale irredundant SOP; cubes are (positive mask, negative mask)."""
    if on == 0:
        return [], 0
    if upper == FULL:
        return [(0, 0)], FULL
    while var >= 0:
        l0, l1 = _cofactors(on, var)
        u0, u1 = _cofactors(upper, var)
        if l0 != l1 or u0 != u1:
            break
        var -= 1
    if var < 0:  # pragma: no cover - constant handled above
        return [(0, 0)], FULL
    m = VAR_TT[var]
    c0, r0 = isop(l0 & ~u1 & FULL, u0, var - 1)
    c1, r1 = isop(l1 & ~u0 & FULL, u1, var - 1)
    lnew = ((l0 & ~r0) | (l1 & ~r1)) & FULL
    c2, r2 = isop(lnew, u0 & u1, var - 1)
    cubes = [(p, n | (1 << var)) for p, n in c0] + [(p | (1 << var), n) for p, n in c1] + c2
    cover = ((r0 & ~m) | (r1 & m) | r2) & FULL
    return cubes, cover


def _factor(aig: Aig, cubes: list[tuple[int, int]], ins: list[int]) -> int:
    if not cubes:
        return FALSE
    if any(p == 0 and n == 0 for p, n in cubes):
        return TRUE
    if len(cubes) == 1:
        p, n = cubes[0]
        lits = [ins[j] for j in range(NVARS) if p >> j & 1] + [ins[j] ^ 1 for j in range(NVARS) if n >> j & 1]
        return _balanced(aig, lits, aig.AND)
    counts = {}
    for p, n in cubes:
        for j in range(NVARS):
            if p >> j & 1:
                counts[(j, 0)] = counts.get((j, 0), 0) + 1
            if n >> j & 1:
                counts[(j, 1)] = counts.get((j, 1), 0) + 1
    (j, neg), c = max(counts.items(), key=lambda kv: (kv[1], -kv[0][0], -kv[0][1]))
    if c < 2:
        return _balanced(aig, [_factor(aig, [cb], ins) for cb in cubes], aig.OR)
    bit = 1 << j
    quotient, rest = [], []
    for p, n in cubes:
        if (n if neg else p) & bit:
            quotient.append((p & ~bit, n) if not neg else (p, n & ~bit))
        else:
            rest.append((p, n))
    lit = ins[j] ^ neg
    left = aig.AND(lit, _factor(aig, quotient, ins))
    return aig.OR(left, _factor(aig, rest, ins)) if rest else left


def _balanced(aig: Aig, lits: list[int], op) -> int:
    if not lits:
        return TRUE if op == aig.AND else FALSE
    while len(lits) > 1:
        nxt = [op(lits[i], lits[i + 1]) for i in range(0, len(lits) - 1, 2)]
        if len(lits) % 2:
            nxt.append(lits[-1])
        lits = nxt
    return lits[0]


# -- structure library -----------------------------------------------------------

class Structure:
    """A small AIG over four inputs: ``nodes`` are (lit, lit) pairs where
    literals 2..9 are the inputs and 10+ the nodes in order."""

    __slots__ = ("nodes", "out", "depth", "input_depth")

    def __init__(self, nodes, out, depth, input_depth):
        self.nodes = nodes
        self.out = out
        self.depth = depth
        self.input_depth = input_depth

    @property
    def size(self) -> int:
        return len(self.nodes)

    def build(self, aig: Aig, leaves: list[int]) -> int:
        m = [FALSE] + list(leaves) + [FALSE] * (NVARS - len(leaves))
        for a, b in self.nodes:
            m.append(aig.AND(m[a >> 1] ^ (a & 1), m[b >> 1] ^ (b & 1)))
        return m[self.out >> 1] ^ (self.out & 1)


def _capture(builder) -> Structure:
    aig = Aig(rules=2)
    ins = [aig.add_input(f"x{j}") for j in range(NVARS)]
    out = builder(aig, ins)
    aig.add_output(out, "f")
    live = aig.live_nodes()
    remap = {0: 0}
    for j, node in enumerate(aig.inputs):
        remap[node] = j + 1
    nodes = []
    for n in range(len(aig.f0)):
        if aig.f0[n] >= 0 and live[n]:
            a, b = aig.f0[n], aig.f1[n]
            nodes.append(((remap[a >> 1] << 1) | (a & 1), (remap[b >> 1] << 1) | (b & 1)))
            remap[n] = len(remap)
    o = (remap[out >> 1] << 1) | (out & 1)
    # per-input depth: longest path from each input to the output
    dist = {}
    for idx, (a, b) in enumerate(nodes):
        me = NVARS + 1 + idx
        d = {}
        for lit in (a, b):
            src = lit >> 1
            if 1 <= src <= NVARS:
                d[src - 1] = max(d.get(src - 1, 0), 1)
            elif src > NVARS:
                for j, v in dist[src].items():
                    d[j] = max(d.get(j, 0), v + 1)
        dist[me] = d
    root = o >> 1
    input_depth = tuple(dist.get(root, {}).get(j, 0) for j in range(NVARS)) if root > NVARS else tuple(
        0 for _ in range(NVARS))
    return Structure(nodes, o, max(input_depth) if nodes else 0, input_depth)


def _shannon_builder(tt: int):
    def build(aig: Aig, ins: list[int]) -> int:
        return _shannon(aig, tt, ins, NVARS - 1)
    return build


def _shannon(aig: Aig, tt: int, ins: list[int], var: int) -> int:
    if tt == 0:
        return FALSE
    if tt == FULL:
        return TRUE
    while var >= 0:
        lo, hi = _cofactors(tt, var)
        if lo != hi:
            break
        var -= 1
    lo, hi = _cofactors(tt, var)
    x = ins[var]
    if lo == 0:
        return aig.AND(x, _shannon(aig, hi, ins, var - 1))
    if hi == 0:
        return aig.AND(x ^ 1, _shannon(aig, lo, ins, var - 1))
    if lo == FULL:
        return aig.OR(x ^ 1, _shannon(aig, hi, ins, var - 1))
    if hi == FULL:
        return aig.OR(x, _shannon(aig, lo, ins, var - 1))
    if lo == hi ^ FULL:
        return aig.XOR(x, _shannon(aig, lo, ins, var - 1))
    return aig.MUX(x, _shannon(aig, lo, ins, var - 1), _shannon(aig, hi, ins, var - 1))


def _sop_builder(tt: int, complement: bool):
    def build(aig: Aig, ins: list[int]) -> int:
        target = tt ^ FULL if complement else tt
        cubes, _ = isop(target, target)
        r = _factor(aig, cubes, ins)
        return r ^ 1 if complement else r
    return build


def _flat_sop_builder(tt: int, complement: bool):
    def build(aig: Aig, ins: list[int]) -> int:
        target = tt ^ FULL if complement else tt
        cubes, _ = isop(target, target)
        terms = [_factor(aig, [c], ins) for c in cubes]
        r = _balanced(aig, terms, aig.OR) if terms else FALSE
        return r ^ 1 if complement else r
    return build


@lru_cache(maxsize=None)
def candidate_structures(canon_tt: int) -> tuple[Structure, ...]:
    """Distinct implementations of a canonical function, best (size, depth) first."""
    cands = []
    for builder in (_sop_builder(canon_tt, False), _sop_builder(canon_tt, True),
                    _flat_sop_builder(canon_tt, False), _flat_sop_builder(canon_tt, True),
                    _shannon_builder(canon_tt)):
        s = _capture(builder)
        cands.append(s)
    uniq = {}
    for s in cands:
        uniq.setdefault((tuple(s.nodes), s.out), s)
    return tuple(sorted(uniq.values(), key=lambda s: (s.size, s.depth)))


def best_structure(canon_tt: int) -> Structure:
    return candidate_structures(canon_tt)[0]


def structure_tt(s: Structure) -> int:
    vals = [0] + list(VAR_TT)
    for a, b in s.nodes:
        va = vals[a >> 1] ^ (FULL if a & 1 else 0)
        vb = vals[b >> 1] ^ (FULL if b & 1 else 0)
        vals.append(va & vb)
    v = vals[s.out >> 1]
    return v ^ FULL if s.out & 1 else v

"""DAG-aware cut rewriting with NPN-classified replacement structures."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .aig import TRUE, Aig, map_lit
from .npn import VAR_TT, candidate_structures, npn_canon

CUT_SIZE = 4


def enumerate_cuts(aig: Aig, limit: int = 6, live: list[bool] | None = None) -> list[list[frozenset]]:
    """Priority 4-feasible cuts per node (trivial cut excluded, kept implicitly)."""
    f0, f1, lv = aig.f0, aig.f1, aig.lv
    cuts: list[list[frozenset]] = [[] for _ in range(len(f0))]
    for n in range(1, len(f0)):
        if f0[n] < 0 or (live is not None and not live[n]):
            continue
        a, b = f0[n] >> 1, f1[n] >> 1
        ca = cuts[a] + [frozenset((a,))] if a else [frozenset()]
        cb = cuts[b] + [frozenset((b,))] if b else [frozenset()]
        found = set()
        for x in ca:
            for y in cb:
                u = x | y
                if len(u) <= CUT_SIZE:
                    found.add(u)
        # drop dominated cuts
        ordered = sorted(found, key=len)
        kept: list[frozenset] = []
        for c in ordered:
            if not any(k <= c for k in kept):
                kept.append(c)
        kept.sort(key=lambda c: (len(c), sum(lv[x] for x in c), sorted(c)))
        cuts[n] = kept[:limit]
    return cuts


def cut_truth_table(aig: Aig, root: int, leaves: list[int]) -> int:
    val = {leaf: VAR_TT[i] for i, leaf in enumerate(leaves)}
    val[0] = 0
    cone = []
    stack = [root]
    seen = set()
    while stack:
        x = stack.pop()
        if x in val or x in seen:
            continue
        seen.add(x)
        cone.append(x)
        stack.append(aig.f0[x] >> 1)
        stack.append(aig.f1[x] >> 1)
    for x in sorted(cone):
        a, b = aig.f0[x], aig.f1[x]
        va = val[a >> 1] ^ (0xFFFF if a & 1 else 0)
        vb = val[b >> 1] ^ (0xFFFF if b & 1 else 0)
        val[x] = va & vb
    return val[root]


def mffc_size(aig: Aig, root: int, leaves: frozenset, ref: list[int]) -> int:
    """Nodes freed if ``root`` were re-expressed over ``leaves`` (ref is restored)."""
    touched = []
    count = 0
    stack = [root]
    f0, f1 = aig.f0, aig.f1
    while stack:
        x = stack.pop()
        count += 1
        for c in (f0[x] >> 1, f1[x] >> 1):
            if c in leaves or f0[c] < 0:
                continue
            ref[c] -= 1
            touched.append(c)
            if ref[c] == 0:
                stack.append(c)
    for c in touched:
        ref[c] += 1
    return count


@dataclass
class _Choice:
    leaves: list[int]
    structure: object
    perm: tuple
    neg: int
    out_neg: int


def rewrite(aig: Aig, *, seed: int | None = None, zero_gain: bool = False,
            required: list[int] | None = None, region: list[bool] | None = None,
            cut_limit: int = 6, max_loss: int = 2) -> Aig:
    """One rewriting round.

    A node is re-expressed over one of its cuts when the library structure is
    smaller than the logic it frees. ``zero_gain`` also accepts equal-size
    replacements (tie-broken by ``seed``). With ``required`` levels, nodes
    later than required accept depth-reducing replacements costing up to
    ``max_loss`` extra nodes, and no replacement may push a node beyond
    max(required, current level). ``region`` restricts rewriting to marked nodes.
    """
    rng = random.Random(seed)
    f0, f1, lv = aig.f0, aig.f1, aig.lv
    live = aig.live_nodes()
    cuts = enumerate_cuts(aig, cut_limit, live)
    ref = aig.refcounts()
    needed = [False] * len(f0)
    for o in aig.outputs:
        needed[o >> 1] = True
    choice: dict[int, _Choice] = {}
    for n in range(len(f0) - 1, 0, -1):
        if not needed[n] or f0[n] < 0:
            continue
        ch = None
        if region is None or region[n]:
            ch = _choose(aig, n, cuts[n], ref, lv, rng, zero_gain,
                         None if required is None else required[n], max_loss)
        if ch is None:
            needed[f0[n] >> 1] = True
            needed[f1[n] >> 1] = True
        else:
            choice[n] = ch
            for x in ch.leaves:
                needed[x] = True
    new, m = aig.clone_interface()
    for n in range(1, len(f0)):
        if not needed[n] or f0[n] < 0:
            continue
        ch = choice.get(n)
        if ch is None:
            m[n] = new.AND(map_lit(m, f0[n]), map_lit(m, f1[n]))
        else:
            leaf_lits = [m[x] for x in ch.leaves]
            ins = [leaf_lits[ch.perm[j]] ^ ((ch.neg >> j) & 1) if ch.perm[j] < len(leaf_lits) else 0
                   for j in range(4)]
            r = ch.structure.build(new, ins)
            m[n] = r ^ ch.out_neg
    for o, name in zip(aig.outputs, aig.output_names):
        new.add_output(map_lit(m, o), name)
    return new


def _choose(aig: Aig, n: int, node_cuts, ref, lv, rng, zero_gain, req, max_loss):
    critical = req is not None and lv[n] > req
    limit = None if req is None else max(req, lv[n])
    best = None
    best_score = None
    ties = []
    for cut in node_cuts:
        leaves = sorted(cut)
        if len(leaves) < 1 or n in cut:
            continue
        tt = cut_truth_table(aig, n, leaves)
        canon, perm, neg, out_neg = npn_canon(tt)
        if any(p >= len(leaves) for j, p in enumerate(perm) if _depends(canon, j)):
            continue
        freed = mffc_size(aig, n, cut, ref)
        for s in candidate_structures(canon):
            gain = freed - s.size
            est = max((lv[leaves[perm[j]]] + s.input_depth[j] for j in range(4)
                       if perm[j] < len(leaves) and s.input_depth[j] > 0), default=0)
            if limit is not None and est > limit:
                continue
            if critical:
                if est >= lv[n] or gain < -max_loss:
                    continue
                score = (-est, gain)
            else:
                if gain < 0 or (gain == 0 and not zero_gain):
                    continue
                score = (gain, -est)
            ch = _Choice(leaves, s, perm, neg, out_neg)
            if best_score is None or score > best_score:
                best, best_score, ties = ch, score, [ch]
            elif score == best_score:
                ties.append(ch)
    if best is None:
        return None
    if len(ties) > 1 and zero_gain:
        best = ties[rng.randrange(len(ties))]
    if best_score is not None and not critical and best_score[0] == 0 and rng.random() < 0.5:
        return None
    return best


def _depends(tt: int, var: int) -> bool:
    s = 1 << var
    m = VAR_TT[var]
    return ((tt & m) >> s) != (tt & ~m & 0xFFFF)


__all__ = ["rewrite", "enumerate_cuts", "cut_truth_table", "mffc_size", "TRUE"]

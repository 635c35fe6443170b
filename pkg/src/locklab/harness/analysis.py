"""Post-attack analyses: vote convergence, slack classes and single-cone runs."""
from __future__ import annotations

import math
import time
from typing import Sequence

from ..netlist import Netlist, extract_logic_cone
from ..ol_attack import KeyValue, SolutionVector, attack_netlist, merge_votes, score
from ..resynth.recipes import SynthesisRecipe, generate_variants


def convergence_analysis(solutions: Sequence[SolutionVector], truth: Sequence[bool]) -> list[tuple[int, int, int]]:
    """(n_used, dk, cdk) after merging the first n_used solutions, for every n_used."""
    if not solutions:
        raise ValueError("no solutions")
    p = len(truth)
    dk0 = [0] * p
    dk1 = [0] * p
    out = []
    for n_used, s in enumerate(solutions, 1):
        if len(s) != p:
            raise ValueError("solution and key lengths differ")
        for i, g in enumerate(s.guesses):
            if g.value is KeyValue.ZERO:
                dk0[i] += 1
            elif g.value is KeyValue.ONE:
                dk1[i] += 1
        dk = cdk = 0
        for i in range(p):
            if dk0[i] == dk1[i]:
                continue
            dk += 1
            cdk += (dk1[i] > dk0[i]) == bool(truth[i])
        out.append((n_used, dk, cdk))
    return out


def expand_to_recipes(solutions: Sequence[SolutionVector], duplicates: dict[str, list[int]],
                      signatures: Sequence[str]) -> list[SolutionVector]:
    """Repeat each unique variant's solution once per recipe that produced it, in recipe order."""
    by_sig = dict(zip(signatures, solutions))
    order = sorted((idx, sig) for sig, idxs in duplicates.items() for idx in idxs)
    return [by_sig[sig] for _, sig in order if sig in by_sig]


def min_variants_for_final(series: Sequence[tuple[int, int, int]]) -> int:
    """Smallest n_used whose dk already equals the final dk."""
    final = series[-1][1]
    return next(n for n, dk, _ in series if dk == final)


def slack_class(slack: float) -> str:
    return "le0" if slack <= 0 else "gt0"


def slack_analysis(slacks: Sequence[float], dks: Sequence[int], top_fraction: float = 0.1) -> dict:
    """Bucket the top ``top_fraction`` of netlists (by dk, descending) by slack sign."""
    if not slacks or len(slacks) != len(dks):
        raise ValueError("need one dk per variant")
    order = sorted(range(len(dks)), key=lambda i: (-dks[i], i))
    size = math.ceil(top_fraction * len(order))
    top = order[:size]
    counts = {"le0": 0, "gt0": 0}
    for i in top:
        counts[slack_class(slacks[i])] += 1
    overall = {"le0": 0, "gt0": 0}
    for s in slacks:
        overall[slack_class(s)] += 1
    return {"top_size": size, "top_counts": counts, "all_counts": overall, "top_indices": top}


def cone_mode(locked: Netlist, output: str, recipes: Sequence[SynthesisRecipe], policy: str = "threshold",
              certify_mode: str | None = "sim") -> dict:
    """Resynthesize and OL-attack only the logic cone of ``output``.

    Key bits outside the cone are reported unknown; times cover resynthesis plus attack.
    """
    t0 = time.perf_counter()
    cone = extract_logic_cone(locked, output)
    pos = {k: i for i, k in enumerate(locked.keys)}
    merged = [KeyValue.UNKNOWN] * len(locked.keys)
    unique = 0
    if cone.keys:
        vs = generate_variants(cone, recipes, certify_mode)
        unique = len(vs)
        ens = merge_votes([attack_netlist(v.netlist, policy) for v in vs.variants])
        for k, g in zip(cone.keys, ens.merged):
            merged[pos[k]] = g.value
    return {
        "output": output,
        "cone_gates": len(cone.gates),
        "whole_gates": len(locked.gates),
        "cone_keys": list(cone.keys),
        "unique_variants": unique,
        "merged": merged,
        "seconds": time.perf_counter() - t0,
    }


def score_values(values: Sequence[KeyValue], truth: Sequence[bool]) -> tuple[int, int]:
    return score(list(values), truth)

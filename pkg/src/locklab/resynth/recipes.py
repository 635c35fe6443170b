"""Synthesis recipes, the resynthesis pipeline and variant generation."""
from __future__ import annotations

import hashlib
import itertools
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from ..cnf import check_equivalence, random_sim_mismatch
from ..netlist import (STAT_FIELDS, ComplexityStats, GateKind, Netlist, depth,
                       stats, structural_signature)
from .aig import balance, from_netlist, simplify
from .mapping import limit_fanout, map_aig
from .rewrite import rewrite

SYN_GEN = ("Low", "Medium", "High")
SYN_MAP = ("Low", "Medium", "High")
SYN_OPT = ("Low", "Medium", "High", "Extreme")
DELAY_POINTS = (None, 1, 2, 3, 4)
MAX_TRANSITION = ("P5", "P10", "P15")
KEY_CONSTRAINT = ("Off", "On")
DELAY_DIVISIONS = 5

AXES = ("syn_gen", "syn_map", "syn_opt", "delay_point", "max_transition", "key_constraint")

_GEN_ROUNDS = {"Low": 1, "Medium": 2, "High": 4}
_OPT_ROUNDS = {"Low": 0, "Medium": 1, "High": 2, "Extreme": 4}
_MAP = {"Low": ("low", 2, 1), "Medium": ("medium", 3, 2), "High": ("high", 4, 3)}
# tighter transition limits force shallower buffer trees per net
_FANOUT = {"P5": 4, "P10": 8, "P15": 16}


@dataclass(frozen=True)
class SynthesisRecipe:
    syn_gen: str = "Medium"
    syn_map: str = "Medium"
    syn_opt: str = "Medium"
    delay_point: int | None = None
    max_transition: str = "P10"
    key_constraint: str = "Off"
    seed: int = 0

    def __post_init__(self):
        for ax, allowed in zip(AXES, (SYN_GEN, SYN_MAP, SYN_OPT, DELAY_POINTS, MAX_TRANSITION, KEY_CONSTRAINT)):
            if getattr(self, ax) not in allowed:
                raise ValueError(f"{ax}={getattr(self, ax)!r} not in {allowed}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisRecipe":
        return cls(**{k: d[k] for k in AXES + ("seed",) if k in d})

    def label(self) -> str:
        dp = "none" if self.delay_point is None else str(self.delay_point)
        return f"g{self.syn_gen}-m{self.syn_map}-o{self.syn_opt}-d{dp}-t{self.max_transition}-k{self.key_constraint}"


@dataclass
class RecipeConfig:
    syn_gen: Sequence[str] = SYN_GEN
    syn_map: Sequence[str] = SYN_MAP
    syn_opt: Sequence[str] = SYN_OPT
    delay_point: Sequence[int | None] = DELAY_POINTS
    max_transition: Sequence[str] = MAX_TRANSITION
    key_constraint: Sequence[str] = KEY_CONSTRAINT
    seed: int = 0


def enumerate_recipes(config: RecipeConfig | None = None) -> list[SynthesisRecipe]:
    """Cartesian product of the enabled axis values, in grid order."""
    config = config or RecipeConfig()
    axes = [list(getattr(config, ax)) for ax in AXES]
    for ax, vals in zip(AXES, axes):
        if not vals:
            raise ValueError(f"recipe axis {ax!r} is empty")
    return [SynthesisRecipe(*combo, seed=config.seed) for combo in itertools.product(*axes)]


def compute_dcp(n: Netlist) -> int:
    """Critical-path depth after one unconstrained restructuring pass."""
    aig = simplify(from_netlist(n, rules=1), 1, 1)
    aig = balance(aig)
    return depth(map_aig(aig, "medium", 3, 1))


def delay_target(dcp: int, point: int | None) -> int | None:
    if point is None:
        return None
    return max(1, math.ceil(dcp / DELAY_DIVISIONS * point))


def _required(aig, target_aig: int | None, region) -> list[int] | None:
    if target_aig is None and region is None:
        return None
    rl = aig.reverse_levels()
    req = []
    for nd in range(len(aig.f0)):
        r = target_aig - max(rl[nd], 0) if target_aig is not None else aig.lv[nd]
        if region is not None and region[nd]:
            # key paths are pushed as short as the rewriting allows
            r = min(r, aig.lv[nd] - 1)
        req.append(r)
    return req


def _stage_seed(seed: int, tag: str, aig) -> int:
    # tie-breaking depends only on the stage input, so recipes that reach the
    # same intermediate structure make the same downstream choices
    h = hashlib.blake2b(digest_size=8)
    h.update(f"{seed}|{tag}|".encode())
    h.update(repr((aig.f0, aig.f1, aig.outputs)).encode())
    return int.from_bytes(h.digest(), "big")


def resynthesize(n: Netlist, r: SynthesisRecipe, dcp: int | None = None) -> Netlist:
    """Run the pass pipeline selected by ``r``; the result is equivalent to ``n``."""
    gen_rounds = _GEN_ROUNDS[r.syn_gen]
    aig = simplify(from_netlist(n, rules=1), gen_rounds, 1 if r.syn_gen == "Low" else 2)
    key_on = r.key_constraint == "On" and aig.inputs[aig.n_pi:]
    target = None
    if r.delay_point is not None:
        if dcp is None:
            dcp = compute_dcp(n)
        target = delay_target(dcp, r.delay_point)
    key_positions = range(aig.n_pi, len(aig.inputs))

    def key_region(a):
        return a.tfo_of_inputs(key_positions) if key_on else None

    if target is not None or key_on:
        aig = balance(aig, seed=_stage_seed(r.seed, "b0", aig), key_priority=key_region(aig))
    rounds = _OPT_ROUNDS[r.syn_opt]
    zero_gain = r.syn_opt in ("High", "Extreme")
    for k in range(rounds):
        region = key_region(aig)
        t_aig = None
        if target is not None:
            t_aig = max(1, math.ceil(target * aig.depth() / max(dcp, 1)))
        aig = rewrite(aig, seed=_stage_seed(r.seed, f"rw{t_aig}", aig), zero_gain=zero_gain,
                      required=_required(aig, t_aig, region), region=region)
    if target is not None or key_on:
        aig = balance(aig, seed=_stage_seed(r.seed, "b1", aig), key_priority=key_region(aig))
    cell_set, fanin, iters = _MAP[r.syn_map]
    out = map_aig(aig, cell_set, fanin, iters, name=n.name,
                  seed=_stage_seed(r.seed, "map", aig))
    return limit_fanout(out, _FANOUT[r.max_transition])


def has_xor(n: Netlist) -> bool:
    return any(g.kind in (GateKind.XOR, GateKind.XNOR) for g in n.gates)


# -- variant sets ------------------------------------------------------------

@dataclass
class Variant:
    index: int
    recipe: SynthesisRecipe
    netlist: Netlist
    stats: ComplexityStats
    slack: float  # math.inf when the recipe has no delay target
    signature: str


@dataclass
class VariantSet:
    base: Netlist
    variants: list[Variant] = field(default_factory=list)
    unique_signatures: set[str] = field(default_factory=set)
    executed: int = 0
    duplicates: dict[str, list[int]] = field(default_factory=dict)  # signature -> recipe indices

    def __len__(self):
        return len(self.variants)

    def netlists(self) -> list[Netlist]:
        return [v.netlist for v in self.variants]


class CertificationError(RuntimeError):
    pass


def certify(base: Netlist, v: Netlist, mode: str = "both", vectors: int = 10_000) -> None:
    if has_xor(v):
        raise CertificationError("variant contains XOR/XNOR gates")
    if mode in ("sim", "both"):
        if random_sim_mismatch(base, v, vectors) is not None:
            raise CertificationError("variant disagrees with base under simulation")
    if mode in ("sat", "both"):
        if not check_equivalence(base, v).equivalent:
            raise CertificationError("variant is not equivalent to base")


def _run_one(args):
    n, r, dcp, mode = args
    v = resynthesize(n, r, dcp)
    if mode:
        certify(n, v, mode)
    st = stats(v)
    target = delay_target(dcp, r.delay_point)
    slack = math.inf if target is None else target - st.depth
    return v, st, slack, structural_signature(v)


def generate_variants(n: Netlist, recipes: Sequence[SynthesisRecipe], certify_mode: str | None = "sim",
                      jobs: int = 1, indices: Sequence[int] | None = None) -> VariantSet:
    """Resynthesize per recipe and keep the first recipe of each unique structure.

    ``indices`` labels recipes with their positions in a larger grid.
    """
    dcp = compute_dcp(n)
    tasks = [(n, r, dcp, certify_mode) for r in recipes]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_run_one(t) for t in tasks]
    vs = VariantSet(base=n, executed=len(recipes))
    for pos, (r, (v, st, slack, sig)) in enumerate(zip(recipes, results)):
        idx = indices[pos] if indices is not None else pos
        vs.duplicates.setdefault(sig, []).append(idx)
        if sig in vs.unique_signatures:
            continue
        vs.unique_signatures.add(sig)
        vs.variants.append(Variant(idx, r, v, st, slack, sig))
    return vs


def diversity_report(v: VariantSet) -> dict:
    """Per-stat mean and population standard deviation plus mean-normalized series."""
    if not v.variants:
        raise ValueError("empty variant set")
    out = {}
    for f in STAT_FIELDS:
        xs = [getattr(x.stats, f) for x in v.variants]
        mean = statistics.fmean(xs)
        out[f] = {
            "mean": mean,
            "std": statistics.pstdev(xs),
            "normalized": [x / mean if mean else 0.0 for x in xs],
        }
    return out


def prune_redundant_recipes(vs: VariantSet, recipes: Sequence[SynthesisRecipe]) -> list[SynthesisRecipe]:
    """Greedy first-occurrence subset of ``recipes`` that covers every unique variant."""
    keep = {v.index for v in vs.variants}
    return [r for i, r in enumerate(recipes) if i in keep]


def redundant_axis_values(vs: VariantSet, recipes: Sequence[SynthesisRecipe]) -> dict[str, list]:
    """Axis values whose recipes never contribute a new unique variant."""
    contributing = {v.index for v in vs.variants}
    out: dict[str, list] = {}
    for ax in AXES:
        vals = []
        for val in dict.fromkeys(getattr(r, ax) for r in recipes):
            idx = [i for i, r in enumerate(recipes) if getattr(r, ax) == val]
            if idx and not any(i in contributing for i in idx):
                vals.append(val)
        if vals:
            out[ax] = vals
    return out


def recipe_digest(recipes: Iterable[SynthesisRecipe]) -> str:
    h = hashlib.sha256()
    for r in recipes:
        h.update(repr(sorted(r.to_dict().items(), key=lambda kv: kv[0])).encode())
    return h.hexdigest()

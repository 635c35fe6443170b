"""Oracle-less constant-propagation attack and ensemble vote merging."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .netlist import STAT_FIELDS, ComplexityStats, Netlist, propagate_constants, stats, structural_signature
from .resynth.recipes import SynthesisRecipe, resynthesize

LIGHT_RECIPE = SynthesisRecipe(syn_gen="Medium", syn_map="Low", syn_opt="Medium", delay_point=None,
                               max_transition="P15", key_constraint="Off")
DEFAULT_TAU = 0.02


class KeyValue(enum.Enum):
    ZERO = "0"
    ONE = "1"
    UNKNOWN = "x"

    @classmethod
    def of(cls, bit: bool) -> "KeyValue":
        return cls.ONE if bit else cls.ZERO

    def as_bool(self) -> bool | None:
        return None if self is KeyValue.UNKNOWN else self is KeyValue.ONE


@dataclass(frozen=True)
class KeyBitGuess:
    value: KeyValue = KeyValue.UNKNOWN
    confidence: float = 0.0
    reason: str = ""  # "decided", "tie" or "sub-threshold"

    def __post_init__(self):
        if self.value is KeyValue.UNKNOWN and self.confidence != 0:
            raise ValueError("an unknown guess carries zero confidence")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


UNKNOWN = KeyBitGuess()


@dataclass
class SolutionVector:
    guesses: list[KeyBitGuess]
    source: str = ""

    def __len__(self):
        return len(self.guesses)

    def values(self) -> list[KeyValue]:
        return [g.value for g in self.guesses]

    def to_json(self) -> dict:
        return {"source": self.source,
                "bits": [{"value": g.value.value, "confidence": g.confidence, "reason": g.reason}
                         for g in self.guesses]}

    @classmethod
    def from_json(cls, d: dict) -> "SolutionVector":
        return cls([KeyBitGuess(KeyValue(b["value"]), b["confidence"], b.get("reason", ""))
                    for b in d["bits"]], d.get("source", ""))


@dataclass
class EnsembleSolution:
    dk0: list[int]
    dk1: list[int]
    merged: list[KeyBitGuess]
    contributors: int = 0

    def __len__(self):
        return len(self.merged)

    def values(self) -> list[KeyValue]:
        return [g.value for g in self.merged]

    def to_json(self) -> dict:
        return {"dk0": self.dk0, "dk1": self.dk1, "contributors": self.contributors,
                "merged": [g.value.value for g in self.merged]}


@dataclass
class FeatureDelta:
    """Per key bit: stats(harden 0) - stats(harden 1), after light resynthesis."""
    delta: dict[str, float] = field(default_factory=dict)
    h0: ComplexityStats | None = None
    h1: ComplexityStats | None = None

    def vector(self) -> list[float]:
        return [self.delta[f] for f in STAT_FIELDS]


def harden_key_bit(n: Netlist, i: int, v: bool) -> Netlist:
    """Tie key input ``i`` to ``v`` and simplify; the other keys stay."""
    if not 0 <= i < len(n.keys):
        raise IndexError(f"key index {i} out of range for p={len(n.keys)}")
    return propagate_constants(n, {n.keys[i]: bool(v)})


def feature_deltas(n: Netlist, recipe: SynthesisRecipe = LIGHT_RECIPE) -> tuple[ComplexityStats, list[FeatureDelta]]:
    base = stats(resynthesize(n, recipe))
    out = []
    for i in range(len(n.keys)):
        s0 = stats(resynthesize(harden_key_bit(n, i, False), recipe))
        s1 = stats(resynthesize(harden_key_bit(n, i, True), recipe))
        d = {f: float(getattr(s0, f) - getattr(s1, f)) for f in STAT_FIELDS}
        out.append(FeatureDelta(d, s0, s1))
    return base, out


def _threshold_guess(d_area: float, base_area: float, tau: float) -> KeyBitGuess:
    # d_area = area(h0) - area(h1); negative means k=0 simplifies more
    if d_area == 0:
        return KeyBitGuess(KeyValue.UNKNOWN, 0.0, "tie")
    thr = tau * base_area
    if abs(d_area) <= thr:
        return KeyBitGuess(KeyValue.UNKNOWN, 0.0, "sub-threshold")
    conf = min(1.0, abs(d_area) / base_area) if base_area else 1.0
    return KeyBitGuess(KeyValue.ZERO if d_area < 0 else KeyValue.ONE, conf, "decided")


def _two_means(x: np.ndarray, iters: int = 50) -> np.ndarray:
    # deterministic init: the points with the smallest and largest first coordinate
    c = np.stack([x[np.argmin(x[:, 0])], x[np.argmax(x[:, 0])]])
    lab = np.zeros(len(x), dtype=int)
    for _ in range(iters):
        dist = ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        if _ > 0 and np.array_equal(new, lab):
            break
        lab = new
        for j in range(2):
            if np.any(lab == j):
                c[j] = x[lab == j].mean(axis=0)
    return lab


def decide(base: ComplexityStats, deltas: Sequence[FeatureDelta], policy: str = "threshold",
           tau: float = DEFAULT_TAU) -> list[KeyBitGuess]:
    base_area = base.area_proxy or 1.0
    thresh = [_threshold_guess(d.delta["area_proxy"], base_area, tau) for d in deltas]
    if policy == "threshold" or len(deltas) < 2:
        return thresh
    if policy != "cluster":
        raise ValueError(f"unknown policy {policy!r}")
    scale = np.array([max(abs(getattr(base, f)), 1e-9) for f in STAT_FIELDS])
    x = np.array([d.vector() for d in deltas]) / scale
    if not np.any(x):
        return thresh
    lab = _two_means(x)
    out = []
    for i, d in enumerate(deltas):
        if thresh[i].value is KeyValue.UNKNOWN:
            out.append(thresh[i])
            continue
        members = x[lab == lab[i]]
        agg = members[:, STAT_FIELDS.index("area_proxy")].sum()
        if agg == 0:
            out.append(KeyBitGuess(KeyValue.UNKNOWN, 0.0, "tie"))
            continue
        val = KeyValue.ZERO if agg < 0 else KeyValue.ONE
        out.append(KeyBitGuess(val, thresh[i].confidence, "decided"))
    return out


def attack_netlist(n: Netlist, policy: str = "threshold", tau: float = DEFAULT_TAU,
                   recipe: SynthesisRecipe = LIGHT_RECIPE) -> SolutionVector:
    """Guess every key bit of ``n`` from the simplification each value causes."""
    base, deltas = feature_deltas(n, recipe)
    return SolutionVector(decide(base, deltas, policy, tau), structural_signature(n))


def merge_votes(solutions: Sequence[SolutionVector]) -> EnsembleSolution:
    """Per-bit vote counts; the majority wins and a tie is unknown."""
    if not solutions:
        raise ValueError("no solutions to merge")
    p = len(solutions[0])
    if any(len(s) != p for s in solutions):
        raise ValueError("solutions disagree on the key length")
    dk0 = [0] * p
    dk1 = [0] * p
    for s in solutions:
        for i, g in enumerate(s.guesses):
            if g.value is KeyValue.ZERO:
                dk0[i] += 1
            elif g.value is KeyValue.ONE:
                dk1[i] += 1
    merged = [merged_value(a, b) for a, b in zip(dk0, dk1)]
    return EnsembleSolution(dk0, dk1, merged, len(solutions))


def merged_value(dk0: int, dk1: int) -> KeyBitGuess:
    if dk0 == dk1:
        return UNKNOWN
    conf = abs(dk0 - dk1) / (dk0 + dk1)
    return KeyBitGuess(KeyValue.ZERO if dk0 > dk1 else KeyValue.ONE, conf, "decided")


def _values(sol) -> list[KeyValue]:
    if isinstance(sol, (SolutionVector, EnsembleSolution)):
        return sol.values()
    return [g if isinstance(g, KeyValue) else g.value for g in sol]


def score(sol, truth: Sequence[bool]) -> tuple[int, int]:
    """(cdk, dk): correctly deciphered and deciphered key bits."""
    vals = _values(sol)
    if len(vals) != len(truth):
        raise ValueError("solution and key lengths differ")
    dk = cdk = 0
    for v, t in zip(vals, truth):
        if v is KeyValue.UNKNOWN:
            continue
        dk += 1
        cdk += v.as_bool() == bool(t)
    return cdk, dk

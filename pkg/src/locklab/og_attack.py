"""Oracle-guided attacks: query constraints with per-bit proofs, and the DIP baseline."""
from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

from .cnf import DEFAULT_CONFLICT_BUDGET, CnfFormula, Encoder, InterfaceMismatch, Status, check_equivalence
from .locking import substitute_key
from .netlist import Netlist, simulate
from .ol_attack import EnsembleSolution, KeyValue


@dataclass(frozen=True)
class Query:
    inputs: tuple[bool, ...]
    origin: str = "random"  # "sens:<bit>" or "random"


class Oracle:
    """A correctly keyed circuit answering input queries.

    Identical queries are answered from a cache and not counted again.
    """

    def __init__(self, reference: Netlist, key: Sequence[bool] | None = None):
        if key is None and reference.keys:
            raise ValueError("a locked reference needs its key")
        self.reference = reference
        self._key = tuple(bool(b) for b in key) if key is not None else ()
        self._cache: dict[tuple[bool, ...], tuple[bool, ...]] = {}
        self._lock = threading.Lock()
        self.query_count = 0

    @property
    def width(self) -> int:
        return len(self.reference.inputs)

    def query(self, x: Sequence[bool] | Query) -> tuple[bool, ...]:
        xs = tuple(bool(b) for b in (x.inputs if isinstance(x, Query) else x))
        if len(xs) != self.width:
            raise InterfaceMismatch(f"query width {len(xs)} != {self.width}")
        with self._lock:
            hit = self._cache.get(xs)
            if hit is None:
                hit = tuple(simulate(self.reference, xs, self._key))
                self._cache[xs] = hit
                self.query_count += 1
            return hit

    def unlocked(self) -> Netlist:
        return substitute_key(self.reference, self._key) if self.reference.keys else self.reference

    def accepts(self, locked: Netlist, key: Sequence[bool]) -> bool:
        """True when ``locked`` under ``key`` is equivalent to the oracle circuit."""
        return check_equivalence(substitute_key(locked, key), self.unlocked()).equivalent


# -- query generation ----------------------------------------------------------

def gen_sensitization_queries(locked: Netlist, conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET,
                              oracle: "Oracle | None" = None, limit: int | None = None) -> tuple[list[Query], list[int]]:
    """One query per observable key bit: an input under which flipping that bit
    changes some output for some setting of the other key bits.

    With an ``oracle`` the search is adaptive: both key copies must also agree
    with the responses to all earlier queries, so every query separates keys
    that are still consistent, and bits are revisited until settled or
    ``limit`` queries (default 2p) are spent. Returns (queries, skipped bit
    indices).
    """
    if oracle is not None:
        return _adaptive_sensitization(locked, oracle, conflict_budget, limit)
    queries: list[Query] = []
    skipped: list[int] = []
    seen: set[tuple[bool, ...]] = set()
    for i in range(len(locked.keys)):
        f = CnfFormula()
        enc = Encoder(f)
        x = [f.new_var() for _ in locked.inputs]
        k = [f.new_var() for _ in locked.keys]
        ka = list(k)
        kb = list(k)
        ka[i], kb[i] = False, True
        d = enc.differ(enc.outputs(locked, x, ka), enc.outputs(locked, x, kb))
        if d is False:
            skipped.append(i)
            continue
        if d is not True:
            f.clauses.append([d])
        res = f.solve(conflict_budget=conflict_budget)
        f.close()
        if not res.sat:
            skipped.append(i)
            continue
        q = tuple(res.value(v) for v in x)
        if q not in seen:
            seen.add(q)
            queries.append(Query(q, f"sens:{i}"))
    return queries, skipped


def _adaptive_sensitization(locked: Netlist, oracle: "Oracle", conflict_budget,
                            limit: int | None = None) -> tuple[list[Query], list[int]]:
    # bits are revisited round-robin until each is settled (UNSAT) or the
    # query limit is reached; settled bits never reopen since constraints only grow
    p = len(locked.keys)
    limit = 2 * p if limit is None else limit
    f = CnfFormula()
    enc = Encoder(f)
    x = [f.new_var() for _ in locked.inputs]
    ka = [f.new_var() for _ in locked.keys]
    kb = [f.new_var() for _ in locked.keys]
    d = enc.differ(enc.outputs(locked, x, ka), enc.outputs(locked, x, kb))
    queries: list[Query] = []
    settled = [d is False] * p
    while len(queries) < limit and not all(settled):
        for i in range(p):
            if settled[i] or len(queries) >= limit:
                continue
            assume = [ka[i], -kb[i]] + ([] if d is True else [d])
            res = f.solve(assume, conflict_budget)
            if not res.sat:
                settled[i] = True
                continue
            q = tuple(res.value(v) for v in x)
            queries.append(Query(q, f"sens:{i}"))
            y = oracle.query(q)
            for kv in (ka, kb):
                for v, r in zip(enc.outputs(locked, list(q), kv), y):
                    enc.assert_value(v, r)
    f.close()
    # bits never sensitized by any query count as skipped
    hit = {int(q.origin.split(":")[1]) for q in queries}
    return queries, [i for i in range(p) if i not in hit]


def gen_random_queries(locked: Netlist, count: int, seed: int = 0,
                       exclude: Sequence[Query] = ()) -> list[Query]:
    """``count`` distinct uniform input vectors (fewer if the input space runs out)."""
    rng = random.Random(seed)
    w = len(locked.inputs)
    seen = {q.inputs for q in exclude}
    count = min(count, (1 << w) - len(seen)) if w < 63 else count
    out = []
    while len(out) < count:
        q = tuple(bool(rng.getrandbits(1)) for _ in range(w))
        if q in seen:
            continue
        seen.add(q)
        out.append(Query(q, "random"))
    return out


def gen_queries(locked: Netlist, seed: int = 0, total: int | None = None,
                conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET,
                oracle: "Oracle | None" = None) -> tuple[list[Query], list[int]]:
    """Sensitization queries topped up with random ones to ``total`` (default 2p)."""
    total = 2 * len(locked.keys) if total is None else total
    sens, skipped = gen_sensitization_queries(locked, conflict_budget, oracle, limit=total)
    sens = sens[:total]
    return sens + gen_random_queries(locked, total - len(sens), seed, exclude=sens), skipped


# -- key constraints ------------------------------------------------------------

class KeyConstraints:
    """The accumulated formula over the key variables of one locked netlist."""

    def __init__(self, locked: Netlist):
        self.locked = locked
        self.f = CnfFormula()
        self.enc = Encoder(self.f)
        self.key_vars = [self.f.new_var() for _ in locked.keys]
        self.queries: list[tuple[Query, tuple[bool, ...]]] = []

    def close(self):
        self.f.close()


def derive_constraints(c: KeyConstraints, q: Query, response: Sequence[bool]) -> KeyConstraints:
    """Conjoin a constant-folded copy of the locked circuit with inputs fixed to
    ``q`` and outputs fixed to ``response``; key variables are shared."""
    if len(response) != len(c.locked.outputs):
        raise InterfaceMismatch("response width differs from the output count")
    if len(q.inputs) != len(c.locked.inputs):
        raise InterfaceMismatch("query width differs from the input count")
    outs = c.enc.outputs(c.locked, list(q.inputs), c.key_vars)
    for v, r in zip(outs, response):
        c.enc.assert_value(v, bool(r))
    c.queries.append((q, tuple(bool(r) for r in response)))
    return c


class BudgetExhausted(RuntimeError):
    pass


def solve_candidate(c: KeyConstraints, conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET) -> list[bool]:
    """Some key consistent with every query so far (not necessarily the secret key)."""
    res = c.f.solve(conflict_budget=conflict_budget)
    if res.status is Status.UNKNOWN:
        raise BudgetExhausted("candidate search exceeded its conflict budget")
    if res.unsat:
        raise RuntimeError("query constraints are unsatisfiable; the oracle disagrees with the netlist")
    return [res.value(v) for v in c.key_vars]


def prove_bit(c: KeyConstraints, i: int, value: bool,
              conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET) -> str:
    """'proven' if no consistent key has bit i complemented, else 'unproven' or 'budget'."""
    kv = c.key_vars[i]
    res = c.f.solve(assumptions=[-kv if value else kv], conflict_budget=conflict_budget)
    if res.status is Status.UNKNOWN:
        return "budget"
    return "proven" if res.unsat else "unproven"


@dataclass
class ProvenSolution:
    candidate: list[bool]
    proven: list[bool]
    budget_flag: list[bool]
    queries: list[Query] = field(default_factory=list)
    constraints: KeyConstraints | None = None

    @property
    def proven_count(self) -> int:
        return sum(self.proven)

    def proven_values(self) -> list[bool | None]:
        return [c if p else None for c, p in zip(self.candidate, self.proven)]


def query_attack(locked: Netlist, oracle: Oracle, queries: Sequence[Query] | None = None, seed: int = 0,
                 conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET, keep_formula: bool = False) -> ProvenSolution:
    """Constrain the key with oracle responses, then try to prove each candidate bit."""
    if len(locked.inputs) != oracle.width or len(locked.outputs) != len(oracle.reference.outputs):
        raise InterfaceMismatch("locked netlist and oracle interfaces differ")
    if queries is None:
        queries, _ = gen_queries(locked, seed, conflict_budget=conflict_budget, oracle=oracle)
    c = KeyConstraints(locked)
    for q in queries:
        derive_constraints(c, q, oracle.query(q))
    p = len(locked.keys)
    cand = solve_candidate(c, conflict_budget) if p else []
    proven = [False] * p
    flag = [False] * p
    for i in range(p):
        r = prove_bit(c, i, cand[i], conflict_budget)
        proven[i] = r == "proven"
        flag[i] = r == "budget"
    if not keep_formula:
        c.close()
    return ProvenSolution(cand, proven, flag, list(queries), c if keep_formula else None)


# -- ensemble ---------------------------------------------------------------------

class ProofConflict(RuntimeError):
    """Two variants proved different values for one key bit."""


@dataclass
class KeySolution:
    values: list[bool | None]
    provenance: list[str]  # "proven", "ol-guess" or "unknown"
    budget_flag: list[bool]
    proven_by: list[int]  # number of variants proving each bit

    def to_json(self) -> dict:
        return {"bits": [{"value": None if v is None else int(v), "provenance": p, "proven": p == "proven",
                          "budget_flag": b} for v, p, b in zip(self.values, self.provenance, self.budget_flag)]}

    def key_values(self) -> list[KeyValue]:
        return [KeyValue.UNKNOWN if v is None else KeyValue.of(v) for v in self.values]


def merge_proofs(per_variant: Sequence[ProvenSolution], ol: EnsembleSolution | None, p: int) -> KeySolution:
    """Proven values take precedence; otherwise the OL ensemble guess, if any."""
    vals: list[bool | None] = [None] * p
    prov = ["unknown"] * p
    flags = [False] * p
    count = [0] * p
    for s in per_variant:
        if len(s.proven) != p:
            raise InterfaceMismatch("variant key widths differ")
        for i in range(p):
            flags[i] |= s.budget_flag[i]
            if not s.proven[i]:
                continue
            count[i] += 1
            if vals[i] is not None and vals[i] != s.candidate[i]:
                raise ProofConflict(f"key bit {i} proven both 0 and 1")
            vals[i] = s.candidate[i]
            prov[i] = "proven"
    if ol is not None:
        if len(ol.merged) != p:
            raise InterfaceMismatch("OL solution width differs")
        for i in range(p):
            if prov[i] == "proven":
                continue
            g = ol.merged[i].value
            if g is not KeyValue.UNKNOWN:
                vals[i] = g is KeyValue.ONE
                prov[i] = "ol-guess"
    return KeySolution(vals, prov, flags, count)


def ensemble_og_attack(variants: Sequence[Netlist], oracle: Oracle, ol: EnsembleSolution | None = None,
                       queries: Sequence[Query] | None = None, base: Netlist | None = None, seed: int = 0,
                       conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET) -> tuple[KeySolution, list[ProvenSolution]]:
    """Query attack on every variant with one shared query set, merged with the OL votes."""
    if not variants:
        raise ValueError("no variants")
    ref = base if base is not None else variants[0]
    p = len(ref.keys)
    for v in variants:
        if len(v.keys) != p or len(v.inputs) != len(ref.inputs) or len(v.outputs) != len(ref.outputs):
            raise InterfaceMismatch("variants do not share one interface")
    if queries is None:
        queries, _ = gen_queries(ref, seed, conflict_budget=conflict_budget, oracle=oracle)
    sols = [query_attack(v, oracle, queries, conflict_budget=conflict_budget) for v in variants]
    return merge_proofs(sols, ol, p), sols


# -- DIP attack -------------------------------------------------------------------

@dataclass
class DipResult:
    key: list[bool] | None
    iterations: int
    status: str  # "solved" or "timeout"
    verified: bool | None = None
    seconds: float = 0.0


def dip_attack(locked: Netlist, oracle: Oracle, max_iterations: int = 5000, time_limit: float | None = None,
               conflict_budget: int | None = DEFAULT_CONFLICT_BUDGET, verify: bool = True) -> DipResult:
    """Iteratively query differentiating inputs until the surviving keys agree everywhere."""
    t0 = time.perf_counter()
    if len(locked.inputs) != oracle.width:
        raise InterfaceMismatch("locked netlist and oracle interfaces differ")
    p = len(locked.keys)
    if p == 0:
        return DipResult([], 0, "solved", oracle.accepts(locked, []) if verify else None, 0.0)
    f = CnfFormula()
    enc = Encoder(f)
    x = [f.new_var() for _ in locked.inputs]
    k1 = [f.new_var() for _ in locked.keys]
    k2 = [f.new_var() for _ in locked.keys]
    d = enc.differ(enc.outputs(locked, x, k1), enc.outputs(locked, x, k2))
    act = f.new_var()
    if d is not False:
        f.clauses.append([-act] + ([] if d is True else [d]))
    it = 0
    while True:
        if it >= max_iterations or (time_limit is not None and time.perf_counter() - t0 > time_limit):
            f.close()
            return DipResult(None, it, "timeout", None, time.perf_counter() - t0)
        res = f.solve([act], conflict_budget) if d is not False else None
        if res is None or res.unsat:
            break
        if res.status is Status.UNKNOWN:
            f.close()
            return DipResult(None, it, "timeout", None, time.perf_counter() - t0)
        xs = [res.value(v) for v in x]
        y = oracle.query(xs)
        for kv in (k1, k2):
            for v, r in zip(enc.outputs(locked, xs, kv), y):
                enc.assert_value(v, r)
        it += 1
    res = f.solve([-act], conflict_budget)
    f.close()
    if not res.sat:
        return DipResult(None, it, "timeout", None, time.perf_counter() - t0)
    key = [res.value(v) for v in k1]
    ok = oracle.accepts(locked, key) if verify else None
    return DipResult(key, it, "solved", ok, time.perf_counter() - t0)

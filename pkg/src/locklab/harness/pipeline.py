"""Experiment orchestration: lock, resynthesize, attack, score, report.

Every stage writes a JSON file carrying the digest of its inputs; a rerun
reuses a stage whose digest still matches, so deleting any stage file (or a
late one) recomputes only what is missing. Wall-clock times go to a separate
``timings.json`` so reports stay byte-identical across reruns.

Seeds: every random choice draws from ``sub_seed(cfg.seed, *labels)``, a
SHA-256 split of the master seed by circuit, lock spec and stage name.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..circuits import BUILTIN, random_circuit
from ..locking import lock
from ..netlist import Netlist, format_key, parse_bench, parse_key, read_bench, write_bench
from ..og_attack import Oracle, Query, dip_attack, ensemble_og_attack, gen_queries, query_attack
from ..ol_attack import (EnsembleSolution, KeyValue, SolutionVector, attack_netlist, merge_votes,
                         merged_value, score)
from ..resynth.recipes import (AXES, RecipeConfig, SynthesisRecipe, diversity_report,
                               enumerate_recipes, generate_variants)
from .analysis import convergence_analysis, expand_to_recipes, min_variants_for_final, slack_analysis

log = logging.getLogger(__name__)

ATTACKS = ("ol", "og", "dip")


class ConfigError(ValueError):
    pass


def sub_seed(seed: int, *labels) -> int:
    h = hashlib.sha256(("|".join([str(seed)] + [str(x) for x in labels])).encode()).digest()
    return int.from_bytes(h[:4], "big")


@dataclass
class LockSpec:
    scheme: str
    p: int
    p_sfll: int | None = None

    @property
    def label(self) -> str:
        extra = f"+{self.p_sfll}" if self.p_sfll is not None else ""
        return f"{self.scheme}{self.p}{extra}"


@dataclass
class ExperimentConfig:
    circuits: list[str]
    locks: list[LockSpec]
    recipes: RecipeConfig = field(default_factory=RecipeConfig)
    recipe_limit: int | None = None  # evenly spaced subset of the grid
    attacks: tuple[str, ...] = ("ol", "og")
    seed: int = 0
    out_dir: str = "locklab_out"
    conflict_budget: int = 10_000_000
    dip_iterations: int = 5000
    certify: str = "sim"
    policy: str = "threshold"
    jobs: int = 1
    convergence_axis: str = "unique"  # or "recipes": one point per executed recipe

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        try:
            locks = [LockSpec(**x) for x in d["locks"]]
            rc = RecipeConfig(**{k: tuple(v) for k, v in d.get("recipes", {}).items() if k in AXES})
            if "seed" in d.get("recipes", {}):
                rc.seed = d["recipes"]["seed"]
            cfg = cls(
                circuits=list(d["circuits"]),
                locks=locks,
                recipes=rc,
                recipe_limit=d.get("recipe_limit"),
                attacks=tuple(d.get("attacks", ("ol", "og"))),
                seed=int(d.get("seed", 0)),
                out_dir=str(d.get("out_dir", "locklab_out")),
                conflict_budget=int(d.get("conflict_budget", 10_000_000)),
                dip_iterations=int(d.get("dip_iterations", 5000)),
                certify=d.get("certify", "sim"),
                policy=d.get("policy", "threshold"),
                jobs=int(d.get("jobs", 1)),
                convergence_axis=d.get("convergence_axis", "unique"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad config: {e}") from e
        base = Path(base_dir)
        cfg.circuits = [c if ":" in c or os.path.isabs(c) else str(base / c) for c in cfg.circuits]
        cfg.validate()
        return cfg

    def validate(self):
        if not self.circuits:
            raise ConfigError("no circuits")
        if not self.locks:
            raise ConfigError("no lock specs")
        bad = set(self.attacks) - set(ATTACKS)
        if bad:
            raise ConfigError(f"unknown attacks {sorted(bad)}")
        if self.certify not in ("sim", "sat", "both", "none"):
            raise ConfigError(f"unknown certify mode {self.certify!r}")
        if self.policy not in ("threshold", "cluster"):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.convergence_axis not in ("unique", "recipes"):
            raise ConfigError(f"unknown convergence axis {self.convergence_axis!r}")
        for c in self.circuits:
            try:
                load_circuit(c)
            except Exception as e:  # any parse/IO failure is a config error here
                raise ConfigError(f"circuit {c!r}: {e}") from e
        try:
            enumerate_recipes(self.recipes)
        except ValueError as e:
            raise ConfigError(str(e)) from e


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    env = os.environ.get("LOCKLAB_SEED")
    if env is not None:
        try:
            d["seed"] = int(env)
        except ValueError as e:
            raise ConfigError(f"LOCKLAB_SEED must be an integer, got {env!r}") from e
    return ExperimentConfig.from_dict(d, Path(path).parent)


def load_circuit(spec: str) -> Netlist:
    """A BENCH path, ``builtin:NAME`` or ``random:INPUTS:GATES:OUTPUTS:SEED``."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN:
            raise ValueError(f"unknown builtin circuit {name!r}")
        return BUILTIN[name]()
    if spec.startswith("random:"):
        parts = spec.split(":")[1:]
        if len(parts) != 4:
            raise ValueError("random circuits are random:INPUTS:GATES:OUTPUTS:SEED")
        i, g, o, s = (int(x) for x in parts)
        return random_circuit(i, g, o, s)
    n = read_bench(spec)
    return n.replace(name=Path(spec).stem)


def circuit_label(spec: str) -> str:
    if ":" in spec and not os.path.exists(spec):
        return spec.replace(":", "_")
    return Path(spec).stem


# -- stage bookkeeping ---------------------------------------------------------

class AccessLog:
    """Records which stage read which file; used to audit key-file access."""

    def __init__(self, root: Path):
        self.root = root
        self.entries: list[tuple[str, str]] = []

    def read_text(self, stage: str, path: Path) -> str:
        self.entries.append((stage, os.path.relpath(path, self.root)))
        return path.read_text()

    def readers_of(self, suffix: str) -> set[str]:
        return {st for st, p in self.entries if p.endswith(suffix)}


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(json.dumps(p, sort_keys=True, default=str).encode() if not isinstance(p, (bytes, str)) else
                 (p.encode() if isinstance(p, str) else p))
        h.update(b"\0")
    return h.hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cached(path: Path, digest: str, compute: Callable[[], Any], timings: dict, name: str,
            valid: Callable[[Any], bool] | None = None):
    if path.exists():
        try:
            d = json.loads(path.read_text())
            if d.get("digest") == digest and (valid is None or valid(d["result"])):
                timings[name] = 0.0
                return d["result"], True
        except json.JSONDecodeError:
            pass
    t0 = time.perf_counter()
    result = compute()
    timings[name] = time.perf_counter() - t0
    path.write_text(_dump({"digest": digest, "result": result}))
    return result, False


def _slack_json(s: float):
    return "inf" if math.isinf(s) else s


def _slack_val(s) -> float:
    return math.inf if s == "inf" else float(s)


def select_recipes(cfg: ExperimentConfig) -> tuple[list[SynthesisRecipe], list[int]]:
    recipes = enumerate_recipes(cfg.recipes)
    idx = list(range(len(recipes)))
    if cfg.recipe_limit is not None and cfg.recipe_limit < len(recipes):
        step = len(recipes) / cfg.recipe_limit
        idx = sorted({int(j * step) for j in range(cfg.recipe_limit)})
    return [recipes[i] for i in idx], idx


# -- one (circuit, lock) experiment ---------------------------------------------

def run_one(cfg: ExperimentConfig, spec: str, lk: LockSpec, access: AccessLog, timings: dict) -> dict:
    root = Path(cfg.out_dir)
    label = f"{circuit_label(spec)}__{lk.label}"
    d = root / label
    (d / "variants").mkdir(parents=True, exist_ok=True)
    original = load_circuit(spec)
    orig_text = write_bench(original)
    base = circuit_label(spec)

    # lock
    lock_seed = sub_seed(cfg.seed, base, lk.label, "lock")
    lock_digest = _digest("lock", orig_text, asdict(lk), lock_seed)

    def do_lock():
        locked, rec = lock(original, lk.scheme, lk.p, lock_seed, p_sfll=lk.p_sfll)
        (d / "original.bench").write_text(orig_text)
        (d / "locked.bench").write_text(write_bench(locked))
        (d / "locked.key").write_text(format_key(rec.true_key) + "\n")
        return {"p": len(locked.keys), "gates": len(locked.gates), "key_ranges": {k: list(v) for k, v in rec.key_ranges.items()},
                "locked_sha": hashlib.sha256(write_bench(locked).encode()).hexdigest()}

    def lock_files_ok(res) -> bool:
        paths = [d / "original.bench", d / "locked.bench", d / "locked.key"]
        return all(x.exists() for x in paths) and \
            hashlib.sha256((d / "locked.bench").read_bytes()).hexdigest() == res["locked_sha"]

    lock_res, _ = _cached(d / "lock.json", lock_digest, do_lock, timings, f"{label}/lock", lock_files_ok)
    locked_text = access.read_text("lock", d / "locked.bench")
    locked = parse_bench(locked_text, name=f"{base}_locked")

    # resynthesis
    recipes, indices = select_recipes(cfg)
    rs_digest = _digest("resynth", lock_res["locked_sha"], [r.to_dict() for r in recipes], indices, cfg.certify)

    def do_resynth():
        vs = generate_variants(locked, recipes, None if cfg.certify == "none" else cfg.certify,
                               jobs=cfg.jobs, indices=indices)
        entries = []
        for v in vs.variants:
            fname = f"{base}__r{v.index}.bench"
            (d / "variants" / fname).write_text(write_bench(v.netlist))
            entries.append({"index": v.index, "file": fname, "recipe": v.recipe.to_dict(), "signature": v.signature,
                            "stats": v.stats.as_dict(), "slack": _slack_json(v.slack)})
        return {"executed": vs.executed, "unique": len(vs), "variants": entries,
                "duplicates": {k: v for k, v in sorted(vs.duplicates.items())},
                "diversity": {k: {"mean": x["mean"], "std": x["std"]} for k, x in diversity_report(vs).items()}}

    rs_res, _ = _cached(d / "manifest.json", rs_digest, do_resynth, timings, f"{label}/resynth",
                        lambda res: all((d / "variants" / e["file"]).exists() for e in res["variants"]))
    variants = [parse_bench(access.read_text("resynth", d / "variants" / e["file"]), name=e["file"][:-6])
                for e in rs_res["variants"]]

    report: dict[str, Any] = {
        "circuit": base, "scheme": lk.scheme, "lock": lk.label, "p": lock_res["p"],
        "locked_gates": lock_res["gates"], "executed": rs_res["executed"],
        "unique_variant_count": rs_res["unique"], "stats": rs_res["diversity"],
    }

    ol_res = None
    if "ol" in cfg.attacks:
        ol_digest = _digest("ol", rs_digest, cfg.policy)

        def do_ol():
            single = attack_netlist(locked, cfg.policy)
            sols = [attack_netlist(v, cfg.policy) for v in variants]
            ens = merge_votes(sols) if sols else merge_votes([single])
            return {"single": single.to_json(), "variants": [s.to_json() for s in sols], "ensemble": ens.to_json()}

        ol_res, _ = _cached(d / "ol.json", ol_digest, do_ol, timings, f"{label}/ol")

    og_res = None
    if "og" in cfg.attacks:
        og_digest = _digest("og", rs_digest, ol_res and ol_res["ensemble"], cfg.conflict_budget)

        def do_og():
            oracle = Oracle(parse_bench(access.read_text("og", d / "original.bench")))
            qs, skipped = gen_queries(locked, sub_seed(cfg.seed, base, lk.label, "queries"),
                                      conflict_budget=cfg.conflict_budget, oracle=oracle)
            single = query_attack(locked, oracle, qs, conflict_budget=cfg.conflict_budget)
            ol_ens = _ensemble_from_json(ol_res["ensemble"]) if ol_res else None
            final, sols = ensemble_og_attack(variants or [locked], oracle, ol_ens, qs, base=locked,
                                             conflict_budget=cfg.conflict_budget)
            return {
                "queries": ["".join("1" if b else "0" for b in q.inputs) for q in qs],
                "query_origins": [q.origin for q in qs],
                "skipped_bits": skipped,
                "oracle_queries": oracle.query_count,
                "single_proven": single.proven_values(),
                "variant_proven_counts": [s.proven_count for s in sols],
                "final": final.to_json(),
            }

        og_res, _ = _cached(d / "og.json", og_digest, do_og, timings, f"{label}/og")

    dip_res = None
    if "dip" in cfg.attacks:
        dip_digest = _digest("dip", lock_res["locked_sha"], cfg.dip_iterations, cfg.conflict_budget)

        def do_dip():
            oracle = Oracle(parse_bench(access.read_text("dip", d / "original.bench")))
            r = dip_attack(locked, oracle, cfg.dip_iterations, conflict_budget=cfg.conflict_budget)
            return {"status": r.status, "iterations": r.iterations, "verified": r.verified,
                    "key": None if r.key is None else format_key(r.key)}

        dip_res, _ = _cached(d / "dip.json", dip_digest, do_dip, timings, f"{label}/dip")
        report["dip"] = {"status": dip_res["status"], "iterations": dip_res["iterations"],
                         "verified": dip_res["verified"]}

    # scoring is the only stage that reads the key file
    if ol_res or og_res or dip_res:
        truth = parse_key(access.read_text("score", d / "locked.key"))
        report.update(_score(truth, ol_res, og_res, rs_res, cfg.convergence_axis))
    return report


def _ensemble_from_json(d: dict) -> EnsembleSolution:
    return EnsembleSolution(d["dk0"], d["dk1"], [merged_value(a, b) for a, b in zip(d["dk0"], d["dk1"])],
                            d.get("contributors", 0))


def _score(truth, ol_res, og_res, rs_res, axis="unique") -> dict:
    out: dict[str, Any] = {}
    p = len(truth)
    if ol_res:
        single = SolutionVector.from_json(ol_res["single"])
        sols = [SolutionVector.from_json(s) for s in ol_res["variants"]]
        merged = [KeyValue(v) for v in ol_res["ensemble"]["merged"]]
        cdk, dk = score(merged, truth)
        s_cdk, s_dk = score(single, truth)
        out["ol"] = {"cdk": cdk, "dk": dk, "single_cdk": s_cdk, "single_dk": s_dk}
        if sols:
            ordered = sols
            if axis == "recipes":
                ordered = expand_to_recipes(sols, rs_res["duplicates"], [e["signature"] for e in rs_res["variants"]])
            series = convergence_analysis(ordered, truth)
            out["ol"]["convergence"] = [list(x) for x in series]
            out["ol"]["min_variants_for_final_dk"] = min_variants_for_final(series)
            slacks = [_slack_val(e["slack"]) for e in rs_res["variants"]]
            dks = [score(s, truth)[1] for s in sols]
            sl = slack_analysis(slacks, dks)
            out["ol"]["slack"] = {k: sl[k] for k in ("top_size", "top_counts", "all_counts")}
    if og_res:
        bits = og_res["final"]["bits"]
        vals = [KeyValue.UNKNOWN if b["value"] is None else KeyValue.of(bool(b["value"])) for b in bits]
        cdk, dk = score(vals, truth)
        proven = sum(1 for b in bits if b["proven"])
        proven_ok = sum(1 for b, t in zip(bits, truth) if b["proven"] and bool(b["value"]) == t)
        single = og_res["single_proven"]
        out["og"] = {"cdk": cdk, "dk": dk, "proven_count": proven, "proven_correct": proven_ok,
                     "single_proven_count": sum(1 for v in single if v is not None),
                     "oracle_queries": og_res["oracle_queries"]}
    out["p"] = p
    return out


# -- whole run ---------------------------------------------------------------------

REPORT_COLUMNS = ("circuit", "lock", "p", "locked_gates", "executed", "unique_variant_count",
                  "ol_cdk", "ol_dk", "og_cdk", "og_dk", "og_proven", "dip_status", "dip_iterations", "status")


def _csv(reports: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([
            r.get("circuit"), r.get("lock"), r.get("p"), r.get("locked_gates"), r.get("executed"),
            r.get("unique_variant_count"),
            r.get("ol", {}).get("cdk"), r.get("ol", {}).get("dk"),
            r.get("og", {}).get("cdk"), r.get("og", {}).get("dk"), r.get("og", {}).get("proven_count"),
            r.get("dip", {}).get("status"), r.get("dip", {}).get("iterations"), r.get("status"),
        ])
    return buf.getvalue()


def run_pipeline(cfg: ExperimentConfig) -> tuple[list[dict], AccessLog]:
    """Run every (circuit, lock) pair; a failure is recorded and the run continues."""
    cfg.validate()
    root = Path(cfg.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    access = AccessLog(root)
    timings: dict[str, float] = {}
    reports = []
    for spec in cfg.circuits:
        for lk in cfg.locks:
            try:
                r = run_one(cfg, spec, lk, access, timings)
                r["status"] = "ok"
            except Exception as e:  # isolate per-circuit failures
                log.exception("experiment %s/%s failed", spec, lk.label)
                r = {"circuit": circuit_label(spec), "lock": lk.label, "scheme": lk.scheme,
                     "status": "failed", "error": f"{type(e).__name__}: {e}"}
            reports.append(r)
    (root / "report.json").write_text(_dump({"seed": cfg.seed, "reports": reports}))
    (root / "report.csv").write_text(_csv(reports))
    (root / "access.json").write_text(_dump(access.entries))
    (root / "timings.json").write_text(_dump({"machine": f"{platform.node()} {platform.machine()} "
                                                         f"{platform.python_version()} cpus={os.cpu_count()}",
                                              "stages": timings}))
    return reports, access


__all__ = ["ExperimentConfig", "LockSpec", "ConfigError", "load_config", "load_circuit", "run_pipeline",
           "sub_seed", "AccessLog", "select_recipes", "Query"]

"""Command-line entry point: ``locklab <subcommand>``.

Exit codes: 0 success, 2 partial failure, 3 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from ..locking import lock
from ..netlist import format_key, parse_key, read_bench, write_bench
from ..og_attack import Oracle, dip_attack, ensemble_og_attack, gen_queries
from ..ol_attack import (EnsembleSolution, KeyValue, SolutionVector, attack_netlist, merge_votes,
                         merged_value, score)
from ..resynth.recipes import (RecipeConfig, SynthesisRecipe, enumerate_recipes, generate_variants,
                               prune_redundant_recipes)
from .analysis import cone_mode, convergence_analysis, min_variants_for_final, slack_analysis
from .pipeline import ConfigError, load_circuit, load_config, run_pipeline

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 2, 3


def _seed(args) -> int:
    env = os.environ.get("LOCKLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"LOCKLAB_SEED must be an integer, got {env!r}") from None
    return args.seed


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_netlist(path: str):
    try:
        return load_circuit(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot load {path}: {e}") from e


def _variants_from(args, locked_fallback=None):
    if args.variants:
        files = sorted(Path(args.variants).glob("*.bench"))
        if not files:
            raise ConfigError(f"no .bench files in {args.variants}")
        return [read_bench(f) for f in files]
    if locked_fallback is not None:
        return [locked_fallback]
    raise ConfigError("give a netlist or --variants DIR")


def _oracle(args) -> Oracle:
    ref = _load_netlist(args.oracle)
    if ref.keys:
        if not args.oracle_key:
            raise ConfigError("a locked oracle netlist needs --oracle-key")
        return Oracle(ref, parse_key(Path(args.oracle_key).read_text()))
    return Oracle(ref)


# -- subcommands -----------------------------------------------------------------

def cmd_lock(args) -> int:
    n = _load_netlist(args.netlist)
    locked, rec = lock(n, args.scheme, args.p, _seed(args), p_sfll=args.p_sfll)
    out = Path(args.out)
    out.write_text(write_bench(locked))
    out.with_suffix(".key").write_text(format_key(rec.true_key) + "\n")
    print(f"locked {n.name}: {len(locked.keys)} key bits, {len(locked.gates)} gates -> {out}")
    return EXIT_OK


def _recipes(args) -> list[SynthesisRecipe]:
    seed = _seed(args)
    if args.recipes == "all":
        rs = enumerate_recipes(RecipeConfig(seed=seed))
    elif args.recipes == "reduced":
        rs = enumerate_recipes(RecipeConfig(syn_gen=("Low", "Medium"), seed=seed))
    else:
        try:
            data = json.loads(Path(args.recipes).read_text())
            rs = [SynthesisRecipe.from_dict(d) for d in data]
        except (OSError, ValueError, TypeError, KeyError) as e:
            raise ConfigError(f"bad recipe file {args.recipes}: {e}") from e
    if args.limit is not None and args.limit < len(rs):
        step = len(rs) / args.limit
        rs = [rs[int(j * step)] for j in range(args.limit)]
    return rs


def cmd_resynth(args) -> int:
    n = _load_netlist(args.netlist)
    recipes = _recipes(args)
    vs = generate_variants(n, recipes, None if args.certify == "none" else args.certify, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for v in vs.variants:
        fname = f"{n.name}__r{v.index}.bench"
        (out / fname).write_text(write_bench(v.netlist))
        entries.append({"index": v.index, "file": fname, "recipe": v.recipe.to_dict(), "signature": v.signature,
                        "stats": v.stats.as_dict(), "slack": "inf" if math.isinf(v.slack) else v.slack})
    _write_json(out / "manifest.json", {"base": n.name, "executed": vs.executed, "unique": len(vs),
                                        "variants": entries})
    if args.prune:
        kept = prune_redundant_recipes(vs, recipes)
        _write_json(out / "reduced_recipes.json", [r.to_dict() for r in kept])
    print(f"{len(vs)} unique variants out of {vs.executed} recipes -> {out}")
    return EXIT_OK


def cmd_attack_ol(args) -> int:
    base = _load_netlist(args.netlist) if args.netlist else None
    nets = _variants_from(args, base)
    sols = [attack_netlist(n, args.policy) for n in nets]
    ens = merge_votes(sols)
    report = {"solutions": [s.to_json() for s in sols], "ensemble": ens.to_json()}
    if args.truth:
        truth = parse_key(Path(args.truth).read_text())
        cdk, dk = score(ens, truth)
        report["score"] = {"cdk": cdk, "dk": dk}
    _write_json(args.out, report)
    return EXIT_OK


def cmd_attack_og(args) -> int:
    base = _load_netlist(args.netlist) if args.netlist else None
    nets = _variants_from(args, base)
    ref = base or nets[0]
    oracle = _oracle(args)
    total = None if args.queries == "2p" else int(args.queries)
    qs, skipped = gen_queries(ref, _seed(args), total, args.budget_conflicts, oracle=oracle)
    ol = None
    if args.ol_solution:
        d = json.loads(Path(args.ol_solution).read_text())
        e = d.get("ensemble", d)
        ol = EnsembleSolution(e["dk0"], e["dk1"], [merged_value(a, b) for a, b in zip(e["dk0"], e["dk1"])])
    final, sols = ensemble_og_attack(nets, oracle, ol, qs, base=ref, conflict_budget=args.budget_conflicts)
    report = final.to_json()
    report["queries"] = [{"inputs": "".join("1" if b else "0" for b in q.inputs), "origin": q.origin} for q in qs]
    report["skipped_bits"] = skipped
    report["oracle_queries"] = oracle.query_count
    report["variant_proven_counts"] = [s.proven_count for s in sols]
    _write_json(args.out, report)
    return EXIT_OK


def cmd_attack_dip(args) -> int:
    locked = _load_netlist(args.netlist)
    r = dip_attack(locked, _oracle(args), args.max_iterations, args.time_limit, args.budget_conflicts)
    _write_json(args.out, {"status": r.status, "iterations": r.iterations, "verified": r.verified,
                           "key": None if r.key is None else format_key(r.key), "seconds": round(r.seconds, 3)})
    return EXIT_OK if r.status == "solved" else EXIT_PARTIAL


def _solution_values(d: dict) -> list[KeyValue]:
    if "ensemble" in d:
        return [KeyValue(v) for v in d["ensemble"]["merged"]]
    if "merged" in d:
        return [KeyValue(v) for v in d["merged"]]
    if "bits" in d and d["bits"] and "provenance" in d["bits"][0]:
        return [KeyValue.UNKNOWN if b["value"] is None else KeyValue.of(bool(b["value"])) for b in d["bits"]]
    return SolutionVector.from_json(d).values()


def cmd_score(args) -> int:
    d = json.loads(Path(args.solution).read_text())
    truth = parse_key(Path(args.truth).read_text())
    cdk, dk = score(_solution_values(d), truth)
    _write_json(None, {"cdk": cdk, "dk": dk, "p": len(truth)})
    return EXIT_OK


def _solutions_list(path) -> list[SolutionVector]:
    d = json.loads(Path(path).read_text())
    sols = d.get("solutions") or d.get("variants")
    if not sols:
        raise ConfigError(f"{path} holds no per-netlist solutions")
    return [SolutionVector.from_json(s) for s in sols]


def cmd_analyze(args) -> int:
    if args.what == "convergence":
        truth = parse_key(Path(args.truth).read_text())
        series = convergence_analysis(_solutions_list(args.solutions), truth)
        _write_json(args.out, {"series": [list(x) for x in series],
                               "min_variants_for_final_dk": min_variants_for_final(series)})
    elif args.what == "slack":
        manifest = json.loads(Path(args.manifest).read_text())
        sols = _solutions_list(args.solutions)
        slacks = [math.inf if e["slack"] == "inf" else float(e["slack"]) for e in manifest["variants"]]
        dks = [sum(1 for v in s.values() if v is not KeyValue.UNKNOWN) for s in sols]
        _write_json(args.out, slack_analysis(slacks, dks))
    else:
        locked = _load_netlist(args.netlist)
        recipes = _recipes(args)
        res = cone_mode(locked, args.output, recipes, args.policy)
        res["merged"] = [v.value for v in res["merged"]]
        res["seconds"] = round(res["seconds"], 3)
        _write_json(args.out, res)
    return EXIT_OK


def cmd_report(args) -> int:
    root = Path(args.dir)
    path = root / "report.csv"
    if not path.exists():
        raise ConfigError(f"no report in {root}")
    sys.stdout.write(path.read_text())
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    if args.jobs:
        cfg.jobs = args.jobs
    reports, _ = run_pipeline(cfg)
    failed = [r for r in reports if r.get("status") != "ok"]
    for r in failed:
        print(f"FAILED {r['circuit']}/{r['lock']}: {r.get('error')}", file=sys.stderr)
    print(f"{len(reports) - len(failed)}/{len(reports)} experiments ok -> {cfg.out_dir}")
    return EXIT_PARTIAL if failed else EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="locklab", description="Logic-locking resynthesis attack toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        return p

    p = common(sub.add_parser("lock", help="insert key gates"))
    p.add_argument("netlist")
    p.add_argument("--scheme", required=True, choices=["rll", "antisat", "caslock", "sfll_point", "compound"])
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--p-sfll", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lock)

    def recipe_args(p):
        p.add_argument("--recipes", default="all", help="all | reduced | FILE (JSON list of recipes)")
        p.add_argument("--limit", type=int, help="evenly spaced subset of the recipe list")

    p = common(sub.add_parser("resynth", help="generate resynthesized variants"))
    p.add_argument("netlist")
    recipe_args(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--certify", choices=["sim", "sat", "both", "none"], default="sim")
    p.add_argument("--prune", action="store_true", help="also write the reduced recipe list")
    p.set_defaults(func=cmd_resynth)

    pa = sub.add_parser("attack", help="run an attack")
    asub = pa.add_subparsers(dest="attack", required=True)
    p = asub.add_parser("ol", help="oracle-less attack and vote merge")
    p.add_argument("netlist", nargs="?")
    p.add_argument("--variants")
    p.add_argument("--policy", choices=["threshold", "cluster"], default="threshold")
    p.add_argument("--truth", help="key file, used for scoring only")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_attack_ol)

    def oracle_args(p):
        p.add_argument("--oracle", required=True, help="original.bench, or a locked bench with --oracle-key")
        p.add_argument("--oracle-key")
        p.add_argument("--budget-conflicts", type=int, default=10_000_000)

    p = common(asub.add_parser("og", help="oracle-guided query attack"))
    p.add_argument("netlist", nargs="?")
    p.add_argument("--variants")
    oracle_args(p)
    p.add_argument("--queries", default="2p")
    p.add_argument("--ol-solution")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_attack_og)

    p = asub.add_parser("dip", help="DIP-based SAT attack")
    p.add_argument("netlist")
    oracle_args(p)
    p.add_argument("--max-iterations", type=int, default=5000)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_attack_dip)

    p = sub.add_parser("score", help="score a solution against the true key")
    p.add_argument("solution")
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_score)

    p = common(sub.add_parser("analyze", help="convergence, slack or cone analyses"))
    p.add_argument("what", choices=["convergence", "slack", "cone"])
    p.add_argument("netlist", nargs="?")
    p.add_argument("--solutions")
    p.add_argument("--truth")
    p.add_argument("--manifest")
    p.add_argument("--output", help="primary output for cone mode")
    p.add_argument("--policy", choices=["threshold", "cluster"], default="threshold")
    recipe_args(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="print the CSV report of a pipeline run")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run a full experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.cmd == "analyze":
            need = {"convergence": ("solutions", "truth"), "slack": ("manifest", "solutions"),
                    "cone": ("netlist", "output")}[args.what]
            missing = [x for x in need if not getattr(args, x)]
            if missing:
                raise ConfigError(f"analyze {args.what} needs {', '.join(missing)}")
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

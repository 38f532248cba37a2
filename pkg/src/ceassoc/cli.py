"""Command-line driver: scenario generation, method runs, comparisons,
sensitivity sweeps, and the small-instance oracle check.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. Every
run writes the fully resolved config next to its outputs so results can be
reproduced from the snapshot alone.
"""

import argparse
import json
import os
import sys

import numpy as np

from .baselines import exhaustive_search
from .ce import CEConfig, ceas_run
from .errors import ConfigError, ContractError, EnumerationBudgetError
from .harness import ExperimentPlan, run_experiment, sensitivity_sweep
from .netmodel import ScenarioConfig, compute_link_gains, generate_deployment
from .rng import derive_ce_seed, derive_drop_seed


def _parse_override(text: str) -> tuple:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_override(doc: dict, dotted: str, value) -> None:
    """Set a dotted-path key in a JSON document; integer segments index
    lists. Parent containers must already exist."""
    parts = dotted.split(".")
    node = doc
    for p in parts[:-1]:
        if isinstance(node, list):
            try:
                node = node[int(p)]
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"override path {dotted!r}: bad index {p!r}") from exc
        elif isinstance(node, dict):
            if p not in node:
                raise ConfigError(f"override path {dotted!r}: no key {p!r}")
            node = node[p]
        else:
            raise ConfigError(f"override path {dotted!r}: {p!r} is a leaf")
    leaf = parts[-1]
    if isinstance(node, list):
        try:
            node[int(leaf)] = value
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"override path {dotted!r}: bad index {leaf!r}") from exc
    elif isinstance(node, dict):
        node[leaf] = value
    else:
        raise ConfigError(f"override path {dotted!r} does not address a container")


def _load_document(path: str, overrides) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    for item in overrides or []:
        key, value = _parse_override(item)
        _apply_override(doc, key, value)
    return doc


def _scenario_doc(doc: dict) -> dict:
    # generate accepts either a bare scenario document or a full plan
    return doc["scenario"] if "scenario" in doc else doc


def _plan_from_args(args) -> tuple:
    doc = _load_document(args.config, args.set)
    if "scenario" not in doc:
        doc = {"scenario": doc}
    if args.drops is not None:
        doc["n_drops"] = args.drops
    if args.seed is not None:
        doc["base_seed"] = args.seed
    if args.methods is not None:
        names = [m.strip() for m in args.methods.split(",") if m.strip()]
        if not names:
            raise ConfigError("--methods must name at least one method")
        doc["methods"] = [{"name": n} for n in names]
    plan = ExperimentPlan.from_dict(doc)
    return plan, doc


def _write_effective_config(out_dir: str, doc: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "effective_config.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_generate(args) -> int:
    doc = _load_document(args.config, args.set)
    scenario = ScenarioConfig.from_dict(_scenario_doc(doc))
    seed = args.seed if args.seed is not None else 0
    dep = generate_deployment(scenario, seed)
    _write_effective_config(args.out, {"scenario": scenario.to_dict(),
                                       "seed": seed})
    path = os.path.join(args.out, "deployment.json")
    with open(path, "w") as fh:
        fh.write(dep.to_json())
        fh.write("\n")
    if not args.quiet:
        print(f"wrote {path}")
    print(dep.checksum())
    return 0


def cmd_run(args) -> int:
    plan, doc = _plan_from_args(args)
    if not plan.methods:
        raise ConfigError("the plan names no methods")
    _write_effective_config(args.out, doc)
    result = run_experiment(plan, out_dir=args.out, n_jobs=args.jobs)
    failures = [r for r in result.records if r.error]
    if not args.quiet:
        _print_summary(result)
    if failures:
        print(f"{len(failures)} method runs failed; see errors.csv",
              file=sys.stderr)
        return 1
    return 0


def _print_summary(result) -> None:
    print(f"{'method':<22}{'mean utility':>14}{'mean rate (Mbps)':>18}"
          f"{'MBS share %':>13}")
    for label, agg in result.aggregates.items():
        print(f"{label:<22}{agg.mean_utility:>14.4f}"
              f"{agg.mean_rate_bps / 1e6:>18.4f}{agg.mbs_share_pct:>13.2f}")
    utilities = {label: agg.mean_utility
                 for label, agg in result.aggregates.items()}
    if "ceas" in utilities and "max_sinr" in utilities and utilities["max_sinr"]:
        ratio = utilities["ceas"] / utilities["max_sinr"]
        print(f"ceas/max_sinr utility ratio: {ratio:.4f}")


def cmd_compare(args) -> int:
    plan, doc = _plan_from_args(args)
    if not plan.methods:
        raise ConfigError("the plan names no methods")
    _write_effective_config(args.out, doc)
    result = run_experiment(plan, out_dir=args.out, n_jobs=args.jobs)
    _print_summary(result)
    failures = [r for r in result.records if r.error]
    if failures:
        print(f"{len(failures)} method runs failed; see errors.csv",
              file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args) -> int:
    plan, doc = _plan_from_args(args)
    if not plan.sweep:
        raise ConfigError("the plan has no sweep grid")
    _write_effective_config(args.out, doc)
    curves = sensitivity_sweep(plan, out_dir=args.out)
    if not args.quiet:
        for (s, e, a), cell in curves.items():
            print(f"S={s} S_elite={e} alpha={a}: "
                  f"final mean incumbent {cell['incumbent'][-1]:.4f}")
    return 0


def cmd_oracle_check(args) -> int:
    plan, doc = _plan_from_args(args)
    scenario = plan.scenario
    total = scenario.n_bs ** scenario.n_users
    if total > plan.oracle_budget:
        raise EnumerationBudgetError(
            f"J**I = {total} exceeds the enumeration budget "
            f"{plan.oracle_budget}")
    if args.out:
        _write_effective_config(args.out, doc)
    caps = plan.load_caps()
    utility = scenario.utility
    ce_params = {}
    for spec in plan.methods:
        if spec.name == "ceas":
            ce_params = dict(spec.params)
            break
    n_seeds = plan.n_drops
    gaps = []
    for d in range(n_seeds):
        drop_seed = derive_drop_seed(plan.base_seed, d)
        gains = compute_link_gains(generate_deployment(scenario, drop_seed))
        cfg = CEConfig(**{**ce_params, "seed": derive_ce_seed(drop_seed)})
        _, trace = ceas_run(gains, caps, utility, cfg)
        _, best = exhaustive_search(gains, caps, utility, plan.oracle_budget)
        gap = (best - trace.incumbent_score) / max(1.0, abs(best))
        gaps.append(gap)
        if not args.quiet:
            print(f"seed {drop_seed:>20}  oracle {best:>12.6f}  "
                  f"ceas {trace.incumbent_score:>12.6f}  gap {gap:.6f}  "
                  f"diff {best - trace.incumbent_score:.6g}")
    gaps = np.array(gaps)
    within = float(np.mean(gaps <= 0.01))
    print(f"{within * 100:.1f}% of {n_seeds} seeds within 1% of the oracle "
          f"(max gap {gaps.max():.6f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ceassoc",
        description="cross-entropy user association simulator and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="JSON config path")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        else:
            p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed / base seed override")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-key config override (repeatable)")
        p.add_argument("--drops", type=int, default=None,
                       help="number of Monte-Carlo drops")
        p.add_argument("--methods", default=None,
                       help="comma-separated method list override")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel drop workers")
        p.add_argument("--quiet", action="store_true")

    common(sub.add_parser("generate", help="write one deployment JSON"))
    common(sub.add_parser("run", help="run plan methods over drops"))
    common(sub.add_parser("compare", help="run methods and print the comparison"))
    common(sub.add_parser("sweep", help="average trace curves over a grid"))
    common(sub.add_parser("oracle-check",
                          help="CEAS-vs-exhaustive gaps on small instances"),
           needs_out=False)
    return parser


_COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ContractError, EnumerationBudgetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

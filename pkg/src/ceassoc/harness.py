"""Seeded Monte-Carlo experiment runner.

Every drop is one random deployment; all methods in a plan run on the
identical link gains (paired comparison, checksummed). Drop seeds are
derived from the base seed by hashing the drop index, so adding methods or
rerunning a persisted plan reproduces the exact same drops. Results persist
as CSV (per-drop records plus aggregate tables) and JSON-lines optimizer
traces.
"""

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter
from typing import Optional

import numpy as np

from .assoc import (Association, LoadCaps, UtilitySpec, bs_loads, is_feasible,
                    repair_to_caps, score_association, user_rates)
from .baselines import (ENUMERATION_BUDGET, DualConfig, dual_subgradient_assoc,
                        exhaustive_search, max_sinr_assoc)
from .ce import CEConfig, CERunTrace, ceas_run
from .errors import ConfigError, ContractError
from .netmodel import MACRO, LinkGains, ScenarioConfig, compute_link_gains, \
    generate_deployment
from .rng import derive_ce_seed, derive_drop_seed

METHOD_NAMES = ("ceas", "max_sinr", "dual", "oracle")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ConfigError(f"unknown method {self.name!r}; "
                              f"expected one of {METHOD_NAMES}")
        if not self.label:
            object.__setattr__(self, "label", self.name)

    def to_dict(self) -> dict:
        return {"name": self.name, "label": self.label, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, doc: dict) -> "MethodSpec":
        unknown = set(doc) - {"name", "label", "params"}
        if unknown:
            raise ConfigError(f"unknown method keys: {sorted(unknown)}")
        if "name" not in doc:
            raise ConfigError("method entries need a 'name'")
        return cls(doc["name"], doc.get("label", ""), dict(doc.get("params", {})))


@dataclass
class ExperimentPlan:
    scenario: ScenarioConfig
    methods: list
    n_drops: int = 50
    base_seed: int = 1
    caps: Optional[list] = None
    sweep: Optional[dict] = None
    oracle_budget: int = ENUMERATION_BUDGET

    def validate(self) -> None:
        if self.n_drops < 1:
            raise ConfigError("n_drops must be at least 1")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"method labels must be unique, got {labels}")
        n_bs = self.scenario.n_bs
        if self.caps is not None:
            caps = np.asarray(self.caps, dtype=np.int64)
            if caps.shape != (n_bs,):
                raise ConfigError(
                    f"caps needs {n_bs} entries, got {caps.shape}")
            if caps.sum() < self.scenario.n_users:
                raise ConfigError("caps cannot host all users")
        if any(m.name == "oracle" for m in self.methods):
            total = n_bs ** self.scenario.n_users
            if total > self.oracle_budget:
                raise ConfigError(
                    f"oracle not allowed: J**I = {total} exceeds the budget "
                    f"{self.oracle_budget}")
        if self.sweep is not None:
            unknown = set(self.sweep) - {"n_samples", "n_elites", "smoothing_alpha"}
            if unknown:
                raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")

    def load_caps(self) -> LoadCaps:
        if self.caps is None:
            return LoadCaps.inactive(self.scenario.n_users, self.scenario.n_bs)
        return LoadCaps.for_users(self.caps, self.scenario.n_users)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "methods": [m.to_dict() for m in self.methods],
            "n_drops": self.n_drops,
            "base_seed": self.base_seed,
            "caps": list(self.caps) if self.caps is not None else None,
            "sweep": self.sweep,
            "oracle_budget": self.oracle_budget,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentPlan":
        known = {"scenario", "methods", "n_drops", "base_seed", "caps",
                 "sweep", "oracle_budget"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown plan keys: {sorted(unknown)}")
        plan = cls(
            scenario=ScenarioConfig.from_dict(doc.get("scenario", {})),
            methods=[MethodSpec.from_dict(m) for m in doc.get("methods", [])],
            n_drops=doc.get("n_drops", 50),
            base_seed=doc.get("base_seed", 1),
            caps=doc.get("caps"),
            sweep=doc.get("sweep"),
            oracle_budget=doc.get("oracle_budget", ENUMERATION_BUDGET),
        )
        plan.validate()
        return plan


@dataclass
class DropRecord:
    drop_index: int
    drop_seed: int
    method: str
    utility: float = float("nan")
    mean_rate_bps: float = float("nan")
    per_user_rates: Optional[np.ndarray] = None
    bs_loads: Optional[np.ndarray] = None
    feasible: bool = True
    gains_checksum: str = ""
    runtime_ms: float = 0.0
    trace: Optional[CERunTrace] = None
    error: Optional[str] = None


@dataclass
class MethodAggregate:
    method: str
    n_drops: int
    mean_utility: float
    mean_rate_bps: float
    mbs_share_pct: float
    sbs_share_pct: float
    cdf_rate_bps: np.ndarray
    cdf_fraction: np.ndarray


def rate_cdf(rates) -> list:
    """Empirical CDF of a rate pool: (value, cumulative fraction) pairs,
    ascending, deduplicated, fractions in (0, 1]."""
    pool = np.sort(np.asarray(rates, dtype=np.float64).ravel())
    if pool.size == 0:
        raise ContractError("rate pool must not be empty")
    values, last_idx = np.unique(pool, return_index=True)
    counts = np.diff(np.append(last_idx, pool.size))
    fractions = np.cumsum(counts) / pool.size
    return list(zip(values.tolist(), fractions.tolist()))


def load_shares(records, tiers) -> dict:
    """Mean percentage of users on macro vs small tiers per method label."""
    macro_idx = np.array([t == MACRO for t in tiers])
    out = {}
    for label in sorted({r.method for r in records}):
        shares = []
        for r in records:
            if r.method != label or r.error or r.bs_loads is None:
                continue
            total = r.bs_loads.sum()
            if total == 0:
                continue
            shares.append(100.0 * r.bs_loads[macro_idx].sum() / total)
        if shares:
            mbs = float(np.mean(shares))
            out[label] = {"mbs_share_pct": mbs, "sbs_share_pct": 100.0 - mbs}
    return out


def compute_aggregates(records, tiers) -> dict:
    """Per-method aggregates recomputable from the raw records."""
    shares = load_shares(records, tiers)
    out = {}
    for label in sorted({r.method for r in records}):
        ok = [r for r in records if r.method == label and not r.error]
        if not ok:
            continue
        pool = np.concatenate([r.per_user_rates for r in ok])
        cdf = rate_cdf(pool)
        values = np.array([p[0] for p in cdf])
        fractions = np.array([p[1] for p in cdf])
        out[label] = MethodAggregate(
            method=label,
            n_drops=len(ok),
            mean_utility=float(np.mean([r.utility for r in ok])),
            mean_rate_bps=float(np.mean([r.mean_rate_bps for r in ok])),
            mbs_share_pct=shares[label]["mbs_share_pct"],
            sbs_share_pct=shares[label]["sbs_share_pct"],
            cdf_rate_bps=values,
            cdf_fraction=fractions,
        )
    return out


def _record_from_assoc(rec: DropRecord, assoc: Association, gains: LinkGains,
                       caps: LoadCaps, utility: UtilitySpec) -> DropRecord:
    rates = user_rates(assoc, gains)
    rec.utility = score_association(assoc, gains, utility)
    rec.mean_rate_bps = float(rates.mean()) if rates.size else 0.0
    rec.per_user_rates = rates
    rec.bs_loads = bs_loads(assoc)
    rec.feasible = is_feasible(assoc, caps)
    return rec


def _run_one_method(spec: MethodSpec, gains: LinkGains, caps: LoadCaps,
                    utility: UtilitySpec, drop_index: int, drop_seed: int,
                    checksum: str, caps_active: bool) -> list:
    rec = DropRecord(drop_index=drop_index, drop_seed=drop_seed,
                     method=spec.label, gains_checksum=checksum)
    out = [rec]
    start = perf_counter()
    try:
        if spec.name == "ceas":
            cfg = CEConfig(**{**spec.params, "seed": derive_ce_seed(drop_seed)})
            assoc, trace = ceas_run(gains, caps, utility, cfg)
            rec.trace = trace
        elif spec.name == "max_sinr":
            assoc = max_sinr_assoc(gains)
        elif spec.name == "dual":
            assoc, _ = dual_subgradient_assoc(gains, utility,
                                              DualConfig(**spec.params))
        elif spec.name == "oracle":
            budget = spec.params.get("budget", ENUMERATION_BUDGET)
            assoc, _ = exhaustive_search(gains, caps, utility, budget)
        else:  # pragma: no cover - guarded by MethodSpec
            raise ConfigError(f"unknown method {spec.name!r}")
        _record_from_assoc(rec, assoc, gains, caps, utility)
        rec.runtime_ms = 1000.0 * (perf_counter() - start)

        if spec.name == "max_sinr" and caps_active and not rec.feasible:
            # capped comparison: also report the deterministically
            # repaired variant, using SINR as the preference matrix
            t0 = perf_counter()
            fixed = Association(repair_to_caps(assoc.assign, gains.sinr, caps),
                                gains.n_bs)
            twin = DropRecord(drop_index=drop_index, drop_seed=drop_seed,
                              method=f"{spec.label}_repaired",
                              gains_checksum=checksum)
            _record_from_assoc(twin, fixed, gains, caps, utility)
            twin.runtime_ms = rec.runtime_ms + 1000.0 * (perf_counter() - t0)
            out.append(twin)
    except Exception as exc:  # method-level failures are per-drop data
        rec.error = f"{type(exc).__name__}: {exc}"
        rec.runtime_ms = 1000.0 * (perf_counter() - start)
    return out


def _run_drop(plan: ExperimentPlan, caps: LoadCaps, drop_index: int) -> tuple:
    drop_seed = derive_drop_seed(plan.base_seed, drop_index)
    dep = generate_deployment(plan.scenario, drop_seed)
    gains = compute_link_gains(dep)
    checksum = gains.checksum()
    caps_active = plan.caps is not None
    utility = plan.scenario.utility
    records = []
    for spec in plan.methods:
        records.extend(_run_one_method(spec, gains, caps, utility, drop_index,
                                       drop_seed, checksum, caps_active))
    return dep.tiers, records


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    tiers: tuple
    records: list
    aggregates: dict


def run_experiment(plan: ExperimentPlan, out_dir: Optional[str] = None,
                   n_jobs: int = 1) -> ExperimentResult:
    """Run every method of the plan on every drop.

    Deterministic in the plan regardless of n_jobs: per-drop work is a pure
    function of (plan, drop index), threads only change scheduling. With
    out_dir set, per-drop records are appended to results.csv as drops
    complete and aggregate tables are written at the end.
    """
    plan.validate()
    caps = plan.load_caps()
    writer = _ResultWriter(plan, out_dir) if out_dir else None

    tiers = None
    records = []
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_run_drop, plan, caps, d)
                       for d in range(plan.n_drops)]
            for fut in futures:  # collect in drop order
                drop_tiers, recs = fut.result()
                tiers = drop_tiers
                records.extend(recs)
                if writer:
                    writer.append(recs)
    else:
        for d in range(plan.n_drops):
            drop_tiers, recs = _run_drop(plan, caps, d)
            tiers = drop_tiers
            records.extend(recs)
            if writer:
                writer.append(recs)

    aggregates = compute_aggregates(records, tiers)
    result = ExperimentResult(plan, tiers, records, aggregates)
    if writer:
        writer.finish(result)
    return result


def sensitivity_sweep(plan: ExperimentPlan, out_dir: Optional[str] = None) -> dict:
    """Average optimizer-trace curves over drops for every sweep grid cell.

    The grid crosses the lists in plan.sweep (n_samples, n_elites,
    smoothing_alpha; missing axes stay at the base config). Returns
    {cell key: {"best": curve, "incumbent": curve, "n_drops": int}} where
    curves are per-iteration means over drops and the cell key is the
    (n_samples, n_elites, smoothing_alpha) triple.
    """
    plan.validate()
    sweep = plan.sweep or {}
    base_params = {}
    for spec in plan.methods:
        if spec.name == "ceas":
            base_params = dict(spec.params)
            break
    base_cfg = CEConfig(**{**base_params, "seed": 0})

    axes = {
        "n_samples": sweep.get("n_samples", [base_cfg.n_samples]),
        "n_elites": sweep.get("n_elites", [base_cfg.n_elites]),
        "smoothing_alpha": sweep.get("smoothing_alpha",
                                     [base_cfg.smoothing_alpha]),
    }
    caps = plan.load_caps()
    utility = plan.scenario.utility

    # Deployments are shared across cells (paired comparison).
    drops = []
    for d in range(plan.n_drops):
        drop_seed = derive_drop_seed(plan.base_seed, d)
        dep = generate_deployment(plan.scenario, drop_seed)
        drops.append((drop_seed, compute_link_gains(dep)))

    curves = {}
    for s in axes["n_samples"]:
        for e in axes["n_elites"]:
            for a in axes["smoothing_alpha"]:
                params = {**base_params, "n_samples": s, "n_elites": e,
                          "smoothing_alpha": a}
                best, incumbent, elite_mean, mean = [], [], [], []
                converge = []
                for drop_seed, gains in drops:
                    cfg = CEConfig(**{**params, "seed": derive_ce_seed(drop_seed)})
                    _, trace = ceas_run(gains, caps, utility, cfg)
                    best.append(trace.best_score_curve())
                    incumbent.append(trace.incumbent_curve())
                    em = np.array([st.elite_mean_score
                                   for st in trace.per_iteration])
                    elite_mean.append(em)
                    mean.append(np.array([st.mean_score
                                          for st in trace.per_iteration]))
                    converge.append(iterations_to_reach(em))
                cell = {
                    "best": np.mean(np.stack(best), axis=0),
                    "incumbent": np.mean(np.stack(incumbent), axis=0),
                    "elite_mean": np.mean(np.stack(elite_mean), axis=0),
                    "mean": np.mean(np.stack(mean), axis=0),
                    # convergence speed: per-drop iterations until the
                    # elite-mean curve reaches 99% of its own final value
                    "iters_to_99": float(np.mean(converge)),
                    "n_drops": plan.n_drops,
                }
                curves[(s, e, a)] = cell
    if out_dir:
        _write_sweep(curves, out_dir)
    return curves


def iterations_to_reach(curve: np.ndarray, fraction: float = 0.99) -> int:
    """First iteration index whose value is within `fraction` of the curve's
    final value (sign-safe: threshold is final - (1-fraction)*|final|)."""
    final = curve[-1]
    threshold = final - (1.0 - fraction) * abs(final)
    return int(np.argmax(curve >= threshold))


# ---------------------------------------------------------------------------
# persistence

def _fmt(x) -> str:
    return repr(float(x))


class _ResultWriter:
    """Append-only writer: one results.csv row per record as drops finish,
    aggregate tables on finish()."""

    def __init__(self, plan: ExperimentPlan, out_dir: str):
        self.out_dir = out_dir
        self.n_sbs = plan.scenario.n_sbs
        os.makedirs(out_dir, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)
        with open(os.path.join(out_dir, "plan.json"), "w") as fh:
            json.dump(plan.to_dict(), fh, indent=2, sort_keys=True)
        self._results = open(os.path.join(out_dir, "results.csv"), "w",
                             newline="")
        self._csv = csv.writer(self._results)
        self._csv.writerow(
            ["drop_seed", "method", "utility", "mean_rate_mbps", "mbs_load"]
            + [f"sbs_load_{k + 1}" for k in range(self.n_sbs)]
            + ["runtime_ms"])
        self._errors = []

    def append(self, records) -> None:
        for rec in records:
            if rec.error:
                self._errors.append(rec)
                continue
            loads = rec.bs_loads.tolist()
            self._csv.writerow(
                [rec.drop_seed, rec.method, _fmt(rec.utility),
                 _fmt(rec.mean_rate_bps / 1e6), loads[0]]
                + loads[1:]
                + [f"{rec.runtime_ms:.3f}"])
            if rec.trace is not None:
                path = os.path.join(
                    self.out_dir, "traces",
                    f"{rec.method}_drop{rec.drop_index:04d}.jsonl")
                with open(path, "w") as fh:
                    fh.write(rec.trace.to_jsonl())
        self._results.flush()

    def finish(self, result: ExperimentResult) -> None:
        self._results.close()
        out = self.out_dir
        if self._errors:
            with open(os.path.join(out, "errors.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["drop_seed", "method", "error"])
                for rec in self._errors:
                    w.writerow([rec.drop_seed, rec.method, rec.error])
        with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "n_drops", "mean_utility", "mean_rate_mbps"])
            for label, agg in result.aggregates.items():
                w.writerow([label, agg.n_drops, _fmt(agg.mean_utility),
                            _fmt(agg.mean_rate_bps / 1e6)])
        with open(os.path.join(out, "load_shares.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "mbs_share_pct", "sbs_share_pct"])
            for label, agg in result.aggregates.items():
                w.writerow([label, _fmt(agg.mbs_share_pct),
                            _fmt(agg.sbs_share_pct)])
        for label, agg in result.aggregates.items():
            path = os.path.join(out, f"cdf_{label}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["rate_bps", "cumulative_fraction"])
                for v, f in zip(agg.cdf_rate_bps, agg.cdf_fraction):
                    w.writerow([_fmt(v), _fmt(f)])


def _write_sweep(curves: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for (s, e, a), cell in curves.items():
        name = f"sweep_S{s}_E{e}_a{a}.csv"
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "mean_best_score", "mean_incumbent_score",
                        "mean_elite_mean_score", "mean_mean_score"])
            for t in range(cell["best"].shape[0]):
                w.writerow([t, _fmt(cell["best"][t]),
                            _fmt(cell["incumbent"][t]),
                            _fmt(cell["elite_mean"][t]),
                            _fmt(cell["mean"][t])])

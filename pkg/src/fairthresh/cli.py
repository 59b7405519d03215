"""Experiment orchestration: synthetic benchmarks, tabular runs, sweeps.

Subcommands
-----------
synth           binary-group Gaussian benchmark vs the exact oracle
multiclass      multi-group Gaussian benchmark (perfect parity)
tradeoff        tolerance sweep reusing a single score-model fit
oracle-compare  fitted thresholds and accuracy vs their population optima
tabular         CSV benchmark: fit on train, calibrate on validation

Reports are deterministic for a fixed config: every per-task seed is derived
from the master seed by the documented rule ``SeedSequence([seed, rep])``
(three child integers: population, train sample, test sample), floats are
serialized with ``repr``, and wall-clock timings go to stderr only, so
re-running a config reproduces the report byte for byte.
"""

from __future__ import annotations

import argparse
import csv as csv_mod
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import gaussian as ga
from . import scores as sc
from . import tabular as tb
from .core import FairnessConstraint, ThresholdRule
from .metrics import GroupedScores, evaluate
from .solve import solve, solve_multiclass_dp
from .synth import SynthSpec, draw_population, sample

REPORT_VERSION = 1

COLUMNS = {
    "synth": [
        "measure", "delta", "reps",
        "disparity_mean", "disparity_sd",
        "acc_mean", "acc_sd",
        "oracle_acc_mean", "oracle_acc_sd",
        "pop_acc_gap_mean", "pop_acc_gap_max",
        "cal_disparity_mean",
    ],
    "multiclass": [
        "n_groups", "reps",
        "ddp_mean", "ddp_sd",
        "acc_mean", "acc_sd",
        "oracle_acc_mean", "oracle_acc_sd",
        "pop_acc_gap_mean", "pop_acc_gap_max",
        "sum_t_max",
    ],
    "tradeoff": ["measure", "delta", "disparity", "accuracy", "cal_disparity", "cal_plugin_accuracy"],
    "oracle-compare": [
        "measure", "delta", "reps",
        "t_err_mean", "t_err_max",
        "q0_err_mean", "q1_err_mean",
        "pop_acc_gap_mean", "pop_acc_gap_max",
        "disparity_mean",
    ],
    "tabular": [
        "measure", "delta", "reps",
        "disparity_mean", "disparity_sd",
        "acc_mean", "acc_sd",
        "cal_disparity_mean",
    ],
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    measure: str = "dp"
    deltas: Optional[tuple] = None  # None: the runner's default grid
    cost: float = 0.5
    reps: int = 20
    seed: int = 0
    n_train: int = 20000
    n_test: int = 5000
    dim: int = 10
    sigma: float = 1.0
    n_groups: int = 2
    fixed_population: bool = False
    randomize: bool = False
    epochs: int = 500
    learning_rate: float = 1.0
    per_group: bool = True
    data_path: Optional[str] = None
    schema_path: Optional[str] = None
    fractions: tuple = (0.7, 0.1, 0.2)
    n_deltas: int = 50  # tradeoff grid size when deltas not given explicitly
    out: Optional[str] = None
    format: str = "table"
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in COLUMNS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.deltas is not None and any(d < 0 for d in self.deltas):
            raise ValueError("delta values must be >= 0")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.format not in ("csv", "json", "table"):
            raise ValueError(f"unknown format {self.format!r}")

    def delta_grid(self) -> tuple:
        if self.deltas is not None:
            return self.deltas
        return (0.0, 0.1, 0.2, 0.3) if self.measure == "dp" else (0.0, 0.04, 0.08, 0.12)


def rep_seeds(master: int, rep: int) -> tuple:
    """Documented split rule: three child seeds per repetition index."""
    state = np.random.SeedSequence([master, rep]).generate_state(3, dtype=np.uint64)
    return tuple(int(v) for v in state)


def _train_config(cfg: ExperimentConfig) -> sc.TrainConfig:
    return sc.TrainConfig(
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        per_group=cfg.per_group,
        seed=cfg.seed,
    )


def _binary_spec(cfg: ExperimentConfig, seed: int) -> SynthSpec:
    return SynthSpec.binary(dim=cfg.dim, sigma=cfg.sigma, seed=seed)


def _fit_and_score(cfg, train, test):
    model = sc.fit_logistic(train, _train_config(cfg))
    gs_train = GroupedScores.from_dataset(train, sc.score_dataset(model, train))
    gs_test = GroupedScores.from_dataset(test, sc.score_dataset(model, test))
    return model, gs_train, gs_test


def _constraint(cfg, delta) -> FairnessConstraint:
    return FairnessConstraint(cfg.measure, float(delta), cfg.cost)


def _measure_value(report, measure: str) -> float:
    return {"dp": report.ddp, "eo": report.deo, "pe": report.dpe, "oa": report.doa}[measure]


# ---------------------------------------------------------------------------
# Per-repetition workers
# ---------------------------------------------------------------------------


def _synth_rep(args):
    cfg, rep = args
    pop_seed, train_seed, test_seed = rep_seeds(cfg.seed, rep)
    spec = _binary_spec(cfg, cfg.seed if cfg.fixed_population else pop_seed)
    pop = draw_population(spec)
    train = sample(pop, cfg.n_train, train_seed)
    test = sample(pop, cfg.n_test, test_seed)
    _, gs_train, gs_test = _fit_and_score(cfg, train, test)
    out = []
    for delta in cfg.delta_grid():
        res = solve(gs_train, _constraint(cfg, delta), cfg.randomize)
        rep_eval = evaluate(res.rule, gs_test, cfg.cost)
        t_or = ga.t_star(pop, cfg.measure, float(delta), cfg.cost)
        curve = ga.population_curve(pop, cfg.measure, cfg.cost)
        q0, q1 = curve.thresholds(t_or)
        oracle_acc = ga.fair_accuracy(pop, ThresholdRule(np.array([q0, q1])))
        pop_acc_fit = ga.fair_accuracy(pop, res.rule)
        out.append(
            {
                "delta": float(delta),
                "disparity": _measure_value(rep_eval, cfg.measure),
                "acc": rep_eval.accuracy,
                "oracle_acc": oracle_acc,
                "pop_acc_gap": abs(oracle_acc - pop_acc_fit),
                "cal_disparity": res.achieved_disparity,
                "t_hat": res.t_hat,
                "t_star": t_or,
                "q_err": (abs(res.rule.thresholds[0] - q0), abs(res.rule.thresholds[1] - q1)),
            }
        )
    return out


def _multiclass_rep(args):
    cfg, rep = args
    pop_seed, train_seed, test_seed = rep_seeds(cfg.seed, rep)
    spec = SynthSpec.multiclass(cfg.n_groups, sigma=cfg.sigma, seed=cfg.seed if cfg.fixed_population else pop_seed)
    pop = draw_population(spec)
    train = sample(pop, cfg.n_train * cfg.n_groups, train_seed)
    test = sample(pop, cfg.n_test, test_seed)
    _, gs_train, gs_test = _fit_and_score(cfg, train, test)
    res = solve_multiclass_dp(gs_train)
    rep_eval = evaluate(res.rule, gs_test)
    orc = ga.oracle_multiclass_dp(pop)
    return {
        "ddp": rep_eval.ddp,
        "acc": rep_eval.accuracy,
        "oracle_acc": orc.accuracy,
        "pop_acc_gap": abs(orc.accuracy - ga.fair_accuracy(pop, res.rule)),
        "sum_t": abs(res.sum_t),
    }


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _mean_sd(values) -> tuple:
    arr = np.asarray(values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def run_synth_binary(cfg: ExperimentConfig) -> tuple:
    per_rep = _map(_synth_rep, [(cfg, r) for r in range(cfg.reps)], cfg.jobs)
    rows = []
    for i, delta in enumerate(cfg.delta_grid()):
        cells = [rep[i] for rep in per_rep]
        disp_m, disp_s = _mean_sd([c["disparity"] for c in cells])
        acc_m, acc_s = _mean_sd([c["acc"] for c in cells])
        oacc_m, oacc_s = _mean_sd([c["oracle_acc"] for c in cells])
        gap_m, _ = _mean_sd([c["pop_acc_gap"] for c in cells])
        cal_m, _ = _mean_sd([c["cal_disparity"] for c in cells])
        rows.append(
            {
                "measure": cfg.measure,
                "delta": float(delta),
                "reps": cfg.reps,
                "disparity_mean": disp_m,
                "disparity_sd": disp_s,
                "acc_mean": acc_m,
                "acc_sd": acc_s,
                "oracle_acc_mean": oacc_m,
                "oracle_acc_sd": oacc_s,
                "pop_acc_gap_mean": gap_m,
                "pop_acc_gap_max": max(c["pop_acc_gap"] for c in cells),
                "cal_disparity_mean": cal_m,
            }
        )
    return rows, {"per_rep": per_rep}


def run_multiclass(cfg: ExperimentConfig) -> tuple:
    cells = _map(_multiclass_rep, [(cfg, r) for r in range(cfg.reps)], cfg.jobs)
    ddp_m, ddp_s = _mean_sd([c["ddp"] for c in cells])
    acc_m, acc_s = _mean_sd([c["acc"] for c in cells])
    oacc_m, oacc_s = _mean_sd([c["oracle_acc"] for c in cells])
    gap_m, _ = _mean_sd([c["pop_acc_gap"] for c in cells])
    rows = [
        {
            "n_groups": cfg.n_groups,
            "reps": cfg.reps,
            "ddp_mean": ddp_m,
            "ddp_sd": ddp_s,
            "acc_mean": acc_m,
            "acc_sd": acc_s,
            "oracle_acc_mean": oacc_m,
            "oracle_acc_sd": oacc_s,
            "pop_acc_gap_mean": gap_m,
            "pop_acc_gap_max": max(c["pop_acc_gap"] for c in cells),
            "sum_t_max": max(c["sum_t"] for c in cells),
        }
    ]
    return rows, {"per_rep": cells}


def run_tradeoff(cfg: ExperimentConfig) -> tuple:
    """Tolerance sweep over one fit; the fit count is reported for auditing."""
    pop_seed, train_seed, test_seed = rep_seeds(cfg.seed, 0)
    if cfg.data_path:
        train, _val, test = _load_tabular_splits(cfg, split_seed=pop_seed)
    else:
        pop = draw_population(_binary_spec(cfg, cfg.seed if cfg.fixed_population else pop_seed))
        train = sample(pop, cfg.n_train, train_seed)
        test = sample(pop, cfg.n_test, test_seed)
    sc.reset_fit_count()
    t0 = time.perf_counter()
    _, gs_train, gs_test = _fit_and_score(cfg, train, test)
    fit_seconds = time.perf_counter() - t0
    if cfg.deltas is not None:
        deltas = list(cfg.deltas)
    else:
        # default grid: from perfect fairness up to the unconstrained disparity
        res0 = solve(gs_train, _constraint(cfg, 0.0), cfg.randomize)
        deltas = np.linspace(0.0, abs(res0.disparity_at_zero), cfg.n_deltas).tolist()
    t0 = time.perf_counter()
    rows = []
    for delta in sorted(deltas):
        res = solve(gs_train, _constraint(cfg, delta), cfg.randomize)
        rep_eval = evaluate(res.rule, gs_test, cfg.cost)
        rows.append(
            {
                "measure": cfg.measure,
                "delta": float(delta),
                "disparity": _measure_value(rep_eval, cfg.measure),
                "accuracy": rep_eval.accuracy,
                "cal_disparity": res.achieved_disparity,
                "cal_plugin_accuracy": res.plugin_accuracy,
            }
        )
    sweep_seconds = time.perf_counter() - t0
    meta = {
        "fit_count": sc.fit_count(),
        "fit_seconds": fit_seconds,
        "sweep_seconds": sweep_seconds,
    }
    return rows, meta


def run_oracle_compare(cfg: ExperimentConfig) -> tuple:
    per_rep = _map(_synth_rep, [(cfg, r) for r in range(cfg.reps)], cfg.jobs)
    rows = []
    for i, delta in enumerate(cfg.delta_grid()):
        cells = [rep[i] for rep in per_rep]
        t_err = [abs(c["t_hat"] - c["t_star"]) for c in cells]
        rows.append(
            {
                "measure": cfg.measure,
                "delta": float(delta),
                "reps": cfg.reps,
                "t_err_mean": float(np.mean(t_err)),
                "t_err_max": float(np.max(t_err)),
                "q0_err_mean": float(np.mean([c["q_err"][0] for c in cells])),
                "q1_err_mean": float(np.mean([c["q_err"][1] for c in cells])),
                "pop_acc_gap_mean": float(np.mean([c["pop_acc_gap"] for c in cells])),
                "pop_acc_gap_max": float(np.max([c["pop_acc_gap"] for c in cells])),
                "disparity_mean": float(np.mean([c["disparity"] for c in cells])),
            }
        )
    return rows, {"per_rep": per_rep}


def _load_tabular_splits(cfg: ExperimentConfig, split_seed: int):
    """Split raw rows first, then fit the encoding on the training part only."""
    if cfg.schema_path:
        schema = tb.ColumnSchema.load(cfg.schema_path)
    else:
        schema = tb.adult_schema()
    rows = tb.read_rows(cfg.data_path, schema)
    rng = np.random.default_rng(split_seed)
    order = rng.permutation(len(rows))
    f1, f2, _f3 = cfg.fractions
    n = len(rows)
    b1 = int(round(f1 * n))
    b2 = int(round((f1 + f2) * n))
    parts = [[rows[i] for i in order[:b1]],
             [rows[i] for i in order[b1:b2]],
             [rows[i] for i in order[b2:]]]
    tb.fit_schema(schema, parts[0])
    train, _ = tb.encode_rows(parts[0], schema)
    val, _ = tb.encode_rows(parts[1], schema) if parts[1] else (None, None)
    test, _ = tb.encode_rows(parts[2], schema) if parts[2] else (None, None)
    return train, val, test


def _tabular_rep(args):
    cfg, rep = args
    split_seed, _, _ = rep_seeds(cfg.seed, rep)
    train, val, test = _load_tabular_splits(cfg, split_seed)
    model = sc.fit_logistic(train, _train_config(cfg))
    cal = val if val is not None else train
    gs_cal = GroupedScores.from_dataset(cal, sc.score_dataset(model, cal))
    gs_test = GroupedScores.from_dataset(test, sc.score_dataset(model, test))
    out = []
    for delta in cfg.delta_grid():
        res = solve(gs_cal, _constraint(cfg, delta), cfg.randomize)
        rep_eval = evaluate(res.rule, gs_test, cfg.cost)
        out.append(
            {
                "delta": float(delta),
                "disparity": _measure_value(rep_eval, cfg.measure),
                "acc": rep_eval.accuracy,
                "cal_disparity": res.achieved_disparity,
            }
        )
    return out


def run_tabular(cfg: ExperimentConfig) -> tuple:
    if not cfg.data_path:
        raise ValueError("tabular runs need --data pointing at a CSV file")
    per_rep = _map(_tabular_rep, [(cfg, r) for r in range(cfg.reps)], cfg.jobs)
    rows = []
    for i, delta in enumerate(cfg.delta_grid()):
        cells = [rep[i] for rep in per_rep]
        disp_m, disp_s = _mean_sd([c["disparity"] for c in cells])
        acc_m, acc_s = _mean_sd([c["acc"] for c in cells])
        cal_m, _ = _mean_sd([c["cal_disparity"] for c in cells])
        rows.append(
            {
                "measure": cfg.measure,
                "delta": float(delta),
                "reps": cfg.reps,
                "disparity_mean": disp_m,
                "disparity_sd": disp_s,
                "acc_mean": acc_m,
                "acc_sd": acc_s,
                "cal_disparity_mean": cal_m,
            }
        )
    return rows, {"per_rep": per_rep}


RUNNERS = {
    "synth": run_synth_binary,
    "multiclass": run_multiclass,
    "tradeoff": run_tradeoff,
    "oracle-compare": run_oracle_compare,
    "tabular": run_tabular,
}


# ---------------------------------------------------------------------------
# Report serialization (deterministic)
# ---------------------------------------------------------------------------


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_csv(kind: str, rows: list) -> str:
    buf = io.StringIO()
    writer = csv_mod.writer(buf, lineterminator="\n")
    cols = COLUMNS[kind]
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in cols])
    return buf.getvalue()


def report_json(kind: str, cfg: ExperimentConfig, rows: list) -> str:
    payload = {
        "report_version": REPORT_VERSION,
        "kind": kind,
        "config": asdict(cfg),
        "columns": COLUMNS[kind],
        "rows": rows,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_table(kind: str, rows: list) -> str:
    """Human-readable table; mean columns fold in the sd as mean (sd)."""
    cols = COLUMNS[kind]
    display = []
    for c in cols:
        if c.endswith("_sd"):
            continue
        display.append(c)
    lines = []
    rendered = []
    for row in rows:
        cells = []
        for c in display:
            v = row[c]
            sd_key = c.replace("_mean", "_sd")
            if c.endswith("_mean") and sd_key in row:
                cells.append(f"{v:.3f} ({row[sd_key]:.3f})")
            elif isinstance(v, float):
                cells.append(f"{v:.4f}")
            else:
                cells.append(str(v))
        rendered.append(cells)
    headers = [c.replace("_mean", "") for c in display]
    widths = [max(len(h), *(len(r[i]) for r in rendered)) if rendered else len(h) for i, h in enumerate(headers)]
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in rendered:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def render(kind: str, cfg: ExperimentConfig, rows: list, fmt: str) -> str:
    if fmt == "csv":
        return report_csv(kind, rows)
    if fmt == "json":
        return report_json(kind, cfg, rows)
    return report_table(kind, rows)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _parse_deltas(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip() != "")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairthresh",
        description="Fairness-constrained group-threshold calibration experiments",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in RUNNERS:
        p = sub.add_parser(kind)
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--delta", type=_parse_deltas, default=None,
                       help="comma-separated tolerance list, e.g. 0,0.05,0.1")
        p.add_argument("--measure", choices=("dp", "eo", "pe", "oa"), default=None)
        p.add_argument("--cost", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json", "table"), default=None)
        p.add_argument("--n-train", type=int, default=None)
        p.add_argument("--n-test", type=int, default=None)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--groups", type=int, default=None, help="number of protected groups")
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--learning-rate", type=float, default=None)
        p.add_argument("--joint-model", action="store_true",
                       help="share feature weights across groups (one-hot encoding)")
        p.add_argument("--randomize", action="store_true",
                       help="randomize boundary ties for exact tolerance")
        p.add_argument("--fixed-population", action="store_true")
        p.add_argument("--n-deltas", type=int, default=None, help="tradeoff grid size")
        p.add_argument("--data", default=None, help="CSV path for tabular runs")
        p.add_argument("--schema", default=None, help="column-schema JSON path")
        p.add_argument("--jobs", type=int, default=None)
    return parser


_FLAG_FIELDS = {
    "delta": "deltas",
    "measure": "measure",
    "cost": "cost",
    "seed": "seed",
    "reps": "reps",
    "out": "out",
    "format": "format",
    "n_train": "n_train",
    "n_test": "n_test",
    "dim": "dim",
    "sigma": "sigma",
    "groups": "n_groups",
    "epochs": "epochs",
    "learning_rate": "learning_rate",
    "n_deltas": "n_deltas",
    "data": "data_path",
    "schema": "schema_path",
    "jobs": "jobs",
}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    fields = {"kind": args.kind}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        loaded.pop("kind", None)
        fields.update(loaded)
    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            fields[name] = value
    if getattr(args, "joint_model", False):
        fields["per_group"] = False
    if getattr(args, "randomize", False):
        fields["randomize"] = True
    if getattr(args, "fixed_population", False):
        fields["fixed_population"] = True
    if "deltas" in fields:
        fields["deltas"] = tuple(fields["deltas"])
    if "fractions" in fields:
        fields["fractions"] = tuple(fields["fractions"])
    return ExperimentConfig(**fields)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        t0 = time.perf_counter()
        rows, meta = RUNNERS[cfg.kind](cfg)
        elapsed = time.perf_counter() - t0
        report = render(cfg.kind, cfg, rows, cfg.format)
        if cfg.out:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(report)
            sys.stdout.write(report_table(cfg.kind, rows))
        else:
            sys.stdout.write(report)
        timing = {k: v for k, v in meta.items() if k != "per_rep"}
        timing["seconds"] = round(elapsed, 3)
        print(json.dumps(timing, sort_keys=True), file=sys.stderr)
        return 0
    except Exception as exc:  # structured failure summary, nonzero exit
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())

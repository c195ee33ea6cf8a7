"""Experiment runner: the games x methods x seeds grid with archived artifacts.

A *method* is a short label naming one (factorization scheme, factor size,
learning rule) combination:

====== ============================ =================
label  factorization                learning rule
====== ============================ =================
M1/F1  one factor per agent         experts / factored
M2R/F2R, M3R/F3R  random partition (f=2,3)  experts / factored
M2O/F2O, M3O/F3O  6 overlapping factors (f=2,3)  experts / factored
M2C/F2C, M3C/F3C  all size-f subsets (f=2,3)  experts / factored
JOINT  single all-agents network    (rules coincide)
====== ============================ =================

Every cell (game, method, repetition) gets its own seed derived from the
base seed, its own resampled factorization, and its own artifact directory
``<output>/<game>/<method>/<seed>/`` containing ``factorization.json``,
``qhat.json``, ``metrics.csv``/``metrics.json`` and ``curve.csv``.  All
artifact bytes are a pure function of the configuration; wall-clock
timestamps only appear in the top-level ``manifest.json``.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ConfigurationError
from .factorization import (
    Factorization,
    Scheme,
    build_factorization,
    factorization_from_json,
    factorization_to_json,
)
from .games import (
    GameId,
    GameSpec,
    make_game,
    true_q_table,
    type_from_index,
)
from .metrics import (
    CSV_COLUMNS,
    MetricsReport,
    evaluate,
    mean_and_standard_error,
    report_to_csv_row,
    report_to_json,
)
from .neuralnet import NetConfig
from .seeding import derive_seed
from .svgchart import bar_chart_svg
from .training import (
    LearningRule,
    TrainConfig,
    TrainingCurve,
    reconstruction_from_json,
    reconstruction_to_json,
    train,
)


@dataclass(frozen=True)
class MethodSpec:
    label: str
    scheme: Scheme
    f: int  # 0 means "derived from n" (single agent / joint)
    rule: LearningRule
    num_factors: Optional[int] = None  # only the overlapping scheme uses this


METHODS: dict[str, MethodSpec] = {
    spec.label: spec
    for spec in [
        MethodSpec("M1", Scheme.SINGLE_AGENT, 0, LearningRule.MIXTURE_OF_EXPERTS),
        MethodSpec("F1", Scheme.SINGLE_AGENT, 0, LearningRule.FACTORED_Q),
        MethodSpec("M2R", Scheme.RANDOM_PARTITION, 2, LearningRule.MIXTURE_OF_EXPERTS),
        MethodSpec("F2R", Scheme.RANDOM_PARTITION, 2, LearningRule.FACTORED_Q),
        MethodSpec("M3R", Scheme.RANDOM_PARTITION, 3, LearningRule.MIXTURE_OF_EXPERTS),
        MethodSpec("F3R", Scheme.RANDOM_PARTITION, 3, LearningRule.FACTORED_Q),
        MethodSpec("M2O", Scheme.OVERLAPPING, 2, LearningRule.MIXTURE_OF_EXPERTS, 6),
        MethodSpec("F2O", Scheme.OVERLAPPING, 2, LearningRule.FACTORED_Q, 6),
        MethodSpec("M3O", Scheme.OVERLAPPING, 3, LearningRule.MIXTURE_OF_EXPERTS, 6),
        MethodSpec("F3O", Scheme.OVERLAPPING, 3, LearningRule.FACTORED_Q, 6),
        MethodSpec("M2C", Scheme.COMPLETE, 2, LearningRule.MIXTURE_OF_EXPERTS),
        MethodSpec("F2C", Scheme.COMPLETE, 2, LearningRule.FACTORED_Q),
        MethodSpec("M3C", Scheme.COMPLETE, 3, LearningRule.MIXTURE_OF_EXPERTS),
        MethodSpec("F3C", Scheme.COMPLETE, 3, LearningRule.FACTORED_Q),
        MethodSpec("JOINT", Scheme.JOINT, 0, LearningRule.FACTORED_Q),
    ]
}

FACTORED_METHODS = tuple(label for label in METHODS if label != "JOINT")

# Default grid: both rules for every scheme at f=2, the complete f=3 pair,
# and the joint baseline (11 methods).
DEFAULT_METHODS = ("M1", "F1", "M2R", "F2R", "M2O", "F2O", "M2C", "F2C", "M3C", "F3C", "JOINT")

DEFAULT_GAMES = tuple(gid.value for gid in GameId)


@dataclass(frozen=True)
class ExperimentConfig:
    games: tuple[str, ...] = DEFAULT_GAMES
    methods: tuple[str, ...] = DEFAULT_METHODS
    repetitions: int = 10
    base_seed: int = 0
    samples: int = 100_000
    eval_every: int = 1000
    temperature: float = 1.0
    hidden_units: int = 16
    hidden_layers: int = 1
    learning_rate: float = 1e-5
    output_dir: str = "runs"
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        for label in self.methods:
            if label not in METHODS:
                raise ConfigurationError(f"unknown method label {label!r}")
        for game in self.games:
            GameId(game)
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")

    def config_hash(self) -> str:
        """Hash of everything that determines results (not where they are written)."""
        doc = dataclasses.asdict(self)
        doc.pop("output_dir")
        doc.pop("jobs")
        text = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def train_config(self, rule: LearningRule, seed: int) -> TrainConfig:
        return TrainConfig(
            rule=rule,
            samples=self.samples,
            seed=seed,
            eval_every=self.eval_every,
            net=NetConfig(
                hidden_units=self.hidden_units,
                hidden_layers=self.hidden_layers,
                learning_rate=self.learning_rate,
            ),
        )


def config_to_json(config: ExperimentConfig) -> str:
    return json.dumps(dataclasses.asdict(config), indent=2, sort_keys=True)


def config_from_json(text: str) -> ExperimentConfig:
    doc = json.loads(text)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
    for name in ("games", "methods"):
        if name in doc:
            doc[name] = tuple(doc[name])
    return ExperimentConfig(**doc)


@dataclass
class RunResult:
    game: str
    method: str
    rep: int
    seed: int
    factorization: Factorization
    report: MetricsReport
    curve: TrainingCurve
    cell_dir: str
    config_hash: str


@dataclass
class ExperimentOutcome:
    results: list[RunResult] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    failed: list[dict] = field(default_factory=list)


def cell_seed(base_seed: int, game: str, method: str, rep: int) -> int:
    """Stable per-cell seed; documented so results are citable."""
    return derive_seed(base_seed, game, method, rep)


def showcase_type_index(spec: GameSpec) -> int:
    """Default joint type for Bayesian bar plots: alternating intact/burning houses."""
    bits = tuple(i % 2 for i in range(spec.params.n_houses))
    idx = 0
    for bit in bits:
        idx = idx * 2 + bit
    return idx


def _build_method_factorization(
    method: MethodSpec, spec: GameSpec, seed: int
) -> Factorization:
    # The builder ignores f for the single-agent and joint schemes.
    return build_factorization(
        method.scheme,
        spec.n,
        spec.actions_per_agent,
        f=method.f or 2,
        num_factors=method.num_factors,
        rng_seed=derive_seed(seed, "factorization"),
    )


def run_cell(config: ExperimentConfig, game: str, method_label: str, rep: int) -> RunResult:
    """Train one (game, method, repetition) cell and archive its artifacts."""
    method = METHODS[method_label]
    spec = make_game(game)
    seed = cell_seed(config.base_seed, game, method_label, rep)
    factorization = _build_method_factorization(method, spec, seed)
    train_cfg = config.train_config(method.rule, seed)
    _, recon, curve = train(spec, factorization, train_cfg)
    report = evaluate(true_q_table(spec), recon.qtable, temperature=config.temperature)

    cell_dir = Path(config.output_dir) / game / method_label / str(seed)
    cell_dir.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()

    (cell_dir / "factorization.json").write_text(factorization_to_json(factorization))
    (cell_dir / "qhat.json").write_text(reconstruction_to_json(recon))
    (cell_dir / "metrics.json").write_text(report_to_json(report))
    with open(cell_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["game", "method", "seed", "rep", "config_hash", *CSV_COLUMNS])
        writer.writerow([game, method_label, seed, rep, chash, *report_to_csv_row(report)])
    with open(cell_dir / "curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "mse_all", "value_loss"])
        for step, m, v in zip(curve.steps, curve.mse_all, curve.value_loss):
            writer.writerow([step, repr(m), repr(v)])

    return RunResult(
        game, method_label, rep, seed, factorization, report, curve, str(cell_dir), chash
    )


def _run_cell_guarded(
    args: tuple[ExperimentConfig, str, str, int]
) -> tuple[Optional[RunResult], Optional[dict]]:
    try:
        return run_cell(*args), None
    except Exception as exc:  # noqa: BLE001 - one cell must not kill the grid
        return None, {"game": args[1], "method": args[2], "rep": args[3], "reason": repr(exc)}


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    """Execute the whole grid; infeasible cells are reported and skipped."""
    outcome = ExperimentOutcome()
    cells = []
    for game in config.games:
        spec = make_game(game)
        for method_label in config.methods:
            method = METHODS[method_label]
            try:
                _build_method_factorization(method, spec, 0)
            except ConfigurationError as exc:
                for rep in range(config.repetitions):
                    outcome.skipped.append(
                        {"game": game, "method": method_label, "rep": rep, "reason": str(exc)}
                    )
                continue
            for rep in range(config.repetitions):
                cells.append((config, game, method_label, rep))

    if config.jobs > 1 and len(cells) > 1:
        with get_context("spawn").Pool(config.jobs) as pool:
            outcomes = pool.map(_run_cell_guarded, cells)
    else:
        outcomes = [_run_cell_guarded(cell) for cell in cells]
    finished = [result for result, _ in outcomes if result is not None]
    outcome.failed.extend(err for _, err in outcomes if err is not None)
    outcome.results = sorted(finished, key=lambda r: (r.game, r.method, r.rep))

    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": json.loads(config_to_json(config)),
        "config_hash": config.config_hash(),
        "completed_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "n_results": len(outcome.results),
        "skipped": outcome.skipped,
        "failed": outcome.failed,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    emit_summary_tables(outcome.results, root)
    emit_training_curves(outcome.results, root)
    return outcome


# ---------------------------------------------------------------------------
# Emitters
# ---------------------------------------------------------------------------


def emit_summary_tables(results: Iterable[RunResult], out_dir: str | Path) -> Path:
    """Per (game, method): mean and standard error of every metric."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, str], list[RunResult]] = {}
    for result in results:
        groups.setdefault((result.game, result.method), []).append(result)

    header = ["game", "method", "runs"]
    for name in CSV_COLUMNS:
        header += [f"{name}_mean", f"{name}_se"]
    rows = []
    summary_doc = []
    for (game, method), members in sorted(groups.items()):
        row: list[str] = [game, method, str(len(members))]
        doc_entry: dict = {"game": game, "method": method, "runs": len(members)}
        for name in CSV_COLUMNS:
            values = [getattr(m.report, name) for m in members]
            mean, se = mean_and_standard_error(values)
            row += [repr(mean), repr(se)]
            doc_entry[name] = {
                "mean": None if math.isnan(mean) else mean,
                "se": None if math.isnan(se) else se,
            }
        rows.append(row)
        summary_doc.append(doc_entry)

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    (out_dir / "summary.json").write_text(json.dumps(summary_doc, indent=2, sort_keys=True))
    return out_dir / "summary.csv"


def emit_training_curves(results: Iterable[RunResult], out_dir: str | Path) -> Path:
    """Long-format curve files per (game, method) plus a mean-over-seeds companion."""
    out_dir = Path(out_dir)
    curve_dir = out_dir / "curves"
    curve_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, str], list[RunResult]] = {}
    for result in results:
        groups.setdefault((result.game, result.method), []).append(result)

    for (game, method), members in sorted(groups.items()):
        members = sorted(members, key=lambda r: r.rep)
        with open(curve_dir / f"{game}__{method}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "seed", "mse_all", "value_loss"])
            for member in members:
                for step, m, v in zip(
                    member.curve.steps, member.curve.mse_all, member.curve.value_loss
                ):
                    writer.writerow([step, member.seed, repr(m), repr(v)])
        by_step: dict[int, list[tuple[float, float]]] = {}
        for member in members:
            for step, m, v in zip(
                member.curve.steps, member.curve.mse_all, member.curve.value_loss
            ):
                by_step.setdefault(step, []).append((m, v))
        with open(curve_dir / f"{game}__{method}__mean.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "mse_all_mean", "value_loss_mean"])
            for step in sorted(by_step):
                ms = [m for m, _ in by_step[step]]
                vs = [v for _, v in by_step[step]]
                writer.writerow([step, repr(float(np.mean(ms))), repr(float(np.mean(vs)))])
    return curve_dir


def emit_barplot(
    spec: GameSpec,
    q_hat: np.ndarray,
    title: str,
    out_base: Path,
    type_index: Optional[int] = None,
) -> tuple[Path, Path]:
    """Plot-data CSV plus an SVG rendering for one table (one type if Bayesian)."""
    q_true = true_q_table(spec)
    t = 0
    if spec.bayesian:
        t = showcase_type_index(spec) if type_index is None else type_index
        title = f"{title} (type {t}: {''.join(map(str, type_from_index(spec, t)))})"
    truth_row = q_true.values[t]
    hat_row = np.asarray(q_hat)[t]

    csv_path = out_base.with_suffix(".csv")
    svg_path = out_base.with_suffix(".svg")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["action_index", "q_true", "q_hat"])
        for i, (qt, qh) in enumerate(zip(truth_row, hat_row)):
            writer.writerow([i, repr(float(qt)), repr(float(qh))])
    svg_path.write_text(bar_chart_svg(title, truth_row, hat_row))
    return csv_path, svg_path


def emit_run_barplots(
    run_dir: str | Path, out_dir: Optional[str | Path] = None, type_index: Optional[int] = None
) -> list[Path]:
    """Render bar plots for every archived cell under a run directory."""
    run_dir = Path(run_dir)
    out_root = Path(out_dir) if out_dir is not None else run_dir / "plots"
    out_root.mkdir(parents=True, exist_ok=True)
    emitted = []
    for qhat_path in sorted(run_dir.glob("*/*/*/qhat.json")):
        recon = reconstruction_from_json(qhat_path.read_text())
        seed_dir = qhat_path.parent
        game, method, seed = seed_dir.parts[-3], seed_dir.parts[-2], seed_dir.parts[-1]
        base = out_root / f"{game}__{method}__{seed}"
        csv_path, svg_path = emit_barplot(
            recon.game,
            recon.qtable.values,
            f"{game} / {method} / seed {seed}",
            base,
            type_index,
        )
        emitted += [csv_path, svg_path]
    return emitted


def load_summary_inputs(run_dir: str | Path) -> list[RunResult]:
    """Rebuild RunResults from archived per-cell artifacts (for re-emitting tables)."""
    from .metrics import METRIC_FIELDS

    run_dir = Path(run_dir)
    results = []
    for metrics_path in sorted(run_dir.glob("*/*/*/metrics.csv")):
        with open(metrics_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if len(rows) != 1:
            raise ConfigurationError(f"{metrics_path} should hold exactly one row")
        row = rows[0]
        report = MetricsReport(
            **{name: float(row[name]) for name in METRIC_FIELDS},
            correctly_ranked_count=float(row["correctly_ranked_count"]),
        )
        curve = TrainingCurve()
        curve_path = metrics_path.parent / "curve.csv"
        if curve_path.exists():
            with open(curve_path, newline="") as fh:
                for crow in csv.DictReader(fh):
                    curve.steps.append(int(crow["step"]))
                    curve.mse_all.append(float(crow["mse_all"]))
                    curve.value_loss.append(float(crow["value_loss"]))
        factorization = factorization_from_json(
            (metrics_path.parent / "factorization.json").read_text()
        )
        results.append(
            RunResult(
                game=row["game"],
                method=row["method"],
                rep=int(row["rep"]),
                seed=int(row["seed"]),
                factorization=factorization,
                report=report,
                curve=curve,
                cell_dir=str(metrics_path.parent),
                config_hash=row["config_hash"],
            )
        )
    return results

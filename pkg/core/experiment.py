"""
Experiment Orchestrator

Runs the collaborative prediction experiment end to end:
- samples victims per iteration with a seed derived from the iteration
- predicts each test day from local training windows (baseline, LWOL, GWOL)
- builds benefit matrices, selects partners and shares data per strategy
- predicts again on augmented logs and scores everything against the test day
- sweeps the EWMA smoothing factor and exports dataset statistics

Every table is a pandas DataFrame written as CSV; wall-clock timing only
goes to the run manifest so reruns produce byte-identical CSVs.
"""

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from . import __version__
from .collaboration import (
    Mode,
    PartnershipRound,
    Strategy,
    WindowPolicy,
    benefit_matrix,
    collaborate,
    policy_window,
    repartner_due,
    select_partners,
)
from .config import settings
from .errors import ConfigurationError, UndefinedMetricError
from .evaluation import (
    ConfusionCounts,
    CollaboratorSizeReport,
    bounds,
    coalition_stability,
    collaborator_size_analysis,
    improvement,
    knowledge_correlation,
    score,
    summarize_improvements,
    universe,
)
from .events import Dataset, VictimLog, ingest
from .predictor import PredictionParams, ewma_scores, gwol, lwol, predict
from .similarity import Metric, RangePolicy
from .stats import (
    attacker_daily_victims,
    contribution_cdf,
    daily_entropy,
    daily_stats,
    interarrival_cdf,
    shared_unique_counts,
    top_ports,
    victim_daily_attacks,
)
from .synth import SynthConfig, generate

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
BASELINE = "baseline"
LWOL = "lwol"
GWOL = "gwol"

VICTIM_DAY_COLUMNS = [
    "iteration", "day", "victim", "series", "metric", "strategy", "collaborator", "coalition_size",
    "known_events", "tp", "fp", "tn", "fn", "universe_size", "baseline_tp", "improvement",
]


def _split_list(value):
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


def _dedupe(values: Sequence) -> List:
    seen, kept = set(), []
    for value in values:
        if value not in seen:
            seen.add(value)
            kept.append(value)
    return kept


class ExperimentConfig(BaseModel):
    """
    Experiment parameters.

    Flat key-value files may set prediction fields directly (alpha,
    t_train, ...), generator fields with a synth_ prefix and range
    agreement fields with a range_ prefix.
    """
    dataset_path: Optional[str] = None
    synth: SynthConfig = Field(default_factory=SynthConfig)
    sample_size: int = Field(default=100, ge=2)
    iterations: int = Field(default=100, ge=1)
    prediction: PredictionParams = Field(default_factory=PredictionParams)
    metrics: List[Metric] = Field(default_factory=lambda: list(Metric))
    strategies: List[Strategy] = Field(default_factory=lambda: [Strategy.INTERSECTION_WITH_DATA, Strategy.UNION_WITH_DATA])
    pair_fraction: float = Field(default=0.01, ge=0, le=1)
    first_day: int = Field(default=6, ge=1)
    last_day: int = Field(default=12, ge=1)
    mode: Mode = Mode.PLAINTEXT
    window_policy: WindowPolicy = WindowPolicy.HISTORY_BEFORE
    range_policy: RangePolicy = Field(default_factory=RangePolicy)
    repartner_every: int = Field(default=1, ge=1)
    offender_list_size: int = Field(default=10, ge=1)
    rng_seed: int = Field(default=0, ge=0)
    output_dir: Optional[str] = None
    run_id: Optional[str] = None

    flat_keys: ClassVar[FrozenSet[str]] = frozenset(
        set(PredictionParams.model_fields)
        | {f"synth_{name}" for name in SynthConfig.model_fields}
        | {f"range_{name}" for name in RangePolicy.model_fields}
    )

    @model_validator(mode="before")
    @classmethod
    def _nest_flat_keys(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        nested = {"prediction": ({}, ""), "synth": ({}, "synth_"), "range_policy": ({}, "range_")}
        model_fields = {"prediction": PredictionParams, "synth": SynthConfig, "range_policy": RangePolicy}
        for target, (values, prefix) in nested.items():
            for name in model_fields[target].model_fields:
                key = f"{prefix}{name}"
                if key in data and key not in cls.model_fields:
                    values[name] = data.pop(key)
            if values:
                current = data.get(target) or {}
                if isinstance(current, BaseModel):
                    current = current.model_dump()
                data[target] = {**current, **values}
        if "range_policy" in data and isinstance(data["range_policy"], dict):
            data["range_policy"] = {k: _split_list(v) if k == "blocks" else v for k, v in data["range_policy"].items()}
        return data

    @field_validator("metrics", "strategies", mode="before")
    @classmethod
    def _split_lists(cls, value):
        return _split_list(value)

    @field_validator("metrics", "strategies")
    @classmethod
    def _unique(cls, value):
        if not value:
            raise ValueError("at least one entry is required")
        return _dedupe(value)

    @model_validator(mode="after")
    def _day_range_has_history(self):
        if self.last_day < self.first_day:
            raise ValueError(f"last_day {self.last_day} precedes first_day {self.first_day}")
        if self.first_day - self.prediction.t_train < 1:
            raise ValueError(f"first_day {self.first_day} leaves fewer than t_train={self.prediction.t_train} days of history")
        return self

    def fingerprint(self) -> str:
        payload = self.model_dump_json(exclude={"output_dir", "run_id"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]

    @property
    def resolved_run_id(self) -> str:
        return self.run_id or f"run-{self.fingerprint()}"


@dataclass
class RunReport:
    """All tables of a run plus manifest-only statistics."""
    config: ExperimentConfig
    tables: Dict[str, pd.DataFrame]
    knowledge: Dict[str, Optional[float]] = field(default_factory=dict)
    size_analysis: Optional[CollaboratorSizeReport] = None
    seeds: List[int] = field(default_factory=list)
    timing: Dict[str, float] = field(default_factory=dict)

    @property
    def victim_days(self) -> pd.DataFrame:
        return self.tables["victim_days"]

    @property
    def summary(self) -> pd.DataFrame:
        return self.tables["summary"]

    def manifest(self) -> Dict[str, Any]:
        return {
            "run_id": self.config.resolved_run_id,
            "version": __version__,
            "config": self.config.model_dump(mode="json"),
            "seeds": self.seeds,
            "tables": sorted(self.tables),
            "knowledge_correlation": self.knowledge,
            "collaborator_sizes": self.size_analysis.model_dump(mode="json") if self.size_analysis else None,
            "timing_seconds": self.timing,
        }


def load_dataset(config: ExperimentConfig) -> Dataset:
    """Ingest the configured log, or generate one when no path is set."""
    if config.dataset_path:
        path = Path(config.dataset_path)
        try:
            dataset, parse_report, clean_report, filter_report = ingest(path)
        except OSError as e:
            raise OSError(f"Cannot read dataset {path}: {e}") from e
        logger.info(
            f"Loaded {path}: {parse_report.accepted}/{parse_report.total_lines} lines parsed, "
            f"{clean_report.retained_events} events after cleaning, "
            f"{filter_report.retained_contributors} contributors after filtering"
        )
        return dataset
    return generate(config.synth)


def _check_dataset(config: ExperimentConfig, dataset: Dataset) -> None:
    if len(dataset.victims) < config.sample_size:
        raise ConfigurationError(f"sample_size {config.sample_size} exceeds the {len(dataset.victims)} victims in the dataset")
    last_test_day = config.last_day + config.prediction.t_test - 1
    if dataset.n_days < last_test_day:
        raise ConfigurationError(f"Dataset spans {dataset.n_days} days; the experiment needs {last_test_day}")


def sample_victims(dataset: Dataset, size: int, seed: int) -> List[str]:
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(dataset.victims), size=size, replace=False)
    return sorted(dataset.victims[i] for i in chosen)


@dataclass
class _DayContext:
    iteration: int
    day: int
    logs: Mapping[str, VictimLog]
    origin: int
    training: Dict[str, FrozenSet[int]]
    actual: Dict[str, FrozenSet[int]]
    universes: Dict[str, FrozenSet[int]]


def _day_context(iteration: int, day: int, logs: Mapping[str, VictimLog], origin: int, params: PredictionParams) -> _DayContext:
    first, last = params.training_window(day)
    test_last = day + params.t_test - 1
    training = {victim: log.sources(first, last) for victim, log in logs.items()}
    actual = {victim: log.sources(day, test_last) for victim, log in logs.items()}
    universes = {victim: universe(training, actual[victim]) for victim in logs}
    return _DayContext(iteration, day, logs, origin, training, actual, universes)


def _ewma_counts(ctx: _DayContext, victim: str, events, params: PredictionParams) -> ConfusionCounts:
    watchlist = predict(ewma_scores(events, params, ctx.day, ctx.origin), params, victim, ctx.day)
    return score(watchlist, ctx.actual[victim], ctx.universes[victim])


def _row(ctx: _DayContext, victim: str, series: str, counts: ConfusionCounts, **extra) -> Dict[str, Any]:
    row = {
        "iteration": ctx.iteration,
        "day": ctx.day,
        "victim": victim,
        "series": series,
        "metric": "",
        "strategy": "",
        "collaborator": 0,
        "coalition_size": 0,
        "known_events": len(ctx.logs[victim].before(ctx.day)),
        "tp": counts.tp,
        "fp": counts.fp,
        "tn": counts.tn,
        "fn": counts.fn,
        "universe_size": counts.universe_size,
        "baseline_tp": counts.tp,
        "improvement": np.nan,
    }
    row.update(extra)
    return row


def _baseline_rows(ctx: _DayContext, config: ExperimentConfig) -> Tuple[Dict[str, ConfusionCounts], List[Dict[str, Any]]]:
    params = config.prediction
    first, last = params.training_window(ctx.day)
    rows = []
    baseline = {}
    for victim in sorted(ctx.logs):
        baseline[victim] = _ewma_counts(ctx, victim, ctx.logs[victim].events, params)
        rows.append(_row(ctx, victim, BASELINE, baseline[victim]))

    window_events = {victim: log.window(first, last, include_foreign=False) for victim, log in ctx.logs.items()}
    global_list = gwol((e for victim in sorted(window_events) for e in window_events[victim]), config.offender_list_size, ctx.day)
    for victim in sorted(ctx.logs):
        local = lwol(window_events[victim], config.offender_list_size, victim, ctx.day)
        rows.append(_row(ctx, victim, LWOL, score(local, ctx.actual[victim], ctx.universes[victim])))
        shared = global_list.for_victim(victim)
        rows.append(_row(ctx, victim, GWOL, score(shared, ctx.actual[victim], ctx.universes[victim])))
    return baseline, rows


def _collaboration_rows(
    ctx: _DayContext,
    config: ExperimentConfig,
    metric: Metric,
    strategy: Strategy,
    partnership: PartnershipRound,
    baseline: Dict[str, ConfusionCounts],
) -> List[Dict[str, Any]]:
    window = policy_window(config.window_policy, ctx.day, config.prediction.t_train)
    augmented = collaborate(ctx.logs, partnership, strategy, ctx.day, window, config.mode)
    series = f"{metric.value}/{strategy.value}"
    rows = []
    for victim in sorted(ctx.logs):
        partners = partnership.partners(victim)
        if partners:
            counts = _ewma_counts(ctx, victim, augmented[victim].all_events, config.prediction)
        else:
            counts = baseline[victim]
        gain = improvement(baseline[victim].tp, counts.tp)
        known = len(ctx.logs[victim].before(ctx.day)) + sum(1 for e in augmented[victim].foreign if augmented[victim].day_of(e) < ctx.day)
        rows.append(
            _row(
                ctx, victim, series, counts,
                metric=metric.value,
                strategy=strategy.value,
                collaborator=int(bool(partners)),
                coalition_size=len(partners),
                known_events=known,
                baseline_tp=baseline[victim].tp,
                improvement=np.nan if gain is None else gain,
            )
        )
    return rows


def run_experiment(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> RunReport:
    """
    Run the full experiment.

    The report is a pure function of the config and the dataset; only the
    timing entries differ between reruns.

    Raises:
        ConfigurationError: the dataset cannot support the configured sample or days
    """
    started = time.perf_counter()
    dataset = dataset if dataset is not None else load_dataset(config)
    _check_dataset(config, dataset)
    loaded = time.perf_counter()

    victim_rows: List[Dict[str, Any]] = []
    bound_rows: List[Dict[str, Any]] = []
    pair_rows: List[Dict[str, Any]] = []
    stability_rows: List[Dict[str, Any]] = []
    collaborator_sizes: Dict[str, List[int]] = {metric.value: [] for metric in config.metrics}
    seeds = []

    for iteration in range(config.iterations):
        seed = config.rng_seed + iteration
        seeds.append(seed)
        sample = sample_victims(dataset, config.sample_size, seed)
        logs = {victim: dataset.log(victim) for victim in sample}
        rounds: Dict[Metric, PartnershipRound] = {}

        for day in range(config.first_day, config.last_day + 1):
            ctx = _day_context(iteration, day, logs, dataset.origin or 0, config.prediction)
            baseline, rows = _baseline_rows(ctx, config)
            victim_rows.extend(rows)
            for victim in sample:
                report = bounds(victim, day, ctx.training, ctx.actual[victim])
                bound_rows.append({"iteration": iteration, "day": day, "victim": victim, "lub": report.lub, "gub": report.gub})

            for metric in config.metrics:
                previous = rounds.get(metric)
                if previous is None or repartner_due(day, config.first_day, config.repartner_every):
                    matrix = benefit_matrix(
                        logs, metric, config.mode, day, config.window_policy, config.prediction.t_train, config.range_policy
                    )
                    partnership = select_partners(matrix, config.pair_fraction)
                    for a, b in partnership.pairs:
                        pair_rows.append({
                            "iteration": iteration, "day": day, "metric": metric.value,
                            "victim_a": a, "victim_b": b, "score": matrix.score(a, b),
                        })
                else:
                    partnership = previous.for_day(day)
                if previous is not None:
                    stability = coalition_stability(previous, partnership)
                    stability_rows.append({
                        "iteration": iteration, "day": day, "metric": metric.value,
                        "stability": np.nan if stability is None else stability,
                    })
                rounds[metric] = partnership
                collaborator_sizes[metric.value].extend(len(logs[v].before(day)) for v in sorted(partnership.collaborators))

                for strategy in config.strategies:
                    victim_rows.extend(_collaboration_rows(ctx, config, metric, strategy, partnership.with_strategy(strategy), baseline))

        logger.info(f"Iteration {iteration + 1}/{config.iterations} done (seed {seed})")

    victim_days = pd.DataFrame(victim_rows, columns=VICTIM_DAY_COLUMNS)
    tables = {
        "victim_days": victim_days,
        "bounds": pd.DataFrame(bound_rows, columns=["iteration", "day", "victim", "lub", "gub"]),
        "partnerships": pd.DataFrame(pair_rows, columns=["iteration", "day", "metric", "victim_a", "victim_b", "score"]),
        "stability": pd.DataFrame(stability_rows, columns=["iteration", "day", "metric", "stability"]),
        "daily": daily_series(victim_days),
        "roc": roc_series(victim_days),
        "summary": summary_table(victim_days),
        "knowledge_quartiles": knowledge_quartiles(collaborator_sizes),
    }
    finished = time.perf_counter()

    return RunReport(
        config=config,
        tables=tables,
        knowledge=_knowledge(victim_days),
        size_analysis=collaborator_size_analysis(collaborator_sizes),
        seeds=seeds,
        timing={"load": loaded - started, "experiment": finished - loaded, "total": finished - started},
    )


def daily_series(victim_days: pd.DataFrame) -> pd.DataFrame:
    """ΣTP and ΣFP per iteration, day and series."""
    grouped = victim_days.groupby(["iteration", "day", "series"], sort=True)[["tp", "fp"]].sum()
    return grouped.rename(columns={"tp": "sum_tp", "fp": "sum_fp"}).reset_index()


def roc_series(victim_days: pd.DataFrame) -> pd.DataFrame:
    """Pooled (FPR, TPR) per iteration, day and series."""
    grouped = victim_days.groupby(["iteration", "day", "series"], sort=True)[["tp", "fp", "tn", "fn"]].sum().reset_index()
    positives = grouped["tp"] + grouped["fn"]
    negatives = grouped["fp"] + grouped["tn"]
    grouped["fpr"] = (grouped["fp"] / negatives).where(negatives > 0)
    grouped["tpr"] = (grouped["tp"] / positives).where(positives > 0)
    return grouped[["iteration", "day", "series", "fpr", "tpr"]]


SUMMARY_COLUMNS = [
    "metric", "strategy", "population", "mean_improvement", "max_improvement", "min_improvement",
    "defined", "undefined", "mean_collaborators", "sd_collaborators", "mean_coalition_size",
    "sd_coalition_size", "median_coalition_size", "sum_tp", "sum_fp", "baseline_sum_tp",
]


def _sd(values: pd.Series) -> float:
    # sample standard deviation; one value has no spread
    return float(values.std(ddof=1)) if len(values) > 1 else 0.0


QUARTILE_COLUMNS = ["metric", "count", "min", "q1", "median", "q3", "max"]


def knowledge_quartiles(collaborator_sizes: Mapping[str, Sequence[int]]) -> pd.DataFrame:
    """Quartiles of the events known by collaborators, per metric."""
    rows = []
    for metric in sorted(collaborator_sizes):
        sizes = np.asarray(collaborator_sizes[metric], dtype=float)
        if not len(sizes):
            rows.append({"metric": metric, "count": 0})
            continue
        q1, median, q3 = np.percentile(sizes, [25, 50, 75])
        rows.append({
            "metric": metric,
            "count": len(sizes),
            "min": float(sizes.min()),
            "q1": float(q1),
            "median": float(median),
            "q3": float(q3),
            "max": float(sizes.max()),
        })
    return pd.DataFrame(rows, columns=QUARTILE_COLUMNS)


def summary_table(victim_days: pd.DataFrame) -> pd.DataFrame:
    """
    Improvement, collaborator count and coalition size per metric and
    strategy, once over collaborators and once over all entities.
    """
    collab = victim_days[victim_days["metric"] != ""]
    rows = []
    for (metric, strategy), group in collab.groupby(["metric", "strategy"], sort=True):
        per_day = group.groupby(["iteration", "day"])["collaborator"].sum()
        members = group[group["collaborator"] == 1]
        sizes = members["coalition_size"]
        for population, subset in (("collaborators", members), ("all", group)):
            gains = [None if np.isnan(v) else float(v) for v in subset["improvement"]]
            summary = summarize_improvements(gains)
            rows.append({
                "metric": metric,
                "strategy": strategy,
                "population": population,
                "mean_improvement": summary.mean,
                "max_improvement": summary.max,
                "min_improvement": summary.min,
                "defined": summary.defined,
                "undefined": summary.undefined,
                "mean_collaborators": float(per_day.mean()) if len(per_day) else 0.0,
                "sd_collaborators": _sd(per_day),
                "mean_coalition_size": float(sizes.mean()) if len(sizes) else 0.0,
                "sd_coalition_size": _sd(sizes),
                "median_coalition_size": float(sizes.median()) if len(sizes) else 0.0,
                "sum_tp": int(subset["tp"].sum()),
                "sum_fp": int(subset["fp"].sum()),
                "baseline_sum_tp": int(subset["baseline_tp"].sum()),
            })
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def _knowledge(victim_days: pd.DataFrame) -> Dict[str, Optional[float]]:
    results: Dict[str, Optional[float]] = {}
    for series, group in victim_days.groupby("series", sort=True):
        if series in (LWOL, GWOL):
            continue
        if series != BASELINE:
            group = group[group["collaborator"] == 1]
        try:
            results[series] = knowledge_correlation(group["known_events"], group["tp"]).r
        except UndefinedMetricError:
            results[series] = None
    return results


def write_table(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_report(report: RunReport, output_dir: Optional[Union[str, Path]] = None) -> Path:
    """Write every table as <run-id>/<table>.csv plus manifest.json."""
    base = Path(output_dir or report.config.output_dir or settings.OUTPUT_DIR)
    run_dir = base / report.config.resolved_run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    for name, frame in report.tables.items():
        write_table(frame, run_dir / f"{name}.csv")
    with open(run_dir / "manifest.json", "w") as f:
        json.dump(report.manifest(), f, indent=2, sort_keys=True)
    logger.info(f"Wrote {len(report.tables)} tables to {run_dir}")
    return run_dir


def sweep_alpha(config: ExperimentConfig, alphas: Iterable[float], dataset: Optional[Dataset] = None) -> pd.DataFrame:
    """
    Baseline-only ΣTP per α, iteration and day.

    Each α is run with threshold listing and with budget listing
    (budget = offender_list_size, threshold 0). Duplicate αs are dropped.
    """
    requested = [float(a) for a in alphas]
    unique = _dedupe(requested)
    if len(unique) < len(requested):
        logger.warning(f"Dropped {len(requested) - len(unique)} duplicate alpha values")
    for alpha in unique:
        if not 0 < alpha <= 1:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")

    dataset = dataset if dataset is not None else load_dataset(config)
    _check_dataset(config, dataset)

    listings = {
        "threshold": {"budget": None},
        "budget": {"budget": config.offender_list_size, "threshold": 0.0},
    }
    rows = []
    for iteration in range(config.iterations):
        sample = sample_victims(dataset, config.sample_size, config.rng_seed + iteration)
        logs = {victim: dataset.log(victim) for victim in sample}
        for day in range(config.first_day, config.last_day + 1):
            ctx = _day_context(iteration, day, logs, dataset.origin or 0, config.prediction)
            for alpha in unique:
                for listing, overrides in listings.items():
                    params = config.prediction.model_copy(update={"alpha": alpha, **overrides})
                    total = sum(_ewma_counts(ctx, victim, logs[victim].events, params).tp for victim in sample)
                    rows.append({"alpha": alpha, "listing": listing, "iteration": iteration, "day": day, "sum_tp": total})
    return pd.DataFrame(rows, columns=["alpha", "listing", "iteration", "day", "sum_tp"])


STATISTICS = (
    "daily", "shared_unique_victim", "shared_unique_source", "entropy_port", "entropy_source",
    "entropy_target", "interarrival_all", "interarrival_same_ip", "interarrival_same_slash24",
    "interarrival_same_slash8", "victim_profile", "attacker_profile", "top_ports", "contribution",
)

STAT_COLUMNS = {
    "daily": ["day", "total_attacks", "unique_targets", "unique_sources"],
    "shared_unique_victim": ["day", "entity", "common", "unique"],
    "shared_unique_source": ["day", "entity", "common", "unique"],
    "entropy_port": ["day", "entropy"],
    "entropy_source": ["day", "entropy"],
    "entropy_target": ["day", "entropy"],
    "victim_profile": ["day", "contributor_id", "attacks"],
    "attacker_profile": ["day", "source_ip", "victims"],
    "top_ports": ["target_port", "attacks"],
}


def _statistic(dataset: Dataset, name: str) -> pd.DataFrame:
    if not len(dataset):
        return pd.DataFrame(columns=STAT_COLUMNS.get(name, ["value", "cdf"]))
    if name == "daily":
        return pd.DataFrame([vars(s) for s in daily_stats(dataset)], columns=STAT_COLUMNS["daily"])
    if name.startswith("shared_unique_"):
        perspective = name.rsplit("_", 1)[1]
        frames = [shared_unique_counts(dataset, day, perspective).assign(day=day) for day in range(1, dataset.n_days + 1)]
        return pd.concat(frames, ignore_index=True)[STAT_COLUMNS[name]]
    if name.startswith("entropy_"):
        return daily_entropy(dataset, name.split("_", 1)[1]).reset_index()
    if name.startswith("interarrival_"):
        return interarrival_cdf(dataset, name.split("_", 1)[1], "seconds").to_frame()
    if name == "victim_profile":
        return victim_daily_attacks(dataset)
    if name == "attacker_profile":
        return attacker_daily_victims(dataset)
    if name == "top_ports":
        return top_ports(dataset)
    return contribution_cdf(dataset).to_frame()


def export_stats(dataset: Dataset, which: Sequence[str], output_dir: Union[str, Path]) -> List[Path]:
    """
    Write one CSV per requested statistic; "all" selects every statistic.

    Raises:
        ConfigurationError: an unknown statistic name
    """
    names = list(STATISTICS) if "all" in which else _dedupe(list(which))
    unknown = [name for name in names if name not in STATISTICS]
    if unknown:
        raise ConfigurationError(f"Unknown statistics: {', '.join(unknown)}")
    target = Path(output_dir)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names:
        path = target / f"{name}.csv"
        write_table(_statistic(dataset, name), path)
        written.append(path)
    logger.info(f"Wrote {len(written)} statistics to {target}")
    return written

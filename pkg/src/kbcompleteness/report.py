"""Per-stratum completeness tables, window-size sweeps and estimate series.

Everything here is a composition of :mod:`windowing` and :mod:`estimators`
calls; no state is kept between runs. Output files use fixed number
formatting and ordering so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .dataset import EditRecord, EntityRegistry, GenderLabel, format_timestamp, load_edits, load_registry, open_text, validate_dataset
from .estimators import (
    DEFAULT_TRAILING_FRACTION,
    ESTIMATOR_IDS,
    J1,
    NoEvidenceError,
    NoScoreError,
    completeness,
    convergence_score,
    estimate,
    estimate_series,
    frequency_stats,
    get_estimator,
)
from .gender import DEFAULT_TAU
from .windowing import ALL, IncidenceSummary, Stratum, WindowSpec, bin_strata, prefix_summaries

logger = logging.getLogger(__name__)

DEFAULT_PERIOD_START = datetime(2019, 1, 1, tzinfo=timezone.utc)
# exclusive; equivalent to 2023-12-31T23:59:59Z inclusive at second precision
DEFAULT_PERIOD_END = datetime(2024, 1, 1, tzinfo=timezone.utc)
SWEEP_WIDTHS = (7, 14, 30, 90, 180, 365)
SENTINEL = "—"


@dataclass
class RunConfig:
    registry_path: Path | None = None
    edits_path: Path | None = None
    dictionary_path: Path | None = None
    period_start: datetime = DEFAULT_PERIOD_START
    period_end: datetime = DEFAULT_PERIOD_END
    window_days: int = 7
    tau: float = DEFAULT_TAU
    trailing_fraction: float = DEFAULT_TRAILING_FRACTION
    estimators: tuple[str, ...] = ESTIMATOR_IDS
    include_all_strata: bool = False
    sparql_endpoint: str = "https://dbpedia.org/sparql"
    wiki_api: str = "https://en.wikipedia.org/w/api.php"
    rate_limit: float = 5.0
    concurrency: int = 4
    classes_file: Path | None = None
    out_dir: Path = Path(".")
    seed: int = 0
    format: str = "csv"

    def __post_init__(self):
        for e in self.estimators:
            get_estimator(e)
        if self.concurrency < 1:
            raise ValueError("concurrency must be at least 1")
        self.window_spec()

    def window_spec(self, width_days: int | None = None) -> WindowSpec:
        return WindowSpec(self.period_start, self.period_end, width_days or self.window_days)

    def load(self) -> tuple[EntityRegistry, list[EditRecord]]:
        if self.registry_path is None or self.edits_path is None:
            raise FileNotFoundError("both a registry and an edits file are required")
        with open(self.registry_path, "rb") as fh:
            registry = load_registry(fh)
        with open(self.edits_path, "rb") as fh:
            edits = load_edits(fh).records
        validate_dataset(registry, edits)
        return registry, edits

    def as_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, datetime):
                d[k] = format_timestamp(v)
            elif isinstance(v, Path):
                d[k] = str(v)
            elif isinstance(v, tuple):
                d[k] = list(v)
        return d


def report_strata(registry: EntityRegistry, include_all: bool = False) -> list[Stratum]:
    """Female and male strata per class (plus undefined and all when asked), sorted by (class, gender)."""
    genders = [GenderLabel.FEMALE.value, GenderLabel.MALE.value]
    if include_all:
        genders += [GenderLabel.UNDEFINED.value, ALL]
    return [Stratum(c, g) for c in registry.class_ids() for g in sorted(genders)]


def observed_count(registry: EntityRegistry, stratum: Stratum) -> int:
    return sum(1 for e in registry.values() if stratum.matches(e.class_ids, e.gender))


@dataclass(frozen=True)
class EstimatorCells:
    est: float | None = None
    conv: float | None = None
    compl: float | None = None
    clamped: bool = False


@dataclass(frozen=True)
class CompletenessRow:
    class_id: str
    gender: str
    observed_count: int
    D: int
    cells: dict[str, EstimatorCells]


@dataclass(frozen=True)
class CompletionSummary:
    """How many classes are more complete for male than for female, and vice versa."""

    male: int
    female: int
    ties: int
    estimator_id: str

    def __str__(self) -> str:
        return f"{self.male} vs {self.female}"


@dataclass
class Report:
    rows: list[CompletenessRow]
    summary: CompletionSummary
    dropped_events: int = 0
    estimators: tuple[str, ...] = ESTIMATOR_IDS


def _row_for(stratum: Stratum, inc: IncidenceSummary, registry: EntityRegistry, cfg: RunConfig) -> CompletenessRow:
    count = observed_count(registry, stratum)
    prefixes = prefix_summaries(inc)
    fs = frequency_stats(inc)
    cells = {}
    for est_id in cfg.estimators:
        try:
            est = estimate(fs, est_id, stratum)
        except NoEvidenceError:
            cells[est_id] = EstimatorCells()
            continue
        if not est.defined:
            cells[est_id] = EstimatorCells()
            continue
        try:
            conv = convergence_score(estimate_series(prefixes, est_id), cfg.trailing_fraction).value
        except NoScoreError:
            conv = None
        c = completeness(count, est)
        cells[est_id] = EstimatorCells(est.value, conv, c.value, c.clamped)
    return CompletenessRow(stratum.class_id, stratum.gender, count, inc.D, cells)


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def summarize(rows: list[CompletenessRow], estimator_id: str) -> CompletionSummary:
    by_class: dict[str, dict[str, float | None]] = {}
    for r in rows:
        if r.gender in (GenderLabel.FEMALE.value, GenderLabel.MALE.value):
            cell = r.cells.get(estimator_id)
            by_class.setdefault(r.class_id, {})[r.gender] = cell.compl if cell else None
    male = female = ties = 0
    for d in by_class.values():
        m, f = d.get("male"), d.get("female")
        if m is None or f is None:
            continue
        if m > f:
            male += 1
        elif f > m:
            female += 1
        else:
            ties += 1
    return CompletionSummary(male, female, ties, estimator_id)


def run_report(cfg: RunConfig, registry: EntityRegistry | None = None, events: list[EditRecord] | None = None) -> Report:
    """One row per (class, gender) stratum with estimate, convergence and completeness per estimator."""
    if registry is None or events is None:
        registry, events = cfg.load()
    strata = report_strata(registry, cfg.include_all_strata)
    binned = bin_strata(events, registry, cfg.window_spec(), strata)
    rows = _map(lambda s: _row_for(s, binned[s], registry, cfg), strata, cfg.concurrency)
    summary_est = J1 if J1 in cfg.estimators else cfg.estimators[0]
    dropped = next(iter(binned.values())).dropped if binned else 0
    return Report(rows, summarize(rows, summary_est), dropped, tuple(cfg.estimators))


def _fmt(value: float | None, decimals: int) -> str:
    return "" if value is None else f"{value:.{decimals}f}"


def report_header(estimators) -> list[str]:
    cols = ["class_id", "gender", "count", "D"]
    for e in estimators:
        cols += [f"{e}_est", f"{e}_conv", f"{e}_compl", f"{e}_clamped"]
    return cols


def write_report_csv(report: Report, sink) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(report_header(report.estimators))
    for r in report.rows:
        line = [r.class_id, r.gender, r.observed_count, r.D]
        for e in report.estimators:
            c = r.cells[e]
            line += [_fmt(c.est, 1), _fmt(c.conv, 3), _fmt(c.compl, 2), "true" if c.clamped else "false"]
        w.writerow(line)


def report_to_json(report: Report) -> dict:
    return {
        "rows": [
            {
                "class_id": r.class_id,
                "gender": r.gender,
                "count": r.observed_count,
                "D": r.D,
                "estimators": {e: asdict(r.cells[e]) for e in report.estimators},
            }
            for r in report.rows
        ],
        "summary": {
            "estimator": report.summary.estimator_id,
            "male_more_complete": report.summary.male,
            "female_more_complete": report.summary.female,
            "ties": report.summary.ties,
        },
    }


def write_report_json(report: Report, sink) -> None:
    json.dump(report_to_json(report), sink, indent=2, sort_keys=True, ensure_ascii=False)
    sink.write("\n")


def format_report_table(report: Report) -> str:
    """Human-readable table; undefined values print as a dash."""
    header = ["class", "gender", "count", "D"]
    for e in report.estimators:
        header += [f"{e} Est.", f"{e} Conve.", f"{e} Compl."]
    lines = [header]
    for r in report.rows:
        line = [r.class_id, r.gender, str(r.observed_count), str(r.D)]
        for e in report.estimators:
            c = r.cells[e]
            compl = _fmt(c.compl, 2) + ("*" if c.clamped else "") if c.compl is not None else SENTINEL
            line += [_fmt(c.est, 1) or SENTINEL, _fmt(c.conv, 3) or SENTINEL, compl]
        lines.append(line)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    return "\n".join("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in lines)


@dataclass(frozen=True)
class SweepRow:
    window_days: int
    estimator_id: str
    median_score: float | None
    strata_scored: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    skipped: list[int] = field(default_factory=list)


def stratum_scores(summaries: dict[Stratum, IncidenceSummary], estimator_id: str, trailing_fraction: float) -> dict[Stratum, float]:
    scores = {}
    for stratum, inc in summaries.items():
        try:
            scores[stratum] = convergence_score(estimate_series(prefix_summaries(inc), estimator_id), trailing_fraction).value
        except NoScoreError:
            continue
    return scores


def run_sweep(cfg: RunConfig, widths=SWEEP_WIDTHS, registry: EntityRegistry | None = None, events: list[EditRecord] | None = None, strata: list[Stratum] | None = None) -> SweepResult:
    """Median convergence score across strata for each window width and estimator."""
    if not widths:
        raise ValueError("at least one window width is required")
    if registry is None or events is None:
        registry, events = cfg.load()
    if strata is None:
        strata = report_strata(registry, cfg.include_all_strata)
    period_days = (cfg.period_end - cfg.period_start).total_seconds() / 86400
    rows: list[SweepRow] = []
    skipped: list[int] = []
    for width in sorted(set(widths)):
        if width > period_days:
            logger.warning("window width %d days exceeds the %.0f-day period; skipped", width, period_days)
            skipped.append(width)
            continue
        binned = bin_strata(events, registry, cfg.window_spec(width), strata)
        for est_id in cfg.estimators:
            scores = stratum_scores(binned, est_id, cfg.trailing_fraction)
            med = statistics.median(scores.values()) if scores else None
            rows.append(SweepRow(width, est_id, med, len(scores)))
    return SweepResult(rows, skipped)


def write_sweep_csv(result: SweepResult, sink) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["window_days", "estimator", "median_conv", "strata_scored"])
    for r in result.rows:
        w.writerow([r.window_days, r.estimator_id, _fmt(r.median_score, 6), r.strata_scored])


@dataclass(frozen=True)
class SeriesRow:
    window_index: int
    window_end: datetime
    D: int
    n: int
    estimates: dict[str, float | None]


def series_rows(cfg: RunConfig, stratum: Stratum, registry: EntityRegistry | None = None, events: list[EditRecord] | None = None) -> list[SeriesRow]:
    """Cumulative D, n and estimates after each window, for plotting.

    A stratum that received no edits gives no rows.
    """
    if registry is None or events is None:
        registry, events = cfg.load()
    inc = bin_strata(events, registry, cfg.window_spec(), [stratum])[stratum]
    if inc.D == 0:
        return []
    prefixes = prefix_summaries(inc)
    series = {e: estimate_series(prefixes, e) for e in (J1, "N1")}
    return [
        SeriesRow(t + 1, inc.window_ends[t], p.D, p.n, {e: series[e][t] for e in series})
        for t, p in enumerate(prefixes)
    ]


def _repr_or_empty(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_series_csv(rows: list[SeriesRow], sink) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["window_index", "window_end_ts", "D", "n", "est_J1", "est_N1"])
    for r in rows:
        w.writerow([r.window_index, format_timestamp(r.window_end), r.D, r.n,
                    _repr_or_empty(r.estimates["J1"]), _repr_or_empty(r.estimates["N1"])])


def series_filename(stratum: Stratum) -> str:
    return f"series_{stratum.class_id}_{stratum.gender}.csv"


def emit_series(cfg: RunConfig, stratum: Stratum, registry: EntityRegistry | None = None, events: list[EditRecord] | None = None) -> Path:
    if registry is None or events is None:
        registry, events = cfg.load()
    if stratum.class_id not in registry.class_ids():
        raise KeyError(f"unknown stratum {stratum}")
    rows = series_rows(cfg, stratum, registry, events)
    path = Path(cfg.out_dir) / series_filename(stratum)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open_text(path, "w") as fh:
        write_series_csv(rows, fh)
    return path

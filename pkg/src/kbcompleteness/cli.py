"""Command-line entry point.

Each pipeline stage reads and writes files, so a long crawl can be resumed
from whatever was persisted::

    kbcompleteness fetch-classes  --out data/
    kbcompleteness fetch-instances --classes-file allow.txt --out data/
    kbcompleteness fetch-edits    --registry data/registry.ndjson --out data/
    kbcompleteness classify       --registry data/registry.ndjson --dictionary names.csv --out data/
    kbcompleteness report         --registry data/registry.ndjson --edits data/edits.ndjson --out results/
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from . import __version__
from .dataset import (
    DatasetError,
    format_timestamp,
    load_edits,
    load_name_dictionary,
    load_registry,
    merge_edits,
    open_text,
    parse_timestamp,
    write_edits,
    write_registry,
)
from .estimators import ESTIMATOR_IDS, EstimationError, NoScoreError, convergence_score, estimate, estimate_series, frequency_stats
from .gender import ClassifierConfig, classify_registry, gender_distribution, write_distribution_csv
from .ingestion import (
    ClassDescriptor,
    FetchPolicy,
    HttpClient,
    IngestionError,
    build_registry,
    fetch_class_instances,
    fetch_edit_histories,
    fetch_person_subclasses,
    load_class_allow_list,
)
from .report import (
    DEFAULT_PERIOD_END,
    DEFAULT_PERIOD_START,
    SENTINEL,
    SWEEP_WIDTHS,
    RunConfig,
    emit_series,
    format_report_table,
    run_report,
    run_sweep,
    write_report_csv,
    write_report_json,
    write_sweep_csv,
)
from .simulator import PopulationSpec, PowerLaw, Uniform, evaluate_estimator
from .windowing import ALL, Stratum, bin_incidence, prefix_summaries

logger = logging.getLogger("kbcompleteness")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NETWORK = 4


class ConfigError(Exception):
    pass


def parse_period_bound(text: str, *, end: bool = False) -> datetime:
    """A date (``2023-12-31``) or a UTC timestamp.

    A bare date used as the period end includes that whole day.
    """
    try:
        if "T" in text:
            return parse_timestamp(text)
        d = date.fromisoformat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if end:
        d = d + timedelta(days=1)
    return datetime(d.year, d.month, d.day, tzinfo=timezone.utc)


def _estimator_list(text: str) -> tuple[str, ...]:
    ids = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in ids if x not in ESTIMATOR_IDS]
    if bad or not ids:
        raise argparse.ArgumentTypeError(f"unknown estimator(s) {bad}; choose from {','.join(ESTIMATOR_IDS)}")
    return ids


def _widths(text: str) -> tuple[int, ...]:
    try:
        ws = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"widths must be integers: {text!r}") from None
    if not ws or any(w < 1 for w in ws):
        raise argparse.ArgumentTypeError("widths must be positive")
    return ws


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--period-start", type=parse_period_bound, default=DEFAULT_PERIOD_START)
    common.add_argument("--period-end", type=lambda s: parse_period_bound(s, end=True), default=DEFAULT_PERIOD_END,
                        help="last day (inclusive) or exclusive UTC timestamp; default 2023-12-31")
    common.add_argument("--window-days", type=int, default=7)
    common.add_argument("--tau", type=float, default=0.1)
    common.add_argument("--trailing-fraction", type=float, default=0.2)
    common.add_argument("--estimators", type=_estimator_list, default=ESTIMATOR_IDS)
    common.add_argument("--sparql-endpoint", default="https://dbpedia.org/sparql")
    common.add_argument("--wiki-api", default="https://en.wikipedia.org/w/api.php")
    common.add_argument("--rate-limit", type=float, default=5.0, help="requests per second")
    common.add_argument("--concurrency", type=int, default=4, help="maximum requests in flight")
    common.add_argument("--retries", type=int, default=3)
    common.add_argument("--classes-file", type=Path, help="allow-list of class ids, one per line")
    common.add_argument("--out", type=Path, default=Path("."))
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--registry", type=Path)
    common.add_argument("--edits", type=Path)
    common.add_argument("--dictionary", type=Path)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="kbcompleteness", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch-classes", parents=[common], help="list Person sub-classes from the SPARQL endpoint")
    p.add_argument("--depth", type=int, help="sub-class depth limit (default unlimited)")
    p.set_defaults(func=cmd_fetch_classes)

    p = sub.add_parser("fetch-instances", parents=[common], help="fetch class instances into a registry")
    p.add_argument("--classes", type=Path, help="classes.ndjson from fetch-classes")
    p.add_argument("--page-size", type=int, default=10000)
    p.set_defaults(func=cmd_fetch_instances)

    p = sub.add_parser("fetch-edits", parents=[common], help="fetch revision histories for registry entities")
    p.add_argument("--resume", action="store_true", help="skip entities that already have edits")
    p.set_defaults(func=cmd_fetch_edits)

    p = sub.add_parser("classify", parents=[common], help="label registry entities by given name")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("estimate", parents=[common], help="estimate one stratum")
    p.add_argument("--class", dest="class_id", required=True)
    p.add_argument("--gender", default=ALL, choices=("female", "male", "undefined", ALL))
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("report", parents=[common], help="completeness table per class and gender")
    p.add_argument("--all-strata", action="store_true", help="also emit undefined and all-gender rows")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", parents=[common], help="convergence score per window width")
    p.add_argument("--widths", type=_widths, default=SWEEP_WIDTHS)
    p.add_argument("--all-strata", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("series", parents=[common], help="cumulative estimate series for one stratum")
    p.add_argument("--class", dest="class_id", required=True)
    p.add_argument("--gender", default=ALL, choices=("female", "male", "undefined", ALL))
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("simulate", parents=[common], help="estimator error on synthetic populations")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--K", type=int, default=260)
    p.add_argument("--p", type=float, default=0.05, help="uniform capture probability")
    p.add_argument("--power-law", nargs=3, type=float, metavar=("ALPHA", "P_MIN", "P_MAX"))
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_simulate)
    return parser


def _config(args) -> RunConfig:
    try:
        return RunConfig(
            registry_path=args.registry,
            edits_path=args.edits,
            dictionary_path=args.dictionary,
            period_start=args.period_start,
            period_end=args.period_end,
            window_days=args.window_days,
            tau=args.tau,
            trailing_fraction=args.trailing_fraction,
            estimators=tuple(args.estimators),
            include_all_strata=getattr(args, "all_strata", False),
            sparql_endpoint=args.sparql_endpoint,
            wiki_api=args.wiki_api,
            rate_limit=args.rate_limit,
            concurrency=args.concurrency,
            classes_file=args.classes_file,
            out_dir=args.out,
            seed=args.seed,
            format=args.format,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _policy(args) -> FetchPolicy:
    try:
        return FetchPolicy(
            max_in_flight=args.concurrency,
            requests_per_second=args.rate_limit,
            retry_limit=args.retries,
            period=(args.period_start, args.period_end),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _require(path: Path | None, flag: str) -> Path:
    if path is None:
        raise ConfigError(f"{flag} is required")
    if not path.exists():
        raise FileNotFoundError(f"{flag}: {path} does not exist")
    return path


def _write_meta(cfg: RunConfig, command: str, extra: dict) -> None:
    meta = {
        "tool": "kbcompleteness",
        "version": __version__,
        "command": command,
        "generated_at": format_timestamp(datetime.now(timezone.utc)),
        "config": cfg.as_dict(),
        **extra,
    }
    with open_text(Path(cfg.out_dir) / "run-meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _allow_list(args) -> set[str] | None:
    if args.classes_file is None:
        return None
    with open(_require(args.classes_file, "--classes-file"), encoding="utf-8") as fh:
        return load_class_allow_list(fh)


def cmd_fetch_classes(args) -> int:
    policy = _policy(args)
    classes = fetch_person_subclasses(args.sparql_endpoint, policy, depth=args.depth)
    allow = _allow_list(args)
    if allow is not None:
        classes = [c for c in classes if c.class_id in allow]
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "classes.ndjson"
    with open_text(path, "w") as fh:
        for c in classes:
            fh.write(json.dumps({"class": c.class_id, "label": c.label, "uri": c.uri}, ensure_ascii=False, separators=(",", ":")) + "\n")
    print(f"{len(classes)} classes -> {path}")
    return EXIT_OK


def _read_classes(args) -> list[ClassDescriptor]:
    allow = _allow_list(args)
    if args.classes is not None:
        out = []
        with open(_require(args.classes, "--classes"), encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    out.append(ClassDescriptor(obj["class"], obj.get("label", obj["class"]), obj.get("uri", "")))
                except (ValueError, KeyError) as exc:
                    raise DatasetError(f"bad class record: {exc}", lineno=lineno) from None
        if allow is not None:
            out = [c for c in out if c.class_id in allow]
        return out
    if allow is None:
        raise ConfigError("fetch-instances needs --classes or --classes-file")
    return [ClassDescriptor(c, c) for c in sorted(allow)]


def cmd_fetch_instances(args) -> int:
    policy = _policy(args)
    client = HttpClient(policy)
    instances = {}
    for c in _read_classes(args):
        instances[c.class_id] = fetch_class_instances(args.sparql_endpoint, c, policy, page_size=args.page_size, client=client)
        logger.info("%s: %d instances", c.class_id, len(instances[c.class_id]))
    registry = build_registry(instances)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.registry or args.out / "registry.ndjson"
    with open_text(path, "w") as fh:
        write_registry(registry, fh)
    print(f"{len(registry)} entities over {len(instances)} classes -> {path}")
    return EXIT_OK


def cmd_fetch_edits(args) -> int:
    policy = _policy(args)
    with open(_require(args.registry, "--registry"), "rb") as fh:
        registry = load_registry(fh)
    path = args.edits or args.out / "edits.ndjson"
    existing = []
    if path.exists():
        with open(path, "rb") as fh:
            existing = load_edits(fh).records
    todo = sorted(registry)
    if args.resume:
        have = {r.entity_id for r in existing}
        todo = [e for e in todo if e not in have]
    result = fetch_edit_histories(args.wiki_api, registry, policy, entity_ids=todo)
    merged = merge_edits(existing, result.records)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open_text(tmp, "w") as fh:
        write_edits(merged, fh)
    os.replace(tmp, path)
    print(f"{len(merged)} edits ({len(result.missing)} missing articles, {len(result.failed)} failures) -> {path}")
    if result.missing:
        logger.warning("missing articles: %s", ", ".join(result.missing[:20]))
    return EXIT_NETWORK if result.failed else EXIT_OK


def cmd_classify(args) -> int:
    cfg_tau = ClassifierConfig(args.tau) if 0 <= args.tau < 0.5 else None
    if cfg_tau is None:
        raise ConfigError(f"--tau must lie in [0, 0.5), got {args.tau}")
    with open(_require(args.registry, "--registry"), "rb") as fh:
        registry = load_registry(fh)
    with open(_require(args.dictionary, "--dictionary"), "rb") as fh:
        dictionary = load_name_dictionary(fh)
    classified = classify_registry(registry, dictionary, cfg_tau)
    args.out.mkdir(parents=True, exist_ok=True)
    reg_path = args.out / "registry.ndjson"
    with open_text(reg_path, "w") as fh:
        write_registry(classified, fh)
    with open_text(args.out / "distribution.csv", "w") as fh:
        write_distribution_csv(gender_distribution(classified), fh)
    print(f"{len(classified)} entities classified -> {reg_path}, {args.out / 'distribution.csv'}")
    return EXIT_OK


def _stratum(args, registry) -> Stratum:
    stratum = Stratum(args.class_id, args.gender)
    if args.class_id not in registry.class_ids():
        raise ConfigError(f"unknown stratum {stratum}: class not in registry")
    return stratum


def cmd_estimate(args) -> int:
    cfg = _config(args)
    registry, events = cfg.load()
    stratum = _stratum(args, registry)
    inc = bin_incidence(events, registry, cfg.window_spec(), stratum)
    fs = frequency_stats(inc)
    rows = []
    for est_id in cfg.estimators:
        try:
            est = estimate(fs, est_id, stratum)
            value = est.value if est.defined else None
        except EstimationError:
            value = None
        conv = None
        if value is not None:
            try:
                conv = convergence_score(estimate_series(prefix_summaries(inc), est_id), cfg.trailing_fraction).value
            except NoScoreError:
                pass
        rows.append({"class_id": stratum.class_id, "gender": stratum.gender, "estimator": est_id, "K": fs.K,
                     "D": fs.D, "n": fs.n, "f1": fs.f1, "f2": fs.f2, "estimate": value, "convergence": conv})
    if cfg.format == "json":
        json.dump(rows, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _config(args)
    registry, events = cfg.load()
    report = run_report(cfg, registry, events)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.format == "json":
        path = cfg.out_dir / "report.json"
        with open_text(path, "w") as fh:
            write_report_json(report, fh)
    else:
        path = cfg.out_dir / "report.csv"
        with open_text(path, "w") as fh:
            write_report_csv(report, fh)
    with open_text(cfg.out_dir / "distribution.csv", "w") as fh:
        write_distribution_csv(gender_distribution(registry), fh)
    _write_meta(cfg, "report", {"dropped_events": report.dropped_events, "edits": len(events), "entities": len(registry),
                                "final_window_truncated": cfg.window_spec().truncated})
    print(format_report_table(report))
    s = report.summary
    print(f"\nclasses with higher completeness ({s.estimator_id}), male vs female: {s}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    registry, events = cfg.load()
    result = run_sweep(cfg, args.widths, registry, events)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    with open_text(cfg.out_dir / "sweep.csv", "w") as fh:
        write_sweep_csv(result, fh)
    _write_meta(cfg, "sweep", {"widths": list(args.widths), "skipped_widths": result.skipped})
    for r in result.rows:
        score = SENTINEL if r.median_score is None else f"{r.median_score:.6f}"
        print(f"{r.window_days:>4}d  {r.estimator_id}  {score}  ({r.strata_scored} strata)")
    return EXIT_OK


def cmd_series(args) -> int:
    cfg = _config(args)
    registry, events = cfg.load()
    stratum = _stratum(args, registry)
    path = emit_series(cfg, stratum, registry, events)
    _write_meta(cfg, "series", {"stratum": str(stratum)})
    print(path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        dist = PowerLaw(*args.power_law) if args.power_law else Uniform(args.p)
        spec = PopulationSpec(args.N, dist, args.K, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = []
    for est_id in args.estimators:
        summary = evaluate_estimator(spec, est_id, args.trials, args.trailing_fraction)
        for i, r in enumerate(summary.results):
            rows.append({"estimator": est_id, "trial": i, "seed": r.spec.seed, "N": spec.N, "K": spec.K,
                         "D_final": r.D_final, "estimate": r.estimate, "relative_error": r.relative_error,
                         "convergence": r.convergence})
        logger.info("%s: median |rel err| %s", est_id, summary.median_abs_relative_error)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        path = args.out / "simulate.json"
        with open_text(path, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    else:
        path = args.out / "simulate.csv"
        with open_text(path, "w") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v)) for k, v in r.items()})
    print(path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, FileNotFoundError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IngestionError as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_NETWORK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 success, 1 contract violation, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from . import corpus_filter
from .community_dims import (
    DimensionSpec,
    EmbeddingMatrix,
    SGNSParams,
    build_dimension,
    read_cooccurrence,
    score_communities,
    train_embedding,
    write_scores,
)
from .config import CONFIG_ENV, RunConfig
from .counterfactual import Mode, RankMetric, rank_drivers, uniform_scenario
from .metrics import compare
from .panel import (
    CohortFacet,
    ContractViolation,
    Panel,
    TopicFacet,
    assign_cohorts,
    build_panel,
    read_events,
)
from .pipeline import run_pipeline
from .timeseries import DEFAULT_WINDOW, Quarter, TimeSeries

log = logging.getLogger("opiniondrift")

EXIT_OK, EXIT_CONTRACT, EXIT_IO = 0, 1, 2

_MODES = {
    "empirical": Mode.VARY_BOTH,
    "proportion-only": Mode.PROPORTION_ONLY,
    "stance-only": Mode.STANCE_ONLY,
    "fixed": Mode.FIXED,
}


def _num(v, sci: bool = False) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "null"
    if isinstance(v, int):
        return str(v)
    return f"{v:.5e}" if sci else f"{v:.6g}"


def format_report(report) -> str:
    """SimilarityReport as JSON: 6 significant digits, p-value in scientific notation."""
    fields = [
        ("pearson_r", _num(report.pearson_r)),
        ("p_value", _num(report.p_value, sci=True)),
        ("log10_p_value", _num(report.log10_p)),
        ("euclidean", _num(report.euclidean)),
        ("dtw", _num(report.dtw)),
        ("l1_loss", _num(report.l1_loss)),
        ("n", _num(report.n)),
    ]
    body = ",\n".join(f'  "{k}": {v}' for k, v in fields)
    return "{\n" + body + "\n}"


def _parse_window(text: str | None):
    if text is None:
        return DEFAULT_WINDOW
    if text.lower() == "none":
        return None
    start, _, end = text.partition(":")
    return Quarter.parse(start), Quarter.parse(end)


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


# -- subcommands ------------------------------------------------------------

def cmd_filter(args) -> int:
    counts = corpus_filter.filter_file(args.input, args.output, args.stats)
    log.info("kept %d of %d records", counts["Kept"], sum(counts.values()))
    return EXIT_OK


def cmd_panel(args) -> int:
    events = read_events(args.events)
    if args.facet == "topic":
        facet = TopicFacet()
    elif args.facet == "cohort":
        first = None
        if args.first_activity:
            with open(args.first_activity, encoding="utf-8") as fh:
                first = json.load(fh)
        events = assign_cohorts(events, first)
        facet = CohortFacet()
    else:
        from .community_dims import bin_facet, read_scores
        if not args.scores:
            raise ContractViolation("a dimension facet needs --scores")
        facet = bin_facet(read_scores(args.scores), args.facet)
    panel = build_panel(events, facet, args.topic_weighting, avg_mode=args.avg_mode)
    panel.to_csv(args.output)
    return EXIT_OK


def cmd_scenario(args) -> int:
    panel = Panel.from_csv(args.panel)
    renorm = True if args.renormalize else None
    mode = _MODES[args.mode]
    series = uniform_scenario(panel, mode, False if mode is Mode.VARY_BOTH else renorm, name=args.mode)
    if args.output:
        series.to_csv(args.output)
    else:
        print("quarter,value")
        for q, v in zip(series.quarters, series.values):
            print(f"{q},{'' if math.isnan(v) else repr(float(v))}")
    return EXIT_OK


def cmd_rank(args) -> int:
    emp = TimeSeries.from_csv(args.empirical, "empirical")
    scenarios = []
    for item in args.scenario:
        name, sep, path = item.partition("=")
        if not sep:
            raise ContractViolation(f"--scenario expects name=path, got {item!r}")
        scenarios.append((name, TimeSeries.from_csv(path, name)))
    report = rank_drivers(emp, scenarios, args.metric, _parse_window(args.window))
    _write_or_print(report.to_json(), args.output)
    return EXIT_OK


def cmd_dims_train(args) -> int:
    params = SGNSParams(
        dim=args.dim, negative=args.negative, epochs=args.epochs, min_count=args.min_count,
        batch_size=args.batch_size, seed=args.seed,
    )
    result = train_embedding(read_cooccurrence(args.cooccurrence), params)
    if result.dropped_communities or result.dropped_authors:
        log.warning("dropped %d communities and %d authors below min_count",
                    len(result.dropped_communities), len(result.dropped_authors))
    result.embedding.save_text(args.output)
    return EXIT_OK


def cmd_dims_score(args) -> int:
    emb = EmbeddingMatrix.load_text(args.embedding)
    pairs = []
    for item in args.pair:
        neg, sep, pos = item.partition(",")
        if not sep:
            raise ContractViolation(f"--pair expects negative,positive; got {item!r}")
        pairs.append((neg, pos))
    vec = build_dimension(emb, DimensionSpec(args.name, tuple(pairs)))
    write_scores(score_communities(emb, vec), args.output)
    return EXIT_OK


def cmd_compare(args) -> int:
    a = TimeSeries.from_csv(args.a)
    b = TimeSeries.from_csv(args.b)
    print(format_report(compare(a, b)))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    report = run_pipeline(cfg)
    log.info("wrote %d driver rows to %s", len(report.rows), cfg.output_dir)
    return EXIT_OK


def cmd_report(args) -> int:
    if args.run_dir:
        path = f"{args.run_dir}/driver_report.json"
    else:
        path = f"{RunConfig.load(args.config).output_dir}/driver_report.json"
    with open(path, encoding="utf-8") as fh:
        rows = json.load(fh)
    print(f"{'Varying Property':<28}{'Pearson r':>10}{'p-value':>12}{'Loss':>9}{'Euclid':>9}{'DTW':>9}")
    for row in rows:
        r = "-" if row["pearson_r"] is None else f"{row['pearson_r']:.3f}"
        p = "-" if row["p_value"] is None else f"{row['p_value']:.3e}"
        print(f"{row['scenario']:<28}{r:>10}{p:>12}{row['l1_loss']:>9.3f}{row['euclidean']:>9.3f}{row['dtw']:>9.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opiniondrift", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--seed", type=int, default=None, help="deterministic seed (u64)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="apply keyword and exclusion rules to a JSONL dump")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--stats")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("panel", help="aggregate labeled events into a panel CSV")
    p.add_argument("--events", required=True)
    p.add_argument("--facet", required=True, help="topic, cohort or a dimension name")
    p.add_argument("--scores", help="community scores CSV for dimension facets")
    p.add_argument("--first-activity", help="JSON mapping author -> first-comment year")
    p.add_argument("--topic-weighting", choices=["fractional", "occurrence"], default="fractional")
    p.add_argument("--avg-mode", choices=["quarterly", "pooled"], default="quarterly")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_panel)

    p = sub.add_parser("scenario", help="evaluate a uniform counterfactual over a panel")
    p.add_argument("--panel", required=True)
    p.add_argument("--mode", choices=sorted(_MODES), required=True)
    p.add_argument("--renormalize", action="store_true")
    p.add_argument("--output")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("rank", help="rank scenarios against the empirical series")
    p.add_argument("--empirical", required=True)
    p.add_argument("--scenario", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--metric", choices=[m.value for m in RankMetric], default="l1_loss")
    p.add_argument("--window", help="START:END such as 2014Q1:2022Q2, or 'none'")
    p.add_argument("--output")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("dims", help="community embeddings and social dimensions")
    dsub = p.add_subparsers(dest="dims_command", required=True)
    t = dsub.add_parser("train")
    t.add_argument("--cooccurrence", required=True, help="CSV community,author,count")
    t.add_argument("--output", required=True)
    t.add_argument("--dim", type=int, default=150)
    t.add_argument("--negative", type=int, default=5)
    t.add_argument("--epochs", type=int, default=5)
    t.add_argument("--min-count", type=int, default=1)
    t.add_argument("--batch-size", type=int, default=32)
    t.set_defaults(func=cmd_dims_train)
    s = dsub.add_parser("score")
    s.add_argument("--embedding", required=True)
    s.add_argument("--name", required=True)
    s.add_argument("--pair", action="append", required=True, metavar="NEG,POS")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_dims_score)

    p = sub.add_parser("compare", help="similarity report between two series CSVs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("run", help="full pipeline from a JSON config")
    p.add_argument("--config", help=f"defaults to ${CONFIG_ENV}")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="print the driver table of a finished run")
    p.add_argument("--run-dir")
    p.add_argument("--config")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    if args.seed is None:
        args.seed = 0 if args.command != "run" else None
    try:
        return args.func(args)
    except (ContractViolation, KeyError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONTRACT
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

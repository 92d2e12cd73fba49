"""End-to-end run: filter, panels, scenarios, ranking, dimension scores."""

from __future__ import annotations

import csv
import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path

from . import corpus_filter, plotdata
from .community_dims import (
    DimensionSpec,
    EmbeddingMatrix,
    bin_facet,
    build_dimension,
    read_cooccurrence,
    score_communities,
    train_embedding,
    write_scores,
)
from .config import RunConfig
from .counterfactual import DriverReport, empirical, has_absences, proportion_only, rank_drivers, stance_only
from .panel import (
    CohortFacet,
    CommentEvent,
    ContractViolation,
    TopicFacet,
    assign_cohorts,
    build_panel,
    overall_series,
    time_averages,
)
from .timeseries import Quarter, TimeSeries

log = logging.getLogger(__name__)

FACET_TITLES = {"topic": "Subtopic", "cohort": "Cohort"}
PARTIAL_MARKER = ".partial"
LOCK_FILE = ".lock"


class RunLocked(OSError):
    pass


@contextmanager
def _locked(out: Path):
    lock = out / LOCK_FILE
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RunLocked(f"{out} is locked by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def facet_title(name: str) -> str:
    return FACET_TITLES.get(name, name.capitalize())


def _load_events(cfg: RunConfig, out: Path) -> list[CommentEvent]:
    with open(cfg.input, encoding="utf-8") as fh:
        records = list(corpus_filter.iter_jsonl(fh))
    if cfg.prefiltered:
        kept = [r for r in records if r is not None]
        counts = corpus_filter.empty_counts()
        counts[corpus_filter.Reason.KEPT.value] = len(kept)
        counts[corpus_filter.Reason.MALFORMED_INPUT.value] = len(records) - len(kept)
    else:
        kept, counts = corpus_filter.filter_records(records)
    corpus_filter.write_jsonl(kept, out / "filtered.jsonl")
    corpus_filter.write_stats(counts, out / "filter_stats.json")
    return [CommentEvent.from_record(r) for r in kept]


def _embedding(cfg: RunConfig, out: Path) -> EmbeddingMatrix:
    if cfg.embedding:
        return EmbeddingMatrix.load_text(cfg.embedding)
    if cfg.cooccurrence:
        result = train_embedding(read_cooccurrence(cfg.cooccurrence), cfg.sgns_params())
        result.embedding.save_text(out / "dims" / "embedding.txt")
        return result.embedding
    raise ContractViolation("dimension facets need an embedding file or a co-occurrence table")


def _write_report_table(report: DriverReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["Varying Property", "Pearson r", "p-value", "Loss", "Euclidean Distance", "DTW"])
        for row in sorted(report.rows, key=lambda r: r.rank):
            writer.writerow([
                row.scenario,
                "" if row.pearson_r is None else f"{row.pearson_r:.3f}",
                "" if row.p_value is None else f"{row.p_value:.3e}",
                f"{row.l1_loss:.3f}",
                f"{row.euclidean:.3f}",
                f"{row.dtw:.3f}",
            ])


def _run(cfg: RunConfig, out: Path) -> DriverReport:
    for sub in ("panels", "series", "plotdata", "dims"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")

    events = _load_events(cfg, out)
    first_activity = None
    if cfg.first_activity:
        first_activity = json.loads(Path(cfg.first_activity).read_text(encoding="utf-8"))
    events = assign_cohorts(events, first_activity)

    facets = {"topic": TopicFacet(), "cohort": CohortFacet()}
    dim_names = [f for f in cfg.facets if f in cfg.dimensions]
    if dim_names:
        emb = _embedding(cfg, out)
        for name in dim_names:
            vec = build_dimension(emb, DimensionSpec(name, tuple(tuple(p) for p in cfg.dimensions[name])))
            scores = score_communities(emb, vec)
            write_scores(scores, out / "dims" / f"{name}_scores.csv")
            facets[name] = bin_facet(scores, name)

    overall = overall_series(events)
    overall.to_csv(out / "series" / "overall.csv")
    plotdata.write_series_table(out / "plotdata" / "overall_stance.csv", {"stance": overall})
    if cfg.svg and len(overall):
        plotdata.write_svg(out / "plotdata" / "overall_stance.csv")

    emp = None
    scenarios: list[tuple[str, TimeSeries]] = []
    for name in cfg.facets:
        panel = build_panel(events, facets[name], cfg.topic_weighting, quarters=overall.quarters, avg_mode=cfg.avg_mode)
        panel.to_csv(out / "panels" / f"{name}.csv")
        if panel.empty:
            continue
        averages = time_averages(panel)
        renorm = has_absences(panel) if cfg.renormalize is None else cfg.renormalize
        rows = {
            "actual": empirical(panel),
            "proportion_only": proportion_only(panel, renorm, averages),
            "stance_only": stance_only(panel, renorm, averages),
        }
        for key, series in rows.items():
            series.to_csv(out / "series" / f"{name}_{'empirical' if key == 'actual' else key}.csv")
        if emp is None:
            emp = rows["actual"]
        title = facet_title(name)
        scenarios.append((f"{title} Proportion", rows["proportion_only"]))
        scenarios.append((f"{title} Stance", rows["stance_only"]))

        plot = out / "plotdata"
        plotdata.write_group_table(plot / f"{name}_proportions.csv", panel, "proportion")
        plotdata.write_group_table(plot / f"{name}_stances.csv", panel, "mean_stance")
        plotdata.write_scenario_grid(plot / f"{name}_grid.csv", panel, rows, renorm, averages)
        if cfg.svg:
            plotdata.write_svg(plot / f"{name}_proportions.csv", "stacked")
            plotdata.write_svg(plot / f"{name}_stances.csv")

    report = DriverReport([], window=cfg.window_quarters)
    if emp is not None:
        window = cfg.window_quarters
        usable = [(n, s) for n, s in scenarios if _shared(emp, s, window) >= 2]
        if usable:
            report = rank_drivers(emp, usable, cfg.rank_metric, window)
    report.write(out / "driver_report.json")
    _write_report_table(report, out / "driver_report.csv")
    return report


def _shared(a: TimeSeries, b: TimeSeries, window: tuple[Quarter, Quarter]) -> int:
    da, db = a.window(*window).as_dict(), b.window(*window).as_dict()
    return len(da.keys() & db.keys())


def run_pipeline(cfg: RunConfig) -> DriverReport:
    """Run every stage, writing artifacts under ``cfg.output_dir``.

    On failure a ``.partial`` marker is left next to whatever was written
    and the exception propagates.
    """
    cfg.check_files()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _locked(out):
        marker = out / PARTIAL_MARKER
        marker.write_text("run in progress or failed\n", encoding="utf-8")
        report = _run(cfg, out)
        marker.unlink()
    return report


"""End-to-end estimation: filter, families, labels, spans, instrument, fits."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .diagnostics import DiagnosticReport, balance_test, waiting_time_check
from .estimator import CLUSTER_CHOICES, EstimateReport, FitSpec, fit_ols, fit_tsls
from .family import FamilyPartition, build_partition, coverage, flag_agencies
from .ingest import CallRecord, filter_calls, filter_stages, label_recontact
from .instrument import InstrumentVector, build_instrument
from .panel import DEFAULT_WINDOW_MINUTES, DesignMatrix, TimeSpanIndex, assign_spans, build_design


@dataclass(frozen=True)
class PipelineConfig:
    outcome: str = "recontact"
    score: str = "csat"
    horizon_hours: int = 24
    window_minutes: int = DEFAULT_WINDOW_MINUTES
    cluster: str = "two-way"
    agency_threshold: int = 25
    queue: str | None = None
    origin: int | None = None
    censor_guard: bool = True
    cluster_window_minutes: int | None = None
    instrument_time_effects: bool = True
    instrument_baseline: bool = True
    time_effects: bool = True

    @property
    def cluster_factors(self) -> tuple[str, ...]:
        try:
            return CLUSTER_CHOICES[self.cluster]
        except KeyError:
            raise ValueError(f"unknown cluster choice {self.cluster!r}") from None


@dataclass
class Prepared:
    calls: list[CallRecord]
    partition: FamilyPartition
    agencies: set[str]
    spans: TimeSpanIndex
    design: DesignMatrix
    stages: dict[str, int]
    coverage: dict[str, float]


@dataclass
class EstimationResult:
    ols: EstimateReport
    tsls: EstimateReport
    instrument: InstrumentVector
    prepared: Prepared
    diagnostics: list[DiagnosticReport] = field(default_factory=list)

    def counts(self) -> dict:
        return {**self.prepared.stages, **self.prepared.design.counts,
                "instrument_dropped": len(self.instrument.dropped_rows)}


def prepare(records: Sequence[CallRecord], cfg: PipelineConfig = PipelineConfig()) -> Prepared:
    stages = filter_stages(records)
    calls = filter_calls(records)
    # transferred and abandoned calls are not estimation rows, but they are
    # still evidence that the customer came back
    reachable = [c for c in records if c.customer_id or c.phone]
    partition = build_partition(reachable)
    agencies = flag_agencies(partition, cfg.agency_threshold)
    labels = None
    if cfg.outcome == "recontact":
        keep = {c.call_id for c in calls}
        labels = [lab for lab in label_recontact(reachable, partition, cfg.horizon_hours)
                  if lab.call_id in keep]
    spans = assign_spans(calls, cfg.window_minutes, cfg.origin)
    rows = calls
    if cfg.queue is not None:
        rows = [c for c in calls if c.queue_id == cfg.queue]
        if labels is not None:
            kept = {c.call_id for c in rows}
            labels = [lab for lab in labels if lab.call_id in kept]
        stages["queue"] = len(rows)
    end = max((c.start_time for c in reachable), default=None) if cfg.censor_guard else None
    design = build_design(rows, labels, spans, partition, outcome=cfg.outcome, score=cfg.score,
                          agency_families=agencies, observation_end=end,
                          cluster_window_minutes=cfg.cluster_window_minutes)
    return Prepared(calls, partition, agencies, spans, design, stages, coverage(records))


def estimate(prepared: Prepared, cfg: PipelineConfig = PipelineConfig()) -> EstimationResult:
    design = prepared.design
    absorb = ("span",) if cfg.time_effects else ()
    iv = build_instrument(design, time_effects=cfg.instrument_time_effects and cfg.time_effects,
                          baseline=cfg.instrument_baseline)
    clusters = cfg.cluster_factors
    ols_rep = fit_ols(design, FitSpec("OLS", absorb=absorb, cluster=clusters))
    tsls_rep = fit_tsls(design, iv, FitSpec("TSLS", absorb=absorb, cluster=clusters))
    return EstimationResult(ols_rep, tsls_rep, iv, prepared)


def diagnose(prepared: Prepared, cfg: PipelineConfig = PipelineConfig()) -> list[DiagnosticReport]:
    """Waiting-time models and balance tests, each with and without span controls."""
    design = prepared.design
    out = []
    for tc in (False, True):
        out.append(waiting_time_check(design, with_time_controls=tc))
    for tc in (False, True):
        out.append(balance_test(design, "sat", tc))
        iv = build_instrument(design, time_effects=tc, baseline=cfg.instrument_baseline)
        out.append(balance_test(design, "z", tc, instrument=iv))
    return out


def run(records: Sequence[CallRecord], cfg: PipelineConfig = PipelineConfig(),
        diagnostics: bool = False) -> EstimationResult:
    prepared = prepare(records, cfg)
    result = estimate(prepared, cfg)
    if diagnostics:
        result.diagnostics = diagnose(prepared, cfg)
    return result


def with_(cfg: PipelineConfig, **changes) -> PipelineConfig:
    return replace(cfg, **changes)

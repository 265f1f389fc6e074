"""Estimation panels: time spans, covariate encoding and the design matrix."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO, Mapping, Sequence

import numpy as np

from .family import FamilyPartition
from .ingest import CallRecord, OutcomeLabel

DEFAULT_WINDOW_MINUTES = 20
CATEGORICAL = ("market", "ffp_tier")
NUMERIC = ("log_hours_from_last_call", "bookings_past_12m")
BASELINE = CATEGORICAL + NUMERIC
SCORES = ("csat", "fcr")


def midnight(epoch: int) -> int:
    return epoch - epoch % 86400


@dataclass(frozen=True)
class TimeSpanIndex:
    window_minutes: int
    origin: int
    span_of: Mapping[str, int]

    @property
    def n_nonempty(self) -> int:
        return len(set(self.span_of.values()))

    @property
    def mean_calls_per_span(self) -> float:
        k = self.n_nonempty
        return len(self.span_of) / k if k else 0.0


def span_ordinals(times: np.ndarray, window_minutes: int, origin: int) -> np.ndarray:
    """``floor((t - origin) / window)`` on integer seconds."""
    if window_minutes <= 0:
        raise ValueError("window_minutes must be positive")
    times = np.asarray(times, dtype=np.int64)
    if times.size and times.min() < origin:
        raise ValueError("call starts before the span origin")
    return (times - origin) // (window_minutes * 60)


def assign_spans(calls: Sequence[CallRecord], window_minutes: int = DEFAULT_WINDOW_MINUTES,
                 origin: int | None = None) -> TimeSpanIndex:
    """Half-open spans ``[origin + k*w, origin + (k+1)*w)``.

    ``origin`` defaults to midnight UTC of the earliest call.
    """
    times = np.fromiter((c.start_time for c in calls), dtype=np.int64, count=len(calls))
    if origin is None:
        origin = midnight(int(times.min())) if times.size else 0
    early = [c.call_id for c in calls if c.start_time < origin]
    if early:
        raise ValueError(f"call {early[0]!r} starts before origin {origin}")
    ords = span_ordinals(times, window_minutes, origin)
    return TimeSpanIndex(window_minutes, origin,
                         {c.call_id: int(k) for c, k in zip(calls, ords)})


@dataclass
class DesignMatrix:
    y: np.ndarray
    sat: np.ndarray
    w: np.ndarray
    w_names: list[str]
    span_ids: np.ndarray
    agent_ids: np.ndarray
    cluster_a: np.ndarray
    cluster_t: np.ndarray
    call_ids: np.ndarray
    waiting_time: np.ndarray
    start_time: np.ndarray
    agent_labels: list[str] = field(default_factory=list)
    reference_levels: dict[str, str] = field(default_factory=dict)
    outcome: str = ""
    score: str = ""
    counts: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_spans(self) -> int:
        return int(np.unique(self.span_ids).size)

    def factor(self, name: str) -> np.ndarray:
        if name in ("span", "time_span"):
            return self.span_ids
        if name == "agent":
            return self.agent_ids
        raise KeyError(f"unknown factor {name!r}")

    def cluster(self, name: str) -> np.ndarray:
        if name == "agent":
            return self.cluster_a
        if name in ("time", "span"):
            return self.cluster_t
        raise KeyError(f"unknown cluster factor {name!r}")

    def subset(self, mask: np.ndarray) -> "DesignMatrix":
        """Row subset; factor ids are re-densified, column names kept."""
        mask = np.asarray(mask, dtype=bool)
        return replace(
            self,
            y=self.y[mask], sat=self.sat[mask], w=self.w[mask],
            span_ids=_dense(self.span_ids[mask]),
            agent_ids=self.agent_ids[mask],
            cluster_a=_dense(self.cluster_a[mask]),
            cluster_t=_dense(self.cluster_t[mask]),
            call_ids=self.call_ids[mask],
            waiting_time=self.waiting_time[mask],
            start_time=self.start_time[mask],
            counts={**self.counts, "rows": int(mask.sum())},
        )

    def with_outcome(self, y: np.ndarray, name: str) -> "DesignMatrix":
        return replace(self, y=np.asarray(y, dtype=float), outcome=name)

    def to_csv(self, out: IO[str]) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["call_id", "y", "sat", *self.w_names, "span_id", "agent_id",
                         "cluster_a", "cluster_t"])
        for i in range(len(self)):
            writer.writerow([self.call_ids[i], repr(float(self.y[i])), repr(float(self.sat[i])),
                             *(repr(float(v)) for v in self.w[i]),
                             int(self.span_ids[i]), self.agent_labels[self.agent_ids[i]],
                             int(self.cluster_a[i]), int(self.cluster_t[i])])


def _dense(ids: np.ndarray) -> np.ndarray:
    return np.unique(ids, return_inverse=True)[1].astype(np.int64)


def _reference(values: Sequence[str]) -> str:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, k in counts.items() if k == top)


def available_outcomes(calls: Sequence[CallRecord]) -> list[str]:
    names = {"recontact"}
    for c in calls:
        names.update(c.outcome_flags)
    return sorted(names)


def build_design(
    calls: Sequence[CallRecord],
    labels: Sequence[OutcomeLabel] | Mapping[str, bool] | None,
    spans: TimeSpanIndex,
    partition: FamilyPartition | None = None,
    outcome: str = "recontact",
    score: str = "csat",
    agency_families: set[str] | frozenset[str] = frozenset(),
    observation_end: int | None = None,
    covariates: Sequence[str] = BASELINE,
    cluster_window_minutes: int | None = None,
) -> DesignMatrix:
    """Assemble the estimation sample.

    Rows are surveyed calls with a score, outside agency families, with all
    selected covariates present. For the recontact outcome, calls whose
    horizon extends past ``observation_end`` are excluded as right-censored.
    Categorical covariates are one-hot encoded against their most frequent
    level (ties go to the alphabetically first level).
    """
    if score not in SCORES:
        raise ValueError(f"score must be one of {SCORES}, got {score!r}")
    unknown = set(covariates) - set(BASELINE)
    if unknown:
        raise ValueError(f"unknown covariates {sorted(unknown)}")

    horizon = None
    if outcome == "recontact":
        if labels is None:
            raise ValueError("recontact outcome needs labels")
        if isinstance(labels, Mapping):
            label_of = dict(labels)
        else:
            label_of = {lab.call_id: lab.recontact for lab in labels}
            horizon = labels[0].horizon_hours if len(labels) else None
    else:
        known = available_outcomes(calls)
        if outcome not in known:
            raise KeyError(f"unknown outcome {outcome!r}; available: {', '.join(known)}")

    counts = Counter()
    rows: list[CallRecord] = []
    y: list[float] = []
    for c in calls:
        counts["calls"] += 1
        if not c.surveyed:
            continue
        counts["surveyed"] += 1
        value = c.csat if score == "csat" else c.fcr
        if value is None:
            continue
        counts["scored"] += 1
        if partition is not None and agency_families:
            if partition.family_of.get(c.call_id) in agency_families:
                continue
        counts["non_agency"] += 1
        if any(isinstance(getattr(c, k), float) and math.isnan(getattr(c, k)) for k in covariates):
            continue
        counts["complete_covariates"] += 1
        if outcome == "recontact":
            if (observation_end is not None and horizon is not None
                    and c.start_time + horizon * 3600 > observation_end):
                continue
            counts["uncensored"] += 1
            yv = label_of[c.call_id]
        else:
            yv = c.outcome_flags.get(outcome)
            if yv is None:
                continue
            counts["outcome_present"] += 1
        rows.append(c)
        y.append(float(yv))

    n = len(rows)
    counts["rows"] = n
    if score == "csat":
        sat = np.array([c.csat / 5.0 for c in rows], dtype=float)
    else:
        sat = np.array([1.0 if c.fcr else 0.0 for c in rows], dtype=float)

    cols: list[np.ndarray] = []
    names: list[str] = []
    refs: dict[str, str] = {}
    for cov in covariates:
        if cov in CATEGORICAL:
            vals = [getattr(c, cov) for c in rows]
            if not vals:
                continue
            ref = _reference(vals)
            refs[cov] = ref
            arr = np.array(vals, dtype=object)
            for level in sorted(set(vals) - {ref}):
                cols.append((arr == level).astype(float))
                names.append(f"{cov}[{level}]")
        else:
            cols.append(np.array([float(getattr(c, cov)) for c in rows], dtype=float))
            names.append(cov)
    w = np.column_stack(cols) if cols else np.zeros((n, 0))

    raw_span = np.array([spans.span_of[c.call_id] for c in rows], dtype=np.int64)
    span_ids = _dense(raw_span) if n else raw_span
    if cluster_window_minutes is None or n == 0:
        cluster_t = span_ids.copy()
    else:
        times = np.array([c.start_time for c in rows], dtype=np.int64)
        cluster_t = _dense(span_ordinals(times, cluster_window_minutes, spans.origin))

    agent_labels = sorted({c.agent_id for c in rows})
    agent_index = {a: i for i, a in enumerate(agent_labels)}
    agent_ids = np.array([agent_index[c.agent_id] for c in rows], dtype=np.int64)

    return DesignMatrix(
        y=np.array(y, dtype=float),
        sat=sat,
        w=w,
        w_names=names,
        span_ids=span_ids,
        agent_ids=agent_ids,
        cluster_a=agent_ids.copy(),
        cluster_t=cluster_t,
        call_ids=np.array([c.call_id for c in rows], dtype=object),
        waiting_time=np.array([c.waiting_time for c in rows], dtype=float),
        start_time=np.array([c.start_time for c in rows], dtype=np.int64),
        agent_labels=agent_labels,
        reference_levels=refs,
        outcome=outcome if horizon is None else f"recontact_{horizon}h",
        score=score,
        counts=dict(counts),
    )

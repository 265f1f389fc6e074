import io

import numpy as np
import pytest

from callcenter_iv import pipeline
from callcenter_iv.family import build_partition
from callcenter_iv.ingest import label_recontact
from callcenter_iv.panel import assign_spans, build_design, span_ordinals

from conftest import T0, call


def tiny_log():
    return [
        call("K1", 0, customer="c1", phone="p1", agent="A1", csat=4, market="CO", tier="D",
             log_hours=1.0, bookings=0),
        call("K2", 600, customer="c1", agent="A2", csat=2, fcr=False, market="PE", tier="D",
             log_hours=0.5, bookings=2),
        call("K3", 1200, customer="c2", agent="A1", csat=5, market="CO", tier="Elite",
             log_hours=2.0, bookings=1),
        call("K4", 1500, customer="c3", agent="A2", surveyed=False),
        call("K5", 3000, customer=None, phone="p1", agent="A1", csat=3, market="CO", tier="D",
             log_hours=0.2, bookings=0),
        call("K6", 3600, customer="c4", agent="A2", csat=0, fcr=False, market="PE", tier="Elite",
             log_hours=3.0, bookings=5),
        call("K7", 4000, customer="c2", agent="A1", transferred=True),
    ]


def test_golden_design():
    cfg = pipeline.PipelineConfig(censor_guard=False)
    d = pipeline.prepare(tiny_log(), cfg).design
    assert list(d.call_ids) == ["K1", "K2", "K3", "K5", "K6"]
    # K5 reaches c1 through the shared phone; the transferred K7 still counts for K3
    assert d.y.tolist() == [1.0, 1.0, 1.0, 0.0, 0.0]
    assert d.sat.tolist() == [0.8, 0.4, 1.0, 0.6, 0.0]
    assert d.w_names == ["market[PE]", "ffp_tier[Elite]", "log_hours_from_last_call",
                         "bookings_past_12m"]
    assert d.w.tolist() == [[0, 0, 1.0, 0], [1, 0, 0.5, 2], [0, 1, 2.0, 1],
                            [0, 0, 0.2, 0], [1, 1, 3.0, 5]]
    assert d.reference_levels == {"market": "CO", "ffp_tier": "D"}
    assert d.span_ids.tolist() == [0, 0, 1, 2, 3]
    assert d.agent_ids.tolist() == [0, 1, 0, 0, 1]
    assert d.agent_labels == ["A1", "A2"]
    assert d.outcome == "recontact_24h"
    buf = io.StringIO()
    d.to_csv(buf)
    assert buf.getvalue().splitlines()[1] == "K1,1.0,0.8,0.0,0.0,1.0,0.0,0,A1,0,0"


def test_fcr_score():
    d = pipeline.prepare(tiny_log(), pipeline.PipelineConfig(score="fcr", censor_guard=False)).design
    assert d.sat.tolist() == [1.0, 0.0, 1.0, 1.0, 0.0]


def test_spans_half_open():
    t = np.array([T0, T0 + 1199, T0 + 1200, T0 + 86400])
    assert span_ordinals(t, 20, T0).tolist() == [0, 0, 1, 72]
    with pytest.raises(ValueError):
        span_ordinals(t, 0, T0)
    with pytest.raises(ValueError):
        span_ordinals(t, 20, T0 + 1)


def test_span_origin_is_midnight():
    idx = assign_spans([call("a", 5000), call("b", 7300)], 60)
    assert idx.origin == T0
    assert idx.span_of == {"a": 1, "b": 2}
    assert idx.mean_calls_per_span == 1.0


def test_censoring_guard():
    calls = [call("a", 0), call("b", 80_000), call("c", 90_000)]
    part = build_partition(calls)
    labels = label_recontact(calls, part, 24)
    spans = assign_spans(calls)
    d = build_design(calls, labels, spans, part, observation_end=T0 + 24 * 3600 - 1)
    assert list(d.call_ids) == []
    d = build_design(calls, labels, spans, part, observation_end=T0 + 90_000)
    assert list(d.call_ids) == ["a"]
    assert d.counts["uncensored"] == 1


def test_agency_rows_dropped():
    calls = [call(str(i), i, customer=f"c{i}", phone="shared") for i in range(30)]
    prepared = pipeline.prepare(calls, pipeline.PipelineConfig(censor_guard=False))
    assert len(prepared.design) == 0
    assert prepared.design.counts["scored"] == 30


def test_outcome_flag_and_unknown_outcome():
    calls = [call("a", flags={"claims_7d": True}), call("b", 10, flags={"claims_7d": None})]
    d = pipeline.prepare(calls, pipeline.PipelineConfig(outcome="claims_7d")).design
    assert list(d.call_ids) == ["a"] and d.y.tolist() == [1.0]
    with pytest.raises(KeyError, match="claims_7d"):
        pipeline.prepare(calls, pipeline.PipelineConfig(outcome="nope"))


def test_cluster_window_coarser_than_span():
    calls = [call(str(i), 600 * i, customer=f"c{i}") for i in range(6)]
    cfg = pipeline.PipelineConfig(censor_guard=False, cluster_window_minutes=60)
    d = pipeline.prepare(calls, cfg).design
    assert d.span_ids.tolist() == [0, 0, 1, 1, 2, 2]
    assert d.cluster_t.tolist() == [0, 0, 0, 0, 0, 0]

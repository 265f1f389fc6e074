import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from callcenter_iv.instrument import build_instrument, leave_one_out, residualize
from callcenter_iv import pipeline


def _brute(resid, agents):
    out = np.full(len(resid), np.nan)
    for i in range(len(resid)):
        others = [resid[j] for j in range(len(resid)) if j != i and agents[j] == agents[i]]
        if others:
            out[i] = sum(others) / len(others)
    return out


def test_loo_matches_brute_force(rng):
    resid = rng.normal(size=500)
    agents = rng.integers(0, 40, 500)
    agents[0] = 99  # a singleton
    iv = leave_one_out(resid, agents)
    want = _brute(resid, agents)
    assert np.array_equal(np.isnan(iv.z), np.isnan(want))
    keep = ~np.isnan(want)
    assert np.max(np.abs(iv.z[keep] - want[keep])) <= 1e-12
    assert iv.dropped_rows == [0]
    assert not iv.keep[0]


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_loo_property(data):
    n = data.draw(st.integers(1, 40))
    agents = data.draw(arrays(np.int64, n, elements=st.integers(0, 6)))
    resid = data.draw(arrays(np.float64, n, elements=st.floats(-100, 100)))
    iv = leave_one_out(resid, agents)
    want = _brute(resid, agents)
    keep = ~np.isnan(want)
    assert np.array_equal(iv.keep, keep)
    assert np.allclose(iv.z[keep], want[keep], rtol=0, atol=1e-9)


def test_residuals_orthogonal_to_controls(small_sim):
    d = pipeline.prepare(small_sim.calls, pipeline.PipelineConfig(queue="Q1")).design
    r = residualize(d)
    assert abs(r.sum()) < 1e-8
    assert np.max(np.abs(d.w.T @ r)) < 1e-6
    for s in np.unique(d.span_ids)[:50]:
        assert abs(r[d.span_ids == s].sum()) < 1e-9


def test_instrument_rows_and_counts(small_sim):
    d = pipeline.prepare(small_sim.calls, pipeline.PipelineConfig(queue="Q1")).design
    iv = build_instrument(d)
    assert iv.z.shape == (len(d),)
    assert sum(iv.agent_call_counts.values()) == len(d)
    assert set(iv.agent_call_counts) <= set(d.agent_labels)

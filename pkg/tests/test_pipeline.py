import pytest

from callcenter_iv import montecarlo, pipeline


def test_counts_and_queue_stage(small_sim):
    res = pipeline.run(small_sim.calls, pipeline.PipelineConfig(queue="Q1"))
    counts = res.counts()
    assert counts["parsed"] >= counts["served"] >= counts["not_transferred"] >= counts["identified"]
    assert counts["queue"] < counts["identified"]
    assert counts["rows"] == len(res.prepared.design)
    assert res.tsls.n_obs == counts["rows"] - counts["instrument_dropped"]


def test_without_time_effects(small_sim):
    cfg = pipeline.PipelineConfig(queue="Q1", time_effects=False, cluster="agent")
    res = pipeline.run(small_sim.calls, cfg)
    assert not res.tsls.time_controls
    assert res.tsls.vcov_type == "cluster"


def test_unknown_cluster_choice():
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(cluster="three-way").cluster_factors


def test_montecarlo_plumbing():
    s = montecarlo.run_study(2, base_seed=100, waiting=True, overrides={"horizon_days": 3})
    assert s.n_reps == 2 and [r.seed for r in s.reps] == [100, 101]
    assert s.beta_true == -0.65
    assert 0 <= s.coverage <= 1
    assert set(s.to_dict()) >= {"tsls_mean", "ols_mcse", "wait_reject_1pct_no_spans"}
    again = montecarlo.replicate(100, overrides={"horizon_days": 3})
    assert again.tsls == s.reps[0].tsls
    with pytest.raises(ValueError):
        montecarlo.run_study(1)

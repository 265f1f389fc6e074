"""Repeated simulate-and-estimate runs with bias, coverage and rejection summaries."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import pipeline, simulator
from .diagnostics import waiting_time_check


@dataclass
class Replication:
    seed: int
    ols: float
    ols_se: float
    tsls: float
    tsls_se: float
    covered: bool
    first_stage_F: float
    n_obs: int
    wait_p: tuple[float, float] | None = None  # without, with span controls
    seconds: float = 0.0


@dataclass
class Summary:
    beta_true: float
    n_reps: int
    ols_mean: float
    ols_mcse: float
    tsls_mean: float
    tsls_mcse: float
    tsls_sd: float
    coverage: float
    mean_first_stage_F: float
    wait_reject_1pct_no_spans: float | None
    wait_accept_10pct_spans: float | None
    seconds: float
    reps: list[Replication] = field(default_factory=list, repr=False)

    @property
    def tsls_bias_in_mcse(self) -> float:
        return (self.tsls_mean - self.beta_true) / self.tsls_mcse

    @property
    def ols_attenuation_in_mcse(self) -> float:
        """Positive when the OLS mean is closer to zero than the truth."""
        return (abs(self.beta_true) - abs(self.ols_mean)) / self.ols_mcse

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("reps")
        return out


def replicate(seed: int, preset: str = "multiqueue_bias", cfg: pipeline.PipelineConfig | None = None,
              waiting: bool = True, overrides: dict | None = None) -> Replication:
    t0 = time.perf_counter()
    sim_cfg = simulator.PRESETS[preset](seed, **(overrides or {}))
    cfg = cfg or pipeline.PipelineConfig(queue=sim_cfg.queues[0].queue_id)
    sim = simulator.run(sim_cfg)
    prepared = pipeline.prepare(sim.calls, cfg)
    res = pipeline.estimate(prepared, cfg)
    beta = sim_cfg.beta_true
    wait_p = None
    if waiting:
        wait_p = tuple(waiting_time_check(prepared.design, tc).p_value for tc in (False, True))
    return Replication(
        seed=seed, ols=res.ols.coef, ols_se=res.ols.se, tsls=res.tsls.coef, tsls_se=res.tsls.se,
        covered=res.tsls.ci_low <= beta <= res.tsls.ci_high,
        first_stage_F=res.tsls.first_stage_F, n_obs=res.tsls.n_obs, wait_p=wait_p,
        seconds=time.perf_counter() - t0,
    )


def _one(args):
    return replicate(*args)


def summarize(reps: Sequence[Replication], beta_true: float, seconds: float = 0.0) -> Summary:
    ols = np.array([r.ols for r in reps])
    tsls = np.array([r.tsls for r in reps])
    n = len(reps)
    waits = [r.wait_p for r in reps if r.wait_p is not None]
    return Summary(
        beta_true=beta_true, n_reps=n,
        ols_mean=float(ols.mean()), ols_mcse=float(ols.std(ddof=1) / math.sqrt(n)),
        tsls_mean=float(tsls.mean()), tsls_mcse=float(tsls.std(ddof=1) / math.sqrt(n)),
        tsls_sd=float(tsls.std(ddof=1)),
        coverage=float(np.mean([r.covered for r in reps])),
        mean_first_stage_F=float(np.mean([r.first_stage_F for r in reps])),
        wait_reject_1pct_no_spans=float(np.mean([w[0] < 0.01 for w in waits])) if waits else None,
        wait_accept_10pct_spans=float(np.mean([w[1] > 0.10 for w in waits])) if waits else None,
        seconds=seconds, reps=list(reps),
    )


def run_study(n_reps: int, base_seed: int = 0, preset: str = "multiqueue_bias",
              cfg: pipeline.PipelineConfig | None = None, waiting: bool = True,
              overrides: dict | None = None, workers: int = 1) -> Summary:
    """Replication i uses seed ``base_seed + i``; results do not depend on ``workers``."""
    if n_reps < 2:
        raise ValueError("need at least two replications")
    t0 = time.perf_counter()
    jobs = [(base_seed + i, preset, cfg, waiting, overrides) for i in range(n_reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            reps = list(pool.map(_one, jobs))
    else:
        reps = [_one(j) for j in jobs]
    beta = simulator.PRESETS[preset](base_seed, **(overrides or {})).beta_true
    return summarize(reps, beta, time.perf_counter() - t0)

"""Instrument-validity evidence: waiting-time models and balance tests."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .estimator import LinearFit, ols
from .fixed_effects import demean
from .instrument import InstrumentVector, build_instrument
from .panel import DesignMatrix


@dataclass
class DiagnosticReport:
    test_name: str
    joint_F: float
    p_value: float
    r2_full: float
    r2_restricted: float
    net_variation: float
    n_obs: int
    n_restrictions: int
    df_denominator: int
    time_controls: bool
    vcov_type: str
    per_covariate: list[tuple[str, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def wald_f(coef: np.ndarray, vcov: np.ndarray, df: int,
           n_clusters: int | None = None) -> tuple[float, float, int]:
    """Joint test that every element of ``coef`` is zero.

    Returns (F, p-value, number of restrictions). A singular covariance is
    handled with its pseudo-inverse and the restriction count drops to its
    rank.

    With ``n_clusters`` set, the Wald statistic is scaled by (G - q)/(G - 1)
    and referred to F(q, G - q), the Hotelling T-squared approximation. The
    plain F(q, G - 1) reference over-rejects badly once q is a sizeable
    fraction of G.
    """
    q = coef.size
    if q == 0 or not np.any(coef):
        return 0.0, 1.0, q
    vals, vecs = np.linalg.eigh((vcov + vcov.T) / 2)
    keep = vals > vals.max() * 1e-12 if vals.max() > 0 else np.zeros_like(vals, dtype=bool)
    rank = int(keep.sum())
    if rank == 0:
        return float("inf"), 0.0, q
    proj = vecs[:, keep].T @ coef
    stat = float(np.sum(proj ** 2 / vals[keep])) / rank
    if n_clusters is not None:
        if n_clusters <= rank:
            raise ValueError(f"{n_clusters} clusters cannot support a joint test of {rank} restrictions")
        stat *= (n_clusters - rank) / (n_clusters - 1)
        df = n_clusters - rank
    return stat, float(stats.f.sf(stat, rank, df)), rank


def _r2(y: np.ndarray, resid_full: np.ndarray, resid_restricted: np.ndarray) -> tuple[float, float]:
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0:
        return 0.0, 0.0
    return (1 - float(resid_full @ resid_full) / tss,
            1 - float(resid_restricted @ resid_restricted) / tss)


def _report(name: str, fit: LinearFit, y: np.ndarray, restricted: np.ndarray,
            time_controls: bool, per_cov: bool) -> DiagnosticReport:
    if np.ptp(y) == 0:
        f, p, q = 0.0, 1.0, fit.coef.size
        df = fit.df
    else:
        g = min(fit.vcov.n_clusters) if fit.vcov.n_clusters else None
        f, p, q = wald_f(fit.coef, fit.vcov.matrix, fit.df, g)
        df = fit.df if g is None else g - q
    r2_full, r2_restricted = _r2(y, fit.resid, restricted)
    rows = ([(n, float(c), float(s)) for n, c, s in zip(fit.names, fit.coef, fit.se)]
            if per_cov else [])
    return DiagnosticReport(
        test_name=name, joint_F=f, p_value=p, r2_full=r2_full, r2_restricted=r2_restricted,
        net_variation=r2_full - r2_restricted, n_obs=fit.n, n_restrictions=q,
        df_denominator=df, time_controls=time_controls, vcov_type=fit.vcov.kind,
        per_covariate=rows,
    )


def _restricted_resid(y: np.ndarray, factor: np.ndarray) -> np.ndarray:
    return demean(y, np.unique(factor, return_inverse=True)[1])


def waiting_time_check(design: DesignMatrix, with_time_controls: bool,
                       cluster: Sequence[str] = ("time",)) -> DiagnosticReport:
    """Regress waiting time on agent dummies, optionally absorbing spans.

    The joint F tests that all agent coefficients are zero. Clustering
    defaults to the time factor only: clustering on the agent factor that is
    being tested leaves as many clusters as restrictions.
    """
    counts = np.bincount(design.agent_ids)
    rows = counts[design.agent_ids] >= 2
    if not rows.all():
        design = design.subset(rows)
    agents = np.unique(design.agent_ids)
    if agents.size < 2:
        raise ValueError("waiting-time check needs at least two agents")
    y = design.waiting_time.astype(float)
    n = len(y)
    X = (design.agent_ids[:, None] == agents[None, 1:]).astype(float)
    names = [f"agent[{design.agent_labels[a]}]" for a in agents[1:]]
    factor = design.span_ids if with_time_controls else np.zeros(n, dtype=np.int64)
    fit = ols(y, X, names, [factor], [design.cluster(c) for c in cluster], target=None)
    return _report("waiting_time", fit, y, _restricted_resid(y, factor),
                   with_time_controls, per_cov=False)


def balance_test(design: DesignMatrix, target: str, with_time_controls: bool,
                 instrument: InstrumentVector | None = None,
                 cluster: Sequence[str] = ("agent",)) -> DiagnosticReport:
    """Regress ``sat`` or the instrument ``z`` on the baseline covariates.

    When ``target == "z"`` and no instrument is given, one is built with
    the same time-control choice as the test. Clustering defaults to the
    agent: z is close to constant within an agent, and the two-way
    estimator's cancellations leave near-null directions that inflate a
    joint statistic.
    """
    if target not in ("sat", "z"):
        raise ValueError("target must be 'sat' or 'z'")
    if target == "z":
        if instrument is None:
            instrument = build_instrument(design, time_effects=with_time_controls)
        y = instrument.z[instrument.keep]
        design = design.subset(instrument.keep) if not instrument.keep.all() else design
    else:
        y = design.sat
    n = len(y)
    factor = design.span_ids if with_time_controls else np.zeros(n, dtype=np.int64)
    fit = ols(y, design.w, design.w_names, [factor],
              [design.cluster(c) for c in cluster], target=None)
    return _report(f"balance_{target}", fit, y, _restricted_resid(y, factor),
                   with_time_controls, per_cov=True)

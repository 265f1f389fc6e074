"""OLS and single-instrument 2SLS on absorbed data with robust and
cluster-robust standard errors."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .covariance import Vcov, sandwich
from .fixed_effects import MAX_ITER, TOL, Absorbed, absorb, absorbed_dof
from .instrument import InstrumentVector
from .linalg import RankError, solve_ls  # noqa: F401  (re-exported)
from .panel import DesignMatrix

F_CAP = 1e6
CLUSTER_CHOICES = {
    "none": (),
    "robust": (),
    "agent": ("agent",),
    "time": ("time",),
    "two-way": ("agent", "time"),
}


@dataclass(frozen=True)
class FitSpec:
    method: str = "OLS"
    absorb: tuple[str, ...] = ("span",)
    covariates: tuple[str, ...] | None = None
    cluster: tuple[str, ...] = ("agent", "time")
    weak_f_threshold: float = 10.0

    def __post_init__(self):
        if self.method not in ("OLS", "TSLS"):
            raise ValueError(f"method must be OLS or TSLS, got {self.method!r}")
        if len(self.cluster) > 2:
            raise ValueError("at most two-way clustering")


@dataclass
class LinearFit:
    coef: np.ndarray
    names: list[str]
    vcov: Vcov
    resid: np.ndarray
    n: int
    k: int
    absorbed: Absorbed | None = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov.matrix), 0.0, None))

    @property
    def df(self) -> int:
        return self.vcov.df if self.vcov.df is not None else self.n - self.k


@dataclass
class EstimateReport:
    method: str
    outcome: str
    score: str
    coef: float
    se: float
    t_stat: float
    p_value: float
    ci_low: float
    ci_high: float
    n_obs: int
    n_spans: int
    n_clusters_a: int | None
    n_clusters_t: int | None
    vcov_type: str
    first_stage_F: float | None = None
    first_stage_coef: float | None = None
    first_stage_se: float | None = None
    variance_truncated: bool = False
    absorb_iterations: int = 0
    absorb_delta: float = 0.0
    dropped_rows: int = 0
    time_controls: bool = True
    covariates: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _nested(inner: np.ndarray, outer: np.ndarray) -> bool:
    pairs = np.unique(np.stack([inner, outer], axis=1), axis=0)
    return pairs.shape[0] == np.unique(inner).size


def _fe_dof(factors: Sequence[np.ndarray], clusters: Sequence[np.ndarray]) -> int:
    # absorbed levels nested inside a cluster factor do not cost degrees of freedom
    kept = [f for f in factors if not any(_nested(f, c) for c in clusters)]
    return absorbed_dof(kept)


def ols(y: np.ndarray, X: np.ndarray, names: Sequence[str], factors: Sequence[np.ndarray] = (),
        clusters: Sequence[np.ndarray] = (), target: int | None = 0,
        tol: float = TOL, max_iter: int = MAX_ITER) -> LinearFit:
    """Least squares of ``y`` on ``X`` after absorbing ``factors``.

    With no factors an intercept is absorbed (global demeaning).
    """
    n = len(y)
    factors = list(factors) or [np.zeros(n, dtype=np.int64)]
    ab = absorb(np.column_stack([y, X]), factors, tol, max_iter)
    yt, Xt = ab.data[:, 0], ab.data[:, 1:]
    coef = solve_ls(Xt, yt, names)
    resid = yt - Xt @ coef
    bread = np.linalg.inv(Xt.T @ Xt)
    k = X.shape[1] + _fe_dof(factors, clusters)
    vc = sandwich(bread, Xt * resid[:, None], clusters, k=k, target=target)
    return LinearFit(coef, list(names), vc, resid, n, k, ab)


def tsls(y: np.ndarray, x_endog: np.ndarray, z: np.ndarray, W: np.ndarray,
         names: Sequence[str], factors: Sequence[np.ndarray] = (),
         clusters: Sequence[np.ndarray] = (), tol: float = TOL,
         max_iter: int = MAX_ITER) -> tuple[LinearFit, LinearFit]:
    """Just-identified 2SLS; returns (second stage, first stage).

    The second-stage variance is the IV sandwich built from the fitted
    regressors and the structural residuals ``y - X b``.
    """
    n = len(y)
    factors = list(factors) or [np.zeros(n, dtype=np.int64)]
    W = W.reshape(n, -1)
    ab = absorb(np.column_stack([y, x_endog, z, W]), factors, tol, max_iter)
    yt, xt, zt, Wt = ab.data[:, 0], ab.data[:, 1], ab.data[:, 2], ab.data[:, 3:]
    X = np.column_stack([xt, Wt])
    Z = np.column_stack([zt, Wt])
    fe_k = _fe_dof(factors, clusters)
    k = X.shape[1] + fe_k

    z_names = ["instrument", *names[1:]]
    pi = solve_ls(Z, xt, z_names)
    first_resid = xt - Z @ pi
    first_vc = sandwich(np.linalg.inv(Z.T @ Z), Z * first_resid[:, None], clusters, k=k)
    first = LinearFit(pi, z_names, first_vc, first_resid, n, k, ab)

    Xhat = np.column_stack([Z @ pi, Wt])
    coef = solve_ls(Xhat, yt, names)
    resid = yt - X @ coef
    vc = sandwich(np.linalg.inv(Xhat.T @ Xhat), Xhat * resid[:, None], clusters, k=k)
    return LinearFit(coef, list(names), vc, resid, n, k, ab), first


# ---------------------------------------------------------------------------
# design-level fits


def _columns(design: DesignMatrix, spec: FitSpec) -> tuple[np.ndarray, list[str]]:
    if spec.covariates is None:
        return design.w, list(design.w_names)
    idx = []
    for name in spec.covariates:
        matches = [j for j, col in enumerate(design.w_names)
                   if col == name or col.startswith(name + "[")]
        if not matches:
            raise KeyError(f"covariate {name!r} not in design ({', '.join(design.w_names)})")
        idx.extend(matches)
    return design.w[:, idx], [design.w_names[j] for j in idx]


def _inference(coef: float, se: float, df: int) -> tuple[float, float, float, float]:
    if se > 0:
        t = coef / se
        p = float(2 * stats.t.sf(abs(t), df))
    else:
        t = math.copysign(math.inf, coef) if coef else 0.0
        p = 0.0 if coef else 1.0
    crit = float(stats.t.ppf(0.975, df))
    return t, min(max(p, 0.0), 1.0), coef - crit * se, coef + crit * se


def _report(fit: LinearFit, design: DesignMatrix, spec: FitSpec, cov_names: list[str]) -> EstimateReport:
    coef, se = float(fit.coef[0]), float(fit.se[0])
    t, p, lo, hi = _inference(coef, se, fit.df)
    ca = int(np.unique(design.cluster_a).size) if "agent" in spec.cluster else None
    ct = int(np.unique(design.cluster_t).size) if "time" in spec.cluster else None
    ab = fit.absorbed
    return EstimateReport(
        method=spec.method, outcome=design.outcome, score=design.score,
        coef=coef, se=se, t_stat=float(t), p_value=p, ci_low=lo, ci_high=hi,
        n_obs=fit.n, n_spans=design.n_spans, n_clusters_a=ca, n_clusters_t=ct,
        vcov_type=fit.vcov.kind, variance_truncated=fit.vcov.truncated,
        absorb_iterations=ab.iterations if ab else 0,
        absorb_delta=ab.delta if ab else 0.0,
        time_controls="span" in spec.absorb,
        covariates=cov_names,
    )


def fit_ols(design: DesignMatrix, spec: FitSpec = FitSpec()) -> EstimateReport:
    if spec.method != "OLS":
        raise ValueError("fit_ols needs spec.method == 'OLS'")
    W, cov_names = _columns(design, spec)
    names = [design.score or "sat", *cov_names]
    fit = ols(design.y, np.column_stack([design.sat, W]), names,
              [design.factor(f) for f in spec.absorb],
              [design.cluster(c) for c in spec.cluster])
    return _report(fit, design, spec, cov_names)


def _align(design: DesignMatrix, instrument) -> tuple[DesignMatrix, np.ndarray, int]:
    if isinstance(instrument, InstrumentVector):
        if instrument.keep.all():
            return design, instrument.z, 0
        return design.subset(instrument.keep), instrument.z[instrument.keep], len(instrument.dropped_rows)
    z = np.asarray(instrument, dtype=float)
    if z.shape[0] != len(design):
        raise ValueError("instrument not aligned with design rows")
    return design, z, 0


def fit_tsls(design: DesignMatrix, instrument, spec: FitSpec = FitSpec(method="TSLS")) -> EstimateReport:
    """2SLS of ``y`` on ``sat`` instrumented by ``instrument``.

    Rows dropped by the instrument (single-call agents) are removed from
    every column before fitting.
    """
    if spec.method != "TSLS":
        raise ValueError("fit_tsls needs spec.method == 'TSLS'")
    design, z, dropped = _align(design, instrument)
    W, cov_names = _columns(design, spec)
    names = [design.score or "sat", *cov_names]
    fit, first = tsls(design.y, design.sat, z, W, names,
                      [design.factor(f) for f in spec.absorb],
                      [design.cluster(c) for c in spec.cluster])
    rep = _report(fit, design, spec, cov_names)
    rep.dropped_rows = dropped
    rep.first_stage_coef = float(first.coef[0])
    rep.first_stage_se = float(first.se[0])
    rep.first_stage_F = _f_from(first)
    if rep.first_stage_F < spec.weak_f_threshold:
        rep.warnings.append(
            f"weak instrument: first-stage F {rep.first_stage_F:.2f} below {spec.weak_f_threshold:g}")
    return rep


def _f_from(first: LinearFit) -> float:
    coef, se = float(first.coef[0]), float(first.se[0])
    if se == 0:
        return F_CAP if coef else 0.0
    return min((coef / se) ** 2, F_CAP)


def first_stage(design: DesignMatrix, instrument, spec: FitSpec = FitSpec(method="TSLS")) -> LinearFit:
    design, z, _ = _align(design, instrument)
    W, cov_names = _columns(design, spec)
    return ols(design.sat, np.column_stack([z, W]), ["instrument", *cov_names],
               [design.factor(f) for f in spec.absorb],
               [design.cluster(c) for c in spec.cluster])


def first_stage_f(design: DesignMatrix, instrument, spec: FitSpec = FitSpec(method="TSLS")) -> float:
    """Squared robust t-statistic of the instrument in the first stage.

    With one instrument this is the Kleibergen-Paap Wald F (and the
    effective F). Capped at 1e6 for degenerate, perfectly collinear cases.
    """
    return _f_from(first_stage(design, instrument, spec))


def reduced_form(design: DesignMatrix, instrument, spec: FitSpec = FitSpec(method="TSLS")) -> LinearFit:
    design, z, _ = _align(design, instrument)
    W, cov_names = _columns(design, spec)
    return ols(design.y, np.column_stack([z, W]), ["instrument", *cov_names],
               [design.factor(f) for f in spec.absorb],
               [design.cluster(c) for c in spec.cluster])

"""Residualized leave-one-out agent satisfaction instrument."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .fixed_effects import absorb
from .linalg import solve_ls
from .panel import DesignMatrix


@dataclass
class InstrumentVector:
    z: np.ndarray
    keep: np.ndarray
    dropped_rows: list = field(default_factory=list)
    agent_call_counts: dict = field(default_factory=dict)

    def write_csv(self, design: DesignMatrix, out: IO[str]) -> None:
        """``(call_id, agent_id, z)`` rows for the retained calls."""
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["call_id", "agent_id", "z"])
        for i in np.flatnonzero(self.keep):
            writer.writerow([design.call_ids[i], design.agent_labels[design.agent_ids[i]],
                             repr(float(self.z[i]))])


def residualize(design: DesignMatrix, time_effects: bool = True, baseline: bool = True) -> np.ndarray:
    """Satisfaction net of its projection on the controls.

    Controls are the span dummies (``time_effects``) and the baseline
    covariates (``baseline``); an intercept is always included. Residuals
    sum to zero within each span when spans are absorbed.
    """
    n = len(design)
    factor = design.span_ids if time_effects else np.zeros(n, dtype=np.int64)
    W = design.w if baseline else np.zeros((n, 0))
    ab = absorb(np.column_stack([design.sat, W]), [factor])
    dof = ab.dof + W.shape[1]
    if n <= dof:
        raise ValueError(f"residualization needs more rows ({n}) than controls ({dof})")
    s, Wt = ab.data[:, 0], ab.data[:, 1:]
    if Wt.shape[1] == 0:
        return s
    return s - Wt @ solve_ls(Wt, s, design.w_names)


def leave_one_out(residuals: np.ndarray, agent_ids: np.ndarray, call_ids=None) -> InstrumentVector:
    """Mean of the same agent's other residuals, from per-agent totals.

    Rows whose agent has no other call cannot be instrumented and are
    reported in ``dropped_rows`` (as call ids when given, else row indices).
    """
    residuals = np.asarray(residuals, dtype=float)
    agent_ids = np.asarray(agent_ids)
    labels, inv = np.unique(agent_ids, return_inverse=True)
    counts = np.bincount(inv)
    totals = np.bincount(inv, weights=residuals)
    own = counts[inv]
    keep = own >= 2
    z = np.full(residuals.shape, np.nan)
    z[keep] = (totals[inv][keep] - residuals[keep]) / (own[keep] - 1)
    dropped_idx = np.flatnonzero(~keep)
    dropped = [call_ids[i] for i in dropped_idx] if call_ids is not None else dropped_idx.tolist()
    return InstrumentVector(
        z=z,
        keep=keep,
        dropped_rows=dropped,
        agent_call_counts={label.item() if hasattr(label, "item") else label: int(c)
                           for label, c in zip(labels, counts)},
    )


def build_instrument(design: DesignMatrix, time_effects: bool = True,
                     baseline: bool = True) -> InstrumentVector:
    resid = residualize(design, time_effects=time_effects, baseline=baseline)
    iv = leave_one_out(resid, design.agent_ids, design.call_ids)
    iv.agent_call_counts = {design.agent_labels[a]: c for a, c in iv.agent_call_counts.items()}
    return iv

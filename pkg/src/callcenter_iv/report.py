"""Plain-text regression tables and their machine-readable records."""

from __future__ import annotations

import csv
import json
import math
from typing import IO, Iterable, Sequence

from .diagnostics import DiagnosticReport
from .estimator import EstimateReport

SCORE_LABELS = {"csat": "Call CSAT", "fcr": "Call FCR"}


def stars(p: float) -> str:
    if p is None or math.isnan(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def _num(x: float | None, digits: int = 4) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return f"{x:.{digits}f}"


def _count(n: int | None) -> str:
    return "-" if n is None else f"{n:,}"


def render(rows: Sequence[Sequence[str]], title: str = "", rules: Iterable[int] = ()) -> str:
    """Fixed-width table. ``rules`` lists row indices that get a rule above."""
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    rules = set(rules)
    line = "-" * (sum(widths) + 3 * (len(widths) - 1))
    out = [title] if title else []
    out.append(line)
    for i, row in enumerate(rows):
        if i in rules:
            out.append(line)
        cells = [row[0].ljust(widths[0])] + [c.center(w) for c, w in zip(row[1:], widths[1:])]
        out.append("   ".join(cells).rstrip())
    out.append(line)
    return "\n".join(out) + "\n"


def outcome_label(outcome: str) -> str:
    if outcome.startswith("recontact_") and outcome.endswith("h"):
        return f"Recontact {outcome[len('recontact_'):-1]}hrs"
    return outcome


def estimate_table(pairs: Sequence[tuple[EstimateReport, EstimateReport]]) -> str:
    """OLS and 2SLS side by side, one pair of columns per score."""
    outcome = pairs[0][0].outcome
    cols = [r for pair in pairs for r in pair]
    rows = [["", *[f"({i + 1})" for i in range(len(cols))]],
            ["", *["OLS" if r.method == "OLS" else "2SLS" for r in cols]]]
    for k, (ols_rep, _) in enumerate(pairs):
        label = SCORE_LABELS.get(ols_rep.score, ols_rep.score)
        coef_row, se_row = [label], [""]
        for j, r in enumerate(cols):
            mine = j // 2 == k
            coef_row.append(f"{r.coef:.4f}{stars(r.p_value)}" if mine else "")
            se_row.append(f"({r.se:.4f})" if mine else "")
        rows += [coef_row, se_row]
    body = len(rows)
    rows.append(["Time Controls", *["Yes" if r.time_controls else "No" for r in cols]])
    rows.append(["Observations", *[_count(r.n_obs) for r in cols]])
    tail = len(rows)
    rows.append(["Instrument", *["-" if r.method == "OLS" else f"Agent LOO {r.score.upper()}"
                                 for r in cols]])
    rows.append(["F-Test", *["-" if r.first_stage_F is None else f"{r.first_stage_F:.2f}"
                             for r in cols]])
    title = f"Outcome: {outcome_label(outcome)}"
    text = render(rows, title, rules=(2, body, tail))
    notes = [f"SE: {cols[0].vcov_type}. * p<0.10, ** p<0.05, *** p<0.01."]
    for r in cols:
        notes.extend(f"{r.method} {r.score}: {w}" for w in r.warnings)
        if r.variance_truncated:
            notes.append(f"{r.method} {r.score}: two-way variance truncated to PSD")
    return text + "\n".join(notes) + "\n"


def waiting_table(reports: Sequence[DiagnosticReport]) -> str:
    rows = [["", *[f"({i + 1})" for i in range(len(reports))]],
            ["Agent coefficients joint F", *[f"{r.joint_F:.2f}{stars(r.p_value)}" for r in reports]],
            ["p-value", *[_num(r.p_value, 3) for r in reports]],
            ["Time Controls", *["Yes" if r.time_controls else "No" for r in reports]],
            ["Model R2", *[_num(r.r2_full, 3) for r in reports]],
            ["Net variation from agents", *[_num(r.net_variation, 3) for r in reports]],
            ["Observations", *[_count(r.n_obs) for r in reports]]]
    return render(rows, "Dependent: Waiting Time", rules=(1, 3))


def balance_table(reports: Sequence[DiagnosticReport]) -> str:
    names = []
    for r in reports:
        for name, _, _ in r.per_covariate:
            if name not in names:
                names.append(name)
    header = ["", *["Sat" if r.test_name.endswith("sat") else "Z" for r in reports]]
    rows = [["", *[f"({i + 1})" for i in range(len(reports))]], header]
    for name in names:
        coef_row, se_row = [name], [""]
        for r in reports:
            hit = {n: (c, s) for n, c, s in r.per_covariate}.get(name)
            coef_row.append("" if hit is None else f"{hit[0]:.4f}")
            se_row.append("" if hit is None else f"({hit[1]:.4f})")
        rows += [coef_row, se_row]
    body = len(rows)
    rows.append(["F-test", *[f"{r.joint_F:.3f}{stars(r.p_value)}" for r in reports]])
    rows.append(["p-value", *[_num(r.p_value, 3) for r in reports]])
    rows.append(["Time Controls", *["Yes" if r.time_controls else "No" for r in reports]])
    rows.append(["Observations", *[_count(r.n_obs) for r in reports]])
    return render(rows, "Test of randomization", rules=(2, body))


def sweep_table(points: Sequence[tuple[str, EstimateReport]], label: str) -> str:
    """One 2SLS fit per sweep point, as columns."""
    rows = [[label, *[p for p, _ in points]],
            ["Coefficient", *[f"{r.coef:.4f}{stars(r.p_value)}" for _, r in points]],
            ["", *[f"({r.se:.4f})" for _, r in points]],
            ["F-Test", *[_num(r.first_stage_F, 2) for _, r in points]],
            ["Observations", *[_count(r.n_obs) for _, r in points]]]
    return render(rows, f"2SLS, {points[0][1].score}", rules=(1, 3))


# ---------------------------------------------------------------------------
# machine records


def write_records(records: Sequence[dict], out: IO[str]) -> None:
    """CSV with a stable column order; nested values are JSON-encoded."""
    if not records:
        return
    cols = []
    for rec in records:
        for key in rec:
            if key not in cols:
                cols.append(key)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(cols)
    for rec in records:
        row = []
        for c in cols:
            v = rec.get(c)
            if isinstance(v, (list, dict)):
                v = json.dumps(v, sort_keys=True)
            elif v is None:
                v = ""
            elif isinstance(v, float):
                v = repr(v)
            row.append(v)
        writer.writerow(row)


def write_json(obj, out: IO[str]) -> None:
    json.dump(obj, out, indent=2, sort_keys=True, allow_nan=True)
    out.write("\n")

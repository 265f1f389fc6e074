"""Command line: simulate, ingest, estimate, diagnose, sweep, montecarlo.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, family, ingest, montecarlo, pipeline, report, simulator
from .covariance import ClusterError
from .fixed_effects import AbsorptionError
from .linalg import RankError
from .panel import DEFAULT_WINDOW_MINUTES

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
WINDOWS = (15, 20, 30, 45, 60)
HORIZONS = (24, 48, 72, 168)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    input_hashes: list = field(default_factory=list)
    seed: int | None = None
    tool_version: str = __version__
    started: str = ""
    finished: str = ""
    artifacts: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            report.write_json(asdict(self), fh)
        return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Run:
    """Collects artifacts for one command and writes the manifest last."""

    def __init__(self, command: str, args: argparse.Namespace, inputs: Sequence[str] = (),
                 seed: int | None = None, config_text: str | None = None):
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {self.out}: {exc}") from exc
        settings = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
        if config_text is None:
            config_text = json.dumps(settings, sort_keys=True, default=str)
        self.manifest = RunManifest(
            command=command, config_hash=sha256_text(config_text),
            input_hashes=[{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
            seed=seed, started=_now(),
        )

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.manifest.artifacts[name] = sha256_text(text)
        return path

    def close(self) -> Path:
        self.manifest.finished = _now()
        return self.manifest.write(self.out)


def _records(fn, *args) -> str:
    buf = io.StringIO()
    fn(*args, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# data loading


def _load(path: str, schema_path: str | None):
    schema = ingest.load_schema(schema_path) if schema_path else None
    try:
        parsed = ingest.parse_calls(path, schema)
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    if parsed.rejects:
        print(f"warning: {len(parsed.rejects)} malformed rows skipped (first: line "
              f"{parsed.rejects[0].line}, {parsed.rejects[0].reason})", file=sys.stderr)
    if not parsed.records:
        raise DataError(f"{path}: no usable call records")
    return parsed


def _pipeline_config(args, **changes) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig(
        outcome=args.outcome, horizon_hours=args.horizon_hours,
        window_minutes=args.window_minutes, cluster=args.cluster,
        agency_threshold=args.agency_threshold, queue=args.queue,
        cluster_window_minutes=args.cluster_window_minutes,
    )
    return pipeline.with_(cfg, **changes) if changes else cfg


def _scores(args) -> list[str]:
    return ["fcr", "csat"] if args.score == "both" else [args.score]


def _prepare(records, cfg: pipeline.PipelineConfig) -> pipeline.Prepared:
    try:
        prepared = pipeline.prepare(records, cfg)
    except KeyError as exc:
        # unknown outcome column
        raise UsageError(str(exc.args[0]) if exc.args else str(exc)) from exc
    if len(prepared.design) < 3:
        raise DataError(f"estimation sample has {len(prepared.design)} rows after filtering "
                        f"(counts: {prepared.design.counts})")
    return prepared


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    if args.config:
        cfg = simulator.load_config(args.config)
        inputs = [args.config]
    else:
        if args.preset not in simulator.PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(simulator.PRESETS)}")
        # the preset draws its roster from the seed too
        cfg = simulator.PRESETS[args.preset](0 if args.seed is None else args.seed)
        inputs = []
    changes = {}
    if args.seed is not None and args.seed != cfg.seed:
        changes["seed"] = args.seed
    if args.horizon_days is not None:
        changes["horizon_days"] = args.horizon_days
    if changes:
        cfg = replace(cfg, **changes)
    cfg.validate()
    config_text = _records(simulator.dump_config, cfg)
    run = Run("simulate", args, inputs, seed=cfg.seed, config_text=config_text)
    result = simulator.run(cfg)
    run.write("calls.csv", _records(ingest.write_calls, result.calls))
    run.write("truth.csv", _records(simulator.write_truth, result.truth))
    run.write("config.ini", config_text)
    run.close()
    print(f"{len(result.calls)} calls ({result.abandoned} abandoned, {result.clamp_events} clamped "
          f"probabilities) -> {run.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    parsed = _load(args.data, args.schema)
    run = Run("ingest", args, [args.data])
    calls = ingest.filter_calls(parsed.records)
    partition = family.build_partition([c for c in parsed.records if c.customer_id or c.phone])
    agencies = family.flag_agencies(partition, args.agency_threshold)
    stages = ingest.filter_stages(parsed.records)
    cov = family.coverage(parsed.records)
    run.write("calls.csv", _records(ingest.write_calls, calls))
    run.write("rejects.csv", _records(ingest.write_rejects, parsed.rejects, parsed.columns))
    run.write("families.csv", _records(family.write_families, partition))
    summary = {"stages": stages, "coverage": cov, "agency_families": sorted(agencies),
               "rejects": len(parsed.rejects)}
    run.write("ingest.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    run.close()
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _estimate_pairs(records, args, **changes):
    pairs, counts = [], {}
    for score in _scores(args):
        cfg = _pipeline_config(args, score=score, **changes)
        res = pipeline.estimate(_prepare(records, cfg), cfg)
        pairs.append((res.ols, res.tsls))
        counts[score] = res.counts()
    return pairs, counts


def cmd_estimate(args) -> int:
    parsed = _load(args.data, args.schema)
    run = Run("estimate", args, [args.data])
    pairs, counts = _estimate_pairs(parsed.records, args)
    table = report.estimate_table(pairs)
    recs = [r.to_dict() for pair in pairs for r in pair]
    run.write("estimates.txt", table)
    run.write("estimates.csv", _records(report.write_records, recs))
    run.write("estimates.json", json.dumps({"fits": recs, "counts": counts}, indent=2,
                                           sort_keys=True) + "\n")
    run.close()
    print(table, end="")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    parsed = _load(args.data, args.schema)
    run = Run("diagnose", args, [args.data])
    cfg = _pipeline_config(args, score=_scores(args)[-1])
    reports = pipeline.diagnose(_prepare(parsed.records, cfg), cfg)
    waiting, balance = reports[:2], reports[2:]
    text = report.waiting_table(waiting) + "\n" + report.balance_table(balance)
    run.write("diagnostics.txt", text)
    run.write("diagnostics.csv", _records(report.write_records, [r.to_dict() for r in reports]))
    run.close()
    print(text, end="")
    return EXIT_OK


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def window_spread(points: Sequence[tuple[int, object]]) -> tuple[float, float]:
    """Largest pairwise coefficient gap and the largest gap in units of the
    pair's joint standard error sqrt(se_i^2 + se_j^2)."""
    worst_gap, worst_ratio = 0.0, 0.0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            a, b = points[i][1], points[j][1]
            gap = abs(a.coef - b.coef)
            joint = float(np.hypot(a.se, b.se))
            worst_gap = max(worst_gap, gap)
            worst_ratio = max(worst_ratio, gap / joint if joint > 0 else float("inf"))
    return worst_gap, worst_ratio


def cmd_sweep(args) -> int:
    if args.windows is None and args.horizons is None:
        raise UsageError("sweep needs --windows or --horizons")
    values = _ints(args.windows if args.windows is not None else args.horizons)
    if not values:
        raise UsageError("empty sweep list")
    kind = "window_minutes" if args.windows is not None else "horizon_hours"
    if kind == "horizon_hours" and args.outcome != "recontact":
        raise UsageError("a horizon sweep needs --outcome recontact")
    parsed = _load(args.data, args.schema)
    run = Run("sweep", args, [args.data])
    texts, recs, checks = [], [], {}
    for score in _scores(args):
        points, prepared_by_value = [], {}
        for v in values:
            cfg = _pipeline_config(args, score=score, **{kind: v})
            prepared = _prepare(parsed.records, cfg)
            res = pipeline.estimate(prepared, cfg)
            points.append((v, res.tsls))
            prepared_by_value[v] = prepared
            for r in (res.ols, res.tsls):
                recs.append({kind: v, **r.to_dict()})
        label = "Window (min)" if kind == "window_minutes" else "Horizon (h)"
        texts.append(report.sweep_table([(str(v), r) for v, r in points], label))
        if kind == "window_minutes":
            gap, ratio = window_spread(points)
            checks[score] = {"max_gap": gap, "max_gap_in_joint_se": ratio, "stable": ratio < 2.0}
        else:
            checks[score] = _horizon_check(parsed.records, sorted(values), args)
    text = "\n".join(texts) + "checks: " + json.dumps(checks, sort_keys=True) + "\n"
    run.write("sweep.txt", text)
    run.write("sweep.csv", _records(report.write_records, recs))
    run.write("sweep.json", json.dumps({"fits": recs, "checks": checks}, indent=2, sort_keys=True) + "\n")
    run.close()
    print(text, end="")
    return EXIT_OK


def _horizon_check(records, horizons: list[int], args) -> dict:
    """Recontact rates on the rows every horizon can label must not fall as
    the horizon grows."""
    base = _prepare(records, _pipeline_config(args, horizon_hours=horizons[-1]))
    keep = set(base.design.call_ids)
    reachable = [c for c in records if c.customer_id or c.phone]
    rates = []
    for h in horizons:
        labels = ingest.label_recontact(reachable, base.partition, h)
        hits = [lab.recontact for lab in labels if lab.call_id in keep]
        rates.append(float(np.mean(hits)) if hits else float("nan"))
    return {"horizons": horizons, "recontact_rate": rates,
            "monotone": all(b >= a for a, b in zip(rates, rates[1:]))}


def cmd_montecarlo(args) -> int:
    run = Run("montecarlo", args, seed=args.seed)
    summary = montecarlo.run_study(args.reps, base_seed=args.seed, preset=args.preset,
                                   workers=args.workers)
    rows = [asdict(r) for r in summary.reps]
    run.write("replications.csv", _records(report.write_records, rows))
    run.write("summary.json", json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    run.close()
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", help="call log CSV in the ingest schema")
    p.add_argument("--schema", help="INI file mapping column names")
    p.add_argument("--outcome", default="recontact",
                   help="recontact (default) or an outcome flag column such as claims_7d")
    p.add_argument("--score", choices=("csat", "fcr", "both"), default="both",
                   help="satisfaction measure; 'both' gives the four-column table")
    p.add_argument("--window-minutes", type=int, default=DEFAULT_WINDOW_MINUTES)
    p.add_argument("--horizon-hours", type=int, default=24)
    p.add_argument("--cluster", choices=("agent", "time", "two-way", "robust"), default="two-way")
    p.add_argument("--cluster-window-minutes", type=int, default=None,
                   help="length of the time cluster (default: the span itself)")
    p.add_argument("--agency-threshold", type=int, default=25)
    p.add_argument("--queue", default=None, help="restrict estimation rows to one queue")
    p.add_argument("--out", default="out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="callcenter-iv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic call log")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", default="multiqueue_bias")
    src.add_argument("--config", help="INI simulator config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--horizon-days", type=int, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="validate, filter and link a call log")
    p.add_argument("data")
    p.add_argument("--schema")
    p.add_argument("--agency-threshold", type=int, default=25)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("estimate", help="OLS and 2SLS table")
    _fit_options(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("diagnose", help="waiting-time and balance tests")
    _fit_options(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sweep", help="refit across windows or horizons")
    _fit_options(p)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--windows", nargs="?", const=",".join(map(str, WINDOWS)),
                     help=f"comma-separated window lengths (default {','.join(map(str, WINDOWS))})")
    grp.add_argument("--horizons", nargs="?", const=",".join(map(str, HORIZONS)),
                     help=f"comma-separated horizons in hours (default {','.join(map(str, HORIZONS))})")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("montecarlo", help="replicated simulate-and-estimate study")
    p.add_argument("--preset", default="multiqueue_bias", choices=sorted(simulator.PRESETS))
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, simulator.ConfigError, ingest.SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RankError, ClusterError, AbsorptionError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ingest.RowError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

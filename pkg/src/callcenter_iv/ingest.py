"""Call-log ingestion: parsing, exclusion filters and recontact labels.

Timestamps are held as integer UTC epoch seconds. Input timestamps must be
ISO-8601 with an explicit offset; they are converted at parse time.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

OUTCOME_FLAGS = (
    "claims_7d",
    "claims_28d",
    "refund_request",
    "regulatory_claim",
    "high_priority_claim",
)

MANDATORY = (
    "call_id",
    "agent_id",
    "queue_id",
    "start_time",
    "waiting_time",
    "transferred",
    "surveyed",
)
OPTIONAL = (
    "customer_id",
    "phone",
    "csat",
    "fcr",
    "market",
    "ffp_tier",
    "log_hours_from_last_call",
    "bookings_past_12m",
    "abandoned",
)

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


class SchemaError(ValueError):
    """Raised when the input header cannot satisfy the column mapping."""


class RowError(ValueError):
    pass


@dataclass(frozen=True)
class CallRecord:
    call_id: str
    customer_id: str | None
    phone: str | None
    agent_id: str
    queue_id: str
    start_time: int
    waiting_time: float
    transferred: bool
    surveyed: bool
    csat: int | None = None
    fcr: bool | None = None
    market: str = ""
    ffp_tier: str = ""
    log_hours_from_last_call: float = math.nan
    bookings_past_12m: int = 0
    outcome_flags: Mapping[str, bool | None] = field(default_factory=dict)
    abandoned: bool = False


@dataclass(frozen=True)
class OutcomeLabel:
    call_id: str
    recontact: bool
    horizon_hours: int


@dataclass
class Schema:
    """Maps canonical field names onto source column names."""

    columns: dict[str, str] = field(default_factory=dict)
    outcomes: tuple[str, ...] = OUTCOME_FLAGS
    delimiter: str = ","

    def source(self, name: str) -> str:
        return self.columns.get(name, name)

    def header(self) -> list[str]:
        names = ["call_id", "customer_id", "phone", "agent_id", "queue_id",
                 "start_time", "waiting_time", "transferred", "surveyed", "csat",
                 "fcr", "market", "ffp_tier", "log_hours_from_last_call",
                 "bookings_past_12m", *self.outcomes, "abandoned"]
        return [self.source(n) for n in names]


def load_schema(path: str | Path) -> Schema:
    """Read a column mapping from an INI-style key-value file.

    Recognised sections: ``[columns]`` (canonical = source), ``[outcomes]``
    with a comma separated ``names`` key, and ``[format]`` with ``delimiter``.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    columns = dict(parser["columns"]) if parser.has_section("columns") else {}
    unknown = set(columns) - set(MANDATORY) - set(OPTIONAL)
    outcomes = OUTCOME_FLAGS
    if parser.has_section("outcomes"):
        raw = parser["outcomes"].get("names", "")
        outcomes = tuple(n.strip() for n in raw.split(",") if n.strip())
        unknown -= set(outcomes)
    if unknown:
        raise SchemaError(f"unknown canonical fields in schema: {sorted(unknown)}")
    delimiter = ","
    if parser.has_section("format"):
        delimiter = parser["format"].get("delimiter", ",")
        if delimiter in ("\\t", "tab"):
            delimiter = "\t"
    return Schema(columns=columns, outcomes=outcomes, delimiter=delimiter)


# ---------------------------------------------------------------------------
# parsing


@dataclass(frozen=True)
class Reject:
    line: int
    row: dict[str, str]
    reason: str


@dataclass
class ParseResult:
    records: list[CallRecord]
    rejects: list[Reject]
    columns: list[str]


def parse_timestamp(text: str) -> int:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise RowError(f"unparseable timestamp {text!r}") from exc
    if ts.tzinfo is None:
        raise RowError(f"timestamp {text!r} has no UTC offset")
    return int(math.floor(ts.timestamp()))


def format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).isoformat()


def _bool(text: str, name: str) -> bool:
    v = text.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise RowError(f"{name}: expected boolean, got {text!r}")


def _opt_bool(text: str, name: str) -> bool | None:
    return None if text.strip() == "" else _bool(text, name)


def _float(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise RowError(f"{name}: expected number, got {text!r}") from exc


def _record_from_row(row: Mapping[str, str], schema: Schema,
                     window: tuple[int, int] | None) -> CallRecord:
    def get(name: str) -> str:
        return (row.get(schema.source(name)) or "").strip()

    call_id = get("call_id")
    if not call_id:
        raise RowError("call_id: empty")
    abandoned = _bool(get("abandoned"), "abandoned") if get("abandoned") else False
    agent_id = get("agent_id")
    if not agent_id and not abandoned:
        raise RowError("agent_id: empty for a served call")
    queue_id = get("queue_id")
    if not queue_id:
        raise RowError("queue_id: empty")
    start = parse_timestamp(get("start_time"))
    if window is not None and not (window[0] <= start < window[1]):
        raise RowError("start_time outside study window")
    wait = _float(get("waiting_time"), "waiting_time")
    if not wait >= 0:
        raise RowError(f"waiting_time: negative or NaN ({wait})")
    surveyed = _bool(get("surveyed"), "surveyed")

    csat = None
    raw = get("csat")
    if raw:
        try:
            csat = int(raw)
        except ValueError as exc:
            raise RowError(f"csat: expected integer, got {raw!r}") from exc
        if not 0 <= csat <= 5:
            raise RowError(f"csat: {csat} outside 0-5")
        if not surveyed:
            raise RowError("csat present on an unsurveyed call")
    fcr = _opt_bool(get("fcr"), "fcr")
    if fcr is not None and not surveyed:
        raise RowError("fcr present on an unsurveyed call")

    raw = get("log_hours_from_last_call")
    log_hours = _float(raw, "log_hours_from_last_call") if raw else math.nan
    raw = get("bookings_past_12m")
    bookings = 0
    if raw:
        try:
            bookings = int(raw)
        except ValueError as exc:
            raise RowError(f"bookings_past_12m: expected integer, got {raw!r}") from exc
        if bookings < 0:
            raise RowError("bookings_past_12m: negative")

    flags = {name: _opt_bool(get(name), name) for name in schema.outcomes}
    return CallRecord(
        call_id=call_id,
        customer_id=get("customer_id") or None,
        phone=get("phone") or None,
        agent_id=agent_id,
        queue_id=queue_id,
        start_time=start,
        waiting_time=wait,
        transferred=_bool(get("transferred"), "transferred"),
        surveyed=surveyed,
        csat=csat,
        fcr=fcr,
        market=get("market"),
        ffp_tier=get("ffp_tier"),
        log_hours_from_last_call=log_hours,
        bookings_past_12m=bookings,
        outcome_flags=flags,
        abandoned=abandoned,
    )


def parse_calls(source: IO[bytes] | IO[str] | str | Path, schema: Schema | None = None,
                window: tuple[int, int] | None = None) -> ParseResult:
    """Parse a delimited call log.

    Malformed rows are returned in ``ParseResult.rejects`` with a reason;
    they are never dropped silently. A header lacking a mandatory column
    raises :class:`SchemaError`.
    """
    schema = schema or Schema()
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return parse_calls(fh, schema, window)
    data = source.read()
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text, newline=""), delimiter=schema.delimiter)
    columns = list(reader.fieldnames or [])
    missing = [n for n in MANDATORY if schema.source(n) not in columns]
    if missing:
        raise SchemaError("missing mandatory columns: " + ", ".join(schema.source(n) for n in missing))

    records: list[CallRecord] = []
    rejects: list[Reject] = []
    seen: set[str] = set()
    for line, row in enumerate(reader, start=2):
        if None in row:
            rejects.append(Reject(line, _clean(row), "too many fields"))
            continue
        try:
            rec = _record_from_row(row, schema, window)
            if rec.call_id in seen:
                raise RowError(f"duplicate call_id {rec.call_id!r}")
        except RowError as exc:
            rejects.append(Reject(line, _clean(row), str(exc)))
            continue
        seen.add(rec.call_id)
        records.append(rec)
    return ParseResult(records, rejects, columns)


def _clean(row: Mapping) -> dict[str, str]:
    return {k: ("" if v is None else v) for k, v in row.items() if k is not None}


# ---------------------------------------------------------------------------
# serialization


def _fmt_bool(v: bool | None) -> str:
    return "" if v is None else ("1" if v else "0")


def _fmt_float(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def record_row(rec: CallRecord, schema: Schema) -> list[str]:
    return [
        rec.call_id,
        rec.customer_id or "",
        rec.phone or "",
        rec.agent_id,
        rec.queue_id,
        format_timestamp(rec.start_time),
        _fmt_float(rec.waiting_time),
        _fmt_bool(rec.transferred),
        _fmt_bool(rec.surveyed),
        "" if rec.csat is None else str(rec.csat),
        _fmt_bool(rec.fcr),
        rec.market,
        rec.ffp_tier,
        _fmt_float(rec.log_hours_from_last_call),
        str(rec.bookings_past_12m),
        *(_fmt_bool(rec.outcome_flags.get(n)) for n in schema.outcomes),
        _fmt_bool(rec.abandoned),
    ]


def write_calls(records: Iterable[CallRecord], out: IO[str], schema: Schema | None = None) -> None:
    schema = schema or Schema()
    writer = csv.writer(out, delimiter=schema.delimiter, lineterminator="\n")
    writer.writerow(schema.header())
    for rec in records:
        writer.writerow(record_row(rec, schema))


def write_rejects(rejects: Sequence[Reject], columns: Sequence[str], out: IO[str],
                  schema: Schema | None = None) -> None:
    """Rejects report: the original columns plus ``line`` and ``reason``."""
    schema = schema or Schema()
    writer = csv.writer(out, delimiter=schema.delimiter, lineterminator="\n")
    writer.writerow([*columns, "line", "reason"])
    for rej in rejects:
        writer.writerow([*(rej.row.get(c, "") for c in columns), rej.line, rej.reason])


# ---------------------------------------------------------------------------
# filters and labels


def filter_calls(calls: Sequence[CallRecord]) -> list[CallRecord]:
    """Drop transferred calls, abandoned calls and calls with no customer identification."""
    return [
        c for c in calls
        if not c.transferred and not c.abandoned and (c.customer_id or c.phone)
    ]


def filter_stages(calls: Sequence[CallRecord]) -> dict[str, int]:
    """Row counts after each exclusion, in the order they are applied."""
    counts = {"parsed": len(calls)}
    stage = [c for c in calls if not c.abandoned]
    counts["served"] = len(stage)
    stage = [c for c in stage if not c.transferred]
    counts["not_transferred"] = len(stage)
    stage = [c for c in stage if c.customer_id or c.phone]
    counts["identified"] = len(stage)
    return counts


def label_recontact(calls: Sequence[CallRecord], partition, horizon_hours: int) -> list[OutcomeLabel]:
    """Recontact flag per call: another call of the same family starts in
    the open interval ``(start, start + horizon)``.

    One sort plus a binary search per call, O(n log n).
    """
    if horizon_hours <= 0:
        raise ValueError("horizon_hours must be positive")
    families = []
    for c in calls:
        fam = partition.family_of.get(c.call_id)
        if fam is None:
            raise KeyError(f"call {c.call_id!r} has no family in the partition")
        families.append(fam)
    times = np.fromiter((c.start_time for c in calls), dtype=np.int64, count=len(calls))
    flags = recontact_flags(families, times, horizon_hours * 3600)
    return [OutcomeLabel(c.call_id, bool(f), horizon_hours) for c, f in zip(calls, flags)]


def recontact_flags(families: Sequence, times: np.ndarray, horizon_seconds: int) -> np.ndarray:
    n = len(times)
    if n == 0:
        return np.zeros(0, dtype=bool)
    _, fam = np.unique(np.asarray(families, dtype=object).astype(str), return_inverse=True)
    times = np.asarray(times, dtype=np.int64)
    rel = times - times.min()
    stride = int(rel.max()) + 1
    key = fam.astype(np.int64) * stride + rel
    order = np.argsort(key, kind="stable")
    skey = key[order]
    # first position holding a strictly later call of the same family
    nxt = np.searchsorted(skey, skey, side="right")
    out_sorted = np.zeros(n, dtype=bool)
    ok = nxt < n
    idx = np.where(ok, nxt, 0)
    same = ok & (fam[order][idx] == fam[order])
    gap = times[order][idx] - times[order]
    out_sorted[same & (gap < horizon_seconds)] = True
    out = np.empty(n, dtype=bool)
    out[order] = out_sorted
    return out


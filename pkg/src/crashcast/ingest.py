"""Parse raw crash-log lines into validated crash events.

Input is line-delimited JSON, one record per line (UTF-8): fields guid,
ts (RFC-3339 UTC instant, second resolution), event_id, and optional
bugcheck / params / cause. Unknown fields are ignored. Critical crashes
are the records with event_id 41; only those enter the corpus.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BadCode, BadTimestamp, EmptyCorpus, MalformedRecord

CRITICAL_EVENT_ID = 41  # kernel event for a reboot without clean shutdown

# Events earlier than this are treated as clock garbage and dropped.
DEFAULT_EPOCH_FLOOR = datetime(2000, 1, 1, tzinfo=timezone.utc)

MAX_PARAMS = 4

_BUGCHECK_RE = re.compile(r"^0x[0-9A-Fa-f]{1,8}$")
_TS_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:Z|\+00:00)$"
)


@dataclass(frozen=True)
class RawLogRecord:
    """One parsed log line, before any normalization."""

    system_id: str
    timestamp: datetime
    event_id: int
    bugcheck_code: str | None = None
    params: tuple[str, ...] = ()
    cause: str | None = None


@dataclass(frozen=True)
class CrashEvent:
    """One critical crash: when it happened and what kind it was."""

    system_id: str
    time: datetime
    kind: str
    bugcheck_code: str
    params: tuple[str, ...] = ()


@dataclass(frozen=True)
class CrashCorpus:
    """Deduplicated crash events plus bookkeeping about what was folded away."""

    events: tuple[CrashEvent, ...]
    source_digest: str
    duplicates: int = 0
    dropped_before_floor: int = 0


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC-3339 UTC instant at second resolution.

    Date-only strings and non-UTC offsets are rejected; records must
    carry a full instant even when the upstream cadence is daily.
    """
    match = _TS_RE.match(text)
    if match is None:
        raise ValueError(f"not a full UTC instant: {text!r}")
    y, mo, d, h, mi, s = (int(g) for g in match.groups())
    return datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def canonical_code(code: str) -> str:
    """Canonical bugcheck form: 0x prefix, uppercase, no zero padding."""
    return "0x" + format(int(code, 16), "X")


def normalize_cause(text: str) -> str:
    """Lowercase, underscores to spaces, whitespace collapsed."""
    return " ".join(text.lower().replace("_", " ").split())


def parse_record(line: str, line_no: int | None = None) -> RawLogRecord:
    """Parse one log line into a RawLogRecord, with no normalization.

    Raises MalformedRecord for structural problems, BadTimestamp for an
    unparseable instant, BadCode when the bugcheck field violates the
    0x + 1-8 hex digits pattern. Never raises anything else, whatever
    the input bytes.
    """
    try:
        obj = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedRecord(f"not valid JSON: {exc}", line_no) from None
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not an object", line_no)

    guid = obj.get("guid")
    if not isinstance(guid, str) or not guid:
        raise MalformedRecord("missing or empty guid", line_no)

    ts_raw = obj.get("ts")
    if not isinstance(ts_raw, str):
        raise MalformedRecord("missing ts", line_no)
    try:
        ts = parse_timestamp(ts_raw)
    except ValueError as exc:
        raise BadTimestamp(str(exc), line_no) from None

    event_id = obj.get("event_id")
    if isinstance(event_id, bool) or not isinstance(event_id, int) or event_id < 0:
        raise MalformedRecord("event_id must be a non-negative integer", line_no)

    bugcheck = obj.get("bugcheck")
    if bugcheck is not None:
        if not isinstance(bugcheck, str):
            raise MalformedRecord("bugcheck must be a string", line_no)
        if _BUGCHECK_RE.match(bugcheck) is None:
            raise BadCode(f"bugcheck {bugcheck!r} violates 0x hex pattern", line_no)

    params_raw = obj.get("params")
    if params_raw is None:
        params: tuple[str, ...] = ()
    else:
        if not isinstance(params_raw, list) or len(params_raw) > MAX_PARAMS:
            raise MalformedRecord(f"params must be a list of at most {MAX_PARAMS}", line_no)
        if not all(isinstance(p, str) for p in params_raw):
            raise MalformedRecord("params entries must be strings", line_no)
        params = tuple(params_raw)

    cause = obj.get("cause")
    if cause is not None and not isinstance(cause, str):
        raise MalformedRecord("cause must be a string", line_no)

    return RawLogRecord(
        system_id=guid,
        timestamp=ts,
        event_id=event_id,
        bugcheck_code=bugcheck,
        params=params,
        cause=cause,
    )


def record_to_line(record: RawLogRecord) -> str:
    """Serialize back to the canonical line form; parse(record_to_line(r)) == r."""
    obj: dict[str, object] = {
        "guid": record.system_id,
        "ts": format_timestamp(record.timestamp),
        "event_id": record.event_id,
    }
    if record.bugcheck_code is not None:
        obj["bugcheck"] = record.bugcheck_code
    if record.params:
        obj["params"] = list(record.params)
    if record.cause is not None:
        obj["cause"] = record.cause
    return json.dumps(obj, ensure_ascii=False)


def parse_lines(lines: Iterable[str]) -> list[RawLogRecord]:
    """Parse many lines, skipping blanks, attaching 1-based line numbers to errors."""
    records = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        records.append(parse_record(line, line_no))
    return records


def filter_critical(records: Sequence[RawLogRecord]) -> list[RawLogRecord]:
    """Keep exactly the event-41 records, in input order."""
    return [r for r in records if r.event_id == CRITICAL_EVENT_ID]


def load_catalog(path: str | Path) -> dict[str, str]:
    """Load the bugcheck -> cause catalog: two columns, '#' comments allowed.

    Keys are canonicalized codes, values normalized cause labels.
    """
    catalog: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise MalformedRecord(f"catalog line needs two columns: {line!r}", line_no)
        code, label = parts
        if _BUGCHECK_RE.match(code) is None:
            raise BadCode(f"catalog code {code!r} violates 0x hex pattern", line_no)
        catalog[canonical_code(code)] = normalize_cause(label)
    return catalog


def default_catalog_path() -> Path:
    return Path(str(resources.files("crashcast").joinpath("data/bugcheck_catalog.txt")))


def default_catalog() -> dict[str, str]:
    return load_catalog(default_catalog_path())


def _derive_kind(record: RawLogRecord, catalog: dict[str, str]) -> str:
    if record.cause is not None and normalize_cause(record.cause):
        return normalize_cause(record.cause)
    if record.bugcheck_code is not None:
        code = canonical_code(record.bugcheck_code)
        if code in catalog:
            return catalog[code]
        return f"bugcheck {code.lower()}"
    return "unknown"


def records_digest(records: Sequence[RawLogRecord]) -> str:
    payload = "\n".join(record_to_line(r) for r in records)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_corpus(
    records: Sequence[RawLogRecord],
    catalog: dict[str, str] | None = None,
    epoch_floor: datetime = DEFAULT_EPOCH_FLOOR,
    source_digest: str | None = None,
) -> CrashCorpus:
    """Turn critical-only records into a deduplicated CrashCorpus.

    Cause text is normalized; records without a cause fall back to the
    catalog, then to the bugcheck code itself. Exact duplicates on
    (system_id, time, bugcheck_code) collapse to one and are counted,
    as are events before the epoch floor. Raises EmptyCorpus when
    nothing survives.
    """
    if catalog is None:
        catalog = default_catalog()
    if source_digest is None:
        source_digest = records_digest(records)

    seen: set[tuple[str, datetime, str]] = set()
    events: list[CrashEvent] = []
    duplicates = 0
    dropped = 0
    for record in records:
        if record.timestamp < epoch_floor:
            dropped += 1
            continue
        code = canonical_code(record.bugcheck_code) if record.bugcheck_code else ""
        key = (record.system_id, record.timestamp, code)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        events.append(
            CrashEvent(
                system_id=record.system_id,
                time=record.timestamp,
                kind=_derive_kind(record, catalog),
                bugcheck_code=code,
                params=record.params,
            )
        )

    if not events:
        raise EmptyCorpus("zero crash events survived corpus construction")

    events.sort(key=lambda e: (e.system_id, e.time, e.bugcheck_code))
    return CrashCorpus(
        events=tuple(events),
        source_digest=source_digest,
        duplicates=duplicates,
        dropped_before_floor=dropped,
    )

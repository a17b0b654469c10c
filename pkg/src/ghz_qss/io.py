"""
Serialization of transcripts (line-delimited JSON) and reports (JSON).

Transcript file layout, one JSON object per line:

1. ``{"type": "header", "schema": ..., "config": {...}, "event_fields": [...],
   "record_fields": [...]}``
2. one ``{"type": "event", ...}`` line per announcement event, in sequence order
3. one ``{"type": "record", ...}`` line per round
4. a final ``{"type": "report", "report": {...}}`` line

Keys are written in a fixed order and floats with ``repr`` precision, so two
runs with the same configuration produce byte-identical files.
"""
from __future__ import annotations

import json
from typing import IO, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .protocol import SecurityReport, Transcript

TRANSCRIPT_SCHEMA = "ghz-qss/transcript/1"
EVENT_FIELDS = ("seq", "round", "party", "kind", "value")
RECORD_FIELDS = (
    "round_id",
    "state_tag",
    "true_bases",
    "true_outcomes",
    "announced_bases",
    "announced_outcomes",
    "usage",
    "attacked",
)


def _plain(obj):
    """Recursively convert numpy scalars and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _dump(obj) -> str:
    return json.dumps(_plain(obj), separators=(",", ":"), allow_nan=False)


def write_transcript(tr: "Transcript", fp: IO[str], include_events: bool = True) -> None:
    header = {
        "type": "header",
        "schema": TRANSCRIPT_SCHEMA,
        "config": tr.config.as_dict(),
        "event_fields": list(EVENT_FIELDS),
        "record_fields": list(RECORD_FIELDS),
    }
    from .protocol import CODE_BASIS, TAGS, USAGES

    fp.write(_dump(header) + "\n")
    dumps = json.JSONEncoder(separators=(",", ":"), allow_nan=False).encode
    if include_events:
        for ev in tr.events():
            fp.write(dumps({"type": "event", **dict(zip(EVENT_FIELDS, ev.as_list()))}) + "\n")
    letters = [b.value for b in CODE_BASIS]
    cols = (
        tr.tags.tolist(), tr.true_bases.tolist(), tr.true_bits.tolist(),
        tr.ann_bases.tolist(), tr.ann_bits.tolist(), tr.usage.tolist(), tr.attacked.tolist(),
    )
    for i, (tag, tb, to, ab, ao, use, att) in enumerate(zip(*cols)):
        rec = {
            "type": "record",
            "round_id": i,
            "state_tag": TAGS[tag],
            "true_bases": [letters[c] for c in tb],
            "true_outcomes": to,
            "announced_bases": [letters[c] for c in ab],
            "announced_outcomes": ao,
            "usage": USAGES[use],
            "attacked": att,
        }
        fp.write(dumps(rec) + "\n")
    if tr.report is not None:
        fp.write(_dump({"type": "report", "report": tr.report.as_dict()}) + "\n")


def read_transcript(fp: IO[str]) -> dict:
    """Parse a transcript file into ``{"header", "events", "records", "report"}``."""
    out: dict = {"header": None, "events": [], "records": [], "report": None}
    for lineno, line in enumerate(fp, 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        kind = obj.pop("type", None)
        if kind == "header":
            if obj.get("schema") != TRANSCRIPT_SCHEMA:
                raise ValueError(f"line {lineno}: unsupported schema {obj.get('schema')!r}")
            out["header"] = obj
        elif kind == "event":
            out["events"].append(obj)
        elif kind == "record":
            out["records"].append(obj)
        elif kind == "report":
            out["report"] = obj["report"]
        else:
            raise ValueError(f"line {lineno}: unknown line type {kind!r}")
    if out["header"] is None:
        raise ValueError("transcript has no header line")
    return out


def report_json(report: "SecurityReport") -> str:
    """Pretty JSON with the schema tag as the first key."""
    return json.dumps(_plain(report.as_dict()), indent=2, allow_nan=False) + "\n"

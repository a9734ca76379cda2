"""Trial records and the line-delimited session log format.

A log is JSON-lines: a header record (schema version plus run config), one
record per trial, and a footer marking the session complete or aborted.
Serialization is canonical (sorted keys, fixed separators), so identical runs
produce byte-identical logs.

Schema ``wristim-log/1`` trial fields: participant, study, trial_index,
channel (int, "wrist", or null), target_finger, visual_size, visual_opacity,
policy, intensity_ua, seed, t_start_ms, t_stim_ms, t_report_ms, report
(mask rows / strongest point / quality, or null), note.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict

from .perceiver import SensationReport

LOG_VERSION = "wristim-log/1"


class LogSchemaError(ValueError):
    """Log line does not match the schema; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


def derive_seed(*parts) -> int:
    """Stable sub-seed from labelled parts (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class TrialRecord:
    participant: str
    study: str
    trial_index: int
    channel: int | str | None
    target_finger: str | None
    visual_size: str | None
    visual_opacity: str | None
    policy: str
    intensity_ua: int
    seed: int
    t_start_ms: int
    t_stim_ms: int
    t_report_ms: int
    report: SensationReport | None
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["report"] = self.report.to_dict() if self.report is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        d = dict(d)
        rep = d.get("report")
        d["report"] = SensationReport.from_dict(rep) if rep is not None else None
        return cls(**d)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_log(path, records: list[TrialRecord], config: dict,
              complete: bool = True) -> None:
    with open(path, "w") as f:
        f.write(_dumps({"kind": "header", "version": LOG_VERSION,
                        "config": config}) + "\n")
        for rec in records:
            f.write(_dumps({"kind": "trial", **rec.to_dict()}) + "\n")
        f.write(_dumps({"kind": "footer", "complete": complete,
                        "trials": len(records)}) + "\n")


def read_log(path) -> tuple[dict, list[TrialRecord], dict]:
    """Returns (header, records, footer); raises LogSchemaError with the
    offending line number on any malformed content."""
    header = None
    footer = None
    records: list[TrialRecord] = []
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise LogSchemaError("log is empty")
    for i, line in enumerate(lines, start=1):
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise LogSchemaError(f"not valid JSON ({e.msg})", i) from e
        kind = d.get("kind")
        if kind == "header":
            if i != 1:
                raise LogSchemaError("header must be the first line", i)
            if d.get("version") != LOG_VERSION:
                raise LogSchemaError(
                    f"unsupported log version {d.get('version')!r}", i)
            header = d
        elif kind == "trial":
            if header is None:
                raise LogSchemaError("trial before header", i)
            d.pop("kind")
            try:
                records.append(TrialRecord.from_dict(d))
            except (KeyError, TypeError, ValueError) as e:
                raise LogSchemaError(f"bad trial record: {e}", i) from e
        elif kind == "footer":
            footer = d
            if i != len(lines):
                raise LogSchemaError("footer must be the last line", i)
        else:
            raise LogSchemaError(f"unknown record kind {kind!r}", i)
    if header is None:
        raise LogSchemaError("missing header")
    if footer is None:
        raise LogSchemaError("missing footer (aborted session?)")
    return header, records, footer

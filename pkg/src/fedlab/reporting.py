"""Per-round CSV and summary JSON artifacts, plus their validators."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import ArtifactError, ConfigError

CSV_COLUMNS = ["round", "strategy", "accuracy", "loss", "client_macs", "server_macs", "wall_seconds"]
SUMMARY_SCHEMA = "fedlab.summary/1"
SUMMARY_FIELDS = {
    "final_accuracy": float,
    "best_accuracy": float,
    "final_loss": float,
    "rounds_to_threshold": (int, type(None)),
    "total_client_macs": int,
    "total_server_macs": int,
    "total_macs": int,
    "wall_seconds": float,
}


class SchemaError(ConfigError):
    """An artifact does not match its documented layout."""


def _f6(x: float) -> str:
    # locale-independent fixed precision
    return format(float(x), ".6f")


def rounds_csv(records, include_wall_clock: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.round,
            r.strategy,
            _f6(r.accuracy),
            _f6(r.loss),
            r.total_client_macs,
            r.server_macs,
            _f6(r.wall_seconds) if include_wall_clock else "",
        ])
    return buf.getvalue()


def summarize(records, threshold: float) -> dict:
    if not records:
        return {
            "final_accuracy": 0.0, "best_accuracy": 0.0, "final_loss": 0.0, "rounds_to_threshold": None,
            "total_client_macs": 0, "total_server_macs": 0, "total_macs": 0, "wall_seconds": 0.0,
        }
    reached = [r.round for r in records if r.accuracy >= threshold]
    client = sum(r.total_client_macs for r in records)
    server = sum(r.server_macs for r in records)
    return {
        "final_accuracy": float(records[-1].accuracy),
        "best_accuracy": float(max(r.accuracy for r in records)),
        "final_loss": float(records[-1].loss),
        "rounds_to_threshold": reached[0] if reached else None,
        "total_client_macs": int(client),
        "total_server_macs": int(server),
        "total_macs": int(client + server),
        "wall_seconds": float(sum(r.wall_seconds for r in records)),
    }


def summary_document(per_strategy: Mapping[str, dict], seed: int, rounds: int, threshold: float,
                     config: Optional[dict] = None) -> dict:
    return {
        "schema": SUMMARY_SCHEMA,
        "seed": int(seed),
        "rounds": int(rounds),
        "accuracy_threshold": float(threshold),
        "strategies": dict(per_strategy),
        "config": config or {},
    }


def validate_summary(doc, source: str = "<summary>") -> dict:
    if not isinstance(doc, dict):
        raise SchemaError("summary must be a JSON object", None, source)
    if doc.get("schema") != SUMMARY_SCHEMA:
        raise SchemaError(f"expected schema {SUMMARY_SCHEMA!r}, got {doc.get('schema')!r}", None, source)
    for key, typ in (("seed", int), ("rounds", int), ("accuracy_threshold", (int, float))):
        if not isinstance(doc.get(key), typ) or isinstance(doc.get(key), bool):
            raise SchemaError(f"{key!r} missing or mistyped", None, source)
    strategies = doc.get("strategies")
    if not isinstance(strategies, dict) or not strategies:
        raise SchemaError("'strategies' must be a non-empty object", None, source)
    for name, entry in strategies.items():
        if not isinstance(entry, dict):
            raise SchemaError(f"strategy {name!r} is not an object", None, source)
        for key, typ in SUMMARY_FIELDS.items():
            if key not in entry:
                raise SchemaError(f"strategy {name!r} lacks {key!r}", None, source)
            value = entry[key]
            ok_types = typ if isinstance(typ, tuple) else (typ,)
            if float in ok_types:
                ok_types = ok_types + (int,)
            if isinstance(value, bool) or not isinstance(value, ok_types):
                raise SchemaError(f"strategy {name!r}: {key!r} has wrong type", None, source)
    return doc


def validate_rounds_csv(text: str, expected_rows: Optional[int] = None) -> int:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_COLUMNS:
        raise ArtifactError("rounds CSV header mismatch")
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_COLUMNS):
            raise ArtifactError(f"rounds CSV line {lineno} has {len(row)} fields")
        try:
            int(row[0]), float(row[2]), float(row[3]), int(row[4]), int(row[5])
        except ValueError:
            raise ArtifactError(f"rounds CSV line {lineno} has a malformed number") from None
    n = len(rows) - 1
    if expected_rows is not None and n != expected_rows:
        raise ArtifactError(f"rounds CSV has {n} data rows, expected {expected_rows}")
    return n


def load_summary(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read summary: {exc.strerror or exc}", None, str(path)) from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON ({exc.msg})", exc.lineno, str(path)) from None
    return validate_summary(doc, str(path))


# metric -> (summary key, higher is better)
COMPARE_METRICS = [
    ("final_accuracy", "final_accuracy", True),
    ("final_loss", "final_loss", False),
    ("rounds_to_threshold", "rounds_to_threshold", False),
    ("total_client_macs", "total_client_macs", False),
    ("total_server_macs", "total_server_macs", False),
    ("total_macs", "total_macs", False),
]


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return _f6(v)
    return str(v)


def compare_report(summaries: Sequence[tuple[str, dict]]) -> str:
    """Side-by-side table, deltas against the first file, and one verdict per metric."""
    entries = []
    for label, doc in summaries:
        for strat, stats in doc["strategies"].items():
            entries.append((f"{label}:{strat}", strat, stats))
    base_label, base_doc = summaries[0]
    base_first = next(iter(base_doc["strategies"].values()))

    width = max(len(e[0]) for e in entries) + 2
    head = "entry".ljust(width) + "".join(m[0].rjust(22) for m in COMPARE_METRICS)
    lines = [head, "-" * len(head)]
    for name, _, stats in entries:
        lines.append(name.ljust(width) + "".join(_fmt(stats[m[1]]).rjust(22) for m in COMPARE_METRICS))

    lines.append("")
    lines.append(f"deltas vs {base_label} (same strategy where present):")
    for name, strat, stats in entries[len(base_doc["strategies"]):]:
        ref = base_doc["strategies"].get(strat, base_first)
        cells = []
        for metric, key, _ in COMPARE_METRICS:
            a, b = stats[key], ref[key]
            if a is None or b is None:
                cells.append("-".rjust(22))
            else:
                d = a - b
                cells.append((_f6(d) if isinstance(d, float) else f"{d:+d}").rjust(22))
        lines.append(name.ljust(width) + "".join(cells))

    lines.append("")
    for metric, key, higher in COMPARE_METRICS:
        scored = [(e[2][key], e[0]) for e in entries if e[2][key] is not None]
        if not scored:
            lines.append(f"verdict {metric}: no entry has a value")
            continue
        best = max(v for v, _ in scored) if higher else min(v for v, _ in scored)
        winners = [n for v, n in scored if v == best]
        if len(winners) == len(entries):
            lines.append(f"verdict {metric}: all entries tie at {_fmt(best)}")
        else:
            lines.append(f"verdict {metric}: best {', '.join(winners)} ({_fmt(best)})")
    return "\n".join(lines) + "\n"

"""Line-delimited JSON persistence of sweep records, plus CSV export."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .sweep import PointStats, SampleRecord

SCHEMA_NAME = "noisyansatz.sample-record"
SCHEMA_VERSION = 1


class RecordVersionError(ValueError):
    def __init__(self, expected, found):
        super().__init__(f"record schema version mismatch: expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class CorruptRecordWarning(UserWarning):
    pass


@dataclass
class LoadResult:
    records: list = field(default_factory=list)
    skipped: int = 0


def header() -> dict:
    return {"schema": SCHEMA_NAME, "version": SCHEMA_VERSION}


class RecordWriter:
    """Append-only sink; writes the schema header once, then one record per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = self.path.open("w")
        self._fh.write(json.dumps(header()) + "\n")

    def __call__(self, record: SampleRecord) -> None:
        self._fh.write(json.dumps(record.to_dict()) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def persist(records, path: str | Path) -> Path:
    with RecordWriter(path) as w:
        for r in records:
            w(r)
    return Path(path)


def load(path: str | Path) -> LoadResult:
    lines = Path(path).read_text().splitlines()
    out = LoadResult()
    if not lines or not lines[0].strip():
        return out
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise RecordVersionError(SCHEMA_VERSION, "unreadable header") from exc
    if head.get("schema") != SCHEMA_NAME or head.get("version") != SCHEMA_VERSION:
        raise RecordVersionError(SCHEMA_VERSION, head.get("version"))
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            out.records.append(SampleRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            out.skipped += 1
            warnings.warn(f"line {lineno}: skipped corrupted record ({exc})", CorruptRecordWarning, stacklevel=2)
    return out


CSV_COLUMNS = ("N", "M", "gamma", "noise", "objective", "mode", "sample", "seed", "best", "tested", "final",
               "iterations", "evaluations", "stop_reason", "K")


def write_records_csv(records, path: str | Path) -> Path:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        metric_keys = sorted({k for r in records for k in r.metrics})
        pred_keys = sorted({k for r in records for k in r.predicted})
        w.writerow(list(CSV_COLUMNS) + metric_keys + [f"predicted_{k}" for k in pred_keys])
        for r in records:
            d = r.to_dict()
            w.writerow([d[c] for c in CSV_COLUMNS] + [r.metrics.get(k, "") for k in metric_keys]
                       + [r.predicted.get(k, "") for k in pred_keys])
    return Path(path)


def write_stats_csv(stats: dict, path: str | Path) -> Path:
    """Aggregated statistics, one row per grid point (the fit's input format).

    The ``std_log`` column is the symmetric error bar used on logarithmic plots.
    """
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "M", "gamma", "noise", "objective", "mode", "mean", "std", "count", "std_log"])
        for (N, M, g, k, o, mo), s in stats.items():
            std_log = s.std / s.mean if s.mean > 0 else math.nan
            w.writerow([N, M, g, k, o, mo, s.mean, s.std, s.count, std_log])
    return Path(path)


def read_stats_csv(path: str | Path) -> dict:
    out = {}
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            key = (int(row["N"]), int(row["M"]), float(row["gamma"]), row["noise"], row["objective"], row["mode"])
            out[key] = PointStats(float(row["mean"]), float(row["std"]), int(row["count"]))
    return out


__all__ = [
    "CorruptRecordWarning",
    "LoadResult",
    "RecordVersionError",
    "RecordWriter",
    "load",
    "persist",
    "read_stats_csv",
    "write_records_csv",
    "write_stats_csv",
]

"""Log persistence.

* ``log.jsonl``: first line ``{"header": ...}``, then one JSON object per
  record. Floats are written with ``repr`` precision so a round trip is
  exact.
* ``log.csv``: flat per-trajectory table with the fixed column order
  ``iter, strategy, eta_1..eta_d1, crit, xi_hat, unsafe, rmse, coverage,
  seed``. Missing values are empty cells; wall-clock time is deliberately
  left out so reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .records import ExperimentLog, Record, to_plain

__all__ = [
    "JsonlWriter",
    "write_jsonl",
    "read_jsonl",
    "csv_columns",
    "write_csv",
    "read_csv",
    "csv_text",
]


def _dumps(obj) -> str:
    return json.dumps(to_plain(obj), allow_nan=True, separators=(",", ":"))


class JsonlWriter:
    """Streams a log to disk record by record so partial runs survive."""

    def __init__(self, path, header: dict):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w")
        self._fh.write(_dumps({"header": header}) + "\n")
        self._fh.flush()

    def __call__(self, record: Record):
        self._fh.write(_dumps(record.to_dict()) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_jsonl(log: ExperimentLog, path) -> Path:
    with JsonlWriter(path, log.header) as writer:
        for record in log.records:
            writer(record)
    return Path(path)


def read_jsonl(path) -> ExperimentLog:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path} is empty")
    header = json.loads(lines[0])["header"]
    records = [Record.from_dict(json.loads(line)) for line in lines[1:] if line.strip()]
    return ExperimentLog(header, records)


def csv_columns(d1: int) -> list:
    return (["iter", "strategy"] + [f"eta_{j + 1}" for j in range(d1)]
            + ["crit", "xi_hat", "unsafe", "rmse", "coverage", "seed"])


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _rows(log: ExperimentLog):
    for r in log.records:
        yield ([r.iteration, r.strategy] + list(r.eta)
               + [r.criterion, r.xi_hat, r.unsafe, r.rmse, r.coverage, r.seed])


def csv_text(log: ExperimentLog) -> str:
    d1 = len(log.records[0].eta) if log.records else int(log.header.get("nx", {}).get("d1", 1))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_columns(d1))
    for row in _rows(log):
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(log: ExperimentLog, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(log))
    return path


def _parse(column, text):
    if text == "":
        return None
    if column in ("iter", "seed"):
        return int(text)
    if column == "strategy":
        return text
    if column == "unsafe":
        return bool(int(text))
    return float(text)


def read_csv(path) -> list:
    """Rows of a log CSV as dicts with typed values."""
    with Path(path).open(newline="") as fh:
        return [{k: _parse(k, v) for k, v in row.items()} for row in csv.DictReader(fh)]

"""CSV ingestion and deterministic writers for TSV plot data and JSON reports.

Market files have the header ``date,ticker,close,volume`` with ISO dates;
index series use tickers prefixed ``IDX:``. Label files have the header
``ticker,sector_label``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IntegrityError, ParseError
from .timeseries import DailySeries

log = logging.getLogger(__name__)

MARKET_HEADER = ["date", "ticker", "close", "volume"]
LABEL_HEADER = ["ticker", "sector_label"]
INDEX_PREFIX = "IDX:"
KINDS = ("price", "volume", "index", "labels")


@dataclass
class IngestResult:
    data: dict
    rows: int = 0
    rejected: int = 0
    warnings: list = field(default_factory=list)


def _parse_float(text, line, name):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{name} {text!r} is not a number", line) from None


def _read_labels(path: Path) -> IngestResult:
    out = IngestResult({})
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            out.warnings.append(f"{path}: empty file")
            return out
        if [h.strip() for h in header] != LABEL_HEADER:
            raise ParseError(f"expected header {','.join(LABEL_HEADER)}, got {','.join(header)}", 1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line)
            ticker, label = row[0].strip(), row[1].strip()
            if not ticker:
                raise ParseError("empty ticker", line)
            if ticker in out.data:
                raise IntegrityError(f"duplicate label for ticker {ticker!r}", line)
            out.data[ticker] = label
            out.rows += 1
    return out


def ingest_csv(path, kind: str) -> IngestResult:
    """Parse one file into ``{ticker: DailySeries}`` or a label map.

    ``kind`` is ``price`` (close of non-index tickers), ``volume`` (volume of
    non-index tickers), ``index`` (close of ``IDX:`` tickers) or ``labels``.
    Rows whose selected field is empty or non-positive are rejected and
    counted; structurally malformed rows raise :class:`ParseError` and a
    repeated (ticker, date) raises :class:`IntegrityError`.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    path = Path(path)
    if kind == "labels":
        return _read_labels(path)

    column = "volume" if kind == "volume" else "close"
    want_index = kind == "index"
    out = IngestResult({})
    seen = {}
    buckets = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            out.warnings.append(f"{path}: empty file")
            log.warning("%s: empty file", path)
            return out
        if [h.strip() for h in header] != MARKET_HEADER:
            raise ParseError(f"expected header {','.join(MARKET_HEADER)}, got {','.join(header)}", 1)
        col = MARKET_HEADER.index(column)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", line)
            date_text, ticker = row[0].strip(), row[1].strip()
            if not ticker:
                raise ParseError("empty ticker", line)
            try:
                date = np.datetime64(date_text, "D")
            except ValueError:
                raise ParseError(f"bad date {date_text!r}", line) from None
            if str(date) != date_text:
                raise ParseError(f"date {date_text!r} is not ISO yyyy-mm-dd", line)
            key = (ticker, date_text)
            if key in seen:
                raise IntegrityError(
                    f"duplicate row for {ticker} on {date_text} (first on line {seen[key]})", line
                )
            seen[key] = line
            if ticker.startswith(INDEX_PREFIX) != want_index:
                continue
            out.rows += 1
            text = row[col].strip()
            if not text:
                out.rejected += 1
                continue
            value = _parse_float(text, line, column)
            if not value > 0 or not math.isfinite(value):
                out.rejected += 1
                continue
            buckets[ticker].append((date, value))

    for ticker in sorted(buckets):
        pairs = sorted(buckets[ticker])
        out.data[ticker] = DailySeries(
            ticker, np.array([d for d, _ in pairs]), np.array([v for _, v in pairs])
        )
    if not out.data:
        out.warnings.append(f"{path}: no {kind} series found")
    return out


def write_market_csv(path, close: dict, volume: dict | None = None):
    """``close`` and ``volume`` map ticker -> (dates, values). Values are
    written with ``repr`` so a re-read is exact."""
    volume = volume or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MARKET_HEADER)
        for ticker in close:
            dates, values = close[ticker]
            vols = volume.get(ticker, (None, [None] * len(values)))[1]
            for d, c, v in zip(dates, values, vols):
                w.writerow([str(d), ticker, repr(float(c)), "" if v is None else repr(float(v))])


def write_labels_csv(path, labels: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_HEADER)
        for t, lab in labels.items():
            w.writerow([t, lab])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_tsv(path, header, rows):
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def read_tsv(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    return header, rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.datetime64):
        return str(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()

"""Data ingestion: FASTA sequences, numeric series, event dates binned to weeks."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .segmodels import encode_dna

__all__ = ["DataError", "IngestedData", "read_series", "FORMATS"]

FORMATS = ("fasta", "numeric", "event-dates")

WEEK_CONVENTION = "consecutive 7-day blocks starting at the first event date"


class DataError(ValueError):
    """Malformed input data; message carries the offending line number."""


@dataclass
class IngestedData:
    values: np.ndarray = field(repr=False)
    kind: str  # "dna" | "numeric" | "counts"
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.values.size)


def read_series(path, fmt: str) -> IngestedData:
    path = Path(path)
    if fmt not in FORMATS:
        raise DataError(f"unknown data format {fmt!r}; expected one of {FORMATS}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if fmt == "fasta":
        return _read_fasta(text)
    if fmt == "numeric":
        return _read_numeric(text)
    return _read_event_dates(text)


def _read_fasta(text: str) -> IngestedData:
    chunks = []
    headers = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith(">"):
            headers.append(stripped[1:].strip())
            continue
        try:
            chunks.append(encode_dna(stripped))
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from exc
    if not chunks:
        raise DataError("no sequence data found")
    codes = np.concatenate(chunks)
    return IngestedData(values=codes, kind="dna", meta={"headers": headers})


def _read_numeric(text: str) -> IngestedData:
    values = []
    lines = text.splitlines()
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            raise DataError(f"line {lineno}: blank line")
        try:
            values.append(float(stripped))
        except ValueError:
            raise DataError(f"line {lineno}: not a number: {stripped!r}")
    if not values:
        raise DataError("no values found")
    return IngestedData(values=np.asarray(values, dtype=float), kind="numeric", meta={})


def _parse_date(token: str, lineno: int) -> dt.date:
    try:
        return dt.date.fromisoformat(token)
    except ValueError:
        pass
    # Decimal years are a common distribution format for dated event series.
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"line {lineno}: not a date: {token!r}")
    year = int(value)
    if not 1000 <= year <= 3000:
        raise DataError(f"line {lineno}: implausible year in {token!r}")
    start = dt.date(year, 1, 1)
    days_in_year = (dt.date(year + 1, 1, 1) - start).days
    offset = int((value - year) * days_in_year)
    return start + dt.timedelta(days=min(offset, days_in_year - 1))


def _read_event_dates(text: str) -> IngestedData:
    dates = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            raise DataError(f"line {lineno}: blank line")
        dates.append(_parse_date(stripped, lineno))
    if not dates:
        raise DataError("no events found")
    dates.sort()
    first, last = dates[0], dates[-1]
    week_idx = np.array([(d - first).days // 7 for d in dates])
    counts = np.bincount(week_idx, minlength=int(week_idx.max()) + 1).astype(np.int64)
    meta = {
        "first_event": first.isoformat(),
        "last_event": last.isoformat(),
        "events": len(dates),
        "week_convention": WEEK_CONVENTION,
    }
    return IngestedData(values=counts, kind="counts", meta=meta)

"""Parsing of raw monthly import records and per-product aggregation."""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, TextIO

import numpy as np

from .errors import RowError, SchemaError
from .series import MonthStamp, TimeSeries, Unit

log = logging.getLogger(__name__)

DEFAULT_SCHEMA = {"year": "ANIO", "month": "MES", "product": "PRODUCTO", "weight": "PESO"}
IDENTITY_SCHEMA = {"year": "year", "month": "month", "product": "product", "weight": "weight"}


@dataclass(frozen=True)
class SeriesRecord:
    year: int
    month: int
    product_id: str
    weight_kg: float

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month {self.month} outside 1..12")
        if not (math.isfinite(self.weight_kg) and self.weight_kg >= 0):
            raise ValueError(f"weight {self.weight_kg!r} must be finite and non-negative")
        if not self.product_id:
            raise ValueError("empty product id")

    @property
    def stamp(self) -> MonthStamp:
        return MonthStamp(self.year, self.month)


@dataclass(frozen=True)
class ProductShare:
    product_id: str
    total_kg: float
    share: float


def _parse_row(row: dict, schema: Mapping[str, str], line: int) -> SeriesRecord:
    try:
        year = int(row[schema["year"]].strip())
    except (AttributeError, TypeError, ValueError):
        raise RowError(line, f"year {row[schema['year']]!r} is not an integer") from None
    try:
        month = int(row[schema["month"]].strip())
    except (AttributeError, TypeError, ValueError):
        raise RowError(line, f"month {row[schema['month']]!r} is not an integer") from None
    if not 1 <= month <= 12:
        raise RowError(line, f"month {month} outside 1..12")
    raw_weight = row[schema["weight"]]
    try:
        weight = float(raw_weight.strip())
    except (AttributeError, TypeError, ValueError):
        raise RowError(line, f"weight {raw_weight!r} is not numeric") from None
    if not math.isfinite(weight) or weight < 0:
        raise RowError(line, f"weight {raw_weight!r} must be finite and non-negative")
    product = (row[schema["product"]] or "").strip()
    if not product:
        raise RowError(line, "empty product id")
    return SeriesRecord(year, month, product, weight)


def parse_records(
    text: TextIO | Iterable[str],
    schema: Mapping[str, str] | None = None,
    *,
    delimiter: str = ",",
    on_error: str = "raise",
    rejected: list[RowError] | None = None,
) -> list[SeriesRecord]:
    """Read delimiter-separated import rows into records, in file order.

    ``schema`` maps the logical columns ``year``, ``month``, ``product`` and
    ``weight`` to header names (defaults to ANIO/MES/PRODUCTO/PESO); other
    columns are ignored. With ``on_error="skip"`` invalid rows are dropped
    and, if given, appended to ``rejected``; otherwise the first one raises
    :class:`RowError`.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip'")
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    missing_keys = set(DEFAULT_SCHEMA) - set(schema)
    if missing_keys:
        raise ValueError(f"schema lacks logical columns: {sorted(missing_keys)}")

    reader = csv.DictReader(text, delimiter=delimiter)
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    for logical in ("year", "month", "product", "weight"):
        if schema[logical] not in header:
            raise SchemaError(schema[logical], header)

    records = []
    skipped = 0
    for row in reader:
        if not any((v or "").strip() for v in row.values() if isinstance(v, str)):
            continue
        try:
            records.append(_parse_row(row, schema, reader.line_num))
        except RowError as exc:
            if on_error == "raise":
                raise
            skipped += 1
            if rejected is not None:
                rejected.append(exc)
    if skipped:
        log.warning("skipped %d invalid rows", skipped)
    return records


def build_timeline(
    records: Iterable[SeriesRecord], product: str | None = None
) -> tuple[TimeSeries, list[MonthStamp]]:
    """Sum weights per month onto a gap-free grid.

    Returns the series and the list of months that had no matching record
    (those are zero-filled).
    """
    groups: dict[int, list[float]] = defaultdict(list)
    for r in records:
        if product is None or r.product_id == product:
            groups[r.stamp.ordinal].append(r.weight_kg)
    totals = {k: math.fsum(v) for k, v in groups.items()}
    if not totals:
        what = f"product {product!r}" if product is not None else "the record set"
        raise ValueError(f"no records for {what}")
    first, last = min(totals), max(totals)
    values = np.zeros(last - first + 1)
    gaps = []
    for k in range(first, last + 1):
        if k in totals:
            values[k - first] = totals[k]
        else:
            gaps.append(MonthStamp.from_ordinal(k))
    return TimeSeries(MonthStamp.from_ordinal(first), values, Unit.RAW_KG), gaps


def compute_shares(records: Iterable[SeriesRecord]) -> list[ProductShare]:
    groups: dict[str, list[float]] = defaultdict(list)
    for r in records:
        groups[r.product_id].append(r.weight_kg)
    if not groups:
        raise ValueError("no records to compute shares from")
    # fsum keeps the result independent of record order
    totals = {p: math.fsum(v) for p, v in groups.items()}
    grand = math.fsum(totals.values())
    if grand <= 0:
        raise ValueError("total weight is zero; shares are undefined")
    shares = [ProductShare(p, kg, kg / grand) for p, kg in totals.items()]
    shares.sort(key=lambda s: (-s.share, s.product_id))
    return shares


def write_shares(shares: Iterable[ProductShare], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["product_id", "total_kg", "share"])
    for s in shares:
        writer.writerow([s.product_id, repr(s.total_kg), repr(s.share)])

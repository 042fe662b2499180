"""Readers and alignment for the three input families.

CSV layouts (UTF-8, header row, months as YYYY-MM, dot decimals):

  prices.csv   month,price[,market]
  msp.csv      effective_month,msp
  climate.csv  month,variable,scenario,model,value

A dataset bundle is a directory holding those three files plus a
manifest.json with crop/state/unit/provenance labels. Gaps are never
interpolated: any missing month fails loudly with the month list.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .series import MonthlySeries, MonthStamp

VARIABLES = ("tasmax", "tasmin", "tas", "pr")
SCENARIOS = ("historical", "SSP2-4.5", "SSP5-8.5")
HISTORICAL_RANGE = (MonthStamp(1970, 1), MonthStamp(2015, 12))
PROJECTION_RANGE = (MonthStamp(2015, 1), MonthStamp(2100, 12))

VARIABLE_UNITS = {"tasmax": "degC", "tasmin": "degC", "tas": "degC", "pr": "mm-per-month"}


@dataclass(frozen=True)
class ClimateRecord:
    month: MonthStamp
    variable: str
    scenario: str
    model: str
    value: float


def _parse_month(text: str, path: str, line: int) -> MonthStamp:
    try:
        return MonthStamp.parse(text)
    except ValueError as e:
        raise DataError(f"{path}:{line}: {e}") from None


def _parse_float(text: str, path: str, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{line}: unparseable {what} {text!r}") from None


def _require_columns(header: list[str], needed: tuple[str, ...], path: str) -> None:
    missing = [c for c in needed if c not in header]
    if missing:
        raise DataError(f"{path}: missing columns {missing} in header {header}")


def _check_contiguous(months: list[MonthStamp], path: str) -> None:
    gaps = []
    for prev, cur in zip(months, months[1:]):
        expected = prev.plus(1)
        while expected < cur:
            gaps.append(str(expected))
            expected = expected.plus(1)
    if gaps:
        raise DataError(f"{path}: missing months {gaps}")


def read_price_csv(path, average_duplicates: bool = False) -> MonthlySeries:
    """Monthly price series; duplicate months are an error unless averaging.

    Rows sharing a month (e.g. several markets) are averaged only when
    `average_duplicates` is set.
    """
    path = str(path)
    by_month: dict[MonthStamp, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        _require_columns(reader.fieldnames, ("month", "price"), path)
        n_rows = 0
        for line, row in enumerate(reader, start=2):
            month = _parse_month(row["month"], path, line)
            price = _parse_float(row["price"], path, line, "price")
            if price <= 0:
                raise DataError(f"{path}:{line}: non-positive price {price} at {month}")
            by_month.setdefault(month, []).append(price)
            n_rows += 1
    if n_rows == 0:
        raise DataError(f"{path}: no data rows")

    dupes = sorted(str(m) for m, v in by_month.items() if len(v) > 1)
    if dupes and not average_duplicates:
        raise DataError(f"{path}: duplicate months {dupes}; pass average_duplicates to average")
    months = sorted(by_month)
    _check_contiguous(months, path)
    values = [float(np.mean(by_month[m])) for m in months]
    return MonthlySeries(months[0], values, unit="INR-per-quintal")


def read_msp_csv(path, start: MonthStamp, end: MonthStamp) -> MonthlySeries:
    """Forward-filled monthly floor-price series over start..end."""
    path = str(path)
    if end < start:
        raise ValueError(f"empty calendar {start}..{end}")
    records: list[tuple[MonthStamp, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        _require_columns(reader.fieldnames, ("effective_month", "msp"), path)
        for line, row in enumerate(reader, start=2):
            month = _parse_month(row["effective_month"], path, line)
            msp = _parse_float(row["msp"], path, line, "msp")
            if msp <= 0:
                raise DataError(f"{path}:{line}: non-positive msp {msp}")
            records.append((month, msp))
    if not records:
        raise DataError(f"{path}: no data rows")
    records.sort(key=lambda r: r[0])
    if records[0][0] > start:
        raise DataError(
            f"{path}: first record {records[0][0]} is after calendar start {start}"
        )
    n = end.months_since(start) + 1
    values = np.empty(n)
    level = None
    idx = 0
    for i in range(n):
        month = start.plus(i)
        while idx < len(records) and records[idx][0] <= month:
            level = records[idx][1]
            idx += 1
        values[i] = level
    return MonthlySeries(start, values, unit="INR-per-quintal")


def read_climate_csv(path) -> list[ClimateRecord]:
    """Validated climate rows; SSP rows outside 2015-2100 are rejected,
    historical rows outside 1970-2015 only warn."""
    path = str(path)
    records: list[ClimateRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        _require_columns(reader.fieldnames, ("month", "variable", "scenario", "model", "value"), path)
        for line, row in enumerate(reader, start=2):
            variable = row["variable"].strip()
            scenario = row["scenario"].strip()
            if variable not in VARIABLES:
                raise DataError(f"{path}:{line}: unknown variable {variable!r}")
            if scenario not in SCENARIOS:
                raise DataError(f"{path}:{line}: unknown scenario {scenario!r}")
            month = _parse_month(row["month"], path, line)
            value = _parse_float(row["value"], path, line, "value")
            if scenario == "historical":
                lo, hi = HISTORICAL_RANGE
                if not lo <= month <= hi:
                    warnings.warn(
                        f"{path}:{line}: historical month {month} outside {lo}..{hi}",
                        stacklevel=2,
                    )
            else:
                lo, hi = PROJECTION_RANGE
                if not lo <= month <= hi:
                    raise DataError(
                        f"{path}:{line}: {scenario} month {month} outside {lo}..{hi}"
                    )
            records.append(ClimateRecord(month, variable, scenario, row["model"].strip(), value))
    if not records:
        raise DataError(f"{path}: no data rows")
    return records


def ensemble_mean(records, variable: str, scenario: str) -> MonthlySeries:
    """Per-month arithmetic mean over the members reporting that month."""
    sel = [r for r in records if r.variable == variable and r.scenario == scenario]
    if not sel:
        raise DataError(f"no members for variable={variable} scenario={scenario}")
    by_month: dict[MonthStamp, list[float]] = {}
    for r in sel:
        by_month.setdefault(r.month, []).append(r.value)
    months = sorted(by_month)
    _check_contiguous(months, f"ensemble {variable}/{scenario}")
    values = []
    for m in months:
        vals = by_month[m]
        # identical members must average to the member value exactly
        if all(v == vals[0] for v in vals):
            values.append(vals[0])
        else:
            values.append(float(np.mean(vals)))
    return MonthlySeries(months[0], values, unit=VARIABLE_UNITS[variable])


def member_counts(records, variable: str, scenario: str) -> dict[str, int]:
    """Total reported months per GCM for one (variable, scenario)."""
    out: dict[str, int] = {}
    for r in records:
        if r.variable == variable and r.scenario == scenario:
            out[r.model] = out.get(r.model, 0) + 1
    return out


@dataclass
class ClimatePanel:
    """Ensemble-mean view per (variable, scenario) with member metadata."""

    means: dict[tuple[str, str], MonthlySeries]
    members: dict[tuple[str, str], dict[str, MonthlySeries]]
    counts: dict[tuple[str, str], dict[str, int]]

    @classmethod
    def from_records(cls, records) -> "ClimatePanel":
        keys = sorted({(r.variable, r.scenario) for r in records})
        means, members, counts = {}, {}, {}
        for key in keys:
            variable, scenario = key
            means[key] = ensemble_mean(records, variable, scenario)
            counts[key] = member_counts(records, variable, scenario)
            per_model: dict[str, dict[MonthStamp, float]] = {}
            for r in records:
                if (r.variable, r.scenario) == key:
                    per_model.setdefault(r.model, {})[r.month] = r.value
            members[key] = {}
            for model, series_map in sorted(per_model.items()):
                months = sorted(series_map)
                _check_contiguous(months, f"{variable}/{scenario}/{model}")
                members[key][model] = MonthlySeries(
                    months[0], [series_map[m] for m in months], unit=VARIABLE_UNITS[variable]
                )
        return cls(means=means, members=members, counts=counts)


def anomalies(series: MonthlySeries, baseline_start: MonthStamp, baseline_end: MonthStamp) -> MonthlySeries:
    """Deviation from the per-calendar-month mean over the baseline window."""
    n_baseline = baseline_end.months_since(baseline_start) + 1
    if n_baseline < 12:
        raise DataError(f"baseline {baseline_start}..{baseline_end} shorter than 12 months")
    series.index_of(baseline_start)
    series.index_of(baseline_end)

    climatology = np.zeros(12)
    counts = np.zeros(12)
    for i in range(n_baseline):
        stamp = baseline_start.plus(i)
        climatology[stamp.month - 1] += series.at(stamp)
        counts[stamp.month - 1] += 1
    climatology /= counts

    out = np.array(
        [series.values[i] - climatology[series.stamp_at(i).month - 1] for i in range(len(series))]
    )
    return MonthlySeries(series.start, out, unit=series.unit)


def align_panel(*series: MonthlySeries, min_months: int = 24):
    """Trim all series to the intersection of their calendars.

    Returns (aligned list, report) where the report lists the range dropped
    from each series. Fails when the overlap is shorter than `min_months`.
    """
    if len(series) < 2:
        raise ValueError("need at least two series to align")
    start = max(s.start for s in series)
    end = min(s.end for s in series)
    overlap = end.months_since(start) + 1
    if overlap <= 0:
        raise DataError("series calendars do not overlap")
    if overlap < min_months:
        raise DataError(f"aligned overlap is {overlap} months; need at least {min_months}")
    aligned = [s.slice_range(start, end) for s in series]
    report = {
        "start": str(start),
        "end": str(end),
        "months": overlap,
        "dropped": [
            {"before": start.months_since(s.start), "after": s.end.months_since(end)}
            for s in series
        ],
    }
    return aligned, report


@dataclass
class Dataset:
    """A loaded dataset bundle."""

    prices: MonthlySeries
    msp: MonthlySeries
    climate: list[ClimateRecord]
    panel: ClimatePanel
    manifest: dict


def read_dataset(directory, average_duplicate_prices: bool = False) -> Dataset:
    """Load prices.csv, msp.csv, climate.csv and manifest.json from a directory."""
    d = Path(directory)
    manifest_path = d / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"{d}: missing manifest.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for key in ("crop", "state", "units", "provenance"):
        if key not in manifest:
            raise DataError(f"{manifest_path}: manifest missing key {key!r}")
    prices = read_price_csv(d / "prices.csv", average_duplicates=average_duplicate_prices)
    msp = read_msp_csv(d / "msp.csv", prices.start, prices.end)
    climate = read_climate_csv(d / "climate.csv")
    panel = ClimatePanel.from_records(climate)
    return Dataset(prices=prices, msp=msp, climate=climate, panel=panel, manifest=manifest)

"""Monthly panel containers, calendar arithmetic and series transformations.

The panel is an unbalanced country-month panel of outcome variables plus a
set of common euro-area control series.  Identified shocks live on the same
monthly calendar; months without a policy event carry a zero that is flagged
as filled.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .errors import DataError

OUTCOME_VARIABLES = (
    "reer",
    "unemployment",
    "cpi",
    "industrial_production",
    "long_term_rate",
)
EURO_CONTROLS = (
    "ea_reer",
    "ea_unemployment",
    "ea_cpi",
    "ea_industrial_production",
)
SHOCK_KINDS = ("monetary", "information", "spread")


@dataclass(frozen=True, order=True)
class CalendarMonth:
    """A (year, month) pair with total ordering and month arithmetic."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise DataError(f"month out of range: {self.year}-{self.month}")

    @property
    def index(self) -> int:
        return self.year * 12 + self.month - 1

    def shift(self, months: int) -> "CalendarMonth":
        i = self.index + months
        return CalendarMonth(i // 12, i % 12 + 1)

    def months_since(self, other: "CalendarMonth") -> int:
        return self.index - other.index

    @classmethod
    def parse(cls, text: str) -> "CalendarMonth":
        try:
            y, m = text.strip().split("-")
            return cls(int(y), int(m))
        except (ValueError, TypeError) as exc:
            raise DataError(f"cannot parse month {text!r}, expected YYYY-MM") from exc

    @classmethod
    def from_date(cls, text: str) -> "CalendarMonth":
        try:
            d = _dt.date.fromisoformat(text.strip())
        except ValueError as exc:
            raise DataError(f"cannot parse date {text!r}, expected YYYY-MM-DD") from exc
        return cls(d.year, d.month)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: CalendarMonth, end: CalendarMonth) -> list[CalendarMonth]:
    """All months from ``start`` to ``end`` inclusive."""
    if end < start:
        raise DataError(f"empty month range {start}..{end}")
    return [start.shift(i) for i in range(end.months_since(start) + 1)]


@dataclass(frozen=True)
class CountrySeries:
    """One variable for one country, contiguous between entry and exit."""

    country: str
    variable: str
    start: CalendarMonth
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise DataError(f"empty series {self.country}/{self.variable}")

    @property
    def end(self) -> CalendarMonth:
        return self.start.shift(len(self.values) - 1)

    def months(self) -> list[CalendarMonth]:
        return month_range(self.start, self.end)

    def value_at(self, month: CalendarMonth) -> float:
        i = month.months_since(self.start)
        if not 0 <= i < len(self.values):
            raise DataError(
                f"{self.country}/{self.variable} has no observation at {month}"
            )
        return float(self.values[i])

    def slice_window(self, start: CalendarMonth, end: CalendarMonth) -> "CountrySeries":
        lo = max(0, start.months_since(self.start))
        hi = min(len(self.values), end.months_since(self.start) + 1)
        if hi <= lo:
            raise DataError(
                f"{self.country}/{self.variable} has no data in {start}..{end}"
            )
        return dataclasses.replace(
            self, start=self.start.shift(lo), values=self.values[lo:hi]
        )

    def with_values(self, values: np.ndarray) -> "CountrySeries":
        if len(values) != len(self.values):
            raise DataError("replacement values must preserve series length")
        return dataclasses.replace(self, values=np.asarray(values, dtype=float))


@dataclass(frozen=True)
class PanelDataset:
    """Unbalanced country panel plus common euro-area controls.

    ``countries`` maps country -> variable -> series; every country carries
    the same outcome-variable set over its own window.  ``euro_controls``
    maps control name -> series and must cover the union of country windows.
    """

    countries: Mapping[str, Mapping[str, CountrySeries]]
    euro_controls: Mapping[str, CountrySeries]
    outcome_variables: tuple[str, ...]
    window: tuple[CalendarMonth, CalendarMonth]

    @property
    def country_names(self) -> tuple[str, ...]:
        return tuple(sorted(self.countries))

    def country_window(self, country: str) -> tuple[CalendarMonth, CalendarMonth]:
        series = next(iter(self.countries[country].values()))
        return series.start, series.end

    def restrict_window(
        self, start: CalendarMonth, end: CalendarMonth
    ) -> "PanelDataset":
        """Clip every series to ``start..end``, dropping countries left empty."""
        countries: dict[str, dict[str, CountrySeries]] = {}
        for c, by_var in self.countries.items():
            entry, exit_ = self.country_window(c)
            if exit_ < start or end < entry:
                continue
            countries[c] = {
                v: s.slice_window(start, end) for v, s in by_var.items()
            }
        if not countries:
            raise DataError(f"no country has data in window {start}..{end}")
        controls = {v: s.slice_window(start, end) for v, s in self.euro_controls.items()}
        new_start = min(cs[self.outcome_variables[0]].start for cs in countries.values())
        new_end = max(cs[self.outcome_variables[0]].end for cs in countries.values())
        return PanelDataset(countries, controls, self.outcome_variables, (new_start, new_end))

    def map_series(self, variable: str, fn) -> "PanelDataset":
        """Apply ``fn(values, start) -> values`` to ``variable`` in every country."""
        countries = {
            c: {
                v: (s.with_values(fn(s.values, s.start)) if v == variable else s)
                for v, s in by_var.items()
            }
            for c, by_var in self.countries.items()
        }
        controls = {
            v: (s.with_values(fn(s.values, s.start)) if v == variable else s)
            for v, s in self.euro_controls.items()
        }
        return dataclasses.replace(self, countries=countries, euro_controls=controls)


@dataclass(frozen=True)
class ShockSeries:
    """Monthly identified shock values for one shock kind.

    ``filled`` marks months that carry a zero because no policy event
    occurred (as opposed to a genuine zero-valued event).
    """

    kind: str
    start: CalendarMonth
    values: np.ndarray
    filled: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        f = np.asarray(self.filled, dtype=bool)
        if v.shape != f.shape or v.ndim != 1:
            raise DataError("shock values and filled flags must be 1-d and aligned")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "filled", f)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> CalendarMonth:
        return self.start.shift(len(self.values) - 1)

    def months(self) -> list[CalendarMonth]:
        return month_range(self.start, self.end)

    def conference_values(self) -> np.ndarray:
        return self.values[~self.filled]

    def value_at(self, month: CalendarMonth) -> float:
        i = month.months_since(self.start)
        if not 0 <= i < len(self.values):
            raise DataError(f"shock {self.kind} has no value at {month}")
        return float(self.values[i])

    def slice_window(self, start: CalendarMonth, end: CalendarMonth) -> "ShockSeries":
        lo = start.months_since(self.start)
        hi = end.months_since(self.start) + 1
        if lo < 0 or hi > len(self.values):
            raise DataError(
                f"shock {self.kind} does not cover window {start}..{end}"
            )
        return dataclasses.replace(
            self, start=start, values=self.values[lo:hi], filled=self.filled[lo:hi]
        )


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------


def _series_from_observations(
    country: str, variable: str, obs: dict[CalendarMonth, float]
) -> CountrySeries:
    months = sorted(obs)
    start, end = months[0], months[-1]
    expected = month_range(start, end)
    if len(months) != len(expected):
        present = set(months)
        missing = next(m for m in expected if m not in present)
        raise DataError(
            f"gap in {country}/{variable}: first missing month is {missing}"
        )
    values = np.array([obs[m] for m in expected], dtype=float)
    return CountrySeries(country, variable, start, values)


def load_panel(
    rows: pd.DataFrame | Iterable[tuple],
    outcome_variables: tuple[str, ...] = OUTCOME_VARIABLES,
    euro_controls: tuple[str, ...] = EURO_CONTROLS,
    require_all_outcomes: bool = False,
) -> PanelDataset:
    """Build a :class:`PanelDataset` from long-format rows.

    ``rows`` is a DataFrame (or iterable of tuples) with columns
    ``country, month, variable, value``; ``month`` is formatted YYYY-MM.
    Country windows are inferred from the min/max observed month.  Duplicate
    (country, month, variable) triples and internal gaps are rejected.

    Euro-control variables are recognised by name and must appear under a
    single country label.  With ``require_all_outcomes`` every country must
    carry the full outcome vocabulary; otherwise a common subset shared by
    all countries is accepted (simulated panels may emit fewer variables).
    """
    if not isinstance(rows, pd.DataFrame):
        rows = pd.DataFrame(list(rows), columns=["country", "month", "variable", "value"])
    required = {"country", "month", "variable", "value"}
    if not required.issubset(rows.columns):
        raise DataError(f"panel input must have columns {sorted(required)}")

    known = set(outcome_variables) | set(euro_controls)
    obs: dict[tuple[str, str], dict[CalendarMonth, float]] = {}
    control_owner: dict[str, str] = {}
    for rec in rows.itertuples(index=False):
        country = str(rec.country)
        variable = str(rec.variable)
        if variable not in known:
            raise DataError(f"unknown variable {variable!r}")
        month = CalendarMonth.parse(str(rec.month))
        if variable in euro_controls:
            owner = control_owner.setdefault(variable, country)
            if owner != country:
                raise DataError(
                    f"euro control {variable} appears under two country labels: "
                    f"{owner} and {country}"
                )
        key = (country, variable)
        per = obs.setdefault(key, {})
        if month in per:
            raise DataError(
                f"duplicate observation for ({country}, {month}, {variable})"
            )
        per[month] = float(rec.value)

    series = {
        key: _series_from_observations(key[0], key[1], per) for key, per in obs.items()
    }
    controls = {
        v: s for (c, v), s in series.items() if v in euro_controls
    }
    countries: dict[str, dict[str, CountrySeries]] = {}
    for (c, v), s in series.items():
        if v in euro_controls:
            continue
        countries.setdefault(c, {})[v] = s
    if not countries:
        raise DataError("panel contains no outcome observations")

    variable_sets = {c: frozenset(by_var) for c, by_var in countries.items()}
    common = set.intersection(*(set(v) for v in variable_sets.values()))
    for c, vs in variable_sets.items():
        if set(vs) != common:
            extra = sorted(set(vs) - common)
            raise DataError(
                f"country {c} carries variables {extra} not shared by all countries"
            )
    if require_all_outcomes and common != set(outcome_variables):
        missing = sorted(set(outcome_variables) - common)
        raise DataError(f"panel is missing outcome variables {missing}")
    ordered = tuple(v for v in outcome_variables if v in common)

    for c, by_var in countries.items():
        windows = {(s.start, s.end) for s in by_var.values()}
        if len(windows) > 1:
            raise DataError(f"country {c} variables do not share a common window")

    start = min(s.start for by_var in countries.values() for s in by_var.values())
    end = max(s.end for by_var in countries.values() for s in by_var.values())
    for v in euro_controls:
        if v not in controls:
            continue
        s = controls[v]
        if s.start > start or s.end < end:
            raise DataError(
                f"euro control {v} covers {s.start}..{s.end} but the panel "
                f"needs {start}..{end}"
            )
    return PanelDataset(countries, controls, ordered, (start, end))


def panel_to_frame(panel: PanelDataset) -> pd.DataFrame:
    """Long-format frame (country, month, variable, value); inverse of load_panel."""
    recs = []
    for c in panel.country_names:
        for v in panel.outcome_variables:
            s = panel.countries[c][v]
            for m, val in zip(s.months(), s.values):
                recs.append((c, str(m), v, val))
    for v, s in sorted(panel.euro_controls.items()):
        for m, val in zip(s.months(), s.values):
            recs.append((s.country, str(m), v, val))
    return pd.DataFrame(recs, columns=["country", "month", "variable", "value"])


def read_panel_csv(path, **kwargs) -> PanelDataset:
    frame = pd.read_csv(path, dtype={"month": str}, float_precision="round_trip")
    return load_panel(frame, **kwargs)


def write_panel_csv(panel: PanelDataset, path) -> None:
    panel_to_frame(panel).to_csv(path, index=False)


# ---------------------------------------------------------------------------
# transformations
# ---------------------------------------------------------------------------


def deseasonalize_monthly(values: np.ndarray, start: CalendarMonth) -> np.ndarray:
    """Residual of the projection on 12 monthly dummies, grand mean restored.

    The dummy columns span the constant, so the result equals the input
    minus its month-of-year means plus the overall sample mean; the output
    is uncorrelated with every (centered) monthly dummy, mean-preserving
    and idempotent.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 24:
        raise DataError(f"deseasonalization needs at least 24 observations, got {v.size}")
    month_of_year = (start.month - 1 + np.arange(v.size)) % 12
    out = v.copy()
    for m in range(12):
        mask = month_of_year == m
        if mask.any():
            out[mask] -= v[mask].mean()
    return out + v.mean()


def to_log_points(values: np.ndarray, start: CalendarMonth) -> np.ndarray:
    """100 * ln(value); rejects non-positive values, naming the month."""
    v = np.asarray(values, dtype=float)
    bad = np.nonzero(v <= 0.0)[0]
    if bad.size:
        raise DataError(
            f"non-positive value at {start.shift(int(bad[0]))}: {v[bad[0]]!r}"
        )
    return 100.0 * np.log(v)


def assign_shocks_to_months(
    events: Iterable[tuple[str, float]],
    window: tuple[CalendarMonth, CalendarMonth],
    reassign: Mapping[str, CalendarMonth] | None = None,
    kind: str = "monetary",
) -> ShockSeries:
    """Place dated events on the monthly calendar, zero-filling quiet months.

    ``events`` are (ISO date, value) pairs.  ``reassign`` maps specific dates
    to a different month (used when two conferences land in one calendar
    month).  Events falling outside ``window`` after reassignment are
    dropped.  Two events in one month is a conflict.
    """
    reassign = reassign or {}
    start, end = window
    n = end.months_since(start) + 1
    if n <= 0:
        raise DataError(f"empty shock window {start}..{end}")
    values = np.zeros(n)
    filled = np.ones(n, dtype=bool)
    claimed: dict[int, str] = {}
    for date, value in events:
        month = reassign.get(date) or CalendarMonth.from_date(date)
        i = month.months_since(start)
        if not 0 <= i < n:
            continue
        if i in claimed:
            raise DataError(
                f"two shock events in {month} ({claimed[i]} and {date}); "
                "add a reassignment entry"
            )
        claimed[i] = date
        values[i] = float(value)
        filled[i] = False
    return ShockSeries(kind, start, values, filled)


# ---------------------------------------------------------------------------
# shock / event CSV interfaces
# ---------------------------------------------------------------------------


def read_shock_events_csv(path) -> dict[str, list[tuple[str, float]]]:
    """Per-event shock values: header ``date,monetary,information,spread``."""
    df = pd.read_csv(path, dtype={"date": str}, float_precision="round_trip")
    missing = [c for c in ("date",) + SHOCK_KINDS if c not in df.columns]
    if missing:
        raise DataError(f"shock event CSV is missing columns {missing}")
    return {
        kind: list(zip(df["date"], df[kind].astype(float))) for kind in SHOCK_KINDS
    }


def read_reassignment_csv(path) -> dict[str, CalendarMonth]:
    """Reassignment map: header ``date,assign_to_month``."""
    df = pd.read_csv(path, dtype=str)
    missing = [c for c in ("date", "assign_to_month") if c not in df.columns]
    if missing:
        raise DataError(f"reassignment CSV is missing columns {missing}")
    return {
        rec.date.strip(): CalendarMonth.parse(rec.assign_to_month)
        for rec in df.itertuples(index=False)
    }


def write_shock_csv(shocks: Mapping[str, ShockSeries], path) -> None:
    kinds = [k for k in SHOCK_KINDS if k in shocks]
    base = shocks[kinds[0]]
    for k in kinds[1:]:
        if shocks[k].start != base.start or len(shocks[k]) != len(base):
            raise DataError("shock series must share one monthly window")
    df = pd.DataFrame({"month": [str(m) for m in base.months()]})
    for k in kinds:
        df[k] = shocks[k].values
    df.to_csv(path, index=False)


def read_shock_csv(path) -> dict[str, ShockSeries]:
    """Monthly shock CSV; exact zeros are treated as filled non-event months."""
    df = pd.read_csv(path, dtype={"month": str}, float_precision="round_trip")
    missing = [c for c in ("month",) + SHOCK_KINDS if c not in df.columns]
    if missing:
        raise DataError(f"shock CSV is missing columns {missing}")
    months = [CalendarMonth.parse(m) for m in df["month"]]
    for prev, cur in zip(months, months[1:]):
        if cur.months_since(prev) != 1:
            raise DataError(f"shock CSV has a gap or disorder after {prev}")
    out = {}
    for kind in SHOCK_KINDS:
        values = df[kind].to_numpy(dtype=float)
        out[kind] = ShockSeries(kind, months[0], values, values == 0.0)
    return out

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from panelirf.errors import DataError
from panelirf.panel import (
    CalendarMonth,
    assign_shocks_to_months,
    deseasonalize_monthly,
    load_panel,
    month_range,
    panel_to_frame,
    read_shock_csv,
    to_log_points,
    write_shock_csv,
)


def long_rows(country, variable, start, values):
    m = CalendarMonth.parse(start)
    return [(country, str(m.shift(i)), variable, v) for i, v in enumerate(values)]


class TestCalendarMonth:
    def test_ordering_and_arithmetic(self):
        a = CalendarMonth(2002, 1)
        b = CalendarMonth(2002, 12)
        assert a < b
        assert b.months_since(a) == 11
        assert a.shift(11) == b
        assert a.shift(-1) == CalendarMonth(2001, 12)

    def test_parse_round_trip(self):
        assert str(CalendarMonth.parse("2019-07")) == "2019-07"
        with pytest.raises(DataError):
            CalendarMonth.parse("2019/07")
        with pytest.raises(DataError):
            CalendarMonth(2019, 13)

    def test_from_date(self):
        assert CalendarMonth.from_date("2006-08-31") == CalendarMonth(2006, 8)


class TestLoadPanel:
    def test_three_rows_make_window_of_three(self):
        rows = long_rows("A", "reer", "2002-01", [1.0, 2.0, 3.0])
        panel = load_panel(rows)
        assert panel.country_window("A") == (CalendarMonth(2002, 1), CalendarMonth(2002, 3))
        assert len(panel.countries["A"]["reer"].values) == 3

    def test_window_inferred_from_min_max(self):
        # 2002M01 .. 2023M02 entry/exit inference
        n = CalendarMonth(2023, 2).months_since(CalendarMonth(2002, 1)) + 1
        rows = long_rows("Czechia", "cpi", "2002-01", np.ones(n))
        panel = load_panel(rows)
        assert panel.country_window("Czechia") == (
            CalendarMonth(2002, 1),
            CalendarMonth(2023, 2),
        )

    def test_gap_is_rejected_naming_first_missing_month(self):
        rows = [
            ("A", "2005-02", "reer", 1.0),
            ("A", "2005-04", "reer", 2.0),
        ]
        with pytest.raises(DataError, match="2005-03"):
            load_panel(rows)

    def test_duplicate_triple_rejected(self):
        rows = [
            ("A", "2005-02", "reer", 1.0),
            ("A", "2005-02", "reer", 2.0),
        ]
        with pytest.raises(DataError, match="duplicate"):
            load_panel(rows)

    def test_unknown_variable_rejected(self):
        with pytest.raises(DataError, match="unknown variable"):
            load_panel([("A", "2005-02", "gdp", 1.0)])

    def test_mismatched_variable_sets_rejected(self):
        rows = long_rows("A", "reer", "2002-01", [1, 2]) + long_rows(
            "B", "cpi", "2002-01", [1, 2]
        )
        with pytest.raises(DataError, match="not shared"):
            load_panel(rows)

    def test_round_trip_identity(self):
        rng = np.random.default_rng(0)
        rows = (
            long_rows("A", "reer", "2002-01", rng.normal(size=30))
            + long_rows("A", "cpi", "2002-01", rng.normal(size=30))
            + long_rows("B", "reer", "2003-05", rng.normal(size=20))
            + long_rows("B", "cpi", "2003-05", rng.normal(size=20))
            + long_rows("EA", "ea_cpi", "2002-01", rng.normal(size=36))
        )
        panel = load_panel(rows)
        frame = panel_to_frame(panel)
        again = load_panel(frame)
        assert again.window == panel.window
        for c in panel.country_names:
            for v in panel.outcome_variables:
                assert_allclose(
                    again.countries[c][v].values, panel.countries[c][v].values
                )
        assert_allclose(again.euro_controls["ea_cpi"].values,
                        panel.euro_controls["ea_cpi"].values)

    def test_euro_control_coverage_enforced(self):
        rows = long_rows("A", "reer", "2002-01", np.ones(30)) + long_rows(
            "EA", "ea_cpi", "2002-01", np.ones(10)
        )
        with pytest.raises(DataError, match="covers"):
            load_panel(rows)

    def test_disk_round_trip_is_exact(self, tmp_path):
        from panelirf.panel import read_panel_csv, write_panel_csv

        rng = np.random.default_rng(17)
        rows = long_rows("A", "reer", "2002-01", rng.normal(size=40)) + long_rows(
            "EA", "ea_cpi", "2002-01", rng.normal(size=40)
        )
        panel = load_panel(rows)
        path = tmp_path / "panel.csv"
        write_panel_csv(panel, path)
        again = read_panel_csv(path)
        assert np.array_equal(
            again.countries["A"]["reer"].values, panel.countries["A"]["reer"].values
        )
        assert np.array_equal(
            again.euro_controls["ea_cpi"].values, panel.euro_controls["ea_cpi"].values
        )

    def test_restrict_window_clips_and_drops(self):
        rng = np.random.default_rng(18)
        rows = (
            long_rows("A", "reer", "2002-01", rng.normal(size=60))
            + long_rows("B", "reer", "2010-01", rng.normal(size=24))
            + long_rows("EA", "ea_cpi", "2002-01", rng.normal(size=140))
        )
        panel = load_panel(rows)
        cut = panel.restrict_window(CalendarMonth(2002, 1), CalendarMonth(2005, 12))
        assert cut.country_names == ("A",)  # B has no data before 2010
        assert cut.country_window("A") == (
            CalendarMonth(2002, 1),
            CalendarMonth(2005, 12),
        )
        with pytest.raises(DataError, match="no country"):
            panel.restrict_window(CalendarMonth(1990, 1), CalendarMonth(1990, 12))


def dummy_regression_oracle(values, start):
    """Independent oracle: explicit least squares on 12 monthly dummies."""
    n = len(values)
    months = (start.month - 1 + np.arange(n)) % 12
    D = np.zeros((n, 12))
    D[np.arange(n), months] = 1.0
    coef, *_ = np.linalg.lstsq(D, values, rcond=None)
    return values - D @ coef + np.mean(values)


class TestDeseasonalize:
    def test_constant_series_unchanged(self):
        out = deseasonalize_monthly(np.full(36, 7.5), CalendarMonth(2000, 1))
        assert_allclose(out, np.full(36, 7.5))

    def test_periodic_pattern_flattens_to_mean(self):
        pattern = np.arange(12, dtype=float)
        values = np.tile(pattern, 4)
        out = deseasonalize_monthly(values, CalendarMonth(2000, 1))
        assert_allclose(out, np.full(48, pattern.mean()), atol=1e-12)

    def test_matches_dummy_regression_oracle(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=61)
        start = CalendarMonth(2001, 4)
        assert_allclose(
            deseasonalize_monthly(values, start),
            dummy_regression_oracle(values, start),
            atol=1e-10,
        )

    def test_idempotent_and_mean_preserving(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            n = int(rng.integers(24, 90))
            start = CalendarMonth(2000, int(rng.integers(1, 13)))
            values = rng.normal(size=n) + 3.0
            once = deseasonalize_monthly(values, start)
            twice = deseasonalize_monthly(once, start)
            assert_allclose(twice, once, atol=1e-10)
            assert np.isclose(once.mean(), values.mean(), atol=1e-12)

    def test_uncorrelated_with_centered_dummies(self):
        rng = np.random.default_rng(5)
        values = rng.normal(size=48)
        start = CalendarMonth(2002, 7)
        out = deseasonalize_monthly(values, start)
        months = (start.month - 1 + np.arange(48)) % 12
        for m in range(12):
            d = (months == m).astype(float)
            d -= d.mean()
            assert abs(np.dot(out - out.mean(), d)) < 1e-10

    def test_too_short_rejected(self):
        with pytest.raises(DataError, match="24"):
            deseasonalize_monthly(np.ones(23), CalendarMonth(2000, 1))


class TestLogPoints:
    def test_reference_values(self):
        out = to_log_points(np.array([1.0, np.e, 2.0]), CalendarMonth(2000, 1))
        assert_allclose(out, [0.0, 100.0, 100.0 * np.log(2.0)], rtol=1e-15)

    def test_non_positive_named_month(self):
        with pytest.raises(DataError, match="2000-02"):
            to_log_points(np.array([1.0, 0.0, 2.0]), CalendarMonth(2000, 1))


class TestAssignShocks:
    WINDOW = (CalendarMonth(2006, 1), CalendarMonth(2006, 12))

    def test_two_august_conferences_with_reassignment(self):
        events = [("2006-08-03", 0.5), ("2006-08-31", -0.2)]
        reassign = {"2006-08-31": CalendarMonth(2006, 9)}
        s = assign_shocks_to_months(events, self.WINDOW, reassign)
        assert s.value_at(CalendarMonth(2006, 8)) == 0.5
        assert s.value_at(CalendarMonth(2006, 9)) == -0.2
        assert not s.filled[7] and not s.filled[8]

    def test_conflict_without_reassignment(self):
        events = [("2006-08-03", 0.5), ("2006-08-31", -0.2)]
        with pytest.raises(DataError, match="2006-08"):
            assign_shocks_to_months(events, self.WINDOW)

    def test_empty_events_all_filled_zero(self):
        window = (CalendarMonth(2006, 1), CalendarMonth(2006, 3))
        s = assign_shocks_to_months([], window)
        assert_allclose(s.values, [0.0, 0.0, 0.0])
        assert s.filled.all()

    def test_single_event_in_twelve_months(self):
        s = assign_shocks_to_months([("2006-05-10", 1.3)], self.WINDOW)
        assert np.count_nonzero(s.values) == 1
        assert s.filled.sum() == 11

    def test_output_length_equals_window_length(self):
        rng = np.random.default_rng(6)
        for trial in range(10):
            start = CalendarMonth(2004, int(rng.integers(1, 13)))
            n = int(rng.integers(1, 40))
            window = (start, start.shift(n - 1))
            s = assign_shocks_to_months([], window)
            assert len(s) == n

    def test_events_outside_window_dropped(self):
        s = assign_shocks_to_months([("1999-01-05", 9.0)], self.WINDOW)
        assert not s.values.any()


class TestShockCsv:
    def test_round_trip_and_zero_flagging(self, tmp_path):
        window = (CalendarMonth(2006, 1), CalendarMonth(2006, 6))
        shocks = {
            kind: assign_shocks_to_months(
                [("2006-03-10", v)], window, kind=kind
            )
            for kind, v in (("monetary", 0.3), ("information", -1.1), ("spread", 0.0))
        }
        path = tmp_path / "shocks.csv"
        write_shock_csv(shocks, path)
        again = read_shock_csv(path)
        for kind in shocks:
            assert_allclose(again[kind].values, shocks[kind].values)
        # exact zeros read back as filled months
        assert again["monetary"].filled.sum() == 5
        assert again["spread"].filled.all()

    def test_gap_detection(self, tmp_path):
        df = pd.DataFrame(
            {
                "month": ["2006-01", "2006-03"],
                "monetary": [0.0, 0.1],
                "information": [0.0, 0.1],
                "spread": [0.0, 0.1],
            }
        )
        path = tmp_path / "bad.csv"
        df.to_csv(path, index=False)
        with pytest.raises(DataError, match="gap"):
            read_shock_csv(path)


def test_month_range_inclusive():
    months = month_range(CalendarMonth(2001, 11), CalendarMonth(2002, 2))
    assert [str(m) for m in months] == ["2001-11", "2001-12", "2002-01", "2002-02"]

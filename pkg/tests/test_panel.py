import datetime
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapvol.errors import DataError
from mapvol.panel import (announcement_window_stats, center_covariates,
                          load_panel, sign_dummy)

from conftest import make_panel

CSV = """date,rv,ret,x,delta
2015-01-01,10.5,0.3,0.12,0
2015-01-02,11.25,-0.2,0.13,1
2015-01-05,9.75,0.0,0.14,0
"""


def _load_str(text, **kwargs):
    return load_panel(io.StringIO(text), **kwargs)


class TestLoadPanel:
    def test_well_formed(self):
        panel, report = _load_str(CSV)
        assert panel.T == 3
        assert report.n_dropped == 0
        assert panel.dates[0] == datetime.date(2015, 1, 1)
        np.testing.assert_allclose(panel.rv, [10.5, 11.25, 9.75])
        np.testing.assert_allclose(panel.delta, [0, 1, 0])

    def test_negative_rv_row_dropped_with_warning(self):
        text = CSV + "2015-01-06,-1.0,0.1,0.15,0\n"
        panel, report = _load_str(text)
        assert panel.T == 3
        assert report.n_dropped == 1
        assert any("non-positive rv" in m for m in report.messages)

    def test_missing_value_dropped(self):
        text = CSV + "2015-01-06,,0.1,0.15,0\n"
        panel, report = _load_str(text)
        assert panel.T == 3
        assert report.n_dropped == 1

    def test_non_binary_delta_dropped(self):
        text = CSV + "2015-01-06,9.0,0.1,0.15,2\n"
        panel, report = _load_str(text)
        assert panel.T == 3
        assert any("non-binary delta" in m for m in report.messages)

    def test_duplicate_date_hard_error(self):
        text = CSV + "2015-01-05,9.0,0.1,0.15,0\n"
        with pytest.raises(DataError, match="duplicate"):
            _load_str(text)

    def test_unordered_dates_hard_error(self):
        text = CSV + "2015-01-03,9.0,0.1,0.15,0\n"
        with pytest.raises(DataError, match="order"):
            _load_str(text)

    def test_missing_column_hard_error(self):
        with pytest.raises(DataError, match="missing column"):
            _load_str("date,rv,ret,x\n2015-01-01,1,0,0.1\n")

    def test_column_mapping_and_delimiter(self):
        text = "day;vol;r;proxy;ann\n2015-01-01;10.0;0.1;0.2;0\n2015-01-02;11.0;0.1;0.2;1\n"
        panel, _ = _load_str(text, columns={"date": "day", "rv": "vol", "ret": "r",
                                            "x": "proxy", "delta": "ann"},
                             delimiter=";")
        assert panel.T == 2
        assert panel.delta[1] == 1.0

    def test_roundtrip_bit_exact(self):
        panel, _ = _load_str(CSV)
        buf = io.StringIO()
        panel.to_csv(buf)
        reloaded, _ = _load_str(buf.getvalue())
        buf2 = io.StringIO()
        reloaded.to_csv(buf2)
        assert buf.getvalue() == buf2.getvalue()

    @given(st.lists(st.tuples(
        st.floats(min_value=1e-3, max_value=1e3, allow_nan=False),
        st.floats(min_value=-10, max_value=10, allow_nan=False),
        st.floats(min_value=0, max_value=1, allow_nan=False),
        st.booleans()), min_size=2, max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_property(self, rows):
        panel = make_panel(
            rv=[r[0] for r in rows], ret=[r[1] for r in rows],
            x=[r[2] for r in rows], delta=[float(r[3]) for r in rows])
        buf = io.StringIO()
        panel.to_csv(buf)
        reloaded, report = _load_str(buf.getvalue())
        assert report.n_dropped == 0
        buf2 = io.StringIO()
        reloaded.to_csv(buf2)
        assert buf.getvalue() == buf2.getvalue()


class TestPanelInvariants:
    def test_immutable_arrays(self):
        panel = make_panel([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            panel.rv[0] = 5.0

    def test_sign_dummy_zero_return_is_nonnegative(self):
        d = sign_dummy(np.array([-0.1, 0.0, 0.2]))
        np.testing.assert_array_equal(d, [1.0, 0.0, 0.0])

    def test_too_short(self):
        with pytest.raises(DataError):
            make_panel([1.0])

    def test_x_out_of_range(self):
        with pytest.raises(DataError):
            make_panel([1.0, 2.0], x=[0.5, 1.5])


class TestCenterCovariates:
    def test_constant_x_centers_to_zero(self):
        panel = make_panel(np.ones(6), x=np.full(6, 0.3))
        c = center_covariates(panel)
        np.testing.assert_allclose(c.xc, 0.0, atol=1e-15)

    def test_alternating_delta(self):
        panel = make_panel(np.ones(4), delta=[0, 1, 0, 1])
        c = center_covariates(panel)
        assert c.delta_bar == 0.5
        np.testing.assert_allclose(c.dc, [-0.5, 0.5, -0.5, 0.5])

    def test_window_only_means(self):
        # rising x: centered mean is zero on the window, not on the full panel
        panel = make_panel(np.ones(8), x=np.linspace(0.1, 0.8, 8))
        c = center_covariates(panel, window=(0, 4))
        assert abs(np.mean(c.xc[:4])) < 1e-15
        assert abs(np.mean(c.xc)) > 1e-3

    def test_empty_window_rejected(self):
        panel = make_panel(np.ones(4))
        with pytest.raises(DataError):
            center_covariates(panel, window=(2, 2))

    @given(st.integers(min_value=2, max_value=60), st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=60, deadline=None)
    def test_centering_mean_zero_property(self, T, seed):
        rng = np.random.default_rng(seed)
        panel = make_panel(rng.uniform(0.5, 20, T), x=rng.uniform(0, 1, T),
                           delta=rng.integers(0, 2, T).astype(float))
        lo = int(rng.integers(0, T - 1))
        hi = int(rng.integers(lo + 1, T + 1))
        c = center_covariates(panel, window=(lo, hi))
        assert abs(np.mean(c.xc[lo:hi])) < 1e-12
        assert abs(np.mean(c.dc[lo:hi])) < 1e-12


class TestAnnouncementWindowStats:
    def test_constant_series_zero_variation(self):
        panel = make_panel(np.full(20, 7.5), delta=[0] * 5 + [1] + [0] * 9 + [1] + [0] * 4)
        stats = announcement_window_stats(panel, window=5)
        assert stats.avg_before_pct == pytest.approx(0.0, abs=1e-12)
        assert stats.avg_after_pct == pytest.approx(0.0, abs=1e-12)

    def test_single_peak_announcement(self):
        # rv 10 at the announcement, 9 everywhere nearby: -10% both sides
        rv = np.full(11, 9.0)
        rv[5] = 10.0
        delta = np.zeros(11)
        delta[5] = 1.0
        stats = announcement_window_stats(make_panel(rv, delta=delta), window=5)
        assert stats.avg_before_pct == pytest.approx(-10.0)
        assert stats.avg_after_pct == pytest.approx(-10.0)

    def test_truncated_at_sample_edge(self):
        # announcement on day 4 (index 3): only 3 before-terms are available
        rv = np.array([8.0, 8.0, 8.0, 10.0, 9.0, 9.0, 9.0, 9.0, 9.0])
        delta = np.zeros(9)
        delta[3] = 1.0
        stats = announcement_window_stats(make_panel(rv, delta=delta), window=5)
        event = stats.events[0]
        assert event.before_mean == pytest.approx(8.0)
        assert event.after_mean == pytest.approx(9.0)

    def test_no_announcements_error(self):
        with pytest.raises(DataError, match="no announcement"):
            announcement_window_stats(make_panel(np.ones(10)), window=5)

    @given(st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_window_peaks_give_negative_variations(self, seed):
        # every announcement dominates its whole window: variations < 0
        rng = np.random.default_rng(seed)
        T, w = 60, 5
        rv = rng.uniform(1.0, 5.0, T)
        delta = np.zeros(T)
        for t in (10, 30, 50):
            delta[t] = 1.0
            rv[t] = rv[max(0, t - w):t + w + 1].max() * (1.0 + rng.uniform(0.05, 0.5))
        stats = announcement_window_stats(make_panel(rv, delta=delta), window=w)
        assert all(e.before_pct < 0 for e in stats.events)
        assert all(e.after_pct < 0 for e in stats.events)

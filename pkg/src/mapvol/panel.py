"""Ingestion and alignment of daily realized-volatility and policy series.

A panel bundles four aligned daily series: annualized realized volatility
(positive), the index return (used only through its sign), the policy
implementation proxy x in [0, 1] (securities held for policy purposes over
total assets) and the announcement dummy. Rows violating an invariant are
dropped with a warning, never imputed; ordering violations are hard errors.
"""

from __future__ import annotations

import csv
import datetime
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

logger = logging.getLogger("mapvol.panel")

CANONICAL_COLUMNS = ("date", "rv", "ret", "x", "delta")


def sign_dummy(ret: np.ndarray) -> np.ndarray:
    """Indicator of a negative return; a zero return counts as non-negative."""
    return (np.asarray(ret, dtype=float) < 0.0).astype(float)


@dataclass(frozen=True)
class PanelSeries:
    """Aligned daily series; immutable after construction.

    Attributes
    ----------
    dates : tuple of datetime.date, strictly increasing
    rv : positive realized volatility per day
    ret : index return per day (only the sign is used downstream)
    x : policy proxy in [0, 1]
    delta : announcement dummy in {0, 1}
    """

    dates: tuple
    rv: np.ndarray
    ret: np.ndarray
    x: np.ndarray
    delta: np.ndarray
    sign: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dates = tuple(self.dates)
        arrays = {}
        for name in ("rv", "ret", "x", "delta"):
            a = np.ascontiguousarray(getattr(self, name), dtype=float)
            arrays[name] = a
        T = len(dates)
        if T < 2:
            raise DataError(f"panel needs at least 2 rows, got {T}")
        for name, a in arrays.items():
            if a.shape != (T,):
                raise DataError(f"series '{name}' has length {a.shape}, expected {T}")
            if not np.all(np.isfinite(a)):
                raise DataError(f"series '{name}' contains non-finite values")
        if any(d1 >= d2 for d1, d2 in zip(dates, dates[1:])):
            raise DataError("dates must be strictly increasing")
        if np.any(arrays["rv"] <= 0):
            raise DataError("rv must be strictly positive")
        if not np.all((arrays["delta"] == 0.0) | (arrays["delta"] == 1.0)):
            raise DataError("delta must be 0/1")
        if np.any((arrays["x"] < 0.0) | (arrays["x"] > 1.0)):
            raise DataError("x must lie in [0, 1]")
        arrays["sign"] = sign_dummy(arrays["ret"])
        for name, a in arrays.items():
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        object.__setattr__(self, "dates", dates)

    @property
    def T(self) -> int:
        return len(self.dates)

    def slice(self, start: int, stop: int) -> "PanelSeries":
        """Sub-panel over rows [start, stop)."""
        if not (0 <= start < stop <= self.T):
            raise DataError(f"invalid panel slice [{start}, {stop}) for T={self.T}")
        return PanelSeries(
            dates=self.dates[start:stop],
            rv=self.rv[start:stop].copy(),
            ret=self.ret[start:stop].copy(),
            x=self.x[start:stop].copy(),
            delta=self.delta[start:stop].copy(),
        )

    def index_of_date(self, d: datetime.date, side: str = "left") -> int:
        """Number of dates strictly before d ('left') or <= d ('right')."""
        if side == "left":
            return int(np.searchsorted([dt.toordinal() for dt in self.dates], d.toordinal(), side="left"))
        return int(np.searchsorted([dt.toordinal() for dt in self.dates], d.toordinal(), side="right"))

    def to_csv(self, path_or_buf, delimiter: str = ",") -> None:
        """Write the canonical CSV schema (date, rv, ret, x, delta).

        Reals are written with 15 significant digits so that a load/write
        cycle is idempotent on the serialized form.
        """
        own = isinstance(path_or_buf, (str, bytes, os.PathLike))
        f = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            f.write(delimiter.join(CANONICAL_COLUMNS) + "\n")
            for i, d in enumerate(self.dates):
                row = (
                    d.isoformat(),
                    format(self.rv[i], ".15g"),
                    format(self.ret[i], ".15g"),
                    format(self.x[i], ".15g"),
                    format(self.delta[i], ".15g"),
                )
                f.write(delimiter.join(row) + "\n")
        finally:
            if own:
                f.close()


@dataclass(frozen=True)
class LoadReport:
    """Row accounting for an ingestion run."""

    n_read: int
    n_dropped: int
    messages: tuple


def load_panel(path, columns=None, delimiter: str = ",") -> tuple[PanelSeries, LoadReport]:
    """Load a delimited text file with a header row into a PanelSeries.

    Parameters
    ----------
    path : str or file-like
        Input file. Dates must be ISO-8601, decimal point is '.'.
    columns : mapping, optional
        Maps the logical names date/rv/ret/x/delta to header names in the
        file. Defaults to the identity mapping.
    delimiter : str
        Field separator, default ','.

    Rows with missing fields, non-positive rv, x outside [0, 1] or a
    non-binary delta are dropped with a warning. Duplicate or unordered
    dates are a hard error, as is a missing column.
    """
    colmap = dict(columns) if columns else {c: c for c in CANONICAL_COLUMNS}
    missing_logical = [c for c in CANONICAL_COLUMNS if c not in colmap]
    if missing_logical:
        raise DataError(f"column map lacks logical columns: {missing_logical}")

    own = isinstance(path, (str, bytes, os.PathLike))
    f = open(path, "r", newline="") if own else path
    try:
        reader = csv.reader(f, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty input file") from None
        header = [h.strip() for h in header]
        try:
            pos = {logical: header.index(colmap[logical]) for logical in CANONICAL_COLUMNS}
        except ValueError as exc:
            raise DataError(f"missing column in header {header}: {exc}") from None

        dates, rv, ret, x, delta = [], [], [], [], []
        messages = []
        n_read = 0
        n_dropped = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            n_read += 1
            try:
                raw = {k: row[i].strip() for k, i in pos.items()}
            except IndexError:
                n_dropped += 1
                messages.append(f"line {lineno}: too few fields, row dropped")
                continue
            if any(v == "" for v in raw.values()):
                n_dropped += 1
                messages.append(f"line {lineno}: missing value, row dropped")
                continue
            try:
                d = datetime.date.fromisoformat(raw["date"])
                vals = {k: float(raw[k]) for k in ("rv", "ret", "x", "delta")}
            except ValueError as exc:
                raise DataError(f"line {lineno}: unparsable value ({exc})") from None
            problem = None
            if not all(np.isfinite(v) for v in vals.values()):
                problem = "non-finite value"
            elif vals["rv"] <= 0:
                problem = f"non-positive rv {vals['rv']:g}"
            elif vals["delta"] not in (0.0, 1.0):
                problem = f"non-binary delta {vals['delta']:g}"
            elif not 0.0 <= vals["x"] <= 1.0:
                problem = f"x outside [0, 1]: {vals['x']:g}"
            if problem is not None:
                n_dropped += 1
                messages.append(f"line {lineno}: {problem}, row dropped")
                continue
            dates.append(d)
            rv.append(vals["rv"])
            ret.append(vals["ret"])
            x.append(vals["x"])
            delta.append(vals["delta"])
    finally:
        if own:
            f.close()

    for msg in messages:
        logger.warning(msg)
    if len(dates) != len(set(dates)):
        raise DataError("duplicate dates in input")
    if any(d1 >= d2 for d1, d2 in zip(dates, dates[1:])):
        raise DataError("dates out of order in input")
    panel = PanelSeries(tuple(dates), np.array(rv), np.array(ret), np.array(x), np.array(delta))
    return panel, LoadReport(n_read=n_read, n_dropped=n_dropped, messages=tuple(messages))


@dataclass(frozen=True)
class CenteredCovariates:
    """Policy covariates centered with means taken over an estimation window.

    xc and dc span the full panel; x_bar and delta_bar are means over the
    window only, so centering is window-dependent but usable out of sample.
    """

    x_bar: float
    delta_bar: float
    xc: np.ndarray
    dc: np.ndarray

    def __post_init__(self):
        for name in ("xc", "dc"):
            a = np.ascontiguousarray(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def center_covariates(panel: PanelSeries, window: tuple[int, int] | None = None) -> CenteredCovariates:
    """Center x and delta using sample means over window (default: full panel)."""
    start, stop = window if window is not None else (0, panel.T)
    if not (0 <= start < stop <= panel.T):
        raise DataError(f"empty or invalid centering window [{start}, {stop})")
    x_bar = float(np.mean(panel.x[start:stop]))
    delta_bar = float(np.mean(panel.delta[start:stop]))
    return CenteredCovariates(x_bar, delta_bar, panel.x - x_bar, panel.delta - delta_bar)


@dataclass(frozen=True)
class AnnouncementEvent:
    index: int
    date: datetime.date
    rv: float
    before_mean: float
    after_mean: float
    before_pct: float
    after_pct: float


@dataclass(frozen=True)
class AnnouncementWindowStats:
    """Relative volatility around announcement days.

    Per announcement at t: mean rv over the w days before and after
    (truncated at the sample edges), expressed as percentage variation
    relative to rv_t. Sides with no observations (an announcement on the
    first or last day) are NaN and excluded from the grand averages.
    """

    window: int
    events: tuple
    avg_before_pct: float
    avg_after_pct: float


def announcement_window_stats(panel: PanelSeries, window: int = 5) -> AnnouncementWindowStats:
    """Average rv in the w days before/after each announcement vs the day itself."""
    if window < 1:
        raise DataError("window must be >= 1")
    idx = np.flatnonzero(panel.delta == 1.0)
    if idx.size == 0:
        raise DataError("no announcement days in sample")
    events = []
    for t in idx:
        before = panel.rv[max(0, t - window):t]
        after = panel.rv[t + 1:t + 1 + window]
        b_mean = float(np.mean(before)) if before.size else float("nan")
        a_mean = float(np.mean(after)) if after.size else float("nan")
        rv_t = float(panel.rv[t])
        events.append(AnnouncementEvent(
            index=int(t), date=panel.dates[t], rv=rv_t,
            before_mean=b_mean, after_mean=a_mean,
            before_pct=100.0 * (b_mean / rv_t - 1.0),
            after_pct=100.0 * (a_mean / rv_t - 1.0),
        ))
    before_pcts = np.array([e.before_pct for e in events])
    after_pcts = np.array([e.after_pct for e in events])
    return AnnouncementWindowStats(
        window=window,
        events=tuple(events),
        avg_before_pct=float(np.nanmean(before_pcts)),
        avg_after_pct=float(np.nanmean(after_pcts)),
    )

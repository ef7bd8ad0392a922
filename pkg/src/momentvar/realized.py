"""Realized (finite-sum) moment variations from intraday log-price grids.

Within a day the return is measured from the day's first observation, so
``R_i = log P_i - log P_0`` and overnight gaps never enter the sums.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError

PANEL_COLUMNS = ("day_id", "rv", "tv", "fv", "tv15", "fv15", "r_close", "r3", "r4")


@dataclass
class IntradayGrid:
    day_id: object
    log_prices: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.log_prices, dtype=float)
        if lp.ndim != 1:
            raise InputError(f"day {self.day_id}: log_prices must be one-dimensional")
        if lp.size < 2:
            raise InputError(f"day {self.day_id}: empty grid (need at least 2 observations)")
        if not np.all(np.isfinite(lp)):
            raise InputError(f"day {self.day_id}: non-finite log price")
        self.log_prices = lp

    @property
    def n_bars(self):
        return self.log_prices.size - 1

    def returns(self):
        """Cumulative within-day return path R_0 = 0, ..., R_N."""
        return self.log_prices - self.log_prices[0]


def realized_variance(g):
    """sum (R_i - R_{i-1})^2."""
    r = g.returns()
    return float(np.sum(np.diff(r) ** 2))


def realized_third(g):
    """Unscaled realized third variation sum (R_i - R_{i-1})(R_i^2 - R_{i-1}^2)."""
    r = g.returns()
    return float(np.sum(np.diff(r) * np.diff(r * r)))


def realized_fourth(g):
    """Unscaled realized fourth variation sum (R_i^2 - R_{i-1}^2)^2."""
    r = g.returns()
    return float(np.sum(np.diff(r * r) ** 2))


@dataclass
class DailyMomentPanel:
    """Per-day realized variations. ``tv``/``fv`` are unscaled; ``tv15``/``fv15`` are 1.5x."""

    day_id: list
    rv: np.ndarray
    tv: np.ndarray
    fv: np.ndarray
    r_close: np.ndarray
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.day_id = list(self.day_id)
        for name in ("rv", "tv", "fv", "r_close"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        m = len(self.day_id)
        if m < 1:
            raise InputError("panel must contain at least one day")
        for name in ("rv", "tv", "fv", "r_close"):
            if getattr(self, name).shape != (m,):
                raise InputError(f"column {name} has wrong length")
        if np.any(self.rv < 0) or np.any(self.fv < 0):
            raise InputError("rv and fv must be non-negative")

    def __len__(self):
        return len(self.day_id)

    @property
    def tv15(self):
        return 1.5 * self.tv

    @property
    def fv15(self):
        return 1.5 * self.fv

    @property
    def r3(self):
        return self.r_close**3

    @property
    def r4(self):
        return self.r_close**4

    def column(self, name):
        if name == "day_id":
            return self.day_id
        if name not in PANEL_COLUMNS:
            raise KeyError(name)
        return getattr(self, name)

    def subset(self, index):
        idx = np.arange(len(self))[index]
        return DailyMomentPanel([self.day_id[i] for i in idx], self.rv[idx], self.tv[idx],
                                self.fv[idx], self.r_close[idx])


def build_panel(days):
    """Daily panel from a sequence of intraday grids."""
    days = list(days)
    if not days:
        raise InputError("no days supplied")
    ids, rv, tv, fv, rc = [], [], [], [], []
    for g in days:
        if not isinstance(g, IntradayGrid):
            try:
                g = IntradayGrid(*g)
            except (TypeError, ValueError) as exc:
                raise InputError(f"malformed day {g!r}: {exc}") from exc
        ids.append(g.day_id)
        rv.append(realized_variance(g))
        tv.append(realized_third(g))
        fv.append(realized_fourth(g))
        r = g.returns()
        rc.append(r[-1])
    return DailyMomentPanel(ids, rv, tv, fv, rc)


SUMMARY_COLUMNS = ("tv", "r3", "fv", "r4", "tv15", "fv15", "rv")


def summary_stats(panel, columns=SUMMARY_COLUMNS):
    """Sample mean and standard deviation (ddof=1) per column."""
    if len(panel) < 2:
        raise InputError("summary statistics need at least 2 days")
    out = {}
    for c in columns:
        x = np.asarray(panel.column(c), dtype=float)
        out[c] = (float(x.mean()), float(x.std(ddof=1)))
    return out

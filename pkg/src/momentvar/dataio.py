"""Tick-file ingestion, session resampling and panel CSV round trips."""

from dataclasses import dataclass
from datetime import datetime, time, timedelta, timezone
import csv
import logging
import warnings

import numpy as np

from .exceptions import InputError
from .realized import PANEL_COLUMNS, DailyMomentPanel, IntradayGrid

log = logging.getLogger(__name__)

MAX_MISSING_FRACTION = 0.10


@dataclass(frozen=True)
class Session:
    """Trading session on a single wall clock: ``open``-``close`` cut into bars."""

    open: str = "09:30"
    close: str = "16:00"
    bar_minutes: int = 5

    def __post_init__(self):
        o, c = self.open_time, self.close_time
        length = (c.hour * 60 + c.minute) - (o.hour * 60 + o.minute)
        if self.bar_minutes <= 0:
            raise InputError("bar width must be positive")
        if length <= 0:
            raise InputError("session close must be after open")
        if length % self.bar_minutes:
            raise InputError(f"bar width {self.bar_minutes} min does not divide the {length} min session")

    @property
    def open_time(self):
        return _parse_clock(self.open)

    @property
    def close_time(self):
        return _parse_clock(self.close)

    @property
    def n_bars(self):
        o, c = self.open_time, self.close_time
        return ((c.hour * 60 + c.minute) - (o.hour * 60 + o.minute)) // self.bar_minutes

    def boundaries(self, day):
        start = datetime.combine(day, self.open_time)
        step = timedelta(minutes=self.bar_minutes)
        return [start + k * step for k in range(self.n_bars + 1)]


def _parse_clock(s):
    try:
        return time.fromisoformat(s)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad session time {s!r}") from exc


def parse_timestamp(text):
    """ISO-8601 (wall clock kept as written) or epoch seconds (UTC)."""
    s = text.strip()
    try:
        secs = float(s)
    except ValueError:
        pass
    else:
        if not np.isfinite(secs):
            raise ValueError(f"non-finite epoch {s!r}")
        return datetime.fromtimestamp(secs, tz=timezone.utc).replace(tzinfo=None)
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    return dt.replace(tzinfo=None)


def read_ticks(path):
    """Rows of ``timestamp,price``; returns (list of datetimes, price array)."""
    times, prices = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        if [h.strip().lower() for h in header] != ["timestamp", "price"]:
            raise InputError(f"{path}: line 1: expected header 'timestamp,price', got {','.join(header)!r}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputError(f"{path}: line {line}: expected 2 fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[0])
                px = float(row[1])
            except ValueError as exc:
                raise InputError(f"{path}: line {line}: unparseable row {row!r} ({exc})") from exc
            if not (np.isfinite(px) and px > 0):
                raise InputError(f"{path}: line {line}: price must be positive, got {row[1]!r}")
            if times and ts < times[-1]:
                raise InputError(f"{path}: line {line}: timestamp goes backwards")
            times.append(ts)
            prices.append(px)
    if not times:
        raise InputError(f"{path}: no tick rows")
    return times, np.asarray(prices)


_EPOCH = datetime(1970, 1, 1)


def _seconds(t):
    # naive wall-clock seconds, independent of the host time zone
    return (t - _EPOCH).total_seconds()


def resample_day(day, times, prices, session):
    """Last price at or before each bar boundary for one day's ticks.

    Returns (log-price grid, number of bars without a tick). If no tick
    precedes the open, the first tick of the session stands in for it.
    """
    bounds = session.boundaries(day)
    ts = np.array([_seconds(t) for t in times])
    bs = np.array([_seconds(b) for b in bounds])
    idx = np.searchsorted(ts, bs, side="right") - 1
    if idx[0] < 0:
        later = np.nonzero(idx >= 0)[0]
        if later.size == 0:
            return None, session.n_bars
        idx[idx < 0] = np.searchsorted(ts, bs[0], side="left")
    counts = np.diff(np.searchsorted(ts, bs, side="right"))
    missing = int(np.sum(counts == 0))
    return np.log(prices[idx]), missing


def ingest_and_resample(path, session=Session(), max_missing=MAX_MISSING_FRACTION):
    """Tick CSV to one :class:`IntradayGrid` per retained day (ids are ISO dates)."""
    times, prices = read_ticks(path)
    days = {}
    for i, t in enumerate(times):
        days.setdefault(t.date(), []).append(i)
    grids = []
    for d in sorted(days):
        ix = days[d]
        lp, missing = resample_day(d, [times[i] for i in ix], prices[ix], session)
        frac = missing / session.n_bars
        if lp is None or frac > max_missing:
            msg = f"day {d.isoformat()}: {missing}/{session.n_bars} bars missing; day dropped"
            warnings.warn(msg)
            log.warning(msg)
            continue
        grids.append(IntradayGrid(d.isoformat(), lp))
    if not grids:
        raise InputError(f"{path}: no usable days after resampling")
    return grids


def format_number(x):
    return "%.17g" % x


def panel_csv_text(panel):
    cols = [panel.column(c) for c in PANEL_COLUMNS[1:]]
    lines = [",".join(PANEL_COLUMNS)]
    for i, d in enumerate(panel.day_id):
        lines.append(",".join([str(d)] + [format_number(c[i]) for c in cols]))
    return "\n".join(lines) + "\n"


def write_panel_csv(panel, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(panel_csv_text(panel))


def read_panel_csv(path):
    """Panel CSV back to a :class:`DailyMomentPanel` (derived columns are checked, not trusted)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PANEL_COLUMNS:
            raise InputError(f"{path}: line 1: expected header {','.join(PANEL_COLUMNS)}")
        ids, rows = [], []
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != len(PANEL_COLUMNS):
                raise InputError(f"{path}: line {line}: expected {len(PANEL_COLUMNS)} fields")
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise InputError(f"{path}: line {line}: {exc}") from exc
            if not all(np.isfinite(vals)):
                raise InputError(f"{path}: line {line}: non-finite value")
            ids.append(row[0])
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    a = np.array(rows)
    col = {c: a[:, j] for j, c in enumerate(PANEL_COLUMNS[1:])}
    if not np.allclose(col["tv15"], 1.5 * col["tv"], rtol=1e-12, atol=0):
        raise InputError(f"{path}: tv15 column inconsistent with tv")
    return DailyMomentPanel(ids, col["rv"], col["tv"], col["fv"], col["r_close"])


import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from momentvar.exceptions import InputError
from momentvar.realized import (
    PANEL_COLUMNS, DailyMomentPanel, IntradayGrid, build_panel, realized_fourth, realized_third,
    realized_variance, summary_stats,
)
from momentvar.simulator import DAY, SimConfig, synth_panel

from conftest import MODEL_I

prices_st = arrays(np.float64, st.integers(2, 40), elements=st.floats(-0.05, 0.05))


def test_grid_validation():
    with pytest.raises(InputError, match="empty grid"):
        IntradayGrid("d1", [0.1])
    with pytest.raises(InputError):
        IntradayGrid("d1", [[0.0, 1.0]])
    with pytest.raises(InputError, match="d9"):
        IntradayGrid("d9", [0.0, np.nan])


def test_hand_examples():
    g = IntradayGrid(0, [0.0, 0.01, -0.01])
    assert realized_variance(g) == pytest.approx(5e-4, rel=1e-14)
    assert realized_third(g) == pytest.approx(1e-6, rel=1e-12)
    assert realized_fourth(g) == pytest.approx(1e-8, rel=1e-12)
    assert realized_third(IntradayGrid(0, [0.0, 0.01, 0.0])) == pytest.approx(2e-6, rel=1e-12)


def test_constant_prices_and_level_shift():
    g = IntradayGrid(0, np.full(10, np.log(100.0)))
    assert realized_variance(g) == 0 and realized_third(g) == 0 and realized_fourth(g) == 0
    # returns reset at the day start, so the opening level is irrelevant
    a = IntradayGrid(0, [0.0, 0.01, -0.01])
    b = IntradayGrid(0, [4.6, 4.61, 4.59])
    assert realized_third(a) == pytest.approx(realized_third(b), rel=1e-9)


@given(prices_st, st.floats(0.1, 10))
def test_scale_equivariance(lp, lam):
    g = IntradayGrid(0, lp)
    h = IntradayGrid(0, lam * g.returns())
    assert realized_variance(h) == pytest.approx(lam**2 * realized_variance(g), rel=1e-9, abs=1e-300)
    assert realized_third(h) == pytest.approx(lam**3 * realized_third(g), rel=1e-9, abs=1e-18)
    assert realized_fourth(h) == pytest.approx(lam**4 * realized_fourth(g), rel=1e-9, abs=1e-300)


@given(prices_st)
def test_nonnegativity(lp):
    g = IntradayGrid(0, lp)
    assert realized_variance(g) >= 0 and realized_fourth(g) >= 0


def test_single_day_panel_composition():
    g = IntradayGrid("2020-01-02", [0.0, 0.01, -0.01])
    p = build_panel([g])
    assert len(p) == 1 and p.day_id == ["2020-01-02"]
    assert p.rv[0] == realized_variance(g)
    assert p.tv15[0] == 1.5 * p.tv[0]
    assert p.fv15[0] == 1.5 * p.fv[0]
    assert p.r_close[0] == pytest.approx(-0.01)
    assert p.r3[0] == p.r_close[0] ** 3 and p.r4[0] == p.r_close[0] ** 4
    assert set(PANEL_COLUMNS) == {"day_id", "rv", "tv", "fv", "tv15", "fv15", "r_close", "r3", "r4"}


def test_build_panel_accepts_tuples_and_names_bad_day():
    p = build_panel([("a", [0.0, 0.1]), ("b", [0.0, -0.1, 0.0])])
    assert p.day_id == ["a", "b"]
    with pytest.raises(InputError, match="bad-day"):
        build_panel([("ok", [0.0, 0.1]), ("bad-day", [0.0])])
    with pytest.raises(InputError):
        build_panel([])


def test_panel_validation_and_subset():
    with pytest.raises(InputError):
        DailyMomentPanel([1, 2], [0.1], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(InputError):
        DailyMomentPanel([1], [-0.1], [0.0], [0.0], [0.0])
    p = DailyMomentPanel([1, 2, 3], [1.0, 2.0, 3.0], [0.1, 0.2, 0.3], [1, 1, 1], [0.0, 0.1, 0.2])
    s = p.subset(slice(1, None))
    assert s.day_id == [2, 3] and s.rv.tolist() == [2.0, 3.0]
    with pytest.raises(KeyError):
        p.column("nope")


def test_summary_stats_textbook():
    p = DailyMomentPanel([1, 2, 3], [1.0, 2.0, 3.0], [5.0, 5.0, 5.0], [1, 1, 1], [0, 0, 0])
    st_ = summary_stats(p, ("rv", "tv"))
    assert st_["rv"] == (2.0, 1.0)
    assert st_["tv"] == (5.0, 0.0)
    with pytest.raises(InputError):
        summary_stats(p.subset(slice(0, 1)))


@given(st.permutations(list(range(8))))
def test_summary_stats_permutation_invariant(perm):
    rng = np.random.default_rng(0)
    p = DailyMomentPanel(list(range(8)), rng.random(8), rng.normal(size=8), rng.random(8), rng.normal(size=8))
    q = p.subset(np.array(perm))
    a, b = summary_stats(p), summary_stats(q)
    for k in a:
        assert a[k] == pytest.approx(b[k], rel=1e-12, abs=1e-15)


@pytest.fixture(scope="module")
def model_i_panel():
    M = 2000
    return synth_panel(SimConfig(MODEL_I, M * DAY, 1, 390, seed=101, stationary_v0=True), M, 78)


def test_efficiency_property(model_i_panel):
    s = summary_stats(model_i_panel)
    assert s["tv15"][1] < s["r3"][1]
    assert s["fv15"][1] < s["r4"][1]


def test_unbiasedness_property(model_i_panel):
    p = model_i_panel
    M = len(p)
    for a, b in (("tv15", "r3"), ("fv15", "r4")):
        x, y = p.column(a), p.column(b)
        se = np.hypot(x.std(ddof=1), y.std(ddof=1)) / np.sqrt(M)
        assert abs(x.mean() - y.mean()) < 3 * se

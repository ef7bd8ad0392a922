import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from momentvar import model_core as mc
from momentvar.exceptions import DomainError, NumericalError, PreconditionError
from momentvar.model_core import HestonParams

from conftest import DELTA, FIG1, MODEL_I, MODEL_II, HIGH_VOL, SP_SIMPLE

mp.mp.dps = 50

params_st = st.builds(
    lambda k, th, g, r, f: HestonParams(kappa=k, theta=th, gamma=g, rho=r, v0=f * th),
    st.floats(0.5, 30), st.floats(0.005, 0.2), st.floats(0.05, 2.5), st.floats(-1, 1),
    st.floats(0.25, 4),
)
times_st = st.floats(1 / 252, 2)


# --- parameter validation ---------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(kappa=0, theta=0.1, gamma=0.1, rho=0),
    dict(kappa=1, theta=-0.1, gamma=0.1, rho=0),
    dict(kappa=1, theta=0.1, gamma=-0.1, rho=0),
    dict(kappa=1, theta=0.1, gamma=0.1, rho=1.5),
    dict(kappa=1, theta=0.1, gamma=0.1, rho=0, v0=-1),
    dict(kappa=float("nan"), theta=0.1, gamma=0.1, rho=0),
    dict(kappa=1, theta=0.1, gamma=0.1, rho=0, mu=float("inf")),
])
def test_invalid_params(kw):
    with pytest.raises(DomainError):
        HestonParams(**kw)


def test_feller_flag_reported_not_enforced():
    assert not MODEL_I.feller  # 2*5*0.05 = 0.5 < 0.64
    assert MODEL_II.feller  # 0.6 > 0.49
    assert HestonParams(kappa=5, theta=0.05, gamma=0.5, rho=0).feller


@pytest.mark.parametrize("fn", [mc.expected_variance, mc.expected_qv, mc.expected_variance_squared,
                                mc.expected_qv_squared, mc.expected_v_times_iv])
def test_negative_or_nonfinite_time(fn):
    with pytest.raises(DomainError):
        fn(MODEL_I, -1.0)
    with pytest.raises(DomainError):
        fn(MODEL_I, float("nan"))


@pytest.mark.parametrize("fn", [mc.expected_rv, mc.expected_third_variation, mc.expected_r2v,
                                mc.expected_fourth_variation])
def test_martingale_formulas_reject_drift(fn):
    with pytest.raises(PreconditionError):
        fn(MODEL_I.replace(mu=0.05), 0.1)


# --- stable helpers vs 50-digit direct evaluation ---------------------------

_MP = {
    "phi2": lambda x: mp.e ** (-x) - 1 + x,
    "phi3": lambda x: 1 - (1 + x) * mp.e ** (-x),
    "psi1": lambda x: 1 - (1 + x + x * x / 2) * mp.e ** (-x),
    "psi2": lambda x: 2 * (mp.e ** (-x) - 1) + x * (1 + mp.e ** (-x)),
    "chi": lambda x: x * x / 2 - (mp.e ** (-x) - 1 + x),
    "A": lambda x: 1 - 2 * x * mp.e ** (-x) - mp.e ** (-2 * x),
    "B": lambda x: x - mp.mpf(5) / 2 + 2 * (1 + x) * mp.e ** (-x) + mp.e ** (-2 * x) / 2,
    "dA": lambda x: 2 * (mp.e ** (-2 * x) - (1 - x) * mp.e ** (-x)),
}


@pytest.mark.parametrize("name", sorted(_MP))
@pytest.mark.parametrize("x", [1e-8, 1e-4, 1e-2, 0.3, 0.49, 0.5, 0.51, 2.0, 20.0])
def test_special_helpers_high_precision(name, x):
    ref = float(_MP[name](mp.mpf(x)))
    got = mc._special(name, x)
    assert got == pytest.approx(ref, rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("name", sorted(_MP))
def test_special_helpers_small_x_leading_order(name):
    # leading Taylor term: phi2 ~ x^2/2, phi3 ~ x^2/2, psi1 ~ x^3/6, psi2 ~ x^3/6,
    # chi ~ x^3/6, A ~ x^3/3, B ~ x^4/12, dA ~ x^2 ... checked as a ratio at tiny x
    lead = {"phi2": (2, 0.5), "phi3": (2, 0.5), "psi1": (3, 1 / 6), "psi2": (3, 1 / 6),
            "chi": (3, 1 / 6), "A": (3, 1 / 3), "B": (4, 1 / 12), "dA": (2, 1.0)}
    n, c = lead[name]
    x = 1e-6
    assert mc._special(name, x) / x**n == pytest.approx(c, rel=1e-5)


# --- trivial examples -------------------------------------------------------

def test_expected_variance_examples():
    p = MODEL_I
    for t in (0.0, 0.1, 3.0):
        assert mc.expected_variance(p, t) == pytest.approx(p.theta, rel=1e-15)
    assert mc.expected_variance(FIG1, 0.0) == FIG1.v0


def test_expected_qv_examples():
    assert mc.expected_qv(MODEL_I, DELTA) == pytest.approx(MODEL_I.theta * DELTA, rel=1e-14)
    assert mc.expected_qv(FIG1, 0.0) == 0.0
    for t in (1e-4, 1e-6, 1e-9):
        assert mc.expected_qv(FIG1, t) / t == pytest.approx(FIG1.v0, rel=1e-3)
    assert mc.expected_qv_limit_ratio(FIG1, 0.0) == FIG1.v0


def test_expected_variance_squared_examples():
    assert mc.expected_variance_squared(FIG1, 0.0) == pytest.approx(FIG1.v0**2, rel=1e-15)
    lim = FIG1.theta**2 + FIG1.gamma**2 * FIG1.theta / (2 * FIG1.kappa)
    assert mc.expected_variance_squared(FIG1, math.inf) == pytest.approx(lim, rel=1e-15)
    assert mc.expected_variance_squared(FIG1, 50.0) == pytest.approx(lim, rel=1e-12)


@given(params_st, times_st)
def test_variance_squared_stable_matches_printed(p, t):
    assert mc.expected_variance_squared(p, t) == pytest.approx(
        mc.expected_variance_squared_printed(p, t), rel=1e-10)


def test_v_times_iv_zero_at_origin():
    assert mc.expected_v_times_iv(FIG1, 0.0) == 0.0


@pytest.mark.parametrize("p", [FIG1, MODEL_I, MODEL_II, HIGH_VOL])
def test_derivative_identity(p):
    t, h = 0.1, 1e-5
    dz = (mc.expected_qv_squared(p, t + h) - mc.expected_qv_squared(p, t - h)) / (2 * h)
    assert mc.expected_v_times_iv(p, t) == pytest.approx(0.5 * dz, rel=1e-6)


@given(params_st, times_st)
def test_v_times_iv_stable_matches_printed(p, t):
    assert mc.expected_v_times_iv(p, t) == pytest.approx(mc.v_times_iv_printed(p, t), rel=1e-9)


def test_qv_squared_examples():
    assert mc.expected_qv_squared(FIG1, 0.0) == 0.0
    p = HestonParams(kappa=2.0, theta=0.04, gamma=0.0, rho=0.0)
    for t in (0.01, 1.0):
        assert mc.expected_qv_squared(p, t) == pytest.approx(p.theta**2 * t**2, rel=1e-13)


@given(params_st, times_st)
def test_qv_squared_dual_form_agreement(p, t):
    f1 = mc.qv_squared_form1_printed(p, t)
    f2 = mc.qv_squared_form2_printed(p, t)
    assert abs(f1 - f2) <= 1e-12 * max(1.0, abs(f1))
    stable = mc.expected_qv_squared(p, t)
    assert stable == pytest.approx(f1, rel=1e-9)
    assert mc.qv_squared_poly(p, t) == pytest.approx(stable, rel=1e-12)


def test_qv_squared_self_check_raises_on_disagreement(monkeypatch):
    monkeypatch.setattr(mc, "qv_squared_form2_printed", lambda p, t: 1.0)
    with pytest.raises(NumericalError):
        mc.expected_qv_squared(FIG1, 0.1)
    assert mc.expected_qv_squared(FIG1, 0.1, check=False) > 0


@given(params_st, times_st)
def test_longrun_qv_squared_averages_over_stationary_v0(p, t):
    # E[[R]_t^2 | V0] = C V0^2 + D V0 + E; V0 ~ Gamma with mean theta, E[V0^2] = theta^2 + gamma^2 theta/(2 kappa)
    C, D, E = mc._qv2_poly_coeffs(p, t)
    ev2 = mc.expected_variance_squared(p, math.inf)
    assert mc.longrun_qv_squared(p, t) == pytest.approx(C * ev2 + D * p.theta + E, rel=1e-10)



# --- third variation --------------------------------------------------------

def test_expected_rv_examples():
    assert mc.expected_rv(MODEL_I.replace(rho=0.0), 0.3) == 0.0
    assert mc.expected_rv(FIG1, 0.0) == 0.0


def test_third_variation_examples():
    assert mc.expected_third_variation(MODEL_I.replace(rho=0.0), 1.0) == 0.0
    assert mc.expected_third_variation(MODEL_I.replace(gamma=0.0), 1.0) == 0.0
    assert mc.expected_third_variation(FIG1, 0.0) == 0.0
    assert mc.expected_third_variation_scaled(FIG1, 0.7) == 1.5 * mc.expected_third_variation(FIG1, 0.7)


@given(params_st, times_st)
def test_third_variation_groupings_agree(p, t):
    ref = mc.expected_third_variation(p, t)
    scale = abs(p.gamma * p.rho) * p.theta * t**2 + 1e-300
    assert abs(mc.third_variation_printed(p, t) - ref) <= 1e-9 * scale
    assert abs(mc.third_variation_scaled_printed(p, t) - 1.5 * ref) <= 1e-9 * scale


def test_longrun_third_variation_examples():
    assert mc.longrun_third_variation(MODEL_I.replace(rho=0.0), 1.0) == 0.0
    for p in (MODEL_I, MODEL_II, HIGH_VOL):
        t = 40.0 / p.kappa
        assert mc.longrun_third_variation(p, t) == pytest.approx(mc.expected_third_variation(p, t),
                                                                 rel=1e-6)


def test_longrun_third_variation_sp_sign_and_quadrature():
    from scipy import integrate

    val = mc.longrun_third_variation(SP_SIMPLE, DELTA)
    assert val < 0
    quad, _ = integrate.quad(lambda u: mc.expected_rv(SP_SIMPLE, u), 0, DELTA, epsrel=1e-13)
    assert val == pytest.approx(2 * quad, rel=1e-10)


def test_third_variation_small_t_slope():
    ts = np.logspace(-4, -2, 9)
    y = np.array([abs(mc.expected_third_variation(FIG1, t)) for t in ts])
    slope = np.polyfit(np.log(ts), np.log(y), 1)[0]
    assert 1.9 <= slope <= 2.1


@given(params_st.filter(lambda p: p.rho < 0), times_st)
def test_third_variation_negative_for_negative_rho(p, t):
    assert mc.expected_third_variation(p.replace(v0=None), t) < 0


# --- drift biases -----------------------------------------------------------

def test_drift_bias_third_examples():
    assert mc.drift_bias_third(HIGH_VOL, 1.0) == 0.0
    p = HIGH_VOL.replace(mu=0.05)
    assert mc.drift_bias_third(p, 1.0) == pytest.approx(0.05**3 + 1.5 * 0.05 * 0.0233, rel=1e-14)
    assert round(mc.drift_bias_third(p, 1.0), 6) == 0.001873


def test_drift_bias_fourth_examples():
    assert mc.drift_bias_fourth(HIGH_VOL, 0.5) == 0.0
    mu, t = 0.05, 0.5
    p = HIGH_VOL.replace(mu=mu, rho=0.0)
    assert mc.drift_bias_fourth(p, t, form="printed") == pytest.approx(
        mu**4 * t**4 + 2 * mu**2 * p.theta * t**3, rel=1e-14)
    assert mc.drift_bias_fourth(p, t) == pytest.approx(mu**4 * t**4 + 4 * mu**2 * p.theta * t**3, rel=1e-14)
    with pytest.raises(ValueError):
        mc.drift_bias_fourth(p, t, form="other")


def test_drift_bias_fourth_leverage_term_is_integral_of_third_moment():
    # exact bias = 4 mu int_0^t E[R_s^3] ds with E[R_s^3] = mu^3 s^3 + 3 mu theta s^2 + 1.5 E[[R,R^2]_s]
    from scipy import integrate

    p = HIGH_VOL.replace(mu=0.3)
    t = 0.4
    q = p.replace(mu=0.0)

    def f(s):
        return p.mu**3 * s**3 + 3 * p.mu * p.theta * s**2 + 1.5 * mc.longrun_third_variation(q, s)

    val, _ = integrate.quad(f, 0, t, epsrel=1e-12)
    assert mc.drift_bias_fourth(p, t) == pytest.approx(4 * p.mu * val, rel=1e-9)


# --- fourth variation -------------------------------------------------------

def test_r2v_examples():
    assert mc.expected_r2v(FIG1, 0.0) == 0.0
    p = HestonParams(kappa=3.0, theta=0.04, gamma=0.0, rho=-0.5)
    for u in (0.01, 0.5):
        assert mc.expected_r2v(p, u) == pytest.approx(p.theta**2 * u, rel=1e-13)


def test_fourth_variation_examples():
    assert mc.expected_fourth_variation(FIG1, 0.0) == 0.0
    p = HestonParams(kappa=3.0, theta=0.04, gamma=0.0, rho=-0.5)
    for t in (DELTA, 0.5):
        assert mc.expected_fourth_variation(p, t) == pytest.approx(2 * p.theta**2 * t**2, rel=1e-10)


@given(params_st, st.floats(1 / 252, 1))
def test_fourth_variation_quadrature_matches_closed_form(p, t):
    assert mc.expected_fourth_variation(p, t) == pytest.approx(mc.expected_fourth_variation_closed(p, t),
                                                               rel=1e-9)


def test_fourth_variation_quadrature_failure_is_reported(monkeypatch):
    from scipy import integrate

    def bad_quad(*a, **k):
        import warnings
        warnings.warn("no convergence", integrate.IntegrationWarning)
        return 1.0, 1.0

    monkeypatch.setattr(integrate, "quad", bad_quad)
    with pytest.raises(NumericalError):
        mc.expected_fourth_variation(FIG1, 0.1)


# --- GMM constants ----------------------------------------------------------

@given(params_st, st.sampled_from([DELTA, 5 * DELTA, 0.25]))
def test_gmm_constant_identities(p, delta):
    k = mc.gmm_constants(p, delta)
    assert k.a == pytest.approx(math.exp(-p.kappa * delta), rel=1e-15)
    assert k.c == k.a * k.a
    assert 0 < k.a < 1
    num = k.C * k.d + (k.a - k.c) * k.D
    assert k.F * k.alpha == pytest.approx(num, rel=1e-12)
    G = -k.beta * num / k.alpha + k.C * k.f + k.b * k.D + (1 - k.c) * k.E
    assert k.G == pytest.approx(G, rel=1e-12, abs=1e-30)
    # conditional means are consistent with the closed forms started at V0
    q = p.replace(v0=0.7 * p.theta)
    v = q.V0
    assert k.alpha * v + k.beta == pytest.approx(mc.expected_qv(q, delta), rel=1e-12)
    assert k.a * v + k.b == pytest.approx(mc.expected_variance(q, delta), rel=1e-12)
    assert k.c * v**2 + k.d * v + k.f == pytest.approx(mc.expected_variance_squared(q, delta), rel=1e-10)
    assert k.C * v**2 + k.D * v + k.E == pytest.approx(mc.expected_qv_squared(q, delta), rel=1e-10)
    ref3 = mc.expected_third_variation(q, delta)
    assert k.alpha3 * v + k.beta3 == pytest.approx(ref3, rel=1e-9, abs=1e-25)


def test_gmm_constants_zero_rho():
    k = mc.gmm_constants(MODEL_II.replace(rho=0.0), DELTA)
    assert k.alpha3 == 0.0 and k.beta3 == 0.0


def test_gmm_constants_printed_beta_kept():
    k = mc.gmm_constants(MODEL_II, DELTA)
    assert k.beta_printed == pytest.approx((1 - k.alpha) * MODEL_II.theta * DELTA)
    assert k.beta == pytest.approx(MODEL_II.theta * (DELTA - k.alpha), rel=1e-10)


@pytest.mark.parametrize("delta", [0.0, -1.0, float("nan")])
def test_gmm_constants_bad_delta(delta):
    with pytest.raises(DomainError):
        mc.gmm_constants(MODEL_II, delta)

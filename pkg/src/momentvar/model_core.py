"""Closed-form moments of the square-root stochastic volatility model.

The model is

    dR_t = mu dt + sqrt(V_t) dW^s_t
    dV_t = kappa (theta - V_t) dt + gamma sqrt(V_t) dW^v_t,   d[W^s, W^v]_t = rho dt

with time measured in years. Every function here is a pure function of a
:class:`HestonParams` value and a horizon.

Most expressions contain combinations such as ``1 - exp(-kappa t) - kappa t``
that cancel catastrophically when ``kappa t`` is small. They are evaluated
through the helpers ``_phi*`` / ``_A`` / ``_B`` ..., which switch to a Taylor
series below ``_SERIES_CUTOFF``. The literal (textbook) groupings are kept as
``*_printed`` functions; they are used as cross-checks.
"""

from dataclasses import dataclass, asdict, replace
from math import factorial, isfinite
import warnings

import numpy as np
from scipy import integrate

from .exceptions import DomainError, NumericalError, PreconditionError

__all__ = [
    "HestonParams",
    "GmmConstants",
    "expected_variance",
    "expected_qv",
    "expected_variance_squared",
    "expected_v_times_iv",
    "expected_qv_squared",
    "expected_rv",
    "expected_third_variation",
    "expected_third_variation_scaled",
    "longrun_third_variation",
    "longrun_qv_squared",
    "drift_bias_third",
    "drift_bias_fourth",
    "expected_r2v",
    "expected_fourth_variation",
    "expected_fourth_variation_closed",
    "gmm_constants",
]


@dataclass(frozen=True)
class HestonParams:
    """Parameters of the square-root SV model.

    ``v0=None`` means the variance starts at its long-run mean ``theta``.
    ``gamma=0`` is accepted (deterministic variance) because it is the natural
    degenerate case for several identities; the Feller condition is only
    reported, never enforced.
    """

    kappa: float
    theta: float
    gamma: float
    rho: float
    mu: float = 0.0
    v0: float | None = None

    def __post_init__(self):
        for name in ("kappa", "theta", "gamma", "rho", "mu"):
            if not isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.v0 is not None and not isfinite(self.v0):
            raise DomainError("v0 must be finite")
        if self.kappa <= 0:
            raise DomainError(f"kappa must be > 0, got {self.kappa}")
        if self.theta <= 0:
            raise DomainError(f"theta must be > 0, got {self.theta}")
        if self.gamma < 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")
        if not -1.0 <= self.rho <= 1.0:
            raise DomainError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.v0 is not None and self.v0 < 0:
            raise DomainError(f"v0 must be >= 0, got {self.v0}")

    @property
    def V0(self):
        return self.theta if self.v0 is None else self.v0

    @property
    def feller(self):
        """True when 2 kappa theta > gamma^2."""
        return 2.0 * self.kappa * self.theta > self.gamma**2

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# stable building blocks, x = kappa * t
# ---------------------------------------------------------------------------

_SERIES_CUTOFF = 0.5
_NTERMS = 40


def _coeffs(fn, start):
    return np.array([fn(n) if n >= start else 0.0 for n in range(_NTERMS)], dtype=float)


# phi1 = 1 - e^{-x}
# phi2 = e^{-x} - 1 + x
# phi3 = 1 - (1 + x) e^{-x}
# psi1 = 1 - (1 + x + x^2/2) e^{-x}
# psi2 = 2 (e^{-x} - 1) + x (1 + e^{-x})
# chi  = x^2/2 - phi2           (= -(e^{-x} - 1 + x - x^2/2))
# A    = 1 - 2 x e^{-x} - e^{-2x}
# B    = x - 5/2 + 2 (1 + x) e^{-x} + e^{-2x}/2
# dA   = A'(x) = 2 (e^{-2x} - (1 - x) e^{-x})
_C = {
    "phi2": _coeffs(lambda n: (-1) ** n / factorial(n), 2),
    "phi3": _coeffs(lambda n: (-1) ** n * (n - 1) / factorial(n), 2),
    "psi1": _coeffs(lambda n: -((-1) ** n) * (1 - n + n * (n - 1) / 2) / factorial(n), 3),
    "psi2": _coeffs(lambda n: (-1) ** n * (2 - n) / factorial(n), 2),
    "chi": _coeffs(lambda n: -((-1) ** n) / factorial(n), 3),
    "A": _coeffs(lambda n: (-1) ** n * (2 * n - 2**n) / factorial(n), 3),
    "B": _coeffs(lambda n: (-1) ** n * (2 * (1 - n) + 2 ** (n - 1)) / factorial(n), 4),
    "dA": _coeffs(lambda n: 2 * (-1) ** n * (2**n - 1 - n) / factorial(n), 2),
}

_DIRECT = {
    "phi2": lambda x: np.exp(-x) - 1.0 + x,
    "phi3": lambda x: 1.0 - (1.0 + x) * np.exp(-x),
    "psi1": lambda x: 1.0 - (1.0 + x + 0.5 * x * x) * np.exp(-x),
    "psi2": lambda x: 2.0 * (np.exp(-x) - 1.0) + x * (1.0 + np.exp(-x)),
    "chi": lambda x: 0.5 * x * x - (np.exp(-x) - 1.0 + x),
    "A": lambda x: 1.0 - 2.0 * x * np.exp(-x) - np.exp(-2.0 * x),
    "B": lambda x: x - 2.5 + 2.0 * (1.0 + x) * np.exp(-x) + 0.5 * np.exp(-2.0 * x),
    "dA": lambda x: 2.0 * (np.exp(-2.0 * x) - (1.0 - x) * np.exp(-x)),
}


def _special(name, x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_CUTOFF
    if np.any(small):
        out[small] = np.polynomial.polynomial.polyval(x[small], _C[name])
    if np.any(~small):
        out[~small] = _DIRECT[name](x[~small])
    return out if out.ndim else float(out)


def _phi1(x):
    return -np.expm1(-x)


def _check_time(t, name="t"):
    t = float(t)
    if not isfinite(t):
        raise DomainError(f"{name} must be finite")
    if t < 0:
        raise DomainError(f"{name} must be >= 0, got {t}")
    return t


def _require_martingale(p):
    if p.mu != 0.0:
        raise PreconditionError(
            "formula assumes a driftless return (mu = 0); "
            "use drift_bias_third/drift_bias_fourth for the drift correction"
        )


# ---------------------------------------------------------------------------
# first and second moments of V and of the integrated variance
# ---------------------------------------------------------------------------

def expected_variance(p, t):
    """E[V_t] = V0 e^{-kt} + theta (1 - e^{-kt})."""
    t = _check_time(t)
    e = np.exp(-p.kappa * t)
    return p.V0 * e + p.theta * _phi1(p.kappa * t)


def expected_qv(p, t):
    """E[[R]_t] = E[int_0^t V_s ds]."""
    t = _check_time(t)
    x = p.kappa * t
    return ((p.V0 - p.theta) * _phi1(x)) / p.kappa + p.theta * t


def expected_qv_limit_ratio(p, t):
    """E[[R]_t] / t, finite as t -> 0 (tends to V0)."""
    t = _check_time(t)
    if t == 0:
        return p.V0
    return expected_qv(p, t) / t


def _var_v(p, t):
    x = p.kappa * t
    e = np.exp(-x)
    return p.gamma**2 / p.kappa * (p.V0 * e * _phi1(x) + 0.5 * p.theta * _phi1(x) ** 2)


def expected_variance_squared(p, t):
    """E[V_t^2]; ``t=inf`` gives the limit theta^2 + gamma^2 theta / (2 kappa)."""
    if t == np.inf:
        return p.theta**2 + p.gamma**2 * p.theta / (2 * p.kappa)
    t = _check_time(t)
    return expected_variance(p, t) ** 2 + _var_v(p, t)


def expected_variance_squared_printed(p, t):
    k, th, g, v0 = p.kappa, p.theta, p.gamma, p.V0
    e1, e2 = np.exp(-k * t), np.exp(-2 * k * t)
    return (
        e2 * v0**2
        + (2 * k * th + g**2) / k * (e1 - e2) * v0
        + th * (2 * k * th + g**2) / k * (0.5 - e1 + 0.5 * e2)
    )


def _var_qv(p, t):
    x = p.kappa * t
    return p.gamma**2 / p.kappa**3 * (p.V0 * _special("A", x) + p.theta * _special("B", x))


def expected_qv_squared(p, t, check=True):
    """E[[R]_t^2], the second moment of integrated variance.

    Evaluated as E[[R]_t]^2 + Var([R]_t) with cancellation-free helpers. With
    ``check=True`` both textbook groupings (the (V0 - theta) form and the
    polynomial-in-V0 form) are evaluated as well and required to agree to
    1e-12 * max(1, |value|).
    """
    t = _check_time(t)
    value = expected_qv(p, t) ** 2 + _var_qv(p, t)
    if check:
        f1 = qv_squared_form1_printed(p, t)
        f2 = qv_squared_form2_printed(p, t)
        if abs(f1 - f2) > 1e-12 * max(1.0, abs(f1)):
            raise NumericalError(f"E[[R]^2] forms disagree: {f1!r} vs {f2!r}")
    return value


def qv_squared_form1_printed(p, t):
    """Literal (V0 - theta)-grouped expression for E[[R]_t^2]."""
    k, th, g, v0 = p.kappa, p.theta, p.gamma, p.V0
    e1, e2 = np.exp(-k * t), np.exp(-2 * k * t)
    return (
        2 * (th - v0) / k * (th + g**2 / k) * t * e1
        + 2 * (g**2 * th / k**3 - (v0 - th) ** 2 / k**2) * e1
        + ((v0 - th) ** 2 / k**2 - g**2 / k**3 * (v0 - 0.5 * th)) * e2
        + th**2 * t**2
        + (2 * (v0 - th) * th / k + g**2 * th / k**2) * t
        + (v0 - th) ** 2 / k**2
        + g**2 / k**3 * (v0 - 2.5 * th)
    )


def _qv2_poly_coeffs_printed(p, t):
    k, th, g = p.kappa, p.theta, p.gamma
    e1, e2 = np.exp(-k * t), np.exp(-2 * k * t)
    C = (e1 - 1) ** 2 / k**2
    D = (
        -2 / k * (th + g**2 / k) * t * e1
        + 4 * th / k**2 * e1
        - (2 * th / k**2 + g**2 / k**3) * e2
        + 2 * th / k * t
        - 2 * th / k**2
        + g**2 / k**3
    )
    E = (
        2 * th / k * (th + g**2 / k) * t * e1
        + 2 * (g**2 * th / k**3 - th**2 / k**2) * e1
        + (th**2 / k**2 + g**2 * th / (2 * k**3)) * e2
        + th**2 * t**2
        + (g**2 * th / k**2 - 2 * th**2 / k) * t
        + th**2 / k**2
        - 5 * g**2 * th / (2 * k**3)
    )
    return C, D, E


def qv_squared_form2_printed(p, t):
    """Literal polynomial-in-V0 expression for E[[R]_t^2]."""
    C, D, E = _qv2_poly_coeffs_printed(p, t)
    return C * p.V0**2 + D * p.V0 + E


def _qv2_poly_coeffs(p, t):
    # stable C, D, E with E[[R]_t^2 | V0] = C V0^2 + D V0 + E
    k, th, g = p.kappa, p.theta, p.gamma
    x = k * t
    f1, f2 = _phi1(x), _special("phi2", x)
    A, B = _special("A", x), _special("B", x)
    C = f1**2 / k**2
    D = 2 * th * f1 * f2 / k**2 + g**2 * A / k**3
    E = th**2 * f2**2 / k**2 + g**2 * th * B / k**3
    return C, D, E


def qv_squared_poly(p, t):
    """Stable evaluation of the polynomial-in-V0 grouping."""
    t = _check_time(t)
    C, D, E = _qv2_poly_coeffs(p, t)
    return C * p.V0**2 + D * p.V0 + E


def longrun_qv_squared(p, t):
    """E[[R]_{s,s+t}^2] as s -> inf: theta^2 t^2 + (gamma^2 theta / kappa^2)(e^{-kt}/k + t - 1/k).

    This averages over the stationary law of the starting variance, so it
    differs from ``expected_qv_squared`` with ``v0=theta``.
    """
    t = _check_time(t)
    return p.theta**2 * t**2 + p.gamma**2 * p.theta / p.kappa**3 * _special("phi2", p.kappa * t)


def expected_v_times_iv(p, t):
    """E[V_t int_0^t V_u du]; equals half the time derivative of E[[R]_t^2]."""
    t = _check_time(t)
    x = p.kappa * t
    drift = expected_qv(p, t) * expected_variance(p, t)
    return drift + p.gamma**2 / (2 * p.kappa**2) * (
        p.V0 * _special("dA", x) + p.theta * _special("A", x)
    )


def v_times_iv_printed(p, t):
    k, th, g, v0 = p.kappa, p.theta, p.gamma, p.V0
    e1, e2 = np.exp(-k * t), np.exp(-2 * k * t)
    return (
        (v0 - th) * (th + g**2 / k) * t * e1
        + ((v0 - th) * (v0 - 2 * th) / k - g**2 * v0 / k**2) * e1
        + (-((v0 - th) ** 2) / k + g**2 / k**2 * (v0 - 0.5 * th)) * e2
        + th**2 * t
        + (v0 - th) * th / k
        + g**2 * th / (2 * k**2)
    )


# ---------------------------------------------------------------------------
# third moment variation
# ---------------------------------------------------------------------------

def expected_rv(p, u):
    """E[R_u V_u] for a driftless return."""
    u = _check_time(u, "u")
    _require_martingale(p)
    x = p.kappa * u
    return p.gamma * p.rho / p.kappa * (
        (p.V0 - p.theta) * x * np.exp(-x) + p.theta * _phi1(x)
    )


def _int_rv(p, t):
    # int_0^t E[R_u V_u] du
    x = p.kappa * t
    return p.gamma * p.rho / p.kappa**2 * (
        (p.V0 - p.theta) * _special("phi3", x) + p.theta * _special("phi2", x)
    )


def expected_third_variation(p, t):
    """E[[R, R^2]_t] = 2 int_0^t E[R_u V_u] du (driftless return)."""
    t = _check_time(t)
    _require_martingale(p)
    return 2.0 * _int_rv(p, t)


def expected_third_variation_scaled(p, t):
    """1.5 E[[R, R^2]_t], which equals E[R_t^3] for a martingale return."""
    return 1.5 * expected_third_variation(p, t)


def third_variation_scaled_printed(p, t):
    """Literal V0/theta grouping of 1.5 E[[R, R^2]_t]."""
    k, th, g, r, v0 = p.kappa, p.theta, p.gamma, p.rho, p.V0
    e = np.exp(-k * t)
    return 3 * g * r / k * (
        v0 * (1 - e * (k * t + 1)) / k + th * ((e * (k * t + 2) - 2) / k + t)
    )


def third_variation_printed(p, t):
    """Literal (V0 - theta) grouping of E[[R, R^2]_t]."""
    k, th, g, r, v0 = p.kappa, p.theta, p.gamma, p.rho, p.V0
    e = np.exp(-k * t)
    return 2 * g * r / k * ((v0 - th) * (1 - e * (k * t + 1)) / k + th * ((e - 1) / k + t))


def longrun_third_variation(p, t):
    """Stationary limit (2 gamma rho theta / kappa)(e^{-kt}/k + t - 1/k)."""
    t = _check_time(t)
    return 2 * p.gamma * p.rho * p.theta / p.kappa**2 * _special("phi2", p.kappa * t)


# ---------------------------------------------------------------------------
# drift corrections
# ---------------------------------------------------------------------------

def drift_bias_third(p, t):
    """E[R_t^3] - 1.5 E[[R, R^2]_t] under a constant drift mu (stationary V)."""
    t = _check_time(t)
    mu = p.mu
    return mu**3 * t**3 + 1.5 * mu * p.theta * t**2


def drift_bias_fourth(p, t, form="exact"):
    """E[R_t^4] - 1.5 E[[R^2]_t] under a constant drift mu (stationary V).

    ``form="exact"`` includes the ``mu s theta`` contribution of E[R_s V_s]
    under drift, which gives ``4 mu^2 theta t^3``; ``form="printed"`` is the
    widely quoted expression with ``2 mu^2 theta t^3``. Both share the
    leverage term ``(12 gamma rho theta mu / kappa)(...)``.
    """
    t = _check_time(t)
    mu, th = p.mu, p.theta
    if form == "exact":
        c = 4.0
    elif form == "printed":
        c = 2.0
    else:
        raise ValueError(f"unknown form {form!r}")
    lev = 12 * p.gamma * p.rho * th * mu / p.kappa**3 * _special("chi", p.kappa * t)
    return mu**4 * t**4 + c * mu**2 * th * t**3 + lev


# ---------------------------------------------------------------------------
# fourth moment variation
# ---------------------------------------------------------------------------

def _m(p, u):
    # E[int_0^u V ds * int_0^u R sqrt(V) dW^s]
    x = p.kappa * u
    return (p.gamma * p.rho) ** 2 / p.kappa**3 * (
        (p.V0 - p.theta) * _special("psi1", x) + p.theta * _special("psi2", x)
    )


def expected_r2v(p, u):
    """E[R_u^2 V_u] for a driftless return.

    From d(R^2 V) = (kappa theta R^2 - kappa R^2 V + V^2 + 2 gamma rho R V) dt + dM:
    E[R_u^2 V_u] = -2 kappa m(u) + 2 gamma rho int_0^u E[R_s V_s] ds + E[V_u int_0^u V ds].
    """
    u = _check_time(u, "u")
    _require_martingale(p)
    return -2 * p.kappa * _m(p, u) + 2 * p.gamma * p.rho * _int_rv(p, u) + expected_v_times_iv(p, u)


def expected_fourth_variation(p, t, quad_tol=1e-10):
    """E[[R^2]_t] = 4 int_0^t E[R_u^2 V_u] du by adaptive Gauss-Kronrod quadrature."""
    t = _check_time(t)
    _require_martingale(p)
    if t == 0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                lambda u: expected_r2v(p, u), 0.0, t, epsabs=0.0, epsrel=quad_tol, limit=200
            )
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature did not converge to rtol={quad_tol}: {exc}") from exc
    if abs(err) > max(quad_tol * abs(val), 1e-300):
        raise NumericalError(f"quadrature error estimate {err:g} exceeds rtol={quad_tol}")
    return 4.0 * val


def expected_fourth_variation_closed(p, t):
    """Closed form 8 m(t) + 2 E[[R]_t^2]; the integral of 4 E[R^2 V] done by hand."""
    t = _check_time(t)
    _require_martingale(p)
    return 8 * _m(p, t) + 2 * expected_qv_squared(p, t, check=False)


# ---------------------------------------------------------------------------
# conditional-moment constants for GMM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GmmConstants:
    """Scalars linking consecutive daily variations.

    ``E[V_{i+1}|F_i] = a V_i + b``; ``E[[R]_{i,i+1}|F_i] = alpha V_i + beta``;
    ``E[[R,R^2]_{i,i+1}|F_i] = alpha3 V_i + beta3``;
    ``E[[R]^2_{i,i+1}|F_i] = C V_i^2 + D V_i + E``;
    ``E[V^2_{i+1}|F_i] = c V_i^2 + d V_i + f``; F and G close the recursion
    ``E[[R]^2_{i+1,i+2}|F_{i+1}] ~ c [R]^2_{i,i+1} + F [R]_{i,i+1} + G``.
    """

    a: float
    b: float
    alpha: float
    beta: float
    alpha3: float
    beta3: float
    C: float
    D: float
    E: float
    c: float
    d: float
    f: float
    F: float
    G: float
    delta: float
    beta_printed: float


def gmm_constants(p, delta):
    delta = float(delta)
    if not isfinite(delta) or delta <= 0:
        raise DomainError(f"delta must be finite and > 0, got {delta}")
    k, th, g, r = p.kappa, p.theta, p.gamma, p.rho
    x = k * delta
    a = float(np.exp(-x))
    b = th * float(_phi1(x))
    alpha = float(_phi1(x)) / k
    beta = th * float(_special("phi2", x)) / k  # theta * (delta - alpha)
    alpha3 = 2 * g * r / k**2 * float(_special("phi3", x))
    # (e^{-x}(x+2) - 2)/k + delta = (phi2 - phi3)/k
    beta3 = 2 * g * r * th / k**2 * float(_special("phi2", x) - _special("phi3", x))
    C, D, E = (float(v) for v in _qv2_poly_coeffs(p.replace(v0=None), delta))
    c = a * a
    d = (2 * k * th + g**2) / k * a * float(_phi1(x))
    f = th * (2 * k * th + g**2) / k * 0.5 * float(_phi1(x)) ** 2
    num = C * d + (a - c) * D
    F = num / alpha
    G = -beta / alpha * num + C * f + b * D + (1 - c) * E
    vals = dict(a=a, b=b, alpha=alpha, beta=beta, alpha3=alpha3, beta3=beta3,
                C=C, D=D, E=E, c=c, d=d, f=f, F=F, G=G)
    if not all(isfinite(v) for v in vals.values()):
        raise DomainError("non-finite GMM constant")
    return GmmConstants(**vals, delta=delta, beta_printed=(1 - alpha) * th * delta)

"""Moment-based estimation of the square-root SV model from a daily panel.

The "simple" estimator combines sample averages of the realized variations
with an ARMA(1,1) fit of the daily realized variance:

* theta from the mean of rv / delta,
* kappa from the AR coefficient a = exp(-kappa delta),
* gamma from the stationary second moment of daily integrated variance,
* rho from the stationary mean of the third variation.
"""

from dataclasses import dataclass, field, asdict
import json
import logging
import warnings

import numpy as np
from scipy import optimize, signal

from .exceptions import EstimationError
from .model_core import HestonParams

log = logging.getLogger(__name__)

ARMA_BOUND = 0.999
MIN_ARMA_LENGTH = 50


@dataclass
class ArmaFit:
    ar: float
    ma: float
    intercept: float
    sigma2: float
    loglik: float
    ar_se: float
    ma_se: float
    n: int
    converged: bool
    at_boundary: bool


def _css_residuals(y, a, b):
    # n_i = y_i - a y_{i-1} - b n_{i-1}, n_0 = 0 (i counts from the second observation)
    e = y[1:] - a * y[:-1]
    return signal.lfilter([1.0], [1.0, b], e)


def _sse(theta, y):
    n = _css_residuals(y, theta[0], theta[1])
    return float(n @ n)


def fit_arma11(series):
    """Conditional-sum-of-squares fit of a demeaned ARMA(1,1).

    Minimises sum n_i^2 over (a, b) in (-0.999, 0.999)^2 with L-BFGS-B from a
    small grid of starting points. Standard errors come from the numerical
    Hessian of the sum of squares, ``cov = 2 sigma^2 H^{-1}``.
    """
    y = np.asarray(series, dtype=float)
    if y.size < MIN_ARMA_LENGTH:
        raise EstimationError("arma", f"insufficient data: {y.size} < {MIN_ARMA_LENGTH}")
    if not np.all(np.isfinite(y)):
        raise EstimationError("arma", "non-finite observation")
    mean = float(y.mean())
    yc = y - mean
    scale = yc.std()
    if scale == 0:
        raise EstimationError("arma", "series is constant")
    yc = yc / scale
    bounds = [(-ARMA_BOUND, ARMA_BOUND)] * 2
    best = None
    for a0 in (-0.5, 0.0, 0.5, 0.9):
        for b0 in (-0.5, 0.0, 0.5):
            res = optimize.minimize(_sse, [a0, b0], args=(yc,), method="L-BFGS-B", bounds=bounds)
            if best is None or res.fun < best.fun:
                best = res
    if not np.all(np.isfinite(best.x)):
        raise EstimationError("arma", f"optimizer failed, last iterate {best.x}")
    a, b = (float(v) for v in best.x)
    resid = _css_residuals(yc, a, b)
    if not np.all(np.isfinite(resid)):
        raise EstimationError("arma", "non-finite residuals")
    n = resid.size
    sigma2 = float(resid @ resid) / n
    at_boundary = max(abs(a), abs(b)) > ARMA_BOUND - 1e-4
    if at_boundary:
        warnings.warn(f"ARMA(1,1) estimate at the stationarity boundary (a={a:.4f}, b={b:.4f})")
    ar_se = ma_se = float("nan")
    h = 1e-4
    H = np.empty((2, 2))
    x0 = np.array([a, b])
    for i in range(2):
        for j in range(2):
            ei, ej = np.eye(2)[i] * h, np.eye(2)[j] * h
            H[i, j] = (_sse(x0 + ei + ej, yc) - _sse(x0 + ei - ej, yc)
                       - _sse(x0 - ei + ej, yc) + _sse(x0 - ei - ej, yc)) / (4 * h * h)
    try:
        cov = 2 * sigma2 * np.linalg.inv(H)
        ar_se, ma_se = (float(np.sqrt(v)) if v > 0 else float("nan") for v in np.diag(cov))
    except np.linalg.LinAlgError:
        pass
    loglik = -0.5 * n * (np.log(2 * np.pi * sigma2 * scale**2) + 1)
    return ArmaFit(ar=a, ma=b, intercept=mean, sigma2=sigma2 * scale**2, loglik=float(loglik),
                   ar_se=ar_se, ma_se=ma_se, n=int(y.size), converged=bool(best.success),
                   at_boundary=bool(at_boundary))


def estimate_theta(panel, delta):
    if len(panel) < 1:
        raise EstimationError("theta", "empty panel")
    if not delta > 0:
        raise EstimationError("theta", "delta must be > 0")
    return float(np.mean(panel.rv) / delta)


def kappa_from_ar(ar, delta):
    if not 0 < ar < 1:
        raise EstimationError("kappa", f"AR coefficient {ar:.6g} outside (0, 1); kappa not identified")
    return float(-np.log(ar) / delta)


def estimate_kappa(panel, delta, arma=None):
    """kappa = -log(a) / delta with a the ARMA(1,1) AR coefficient of daily rv."""
    if arma is None:
        arma = fit_arma11(panel.rv)
    return kappa_from_ar(arma.ar, delta)


def estimate_gamma(panel, delta, theta_hat, kappa_hat):
    """Volatility of variance from the stationary E[[R]_delta^2]."""
    if not kappa_hat > 0:
        raise EstimationError("gamma", "kappa_hat must be > 0")
    num = float(np.mean(panel.rv**2)) - theta_hat**2 * delta**2
    k = kappa_hat
    den = theta_hat / k**2 * (np.exp(-k * delta) / k + delta - 1.0 / k)
    tol = 1e-12 * theta_hat**2 * delta**2
    if abs(num) <= tol:
        warnings.warn("zero variance of daily realized variance; gamma_hat = 0")
        return 0.0
    if num < 0:
        raise EstimationError("gamma", f"negative variance-of-QV estimate ({num:.3g})")
    return float(np.sqrt(num / den))


def estimate_rho(panel, delta, theta_hat, kappa_hat, gamma_hat):
    """Leverage from the stationary mean of the (unscaled) third variation."""
    if not gamma_hat > 0:
        raise EstimationError("rho", "gamma_hat must be > 0")
    k = kappa_hat
    den = 2 * gamma_hat * theta_hat / k * ((np.exp(-k * delta) - 1) / k + delta)
    if den == 0:
        raise EstimationError("rho", "zero denominator")
    return float(np.mean(panel.tv) / den)


@dataclass
class EstimationReport:
    method: str
    estimates: HestonParams
    std_errors: dict | None
    diagnostics: dict
    n_days: int
    delta: float
    start: HestonParams | None = None

    def to_dict(self):
        d = {
            "method": self.method,
            "estimates": _params_dict(self.estimates),
            "std_errors": self.std_errors,
            "diagnostics": self.diagnostics,
            "n_days": self.n_days,
            "delta": self.delta,
            "start": _params_dict(self.start) if self.start is not None else None,
        }
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"

    def to_text(self):
        e = self.estimates
        lines = [f"method: {self.method}   days: {self.n_days}   delta: {self.delta:.6g}"]
        se = self.std_errors or {}
        for name in ("theta", "kappa", "gamma", "rho"):
            val = getattr(e, name)
            s = ""
            if name == "gamma" and "gamma2" in se:
                s = f"   (se of gamma^2: {se['gamma2']:.4g})"
            elif name in se:
                s = f"   (se: {se[name]:.4g})"
            lines.append(f"  {name:<6}{val:>14.6g}{s}")
        for k, v in sorted(self.diagnostics.items()):
            lines.append(f"  {k}: {v}")
        return "\n".join(lines) + "\n"


def _params_dict(p):
    return {k: getattr(p, k) for k in ("kappa", "theta", "gamma", "rho", "mu", "v0")}


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def simple_estimate(panel, delta, kappa=None):
    """theta -> kappa -> gamma -> rho pipeline.

    ``kappa`` fixes the mean-reversion rate and skips the ARMA stage.
    """
    notes = []
    diag = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        theta = estimate_theta(panel, delta)
        if kappa is None:
            arma = fit_arma11(panel.rv)
            diag.update(arma_ar=arma.ar, arma_ma=arma.ma, arma_ar_se=arma.ar_se,
                        arma_converged=arma.converged, arma_at_boundary=arma.at_boundary)
            kappa = kappa_from_ar(arma.ar, delta)
        gamma = estimate_gamma(panel, delta, theta, kappa)
        if gamma > 0:
            rho = estimate_rho(panel, delta, theta, kappa, gamma)
        else:
            notes.append("rho not identified when gamma_hat = 0; set to 0")
            rho = 0.0
    notes.extend(str(w.message) for w in caught)
    diag["rho_raw"] = rho
    diag["rho_clamped"] = abs(rho) > 1
    if abs(rho) > 1:
        notes.append(f"|rho_hat| = {abs(rho):.4f} > 1, clamped")
        rho = float(np.clip(rho, -1, 1))
    est = HestonParams(kappa=kappa, theta=theta, gamma=gamma, rho=rho)
    diag["feller"] = est.feller
    diag["warnings"] = notes
    for n in notes:
        log.warning(n)
    return EstimationReport("simple", est, None, diag, len(panel), float(delta))

"""Two-step GMM for the square-root SV model on daily realized variations.

Day ``j`` of the panel covers ``[t_j, t_{j+1}]``. The moment vector at ``i``
uses days ``i-2 .. i+1`` (time points ``t_{i-2} .. t_{i+2}``):

    u_i  = rv_{i+1} - a rv_i - (1 - a) theta delta
    g1 = u_i, g2 = u_i rv_{i-1}, g3 = u_i rv_{i-2}
    w_i  = tv_{i+1} - a tv_i + a beta3 - alpha3 b - beta3
    g4 = w_i, g5 = w_i tv_{i-1}
    g6 = rv_{i+1}^2 - c rv_i^2 - F rv_i - G

with the constants of :func:`momentvar.model_core.gmm_constants`.
"""

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import optimize, stats

from .estimation import EstimationReport, simple_estimate
from .exceptions import EstimationError, InputError
from .model_core import HestonParams, gmm_constants

N_LAGS = 2
WINDOW = 4
PARAM_NAMES = ("kappa", "theta", "gamma", "rho")


@dataclass(frozen=True)
class GmmOptions:
    maxiter: int = 4000
    xatol: float = 1e-7
    fatol: float = 1e-9
    hac_lags: int | None = None
    fd_step: float = 1e-5
    ridge: float = 1e-10
    instruments: str = "base"  # or "extended": adds rv_{i-3} and tv_{i-2}


def _moment_columns(eta, rv, tv, delta, instruments="base"):
    k = gmm_constants(eta, delta)
    lo = 3 if instruments == "extended" else 2
    nxt = slice(lo + 1, None)
    cur = slice(lo, -1)

    def lag(x, j):
        return x[lo - j:len(x) - 1 - j]

    u = rv[nxt] - k.a * rv[cur] - (1 - k.a) * eta.theta * delta
    w = tv[nxt] - k.a * tv[cur] + k.a * k.beta3 - k.alpha3 * k.b - k.beta3
    g6 = rv[nxt] ** 2 - k.c * rv[cur] ** 2 - k.F * rv[cur] - k.G
    cols = [u, u * lag(rv, 1), u * lag(rv, 2), w, w * lag(tv, 1), g6]
    if instruments == "extended":
        cols += [u * lag(rv, 3), w * lag(tv, 2)]
    elif instruments != "base":
        raise ValueError(f"unknown instrument set {instruments!r}")
    return np.column_stack(cols)


def gmm_moment_vector(eta, rv_window, tv_window, delta):
    """Six moment components for one observation window.

    ``rv_window``/``tv_window`` hold days ``i-2, i-1, i, i+1``.
    """
    rv = np.asarray(rv_window, dtype=float)
    tv = np.asarray(tv_window, dtype=float)
    if rv.shape != (WINDOW,) or tv.shape != (WINDOW,):
        raise InputError(f"window must hold exactly {WINDOW} consecutive days (i-2 .. i+1)")
    return _moment_columns(eta, rv, tv, delta)[0]


def gmm_moments(eta, panel, delta, instruments="base"):
    """Moment matrix, one row per usable window (M - 3 rows for the base set)."""
    if len(panel) < WINDOW + 1:
        raise InputError("panel too short for the GMM moment vector")
    return _moment_columns(eta, panel.rv, panel.tv, float(delta), instruments)


def bartlett_lags(n):
    return int(np.floor(4 * (n / 100.0) ** (2.0 / 9.0)))


def hac_covariance(g, lags=None):
    """Newey-West long-run covariance of the rows of ``g`` (centered, Bartlett kernel)."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    if lags is None:
        lags = bartlett_lags(n)
    x = g - g.mean(axis=0)
    S = x.T @ x / n
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        G = x[j:].T @ x[:-j] / n
        S += w * (G + G.T)
    return S


def _to_free(p):
    rho = float(np.clip(p.rho, -0.999999, 0.999999))
    return np.array([np.log(p.kappa), np.log(p.theta), np.log(max(p.gamma, 1e-8)), np.arctanh(rho)])


def _from_free(x):
    return HestonParams(kappa=float(np.exp(x[0])), theta=float(np.exp(x[1])),
                        gamma=float(np.exp(x[2])), rho=float(np.tanh(x[3])))


def _params_from_vec(v):
    return HestonParams(kappa=v[0], theta=v[1], gamma=v[2], rho=v[3])


def _weight_from(S, ridge):
    note = None
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e12:
        S = S + ridge * np.eye(S.shape[0])
        note = f"weight matrix ill-conditioned (cond={cond:.3g}); ridge {ridge:g} added"
        warnings.warn(note)
    return np.linalg.inv(S), note


def gmm_estimate(panel, delta, start=None, opts=GmmOptions()):
    """Two-step GMM started from ``start`` (the simple estimates by default).

    Step 1 minimises the moment norm with each component scaled by its
    standard deviation at the start (identity weight in those units); step 2
    re-minimises with the inverse Bartlett HAC covariance evaluated at the
    step-1 optimum. Nelder-Mead runs in (log kappa, log theta, log gamma,
    atanh rho). Standard errors use (G' W G)^{-1} / n with a central
    difference Jacobian; gamma's entry is also reported for gamma^2.
    """
    M = len(panel)
    if M < 100:
        raise EstimationError("gmm", f"need at least 100 days, got {M}")
    delta = float(delta)
    notes = []
    if start is None:
        start = simple_estimate(panel, delta).estimates
    start = HestonParams(kappa=start.kappa, theta=start.theta, gamma=max(start.gamma, 1e-4),
                         rho=start.rho)
    instr = opts.instruments
    g0 = gmm_moments(start, panel, delta, instr)
    n = g0.shape[0]
    scale = g0.std(axis=0)
    scale[scale == 0] = 1.0

    def gbar(p):
        return gmm_moments(p, panel, delta, instr).mean(axis=0) / scale

    def objective(x, W):
        try:
            gb = gbar(_from_free(x))
        except ValueError:
            return np.inf
        val = n * gb @ W @ gb
        return val if np.isfinite(val) else np.inf

    nm = dict(maxiter=opts.maxiter, maxfev=4 * opts.maxiter, xatol=opts.xatol, fatol=opts.fatol,
              adaptive=True)
    k = g0.shape[1]
    W1 = np.eye(k)
    x0 = _to_free(start)
    j1_start = objective(x0, W1)
    r1 = optimize.minimize(objective, x0, args=(W1,), method="Nelder-Mead", options=nm)
    p1 = _from_free(r1.x)

    g1 = gmm_moments(p1, panel, delta, instr) / scale
    lags = opts.hac_lags if opts.hac_lags is not None else bartlett_lags(M)
    W2, note = _weight_from(hac_covariance(g1, lags), opts.ridge)
    if note:
        notes.append(note)
    j2_start = objective(r1.x, W2)
    r2 = optimize.minimize(objective, r1.x, args=(W2,), method="Nelder-Mead", options=nm)
    if r2.fun > j2_start:  # never hand back a worse point than the step-1 optimum
        r2.x, r2.fun = r1.x, j2_start
    est = _from_free(r2.x)

    # standard errors in natural parameters
    v = np.array([est.kappa, est.theta, est.gamma, est.rho])
    G = np.empty((k, 4))
    for j in range(4):
        h = opts.fd_step * max(abs(v[j]), 1e-8)
        up, dn = v.copy(), v.copy()
        up[j] += h
        dn[j] -= h
        if j == 3:
            up[j], dn[j] = min(up[j], 1.0), max(dn[j], -1.0)
        G[:, j] = (gbar(_params_from_vec(up)) - gbar(_params_from_vec(dn))) / (up[j] - dn[j])
    std_errors = None
    try:
        cov = np.linalg.inv(G.T @ W2 @ G) / n
        se = np.sqrt(np.clip(np.diag(cov), 0, None))
        std_errors = {name: float(s) for name, s in zip(PARAM_NAMES, se)}
        std_errors["gamma2"] = float(2 * est.gamma * std_errors["gamma"])
    except np.linalg.LinAlgError:
        notes.append("singular G'WG; standard errors unavailable")

    converged = bool(r1.success and r2.success)
    dof = k - 4
    diag = {
        "feller": est.feller,
        "converged": converged,
        "iterations": int(r1.nit + r2.nit),
        "iterations_step1": int(r1.nit),
        "iterations_step2": int(r2.nit),
        "objective_step1_start": float(j1_start),
        "objective_step1": float(r1.fun),
        "objective_step2_start": float(j2_start),
        "objective": float(r2.fun),
        "j_pvalue": float(stats.chi2.sf(r2.fun, dof)) if dof > 0 else None,
        "hac_lags": int(lags),
        "n_moment_obs": int(n),
        "instruments": instr,
        "step1_estimates": {name: getattr(p1, name) for name in PARAM_NAMES},
        "warnings": notes + ["realized variations stand in for exact ones (errors-in-variables not corrected)"],
    }
    return EstimationReport("gmm", est, std_errors, diag, M, delta, start=start)

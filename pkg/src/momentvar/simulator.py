"""Monte Carlo engine for the square-root SV model.

Paths are advanced by an Euler scheme on a uniform grid of
``steps_per_day`` steps per trading day (one day = ``DAY`` years). Along
each path the kernel accumulates, by left-point sums,

* ``qv``  = int V ds            (quadratic variation of R)
* ``tv``  = 2 int R V ds        (third moment variation [R, R^2])
* ``fv``  = 4 int R^2 V ds      (fourth moment variation [R^2])

together with the finite-sum brackets on the simulation grid itself
(``grid_tv = sum dR d(R^2)``, ``grid_fv = sum (d(R^2))^2``) and the Ito sums
``3 sum R^2 dR`` and ``4 sum R^3 dR`` used by the pathwise identity checks.

Every path draws its normals from its own generator seeded by
``SeedSequence(seed, spawn_key=(path_index,))``, so results are bit-identical
for a given (seed, config) regardless of how the work is split.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numba
import numpy as np

from .model_core import HestonParams
from .exceptions import DomainError, PreconditionError

DAY = 1.0 / 252.0

FULL_TRUNCATION = "full_truncation_euler"
REFLECTION = "reflection_euler"
_SCHEMES = {FULL_TRUNCATION: 0, REFLECTION: 1}


@dataclass(frozen=True)
class SimConfig:
    params: HestonParams
    horizon: float
    n_paths: int = 1
    steps_per_day: int = 390
    seed: int = 0
    scheme: str = FULL_TRUNCATION
    stationary_v0: bool = False

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError("horizon must be > 0")
        if self.steps_per_day < 1 or self.n_paths < 1:
            raise DomainError("steps_per_day and n_paths must be >= 1")
        if self.scheme not in _SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}")

    @property
    def dt(self):
        return DAY / self.steps_per_day

    @property
    def n_steps(self):
        n = int(round(self.horizon / self.dt))
        return max(n, 1)


@dataclass
class PathRecord:
    times: np.ndarray
    r: np.ndarray
    v: np.ndarray
    qv: np.ndarray
    tv: np.ndarray
    fv: np.ndarray


@dataclass
class PathBatch:
    """Recorded paths, one row per path.

    ``terminal`` holds per-path end-of-horizon values of every accumulator
    (keys: r, v, qv, tv, fv, grid_tv, grid_fv, ito3, ito4).
    """

    times: np.ndarray
    r: np.ndarray
    v: np.ndarray
    qv: np.ndarray
    tv: np.ndarray
    fv: np.ndarray
    terminal: dict
    truncated_fraction: float

    def __len__(self):
        return self.r.shape[0]

    def __getitem__(self, i):
        return PathRecord(self.times, self.r[i], self.v[i], self.qv[i], self.tv[i], self.fv[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))


_TERMINAL_KEYS = ("r", "v", "qv", "tv", "fv", "grid_tv", "grid_fv", "ito3", "ito4")


@numba.njit(cache=True)
def _path_kernel(z, v0, kappa, theta, gamma, rho, mu, dt, scheme, record_every, rec, term):
    """Advance one path over len(z) steps.

    rec: (6, n_rec) array filled with r, v+, qv, tv, fv at every
    ``record_every`` steps (column 0 is the initial state); may be empty.
    term: length-10 output (9 terminal accumulators + truncation count).
    """
    n = z.shape[0]
    sdt = np.sqrt(dt)
    rbar = np.sqrt(max(1.0 - rho * rho, 0.0))
    r = 0.0
    v = v0
    qv = 0.0
    tv = 0.0
    fv = 0.0
    gtv = 0.0
    gfv = 0.0
    ito3 = 0.0
    ito4 = 0.0
    ntrunc = 0
    do_rec = rec.shape[1] > 0
    if do_rec:
        rec[0, 0] = 0.0
        rec[1, 0] = max(v, 0.0)
        for j in range(2, 5):
            rec[j, 0] = 0.0
    k = 1
    for i in range(n):
        vp = v if v > 0.0 else 0.0
        sv = np.sqrt(vp)
        dw1 = sdt * z[i, 0]
        dw2 = sdt * (rho * z[i, 0] + rbar * z[i, 1])
        dr = mu * dt + sv * dw1
        r2 = r * r
        qv += vp * dt
        tv += 2.0 * r * vp * dt
        fv += 4.0 * r2 * vp * dt
        rn = r + dr
        dsq = rn * rn - r2
        gtv += dr * dsq
        gfv += dsq * dsq
        ito3 += 3.0 * r2 * dr
        ito4 += 4.0 * r2 * r * dr
        if scheme == 0:
            vn = v + kappa * (theta - vp) * dt + gamma * sv * dw2
            if vn < 0.0:
                ntrunc += 1
        else:
            vn = v + kappa * (theta - v) * dt + gamma * sv * dw2
            if vn < 0.0:
                ntrunc += 1
                vn = -vn
        v = vn
        r = rn
        if do_rec and (i + 1) % record_every == 0:
            rec[0, k] = r
            rec[1, k] = v if v > 0.0 else 0.0
            rec[2, k] = qv
            rec[3, k] = tv
            rec[4, k] = fv
            k += 1
    term[0] = r
    term[1] = v if v > 0.0 else 0.0
    term[2] = qv
    term[3] = tv
    term[4] = fv
    term[5] = gtv
    term[6] = gfv
    term[7] = ito3
    term[8] = ito4
    term[9] = ntrunc


def path_rng(seed, index):
    """Generator for one path: independent substream keyed by (seed, index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _initial_variance(cfg, rng):
    p = cfg.params
    if not cfg.stationary_v0:
        return p.V0
    if p.gamma == 0:
        return p.theta
    shape = 2 * p.kappa * p.theta / p.gamma**2
    return rng.gamma(shape, p.gamma**2 / (2 * p.kappa))


def _run(cfg, record_every):
    p = cfg.params
    n = cfg.n_steps
    if record_every:
        if n % record_every:
            raise DomainError("record_every must divide the number of steps")
        n_rec = n // record_every + 1
    else:
        n_rec = 0
    rec_all = np.empty((cfg.n_paths, 6, n_rec)) if n_rec else None
    rec = np.empty((6, n_rec))
    terms = np.empty((cfg.n_paths, 10))
    scheme = _SCHEMES[cfg.scheme]
    for i in range(cfg.n_paths):
        rng = path_rng(cfg.seed, i)
        v0 = _initial_variance(cfg, rng)
        z = rng.standard_normal((n, 2))
        _path_kernel(z, v0, p.kappa, p.theta, p.gamma, p.rho, p.mu, cfg.dt, scheme,
                     max(record_every, 1), rec, terms[i])
        if n_rec:
            rec_all[i] = rec
    terminal = {key: terms[:, j].copy() for j, key in enumerate(_TERMINAL_KEYS)}
    truncated = float(terms[:, 9].sum() / (cfg.n_paths * n))
    return rec_all, terminal, truncated


def simulate_paths(cfg, record_every=1):
    """Simulate ``cfg.n_paths`` paths.

    ``record_every`` controls the stored grid (every k-th step); ``0`` keeps
    only the initial and terminal states.
    """
    n = cfg.n_steps
    rec_all, terminal, truncated = _run(cfg, record_every)
    if rec_all is None:
        times = np.array([0.0, n * cfg.dt])
        init_v = np.full(cfg.n_paths, cfg.params.V0)
        if cfg.stationary_v0:
            init_v = np.array([_initial_variance(cfg, path_rng(cfg.seed, i)) for i in range(cfg.n_paths)])
        zeros = np.zeros(cfg.n_paths)
        cols = lambda a, b: np.column_stack([a, b])
        return PathBatch(times, cols(zeros, terminal["r"]), cols(np.maximum(init_v, 0), terminal["v"]),
                         cols(zeros, terminal["qv"]), cols(zeros, terminal["tv"]),
                         cols(zeros, terminal["fv"]), terminal, truncated)
    times = np.arange(rec_all.shape[2]) * record_every * cfg.dt
    return PathBatch(times, rec_all[:, 0], rec_all[:, 1], rec_all[:, 2], rec_all[:, 3],
                     rec_all[:, 4], terminal, truncated)


@lru_cache(maxsize=8)
def _terminal_sample(cfg):
    _, terminal, truncated = _run(cfg, 0)
    return terminal, truncated


def terminal_sample(cfg):
    """Terminal accumulators for every path (cached per config)."""
    terminal, truncated = _terminal_sample(cfg)
    return dict(terminal), truncated


class Functional(str, Enum):
    R3 = "R3"
    R4 = "R4"
    QV = "QV"
    QV2 = "QV2"
    TV15 = "TV15"
    FV15 = "FV15"
    RV_at_t = "RV_at_t"
    R2V_at_t = "R2V_at_t"
    V = "V"
    V2 = "V2"
    VQV = "VQV"
    TV = "TV"
    FV = "FV"
    GRID_TV15 = "GRID_TV15"
    GRID_FV15 = "GRID_FV15"
    BIAS3 = "BIAS3"
    BIAS4 = "BIAS4"


def functional_values(terminal, functional):
    """Per-path values of a terminal functional."""
    T = terminal
    f = Functional(functional)
    table = {
        Functional.R3: lambda: T["r"] ** 3,
        Functional.R4: lambda: T["r"] ** 4,
        Functional.QV: lambda: T["qv"],
        Functional.QV2: lambda: T["qv"] ** 2,
        Functional.TV15: lambda: 1.5 * T["tv"],
        Functional.FV15: lambda: 1.5 * T["fv"],
        Functional.RV_at_t: lambda: T["r"] * T["v"],
        Functional.R2V_at_t: lambda: T["r"] ** 2 * T["v"],
        Functional.V: lambda: T["v"],
        Functional.V2: lambda: T["v"] ** 2,
        Functional.VQV: lambda: T["v"] * T["qv"],
        Functional.TV: lambda: T["tv"],
        Functional.FV: lambda: T["fv"],
        Functional.GRID_TV15: lambda: 1.5 * T["grid_tv"],
        Functional.GRID_FV15: lambda: 1.5 * T["grid_fv"],
        Functional.BIAS3: lambda: T["r"] ** 3 - 1.5 * T["tv"],
        Functional.BIAS4: lambda: T["r"] ** 4 - 1.5 * T["fv"],
    }
    return table[f]()


def mean_se(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    se = x.std(ddof=1) / np.sqrt(n) if n > 1 else float("nan")
    return float(x.mean()), float(se)


def mc_moment(cfg, functional):
    """Sample mean and standard error of a terminal functional."""
    terminal, _ = _terminal_sample(cfg)
    return mean_se(functional_values(terminal, functional))


def jackknife_variance(x):
    """Sample variance of ``x`` and its delete-one jackknife standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise DomainError("need at least 3 observations")
    xc = x - x.mean()
    s1, s2 = xc.sum(), (xc**2).sum()
    loo = ((s2 - xc**2) - (s1 - xc) ** 2 / (n - 1)) / (n - 2)
    se = np.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())
    return float(s2 / (n - 1)), float(se)


def mc_variance_third_variation(cfg):
    """Var([R^2, R]_T) across paths with jackknife SE."""
    if cfg.params.mu != 0:
        raise PreconditionError("variance oracle is defined for mu = 0")
    terminal, _ = _terminal_sample(cfg)
    return jackknife_variance(terminal["tv"])


def nested_identity_residuals(cfg, levels=3):
    """Ito-identity residuals on nested grids driven by one Brownian path.

    Normals are drawn on the finest grid (``cfg.steps_per_day * 2**(levels-1)``
    steps per day) and summed pairwise to obtain the coarser grids, so each
    level discretizes the same path. Returns a list (coarse to fine) of dicts
    with the steps per day and per-path residuals

    * ``third_grid``  = R^3 - 3 sum R^2 dR - 1.5 sum dR d(R^2)
    * ``fourth_grid`` = R^4 - 4 sum R^3 dR - 1.5 sum (d(R^2))^2
    * ``third_path``  = R^3 - 3 sum R^2 dR - 1.5 tv   (tv = 2 int R V ds)
    * ``fourth_path`` = R^4 - 4 sum R^3 dR - 1.5 fv   (fv = 4 int R^2 V ds)
    """
    if levels < 2:
        raise DomainError("need at least two levels")
    p = cfg.params
    days = cfg.n_steps / cfg.steps_per_day
    fine_spd = cfg.steps_per_day * 2 ** (levels - 1)
    n_fine = int(round(days * fine_spd))
    if n_fine % 2 ** (levels - 1):
        raise DomainError("horizon does not fit the coarsest grid")
    scheme = _SCHEMES[cfg.scheme]
    rec = np.empty((6, 0))
    term = np.empty(10)
    out = [{"steps_per_day": cfg.steps_per_day * 2**j,
            **{k: np.empty(cfg.n_paths) for k in ("third_grid", "fourth_grid", "third_path", "fourth_path")}}
           for j in range(levels)]
    for i in range(cfg.n_paths):
        rng = path_rng(cfg.seed, i)
        v0 = _initial_variance(cfg, rng)
        z = rng.standard_normal((n_fine, 2))
        for j in range(levels - 1, -1, -1):
            dt = DAY / out[j]["steps_per_day"]
            _path_kernel(z, v0, p.kappa, p.theta, p.gamma, p.rho, p.mu, dt, scheme, 1, rec, term)
            r, tv, fv, gtv, gfv, ito3, ito4 = term[0], term[3], term[4], term[5], term[6], term[7], term[8]
            out[j]["third_grid"][i] = r**3 - ito3 - 1.5 * gtv
            out[j]["fourth_grid"][i] = r**4 - ito4 - 1.5 * gfv
            out[j]["third_path"][i] = r**3 - ito3 - 1.5 * tv
            out[j]["fourth_path"][i] = r**4 - ito4 - 1.5 * fv
            if j:
                z = (z[0::2] + z[1::2]) / np.sqrt(2.0)
    return out


def halving_factors(levels_out, key):
    """Ratios of root-mean-square residuals between consecutive grids (coarse/fine)."""
    rms = [float(np.sqrt(np.mean(lv[key] ** 2))) for lv in levels_out]
    return [rms[j] / rms[j + 1] for j in range(len(rms) - 1)]


def synth_panel(cfg, days, intraday_bars, path_index=0, with_path=False):
    """Simulate one continuous path of ``days`` days and build its daily panel.

    The variance path runs continuously across days; returns reset at each
    day start through the per-day differencing in :mod:`momentvar.realized`.
    The panel's ``extras`` carry the true end-of-day variance and the exact
    daily integrated variance.
    """
    from .realized import IntradayGrid, build_panel

    if days < 1 or intraday_bars < 1:
        raise DomainError("days and intraday_bars must be >= 1")
    if cfg.steps_per_day % intraday_bars:
        raise DomainError("intraday_bars must divide steps_per_day")
    if abs(cfg.horizon - days * DAY) > 1e-12 * max(1.0, cfg.horizon):
        raise DomainError("cfg.horizon must equal days * DAY")
    p = cfg.params
    per_bar = cfg.steps_per_day // intraday_bars
    rng = path_rng(cfg.seed, path_index)
    v0 = _initial_variance(cfg, rng)
    n = cfg.n_steps
    z = rng.standard_normal((n, 2))
    rec = np.empty((6, n // per_bar + 1))
    term = np.empty(10)
    _path_kernel(z, v0, p.kappa, p.theta, p.gamma, p.rho, p.mu, cfg.dt, _SCHEMES[cfg.scheme],
                 per_bar, rec, term)
    logp = rec[0]
    grids = [IntradayGrid(d, logp[d * intraday_bars:(d + 1) * intraday_bars + 1]) for d in range(days)]
    panel = build_panel(grids)
    ends = np.arange(1, days + 1) * intraday_bars
    qv = rec[2][ends] - rec[2][ends - intraday_bars]
    panel.extras["true_v"] = rec[1][ends]
    panel.extras["true_qv"] = qv
    panel.extras["truncated_fraction"] = term[9] / n
    if with_path:
        return panel, rec
    return panel


def synth_panels(params, days, intraday_bars, seeds, steps_per_day=390, **kw):
    """One panel per seed (``path_index=0`` of each seed's stream)."""
    out = []
    for s in seeds:
        cfg = SimConfig(params, days * DAY, 1, steps_per_day, s, **kw)
        out.append(synth_panel(cfg, days, intraday_bars))
    return out

"""Command-line front end.

Every flag can also come from a JSON file given with ``--config``; keys are
the flag names with dashes replaced by underscores. Flags on the command line
win over the file, and the file wins over built-in defaults.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import dataio
from .estimation import simple_estimate
from .exceptions import DomainError, EstimationError, InputError, NumericalError, PreconditionError
from .gmm import gmm_estimate
from .inference import T_LESS, TestResult, t_test_mean_less, wilcoxon_signed_rank
from .model_core import HestonParams, expected_third_variation_scaled
from .realized import build_panel, summary_stats
from .simulator import DAY, SimConfig, synth_panel, terminal_sample

log = logging.getLogger("momentvar")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

PRESETS = {
    "model1": HestonParams(kappa=5.0, theta=0.05, gamma=0.8, rho=-0.5),
    "model2": HestonParams(kappa=15.0, theta=0.02, gamma=0.7, rho=0.3),
    "fig1": HestonParams(kappa=3.0, theta=0.04, gamma=2.0, rho=-0.5, v0=0.05),
}

DEFAULTS = {
    "open": "09:30", "close": "16:00", "bar_minutes": 5, "max_missing": 0.10,
    "model": "model1", "kappa": None, "theta": None, "gamma": None, "rho": None, "mu": None, "v0": None,
    "days": 2000, "bars": 78, "steps_per_day": 390, "seed": 0, "n_panels": 1, "stationary_v0": False,
    "method": "simple", "delta_days": 1.0, "instruments": "base",
    "horizon": 1.0, "paths": 10000, "checkpoints": 20,
    "out": None, "json": None, "out_dir": None, "ticks": None, "panel": None,
}


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _params(cfg):
    base = PRESETS.get(cfg["model"])
    if base is None:
        raise InputError(f"unknown model preset {cfg['model']!r} (choose from {', '.join(PRESETS)})")
    over = {k: cfg[k] for k in ("kappa", "theta", "gamma", "rho", "mu", "v0") if cfg[k] is not None}
    return base.replace(**over) if over else base


def _session(cfg):
    return dataio.Session(cfg["open"], cfg["close"], int(cfg["bar_minutes"]))


def _require(cfg, *names):
    for n in names:
        if cfg.get(n) in (None, ""):
            raise InputError(f"--{n.replace('_', '-')} is required")


def cmd_panel(cfg):
    _require(cfg, "ticks")
    grids = dataio.ingest_and_resample(cfg["ticks"], _session(cfg), float(cfg["max_missing"]))
    panel = build_panel(grids)
    _emit(dataio.panel_csv_text(panel), cfg["out"])
    return EXIT_OK


def cmd_simulate(cfg):
    _require(cfg, "out_dir")
    p = _params(cfg)
    days, bars, spd = int(cfg["days"]), int(cfg["bars"]), int(cfg["steps_per_day"])
    os.makedirs(cfg["out_dir"], exist_ok=True)
    runs = []
    for k in range(int(cfg["n_panels"])):
        seed = int(cfg["seed"]) + k
        sc = SimConfig(p, days * DAY, 1, spd, seed, stationary_v0=bool(cfg["stationary_v0"]))
        panel = synth_panel(sc, days, bars)
        name = f"panel_seed{seed}.csv"
        dataio.write_panel_csv(panel, os.path.join(cfg["out_dir"], name))
        stats = summary_stats(panel) if len(panel) > 1 else {}
        runs.append({
            "seed": seed,
            "file": name,
            "truncated_fraction": panel.extras["truncated_fraction"],
            "summary": {c: {"mean": m, "std": s} for c, (m, s) in stats.items()},
            "true_v_terminal": float(panel.extras["true_v"][-1]),
        })
    summary = {"params": p.to_dict(), "days": days, "bars": bars, "steps_per_day": spd,
               "stationary_v0": bool(cfg["stationary_v0"]), "runs": runs}
    with open(os.path.join(cfg["out_dir"], "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(_dump(summary))
    return EXIT_OK


def estimate_panel(panel, method, delta, instruments="base"):
    if method == "simple":
        return simple_estimate(panel, delta)
    if method == "gmm":
        from .gmm import GmmOptions

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return gmm_estimate(panel, delta, opts=GmmOptions(instruments=instruments))
    raise InputError(f"unknown method {method!r}")


def cmd_estimate(cfg):
    _require(cfg, "panel")
    panel = dataio.read_panel_csv(cfg["panel"])
    delta = float(cfg["delta_days"]) * DAY
    rep = estimate_panel(panel, cfg["method"], delta, cfg["instruments"])
    _emit(rep.to_text(), cfg["out"])
    if cfg["json"]:
        _emit(rep.to_json(), cfg["json"])
    return EXIT_OK


def _t_or_degenerate(x):
    try:
        return t_test_mean_less(x).to_dict()
    except InputError as exc:
        x = np.asarray(x, dtype=float)
        if x.size >= 2 and np.all(x == x[0]) and x[0] == 0:
            # constant at the null: no evidence either way
            return TestResult(0.0, 0.5, int(x.size), T_LESS, {"degenerate": True}).to_dict()
        return {"error": str(exc)}


def _wilcoxon_or_error(x):
    try:
        return wilcoxon_signed_rank(x, "two-sided").to_dict()
    except InputError as exc:
        return {"error": str(exc)}


def cmd_test(cfg):
    _require(cfg, "panel")
    panel = dataio.read_panel_csv(cfg["panel"])
    out = {}
    for col in ("tv15", "r3"):
        x = panel.column(col)
        out[col] = {"t_test": _t_or_degenerate(x), "wilcoxon": _wilcoxon_or_error(x)}
    _emit(_dump(out), cfg["out"])
    return EXIT_OK


def checkpoints(n, k):
    """Roughly log-spaced sample sizes ending at ``n``."""
    pts = np.unique(np.rint(np.logspace(1, np.log10(n), k)).astype(int))
    return [int(c) for c in pts if 2 <= c <= n]


def convergence_table(p, horizon, paths, steps_per_day, seed, k):
    """Running means and standard errors of 1.5 [R, R^2]_t and R_t^3 over paths."""
    cfg = SimConfig(p, horizon, paths, steps_per_day, seed)
    term, _ = terminal_sample(cfg)
    tv15 = 1.5 * term["tv"]
    r3 = term["r"] ** 3
    theo = expected_third_variation_scaled(p, horizon)
    rows = []
    for n in checkpoints(paths, k):
        a, b = tv15[:n], r3[:n]
        rows.append((n, a.mean(), b.mean(), theo, a.std(ddof=1) / np.sqrt(n), b.std(ddof=1) / np.sqrt(n)))
    return rows


CONVERGE_HEADER = ("sample_size", "mean_tv15", "mean_r3", "theoretical_third_moment", "se_tv15", "se_r3")


def cmd_converge(cfg):
    p = _params(cfg)
    rows = convergence_table(p, float(cfg["horizon"]), int(cfg["paths"]), int(cfg["steps_per_day"]),
                             int(cfg["seed"]), int(cfg["checkpoints"]))
    lines = [",".join(CONVERGE_HEADER)]
    for r in rows:
        lines.append(",".join([str(r[0])] + [dataio.format_number(v) for v in r[1:]]))
    _emit("\n".join(lines) + "\n", cfg["out"])
    return EXIT_OK


COMMANDS = {"panel": cmd_panel, "simulate": cmd_simulate, "estimate": cmd_estimate,
            "test": cmd_test, "converge": cmd_converge}


def build_parser():
    ap = argparse.ArgumentParser(prog="momentvar", description=__doc__.splitlines()[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog="Exit codes: 0 success, 2 input error, 3 numerical failure.")
    ap.add_argument("--config", help="JSON file of default flag values (flags win)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def model_flags(sp):
        sp.add_argument("--model", default=S, choices=sorted(PRESETS), help="parameter preset (default model1)")
        for name in ("kappa", "theta", "gamma", "rho", "mu", "v0"):
            sp.add_argument(f"--{name}", type=float, default=S, help=f"override preset {name}")
        sp.add_argument("--seed", type=int, default=S, help="base seed (default 0)")
        sp.add_argument("--steps-per-day", type=int, default=S, help="Euler steps per day (default 390)")

    sp = sub.add_parser("panel", help="tick CSV -> daily panel CSV")
    sp.add_argument("--ticks", default=S, help="input CSV with header timestamp,price")
    sp.add_argument("--open", default=S, help="session open HH:MM (default 09:30)")
    sp.add_argument("--close", default=S, help="session close HH:MM (default 16:00)")
    sp.add_argument("--bar-minutes", type=int, default=S, help="bar width in minutes (default 5)")
    sp.add_argument("--max-missing", type=float, default=S,
                    help="drop days with a larger fraction of empty bars (default 0.10)")
    sp.add_argument("--out", default=S, help="panel CSV path (default stdout)")

    sp = sub.add_parser("simulate", help="synthetic panels plus a summary JSON")
    model_flags(sp)
    sp.add_argument("--days", type=int, default=S, help="days per panel (default 2000)")
    sp.add_argument("--bars", type=int, default=S, help="intraday bars per day (default 78)")
    sp.add_argument("--n-panels", type=int, default=S, help="panels, seeds seed..seed+n-1 (default 1)")
    sp.add_argument("--stationary-v0", action="store_true", default=S,
                    help="draw V0 from the stationary Gamma law")
    sp.add_argument("--out-dir", default=S, help="output directory")

    sp = sub.add_parser("estimate", help="estimate (kappa, theta, gamma, rho) from a panel CSV")
    sp.add_argument("--panel", default=S, help="panel CSV")
    sp.add_argument("--method", choices=("simple", "gmm"), default=S, help="default simple")
    sp.add_argument("--delta-days", type=float, default=S, help="observation interval in days (default 1)")
    sp.add_argument("--instruments", choices=("base", "extended"), default=S, help="GMM instrument set")
    sp.add_argument("--out", default=S, help="text report path (default stdout)")
    sp.add_argument("--json", default=S, help="JSON report path")

    sp = sub.add_parser("test", help="t and Wilcoxon tests on the tv15 and r3 columns")
    sp.add_argument("--panel", default=S, help="panel CSV")
    sp.add_argument("--out", default=S, help="JSON path (default stdout)")

    sp = sub.add_parser("converge", help="running means of 1.5[R,R^2] and R^3 over paths (CSV)")
    model_flags(sp)
    sp.add_argument("--horizon", type=float, default=S, help="horizon in years (default 1)")
    sp.add_argument("--paths", type=int, default=S, help="number of paths (default 10000)")
    sp.add_argument("--checkpoints", type=int, default=S, help="number of sample sizes (default 20)")
    sp.add_argument("--out", default=S, help="CSV path (default stdout)")
    return ap


def resolve_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(file_cfg)
    for k, v in vars(args).items():
        if k not in ("config", "verbose", "command"):
            cfg[k] = v
    return cfg


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (InputError, DomainError, PreconditionError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, EstimationError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Simple and GMM estimates on simulated Model I / Model II panels.

Prints the seed-averaged estimates with their across-seed standard deviation.
"""

import argparse
import warnings

import numpy as np

from momentvar.cli import PRESETS
from momentvar.estimation import simple_estimate
from momentvar.gmm import gmm_estimate
from momentvar.simulator import DAY, synth_panels

NAMES = ("kappa", "theta", "gamma", "rho")


def run(model, seeds, days, bars, use_gmm):
    p = PRESETS[model]
    panels = synth_panels(p, days, bars, seeds=seeds, steps_per_day=bars, stationary_v0=True)
    out = {"simple": []}
    if use_gmm:
        out["gmm"] = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for panel in panels:
            rep = simple_estimate(panel, DAY)
            out["simple"].append([getattr(rep.estimates, k) for k in NAMES])
            if use_gmm:
                g = gmm_estimate(panel, DAY, start=rep.estimates)
                out["gmm"].append([getattr(g.estimates, k) for k in NAMES])
    print(f"{model}: true " + "  ".join(f"{k}={getattr(p, k):g}" for k in NAMES))
    for method, vals in out.items():
        v = np.array(vals)
        cells = "  ".join(f"{k}={m:.4g} ({s:.3g})" for k, m, s in zip(NAMES, v.mean(0), v.std(0, ddof=1)))
        print(f"  {method:6s} {cells}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--days", type=int, default=2000)
    ap.add_argument("--bars", type=int, default=78)
    ap.add_argument("--n-seeds", type=int, default=20)
    ap.add_argument("--no-gmm", action="store_true")
    a = ap.parse_args()
    for model, base in (("model1", 1000), ("model2", 2000)):
        run(model, range(base, base + a.n_seeds), a.days, a.bars, not a.no_gmm)


if __name__ == "__main__":
    main()

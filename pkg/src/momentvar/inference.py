"""One-sample location tests: one-sided t-test and Wilcoxon signed-rank."""

from dataclasses import dataclass, field, asdict
import json

import numpy as np
from scipy import stats

from .exceptions import InputError

EXACT_MAX_N = 25
T_LESS = "t_one_sided_less"
W_TWO = "wilcoxon_two_sided"
W_ONE = "wilcoxon_one_sided"


@dataclass
class TestResult:
    statistic: float
    p_value: float
    n: int
    method: str
    notes: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def t_test_mean_less(sample, null_mean=0.0):
    """H0: mean = null_mean against H1: mean < null_mean."""
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n < 2:
        raise InputError("t-test needs at least 2 observations")
    s = x.std(ddof=1)
    if not s > 0:
        raise InputError("degenerate sample: zero variance")
    t = (x.mean() - null_mean) / (s / np.sqrt(n))
    p = float(stats.t.cdf(t, df=n - 1))
    return TestResult(float(t), p, n, T_LESS, {"df": n - 1, "mean": float(x.mean()), "sd": float(s)})


def _rank2(a):
    # twice the average ranks, as integers
    return np.rint(2 * stats.rankdata(a)).astype(np.int64)


def signed_rank_distribution(ranks2):
    """Exact null distribution of 2*W+ for given doubled ranks.

    Counts all 2^n sign assignments by dynamic programming over the ranks;
    returns an array ``counts`` with ``counts[s]`` = number of assignments
    with doubled positive-rank sum ``s``.
    """
    total = int(np.sum(ranks2))
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in ranks2:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r] if r else counts
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(sample, alternative="two-sided", min_n=5, exact=None):
    """Wilcoxon signed-rank test of zero median.

    Zeros are dropped and tied |x| get average ranks. ``exact=None`` uses the
    exact null distribution for n <= 25 and the tie-corrected normal
    approximation with continuity correction above that.
    ``alternative`` is "two-sided", "greater" or "less".
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    x = np.asarray(sample, dtype=float)
    n_zero = int(np.sum(x == 0))
    x = x[x != 0]
    n = x.size
    if n == 0:
        raise InputError("all observations are zero")
    if n < min_n:
        raise InputError(f"need at least {min_n} non-zero observations, got {n}")
    r2 = _rank2(np.abs(x))
    w2 = int(r2[x > 0].sum())
    w = w2 / 2.0
    has_ties = len(np.unique(np.abs(x))) < n
    if exact is None:
        exact = n <= EXACT_MAX_N
    if exact:
        counts = signed_rank_distribution(r2)
        total = counts.sum()
        p_ge = counts[w2:].sum() / total
        p_le = counts[: w2 + 1].sum() / total
    else:
        mean = n * (n + 1) / 4.0
        _, tcount = np.unique(np.abs(x), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tcount**3 - tcount) / 48.0
        sd = np.sqrt(var)
        p_ge = stats.norm.sf((w - mean - 0.5) / sd)
        p_le = stats.norm.cdf((w - mean + 0.5) / sd)
    if alternative == "greater":
        p = p_ge
    elif alternative == "less":
        p = p_le
    else:
        p = min(1.0, 2.0 * min(p_ge, p_le))
    method = W_TWO if alternative == "two-sided" else W_ONE
    notes = {"alternative": alternative, "zeros_dropped": n_zero, "ties": bool(has_ties),
             "exact": bool(exact)}
    return TestResult(float(w), float(min(max(p, 0.0), 1.0)), n, method, notes)

"""Monte-Carlo filtering of bootstrap replications by fit quality.

Trials are ranked by their full-surface AARE (ties broken by trial index).
The best ``round(3M/8)`` form the behavioural set, the worst ``round(3M/8)``
the non-behavioural set and the middle quarter is discarded. A two-sample
Kolmogorov-Smirnov test then asks whether a parameter is distributed the
same way in both sets; rejecting at 5% marks the parameter as important for
the fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ALPHA = 0.05
MIN_TRIALS = 8
# below this the Kolmogorov tail 1 - Q(z) is under 1e-12 and the alternating
# series converges too slowly to be trusted
_SMALL_Z = 0.2

PRESETS = {"jumps": "lambda", "hurst": "hurst"}


@dataclass(frozen=True)
class FilterSplit:
    param: str
    behavioural: np.ndarray
    non_behavioural: np.ndarray
    grey: np.ndarray
    behavioural_trials: np.ndarray
    non_behavioural_trials: np.ndarray
    grey_trials: np.ndarray


def group_size(m: int) -> int:
    # round half up: the fractions are exact for M divisible by 8
    return int(math.floor(3 * m / 8 + 0.5))


def split_values(values, aare, trial_ids=None, param: str = "") -> FilterSplit:
    values = np.asarray(values, dtype=float)
    aare = np.asarray(aare, dtype=float)
    m = len(values)
    if aare.shape != (m,):
        raise ValueError("values and AARE lengths differ")
    if m < MIN_TRIALS:
        raise ValueError(f"Monte-Carlo filtering needs at least {MIN_TRIALS} trials, got {m}")
    trial_ids = np.arange(m) if trial_ids is None else np.asarray(trial_ids)
    order = np.lexsort((trial_ids, aare))
    g = group_size(m)
    best, worst, grey = order[:g], order[m - g:], order[g:m - g]
    return FilterSplit(
        param=param,
        behavioural=values[best],
        non_behavioural=values[worst],
        grey=values[grey],
        behavioural_trials=trial_ids[best],
        non_behavioural_trials=trial_ids[worst],
        grey_trials=trial_ids[grey],
    )


def split_by_aare(run, param: str) -> FilterSplit:
    """Behavioural / grey / non-behavioural split of parameter ``param``."""
    names = run.param_names
    if param not in names:
        raise KeyError(f"unknown parameter {param!r}; run has {list(names)}")
    values = run.thetas[:, names.index(param)]
    return split_values(values, run.full_aare, run.trial_ids, param)


def kolmogorov_sf(z: float) -> float:
    """``P(K > z)`` for the Kolmogorov distribution, via the alternating series."""
    if z <= _SMALL_Z:
        return 1.0
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * z * z)
        total += term if k % 2 else -term
        if term < 1e-12:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(a, b) -> float:
    """``sup_x |F_a(x) - F_b(x)|`` evaluated at every sample point."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("KS test needs two non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sided two-sample KS statistic and asymptotic p-value."""
    d = ks_statistic(a, b)
    na, nb = len(a), len(b)
    ne = na * nb / (na + nb)
    return d, kolmogorov_sf(math.sqrt(ne) * d)


def ecdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints and right-continuous step heights of the empirical CDF."""
    x = np.sort(np.asarray(values, dtype=float))
    uniq, idx = np.unique(x, return_index=True)
    counts = np.diff(np.append(idx, len(x)))
    return uniq, np.cumsum(counts) / len(x)


@dataclass(frozen=True)
class FilterReport:
    param: str
    ks_statistic: float
    p_value: float
    reject_at_5pct: bool
    split: FilterSplit
    alpha: float = ALPHA

    def ecdfs(self) -> dict:
        return {
            "behavioural": ecdf(self.split.behavioural),
            "non_behavioural": ecdf(self.split.non_behavioural),
        }

    def to_dict(self) -> dict:
        curves = self.ecdfs()
        return {
            "param": self.param,
            "ks_statistic": self.ks_statistic,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject_at_5pct": self.reject_at_5pct,
            "sizes": {
                "behavioural": len(self.split.behavioural),
                "non_behavioural": len(self.split.non_behavioural),
                "grey": len(self.split.grey),
            },
            "trials": {
                "behavioural": self.split.behavioural_trials.tolist(),
                "non_behavioural": self.split.non_behavioural_trials.tolist(),
                "grey": self.split.grey_trials.tolist(),
            },
            "ecdf": {k: {"x": x.tolist(), "F": f.tolist()} for k, (x, f) in curves.items()},
        }


def report_from_split(split: FilterSplit) -> FilterReport:
    d, p = ks_two_sample(split.behavioural, split.non_behavioural)
    return FilterReport(split.param, d, p, p < ALPHA, split)


def filter_test(run, param: str) -> FilterReport:
    """Split by AARE and KS-test ``param`` between the behavioural and non-behavioural sets."""
    return report_from_split(split_by_aare(run, PRESETS.get(param, param)))

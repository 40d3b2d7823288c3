"""Robustness measures and plot data from a bootstrap run.

Per option ``j`` with market mid ``C*_j`` and bootstrap model prices
``C_ij`` (every trial prices the full original surface):

* ``BRE_j = |mean_i C_ij - C*_j| / C*_j``
* ``V_j = Var_i(|C_ij - C*_j| / C*_j)`` with the unbiased (M - 1) variance
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .bootstrap import BootstrapRun
from .calibration import CalibrationResult, UndefinedMeasureError
from .market_data import OptionSurface, mid_prices
from .models import to_vector


@dataclass(frozen=True)
class PriceDispersion:
    mid: np.ndarray
    mean_price: np.ndarray  # C-bar
    bre: np.ndarray
    variance: np.ndarray

    def __len__(self):
        return len(self.bre)


def price_dispersion(run: BootstrapRun, surface: OptionSurface | None = None) -> PriceDispersion:
    surface = surface or run.surface
    prices = run.full_prices
    n = len(surface)
    if prices.ndim != 2 or prices.shape[1] != n:
        raise ValueError(f"bootstrap prices have shape {prices.shape}, expected (M, {n}) for the full surface")
    if prices.shape[0] < 2:
        raise ValueError("need at least two successful trials")
    mid = mid_prices(surface)
    if np.any(mid == 0):
        raise UndefinedMeasureError(f"market price of option {int(np.flatnonzero(mid == 0)[0])} is zero")
    cbar = prices.mean(axis=0)
    bre = np.abs(cbar - mid) / mid
    rel = np.abs(prices - mid) / mid
    var = rel.var(axis=0, ddof=1)
    return PriceDispersion(mid=mid, mean_price=cbar, bre=bre, variance=var)


def fd_bin_edges(values, max_bins: int | None = None) -> np.ndarray:
    """Freedman-Diaconis bin edges.

    A constant sample gets one unit-wide bin around its value; a zero IQR
    with non-zero range falls back to Sturges. Bin count is capped at
    ``max_bins`` (default: sample size).
    """
    x = np.asarray(values, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return np.array([lo - 0.5, lo + 0.5])
    q75, q25 = np.percentile(x, [75, 25])
    width = 2.0 * (q75 - q25) * len(x) ** (-1.0 / 3.0)
    if width > 0:
        n_bins = math.ceil((hi - lo) / width)
    else:
        n_bins = math.ceil(math.log2(len(x))) + 1
    cap = max_bins or len(x)
    n_bins = int(min(max(n_bins, 1), cap))
    return np.linspace(lo, hi, n_bins + 1)


@dataclass(frozen=True)
class ScatterData:
    names: tuple[str, ...]
    values: np.ndarray  # (M, d) replications
    histograms: dict  # name -> (edges, counts)
    reference: np.ndarray | None  # full-surface calibration
    theta_bar: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.names), len(self.names))

    def pairs(self):
        """Unordered parameter pairs ``(a, b)`` with a before b."""
        return list(itertools.combinations(self.names, 2))

    def cloud(self, a: str, b: str) -> tuple[np.ndarray, np.ndarray]:
        ia, ib = self.names.index(a), self.names.index(b)
        return self.values[:, ia], self.values[:, ib]

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "trials": int(self.values.shape[0]),
            "points": {name: self.values[:, i].tolist() for i, name in enumerate(self.names)},
            "pairs": [[a, b] for a, b in self.pairs()],
            "histograms": {
                name: {"edges": edges.tolist(), "counts": counts.tolist()}
                for name, (edges, counts) in self.histograms.items()
            },
            "reference": None if self.reference is None else dict(zip(self.names, self.reference.tolist())),
            "theta_bar": dict(zip(self.names, self.theta_bar.tolist())),
        }


def scatter_data(run: BootstrapRun, reference: CalibrationResult | None = None) -> ScatterData:
    values = run.thetas
    if len(values) < 2:
        raise ValueError("need at least two successful trials")
    names = run.param_names
    hists = {}
    for i, name in enumerate(names):
        edges = fd_bin_edges(values[:, i])
        counts, _ = np.histogram(values[:, i], bins=edges)
        hists[name] = (edges, counts)
    reference = reference if reference is not None else run.reference
    ref = to_vector(reference.theta_hat) if reference is not None else None
    return ScatterData(names, values, hists, ref, values.mean(axis=0))


def pairwise_correlations(run: BootstrapRun) -> tuple[tuple[str, ...], np.ndarray]:
    """Pearson correlation matrix of the replications; NaN where a column is constant."""
    values = run.thetas
    if len(values) < 2:
        raise ValueError("need at least two successful trials")
    return run.param_names, correlation_matrix(values)


def correlation_matrix(values: np.ndarray) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    centred = x - x.mean(axis=0)
    norms = np.sqrt((centred * centred).sum(axis=0))
    ok = norms > 0
    d = x.shape[1]
    out = np.full((d, d), np.nan)
    for a in range(d):
        if not ok[a]:
            continue
        for b in range(a, d):
            if not ok[b]:
                continue
            if a == b:
                out[a, a] = 1.0
                continue
            r = float(np.dot(centred[:, a], centred[:, b]) / (norms[a] * norms[b]))
            out[a, b] = out[b, a] = min(1.0, max(-1.0, r))
    return out


def qn_plot_data(values) -> np.ndarray:
    """``(M, 2)`` array of (standard normal quantile at (k - 0.5)/M, k-th order statistic)."""
    x = np.sort(np.asarray(values, dtype=float))
    m = len(x)
    if m < 3:
        raise ValueError("need at least 3 values")
    probs = (np.arange(1, m + 1) - 0.5) / m
    return np.column_stack([ndtri(probs), x])


@dataclass(frozen=True)
class BubbleData:
    spot: float
    bre: list  # (K, T, value)
    variance: list


def kxt_bubble_data(dispersion: PriceDispersion, surface: OptionSurface) -> BubbleData:
    if len(dispersion) != len(surface):
        raise ValueError("dispersion and surface lengths differ")
    K, T = surface.strikes, surface.maturities
    return BubbleData(
        spot=surface.spot,
        bre=[(float(k), float(t), float(v)) for k, t, v in zip(K, T, dispersion.bre)],
        variance=[(float(k), float(t), float(v)) for k, t, v in zip(K, T, dispersion.variance)],
    )

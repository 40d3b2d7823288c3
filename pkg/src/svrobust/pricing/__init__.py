"""European call pricing under Heston, Bates and FSV dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ..market_data import OptionSurface
from ..models import BatesParams, FSVParams, HestonParams, ModelParams
from .fourier import PricingError, call_prices
from .montecarlo import (
    InstabilityWarning,
    McConfig,
    McPrice,
    PathSample,
    fsv_call_prices,
    simulate_fsv_paths,
)

__all__ = [
    "InstabilityWarning",
    "McConfig",
    "McPrice",
    "PathSample",
    "PricingError",
    "PricingRequest",
    "black_scholes_call",
    "price_bates",
    "price_fsv",
    "price_heston",
    "price_surface",
    "simulate_fsv_paths",
]


@dataclass(frozen=True)
class PricingRequest:
    spot: float
    strike: float
    maturity: float
    rate: float
    params: ModelParams

    def __post_init__(self):
        if not self.spot > 0:
            raise ValueError(f"spot must be positive, got {self.spot!r}")
        if not self.maturity > 0:
            raise ValueError(f"maturity must be positive, got {self.maturity!r}")
        if not self.strike >= 0:
            raise ValueError(f"strike must be non-negative, got {self.strike!r}")


def black_scholes_call(spot: float, strike: float, maturity: float, rate: float, vol: float) -> float:
    if strike == 0:
        return float(spot)
    sd = vol * math.sqrt(maturity)
    if sd == 0:
        return max(spot - strike * math.exp(-rate * maturity), 0.0)
    d1 = (math.log(spot / strike) + rate * maturity) / sd + 0.5 * sd
    return float(spot * norm.cdf(d1) - strike * math.exp(-rate * maturity) * norm.cdf(d1 - sd))


def price_heston(req: PricingRequest) -> float:
    if not isinstance(req.params, HestonParams):
        raise TypeError(f"price_heston needs HestonParams, got {type(req.params).__name__}")
    return float(call_prices(req.spot, [req.strike], req.maturity, req.rate, req.params)[0])


def price_bates(req: PricingRequest) -> float:
    if not isinstance(req.params, BatesParams):
        raise TypeError(f"price_bates needs BatesParams, got {type(req.params).__name__}")
    return float(call_prices(req.spot, [req.strike], req.maturity, req.rate, req.params)[0])


def price_fsv(req: PricingRequest, mc: McConfig) -> McPrice:
    """Monte-Carlo FSV price with its standard error.

    A result whose variance paths hit the zero floor on more than half of the
    paths carries a ``warning`` (and an :class:`InstabilityWarning` is emitted).
    """
    if not isinstance(req.params, FSVParams):
        raise TypeError(f"price_fsv needs FSVParams, got {type(req.params).__name__}")
    prices, errors, frac = fsv_call_prices(req.spot, [req.strike], req.maturity, req.rate, req.params, mc)
    warning = None
    if frac > 0.5:
        warning = f"{frac:.1%} of variance paths hit the zero floor"
    return McPrice(float(prices[0]), float(errors[0]), frac, warning)


def _maturity_groups(maturities: np.ndarray):
    for T in np.unique(maturities):
        yield float(T), np.flatnonzero(maturities == T)


def price_surface(surface: OptionSurface, params: ModelParams, mc: McConfig | None = None,
                  with_stderr: bool = False):
    """Model price for every quote of ``surface``, in quote order.

    Heston and Bates share the characteristic function across strikes of one
    maturity. FSV simulates one path set per distinct maturity (always from
    ``mc.seed``) and reuses it across strikes, so each element equals
    :func:`price_fsv` for that quote.
    """
    strikes = surface.strikes
    mats = surface.maturities
    out = np.empty(len(surface))
    err = np.zeros(len(surface))
    if isinstance(params, FSVParams):
        if mc is None:
            raise ValueError("FSV pricing needs an McConfig")
        for T, idx in _maturity_groups(mats):
            p, e, _ = fsv_call_prices(surface.spot, strikes[idx], T, surface.rate, params, mc)
            out[idx] = p
            err[idx] = e
    elif isinstance(params, (HestonParams, BatesParams)):
        for T, idx in _maturity_groups(mats):
            out[idx] = call_prices(surface.spot, strikes[idx], T, surface.rate, params)
    else:
        raise TypeError(f"unsupported parameter type {type(params).__name__}")
    if with_stderr:
        return out, err
    return out

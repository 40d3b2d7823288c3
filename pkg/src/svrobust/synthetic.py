"""Synthetic option surfaces with known generating parameters."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .market_data import OptionQuote, OptionSurface
from .models import FSVParams, ModelParams, from_dict, to_dict, validate
from .pricing import McConfig
from .pricing.fourier import call_prices
from .pricing.montecarlo import fsv_call_prices

log = logging.getLogger(__name__)

# one path set per maturity for FSV mids
DEFAULT_SYNTH_MC = McConfig(paths=200_000, steps_per_year=252, seed=0)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic surface.

    ``strikes`` are relative to spot (1.0 is at the money). Bid and ask sit at
    ``mid -/+ max(half_spread * mid, floor)``. With ``noise > 0`` each mid is
    multiplied by ``exp(noise * Z)`` before spreads are applied.
    """

    params: ModelParams
    strikes: tuple[float, ...] = (0.9, 0.95, 1.0, 1.05, 1.1)
    maturities: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0)
    spot: float = 100.0
    rate: float = 0.02
    half_spread: float = 0.01
    floor: float = 0.05
    noise: float = 0.0
    seed: int = 0
    mc: McConfig = field(default=DEFAULT_SYNTH_MC)
    valuation_date: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "strikes", tuple(float(k) for k in self.strikes))
        object.__setattr__(self, "maturities", tuple(float(t) for t in self.maturities))
        if not self.strikes or not self.maturities:
            raise ValueError("strike and maturity grids must be non-empty")
        if any(k <= 0 for k in self.strikes) or any(t <= 0 for t in self.maturities):
            raise ValueError("grid values must be positive")
        if self.half_spread < 0 or self.half_spread >= 1:
            raise ValueError("half_spread must lie in [0, 1)")
        if not self.floor > 0:
            raise ValueError("floor must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        bad = validate(self.params)
        if bad:
            raise ValueError("invalid generating parameters: " + "; ".join(map(str, bad)))

    def to_dict(self) -> dict:
        return {
            "model": self.params.model,
            "params": to_dict(self.params),
            "strikes": list(self.strikes),
            "maturities": list(self.maturities),
            "spot": self.spot,
            "rate": self.rate,
            "half_spread": self.half_spread,
            "floor": self.floor,
            "noise": self.noise,
            "seed": self.seed,
            "mc": self.mc.to_dict(),
            "valuation_date": self.valuation_date,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        data = dict(data)
        params = from_dict(data.pop("model"), data.pop("params"))
        mc = McConfig(**data.pop("mc")) if "mc" in data else DEFAULT_SYNTH_MC
        return cls(params=params, mc=mc, **data)


def absolute_strikes(spec: SynthSpec) -> np.ndarray:
    # 12 significant digits so 100 * 1.1 is written as 110, not 110.00000000000001
    return np.array([float(f"{spec.spot * k:.12g}") for k in spec.strikes])


def model_mids(spec: SynthSpec) -> np.ndarray:
    """Noise-free model prices on the (maturity, strike) grid, maturity-major."""
    strikes = absolute_strikes(spec)
    rows = []
    for T in spec.maturities:
        if isinstance(spec.params, FSVParams):
            p, _, _ = fsv_call_prices(spec.spot, strikes, T, spec.rate, spec.params, spec.mc)
        else:
            p = call_prices(spec.spot, strikes, T, spec.rate, spec.params)
        rows.append(p)
    return np.array(rows)


def generate_surface(spec: SynthSpec) -> OptionSurface:
    """Quotes ordered by (maturity, strike); options priced below the floor are dropped."""
    mids = model_mids(spec)
    rng = np.random.default_rng(spec.seed)
    if spec.noise > 0:
        mids = mids * np.exp(spec.noise * rng.standard_normal(mids.shape))
    strikes = absolute_strikes(spec)
    quotes = []
    for i, T in enumerate(spec.maturities):
        for j, k in enumerate(strikes):
            mid = float(mids[i, j])
            if mid < spec.floor:
                log.warning("dropping K=%g T=%g: model price %.3g below spread floor %g",
                            k, T, mid, spec.floor)
                continue
            half = max(spec.half_spread * mid, spec.floor)
            quotes.append(OptionQuote(strike=float(k), maturity=T, bid=mid - half, ask=mid + half))
    if not quotes:
        raise ValueError("every synthetic option priced below the spread floor")
    quotes.sort(key=lambda q: (q.maturity, q.strike))
    return OptionSurface(spot=spec.spot, rate=spec.rate, quotes=tuple(quotes), valuation_date=spec.valuation_date)

"""Parameter sets for the Heston, Bates and approximative fractional SV models.

Each model is a frozen dataclass. Parameters map to flat vectors in a fixed
order (``PARAM_NAMES[model]``) for the optimizer and the bootstrap tables,
and to JSON dictionaries with the field names ``v0, kappa, theta, sigma,
rho, lambda, muJ, sigmaJ, hurst, epsilon``.

Jump sizes: ``log(1 + jump)`` is normal with mean ``muJ`` and standard
deviation ``sigmaJ``, so the martingale compensator rate is
``lambda * (exp(muJ + sigmaJ**2 / 2) - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Union

import numpy as np

DEFAULT_EPSILON = 1.0 / 252.0

HESTON_NAMES = ("v0", "kappa", "theta", "sigma", "rho")
BATES_NAMES = HESTON_NAMES + ("lambda", "muJ", "sigmaJ")
FSV_NAMES = BATES_NAMES + ("hurst",)

PARAM_NAMES = {"heston": HESTON_NAMES, "bates": BATES_NAMES, "fsv": FSV_NAMES}
MODELS = tuple(PARAM_NAMES)

# inclusive box used for every calibration unless overridden
DEFAULT_BOUNDS = {
    "v0": (0.0, 1.0),
    "kappa": (0.0, 100.0),
    "theta": (0.0, 1.0),
    "sigma": (0.0, 4.0),
    "rho": (-1.0, 1.0),
    "lambda": (0.0, 100.0),
    "muJ": (-10.0, 5.0),
    "sigmaJ": (0.0, 4.0),
    "hurst": (0.5, 1.0),
}

# python attribute <-> JSON/vector name
_ATTR = {"lambda": "lam"}
_NAME = {v: k for k, v in _ATTR.items()}


class InvalidReductionError(ValueError):
    """Model reduction requested away from the nesting point."""


@dataclass(frozen=True)
class HestonParams:
    v0: float
    kappa: float
    theta: float
    sigma: float
    rho: float

    model = "heston"


@dataclass(frozen=True)
class BatesParams:
    v0: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    lam: float
    muJ: float
    sigmaJ: float

    model = "bates"

    @property
    def jump_compensator(self) -> float:
        """Expected relative jump size ``E[J] - 1``."""
        return math.expm1(self.muJ + 0.5 * self.sigmaJ**2)


@dataclass(frozen=True)
class FSVParams:
    """Approximative fractional SV parameters.

    ``epsilon`` is the fixed approximation factor of the fractional kernel;
    it is configuration, never calibrated.
    """

    v0: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    lam: float
    muJ: float
    sigmaJ: float
    hurst: float
    epsilon: float = DEFAULT_EPSILON

    model = "fsv"

    @property
    def jump_compensator(self) -> float:
        return math.expm1(self.muJ + 0.5 * self.sigmaJ**2)


ModelParams = Union[HestonParams, BatesParams, FSVParams]
PARAM_CLASSES = {"heston": HestonParams, "bates": BatesParams, "fsv": FSVParams}


def model_of(params: ModelParams) -> str:
    return params.model


def param_names(model: str) -> tuple[str, ...]:
    try:
        return PARAM_NAMES[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}") from None


def to_vector(params: ModelParams) -> np.ndarray:
    return np.array([getattr(params, _ATTR.get(n, n)) for n in param_names(params.model)], dtype=float)


def from_vector(model: str, vector, epsilon: float = DEFAULT_EPSILON) -> ModelParams:
    names = param_names(model)
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (len(names),):
        raise ValueError(f"{model} expects {len(names)} parameters, got shape {vector.shape}")
    kwargs = {_ATTR.get(n, n): float(x) for n, x in zip(names, vector)}
    if model == "fsv":
        kwargs["epsilon"] = float(epsilon)
    return PARAM_CLASSES[model](**kwargs)


def to_dict(params: ModelParams) -> dict:
    return {_NAME.get(k, k): v for k, v in asdict(params).items()}


def from_dict(model: str, data: Mapping[str, float]) -> ModelParams:
    cls = PARAM_CLASSES.get(model)
    if cls is None:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    expected = {_NAME.get(f.name, f.name) for f in fields(cls)}
    required = set(param_names(model))
    unknown = set(data) - expected
    missing = required - set(data)
    if unknown or missing:
        raise ValueError(f"{model} params: unknown fields {sorted(unknown)}, missing fields {sorted(missing)}")
    return cls(**{_ATTR.get(k, k): float(v) for k, v in data.items()})


@dataclass(frozen=True)
class ParamBounds:
    """Inclusive per-parameter box, keyed by vector name."""

    bounds: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        clean = {}
        for name, (lo, hi) in self.bounds.items():
            lo, hi = float(lo), float(hi)
            if not lo < hi:
                raise ValueError(f"bound for {name}: lower {lo} must be below upper {hi}")
            clean[name] = (lo, hi)
        object.__setattr__(self, "bounds", clean)

    @classmethod
    def default(cls) -> "ParamBounds":
        return cls(dict(DEFAULT_BOUNDS))

    def with_overrides(self, overrides: Mapping[str, tuple[float, float]]) -> "ParamBounds":
        unknown = set(overrides) - set(DEFAULT_BOUNDS)
        if unknown:
            raise ValueError(f"bounds override for unknown parameters {sorted(unknown)}")
        merged = dict(self.bounds)
        merged.update({k: tuple(v) for k, v in overrides.items()})
        return ParamBounds(merged)

    def arrays(self, model: str) -> tuple[np.ndarray, np.ndarray]:
        names = param_names(model)
        lo = np.array([self.bounds[n][0] for n in names])
        hi = np.array([self.bounds[n][1] for n in names])
        return lo, hi

    def to_dict(self) -> dict:
        return {k: [lo, hi] for k, (lo, hi) in self.bounds.items()}


@dataclass(frozen=True)
class Violation:
    name: str
    value: float
    bound: float
    side: str  # "lower" or "upper"

    def __str__(self):
        op = "<" if self.side == "lower" else ">"
        return f"{self.name}={self.value!r} {op} {self.side} bound {self.bound!r}"


def validate(params: ModelParams, bounds: ParamBounds | None = None) -> list[Violation]:
    """All bound violations of ``params``; an empty list means valid.

    Bounds are inclusive. For FSV the approximation factor must also be
    positive (reported as a violation of lower bound 0).
    """
    bounds = bounds or ParamBounds.default()
    out = []
    for name, value in zip(param_names(params.model), to_vector(params)):
        lo, hi = bounds.bounds[name]
        if not value >= lo:
            out.append(Violation(name, float(value), lo, "lower"))
        elif not value <= hi:
            out.append(Violation(name, float(value), hi, "upper"))
    if isinstance(params, FSVParams) and not params.epsilon > 0:
        out.append(Violation("epsilon", params.epsilon, 0.0, "lower"))
    return out


def reduce_bates_to_heston(params: BatesParams) -> HestonParams:
    if not isinstance(params, BatesParams):
        raise TypeError(f"expected BatesParams, got {type(params).__name__}")
    if params.lam != 0:
        raise InvalidReductionError(f"Bates reduces to Heston only at lambda=0, got lambda={params.lam!r}")
    return HestonParams(params.v0, params.kappa, params.theta, params.sigma, params.rho)


def reduce_fsv_to_bates(params: FSVParams) -> BatesParams:
    if not isinstance(params, FSVParams):
        raise TypeError(f"expected FSVParams, got {type(params).__name__}")
    if params.hurst != 0.5:
        raise InvalidReductionError(f"FSV reduces to Bates only at hurst=0.5, got hurst={params.hurst!r}")
    return BatesParams(
        params.v0, params.kappa, params.theta, params.sigma, params.rho, params.lam, params.muJ, params.sigmaJ
    )


def as_bates(params: ModelParams) -> BatesParams:
    """Embed Heston as Bates with no jumps; Bates passes through."""
    if isinstance(params, BatesParams):
        return params
    if isinstance(params, HestonParams):
        return BatesParams(params.v0, params.kappa, params.theta, params.sigma, params.rho, 0.0, 0.0, 0.0)
    raise TypeError(f"cannot embed {type(params).__name__} in Bates")

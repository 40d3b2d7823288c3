"""Bootstrap of the option structure and per-resample calibration.

Each trial resamples the N quotes with replacement, calibrates the model to
the resample and prices the *full* original surface with the result. Trial
``i`` draws all its randomness from seeds derived from ``(master_seed, i)``,
so any trial can be recomputed on its own and the run does not depend on
the number of worker processes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationResult, Objective, calibrate, compute_aare
from .market_data import OptionSurface, compute_weights, mid_prices
from .models import DEFAULT_EPSILON, ModelParams, ParamBounds, from_vector, param_names, to_vector
from .pricing import McConfig, price_surface

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 200
MAX_FAILURE_SHARE = 0.10


class BootstrapError(RuntimeError):
    pass


def derive_seed(master_seed: int, *keys: int) -> int:
    """Counter-based child seed (unsigned 64-bit) for ``keys`` under ``master_seed``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def trial_seed(master_seed: int, trial: int) -> int:
    return derive_seed(master_seed, 0, trial)


def reference_seed(master_seed: int) -> int:
    return derive_seed(master_seed, 1)


@dataclass(frozen=True)
class BootstrapSample:
    indices: tuple[int, ...]

    def __len__(self):
        return len(self.indices)

    def view(self, surface: OptionSurface) -> OptionSurface:
        return surface.take(self.indices)


def draw_sample(surface: OptionSurface, rng: np.random.Generator) -> BootstrapSample:
    """N indices drawn uniformly with replacement from ``range(N)``."""
    n = len(surface)
    return BootstrapSample(tuple(int(i) for i in rng.integers(0, n, size=n)))


@dataclass(frozen=True)
class BootstrapConfig:
    model: str
    bounds: ParamBounds = field(default_factory=ParamBounds.default)
    trials: int = DEFAULT_TRIALS
    budget: int = 3000
    master_seed: int = 0
    mc: McConfig | None = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        param_names(self.model)
        if self.trials < 2:
            raise ValueError("need at least 2 bootstrap trials")
        if self.model == "fsv" and self.mc is None:
            raise ValueError("FSV bootstrap needs an McConfig")

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "bounds": self.bounds.to_dict(),
            "trials": self.trials,
            "budget": self.budget,
            "master_seed": self.master_seed,
            "mc": self.mc.to_dict() if self.mc else None,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BootstrapConfig":
        return cls(
            model=data["model"],
            bounds=ParamBounds({k: tuple(v) for k, v in data["bounds"].items()}),
            trials=int(data["trials"]),
            budget=int(data["budget"]),
            master_seed=int(data["master_seed"]),
            mc=McConfig(**data["mc"]) if data.get("mc") else None,
            epsilon=float(data["epsilon"]),
        )


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    seed: int
    sample: BootstrapSample
    result: CalibrationResult | None
    full_prices: np.ndarray | None  # model prices of the original N quotes
    full_aare: float | None
    error: str | None = None


def run_trial(surface: OptionSurface, config: BootstrapConfig, trial: int) -> TrialOutcome:
    """Resample, calibrate and reprice the full surface for trial ``trial``."""
    seed = trial_seed(config.master_seed, trial)
    rng = np.random.default_rng(derive_seed(seed, 0))
    sample = draw_sample(surface, rng)
    try:
        obj = Objective.for_surface(sample.view(surface), config.model, config.mc, config.epsilon)
        result = calibrate(obj, config.bounds, config.budget, derive_seed(seed, 1))
        full = price_surface(surface, result.theta_hat, config.mc)
        aare = compute_aare(full, mid_prices(surface))
    except Exception as exc:  # recorded per trial; the run decides whether to fail
        log.warning("bootstrap trial %d failed: %s", trial, exc)
        return TrialOutcome(trial, seed, sample, None, None, None, f"{type(exc).__name__}: {exc}")
    return TrialOutcome(trial, seed, sample, result, full, aare)


def calibrate_reference(surface: OptionSurface, config: BootstrapConfig) -> CalibrationResult:
    obj = Objective.for_surface(surface, config.model, config.mc, config.epsilon)
    return calibrate(obj, config.bounds, config.budget, reference_seed(config.master_seed))


@dataclass(frozen=True)
class BootstrapRun:
    surface: OptionSurface
    config: BootstrapConfig
    outcomes: tuple[TrialOutcome, ...]
    reference: CalibrationResult | None = None

    @property
    def model(self) -> str:
        return self.config.model

    @property
    def master_seed(self) -> int:
        return self.config.master_seed

    @property
    def param_names(self) -> tuple[str, ...]:
        return param_names(self.model)

    @property
    def samples(self) -> list[BootstrapSample]:
        return [o.sample for o in self.outcomes]

    @property
    def results(self) -> list[CalibrationResult | None]:
        return [o.result for o in self.outcomes]

    @property
    def successful(self) -> list[TrialOutcome]:
        return [o for o in self.outcomes if o.result is not None]

    @property
    def failures(self) -> dict[int, str]:
        return {o.trial: o.error for o in self.outcomes if o.result is None}

    @property
    def thetas(self) -> np.ndarray:
        """Successful replications as an ``(M, d)`` array in ``param_names`` order."""
        ok = self.successful
        if not ok:
            return np.empty((0, len(self.param_names)))
        return np.array([to_vector(o.result.theta_hat) for o in ok])

    @property
    def full_prices(self) -> np.ndarray:
        ok = self.successful
        return np.array([o.full_prices for o in ok]) if ok else np.empty((0, len(self.surface)))

    @property
    def full_aare(self) -> np.ndarray:
        return np.array([o.full_aare for o in self.successful])

    @property
    def trial_ids(self) -> np.ndarray:
        return np.array([o.trial for o in self.successful], dtype=int)

    @property
    def objective_values(self) -> np.ndarray:
        return np.array([o.result.objective_value for o in self.successful])

    @property
    def theta_bar(self) -> ModelParams:
        return bootstrap_mean(self)


def bootstrap_mean(run: BootstrapRun) -> ModelParams:
    """Componentwise mean of the successful replications."""
    thetas = run.thetas
    if len(thetas) == 0:
        raise BootstrapError("no successful bootstrap trials")
    return from_vector(run.model, thetas.mean(axis=0), run.config.epsilon)


def run_bootstrap(surface: OptionSurface, config: BootstrapConfig, workers: int = 1,
                  with_reference: bool = True) -> BootstrapRun:
    """All ``config.trials`` bootstrap calibrations.

    Trials run in ``workers`` processes; outcomes are stored by trial index.
    Raises :class:`BootstrapError` when more than 10% of trials fail.
    """
    compute_weights(surface)  # rejects zero spreads before any work
    trials = range(config.trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial_star, [(surface, config, i) for i in trials]))
    else:
        outcomes = [run_trial(surface, config, i) for i in trials]
    outcomes = tuple(sorted(outcomes, key=lambda o: o.trial))
    failed = sum(o.result is None for o in outcomes)
    if failed > MAX_FAILURE_SHARE * config.trials:
        raise BootstrapError(f"{failed} of {config.trials} bootstrap trials failed")
    reference = calibrate_reference(surface, config) if with_reference else None
    return BootstrapRun(surface, config, outcomes, reference)


def _run_trial_star(args):
    return run_trial(*args)


def with_extra_parameter(run: BootstrapRun, name: str, values) -> "ExtendedRun":
    """Attach an extra per-trial column (e.g. a dummy parameter) for filtering."""
    values = np.asarray(values, dtype=float)
    if values.shape != (len(run.successful),):
        raise ValueError(f"need {len(run.successful)} values, got shape {values.shape}")
    return ExtendedRun(run, {name: values})


@dataclass(frozen=True)
class ExtendedRun:
    """A run plus extra named per-trial columns; quacks like BootstrapRun for filtering."""

    base: BootstrapRun
    extra: dict

    def __getattr__(self, item):
        if item in ("base", "extra"):  # unpickling before fields are set
            raise AttributeError(item)
        return getattr(self.base, item)

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.base.param_names + tuple(self.extra)

    @property
    def thetas(self) -> np.ndarray:
        cols = [self.extra[k][:, None] for k in self.extra]
        return np.hstack([self.base.thetas] + cols)

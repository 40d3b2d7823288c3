"""Euler-Maruyama simulation of the approximative fractional SV model.

State is ``(log S, v)``. The variance uses full truncation: ``max(v, 0)``
enters both drift and diffusion while ``v`` itself may go negative. The
fractional term is driven by an independent Brownian motion through the
discretised kernel sum

    psi_k = sum_{i<k} (t_k - t_i + eps) ** (H - 3/2) * dW_psi_i

Jumps: per step a Poisson count with mean ``lambda * dt`` (drawn by inverse
transform from one uniform, so counts move monotonically with ``lambda``
under common random numbers) and a normal log-size ``N muJ + sqrt(N) sigmaJ Z``.

Paths are simulated in fixed-size blocks; block ``b`` draws from
``SeedSequence(seed, spawn_key=(b,))``, so output does not depend on how many
threads process the blocks.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..models import FSVParams

BLOCK_SIZE = 4096


class InstabilityWarning(RuntimeWarning):
    """More than half of the simulated variance paths reached the zero floor."""


@dataclass(frozen=True)
class McConfig:
    paths: int = 20_000
    steps_per_year: int = 252
    seed: int = 0
    antithetic: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.paths < 2:
            raise ValueError("paths must be at least 2")
        if self.antithetic and self.paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")
        if self.steps_per_year < 50:
            raise ValueError("steps_per_year must be at least 50")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be positive")

    def to_dict(self) -> dict:
        return {
            "paths": self.paths,
            "steps_per_year": self.steps_per_year,
            "seed": self.seed,
            "antithetic": self.antithetic,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class PathSample:
    terminal: np.ndarray  # S_T, antithetic partners at i and i + paths/2 within each block
    floor_hits: np.ndarray  # path reached v <= 0 at some step
    pair_size: int  # 2 if antithetic else 1

    @property
    def floor_fraction(self) -> float:
        return float(self.floor_hits.mean())


def time_steps(horizon: float, steps_per_year: int) -> int:
    return max(1, math.ceil(steps_per_year * horizon - 1e-9))


def kernel_matrix(n_steps: int, dt: float, hurst: float, epsilon: float) -> np.ndarray:
    """Strictly lower-triangular weights ``((k - i) dt + eps) ** (H - 3/2)``."""
    lag = np.arange(n_steps)[:, None] - np.arange(n_steps)[None, :]
    K = np.zeros((n_steps, n_steps))
    mask = lag > 0
    K[mask] = (lag[mask] * dt + epsilon) ** (hurst - 1.5)
    return K


def _block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _normals(rng: np.random.Generator, shape: tuple[int, int], antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal(shape)
    half = rng.standard_normal((shape[0], shape[1] // 2))
    return np.concatenate([half, -half], axis=1)


def _uniforms(rng: np.random.Generator, shape: tuple[int, int], antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.random(shape)
    half = rng.random((shape[0], shape[1] // 2))
    return np.concatenate([half, 1.0 - half], axis=1)


def poisson_inverse(u: np.ndarray, mean: float) -> np.ndarray:
    """Poisson counts by inverting the CDF at uniforms ``u``."""
    counts = np.zeros(u.shape, dtype=float)
    if mean <= 0:
        return counts
    p = math.exp(-mean)
    cdf = p
    k = 0
    cap = mean + 40.0 * math.sqrt(mean) + 40.0
    while k < cap:
        above = u > cdf
        if not above.any():
            break
        k += 1
        counts += above
        p *= mean / k
        cdf += p
    return counts


def _simulate_block(params: FSVParams, horizon: float, n_steps: int, m: int, spot: float, rate: float,
                    seed: int, block: int, antithetic: bool, kernel: np.ndarray | None):
    dt = horizon / n_steps
    sq = math.sqrt(dt)
    rng = _block_generator(seed, block)
    # draw order is fixed so every parameter value sees the same numbers
    z_s = _normals(rng, (n_steps, m), antithetic)
    z_v = _normals(rng, (n_steps, m), antithetic)
    z_psi = _normals(rng, (n_steps, m), antithetic)
    u_jump = _uniforms(rng, (n_steps, m), antithetic)
    z_jump = _normals(rng, (n_steps, m), antithetic)

    H, eps = params.hurst, params.epsilon
    frac_coef = (H - 0.5) * params.sigma
    psi = kernel @ (sq * z_psi) if (kernel is not None and frac_coef != 0.0) else None
    vol_vol = eps ** (H - 0.5) * params.sigma
    rho_c = math.sqrt(max(1.0 - params.rho**2, 0.0))
    drift = rate - params.lam * params.jump_compensator

    log_s = np.full(m, math.log(spot))
    v = np.full(m, params.v0)
    hit = np.zeros(m, dtype=bool)
    for k in range(n_steps):
        vp = np.maximum(v, 0.0)
        sv = np.sqrt(vp)
        dws = sq * z_s[k]
        dwv = params.rho * dws + rho_c * sq * z_v[k]
        log_s += (drift - 0.5 * vp) * dt + sv * dws
        if params.lam > 0:
            n_jumps = poisson_inverse(u_jump[k], params.lam * dt)
            log_s += n_jumps * params.muJ + np.sqrt(n_jumps) * params.sigmaJ * z_jump[k]
        v_drift = params.kappa * (params.theta - vp)
        if psi is not None:
            v_drift = v_drift + frac_coef * psi[k] * sv
        v = v + v_drift * dt + vol_vol * sv * dwv
        hit |= v <= 0.0
    return np.exp(log_s), hit


def simulate_fsv_paths(params: FSVParams, horizon: float, mc: McConfig, spot: float = 1.0,
                       rate: float = 0.0) -> PathSample:
    """Terminal prices ``S_T`` of ``mc.paths`` simulated FSV paths."""
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    if not isinstance(params, FSVParams):
        raise TypeError(f"expected FSVParams, got {type(params).__name__}")
    n_steps = time_steps(horizon, mc.steps_per_year)
    dt = horizon / n_steps
    kernel = kernel_matrix(n_steps, dt, params.hurst, params.epsilon) if params.hurst != 0.5 else None

    sizes = []
    remaining = mc.paths
    while remaining > 0:
        sizes.append(min(BLOCK_SIZE, remaining))
        remaining -= sizes[-1]

    def run(b):
        return _simulate_block(params, horizon, n_steps, sizes[b], spot, rate, mc.seed, b, mc.antithetic, kernel)

    if mc.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=mc.workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    return PathSample(
        terminal=np.concatenate([p[0] for p in parts]),
        floor_hits=np.concatenate([p[1] for p in parts]),
        pair_size=2 if mc.antithetic else 1,
    )


def _pair_means(values: np.ndarray, antithetic: bool) -> np.ndarray:
    """Average antithetic partners; blocks are laid out ``[x, x']`` halves."""
    if not antithetic:
        return values
    out = []
    start = 0
    while start < len(values):
        m = min(BLOCK_SIZE, len(values) - start)
        blk = values[start:start + m]
        out.append(0.5 * (blk[: m // 2] + blk[m // 2:]))
        start += m
    return np.concatenate(out)


@dataclass(frozen=True)
class McPrice:
    price: float
    stderr: float
    floor_fraction: float = 0.0
    warning: str | None = None


def call_prices_from_sample(sample: PathSample, strikes, maturity: float, rate: float,
                            antithetic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Discounted mean call payoff and its standard error, per strike."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    disc = math.exp(-rate * maturity)
    prices = np.empty(strikes.shape)
    errors = np.empty(strikes.shape)
    for j, K in enumerate(strikes):
        payoff = disc * np.maximum(sample.terminal - K, 0.0)
        pm = _pair_means(payoff, antithetic)
        prices[j] = pm.mean()
        errors[j] = pm.std(ddof=1) / math.sqrt(len(pm))
    return prices, errors


def fsv_call_prices(spot: float, strikes, maturity: float, rate: float, params: FSVParams,
                    mc: McConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """Prices, standard errors and floor-hit fraction from one shared path set."""
    sample = simulate_fsv_paths(params, maturity, mc, spot=spot, rate=rate)
    prices, errors = call_prices_from_sample(sample, strikes, maturity, rate, mc.antithetic)
    frac = sample.floor_fraction
    if frac > 0.5:
        warnings.warn(
            f"{frac:.1%} of variance paths hit the zero floor (T={maturity}); price may be unreliable",
            InstabilityWarning,
            stacklevel=2,
        )
    return prices, errors, frac

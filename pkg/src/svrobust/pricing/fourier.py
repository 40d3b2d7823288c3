"""Characteristic functions and one-integral call pricing for Heston and Bates.

Calls are priced with the fundamental-transform representation

    C = S0 - sqrt(S0 K) exp(-rT/2) / pi * int_0^inf Re[exp(i u k) phi(u - i/2)] / (u^2 + 1/4) du

where ``k = log(F / K)``, ``F = S0 exp(rT)`` and ``phi`` is the
characteristic function of ``log(S_T / F)``. The integrand decays at least
like ``u**-2``; the truncation point is picked from the decay of ``|phi|``.

Everything that depends only on the maturity (the characteristic function
on the quadrature nodes) is shared by all strikes of that maturity.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ..models import BatesParams, HestonParams

# absolute price tolerance, as a fraction of spot
DEFAULT_REL_TOL = 1e-9
MAX_NODES_PER_PANEL = 256
_CUTOFFS = 2.0 ** np.arange(3, 18)


class PricingError(ArithmeticError):
    """Numerical failure in a pricer; ``diagnostics`` describes where."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def _log1p(y: np.ndarray) -> np.ndarray:
    # numpy's complex log1p drops the real part for tiny |y|
    a, b = y.real, y.imag
    return 0.5 * np.log1p(a * (2.0 + a) + b * b) + 1j * np.arctan2(b, 1.0 + a)


def heston_log_cf(z, T: float, v0: float, kappa: float, theta: float, sigma: float, rho: float) -> np.ndarray:
    """Log of ``E[exp(i z X_T)]`` with ``X_T = log(S_T / F)`` under Heston.

    ``z`` may be complex. Uses the rotation-free formulation with
    ``exp(-d T)``; terms are arranged so nothing is divided by ``sigma**2``,
    which keeps the ``sigma -> 0`` limit exact.
    """
    z = np.asarray(z, dtype=complex)
    w = 1j * z + z * z
    if sigma == 0.0 and kappa == 0.0:
        return -0.5 * w * v0 * T

    b = kappa - 1j * rho * sigma * z
    d = np.sqrt(b * b + sigma * sigma * w)
    bpd = b + d
    bmd = b - d
    large = np.abs(bpd) >= np.abs(bmd)
    one_minus_e = -np.expm1(-d * T)
    e = np.exp(-d * T)

    out = np.empty_like(z)
    if np.any(large):
        bp = bpd[large]
        ww = w[large]
        ome = one_minus_e[large]
        A = -ww / bp  # (b - d) / sigma^2
        g_over_s2 = -ww / (bp * bp)  # g / sigma^2
        g = sigma * sigma * g_over_s2
        y = g * ome / (1.0 - g)
        y_safe = np.where(y == 0, 1.0, y)
        ratio = np.where(y == 0, 1.0, _log1p(y_safe) / y_safe)
        L_over_s2 = g_over_s2 * ome / (1.0 - g) * ratio
        D = A * ome / (1.0 - g * e[large])
        out[large] = kappa * theta * (A * T - 2.0 * L_over_s2) + v0 * D
    small = ~large
    if np.any(small):
        bp, bm = bpd[small], bmd[small]
        ee = e[small]
        s2 = sigma * sigma
        g = bm / bp
        A = bm / s2
        L = np.log((1.0 - g * ee) / (1.0 - g))
        D = A * one_minus_e[small] / (1.0 - g * ee)
        out[small] = kappa * theta * (A * T - 2.0 * L / s2) + v0 * D
    return out


def jump_log_cf(z, T: float, lam: float, muJ: float, sigmaJ: float) -> np.ndarray:
    """Log CF of the compensated compound-Poisson part of ``log(S_T / F)``."""
    z = np.asarray(z, dtype=complex)
    if lam == 0.0:
        return np.zeros_like(z)
    k_bar = math.expm1(muJ + 0.5 * sigmaJ * sigmaJ)
    return lam * T * (np.expm1(1j * z * muJ - 0.5 * sigmaJ * sigmaJ * z * z) - 1j * z * k_bar)


def log_cf(z, T: float, params: HestonParams | BatesParams) -> np.ndarray:
    out = heston_log_cf(z, T, params.v0, params.kappa, params.theta, params.sigma, params.rho)
    if isinstance(params, BatesParams):
        out = out + jump_log_cf(z, T, params.lam, params.muJ, params.sigmaJ)
    return out


@lru_cache(maxsize=16)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=64)
def _breakpoints(upper: float) -> np.ndarray:
    # fine panels near the origin where the integrand peaks, width <= 16
    # in the oscillatory middle, doubling widths far out
    pts = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
    x = 16.0
    while x < min(upper, 1024.0):
        x += 16.0
        pts.append(x)
    while x < upper:
        x *= 2.0
        pts.append(x)
    out = np.array(sorted(p for p in set(pts) if p <= upper))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _nodes(upper: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    edges = _breakpoints(upper)
    x, w = _gauss_legendre(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    u = (a + half * (x + 1.0)).ravel()
    wt = (half * w).ravel()
    u.setflags(write=False)
    wt.setflags(write=False)
    return u, wt


def _truncation(T: float, params, prefactor: float, tol: float) -> float:
    """Smallest power-of-two cutoff with a tail bound below ``tol / 10``.

    The tail beyond ``U`` is bounded by ``prefactor / pi * |phi(U - i/2)| / U``
    provided ``|phi|`` keeps decaying, which holds for these models.
    """
    mag = np.exp(log_cf(_CUTOFFS - 0.5j, T, params).real)
    ok = prefactor / math.pi * mag / _CUTOFFS < 0.1 * tol
    if ok.any():
        return float(_CUTOFFS[np.argmax(ok)])
    raise PricingError(
        "characteristic function does not decay; truncation cap reached",
        maturity=T,
        cap=float(_CUTOFFS[-1]),
        params=params,
    )


def call_prices(
    spot: float,
    strikes,
    maturity: float,
    rate: float,
    params: HestonParams | BatesParams,
    rel_tol: float = DEFAULT_REL_TOL,
) -> np.ndarray:
    """European call prices for several strikes sharing one maturity.

    The quadrature order is doubled until two successive estimates agree to
    ``rel_tol * spot`` for every strike; :class:`PricingError` is raised if
    that does not happen within the node cap.
    """
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if not maturity > 0:
        raise ValueError(f"maturity must be positive, got {maturity!r}")
    if not spot > 0:
        raise ValueError(f"spot must be positive, got {spot!r}")
    if np.any(strikes < 0):
        raise ValueError("strikes must be non-negative")

    out = np.full(strikes.shape, float(spot))
    live = strikes > 0
    if not np.any(live):
        return out
    K = strikes[live]
    tol = rel_tol * spot
    disc_half = math.exp(-0.5 * rate * maturity)
    pref = np.sqrt(spot * K) * disc_half
    k = np.log(spot / K) + rate * maturity

    upper = _truncation(maturity, params, float(pref.max()), tol)

    def integrate(n):
        u, wt = _nodes(upper, n)
        phi = np.exp(log_cf(u - 0.5j, maturity, params))
        integrand = (np.cos(np.outer(k, u)) * phi.real - np.sin(np.outer(k, u)) * phi.imag) / (u * u + 0.25)
        # row-wise sum, not a BLAS product: each strike's value must not depend on
        # which other strikes share the call
        return (integrand * wt).sum(axis=1)

    n = 8
    prev = integrate(n)
    while True:
        n *= 2
        cur = integrate(n)
        err = np.max(pref / math.pi * np.abs(cur - prev))
        if not np.isfinite(err):
            raise PricingError("non-finite integrand", maturity=maturity, params=params)
        if err < tol:
            break
        if n >= MAX_NODES_PER_PANEL:
            raise PricingError(
                "quadrature did not converge",
                maturity=maturity,
                error_estimate=float(err),
                tolerance=tol,
                params=params,
            )
        prev = cur

    price = spot - pref / math.pi * cur
    lower = np.maximum(spot - K * math.exp(-rate * maturity), 0.0)
    out[live] = np.clip(price, lower, spot)
    return out

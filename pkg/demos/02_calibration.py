"""Calibration: recover known Heston parameters from a synthetic surface.

Run: python demos/02_calibration.py
"""

import numpy as np

from svrobust.calibration import Objective, calibrate
from svrobust.models import HestonParams, to_dict
from svrobust.synthetic import SynthSpec, generate_surface

truth = HestonParams(v0=0.04, kappa=1.5, theta=0.04, sigma=0.3, rho=-0.6)
surface = generate_surface(SynthSpec(truth))
print(f"synthetic surface: {len(surface)} quotes, strikes {sorted(set(surface.strikes.tolist()))}, "
      f"maturities {sorted(set(surface.maturities.tolist()))}")

obj = Objective.for_surface(surface, "heston")
result = calibrate(obj, budget=3000, seed=0)

print(f"\nevaluations used: {result.evaluations}, converged: {result.converged}")
print(f"objective G = {result.objective_value:.3e}, AARE = {result.aare:.3e}")
print(f"\n{'param':>6} {'true':>9} {'fitted':>9}")
fitted = to_dict(result.theta_hat)
for name, value in to_dict(truth).items():
    print(f"{name:>6} {value:9.4f} {fitted[name]:9.4f}")

# the prices are what the objective pins down; parameters can trade off against each other
worst = np.max(np.abs(result.model_prices - obj.market) / obj.market)
print(f"\nlargest relative price error: {worst:.2e}")

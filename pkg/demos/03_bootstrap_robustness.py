"""Bootstrap the option structure, then measure how stable the fitted prices are.

Each trial resamples the quotes with replacement, recalibrates, and prices the
full original surface. Small M and budget keep this demo to about a minute.

Run: python demos/03_bootstrap_robustness.py
"""

import numpy as np

from svrobust.bootstrap import BootstrapConfig, run_bootstrap
from svrobust.models import HestonParams, to_dict
from svrobust.robustness import pairwise_correlations, price_dispersion, qn_plot_data, scatter_data
from svrobust.synthetic import SynthSpec, generate_surface

truth = HestonParams(v0=0.04, kappa=1.5, theta=0.04, sigma=0.3, rho=-0.6)
surface = generate_surface(SynthSpec(truth, noise=0.01, seed=3))
run = run_bootstrap(surface, BootstrapConfig("heston", trials=16, budget=800, master_seed=1))
print(f"{len(run.successful)} trials; reference AARE {run.reference.aare:.3e}")
print("bootstrap mean:", {k: round(v, 4) for k, v in to_dict(run.theta_bar).items()})

disp = price_dispersion(run)
print(f"\n{'K':>6} {'T':>5} {'BRE':>9} {'V':>9}")
for q, bre, v in zip(surface.quotes, disp.bre, disp.variance):
    print(f"{q.strike:6.1f} {q.maturity:5.2f} {bre:9.2e} {v:9.2e}")

names, corr = pairwise_correlations(run)
print("\npairwise correlations of the replications")
print("       " + " ".join(f"{n:>7}" for n in names))
for n, row in zip(names, corr):
    print(f"{n:>6} " + " ".join(f"{x:7.2f}" for x in row))

sd = scatter_data(run)
print(f"\nscatterplot matrix: {sd.shape[0]}x{sd.shape[1]}, {len(sd.pairs())} parameter pairs")

qn = qn_plot_data(run.thetas[:, names.index("kappa")])
slope = np.polyfit(qn[:, 0], qn[:, 1], 1)[0]
print(f"Q-N line for kappa: slope {slope:.3f} (the spread of kappa across trials)")

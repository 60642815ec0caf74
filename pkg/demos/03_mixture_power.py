"""
One or two mixture components?
==============================

The likelihood ratio for mixture order has no usable limiting law, yet the
split test keeps its level. A parametric bootstrap is compared with it
on a small power curve (a larger run is `uinfer sim-power`).
"""

import numpy as np

from uinfer import harness
from uinfer.data import DataSplit
from uinfer.families import Mixture, MixtureComponents, ParamVector, sample_from
from uinfer.split import split_lrt

fam = Mixture(k=2, sigma=1.0, restarts=3)
truth = ParamVector.mixture([0.5, 0.5], [-1.5, 1.5], [1.0, 1.0])
data = sample_from(fam, truth, 400, seed=1)
split = DataSplit.random_halves(400, np.random.default_rng(2))

out = split_lrt(fam, data, split, MixtureComponents(1), alpha=0.1)
print("split LRT, mu = 1.5: log U =", round(out.log_statistic, 2), "reject:", out.reject)

boot = harness.bootstrap_mixture_lrt(data, k0=1, k1=2, B=100, alpha=0.1, seed=3, em=harness.SIM_EM)
print("bootstrap LRT:       LRS =", round(boot.lrs, 2), "p =", round(boot.p_value, 3))

report = harness.simulate_power_curve(mus=(0.0, 1.0, 2.0), m=200, reps=40, B=100, pool_size=300, seed=4)
print(report.to_csv())

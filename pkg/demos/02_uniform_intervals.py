"""
Intervals for the scale of Uniform(0, theta)
============================================

The crossfit interval has a closed form. It is compared here with the
exact pivotal interval built from the sample maximum.
"""

import numpy as np

from uinfer.data import DataSplit
from uinfer.families import ParamVector, UniformScale
from uinfer.split import Crossfit, UniversalSet, uniform_classical_interval, uniform_crossfit_interval

rng = np.random.default_rng(3)
n = 25  # per half
data = rng.uniform(0, 2.0, size=(2 * n, 1))
split = DataSplit.first_half(2 * n)

cf = uniform_crossfit_interval(data, split, alpha=0.1)
cl = uniform_classical_interval(data, alpha=0.1)
print(f"crossfit, literal form : [{cf.literal.lo:.4f}, {cf.literal.hi:.4f}]")
print(f"crossfit, support form : [{cf.support.lo:.4f}, {cf.support.hi:.4f}]")
print(f"classical pivotal      : [{cl.lo:.4f}, {cl.hi:.4f}]")

# the generic machinery, bisecting the averaged statistic, lands on the support form
uset = UniversalSet(UniformScale(), data, 0.1, Crossfit(), split)
lo, hi = uset.interval(ParamVector.uniform, cf.support.lo, 1e-3, 100.0)
print(f"generic crossfit set   : [{lo:.4f}, {hi:.4f}]")

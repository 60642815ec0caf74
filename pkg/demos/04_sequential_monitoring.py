"""
Monitoring a stream with an anytime-valid test
==============================================

The running-MLE statistic can be checked after every observation and the
experiment stopped whenever it crosses 1/alpha, without inflating the
type I error.
"""

import numpy as np

from uinfer.families import FULL, FixedPoint, Gaussian
from uinfer.sequential import ConfSeqTracker, MartingaleState

g = Gaussian()
rng = np.random.default_rng(5)
stream = rng.normal(0.3, 1.0, size=500)

test = MartingaleState(g, FixedPoint(g.param(0.0)), g.param(0.0), burn_in=1)
grid = [g.param(x) for x in np.linspace(-1, 1.5, 251)]
confseq = ConfSeqTracker(grid, alpha=0.1)
cs_state = MartingaleState(g, FULL, g.param(0.0), burn_in=1)

stopped = None
for t, y in enumerate(stream, start=1):
    test.update(y)
    cs_state.update(y)
    confseq.update(cs_state)
    if stopped is None and test.should_stop(0.1):
        stopped = t
    if t in (50, 100, 250, 500):
        kept = np.linspace(-1, 1.5, 251)[confseq.running]
        print(f"t={t:4d}  p_t={test.p_value:.4f}  running CS=[{kept.min():.3f}, {kept.max():.3f}]")

print("H0: mu = 0 rejected at t =", stopped)

"""
Constrained filters on a toy identification problem
===================================================

Four filters track the same unknown 7-tap system while every iterate stays on
the plane C^T W = f. The disturbance is a Gaussian mixture with rare large
outliers, which is where a correntropy-weighted update pays off.
"""

import numpy as np

from cmcc import HyperParams, MixedGaussianNoise, init_filter, random_constraints, step
from cmcc.config import PAPER_W_STAR

rng = np.random.default_rng(0)
W_star = np.array(PAPER_W_STAR)
cs = random_constraints(7, 3, rng, W_true=W_star)
noise = MixedGaussianNoise(var1=0.01, var2=100.0, theta=0.05)

# one shared data stream, unit-covariance inputs
N = 3000
X = rng.standard_normal((N, 7))
d = X @ W_star + noise.sample(rng, N)

settings = {
    "CMCC": HyperParams(eta=0.012, sigma=2.0),
    "CLMS": HyperParams(eta=0.01),
    "CAP": HyperParams(eta=0.015, L=4),
    "CRLS": HyperParams(lambda_ff=0.998),
}
for name, hp in settings.items():
    state = init_filter(cs, name, hp)
    msd = np.empty(N)
    for n in range(N):
        state, _ = step(state, X[n], d[n], hp)
        msd[n] = np.sum((state.W - W_star) ** 2)
    tail = 10 * np.log10(msd[-200:].mean())
    worst = np.max(np.abs(cs.residual(state.W)))
    print(f"{name:5s} final MSD {tail:7.2f} dB   max |C^T W - f| = {worst:.1e}")

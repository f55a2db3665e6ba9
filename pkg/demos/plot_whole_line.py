"""
The equation on the whole line
==============================

Without boundaries the slice is stationary in space.  Its variogram is a
power of the lag with exponent ``2 s*``, and the scale constant ``c`` turns
the variation statistic into estimates of sigma and theta.
"""

import numpy as np

from deltavar import (EstimationInput, KnownSigma, KnownTheta, SpdeModel, WholeLineGeometry,
                      WholeLineSampler, estimate)
from deltavar.spde import WHOLE_LINE

model = SpdeModel(theta=1.0, sigma=1.0, alpha=1.4, gamma=0.2, domain=WHOLE_LINE)
sampler = WholeLineSampler(model, 1.0, (0.0, 1.0), 4097)
print("s* =", model.s_star, " tail warning:", sampler.metadata["tail_warning"])

lags = np.array([1, 2, 4, 8, 16, 32])
vario = np.zeros(lags.size)
sigmas, thetas = [], []
geometry = WholeLineGeometry(1.4, 0.2, 0)
for seed in range(50):
    f = sampler.sample(seed).values
    vario += [np.mean((f.values[l:] - f.values[:-l]) ** 2) for l in lags]
    sigmas.append(estimate(EstimationInput(f, 2, 2, model.s_star, KnownTheta(1.0), geometry)).estimate)
    thetas.append(estimate(EstimationInput(f, 2, 2, model.s_star, KnownSigma(1.0), geometry)).estimate)

slope = np.polyfit(np.log(lags), np.log(vario), 1)[0]
print(f"variogram slope / 2 = {slope / 2:.3f}")
print(f"mean sigma estimate {np.mean(sigmas):.4f}, mean theta estimate {np.mean(thetas):.4f}")

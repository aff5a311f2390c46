"""Four points with several optimal S-shaped fits.

The data (0, 0), (1/3, 1/2), (2/3, 1/2), (1, 1) admit a concave fit and a
convex fit with the same residual sum of squares, 1/24.  The solver breaks
the tie by taking the smallest optimal inflection index.

    python3 demos/tied_optimal_fits.py
"""
import numpy as np

from sshape import RegressionData, fit_fixed_inflection, fit_sshape, rss_profile

data = RegressionData([0, 1 / 3, 2 / 3, 1], [0, 0.5, 0.5, 1])

print("RSS of the best fit with the inflection pinned at each design point:")
for x, value in zip(data.x, rss_profile(data)):
    print(f"  x = {x:.4f}   RSS = {value:.6f}   (1/24 = {1 / 24:.6f})")

first = fit_fixed_inflection(data, 0)
last = fit_fixed_inflection(data, data.n - 1)
print("\nconcave optimum (inflection at the first point):", np.round(first.theta, 4))
print("convex optimum (inflection at the last point):   ", np.round(last.theta, 4))

fit = fit_sshape(data)
print(f"\nfit_sshape picks index {fit.inflection_index} (x = {fit.inflection}), RSS = {fit.rss:.6f}")

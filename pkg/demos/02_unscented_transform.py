# %% [markdown]
# # Sigma points
#
# The unscented transform replaces a Gaussian over parameters by 2n+1
# weighted points. Affine maps are reproduced exactly; for curved maps the
# estimate is usually much better than plugging in the mean.

# %%
import numpy as np

from disco.unscented import UtConfig, sigma_points, unscented_moments

mean = np.array([0.89, 0.90])
cov = np.diag([0.01, 0.03])
s = sigma_points(mean, cov, UtConfig(alpha=0.5, kappa=0.0, xi=2.0))
print("points:\n", s.points.round(4))
print("mean weights:", s.mean_weights, " covariance weights:", s.cov_weights)

# %% Affine check
a, b = np.array([[2.0, -1.0], [0.5, 3.0]]), np.array([1.0, 0.0])
m, c = unscented_moments(s.points @ a.T + b, s.mean_weights, s.cov_weights)
print("mean error", np.abs(m - (a @ mean + b)).max(), "cov error", np.abs(c - a @ cov @ a.T).max())

# %% A curved map: natural frequency sqrt(g / l) of a pendulum of random length
rng = np.random.default_rng(0)
lengths = rng.multivariate_normal(mean, cov, 200_000)[:, 0]
lengths = lengths[lengths > 0]
truth = np.sqrt(9.81 / lengths).mean()
ut = unscented_moments(np.sqrt(9.81 / s.points[:, :1]), s.mean_weights, s.cov_weights)[0][0]
plug_in = np.sqrt(9.81 / mean[0])
print(f"Monte Carlo {truth:.5f}  UT {ut:.5f}  mean only {plug_in:.5f}")

# %% Zero covariance collapses every point onto the mean
print(sigma_points(mean, np.zeros((2, 2))).points)

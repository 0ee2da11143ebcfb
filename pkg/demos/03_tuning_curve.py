"""Trace the posterior-mean BIC over the global-shrinkage grid.

The global scale is 1/(sqrt(n log p) p^gamma): larger gamma means harder
shrinkage.  Too little shrinkage leaves noise coordinates in the sparsified
model; too much makes the posterior drop the true covariates and the fit
term explodes.  The mean BIC is flat over a wide middle range and rises
sharply once over-shrinkage sets in, so its argmin is a safe choice.

This run uses a shortened chain protocol to stay quick; expect a couple
of minutes.
"""

import numpy as np

from bcs import (
    CovStructure,
    SamplerConfig,
    SigmaPrior,
    TrueModel,
    gamma_grid,
    student_t_family,
    tune_gamma,
    generate_dataset,
)

n, p = 120, 200
beta_star = np.zeros(p)
beta_star[:4] = 1.0
truth = TrueModel(beta_star=beta_star, sigma_star=1.0)
data = generate_dataset(n, p, CovStructure.independent(), truth, seed=0)

grid = gamma_grid(-0.25, 1.1, 0.15)
config = SamplerConfig(burn_in=1000, iterations=5000, thin=10, seed=0)
report = tune_gamma(data, student_t_family(a1=1.5), SigmaPrior(), grid, config, jobs=2)

print(f"{'gamma':>8s} {'mean BIC':>12s}")
lo = min(b for b in report.mean_bic if not np.isnan(b))
for g, b in zip(report.gammas, report.mean_bic):
    bar = "#" * int(40 * (b - lo) / max(1e-9, max(report.mean_bic) - lo))
    marker = "  <- chosen" if g == report.gamma_hat else ""
    print(f"{g:8.2f} {b:12.2f}  {bar}{marker}")

print(f"\ngamma_hat = {report.gamma_hat}")
print("the curve stays flat through the moderate-shrinkage range and")
print("climbs steeply once the true covariates start getting zeroed out")

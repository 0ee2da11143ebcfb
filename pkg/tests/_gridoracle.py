"""Brute-force grid posterior for tiny (n, p=2) instances.

Independent of the package's own density code: the coefficient priors are
evaluated with scipy.stats, the latent scales are integrated analytically
through the marginal prior of beta/sigma, and the (beta1, beta2, sigma^2)
posterior is integrated by trapezoid rule on a dense 3-d grid.
"""

from __future__ import annotations

import numpy as np
from scipy import stats
from scipy.special import logsumexp


def student_t_logprior(a1: float, s_n: float):
    def f(b, sigma):
        return stats.t.logpdf(b, df=2 * a1, scale=np.sqrt(s_n / a1) * sigma)

    return f


def laplace_logprior(lam: float):
    def f(b, sigma):
        return stats.laplace.logpdf(b, scale=sigma / lam)

    return f


def mixture_logprior(m1: float, sigma0: float, sigma1: float):
    def f(b, sigma):
        return np.logaddexp(
            np.log1p(-m1) + stats.norm.logpdf(b, scale=sigma0 * sigma),
            np.log(m1) + stats.norm.logpdf(b, scale=sigma1 * sigma),
        )

    return f


def _trap_weights(g: np.ndarray) -> np.ndarray:
    w = np.empty_like(g)
    w[1:-1] = (g[2:] - g[:-2]) / 2
    w[0] = (g[1] - g[0]) / 2
    w[-1] = (g[-1] - g[-2]) / 2
    return w


def grid_posterior_moments(
    y: np.ndarray,
    X: np.ndarray,
    logprior_1d,
    a0: float,
    b0: float,
    b1_grid: np.ndarray,
    b2_grid: np.ndarray,
    s2_grid: np.ndarray,
) -> dict:
    """E[beta1], E[beta2], E[sigma^2] of the (beta, sigma^2) posterior."""
    n = len(y)
    G = X.T @ X
    c = X.T @ y
    yy = float(y @ y)
    B1, B2 = np.meshgrid(b1_grid, b2_grid, indexing="ij")
    rss = (
        yy
        - 2 * (c[0] * B1 + c[1] * B2)
        + G[0, 0] * B1**2
        + 2 * G[0, 1] * B1 * B2
        + G[1, 1] * B2**2
    )
    w1, w2, ws = _trap_weights(b1_grid), _trap_weights(b2_grid), _trap_weights(s2_grid)
    lw1, lw2 = np.log(w1), np.log(w2)
    m = len(s2_grid)
    Ls = np.empty(m)
    m1s = np.empty(m)
    m2s = np.empty(m)
    ones1 = np.ones(len(b1_grid))
    ones2 = np.ones(len(b2_grid))
    for i, s2 in enumerate(s2_grid):
        sigma = np.sqrt(s2)
        lp1 = logprior_1d(b1_grid, sigma) + lw1
        lp2 = logprior_1d(b2_grid, sigma) + lw2
        ld = (
            -rss / (2 * s2)
            + lp1[:, None]
            + lp2[None, :]
            - (n / 2 + a0 + 1) * np.log(s2)
            - b0 / s2
        )
        mx = ld.max()
        w = np.exp(ld - mx)
        tot = w.sum()
        Ls[i] = mx + np.log(tot)
        m1s[i] = (w @ ones2) @ b1_grid / tot
        m2s[i] = (ones1 @ w) @ b2_grid / tot
    log_ws = Ls + np.log(ws)
    log_total = logsumexp(log_ws)
    slab = np.exp(log_ws - log_total)
    return {
        "beta1": float(slab @ m1s),
        "beta2": float(slab @ m2s),
        "sigma2": float(slab @ s2_grid),
    }


def batch_means_se(x: np.ndarray, n_batches: int = 200) -> float:
    """Monte-Carlo standard error of the mean via batch means."""
    usable = len(x) // n_batches * n_batches
    bm = x[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(bm.std(ddof=1) / np.sqrt(n_batches))

"""Posterior summaries: selection, intervals, hyperparameter tuning, and
normal-shape diagnostics.

Selection sparsifies each draw by the prior-dependent rule
``beta_j 1(|beta_j / sigma| > a)`` where ``a`` is the threshold at which
the prior puts mass ``p^-(1+u)`` outside [-a, a] (u = 0 by default, i.e.
prior expected model size one).  The per-coordinate frequency of the
event ``|beta_j / sigma| > a`` across draws acts as a posterior inclusion
probability.  Each draw uses its own sigma, so the statistic is invariant
to jointly rescaling (beta, sigma).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data import Dataset, TrueModel
from .priors import (
    Prior,
    SigmaPrior,
    prior_from_dict,
    prior_marginal_sd,
    prior_to_dict,
    solve_threshold,
)
from .sampler import ChainState, PosteriorDraws, SamplerConfig, run_chain


def inclusion_probabilities(draws: PosteriorDraws, a: float) -> np.ndarray:
    """q_j = fraction of draws with |beta_j / sigma| > a (per-draw sigma)."""
    if draws.kept < 1:
        raise ValueError("need at least one draw")
    sigma = np.sqrt(draws.sigma2)[:, None]
    return np.mean(np.abs(draws.beta) / sigma > a, axis=0)


@dataclass(frozen=True)
class SelectionReport:
    """Threshold, inclusion probabilities, selected model, sparsified mean."""

    a: float
    t: float
    q: np.ndarray
    selected: np.ndarray
    sparsified_mean: np.ndarray

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "t": self.t,
            "q": self.q,
            "selected": [int(j) for j in self.selected],
            "sparsified_mean": self.sparsified_mean,
        }


def select(draws: PosteriorDraws, prior: Prior, t: float = 0.5, *, u: float = 0.0) -> SelectionReport:
    """Select the coordinates whose inclusion probability exceeds t.

    The threshold solves tail_mass(prior, a) = p^-(1+u); u = 0 makes the
    sparsified prior's expected model size equal one.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError("t must lie in (0, 1]")
    p = draws.p
    target = p ** (-(1.0 + u))
    # p = 1 puts the target at the full prior mass, reached at threshold 0
    a = 0.0 if target >= 1.0 else solve_threshold(prior, target)
    q = inclusion_probabilities(draws, a)
    selected = np.flatnonzero(q > t)
    sigma = np.sqrt(draws.sigma2)[:, None]
    keep = np.abs(draws.beta) / sigma > a
    sparsified_mean = np.mean(draws.beta * keep, axis=0)
    return SelectionReport(a=a, t=t, q=q, selected=selected, sparsified_mean=sparsified_mean)


@dataclass(frozen=True)
class IntervalReport:
    """Per-coordinate empirical-quantile credible intervals."""

    alpha: float
    lower: np.ndarray
    upper: np.ndarray
    method: str = "empirical-quantile"

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "method": self.method,
            "lower": self.lower,
            "upper": self.upper,
        }


def credible_intervals(draws: PosteriorDraws, alpha: float) -> IntervalReport:
    """Nearest-rank empirical quantiles at alpha/2 and 1 - alpha/2.

    The nearest-rank (ceiling) convention makes the interval endpoints
    order statistics of the kept draws.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    m = draws.kept
    if m < 2:
        raise ValueError("need at least two draws")
    srt = np.sort(draws.beta, axis=0)
    lo_rank = max(1, math.ceil(0.5 * alpha * m))
    hi_rank = max(1, math.ceil((1.0 - 0.5 * alpha) * m))
    return IntervalReport(alpha=alpha, lower=srt[lo_rank - 1].copy(), upper=srt[hi_rank - 1].copy())


# ---------------------------------------------------------------------------
# Posterior-mean BIC tuning

# Floor on the residual mean square before the log; keeps a zero-residual
# state from producing -inf.
_RSS_FLOOR = 1e-300


def bic_score(state: ChainState, data: Dataset, a: float) -> float:
    """BIC of the sparsified coefficients of one state.

    Sparsifies beta_j to 0 unless |beta_j / sigma| > a, then returns
    n log(||y - X beta~||^2 / n) + ||beta~||_0 log n.
    """
    sigma = math.sqrt(state.sigma2)
    keep = np.abs(state.beta) / sigma > a
    btilde = np.where(keep, state.beta, 0.0)
    rss = float(np.sum((data.y - data.X @ btilde) ** 2))
    n = data.n
    return n * math.log(max(rss / n, _RSS_FLOOR)) + int(keep.sum()) * math.log(n)


def mean_bic(draws: PosteriorDraws, data: Dataset, a: float) -> float:
    """Posterior mean of the sparsified BIC over the kept draws (vectorized)."""
    sigma = np.sqrt(draws.sigma2)[:, None]
    btilde = np.where(np.abs(draws.beta) / sigma > a, draws.beta, 0.0)
    resid = data.y[None, :] - btilde @ data.X.T
    rss = np.sum(resid**2, axis=1)
    n = data.n
    sizes = np.count_nonzero(btilde, axis=1)
    scores = n * np.log(np.maximum(rss / n, _RSS_FLOOR)) + sizes * math.log(n)
    return float(np.mean(scores))


@dataclass
class TuningReport:
    """Grid, per-point posterior-mean BIC, and the winning gamma.

    The chain at the winning grid point is kept (``best_draws``) so callers
    can reuse it for selection and intervals without a re-run.
    """

    gammas: tuple[float, ...]
    mean_bic: tuple[float, ...]
    gamma_hat: float
    per_gamma_seeds: tuple[int, ...]
    errors: tuple[str | None, ...]
    best_index: int
    best_prior: Prior | None = field(default=None, repr=False)
    best_draws: PosteriorDraws | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "gammas": list(self.gammas),
            "mean_bic": list(self.mean_bic),
            "gamma_hat": self.gamma_hat,
            "best_index": self.best_index,
            "per_gamma_seeds": list(self.per_gamma_seeds),
            "errors": list(self.errors),
        }


def _tune_point(args) -> tuple[int, float, str | None, PosteriorDraws | None, dict | None]:
    idx, data, prior_dict, sp, config, gamma, u = args
    prior = prior_from_dict(prior_dict)
    try:
        draws = run_chain(data, prior, sp, config, gamma=gamma)
        a = solve_threshold(prior, draws.p ** (-(1.0 + u)))
        score = mean_bic(draws, data, a)
        return idx, score, None, draws, prior_dict
    except Exception as e:  # noqa: BLE001 - per-point failures are recorded
        return idx, math.nan, f"{type(e).__name__}: {e}", None, None


def tune_gamma(
    data: Dataset,
    prior_family,
    sp: SigmaPrior,
    grid,
    config: SamplerConfig,
    *,
    jobs: int = 1,
    u: float = 0.0,
) -> TuningReport:
    """Run one chain per grid point and pick the gamma minimizing mean BIC.

    ``prior_family`` is a callable ``(n, p, gamma) -> Prior``.  The chain
    at grid index i uses seed ``config.seed + i``, so parallel execution
    (``jobs > 1``) returns exactly the sequential result.  Failed grid
    points are recorded and excluded; all points failing is an error.
    Ties in the mean BIC resolve to the smaller gamma.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must be nonempty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be non-decreasing")
    seeds = [config.seed + i for i in range(len(grid))]
    tasks = []
    results: list[tuple[int, float, str | None, PosteriorDraws | None, dict | None]] = []
    for i, g in enumerate(grid):
        try:
            prior_dict = prior_to_dict(prior_family(data.n, data.p, g))
        except Exception as e:  # noqa: BLE001 - per-point failures are recorded
            results.append((i, math.nan, f"{type(e).__name__}: {e}", None, None))
            continue
        tasks.append((i, data, prior_dict, sp, replace(config, seed=seeds[i]), g, u))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results.extend(ex.map(_tune_point, tasks))
    else:
        results.extend(_tune_point(t) for t in tasks)
    results.sort(key=lambda r: r[0])

    scores = [r[1] for r in results]
    errors = [r[2] for r in results]
    finite = [i for i, s in enumerate(scores) if math.isfinite(s)]
    if not finite:
        raise RuntimeError(f"all grid points failed: {errors}")
    best = min(finite, key=lambda i: (scores[i], grid[i]))
    return TuningReport(
        gammas=tuple(grid),
        mean_bic=tuple(scores),
        gamma_hat=grid[best],
        per_gamma_seeds=tuple(seeds),
        errors=tuple(errors),
        best_index=best,
        best_prior=prior_from_dict(results[best][4]),
        best_draws=results[best][3],
    )


# ---------------------------------------------------------------------------
# Oracle least squares and normal-shape diagnostics


@dataclass(frozen=True)
class OracleFit:
    """Least squares restricted to a support set."""

    support: np.ndarray
    beta_hat: np.ndarray
    sigma2_hat: float
    cov: np.ndarray

    def to_dict(self) -> dict:
        return {
            "support": [int(j) for j in self.support],
            "beta_hat": self.beta_hat,
            "sigma2_hat": self.sigma2_hat,
            "cov": self.cov,
        }


def oracle_ols(data: Dataset, support) -> OracleFit:
    """OLS of y on the columns in ``support``.

    ``sigma2_hat`` is the residual mean square on n - |support| degrees of
    freedom (0 for a saturated fit).  Raises on rank deficiency.
    """
    support = np.asarray(sorted(int(j) for j in support), dtype=int)
    if support.size == 0:
        raise ValueError("support must be nonempty")
    if support.size > data.n:
        raise ValueError("support larger than the sample size")
    Xs = data.X[:, support]
    gram = Xs.T @ Xs
    try:
        c = cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as e:
        raise ValueError(f"singular design on support {support.tolist()}") from e
    beta_hat = cho_solve(c, Xs.T @ data.y)
    resid = data.y - Xs @ beta_hat
    dof = data.n - support.size
    sigma2_hat = float(resid @ resid) / dof if dof > 0 else 0.0
    gram_inv = cho_solve(c, np.eye(support.size))
    return OracleFit(support=support, beta_hat=beta_hat, sigma2_hat=sigma2_hat, cov=sigma2_hat * gram_inv)


@dataclass(frozen=True)
class BvmCoordinate:
    index: int
    posterior_mean: float
    posterior_sd: float
    oracle_mle: float
    oracle_sd: float
    sd_ratio: float
    ks_distance: float
    degenerate: bool

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "posterior_mean": self.posterior_mean,
            "posterior_sd": self.posterior_sd,
            "oracle_mle": self.oracle_mle,
            "oracle_sd": self.oracle_sd,
            "sd_ratio": self.sd_ratio,
            "ks_distance": self.ks_distance,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class BvmReport:
    """Posterior shape versus the oracle least-squares limit.

    For each true-support coordinate the draws are standardized by their
    own mean and standard deviation and compared with the standard normal
    (Kolmogorov-Smirnov distance); the scale match is reported separately
    as posterior sd / oracle sd.  Off-support coordinates are compared
    with the prior's marginal sd, which is what their posterior should
    revert to (None when the prior has no finite sd).
    """

    on_support: tuple[BvmCoordinate, ...]
    off_support_indices: np.ndarray
    off_support_posterior_sd: np.ndarray
    prior_marginal_sd: float | None
    sigma2_hat: float

    def to_dict(self) -> dict:
        return {
            "on_support": [c.to_dict() for c in self.on_support],
            "off_support_indices": [int(j) for j in self.off_support_indices],
            "off_support_posterior_sd": self.off_support_posterior_sd,
            "prior_marginal_sd": self.prior_marginal_sd,
            "sigma2_hat": self.sigma2_hat,
        }


_DEGENERATE_REL_SD = 1e-7


def bvm_diagnostics(draws: PosteriorDraws, data: Dataset, truth: TrueModel) -> BvmReport:
    """Compare the posterior of the true-support coordinates with the oracle."""
    from scipy.stats import kstest

    if draws.kept < 100:
        raise ValueError("need at least 100 kept draws for shape diagnostics")
    xi = truth.xi_star
    if xi.size == 0:
        raise ValueError("truth has empty support")
    fit = oracle_ols(data, xi)

    coords = []
    for k, j in enumerate(xi):
        b = draws.beta[:, j]
        mean = float(np.mean(b))
        sd = float(np.std(b, ddof=1))
        osd = float(math.sqrt(fit.cov[k, k]))
        # near-constant draws (noise-free degenerate fits) make the shape
        # statistics meaningless; keep them but flag the coordinate
        degenerate = sd < _DEGENERATE_REL_SD * max(1.0, abs(mean)) or osd < 1e-12
        std = (b - mean) / sd if sd > 0 else np.zeros_like(b)
        ks = float(kstest(std, "norm").statistic)
        coords.append(
            BvmCoordinate(
                index=int(j),
                posterior_mean=mean,
                posterior_sd=sd,
                oracle_mle=float(fit.beta_hat[k]),
                oracle_sd=osd,
                sd_ratio=sd / osd if osd > 0 else math.inf,
                ks_distance=ks,
                degenerate=degenerate,
            )
        )

    off = np.setdiff1d(np.arange(draws.p), xi)
    off_sd = np.std(draws.beta[:, off], axis=0, ddof=1) if off.size else np.empty(0)
    prior = prior_from_dict(draws.meta["prior"]) if "prior" in draws.meta else None
    psd = prior_marginal_sd(prior) if prior is not None else None
    return BvmReport(
        on_support=tuple(coords),
        off_support_indices=off,
        off_support_posterior_sd=off_sd,
        prior_marginal_sd=psd,
        sigma2_hat=fit.sigma2_hat,
    )


# ---------------------------------------------------------------------------
# Replicate metrics


@dataclass(frozen=True)
class Metrics:
    """Estimation, selection, and interval metrics against known truth."""

    l1_true: float
    l1_false: float
    n_true_selected: float
    n_false_selected: float
    coverage_true: float
    coverage_false: float
    length_true: float
    length_false: float

    FIELDS = (
        "l1_true",
        "l1_false",
        "n_true_selected",
        "n_false_selected",
        "coverage_true",
        "coverage_false",
        "length_true",
        "length_false",
    )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


def evaluate_metrics(
    report: SelectionReport,
    intervals: IntervalReport,
    draws: PosteriorDraws,
    truth: TrueModel,
) -> Metrics:
    """Score a posterior against the generating truth.

    L1 errors use the posterior mean as point estimator, split into the
    true-support and off-support coordinate groups; coverage is the
    fraction of true-support intervals containing beta*_j and off-support
    intervals containing 0.
    """
    xi = truth.xi_star
    p = draws.p
    on = np.zeros(p, dtype=bool)
    on[xi] = True
    post_mean = np.mean(draws.beta, axis=0)

    l1_true = float(np.sum(np.abs(truth.beta_star[on] - post_mean[on])))
    l1_false = float(np.sum(np.abs(post_mean[~on])))
    sel = np.zeros(p, dtype=bool)
    sel[report.selected] = True
    n_true_sel = float(np.count_nonzero(sel & on))
    n_false_sel = float(np.count_nonzero(sel & ~on))

    lo, hi = intervals.lower, intervals.upper
    cov_true = (
        float(np.mean((lo[on] <= truth.beta_star[on]) & (truth.beta_star[on] <= hi[on])))
        if on.any()
        else math.nan
    )
    cov_false = (
        float(np.mean((lo[~on] <= 0.0) & (0.0 <= hi[~on]))) if (~on).any() else math.nan
    )
    len_true = float(np.mean(hi[on] - lo[on])) if on.any() else math.nan
    len_false = float(np.mean(hi[~on] - lo[~on])) if (~on).any() else math.nan
    return Metrics(
        l1_true=l1_true,
        l1_false=l1_false,
        n_true_selected=n_true_sel,
        n_false_selected=n_false_sel,
        coverage_true=cov_true,
        coverage_false=cov_false,
        length_true=len_true,
        length_false=len_false,
    )

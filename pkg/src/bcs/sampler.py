"""Conjugate Gibbs kernels and chain orchestration.

One sweep updates, in order: the per-coordinate latent scales, the
coefficient vector block by block, and the noise variance.  The
coefficient update exploits the precision structure (X^T X + Lambda) /
sigma^2: conditioning a block of size d on the rest only needs a d x d
factorization plus the residual of the other blocks, so a full sweep with
d ~ (n p)^(1/3) costs O(n^(2/3) p^(5/3)) instead of the O(p^3) full
factorize-and-solve.  Per-block Gram matrices are precomputed once per
chain (the design is fixed), and the running residual r = y - X beta is
maintained incrementally and refreshed once per sweep.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from . import __version__
from .data import Dataset
from .priors import (
    Laplace,
    MixtureGaussian,
    Prior,
    SigmaPrior,
    StudentT,
    log_density,
    prior_from_dict,
    prior_to_dict,
)
from .rng import CHAIN_STREAM, make_rng
from .serialize import format_float

# Smallest |beta_j| used in the inverse-Gaussian mean of the double
# exponential latent update; the exact-zero event has probability zero and
# the clamp only prevents overflow.
BETA_CLAMP = 1e-12


class SamplerError(RuntimeError):
    """Raised when a chain reaches a non-finite state."""


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, thinning, block size, and seed.

    ``block_size=None`` resolves to d = ceil((n p)^(1/3)), the size that
    balances the per-block factorization against the residual products.
    """

    burn_in: int = 5000
    iterations: int = 40000
    thin: int = 40
    block_size: int | None = None
    seed: int = 0
    permute_blocks: bool = False
    record_latents: bool = False

    def __post_init__(self) -> None:
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.iterations // self.thin < 1:
            raise ValueError("iterations must allow at least one kept draw")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be >= 1")

    @property
    def kept(self) -> int:
        return self.iterations // self.thin

    def resolve_block_size(self, n: int, p: int) -> int:
        if self.block_size is not None:
            return min(self.block_size, p)
        return min(p, math.ceil((n * p) ** (1.0 / 3.0)))

    def to_dict(self) -> dict:
        return {
            "burn_in": self.burn_in,
            "iterations": self.iterations,
            "thin": self.thin,
            "block_size": self.block_size,
            "seed": self.seed,
            "permute_blocks": self.permute_blocks,
            "record_latents": self.record_latents,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(
            burn_in=int(d["burn_in"]),
            iterations=int(d["iterations"]),
            thin=int(d["thin"]),
            block_size=None if d.get("block_size") is None else int(d["block_size"]),
            seed=int(d["seed"]),
            permute_blocks=bool(d.get("permute_blocks", False)),
            record_latents=bool(d.get("record_latents", False)),
        )


@dataclass
class ChainState:
    """One Gibbs state: coefficients, noise variance, and latent scales.

    ``lambda2`` holds the per-coordinate prior variances of beta/sigma.
    For the mixture prior it equals sigma0^2 or sigma1^2 according to the
    slab indicators ``z`` and is kept in sync with them.
    """

    beta: np.ndarray
    sigma2: float
    lambda2: np.ndarray
    z: np.ndarray | None = None

    def validate(self) -> None:
        if self.sigma2 <= 0 or not math.isfinite(self.sigma2):
            raise ValueError("sigma2 must be finite and > 0")
        if np.any(self.lambda2 <= 0) or not np.all(np.isfinite(self.lambda2)):
            raise ValueError("lambda2 entries must be finite and > 0")

    def copy(self) -> "ChainState":
        return ChainState(
            beta=self.beta.copy(),
            sigma2=float(self.sigma2),
            lambda2=self.lambda2.copy(),
            z=None if self.z is None else self.z.copy(),
        )


def init_state(data: Dataset, prior: Prior) -> ChainState:
    """Deterministic over-dispersed start: beta = 0, sigma2 = var(y)."""
    p = data.p
    sigma2 = max(float(np.var(data.y, ddof=1)), 1e-12)
    z = None
    if isinstance(prior, StudentT):
        lambda2 = np.full(p, prior.s_n)
    elif isinstance(prior, Laplace):
        # Prior mean of the exponential mixing law on lambda_j^2.
        lambda2 = np.full(p, 2.0 / prior.lam**2)
    elif isinstance(prior, MixtureGaussian):
        z = np.zeros(p, dtype=np.int8)
        lambda2 = np.full(p, prior.sigma0**2)
    else:
        raise TypeError(f"not a prior: {prior!r}")
    return ChainState(beta=np.zeros(p), sigma2=sigma2, lambda2=lambda2, z=z)


# ---------------------------------------------------------------------------
# Full conditionals


def sigma2_full_conditional(
    state: ChainState, data: Dataset, sp: SigmaPrior
) -> tuple[float, float]:
    """Inverse-gamma parameters (shape, rate) of sigma^2 given the rest."""
    if state.beta.shape[0] != data.p:
        raise ValueError("state dimension does not match data")
    resid = data.y - data.X @ state.beta
    shape = sp.a0 + (data.n + data.p) / 2.0
    rate = sp.b0 + 0.5 * float(resid @ resid) + 0.5 * float(
        np.sum(state.beta**2 / state.lambda2)
    )
    return shape, rate


def beta_full_conditional(
    state: ChainState, data: Dataset
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian full conditional of beta: returns (mean, precision K).

    K = (X^T X + Lambda) / sigma^2 with Lambda = diag(1 / lambda_j^2); the
    mean K^{-1} X^T y / sigma^2 reduces to (X^T X + Lambda)^{-1} X^T y.
    """
    X, y = data.X, data.y
    A = X.T @ X + np.diag(1.0 / state.lambda2)
    c, low = _cho(A)
    mean = cho_solve((c, low), X.T @ y, check_finite=False)
    K = A / state.sigma2
    return mean, K


def _cho(A: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        return cholesky(A, lower=True, check_finite=False), True
    except np.linalg.LinAlgError as e:  # pragma: no cover - signals input bugs
        raise SamplerError(f"Cholesky factorization failed: {e}") from e


def sample_beta_full(state: ChainState, data: Dataset, rng: np.random.Generator) -> np.ndarray:
    """Draw beta from its full conditional via one p x p factorization."""
    X, y = data.X, data.y
    A = X.T @ X + np.diag(1.0 / state.lambda2)
    L, _ = _cho(A)
    w = solve_triangular(L, X.T @ y, lower=True, check_finite=False)
    noise = rng.standard_normal(data.p)
    beta = solve_triangular(
        L, w + math.sqrt(state.sigma2) * noise, lower=True, trans=1, check_finite=False
    )
    state.beta = beta
    return beta


def beta_block_update(
    state: ChainState,
    data: Dataset,
    block: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one coefficient block conditional on the others, in place.

    The block's conditional is N((Xb^T Xb + Lambda_b)^{-1} Xb^T r,
    sigma^2 (Xb^T Xb + Lambda_b)^{-1}) with r the response minus the
    contribution of every other coordinate.
    """
    block = np.asarray(block, dtype=int)
    if block.size == 0:
        raise ValueError("block must be nonempty")
    if block.min() < 0 or block.max() >= data.p:
        raise ValueError("block indices out of range")
    Xb = data.X[:, block]
    r_excl = data.y - data.X @ state.beta + Xb @ state.beta[block]
    A = Xb.T @ Xb + np.diag(1.0 / state.lambda2[block])
    L, _ = _cho(A)
    w = solve_triangular(L, Xb.T @ r_excl, lower=True, check_finite=False)
    noise = rng.standard_normal(block.size)
    new = solve_triangular(
        L, w + math.sqrt(state.sigma2) * noise, lower=True, trans=1, check_finite=False
    )
    state.beta[block] = new
    return new


def block_conditional(
    state: ChainState, data: Dataset, block: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional (mean, covariance) of a block given the other coordinates."""
    block = np.asarray(block, dtype=int)
    Xb = data.X[:, block]
    r_excl = data.y - data.X @ state.beta + Xb @ state.beta[block]
    A = Xb.T @ Xb + np.diag(1.0 / state.lambda2[block])
    c, low = _cho(A)
    mean = cho_solve((c, low), Xb.T @ r_excl, check_finite=False)
    cov = state.sigma2 * cho_solve((c, low), np.eye(block.size), check_finite=False)
    return mean, cov


# ---------------------------------------------------------------------------
# Latent updates


def latent_update_student_t(
    state: ChainState, prior: StudentT, rng: np.random.Generator
) -> np.ndarray:
    """lambda_j^2 ~ IG(a1 + 1/2, s_n + beta_j^2 / (2 sigma^2)), independently."""
    rate = prior.s_n + 0.5 * state.beta**2 / state.sigma2
    state.lambda2 = rate / rng.gamma(prior.a1 + 0.5, 1.0, size=state.beta.shape[0])
    return state.lambda2


def inverse_gaussian(
    mean: np.ndarray, shape: float, rng: np.random.Generator
) -> np.ndarray:
    """Inverse-Gaussian draws, stable for arbitrarily large mean/shape ratios.

    Uses the Michael-Schucany-Haas transform with the smaller root written
    in rationalized form 2 mean / (w + 2 + sqrt(w (w + 4))), w = mean nu /
    shape, which avoids the catastrophic cancellation that makes the
    textbook expression (and ``Generator.wald``) return zero or negative
    draws when mean >> shape.
    """
    mean = np.asarray(mean, dtype=float)
    nu = rng.standard_normal(mean.shape) ** 2
    w = mean * nu / shape
    x = 2.0 * mean / (w + 2.0 + np.sqrt(w * (w + 4.0)))
    u = rng.random(mean.shape)
    return np.where(u * (mean + x) <= mean, x, mean * mean / x)


def latent_update_laplace(
    state: ChainState, prior: Laplace, rng: np.random.Generator
) -> np.ndarray:
    """1/lambda_j^2 ~ InverseGaussian(sqrt(lam^2 sigma^2 / beta_j^2), lam^2)."""
    lam2 = prior.lam**2
    absb = np.maximum(np.abs(state.beta), BETA_CLAMP)
    mean = np.sqrt(lam2 * state.sigma2) / absb
    inv = inverse_gaussian(mean, lam2, rng)
    state.lambda2 = 1.0 / inv
    return state.lambda2


def latent_update_mixture(
    state: ChainState, prior: MixtureGaussian, rng: np.random.Generator
) -> np.ndarray:
    """Slab indicators z_j ~ Bernoulli(w_j) with w_j computed in log space."""
    from scipy.special import expit

    b = state.beta / math.sqrt(state.sigma2)
    with np.errstate(divide="ignore"):
        log_slab = (
            (math.log(prior.m1) if prior.m1 > 0 else -math.inf)
            - math.log(prior.sigma1)
            - 0.5 * (b / prior.sigma1) ** 2
        )
        log_spike = (
            (math.log(1.0 - prior.m1) if prior.m1 < 1 else -math.inf)
            - math.log(prior.sigma0)
            - 0.5 * (b / prior.sigma0) ** 2
        )
    w = expit(log_slab - log_spike)
    z = (rng.random(b.shape[0]) < w).astype(np.int8)
    state.z = z
    state.lambda2 = np.where(z == 1, prior.sigma1**2, prior.sigma0**2)
    return z


def mixture_slab_probability(prior: MixtureGaussian, b: float | np.ndarray) -> float | np.ndarray:
    """w(b) = P(slab | beta/sigma = b) for the mixture prior."""
    from scipy.special import expit

    arr = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore"):
        log_slab = (
            (math.log(prior.m1) if prior.m1 > 0 else -math.inf)
            - math.log(prior.sigma1)
            - 0.5 * (arr / prior.sigma1) ** 2
        )
        log_spike = (
            (math.log(1.0 - prior.m1) if prior.m1 < 1 else -math.inf)
            - math.log(prior.sigma0)
            - 0.5 * (arr / prior.sigma0) ** 2
        )
    w = expit(log_slab - log_spike)
    return float(w) if arr.ndim == 0 else w


def _update_latents(state: ChainState, prior: Prior, rng: np.random.Generator) -> None:
    if isinstance(prior, StudentT):
        latent_update_student_t(state, prior, rng)
    elif isinstance(prior, Laplace):
        latent_update_laplace(state, prior, rng)
    else:
        latent_update_mixture(state, prior, rng)


# ---------------------------------------------------------------------------
# Log posterior


def log_posterior(state: ChainState, data: Dataset, prior: Prior, sp: SigmaPrior) -> float:
    """Unnormalized log posterior of (beta, sigma^2)."""
    sigma = math.sqrt(state.sigma2)
    rss = float(np.sum((data.y - data.X @ state.beta) ** 2))
    lp = float(np.sum(log_density(prior, state.beta / sigma)))
    lp -= (data.n / 2.0 + data.p / 2.0 + sp.a0 + 1.0) * math.log(state.sigma2)
    lp -= (2.0 * sp.b0 + rss) / (2.0 * state.sigma2)
    return lp


# ---------------------------------------------------------------------------
# Chain driver


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in states stacked into arrays.

    ``beta`` has shape (kept, p) and ``sigma2`` shape (kept,); latent
    draws are stored only when the chain was run with
    ``record_latents=True``.
    """

    beta: np.ndarray
    sigma2: np.ndarray
    meta: dict
    lambda2: np.ndarray | None = None
    z: np.ndarray | None = None
    iters: np.ndarray | None = field(default=None)

    @property
    def kept(self) -> int:
        return self.beta.shape[0]

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    def __len__(self) -> int:
        return self.kept

    def state(self, i: int) -> ChainState:
        lam2 = self.lambda2[i] if self.lambda2 is not None else np.ones(self.p)
        return ChainState(
            beta=self.beta[i].copy(),
            sigma2=float(self.sigma2[i]),
            lambda2=lam2.copy(),
            z=None if self.z is None else self.z[i].copy(),
        )

    def __iter__(self) -> Iterator[ChainState]:
        for i in range(self.kept):
            yield self.state(i)


def run_chain(
    data: Dataset,
    prior: Prior,
    sp: SigmaPrior,
    config: SamplerConfig,
    *,
    gamma: float | None = None,
) -> PosteriorDraws:
    """Run one Gibbs chain and return the thinned draws.

    Each sweep applies latent updates, a blockwise coefficient sweep over
    fixed consecutive blocks, and the noise variance update.  The state is
    checked for finiteness every sweep; a non-finite value aborts with a
    diagnostic rather than silently continuing.  Output is a pure function
    of (data, prior, sp, config).
    """
    if data.n < 2:
        raise ValueError("fitting requires n >= 2")
    n, p = data.n, data.p
    X, y = data.X, data.y
    rng = make_rng(config.seed, CHAIN_STREAM)
    d = config.resolve_block_size(n, p)

    slices = [slice(a, min(a + d, p)) for a in range(0, p, d)]
    xb = [X[:, s] for s in slices]
    grams = [b.T @ b for b in xb]

    state = init_state(data, prior)
    kept = config.kept
    beta_out = np.empty((kept, p))
    sigma2_out = np.empty(kept)
    iters_out = np.empty(kept, dtype=int)
    lambda2_out = np.empty((kept, p)) if config.record_latents else None
    z_out = (
        np.empty((kept, p), dtype=np.int8)
        if config.record_latents and isinstance(prior, MixtureGaussian)
        else None
    )

    a0, b0 = sp.a0, sp.b0
    shape_sigma = a0 + (n + p) / 2.0
    r = y - X @ state.beta
    total = config.burn_in + config.iterations
    k = 0
    nblocks = len(slices)
    for sweep in range(1, total + 1):
        _update_latents(state, prior, rng)

        beta = state.beta
        lam2 = state.lambda2
        sigma = math.sqrt(state.sigma2)
        order = rng.permutation(nblocks) if config.permute_blocks else range(nblocks)
        for bi in order:
            s = slices[bi]
            Xb = xb[bi]
            db = s.stop - s.start
            r += Xb @ beta[s]
            A = grams[bi] + np.diag(1.0 / lam2[s])
            L, _ = _cho(A)
            w = solve_triangular(L, Xb.T @ r, lower=True, check_finite=False)
            new = solve_triangular(
                L,
                w + sigma * rng.standard_normal(db),
                lower=True,
                trans=1,
                check_finite=False,
            )
            beta[s] = new
            r -= Xb @ new

        # Refresh the residual to stop incremental rounding drift.
        r = y - X @ beta
        rate = b0 + 0.5 * float(r @ r) + 0.5 * float(np.sum(beta**2 / lam2))
        state.sigma2 = rate / rng.gamma(shape_sigma)

        if not (
            math.isfinite(state.sigma2)
            and state.sigma2 > 0
            and np.all(np.isfinite(beta))
            and np.all(np.isfinite(lam2))
        ):
            raise SamplerError(f"non-finite state at sweep {sweep}")

        post = sweep - config.burn_in
        if post >= 1 and post % config.thin == 0:
            beta_out[k] = beta
            sigma2_out[k] = state.sigma2
            iters_out[k] = sweep
            if lambda2_out is not None:
                lambda2_out[k] = lam2
            if z_out is not None and state.z is not None:
                z_out[k] = state.z
            k += 1

    meta = {
        "version": __version__,
        "n": n,
        "p": p,
        "burn_in": config.burn_in,
        "iterations": config.iterations,
        "thin": config.thin,
        "kept": kept,
        "block_size": d,
        "permute_blocks": config.permute_blocks,
        "record_latents": config.record_latents,
        "seed": config.seed,
        "prior": prior_to_dict(prior),
        "sigma_prior": sp.to_dict(),
    }
    if gamma is not None:
        meta["gamma"] = float(gamma)
    return PosteriorDraws(
        beta=beta_out,
        sigma2=sigma2_out,
        meta=meta,
        lambda2=lambda2_out,
        z=z_out,
        iters=iters_out,
    )


# ---------------------------------------------------------------------------
# Chain persistence


def save_chain(draws: PosteriorDraws, csv_path: str | Path, *, dump_latents: bool = False) -> Path:
    """Write kept draws to CSV plus a JSON meta sidecar; returns the sidecar path.

    Columns are ``iter, sigma2, beta_0 .. beta_{p-1}``; with
    ``dump_latents`` the recorded latent columns are appended.
    """
    from .serialize import dump_json

    csv_path = Path(csv_path)
    p = draws.p
    cols = ["iter", "sigma2"] + [f"beta_{j}" for j in range(p)]
    dump_lam = dump_latents and draws.lambda2 is not None
    dump_z = dump_latents and draws.z is not None
    if dump_lam:
        cols += [f"lambda2_{j}" for j in range(p)]
    if dump_z:
        cols += [f"z_{j}" for j in range(p)]
    iters = (
        draws.iters
        if draws.iters is not None
        else np.arange(1, draws.kept + 1) * draws.meta.get("thin", 1)
    )
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for i in range(draws.kept):
            row = [str(int(iters[i])), format_float(draws.sigma2[i])]
            row += [format_float(v) for v in draws.beta[i]]
            if dump_lam:
                row += [format_float(v) for v in draws.lambda2[i]]
            if dump_z:
                row += [str(int(v)) for v in draws.z[i]]
            writer.writerow(row)
    meta_path = csv_path.with_suffix(".meta.json")
    dump_json(draws.meta, meta_path)
    return meta_path


def load_chain(csv_path: str | Path, meta_path: str | Path | None = None) -> PosteriorDraws:
    """Read a chain dump written by :func:`save_chain`."""
    import json

    csv_path = Path(csv_path)
    if meta_path is None:
        meta_path = csv_path.with_suffix(".meta.json")
    meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
    with csv_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    p = sum(1 for h in header if h.startswith("beta_"))
    has_lam = any(h.startswith("lambda2_") for h in header)
    has_z = any(h.startswith("z_") for h in header)
    kept = len(rows)
    beta = np.empty((kept, p))
    sigma2 = np.empty(kept)
    iters = np.empty(kept, dtype=int)
    lam2 = np.empty((kept, p)) if has_lam else None
    z = np.empty((kept, p), dtype=np.int8) if has_z else None
    for i, row in enumerate(rows):
        iters[i] = int(row[0])
        sigma2[i] = float(row[1])
        beta[i] = [float(v) for v in row[2 : 2 + p]]
        off = 2 + p
        if has_lam:
            lam2[i] = [float(v) for v in row[off : off + p]]
            off += p
        if has_z:
            z[i] = [int(v) for v in row[off : off + p]]
    return PosteriorDraws(beta=beta, sigma2=sigma2, meta=meta, lambda2=lam2, z=z, iters=iters)


# ---------------------------------------------------------------------------
# Benchmark


def benchmark_beta_sweep(
    n: int,
    p: int,
    d_values: list[int | None],
    *,
    sweeps: int = 10,
    seed: int = 0,
) -> dict:
    """Median wall time of one full coefficient sweep for each block size.

    ``None`` in ``d_values`` means the auto size ceil((n p)^(1/3)); ``p``
    gives the full factorize-and-solve update.  The same synthetic
    instance and latent scales are used for every block size.
    """
    rng = make_rng(seed, CHAIN_STREAM)
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    lam2 = np.ones(p)
    results = {}
    for d_req in d_values:
        d = min(p, math.ceil((n * p) ** (1.0 / 3.0))) if d_req is None else min(int(d_req), p)
        slices = [slice(a, min(a + d, p)) for a in range(0, p, d)]
        xb = [X[:, s] for s in slices]
        grams = [b.T @ b for b in xb]
        beta = np.zeros(p)
        r = y - X @ beta
        times = []
        for _ in range(sweeps):
            t0 = time.perf_counter()
            for bi, s in enumerate(slices):
                Xb = xb[bi]
                r += Xb @ beta[s]
                A = grams[bi] + np.diag(1.0 / lam2[s])
                L = cholesky(A, lower=True, check_finite=False)
                w = solve_triangular(L, Xb.T @ r, lower=True, check_finite=False)
                new = solve_triangular(
                    L,
                    w + rng.standard_normal(s.stop - s.start),
                    lower=True,
                    trans=1,
                    check_finite=False,
                )
                beta[s] = new
                r -= Xb @ new
            times.append(time.perf_counter() - t0)
        results[f"d={d}"] = {
            "block_size": d,
            "median_seconds": float(np.median(times)),
        }
    return results

"""End-to-end benchmark harness: replicated scenarios and the small
high-dimensional walkthrough instance.

A scenario is a fully specified experiment: instance sizes, covariance
structure, ground truth, prior family, tuning grid, sampler protocol, and
seeds.  Replicate r depends only on (spec, base_seed + r), so replicates
can run in parallel on any number of workers with identical results, and
a single replicate can be reproduced in isolation.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import CovStructure, Dataset, TrueModel, generate_dataset
from .inference import (
    IntervalReport,
    Metrics,
    OracleFit,
    SelectionReport,
    TuningReport,
    bvm_diagnostics,
    credible_intervals,
    evaluate_metrics,
    oracle_ols,
    select,
    tune_gamma,
)
from .priors import Laplace, SigmaPrior, student_t_family
from .sampler import PosteriorDraws, SamplerConfig, run_chain, save_chain
from .serialize import dump_json, format_float, sha256_file

STUDENT_T = "student-t"
BAYESIAN_LASSO = "laplace"


def gamma_grid(start: float = -0.25, stop: float = 1.1, step: float = 0.05) -> tuple[float, ...]:
    """Evenly spaced gamma grid with exact decimal endpoints."""
    scale = 10000
    a, b, h = round(start * scale), round(stop * scale), round(step * scale)
    if h <= 0 or b < a:
        raise ValueError("need step > 0 and stop >= start")
    return tuple(k / scale for k in range(a, b + 1, h))


def bayesian_lasso_rate(n: int, p: int) -> float:
    """The fixed double-exponential rate sqrt(n log p) used for comparisons."""
    return math.sqrt(n * math.log(p))


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to reproduce one replicated experiment."""

    n: int
    p: int
    cov: CovStructure
    truth: TrueModel
    prior_family: str
    gamma_grid: tuple[float, ...] | None
    replicates: int
    base_seed: int
    sampler: SamplerConfig
    intercept: bool = False
    a1: float = 1.5
    lam: float | None = None
    alpha: float = 0.05
    t: float = 0.5
    u: float = 0.0
    sigma_prior: SigmaPrior = field(default_factory=SigmaPrior)

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.prior_family not in (STUDENT_T, BAYESIAN_LASSO):
            raise ValueError(f"unknown prior family: {self.prior_family!r}")
        if self.prior_family == STUDENT_T:
            if not self.gamma_grid:
                raise ValueError("student-t scenarios need a gamma grid")
            g = self.gamma_grid
            if any(b < a for a, b in zip(g, g[1:])):
                raise ValueError("gamma grid must be non-decreasing")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "cov": self.cov.to_dict(),
            "truth": self.truth.to_dict(),
            "prior_family": self.prior_family,
            "gamma_grid": None if self.gamma_grid is None else list(self.gamma_grid),
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "sampler": self.sampler.to_dict(),
            "intercept": self.intercept,
            "a1": self.a1,
            "lam": self.lam,
            "alpha": self.alpha,
            "t": self.t,
            "u": self.u,
            "sigma_prior": self.sigma_prior.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            n=int(d["n"]),
            p=int(d["p"]),
            cov=CovStructure.from_dict(d["cov"]),
            truth=TrueModel.from_dict(d["truth"]),
            prior_family=d["prior_family"],
            gamma_grid=None if d.get("gamma_grid") is None else tuple(float(g) for g in d["gamma_grid"]),
            replicates=int(d["replicates"]),
            base_seed=int(d["base_seed"]),
            sampler=SamplerConfig.from_dict(d["sampler"]),
            intercept=bool(d.get("intercept", False)),
            a1=float(d.get("a1", 1.5)),
            lam=None if d.get("lam") is None else float(d["lam"]),
            alpha=float(d.get("alpha", 0.05)),
            t=float(d.get("t", 0.5)),
            u=float(d.get("u", 0.0)),
            sigma_prior=SigmaPrior.from_dict(d.get("sigma_prior", {"a0": 1.0, "b0": 1.0})),
        )


@dataclass(frozen=True)
class ReplicateResult:
    r: int
    seed: int
    gamma_hat: float | None
    metrics: Metrics


@dataclass
class ScenarioResult:
    """Per-replicate metrics plus their mean/SE aggregates.

    ``wall_clock`` is informational only and is never persisted, so that
    result files are byte-reproducible.
    """

    spec: ScenarioSpec
    replicates: tuple[ReplicateResult, ...]
    aggregates: dict
    failures: dict[int, str]
    wall_clock: dict = field(default_factory=dict)


def run_replicate(spec: ScenarioSpec, r: int) -> ReplicateResult:
    """Run replicate r of a scenario (pure function of (spec, base_seed + r))."""
    seed = spec.base_seed + r
    data = generate_dataset(spec.n, spec.p, spec.cov, spec.truth, seed, intercept=spec.intercept)
    config = replace(spec.sampler, seed=seed)
    sp = spec.sigma_prior
    if spec.prior_family == STUDENT_T:
        report = tune_gamma(
            data, student_t_family(spec.a1), sp, spec.gamma_grid, config, jobs=1, u=spec.u
        )
        draws, prior, gamma_hat = report.best_draws, report.best_prior, report.gamma_hat
    else:
        lam = spec.lam if spec.lam is not None else bayesian_lasso_rate(spec.n, spec.p)
        prior = Laplace(lam)
        draws = run_chain(data, prior, sp, config)
        gamma_hat = None
    sel = select(draws, prior, spec.t, u=spec.u)
    ivl = credible_intervals(draws, spec.alpha)
    metrics = evaluate_metrics(sel, ivl, draws, spec.truth)
    return ReplicateResult(r=r, seed=seed, gamma_hat=gamma_hat, metrics=metrics)


def _replicate_worker(args: tuple[ScenarioSpec, int]):
    spec, r = args
    try:
        return r, run_replicate(spec, r), None
    except Exception as e:  # noqa: BLE001 - per-replicate failures are recorded
        return r, None, f"{type(e).__name__}: {e}"


def aggregate_metrics(rows: list[Metrics]) -> dict:
    """Mean and standard error (sd / sqrt(k)) per metric; SE is None for k = 1."""
    out: dict = {}
    k = len(rows)
    for name in Metrics.FIELDS:
        vals = np.array([getattr(m, name) for m in rows], dtype=float)
        mean = float(np.mean(vals)) if k else math.nan
        se = float(np.std(vals, ddof=1) / math.sqrt(k)) if k > 1 else None
        out[name] = {"mean": mean, "se": se}
    return out


def run_scenario(spec: ScenarioSpec, *, jobs: int = 1) -> ScenarioResult:
    """Run all replicates, in parallel when jobs > 1, and aggregate.

    Failed replicates are recorded by index with the error message and
    excluded from aggregation.  The result is independent of ``jobs``.
    """
    t0 = time.perf_counter()
    tasks = [(spec, r) for r in range(spec.replicates)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_replicate_worker, tasks))
    else:
        results = [_replicate_worker(t) for t in tasks]
    results.sort(key=lambda x: x[0])

    rows: list[ReplicateResult] = []
    failures: dict[int, str] = {}
    for r, res, err in results:
        if err is None:
            rows.append(res)
        else:
            failures[r] = err
    aggregates = aggregate_metrics([row.metrics for row in rows])
    return ScenarioResult(
        spec=spec,
        replicates=tuple(rows),
        aggregates=aggregates,
        failures=failures,
        wall_clock={"total_seconds": time.perf_counter() - t0},
    )


# ---------------------------------------------------------------------------
# Result persistence

_REPLICATE_HEADER = ("r", "seed", "gamma_hat") + Metrics.FIELDS


def persist(result: ScenarioResult, out_dir: str | Path) -> dict:
    """Write scenario.json, replicates.csv, aggregate.json, and a manifest.

    The manifest maps each emitted file to its SHA-256 content hash, so it
    changes exactly when some file's content changes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dump_json(result.spec.to_dict(), out / "scenario.json")

    with (out / "replicates.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_REPLICATE_HEADER)
        for row in result.replicates:
            rec = [str(row.r), str(row.seed)]
            rec.append("" if row.gamma_hat is None else format_float(row.gamma_hat))
            rec += [format_float(getattr(row.metrics, f)) for f in Metrics.FIELDS]
            writer.writerow(rec)

    dump_json(
        {
            "replicates": result.spec.replicates,
            "succeeded": len(result.replicates),
            "failures": {str(r): msg for r, msg in sorted(result.failures.items())},
            "metrics": result.aggregates,
        },
        out / "aggregate.json",
    )

    names = ["scenario.json", "replicates.csv", "aggregate.json"]
    manifest = {
        "version": __version__,
        "files": {name: sha256_file(out / name) for name in names},
    }
    dump_json(manifest, out / "manifest.json")
    return manifest


def load_result(out_dir: str | Path) -> ScenarioResult:
    """Read back a persisted scenario result, re-verifying the aggregates.

    Raises ``ValueError`` if the stored aggregates cannot be reproduced
    from the per-replicate rows.
    """
    import json

    out = Path(out_dir)
    spec = ScenarioSpec.from_dict(json.loads((out / "scenario.json").read_text(encoding="utf-8")))
    agg_doc = json.loads((out / "aggregate.json").read_text(encoding="utf-8"))

    rows: list[ReplicateResult] = []
    with (out / "replicates.csv").open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != _REPLICATE_HEADER:
            raise ValueError(f"unexpected replicates.csv header: {header}")
        for rec in reader:
            if not rec:
                continue
            metrics = Metrics(**{f: float(v) for f, v in zip(Metrics.FIELDS, rec[3:])})
            rows.append(
                ReplicateResult(
                    r=int(rec[0]),
                    seed=int(rec[1]),
                    gamma_hat=None if rec[2] == "" else float(rec[2]),
                    metrics=metrics,
                )
            )

    recomputed = aggregate_metrics([row.metrics for row in rows])
    stored = agg_doc["metrics"]
    for name in Metrics.FIELDS:
        for part in ("mean", "se"):
            a, b = recomputed[name][part], stored[name][part]
            if (a is None) != (b is None) or (a is not None and a != b and not (math.isnan(a) and math.isnan(b))):
                raise ValueError(f"aggregate {name}.{part} does not match the replicate rows")
    failures = {int(r): msg for r, msg in agg_doc.get("failures", {}).items()}
    return ScenarioResult(spec=spec, replicates=tuple(rows), aggregates=recomputed, failures=failures)


def evaluate_external_estimates(spec: ScenarioSpec, csv_path: str | Path) -> dict:
    """Score externally produced per-replicate point estimates.

    Competing estimators (regularization packages etc.) are not
    reimplemented here; instead their estimates can be dropped in as a CSV
    with columns ``r, beta_0 .. beta_{p-1}`` (one row per replicate index
    of ``spec``) and scored against the same ground truth for side-by-side
    tables.  Selection counts treat exact zeros as exclusion.  Returns
    {"replicates": rows, "metrics": aggregates} with interval metrics NaN
    (interval construction is estimator-specific).
    """
    path = Path(csv_path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "r" or len(header) != spec.p + 1:
            raise ValueError(
                f"{path}: expected header 'r, beta_0 .. beta_{spec.p - 1}'"
            )
        records = [(int(row[0]), np.asarray([float(v) for v in row[1:]])) for row in reader if row]

    xi = spec.truth.xi_star
    on = np.zeros(spec.p, dtype=bool)
    on[xi] = True
    rows = []
    metrics_rows = []
    for r, est in sorted(records, key=lambda t: t[0]):
        if not 0 <= r < spec.replicates:
            raise ValueError(f"{path}: replicate index {r} outside the spec")
        sel = est != 0.0
        m = Metrics(
            l1_true=float(np.sum(np.abs(spec.truth.beta_star[on] - est[on]))),
            l1_false=float(np.sum(np.abs(est[~on]))),
            n_true_selected=float(np.count_nonzero(sel & on)),
            n_false_selected=float(np.count_nonzero(sel & ~on)),
            coverage_true=math.nan,
            coverage_false=math.nan,
            length_true=math.nan,
            length_false=math.nan,
        )
        rows.append({"r": r, "metrics": m.to_dict()})
        metrics_rows.append(m)
    return {"replicates": rows, "metrics": aggregate_metrics(metrics_rows)}


# ---------------------------------------------------------------------------
# The p >> n walkthrough instance


TOY_N = 120
TOY_P = 200
TOY_SIGNALS = 4


def toy_truth() -> TrueModel:
    beta = np.zeros(TOY_P)
    beta[:TOY_SIGNALS] = 1.0
    return TrueModel(beta_star=beta, sigma_star=1.0)


@dataclass
class ToyResult:
    """Outputs of the walkthrough: tuning curve, posterior summaries, baselines."""

    data: Dataset
    truth: TrueModel
    tuning: TuningReport
    selection: SelectionReport
    intervals: IntervalReport
    oracle: OracleFit
    oracle_level: float
    oracle_lower: np.ndarray
    oracle_upper: np.ndarray
    lasso_draws: PosteriorDraws
    lasso_selection: SelectionReport
    best_draws: PosteriorDraws


def run_toy(
    out_dir: str | Path | None = None,
    *,
    seed: int = 0,
    jobs: int = 1,
    sampler: SamplerConfig | None = None,
    grid: tuple[float, ...] | None = None,
    a1: float = 1.5,
    oracle_level: float = 0.99,
) -> ToyResult:
    """Run the n=120, p=200, four-unit-signal walkthrough.

    Produces the posterior-mean BIC series over the gamma grid, the
    posterior at the winning gamma (draw dump, selection, intervals),
    oracle confidence intervals for the true covariates from the
    restricted least-squares fit, and a fixed-rate double-exponential
    baseline chain at sqrt(n log p) for the over-shrinkage comparison.
    """
    from scipy.stats import t as t_dist

    truth = toy_truth()
    data = generate_dataset(TOY_N, TOY_P, CovStructure.independent(), truth, seed)
    sp = SigmaPrior()
    config = sampler if sampler is not None else SamplerConfig(seed=seed)
    config = replace(config, seed=seed)
    grid = grid if grid is not None else gamma_grid()

    tuning = tune_gamma(data, student_t_family(a1), sp, grid, config, jobs=jobs)
    best_draws = tuning.best_draws
    selection = select(best_draws, tuning.best_prior)
    intervals = credible_intervals(best_draws, 0.05)

    support = truth.xi_star
    fit = oracle_ols(data, support)
    dof = data.n - support.size
    q = float(t_dist.ppf(0.5 + oracle_level / 2.0, dof))
    half = q * np.sqrt(np.diag(fit.cov))
    oracle_lower = fit.beta_hat - half
    oracle_upper = fit.beta_hat + half

    lasso_prior = Laplace(bayesian_lasso_rate(TOY_N, TOY_P))
    lasso_config = replace(config, seed=config.seed + len(grid))
    lasso_draws = run_chain(data, lasso_prior, sp, lasso_config)
    lasso_selection = select(lasso_draws, lasso_prior)

    result = ToyResult(
        data=data,
        truth=truth,
        tuning=tuning,
        selection=selection,
        intervals=intervals,
        oracle=fit,
        oracle_level=oracle_level,
        oracle_lower=oracle_lower,
        oracle_upper=oracle_upper,
        lasso_draws=lasso_draws,
        lasso_selection=lasso_selection,
        best_draws=best_draws,
    )
    if out_dir is not None:
        _persist_toy(result, Path(out_dir))
    return result


def write_tuning_csv(tuning: TuningReport, path: str | Path) -> None:
    """Two-column (gamma, mean_bic) series for plotting."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["gamma", "mean_bic"])
        for g, b in zip(tuning.gammas, tuning.mean_bic):
            writer.writerow([format_float(g), format_float(b)])


def _persist_toy(result: ToyResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_tuning_csv(result.tuning, out / "bic_curve.csv")
    dump_json(result.tuning.to_dict(), out / "tuning.json")
    dump_json(result.selection.to_dict(), out / "selection.json")
    dump_json(result.intervals.to_dict(), out / "intervals.json")
    dump_json(
        {
            "level": result.oracle_level,
            "support": [int(j) for j in result.oracle.support],
            "beta_hat": result.oracle.beta_hat,
            "sigma2_hat": result.oracle.sigma2_hat,
            "lower": result.oracle_lower,
            "upper": result.oracle_upper,
        },
        out / "oracle_intervals.json",
    )
    save_chain(result.best_draws, out / "chain.csv")
    save_chain(result.lasso_draws, out / "lasso_chain.csv")
    bvm = bvm_diagnostics(result.best_draws, result.data, result.truth)
    dump_json(bvm.to_dict(), out / "bvm.json")
    names = [
        "bic_curve.csv",
        "tuning.json",
        "selection.json",
        "intervals.json",
        "oracle_intervals.json",
        "chain.csv",
        "chain.meta.json",
        "lasso_chain.csv",
        "lasso_chain.meta.json",
        "bvm.json",
    ]
    manifest = {
        "version": __version__,
        "files": {name: sha256_file(out / name) for name in names},
    }
    dump_json(manifest, out / "manifest.json")

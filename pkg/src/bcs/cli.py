"""Command-line entry point.

Subcommands: generate, fit, tune, select, intervals, bvm, check-prior,
run-toy, run-scenario, bench.  All randomness flows from --seed; machine
readable JSON/CSV goes to files or standard output, human logs go to
standard error.  Flag precedence is flags > --config file > built-in
defaults, and the resolved configuration is echoed into every emitted
manifest or metadata file.  Exit codes: 0 success, 1 usage error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import CovStructure, TrueModel, dataset_meta, generate_dataset, load_csv, write_csv
from .experiments import (
    ScenarioSpec,
    bayesian_lasso_rate,
    gamma_grid,
    persist,
    run_scenario,
    run_toy,
    write_tuning_csv,
)
from .inference import bvm_diagnostics, credible_intervals, select, tune_gamma
from .priors import (
    Laplace,
    MixtureGaussian,
    SigmaPrior,
    StudentT,
    check_conditions,
    prior_from_dict,
    scale_from_gamma,
    student_t_family,
)
from .sampler import SamplerConfig, benchmark_beta_sweep, load_chain, run_chain, save_chain
from .serialize import dumps

log = logging.getLogger("bcs")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract is 1.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_COMMON_DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "verbosity": 0,
    "output_dir": None,
    "config": None,
}

_SAMPLER_DEFAULTS = {
    "burn_in": 5000,
    "iterations": 40000,
    "thin": 40,
    "block_size": "auto",
    "permute_blocks": False,
}

DEFAULTS: dict[str, dict] = {
    "generate": {
        **_COMMON_DEFAULTS,
        "n": 80,
        "p": 201,
        "cov": "independent",
        "rho": 0.0,
        "sigma_star": 1.0,
        "signal": "1,1.5,2",
        "signal_start": None,
        "intercept": False,
        "prefix": "data",
    },
    "fit": {
        **_COMMON_DEFAULTS,
        **_SAMPLER_DEFAULTS,
        "data": None,
        "response": "y",
        "standardize": False,
        "family": "student-t",
        "a1": 1.5,
        "gamma": None,
        "s_n": None,
        "lam": None,
        "m1": None,
        "sigma0": None,
        "sigma1": None,
        "a0": 1.0,
        "b0": 1.0,
        "dump_latents": False,
        "prefix": "chain",
    },
    "tune": {
        **_COMMON_DEFAULTS,
        **_SAMPLER_DEFAULTS,
        "data": None,
        "response": "y",
        "standardize": False,
        "a1": 1.5,
        "grid": "-0.25:1.1:0.05",
        "a0": 1.0,
        "b0": 1.0,
        "u": 0.0,
        "prefix": "chain",
    },
    "select": {**_COMMON_DEFAULTS, "chain": None, "meta": None, "t": 0.5, "u": 0.0},
    "intervals": {**_COMMON_DEFAULTS, "chain": None, "meta": None, "alpha": 0.05},
    "bvm": {
        **_COMMON_DEFAULTS,
        "chain": None,
        "meta": None,
        "data": None,
        "response": "y",
        "truth": None,
    },
    "check-prior": {
        **_COMMON_DEFAULTS,
        "family": "student-t",
        "a1": 1.5,
        "gamma": None,
        "s_n": None,
        "lam": None,
        "m1": None,
        "sigma0": None,
        "sigma1": None,
        "n": 120,
        "p": 200,
        "s": 4,
        "u": 0.0,
        "e_n": None,
        "m_const": 1.0,
        "c0": 3.0,
        "c_log_density": 10.0,
        "beta_star_over_sigma": None,
    },
    "run-toy": {
        **_COMMON_DEFAULTS,
        "out": "toy-out",
        "burn_in": 5000,
        "iterations": 40000,
        "thin": 40,
        "grid_start": -0.25,
        "grid_stop": 1.1,
        "grid_step": 0.05,
        "a1": 1.5,
    },
    "run-scenario": {
        **_COMMON_DEFAULTS,
        "spec": None,
        "out": "scenario-out",
        "replicates": None,
        "base_seed": None,
    },
    "bench": {**_COMMON_DEFAULTS, "n": 100, "p": 2000, "sweeps": 10},
}


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, help="master seed; all randomness derives from it")
    sp.add_argument("--jobs", type=int, help="worker processes for parallel sections")
    sp.add_argument("-v", "--verbosity", action="count", help="increase log verbosity")
    sp.add_argument("--output-dir", help="directory for emitted files")
    sp.add_argument("--config", help="JSON file with default flag values")


def build_parser() -> _Parser:
    parser = _Parser(prog="bcs", description=__doc__)
    parser.add_argument("--version", action="version", version=f"bcs {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    parser.set_defaults(**{})

    def sub(name: str, help_: str) -> argparse.ArgumentParser:
        sp = subs.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        _add_common(sp)
        return sp

    g = sub("generate", "generate a synthetic dataset plus a metadata sidecar")
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--cov", choices=["independent", "equicorrelated"])
    g.add_argument("--rho", type=float)
    g.add_argument("--sigma-star", type=float, dest="sigma_star")
    g.add_argument("--signal", help="comma list of nonzero true coefficients")
    g.add_argument("--signal-start", type=int, dest="signal_start")
    g.add_argument("--intercept", action="store_true")
    g.add_argument("--prefix")

    def add_sampler_flags(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--burn-in", type=int, dest="burn_in")
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--thin", type=int)
        sp.add_argument("--block-size", dest="block_size", help='block size or "auto"')
        sp.add_argument("--permute-blocks", action="store_true", dest="permute_blocks")

    def add_prior_flags(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--family", choices=["student-t", "laplace", "mixture"])
        sp.add_argument("--a1", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--s-n", type=float, dest="s_n")
        sp.add_argument("--lam", type=float)
        sp.add_argument("--m1", type=float)
        sp.add_argument("--sigma0", type=float)
        sp.add_argument("--sigma1", type=float)

    f = sub("fit", "run one Gibbs chain on a CSV dataset and dump the draws")
    f.add_argument("--data", required=True)
    f.add_argument("--response")
    f.add_argument("--standardize", action="store_true")
    add_prior_flags(f)
    f.add_argument("--a0", type=float)
    f.add_argument("--b0", type=float)
    add_sampler_flags(f)
    f.add_argument("--dump-latents", action="store_true", dest="dump_latents")
    f.add_argument("--prefix")

    t = sub("tune", "grid-tune gamma by posterior-mean BIC and dump the best chain")
    t.add_argument("--data", required=True)
    t.add_argument("--response")
    t.add_argument("--standardize", action="store_true")
    t.add_argument("--a1", type=float)
    t.add_argument("--grid", help='"start:stop:step" or comma list')
    t.add_argument("--a0", type=float)
    t.add_argument("--b0", type=float)
    t.add_argument("--u", type=float)
    add_sampler_flags(t)
    t.add_argument("--prefix")

    s = sub("select", "variable selection from a chain dump")
    s.add_argument("--chain", required=True)
    s.add_argument("--meta")
    s.add_argument("--t", type=float)
    s.add_argument("--u", type=float)

    i = sub("intervals", "credible intervals from a chain dump")
    i.add_argument("--chain", required=True)
    i.add_argument("--meta")
    i.add_argument("--alpha", type=float)

    b = sub("bvm", "posterior-shape diagnostics against the restricted OLS oracle")
    b.add_argument("--chain", required=True)
    b.add_argument("--meta")
    b.add_argument("--data", required=True)
    b.add_argument("--response")
    b.add_argument("--truth", required=True, help="metadata sidecar JSON carrying the truth")

    c = sub("check-prior", "evaluate the concentration/flatness prior conditions")
    add_prior_flags(c)
    c.add_argument("--n", type=int)
    c.add_argument("--p", type=int)
    c.add_argument("--s", type=int)
    c.add_argument("--u", type=float)
    c.add_argument("--e-n", type=float, dest="e_n")
    c.add_argument("--m-const", type=float, dest="m_const")
    c.add_argument("--c0", type=float)
    c.add_argument("--c-log-density", type=float, dest="c_log_density")
    c.add_argument("--beta-star-over-sigma", dest="beta_star_over_sigma", help="comma list")

    rt = sub("run-toy", "run the p >> n walkthrough instance and write its bundle")
    rt.add_argument("--out")
    rt.add_argument("--burn-in", type=int, dest="burn_in")
    rt.add_argument("--iterations", type=int)
    rt.add_argument("--thin", type=int)
    rt.add_argument("--grid-start", type=float, dest="grid_start")
    rt.add_argument("--grid-stop", type=float, dest="grid_stop")
    rt.add_argument("--grid-step", type=float, dest="grid_step")
    rt.add_argument("--a1", type=float)

    rs = sub("run-scenario", "run a replicated scenario from a JSON spec")
    rs.add_argument("--spec", required=True)
    rs.add_argument("--out")
    rs.add_argument("--replicates", type=int)
    rs.add_argument("--base-seed", type=int, dest="base_seed")

    be = sub("bench", "time one coefficient sweep for block sizes 1, auto, and p")
    be.add_argument("--n", type=int)
    be.add_argument("--p", type=int)
    be.add_argument("--sweeps", type=int)

    return parser


def _resolve(command: str, ns: argparse.Namespace) -> dict:
    """Merge flags over config-file values over built-in defaults."""
    provided = {k: v for k, v in vars(ns).items() if k != "command"}
    cfg: dict = {}
    config_path = provided.get("config")
    if config_path:
        cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
        cfg = {str(k).replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(cfg) - set(DEFAULTS[command])
        if unknown:
            raise ValueError(f"unknown keys in config file: {sorted(unknown)}")
    resolved = dict(DEFAULTS[command])
    resolved.update(cfg)
    resolved.update(provided)
    resolved["command"] = command
    return resolved


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip() != ""]


def _parse_grid(text: str) -> tuple[float, ...]:
    if ":" in str(text):
        start, stop, step = (float(v) for v in str(text).split(":"))
        return gamma_grid(start, stop, step)
    return tuple(_parse_floats(text))


def _sampler_config(cfg: dict) -> SamplerConfig:
    block = cfg.get("block_size", "auto")
    block_size = None if block in (None, "auto") else int(block)
    return SamplerConfig(
        burn_in=int(cfg["burn_in"]),
        iterations=int(cfg["iterations"]),
        thin=int(cfg["thin"]),
        block_size=block_size,
        seed=int(cfg["seed"]),
        permute_blocks=bool(cfg["permute_blocks"]),
        record_latents=bool(cfg.get("dump_latents", False)),
    )


def _build_prior(cfg: dict, n: int, p: int):
    family = cfg["family"]
    if family == "student-t":
        if cfg.get("s_n") is not None:
            return StudentT(a1=float(cfg["a1"]), s_n=float(cfg["s_n"])), cfg.get("gamma")
        if cfg.get("gamma") is None:
            raise ValueError("student-t prior needs --gamma or --s-n")
        lam = scale_from_gamma(n, p, float(cfg["gamma"]))
        return StudentT(a1=float(cfg["a1"]), s_n=lam * lam), float(cfg["gamma"])
    if family == "laplace":
        lam = cfg.get("lam")
        lam = bayesian_lasso_rate(n, p) if lam is None else float(lam)
        return Laplace(lam=lam), None
    if family == "mixture":
        for key in ("m1", "sigma0", "sigma1"):
            if cfg.get(key) is None:
                raise ValueError(f"mixture prior needs --{key}")
        return (
            MixtureGaussian(
                m1=float(cfg["m1"]), sigma0=float(cfg["sigma0"]), sigma1=float(cfg["sigma1"])
            ),
            None,
        )
    raise ValueError(f"unknown prior family: {family!r}")


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("output_dir") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# Scheduling and destination flags do not affect results and are kept out
# of emitted files so outputs stay byte-identical at any --jobs/--output-dir.
_NON_SEMANTIC_FLAGS = {"command", "jobs", "verbosity", "output_dir", "out", "config"}


def _echo_config(cfg: dict) -> dict:
    echo = {k: v for k, v in sorted(cfg.items()) if k not in _NON_SEMANTIC_FLAGS}
    echo["version"] = __version__
    return echo


def _emit(doc: dict, cfg: dict, filename: str | None = None) -> None:
    text = dumps(doc)
    sys.stdout.write(text)
    if cfg.get("output_dir") and filename:
        (_out_dir(cfg) / filename).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_generate(cfg: dict) -> int:
    n, p = int(cfg["n"]), int(cfg["p"])
    signal = _parse_floats(cfg["signal"])
    start = cfg.get("signal_start")
    start = (1 if cfg["intercept"] else 0) if start is None else int(start)
    beta = np.zeros(p)
    beta[start : start + len(signal)] = signal
    truth = TrueModel(beta_star=beta, sigma_star=float(cfg["sigma_star"]))
    cov = (
        CovStructure.independent()
        if cfg["cov"] == "independent"
        else CovStructure.equicorrelated(float(cfg["rho"]))
    )
    data = generate_dataset(n, p, cov, truth, int(cfg["seed"]), intercept=bool(cfg["intercept"]))
    out = _out_dir(cfg)
    prefix = cfg["prefix"]
    write_csv(data, out / f"{prefix}.csv")
    meta = dataset_meta(n, p, int(cfg["seed"]), cov, truth, bool(cfg["intercept"]))
    meta["version"] = __version__
    meta["cli_config"] = _echo_config(cfg)
    (out / f"{prefix}.json").write_text(dumps(meta), encoding="utf-8")
    log.info("wrote %s and %s", out / f"{prefix}.csv", out / f"{prefix}.json")
    return 0


def _load_data(cfg: dict) -> Dataset:
    return load_csv(cfg["data"], cfg["response"], standardize=bool(cfg.get("standardize", False)))


def _cmd_fit(cfg: dict) -> int:
    data = _load_data(cfg)
    prior, gamma = _build_prior(cfg, data.n, data.p)
    sp = SigmaPrior(a0=float(cfg["a0"]), b0=float(cfg["b0"]))
    config = _sampler_config(cfg)
    draws = run_chain(data, prior, sp, config, gamma=gamma)
    draws.meta["cli_config"] = _echo_config(cfg)
    out = _out_dir(cfg)
    csv_path = out / f"{cfg['prefix']}.csv"
    save_chain(draws, csv_path, dump_latents=bool(cfg["dump_latents"]))
    log.info("wrote %s", csv_path)
    return 0


def _cmd_tune(cfg: dict) -> int:
    data = _load_data(cfg)
    sp = SigmaPrior(a0=float(cfg["a0"]), b0=float(cfg["b0"]))
    config = _sampler_config(cfg)
    grid = _parse_grid(cfg["grid"])
    report = tune_gamma(
        data,
        student_t_family(float(cfg["a1"])),
        sp,
        grid,
        config,
        jobs=int(cfg["jobs"]),
        u=float(cfg["u"]),
    )
    out = _out_dir(cfg)
    doc = report.to_dict()
    doc["cli_config"] = _echo_config(cfg)
    (out / "tuning.json").write_text(dumps(doc), encoding="utf-8")
    write_tuning_csv(report, out / "tuning.csv")
    report.best_draws.meta["cli_config"] = _echo_config(cfg)
    save_chain(report.best_draws, out / f"{cfg['prefix']}.csv")
    sys.stdout.write(dumps(doc))
    log.info("gamma_hat = %s", report.gamma_hat)
    return 0


def _load_draws(cfg: dict):
    return load_chain(cfg["chain"], cfg.get("meta"))


def _cmd_select(cfg: dict) -> int:
    draws = _load_draws(cfg)
    prior = prior_from_dict(draws.meta["prior"])
    report = select(draws, prior, float(cfg["t"]), u=float(cfg["u"]))
    _emit(report.to_dict(), cfg, "selection.json")
    return 0


def _cmd_intervals(cfg: dict) -> int:
    draws = _load_draws(cfg)
    report = credible_intervals(draws, float(cfg["alpha"]))
    _emit(report.to_dict(), cfg, "intervals.json")
    return 0


def _cmd_bvm(cfg: dict) -> int:
    draws = _load_draws(cfg)
    data = _load_data(cfg)
    truth_doc = json.loads(Path(cfg["truth"]).read_text(encoding="utf-8"))
    truth = TrueModel.from_dict(truth_doc["truth"] if "truth" in truth_doc else truth_doc)
    report = bvm_diagnostics(draws, data, truth)
    _emit(report.to_dict(), cfg, "bvm.json")
    return 0


def _cmd_check_prior(cfg: dict) -> int:
    n, p, s = int(cfg["n"]), int(cfg["p"]), int(cfg["s"])
    prior, _gamma = _build_prior(cfg, n, p)
    if cfg.get("beta_star_over_sigma") is not None:
        beta_sig = np.asarray(_parse_floats(cfg["beta_star_over_sigma"]))
    else:
        beta_sig = np.ones(s)
    e_n = cfg.get("e_n")
    e_n = 2.0 * float(np.max(np.abs(beta_sig))) if e_n is None else float(e_n)
    if e_n <= 0:
        e_n = 2.0
    report = check_conditions(
        prior,
        n,
        p,
        s,
        e_n,
        float(cfg["u"]),
        beta_sig,
        m_const=float(cfg["m_const"]),
        c0=float(cfg["c0"]),
        c_log_density=float(cfg["c_log_density"]),
    )
    doc = report.to_dict()
    doc["cli_config"] = _echo_config(cfg)
    _emit(doc, cfg, "condition_report.json")
    return 0


def _cmd_run_toy(cfg: dict) -> int:
    out = Path(cfg.get("out") or cfg.get("output_dir") or "toy-out")
    sampler = SamplerConfig(
        burn_in=int(cfg["burn_in"]),
        iterations=int(cfg["iterations"]),
        thin=int(cfg["thin"]),
        seed=int(cfg["seed"]),
    )
    grid = gamma_grid(float(cfg["grid_start"]), float(cfg["grid_stop"]), float(cfg["grid_step"]))
    result = run_toy(
        out,
        seed=int(cfg["seed"]),
        jobs=int(cfg["jobs"]),
        sampler=sampler,
        grid=grid,
        a1=float(cfg["a1"]),
    )
    (out / "cli_config.json").write_text(dumps(_echo_config(cfg)), encoding="utf-8")
    summary = {
        "gamma_hat": result.tuning.gamma_hat,
        "selected": [int(j) for j in result.selection.selected],
    }
    sys.stdout.write(dumps(summary))
    log.info("walkthrough bundle written to %s", out)
    return 0


def _cmd_run_scenario(cfg: dict) -> int:
    spec = ScenarioSpec.from_dict(json.loads(Path(cfg["spec"]).read_text(encoding="utf-8")))
    if cfg.get("replicates") is not None:
        spec = replace(spec, replicates=int(cfg["replicates"]))
    if cfg.get("base_seed") is not None:
        spec = replace(spec, base_seed=int(cfg["base_seed"]))
    result = run_scenario(spec, jobs=int(cfg["jobs"]))
    out = Path(cfg.get("out") or cfg.get("output_dir") or "scenario-out")
    persist(result, out)
    (out / "cli_config.json").write_text(dumps(_echo_config(cfg)), encoding="utf-8")
    doc = json.loads((out / "aggregate.json").read_text(encoding="utf-8"))
    sys.stdout.write(dumps(doc))
    log.info("scenario finished in %.1f s", result.wall_clock.get("total_seconds", math.nan))
    if result.failures:
        log.error("%d replicate(s) failed: %s", len(result.failures), result.failures)
        return 2
    return 0


def _cmd_bench(cfg: dict) -> int:
    n, p = int(cfg["n"]), int(cfg["p"])
    results = benchmark_beta_sweep(
        n, p, [1, None, p], sweeps=int(cfg["sweeps"]), seed=int(cfg["seed"])
    )
    lines = [f"{'block size':>12}  {'median s/sweep':>15}"]
    for key, rec in results.items():
        lines.append(f"{rec['block_size']:>12}  {rec['median_seconds']:>15.6f}")
    print("\n".join(lines), file=sys.stderr)
    ordering = sorted(results.values(), key=lambda r: r["median_seconds"])
    doc = {
        "n": n,
        "p": p,
        "results": results,
        "fastest_block_size": ordering[0]["block_size"],
    }
    sys.stdout.write(dumps(doc))
    return 0


_HANDLERS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "tune": _cmd_tune,
    "select": _cmd_select,
    "intervals": _cmd_intervals,
    "bvm": _cmd_bvm,
    "check-prior": _cmd_check_prior,
    "run-toy": _cmd_run_toy,
    "run-scenario": _cmd_run_scenario,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = _resolve(ns.command, ns)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        print(f"bcs: error: {e}", file=sys.stderr)
        return 1
    level = {0: logging.WARNING, 1: logging.INFO}.get(int(cfg.get("verbosity") or 0), logging.DEBUG)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    log.debug("resolved config: %s", cfg)
    try:
        return _HANDLERS[ns.command](cfg)
    except (ValueError, FileNotFoundError) as e:
        print(f"bcs: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - runtime failure contract
        log.exception("runtime failure")
        print(f"bcs: runtime failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

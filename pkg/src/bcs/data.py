"""Regression problem instances: synthetic generation and CSV ingestion.

A problem instance is a response vector ``y`` and an ``n x p`` design
matrix ``X``.  Synthetic designs are drawn row-wise from N(0, S) with S
either the identity or an equicorrelation matrix; the latter uses the
one-factor construction ``x = sqrt(rho) * z0 + sqrt(1 - rho) * z`` which
is exact and costs O(n p) instead of an O(p^2) factorization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import DATA_STREAM, make_rng
from .serialize import format_float

INDEPENDENT = "independent"
EQUICORRELATED = "equicorrelated"


@dataclass(frozen=True)
class CovStructure:
    """Population covariance of the generated covariates."""

    kind: str
    rho: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (INDEPENDENT, EQUICORRELATED):
            raise ValueError(f"unknown covariance kind: {self.kind!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.kind == INDEPENDENT and self.rho != 0.0:
            raise ValueError("independent covariance requires rho == 0")

    @classmethod
    def independent(cls) -> "CovStructure":
        return cls(INDEPENDENT)

    @classmethod
    def equicorrelated(cls, rho: float) -> "CovStructure":
        return cls(EQUICORRELATED, float(rho))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rho": self.rho}

    @classmethod
    def from_dict(cls, d: dict) -> "CovStructure":
        return cls(d["kind"], float(d.get("rho", 0.0)))


@dataclass(frozen=True)
class TrueModel:
    """Ground-truth coefficients and noise level of a synthetic instance.

    ``xi_star`` (the support) and ``s`` (its size) are derived from
    ``beta_star`` so they can never disagree with it.  ``sigma_star = 0``
    is admitted for noise-free degenerate instances.
    """

    beta_star: np.ndarray
    sigma_star: float

    def __post_init__(self) -> None:
        b = np.asarray(self.beta_star, dtype=float)
        if b.ndim != 1:
            raise ValueError("beta_star must be a 1-D vector")
        if not np.all(np.isfinite(b)):
            raise ValueError("beta_star must be finite")
        if not (self.sigma_star >= 0 and math.isfinite(self.sigma_star)):
            raise ValueError("sigma_star must be finite and >= 0")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "beta_star", b)
        object.__setattr__(self, "sigma_star", float(self.sigma_star))

    @property
    def p(self) -> int:
        return self.beta_star.shape[0]

    @property
    def xi_star(self) -> np.ndarray:
        """Sorted indices of the nonzero true coefficients."""
        return np.flatnonzero(self.beta_star)

    @property
    def s(self) -> int:
        return int(np.count_nonzero(self.beta_star))

    def to_dict(self) -> dict:
        return {"beta_star": [float(b) for b in self.beta_star], "sigma_star": self.sigma_star}

    @classmethod
    def from_dict(cls, d: dict) -> "TrueModel":
        return cls(np.asarray(d["beta_star"], dtype=float), float(d["sigma_star"]))


@dataclass(frozen=True)
class Dataset:
    """An immutable (y, X) regression instance.

    ``columns`` carries covariate names for ingested files; generated
    data leaves it unset.
    """

    y: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if y.ndim != 1 or X.ndim != 2:
            raise ValueError("y must be 1-D and X must be 2-D")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has length {y.shape[0]}")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
            raise ValueError("X and y must contain only finite values")
        if self.columns is not None and len(self.columns) != X.shape[1]:
            raise ValueError("columns must have one name per covariate")
        y = y.copy()
        X = X.copy()
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def generate_dataset(
    n: int,
    p: int,
    cov: CovStructure,
    truth: TrueModel,
    seed: int,
    *,
    intercept: bool = False,
) -> Dataset:
    """Draw a synthetic instance y = X beta* + sigma* eps.

    Rows of ``X`` are i.i.d. N(0, S).  With ``intercept=True`` column 0 is
    the constant one vector (its true coefficient is whatever
    ``truth.beta_star[0]`` says; conventionally 0) and the covariance
    structure applies to the remaining columns.  The draw is a pure
    function of the arguments: identical inputs give bit-identical data.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if p < 1:
        raise ValueError("p must be at least 1")
    if truth.p != p:
        raise ValueError(f"truth has {truth.p} coefficients but p = {p}")
    rng = make_rng(seed, DATA_STREAM)

    ncov = p - 1 if intercept else p
    if cov.kind == INDEPENDENT:
        Z = rng.standard_normal((n, ncov))
    else:
        z0 = rng.standard_normal((n, 1))
        Z = math.sqrt(cov.rho) * z0 + math.sqrt(1.0 - cov.rho) * rng.standard_normal((n, ncov))
    X = np.hstack([np.ones((n, 1)), Z]) if intercept else Z

    eps = rng.standard_normal(n)
    y = X @ truth.beta_star + truth.sigma_star * eps
    return Dataset(y=y, X=X)


def dataset_meta(
    n: int,
    p: int,
    seed: int,
    cov: CovStructure,
    truth: TrueModel,
    intercept: bool,
) -> dict:
    """Sidecar metadata describing how a synthetic dataset was produced."""
    return {
        "n": int(n),
        "p": int(p),
        "seed": int(seed),
        "cov": cov.to_dict(),
        "truth": truth.to_dict(),
        "intercept": bool(intercept),
    }


def load_csv(path: str | Path, response_column: str, *, standardize: bool = False) -> Dataset:
    """Read an RFC-4180 CSV with a mandatory header into a Dataset.

    The named column becomes ``y``; every other column, in header order,
    becomes a covariate.  ``standardize=True`` centers each covariate and
    scales it to unit standard deviation (constant columns are left
    centered only).

    Raises ``ValueError`` naming the offending column or cell for a
    missing response column, a non-numeric cell, or ragged rows.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty, header row required") from None
        header = [h.strip() for h in header]
        if response_column not in header:
            raise ValueError(f"{path}: response column {response_column!r} not in header {header}")
        rows: list[list[float]] = []
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {i} has {len(row)} cells, expected {len(header)}"
                )
            vals = []
            for j, cell in enumerate(row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric cell at row {i}, column {header[j]!r}: {cell!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")

    data = np.asarray(rows, dtype=float)
    yi = header.index(response_column)
    y = data[:, yi]
    keep = [j for j in range(len(header)) if j != yi]
    X = data[:, keep]
    if standardize and X.shape[0] > 1:
        X = X - X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        sd[sd == 0.0] = 1.0
        X = X / sd
    columns = tuple(header[j] for j in keep)
    return Dataset(y=y, X=X, columns=columns)


def write_csv(
    dataset: Dataset,
    path: str | Path,
    *,
    response_name: str = "y",
    columns: tuple[str, ...] | None = None,
) -> None:
    """Write a Dataset back to CSV, value-exact (17 significant digits)."""
    if columns is None:
        columns = dataset.columns or tuple(f"x{j}" for j in range(dataset.p))
    if len(columns) != dataset.p:
        raise ValueError("columns must have one name per covariate")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([response_name, *columns])
        for i in range(dataset.n):
            writer.writerow(
                [format_float(dataset.y[i]), *(format_float(v) for v in dataset.X[i])]
            )

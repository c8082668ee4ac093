"""Synthetic GLM streams with sub-Gaussian designs.

Rows are ``X_i = Z_i L^T`` with ``L L^T = Sigma`` and ``Z_i`` i.i.d. unit-variance
entries (standard normal or Rademacher).  Every batch draws from its own
``SeedSequence(seed, spawn_key=(b,))`` so batch ``b`` can be regenerated
without touching batches ``1..b-1``; the truth uses spawn key ``(0,)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, SaturationWarning, ShapeError
from .glm import BatchData, Family, GlmFamily

__all__ = [
    "DesignSpec",
    "TruthSpec",
    "StreamSpec",
    "SyntheticStream",
    "ar1_covariance",
    "ar1_eigen_bounds",
    "make_design",
    "make_truth",
    "make_responses",
    "stream",
    "POISSON_RATE_CAP",
]

POISSON_RATE_CAP = 1e9


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)


def ar1_eigen_bounds(rho: float) -> tuple[float, float]:
    """Closed-form spectral bounds of any AR(1) correlation matrix."""
    return (1.0 - rho) / (1.0 + rho), (1.0 + rho) / (1.0 - rho)


@dataclass
class DesignSpec:
    """``covariance`` is ``"identity"``, ``"ar1"`` (with ``rho``) or ``"user"`` (with ``matrix``)."""

    p: int
    covariance: str = "identity"
    rho: float = 0.0
    matrix: Optional[np.ndarray] = None
    entry_law: str = "gaussian"
    _factor: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.p) < 1:
            raise DomainError(f"p must be >= 1, got {self.p}")
        self.p = int(self.p)
        if self.entry_law not in ("gaussian", "rademacher"):
            raise DomainError(f"entry_law must be 'gaussian' or 'rademacher', got {self.entry_law!r}")
        if self.covariance == "ar1":
            if not (0.0 <= self.rho < 1.0):
                raise DomainError(f"AR(1) rho must lie in [0, 1), got {self.rho}")
        elif self.covariance == "user":
            if self.matrix is None:
                raise DomainError("user covariance requires a matrix")
            m = np.asarray(self.matrix, dtype=np.float64)
            if m.shape != (self.p, self.p) or not np.array_equal(m, m.T):
                raise DomainError("user covariance must be a symmetric p x p matrix")
            self.matrix = m
        elif self.covariance != "identity":
            raise DomainError(f"unknown covariance {self.covariance!r}")

    @property
    def is_identity(self) -> bool:
        return self.covariance == "identity" or (self.covariance == "ar1" and self.rho == 0.0)

    def sigma(self) -> np.ndarray:
        if self.is_identity:
            return np.eye(self.p)
        if self.covariance == "ar1":
            return ar1_covariance(self.p, self.rho)
        return self.matrix

    def factor(self) -> Optional[np.ndarray]:
        """Lower Cholesky factor of Sigma, or ``None`` for the identity."""
        if self.is_identity:
            return None
        if self._factor is None:
            try:
                self._factor = np.linalg.cholesky(self.sigma())
            except np.linalg.LinAlgError as exc:
                raise DomainError("covariance matrix is not positive definite") from exc
        return self._factor

    def spectral_bound(self) -> float:
        """A constant K with eigenvalues of Sigma inside [1/K, K]."""
        if self.is_identity:
            return 1.0
        if self.covariance == "ar1":
            return ar1_eigen_bounds(self.rho)[1]
        ev = np.linalg.eigvalsh(self.matrix)
        return float(max(ev[-1], 1.0 / ev[0]))


@dataclass(frozen=True)
class TruthSpec:
    """``magnitude_rule``: ``"constant"`` (all ``value``), ``"signed"`` (random
    signs times ``value``) or ``"uniform"`` (magnitudes in ``[low, high]`` with
    random signs)."""

    p: int
    s: int
    support_rule: str = "first"
    magnitude_rule: str = "constant"
    value: float = 1.0
    low: float = 0.5
    high: float = 1.0

    def __post_init__(self):
        if not (1 <= self.s <= self.p):
            raise DomainError(f"need 1 <= s <= p, got s={self.s}, p={self.p}")
        if self.support_rule not in ("first", "random"):
            raise DomainError(f"support_rule must be 'first' or 'random', got {self.support_rule!r}")
        if self.magnitude_rule not in ("constant", "signed", "uniform"):
            raise DomainError(f"unknown magnitude_rule {self.magnitude_rule!r}")
        if self.magnitude_rule == "uniform":
            if not (0 < self.low <= self.high):
                raise DomainError(f"need 0 < low <= high, got low={self.low}, high={self.high}")
        elif self.value == 0:
            raise DomainError("signal magnitude must be nonzero")


def make_design(spec: DesignSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if spec.entry_law == "gaussian":
        z = rng.standard_normal((n, spec.p))
    else:
        z = rng.integers(0, 2, size=(n, spec.p)).astype(np.float64) * 2.0 - 1.0
    L = spec.factor()
    return z if L is None else z @ L.T


def make_truth(spec: TruthSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if spec.support_rule == "first":
        support = np.arange(spec.s)
    else:
        support = np.sort(rng.choice(spec.p, size=spec.s, replace=False))
    if spec.magnitude_rule == "constant":
        values = np.full(spec.s, float(spec.value))
    elif spec.magnitude_rule == "signed":
        values = float(spec.value) * rng.choice([-1.0, 1.0], size=spec.s)
    else:
        values = rng.uniform(spec.low, spec.high, size=spec.s) * rng.choice([-1.0, 1.0], size=spec.s)
    beta = np.zeros(spec.p)
    beta[support] = values
    return beta, support


def make_responses(family: GlmFamily, X: np.ndarray, beta_star, rng: np.random.Generator) -> np.ndarray:
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if X.shape[1] != beta_star.shape[0]:
        raise ShapeError(f"design has {X.shape[1]} columns, beta_star has length {beta_star.shape[0]}")
    eta = X @ beta_star
    n = X.shape[0]
    if family.kind is Family.GAUSSIAN:
        return eta + math.sqrt(family.dispersion) * rng.standard_normal(n)
    if family.kind is Family.LOGISTIC:
        return (rng.random(n) < family.g1(eta)).astype(np.float64)
    with np.errstate(over="ignore"):
        rate = np.exp(eta)
    if np.any(rate > POISSON_RATE_CAP):
        warnings.warn(f"Poisson rate capped at {POISSON_RATE_CAP:g}", SaturationWarning, stacklevel=2)
        rate = np.minimum(rate, POISSON_RATE_CAP)
    return rng.poisson(rate).astype(np.float64)


@dataclass
class StreamSpec:
    """``batch_size`` is an int (constant size) or a list of per-batch sizes."""

    design: DesignSpec
    truth: TruthSpec
    family: GlmFamily
    batch_size: Union[int, Sequence[int]] = 100
    num_batches: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.design.p != self.truth.p:
            raise DomainError(f"design p={self.design.p} differs from truth p={self.truth.p}")
        if isinstance(self.batch_size, (list, tuple)):
            sizes = [int(n) for n in self.batch_size]
            if not sizes or min(sizes) < 1:
                raise DomainError("batch size schedule must be nonempty with sizes >= 1")
            if self.num_batches is not None and self.num_batches != len(sizes):
                raise DomainError("num_batches disagrees with the batch size schedule")
            self.batch_size = sizes
            self.num_batches = len(sizes)
        else:
            if int(self.batch_size) < 1:
                raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
            if self.num_batches is None or int(self.num_batches) < 0:
                raise DomainError("num_batches is required with a constant batch size")
            self.batch_size = int(self.batch_size)
            self.num_batches = int(self.num_batches)
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def size_of(self, b: int) -> int:
        if isinstance(self.batch_size, list):
            return self.batch_size[b - 1]
        return self.batch_size


class SyntheticStream:
    """Random-access, lazily generated stream described by a :class:`StreamSpec`."""

    def __init__(self, spec: StreamSpec):
        self.spec = spec
        self.beta_star, self.support = make_truth(spec.truth, self._rng(0))

    def _rng(self, key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(int(self.spec.seed), spawn_key=(key,)))

    @property
    def p(self) -> int:
        return self.spec.design.p

    def __len__(self) -> int:
        return self.spec.num_batches

    def batch(self, b: int) -> BatchData:
        if not (1 <= b <= self.spec.num_batches):
            raise DomainError(f"batch index {b} outside 1..{self.spec.num_batches}")
        rng = self._rng(b)
        X = make_design(self.spec.design, self.spec.size_of(b), rng)
        Y = make_responses(self.spec.family, X, self.beta_star, rng)
        return BatchData(X, Y, b)

    def iter_from(self, start: int = 1) -> Iterator[BatchData]:
        for b in range(start, self.spec.num_batches + 1):
            yield self.batch(b)

    def __iter__(self) -> Iterator[BatchData]:
        return self.iter_from(1)

    def n_cumulative(self, b: int) -> int:
        return sum(self.spec.size_of(j) for j in range(1, b + 1))


def stream(spec: StreamSpec) -> tuple[np.ndarray, Iterator[BatchData]]:
    """Return ``beta_star`` and a lazy iterator over the batches."""
    s = SyntheticStream(spec)
    return s.beta_star, iter(s)

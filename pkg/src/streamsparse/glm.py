"""Canonical-link exponential-family GLM losses.

Every family is described by its log-partition function ``g``; for a batch
``(X, Y)`` the negative log-likelihood (up to terms free of ``beta``) is

    f(beta) = sum_i g(X_i beta) - Y_i X_i beta

with gradient ``X^T (g'(X beta) - Y)`` and Hessian ``X^T diag(g''(X beta)) X``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SaturationWarning, ShapeError

__all__ = [
    "Family",
    "GlmFamily",
    "BatchData",
    "link_value",
    "batch_loss",
    "batch_gradient",
    "batch_hessian",
]


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"
    POISSON = "poisson"


@dataclass(frozen=True)
class GlmFamily:
    """A canonical-link family.

    ``dispersion`` is the exponential-family scale ``a``.  It does not enter
    the loss; the data generator uses it as the Gaussian noise variance.
    """

    kind: Family
    dispersion: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Family(self.kind))
        if not (self.dispersion >= 0 and math.isfinite(self.dispersion)):
            raise DomainError(f"dispersion must be a finite nonnegative number, got {self.dispersion}")

    @classmethod
    def gaussian(cls, dispersion=1.0):
        return cls(Family.GAUSSIAN, dispersion)

    @classmethod
    def logistic(cls):
        return cls(Family.LOGISTIC, 1.0)

    @classmethod
    def poisson(cls):
        return cls(Family.POISSON, 1.0)

    # Vectorised g, g', g''.  Inputs are float arrays.
    def g(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind is Family.GAUSSIAN:
            return 0.5 * u * u
        if self.kind is Family.LOGISTIC:
            return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))
        with np.errstate(over="ignore"):
            return np.exp(u)

    def g1(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind is Family.GAUSSIAN:
            return u.copy()
        if self.kind is Family.LOGISTIC:
            return 0.5 * (1.0 + np.tanh(0.5 * u))
        with np.errstate(over="ignore"):
            return np.exp(u)

    def g2(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind is Family.GAUSSIAN:
            return np.ones_like(u)
        if self.kind is Family.LOGISTIC:
            mu = 0.5 * (1.0 + np.tanh(0.5 * u))
            return mu * (1.0 - mu)
        with np.errstate(over="ignore"):
            return np.exp(u)


@dataclass
class BatchData:
    """One arriving batch ``(X, Y)`` with its 1-based position in the stream."""

    design: np.ndarray
    response: np.ndarray
    batch_index: int = 1

    def __post_init__(self):
        self.design = np.ascontiguousarray(self.design, dtype=np.float64)
        self.response = np.ascontiguousarray(self.response, dtype=np.float64)
        if self.design.ndim != 2:
            raise ShapeError(f"design must be 2-D, got shape {self.design.shape}")
        if self.response.ndim != 1 or self.response.shape[0] != self.design.shape[0]:
            raise ShapeError(
                f"response length {self.response.shape} does not match design rows {self.design.shape[0]}"
            )
        if self.design.shape[0] < 1:
            raise ShapeError("a batch needs at least one row")
        if int(self.batch_index) < 1:
            raise DomainError(f"batch_index must be >= 1, got {self.batch_index}")
        self.batch_index = int(self.batch_index)
        if not (np.all(np.isfinite(self.design)) and np.all(np.isfinite(self.response))):
            raise DomainError("batch contains non-finite entries")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


def _check_beta(batch: BatchData, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim != 1 or beta.shape[0] != batch.p:
        raise ShapeError(f"beta has shape {beta.shape}, expected ({batch.p},)")
    return beta


def link_value(family: GlmFamily, u: float) -> float:
    """Scalar ``g(u)``."""
    u = float(u)
    if not math.isfinite(u):
        raise DomainError(f"link_value needs a finite argument, got {u}")
    return float(family.g(u))


def batch_loss(family: GlmFamily, batch: BatchData, beta) -> float:
    """``sum_i g(X_i beta) - Y_i X_i beta``.

    Poisson losses that overflow are returned as ``+inf`` and a
    :class:`SaturationWarning` is emitted.
    """
    beta = _check_beta(batch, beta)
    eta = batch.design @ beta
    with np.errstate(over="ignore", invalid="ignore"):
        value = float(np.sum(family.g(eta) - batch.response * eta))
    if not math.isfinite(value):
        warnings.warn("batch loss overflowed; saturated to +inf", SaturationWarning, stacklevel=2)
        return math.inf
    return value


def batch_gradient(family: GlmFamily, batch: BatchData, beta) -> np.ndarray:
    beta = _check_beta(batch, beta)
    eta = batch.design @ beta
    return batch.design.T @ (family.g1(eta) - batch.response)


def batch_hessian(family: GlmFamily, batch: BatchData, beta) -> np.ndarray:
    """``X^T diag(g''(X beta)) X``, symmetrised so both triangles agree exactly."""
    beta = _check_beta(batch, beta)
    X = batch.design
    if family.kind is Family.GAUSSIAN:
        h = X.T @ X
    else:
        w = family.g2(X @ beta)
        h = X.T @ (X * w[:, None])
    return 0.5 * (h + h.T)

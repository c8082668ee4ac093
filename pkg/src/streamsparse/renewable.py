"""l1-penalised renewable estimator, kept as a comparison baseline.

At batch ``b`` it minimises

    (1/N_b) * (f_b(beta) + 0.5 (beta - beta_prev)^T H (beta - beta_prev)) + lam_b ||beta||_1

where ``H`` is the sum of past batch Hessians, each taken at that batch's
estimate.  Past scores are treated as zero, so first-order errors are carried
forward from batch to batch.  Solved by proximal gradient (ISTA) with a fixed
iteration budget.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import DIVERGENCE_BOUND, EstimateRecord
from .errors import DivergenceError, DomainError, ShapeError
from .glm import BatchData, Family, GlmFamily, batch_gradient, batch_hessian, batch_loss
from .summary import SummaryState, checkpoint_load, checkpoint_save

__all__ = [
    "RenewableState",
    "RenewableConfig",
    "RenewableLearner",
    "soft_threshold",
    "init_renewable_state",
    "renewable_objective",
    "renewable_gradient",
    "default_step",
    "default_lambda",
    "fit_batch_renewable",
    "update_renewable_state",
]


@dataclass
class RenewableState:
    hess_cum: np.ndarray
    beta_prev: np.ndarray
    n_total: int = 0
    batches_absorbed: int = 0

    @property
    def p(self) -> int:
        return self.beta_prev.shape[0]


@dataclass(frozen=True)
class RenewableConfig:
    lambda_const: float = 1.0
    inner_iters: int = 200
    step: Optional[float] = None

    def __post_init__(self):
        if not self.lambda_const > 0:
            raise DomainError(f"lambda_const must be positive, got {self.lambda_const}")
        if int(self.inner_iters) < 1:
            raise DomainError(f"inner_iters must be >= 1, got {self.inner_iters}")
        if self.step is not None and not self.step > 0:
            raise DomainError(f"step must be positive, got {self.step}")


def init_renewable_state(p: int) -> RenewableState:
    return RenewableState(np.zeros((p, p)), np.zeros(p), 0, 0)


def soft_threshold(z, tau: float) -> np.ndarray:
    if not tau >= 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def _check(state: RenewableState, batch: BatchData):
    if batch.p != state.p:
        raise ShapeError(f"batch has {batch.p} columns but the state has dimension {state.p}")


def renewable_objective(state: RenewableState, family: GlmFamily, batch: BatchData, beta, lambda_b: float) -> float:
    n_cum = state.n_total + batch.n
    d = np.asarray(beta, dtype=np.float64) - state.beta_prev
    smooth = batch_loss(family, batch, beta) + 0.5 * d @ state.hess_cum @ d
    return smooth / n_cum + lambda_b * float(np.sum(np.abs(beta)))


def renewable_gradient(state: RenewableState, family: GlmFamily, batch: BatchData, beta) -> np.ndarray:
    """Gradient of the smooth part of the renewable objective."""
    n_cum = state.n_total + batch.n
    return (batch_gradient(family, batch, beta) + state.hess_cum @ (beta - state.beta_prev)) / n_cum


def default_lambda(config: RenewableConfig, p: int, n_cumulative: int) -> float:
    return config.lambda_const * math.sqrt(math.log(max(p, 2)) / n_cumulative)


def default_step(state: RenewableState, family: GlmFamily, batch: BatchData) -> float:
    """``N_b / L`` with ``L`` the top eigenvalue of a curvature bound for the smooth part.

    Gaussian curvature is exact, logistic uses ``g'' <= 1/4``; Poisson has no
    global bound, so the Hessian at ``beta_prev`` is doubled as a heuristic.
    """
    X = batch.design
    if family.kind is Family.GAUSSIAN:
        h = X.T @ X
    elif family.kind is Family.LOGISTIC:
        h = 0.25 * (X.T @ X)
    else:
        h = 2.0 * batch_hessian(family, batch, state.beta_prev)
    top = float(np.linalg.eigvalsh(0.5 * (h + h.T) + state.hess_cum)[-1])
    n_cum = state.n_total + batch.n
    return n_cum / top if top > 0 else 1.0


def fit_batch_renewable(
    state: RenewableState,
    family: GlmFamily,
    batch: BatchData,
    lambda_b: float,
    inner_iters: int,
    step: float,
) -> np.ndarray:
    """ISTA from ``beta_prev``: ``beta <- soft(beta - step * grad, step * lambda_b)``."""
    _check(state, batch)
    if int(inner_iters) < 1:
        raise DomainError(f"inner_iters must be >= 1, got {inner_iters}")
    if not step > 0:
        raise DomainError(f"step must be positive, got {step}")
    if not lambda_b >= 0:
        raise DomainError(f"lambda_b must be nonnegative, got {lambda_b}")
    beta = state.beta_prev.copy()
    tau = step * lambda_b
    for it in range(1, int(inner_iters) + 1):
        beta = soft_threshold(beta - step * renewable_gradient(state, family, batch, beta), tau)
        peak = float(np.max(np.abs(beta)))
        if not peak <= DIVERGENCE_BOUND:
            raise DivergenceError(f"renewable iterate diverged at inner iteration {it}", iteration=it)
    return beta


def update_renewable_state(state: RenewableState, family: GlmFamily, batch: BatchData, beta_hat) -> RenewableState:
    _check(state, batch)
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    state.hess_cum += batch_hessian(family, batch, beta_hat)
    state.beta_prev = beta_hat.copy()
    state.n_total += batch.n
    state.batches_absorbed += 1
    return state


class RenewableLearner:
    def __init__(self, family: GlmFamily, p: Optional[int] = None, config: Optional[RenewableConfig] = None,
                 state: Optional[RenewableState] = None):
        if state is None:
            if p is None:
                raise DomainError("either p or state is required")
            state = init_renewable_state(p)
        self.family = family
        self.config = config or RenewableConfig()
        self.state = state

    @property
    def beta(self) -> np.ndarray:
        return self.state.beta_prev

    def partial_fit(self, batch: BatchData) -> EstimateRecord:
        t0 = time.perf_counter()
        n_cum = self.state.n_total + batch.n
        lam = default_lambda(self.config, self.state.p, n_cum)
        step = self.config.step if self.config.step is not None else default_step(self.state, self.family, batch)
        try:
            beta = fit_batch_renewable(self.state, self.family, batch, lam, self.config.inner_iters, step)
        except DivergenceError as exc:
            exc.batch_index = batch.batch_index
            raise
        update_renewable_state(self.state, self.family, batch, beta)
        return EstimateRecord(
            batch_index=batch.batch_index,
            beta_hat=beta,
            support=np.flatnonzero(beta),
            iterations_run=int(self.config.inner_iters),
            lambda_final=lam,
            wall_time=time.perf_counter() - t0,
            n_cumulative=n_cum,
            eta=step,
            lambda_init=lam,
        )

    # The renewable state fits the AD-IHT checkpoint layout with a zero
    # ``inter`` block: hess_cum goes in ``hess``, beta_prev in ``beta_hat``.
    def save(self, sink) -> None:
        st = self.state
        checkpoint_save(SummaryState(np.zeros(st.p), st.hess_cum, st.n_total, st.batches_absorbed), st.beta_prev, sink)

    @classmethod
    def load(cls, source, family: GlmFamily, config: Optional[RenewableConfig] = None) -> "RenewableLearner":
        summary, beta = checkpoint_load(source)
        state = RenewableState(summary.hess, beta, summary.n_total, summary.batches_absorbed)
        return cls(family, config=config, state=state)

"""Per-batch AD-IHT solver and the stream driver.

For batch ``b`` with cumulative sample size ``N_b`` the solver iterates

    H      <- beta - eta_b * (grad f_b(beta) + inter + hess @ beta)
    lambda <- max(kappa * lambda, lambda_floor)
    beta   <- hard_threshold(H, lambda)

for a planned number of steps (decay to the floor, then ``C1 ln N_b``
refinement steps), after which the batch is folded into the summary state
and dropped.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Union

import numpy as np

from . import kernels
from .errors import DivergenceError, DomainError, ShapeError
from .glm import BatchData, GlmFamily, batch_gradient, batch_hessian
from .summary import SummaryState, absorb_batch, checkpoint_load, checkpoint_save, init_state, surrogate_gradient
from .threshold import ThresholdSchedule, planned_iterations

__all__ = [
    "IhtConfig",
    "TraceStep",
    "EstimateRecord",
    "AdIhtLearner",
    "fit_batch",
    "fit_batch_detailed",
    "BatchFit",
    "run_iht",
    "compute_eta",
    "compute_lambda_floor",
    "compute_lambda_init",
    "build_schedule",
    "process_stream",
    "DIVERGENCE_BOUND",
]

log = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e12
LAMBDA_INIT_MARGIN = 1.05


@dataclass(frozen=True)
class IhtConfig:
    """Tuning constants for AD-IHT.

    ``eta_const`` sets the learning rate ``eta_b = eta_const / N_b`` (or
    ``eta_const / (L N_b)`` with ``eta_rule="calibrated"``, where ``L`` is a
    power-iteration estimate of the largest restricted eigenvalue of the
    normalised Hessian).  ``lambda_floor_const`` sets the threshold floor
    ``c * sqrt(log(b p) / N_b)``; it is in units of the noise scale.
    ``lambda_init`` is ``"gradient"`` or a positive number.
    """

    kappa: float = 0.8
    eta_const: float = 0.5
    refine_const: float = 2.0
    lambda_floor_const: float = 1.0
    lambda_init: Union[str, float] = "gradient"
    start_mode: str = "cold"
    max_iters_cap: Optional[int] = None
    eta_rule: str = "constant"
    calibration_k: int = 10

    def __post_init__(self):
        if not (0.0 < self.kappa < 1.0):
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa}")
        for name in ("eta_const", "refine_const", "lambda_floor_const"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a positive number, got {value!r}")
        if isinstance(self.lambda_init, str):
            if self.lambda_init != "gradient":
                raise DomainError(f"lambda_init must be 'gradient' or a positive number, got {self.lambda_init!r}")
        elif not (math.isfinite(self.lambda_init) and self.lambda_init > 0):
            raise DomainError(f"lambda_init must be positive, got {self.lambda_init!r}")
        if self.start_mode not in ("cold", "warm"):
            raise DomainError(f"start_mode must be 'cold' or 'warm', got {self.start_mode!r}")
        if self.max_iters_cap is not None and int(self.max_iters_cap) < 1:
            raise DomainError(f"max_iters_cap must be >= 1, got {self.max_iters_cap}")
        if self.eta_rule not in ("constant", "calibrated"):
            raise DomainError(f"eta_rule must be 'constant' or 'calibrated', got {self.eta_rule!r}")
        if int(self.calibration_k) < 1:
            raise DomainError(f"calibration_k must be >= 1, got {self.calibration_k}")


class TraceStep(NamedTuple):
    t: int
    lambda_t: float
    support_size: int
    grad_step_norm: float


@dataclass
class EstimateRecord:
    batch_index: int
    beta_hat: np.ndarray
    support: np.ndarray
    iterations_run: int
    lambda_final: float
    wall_time: float
    n_cumulative: int
    eta: float = float("nan")
    lambda_init: float = float("nan")
    trace: list = field(default_factory=list, repr=False)


def compute_lambda_floor(config: IhtConfig, batch_index: int, p: int, n_cumulative: int) -> float:
    # log(b p) vanishes for b = p = 1; clamp so the floor stays positive.
    return config.lambda_floor_const * math.sqrt(math.log(max(batch_index * p, 2)) / n_cumulative)


def _largest_eigenvalue(mat: np.ndarray, iters: int = 50) -> float:
    v = np.ones(mat.shape[0]) / math.sqrt(mat.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = mat @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        lam = float(v @ w)
        v = w / norm
    return max(lam, float(v @ (mat @ v)))


def _calibrated_curvature(hess_sum: np.ndarray, n_cumulative: int, k: int) -> float:
    diag = np.diag(hess_sum)
    k = min(k, diag.shape[0])
    idx = np.sort(np.argsort(-diag, kind="stable")[:k])
    sub = hess_sum[np.ix_(idx, idx)] / n_cumulative
    return _largest_eigenvalue(sub)


def compute_eta(config: IhtConfig, n_cumulative: int, hess_at_zero: Optional[Callable[[], np.ndarray]] = None) -> float:
    """Learning rate ``eta_b``.

    ``hess_at_zero`` is only consulted for the calibrated rule and must return
    the (approximate) cumulative Hessian ``hess + hess f_b(0)``.
    """
    if config.eta_rule == "constant":
        return config.eta_const / n_cumulative
    curvature = _calibrated_curvature(hess_at_zero(), n_cumulative, config.calibration_k)
    if not curvature > 0:
        return config.eta_const / n_cumulative
    return config.eta_const / (curvature * n_cumulative)


def compute_lambda_init(config: IhtConfig, eta: float, gradient_at_zero: np.ndarray, lambda_floor: float) -> float:
    """Initial threshold.

    The gradient rule returns ``1.05 * ||eta * g(0)||_inf``, the smallest
    threshold (with margin) that zeroes the whole first cold-start step; it
    falls back to ``lambda_floor`` when the gradient vanishes.
    """
    if config.lambda_init != "gradient":
        return float(config.lambda_init)
    scale = float(np.max(np.abs(eta * gradient_at_zero))) if gradient_at_zero.size else 0.0
    if scale == 0.0:
        return lambda_floor
    return LAMBDA_INIT_MARGIN * scale


def build_schedule(config: IhtConfig, lambda_init: float, lambda_floor: float) -> ThresholdSchedule:
    # A data-driven start below the floor is lifted to it: no decay phase.
    return ThresholdSchedule(max(lambda_init, lambda_floor), lambda_floor, config.kappa, config.refine_const)


def run_iht(
    grad_fn: Callable[[np.ndarray], np.ndarray],
    inter: np.ndarray,
    hess: Optional[np.ndarray],
    eta: float,
    schedule: ThresholdSchedule,
    n_iters: int,
    beta0: np.ndarray,
):
    """Run ``n_iters`` thresholded gradient steps on ``grad_fn(beta) + inter + hess @ beta``.

    Shared by the streaming solver and the offline oracle so that both follow
    exactly the same arithmetic.
    """
    beta = np.array(beta0, dtype=np.float64)
    lam = schedule.lambda_init
    trace = []
    for t in range(1, n_iters + 1):
        lam = max(schedule.kappa * lam, schedule.lambda_floor)
        beta, step_norm, h_max = kernels.iht_step(beta, grad_fn(beta), inter, hess, eta, lam)
        if not h_max <= DIVERGENCE_BOUND:
            raise DivergenceError(
                f"iterate diverged at iteration {t} (max |H| = {h_max:.3g}); reduce eta_const",
                iteration=t,
            )
        trace.append(TraceStep(t, lam, int(np.count_nonzero(beta)), step_norm))
    return beta, trace


def _iteration_budget(config: IhtConfig, schedule: ThresholdSchedule, n_cumulative: int) -> int:
    planned = planned_iterations(schedule, n_cumulative)
    cap = config.max_iters_cap if config.max_iters_cap is not None else 10 * planned
    return min(planned, int(cap))


def _prepare(state: SummaryState, family: GlmFamily, batch: BatchData, config: IhtConfig):
    if batch.p != state.p:
        raise ShapeError(f"batch has {batch.p} columns but the state has dimension {state.p}")
    n_cum = state.n_total + batch.n
    zero = np.zeros(state.p)
    eta = compute_eta(config, n_cum, lambda: state.hess + batch_hessian(family, batch, zero))
    floor = compute_lambda_floor(config, batch.batch_index, state.p, n_cum)
    lam0 = compute_lambda_init(config, eta, surrogate_gradient(state, family, batch, zero), floor)
    schedule = build_schedule(config, lam0, floor)
    return n_cum, eta, schedule


class BatchFit(NamedTuple):
    beta: np.ndarray
    trace: list
    eta: float
    schedule: ThresholdSchedule
    n_cumulative: int


def fit_batch_detailed(
    state: SummaryState,
    family: GlmFamily,
    batch: BatchData,
    config: IhtConfig,
    warm_init=None,
) -> BatchFit:
    """Like :func:`fit_batch` but also returns the step size and schedule used."""
    n_cum, eta, schedule = _prepare(state, family, batch, config)
    if config.start_mode == "warm":
        if warm_init is None:
            raise DomainError("warm start requested but no warm_init supplied")
        beta0 = np.asarray(warm_init, dtype=np.float64)
        if beta0.shape != (state.p,):
            raise ShapeError(f"warm_init has shape {beta0.shape}, expected ({state.p},)")
    else:
        beta0 = np.zeros(state.p)
    n_iters = _iteration_budget(config, schedule, n_cum)
    beta, trace = run_iht(
        lambda b: batch_gradient(family, batch, b),
        state.inter,
        state.hess,
        eta,
        schedule,
        n_iters,
        beta0,
    )
    return BatchFit(beta, trace, eta, schedule, n_cum)


def fit_batch(state: SummaryState, family: GlmFamily, batch: BatchData, config: IhtConfig, warm_init=None):
    """Solve batch ``b`` against the summary state; returns ``(beta_hat, trace)``.

    ``state`` is not modified.  With ``config.start_mode == "warm"`` the
    iteration starts from ``warm_init`` (usually the previous estimate).
    """
    fit = fit_batch_detailed(state, family, batch, config, warm_init)
    return fit.beta, fit.trace


class AdIhtLearner:
    """Streaming AD-IHT estimator holding only ``O(p^2)`` summary state.

    >>> learner = AdIhtLearner(GlmFamily.gaussian(), p=3)          # doctest: +SKIP
    >>> record = learner.partial_fit(batch)                         # doctest: +SKIP
    """

    def __init__(self, family: GlmFamily, p: Optional[int] = None, config: Optional[IhtConfig] = None,
                 state: Optional[SummaryState] = None, beta=None):
        if state is None:
            if p is None:
                raise DomainError("either p or state is required")
            state = init_state(p)
        self.family = family
        self.config = config or IhtConfig()
        self.state = state
        self.beta = np.zeros(state.p) if beta is None else np.asarray(beta, dtype=np.float64).copy()

    @property
    def p(self) -> int:
        return self.state.p

    def partial_fit(self, batch: BatchData) -> EstimateRecord:
        t0 = time.perf_counter()
        try:
            fit = fit_batch_detailed(self.state, self.family, batch, self.config, warm_init=self.beta)
        except DivergenceError as exc:
            exc.batch_index = batch.batch_index
            raise
        absorb_batch(self.state, self.family, batch, fit.beta)
        self.beta = fit.beta
        return EstimateRecord(
            batch_index=batch.batch_index,
            beta_hat=fit.beta,
            support=np.flatnonzero(fit.beta),
            iterations_run=len(fit.trace),
            lambda_final=fit.trace[-1].lambda_t,
            wall_time=time.perf_counter() - t0,
            n_cumulative=fit.n_cumulative,
            eta=fit.eta,
            lambda_init=fit.schedule.lambda_init,
            trace=fit.trace,
        )

    def save(self, sink) -> None:
        checkpoint_save(self.state, self.beta, sink)

    @classmethod
    def load(cls, source, family: GlmFamily, config: Optional[IhtConfig] = None) -> "AdIhtLearner":
        state, beta = checkpoint_load(source)
        return cls(family, config=config, state=state, beta=beta)


def process_stream(
    batches: Iterable[BatchData],
    family: GlmFamily,
    config: IhtConfig,
    sink: Optional[Callable[[EstimateRecord], None]] = None,
    *,
    p: Optional[int] = None,
    state: Optional[SummaryState] = None,
    warm_init=None,
    on_error: str = "abort",
) -> SummaryState:
    """Fit, emit, absorb and drop each batch in turn; return the final state.

    ``on_error="skip"`` logs a diverging batch and continues without
    absorbing it.  The dimension is taken from ``state``, ``p`` or the first
    batch, in that order.
    """
    if on_error not in ("abort", "skip"):
        raise DomainError(f"on_error must be 'abort' or 'skip', got {on_error!r}")
    learner = None
    if state is not None or p is not None:
        learner = AdIhtLearner(family, p=p, config=config, state=state, beta=warm_init)
    for batch in batches:
        if learner is None:
            learner = AdIhtLearner(family, p=batch.p, config=config, beta=warm_init)
        try:
            record = learner.partial_fit(batch)
        except DivergenceError as exc:
            if on_error == "abort":
                raise
            log.warning("batch %d skipped: %s", batch.batch_index, exc)
            continue
        if sink is not None:
            sink(record)
    if learner is None:
        raise DomainError("empty stream: pass p or state so the dimension is known")
    return learner.state

"""Full-data reference estimators used as test oracles.

These keep every batch in memory and are therefore segregated from the
streaming engine.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .engine import (
    IhtConfig,
    _iteration_budget,
    build_schedule,
    compute_eta,
    compute_lambda_floor,
    compute_lambda_init,
    run_iht,
)
from .errors import ConvergenceError, DomainError, ShapeError, SingularHessianError
from .glm import BatchData, GlmFamily, batch_gradient, batch_hessian, batch_loss

__all__ = ["concat_batches", "offline_iht", "oracle_support_mle"]


def concat_batches(all_batches: Sequence[BatchData]) -> BatchData:
    if not all_batches:
        raise DomainError("need at least one batch")
    if len(all_batches) == 1:
        return all_batches[0]
    p = all_batches[0].p
    if any(b.p != p for b in all_batches):
        raise ShapeError("batches disagree on the number of columns")
    return BatchData(
        np.concatenate([b.design for b in all_batches]),
        np.concatenate([b.response for b in all_batches]),
        all_batches[-1].batch_index,
    )


def offline_iht(family: GlmFamily, all_batches: Sequence[BatchData], config: IhtConfig):
    """Cold-start IHT on the exact cumulative gradient of all batches.

    Uses the same step size rule, threshold schedule and iteration count as
    the streaming solver would for the last batch.  Returns ``(beta, trace)``.
    """
    full = concat_batches(all_batches)
    p, n_total = full.p, full.n
    zero = np.zeros(p)
    eta = compute_eta(config, n_total, lambda: batch_hessian(family, full, zero))
    floor = compute_lambda_floor(config, all_batches[-1].batch_index, p, n_total)
    lam0 = compute_lambda_init(config, eta, batch_gradient(family, full, zero), floor)
    schedule = build_schedule(config, lam0, floor)
    n_iters = _iteration_budget(config, schedule, n_total)
    return run_iht(lambda b: batch_gradient(family, full, b), np.zeros(p), None, eta, schedule, n_iters, zero)


def oracle_support_mle(
    family: GlmFamily,
    all_batches: Sequence[BatchData],
    support_star,
    newton_iters: int = 50,
    tol: float = 1e-8,
) -> np.ndarray:
    """MLE restricted to ``support_star`` by damped Newton; zeros elsewhere.

    Converged means the restricted gradient has sup-norm at most ``tol`` and the
    last Newton step was negligible; the second condition keeps separable
    logistic data (MLE at infinity, vanishing gradient) from passing as converged.
    """
    full = concat_batches(all_batches)
    support = np.asarray(sorted(int(j) for j in support_star), dtype=np.intp)
    if support.size > full.n:
        raise DomainError(f"support size {support.size} exceeds the sample size {full.n}")
    restricted = BatchData(full.design[:, support], full.response, full.batch_index)
    beta_s = np.zeros(support.size)
    loss = batch_loss(family, restricted, beta_s)
    step_size = np.inf
    for it in range(newton_iters + 1):
        grad = batch_gradient(family, restricted, beta_s)
        if np.max(np.abs(grad), initial=0.0) <= tol and step_size <= 1e-6 * (1.0 + np.max(np.abs(beta_s), initial=0.0)):
            break
        if it == newton_iters:
            raise ConvergenceError(
                f"restricted Newton did not converge in {newton_iters} iterations", last_iterate=_embed(beta_s, support, full.p)
            )
        hess = batch_hessian(family, restricted, beta_s)
        try:
            chol = np.linalg.cholesky(hess)
        except np.linalg.LinAlgError:
            if it == 0:
                raise SingularHessianError("restricted Hessian is singular at the starting point") from None
            raise ConvergenceError(
                "restricted Hessian became singular; the MLE may not exist",
                last_iterate=_embed(beta_s, support, full.p),
            ) from None
        direction = np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        t = 1.0
        while True:
            candidate = beta_s - t * direction
            new_loss = batch_loss(family, restricted, candidate)
            if new_loss <= loss or t < 1e-10:
                break
            t *= 0.5
        step_size = float(np.max(np.abs(candidate - beta_s), initial=0.0))
        beta_s, loss = candidate, new_loss
    return _embed(beta_s, support, full.p)


def _embed(beta_s, support, p):
    out = np.zeros(p)
    out[support] = beta_s
    return out

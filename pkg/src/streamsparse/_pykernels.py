"""Pure-numpy implementations of the hot kernels (fallback for ``_kernels``)."""
import numpy as np


def hard_threshold(z, lam):
    z = np.asarray(z, dtype=np.float64)
    return np.where(np.abs(z) >= lam, z, 0.0)


def iht_step(beta, grad_b, inter, hess, eta, lam):
    """One thresholded gradient step on the surrogate gradient.

    ``grad_b + inter + hess @ beta`` is formed using only the nonzero
    coordinates of ``beta``.  Returns ``(beta_new, step_norm, h_max)`` where
    ``step_norm`` is the 2-norm of ``eta * surrogate_gradient`` and ``h_max``
    is ``max |h|`` (``inf`` if any entry of ``h`` is not finite).
    """
    g = grad_b + inter
    if hess is not None:
        nz = np.flatnonzero(beta)
        if nz.size:
            g = g + hess[nz].T @ beta[nz]
    step = eta * g
    h = beta - step
    h_max = float(np.max(np.abs(h))) if h.size else 0.0
    if not np.isfinite(h_max):
        h_max = np.inf
    beta_new = np.where(np.abs(h) >= lam, h, 0.0)
    return beta_new, float(np.sqrt(step @ step)), h_max

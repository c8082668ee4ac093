"""Estimation-error, support-recovery and score diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .errors import DomainError, ShapeError
from .glm import BatchData, GlmFamily, batch_gradient

__all__ = [
    "BatchMetrics",
    "CSV_COLUMNS",
    "l2_error",
    "linf_error",
    "support_of",
    "support_errors",
    "scaled_error",
    "ScoreAccumulator",
    "format_float",
]

CSV_COLUMNS = (
    "b", "N_b", "method", "seed", "l2_error", "linf_error", "support_size", "fp", "fn",
    "scaled_error", "alpha_emp", "theta_emp", "oracle_ratio", "iters", "lambda_final", "wall_ms",
)


def _pair(beta_hat, beta_star):
    a = np.asarray(beta_hat, dtype=np.float64)
    b = np.asarray(beta_star, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def l2_error(beta_hat, beta_star) -> float:
    a, b = _pair(beta_hat, beta_star)
    return float(np.linalg.norm(a - b))


def linf_error(beta_hat, beta_star) -> float:
    a, b = _pair(beta_hat, beta_star)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def support_of(beta) -> set:
    return set(np.flatnonzero(np.asarray(beta)).tolist())


def support_errors(beta_hat, support_star) -> tuple[int, int]:
    """``(|S_hat minus S*|, |S* minus S_hat|)`` with exact-zero support."""
    s_hat = support_of(beta_hat)
    s_star = {int(j) for j in support_star}
    return len(s_hat - s_star), len(s_star - s_hat)


def scaled_error(l2: float, n_cumulative: int, s: int, p: int, b: int) -> float:
    """``l2 / sqrt(s (ln p + ln b) / N_b)``."""
    if min(n_cumulative, s, p, b) <= 0:
        raise DomainError("scaled_error needs positive N_b, s, p and b")
    rate = math.sqrt(s * (math.log(p) + math.log(b)) / n_cumulative)
    if rate == 0.0:
        raise DomainError("rate is zero (p = b = 1)")
    return l2 / rate


class ScoreAccumulator:
    """Running cumulative score ``sum_k grad f_k(beta*)`` (simulation only)."""

    def __init__(self, family: GlmFamily, beta_star, support_star=None):
        self.family = family
        self.beta_star = np.asarray(beta_star, dtype=np.float64)
        if support_star is None:
            support_star = np.flatnonzero(self.beta_star)
        self.support_star = np.asarray(sorted(int(j) for j in support_star), dtype=np.intp)
        self.score = np.zeros_like(self.beta_star)

    def absorb(self, batch: BatchData) -> None:
        self.score += batch_gradient(self.family, batch, self.beta_star)

    def read(self) -> tuple[float, float]:
        alpha = float(np.max(np.abs(self.score))) if self.score.size else 0.0
        theta = float(np.linalg.norm(self.score[self.support_star]))
        return alpha, theta


def format_float(x: Optional[float]) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


@dataclass
class BatchMetrics:
    b: int
    N_b: int
    method: str = ""
    seed: Optional[int] = None
    l2_error: Optional[float] = None
    linf_error: Optional[float] = None
    support_size: int = 0
    fp: Optional[int] = None
    fn: Optional[int] = None
    scaled_error: Optional[float] = None
    alpha_emp: Optional[float] = None
    theta_emp: Optional[float] = None
    oracle_ratio: Optional[float] = None
    iters: Optional[int] = None
    lambda_final: Optional[float] = None
    wall_ms: Optional[float] = None

    def __post_init__(self):
        for name in ("support_size", "fp", "fn"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise DomainError(f"{name} must be nonnegative")

    @classmethod
    def compute(cls, b, n_cumulative, beta_hat, beta_star=None, support_star=None, **extra) -> "BatchMetrics":
        beta_hat = np.asarray(beta_hat, dtype=np.float64)
        m = cls(b=b, N_b=n_cumulative, support_size=int(np.count_nonzero(beta_hat)), **extra)
        if beta_star is not None:
            beta_star = np.asarray(beta_star, dtype=np.float64)
            if support_star is None:
                support_star = np.flatnonzero(beta_star)
            m.l2_error = l2_error(beta_hat, beta_star)
            m.linf_error = linf_error(beta_hat, beta_star)
            m.fp, m.fn = support_errors(beta_hat, support_star)
            m.scaled_error = scaled_error(m.l2_error, n_cumulative, len(support_star), beta_hat.shape[0], b)
        return m

    def to_row(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                out.append("")
            elif isinstance(v, (float, np.floating)):
                out.append(format_float(float(v)))
            else:
                out.append(str(v))
        return out

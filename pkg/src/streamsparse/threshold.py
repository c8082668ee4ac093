"""Hard thresholding and the geometric-decay-with-floor threshold schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError

__all__ = ["ThresholdSchedule", "hard_threshold", "next_threshold", "planned_iterations", "decay_steps"]


@dataclass(frozen=True)
class ThresholdSchedule:
    lambda_init: float
    lambda_floor: float
    kappa: float
    refine_const: float

    def __post_init__(self):
        if not (0.0 < self.lambda_floor <= self.lambda_init):
            raise DomainError(
                f"need 0 < lambda_floor <= lambda_init, got floor={self.lambda_floor}, init={self.lambda_init}"
            )
        if not (0.0 < self.kappa < 1.0):
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not self.refine_const > 0.0:
            raise DomainError(f"refine_const must be positive, got {self.refine_const}")


def hard_threshold(z, lam: float) -> np.ndarray:
    """Keep ``z_j`` when ``|z_j| >= lam``, zero it otherwise.  Ties survive."""
    if not lam >= 0.0:
        raise DomainError(f"threshold must be nonnegative, got {lam}")
    return kernels.hard_threshold(np.asarray(z, dtype=np.float64), float(lam))


def next_threshold(lambda_t: float, schedule: ThresholdSchedule) -> float:
    return max(schedule.kappa * lambda_t, schedule.lambda_floor)


def decay_steps(schedule: ThresholdSchedule) -> int:
    """Number of decay steps before the threshold sits on its floor."""
    if schedule.lambda_init == schedule.lambda_floor:
        return 0
    k = max(0, math.ceil(math.log(schedule.lambda_floor / schedule.lambda_init) / math.log(schedule.kappa)))
    if k > 100_000:
        return k
    # Count the actual recursion so the plan agrees with next_threshold at
    # float boundaries where the log ratio is within rounding of an integer.
    lam, steps = schedule.lambda_init, 0
    while lam > schedule.lambda_floor:
        lam = next_threshold(lam, schedule)
        steps += 1
    return steps


def planned_iterations(schedule: ThresholdSchedule, n_total: int) -> int:
    """Decay steps plus ``ceil(C1 * ln N)`` refinement steps, at least one."""
    if n_total < 1:
        raise DomainError(f"N must be >= 1, got {n_total}")
    refine = math.ceil(schedule.refine_const * math.log(n_total))
    return max(1, decay_steps(schedule) + refine)

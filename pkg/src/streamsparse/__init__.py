"""Streaming sparse GLM regression by asynchronous-decomposition IHT."""
from .engine import AdIhtLearner, EstimateRecord, IhtConfig, fit_batch, process_stream
from .errors import (
    CheckpointError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    ShapeError,
    StreamSparseError,
)
from .glm import BatchData, Family, GlmFamily, batch_gradient, batch_hessian, batch_loss, link_value
from .kernels import BACKEND
from .metrics import BatchMetrics, ScoreAccumulator, l2_error, scaled_error, support_errors
from .renewable import RenewableConfig, RenewableLearner
from .simdata import DesignSpec, StreamSpec, SyntheticStream, TruthSpec
from .summary import SummaryState, absorb_batch, checkpoint_load, checkpoint_save, init_state, surrogate_gradient
from .threshold import ThresholdSchedule, hard_threshold, next_threshold, planned_iterations

__version__ = "0.1.0"

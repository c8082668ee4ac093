"""Cumulative summary statistics for asynchronous decomposition.

After batches ``1..b-1`` the state holds

    inter = sum_j  grad f_j(beta_j) - hess f_j(beta_j) @ beta_j
    hess  = sum_j  hess f_j(beta_j)

where ``beta_j`` is the final estimate produced for batch ``j``.  The
cumulative score at any ``beta`` is then approximated by
``grad f_b(beta) + inter + hess @ beta``; this is exact for quadratic losses.
Storage is ``O(p^2)`` regardless of how many batches have been absorbed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    DimensionOverflowError,
    DomainError,
    ShapeError,
    TruncatedStreamError,
    UnsupportedVersionError,
)
from .glm import BatchData, GlmFamily, batch_gradient, batch_hessian

__all__ = [
    "SummaryState",
    "init_state",
    "absorb_batch",
    "surrogate_gradient",
    "checkpoint_save",
    "checkpoint_load",
    "checkpoint_size",
    "MAGIC",
    "VERSION",
]

MAGIC = b"ADS1"
VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")
# Refuse to allocate more than 2**40 bytes worth of float64s on load.
_MAX_FLOATS = 2**37


@dataclass
class SummaryState:
    inter: np.ndarray
    hess: np.ndarray
    n_total: int = 0
    batches_absorbed: int = 0

    @property
    def p(self) -> int:
        return self.inter.shape[0]

    def copy(self) -> "SummaryState":
        return SummaryState(self.inter.copy(), self.hess.copy(), self.n_total, self.batches_absorbed)

    @property
    def nbytes(self) -> int:
        return self.inter.nbytes + self.hess.nbytes


def init_state(p: int) -> SummaryState:
    if int(p) < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    p = int(p)
    return SummaryState(np.zeros(p), np.zeros((p, p)), 0, 0)


def _check_dims(state: SummaryState, batch: BatchData, beta) -> np.ndarray:
    if batch.p != state.p:
        raise ShapeError(f"batch has {batch.p} columns but the state has dimension {state.p}")
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (state.p,):
        raise ShapeError(f"beta has shape {beta.shape}, expected ({state.p},)")
    return beta


def absorb_batch(state: SummaryState, family: GlmFamily, batch: BatchData, beta_hat) -> SummaryState:
    """Fold ``batch`` evaluated at its final estimate into ``state`` (in place).

    The batch is not referenced after this call returns.  Returns ``state``.
    """
    beta_hat = _check_dims(state, batch, beta_hat)
    if not np.all(np.isfinite(beta_hat)):
        raise DomainError("beta_hat contains non-finite entries")
    h = batch_hessian(family, batch, beta_hat)
    state.inter += batch_gradient(family, batch, beta_hat) - h @ beta_hat
    state.hess += h
    state.n_total += batch.n
    state.batches_absorbed += 1
    return state


def surrogate_gradient(state: SummaryState, family: GlmFamily, current_batch: BatchData, beta) -> np.ndarray:
    beta = _check_dims(state, current_batch, beta)
    return batch_gradient(family, current_batch, beta) + state.inter + state.hess @ beta


def checkpoint_size(p: int) -> int:
    return _HEADER.size + 8 * (2 * p + p * p)


def checkpoint_save(state: SummaryState, beta_hat, sink) -> None:
    """Write ``state`` and ``beta_hat`` to the binary stream ``sink``.

    Layout (little-endian, no padding): magic ``ADS1``, u32 version, u64 p,
    u64 n_total, u64 batches_absorbed, then p f64 ``beta_hat``, p f64
    ``inter`` and p*p f64 ``hess`` in row-major order.
    """
    p = state.p
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    if beta_hat.shape != (p,):
        raise ShapeError(f"beta_hat has shape {beta_hat.shape}, expected ({p},)")
    if not (np.all(np.isfinite(state.inter)) and np.all(np.isfinite(state.hess)) and np.all(np.isfinite(beta_hat))):
        raise DomainError("refusing to checkpoint a non-finite state")
    sink.write(_HEADER.pack(MAGIC, VERSION, p, int(state.n_total), int(state.batches_absorbed)))
    for arr in (beta_hat, state.inter, state.hess):
        sink.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(source, nbytes: int, what: str) -> bytes:
    buf = source.read(nbytes)
    if buf is None or len(buf) != nbytes:
        got = 0 if buf is None else len(buf)
        raise TruncatedStreamError(f"truncated checkpoint: needed {nbytes} bytes for {what}, got {got}")
    return buf


def checkpoint_load(source) -> tuple[SummaryState, np.ndarray]:
    """Inverse of :func:`checkpoint_save`; returns ``(state, beta_hat)``."""
    head = source.read(_HEADER.size)
    if head is None:
        head = b""
    if len(head) >= 4 and head[:4] != MAGIC:
        raise BadMagicError(f"bad magic {head[:4]!r}, expected {MAGIC!r}")
    if len(head) < _HEADER.size:
        raise TruncatedStreamError(f"truncated checkpoint header ({len(head)} of {_HEADER.size} bytes)")
    _, version, p, n_total, batches = _HEADER.unpack(head)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
    if p < 1 or p * p + 2 * p > _MAX_FLOATS:
        raise DimensionOverflowError(f"checkpoint dimension p={p} is out of range")
    beta = np.frombuffer(_read_exact(source, 8 * p, "beta_hat"), dtype="<f8").astype(np.float64)
    inter = np.frombuffer(_read_exact(source, 8 * p, "inter"), dtype="<f8").astype(np.float64)
    hess = np.frombuffer(_read_exact(source, 8 * p * p, "hess"), dtype="<f8").astype(np.float64).reshape(p, p)
    return SummaryState(inter, hess, int(n_total), int(batches)), beta

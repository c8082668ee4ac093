import io
import itertools

import numpy as np
import pytest

from streamsparse.errors import (
    BadMagicError,
    DimensionOverflowError,
    DomainError,
    ShapeError,
    TruncatedStreamError,
    UnsupportedVersionError,
)
from streamsparse.glm import BatchData, batch_gradient, batch_hessian
from streamsparse.summary import (
    absorb_batch,
    checkpoint_load,
    checkpoint_save,
    checkpoint_size,
    init_state,
    surrogate_gradient,
)

from conftest import FAMILIES, random_response

G = FAMILIES["gaussian"]


def _history(family, rng, p=6, count=5):
    out = []
    for b in range(1, count + 1):
        n = int(rng.integers(3, 12))
        X = rng.standard_normal((n, p))
        beta = np.where(rng.random(p) < 0.5, 0.4 * rng.standard_normal(p), 0.0)
        out.append((BatchData(X, random_response(family, X, beta, rng), b), beta))
    return out


def test_init_state():
    s = init_state(3)
    assert np.array_equal(s.inter, np.zeros(3))
    assert np.array_equal(s.hess, np.zeros((3, 3)))
    assert s.n_total == 0 and s.batches_absorbed == 0
    s1 = init_state(1)
    assert s1.hess.shape == (1, 1)
    with pytest.raises(DomainError):
        init_state(0)


def test_fresh_state_surrogate_is_batch_gradient(family, rng):
    batch, beta = _history(family, rng, count=1)[0]
    np.testing.assert_array_equal(
        surrogate_gradient(init_state(6), family, batch, beta), batch_gradient(family, batch, beta)
    )


def test_absorb_example():
    s = absorb_batch(init_state(2), G, BatchData([[1, 2]], [3]), [0, 0])
    np.testing.assert_array_equal(s.inter, [-3, -6])
    np.testing.assert_array_equal(s.hess, [[1, 2], [2, 4]])
    assert s.n_total == 1 and s.batches_absorbed == 1
    g = surrogate_gradient(s, G, BatchData([[0, 1]], [0]), [0, 0])
    np.testing.assert_array_equal(g, [-3, -6])


def test_absorb_at_zero_adds_gradient_only(family, rng):
    batch, _ = _history(family, rng, count=1)[0]
    s = absorb_batch(init_state(6), family, batch, np.zeros(6))
    np.testing.assert_array_equal(s.inter, batch_gradient(family, batch, np.zeros(6)))


def test_double_absorb_doubles(family, rng):
    batch, beta = _history(family, rng, count=1)[0]
    once = absorb_batch(init_state(6), family, batch, beta)
    twice = absorb_batch(absorb_batch(init_state(6), family, batch, beta), family, batch, beta)
    np.testing.assert_allclose(twice.inter, 2 * once.inter, rtol=1e-15)
    np.testing.assert_allclose(twice.hess, 2 * once.hess, rtol=1e-15)
    assert twice.n_total == 2 * once.n_total


def test_absorb_validation(rng):
    batch, beta = _history(G, rng, count=1)[0]
    with pytest.raises(ShapeError):
        absorb_batch(init_state(5), G, batch, beta[:5])
    with pytest.raises(DomainError):
        absorb_batch(init_state(6), G, batch, np.full(6, np.nan))


def test_decomposition_identity_replay(family, rng):
    history = _history(family, rng, count=8)
    state = init_state(6)
    for batch, beta in history:
        absorb_batch(state, family, batch, beta)
        assert np.array_equal(state.hess, state.hess.T)
    for _ in range(10):
        beta = rng.standard_normal(6)
        expected = sum(
            batch_gradient(family, b, bh) + batch_hessian(family, b, bh) @ (beta - bh) for b, bh in history
        )
        got = state.inter + state.hess @ beta
        assert np.linalg.norm(got - expected) <= 1e-10 * max(np.linalg.norm(expected), 1.0)


def test_gaussian_quadratic_exactness(rng):
    history = _history(G, rng, count=6)
    state = init_state(6)
    for batch, beta in history[:-1]:
        absorb_batch(state, G, batch, beta)
    current = history[-1][0]
    for _ in range(10):
        beta = rng.standard_normal(6)
        exact = sum(b.design.T @ (b.design @ beta - b.response) for b, _ in history)
        got = surrogate_gradient(state, G, current, beta)
        np.testing.assert_allclose(got, exact, rtol=1e-8, atol=1e-8 * np.linalg.norm(exact))


def test_order_insensitive(family, rng):
    history = _history(family, rng, count=4)
    ref = None
    for perm in itertools.permutations(history):
        s = init_state(6)
        for batch, beta in perm:
            absorb_batch(s, family, batch, beta)
        if ref is None:
            ref = s
        np.testing.assert_allclose(s.inter, ref.inter, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(s.hess, ref.hess, rtol=1e-12, atol=1e-12)
        assert s.n_total == ref.n_total


def test_storage_independent_of_history(rng):
    s = init_state(6)
    sizes = set()
    for batch, beta in _history(G, rng, count=20):
        absorb_batch(s, G, batch, beta)
        sizes.add(s.nbytes)
    assert sizes == {8 * (6 + 36)}


def _roundtrip(state, beta):
    buf = io.BytesIO()
    checkpoint_save(state, beta, buf)
    raw = buf.getvalue()
    s2, b2 = checkpoint_load(io.BytesIO(raw))
    return raw, s2, b2


def test_checkpoint_roundtrip_fresh():
    raw, s, b = _roundtrip(init_state(5), np.zeros(5))
    assert len(raw) == checkpoint_size(5) == 4 + 4 + 24 + 8 * (10 + 25)
    assert np.array_equal(s.inter, np.zeros(5)) and s.n_total == 0
    assert np.array_equal(b, np.zeros(5))


def test_checkpoint_roundtrip_bit_exact(family, rng):
    batch, beta = _history(family, rng, count=1)[0]
    state = absorb_batch(init_state(6), family, batch, beta)
    raw, s2, b2 = _roundtrip(state, beta)
    assert s2.inter.tobytes() == state.inter.tobytes()
    assert s2.hess.tobytes() == state.hess.tobytes()
    assert b2.tobytes() == beta.tobytes()
    assert (s2.n_total, s2.batches_absorbed) == (state.n_total, state.batches_absorbed)
    again = io.BytesIO()
    checkpoint_save(s2, b2, again)
    assert again.getvalue() == raw


def test_checkpoint_layout():
    state = init_state(2)
    state.inter[:] = [1.5, -2.0]
    state.hess[:] = [[1, 2], [2, 4]]
    state.n_total, state.batches_absorbed = 7, 3
    buf = io.BytesIO()
    checkpoint_save(state, np.array([0.25, 0.0]), buf)
    raw = buf.getvalue()
    assert raw[:4] == b"ADS1"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:16], "little") == 2
    assert int.from_bytes(raw[16:24], "little") == 7
    assert int.from_bytes(raw[24:32], "little") == 3
    np.testing.assert_array_equal(np.frombuffer(raw[32:], "<f8"), [0.25, 0, 1.5, -2, 1, 2, 2, 4])


def test_checkpoint_errors():
    buf = io.BytesIO()
    checkpoint_save(init_state(3), np.zeros(3), buf)
    raw = buf.getvalue()
    with pytest.raises(TruncatedStreamError):
        checkpoint_load(io.BytesIO(raw[:-1]))
    with pytest.raises(TruncatedStreamError):
        checkpoint_load(io.BytesIO(raw[:10]))
    with pytest.raises(BadMagicError):
        checkpoint_load(io.BytesIO(b"XXXX" + raw[4:]))
    with pytest.raises(UnsupportedVersionError):
        checkpoint_load(io.BytesIO(raw[:4] + (2).to_bytes(4, "little") + raw[8:]))
    with pytest.raises(DimensionOverflowError):
        checkpoint_load(io.BytesIO(raw[:8] + (2**40).to_bytes(8, "little") + raw[16:]))
    with pytest.raises(DimensionOverflowError):
        checkpoint_load(io.BytesIO(raw[:8] + (0).to_bytes(8, "little") + raw[16:]))

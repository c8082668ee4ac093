import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from streamsparse.errors import DomainError
from streamsparse.glm import BatchData, GlmFamily
from streamsparse.renewable import (
    RenewableConfig,
    RenewableLearner,
    default_step,
    fit_batch_renewable,
    init_renewable_state,
    renewable_gradient,
    renewable_objective,
    soft_threshold,
    update_renewable_state,
)

G = GlmFamily.gaussian()


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold([2, -0.5], 1), [1, 0])
    z = np.array([0.3, -4.0])
    np.testing.assert_array_equal(soft_threshold(z, 0), z)
    np.testing.assert_array_equal(soft_threshold([-3], 3), [0])
    with pytest.raises(DomainError):
        soft_threshold([1.0], -1)


pairs = st.integers(1, 20).flatmap(
    lambda n: st.tuples(
        arrays(np.float64, n, elements=st.floats(-1e3, 1e3)),
        arrays(np.float64, n, elements=st.floats(-1e3, 1e3)),
    )
)


@given(pairs, st.floats(0, 100))
def test_soft_threshold_is_contraction(zz, tau):
    z, w = zz
    lhs = np.linalg.norm(soft_threshold(z, tau) - soft_threshold(w, tau))
    assert lhs <= np.linalg.norm(z - w) * (1 + 1e-12) + 1e-12


def test_orthogonal_first_batch_one_step():
    n = 3
    X = math.sqrt(n) * np.eye(3)
    Y = np.array([1.0, -2.0, 0.5])
    batch = BatchData(X, Y)
    beta = fit_batch_renewable(init_renewable_state(3), G, batch, 0.0, 1, step=float(n) / n)
    np.testing.assert_allclose(beta, X.T @ Y / n, rtol=1e-15)


def test_huge_lambda_gives_zero():
    rng = np.random.default_rng(0)
    batch = BatchData(rng.standard_normal((30, 10)), rng.standard_normal(30))
    state = init_renewable_state(10)
    big = np.max(np.abs(renewable_gradient(state, G, batch, np.zeros(10))))
    beta = fit_batch_renewable(state, G, batch, big * 1.01, 50, default_step(state, G, batch))
    assert np.array_equal(beta, np.zeros(10))


def _cd_lasso(X, Y, lam, n_cum, sweeps=5000):
    """Coordinate descent on (1/N)(0.5 b'Ab - c'b) + lam |b|_1, written for this test only."""
    A, c = X.T @ X, X.T @ Y
    b = np.zeros(X.shape[1])
    for _ in range(sweeps):
        old = b.copy()
        for j in range(b.size):
            r = c[j] - A[j] @ b + A[j, j] * b[j]
            b[j] = np.sign(r) * max(abs(r) - n_cum * lam, 0.0) / A[j, j]
        if np.max(np.abs(b - old)) < 1e-15:
            break
    return b


def _problem(seed=1, n=60, p=15):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:3] = [1.0, -0.7, 0.5]
    return BatchData(X, X @ beta + 0.5 * rng.standard_normal(n))


def test_matches_coordinate_descent_lasso():
    batch = _problem()
    state = init_renewable_state(batch.p)
    step = default_step(state, G, batch)
    ista = fit_batch_renewable(state, G, batch, 0.1, 500, step)
    cd = _cd_lasso(batch.design, batch.response, 0.1, batch.n)
    f_ista = renewable_objective(state, G, batch, ista, 0.1)
    f_cd = renewable_objective(state, G, batch, cd, 0.1)
    assert abs(f_ista - f_cd) <= 1e-6


def test_first_batch_equals_plain_lasso():
    batch = _problem(seed=2)
    state = init_renewable_state(batch.p)
    ista = fit_batch_renewable(state, G, batch, 0.05, 5000, default_step(state, G, batch))
    cd = _cd_lasso(batch.design, batch.response, 0.05, batch.n)
    assert abs(renewable_objective(state, G, batch, ista, 0.05) - renewable_objective(state, G, batch, cd, 0.05)) <= 1e-8


def test_objective_descent_with_history():
    rng = np.random.default_rng(3)
    state = init_renewable_state(12)
    for b in range(1, 5):
        batch = _problem(seed=10 + b, n=40, p=12)
        batch.batch_index = b
        step = default_step(state, G, batch)
        lam = 0.05
        beta = state.beta_prev.copy()
        prev = renewable_objective(state, G, batch, beta, lam)
        for _ in range(50):
            beta = soft_threshold(beta - step * renewable_gradient(state, G, batch, beta), step * lam)
            cur = renewable_objective(state, G, batch, beta, lam)
            assert cur <= prev + 1e-12 * abs(prev)
            prev = cur
        update_renewable_state(state, G, batch, beta)
        assert np.array_equal(state.hess_cum, state.hess_cum.T)
        assert np.linalg.eigvalsh(state.hess_cum)[0] >= -1e-8 * (1 + np.linalg.norm(state.hess_cum, 2))


def test_learner_checkpoint_roundtrip():
    learner = RenewableLearner(G, p=15, config=RenewableConfig(lambda_const=0.5, inner_iters=50))
    for b in range(1, 4):
        batch = _problem(seed=b)
        batch.batch_index = b
        learner.partial_fit(batch)
    buf = io.BytesIO()
    learner.save(buf)
    buf.seek(0)
    clone = RenewableLearner.load(buf, G, learner.config)
    nxt = _problem(seed=9)
    nxt.batch_index = 4
    assert learner.partial_fit(nxt).beta_hat.tobytes() == clone.partial_fit(nxt).beta_hat.tobytes()


def test_config_validation():
    with pytest.raises(DomainError):
        RenewableConfig(lambda_const=0)
    with pytest.raises(DomainError):
        RenewableConfig(inner_iters=0)

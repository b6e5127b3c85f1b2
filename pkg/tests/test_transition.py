import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sapsom.som import InputError
from sapsom.transition import TransitionModel


def one_hot(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def test_predict_density_identity_and_zero():
    model = TransitionModel(np.stack([np.eye(5), np.zeros((5, 5))]))
    p = np.random.default_rng(0).dirichlet(np.ones(5))
    assert np.array_equal(model.predict_density(0, p), p)
    assert np.array_equal(model.predict_density(1, p), np.zeros(5))


def test_predict_density_one_hot_selects_column():
    m = np.random.default_rng(1).normal(size=(1, 4, 4))
    model = TransitionModel(m)
    assert np.array_equal(model.predict_density(0, one_hot(2, 4)), m[0][:, 2])


def test_predict_density_dimension_mismatch():
    with pytest.raises(InputError):
        TransitionModel.zeros(2, 4).predict_density(0, np.ones(3))


def test_learn_zero_residual_and_zero_rate():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(2, 4, 4))
    model = TransitionModel(m.copy())
    p = rng.dirichlet(np.ones(4))
    model.learn(0, p, m[0] @ p, 0.3)
    assert np.allclose(model.matrices, m, atol=1e-15)
    model.learn(1, p, rng.dirichlet(np.ones(4)), 0.0)
    assert np.array_equal(model.matrices[1], m[1])


def test_learn_outer_product_hand_value():
    model = TransitionModel.zeros(2, 4)
    model.learn(1, one_hot(3, 4), one_hot(0, 4), 0.05)
    expected = np.zeros((4, 4))
    expected[0, 3] = 0.05
    assert np.array_equal(model.matrices[1], expected)
    assert not np.any(model.matrices[0])


@given(st.integers(0, 10_000), st.integers(0, 2))
def test_learn_touches_only_its_action(seed, a):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(3, 5, 5))
    model = TransitionModel(m.copy())
    model.learn(a, rng.random(5), rng.random(5), 0.1)
    for b in range(3):
        if b != a:
            assert np.array_equal(model.matrices[b], m[b])


@settings(max_examples=100)
@given(st.integers(0, 10_000), st.floats(0.05, 1.0))
def test_descent_property(seed, fraction):
    rng = np.random.default_rng(seed)
    n = 6
    model = TransitionModel(rng.normal(size=(1, n, n)))
    p_t = rng.random(n)
    p_next = rng.random(n)
    gamma = fraction / (p_t @ p_t)
    residuals = []
    for _ in range(60):
        r = p_next - model.matrices[0] @ p_t
        residuals.append(r @ r)
        model.learn(0, p_t, p_next, gamma)
    assert all(b <= a + 1e-12 for a, b in zip(residuals, residuals[1:]))
    # residual shrinks by (1 - fraction)^2 per step
    assert residuals[-1] <= residuals[0] * (1 - fraction) ** (2 * 59) + 1e-12


def test_cyclic_chain_converges_to_one_hot_columns():
    # 0 -> 1 -> 2 -> 0 under the single action
    n = 3
    model = TransitionModel.zeros(1, n)
    state = 0
    for _ in range(500):
        nxt = (state + 1) % n
        model.learn(0, one_hot(state, n), one_hot(nxt, n), 0.1)
        state = nxt
    target = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)
    assert np.max(np.abs(model.matrices[0] - target)) < 1e-3


def test_predict_mode_cases():
    m = np.zeros((1, 4, 4))
    m[0, 2, 1] = 1.0
    model = TransitionModel(m)
    assert model.predict_mode(0, 1) == 2
    m = np.zeros((1, 4, 4))
    m[0, :, 1] = [0.2, 0.9, 0.5, 0.1]  # winner itself is the largest
    assert TransitionModel(m).predict_mode(0, 1) == 2


def test_predict_mode_unlearned_column():
    model = TransitionModel.zeros(2, 5)
    assert model.predict_mode(0, 0) == 1
    assert model.predict_mode(0, 3) == 0
    assert model.column_is_unlearned(0, 3)


def test_predict_mode_single_unit_map():
    assert TransitionModel.zeros(2, 1).predict_mode(1, 0) == 0


@settings(max_examples=300)
@given(st.integers(0, 10_000))
def test_predict_mode_matches_brute_force_and_skips_winner(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    m = rng.integers(-3, 4, size=(2, n, n)).astype(float)  # small ints force ties
    model = TransitionModel(m)
    a, w = int(rng.integers(2)), int(rng.integers(n))
    best, best_v = None, -np.inf
    for s in range(n):
        if s != w and m[a, s, w] > best_v:
            best, best_v = s, m[a, s, w]
    got = model.predict_mode(a, w)
    assert got == best
    assert got != w


def test_invalid_action():
    with pytest.raises(InputError):
        TransitionModel.zeros(2, 3).predict_mode(2, 0)

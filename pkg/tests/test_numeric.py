import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from mvet.errors import AllMasked, DimensionMismatch, NonFiniteFunctionValue
from mvet.numeric import (ACTIVATIONS, as_mat, as_vec, derive_seed, glorot, grad_check, leaky_v,
                          log_sigmoid, make_rng, matvec, sigmoid_v, softmax, tanh_v)

finite = st.floats(-5, 5, allow_nan=False)


def test_matvec_examples():
    assert np.array_equal(matvec(np.eye(2), np.array([3.0, 4.0])), [3.0, 4.0])
    assert np.array_equal(matvec(np.array([[2.0]]), np.array([0.5])), [1.0])
    assert matvec(np.array([[1.0, 1.0]]), np.array([0.3, 0.2]))[0] == pytest.approx(0.5, abs=1e-15)


def test_matvec_rejects_mismatch():
    with pytest.raises(DimensionMismatch):
        matvec(np.ones((2, 3)), np.ones(2))


@given(hnp.arrays(float, (3, 4), elements=finite), hnp.arrays(float, 4, elements=finite),
       hnp.arrays(float, 4, elements=finite))
def test_matvec_distributes(M, u, v):
    assert np.allclose(matvec(M, u + v), matvec(M, u) + matvec(M, v), atol=1e-12, rtol=0)


def test_vec_and_mat_reject_non_finite():
    with pytest.raises(ValueError):
        as_vec([1.0, np.nan])
    with pytest.raises(ValueError):
        as_mat([[np.inf]])
    with pytest.raises(DimensionMismatch):
        as_vec(np.ones((2, 2)))


def test_activation_examples():
    assert sigmoid_v(0.0) == 0.5
    assert leaky_v(np.array(-2.0), 0.01) == pytest.approx(-0.02)
    assert tanh_v(0.5) == pytest.approx(0.462117, abs=1e-6)
    with pytest.raises(ValueError):
        leaky_v(np.array(1.0), 1.5)


def test_sigmoid_extremes_are_finite():
    s = sigmoid_v(np.array([-800.0, 800.0]))
    assert s[0] == 0.0 and s[1] == 1.0
    assert np.isfinite(log_sigmoid(np.array([-800.0, 800.0]))).all()


def test_softmax_examples():
    assert np.allclose(softmax(np.zeros(2)), [0.5, 0.5])
    assert softmax(np.array([7.3]), np.array([True]))[0] == 1.0
    assert np.allclose(softmax(np.array([math.log(2), 0.0])), [2 / 3, 1 / 3], atol=1e-15)


def test_softmax_all_masked():
    with pytest.raises(AllMasked):
        softmax(np.zeros(3), np.zeros(3, dtype=bool))


@given(hnp.arrays(float, 6, elements=st.floats(-50, 50)), hnp.arrays(bool, 6))
def test_softmax_masked_sums_to_one(z, m):
    m[0] = True
    w = softmax(z, m)
    assert abs(w[m].sum() - 1.0) <= 1e-12
    assert np.all(w[~m] == 0.0)
    assert np.all(w[m] >= 0.0)


def test_grad_check_examples():
    assert grad_check(lambda w: w[0] ** 2, [3.0], [6.0], h=1e-3) <= 1e-9
    t = math.tanh(0.5)
    assert grad_check(lambda w: math.tanh(w[0]), [0.5], [1 - t * t], h=1e-5) <= 1e-8
    err = grad_check(lambda w: w[0] ** 2, [3.0], [12.0], h=1e-3)
    assert err == pytest.approx(1 / 3, abs=1e-6)


def test_grad_check_non_finite():
    with pytest.raises(NonFiniteFunctionValue):
        grad_check(lambda w: math.inf, [0.0], [0.0])


@pytest.mark.parametrize("name", sorted(ACTIVATIONS))
def test_activation_derivatives(name):
    f, df = ACTIVATIONS[name]
    rng = make_rng(derive_seed(0, "act", name))
    worst = 0.0
    for x in rng.uniform(-4, 4, size=1000):
        if name == "leaky" and abs(x) < 1e-4:
            continue  # kink at zero
        worst = max(worst, grad_check(lambda w: float(f(w[0])), [x], [float(df(x))]))
    assert worst <= 1e-7


def test_rng_reproducible_across_processes():
    code = "from mvet.numeric import make_rng; print(make_rng(42).random(3).tolist())"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    assert out.strip() == str(make_rng(42).random(3).tolist())


def test_derive_seed_is_stable():
    # frozen so per-run seeds never drift between releases
    assert derive_seed(0, "init") == 7824777423566302168
    assert make_rng(0).integers(0, 2 ** 32, 3).tolist() == [3653403231, 2735729615, 2195314465]
    assert derive_seed(0, "init") != derive_seed(1, "init")
    assert derive_seed(0, "a", 1) != derive_seed(0, "a1")
    assert 0 <= derive_seed(7, "x") < 2 ** 64


def test_glorot_range():
    W = glorot(make_rng(0), 30, 20)
    assert W.shape == (30, 20)
    assert np.abs(W).max() <= math.sqrt(6 / 50)

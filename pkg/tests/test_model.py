import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from gradtools import model_errors, tiny_model
from mvet.dataset import EntityRecord, Representation, ViewSpec
from mvet.errors import AllViewsMissing, DimensionMismatch, DomainError, SpecMismatch
from mvet.fusion import MODES
from mvet.model import (HeadParams, ModelConfig, MultiviewModel, bce_loss, bce_with_logits, head_forward,
                        load_checkpoint, model_forward_backward, predict_types, save_checkpoint)
from mvet.numeric import make_rng


def unit_head(wh, wo=1.0):
    return HeadParams(np.array([[wh]]), np.array([[wo]]))


def test_head_examples():
    assert head_forward(np.array([0.5]), unit_head(2.0))[0] == pytest.approx(0.731059, abs=1e-6)
    assert head_forward(np.array([-0.5]), unit_head(2.0))[0] == pytest.approx(0.497500, abs=1e-6)
    rng = make_rng(0)
    head = HeadParams(rng.normal(size=(5, 4)), rng.normal(size=(3, 5)))
    assert np.array_equal(head_forward(np.zeros(4), head), [0.5, 0.5, 0.5])


def test_head_dimension_check():
    with pytest.raises(DimensionMismatch):
        head_forward(np.zeros(3), unit_head(1.0))


@given(seed=st.integers(0, 2 ** 32))
def test_head_matches_oracle(seed):
    rng = make_rng(seed)
    head = HeadParams(rng.normal(size=(5, 4)), rng.normal(size=(3, 5)), slope=0.05)
    p = rng.uniform(-1, 1, 4)
    ref = oracles.head(p.tolist(), head.Wh.tolist(), head.Wo.tolist(), 0.05)
    assert np.allclose(head_forward(p, head), ref, atol=1e-14, rtol=0)


def test_bce_examples():
    assert bce_loss([0.5], [1]) == pytest.approx(0.693147, abs=1e-6)
    assert bce_loss([0.731059, 0.5], [1, 0]) == pytest.approx(1.006409, abs=1e-6)
    assert bce_loss([0.731059], [1]) == pytest.approx(0.313262, abs=1e-6)


def test_bce_domain():
    for bad in ([0.0], [1.0], [1.2]):
        with pytest.raises(DomainError):
            bce_loss(bad, [1])


def test_bce_decreases_towards_gold():
    qs = [0.6, 0.9, 0.99, 0.999999]
    losses = [bce_loss([q, 1 - q], [1, 0]) for q in qs]
    assert all(a > b for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 1e-5


# beyond |z| ~ 15 the probability form itself loses digits in 1 - y_hat
@given(hnp.arrays(float, 5, elements=st.floats(-15, 15)), hnp.arrays(bool, 5))
def test_bce_with_logits_matches_probabilities(z, y):
    s = 1 / (1 + np.exp(-z))
    assert bce_with_logits(z, y.astype(float)) == pytest.approx(bce_loss(s, y.astype(float)), rel=1e-8, abs=1e-12)
    assert bce_with_logits(z, y.astype(float)) >= 0


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_bce_convex_per_coordinate(a, b, lam):
    mid = lam * a + (1 - lam) * b
    for y in (0.0, 1.0):
        assert bce_loss([mid], [y]) <= lam * bce_loss([a], [y]) + (1 - lam) * bce_loss([b], [y]) + 1e-12


def test_predict_examples():
    assert predict_types([0.9, 0.2], 0.5) == {0}
    assert predict_types([0.4, 0.3], 0.5, top1_fallback=True) == {0}
    assert predict_types([0.4, 0.3], 0.5, top1_fallback=False) == set()


@given(hnp.arrays(float, 6, elements=st.floats(0.001, 0.999)), st.integers(0, 5), st.floats(0, 0.5))
def test_predict_monotone(scores, t, bump):
    before = predict_types(scores, 0.5, top1_fallback=False)
    raised = scores.copy()
    raised[t] = min(0.999, raised[t] + bump)
    assert before <= predict_types(raised, 0.5, top1_fallback=False)


# ----------------------------------------------------------------- full model

@pytest.mark.parametrize("mode", MODES)
@given(seed=st.integers(0, 2 ** 32))
def test_scores_are_probabilities(mode, seed):
    model, x, mask, _ = tiny_model(mode, 3, seed)
    s = model.scores([v[None] * 50 for v in x], mask[None])
    assert np.all((s > 0) & (s < 1))


@pytest.mark.parametrize("mode", MODES)
def test_full_model_grad_check_50_seeds(mode):
    worst = max(model_errors(*tiny_model(mode, 3, seed)[:4])[0] for seed in range(50))
    assert worst <= 1e-6


@pytest.mark.parametrize("mode", MODES)
def test_full_model_matches_fd_to_rounding(mode):
    # the loss is O(10), so a central difference at h=1e-5 has ~1e-10 absolute
    # rounding noise; relative error is asserted only above that floor
    for seed in range(50):
        _, abs_err, fd, an = model_errors(*tiny_model(mode, 3, seed)[:4])
        assert np.all(np.abs(fd - an) <= 1e-9 * (1 + np.abs(an)))
        big = np.abs(fd) + np.abs(an) >= 1e-2
        assert np.all(np.abs(fd - an)[big] / (np.abs(fd) + np.abs(an))[big] <= 1e-6)


@pytest.mark.parametrize("mode", MODES)
def test_full_model_grad_check_with_biases(mode):
    for seed in range(10):
        _, _, fd, an = model_errors(*tiny_model(mode, 3, seed, bias=True)[:4])
        assert np.all(np.abs(fd - an) <= 1e-9 * (1 + np.abs(an)))


def test_record_forward_backward_matches_batch():
    model, x, mask, y = tiny_model("att", 3, 11)
    views = {spec.key: x[j] for j, spec in enumerate(model.config.views) if mask[j]}
    rec = EntityRecord("e", frozenset(np.flatnonzero(y).tolist()), views, tuple(mask), 5)
    loss, grads, _ = model_forward_backward(model, rec)
    loss2, grads2, _ = model.forward_backward([v[None] for v in x], mask[None], y[None])
    assert loss == pytest.approx(loss2, rel=1e-14)
    for k in grads:
        assert np.allclose(grads[k], grads2[k], atol=1e-15, rtol=1e-12)


def test_record_without_views_raises():
    model, x, mask, y = tiny_model("avg", 3, 0)
    rec = EntityRecord("e", frozenset({0}), {}, (False,) * 3, 1)
    with pytest.raises(AllViewsMissing):
        model_forward_backward(model, rec)


def test_zero_logit_gradient_at_fixed_point():
    # with W_o = 0 every score is 0.5; gold 0.5 makes the logit gradient vanish
    model, x, mask, _ = tiny_model("avg", 2, 3)
    model.head.Wo[:] = 0.0
    _, grads, _ = model.forward_backward(x, mask, np.full(model.config.n_types, 0.5))
    assert all(np.all(g == 0) for g in grads.values())


@pytest.mark.parametrize("mode", MODES)
def test_doubling_upstream_doubles_gradients(mode):
    model, x, mask, y = tiny_model(mode, 3, 4)
    _, g1, v1 = model.forward_backward(x, mask, y)
    _, g2, v2 = model.forward_backward(x, mask, y, dp_scale=2.0)
    for k in g1:
        assert np.allclose(g2[k], 2 * g1[k], rtol=1e-13, atol=1e-16)
    for a, b in zip(v1, v2):
        assert np.allclose(b, 2 * a, rtol=1e-13, atol=1e-16)


def test_predict_without_views_is_empty():
    model, x, mask, _ = tiny_model("att", 3, 0)
    M = np.array([mask, [False] * 3])
    pred = model.predict([np.stack([v, v]) for v in x], M)
    assert pred[0].any() and not pred[1].any()


def test_config_validation():
    views = (ViewSpec("en", Representation.CTXT, 3),)
    with pytest.raises(ValueError):
        ModelConfig(views, 2, fusion="sum")
    with pytest.raises(ValueError):
        ModelConfig((), 2)
    with pytest.raises(ValueError):
        ModelConfig(views, 2, d=0)
    assert ModelConfig(views, 2).d == 300 and ModelConfig(views, 2).h == 400


def test_active_param_count():
    views = tuple(ViewSpec(l, Representation.NAME, 6) for l in ("en", "de"))
    m = MultiviewModel.init(ModelConfig(views, 5, "att", d=4, h=3), 0)
    assert m.active_param_count(views[1]) == 4 * 6 + 3 * 4 + 5 * 3
    single = MultiviewModel.init(ModelConfig(views[1:], 5, "avg", d=4, h=3), 0)
    assert single.active_param_count(views[1]) == m.active_param_count(views[1])


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("bias", [False, True])
def test_checkpoint_round_trip(tmp_path, mode, bias):
    model, x, mask, _ = tiny_model(mode, 3, 5, bias=bias)
    model.meta = {"best_epoch": 3}
    save_checkpoint(model, tmp_path / "m.ckpt")
    back = load_checkpoint(tmp_path / "m.ckpt")
    assert back.config == model.config and back.meta == model.meta
    for (n1, a1), (n2, a2) in zip(model.named_params(), back.named_params()):
        assert n1 == n2 and np.array_equal(a1, a2)
    assert np.array_equal(back.scores([v[None] for v in x], mask[None]),
                          model.scores([v[None] for v in x], mask[None]))


def test_checkpoint_rejects_bad_files(tmp_path):
    (tmp_path / "junk").write_bytes(b"hello")
    with pytest.raises(SpecMismatch):
        load_checkpoint(tmp_path / "junk")
    model, *_ = tiny_model("avg", 2, 0)
    save_checkpoint(model, tmp_path / "m.ckpt")
    data = (tmp_path / "m.ckpt").read_bytes()
    (tmp_path / "t.ckpt").write_bytes(data[:-8])
    with pytest.raises(SpecMismatch):
        load_checkpoint(tmp_path / "t.ckpt")
    (tmp_path / "x.ckpt").write_bytes(data + b"\0" * 8)
    with pytest.raises(SpecMismatch):
        load_checkpoint(tmp_path / "x.ckpt")


def test_leaky_slope_is_used():
    head = HeadParams(np.array([[1.0]]), np.array([[1.0]]), slope=0.2)
    assert head_forward(np.array([-1.0]), head)[0] == pytest.approx(1 / (1 + math.exp(0.2)))

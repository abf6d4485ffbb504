"""Optimizer mechanics, gradient accumulation over rates, exact resume."""

import numpy as np
import pytest

from slicekit import autodiff as ad
from slicekit.autodiff import Tensor
from slicekit.datasets import make_spirals
from slicekit.errors import TrainingError
from slicekit.models import spirals_mlp
from slicekit.training import (MomentumSGD, TrainConfig, Trainer, evaluate,
                               train, train_fixed, train_step)


class QuadModel:
    """loss = 0.5 * sum(w^2), so grad(w) = w regardless of input or rate."""

    def __init__(self, value=2.0):
        self.w = Tensor(np.array([[value]]), name="w")

    def parameters(self):
        return [("w", self.w)]

    def loss(self, x, y, r, train=False):
        return ad.scale(ad.sum_all(ad.mul(self.w, self.w)), 0.5)


def _cfg(**kw):
    base = dict(epochs=1, batch_size=4, learning_rate=0.1, momentum=0.9,
                lr_milestones=(), rates=(1.0,), scheme="Static")
    base.update(kw)
    return TrainConfig(**base)


def test_momentum_two_step_hand_unroll():
    model = QuadModel(2.0)
    opt = MomentumSGD(model.parameters(), momentum=0.9)
    cfg = _cfg()
    x = np.zeros((1, 1))
    y = np.zeros(1, dtype=np.int64)
    train_step(model, x, y, (1.0,), opt, 0.1, cfg)
    assert model.w.data[0, 0] == pytest.approx(1.8, abs=0)     # v=2.0
    train_step(model, x, y, (1.0,), opt, 0.1, cfg)
    # v = 0.9*2.0 + 1.8 = 3.6; w = 1.8 - 0.36
    assert model.w.data[0, 0] == pytest.approx(1.44, abs=1e-15)


def test_weight_decay_enters_velocity():
    model = QuadModel(2.0)
    opt = MomentumSGD(model.parameters(), momentum=0.0, weight_decay=0.5)
    train_step(model, np.zeros((1, 1)), np.zeros(1, dtype=np.int64), (1.0,),
               opt, 0.1, _cfg(weight_decay=0.5))
    # g = w + 0.5*w = 3.0; w = 2.0 - 0.3
    assert model.w.data[0, 0] == pytest.approx(1.7, abs=1e-15)


def test_rates_accumulate_into_one_update():
    # two rates on a rate-independent loss double the gradient
    model = QuadModel(2.0)
    opt = MomentumSGD(model.parameters(), momentum=0.0)
    train_step(model, np.zeros((1, 1)), np.zeros(1, dtype=np.int64),
               (1.0, 0.5), opt, 0.1, _cfg(rates=(0.5, 1.0)))
    assert model.w.data[0, 0] == pytest.approx(2.0 - 0.1 * 4.0, abs=1e-15)


def test_average_over_rates_halves_two_rate_update():
    model = QuadModel(2.0)
    opt = MomentumSGD(model.parameters(), momentum=0.0)
    train_step(model, np.zeros((1, 1)), np.zeros(1, dtype=np.int64),
               (1.0, 0.5), opt, 0.1,
               _cfg(rates=(0.5, 1.0), average_over_rates=True))
    assert model.w.data[0, 0] == pytest.approx(2.0 - 0.1 * 2.0, abs=1e-14)


def test_accumulated_grads_match_separate_backward_sums():
    rng = np.random.default_rng(0)
    model = spirals_mlp(width=16, groups=4, seed=1)
    x = rng.standard_normal((8, 2))
    y = rng.integers(0, 2, 8)
    rates = (0.25, 0.75, 1.0)

    separate = {}
    for name, t in model.parameters():
        separate[name] = np.zeros_like(t.data)
    for r in rates:
        for _, t in model.parameters():
            t.zero_grad()
        rec = ad.Recording()
        with ad.record(rec):
            loss = model.loss(x, y, r)
        rec.backward(loss)
        for name, t in model.parameters():
            if t.grad is not None:
                separate[name] += t.grad

    for _, t in model.parameters():
        t.zero_grad()
    for r in rates:
        rec = ad.Recording()
        with ad.record(rec):
            loss = model.loss(x, y, r)
        rec.backward(loss)
    for name, t in model.parameters():
        np.testing.assert_allclose(t.grad, separate[name], rtol=1e-12, atol=1e-12)


def test_training_error_names_the_rate():
    model = spirals_mlp(width=16, groups=4, seed=2)
    model.layers[-1].weight.data[0, 0] = np.nan  # poison inside the active slice
    opt = MomentumSGD(model.parameters())
    x = np.random.default_rng(3).standard_normal((4, 2))
    y = np.zeros(4, dtype=np.int64)
    with pytest.raises(TrainingError) as err:
        train_step(model, x, y, (0.5,), opt, 0.1, _cfg(rates=(0.5, 1.0)))
    assert "0.5" in str(err.value)


def test_lr_schedule_milestones():
    cfg = TrainConfig(epochs=10, learning_rate=1.0, lr_milestones=(0.5, 0.8), lr_decay=0.1)
    assert cfg.lr_at(0) == 1.0
    assert cfg.lr_at(4) == 1.0
    assert cfg.lr_at(5) == pytest.approx(0.1)
    assert cfg.lr_at(7) == pytest.approx(0.1)
    assert cfg.lr_at(8) == pytest.approx(0.01)


def test_trainer_deterministic_given_seed():
    x, y = make_spirals(32, seed=4)
    cfg = TrainConfig(epochs=2, batch_size=16, learning_rate=0.05, seed=9,
                      scheme="R-uniform-2", rates=(0.25, 0.5, 0.75, 1.0),
                      lr_milestones=())

    def run():
        model = spirals_mlp(width=16, groups=4, seed=5)
        t = Trainer(model, x, y, cfg)
        t.run()
        return [p.data.copy() for _, p in model.parameters()]

    for a, b in zip(run(), run()):
        np.testing.assert_array_equal(a, b)


def test_degenerate_schedule_equals_fixed_training():
    # L = {1.0} must consume the data stream exactly like the plain loop
    x, y = make_spirals(32, seed=6)
    cfg = TrainConfig(epochs=2, batch_size=16, learning_rate=0.05, seed=10,
                      scheme="Static", rates=(1.0,), lr_milestones=())
    m1 = spirals_mlp(width=16, groups=4, seed=7)
    m2 = spirals_mlp(width=16, groups=4, seed=7)
    train(m1, x, y, cfg)
    train_fixed(m2, x, y, cfg)
    for (_, a), (_, b) in zip(m1.parameters(), m2.parameters()):
        np.testing.assert_array_equal(a.data, b.data)


def test_in_memory_resume_is_exact():
    x, y = make_spirals(32, seed=8)
    cfg = TrainConfig(epochs=4, batch_size=16, learning_rate=0.05, seed=11,
                      scheme="R-weighted-2", rates=(0.25, 0.5, 0.75, 1.0),
                      lr_milestones=(0.5,))

    straight = spirals_mlp(width=16, groups=4, seed=12)
    t_straight = Trainer(straight, x, y, cfg)
    t_straight.run()

    resumed = spirals_mlp(width=16, groups=4, seed=12)
    t1 = Trainer(resumed, x, y, cfg)
    t1.run_epoch()
    t1.run_epoch()
    state = t1.state_dict()
    params = [p.data.copy() for _, p in resumed.parameters()]

    fresh = spirals_mlp(width=16, groups=4, seed=12)
    for (_, p), saved in zip(fresh.parameters(), params):
        p.data[...] = saved
    t2 = Trainer(fresh, x, y, cfg)
    t2.load_state(state)
    t2.run()
    for (_, a), (_, b) in zip(straight.parameters(), fresh.parameters()):
        np.testing.assert_array_equal(a.data, b.data)


def test_evaluate_accuracy_counts():
    model = spirals_mlp(width=16, groups=4, seed=13)
    x, y = make_spirals(16, seed=14)
    m = evaluate(model, x, y, 1.0)
    assert m.metric_name == "accuracy"
    pred = model.predict(x, 1.0)
    assert m.metric == pytest.approx((pred == y).mean())


def test_history_rows_cover_every_rate():
    x, y = make_spirals(16, seed=15)
    cfg = TrainConfig(epochs=1, batch_size=16, learning_rate=0.05, seed=16,
                      scheme="Static", rates=(0.5, 1.0), lr_milestones=())
    t = train(spirals_mlp(width=16, groups=4, seed=17), x, y, cfg)
    assert [h["rate"] for h in t.history] == [0.5, 1.0]
    assert all(h["metric_name"] == "accuracy" for h in t.history)

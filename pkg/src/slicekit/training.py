"""Training loop for width-sliceable models.

One iteration draws a batch of slice rates L_t, runs a forward/backward
pass per rate on the *same* minibatch — gradients accumulate into the
shared full-width parameter slots — and then applies exactly one
momentum-SGD update with the summed gradient.  Losses are summed over
L_t by default (``average_over_rates`` divides by |L_t| instead).

Three independent RNG streams are derived from the seed (data order,
schedule draws, dropout masks) so that runs are bit-reproducible and a
degenerate schedule L = {1.0} consumes the data stream exactly like the
plain fixed-model loop, making the two bit-identical step for step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, TrainingError
from .models import CharRNN
from .scheduling import SliceRateList, next_slice_rate_batch, preset

__all__ = [
    "TrainConfig",
    "MomentumSGD",
    "train_step",
    "Trainer",
    "train",
    "train_fixed",
    "evaluate",
    "EvalMetrics",
]


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    lr_milestones: tuple[float, ...] = (0.5, 0.75)  # fractions of the epoch budget
    lr_decay: float = 0.1
    seed: int = 0
    scheme: str = "R-weighted-3"
    rates: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    loss_weights: tuple[float, ...] | None = None  # aligned with rates, ascending
    average_over_rates: bool = False
    decay_touched_only: bool = False

    def __post_init__(self):
        self.rates = tuple(SliceRateList(self.rates))
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.loss_weights is not None and len(self.loss_weights) != len(self.rates):
            raise ConfigError("loss_weights must align with rates")
        for m in self.lr_milestones:
            if not 0.0 < m < 1.0:
                raise ConfigError(f"lr milestone {m} must lie in (0, 1)")

    def lr_at(self, epoch: int) -> float:
        """Piecewise-constant schedule: decay at each milestone epoch."""
        passed = sum(1 for m in self.lr_milestones if epoch >= int(m * self.epochs))
        return self.learning_rate * self.lr_decay ** passed

    def weight_for(self, rate: float) -> float:
        if self.loss_weights is None:
            return 1.0
        return self.loss_weights[self.rates.index(rate)]


class MomentumSGD:
    """Classical momentum: v <- mu*v + (g + wd*p); p <- p - lr*v."""

    def __init__(self, params, momentum: float = 0.9, weight_decay: float = 0.0,
                 decay_touched_only: bool = False):
        self.params = list(params)  # [(name, Tensor)]
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.decay_touched_only = decay_touched_only
        self.velocity = {name: np.zeros_like(t.data) for name, t in self.params}

    def zero_grad(self) -> None:
        for _, t in self.params:
            t.zero_grad()

    def step(self, lr: float) -> None:
        for name, t in self.params:
            g = t.grad
            if g is None:
                g = np.zeros_like(t.data)
            if self.weight_decay:
                if self.decay_touched_only:
                    g = g + self.weight_decay * np.where(g != 0.0, t.data, 0.0)
                else:
                    g = g + self.weight_decay * t.data
            v = self.velocity[name]
            v *= self.momentum
            v += g
            t.data -= lr * v


def train_step(model, x, y, rate_batch, optimizer: MomentumSGD, lr: float,
               config: TrainConfig) -> dict[float, float]:
    """One iteration: accumulate gradients over L_t, then one update.

    Returns the raw (unweighted) loss per rate.  Raises
    :class:`TrainingError` naming the rate whose loss or gradients went
    non-finite.
    """
    optimizer.zero_grad()
    losses: dict[float, float] = {}
    scale_all = 1.0 / len(rate_batch) if config.average_over_rates else 1.0
    for r in rate_batch:
        rec = ad.Recording()
        with ad.record(rec):
            loss = model.loss(x, y, r, train=True)
            w = config.weight_for(r) * scale_all
            scaled = ad.scale(loss, w) if w != 1.0 else loss
        raw = loss.item()
        if not np.isfinite(raw):
            raise TrainingError(f"non-finite loss {raw}", rate=r)
        rec.backward(scaled)
        for name, t in optimizer.params:
            if t.grad is not None and not np.isfinite(t.grad).all():
                raise TrainingError(f"non-finite gradient in {name}", rate=r)
        losses[r] = raw
    optimizer.step(lr)
    return losses


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for lo in range(0, n, batch_size):
        yield order[lo : lo + batch_size]


@dataclass
class EvalMetrics:
    loss: float
    metric: float
    metric_name: str  # "accuracy" or "ppl"


def evaluate(model, x, y, r: float, batch_size: int = 512) -> EvalMetrics:
    """Deterministic evaluation (no recording, no dropout)."""
    n = len(x)
    if isinstance(model, CharRNN):
        total_nll = 0.0
        for lo in range(0, n, batch_size):
            xb, yb = x[lo : lo + batch_size], y[lo : lo + batch_size]
            total_nll += model.loss(xb, yb, r, train=False).item() * len(xb)
        mean_nll = total_nll / n
        return EvalMetrics(loss=mean_nll, metric=float(np.exp(mean_nll)), metric_name="ppl")
    total_loss, correct = 0.0, 0
    for lo in range(0, n, batch_size):
        xb, yb = x[lo : lo + batch_size], y[lo : lo + batch_size]
        total_loss += model.loss(xb, yb, r, train=False).item() * len(xb)
        correct += int((model.predict(xb, r) == yb).sum())
    return EvalMetrics(loss=total_loss / n, metric=correct / n, metric_name="accuracy")


class Trainer:
    """Stateful training driver with checkpointable RNG/optimizer state."""

    def __init__(self, model, x, y, config: TrainConfig, eval_x=None, eval_y=None):
        self.model = model
        self.x, self.y = x, y
        self.eval_x = x if eval_x is None else eval_x
        self.eval_y = y if eval_y is None else eval_y
        self.config = config
        self.scheme = preset(config.scheme, config.rates)
        data_ss, scheme_ss, drop_ss = np.random.SeedSequence(config.seed).spawn(3)
        self.rng_data = np.random.default_rng(data_ss)
        self.rng_scheme = np.random.default_rng(scheme_ss)
        rng_dropout = np.random.default_rng(drop_ss)
        if hasattr(model, "set_dropout_rng"):
            model.set_dropout_rng(rng_dropout)
        self.rng_dropout = rng_dropout
        self.optimizer = MomentumSGD(
            model.parameters(), config.momentum, config.weight_decay,
            config.decay_touched_only,
        )
        self.epoch = 0
        self.step = 0
        self.history: list[dict] = []

    def run_epoch(self) -> list[dict]:
        cfg = self.config
        lr = cfg.lr_at(self.epoch)
        t0 = time.perf_counter()
        for idx in _minibatches(len(self.x), cfg.batch_size, self.rng_data):
            rate_batch = next_slice_rate_batch(self.scheme, cfg.rates, self.rng_scheme)
            train_step(self.model, self.x[idx], self.y[idx], rate_batch,
                       self.optimizer, lr, cfg)
            self.step += 1
        wall = time.perf_counter() - t0
        rows = []
        for r in cfg.rates:
            m = evaluate(self.model, self.eval_x, self.eval_y, r)
            rows.append({
                "epoch": self.epoch, "rate": r, "loss": m.loss,
                "metric": m.metric, "metric_name": m.metric_name,
                "wall_time_s": wall,
            })
        self.epoch += 1
        self.history.extend(rows)
        return rows

    def run(self, epochs: int | None = None) -> list[dict]:
        target = self.config.epochs if epochs is None else self.epoch + epochs
        while self.epoch < target:
            self.run_epoch()
        return self.history

    # ---- exact-resume support -------------------------------------------
    def state_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "step": self.step,
            "rng_data": self.rng_data.bit_generator.state,
            "rng_scheme": self.rng_scheme.bit_generator.state,
            "rng_dropout": self.rng_dropout.bit_generator.state,
            "velocity": {k: v.copy() for k, v in self.optimizer.velocity.items()},
        }

    def load_state(self, state: dict) -> None:
        self.epoch = int(state["epoch"])
        self.step = int(state["step"])
        self.rng_data.bit_generator.state = state["rng_data"]
        self.rng_scheme.bit_generator.state = state["rng_scheme"]
        self.rng_dropout.bit_generator.state = state["rng_dropout"]
        for k, v in state["velocity"].items():
            self.optimizer.velocity[k][...] = v


def train(model, x, y, config: TrainConfig, eval_x=None, eval_y=None) -> Trainer:
    trainer = Trainer(model, x, y, config, eval_x, eval_y)
    trainer.run()
    return trainer


def train_fixed(model, x, y, config: TrainConfig, eval_x=None, eval_y=None) -> Trainer:
    """Conventional fixed-width training: the same loop pinned to r = 1.0.

    Implemented as the Static scheme over the single rate 1.0, whose
    forward path skips every slicing op, so this is the plain training
    baseline that degenerate-schedule runs are compared against.
    """
    cfg_dict = vars(config).copy()
    cfg_dict.update(scheme="Static", rates=(1.0,), loss_weights=None)
    return train(model, x, y, TrainConfig(**cfg_dict), eval_x, eval_y)

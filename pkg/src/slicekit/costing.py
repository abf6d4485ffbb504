"""Cost accounting for sliced models.

Conventions (applied consistently everywhere):

* FLOPs count multiply-accumulates: one MAC = one FLOP.  Only matrix
  products contribute — dense g_in * g_out, conv g_in * g_out * k^2 *
  H_out * W_out at the sliced widths, LSTM 4 * g_h * (g_in + g_h) per
  time step.  Bias adds, normalization, activations, and pooling are
  excluded.
* Parameter counts include everything trainable: weights, biases, and
  normalization affine pairs, at the sliced widths.

All counts are exact integers, so ratio identities (the quadratic law
for fully sliced stacks) can be asserted without tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import BudgetError, ConfigError, ShapeError
from .models import CharRNN, SequentialModel

__all__ = [
    "CostRow",
    "CostReport",
    "count_params",
    "count_flops",
    "cost_report",
    "max_rate_for_budget",
]


@dataclass(frozen=True)
class CostRow:
    layer: str
    kind: str
    params: int
    flops: int


@dataclass
class CostReport:
    rate: float
    rows: list[CostRow] = field(default_factory=list)
    total_params: int = 0
    total_flops: int = 0
    full_params: int = 0
    full_flops: int = 0

    @property
    def params_ratio(self) -> float:
        return self.total_params / self.full_params

    @property
    def flops_ratio(self) -> float:
        return self.total_flops / self.full_flops

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "rows": [vars(r) for r in self.rows],
            "total_params": self.total_params,
            "total_flops": self.total_flops,
            "full_params": self.full_params,
            "full_flops": self.full_flops,
            "params_ratio": self.params_ratio,
            "flops_ratio": self.flops_ratio,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        lines = ["layer,kind,params,flops"]
        for r in self.rows:
            lines.append(f"{r.layer},{r.kind},{r.params},{r.flops}")
        lines.append(f"total,,{self.total_params},{self.total_flops}")
        return "\n".join(lines) + "\n"


def _layer_name(i: int, layer) -> str:
    return getattr(layer, "name", None) or f"{layer.kind}{i}"


def _walk_sequential(model: SequentialModel, r: float):
    """Yield (name, kind, params, flops) threading the active shape."""
    shape = model.input_shape
    for i, layer in enumerate(model.layers):
        kind = layer.kind
        params = layer.param_count(r)
        if kind == "dense":
            if len(shape) != 1:
                raise ShapeError(f"dense layer {_layer_name(i, layer)} fed shape {shape}")
            flops = layer.flops(r)
            shape = (layer.widths(r)[1],)
        elif kind == "conv":
            if len(shape) != 3:
                raise ShapeError(f"conv layer {_layer_name(i, layer)} fed shape {shape}")
            hw = shape[1:]
            flops = layer.flops(r, hw)
            shape = (layer.widths(r)[1], *layer.out_hw(hw))
        else:
            flops = layer.flops(r, shape)
            shape = layer.out_shape(r, shape)
        yield _layer_name(i, layer), kind, params, flops


def _rows(model, r: float, seq_len: int | None) -> list[CostRow]:
    if isinstance(model, SequentialModel):
        return [CostRow(n, k, p, f) for n, k, p, f in _walk_sequential(model, r)]
    if isinstance(model, CharRNN):
        steps = 1 if seq_len is None else int(seq_len)
        if steps < 1:
            raise ConfigError(f"seq_len must be >= 1, got {seq_len}")
        rows = [
            CostRow(cell.name, cell.kind, cell.param_count(r), cell.flops_per_step(r) * steps)
            for cell in model.lstms
        ]
        rows.append(
            CostRow(model.head.name, model.head.kind, model.head.param_count(r),
                    model.head.flops(r) * steps)
        )
        return rows
    raise ConfigError(f"cost accounting does not know model type {type(model).__name__}")


def count_params(model, r: float) -> int:
    return sum(row.params for row in _rows(model, r, None))


def count_flops(model, r: float, seq_len: int | None = None) -> int:
    return sum(row.flops for row in _rows(model, r, seq_len))


def cost_report(model, r: float, seq_len: int | None = None) -> CostReport:
    rows = _rows(model, r, seq_len)
    full = _rows(model, 1.0, seq_len)
    return CostReport(
        rate=r,
        rows=rows,
        total_params=sum(x.params for x in rows),
        total_flops=sum(x.flops for x in rows),
        full_params=sum(x.params for x in full),
        full_flops=sum(x.flops for x in full),
    )


def max_rate_for_budget(budget_flops: float, full_flops: float, rates) -> float:
    """Largest listed rate whose quadratic cost fits the budget.

    Inverts the r^2 cost law: feasible rates satisfy
    r <= sqrt(budget / full).  Raises :class:`BudgetError` when even the
    base rate does not fit.
    """
    if full_flops <= 0:
        raise ConfigError(f"full-model cost must be positive, got {full_flops}")
    if budget_flops <= 0:
        raise ConfigError(f"budget must be positive, got {budget_flops}")
    bound = min(math.sqrt(budget_flops / full_flops), 1.0)
    rates = sorted(float(r) for r in rates)
    # the 1e-12 slack only absorbs last-ulp rounding in the sqrt
    feasible = [r for r in rates if r <= bound + 1e-12]
    if not feasible:
        raise BudgetError(
            f"budget {budget_flops:g} FLOPs is below the base subnet "
            f"(rate {rates[0]}) cost {rates[0] ** 2 * full_flops:g}"
        )
    return feasible[-1]

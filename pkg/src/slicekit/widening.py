"""Incremental inference: widen a cached narrow forward pass.

A sliced weight at two rates r_a < r_b splits into four blocks::

        [ W_a  B ]   rows:    first g_out_a, then the new Delta-out
        [ C    D ]   columns: first g_in_a,  then the new Delta-in

Given the narrow result Y_a = W_a x_a, the wide result only needs the
new blocks:  Y~_a = Y_a + B x_b  and  Y_b = C x_a + D x_b.

``widen_exact`` computes both (concatenation matches a direct wide
forward to rounding dust).  ``widen_approx`` keeps Y_a untouched —
bit-identical reuse — computes only C x_a + D x_b, and reports the
dropped correction's magnitude ||B x_b||_inf as its error bound.

``widen_model`` applies this layer by layer over a model, against an
:class:`ActivationCache` filled by ``run_base``.  Group normalization
keeps per-group statistics, so a base group's normalized values are
identical at every width that includes it; that prefix consistency is
what lets cached rows survive through norm/activation layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import UsageError
from .layers import SlicedConv2D, SlicedDense
from .models import SequentialModel

__all__ = [
    "WeightPartition",
    "partition_weight",
    "WidenResult",
    "widen_exact",
    "widen_approx",
    "ActivationCache",
    "run_base",
    "widen_model",
    "WidenModelResult",
]


@dataclass(frozen=True)
class WeightPartition:
    """Immutable block view of one sliced weight at a rate pair."""

    kind: str  # "dense" | "conv"
    w_a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    bias_tail: np.ndarray | None
    g_in_a: int
    g_in_b: int
    g_out_a: int
    g_out_b: int
    stride: int = 1
    padding: int = 0

    @property
    def d_in(self) -> int:
        return self.g_in_b - self.g_in_a

    @property
    def d_out(self) -> int:
        return self.g_out_b - self.g_out_a

    def reassemble(self) -> np.ndarray:
        """Blocks glued back together; equals the r_b weight prefix."""
        top = np.concatenate([self.w_a, self.b], axis=1)
        bottom = np.concatenate([self.c, self.d], axis=1)
        return np.concatenate([top, bottom], axis=0)


def partition_weight(layer, r_a: float, r_b: float) -> WeightPartition:
    """Split a sliced layer's weight into the four widening blocks."""
    if not isinstance(layer, (SlicedDense, SlicedConv2D)):
        raise UsageError(f"partition_weight: unsupported layer type {type(layer).__name__}")
    if r_a >= r_b:
        raise UsageError(f"partition_weight: need r_a < r_b, got {r_a} >= {r_b}")
    g_in_a, g_out_a = layer.widths(r_a)
    g_in_b, g_out_b = layer.widths(r_b)
    if (g_in_a, g_out_a) == (g_in_b, g_out_b):
        raise UsageError(
            f"partition_weight: rates {r_a} and {r_b} land on the same boundaries "
            f"({g_in_a}, {g_out_a})"
        )
    if isinstance(layer, SlicedDense):
        w = layer.weight.data
        kind, stride, padding = "dense", 1, 0
    else:
        w = layer.kernels.data
        kind, stride, padding = "conv", layer.stride, layer.padding
    bias_tail = None
    if layer.bias is not None:
        bias_tail = layer.bias.data[g_out_a:g_out_b].copy()
    return WeightPartition(
        kind=kind,
        w_a=w[:g_out_a, :g_in_a].copy(),
        b=w[:g_out_a, g_in_a:g_in_b].copy(),
        c=w[g_out_a:g_out_b, :g_in_a].copy(),
        d=w[g_out_a:g_out_b, g_in_a:g_in_b].copy(),
        bias_tail=bias_tail,
        g_in_a=g_in_a, g_in_b=g_in_b, g_out_a=g_out_a, g_out_b=g_out_b,
        stride=stride, padding=padding,
    )


@dataclass(frozen=True)
class WidenResult:
    y_a: np.ndarray  # first g_out_a rows (updated in exact mode, reused in approx)
    y_b: np.ndarray  # the Delta-out new rows
    flops: int       # MACs spent by this widening step
    error_bound: float | None = None  # approx only: ||B x_b||_inf

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.y_a, self.y_b], axis=1)


def _apply(part: WeightPartition, block: np.ndarray, x: np.ndarray) -> np.ndarray:
    """block (out,in,...) applied to batch-first x; zero-size safe."""
    if part.kind == "dense":
        if block.shape[0] == 0 or block.shape[1] == 0:
            b = x.shape[0]
            return np.zeros((b, block.shape[0]))
        return x @ block.T
    bsz, _, h, w = x.shape
    if block.shape[0] == 0 or block.shape[1] == 0:
        k = block.shape[2]
        ho = (h + 2 * part.padding - k) // part.stride + 1
        wo = (w + 2 * part.padding - k) // part.stride + 1
        return np.zeros((bsz, block.shape[0], ho, wo))
    return _kernels.conv2d_forward(x, block, part.stride, part.padding)


def _block_flops(part: WeightPartition, block: np.ndarray, x: np.ndarray) -> int:
    if block.shape[0] == 0 or block.shape[1] == 0:
        return 0
    if part.kind == "dense":
        return block.shape[0] * block.shape[1]
    k = block.shape[2]
    h = x.shape[2]
    ho = (h + 2 * part.padding - k) // part.stride + 1
    w = x.shape[3]
    wo = (w + 2 * part.padding - k) // part.stride + 1
    return block.shape[0] * block.shape[1] * k * k * ho * wo


def _bias_rows(part: WeightPartition, y_b: np.ndarray) -> np.ndarray:
    if part.bias_tail is None or part.d_out == 0:
        return y_b
    if part.kind == "dense":
        return y_b + part.bias_tail
    return y_b + part.bias_tail[None, :, None, None]


def widen_exact(part: WeightPartition, y_a: np.ndarray, x_a: np.ndarray,
                x_b: np.ndarray) -> WidenResult:
    """Exact widening: Y~_a = Y_a + B x_b, Y_b = C x_a + D x_b (+ bias tail).

    ``y_a`` must be W_a x_a for the same x_a (caller contract; bias on
    the first g_out_a rows, if any, rides along unchanged).
    """
    corr = _apply(part, part.b, x_b)
    y_b = _apply(part, part.c, x_a) + _apply(part, part.d, x_b)
    flops = (
        _block_flops(part, part.b, x_b)
        + _block_flops(part, part.c, x_a)
        + _block_flops(part, part.d, x_b)
    )
    return WidenResult(y_a=y_a + corr, y_b=_bias_rows(part, y_b), flops=flops)


def widen_approx(part: WeightPartition, y_a: np.ndarray, x_a: np.ndarray,
                 x_b: np.ndarray) -> WidenResult:
    """Approximate widening: keep Y_a bit-identical, skip the B-block.

    Computes only C x_a + D x_b (Delta-out * g_in_b MACs for dense) and
    reports ||B x_b||_inf — the magnitude of the dropped correction —
    as the error bound.  The bound is a diagnostic and is not counted
    in the FLOPs figure.
    """
    y_b = _apply(part, part.c, x_a) + _apply(part, part.d, x_b)
    flops = _block_flops(part, part.c, x_a) + _block_flops(part, part.d, x_b)
    dropped = _apply(part, part.b, x_b)
    bound = float(np.abs(dropped).max()) if dropped.size else 0.0
    return WidenResult(y_a=y_a, y_b=_bias_rows(part, y_b), flops=flops, error_bound=bound)


# ------------------------------------------------------- model-level widening

class ActivationCache:
    """Per-layer base-run activations, keyed by (layer index, batch token)."""

    def __init__(self):
        self._store: dict[tuple[int, str], dict] = {}

    def put(self, layer_idx: int, token: str, entry: dict) -> None:
        self._store[(layer_idx, token)] = entry

    def get(self, layer_idx: int, token: str, layer_name: str) -> dict:
        entry = self._store.get((layer_idx, token))
        if entry is None:
            raise UsageError(
                f"no cached activations for layer {layer_name!r} under token {token!r}"
            )
        return entry

    def tokens(self) -> set[str]:
        return {t for (_, t) in self._store}


_WIDENABLE = ("dense", "conv")
_PASSTHROUGH = ("relu", "groupnorm", "maxpool", "gap")  # prefix-stable layers


def _check_widenable(model: SequentialModel) -> None:
    for layer in model.layers:
        if layer.kind == "dropout":
            continue  # identity at inference
        if layer.kind not in _WIDENABLE + _PASSTHROUGH:
            raise UsageError(
                f"widen_model: layer kind {layer.kind!r} mixes channel positions, "
                "so cached rows cannot be reused through it"
            )


def _linear_raw(layer, x: np.ndarray, g_in: int, g_out: int) -> np.ndarray:
    """Raw sliced product, no rescale, no bias (the cacheable quantity)."""
    if isinstance(layer, SlicedDense):
        return x @ layer.weight.data[:g_out, :g_in].T
    return _kernels.conv2d_forward(x, layer.kernels.data[:g_out, :g_in],
                                   layer.stride, layer.padding)


def _finish_linear(layer, raw: np.ndarray, g_in: int, g_out: int) -> np.ndarray:
    y = raw
    if isinstance(layer, SlicedDense):
        if layer.rescale and g_in < layer.in_spec.width:
            y = y * (layer.in_spec.width / g_in)
        if layer.bias is not None:
            y = y + layer.bias.data[:g_out]
    else:
        if layer.bias is not None:
            y = y + layer.bias.data[:g_out, None, None]
    return y


def _norm_eval(layer, x: np.ndarray, g: int) -> np.ndarray:
    """Group norm on a width-g prefix, plain numpy (inference path)."""
    gs = layer.spec.group_size
    bsz = x.shape[0]
    groups = g // gs
    spatial = int(np.prod(x.shape[2:])) if x.ndim == 4 else 1
    xg = x.reshape(bsz, groups, gs * spatial)
    mean = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    xhat = (xg - mean) / np.sqrt(var + layer.eps)
    gamma = layer.gamma.data[:g].reshape(groups, gs, 1)
    beta = layer.beta.data[:g].reshape(groups, gs, 1)
    y = xhat.reshape(bsz, groups, gs, spatial) * gamma + beta
    return y.reshape(x.shape)


def _adapter_eval(layer, x: np.ndarray) -> np.ndarray:
    if layer.kind == "relu":
        return np.maximum(x, 0.0)
    if layer.kind == "maxpool":
        b, c, h, w = x.shape
        return x.reshape(b, c, h // 2, 2, w // 2, 2).max(axis=(3, 5))
    if layer.kind == "gap":
        return x.mean(axis=(2, 3))
    if layer.kind == "dropout":
        return x
    raise UsageError(f"unexpected adapter {layer.kind!r}")


def run_base(model: SequentialModel, x: np.ndarray, r_a: float,
             cache: ActivationCache | None = None, token: str = "batch-0"):
    """Forward at the narrow rate, caching every linear layer's input and
    raw product under ``token``.  Returns (output, cache)."""
    _check_widenable(model)
    if cache is None:
        cache = ActivationCache()
    x = np.asarray(x, dtype=np.float64)
    cur = x
    flops = 0
    for i, layer in enumerate(model.layers):
        if layer.kind in _WIDENABLE:
            g_in, g_out = layer.widths(r_a)
            raw = _linear_raw(layer, cur, g_in, g_out)
            cache.put(i, token, {"x_in": cur.copy(), "raw": raw.copy(), "input": x})
            flops += _count_linear(layer, cur, g_in, g_out)
            cur = _finish_linear(layer, raw, g_in, g_out)
        elif layer.kind == "groupnorm":
            cur = _norm_eval(layer, cur, cur.shape[1])
        else:
            cur = _adapter_eval(layer, cur)
    cache.put(-1, token, {"flops": flops, "input": x, "r_a": r_a})
    return cur, cache


def _count_linear(layer, x, g_in: int, g_out: int) -> int:
    if isinstance(layer, SlicedDense):
        return g_in * g_out
    k = layer.ksize
    ho, wo = layer.out_hw(x.shape[2:])
    return g_in * g_out * k * k * ho * wo


@dataclass
class WidenModelResult:
    output: np.ndarray
    mode: str
    r_a: float
    r_b: float
    flops_base: int    # already spent by the cached narrow run
    flops_update: int  # spent by this widening pass
    flops_direct: int  # a from-scratch forward at r_b would cost this
    layers: list[dict] = field(default_factory=list)  # per-layer update rows


def widen_model(model: SequentialModel, cache: ActivationCache, x: np.ndarray,
                r_a: float, r_b: float, mode: str = "exact",
                token: str = "batch-0") -> WidenModelResult:
    """Widen a cached narrow run to rate r_b, layer by layer.

    ``exact`` reproduces a direct r_b forward (to accumulation dust;
    cached rows are corrected with the B-block or recomputed once their
    inputs diverged).  ``approx`` never touches cached rows and spends
    only the new-block MACs, reporting each layer's dropped-correction
    bound; the bound is a diagnostic — its product is evaluated here for
    honesty but a deployment that trusts the scheme would skip it, so it
    is not billed to ``flops_update``.  The cache must come from
    ``run_base`` on the same batch and token.
    """
    if mode not in ("exact", "approx"):
        raise UsageError(f"widen_model: mode must be 'exact' or 'approx', got {mode!r}")
    if r_a >= r_b:
        raise UsageError(f"widen_model: need r_a < r_b, got {r_a} >= {r_b}")
    _check_widenable(model)
    x = np.asarray(x, dtype=np.float64)
    meta = cache.get(-1, token, "<run header>")
    if meta["r_a"] != r_a:
        raise UsageError(f"cache was built at rate {meta['r_a']}, not {r_a}")
    if meta["input"].shape != x.shape or not np.array_equal(meta["input"], x):
        raise UsageError(f"token {token!r} was cached for a different input batch")

    cur = x  # full current activation at the growing width
    clean = True  # are the first g_out_a rows still bit-identical to the cache?
    flops_update = 0
    flops_direct = 0
    rows = []
    for i, layer in enumerate(model.layers):
        if layer.kind in _WIDENABLE:
            part = _partition_or_none(layer, r_a, r_b)
            entry = cache.get(i, token, getattr(layer, "name", str(i)))
            g_in_b, g_out_b = layer.widths(r_b)
            flops_direct += _count_linear(layer, cur, g_in_b, g_out_b)
            x_a, x_b = _split_cols(cur, entry["x_in"].shape[1])
            bound = None
            if part is None:  # both axes unsliced at these rates: reuse outright
                raw = entry["raw"] if clean else _linear_raw(layer, cur, g_in_b, g_out_b)
                step_flops = 0 if clean else _count_linear(layer, cur, g_in_b, g_out_b)
            elif mode == "exact":
                if clean:
                    corr = _apply(part, part.b, x_b)
                    y_b = _apply(part, part.c, x_a) + _apply(part, part.d, x_b)
                    raw = np.concatenate([entry["raw"] + corr, y_b], axis=1)
                    step_flops = (
                        _block_flops(part, part.b, x_b)
                        + _block_flops(part, part.c, x_a)
                        + _block_flops(part, part.d, x_b)
                    )
                    clean = part.d_in == 0  # a zero-width correction keeps rows exact
                else:
                    raw = _linear_raw(layer, cur, g_in_b, g_out_b)
                    step_flops = _count_linear(layer, cur, g_in_b, g_out_b)
            else:  # approx: cached rows are reused untouched, always "clean"
                y_b = _apply(part, part.c, x_a) + _apply(part, part.d, x_b)
                dropped = _apply(part, part.b, x_b)
                bound = float(np.abs(dropped).max()) if dropped.size else 0.0
                if part.d_in > 0 and part.d_out == 0:
                    # no new rows: the new-column term is the whole update
                    raw = entry["raw"] + dropped
                    step_flops = _block_flops(part, part.b, x_b)
                    bound = None
                else:
                    raw = np.concatenate([entry["raw"], y_b], axis=1)
                    step_flops = _block_flops(part, part.c, x_a) + _block_flops(part, part.d, x_b)
            flops_update += step_flops
            rows.append({
                "layer": getattr(layer, "name", str(i)),
                "flops_update": step_flops,
                "error_bound": bound,
            })
            cur = _finish_linear(layer, raw, g_in_b, g_out_b)
        elif layer.kind == "groupnorm":
            cur = _norm_eval(layer, cur, cur.shape[1])
        else:
            cur = _adapter_eval(layer, cur)
    return WidenModelResult(
        output=cur, mode=mode, r_a=r_a, r_b=r_b,
        flops_base=meta["flops"], flops_update=flops_update,
        flops_direct=flops_direct, layers=rows,
    )


def _partition_or_none(layer, r_a: float, r_b: float) -> WeightPartition | None:
    ga = layer.widths(r_a)
    gb = layer.widths(r_b)
    if ga == gb:
        return None
    return partition_weight(layer, r_a, r_b)


def _split_cols(cur: np.ndarray, g_a: int):
    return cur[:, :g_a], cur[:, g_a:]

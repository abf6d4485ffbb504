"""Width-sliceable layers.

Every layer here owns full-width parameters and can run a forward pass
at any slice rate ``r``: the first ``g`` units/channels of each group
boundary participate, the rest are untouched.  Because smaller slices
are prefixes of larger ones, the subnetworks are nested — Subnet-r's
parameters are a subset of every wider subnet's.

Slicing is expressed through the ``narrow``/``gate_rows`` autodiff ops,
which read only the selected prefix on the forward pass and scatter
gradients only into it on the backward pass.  At full width the ops are
skipped entirely, so a rate-1.0 forward is byte-for-byte the plain
dense/conv/norm computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError

__all__ = [
    "GroupSpec",
    "slice_boundary",
    "SlicedDense",
    "SlicedConv2D",
    "SlicedGroupNorm",
    "SlicedLSTM",
]


@dataclass(frozen=True)
class GroupSpec:
    """Uniform partition of a width into ordered, equally sized groups.

    ``width`` is the total number of units/channels, ``group_count`` how
    many contiguous groups it splits into.  Boundaries are the partial
    sums i * width / group_count; slice rates address boundaries as a
    fraction of the full width.  A width that is not divisible by the
    group count is rejected outright — unequal groups would make the
    boundary arithmetic ambiguous.
    """

    width: int
    group_count: int

    def __post_init__(self):
        if self.width < 1 or self.group_count < 1:
            raise ConfigError(
                f"GroupSpec: width and group_count must be >= 1, got {self.width}/{self.group_count}"
            )
        if self.width % self.group_count:
            divisors = [d for d in range(1, self.width + 1) if self.width % d == 0]
            raise ConfigError(
                f"GroupSpec: width {self.width} is not divisible by group_count "
                f"{self.group_count}; valid group counts: {divisors}"
            )

    @property
    def group_size(self) -> int:
        return self.width // self.group_count

    @property
    def boundaries(self) -> tuple[int, ...]:
        step = self.group_size
        return tuple(step * i for i in range(1, self.group_count + 1))

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(b / self.width for b in self.boundaries)

    def is_boundary(self, g: int) -> bool:
        return 0 < g <= self.width and g % self.group_size == 0

    def boundary(self, r: float) -> int:
        """Active width for slice rate r: largest boundary <= round(r * width).

        Off-boundary rates round down; rates below the first boundary
        clamp up to it (the base group always runs).
        """
        if not 0.0 < r <= 1.0:
            raise ConfigError(f"slice rate must lie in (0, 1], got {r}")
        step = self.group_size
        g = (int(round(r * self.width)) // step) * step
        return max(g, step)

    def rate_of(self, g: int) -> float:
        if not self.is_boundary(g):
            raise ConfigError(f"{g} is not a group boundary of {self}")
        return g / self.width


def slice_boundary(spec: GroupSpec, r: float) -> int:
    """Functional alias for :meth:`GroupSpec.boundary`."""
    return spec.boundary(r)


def _unsliced(width: int) -> GroupSpec:
    """Spec for an axis that never shrinks (inputs, class logits)."""
    return GroupSpec(width, 1)


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class SlicedDense:
    """Fully connected layer with sliceable input and output widths.

    y = x . W[:g_out, :g_in]^T (+ bias[:g_out]).  With ``rescale`` on,
    the pre-bias product is multiplied by width / g_in so the expected
    activation scale is width-independent; intended for layers whose
    output is not normalized afterwards.  Default off.
    """

    kind = "dense"

    def __init__(self, in_spec: GroupSpec, out_spec: GroupSpec, *, rescale: bool = False,
                 bias: bool = True, rng: np.random.Generator | None = None, name: str = "dense"):
        self.in_spec = in_spec
        self.out_spec = out_spec
        self.rescale = rescale
        self.name = name
        m, n = in_spec.width, out_spec.width
        if rng is None:
            w = np.zeros((n, m))
        else:
            w = he_normal(rng, (n, m), m)
        self.weight = Tensor(w, name=f"{name}.weight")
        self.bias = Tensor(np.zeros(n), name=f"{name}.bias") if bias else None

    def parameters(self):
        out = [(f"{self.name}.weight", self.weight)]
        if self.bias is not None:
            out.append((f"{self.name}.bias", self.bias))
        return out

    def widths(self, r: float) -> tuple[int, int]:
        return self.in_spec.boundary(r), self.out_spec.boundary(r)

    def forward(self, x: Tensor, r: float) -> Tensor:
        g_in, g_out = self.widths(r)
        if x.shape[-1] != g_in:
            raise ShapeError(
                f"{self.name}: input width {x.shape[-1]} != active width {g_in} at rate {r}"
            )
        w = self.weight
        if g_out < self.out_spec.width:
            w = ad.narrow(w, 0, 0, g_out)
        if g_in < self.in_spec.width:
            w = ad.narrow(w, 1, 0, g_in)
        y = ad.matmul(x, ad.transpose(w))
        if self.rescale and g_in < self.in_spec.width:
            y = ad.scale(y, self.in_spec.width / g_in)
        if self.bias is not None:
            b = self.bias
            if g_out < self.out_spec.width:
                b = ad.narrow(b, 0, 0, g_out)
            y = ad.add_bias(y, b)
        return y

    # ---- cost hooks (MAC = 1 FLOP; bias adds excluded by convention)
    def param_count(self, r: float) -> int:
        g_in, g_out = self.widths(r)
        return g_in * g_out + (g_out if self.bias is not None else 0)

    def flops(self, r: float) -> int:
        g_in, g_out = self.widths(r)
        return g_in * g_out


class SlicedConv2D:
    """3x3-style convolution with sliceable channel counts.

    Channel prefixes slice exactly like dense rows/columns; the spatial
    kernel extent never slices.  No rescale option here — conv stacks
    are expected to carry their own normalization.
    """

    kind = "conv"

    def __init__(self, in_spec: GroupSpec, out_spec: GroupSpec, ksize: int = 3, *,
                 stride: int = 1, padding: int | None = None, bias: bool = True,
                 rng: np.random.Generator | None = None, name: str = "conv"):
        if ksize % 2 == 0 or ksize < 1:
            raise ConfigError(f"{name}: kernel extent must be odd, got {ksize}")
        self.in_spec = in_spec
        self.out_spec = out_spec
        self.ksize = ksize
        self.stride = stride
        self.padding = ksize // 2 if padding is None else padding
        self.name = name
        m, n = in_spec.width, out_spec.width
        fan_in = m * ksize * ksize
        if rng is None:
            k = np.zeros((n, m, ksize, ksize))
        else:
            k = he_normal(rng, (n, m, ksize, ksize), fan_in)
        self.kernels = Tensor(k, name=f"{name}.kernels")
        self.bias = Tensor(np.zeros(n), name=f"{name}.bias") if bias else None

    def parameters(self):
        out = [(f"{self.name}.kernels", self.kernels)]
        if self.bias is not None:
            out.append((f"{self.name}.bias", self.bias))
        return out

    def widths(self, r: float) -> tuple[int, int]:
        return self.in_spec.boundary(r), self.out_spec.boundary(r)

    def forward(self, x: Tensor, r: float) -> Tensor:
        g_in, g_out = self.widths(r)
        if x.data.ndim != 4 or x.shape[1] != g_in:
            raise ShapeError(
                f"{self.name}: input channels {x.shape[1] if x.data.ndim == 4 else x.shape} "
                f"!= active width {g_in} at rate {r}"
            )
        k = self.kernels
        if g_out < self.out_spec.width:
            k = ad.narrow(k, 0, 0, g_out)
        if g_in < self.in_spec.width:
            k = ad.narrow(k, 1, 0, g_in)
        b = self.bias
        if b is not None and g_out < self.out_spec.width:
            b = ad.narrow(b, 0, 0, g_out)
        return ad.conv2d(x, k, b, stride=self.stride, padding=self.padding)

    def out_hw(self, hw: tuple[int, int]) -> tuple[int, int]:
        h, w = hw
        ho = (h + 2 * self.padding - self.ksize) // self.stride + 1
        wo = (w + 2 * self.padding - self.ksize) // self.stride + 1
        return ho, wo

    def param_count(self, r: float) -> int:
        g_in, g_out = self.widths(r)
        return g_in * g_out * self.ksize * self.ksize + (g_out if self.bias is not None else 0)

    def flops(self, r: float, hw: tuple[int, int]) -> int:
        g_in, g_out = self.widths(r)
        ho, wo = self.out_hw(hw)
        return g_in * g_out * self.ksize * self.ksize * ho * wo


class SlicedGroupNorm:
    """Group normalization whose groups coincide with the slicing groups.

    Because statistics are per group, the normalized value of any active
    channel is identical at every rate that includes its group — the
    prefix-consistency property the incremental-widening path relies on.
    """

    kind = "groupnorm"

    def __init__(self, spec: GroupSpec, *, eps: float = 1e-5, name: str = "norm"):
        if eps <= 0:
            raise ConfigError(f"{name}: eps must be positive, got {eps}")
        self.spec = spec
        self.eps = eps
        self.name = name
        self.gamma = Tensor(np.ones(spec.width), name=f"{name}.gamma")
        self.beta = Tensor(np.zeros(spec.width), name=f"{name}.beta")

    def parameters(self):
        return [(f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]

    def forward(self, x: Tensor, r: float) -> Tensor:
        g = self.spec.boundary(r)
        width = x.shape[1]
        if width != g:
            raise ShapeError(
                f"{self.name}: input width {width} != active width {g} at rate {r}"
            )
        gamma, beta = self.gamma, self.beta
        if g < self.spec.width:
            gamma = ad.narrow(gamma, 0, 0, g)
            beta = ad.narrow(beta, 0, 0, g)
        return ad.group_norm(x, gamma, beta, self.spec.group_size, self.eps)

    def param_count(self, r: float) -> int:
        return 2 * self.spec.boundary(r)

    def flops(self, r: float, shape_in=None) -> int:
        return 0  # normalization excluded from the MAC count by convention

    def out_shape(self, r: float, shape_in):
        return shape_in


class SlicedLSTM:
    """Single LSTM layer with sliceable input and hidden widths.

    Parameters are stored stacked along the 4H gate axis in the order
    (input, forget, cell, output).  Slicing the hidden width keeps the
    first g rows *of each gate block* — four independent prefixes — so
    hidden state, memory cell and all gate activations share one width.
    The forget-gate bias initializes to 1.
    """

    kind = "lstm"
    GATES = 4  # input, forget, cell, output

    def __init__(self, in_spec: GroupSpec, hidden_spec: GroupSpec, *,
                 rng: np.random.Generator | None = None, name: str = "lstm"):
        self.in_spec = in_spec
        self.hidden_spec = hidden_spec
        self.name = name
        m, h = in_spec.width, hidden_spec.width
        if rng is None:
            wx = np.zeros((self.GATES * h, m))
            wh = np.zeros((self.GATES * h, h))
        else:
            bound = 1.0 / np.sqrt(h)
            wx = rng.uniform(-bound, bound, size=(self.GATES * h, m))
            wh = rng.uniform(-bound, bound, size=(self.GATES * h, h))
        b = np.zeros(self.GATES * h)
        b[h : 2 * h] = 1.0
        self.w_x = Tensor(wx, name=f"{name}.w_x")
        self.w_h = Tensor(wh, name=f"{name}.w_h")
        self.bias = Tensor(b, name=f"{name}.bias")

    def parameters(self):
        return [
            (f"{self.name}.w_x", self.w_x),
            (f"{self.name}.w_h", self.w_h),
            (f"{self.name}.bias", self.bias),
        ]

    def widths(self, r: float) -> tuple[int, int]:
        return self.in_spec.boundary(r), self.hidden_spec.boundary(r)

    def _sliced_params(self, g_in: int, g_h: int):
        m, h = self.in_spec.width, self.hidden_spec.width
        wx, wh, b = self.w_x, self.w_h, self.bias
        if g_h < h:
            wx = ad.gate_rows(wx, self.GATES, h, g_h)
            wh = ad.gate_rows(wh, self.GATES, h, g_h)
            b = ad.gate_rows(b, self.GATES, h, g_h)
        if g_in < m:
            wx = ad.narrow(wx, 1, 0, g_in)
        if g_h < h:
            wh = ad.narrow(wh, 1, 0, g_h)
        return wx, wh, b

    def step(self, x_t: Tensor, h_prev: Tensor, c_prev: Tensor, r: float):
        """One time step; returns (h_t, c_t), both of width g_h."""
        g_in, g_h = self.widths(r)
        if x_t.shape[-1] != g_in:
            raise ShapeError(f"{self.name}: input width {x_t.shape[-1]} != {g_in} at rate {r}")
        if h_prev.shape[-1] != g_h or c_prev.shape[-1] != g_h:
            raise ShapeError(
                f"{self.name}: state widths {h_prev.shape[-1]}/{c_prev.shape[-1]} != {g_h} at rate {r}"
            )
        wx, wh, b = self._sliced_params(g_in, g_h)
        pre = ad.add_bias(
            ad.add(ad.matmul(x_t, ad.transpose(wx)), ad.matmul(h_prev, ad.transpose(wh))), b
        )
        i = ad.sigmoid(ad.narrow(pre, 1, 0, g_h))
        f = ad.sigmoid(ad.narrow(pre, 1, g_h, g_h))
        g = ad.tanh(ad.narrow(pre, 1, 2 * g_h, g_h))
        o = ad.sigmoid(ad.narrow(pre, 1, 3 * g_h, g_h))
        c_t = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
        h_t = ad.mul(o, ad.tanh(c_t))
        return h_t, c_t

    def zero_state(self, batch: int, r: float) -> tuple[Tensor, Tensor]:
        _, g_h = self.widths(r)
        return Tensor(np.zeros((batch, g_h))), Tensor(np.zeros((batch, g_h)))

    def param_count(self, r: float) -> int:
        g_in, g_h = self.widths(r)
        return self.GATES * g_h * (g_in + g_h) + self.GATES * g_h

    def flops_per_step(self, r: float) -> int:
        g_in, g_h = self.widths(r)
        return self.GATES * g_h * (g_in + g_h)

"""Model composition: adapters, sequential stacks, and builders.

A model is an ordered list of layers sharing one slice rate: sliceable
layers (dense/conv/groupnorm/lstm) plus width-neutral adapters
(activations, dropout, pooling, flatten).  Input and output axes that
must not shrink use a one-group GroupSpec, which pins them at full
width for every rate.

Builders construct the stock architectures by name; ``Model.spec()``
returns the dict that ``build_model`` rebuilds them from, which is what
checkpoints store.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError
from .layers import GroupSpec, SlicedConv2D, SlicedDense, SlicedGroupNorm, SlicedLSTM

__all__ = [
    "Relu",
    "Dropout",
    "MaxPool2x2",
    "GlobalAvgPool",
    "Flatten",
    "SequentialModel",
    "CharRNN",
    "build_model",
    "spirals_mlp",
    "tinyimages_cnn",
    "char_lstm",
    "vgg13_cifar",
    "MODEL_KINDS",
]


# --------------------------------------------------------------- adapters

class Relu:
    kind = "relu"

    def forward(self, x, r):
        return ad.relu(x)

    def parameters(self):
        return []

    def param_count(self, r):
        return 0

    def flops(self, r, shape_in=None):
        return 0

    def out_shape(self, r, shape_in):
        return shape_in


class Dropout:
    """Elementwise inverted-dropout mask, drawn once per forward pass."""

    kind = "dropout"

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"dropout probability must lie in [0, 1), got {p}")
        self.p = p
        self.rng = np.random.default_rng(0)

    def forward(self, x, r, train: bool = False):
        if not train or self.p == 0.0:
            return x
        keep = 1.0 - self.p
        mask = (self.rng.random(x.shape) < keep) / keep
        return ad.mul(x, Tensor(mask))

    def parameters(self):
        return []

    def param_count(self, r):
        return 0

    def flops(self, r, shape_in=None):
        return 0

    def out_shape(self, r, shape_in):
        return shape_in


class MaxPool2x2:
    kind = "maxpool"

    def forward(self, x, r):
        return ad.maxpool2x2(x)

    def parameters(self):
        return []

    def param_count(self, r):
        return 0

    def flops(self, r, shape_in=None):
        return 0

    def out_shape(self, r, shape_in):
        c, h, w = shape_in
        return (c, h // 2, w // 2)


class GlobalAvgPool:
    kind = "gap"

    def forward(self, x, r):
        return ad.global_avg_pool(x)

    def parameters(self):
        return []

    def param_count(self, r):
        return 0

    def flops(self, r, shape_in=None):
        return 0

    def out_shape(self, r, shape_in):
        return (shape_in[0],)


class Flatten:
    kind = "flatten"

    def forward(self, x, r):
        b = x.shape[0]
        return ad.reshape(x, (b, int(np.prod(x.shape[1:]))))

    def parameters(self):
        return []

    def param_count(self, r):
        return 0

    def flops(self, r, shape_in=None):
        return 0

    def out_shape(self, r, shape_in):
        return (int(np.prod(shape_in)),)


# ----------------------------------------------------------------- models

class SequentialModel:
    """Feed-forward stack of layers sharing one slice rate."""

    def __init__(self, layers: list, spec_dict: dict, input_shape: tuple[int, ...]):
        self.layers = layers
        self._spec = spec_dict
        self.input_shape = tuple(input_shape)

    def spec(self) -> dict:
        return dict(self._spec)

    def parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, t in layer.parameters():
                out.append((f"{i}.{name}", t))
        return out

    def forward(self, x, r: float, train: bool = False) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(x)
        for layer in self.layers:
            if layer.kind == "dropout":
                x = layer.forward(x, r, train)
            else:
                x = layer.forward(x, r)
        return x

    def loss(self, x, y, r: float, train: bool = False) -> Tensor:
        logits = self.forward(x, r, train)
        return ad.softmax_cross_entropy(logits, y)

    def predict(self, x, r: float) -> np.ndarray:
        logits = self.forward(x, r, train=False)
        return logits.data.argmax(axis=1)

    def set_dropout_rng(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            if layer.kind == "dropout":
                layer.rng = rng


class CharRNN:
    """Character model: one-hot input -> sliced LSTM stack -> dense head.

    The input axis is unsliced (one-hot alphabet); hidden/memory/gates
    slice together via the shared hidden spec; the head slices its input
    and rescales, with the logit axis pinned at the vocabulary size.
    Per-chunk state starts at zero.
    """

    def __init__(self, lstms: list[SlicedLSTM], head: SlicedDense, vocab: int,
                 dropout: float, spec_dict: dict):
        self.lstms = lstms
        self.head = head
        self.vocab = vocab
        self.dropout = Dropout(dropout)
        self._spec = spec_dict
        self.input_shape = (vocab,)

    def spec(self) -> dict:
        return dict(self._spec)

    def parameters(self):
        out = []
        for i, cell in enumerate(self.lstms):
            for name, t in cell.parameters():
                out.append((f"lstm{i}.{name}", t))
        for name, t in self.head.parameters():
            out.append((f"head.{name}", t))
        return out

    def set_dropout_rng(self, rng: np.random.Generator) -> None:
        self.dropout.rng = rng

    def _one_hot(self, ids: np.ndarray) -> np.ndarray:
        eye = np.eye(self.vocab, dtype=np.float64)
        return eye[ids]

    def step_logits(self, x_t: Tensor, states: list, r: float, train: bool) -> Tensor:
        h = x_t
        for i, cell in enumerate(self.lstms):
            h_i, c_i = states[i]
            h_i, c_i = cell.step(h, h_i, c_i, r)
            states[i] = (h_i, c_i)
            h = self.dropout.forward(h_i, r, train)
        return self.head.forward(h, r)

    def loss(self, x_ids: np.ndarray, y_ids: np.ndarray, r: float, train: bool = False) -> Tensor:
        """Mean per-token NLL over a (B, T) chunk; states start at zero."""
        if x_ids.shape != y_ids.shape or x_ids.ndim != 2:
            raise ShapeError(f"char loss: bad chunk shapes {x_ids.shape} / {y_ids.shape}")
        bsz, steps = x_ids.shape
        states = [cell.zero_state(bsz, r) for cell in self.lstms]
        onehot = self._one_hot(x_ids)  # (B, T, V)
        total = None
        for t in range(steps):
            logits = self.step_logits(Tensor(onehot[:, t]), states, r, train)
            nll = ad.softmax_cross_entropy(logits, y_ids[:, t])
            total = nll if total is None else ad.add(total, nll)
        return ad.scale(total, 1.0 / steps)

    def perplexity(self, x_ids: np.ndarray, y_ids: np.ndarray, r: float) -> float:
        return float(np.exp(self.loss(x_ids, y_ids, r, train=False).item()))


# ---------------------------------------------------------------- builders

def spirals_mlp(width: int = 64, groups: int = 4, depth: int = 2, classes: int = 2,
                in_features: int = 2, seed: int = 0) -> SequentialModel:
    """Dense -> groupnorm -> relu stack for the 2-D spirals task."""
    rng = np.random.default_rng(seed)
    hidden = GroupSpec(width, groups)
    layers: list = []
    prev = GroupSpec(in_features, 1)
    for i in range(depth):
        layers.append(SlicedDense(prev, hidden, rng=rng, name=f"fc{i + 1}"))
        layers.append(SlicedGroupNorm(hidden, name=f"gn{i + 1}"))
        layers.append(Relu())
        prev = hidden
    layers.append(SlicedDense(hidden, GroupSpec(classes, 1), rescale=True, rng=rng, name="head"))
    spec = {"kind": "spirals_mlp", "width": width, "groups": groups, "depth": depth,
            "classes": classes, "in_features": in_features, "seed": seed}
    return SequentialModel(layers, spec, (in_features,))


def tinyimages_cnn(width: int = 16, groups: int = 4, classes: int = 4, seed: int = 0) -> SequentialModel:
    """Small conv net for the 8x8 procedural image task."""
    rng = np.random.default_rng(seed)
    c1 = GroupSpec(width, groups)
    c2 = GroupSpec(2 * width, groups)
    layers = [
        SlicedConv2D(GroupSpec(1, 1), c1, 3, rng=rng, name="conv1"),
        SlicedGroupNorm(c1, name="gn1"),
        Relu(),
        MaxPool2x2(),
        SlicedConv2D(c1, c2, 3, rng=rng, name="conv2"),
        SlicedGroupNorm(c2, name="gn2"),
        Relu(),
        GlobalAvgPool(),
        SlicedDense(c2, GroupSpec(classes, 1), rescale=True, rng=rng, name="head"),
    ]
    spec = {"kind": "tinyimages_cnn", "width": width, "groups": groups,
            "classes": classes, "seed": seed}
    return SequentialModel(layers, spec, (1, 8, 8))


def char_lstm(vocab: int, hidden: int = 64, groups: int = 4, depth: int = 2,
              dropout: float = 0.25, seed: int = 0) -> CharRNN:
    rng = np.random.default_rng(seed)
    hspec = GroupSpec(hidden, groups)
    lstms = []
    prev = GroupSpec(vocab, 1)
    for i in range(depth):
        lstms.append(SlicedLSTM(prev, hspec, rng=rng, name=f"cell{i + 1}"))
        prev = hspec
    head = SlicedDense(hspec, GroupSpec(vocab, 1), rescale=True, rng=rng, name="out")
    spec = {"kind": "char_lstm", "vocab": vocab, "hidden": hidden, "groups": groups,
            "depth": depth, "dropout": dropout, "seed": seed}
    return CharRNN(lstms, head, vocab, dropout, spec)


def vgg13_cifar(groups: int = 16, classes: int = 10, seed: int = 0,
                init: str = "zeros") -> SequentialModel:
    """VGG-13-style CIFAR stack used as the cost fixture.

    Ten 3x3 conv layers (64,64,128,128,256,256,512,512,512,512) with
    groupnorm+relu after each, 2x2 max pools where the feature map
    halves (32->32->16->8), an 8x8 global average pool, and one dense
    classifier.  The RGB input axis and the 10-way logit axis never
    slice.  ``init='zeros'`` skips random initialization, which keeps
    cost-only uses cheap.
    """
    rng = None if init == "zeros" else np.random.default_rng(seed)
    plan = [64, 64, 128, 128, "pool", 256, 256, "pool", 512, 512, 512, 512]
    layers: list = []
    prev = GroupSpec(3, 1)
    ci = 0
    for entry in plan:
        if entry == "pool":
            layers.append(MaxPool2x2())
            continue
        ci += 1
        spec = GroupSpec(entry, groups)
        layers.append(SlicedConv2D(prev, spec, 3, rng=rng, name=f"conv{ci}"))
        layers.append(SlicedGroupNorm(spec, name=f"gn{ci}"))
        layers.append(Relu())
        prev = spec
    layers.append(GlobalAvgPool())
    layers.append(SlicedDense(prev, GroupSpec(classes, 1), rescale=True, rng=rng, name="head"))
    spec_dict = {"kind": "vgg13", "groups": groups, "classes": classes, "seed": seed,
                 "init": init}
    return SequentialModel(layers, spec_dict, (3, 32, 32))


_BUILDERS = {
    "spirals_mlp": spirals_mlp,
    "tinyimages_cnn": tinyimages_cnn,
    "char_lstm": char_lstm,
    "vgg13": vgg13_cifar,
}

MODEL_KINDS = tuple(sorted(_BUILDERS))


def build_model(spec: dict):
    """Rebuild a model from its spec dict (checkpoint manifest entry)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builder = _BUILDERS.get(kind)
    if builder is None:
        raise ConfigError(f"unknown model kind {kind!r}; choices: {MODEL_KINDS}")
    return builder(**spec)

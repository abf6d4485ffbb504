"""Procedural datasets: small, seeded, and byte-stable.

Three tasks sized so a full test sweep stays fast:

* ``spirals`` — two interleaved 2-D spirals (binary classification).
* ``tinyimages`` — 8x8 grayscale shapes in four classes.
* ``chartext`` — a periodic character stream for next-char modelling.

Everything is generated from ``numpy.random.default_rng(seed)``, so the
same seed reproduces the same bytes on disk.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "make_spirals",
    "make_tinyimages",
    "make_chartext",
    "encode_text",
    "chunk_codes",
    "save_xy_csv",
    "load_spirals_csv",
    "load_tinyimages_csv",
    "spirals_feature_names",
    "tinyimages_feature_names",
    "train_test_split",
]


# ------------------------------------------------------------------ spirals

def make_spirals(n_per_class: int = 256, noise: float = 0.08, turns: float = 1.75,
                 seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved spirals; returns (x (N,2) float64, y (N,) int64)."""
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for cls in range(2):
        t = np.linspace(0.1, 1.0, n_per_class)
        angle = t * turns * 2.0 * math.pi + cls * math.pi
        radius = t
        pts = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
        pts += noise * rng.standard_normal(pts.shape)
        xs.append(pts)
        ys.append(np.full(n_per_class, cls, dtype=np.int64))
    x = np.concatenate(xs).astype(np.float64)
    y = np.concatenate(ys)
    order = rng.permutation(len(y))
    return x[order], y[order]


# --------------------------------------------------------------- tinyimages

def _draw_shape(img: np.ndarray, cls: int, rng: np.random.Generator) -> None:
    s = img.shape[0]
    if cls == 0:  # filled rectangle
        h = int(rng.integers(3, 6))
        w = int(rng.integers(3, 6))
        r0 = int(rng.integers(0, s - h + 1))
        c0 = int(rng.integers(0, s - w + 1))
        img[r0 : r0 + h, c0 : c0 + w] = 1.0
    elif cls == 1:  # hollow rectangle
        h = int(rng.integers(4, 7))
        w = int(rng.integers(4, 7))
        r0 = int(rng.integers(0, s - h + 1))
        c0 = int(rng.integers(0, s - w + 1))
        img[r0, c0 : c0 + w] = 1.0
        img[r0 + h - 1, c0 : c0 + w] = 1.0
        img[r0 : r0 + h, c0] = 1.0
        img[r0 : r0 + h, c0 + w - 1] = 1.0
    elif cls == 2:  # plus sign
        arm = int(rng.integers(2, 4))
        cr = int(rng.integers(arm, s - arm))
        cc = int(rng.integers(arm, s - arm))
        img[cr - arm : cr + arm + 1, cc] = 1.0
        img[cr, cc - arm : cc + arm + 1] = 1.0
    else:  # diagonal stripe
        offset = int(rng.integers(-2, 3))
        direction = int(rng.integers(0, 2))
        for i in range(s):
            j = i + offset if direction == 0 else s - 1 - i + offset
            if 0 <= j < s:
                img[i, j] = 1.0
                if j + 1 < s:
                    img[i, j + 1] = 1.0


def make_tinyimages(n_per_class: int = 128, noise: float = 0.15,
                    seed: int = 0, size: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Procedural 4-class shape images; returns (x (N,1,s,s), y (N,))."""
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be >= 1, got {n_per_class}")
    if size < 8:
        raise ConfigError(f"image size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    n = 4 * n_per_class
    x = np.zeros((n, 1, size, size), dtype=np.float64)
    y = np.zeros(n, dtype=np.int64)
    i = 0
    for cls in range(4):
        for _ in range(n_per_class):
            img = np.zeros((size, size))
            _draw_shape(img, cls, rng)
            img *= float(rng.uniform(0.6, 1.0))       # intensity jitter
            img += noise * rng.standard_normal(img.shape)
            x[i, 0] = np.clip(img, 0.0, 1.0)
            y[i] = cls
            i += 1
    order = rng.permutation(n)
    return x[order], y[order]


# ------------------------------------------------------------------ chartext

def _fundamental_period(s: str) -> int:
    for p in range(1, len(s) + 1):
        if len(s) % p == 0 and s == s[:p] * (len(s) // p):
            return p
    return len(s)


def make_chartext(length: int = 8192, period: int = 8, alphabet: str = "abcdefghij",
                  seed: int = 0) -> str:
    """A character stream that repeats a random motif with exact period.

    The motif is drawn until its fundamental period equals ``period``
    (a motif like ``abab`` would secretly have period 2), then tiled.
    The stream is perfectly predictable after one period, so a
    next-char model can reach perplexity 1.
    """
    if not 2 <= period <= 64:
        raise ConfigError(f"period must be in [2, 64], got {period}")
    if not 2 <= len(set(alphabet)) <= 16:
        raise ConfigError(f"alphabet needs 2..16 distinct letters, got {alphabet!r}")
    if length < 2 * period:
        raise ConfigError(f"length {length} too short for period {period}")
    letters = sorted(set(alphabet))
    rng = np.random.default_rng(seed)
    while True:
        motif = "".join(letters[int(k)] for k in rng.integers(0, len(letters), period))
        if _fundamental_period(motif) == period:
            break
    reps = length // period + 1
    return (motif * reps)[:length]


def encode_text(text: str) -> tuple[np.ndarray, str]:
    """Map text to int codes; returns (codes, vocabulary string)."""
    if not text:
        raise DataError("empty text")
    vocab = "".join(sorted(set(text)))
    lut = {ch: i for i, ch in enumerate(vocab)}
    return np.array([lut[c] for c in text], dtype=np.int64), vocab


def chunk_codes(codes: np.ndarray, seq_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Aligned (input, target) chunks of seq_len for next-char training.

    Consecutive non-overlapping windows; the tail that cannot fill a
    window is dropped.  Targets are inputs shifted one step.
    """
    codes = np.asarray(codes).reshape(-1)
    usable = (len(codes) - 1) // seq_len * seq_len
    if usable < seq_len:
        raise DataError(f"{len(codes)} codes cannot fill one chunk of {seq_len}")
    x = codes[:usable].reshape(-1, seq_len)
    t = codes[1 : usable + 1].reshape(-1, seq_len)
    return x, t


# ------------------------------------------------------------------- file IO

def save_xy_csv(path, x: np.ndarray, y: np.ndarray, feature_names: list[str]) -> None:
    """Write features + integer label as CSV, floats via repr (round-trip exact)."""
    x2 = np.asarray(x, dtype=np.float64).reshape(len(y), -1)
    if x2.shape[1] != len(feature_names):
        raise DataError(f"{x2.shape[1]} features vs {len(feature_names)} names")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [",".join(feature_names) + ",label"]
    for row, label in zip(x2, np.asarray(y, dtype=np.int64)):
        rows.append(",".join(repr(v) for v in row.tolist()) + f",{label}")
    path.write_text("\n".join(rows) + "\n")


def _load_xy_csv(path, n_features: int) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) != n_features + 1 or header[-1] != "label":
        raise DataError(f"{path}: expected {n_features} feature columns + label")
    xs, ys = [], []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != n_features + 1:
            raise DataError(f"{path}:{lineno}: {len(cells)} columns, want {n_features + 1}")
        try:
            xs.append([float(c) for c in cells[:-1]])
            ys.append(int(cells[-1]))
        except ValueError:
            raise DataError(f"{path}:{lineno}: unparseable row") from None
    if not xs:
        raise DataError(f"{path}: no data rows")
    return np.array(xs, dtype=np.float64), np.array(ys, dtype=np.int64)


def load_spirals_csv(path) -> tuple[np.ndarray, np.ndarray]:
    return _load_xy_csv(path, 2)


def load_tinyimages_csv(path, size: int = 8) -> tuple[np.ndarray, np.ndarray]:
    x, y = _load_xy_csv(path, size * size)
    return x.reshape(-1, 1, size, size), y


def spirals_feature_names() -> list[str]:
    return ["x1", "x2"]


def tinyimages_feature_names(size: int = 8) -> list[str]:
    return [f"p{r}{c}" for r in range(size) for c in range(size)]


def train_test_split(x: np.ndarray, y: np.ndarray, test_fraction: float = 0.25,
                     seed: int = 0):
    """Seeded permutation split; returns (x_tr, y_tr, x_te, y_te)."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(y)
    order = np.random.default_rng(seed).permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    te, tr = order[:n_test], order[n_test:]
    return x[tr], y[tr], x[te], y[te]

"""Slice-rate scheduling: which subnets train on each iteration.

A schedule draws a small batch of slice rates L_t per training step.
Categorical probabilities over the rate list can be derived from any
cumulative distribution F by integrating F's density over the cell
around each rate (midpoint rule on the CDF), which makes the batch of
discrete rates approximate sampling a continuous width preference.

Schemes:

* Random        -- k categorical draws from given probabilities.
* Static        -- every rate, every step.
* RandomStatic  -- a fixed set of rates always included, plus k draws
                  from the remaining rates.

``preset`` builds the named schemes used throughout the experiments
(R-uniform-k, R-weighted-k, R-min, R-max, R-min-max, Static).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "SliceRateList",
    "probabilities_from_distribution",
    "uniform_cdf",
    "truncated_normal_cdf",
    "RandomScheme",
    "StaticScheme",
    "RandomStaticScheme",
    "next_slice_rate_batch",
    "preset",
    "PRESET_NAMES",
]


@dataclass(frozen=True)
class SliceRateList:
    """Strictly ascending slice rates in (0, 1], ending at 1.0."""

    rates: tuple[float, ...]

    def __init__(self, rates: Sequence[float]):
        rates = tuple(float(r) for r in rates)
        if not rates:
            raise ConfigError("slice rate list is empty")
        for r in rates:
            if not 0.0 < r <= 1.0:
                raise ConfigError(f"slice rate {r} outside (0, 1]")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ConfigError(f"slice rates must be strictly ascending, got {rates}")
        if rates[-1] != 1.0:
            raise ConfigError(f"slice rate list must end at 1.0, got {rates}")
        object.__setattr__(self, "rates", rates)

    def __iter__(self):
        return iter(self.rates)

    def __len__(self):
        return len(self.rates)

    def __getitem__(self, i):
        return self.rates[i]

    @property
    def lower_bound(self) -> float:
        return self.rates[0]


def _as_rates(rates) -> tuple[float, ...]:
    if isinstance(rates, SliceRateList):
        return rates.rates
    return SliceRateList(rates).rates


def probabilities_from_distribution(cdf: Callable[[float], float], rates) -> tuple[float, ...]:
    """Cell probabilities for each rate from a CDF via midpoints.

    p(r_1) = F(m_1), p(r_i) = F(m_i) - F(m_{i-1}), p(r_G) = 1 - F(m_{G-1})
    with m_i the midpoint of consecutive rates.  The telescoping sum is
    exactly 1.  A CDF that decreases across the sampled midpoints is
    rejected.
    """
    rates = _as_rates(rates)
    if len(rates) == 1:
        return (1.0,)
    mids = [(a + b) / 2.0 for a, b in zip(rates, rates[1:])]
    f = [float(cdf(m)) for m in mids]
    for v, m in zip(f, mids):
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"cdf({m}) = {v} outside [0, 1]")
    for (m0, a), (m1, b) in zip(zip(mids, f), zip(mids[1:], f[1:])):
        if b < a:
            raise ConfigError(f"cdf decreases between {m0} and {m1} ({a} -> {b})")
    probs = [f[0]]
    probs += [b - a for a, b in zip(f, f[1:])]
    probs.append(1.0 - f[-1])
    return tuple(probs)


def uniform_cdf(lo: float = 0.0, hi: float = 1.0) -> Callable[[float], float]:
    if hi <= lo:
        raise ConfigError(f"uniform_cdf: empty support [{lo}, {hi}]")

    def cdf(x: float) -> float:
        return min(1.0, max(0.0, (x - lo) / (hi - lo)))

    return cdf


def truncated_normal_cdf(mu: float, sigma: float, lo: float, hi: float) -> Callable[[float], float]:
    """Normal(mu, sigma) restricted to [lo, hi] and renormalized."""
    if sigma <= 0:
        raise ConfigError(f"truncated_normal_cdf: sigma must be positive, got {sigma}")
    if hi <= lo:
        raise ConfigError(f"truncated_normal_cdf: empty support [{lo}, {hi}]")

    def phi(x: float) -> float:
        return 0.5 * (1.0 + math.erf((x - mu) / (sigma * math.sqrt(2.0))))

    z = phi(hi) - phi(lo)
    if z <= 0:
        raise ConfigError("truncated_normal_cdf: vanishing mass on the support")

    def cdf(x: float) -> float:
        if x <= lo:
            return 0.0
        if x >= hi:
            return 1.0
        return (phi(x) - phi(lo)) / z

    return cdf


def _check_probs(probs: tuple[float, ...], count: int, what: str) -> None:
    if len(probs) != count:
        raise ConfigError(f"{what}: {len(probs)} probabilities for {count} rates")
    if any(p < 0 for p in probs):
        raise ConfigError(f"{what}: negative probability in {probs}")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError(f"{what}: probabilities sum to {sum(probs)}, expected 1")


@dataclass(frozen=True)
class RandomScheme:
    """k categorical draws over the full rate list."""

    probabilities: tuple[float, ...]
    draws: int = 1

    def __post_init__(self):
        if self.draws < 1:
            raise ConfigError(f"RandomScheme: draws must be >= 1, got {self.draws}")

    def sample(self, rates, rng: np.random.Generator) -> tuple[float, ...]:
        rates = _as_rates(rates)
        _check_probs(self.probabilities, len(rates), "RandomScheme")
        idx = rng.choice(len(rates), size=self.draws, p=self.probabilities)
        return _finalize(rates[i] for i in idx)


@dataclass(frozen=True)
class StaticScheme:
    """Every rate in the list, every iteration."""

    def sample(self, rates, rng: np.random.Generator) -> tuple[float, ...]:
        return _finalize(_as_rates(rates))


@dataclass(frozen=True)
class RandomStaticScheme:
    """Fixed rates always scheduled, plus k draws from the remainder.

    ``probabilities`` aligns with the remainder (the rate list minus the
    fixed set, ascending).  Collisions between a draw and a fixed rate
    keep a single instance.
    """

    fixed: tuple[float, ...]
    probabilities: tuple[float, ...] = field(default=())
    draws: int = 1

    def __post_init__(self):
        if not self.fixed:
            raise ConfigError("RandomStaticScheme: fixed set is empty")
        if self.draws < 0:
            raise ConfigError(f"RandomStaticScheme: draws must be >= 0, got {self.draws}")

    def sample(self, rates, rng: np.random.Generator) -> tuple[float, ...]:
        rates = _as_rates(rates)
        for r in self.fixed:
            if r not in rates:
                raise ConfigError(f"RandomStaticScheme: fixed rate {r} not in rate list {rates}")
        rest = tuple(r for r in rates if r not in self.fixed)
        chosen = list(self.fixed)
        if rest and self.draws:
            _check_probs(self.probabilities, len(rest), "RandomStaticScheme")
            idx = rng.choice(len(rest), size=self.draws, p=self.probabilities)
            chosen.extend(rest[i] for i in idx)
        return _finalize(chosen)


def _finalize(rates) -> tuple[float, ...]:
    """Descending order, duplicates removed."""
    return tuple(sorted(set(rates), reverse=True))


def next_slice_rate_batch(scheme, rates, rng: np.random.Generator) -> tuple[float, ...]:
    """Draw L_t for one training iteration (descending, de-duplicated)."""
    return scheme.sample(rates, rng)


PRESET_NAMES = ("R-uniform-K", "R-weighted-K", "R-min", "R-max", "R-min-max", "Static")


def _weighted_probabilities(n: int) -> tuple[float, ...]:
    """Full net 0.5, base net 0.25, the rest split 0.25 evenly (ascending)."""
    if n == 1:
        return (1.0,)
    if n == 2:
        return (1.0 / 3.0, 2.0 / 3.0)
    mid = 0.25 / (n - 2)
    return tuple([0.25] + [mid] * (n - 2) + [0.5])


def preset(name: str, rates) -> RandomScheme | StaticScheme | RandomStaticScheme:
    """Build a named scheme for a rate list.

    Names: ``Static``, ``R-uniform-<k>``, ``R-weighted-<k>``, ``R-min``,
    ``R-max``, ``R-min-max`` (k = number of draws per iteration).
    """
    rates = _as_rates(rates)
    n = len(rates)
    uniform = tuple([1.0 / n] * n)
    key = name.strip()
    low = key.lower()
    if low == "static":
        return StaticScheme()
    if low == "r-min-max":
        fixed = (rates[0], rates[-1]) if n > 1 else (rates[0],)
        return _random_static(fixed, rates)
    if low == "r-min":
        return _random_static((rates[0],), rates)
    if low == "r-max":
        return _random_static((rates[-1],), rates)
    for stem, probs in (("r-uniform-", uniform), ("r-weighted-", _weighted_probabilities(n))):
        if low.startswith(stem):
            try:
                k = int(low[len(stem):])
            except ValueError:
                raise ConfigError(f"bad draw count in scheme name {name!r}") from None
            return RandomScheme(probabilities=probs, draws=k)
    raise ConfigError(f"unknown scheme {name!r}; valid names: {', '.join(PRESET_NAMES)}")


def _random_static(fixed: tuple[float, ...], rates: tuple[float, ...]) -> RandomStaticScheme:
    rest = [r for r in rates if r not in fixed]
    probs = tuple([1.0 / len(rest)] * len(rest)) if rest else ()
    return RandomStaticScheme(fixed=fixed, probabilities=probs, draws=1 if rest else 0)

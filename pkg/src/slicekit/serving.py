"""Latency-budget serving with width-sliced batching.

To answer every query within a latency budget T, queries are gathered
into a batch every T/2 time units; the batch of size n runs at the
largest slice rate satisfying  n * r^2 * t <= T/2,  where t is the
full-rate per-query processing time and the r^2 factor is the quadratic
cost law.  Worst case, a query waits T/2 for its batch to close and the
batch takes T/2 to process: latency <= T.

When even the base rate cannot fit the batch in half a budget, the
batch splits into the largest sub-batches feasible at the base rate,
processed back to back; any spill past the window is reported honestly
as latency violations in the event log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .scheduling import SliceRateList

__all__ = [
    "LatencyPolicy",
    "QueryStream",
    "choose_rate_for_batch",
    "plan_batch",
    "BatchRow",
    "SimulationResult",
    "simulate_workload",
    "burst16_trace",
    "bundled_trace",
]


@dataclass(frozen=True)
class LatencyPolicy:
    latency_budget: float  # T, seconds
    unit_time: float       # t: one query at full rate costs this
    rates: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        if self.latency_budget <= 0:
            raise ConfigError(f"latency budget must be positive, got {self.latency_budget}")
        if self.unit_time <= 0:
            raise ConfigError(f"unit time must be positive, got {self.unit_time}")
        object.__setattr__(self, "rates", tuple(SliceRateList(self.rates)))

    @property
    def window(self) -> float:
        """Batching interval: half the latency budget."""
        return self.latency_budget / 2.0


def choose_rate_for_batch(policy: LatencyPolicy, n: int) -> float | None:
    """Largest listed rate r with n * r^2 * t <= T/2; None for an empty batch.

    Returns None as well when even the base rate violates the bound —
    the caller then splits the batch (see :func:`plan_batch`).
    """
    if n < 0:
        raise DataError(f"negative batch size {n}")
    if n == 0:
        return None
    for r in sorted(policy.rates, reverse=True):
        if n * r * r * policy.unit_time <= policy.window:
            return r
    return None


def plan_batch(policy: LatencyPolicy, n: int) -> list[tuple[int, float]]:
    """Dispatch plan for a batch: [(size, rate)] sub-batches.

    Feasible batches dispatch whole.  Overloaded batches split into the
    largest sub-batches feasible at the base rate, processed back to
    back (the remainder also runs at the base rate).
    """
    if n == 0:
        return []
    r = choose_rate_for_batch(policy, n)
    if r is not None:
        return [(n, r)]
    base = policy.rates[0]
    cap = int(math.floor(policy.window / (base * base * policy.unit_time)))
    if cap < 1:
        raise ConfigError(
            f"policy cannot serve even one query at the base rate {base}: "
            f"{base}^2 * {policy.unit_time} > {policy.window}"
        )
    plan = [(cap, base)] * (n // cap)
    if n % cap:
        plan.append((n % cap, base))
    return plan


@dataclass(frozen=True)
class QueryStream:
    """Sorted arrival timestamps (seconds)."""

    arrivals: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.arrivals, dtype=np.float64).reshape(-1)
        if arr.size and (np.diff(arr) < 0).any():
            raise DataError("arrival timestamps must be sorted")
        if arr.size and arr[0] < 0:
            raise DataError("arrival timestamps must be nonnegative")
        object.__setattr__(self, "arrivals", arr)

    def __len__(self):
        return len(self.arrivals)

    @classmethod
    def constant(cls, rate: float, duration: float, start: float = 0.0) -> "QueryStream":
        """Evenly spaced arrivals at ``rate`` per second over ``duration``."""
        if rate <= 0 or duration <= 0:
            raise ConfigError(f"rate and duration must be positive, got {rate}/{duration}")
        count = int(math.floor(rate * duration))
        return cls(start + (np.arange(1, count + 1)) / rate)

    @classmethod
    def with_burst(cls, base_rate: float, burst_factor: float, burst_start: float,
                   burst_end: float, duration: float) -> "QueryStream":
        """Constant base rate with a burst_factor x surge in [burst_start, burst_end)."""
        if not 0 <= burst_start < burst_end <= duration:
            raise ConfigError(
                f"burst window [{burst_start}, {burst_end}) must fit in [0, {duration}]"
            )
        parts = []
        if burst_start > 0:
            parts.append(cls.constant(base_rate, burst_start).arrivals)
        parts.append(
            cls.constant(base_rate * burst_factor, burst_end - burst_start, burst_start).arrivals
        )
        if duration > burst_end:
            parts.append(cls.constant(base_rate, duration - burst_end, burst_end).arrivals)
        return cls(np.concatenate(parts))

    @classmethod
    def from_trace(cls, path) -> "QueryStream":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise DataError(f"cannot read trace {path}: {e}") from e
        return cls._parse_trace(text, str(path))

    @classmethod
    def _parse_trace(cls, text: str, origin: str) -> "QueryStream":
        values = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise DataError(f"{origin}:{lineno}: not a timestamp: {line!r}") from None
        return cls(np.array(values))

    def save_trace(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{t!r}\n" for t in self.arrivals.tolist()))


def burst16_trace() -> QueryStream:
    """The 16x-burst workload: 64 q/s with a 1024 q/s surge in seconds 4-6.

    Designed for the default policy (T=2, t=0.01, quarter rates): calm
    windows run at rate 1.0, the burst forces the rate down by exactly
    a factor of 4, and nothing violates the budget.  The same stream
    ships as a file (see  :func:`bundled_trace`); this function is its
    generator.
    """
    return QueryStream.with_burst(64.0, 16.0, burst_start=4.0, burst_end=6.0, duration=10.0)


def bundled_trace() -> QueryStream:
    """Load the burst trace shipped inside the package."""
    text = resources.files("slicekit").joinpath("data/burst16_trace.csv").read_text()
    return QueryStream._parse_trace(text, "slicekit/data/burst16_trace.csv")


@dataclass(frozen=True)
class BatchRow:
    batch_id: int
    close_time: float
    n: int
    rate: float
    proc_time: float
    max_latency: float


@dataclass
class SimulationResult:
    policy: LatencyPolicy
    batches: list[BatchRow] = field(default_factory=list)
    total_queries: int = 0
    max_latency: float = 0.0
    violations: int = 0

    def to_csv(self) -> str:
        lines = ["batch_id,close_time,n,rate,proc_time,max_latency"]
        for b in self.batches:
            lines.append(
                f"{b.batch_id},{b.close_time!r},{b.n},{b.rate},{b.proc_time!r},{b.max_latency!r}"
            )
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "latency_budget": self.policy.latency_budget,
            "unit_time": self.policy.unit_time,
            "window": self.policy.window,
            "total_queries": self.total_queries,
            "batches": len(self.batches),
            "max_latency": self.max_latency,
            "violations": self.violations,
            "rates_used": sorted({b.rate for b in self.batches}),
        }


def simulate_workload(stream: QueryStream, policy: LatencyPolicy) -> SimulationResult:
    """Deterministic discrete-event run of the batching policy.

    Windows close every T/2; arrivals with prev < t <= close join the
    closing batch (boundary arrivals belong to the closing batch).
    Sub-batches dispatch back to back once the server is free; a
    query's latency is its completion time minus its arrival time.
    """
    result = SimulationResult(policy=policy, total_queries=len(stream))
    arrivals = stream.arrivals
    if len(arrivals) == 0:
        return result
    window = policy.window
    n_windows = int(math.ceil(arrivals[-1] / window + 1e-12))
    busy_until = 0.0
    batch_id = 0
    pos = 0
    for k in range(1, n_windows + 1):
        close = k * window
        hi = int(np.searchsorted(arrivals, close, side="right"))
        batch = arrivals[pos:hi]
        pos = hi
        if len(batch) == 0:
            continue  # empty windows dispatch nothing
        offset = 0
        for size, rate in plan_batch(policy, len(batch)):
            start = max(close, busy_until)
            proc = size * rate * rate * policy.unit_time
            done = start + proc
            busy_until = done
            sub = batch[offset : offset + size]
            offset += size
            latencies = done - sub
            worst = float(latencies.max())
            result.batches.append(
                BatchRow(batch_id, close, size, rate, proc, worst)
            )
            batch_id += 1
            result.max_latency = max(result.max_latency, worst)
            result.violations += int((latencies > policy.latency_budget).sum())
    return result

"""Latency-budgeted batch serving: rate choice, planning, simulation."""

import numpy as np
import pytest

from slicekit.errors import ConfigError, DataError
from slicekit.serving import (LatencyPolicy, QueryStream, bundled_trace,
                              burst16_trace, choose_rate_for_batch,
                              plan_batch, simulate_workload)

POLICY = LatencyPolicy(latency_budget=2.0, unit_time=0.01)


def test_policy_window_is_half_the_budget():
    assert POLICY.window == 1.0
    assert LatencyPolicy(0.5, 0.001).window == 0.25


def test_policy_validation():
    with pytest.raises(ConfigError):
        LatencyPolicy(0.0, 0.01)
    with pytest.raises(ConfigError):
        LatencyPolicy(2.0, -1.0)
    with pytest.raises(ConfigError):
        LatencyPolicy(2.0, 0.01, rates=(0.5, 1.5))


def test_rates_must_ascend():
    with pytest.raises(ConfigError):
        LatencyPolicy(2.0, 0.01, rates=(1.0, 0.25, 0.5))
    with pytest.raises(ConfigError):
        LatencyPolicy(2.0, 0.01, rates=(0.25, 0.25, 0.5))


@pytest.mark.parametrize("n,expected", [
    (1, 1.0),
    (100, 1.0),      # 100 * 1 * 0.01 = 1.0 <= 1.0, boundary holds
    (101, 0.75),     # 101 * 0.01 > 1;  101 * 0.5625 * .01 = 0.568
    (177, 0.75),     # 177 * 0.5625 * .01 = 0.9956
    (178, 0.5),
    (400, 0.5),      # exactly 1.0 at r = 0.5
    (401, 0.25),
    (1600, 0.25),    # exactly 1.0 at the base rate
    (25, 1.0),
])
def test_choose_rate_oracles(n, expected):
    assert choose_rate_for_batch(POLICY, n) == expected


def test_choose_rate_edge_cases():
    assert choose_rate_for_batch(POLICY, 0) is None
    assert choose_rate_for_batch(POLICY, 1601) is None  # overload
    with pytest.raises(DataError):
        choose_rate_for_batch(POLICY, -1)


def test_plan_batch_feasible_goes_whole():
    assert plan_batch(POLICY, 0) == []
    assert plan_batch(POLICY, 30) == [(30, 1.0)]
    assert plan_batch(POLICY, 400) == [(400, 0.5)]


def test_plan_batch_overload_splits_at_base_rate():
    assert plan_batch(POLICY, 5000) == [(1600, 0.25)] * 3 + [(200, 0.25)]
    assert plan_batch(POLICY, 3200) == [(1600, 0.25)] * 2
    # every sub-batch fits the window at its rate
    for size, rate in plan_batch(POLICY, 7777):
        assert size * rate * rate * POLICY.unit_time <= POLICY.window + 1e-12


def test_plan_batch_impossible_policy():
    tiny = LatencyPolicy(latency_budget=0.001, unit_time=1.0)
    with pytest.raises(ConfigError):
        plan_batch(tiny, 10)


def test_constant_stream_spacing():
    s = QueryStream.constant(4.0, 2.0)
    assert len(s) == 8
    np.testing.assert_allclose(s.arrivals, np.arange(1, 9) / 4.0)
    shifted = QueryStream.constant(4.0, 2.0, start=10.0)
    np.testing.assert_allclose(shifted.arrivals, 10.0 + np.arange(1, 9) / 4.0)
    with pytest.raises(ConfigError):
        QueryStream.constant(0.0, 1.0)


def test_with_burst_counts():
    s = QueryStream.with_burst(64.0, 16.0, 4.0, 6.0, 10.0)
    # 4s + 4s calm at 64 q/s, 2s at 1024 q/s
    assert len(s) == 64 * 8 + 1024 * 2
    in_burst = (s.arrivals > 4.0) & (s.arrivals <= 6.0)
    assert int(in_burst.sum()) == 2048
    with pytest.raises(ConfigError):
        QueryStream.with_burst(64.0, 16.0, 6.0, 4.0, 10.0)


def test_stream_rejects_unsorted_or_negative():
    with pytest.raises(DataError):
        QueryStream(np.array([1.0, 0.5, 2.0]))
    with pytest.raises(DataError):
        QueryStream(np.array([-0.1, 0.5]))
    assert len(QueryStream(np.array([]))) == 0


def test_trace_round_trip_is_exact(tmp_path):
    s = burst16_trace()
    p = tmp_path / "trace.csv"
    s.save_trace(p)
    loaded = QueryStream.from_trace(p)
    np.testing.assert_array_equal(loaded.arrivals, s.arrivals)


def test_trace_parsing_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# header comment\n0.5\nnonsense\n")
    with pytest.raises(DataError, match="bad.csv:3"):
        QueryStream.from_trace(p)
    with pytest.raises(DataError):
        QueryStream.from_trace(tmp_path / "missing.csv")


def test_bundled_trace_matches_generator():
    np.testing.assert_array_equal(bundled_trace().arrivals,
                                  burst16_trace().arrivals)


def test_simulate_burst_drops_rate_fourfold():
    result = simulate_workload(burst16_trace(), POLICY)
    assert result.total_queries == 2560
    assert result.violations == 0
    assert result.max_latency <= POLICY.latency_budget
    rates = {row.close_time: row.rate for row in result.batches
             if row.batch_id == min(b.batch_id for b in result.batches
                                    if b.close_time == row.close_time)}
    calm = [r.rate for r in result.batches if r.close_time <= 4.0]
    surge = [r.rate for r in result.batches if 5.0 <= r.close_time <= 6.0]
    assert set(calm) == {1.0}
    assert set(surge) == {0.25}
    assert max(calm) / min(surge) == 4.0


def test_simulate_window_boundary_belongs_to_closing_batch():
    # one arrival exactly on the window close joins that batch
    s = QueryStream(np.array([0.5, 1.0, 1.5]))
    result = simulate_workload(s, POLICY)
    assert [b.n for b in result.batches] == [2, 1]
    assert [b.close_time for b in result.batches] == [1.0, 2.0]


def test_simulate_back_to_back_dispatch():
    # 3200 arrivals in the first window: two max sub-batches, serialized
    s = QueryStream(np.linspace(0.001, 0.999, 3200))
    result = simulate_workload(s, POLICY)
    assert [b.n for b in result.batches] == [1600, 1600]
    first, second = result.batches
    assert first.close_time == second.close_time == 1.0
    # second starts when the first finishes
    assert second.max_latency > first.max_latency
    assert result.violations > 0  # latency exceeds 2s for the tail


def test_simulate_empty_stream():
    result = simulate_workload(QueryStream(np.array([])), POLICY)
    assert result.total_queries == 0
    assert result.batches == []
    assert result.max_latency == 0.0


def test_simulation_csv_and_summary():
    result = simulate_workload(burst16_trace(), POLICY)
    csv = result.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "batch_id,close_time,n,rate,proc_time,max_latency"
    assert len(lines) == len(result.batches) + 1
    s = result.summary()
    assert s["total_queries"] == 2560
    assert s["violations"] == 0
    assert s["window"] == 1.0
    assert s["rates_used"] == [0.25, 1.0]


def test_latency_definition_completion_minus_arrival():
    s = QueryStream(np.array([0.25]))
    result = simulate_workload(s, POLICY)
    # closes at 1.0, processes 1 query at rate 1.0 -> done 1.01
    row = result.batches[0]
    assert row.proc_time == pytest.approx(0.01)
    assert row.max_latency == pytest.approx(1.01 - 0.25)

"""Exact parameter/FLOP accounting and the quadratic width-cost law."""

import json

import numpy as np
import pytest

from slicekit.costing import (cost_report, count_flops, count_params,
                              max_rate_for_budget)
from slicekit.errors import BudgetError
from slicekit.layers import GroupSpec, SlicedDense
from slicekit.models import (SequentialModel, char_lstm, spirals_mlp,
                             tinyimages_cnn, vgg13_cifar)

RATES16 = tuple(i / 16 for i in range(1, 17))


@pytest.fixture(scope="module")
def vgg():
    return vgg13_cifar()


def test_vgg13_full_totals(vgg):
    # hand-audited totals for the 10-conv stack + norms + classifier
    assert count_params(vgg, 1.0) == 9_416_010
    assert count_flops(vgg, 1.0) == 1_020_990_464


def test_vgg13_param_count_matches_live_arrays(vgg):
    live = sum(t.data.size for _, t in vgg.parameters())
    assert live == count_params(vgg, 1.0)


def test_vgg13_quarter_rate_report(vgg):
    rep = cost_report(vgg, 0.25)
    assert rep.total_params == sum(r.params for r in rep.rows)
    assert rep.full_flops == 1_020_990_464
    # near r^2 but not exact: input conv and classifier have unsliced axes
    assert abs(rep.flops_ratio - 0.0625) < 0.002
    assert rep.flops_ratio != 0.0625


def test_quadratic_law_exact_on_pure_stack():
    # bias-free dense stack whose every axis slices: flops(r) == r^2 * flops(1)
    spec = GroupSpec(64, 16)
    rng = np.random.default_rng(0)
    layers = [SlicedDense(spec, spec, bias=False, rng=rng, name=f"d{i}") for i in range(3)]
    model = SequentialModel(layers, {"kind": "stack"}, (64,))
    full = count_flops(model, 1.0)
    for r in RATES16:
        assert count_flops(model, r) == int(r * r * full)


def test_params_scale_quadratically_up_to_bias():
    spec = GroupSpec(64, 16)
    layers = [SlicedDense(spec, spec, bias=True, name="d")]
    model = SequentialModel(layers, {"kind": "stack"}, (64,))
    for r in (0.25, 0.5, 1.0):
        g = spec.boundary(r)
        assert count_params(model, r) == g * g + g


def test_report_serialization_round_trip(vgg):
    rep = cost_report(vgg, 0.5)
    d = json.loads(rep.to_json())
    assert d["total_flops"] == rep.total_flops
    assert d["rows"][0]["layer"] == rep.rows[0].layer
    csv = rep.to_csv()
    assert csv.splitlines()[0] == "layer,kind,params,flops"
    assert csv.splitlines()[-1].startswith("total,")


def test_lstm_flops_scale_with_sequence_length():
    model = char_lstm(vocab=8, hidden=32, groups=4, depth=1)
    f32 = count_flops(model, 1.0, seq_len=32)
    f64 = count_flops(model, 1.0, seq_len=64)
    head = 32 * 8  # per-step classifier MACs
    cell = 4 * 32 * (8 + 32)
    assert f32 == 32 * (cell + head)
    assert f64 == 2 * f32


def test_small_model_flops_by_hand():
    model = spirals_mlp(width=32, groups=4, depth=2)
    # fc1 2x32 + fc2 32x32 + head 32x2 (norms bill no MACs)
    assert count_flops(model, 1.0) == 2 * 32 + 32 * 32 + 32 * 2
    assert count_params(model, 1.0) == (32 * 2 + 32) + (32 * 32 + 32) + (2 * 32 + 2) + 2 * 32 * 2


def test_cnn_pooling_halves_feature_maps():
    model = tinyimages_cnn(width=16, groups=4)
    # conv1 on 8x8, conv2 on 4x4 after the pool
    f = count_flops(model, 1.0)
    conv1 = 16 * 1 * 9 * 64
    conv2 = 32 * 16 * 9 * 16
    head = 32 * 4
    assert f == conv1 + conv2 + head


def test_max_rate_for_budget(vgg):
    full = count_flops(vgg, 1.0)
    rates = (0.25, 0.5, 0.75, 1.0)
    assert max_rate_for_budget(0.14 * full, full, rates) == 0.25
    assert max_rate_for_budget(0.25 * full, full, rates) == 0.5   # boundary: r^2 == budget
    assert max_rate_for_budget(full, full, rates) == 1.0
    assert max_rate_for_budget(0.5 * full, full, rates) == 0.5
    with pytest.raises(BudgetError):
        max_rate_for_budget(0.01 * full, full, rates)

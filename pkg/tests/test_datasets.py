"""Procedural data generators and their CSV round trips."""

import numpy as np
import pytest

from slicekit.datasets import (_fundamental_period, chunk_codes, encode_text,
                               load_spirals_csv, load_tinyimages_csv,
                               make_chartext, make_spirals, make_tinyimages,
                               save_xy_csv, spirals_feature_names,
                               tinyimages_feature_names, train_test_split)
from slicekit.errors import ConfigError, DataError


def test_spirals_shapes_and_determinism():
    x, y = make_spirals(n_per_class=64, seed=7)
    assert x.shape == (128, 2) and y.shape == (128,)
    assert set(y.tolist()) == {0, 1}
    assert (y == 0).sum() == 64
    x2, y2 = make_spirals(n_per_class=64, seed=7)
    np.testing.assert_array_equal(x, x2)
    np.testing.assert_array_equal(y, y2)
    x3, _ = make_spirals(n_per_class=64, seed=8)
    assert not np.array_equal(x, x3)
    with pytest.raises(ConfigError):
        make_spirals(n_per_class=0)


def test_tinyimages_shapes_and_range():
    x, y = make_tinyimages(n_per_class=16, seed=1)
    assert x.shape == (64, 1, 8, 8)
    assert set(y.tolist()) == {0, 1, 2, 3}
    assert x.min() >= 0.0 and x.max() <= 1.0
    x2, y2 = make_tinyimages(n_per_class=16, seed=1)
    np.testing.assert_array_equal(x, x2)
    with pytest.raises(ConfigError):
        make_tinyimages(size=4)


def test_fundamental_period():
    assert _fundamental_period("abab") == 2
    assert _fundamental_period("aaaa") == 1
    assert _fundamental_period("abcabcab") == 8  # not a whole number of reps
    assert _fundamental_period("abcd") == 4


@pytest.mark.parametrize("period", [2, 3, 8, 13])
def test_chartext_has_exact_period(period):
    text = make_chartext(length=512, period=period, seed=3)
    assert len(text) == 512
    motif = text[:period]
    assert _fundamental_period(motif) == period
    reps = 512 // period + 1
    assert text == (motif * reps)[:512]


def test_chartext_validation():
    with pytest.raises(ConfigError):
        make_chartext(period=1)
    with pytest.raises(ConfigError):
        make_chartext(alphabet="a")
    with pytest.raises(ConfigError):
        make_chartext(length=10, period=8)


def test_encode_text_round_trip():
    codes, vocab = encode_text("banana")
    assert vocab == "abn"
    np.testing.assert_array_equal(codes, [1, 0, 2, 0, 2, 0])
    assert "".join(vocab[c] for c in codes) == "banana"
    with pytest.raises(DataError):
        encode_text("")


def test_chunk_codes_alignment():
    codes = np.arange(17)
    x, t = chunk_codes(codes, 4)
    # 16 usable codes -> 4 chunks; targets shifted one step
    assert x.shape == t.shape == (4, 4)
    np.testing.assert_array_equal(x[0], [0, 1, 2, 3])
    np.testing.assert_array_equal(t[0], [1, 2, 3, 4])
    np.testing.assert_array_equal(x[-1], [12, 13, 14, 15])
    np.testing.assert_array_equal(t[-1], [13, 14, 15, 16])
    with pytest.raises(DataError):
        chunk_codes(np.arange(4), 4)  # needs one lookahead code


def test_csv_round_trip_spirals(tmp_path):
    x, y = make_spirals(n_per_class=8, seed=2)
    p = tmp_path / "spirals.csv"
    save_xy_csv(p, x, y, spirals_feature_names())
    x2, y2 = load_spirals_csv(p)
    np.testing.assert_array_equal(x, x2)   # repr floats: exact
    np.testing.assert_array_equal(y, y2)


def test_csv_round_trip_tinyimages(tmp_path):
    x, y = make_tinyimages(n_per_class=4, seed=2)
    p = tmp_path / "img.csv"
    save_xy_csv(p, x, y, tinyimages_feature_names())
    x2, y2 = load_tinyimages_csv(p)
    assert x2.shape == x.shape
    np.testing.assert_array_equal(x, x2)


def test_csv_bytes_stable_across_calls(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        x, y = make_spirals(n_per_class=8, seed=9)
        save_xy_csv(p, x, y, spirals_feature_names())
    assert a.read_bytes() == b.read_bytes()


def test_csv_loader_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2,label\n1.0,2.0\n")
    with pytest.raises(DataError, match="columns"):
        load_spirals_csv(p)
    p.write_text("x1,label\n1.0,0\n")
    with pytest.raises(DataError, match="feature columns"):
        load_spirals_csv(p)
    p.write_text("x1,x2,label\n1.0,oops,0\n")
    with pytest.raises(DataError, match="unparseable"):
        load_spirals_csv(p)
    p.write_text("x1,x2,label\n")
    with pytest.raises(DataError, match="no data rows"):
        load_spirals_csv(p)
    with pytest.raises(DataError):
        load_spirals_csv(tmp_path / "missing.csv")
    with pytest.raises(DataError):
        save_xy_csv(p, np.ones((2, 3)), np.zeros(2, dtype=int), ["a", "b"])


def test_train_test_split():
    x, y = make_spirals(n_per_class=32, seed=0)
    x_tr, y_tr, x_te, y_te = train_test_split(x, y, 0.25, seed=5)
    assert len(x_te) == 16 and len(x_tr) == 48
    again = train_test_split(x, y, 0.25, seed=5)
    np.testing.assert_array_equal(x_tr, again[0])
    np.testing.assert_array_equal(x_te, again[2])
    # partition: every row lands exactly once
    combined = np.concatenate([x_tr, x_te])
    assert combined.shape == x.shape
    assert sorted(map(tuple, combined.tolist())) == sorted(map(tuple, x.tolist()))
    with pytest.raises(ConfigError):
        train_test_split(x, y, 1.5)

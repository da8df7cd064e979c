import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adatp.config import AdaTPConfig
from adatp.errors import InvariantViolation, ShapeMismatch
from adatp.flops import ModelShape, layer_flops, ratio, ratio_from_counts
from adatp.pipeline import run
from adatp.synth import SynthSpec, generate, plant_tokens

from oracles import straight_line_flops_ratio


def shape(**kw):
    base = dict(num_layers=4, d_model=8, visual_tokens=16, mlp_expansion=4.0, text_tokens=4)
    base.update(kw)
    return ModelShape(**base)


def test_single_token_hand_arithmetic():
    # (4 + 4*4) * 1 * 2^2 + 2 * 1^2 * 2 = 80 + 4 = 84
    s = shape(d_model=2, mlp_expansion=4.0)
    assert layer_flops(1, s) == 84.0


def test_linear_regime_doubles_with_tokens():
    s = shape(d_model=4096)
    small, big = layer_flops(8, s), layer_flops(16, s)
    assert big / small == pytest.approx(2.0, rel=0.05)


def test_zero_tokens_rejected():
    with pytest.raises(InvariantViolation):
        layer_flops(0, shape())


def test_shape_must_be_positive():
    with pytest.raises(InvariantViolation):
        shape(d_model=0).validate()
    with pytest.raises(InvariantViolation):
        shape(mlp_expansion=-1.0).validate()


def test_unpruned_ratio_is_exactly_one():
    s = shape(num_layers=6, visual_tokens=100)
    assert ratio_from_counts([100] * 6, s) == 1.0


def test_halved_survivors_linear_limit():
    s = ModelShape(num_layers=10, d_model=4096, visual_tokens=512, text_tokens=64)
    got = ratio_from_counts([256] * 10, s)
    want = (64 + 256) / (64 + 512)
    assert got == pytest.approx(want, rel=0.02)


def test_count_length_must_match():
    with pytest.raises(ShapeMismatch):
        ratio_from_counts([16, 16], shape(num_layers=3))


def test_ratio_decreases_with_fewer_survivors():
    s = shape(num_layers=3, visual_tokens=16)
    a = ratio_from_counts([16, 12, 12], s)
    b = ratio_from_counts([16, 11, 12], s)
    assert 0 < b < a <= 1


def test_report_plumbing_and_mismatches():
    planted = plant_tokens((2,) * 4, 6, 2, 3, seed=1)
    dump, _ = generate(SynthSpec(n=8, c=6, d=16, num_layers=16, segment_lengths=(2,) * 4, planted=planted, seed=1))
    report = run(dump, AdaTPConfig())
    s = ModelShape(num_layers=16, d_model=16, visual_tokens=48)
    assert ratio(report, s) == pytest.approx(report.flops_ratio)
    with pytest.raises(ShapeMismatch):
        ratio(report, ModelShape(num_layers=12, d_model=16, visual_tokens=48))
    with pytest.raises(ShapeMismatch):
        ratio(report, ModelShape(num_layers=16, d_model=16, visual_tokens=32))


def test_matches_straight_line_formula():
    counts = [48, 48, 19, 16, 12, 12, 12, 12, 12, 12, 12, 12, 12, 12, 12, 12]
    s = ModelShape(num_layers=16, d_model=16, visual_tokens=48, text_tokens=64)
    got = ratio_from_counts(counts, s)
    want = straight_line_flops_ratio(counts, 16, 16, 48, e=4.0, t=64)
    assert got == pytest.approx(want, rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_ratio_in_unit_interval_and_monotone(seed):
    rng = np.random.default_rng(seed)
    layers = int(rng.integers(2, 12))
    nc = int(rng.integers(4, 64))
    counts = sorted((int(x) for x in rng.integers(1, nc + 1, layers)), reverse=True)
    s = ModelShape(num_layers=layers, d_model=int(rng.integers(2, 64)), visual_tokens=nc)
    r = ratio_from_counts(counts, s)
    assert 0.0 < r <= 1.0
    # shaving one token off one layer strictly reduces the ratio
    if counts[-1] > 1:
        fewer = counts[:-1] + [counts[-1] - 1]
        assert ratio_from_counts(fewer, s) < r

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adatp.bias import (
    CSV_HEADER,
    analyze_dump,
    global_bias,
    local_bias,
    metrics_rows,
    write_metrics_csv,
    write_position_grid_csv,
)
from adatp.errors import InvariantViolation, ShapeMismatch
from adatp.synth import SynthSpec, generate, plant_tokens

from oracles import brute_top_fraction


def test_uniform_scores_tie_rule_fills_from_front():
    n, c, k = 32, 4, 4
    scores = np.full(n * c, 0.5, dtype=np.float32)
    gb = global_bias(scores, n, c, q=0.1, k=k)
    # ascending-index ties: the whole top set sits in the first frames
    assert gb.head_fraction == 1.0
    assert gb.end_fraction == 0.0
    assert gb.top_count == 13  # ceil(0.1 * 128)


def test_all_mass_in_last_frame():
    n, c = 8, 4
    scores = np.zeros(n * c, dtype=np.float32)
    scores[(n - 1) * c :] = 1.0
    gb = global_bias(scores, n, c, q=c / (n * c), k=1)
    assert gb.end_fraction == 1.0
    assert gb.head_fraction == 0.0


def test_fraction_bounds_and_disjoint_windows():
    rng = np.random.default_rng(0)
    n, c = 16, 6
    scores = rng.uniform(0, 1, n * c).astype(np.float32)
    gb = global_bias(scores, n, c, q=0.25, k=4)
    assert 0.0 <= gb.end_fraction <= 1.0
    assert 0.0 <= gb.head_fraction <= 1.0
    assert gb.end_fraction + gb.head_fraction <= 1.0  # k <= n/2


@pytest.mark.parametrize("q,k", [(0.0, 1), (1.1, 1), (0.5, 0), (0.5, 9)])
def test_global_bias_domain(q, k):
    with pytest.raises(InvariantViolation):
        global_bias(np.ones(8 * 4, dtype=np.float32), 8, 4, q, k)


def test_global_bias_shape_check():
    with pytest.raises(ShapeMismatch):
        global_bias(np.ones(9), 2, 4, 0.5, 1)


def test_local_bias_uniform_ratio_one():
    lb = local_bias(np.full(12 * 7, 0.3, dtype=np.float32), 12, 7)
    assert lb.peak_ratio == pytest.approx(1.0)
    assert np.allclose(lb.position_sum, lb.position_sum[0])


def test_local_bias_doubled_position_closed_form():
    n, c = 5, 196
    scores = np.ones((n, c), dtype=np.float32)
    scores[:, 17] = 2.0
    lb = local_bias(scores.reshape(-1), n, c)
    assert lb.peak_pos == 17
    assert lb.peak_ratio == pytest.approx(2 * c / (c + 1), rel=1e-6)


def test_local_bias_zero_scores():
    lb = local_bias(np.zeros(3 * 4, dtype=np.float32), 3, 4)
    assert lb.peak_ratio == 1.0 and lb.peak_pos == 0


def test_planted_peak_measured():
    planted = plant_tokens((4,) * 8, 196, 4, 24, seed=7)
    spec = SynthSpec(planted=planted, peak_positions=(97,), peak_multiplier=5.77, seed=7)
    dump, _ = generate(spec)
    lb = local_bias(dump.layer_scores(2), dump.n, dump.c)
    assert lb.peak_pos == 97
    assert lb.peak_ratio == pytest.approx(5.77, abs=0.05)


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 100_000), q=st.floats(0.05, 1.0), k=st.integers(1, 8))
def test_matches_sorting_oracle(seed, q, k):
    rng = np.random.default_rng(seed)
    n, c = 8, 6
    scores = (rng.integers(0, 6, n * c) / 5.0).astype(np.float32)  # heavy ties
    gb = global_bias(scores, n, c, q, k)
    end, head = brute_top_fraction(scores, n, c, q, k)
    assert gb.end_fraction == end
    assert gb.head_fraction == head


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000), scale=st.floats(1e-3, 1e3))
def test_positive_scaling_changes_nothing(seed, scale):
    rng = np.random.default_rng(seed)
    n, c = 6, 8
    scores = rng.uniform(0, 1, n * c).astype(np.float32)
    a = global_bias(scores, n, c, 0.2, 2)
    b = global_bias(scores * scale, n, c, 0.2, 2)
    assert (a.end_fraction, a.head_fraction) == (b.end_fraction, b.head_fraction)
    la = local_bias(scores, n, c)
    lb = local_bias((scores.astype(np.float64) * scale).astype(np.float64), n, c)
    assert la.peak_pos == lb.peak_pos
    assert la.peak_ratio == pytest.approx(lb.peak_ratio, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_frame_reversal_swaps_head_and_end(seed):
    rng = np.random.default_rng(seed)
    n, c, k = 10, 4, 3
    scores = rng.uniform(0, 1, (n, c)).astype(np.float32)
    fwd = global_bias(scores.reshape(-1), n, c, 0.3, k)
    rev = global_bias(scores[::-1].reshape(-1), n, c, 0.3, k)
    assert fwd.end_fraction == rev.head_fraction
    assert fwd.head_fraction == rev.end_fraction
    # local bias ignores frame order entirely
    assert local_bias(scores.reshape(-1), n, c).peak_ratio == pytest.approx(
        local_bias(scores[::-1].reshape(-1), n, c).peak_ratio, rel=1e-12
    )


# --- reports and CSV ------------------------------------------------------------


def small_report(name, seed):
    planted = plant_tokens((2,) * 4, 6, 2, 3, seed=seed)
    dump, _ = generate(SynthSpec(n=8, c=6, d=16, num_layers=16, segment_lengths=(2,) * 4, planted=planted, seed=seed))
    return analyze_dump(dump, top_q=0.2, tail_k=2, name=name)


def test_report_covers_every_layer():
    rep = small_report("a", 1)
    assert len(rep.layers) == 16
    assert all(lb.layer == i for i, lb in enumerate(rep.layers))
    assert all(lb.local_bias.peak_ratio >= 1.0 for lb in rep.layers)


def test_metrics_rows_single_dump_has_no_mean():
    rows = metrics_rows([small_report("a", 1)])
    assert len(rows) == 16
    assert all(r[0] == "a" for r in rows)


def test_metrics_rows_mean_of_identical_dumps_equals_each():
    rep = small_report("a", 1)
    rep2 = small_report("b", 1)
    rows = metrics_rows([rep, rep2])
    mean_rows = [r for r in rows if r[0] == "mean"]
    assert len(mean_rows) == 16
    per_dump = [r for r in rows if r[0] == "a"]
    for mr, dr in zip(mean_rows, per_dump):
        assert mr[2] == pytest.approx(dr[2])
        assert mr[3] == pytest.approx(dr[3])
        assert mr[4] == pytest.approx(dr[4])
        assert mr[5] == dr[5]


def test_metrics_rows_rejects_mismatched_corpora():
    a = small_report("a", 1)
    planted = plant_tokens((2,) * 4, 6, 2, 3, seed=2)
    dump, _ = generate(
        SynthSpec(n=8, c=6, d=16, num_layers=12, segment_lengths=(2,) * 4, planted=planted, seed=2)
    )
    b = analyze_dump(dump, name="b")
    with pytest.raises(ShapeMismatch):
        metrics_rows([a, b])


def test_csv_layout():
    buf = io.StringIO()
    write_metrics_csv([small_report("a", 1)], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 17
    first = lines[1].split(",")
    assert first[0] == "a" and first[1] == "0"
    float(first[2]), float(first[3]), float(first[4]), int(first[5])


def test_position_grid_csv():
    buf = io.StringIO()
    write_position_grid_csv([float(i) for i in range(12)], 4, buf)
    rows = [line.split(",") for line in buf.getvalue().splitlines()]
    assert len(rows) == 3 and all(len(r) == 4 for r in rows)
    assert float(rows[1][0]) == 4.0
    with pytest.raises(ShapeMismatch):
        write_position_grid_csv([1.0, 2.0, 3.0], 2, io.StringIO())

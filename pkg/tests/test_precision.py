import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilesplat.precision import (
    FP16,
    FP32,
    TF32,
    HalfFormat,
    coordinate_error_sweep,
    emulated_dot_batch,
    emulated_mma,
    error_bound,
    exact_dot,
    parameter_range_check,
    round_to,
    sample_inv_cov,
    _sweep_vectors,
)


def test_format_constants():
    assert FP16.machine_epsilon == 2.0**-10
    assert TF32.machine_epsilon == 2.0**-10
    assert FP32.machine_epsilon == 2.0**-23
    assert FP16.max_finite == 65504.0
    assert FP16.overflow_threshold == 65520.0
    assert FP16.min_exponent == -14
    assert FP32.max_exponent == 127


def test_round_to_spacing_at_2048():
    # Spacing is 2 between 2048 and 4096; 2049 ties to the even neighbor.
    assert round_to(2049.0, FP16) == 2048.0
    assert round_to(2051.0, FP16) == 2052.0


def test_round_to_overflow():
    assert round_to(65520.0, FP16) == math.inf
    assert round_to(-65520.0, FP16) == -math.inf
    assert round_to(65519.0, FP16) == 65504.0
    assert round_to(65504.0, FP16) == 65504.0


def test_round_to_subnormals():
    quantum = 2.0**-24  # smallest positive FP16 subnormal
    assert round_to(quantum, FP16) == quantum
    assert round_to(quantum / 2.0, FP16) == 0.0  # tie to even (zero)
    assert round_to(quantum * 1.5, FP16) == quantum * 2.0  # tie to even
    assert round_to(quantum * 0.75, FP16) == quantum


def test_round_to_passes_non_finite():
    assert round_to(math.inf, FP16) == math.inf
    assert math.isnan(round_to(math.nan, FP16))


def test_round_to_unbounded_exponent_never_overflows():
    x = 1.0e30
    y = round_to(x, FP16, bound_exponent=False)
    assert math.isfinite(y)
    assert abs(y - x) <= FP16.machine_epsilon * x


@given(st.floats(min_value=-65000.0, max_value=65000.0, allow_nan=False))
@settings(max_examples=300)
def test_round_to_fp16_matches_numpy_half(x):
    assert round_to(x, FP16) == float(np.float16(x))


@given(st.floats(min_value=-3.0e38, max_value=3.0e38, allow_nan=False))
@settings(max_examples=300)
def test_round_to_fp32_matches_numpy_single(x):
    assert round_to(x, FP32) == float(np.float32(x))


def test_round_to_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    xs = rng.normal(scale=100.0, size=64)
    out = round_to(xs, FP16)
    assert np.array_equal(out, [round_to(float(x), FP16) for x in xs])


def test_emulated_mma_zero():
    beta, trace = emulated_mma(np.zeros(8), np.zeros(8))
    assert beta == 0.0
    assert not trace.overflow
    assert trace.partials.shape == (8,)


def test_emulated_mma_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        emulated_mma(np.zeros(8), np.zeros(7))


def test_emulated_mma_deterministic():
    rng = np.random.default_rng(1)
    u = rng.normal(size=8)
    v = rng.normal(size=8)
    b1, t1 = emulated_mma(u, v)
    b2, t2 = emulated_mma(u, v)
    assert b1 == b2
    assert np.array_equal(t1.partials, t2.partials)


def test_emulated_mma_flags_overflow():
    u = np.full(8, 70000.0)  # beyond the FP16 finite range
    v = np.ones(8)
    _, trace = emulated_mma(u, v, FP16)
    assert trace.overflow
    assert np.all(np.isinf(trace.u_rounded))


def test_emulated_mma_products_kept_in_fp32():
    # Inputs fit FP16 but the products only need to fit FP32.
    beta, trace = emulated_mma(np.full(8, 200.0), np.full(8, 400.0), FP16)
    assert not trace.overflow
    assert beta == 8 * 200.0 * 400.0


def test_emulated_dot_batch_matches_scalar():
    rng = np.random.default_rng(2)
    u = rng.normal(size=(20, 8))
    v = rng.normal(size=(20, 8))
    batch = emulated_dot_batch(u, v, FP16)
    for i in range(20):
        scalar, _ = emulated_mma(u[i], v[i], FP16)
        assert batch[i] == scalar


def test_fp32_emulation_near_oracle():
    # With single-precision inputs the only error source is accumulation:
    # |result - exact| <= n * eps_F * sum|u_i v_i|.
    rng = np.random.default_rng(3)
    u = rng.normal(size=(1000, 8))
    v = rng.normal(size=(1000, 8))
    got = emulated_dot_batch(u, v, FP32)
    exact = exact_dot(u, v)
    s = np.abs(u * v).sum(axis=-1)
    assert np.all(np.abs(got - exact) <= 8 * FP32.machine_epsilon * s + 1e-30)


def test_error_bound_zero_vectors():
    bound = error_bound(np.zeros(8), np.zeros(8))
    assert bound.rigorous == 0.0
    assert bound.leading_order == 0.0


def test_error_bound_single_term():
    u = np.array([1.0, 0, 0, 0, 0, 0, 0, 0])
    bound = error_bound(u, u)
    assert bound.leading_order == pytest.approx(2.0 * 2.0**-10)
    assert bound.rigorous >= bound.leading_order


def test_leading_order_is_twice_input_epsilon_times_s():
    rng = np.random.default_rng(4)
    u = rng.normal(size=8)
    v = rng.normal(size=8)
    s = float(np.abs(u * v).sum())
    assert error_bound(u, v).leading_order == pytest.approx(2.0 * 2.0**-10 * s)


def test_emulated_error_within_rigorous_bound():
    rng = np.random.default_rng(5)
    u, v = _sweep_vectors("local", 1024, 2000, rng)
    got = emulated_dot_batch(u, v, FP16, bound_exponent=False)
    exact = exact_dot(u, v)
    bound = error_bound(u, v, FP16).rigorous
    assert np.all(np.abs(got - exact) <= bound)


def test_parameter_range_check_examples():
    assert parameter_range_check((1.0, 0.0, 1.0)).ok
    verdict = parameter_range_check((5.0, 0.0, 1.0))
    assert not verdict.ok
    assert "s11" in verdict.violated
    assert parameter_range_check((2.0, 1.9, 2.0)).ok
    assert not parameter_range_check((2.0, 2.1, 2.0)).ok


def test_sampled_inverse_covariances_satisfy_ranges():
    rng = np.random.default_rng(6)
    s11, s12, s22 = sample_inv_cov(rng, 500)
    for t in zip(s11, s12, s22):
        verdict = parameter_range_check(t)
        assert verdict.ok, verdict.violated


def test_sweep_zero_trials():
    report = coordinate_error_sweep([256, 512], "local", 0, seed=1)
    assert report.max_err == [0.0, 0.0]
    assert report.overflow_count == [0, 0]
    assert math.isnan(report.slope)


def test_sweep_rejects_bad_inputs():
    with pytest.raises(ValueError):
        coordinate_error_sweep([512, 256], "local", 10, seed=1)
    with pytest.raises(ValueError):
        coordinate_error_sweep([256], "polar", 10, seed=1)


def test_sweep_report_roundtrip():
    report = coordinate_error_sweep([256, 512], "local", 200, seed=7)
    doc = report.to_dict()
    assert doc["mode"] == "local"
    assert doc["format"] == "FP16"
    assert doc["widths"] == [256, 512]
    assert len(doc["max_err"]) == 2
    assert all(m > 0 for m in doc["max_err"])


def test_sweep_deterministic_per_seed():
    a = coordinate_error_sweep([256], "global", 500, seed=3)
    b = coordinate_error_sweep([256], "global", 500, seed=3)
    c = coordinate_error_sweep([256], "global", 500, seed=4)
    assert a.max_err == b.max_err
    assert a.max_err != c.max_err


def test_custom_format_properties():
    fmt = HalfFormat("BF16", 7, 8)
    assert fmt.machine_epsilon == 2.0**-7
    assert fmt.bias == 127
    assert round_to(1.0 + 2.0**-9, fmt) == 1.0

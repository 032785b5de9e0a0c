import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockfield.codec import (
    QuantizationSpec,
    apply_activations,
    color_activation,
    density_activation,
    dequant_tables,
    dequantize,
    dequantize_channels,
    quantize,
    quantize_channels,
)


class TestCodec:
    def test_range_endpoints(self):
        assert quantize(-10.0, -10, 10) == 0
        assert quantize(10.0, -10, 10) == 255
        assert dequantize(0, -10, 10) == -10.0
        assert dequantize(255, -10, 10) == 10.0

    def test_midpoint(self):
        code = quantize(0.0, -10, 10)
        assert code == 128
        assert dequantize(code, -10, 10) == pytest.approx(10 * (128 * 2 / 255 - 1))

    def test_clamping(self):
        assert quantize(99.0, -10, 10) == 255
        assert quantize(-99.0, -10, 10) == 0

    def test_roundtrip_error_bound_bulk(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-15, 15, size=1_000_000)
        lo, hi = -10.0, 10.0
        back = dequantize(quantize(x, lo, hi), lo, hi)
        err = np.abs(back - np.clip(x, lo, hi))
        assert err.max() <= (hi - lo) / 255.0

    @settings(max_examples=300, deadline=None)
    @given(
        st.floats(-1e4, 1e4, allow_nan=False),
        st.floats(-20, 0, allow_nan=False),
        st.floats(0.5, 20, allow_nan=False),
    )
    def test_roundtrip_property(self, x, lo, hi):
        back = float(dequantize(quantize(x, lo, hi), lo, hi))
        assert abs(back - np.clip(x, lo, hi)) <= (hi - lo) / 255.0

    def test_channelwise(self):
        spec = QuantizationSpec()
        vals = np.zeros((4, 8))
        codes = quantize_channels(vals, spec)
        assert codes.shape == (4, 8)
        back = dequantize_channels(codes, spec)
        assert np.abs(back).max() < 20.0 / 255.0

    def test_tables_match_scalar(self):
        spec = QuantizationSpec()
        tables = dequant_tables(spec)
        for c, (lo, hi) in enumerate(spec.ranges):
            assert np.allclose(tables[c], dequantize(np.arange(256), lo, hi))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuantizationSpec(ranges=((0.0, 0.0),) * 8)
        with pytest.raises(ValueError):
            QuantizationSpec(ranges=((0.0, 1.0),) * 3)

    def test_spec_json_roundtrip(self):
        spec = QuantizationSpec()
        assert QuantizationSpec.from_json(spec.to_json()) == spec


class TestActivations:
    def test_density_positive_and_clamped(self):
        assert density_activation(-5.0) == pytest.approx(np.exp(-5.0))
        assert density_activation(50.0) == 1e4
        assert density_activation(np.log(1e4)) == pytest.approx(1e4)

    def test_sigmoid_range(self):
        x = np.linspace(-40, 40, 101)
        y = color_activation(x)
        assert np.all((y >= 0) & (y <= 1))
        assert color_activation(0.0) == pytest.approx(0.5)

    def test_apply_activations_split(self):
        pre = np.zeros((5, 8))
        sigma, diffuse, feature = apply_activations(pre)
        assert sigma.shape == (5,)
        assert diffuse.shape == (5, 3)
        assert feature.shape == (5, 4)
        assert np.allclose(sigma, 1.0)
        assert np.allclose(diffuse, 0.5)

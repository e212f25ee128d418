import numpy as np
import pytest

from sodkit import (
    ConvParams,
    FeatureMap,
    Grid2D,
    InvalidInputError,
    InvalidParameterError,
    ShapeError,
    binarize,
    box_mean,
    conv1x1,
    depthwise_conv,
    selu,
    sigmoid_map,
    sigmoid_values,
    softmax_rows,
    upsample,
)

from oracles import naive_box_mean

SELU_SCALE = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772


class TestContainers:
    def test_grid_is_immutable(self):
        g = Grid2D(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            g.data[0, 0] = 1.0

    def test_grid_copies_its_input(self):
        raw = np.zeros((3, 3))
        g = Grid2D(raw)
        raw[0, 0] = 7.0
        assert g.data[0, 0] == 0.0

    def test_grid_rejects_wrong_ndim(self):
        with pytest.raises(ShapeError):
            Grid2D(np.zeros((2, 2, 2)))
        with pytest.raises(ShapeError):
            FeatureMap(np.zeros((4, 4)))

    def test_grid_rejects_empty_and_nonfinite(self):
        with pytest.raises(ShapeError):
            Grid2D(np.zeros((0, 3)))
        with pytest.raises(InvalidInputError):
            Grid2D([[np.nan, 0.0], [0.0, 0.0]])
        with pytest.raises(InvalidInputError):
            FeatureMap(np.full((1, 2, 2), np.inf))

    def test_round_trip_between_grid_and_map(self):
        g = Grid2D(np.arange(6.0).reshape(2, 3))
        assert np.array_equal(g.to_feature_map().to_grid().data, g.data)

    def test_multichannel_map_refuses_to_become_grid(self):
        with pytest.raises(ShapeError):
            FeatureMap(np.zeros((2, 2, 2))).to_grid()

    def test_dims(self):
        m = FeatureMap(np.zeros((5, 3, 4)))
        assert (m.channels, m.height, m.width) == (5, 3, 4)


class TestConvParams:
    def test_even_kernel_rejected(self):
        with pytest.raises(InvalidParameterError):
            ConvParams(np.zeros((1, 1, 2, 2)), np.zeros(1))

    def test_rectangular_kernel_rejected(self):
        with pytest.raises(ShapeError):
            ConvParams(np.zeros((1, 1, 1, 3)), np.zeros(1))

    def test_bias_length_must_match(self):
        with pytest.raises(ShapeError):
            ConvParams(np.zeros((2, 1, 1, 1)), np.zeros(3))

    def test_dilation_must_be_positive_int(self):
        kernel = np.zeros((1, 3, 3))
        for bad in (0, -1, 1.5, True):
            with pytest.raises(InvalidParameterError):
                ConvParams(kernel, np.zeros(1), dilation=bad, depthwise=True)

    def test_channel_properties(self):
        p = ConvParams(np.zeros((4, 7, 3, 3)), np.zeros(4))
        assert (p.in_channels, p.out_channels, p.kernel_size) == (7, 4, 3)
        d = ConvParams.depthwise_stack(np.zeros((5, 3, 3)))
        assert (d.in_channels, d.out_channels) == (5, 5)


class TestActivations:
    def test_selu_fixed_points(self):
        assert selu(np.array(0.0)) == 0.0
        assert selu(np.array(1.0)) == pytest.approx(SELU_SCALE)
        assert selu(np.array(-1.0)) == pytest.approx(SELU_SCALE * SELU_ALPHA * np.expm1(-1.0))

    def test_selu_saturates_without_overflow(self):
        with np.errstate(over="raise"):
            low = selu(np.array([-1e6, -50.0]))
        assert low[0] == pytest.approx(-SELU_SCALE * SELU_ALPHA)

    def test_selu_positive_branch_is_linear(self):
        x = np.linspace(0.1, 9.0, 40)
        assert np.allclose(selu(x), SELU_SCALE * x)

    def test_sigmoid_matches_direct_formula_in_safe_range(self):
        x = np.linspace(-30, 30, 101)
        assert np.allclose(sigmoid_values(x), 1.0 / (1.0 + np.exp(-x)), atol=1e-15)

    def test_sigmoid_is_stable_at_extremes(self):
        with np.errstate(over="raise"):
            v = sigmoid_values(np.array([-1000.0, 1000.0]))
        assert v[0] == 0.0 and v[1] == 1.0

    def test_sigmoid_symmetry(self):
        x = np.linspace(-20, 20, 41)
        assert np.allclose(sigmoid_values(-x), 1.0 - sigmoid_values(x), atol=1e-15)

    def test_sigmoid_map_preserves_type(self):
        g = sigmoid_map(Grid2D(np.zeros((2, 2))))
        assert isinstance(g, Grid2D) and np.all(g.data == 0.5)
        m = sigmoid_map(FeatureMap(np.zeros((1, 2, 2))))
        assert isinstance(m, FeatureMap)
        with pytest.raises(InvalidParameterError):
            sigmoid_map(np.zeros((2, 2)))

    def test_softmax_uniform_row(self):
        out = softmax_rows(np.zeros((1, 3)))
        assert np.allclose(out, 1.0 / 3.0)

    def test_softmax_large_values_no_overflow(self):
        with np.errstate(over="raise"):
            out = softmax_rows(np.array([[1000.0, 1000.0, 0.0]]))
        assert out[0, 0] == pytest.approx(0.5)
        assert out[0, 1] == pytest.approx(0.5)
        assert out[0, 2] < 1e-300

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m = rng.normal(size=(6, 9)) * rng.choice([1.0, 50.0])
            s = softmax_rows(m).sum(axis=1)
            assert np.allclose(s, 1.0, atol=1e-12)

    def test_softmax_shift_invariance(self):
        rng = np.random.default_rng(8)
        m = rng.normal(size=(4, 5))
        shifted = m + rng.normal(size=(4, 1))
        assert np.allclose(softmax_rows(m), softmax_rows(shifted), atol=1e-12)

    def test_softmax_rejects_nonfinite(self):
        with pytest.raises(InvalidInputError):
            softmax_rows(np.array([[np.inf, 0.0]]))


class TestBoxMean:
    def test_center_impulse(self):
        g = np.zeros((3, 3))
        g[1, 1] = 1.0
        out = box_mean(Grid2D(g), 3).data
        assert out[1, 1] == pytest.approx(1.0 / 9.0)
        for corner in ((0, 0), (0, 2), (2, 0), (2, 2)):
            assert out[corner] == pytest.approx(1.0 / 4.0)

    def test_matches_naive_rescan(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            h, w = rng.integers(1, 20, size=2)
            k = int(rng.choice([1, 3, 5, 9, 15, 31]))
            vals = rng.normal(size=(h, w))
            got = box_mean(Grid2D(vals), k).data
            want = naive_box_mean(vals, k)
            assert np.allclose(got, want, atol=1e-10)

    def test_constant_is_preserved_exactly(self):
        for c in (0.0, 1.0, -3.75, 1e6):
            g = Grid2D(np.full((16, 13), c))
            assert np.array_equal(box_mean(g, 15).data, g.data)

    def test_k1_is_identity(self):
        rng = np.random.default_rng(12)
        g = Grid2D(rng.normal(size=(7, 7)))
        assert np.array_equal(box_mean(g, 1).data, g.data)

    def test_output_stays_in_input_range(self):
        rng = np.random.default_rng(13)
        g = Grid2D(rng.normal(size=(40, 40)) * 100)
        out = box_mean(g, 31).data
        assert out.min() >= g.data.min() and out.max() <= g.data.max()

    def test_window_larger_than_grid(self):
        vals = np.arange(12.0).reshape(3, 4)
        out = box_mean(Grid2D(vals), 31).data
        assert np.allclose(out, vals.mean())

    def test_rejects_bad_window(self):
        g = Grid2D(np.zeros((3, 3)))
        for bad in (0, -3, 2, 4, 1.0, True):
            with pytest.raises(InvalidParameterError):
                box_mean(g, bad)


class TestConv1x1:
    def test_hand_mixing_example(self):
        x = FeatureMap(np.array([1.0, 2.0]).reshape(2, 1, 1))
        p = ConvParams.pointwise(np.array([[1.0, 1.0], [0.0, 1.0]]))
        out = conv1x1(x, p).data[:, 0, 0]
        assert np.array_equal(out, [3.0, 2.0])

    def test_identity_passthrough(self):
        rng = np.random.default_rng(21)
        x = FeatureMap(rng.normal(size=(4, 5, 6)))
        out = conv1x1(x, ConvParams.identity(4))
        assert np.array_equal(out.data, x.data)

    def test_zero_weights_emit_bias(self):
        x = FeatureMap(np.ones((2, 3, 3)))
        p = ConvParams.pointwise(np.zeros((3, 2)), bias=[1.0, -2.0, 0.5])
        out = conv1x1(x, p).data
        assert np.allclose(out, np.array([1.0, -2.0, 0.5])[:, None, None])

    def test_matches_per_pixel_matmul(self):
        rng = np.random.default_rng(22)
        x = rng.normal(size=(3, 4, 5))
        w = rng.normal(size=(6, 3))
        b = rng.normal(size=6)
        out = conv1x1(FeatureMap(x), ConvParams.pointwise(w, bias=b)).data
        want = np.empty((6, 4, 5))
        for i in range(4):
            for j in range(5):
                want[:, i, j] = w @ x[:, i, j] + b
        assert np.allclose(out, want, atol=1e-12)

    def test_activation_flag_applies_selu(self):
        x = FeatureMap(np.full((1, 2, 2), -2.0))
        p = ConvParams.identity(1, activation=True)
        assert np.allclose(conv1x1(x, p).data, selu(np.full((1, 2, 2), -2.0)))

    def test_rejects_wrong_params(self):
        x = FeatureMap(np.zeros((2, 3, 3)))
        with pytest.raises(InvalidParameterError):
            conv1x1(x, ConvParams(np.zeros((2, 2, 3, 3)), np.zeros(2)))
        with pytest.raises(InvalidParameterError):
            conv1x1(x, ConvParams.depthwise_stack(np.zeros((2, 1, 1))))
        with pytest.raises(ShapeError):
            conv1x1(x, ConvParams.identity(5))


def naive_depthwise(x, kernels, bias, dilation):
    c, h, w = x.shape
    k = kernels.shape[-1]
    out = np.zeros_like(x)
    for ch in range(c):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for a in range(k):
                    for b in range(k):
                        ii = i + (a - k // 2) * dilation
                        jj = j + (b - k // 2) * dilation
                        if 0 <= ii < h and 0 <= jj < w:
                            acc += kernels[ch, a, b] * x[ch, ii, jj]
                out[ch, i, j] = acc + bias[ch]
    return out


class TestDepthwiseConv:
    def test_delta_kernel_is_identity(self):
        rng = np.random.default_rng(31)
        x = FeatureMap(rng.normal(size=(3, 6, 6)))
        out = depthwise_conv(x, ConvParams.depthwise_delta(3))
        assert np.array_equal(out.data, x.data)

    def test_impulse_with_ones_kernel(self):
        x = np.zeros((1, 3, 3))
        x[0, 1, 1] = 1.0
        p = ConvParams.depthwise_stack(np.ones((1, 3, 3)))
        out = depthwise_conv(FeatureMap(x), p).data
        assert np.array_equal(out, np.ones((1, 3, 3)))

    def test_constant_input_mean_preserving_kernel(self):
        kernel = np.full((2, 3, 3), 1.0 / 9.0)
        x = FeatureMap(np.full((2, 9, 9), 4.0))
        out = depthwise_conv(x, ConvParams.depthwise_stack(kernel)).data
        assert np.allclose(out[:, 1:-1, 1:-1], 4.0)

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(32)
        for dilation in (1, 2, 3):
            x = rng.normal(size=(2, 9, 8))
            kern = rng.normal(size=(2, 3, 3))
            bias = rng.normal(size=2)
            p = ConvParams.depthwise_stack(kern, bias=bias, dilation=dilation)
            got = depthwise_conv(FeatureMap(x), p).data
            assert np.allclose(got, naive_depthwise(x, kern, bias, dilation), atol=1e-12)

    def test_dilated_extent_must_fit(self):
        x = FeatureMap(np.zeros((1, 6, 6)))
        p = ConvParams.depthwise_delta(1, dilation=3)  # extent 7 > 6
        with pytest.raises(InvalidParameterError):
            depthwise_conv(x, p)

    def test_rejects_standard_params(self):
        x = FeatureMap(np.zeros((1, 4, 4)))
        with pytest.raises(InvalidParameterError):
            depthwise_conv(x, ConvParams.identity(1))


class TestUpsample:
    def test_factor_one_identity(self):
        rng = np.random.default_rng(41)
        x = FeatureMap(rng.normal(size=(2, 3, 3)))
        assert np.array_equal(upsample(x, 1).data, x.data)

    def test_constant_preserved(self):
        x = FeatureMap(np.full((3, 4, 5), 2.5))
        out = upsample(x, 2)
        assert out.data.shape == (3, 8, 10)
        assert np.array_equal(out.data, np.full((3, 8, 10), 2.5))

    def test_half_pixel_weights_on_2x2(self):
        x = FeatureMap(np.array([[[0.0, 1.0], [0.0, 1.0]]]))
        out = upsample(x, 2).data[0]
        want_row = np.array([0.0, 0.25, 0.75, 1.0])
        assert np.allclose(out, np.tile(want_row, (4, 1)), atol=1e-15)

    def test_four_corner_blend(self):
        x = FeatureMap(np.array([[[0.0, 1.0], [2.0, 3.0]]]))
        out = upsample(x, 2).data[0]
        want = np.array([
            [0.0, 0.25, 0.75, 1.0],
            [0.5, 0.75, 1.25, 1.5],
            [1.5, 1.75, 2.25, 2.5],
            [2.0, 2.25, 2.75, 3.0],
        ])
        assert np.allclose(out, want, atol=1e-15)

    def test_range_never_expands(self):
        rng = np.random.default_rng(42)
        x = FeatureMap(rng.normal(size=(2, 5, 7)))
        out = upsample(x, 4).data
        assert out.min() >= x.data.min() - 1e-12
        assert out.max() <= x.data.max() + 1e-12

    def test_rejects_bad_factor(self):
        x = FeatureMap(np.zeros((1, 2, 2)))
        for bad in (0, -1, 1.5, True):
            with pytest.raises(InvalidParameterError):
                upsample(x, bad)


class TestBinarize:
    def test_threshold_is_inclusive(self):
        g = Grid2D(np.array([[0.0, 0.5], [0.49999, 1.0]]))
        out = binarize(g).data
        assert np.array_equal(out, [[0.0, 1.0], [0.0, 1.0]])

    def test_custom_threshold(self):
        g = Grid2D(np.array([[0.2, 0.8]]))
        assert np.array_equal(binarize(g, 0.9).data, [[0.0, 0.0]])

    def test_rejects_out_of_range_threshold(self):
        with pytest.raises(InvalidParameterError):
            binarize(Grid2D(np.zeros((1, 1))), 1.5)

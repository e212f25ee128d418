import numpy as np
import pytest

from sodkit import (
    ConvParams,
    DdrmParams,
    FeatureMap,
    Grid2D,
    InvalidInputError,
    InvalidParameterError,
    NumericalError,
    ShapeError,
    Spectrum,
    fft2,
    highpass,
    ifft2,
    masked_edge_attention,
)

from oracles import dense_fft2_centered, dense_ifft2_centered


def identity_ddrm(channels: int, size: int = 3) -> DdrmParams:
    """Refine block that reproduces its input: dead branch, identity skip."""
    branch = (
        ConvParams.identity(channels),
        ConvParams.depthwise_delta(channels, size=size),
        ConvParams.pointwise(np.zeros((channels, channels))),
    )
    return DdrmParams(
        branches=(branch,),
        fuse=ConvParams.pointwise(np.zeros((channels, channels))),
        residual=ConvParams.identity(channels),
    )


def zero_ddrm(channels: int) -> DdrmParams:
    """Refine block whose output is identically zero."""
    branch = (
        ConvParams.identity(channels),
        ConvParams.depthwise_delta(channels),
        ConvParams.pointwise(np.zeros((channels, channels))),
    )
    return DdrmParams(
        branches=(branch,),
        fuse=ConvParams.pointwise(np.zeros((channels, channels))),
        residual=ConvParams.pointwise(np.zeros((channels, channels))),
    )


class TestTransforms:
    def test_constant_concentrates_at_centered_dc(self):
        for c in (1.0, -2.5):
            spec = fft2(Grid2D(np.full((8, 8), c))).data
            assert spec[4, 4] == pytest.approx(64 * c)
            off_dc = spec.copy()
            off_dc[4, 4] = 0.0
            assert np.max(np.abs(off_dc)) < 1e-10

    def test_matches_dense_dft(self):
        rng = np.random.default_rng(51)
        for h, w in ((8, 8), (5, 7), (16, 12), (1, 9)):
            g = rng.normal(size=(h, w))
            assert np.allclose(fft2(Grid2D(g)).data, dense_fft2_centered(g), atol=1e-9)

    def test_inverse_matches_dense_dft(self):
        rng = np.random.default_rng(52)
        g = rng.normal(size=(6, 11))
        spec = fft2(Grid2D(g))
        assert np.allclose(ifft2(spec).data, dense_ifft2_centered(spec.data).real, atol=1e-12)

    def test_round_trip_identity(self):
        rng = np.random.default_rng(53)
        for _ in range(5):
            g = rng.normal(size=tuple(rng.integers(1, 33, size=2)))
            back = ifft2(fft2(Grid2D(g))).data
            assert np.max(np.abs(back - g)) < 1e-5

    def test_parseval(self):
        rng = np.random.default_rng(54)
        g = rng.normal(size=(8, 8))
        spatial = np.sum(g * g)
        spectral = np.sum(np.abs(fft2(Grid2D(g)).data) ** 2) / g.size
        assert abs(spatial - spectral) <= 1e-5 * spatial

    def test_inverse_rejects_asymmetric_spectrum(self):
        spec = np.zeros((4, 4), dtype=complex)
        spec[0, 1] = 10.0
        with pytest.raises(NumericalError):
            ifft2(Spectrum(spec))

    def test_spectrum_rejects_nonfinite(self):
        with pytest.raises(InvalidInputError):
            Spectrum(np.full((2, 2), np.nan, dtype=complex))


class TestHighpass:
    def test_radius_zero_is_identity(self):
        rng = np.random.default_rng(61)
        spec = fft2(Grid2D(rng.normal(size=(8, 8))))
        assert np.array_equal(highpass(spec, 0.0).data, spec.data)

    def test_constant_with_radius_one_vanishes(self):
        spec = highpass(fft2(Grid2D(np.full((8, 8), 3.0))), 1.0)
        assert np.max(np.abs(spec.data)) < 1e-10
        assert np.max(np.abs(ifft2(spec).data)) < 1e-10

    def test_stop_band_membership(self):
        rng = np.random.default_rng(62)
        h, w = 9, 12
        spec = fft2(Grid2D(rng.normal(size=(h, w))))
        r = 3.0
        out = highpass(spec, r).data
        rows = np.arange(h)[:, None] - h // 2
        cols = np.arange(w)[None, :] - w // 2
        inside = rows ** 2 + cols ** 2 < r * r
        assert np.all(out[inside] == 0.0)
        assert np.array_equal(out[~inside], spec.data[~inside])

    def test_idempotent(self):
        rng = np.random.default_rng(63)
        spec = fft2(Grid2D(rng.normal(size=(10, 10))))
        once = highpass(spec, 2.5)
        twice = highpass(once, 2.5)
        assert np.array_equal(once.data, twice.data)

    def test_linear_in_the_spectrum(self):
        rng = np.random.default_rng(64)
        spec = fft2(Grid2D(rng.normal(size=(8, 8))))
        scaled = Spectrum(3.0 * spec.data)
        assert np.allclose(highpass(scaled, 2.0).data, 3.0 * highpass(spec, 2.0).data)

    def test_impulse_complement(self):
        # The filtered image is the impulse minus the inverse transform of
        # exactly the zeroed low-frequency bins.
        g = np.zeros((8, 8))
        g[0, 0] = 1.0
        spec = dense_fft2_centered(g)
        r = 2.0
        rows = np.arange(8)[:, None] - 4
        cols = np.arange(8)[None, :] - 4
        inside = rows ** 2 + cols ** 2 < r * r
        low_only = np.where(inside, spec, 0.0)
        want = g - dense_ifft2_centered(low_only).real
        got = ifft2(highpass(fft2(Grid2D(g)), r)).data
        assert np.allclose(got, want, atol=1e-10)

    def test_rejects_negative_radius(self):
        spec = fft2(Grid2D(np.zeros((4, 4))))
        with pytest.raises(InvalidParameterError):
            highpass(spec, -1.0)
        with pytest.raises(InvalidParameterError):
            highpass(spec, np.nan)


class TestMaskedEdgeAttention:
    def test_zero_input_zero_everything(self):
        x = FeatureMap(np.full((2, 8, 8), 0.0))
        out = masked_edge_attention(x, 2.0, zero_ddrm(2))
        assert np.all(out.edge.data == 0.0)
        assert np.all(out.refined.data == 0.0)

    def test_constant_input_survives_untouched(self):
        x = FeatureMap(np.stack([np.full((8, 8), 1.5), np.full((8, 8), -0.5)]))
        out = masked_edge_attention(x, 1.0, zero_ddrm(2))
        assert np.max(np.abs(out.edge.data)) < 1e-9
        assert np.allclose(out.refined.data, x.data, atol=1e-9)

    def test_refined_is_exactly_input_plus_edge(self):
        rng = np.random.default_rng(71)
        x = FeatureMap(rng.normal(size=(3, 8, 8)))
        out = masked_edge_attention(x, 2.0, identity_ddrm(3))
        assert np.array_equal(out.refined.data, x.data + out.edge.data)

    def test_identity_refine_reproduces_per_channel_band(self):
        rng = np.random.default_rng(72)
        x = FeatureMap(rng.normal(size=(2, 8, 8)))
        out = masked_edge_attention(x, 3.0, identity_ddrm(2))
        for ch in range(2):
            band = ifft2(highpass(fft2(Grid2D(x.data[ch])), 3.0)).data
            assert np.allclose(out.edge.data[ch], band, atol=1e-12)

    def test_radius_zero_identity_refine_doubles_input(self):
        rng = np.random.default_rng(73)
        x = FeatureMap(rng.normal(size=(1, 6, 6)))
        out = masked_edge_attention(x, 0.0, identity_ddrm(1))
        assert np.allclose(out.refined.data, 2.0 * x.data, atol=1e-10)

    def test_step_edge_energy_concentrates_on_step(self):
        # The transform is periodic, so the step at columns 7/8 has a twin at
        # the wrap-around seam (columns 15/0) with the same energy; the
        # concentration claim is about the remaining interior columns.
        step = np.zeros((16, 16))
        step[:, 8:] = 1.0
        x = FeatureMap(step[None])
        out = masked_edge_attention(x, 4.0, identity_ddrm(1))
        energy = (out.edge.data[0] ** 2).sum(axis=0)
        peak = max(energy[7], energy[8])
        others = np.delete(energy, [0, 7, 8, 15])
        assert peak >= 5.0 * others.mean()

    def test_channel_mismatch_raises(self):
        x = FeatureMap(np.zeros((3, 8, 8)))
        with pytest.raises(ShapeError):
            masked_edge_attention(x, 2.0, identity_ddrm(2))

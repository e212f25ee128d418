"""Immutable 2-D grid containers and the small dense kernels built on them.

The containers wrap float64 numpy arrays and freeze them on construction, so
every operation in this package is a pure function from values to values and
results can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, ShapeError

_SELU_SCALE = 1.0507009873554805
_SELU_ALPHA = 1.6732632423543772


def _frozen_f64(values, ndim: int, what: str) -> np.ndarray:
    out = np.asarray(values, dtype=np.float64).copy()
    if out.ndim != ndim:
        raise ShapeError(f"{what} must be {ndim}-dimensional, got shape {out.shape}")
    if out.size == 0:
        raise ShapeError(f"{what} must be non-empty along every axis, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise InvalidInputError(f"{what} must contain only finite values")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Grid2D:
    """A single-channel height x width grid of finite float64 values."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_f64(self.data, 2, "Grid2D data"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def to_feature_map(self) -> "FeatureMap":
        return FeatureMap(self.data[np.newaxis])


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A channels x height x width stack of finite float64 values."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_f64(self.data, 3, "FeatureMap data"))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def to_grid(self) -> Grid2D:
        if self.channels != 1:
            raise ShapeError(f"only a 1-channel map converts to a grid, got {self.channels} channels")
        return Grid2D(self.data[0])


@dataclass(frozen=True, eq=False)
class ConvParams:
    """Weights for one convolution.

    Standard layout is (out_channels, in_channels, k, k); depthwise layout is
    (channels, k, k) with one kernel per channel. The kernel side k must be
    odd so that zero padding can preserve spatial dims at any dilation. When
    ``activation`` is set the output passes through SELU (post-activation).
    """

    weight: np.ndarray
    bias: np.ndarray
    dilation: int = 1
    depthwise: bool = False
    activation: bool = False

    def __post_init__(self):
        want = 3 if self.depthwise else 4
        w = _frozen_f64(self.weight, want, "ConvParams weight")
        if w.shape[-1] != w.shape[-2]:
            raise ShapeError(f"kernel must be square, got {w.shape[-2]} x {w.shape[-1]}")
        k = w.shape[-1]
        if k % 2 == 0:
            raise InvalidParameterError(f"kernel side must be odd, got {k}")
        if not isinstance(self.dilation, int) or isinstance(self.dilation, bool) or self.dilation < 1:
            raise InvalidParameterError(f"dilation must be a positive integer, got {self.dilation!r}")
        b = _frozen_f64(self.bias, 1, "ConvParams bias")
        if b.shape[0] != w.shape[0]:
            raise ShapeError(f"bias length {b.shape[0]} does not match {w.shape[0]} output channels")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[-1]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[0] if self.depthwise else self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def pointwise(cls, matrix, bias=None, activation: bool = False) -> "ConvParams":
        """1 x 1 conv from an (out_channels, in_channels) mixing matrix."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ShapeError(f"mixing matrix must be 2-dimensional, got shape {m.shape}")
        b = np.zeros(m.shape[0]) if bias is None else bias
        return cls(m[:, :, np.newaxis, np.newaxis], b, activation=activation)

    @classmethod
    def identity(cls, channels: int, activation: bool = False) -> "ConvParams":
        return cls.pointwise(np.eye(channels), activation=activation)

    @classmethod
    def depthwise_stack(cls, kernels, bias=None, dilation: int = 1,
                        activation: bool = False) -> "ConvParams":
        """Depthwise conv from a (channels, k, k) kernel stack."""
        k = np.asarray(kernels, dtype=np.float64)
        b = np.zeros(k.shape[0]) if bias is None else bias
        return cls(k, b, dilation=dilation, depthwise=True, activation=activation)

    @classmethod
    def depthwise_delta(cls, channels: int, size: int = 3, dilation: int = 1,
                        activation: bool = False) -> "ConvParams":
        """Depthwise kernels that pass the input through unchanged."""
        w = np.zeros((channels, size, size))
        w[:, size // 2, size // 2] = 1.0
        return cls.depthwise_stack(w, dilation=dilation, activation=activation)


def selu(values: np.ndarray) -> np.ndarray:
    """SELU with the standard fixed constants; selu(0) == 0."""
    x = np.asarray(values, dtype=np.float64)
    neg = _SELU_ALPHA * np.expm1(np.minimum(x, 0.0))
    return _SELU_SCALE * np.where(x > 0.0, x, neg)


def sigmoid_values(values: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function on a raw array."""
    x = np.asarray(values, dtype=np.float64)
    flat = x.reshape(-1)
    out = np.empty_like(flat)
    pos = flat >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-flat[pos]))
    ex = np.exp(flat[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out.reshape(x.shape)


def sigmoid_map(x):
    """Elementwise sigmoid of a Grid2D or FeatureMap, returning the same type."""
    if isinstance(x, Grid2D):
        return Grid2D(sigmoid_values(x.data))
    if isinstance(x, FeatureMap):
        return FeatureMap(sigmoid_values(x.data))
    raise InvalidParameterError(f"expected Grid2D or FeatureMap, got {type(x).__name__}")


def softmax_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 2-D matrix, stabilized by row-max subtraction."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"softmax_rows expects a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("softmax_rows input must be finite")
    z = np.exp(m - m.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def box_mean(grid: Grid2D, k: int) -> Grid2D:
    """Mean over a k x k window centered on each pixel, clipped at borders.

    The divisor is the number of in-bounds pixels, so border means are not
    biased toward zero. Built on a summed-area table: cost is O(H * W)
    regardless of k. Deviations are accumulated relative to the corner value
    so constant grids are preserved bit-exactly, and the result is clipped to
    the input's [min, max].
    """
    if not isinstance(k, int) or isinstance(k, bool) or k < 1 or k % 2 == 0:
        raise InvalidParameterError(f"window side must be a positive odd integer, got {k!r}")
    if k == 1:
        return Grid2D(grid.data)
    a = grid.data
    h, w = a.shape
    r = k // 2
    ref = a[0, 0]
    dev = a - ref
    sat = np.zeros((h + 1, w + 1))
    sat[1:, 1:] = dev.cumsum(axis=0).cumsum(axis=1)
    rows = np.arange(h)
    cols = np.arange(w)
    lo_i = np.maximum(rows - r, 0)
    hi_i = np.minimum(rows + r, h - 1) + 1
    lo_j = np.maximum(cols - r, 0)
    hi_j = np.minimum(cols + r, w - 1) + 1
    sums = (sat[np.ix_(hi_i, hi_j)] - sat[np.ix_(lo_i, hi_j)]
            - sat[np.ix_(hi_i, lo_j)] + sat[np.ix_(lo_i, lo_j)])
    counts = (hi_i - lo_i)[:, np.newaxis] * (hi_j - lo_j)[np.newaxis, :]
    out = ref + sums / counts
    np.clip(out, a.min(), a.max(), out=out)
    return Grid2D(out)


def conv1x1(x: FeatureMap, params: ConvParams) -> FeatureMap:
    """Channel-mixing 1 x 1 convolution over a feature map."""
    if params.depthwise:
        raise InvalidParameterError("conv1x1 requires standard (non-depthwise) weights")
    if params.kernel_size != 1:
        raise InvalidParameterError(f"conv1x1 requires a 1 x 1 kernel, got {params.kernel_size}")
    if params.in_channels != x.channels:
        raise ShapeError(f"weights expect {params.in_channels} input channels, map has {x.channels}")
    out = np.einsum("oi,ihw->ohw", params.weight[:, :, 0, 0], x.data, optimize=True)
    out += params.bias[:, np.newaxis, np.newaxis]
    if params.activation:
        out = selu(out)
    return FeatureMap(out)


def depthwise_conv(x: FeatureMap, params: ConvParams) -> FeatureMap:
    """Per-channel k x k convolution with dilation; zero padding keeps H and W.

    Kernels are applied unflipped (correlation orientation, the usual
    convention for learned filters). The dilated kernel extent must fit
    inside the input.
    """
    if not params.depthwise:
        raise InvalidParameterError("depthwise_conv requires depthwise weights")
    if params.in_channels != x.channels:
        raise ShapeError(f"weights expect {params.in_channels} channels, map has {x.channels}")
    k = params.kernel_size
    d = params.dilation
    extent = d * (k - 1) + 1
    if extent > x.height or extent > x.width:
        raise InvalidParameterError(
            f"dilated kernel extent {extent} exceeds input {x.height} x {x.width}")
    pad = d * (k - 1) // 2
    padded = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    h, w = x.height, x.width
    out = np.zeros((x.channels, h, w))
    for a in range(k):
        for b in range(k):
            out += params.weight[:, a, b][:, np.newaxis, np.newaxis] \
                * padded[:, a * d:a * d + h, b * d:b * d + w]
    out += params.bias[:, np.newaxis, np.newaxis]
    if params.activation:
        out = selu(out)
    return FeatureMap(out)


def upsample(x: FeatureMap, factor: int) -> FeatureMap:
    """Bilinear upsample by an integer factor with half-pixel sample centers.

    Output pixel (i, j) samples the input at ((i + 0.5) / factor - 0.5,
    (j + 0.5) / factor - 0.5), clamped to the valid coordinate range, so
    constants are preserved and outputs stay within the input's [min, max].
    """
    if not isinstance(factor, int) or isinstance(factor, bool) or factor < 1:
        raise InvalidParameterError(f"factor must be a positive integer, got {factor!r}")
    if factor == 1:
        return FeatureMap(x.data)
    h, w = x.height, x.width
    ys = np.clip((np.arange(h * factor) + 0.5) / factor - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(w * factor) + 0.5) / factor - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[np.newaxis, :, np.newaxis]
    wx = (xs - x0)[np.newaxis, np.newaxis, :]
    bands = x.data[:, y0, :] * (1.0 - wy) + x.data[:, y1, :] * wy
    out = bands[:, :, x0] * (1.0 - wx) + bands[:, :, x1] * wx
    return FeatureMap(out)


def binarize(grid: Grid2D, threshold: float = 0.5) -> Grid2D:
    """Map values >= threshold to 1.0 and everything else to 0.0."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameterError(f"threshold must lie in [0, 1], got {threshold}")
    return Grid2D((grid.data >= threshold).astype(np.float64))

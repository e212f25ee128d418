"""A small deterministic network that exercises every kernel end to end.

The network is not meant to be trained. Its weights come from a documented
portable PRNG, so two builds from the same config are bit-identical on any
platform, and the forward pass doubles as an integration check for the
spectral, attention and loss kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .attention import (
    DEFAULT_POSITION_BUDGET,
    AggregationParams,
    AttentionParams,
    DdrmParams,
    object_attention,
    union_attention,
)
from .errors import ConfigError, InvalidParameterError, NumericalError, ShapeError
from .grid import ConvParams, FeatureMap, Grid2D, conv1x1, depthwise_conv, sigmoid_values, upsample
from .spectral import masked_edge_attention

# Worst tolerated attention row-sum drift when forward() runs in strict mode.
SOFTMAX_RESIDUE_LIMIT = 1e-5

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Portable splitmix64 generator used for reproducible weight draws.

    The update adds the golden-ratio increment 0x9E3779B97F4A7C15 and mixes
    with the standard 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB multipliers.
    ``uniform`` keeps the top 53 bits, so draws are exact binary64 values and
    identical everywhere.
    """

    def __init__(self, seed: int):
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise InvalidParameterError(f"seed must be a non-negative integer, got {seed!r}")
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """One draw in [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * 2.0 ** -53

    def array(self, shape, scale: float) -> np.ndarray:
        """Row-major array of draws in [-scale, scale)."""
        if not np.isfinite(scale) or scale <= 0.0:
            raise InvalidParameterError(f"scale must be positive, got {scale!r}")
        n = 1
        for side in shape:
            n *= int(side)
        flat = np.fromiter((self.uniform() for _ in range(n)), dtype=np.float64, count=n)
        return (scale * (2.0 * flat - 1.0)).reshape(shape)


def _positive_int(value, name: str) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class ToyConfig:
    """Sizes and constants for the demo network.

    Heights and widths must be multiples of 8 so the three pooling steps
    stay exact, and large enough that every dilated kernel fits its map.
    """

    in_channels: int = 3
    height: int = 64
    width: int = 64
    encoder_channels: tuple = (8, 16, 24, 32)
    aggregation_channels: tuple = (32, 64, 128)
    radius: float = 16.0
    denoise: float = 0.93
    confidence: float = 0.1
    penalty: float = 0.5
    kernels: tuple = (3, 15, 31)
    dilations: tuple = (1, 3, 5, 7)
    seed: int = 42

    def __post_init__(self):
        _positive_int(self.in_channels, "in_channels")
        _positive_int(self.height, "height")
        _positive_int(self.width, "width")
        if self.height % 8 or self.width % 8:
            raise ConfigError(
                f"height and width must be multiples of 8, got {self.height} x {self.width}")
        enc = tuple(self.encoder_channels)
        if len(enc) != 4:
            raise ConfigError(f"encoder_channels needs one width per stage (4), got {enc!r}")
        for c in enc:
            _positive_int(c, "encoder channel width")
        agg = tuple(self.aggregation_channels)
        if len(agg) != 3:
            raise ConfigError(f"aggregation_channels needs three widths, got {agg!r}")
        for c in agg:
            _positive_int(c, "aggregation channel width")
        dils = tuple(self.dilations)
        if not dils:
            raise ConfigError("dilations must not be empty")
        for d in dils:
            _positive_int(d, "dilation")
        smallest = min(self.height, self.width)
        if smallest // 8 < 3:
            raise ConfigError(f"stage-4 maps would be {smallest // 8} px wide; need at least 3")
        extent = 2 * max(dils) + 1
        if smallest // 2 < extent:
            raise ConfigError(
                f"dilated kernel extent {extent} does not fit the half-scale maps "
                f"({smallest // 2} px)")
        if not np.isfinite(self.radius) or not 0.0 < self.radius <= smallest / 2:
            raise ConfigError(
                f"radius must lie in (0, {smallest / 2}], got {self.radius!r}")
        if not 0.0 < self.denoise < 1.0:
            raise ConfigError(f"denoise must lie in (0, 1), got {self.denoise!r}")
        if not 0.0 <= self.confidence < 1.0:
            raise ConfigError(f"confidence must lie in [0, 1), got {self.confidence!r}")
        if not 0.0 <= self.penalty <= 1.0:
            raise ConfigError(f"penalty must lie in [0, 1], got {self.penalty!r}")
        kers = tuple(self.kernels)
        if not kers:
            raise ConfigError("kernels must not be empty")
        for k in kers:
            _positive_int(k, "intensity kernel")
            if k % 2 == 0:
                raise ConfigError(f"intensity kernels must be odd, got {k}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        object.__setattr__(self, "encoder_channels", enc)
        object.__setattr__(self, "aggregation_channels", agg)
        object.__setattr__(self, "kernels", kers)
        object.__setattr__(self, "dilations", dils)


@dataclass(frozen=True, eq=False)
class SeparableBlock:
    """Depthwise 3 x 3 followed by a pointwise mix with SELU on the way out."""

    spatial: ConvParams
    mix: ConvParams

    def __post_init__(self):
        if not self.spatial.depthwise:
            raise InvalidParameterError("the spatial conv must be depthwise")
        if self.mix.depthwise or self.mix.kernel_size != 1:
            raise InvalidParameterError("the mix conv must be a standard 1 x 1 convolution")
        if self.mix.in_channels != self.spatial.out_channels:
            raise ShapeError("mix input width must match the spatial conv output")

    def apply(self, x: FeatureMap) -> FeatureMap:
        return conv1x1(depthwise_conv(x, self.spatial), self.mix)


@dataclass(frozen=True, eq=False)
class ToyNet:
    """All parameters of the demo network, grouped by module."""

    config: ToyConfig
    stage1: tuple
    stage2: tuple
    stage3: tuple
    stage4: tuple
    edge_refine: DdrmParams
    aggregation: AggregationParams
    attention: AttentionParams
    object1: DdrmParams
    object2: DdrmParams

    def parameter_count(self) -> int:
        """Total scalar parameters (weights plus biases) in the network."""
        return sum(p.weight.size + p.bias.size for p in _all_convs(self))


@dataclass(frozen=True, eq=False)
class ForwardOutput:
    """Saliency and edge probability maps from one forward pass.

    ``ds`` holds the three decoder read-outs plus their mean, all at the
    input resolution; ``edge`` is the edge probability map. The worst
    attention row-sum drift seen during the pass is kept for diagnostics.
    """

    ds: tuple
    edge: Grid2D
    softmax_residual: float

    def __post_init__(self):
        maps = tuple(self.ds)
        if len(maps) != 4 or not all(isinstance(m, Grid2D) for m in maps):
            raise ShapeError("ds must hold exactly four Grid2D maps")
        object.__setattr__(self, "ds", maps)


def _all_convs(net: ToyNet):
    for stage in (net.stage1, net.stage2, net.stage3, net.stage4):
        for block in stage:
            yield block.spatial
            yield block.mix
    for ddrm in (net.edge_refine, net.object1, net.object2):
        for reduce_, middle, point in ddrm.branches:
            yield reduce_
            yield middle
            yield point
        yield ddrm.fuse
        yield ddrm.residual
    a = net.aggregation
    yield from (a.level2, a.level3, a.level4, a.mix3_to2, a.mix4_to2,
                a.mix4_to3, a.cat3_fuse, a.up3_fuse, a.out_fuse)
    t = net.attention
    yield from (t.channel_query, t.channel_key, t.channel_value,
                t.spatial_query, t.spatial_key, t.spatial_value)


def _pointwise(rng: SplitMix64, in_ch: int, out_ch: int, activation: bool = False) -> ConvParams:
    scale = 1.0 / sqrt(in_ch)
    w = rng.array((out_ch, in_ch, 1, 1), scale)
    b = rng.array((out_ch,), scale)
    return ConvParams(w, b, activation=activation)


def _depthwise(rng: SplitMix64, channels: int, size: int = 3, dilation: int = 1,
               activation: bool = False) -> ConvParams:
    scale = 1.0 / sqrt(size * size)
    w = rng.array((channels, size, size), scale)
    b = rng.array((channels,), scale)
    return ConvParams(w, b, dilation=dilation, depthwise=True, activation=activation)


def _separable(rng: SplitMix64, in_ch: int, out_ch: int) -> SeparableBlock:
    return SeparableBlock(_depthwise(rng, in_ch), _pointwise(rng, in_ch, out_ch, activation=True))


def _ddrm(rng: SplitMix64, in_ch: int, out_ch: int, dilations) -> DdrmParams:
    mid = max(in_ch // 2, 1)
    branches = []
    for d in dilations:
        reduce_ = _pointwise(rng, in_ch, mid, activation=True)
        middle = _depthwise(rng, mid, dilation=d, activation=True)
        point = _pointwise(rng, mid, mid, activation=True)
        branches.append((reduce_, middle, point))
    fuse = _pointwise(rng, mid * len(branches), out_ch)
    residual = _pointwise(rng, in_ch, out_ch)
    return DdrmParams(tuple(branches), fuse, residual)


def build_toy(config: ToyConfig) -> ToyNet:
    """Draw every parameter of the demo network from one splitmix64 stream.

    Draw order is fixed and part of the contract: encoder stages 1-4 (two
    separable blocks each, spatial weights before mix weights, weights before
    biases), then the edge refine block, the aggregation convolutions in
    field order, the six attention projections (channel q/k/v then spatial
    q/k/v), and the two object gate refine blocks. Changing the order would
    silently change every map the network emits.
    """
    rng = SplitMix64(config.seed)
    c_in = config.in_channels
    c1, c2, c3, c4 = config.encoder_channels
    a2, a3, a4 = config.aggregation_channels
    stages = []
    prev = c_in
    for width in (c1, c2, c3, c4):
        stages.append((_separable(rng, prev, width), _separable(rng, width, width)))
        prev = width
    edge_refine = _ddrm(rng, c1, c1, config.dilations)
    fused_width = a2 + a3 + a4
    aggregation = AggregationParams(
        level2=_pointwise(rng, c2, a2, activation=True),
        level3=_pointwise(rng, c3, a3, activation=True),
        level4=_pointwise(rng, c4, a4, activation=True),
        mix3_to2=_pointwise(rng, a3, a2, activation=True),
        mix4_to2=_pointwise(rng, a4, a2, activation=True),
        mix4_to3=_pointwise(rng, a4, a3, activation=True),
        cat3_fuse=_pointwise(rng, 2 * a3, a3, activation=True),
        up3_fuse=_pointwise(rng, a3, a2, activation=True),
        out_fuse=_pointwise(rng, 2 * a2, fused_width, activation=True),
    )
    attention = AttentionParams(
        channel_query=_pointwise(rng, fused_width, fused_width),
        channel_key=_pointwise(rng, fused_width, fused_width),
        channel_value=_pointwise(rng, fused_width, fused_width),
        spatial_query=_pointwise(rng, fused_width, 1),
        spatial_key=_pointwise(rng, fused_width, 1),
        spatial_value=_pointwise(rng, fused_width, 1),
        confidence=config.confidence,
        denoise=config.denoise,
    )
    object1 = _ddrm(rng, c2, 1, config.dilations)
    object2 = _ddrm(rng, c1, 1, config.dilations)
    return ToyNet(config, *stages, edge_refine, aggregation, attention, object1, object2)


def _run_stage(x: FeatureMap, stage) -> FeatureMap:
    for block in stage:
        x = block.apply(x)
    return x


def _halve(x: FeatureMap) -> FeatureMap:
    c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ShapeError(f"cannot halve odd spatial dims {h} x {w}")
    pooled = x.data.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))
    return FeatureMap(pooled)


def _upsample_grid(g: Grid2D, factor: int) -> Grid2D:
    return upsample(g.to_feature_map(), factor).to_grid()


def demo_image(channels: int = 3, height: int = 64, width: int = 64) -> FeatureMap:
    """Smooth diagonal ramp in [0, 1], scaled per channel; handy for demos."""
    _positive_int(channels, "channels")
    _positive_int(height, "height")
    _positive_int(width, "width")
    i = np.arange(height)[:, np.newaxis]
    j = np.arange(width)[np.newaxis, :]
    ramp = (i + j) / max(height + width - 2, 1)
    gains = (np.arange(channels) + 1.0) / channels
    return FeatureMap(gains[:, np.newaxis, np.newaxis] * ramp[np.newaxis])


def forward(net: ToyNet, image: FeatureMap, strict: bool = False,
            position_budget: int = DEFAULT_POSITION_BUDGET) -> ForwardOutput:
    """Run the demo network on one image.

    The encoder computes four feature levels (full, 1/2, 1/4 and 1/8 scale).
    The full-scale level passes through the spectral edge module; the three
    coarser levels fuse through the union attention into the first decoder
    logits, which the two object gates walk back up to full scale. In strict
    mode the pass fails if any attention row sum drifts beyond
    ``SOFTMAX_RESIDUE_LIMIT``.
    """
    cfg = net.config
    if (image.channels, image.height, image.width) != (cfg.in_channels, cfg.height, cfg.width):
        raise ShapeError(
            f"network expects {cfg.in_channels} x {cfg.height} x {cfg.width} input, "
            f"got {image.channels} x {image.height} x {image.width}")
    e1 = _run_stage(image, net.stage1)
    e2 = _run_stage(_halve(e1), net.stage2)
    e3 = _run_stage(_halve(e2), net.stage3)
    e4 = _run_stage(_halve(e3), net.stage4)
    edge = masked_edge_attention(e1, cfg.radius, net.edge_refine)
    seed = union_attention(e2, e3, e4, net.aggregation, net.attention,
                           position_budget=position_budget)
    if strict and seed.softmax_residual > SOFTMAX_RESIDUE_LIMIT:
        raise NumericalError(
            f"attention row sums drifted by {seed.softmax_residual:.3g}, "
            f"limit {SOFTMAX_RESIDUE_LIMIT:g}")
    d0 = seed.logits
    d1 = object_attention(d0, e2, cfg.denoise, net.object1)
    d1_up = _upsample_grid(d1, 2)
    d2 = object_attention(d1_up, edge.refined, cfg.denoise, net.object2)
    ds0 = Grid2D(sigmoid_values(_upsample_grid(d0, 2).data))
    ds1 = Grid2D(sigmoid_values(d1_up.data))
    ds2 = Grid2D(sigmoid_values(d2.data))
    fused = Grid2D((ds0.data + ds1.data + ds2.data) / 3.0)
    edge_prob = Grid2D(sigmoid_values(edge.edge.data.mean(axis=0)))
    return ForwardOutput((ds0, ds1, ds2, fused), edge_prob, seed.softmax_residual)

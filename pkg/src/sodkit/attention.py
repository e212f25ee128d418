"""Attention blocks that trace object and edge structure through feature maps.

Three pieces live here: the dilated depthwise residual refine block, the
fused channel/spatial attention that seeds the decoder, and the object/edge
gate that walks the decoder back up the encoder levels. All of them are pure
functions over frozen parameter bundles.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import InvalidParameterError, ResourceError, ShapeError
from .grid import (
    ConvParams,
    FeatureMap,
    Grid2D,
    conv1x1,
    depthwise_conv,
    sigmoid_values,
    softmax_rows,
    upsample,
)

# Largest H * W the dense spatial attention will materialize (the attention
# matrix is quadratic in this count).
DEFAULT_POSITION_BUDGET = 16384


def _require_pointwise(p: ConvParams, name: str) -> None:
    if p.depthwise or p.kernel_size != 1:
        raise InvalidParameterError(f"{name} must be a standard 1 x 1 convolution")


@dataclass(frozen=True, eq=False)
class DdrmParams:
    """Parameters for the dilated depthwise residual refine block.

    Each branch is a 1x1 reduce, a dilated depthwise conv, and a 1x1
    pointwise, all at the branch's reduced width. Branch outputs are
    concatenated, fused by a 1x1 convolution, and added to a 1x1 projection
    of the block input.
    """

    branches: tuple
    fuse: ConvParams
    residual: ConvParams

    def __post_init__(self):
        branches = tuple(tuple(b) for b in self.branches)
        if len(branches) < 1:
            raise InvalidParameterError("the refine block needs at least one branch")
        first_in = branches[0][0].in_channels
        for reduce_, middle, point in branches:
            _require_pointwise(reduce_, "branch reduce")
            if not middle.depthwise:
                raise InvalidParameterError("branch middle conv must be depthwise")
            _require_pointwise(point, "branch pointwise")
            if reduce_.in_channels != first_in:
                raise ShapeError("all branches must consume the same input channels")
            if middle.in_channels != reduce_.out_channels:
                raise ShapeError("branch depthwise width does not match its reduce output")
            if point.in_channels != middle.out_channels:
                raise ShapeError("branch pointwise input does not match its depthwise width")
        _require_pointwise(self.fuse, "fuse")
        _require_pointwise(self.residual, "residual projection")
        cat = sum(point.out_channels for _, _, point in branches)
        if self.fuse.in_channels != cat:
            raise ShapeError(
                f"fuse expects {self.fuse.in_channels} channels but branches emit {cat}")
        if self.residual.in_channels != first_in:
            raise ShapeError("residual projection must consume the block input channels")
        if self.residual.out_channels != self.fuse.out_channels:
            raise ShapeError("residual projection and fuse must emit the same channels")
        object.__setattr__(self, "branches", branches)

    @property
    def in_channels(self) -> int:
        return self.branches[0][0].in_channels

    @property
    def out_channels(self) -> int:
        return self.fuse.out_channels

    @property
    def dilations(self) -> tuple:
        return tuple(middle.dilation for _, middle, _ in self.branches)


def ddrm_forward(x: FeatureMap, params: DdrmParams) -> FeatureMap:
    """Run the dilated residual refine block; spatial dims are preserved."""
    if x.channels != params.in_channels:
        raise ShapeError(f"block expects {params.in_channels} channels, map has {x.channels}")
    outs = []
    for reduce_, middle, point in params.branches:
        t = conv1x1(x, reduce_)
        t = depthwise_conv(t, middle)
        outs.append(conv1x1(t, point).data)
    fused = conv1x1(FeatureMap(np.concatenate(outs, axis=0)), params.fuse)
    skip = conv1x1(x, params.residual)
    return FeatureMap(fused.data + skip.data)


@dataclass(frozen=True, eq=False)
class AttentionParams:
    """Projections and ratios for the channel and spatial attention paths.

    The channel path acts on the pooled per-channel profile and must be
    square (C in, C out); the spatial path projects features down to one
    channel before attending over positions. ``confidence`` is the fraction
    of low-confidence channels dropped; ``denoise`` is the background
    confidence above which edge evidence is discarded as noise.
    """

    channel_query: ConvParams
    channel_key: ConvParams
    channel_value: ConvParams
    spatial_query: ConvParams
    spatial_key: ConvParams
    spatial_value: ConvParams
    confidence: float = 0.1
    denoise: float = 0.93

    def __post_init__(self):
        width = self.channel_query.in_channels
        for name in ("channel_query", "channel_key", "channel_value"):
            p = getattr(self, name)
            _require_pointwise(p, name)
            if p.in_channels != width or p.out_channels != width:
                raise ShapeError(f"{name} must map {width} channels onto themselves")
        spatial_in = self.spatial_query.in_channels
        for name in ("spatial_query", "spatial_key", "spatial_value"):
            p = getattr(self, name)
            _require_pointwise(p, name)
            if p.out_channels != 1:
                raise ShapeError(f"{name} must emit exactly one channel")
            if p.in_channels != spatial_in:
                raise ShapeError("spatial projections must agree on input channels")
        if not 0.0 <= self.confidence < 1.0:
            raise InvalidParameterError(f"confidence must lie in [0, 1), got {self.confidence}")
        if not 0.0 < self.denoise < 1.0:
            raise InvalidParameterError(f"denoise must lie in (0, 1), got {self.denoise}")


@dataclass(frozen=True, eq=False)
class AggregationParams:
    """Convolutions wiring three encoder levels into one fused map.

    ``level2/3/4`` project the raw encoder maps to their aggregation widths.
    The two paths then meet at the shallow level's resolution: an elementwise
    product of all three levels, and a concat-fuse chain through the mid
    level. ``out_fuse`` mixes both paths into the final width.
    """

    level2: ConvParams
    level3: ConvParams
    level4: ConvParams
    mix3_to2: ConvParams   # applied to the upsampled mid level
    mix4_to2: ConvParams   # applied to the twice-upsampled deep level
    mix4_to3: ConvParams   # applied to the once-upsampled deep level
    cat3_fuse: ConvParams  # fuses [mid * mixed deep, mixed deep]
    up3_fuse: ConvParams   # applied to the upsampled fused mid path
    out_fuse: ConvParams   # fuses [product path, mid path]

    def __post_init__(self):
        for name in ("level2", "level3", "level4", "mix3_to2", "mix4_to2",
                     "mix4_to3", "cat3_fuse", "up3_fuse", "out_fuse"):
            _require_pointwise(getattr(self, name), name)
        a2 = self.level2.out_channels
        a3 = self.level3.out_channels
        a4 = self.level4.out_channels
        if self.mix3_to2.in_channels != a3 or self.mix3_to2.out_channels != a2:
            raise ShapeError("mix3_to2 must map the mid width onto the shallow width")
        if self.mix4_to2.in_channels != a4 or self.mix4_to2.out_channels != a2:
            raise ShapeError("mix4_to2 must map the deep width onto the shallow width")
        if self.mix4_to3.in_channels != a4 or self.mix4_to3.out_channels != a3:
            raise ShapeError("mix4_to3 must map the deep width onto the mid width")
        if self.cat3_fuse.in_channels != 2 * a3:
            raise ShapeError("cat3_fuse must consume the concatenated mid pair")
        if self.up3_fuse.in_channels != self.cat3_fuse.out_channels:
            raise ShapeError("up3_fuse must consume cat3_fuse's output")
        if self.out_fuse.in_channels != a2 + self.up3_fuse.out_channels:
            raise ShapeError("out_fuse must consume the concatenated product and mid paths")


def aggregate_multilevel(e2: FeatureMap, e3: FeatureMap, e4: FeatureMap,
                         params: AggregationParams) -> FeatureMap:
    """Fuse three encoder levels into one map at the shallow level's scale.

    The mid and deep levels are upsampled and projected so the three levels
    combine by elementwise product along one path, while the mid level also
    carries a concat-fuse path; both paths are concatenated and mixed by the
    final fuse convolution.
    """
    if (e3.height * 2, e3.width * 2) != (e2.height, e2.width):
        raise ShapeError("mid level must sit at half the shallow level's spatial dims")
    if (e4.height * 2, e4.width * 2) != (e3.height, e3.width):
        raise ShapeError("deep level must sit at half the mid level's spatial dims")
    a2 = conv1x1(e2, params.level2)
    a3 = conv1x1(e3, params.level3)
    a4 = conv1x1(e4, params.level4)
    up3 = conv1x1(upsample(a3, 2), params.mix3_to2)
    up44 = conv1x1(upsample(upsample(a4, 2), 2), params.mix4_to2)
    product = a2.data * up3.data * up44.data
    deep_mid = conv1x1(upsample(a4, 2), params.mix4_to3)
    mid_cat = np.concatenate([a3.data * deep_mid.data, deep_mid.data], axis=0)
    mid = conv1x1(FeatureMap(mid_cat), params.cat3_fuse)
    mid_up = conv1x1(upsample(mid, 2), params.up3_fuse)
    out_cat = np.concatenate([product, mid_up.data], axis=0)
    return conv1x1(FeatureMap(out_cat), params.out_fuse)


def _channel_attention_parts(x: FeatureMap, params: AttentionParams):
    pooled = FeatureMap(x.data.mean(axis=(1, 2))[:, np.newaxis, np.newaxis])
    q = conv1x1(pooled, params.channel_query).data[:, 0, 0]
    k = conv1x1(pooled, params.channel_key).data[:, 0, 0]
    v = conv1x1(pooled, params.channel_value).data[:, 0, 0]
    attn = softmax_rows(np.outer(q, k))
    weights = sigmoid_values(attn @ v)
    scaled = FeatureMap(x.data * weights[:, np.newaxis, np.newaxis] + x.data)
    residual = float(np.abs(attn.sum(axis=1) - 1.0).max())
    return weights, scaled, residual


def channel_attention(x: FeatureMap, params: AttentionParams):
    """Confidence-weight the channels of a feature map.

    The per-channel profile is average pooled to a vector, projected to
    query/key/value, attended (row softmax of the rank-1 score matrix), and
    squashed by sigmoid. Returns ``(weights, rescaled)`` where weights lie in
    (0, 1) per channel and ``rescaled = x * weights + x``.
    """
    weights, scaled, _ = _channel_attention_parts(x, params)
    return weights, scaled


def kept_channel_mask(weights: np.ndarray, confidence: float) -> np.ndarray:
    """Boolean mask of channels whose weight exceeds the confidence quantile.

    The cut is the lower nearest-rank quantile (rank max(1, ceil(c * C))) and
    the comparison is strict, so ties at the cut are dropped. If that would
    drop every channel, all channels are kept instead.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ShapeError(f"weights must be a non-empty vector, got shape {w.shape}")
    if not 0.0 <= confidence < 1.0:
        raise InvalidParameterError(f"confidence must lie in [0, 1), got {confidence}")
    rank = max(1, ceil(confidence * w.size))
    cut = np.sort(w)[rank - 1]
    kept = w > cut
    if not kept.any():
        kept = np.ones(w.size, dtype=bool)
    return kept


def confidence_mask(x: FeatureMap, weights: np.ndarray, confidence: float) -> FeatureMap:
    """Zero the channels whose confidence weight falls at or below the cut."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (x.channels,):
        raise ShapeError(f"expected {x.channels} weights, got shape {w.shape}")
    kept = kept_channel_mask(w, confidence)
    return FeatureMap(x.data * kept[:, np.newaxis, np.newaxis])


def _spatial_attention_parts(x: FeatureMap, params: AttentionParams,
                             position_budget: int):
    n = x.height * x.width
    if n > position_budget:
        raise ResourceError(
            f"attention over {n} positions exceeds the budget of {position_budget}")
    q = conv1x1(x, params.spatial_query).data.reshape(-1)
    k = conv1x1(x, params.spatial_key).data.reshape(-1)
    v = conv1x1(x, params.spatial_value).data.reshape(-1)
    attn = softmax_rows(np.outer(q, k))
    out = attn @ v + v
    residual = float(np.abs(attn.sum(axis=1) - 1.0).max())
    return Grid2D(out.reshape(x.height, x.width)), residual


def spatial_attention(x: FeatureMap, params: AttentionParams,
                      position_budget: int = DEFAULT_POSITION_BUDGET) -> Grid2D:
    """Dense attention over every spatial position of a 1-channel projection.

    Query, key and value are 1-channel projections of the input; the output
    is softmax(q k^T) v + v reshaped back to the grid, returned as logits.
    """
    logits, _ = _spatial_attention_parts(x, params, position_budget)
    return logits


@dataclass(frozen=True, eq=False)
class UamOutput:
    """Decoder seed produced by the fused channel and spatial attention."""

    logits: Grid2D
    channel_weights: np.ndarray
    kept_channels: np.ndarray
    softmax_residual: float

    def __post_init__(self):
        w = np.asarray(self.channel_weights, dtype=np.float64).copy()
        kept = np.asarray(self.kept_channels, dtype=bool).copy()
        if w.ndim != 1 or kept.shape != w.shape:
            raise ShapeError("channel weights and kept mask must be matching vectors")
        w.setflags(write=False)
        kept.setflags(write=False)
        object.__setattr__(self, "channel_weights", w)
        object.__setattr__(self, "kept_channels", kept)


def union_attention(e2: FeatureMap, e3: FeatureMap, e4: FeatureMap,
                    aggregation: AggregationParams, attention: AttentionParams,
                    position_budget: int = DEFAULT_POSITION_BUDGET) -> UamOutput:
    """Aggregate three encoder levels and seed the decoder.

    Channels of the fused map are confidence-weighted, the low-confidence
    tail is dropped, and dense spatial attention produces the first decoder
    logits. ``softmax_residual`` reports the worst attention row-sum drift
    for instrumented runs.
    """
    fused = aggregate_multilevel(e2, e3, e4, aggregation)
    weights, scaled, res_channel = _channel_attention_parts(fused, attention)
    kept = kept_channel_mask(weights, attention.confidence)
    masked = FeatureMap(scaled.data * kept[:, np.newaxis, np.newaxis])
    logits, res_spatial = _spatial_attention_parts(masked, attention, position_budget)
    return UamOutput(logits, weights, kept, max(res_channel, res_spatial))


def object_attention(d_prev: Grid2D, e_enc: FeatureMap, denoise: float,
                     refine: DdrmParams) -> Grid2D:
    """Gate encoder features by object and edge confidence, then refine.

    The object weight is sigmoid(d_prev). The edge weight is the background
    confidence 1 - sigmoid(d_prev) where that stays at or below ``denoise``
    and 0 where it exceeds it (treated as noise). The gated features run
    through the refine block, which must emit exactly one channel of logits.
    """
    if not 0.0 < denoise < 1.0:
        raise InvalidParameterError(f"denoise must lie in (0, 1), got {denoise}")
    if (d_prev.height, d_prev.width) != (e_enc.height, e_enc.width):
        raise ShapeError("logits and features must share spatial dims; upsample the logits first")
    if refine.in_channels != e_enc.channels:
        raise ShapeError(f"refine block expects {refine.in_channels} channels, features have {e_enc.channels}")
    if refine.out_channels != 1:
        raise ShapeError("refine block must emit exactly one channel")
    object_w = sigmoid_values(d_prev.data)
    edge_w = 1.0 - object_w
    edge_w = np.where(edge_w > denoise, 0.0, edge_w)
    gated = e_enc.data * (object_w + edge_w)[np.newaxis, :, :]
    return ddrm_forward(FeatureMap(gated), refine).to_grid()

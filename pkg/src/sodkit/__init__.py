"""Spectral edge extraction, attention kernels, adaptive losses and metrics
for salient object detection masks, plus a deterministic demo network."""

from .attention import (
    DEFAULT_POSITION_BUDGET,
    AggregationParams,
    AttentionParams,
    DdrmParams,
    UamOutput,
    aggregate_multilevel,
    channel_attention,
    confidence_mask,
    ddrm_forward,
    kept_channel_mask,
    object_attention,
    spatial_attention,
    union_attention,
)
from .errors import (
    ConfigError,
    FormatError,
    InvalidInputError,
    InvalidParameterError,
    KernelError,
    NumericalError,
    ResourceError,
    ShapeError,
)
from .grid import (
    ConvParams,
    FeatureMap,
    Grid2D,
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
from .loss import (
    IntensityMap,
    LossReport,
    adaptive_bce,
    adaptive_iou,
    adaptive_l1,
    api_loss,
    pixel_intensity,
    total_loss,
)
from .metrics import (
    THRESHOLDS,
    MetricReport,
    adaptive_f_measure,
    evaluate_pair,
    f_measure_curve,
    mae,
    s_measure,
)
from .pgm import decode_pgm, encode_pgm, read_pgm, write_pgm
from .spectral import (
    IMAG_RESIDUE_LIMIT,
    EdgeResult,
    Spectrum,
    fft2,
    highpass,
    ifft2,
    masked_edge_attention,
)
from .toynet import (
    SOFTMAX_RESIDUE_LIMIT,
    ForwardOutput,
    SeparableBlock,
    SplitMix64,
    ToyConfig,
    ToyNet,
    build_toy,
    demo_image,
    forward,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationParams",
    "AttentionParams",
    "ConfigError",
    "ConvParams",
    "DdrmParams",
    "DEFAULT_POSITION_BUDGET",
    "EdgeResult",
    "FeatureMap",
    "FormatError",
    "ForwardOutput",
    "Grid2D",
    "IMAG_RESIDUE_LIMIT",
    "IntensityMap",
    "InvalidInputError",
    "InvalidParameterError",
    "KernelError",
    "LossReport",
    "MetricReport",
    "THRESHOLDS",
    "NumericalError",
    "ResourceError",
    "SOFTMAX_RESIDUE_LIMIT",
    "SeparableBlock",
    "ShapeError",
    "SplitMix64",
    "Spectrum",
    "ToyConfig",
    "ToyNet",
    "UamOutput",
    "adaptive_bce",
    "adaptive_f_measure",
    "adaptive_iou",
    "adaptive_l1",
    "aggregate_multilevel",
    "api_loss",
    "binarize",
    "box_mean",
    "build_toy",
    "channel_attention",
    "confidence_mask",
    "conv1x1",
    "ddrm_forward",
    "decode_pgm",
    "demo_image",
    "depthwise_conv",
    "encode_pgm",
    "evaluate_pair",
    "f_measure_curve",
    "fft2",
    "forward",
    "highpass",
    "ifft2",
    "kept_channel_mask",
    "mae",
    "masked_edge_attention",
    "object_attention",
    "pixel_intensity",
    "read_pgm",
    "s_measure",
    "selu",
    "sigmoid_map",
    "sigmoid_values",
    "softmax_rows",
    "spatial_attention",
    "total_loss",
    "union_attention",
    "upsample",
    "write_pgm",
]

"""Frequency-domain edge extraction.

A grid's spectrum is held DC-centered so radial masks read naturally. The
forward transform is unnormalized and the inverse carries the 1/(HW) factor,
matching the usual discrete convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import DdrmParams, ddrm_forward
from .errors import InvalidInputError, InvalidParameterError, NumericalError, ShapeError
from .grid import FeatureMap, Grid2D

# Tolerated imaginary leakage when inverting a nominally symmetric spectrum.
IMAG_RESIDUE_LIMIT = 1e-5


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex 2-D spectrum with the zero-frequency bin at (h // 2, w // 2)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128).copy()
        if arr.ndim != 2:
            raise ShapeError(f"Spectrum data must be 2-dimensional, got shape {arr.shape}")
        if arr.size == 0:
            raise ShapeError(f"Spectrum data must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("Spectrum data must contain only finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class EdgeResult:
    """High-frequency edge response and the input refined by it."""

    edge: FeatureMap
    refined: FeatureMap


def fft2(grid: Grid2D) -> Spectrum:
    """Unnormalized 2-D discrete Fourier transform, shifted DC-center."""
    return Spectrum(np.fft.fftshift(np.fft.fft2(grid.data)))


def ifft2(spectrum: Spectrum) -> Grid2D:
    """Inverse transform (1/(HW) normalization) back to a real grid.

    The imaginary part is discarded after checking it is only rounding noise;
    a spectrum that is not conjugate-symmetric fails that check.
    """
    arr = np.fft.ifft2(np.fft.ifftshift(spectrum.data))
    scale = max(1.0, float(np.abs(arr.real).max()))
    residue = float(np.abs(arr.imag).max())
    if residue > IMAG_RESIDUE_LIMIT * scale:
        raise NumericalError(
            f"imaginary residue {residue:.3e} after inverse transform; spectrum is not symmetric")
    return Grid2D(arr.real)


def highpass(spectrum: Spectrum, radius: float) -> Spectrum:
    """Zero every bin strictly closer than ``radius`` to the centered DC bin.

    Euclidean distance, hard cutoff; radius 0 passes the spectrum through
    untouched. Idempotent for any fixed radius.
    """
    r = float(radius)
    if not np.isfinite(r) or r < 0.0:
        raise InvalidParameterError(f"radius must be finite and >= 0, got {radius!r}")
    h, w = spectrum.data.shape
    rows = np.arange(h) - h // 2
    cols = np.arange(w) - w // 2
    dist2 = rows[:, np.newaxis] ** 2 + cols[np.newaxis, :] ** 2
    out = spectrum.data.copy()
    out[dist2 < r * r] = 0.0
    return Spectrum(out)


def masked_edge_attention(x: FeatureMap, radius: float, refine: DdrmParams) -> EdgeResult:
    """Extract high-frequency structure per channel and refine it into edges.

    Each channel is transformed, radially high-passed, and inverted; the
    stack runs through the refine block to produce the edge response E, and
    the refined map is x + E (so the edge evidence rides on the features
    propagated downstream).
    """
    if refine.in_channels != x.channels or refine.out_channels != x.channels:
        raise ShapeError(
            f"refine block must map {x.channels} channels onto themselves, "
            f"got {refine.in_channels} -> {refine.out_channels}")
    bands = np.stack([
        ifft2(highpass(fft2(Grid2D(channel)), radius)).data
        for channel in x.data
    ])
    edge = ddrm_forward(FeatureMap(bands), refine)
    refined = FeatureMap(x.data + edge.data)
    return EdgeResult(edge=edge, refined=refined)

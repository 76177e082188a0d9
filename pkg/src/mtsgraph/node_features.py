"""Per-channel node feature extraction.

Three representations of an (M, N) sample feed the graph models:

* ``raw``  - the series itself, one N-vector per channel.
* ``de``   - differential entropy of five band-limited copies of the
  channel, assuming near-Gaussian band signals, in bits.
* ``psd``  - one-sided power spectral density from the DFT.

Frequency bands split (0, fs/2] into equal widths by default.  The DC bin
is excluded from every band, so summing the band-limited signals
reconstructs the mean-removed channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatch, MissingSamplingFrequency,
                     SeriesTooShort)
from .ts_io import MultivariateSeries

NODE_KINDS = ("raw", "de", "psd")

VARIANCE_FLOOR = 1e-12
DEFAULT_BANDS = 5


@dataclass(frozen=True)
class NodeFeatureMatrix:
    """(M, F) feature rows for one sample, tagged with the extractor kind."""

    values: np.ndarray
    kind: str


def _check_vector(x: np.ndarray, min_len: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"{what} expects a 1-D series, got {x.shape}")
    if x.size < min_len:
        raise SeriesTooShort(
            f"{what} needs at least {min_len} samples, got {x.size}")
    return x


def dft(x: np.ndarray) -> np.ndarray:
    """Full complex DFT of a 1-D series."""
    return np.fft.fft(_check_vector(x, 1, "dft"))


def psd(x: np.ndarray, fs: float) -> np.ndarray:
    """One-sided power spectral density.

    Bin k of the length-N DFT contributes |X_k|^2 / (N * fs) for
    k = 0 .. floor(N/2).  No window and no doubling of interior bins is
    applied; the values are the raw periodogram ordinates.
    """
    x = _check_vector(x, 2, "psd")
    if fs <= 0:
        raise MissingSamplingFrequency(f"fs must be positive, got {fs}")
    spectrum = np.fft.fft(x)
    half = x.size // 2 + 1
    return (np.abs(spectrum[:half]) ** 2) / (x.size * fs)


def band_masks(n: int, bands: int = DEFAULT_BANDS, *,
               fs: float | None = None,
               band_edges: tuple[float, ...] | None = None) -> list[np.ndarray]:
    """Boolean DFT-bin masks assigning every non-DC bin to one band.

    With the default equal-width bands over (0, fs/2] the assignment is
    fs-independent: bin k (1 <= k <= N/2) lands in band
    ceil(2 * bands * k / N), computed in integer arithmetic so boundary
    bins never flip due to rounding.  Custom ``band_edges`` (in Hz,
    ascending, ending at fs/2) require ``fs`` and use half-open
    (lo, hi] intervals.  Mirrored bins N-k follow their positive twin.
    """
    if bands < 1:
        raise ValueError(f"need at least one band, got {bands}")
    masks = [np.zeros(n, dtype=bool) for _ in range(bands)]
    if band_edges is not None:
        if fs is None:
            raise MissingSamplingFrequency(
                "custom band edges are in Hz and need fs")
        edges = np.asarray(band_edges, dtype=np.float64)
        if edges.size != bands + 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("band_edges must be ascending with bands+1 entries")
    for k in range(1, n // 2 + 1):
        if band_edges is None:
            b = -((-2 * bands * k) // n)  # ceil(2*bands*k/n)
            b = min(b, bands)
        else:
            f = k * fs / n
            hits = np.nonzero((edges[:-1] < f) & (f <= edges[1:]))[0]
            if hits.size == 0:
                continue
            b = int(hits[0]) + 1
        masks[b - 1][k] = True
        masks[b - 1][n - k] = True
    return masks


def band_limit(x: np.ndarray, fs: float, bands: int = DEFAULT_BANDS,
               band_edges: tuple[float, ...] | None = None) -> np.ndarray:
    """Band-limited copies of ``x`` via DFT masking.

    Returns a (bands, N) real array.  Summing the rows reconstructs the
    mean-removed input because the masks partition the non-DC bins.
    """
    x = _check_vector(x, 4, "band_limit")
    if fs <= 0:
        raise MissingSamplingFrequency(f"fs must be positive, got {fs}")
    spectrum = np.fft.fft(x)
    out = np.empty((bands, x.size), dtype=np.float64)
    for i, mask in enumerate(band_masks(x.size, bands, fs=fs,
                                        band_edges=band_edges)):
        out[i] = np.fft.ifft(spectrum * mask).real
    return out


def differential_entropy(x: np.ndarray, fs: float,
                         bands: int = DEFAULT_BANDS,
                         band_edges: tuple[float, ...] | None = None
                         ) -> np.ndarray:
    """Per-band differential entropy in bits.

    Each band-limited signal is treated as Gaussian, for which the
    differential entropy has the closed form 0.5 * log2(2*pi*e*var).
    Variances are floored at 1e-12 so empty or silent bands stay finite.
    """
    limited = band_limit(x, fs, bands, band_edges)
    var = np.maximum(limited.var(axis=1), VARIANCE_FLOOR)
    return 0.5 * np.log2(2.0 * np.pi * np.e * var)


def extract_raw(sample: MultivariateSeries) -> NodeFeatureMatrix:
    """Channels verbatim: node i's feature vector is channel i."""
    return NodeFeatureMatrix(values=np.array(sample.channels, dtype=np.float64),
                             kind="raw")


def feature_dim(kind: str, series_length: int,
                bands: int = DEFAULT_BANDS) -> int:
    """Width F of the node feature matrix for a given extractor."""
    if kind == "raw":
        return series_length
    if kind == "de":
        return bands
    if kind == "psd":
        return series_length // 2 + 1
    raise ValueError(f"unknown node feature kind {kind!r}")


def extract(sample: MultivariateSeries, kind: str,
            fs: float | None = None,
            bands: int = DEFAULT_BANDS) -> NodeFeatureMatrix:
    """Extract the node feature matrix for one sample.

    ``de`` and ``psd`` are frequency-domain and require a sampling rate;
    requesting them with ``fs=None`` raises MissingSamplingFrequency.
    """
    if sample.channels.ndim != 2:
        raise DimensionMismatch(
            f"sample must be (channels, time), got {sample.channels.shape}")
    if kind == "raw":
        return extract_raw(sample)
    if kind not in NODE_KINDS:
        raise ValueError(f"unknown node feature kind {kind!r}")
    if fs is None:
        raise MissingSamplingFrequency(
            f"{kind} features need a sampling rate but none is configured; "
            f"pass one explicitly or add it to the run configuration")
    if kind == "de":
        rows = [differential_entropy(ch, fs, bands) for ch in sample.channels]
    else:
        rows = [psd(ch, fs) for ch in sample.channels]
    return NodeFeatureMatrix(values=np.stack(rows), kind=kind)

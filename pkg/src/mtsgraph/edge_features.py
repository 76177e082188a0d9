"""Adjacency construction between channel nodes.

Three static strategies work directly on the raw (M, N) series of a sample,
independent of which node features the model consumes downstream:

* ``cg``  - complete graph, every weight 1.
* ``pcc`` - absolute Pearson correlation between channels.
* ``mi``  - histogram estimate of mutual information in bits.

The fourth, ``ael``, learns edges inside the model: a weight vector scores
|f_i - f_j| through a ReLU and each row is softmax-normalised.  Before any
training has happened there is nothing to show, so its static placeholder
is the identity matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .errors import DimensionMismatch
from .ts_io import MultivariateSeries

EDGE_KINDS = ("cg", "pcc", "mi", "ael")
STATIC_EDGE_KINDS = ("cg", "pcc", "mi")


@dataclass(frozen=True)
class AdjacencyMatrix:
    """(M, M) nonnegative edge weights tagged with the strategy kind."""

    values: np.ndarray
    kind: str


@dataclass
class AelParams:
    """Learnable scorer for adaptive edges: one weight per feature column."""

    weight: Tensor


def _check_channels(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected (channels, time), got {x.shape}")
    return x


def complete_graph(m: int) -> AdjacencyMatrix:
    """All-ones adjacency over ``m`` nodes, self-loops included."""
    return AdjacencyMatrix(values=np.ones((m, m), dtype=np.float64), kind="cg")


def pcc(channels: np.ndarray) -> AdjacencyMatrix:
    """Absolute Pearson correlation between channel pairs.

    Zero-variance channels correlate 0 with everything; the diagonal is
    forced to 1.  Values are clipped into [0, 1] to absorb rounding.
    """
    x = _check_channels(channels)
    std = x.std(axis=1)
    ok = std > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(x)
    corr = np.atleast_2d(corr)
    corr[~ok, :] = 0.0
    corr[:, ~ok] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = (corr + corr.T) / 2.0  # BLAS matmul is not exactly symmetric
    return AdjacencyMatrix(values=np.clip(np.abs(corr), 0.0, 1.0), kind="pcc")


def default_mi_bins(n: int) -> int:
    """Square-root histogram rule clamped into [2, 16]."""
    return max(2, min(16, int(np.floor(np.sqrt(n)))))


def mutual_information(channels: np.ndarray,
                       bins: int | None = None) -> AdjacencyMatrix:
    """Pairwise mutual information from equal-width 2-D histograms, in bits.

    Each channel gets ``bins`` equal-width bins over its own range; the
    diagonal is the channel's own histogram entropy, since I(X;X) = H(X).
    """
    x = _check_channels(channels)
    m, n = x.shape
    if bins is None:
        bins = default_mi_bins(n)
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    edges = [np.histogram_bin_edges(row, bins=bins) for row in x]
    out = np.zeros((m, m), dtype=np.float64)
    for i in range(m):
        for j in range(i, m):
            joint, _, _ = np.histogram2d(x[i], x[j], bins=[edges[i], edges[j]])
            p = joint / n
            pi = p.sum(axis=1, keepdims=True)
            pj = p.sum(axis=0, keepdims=True)
            mask = p > 0.0
            value = float(np.sum(
                p[mask] * np.log2(p[mask] / (pi @ pj)[mask])))
            out[i, j] = out[j, i] = max(value, 0.0)
    return AdjacencyMatrix(values=out, kind="mi")


def ael_placeholder(m: int) -> AdjacencyMatrix:
    """Untrained stand-in for learned edges: self-loops only."""
    return AdjacencyMatrix(values=np.eye(m, dtype=np.float64), kind="ael")


def ael_forward(features: Tensor, params: AelParams) -> Tensor:
    """Differentiable adaptive adjacency from node features.

    Row i is softmax over j of ReLU(w . |f_i - f_j|), the diagonal
    included (its score is always 0, so it shares the softmax mass).
    Every entry is strictly positive and every row sums to 1.
    """
    if features.ndim != 2:
        raise DimensionMismatch(
            f"features must be (nodes, dim), got {features.shape}")
    m, f = features.shape
    if params.weight.shape != (f,):
        raise DimensionMismatch(
            f"ael weight has shape {params.weight.shape}, features have "
            f"{f} columns")
    fi = features.reshape(m, 1, f)
    fj = features.reshape(1, m, f)
    dist = (fi - fj).abs()                       # (M, M, F)
    scores = (dist.reshape(m * m, f) @ params.weight.reshape(f, 1))
    return scores.reshape(m, m).relu().softmax(axis=-1)


def compute_adjacency(sample: MultivariateSeries, kind: str,
                      bins: int | None = None) -> AdjacencyMatrix:
    """Static adjacency for one sample from its raw channels.

    ``ael`` yields the identity placeholder; its real weights only exist
    inside a trained model.
    """
    if kind == "cg":
        return complete_graph(sample.channels.shape[0])
    if kind == "pcc":
        return pcc(sample.channels)
    if kind == "mi":
        return mutual_information(sample.channels, bins=bins)
    if kind == "ael":
        return ael_placeholder(sample.channels.shape[0])
    raise ValueError(f"unknown edge kind {kind!r}")

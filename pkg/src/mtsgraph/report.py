"""Result tables and edge-weight exports.

The markdown table mirrors the benchmark layout: one row per edge kind,
columns grouped by architecture and split by node kind, each cell the
mean best-of-seeds test accuracy (%) across the selected datasets.  The
best edge kind in a column is bold; the best node kind within a row's
architecture group is underlined.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .edge_features import ael_forward, compute_adjacency
from .errors import CheckpointRequired, DimensionMismatch
from .models import restore_model
from .node_features import extract
from .ts_io import MultivariateSeries

ARCH_LABELS = {"chebnet": "ChebNet", "gcn": "GCN", "gat": "GAT",
               "megat": "MEGAT", "stgcn": "STGCN"}
NODE_LABELS = {"raw": "Raw", "de": "DE", "psd": "PSD"}
EDGE_LABELS = {"cg": "CG", "pcc": "PCC", "mi": "MI", "ael": "AEL"}


def table_cells(summaries: dict, datasets, node_kinds, edge_kinds,
                architectures) -> dict:
    """Mean accuracy (%) per (edge, arch, node) across datasets.

    A cell exists only if every selected dataset contributed a
    successful best-of-seeds summary for that variant; partial variants
    stay absent and render as '-'.
    """
    cells = {}
    for edge in edge_kinds:
        for arch in architectures:
            for node in node_kinds:
                accs = []
                for dataset in datasets:
                    summary = summaries.get((dataset, node, edge, arch))
                    if summary is None or summary.get("status") != "ok":
                        break
                    accs.append(summary["test_accuracy"])
                else:
                    if accs:
                        cells[(edge, arch, node)] = \
                            100.0 * float(np.mean(accs))
    return cells


def _flags(cells, node_kinds, edge_kinds, architectures):
    """Split cell flags: bold = best edge per column, underline = best
    node kind within a row's architecture group."""
    bold, underline = set(), set()
    for arch in architectures:
        for node in node_kinds:
            column = [(cells[(e, arch, node)], e) for e in edge_kinds
                      if (e, arch, node) in cells]
            if column:
                bold.add((max(column)[1], arch, node))
        for edge in edge_kinds:
            group = [(cells[(edge, arch, n)], n) for n in node_kinds
                     if (edge, arch, n) in cells]
            if group:
                underline.add((edge, arch, max(group)[1]))
    return bold, underline


def emit_table(summaries: dict, datasets, *,
               node_kinds=("raw", "de", "psd"),
               edge_kinds=("cg", "pcc", "mi", "ael"),
               architectures=("chebnet", "gcn", "gat", "megat", "stgcn"),
               ) -> tuple[str, str]:
    """Render (markdown, csv) from per-variant summaries."""
    cells = table_cells(summaries, datasets, node_kinds, edge_kinds,
                        architectures)
    bold, underline = _flags(cells, node_kinds, edge_kinds, architectures)

    header = [""]
    for arch in architectures:
        for node in node_kinds:
            header.append(f"{ARCH_LABELS[arch]} {NODE_LABELS[node]}")
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for edge in edge_kinds:
        row = [EDGE_LABELS[edge]]
        for arch in architectures:
            for node in node_kinds:
                key = (edge, arch, node)
                if key not in cells:
                    row.append("-")
                    continue
                text = f"{cells[key]:.3f}"
                if key in underline:
                    text = f"<u>{text}</u>"
                if key in bold:
                    text = f"**{text}**"
                row.append(text)
        lines.append("| " + " | ".join(row) + " |")
    markdown = "\n".join(lines) + "\n"

    csv = io.StringIO()
    csv.write("edge_kind,architecture,node_kind,mean_accuracy_pct,"
              "best_edge_in_column,best_node_in_group\n")
    for edge in edge_kinds:
        for arch in architectures:
            for node in node_kinds:
                key = (edge, arch, node)
                value = f"{cells[key]:.6f}" if key in cells else ""
                csv.write(f"{edge},{arch},{node},{value},"
                          f"{int(key in bold)},{int(key in underline)}\n")
    return markdown, csv.getvalue()


def pgm_bytes(matrix: np.ndarray) -> bytes:
    """Plain-text PGM (P2), linear [0, max] -> [0, 255]."""
    matrix = np.asarray(matrix, dtype=np.float64)
    peak = matrix.max()
    if peak <= 0:
        levels = np.zeros(matrix.shape, dtype=int)
    else:
        levels = np.rint(np.clip(matrix, 0.0, None) / peak
                         * 255).astype(int)
    out = ["P2", f"{matrix.shape[1]} {matrix.shape[0]}", "255"]
    out.extend(" ".join(str(v) for v in row) for row in levels)
    return ("\n".join(out) + "\n").encode()


def edge_weights_for_sample(sample: MultivariateSeries, edge_kind: str, *,
                            checkpoint=None, mi_bins=None,
                            fs=None) -> np.ndarray:
    """M x M edge weights for one series; AEL needs a trained model."""
    if edge_kind != "ael":
        return compute_adjacency(sample, edge_kind, bins=mi_bins).values
    if checkpoint is None:
        raise CheckpointRequired(
            "adaptive edge weights come from a trained model; pass a "
            "checkpoint produced by a run with edge kind 'ael'")
    model, extra = restore_model(checkpoint)
    if model.edge_kind != "ael":
        raise CheckpointRequired(
            f"checkpoint was trained with edge kind "
            f"'{model.edge_kind}', not 'ael'")
    config = (extra or {}).get("config", {})
    nodes = extract(sample, config.get("node_kind", "raw"), fs=fs,
                    bands=config.get("bands", 5))
    if nodes.values.shape != (model.spec.num_nodes,
                              model.spec.node_feature_dim):
        raise DimensionMismatch(
            f"sample features {nodes.values.shape} do not fit the "
            f"checkpoint's ({model.spec.num_nodes}, "
            f"{model.spec.node_feature_dim}) graphs")
    from .autodiff import Tensor, no_grad
    with no_grad():
        return ael_forward(Tensor(nodes.values), model.ael).data


def export_edge_viz(sample: MultivariateSeries, edge_kind: str,
                    out_prefix, *, zero_diagonal: bool = False,
                    checkpoint=None, mi_bins=None,
                    fs=None) -> tuple[Path, Path]:
    """Write <prefix>.csv and <prefix>.pgm for one sample's edges."""
    weights = edge_weights_for_sample(sample, edge_kind,
                                      checkpoint=checkpoint,
                                      mi_bins=mi_bins, fs=fs)
    if zero_diagonal:
        weights = weights.copy()
        np.fill_diagonal(weights, 0.0)
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out_prefix.with_suffix(".csv")
    pgm_path = out_prefix.with_suffix(".pgm")
    np.savetxt(csv_path, weights, delimiter=",", fmt="%.10g")
    pgm_path.write_bytes(pgm_bytes(weights))
    return csv_path, pgm_path


def export_features(sample: MultivariateSeries, node_kind: str, out_path,
                    *, fs=None, bands: int = 5) -> Path:
    """Write one sample's node-feature matrix as CSV."""
    features = extract(sample, node_kind, fs=fs, bands=bands)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(out_path, features.values, delimiter=",", fmt="%.10g")
    return out_path

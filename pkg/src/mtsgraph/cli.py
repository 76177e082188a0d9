"""Command-line surface for the benchmark.

Subcommands: parse, features extract, train, grid, table, viz edges.
Exit codes: 0 success, 1 usage error or missing checkpoint, 2 data
error, 3 run failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import resolve_settings
from .errors import CheckpointRequired, DataError, RunError
from .grid import (EDGE_KIND_CHOICES, NODE_KIND_CHOICES, GridSpec,
                   load_run_log, result_record, run_grid, summarize,
                   write_record)
from .models import ARCHITECTURES
from .report import emit_table, export_edge_viz, export_features
from .training import DEFAULT_SEEDS, RunConfig, train_run
from .ts_io import load_dataset_dir

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _comma_list(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _comma_ints(text: str) -> tuple:
    return tuple(int(part) for part in _comma_list(text))


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--data-root", help="directory of dataset folders")


def _add_training_flags(parser):
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr0", type=float)
    parser.add_argument("--hidden", type=int)
    parser.add_argument("--layers", type=int)
    parser.add_argument("--bands", type=int)
    parser.add_argument("--mi-bins", type=int)
    parser.add_argument("--no-normalize", action="store_true",
                        help="skip per-channel z-normalization")


def _training_overrides(args) -> dict:
    overrides = {}
    for field in ("epochs", "batch_size", "lr0", "hidden", "layers",
                  "bands", "mi_bins"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    if args.no_normalize:
        overrides["normalize"] = False
    return overrides


def _settings(args, **extra) -> dict:
    return resolve_settings(config_path=args.config,
                            data_root=args.data_root, **extra)


def _load(settings, name):
    return load_dataset_dir(
        settings["data_root"], name,
        sampling_frequency=settings["sampling_rates"].get(name),
        normalize=settings["normalize"])


def _pick_sample(dataset, split, index):
    samples = dataset.train if split == "train" else dataset.test
    if not 0 <= index < len(samples):
        raise DataError(f"sample index {index} out of range for the "
                        f"{split} split of {len(samples)} samples")
    return samples[index]


def cmd_parse(args) -> int:
    settings = _settings(args)
    dataset = _load(settings, args.dataset)
    meta = dataset.meta
    print(json.dumps({
        "name": meta.name,
        "train_cases": len(dataset.train),
        "test_cases": len(dataset.test),
        "dimensions": meta.n_channels,
        "length": meta.series_length,
        "classes": meta.n_classes,
        "class_labels": list(meta.class_labels),
        "sampling_frequency": meta.sampling_frequency,
        "normalized": meta.normalized,
    }, indent=1))
    return 0


def cmd_features_extract(args) -> int:
    settings = _settings(args)
    dataset = _load(settings, args.dataset)
    sample = _pick_sample(dataset, args.split, args.sample)
    path = export_features(
        sample, args.kind, args.out,
        fs=dataset.meta.sampling_frequency,
        bands=args.bands if args.bands is not None else 5)
    print(path)
    return 0


def cmd_train(args) -> int:
    settings = _settings(args, runs_dir=args.runs_dir)
    config = RunConfig(dataset=args.dataset, node_kind=args.node_kind,
                       edge_kind=args.edge_kind,
                       architecture=args.architecture, seed=args.seed,
                       **_training_overrides(args))
    dataset = _load(settings, args.dataset)
    result = train_run(config, dataset, checkpoint_path=args.checkpoint)
    record = result_record(result)
    write_record(settings["runs_dir"], config, record)
    summary = {k: v for k, v in record.items() if k != "loss_curve"}
    print(json.dumps(summary, indent=1))
    return 0


def cmd_grid(args) -> int:
    settings = _settings(args, runs_dir=args.runs_dir,
                         workers=args.workers, datasets=args.datasets,
                         node_kinds=args.node_kinds,
                         edge_kinds=args.edge_kinds,
                         architectures=args.architectures,
                         seeds=args.seeds)
    grid_cfg = settings["grid"]
    if not grid_cfg.get("datasets"):
        raise DataError("no datasets selected: pass --datasets or set "
                        "grid.datasets in the config file")
    grid = GridSpec(
        datasets=tuple(grid_cfg["datasets"]),
        node_kinds=tuple(grid_cfg.get("node_kinds", NODE_KIND_CHOICES)),
        edge_kinds=tuple(grid_cfg.get("edge_kinds", EDGE_KIND_CHOICES)),
        architectures=tuple(grid_cfg.get("architectures", ARCHITECTURES)),
        seeds=tuple(grid_cfg.get("seeds", DEFAULT_SEEDS)))
    overrides = dict(settings["training"])
    overrides.update(_training_overrides(args))
    if not settings["normalize"]:
        overrides.setdefault("normalize", False)
    records = run_grid(grid, settings["data_root"], settings["runs_dir"],
                       settings["sampling_rates"],
                       resume=not args.no_resume,
                       workers=settings["workers"], overrides=overrides)
    ok = sum(1 for r in records if r["status"] == "ok")
    print(json.dumps({"runs": len(records), "ok": ok,
                      "failed": len(records) - ok,
                      "runs_dir": str(settings["runs_dir"])}))
    return 0 if ok == len(records) else 3


def cmd_table(args) -> int:
    settings = _settings(args, runs_dir=args.runs_dir)
    records = load_run_log(settings["runs_dir"])
    if not records:
        raise DataError(f"no run records found under "
                        f"{settings['runs_dir']}")
    summaries = summarize(records)
    datasets = args.datasets or tuple(sorted(
        {r["config"]["dataset"] for r in records}))
    kwargs = {}
    if args.node_kinds:
        kwargs["node_kinds"] = args.node_kinds
    if args.edge_kinds:
        kwargs["edge_kinds"] = args.edge_kinds
    if args.architectures:
        kwargs["architectures"] = args.architectures
    markdown, csv = emit_table(summaries, datasets, **kwargs)
    if args.out_md:
        Path(args.out_md).write_text(markdown)
    if args.out_csv:
        Path(args.out_csv).write_text(csv)
    print(markdown, end="")
    return 0


def cmd_viz_edges(args) -> int:
    settings = _settings(args)
    dataset = _load(settings, args.dataset)
    sample = _pick_sample(dataset, args.split, args.sample)
    csv_path, pgm_path = export_edge_viz(
        sample, args.edge_kind, args.out,
        zero_diagonal=args.zero_diagonal, checkpoint=args.checkpoint,
        mi_bins=args.mi_bins, fs=dataset.meta.sampling_frequency)
    print(csv_path)
    print(pgm_path)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mtsgraph",
                     description="Graph benchmark for multivariate time "
                                 "series classification")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("parse", help="validate and summarize a dataset")
    p.add_argument("dataset")
    _add_common(p)
    p.set_defaults(func=cmd_parse)

    features = sub.add_parser("features", help="feature utilities")
    fsub = features.add_subparsers(dest="features_command", required=True,
                                   parser_class=_Parser)
    p = fsub.add_parser("extract", help="write one sample's node "
                                        "features as CSV")
    p.add_argument("dataset")
    p.add_argument("--kind", required=True, choices=NODE_KIND_CHOICES)
    p.add_argument("--split", default="train",
                   choices=("train", "test"))
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--bands", type=int)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_features_extract)

    p = sub.add_parser("train", help="run one training configuration")
    p.add_argument("dataset")
    p.add_argument("--node-kind", required=True,
                   choices=NODE_KIND_CHOICES)
    p.add_argument("--edge-kind", required=True,
                   choices=EDGE_KIND_CHOICES)
    p.add_argument("--architecture", required=True,
                   choices=ARCHITECTURES)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--checkpoint", help="write the min-loss model here")
    p.add_argument("--runs-dir")
    _add_training_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="run the benchmark grid")
    p.add_argument("--datasets", type=_comma_list)
    p.add_argument("--node-kinds", type=_comma_list)
    p.add_argument("--edge-kinds", type=_comma_list)
    p.add_argument("--architectures", type=_comma_list)
    p.add_argument("--seeds", type=_comma_ints)
    p.add_argument("--workers", type=int)
    p.add_argument("--runs-dir")
    p.add_argument("--no-resume", action="store_true",
                   help="re-execute runs even if records exist")
    _add_training_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("table", help="aggregate run records into the "
                                     "benchmark table")
    p.add_argument("--datasets", type=_comma_list)
    p.add_argument("--node-kinds", type=_comma_list)
    p.add_argument("--edge-kinds", type=_comma_list)
    p.add_argument("--architectures", type=_comma_list)
    p.add_argument("--runs-dir")
    p.add_argument("--out-md", help="write markdown here")
    p.add_argument("--out-csv", help="write CSV here")
    _add_common(p)
    p.set_defaults(func=cmd_table)

    viz = sub.add_parser("viz", help="visualization exports")
    vsub = viz.add_subparsers(dest="viz_command", required=True,
                              parser_class=_Parser)
    p = vsub.add_parser("edges", help="export one sample's edge "
                                      "weights as CSV and PGM")
    p.add_argument("dataset")
    p.add_argument("--edge-kind", required=True,
                   choices=EDGE_KIND_CHOICES)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--zero-diagonal", action="store_true",
                   help="zero self-loop weights before export")
    p.add_argument("--checkpoint", help="trained model (required for "
                                        "adaptive edges)")
    p.add_argument("--mi-bins", type=int)
    p.add_argument("--out", required=True,
                   help="output path prefix (suffixes are added)")
    _add_common(p)
    p.set_defaults(func=cmd_viz_edges)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 1
    try:
        return args.func(args)
    except CheckpointRequired as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Reading UEA-style .ts files into in-memory datasets.

The .ts format is line oriented: ``#`` comment lines, then ``@directive``
header lines, then a ``@data`` marker followed by one sample per line.
Within a sample, channels are separated by ``:`` and values within a channel
by ``,``; the token after the final colon is the class label.  Only the
equal-length, no-timestamp flavour is supported, which covers every archive
this engine targets.

Loaded values are float64 throughout.  Per-channel z-normalisation uses the
population standard deviation and maps constant channels to all zeros.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (CacheInvalid, DatasetNotFound, EmptyEvaluationSet,
                     MalformedHeader, NonNumericValue, RaggedSample,
                     SplitMismatch, UnknownLabel)

CACHE_MAGIC = b"MTSG"
CACHE_VERSION = 1


@dataclass(frozen=True)
class MultivariateSeries:
    """One labelled sample: a (channels, timesteps) float64 array."""

    channels: np.ndarray
    label: str


@dataclass(frozen=True)
class TsHeader:
    """Directives collected from a .ts file header."""

    problem_name: str = ""
    timestamps: bool = False
    missing: bool = False
    univariate: bool = False
    dimensions: int | None = None
    equal_length: bool = True
    series_length: int | None = None
    class_labels: tuple[str, ...] = ()


@dataclass
class DatasetMeta:
    """Shape and label bookkeeping shared by both splits."""

    name: str
    n_channels: int
    series_length: int
    class_labels: tuple[str, ...]
    sampling_frequency: float | None = None
    normalized: bool = True

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    def label_index(self, label: str) -> int:
        try:
            return self.class_labels.index(label)
        except ValueError:
            raise UnknownLabel(
                f"label {label!r} not among {list(self.class_labels)}") from None


@dataclass
class Dataset:
    meta: DatasetMeta
    train: list[MultivariateSeries] = field(default_factory=list)
    test: list[MultivariateSeries] = field(default_factory=list)


_BOOL_DIRECTIVES = {"timestamps", "missing", "univariate", "equallength"}
_INT_DIRECTIVES = {"dimensions", "serieslength"}


def _parse_bool(token: str, directive: str, lineno: int) -> bool:
    low = token.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    raise MalformedHeader(
        f"line {lineno}: @{directive} expects true/false, got {token!r}")


def parse_ts_file(path: str | Path) -> tuple[list[MultivariateSeries], TsHeader]:
    """Parse one .ts file.

    Parameters
    ----------
    path : str or Path
        File to read.

    Returns
    -------
    samples : list of MultivariateSeries
        Parsed samples in file order.
    header : TsHeader
        The header directives that were declared.

    Raises
    ------
    DatasetNotFound
        If ``path`` does not exist.
    MalformedHeader, RaggedSample, UnknownLabel, NonNumericValue
        On structural problems; messages carry 1-based line numbers.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFound(f"no such .ts file: {path}")
    fields: dict = {}
    samples: list[MultivariateSeries] = []
    in_data = False
    label_set: tuple[str, ...] = ()
    expected_channels: int | None = None
    expected_length: int | None = None
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("@"):
                if in_data:
                    raise MalformedHeader(
                        f"line {lineno}: directive after @data")
                body = line[1:]
                name, _, rest = body.partition(" ")
                key = name.lower()
                rest = rest.strip()
                if key == "data":
                    if rest:
                        raise MalformedHeader(
                            f"line {lineno}: @data takes no argument")
                    if fields.get("timestamps"):
                        raise MalformedHeader(
                            "timestamped series are not supported")
                    if not label_set:
                        raise MalformedHeader(
                            "@classLabel with a label list must precede @data")
                    in_data = True
                    expected_channels = fields.get("dimensions")
                    expected_length = fields.get("serieslength")
                    continue
                if key in fields or (key == "classlabel" and label_set):
                    raise MalformedHeader(f"line {lineno}: duplicate @{name}")
                if key == "problemname":
                    fields["problemname"] = rest
                elif key in _BOOL_DIRECTIVES:
                    fields[key] = _parse_bool(rest, name, lineno)
                elif key in _INT_DIRECTIVES:
                    try:
                        fields[key] = int(rest)
                    except ValueError:
                        raise MalformedHeader(
                            f"line {lineno}: @{name} expects an integer, "
                            f"got {rest!r}") from None
                elif key == "classlabel":
                    tokens = rest.split()
                    if not tokens:
                        raise MalformedHeader(
                            f"line {lineno}: @classLabel needs a value")
                    flag = _parse_bool(tokens[0], name, lineno)
                    if not flag:
                        raise MalformedHeader(
                            "only classification data is supported "
                            "(@classLabel false)")
                    if len(tokens) < 2:
                        raise MalformedHeader(
                            f"line {lineno}: @classLabel true needs labels")
                    label_set = tuple(tokens[1:])
                else:
                    raise MalformedHeader(
                        f"line {lineno}: unknown directive @{name}")
                continue
            if not in_data:
                raise MalformedHeader(
                    f"line {lineno}: data row before @data")
            samples.append(_parse_data_row(line, lineno, label_set))
            m, n = samples[-1].channels.shape
            if expected_channels is None:
                expected_channels = m
            elif m != expected_channels:
                raise RaggedSample(
                    f"line {lineno}: sample has {m} channels, "
                    f"expected {expected_channels}")
            if expected_length is None:
                expected_length = n
            elif n != expected_length:
                raise RaggedSample(
                    f"line {lineno}: sample has length {n}, "
                    f"expected {expected_length}")
    if not in_data:
        raise MalformedHeader(f"{path}: no @data section")
    if not samples:
        raise MalformedHeader(f"{path}: @data section is empty")
    header = TsHeader(
        problem_name=fields.get("problemname", ""),
        timestamps=fields.get("timestamps", False),
        missing=fields.get("missing", False),
        univariate=fields.get("univariate", False),
        dimensions=fields.get("dimensions"),
        equal_length=fields.get("equallength", True),
        series_length=fields.get("serieslength"),
        class_labels=label_set,
    )
    return samples, header


def _parse_data_row(line: str, lineno: int,
                    labels: tuple[str, ...]) -> MultivariateSeries:
    parts = line.split(":")
    if len(parts) < 2:
        raise MalformedHeader(
            f"line {lineno}: data row has no label separator ':'")
    label = parts[-1].strip()
    if label not in labels:
        raise UnknownLabel(
            f"line {lineno}: label {label!r} not among {list(labels)}")
    rows = []
    length = None
    for ci, chunk in enumerate(parts[:-1]):
        tokens = [t.strip() for t in chunk.split(",")]
        try:
            values = np.array(tokens, dtype=np.float64)
        except ValueError:
            bad = next(t for t in tokens if not _is_float(t))
            raise NonNumericValue(
                f"line {lineno}: channel {ci} contains {bad!r}") from None
        if not np.all(np.isfinite(values)):
            raise NonNumericValue(
                f"line {lineno}: channel {ci} contains a non-finite value")
        if length is None:
            length = values.size
        elif values.size != length:
            raise RaggedSample(
                f"line {lineno}: channel {ci} has {values.size} values, "
                f"channel 0 has {length}")
        rows.append(values)
    return MultivariateSeries(channels=np.stack(rows), label=label)


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def znormalize(series: MultivariateSeries) -> MultivariateSeries:
    """Per-channel z-normalisation with the population standard deviation.

    Constant channels become all zeros instead of dividing by zero.
    """
    x = series.channels
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)  # population (ddof=0)
    out = np.where(std > 0.0, (x - mean) / np.where(std > 0.0, std, 1.0), 0.0)
    return MultivariateSeries(channels=out, label=series.label)


def load_dataset(train_path: str | Path, test_path: str | Path, *,
                 name: str | None = None,
                 sampling_frequency: float | None = None,
                 normalize: bool = True) -> Dataset:
    """Load a train/test split pair into a Dataset.

    Parameters
    ----------
    train_path, test_path : str or Path
        The two .ts files.
    name : str, optional
        Dataset name; defaults to the train file's @problemName.
    sampling_frequency : float, optional
        Sampling rate in Hz.  The .ts format does not carry one, so it must
        be supplied for frequency-domain features; None disables them.
    normalize : bool, default True
        Apply per-channel z-normalisation to every sample.

    Raises
    ------
    SplitMismatch
        If the splits disagree on channel count, series length, or label set.
    """
    train, train_header = parse_ts_file(train_path)
    test, test_header = parse_ts_file(test_path)
    if train_header.class_labels != test_header.class_labels:
        raise SplitMismatch(
            f"label sets differ: train {list(train_header.class_labels)} "
            f"vs test {list(test_header.class_labels)}")
    m, n = train[0].channels.shape
    mt, nt = test[0].channels.shape
    if (m, n) != (mt, nt):
        raise SplitMismatch(
            f"shape differs: train is {m}x{n}, test is {mt}x{nt}")
    if sampling_frequency is not None and sampling_frequency <= 0:
        raise ValueError(f"sampling_frequency must be positive, "
                         f"got {sampling_frequency}")
    if normalize:
        train = [znormalize(s) for s in train]
        test = [znormalize(s) for s in test]
    meta = DatasetMeta(
        name=name or train_header.problem_name or Path(train_path).stem,
        n_channels=m,
        series_length=n,
        class_labels=train_header.class_labels,
        sampling_frequency=sampling_frequency,
        normalized=normalize,
    )
    return Dataset(meta=meta, train=train, test=test)


def load_dataset_dir(root: str | Path, name: str, *,
                     sampling_frequency: float | None = None,
                     normalize: bool = True) -> Dataset:
    """Load ``<root>/<name>/<name>_TRAIN.ts`` and its _TEST counterpart."""
    base = Path(root) / name
    train = base / f"{name}_TRAIN.ts"
    test = base / f"{name}_TEST.ts"
    if not train.is_file() or not test.is_file():
        raise DatasetNotFound(
            f"expected {train} and {test}; download the archive and unpack "
            f"it under {Path(root)}")
    return load_dataset(train, test, name=name,
                        sampling_frequency=sampling_frequency,
                        normalize=normalize)


# -- binary cache --------------------------------------------------------


def save_cache(dataset: Dataset, path: str | Path) -> None:
    """Write a deterministic binary snapshot of a loaded dataset."""
    meta = dataset.meta
    header = {
        "name": meta.name,
        "n_channels": meta.n_channels,
        "series_length": meta.series_length,
        "class_labels": list(meta.class_labels),
        "sampling_frequency": meta.sampling_frequency,
        "normalized": meta.normalized,
        "n_train": len(dataset.train),
        "n_test": len(dataset.test),
    }
    blob = json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(CACHE_MAGIC)
        handle.write(struct.pack("<H", CACHE_VERSION))
        handle.write(struct.pack("<I", len(blob)))
        handle.write(blob)
        for split in (dataset.train, dataset.test):
            values = np.stack([s.channels for s in split])
            labels = np.array([meta.label_index(s.label) for s in split],
                              dtype=np.int64)
            np.save(handle, values)
            np.save(handle, labels)


def load_cache(path: str | Path) -> Dataset:
    """Read a snapshot written by :func:`save_cache`.

    Raises ``CacheInvalid`` on any structural problem; the caller should
    fall back to re-parsing the .ts sources.
    """
    try:
        with open(path, "rb") as handle:
            magic = handle.read(4)
            if magic != CACHE_MAGIC:
                raise CacheInvalid(f"{path}: bad magic {magic!r}")
            (version,) = struct.unpack("<H", handle.read(2))
            if version != CACHE_VERSION:
                raise CacheInvalid(f"{path}: unsupported version {version}")
            (hlen,) = struct.unpack("<I", handle.read(4))
            header = json.loads(handle.read(hlen).decode("utf-8"))
            meta = DatasetMeta(
                name=header["name"],
                n_channels=int(header["n_channels"]),
                series_length=int(header["series_length"]),
                class_labels=tuple(header["class_labels"]),
                sampling_frequency=header["sampling_frequency"],
                normalized=bool(header["normalized"]),
            )
            splits = []
            for count in (header["n_train"], header["n_test"]):
                values = np.load(handle)
                labels = np.load(handle)
                if values.shape != (count, meta.n_channels,
                                    meta.series_length):
                    raise CacheInvalid(
                        f"{path}: array shape {values.shape} does not match "
                        f"header")
                if labels.shape != (count,):
                    raise CacheInvalid(f"{path}: label count mismatch")
                splits.append([
                    MultivariateSeries(channels=values[i],
                                       label=meta.class_labels[labels[i]])
                    for i in range(count)
                ])
    except CacheInvalid:
        raise
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CacheInvalid(f"{path}: unreadable cache ({exc})") from exc
    return Dataset(meta=meta, train=splits[0], test=splits[1])


def split_arrays(split: list[MultivariateSeries],
                 meta: DatasetMeta) -> tuple[np.ndarray, np.ndarray]:
    """Stack a split into (values, integer labels) arrays."""
    if not split:
        raise EmptyEvaluationSet("split contains no samples")
    values = np.stack([s.channels for s in split])
    labels = np.array([meta.label_index(s.label) for s in split],
                      dtype=np.int64)
    return values, labels

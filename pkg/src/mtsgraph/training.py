"""Training protocol: plain SGD with a plateau-halved learning rate.

A run trains one model for a fixed number of epochs on seeded shuffled
minibatches, keeps the parameter snapshot with the lowest epoch-mean
training loss, and reports test accuracy of that snapshot.  Model
selection across seeds takes the best test accuracy with deterministic
tie-breaking.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, fields

import numpy as np
import psutil

from . import autodiff as ad
from .autodiff import Tensor
from .edge_features import compute_adjacency
from .errors import EmptyEvaluationSet, NonFiniteDetected, NonFiniteLoss
from .models import (GraphSample, ModelSpec, build_model, classify,
                     save_checkpoint)
from .node_features import extract, feature_dim
from .ts_io import Dataset, DatasetMeta, MultivariateSeries

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (42, 152, 310)


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run: a variant pinned to a dataset and a seed.

    The first block of fields is the training protocol; the second block
    sizes the model and feature extraction and is not part of the
    protocol identity in any published sense, just of the run hash.
    """

    dataset: str
    node_kind: str
    edge_kind: str
    architecture: str
    seed: int = 42
    epochs: int = 200
    batch_size: int = 64
    lr0: float = 0.001
    lr_floor: float = 1e-6
    plateau_patience: int = 10
    plateau_factor: float = 0.5

    hidden: int = 128
    layers: int = 3
    cheb_k: int = 3
    temporal_kernel: int = 3
    bands: int = 5
    mi_bins: int | None = None
    normalize: bool = True
    memory_budget_bytes: int = 4 * 2**30

    def canonical(self) -> dict:
        """Stable field order for hashing and serialization."""
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class RunResult:
    config: RunConfig
    test_accuracy: float
    train_accuracy: float
    best_train_loss: float
    loss_curve: list[float]
    wall_seconds: float
    selected_epoch: int  # 1-based argmin of loss_curve


def sgd_step(params, grads, lr: float):
    """p <- p - lr * g in place; entries with no gradient are skipped."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for p, g in zip(params, grads):
        if g is not None:
            p.data -= lr * g
    return params


class PlateauScheduler:
    """Halve the rate after `patience` consecutive non-improving epochs.

    Improvement means strictly lower than the best loss seen so far.
    The rate never drops below `floor`, and the bad-epoch counter resets
    on every halving as well as on every improvement.
    """

    def __init__(self, lr0: float, factor: float = 0.5, patience: int = 10,
                 floor: float = 1e-6):
        self.lr = lr0
        self.factor = factor
        self.patience = patience
        self.floor = floor
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, loss: float) -> float:
        if loss < self.best:
            self.best = loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr = max(self.lr * self.factor, self.floor)
                self.bad_epochs = 0
        return self.lr


def accuracy(predictions, labels) -> float:
    """Fraction of positions where predictions equal labels."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"prediction/label shape mismatch: "
                         f"{predictions.shape} vs {labels.shape}")
    if predictions.size == 0:
        raise EmptyEvaluationSet("cannot score an empty prediction set")
    return float(np.mean(predictions == labels))


def best_of_seeds(results: list[RunResult]) -> RunResult:
    """Best test accuracy; ties go to lower train loss, then lower seed."""
    if not results:
        raise ValueError("best_of_seeds needs at least one result")
    return min(results, key=lambda r: (-r.test_accuracy, r.best_train_loss,
                                       r.config.seed))


def build_graph_samples(samples: list[MultivariateSeries], meta: DatasetMeta,
                        node_kind: str, edge_kind: str, *,
                        bands: int = 5,
                        mi_bins: int | None = None) -> list[GraphSample]:
    """Turn raw series into model-ready graphs.

    Static adjacencies are computed here, once, from the raw channels;
    adaptive edge learning leaves adjacency unset so the model derives
    it from node features on every forward pass.
    """
    out = []
    for sample in samples:
        nodes = extract(sample, node_kind, fs=meta.sampling_frequency,
                        bands=bands)
        if edge_kind == "ael":
            adjacency = None
        else:
            adjacency = compute_adjacency(sample, edge_kind,
                                          bins=mi_bins).values
        out.append(GraphSample(nodes=Tensor(nodes.values),
                               adjacency=adjacency,
                               label=meta.label_index(sample.label)))
    return out


def _snapshot(params) -> list[np.ndarray]:
    return [p.data.copy() for p in params]


def _restore(params, snapshot) -> None:
    for p, s in zip(params, snapshot):
        p.data[...] = s


def _predict(model, samples) -> np.ndarray:
    with ad.no_grad():
        return np.array([int(np.argmax(classify(model, s).data))
                         for s in samples])


def train_run(config: RunConfig, dataset: Dataset,
              checkpoint_path=None) -> RunResult:
    """Run the full protocol for one (variant, seed) combination.

    Raises NonFiniteLoss if the loss or any intermediate diverges; the
    grid runner records such runs as failed instead of crashing.
    """
    started = time.perf_counter()
    meta = dataset.meta
    rng = np.random.default_rng(config.seed)

    train = build_graph_samples(dataset.train, meta, config.node_kind,
                                config.edge_kind, bands=config.bands,
                                mi_bins=config.mi_bins)
    test = build_graph_samples(dataset.test, meta, config.node_kind,
                               config.edge_kind, bands=config.bands,
                               mi_bins=config.mi_bins)

    spec = ModelSpec(architecture=config.architecture,
                     num_nodes=meta.n_channels,
                     node_feature_dim=feature_dim(config.node_kind,
                                                  meta.series_length,
                                                  config.bands),
                     num_classes=meta.n_classes,
                     layers=config.layers, hidden=config.hidden,
                     cheb_k=config.cheb_k,
                     temporal_kernel=config.temporal_kernel)
    model = build_model(spec, config.edge_kind, rng)
    params = list(model.parameters())

    scheduler = PlateauScheduler(config.lr0, config.plateau_factor,
                                 config.plateau_patience, config.lr_floor)
    process = psutil.Process()
    batch_size = config.batch_size
    lr = config.lr0
    loss_curve: list[float] = []
    best_loss = math.inf
    best_params = _snapshot(params)
    selected_epoch = 0

    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(train))
            epoch_loss = 0.0
            start = 0
            while start < len(order):
                if (process.memory_info().rss > config.memory_budget_bytes
                        and batch_size > 1):
                    batch_size = max(1, batch_size // 2)
                    log.warning("memory budget exceeded, halving batch "
                                "size to %d", batch_size)
                batch = order[start:start + batch_size]
                start += len(batch)
                ad.zero_grad(params)
                scale = 1.0 / len(batch)
                for idx in batch:
                    sample = train[idx]
                    loss = ad.cross_entropy_with_logits(
                        classify(model, sample), sample.label)
                    epoch_loss += loss.item()
                    (loss * scale).backward()
                sgd_step(params, [p.grad for p in params], lr)
            epoch_loss /= len(train)
            if not math.isfinite(epoch_loss):
                raise NonFiniteLoss(
                    f"training loss diverged at epoch {epoch}")
            loss_curve.append(epoch_loss)
            if epoch_loss < best_loss:
                best_loss = epoch_loss
                best_params = _snapshot(params)
                selected_epoch = epoch
            lr = scheduler.step(epoch_loss)
    except NonFiniteDetected as exc:
        raise NonFiniteLoss(f"non-finite value during epoch "
                            f"{len(loss_curve) + 1}: {exc}") from exc

    _restore(params, best_params)
    test_accuracy = accuracy(_predict(model, test),
                             [s.label for s in test])
    train_accuracy = accuracy(_predict(model, train),
                              [s.label for s in train])
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model, extra={
            "config": config.canonical(),
            "best_train_loss": best_loss,
            "selected_epoch": selected_epoch,
            "test_accuracy": test_accuracy,
        })
    return RunResult(config=config, test_accuracy=test_accuracy,
                     train_accuracy=train_accuracy,
                     best_train_loss=best_loss, loss_curve=loss_curve,
                     wall_seconds=time.perf_counter() - started,
                     selected_epoch=selected_epoch)

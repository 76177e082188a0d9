"""The five graph classifiers: ChebNet, GCN, GAT, STGCN, MEGAT.

All models share one recipe: a stack of graph layers (ReLU between layers,
identity after the last), mean pooling to a graph embedding, and an MLP
head with one hidden layer whose width equals the number of classes.
Static adjacency (cg/pcc/mi) enters as a constant; with the ael edge kind
the adjacency is recomputed differentiably from the node features on every
forward pass.

Laplacian-based models (ChebNet, GCN, STGCN) symmetrize the adjacency as
(A + A^T)/2 first; attention models (GAT, MEGAT) consume it as-is, with
static weights entering as a multiplicative modulation of the attention
softmax: alpha_ij proportional to A_ij * exp(f_ij).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .edge_features import EDGE_KINDS, AelParams, ael_forward
from .errors import (CacheInvalid, DimensionMismatch, IsolatedNode,
                     SeriesTooShort)

ARCHITECTURES = ("chebnet", "gcn", "gat", "stgcn", "megat")

CHECKPOINT_MAGIC = b"MTSM"
CHECKPOINT_VERSION = 1

LAMBDA_MAX_FALLBACK = 2.0


@dataclass
class ModelSpec:
    architecture: str
    num_nodes: int
    node_feature_dim: int
    num_classes: int
    layers: int = 3
    hidden: int = 128
    cheb_k: int = 3
    temporal_kernel: int = 3

    def __post_init__(self):
        self.architecture = self.architecture.lower()
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        for name in ("num_nodes", "node_feature_dim", "num_classes",
                     "layers", "hidden", "cheb_k", "temporal_kernel"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class GraphSample:
    """Model input: node features, optional static adjacency, class index."""

    nodes: Tensor
    adjacency: np.ndarray | None
    label: int
    cache: dict = field(default_factory=dict)


# -- graph operators -------------------------------------------------------


def normalized_laplacian(a: np.ndarray) -> np.ndarray:
    """I - D^{-1/2} A D^{-1/2} with zero-degree rows left as identity."""
    a = np.asarray(a, dtype=np.float64)
    d = a.sum(axis=1)
    with np.errstate(divide="ignore"):
        dinv = np.where(d > 0.0, 1.0 / np.sqrt(np.where(d > 0.0, d, 1.0)), 0.0)
    return np.eye(a.shape[0]) - dinv[:, None] * a * dinv[None, :]


def lambda_max(laplacian: np.ndarray, iters: int = 100,
               tol: float = 1e-6) -> float:
    """Largest Laplacian eigenvalue via power iteration on 100 steps.

    The start vector is uniform, which is permutation equivariant, so
    estimates agree across node relabelings.  On regular graphs the
    uniform vector spans the Laplacian nullspace and the iteration
    stalls immediately (e.g. a complete graph); stalled or unconverged
    runs fall back to the spectral upper bound 2.0.
    """
    l = np.asarray(laplacian, dtype=np.float64)
    v = np.full(l.shape[0], 1.0 / np.sqrt(l.shape[0]))
    for _ in range(iters):
        w = l @ v
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            return LAMBDA_MAX_FALLBACK
        w = w / norm
        # iterate distance bounds the Rayleigh error far more tightly
        # than the Rayleigh increment does near degenerate spectra
        if np.linalg.norm(w - v) < tol:
            return float(w @ (l @ w))
        v = w
    # an unconverged estimate may undershoot, which would push the
    # rescaled spectrum outside [-1, 1]; 2.0 is always a safe bound
    return LAMBDA_MAX_FALLBACK


def rescale_laplacian(laplacian: np.ndarray, lam: float) -> np.ndarray:
    """Map the spectrum from [0, lam] onto [-1, 1]: 2L/lam - I."""
    return 2.0 * laplacian / lam - np.eye(laplacian.shape[0])


def gcn_normalize(a: np.ndarray) -> np.ndarray:
    """Renormalization trick: D~^{-1/2} (A + I) D~^{-1/2}."""
    a_tilde = np.asarray(a, dtype=np.float64) + np.eye(a.shape[0])
    d = a_tilde.sum(axis=1)
    dinv = 1.0 / np.sqrt(d)  # d >= 1 because of the added self-loop
    return dinv[:, None] * a_tilde * dinv[None, :]


def _symmetrize_t(a: Tensor) -> Tensor:
    return (a + a.transpose()) * 0.5


def _gcn_normalize_t(a: Tensor) -> Tensor:
    m = a.shape[0]
    a_tilde = a + Tensor(np.eye(m))
    d = a_tilde.sum(axis=1, keepdims=True)
    dinv = (d.log() * -0.5).exp()
    return a_tilde * dinv * dinv.transpose()


def _laplacian_t(a: Tensor) -> Tensor:
    # rows of a symmetrized ael adjacency always have positive degree
    m = a.shape[0]
    d = a.sum(axis=1, keepdims=True)
    dinv = (d.log() * -0.5).exp()
    return Tensor(np.eye(m)) - a * dinv * dinv.transpose()


# -- layers ------------------------------------------------------------------


class ChebLayer:
    """Chebyshev spectral filter of order K on a rescaled Laplacian."""

    def __init__(self, rng, in_dim: int, out_dim: int, k: int):
        self.k = k
        self.thetas = [ad.kaiming_uniform(rng, (in_dim, out_dim), in_dim)
                       for _ in range(k)]

    def forward(self, h: Tensor, l_hat: Tensor) -> Tensor:
        # T_0 = I, T_1 = L, T_k = 2 L T_{k-1} - T_{k-2}
        t_prev, t_curr = None, h
        out = t_curr @ self.thetas[0]
        for k in range(1, self.k):
            if k == 1:
                t_prev, t_curr = t_curr, l_hat @ h
            else:
                t_prev, t_curr = t_curr, (l_hat @ t_curr) * 2.0 - t_prev
            out = out + t_curr @ self.thetas[k]
        return out


class GcnLayer:
    def __init__(self, rng, in_dim: int, out_dim: int):
        self.w = ad.kaiming_uniform(rng, (in_dim, out_dim), in_dim)

    def forward(self, h: Tensor, a_hat: Tensor) -> Tensor:
        return (a_hat @ h) @ self.w


class GatLayer:
    """Single-head graph attention with static-weight modulation.

    The logit is LeakyReLU(a_l . Wh_i + a_r . Wh_j); attention is
    alpha_ij = A_ij exp(f_ij - max_i f) / sum_j A_ij exp(f_ij - max_i f),
    which reduces to the plain softmax when A is all ones and stays
    differentiable in A for learned edges.  The shift is detached; the
    attention is shift-invariant so gradients are unaffected.
    """

    def __init__(self, rng, in_dim: int, out_dim: int):
        self.w = ad.kaiming_uniform(rng, (in_dim, out_dim), in_dim)
        self.a_l = ad.glorot_uniform(rng, (out_dim, 1), out_dim, 1)
        self.a_r = ad.glorot_uniform(rng, (out_dim, 1), out_dim, 1)
        self.last_attention: np.ndarray | None = None

    def _logits(self, wh: Tensor, extra: Tensor | None) -> Tensor:
        scores = wh @ self.a_l + (wh @ self.a_r).transpose()
        if extra is not None:
            scores = scores + extra
        return scores.leaky_relu(0.2)

    def _attend(self, wh: Tensor, logits: Tensor, adj: Tensor) -> Tensor:
        shift = Tensor(logits.data.max(axis=1, keepdims=True))
        weights = (logits - shift).exp() * adj
        denom = weights.sum(axis=1, keepdims=True)
        if np.any(denom.data <= 0.0):
            rows = np.nonzero(denom.data.ravel() <= 0.0)[0]
            raise IsolatedNode(
                f"adjacency rows {rows.tolist()} have no positive entries")
        alpha = weights / denom
        self.last_attention = alpha.data
        return alpha @ wh

    def forward(self, h: Tensor, adj: Tensor) -> Tensor:
        wh = h @ self.w
        return self._attend(wh, self._logits(wh, None), adj)


class MegatEdgeFeatures:
    """Edge tensor from two levels of cross-attention.

    A kernel-3 causal convolution over each node's feature vector,
    averaged over nodes, gives a global context G.  First level:
    u_i = X_i Wq (G Wk)^T (G Wv).  Second level between node pairs
    collapses to the scalar score s_ij = (u_i Wq) . (u_j Wk), and the
    edge vector is the mean of the two directed readings:
    e_ij = (s_ij * u_j Wv + s_ji * u_i Wv) / 2, shape (M, M, F).
    """

    def __init__(self, rng, feature_dim: int, kernel: int):
        f = feature_dim
        self.kernel = min(kernel, f)
        self.conv_w = ad.glorot_uniform(rng, (self.kernel, 1, f),
                                        self.kernel, self.kernel * f)
        self.conv_b = ad.zeros((f,), requires_grad=True)
        self.wq = ad.glorot_uniform(rng, (f, f), f, f)
        self.wk = ad.glorot_uniform(rng, (f, f), f, f)
        self.wv = ad.glorot_uniform(rng, (f, f), f, f)

    def forward(self, x: Tensor) -> Tensor:
        m, f = x.shape
        series = x.reshape(m, f, 1)
        g = ad.causal_conv1d(series, self.conv_w, self.conv_b).mean(axis=0)
        u = ((x @ self.wq) @ (g @ self.wk).transpose()) @ (g @ self.wv)
        scores = (u @ self.wq) @ (u @ self.wk).transpose()   # (M, M)
        values = u @ self.wv                                 # (M, F)
        sv = scores.reshape(m, m, 1) * values.reshape(1, m, f)
        vs = scores.transpose().reshape(m, m, 1) * values.reshape(m, 1, f)
        return (sv + vs) * 0.5


class MegatLayer(GatLayer):
    """GAT layer with the edge vector concatenated into the logit."""

    def __init__(self, rng, in_dim: int, out_dim: int):
        super().__init__(rng, in_dim, out_dim)
        self.w_e: Tensor | None = None
        self.a_e: Tensor | None = None

    def init_edge_path(self, rng, edge_dim: int, out_dim: int):
        self.w_e = ad.glorot_uniform(rng, (edge_dim, out_dim),
                                     edge_dim, out_dim)
        self.a_e = ad.glorot_uniform(rng, (out_dim, 1), out_dim, 1)

    def forward_with_edges(self, h: Tensor, adj: Tensor, e: Tensor) -> Tensor:
        m = h.shape[0]
        edge_dim = e.shape[2]
        wh = h @ self.w
        extra = ((e.reshape(m * m, edge_dim) @ self.w_e) @ self.a_e)
        return self._attend(wh, self._logits(wh, extra.reshape(m, m)), adj)


class StBlock:
    """Gated temporal conv, per-step graph conv, gated temporal conv."""

    def __init__(self, rng, in_ch: int, width: int, kernel: int):
        self.kernel = kernel
        self.t1_w = ad.glorot_uniform(rng, (kernel, in_ch, 2 * width),
                                      kernel * in_ch, kernel * 2 * width)
        self.t1_b = ad.zeros((2 * width,), requires_grad=True)
        self.t1_res = (ad.glorot_uniform(rng, (in_ch, width), in_ch, width)
                       if in_ch != width else None)
        self.s_w = ad.kaiming_uniform(rng, (width, width), width)
        self.t2_w = ad.glorot_uniform(rng, (kernel, width, 2 * width),
                                      kernel * width, kernel * 2 * width)
        self.t2_b = ad.zeros((2 * width,), requires_grad=True)
        self.width = width

    def _gated_conv(self, h: Tensor, w: Tensor, b: Tensor,
                    res_proj: Tensor | None) -> Tensor:
        conv = ad.causal_conv1d(h, w, b)
        res = h[:, self.kernel - 1:, :]
        if res_proj is not None:
            res = res @ res_proj
        c = self.width
        # Eq-style gate: (P + H) * sigmoid(Q)
        return (conv[:, :, :c] + res) * conv[:, :, c:].sigmoid()

    def forward(self, h: Tensor, a_hat: Tensor) -> Tensor:
        h = self._gated_conv(h, self.t1_w, self.t1_b, self.t1_res)
        spatial = (a_hat @ h.transpose((1, 0, 2))) @ self.s_w
        h = spatial.transpose((1, 0, 2)).relu()
        return self._gated_conv(h, self.t2_w, self.t2_b, None)


class Mlp:
    """Readout head: one hidden layer as wide as the class count."""

    def __init__(self, rng, in_dim: int, num_classes: int):
        c = num_classes
        self.w1 = ad.glorot_uniform(rng, (in_dim, c), in_dim, c)
        self.b1 = ad.zeros((c,), requires_grad=True)
        self.w2 = ad.glorot_uniform(rng, (c, c), c, c)
        self.b2 = ad.zeros((c,), requires_grad=True)

    def forward(self, v: Tensor) -> Tensor:
        hidden = (v.reshape(1, -1) @ self.w1 + self.b1).relu()
        return (hidden @ self.w2 + self.b2).reshape(-1)


# -- models ------------------------------------------------------------------


class GraphClassifier:
    """Shared scaffolding: parameter registry, input checks, readout."""

    def __init__(self, spec: ModelSpec, edge_kind: str):
        if edge_kind not in EDGE_KINDS:
            raise ValueError(f"unknown edge kind {edge_kind!r}")
        self.spec = spec
        self.edge_kind = edge_kind
        self._named: list[tuple[str, Tensor]] = []
        self.ael: AelParams | None = None

    def _add(self, name: str, tensor: Tensor) -> Tensor:
        self._named.append((name, tensor))
        return tensor

    def _add_all(self, prefix: str, obj) -> None:
        for attr, value in vars(obj).items():
            if isinstance(value, Tensor) and value.requires_grad:
                self._add(f"{prefix}.{attr}", value)
            elif isinstance(value, list) and value and \
                    all(isinstance(v, Tensor) for v in value):
                for i, v in enumerate(value):
                    self._add(f"{prefix}.{attr}{i}", v)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self._named)

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self._named]

    def _init_ael(self, rng) -> None:
        if self.edge_kind == "ael":
            weight = ad.kaiming_uniform(rng, (self.spec.node_feature_dim,),
                                        self.spec.node_feature_dim)
            self.ael = AelParams(weight=self._add("ael.weight", weight))

    def _check_sample(self, sample: GraphSample) -> Tensor:
        m, f = self.spec.num_nodes, self.spec.node_feature_dim
        if sample.nodes.shape != (m, f):
            raise DimensionMismatch(
                f"sample nodes have shape {sample.nodes.shape}, model "
                f"expects ({m}, {f})")
        if self.edge_kind != "ael":
            if sample.adjacency is None:
                raise DimensionMismatch(
                    f"edge kind {self.edge_kind!r} needs a static adjacency")
            if sample.adjacency.shape != (m, m):
                raise DimensionMismatch(
                    f"adjacency has shape {sample.adjacency.shape}, "
                    f"expected ({m}, {m})")
        return sample.nodes

    def _adjacency(self, sample: GraphSample, x: Tensor) -> Tensor:
        if self.edge_kind == "ael":
            return ael_forward(x, self.ael)
        return Tensor(sample.adjacency)

    def forward(self, sample: GraphSample) -> Tensor:
        raise NotImplementedError

    def _head(self, rng) -> None:
        self.mlp = Mlp(rng, self.spec.hidden, self.spec.num_classes)
        self._add_all("mlp", self.mlp)


class ChebNet(GraphClassifier):
    def __init__(self, spec: ModelSpec, edge_kind: str, rng):
        super().__init__(spec, edge_kind)
        dims = [spec.node_feature_dim] + [spec.hidden] * spec.layers
        self.layers = [ChebLayer(rng, dims[i], dims[i + 1], spec.cheb_k)
                       for i in range(spec.layers)]
        for i, layer in enumerate(self.layers):
            self._add_all(f"layer{i}", layer)
        self._head(rng)
        self._init_ael(rng)

    def _rescaled(self, sample: GraphSample, x: Tensor) -> Tensor:
        if self.edge_kind == "ael":
            adj = _symmetrize_t(ael_forward(x, self.ael))
            lap = _laplacian_t(adj)
            lam = lambda_max(lap.data)
            return lap * (2.0 / lam) - Tensor(np.eye(adj.shape[0]))
        if "cheb" not in sample.cache:
            sym = (sample.adjacency + sample.adjacency.T) / 2.0
            lap = normalized_laplacian(sym)
            sample.cache["cheb"] = rescale_laplacian(lap, lambda_max(lap))
        return Tensor(sample.cache["cheb"])

    def forward(self, sample: GraphSample) -> Tensor:
        x = self._check_sample(sample)
        l_hat = self._rescaled(sample, x)
        h = x
        for i, layer in enumerate(self.layers):
            h = layer.forward(h, l_hat)
            if i < len(self.layers) - 1:
                h = h.relu()
        return self.mlp.forward(h.mean(axis=0))


class Gcn(GraphClassifier):
    def __init__(self, spec: ModelSpec, edge_kind: str, rng):
        super().__init__(spec, edge_kind)
        dims = [spec.node_feature_dim] + [spec.hidden] * spec.layers
        self.layers = [GcnLayer(rng, dims[i], dims[i + 1])
                       for i in range(spec.layers)]
        for i, layer in enumerate(self.layers):
            self._add_all(f"layer{i}", layer)
        self._head(rng)
        self._init_ael(rng)

    def _a_hat(self, sample: GraphSample, x: Tensor) -> Tensor:
        if self.edge_kind == "ael":
            return _gcn_normalize_t(_symmetrize_t(ael_forward(x, self.ael)))
        if "gcn" not in sample.cache:
            sym = (sample.adjacency + sample.adjacency.T) / 2.0
            sample.cache["gcn"] = gcn_normalize(sym)
        return Tensor(sample.cache["gcn"])

    def forward(self, sample: GraphSample) -> Tensor:
        x = self._check_sample(sample)
        a_hat = self._a_hat(sample, x)
        h = x
        for i, layer in enumerate(self.layers):
            h = layer.forward(h, a_hat)
            if i < len(self.layers) - 1:
                h = h.relu()
        return self.mlp.forward(h.mean(axis=0))


class Gat(GraphClassifier):
    layer_cls = GatLayer

    def __init__(self, spec: ModelSpec, edge_kind: str, rng):
        super().__init__(spec, edge_kind)
        dims = [spec.node_feature_dim] + [spec.hidden] * spec.layers
        self.layers = [self.layer_cls(rng, dims[i], dims[i + 1])
                       for i in range(spec.layers)]
        for i, layer in enumerate(self.layers):
            self._add(f"layer{i}.w", layer.w)
            self._add(f"layer{i}.a_l", layer.a_l)
            self._add(f"layer{i}.a_r", layer.a_r)
        self._head(rng)
        self._init_ael(rng)

    def _check_isolation(self, sample: GraphSample) -> None:
        if self.edge_kind != "ael" and \
                np.any(sample.adjacency.sum(axis=1) <= 0.0):
            raise IsolatedNode(
                "static adjacency has an all-zero row; attention cannot "
                "normalize over an empty neighborhood")

    def forward(self, sample: GraphSample) -> Tensor:
        x = self._check_sample(sample)
        self._check_isolation(sample)
        adj = self._adjacency(sample, x)
        h = x
        for i, layer in enumerate(self.layers):
            h = layer.forward(h, adj)
            if i < len(self.layers) - 1:
                h = h.relu()
        return self.mlp.forward(h.mean(axis=0))


class Megat(Gat):
    layer_cls = MegatLayer

    def __init__(self, spec: ModelSpec, edge_kind: str, rng):
        # the GAT constructor draws first so shared parameters are
        # bit-identical under a shared seed; edge-path extras come after
        super().__init__(spec, edge_kind, rng)
        self.edge_module = MegatEdgeFeatures(rng, spec.node_feature_dim,
                                             spec.temporal_kernel)
        self._add_all("edge", self.edge_module)
        for i, layer in enumerate(self.layers):
            layer.init_edge_path(rng, spec.node_feature_dim, spec.hidden)
            self._add(f"layer{i}.w_e", layer.w_e)
            self._add(f"layer{i}.a_e", layer.a_e)

    def edge_tensor(self, x: Tensor) -> Tensor:
        return self.edge_module.forward(x)

    def forward(self, sample: GraphSample) -> Tensor:
        x = self._check_sample(sample)
        self._check_isolation(sample)
        adj = self._adjacency(sample, x)
        e = self.edge_tensor(x)
        h = x
        for i, layer in enumerate(self.layers):
            h = layer.forward_with_edges(h, adj, e)
            if i < len(self.layers) - 1:
                h = h.relu()
        return self.mlp.forward(h.mean(axis=0))


class Stgcn(GraphClassifier):
    """Spatio-temporal blocks over features lifted to (M, T, 1).

    Each block consumes 2*(K_t - 1) time steps, so the block count is
    capped at what the feature length can feed; at least one block must
    fit or the input is too short.
    """

    def __init__(self, spec: ModelSpec, edge_kind: str, rng):
        super().__init__(spec, edge_kind)
        k = spec.temporal_kernel
        t = spec.node_feature_dim
        blocks = 0
        while blocks < spec.layers and t >= 2 * k - 1:
            blocks += 1
            t -= 2 * (k - 1)
        if blocks == 0:
            raise SeriesTooShort(
                f"feature length {spec.node_feature_dim} cannot feed one "
                f"block with kernel {k} (needs >= {2 * k - 1})")
        self.blocks = [StBlock(rng, 1 if i == 0 else spec.hidden,
                               spec.hidden, k) for i in range(blocks)]
        for i, block in enumerate(self.blocks):
            self._add_all(f"block{i}", block)
        self._head(rng)
        self._init_ael(rng)

    def _a_hat(self, sample: GraphSample, x: Tensor) -> Tensor:
        if self.edge_kind == "ael":
            return _gcn_normalize_t(_symmetrize_t(ael_forward(x, self.ael)))
        if "gcn" not in sample.cache:
            sym = (sample.adjacency + sample.adjacency.T) / 2.0
            sample.cache["gcn"] = gcn_normalize(sym)
        return Tensor(sample.cache["gcn"])

    def forward(self, sample: GraphSample) -> Tensor:
        x = self._check_sample(sample)
        a_hat = self._a_hat(sample, x)
        m, f = x.shape
        h = x.reshape(m, f, 1)
        for block in self.blocks:
            h = block.forward(h, a_hat)
        return self.mlp.forward(h.mean(axis=(0, 1)))


_MODEL_CLASSES = {
    "chebnet": ChebNet,
    "gcn": Gcn,
    "gat": Gat,
    "stgcn": Stgcn,
    "megat": Megat,
}


def build_model(spec: ModelSpec, edge_kind: str,
                rng: np.random.Generator) -> GraphClassifier:
    """Instantiate the classifier named by ``spec.architecture``."""
    return _MODEL_CLASSES[spec.architecture](spec, edge_kind, rng)


def classify(model: GraphClassifier, sample: GraphSample) -> Tensor:
    """Class logits, length C."""
    return model.forward(sample)


# -- checkpoints ------------------------------------------------------------


def save_checkpoint(path: str | Path, model: GraphClassifier,
                    extra: dict | None = None) -> None:
    """Write spec, edge kind, and all parameters to a versioned binary."""
    spec = model.spec
    header = {
        "architecture": spec.architecture,
        "num_nodes": spec.num_nodes,
        "node_feature_dim": spec.node_feature_dim,
        "num_classes": spec.num_classes,
        "layers": spec.layers,
        "hidden": spec.hidden,
        "cheb_k": spec.cheb_k,
        "temporal_kernel": spec.temporal_kernel,
        "edge_kind": model.edge_kind,
        "params": [name for name, _ in model.named_parameters()],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(struct.pack("<H", CHECKPOINT_VERSION))
        handle.write(struct.pack("<I", len(blob)))
        handle.write(blob)
        for _, tensor in model.named_parameters():
            np.save(handle, tensor.data)


def load_checkpoint(path: str | Path) -> tuple[ModelSpec, str,
                                               dict[str, np.ndarray], dict]:
    """Read back (spec, edge_kind, named parameter arrays, extra)."""
    try:
        with open(path, "rb") as handle:
            magic = handle.read(4)
            if magic != CHECKPOINT_MAGIC:
                raise CacheInvalid(f"{path}: bad checkpoint magic {magic!r}")
            (version,) = struct.unpack("<H", handle.read(2))
            if version != CHECKPOINT_VERSION:
                raise CacheInvalid(
                    f"{path}: unsupported checkpoint version {version}")
            (hlen,) = struct.unpack("<I", handle.read(4))
            header = json.loads(handle.read(hlen).decode("utf-8"))
            params = {name: np.load(handle) for name in header["params"]}
    except CacheInvalid:
        raise
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CacheInvalid(f"{path}: unreadable checkpoint ({exc})") from exc
    spec = ModelSpec(
        architecture=header["architecture"],
        num_nodes=header["num_nodes"],
        node_feature_dim=header["node_feature_dim"],
        num_classes=header["num_classes"],
        layers=header["layers"],
        hidden=header["hidden"],
        cheb_k=header["cheb_k"],
        temporal_kernel=header["temporal_kernel"],
    )
    return spec, header["edge_kind"], params, header.get("extra", {})


def restore_model(path: str | Path) -> tuple[GraphClassifier, dict]:
    """Rebuild a model from a checkpoint, parameters included."""
    spec, edge_kind, params, extra = load_checkpoint(path)
    model = build_model(spec, edge_kind, np.random.default_rng(0))
    for name, tensor in model.named_parameters():
        if name not in params:
            raise CacheInvalid(f"{path}: checkpoint lacks parameter {name}")
        if params[name].shape != tensor.shape:
            raise CacheInvalid(
                f"{path}: parameter {name} has shape {params[name].shape}, "
                f"model expects {tensor.shape}")
        tensor.data[...] = params[name]
    return model, extra

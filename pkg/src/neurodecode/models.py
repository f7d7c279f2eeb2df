"""Decoder architectures, size presets, parameter audit, checkpoints.

Five trainable decoders share one small Module convention: parameters
are registered in construction order under stable dotted names, batch
norm running statistics live in named buffers, and ``forward`` takes a
plain float numpy batch.  Each architecture comes in three presets
(small / medium / large); preset hyperparameters were chosen so every
(architecture, size) cell lands within the +/-30% budget around its
target parameter count, checked by :func:`audit_params`.

Shapes: convolutional models consume (batch, 1, channels, time) maps,
sequence models (batch, time, channels), the graph model treats the
channels as nodes carrying their time course as features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import eegb
from .autodiff import Parameter, Tensor, constant, no_grad, ops
from .errors import DataError, MetaMismatchError, UsageError

N_CLASSES = 2

ARCHITECTURES = ("eegnet", "lstm", "dgcnn", "transformer", "conformer")
SIZES = ("small", "medium", "large")

# Target parameter counts per (architecture, size); the audit enforces
# actual counts within +/-30% of these.
PARAM_TARGETS: dict[tuple[str, str], int] = {
    ("eegnet", "small"): 1888,
    ("eegnet", "medium"): 11504,
    ("eegnet", "large"): 132096,
    ("lstm", "small"): 3902,
    ("lstm", "medium"): 98402,
    ("lstm", "large"): 1161002,
    ("dgcnn", "small"): 12527,
    ("dgcnn", "medium"): 107563,
    ("dgcnn", "large"): 1049763,
    ("transformer", "small"): 3090,
    ("transformer", "medium"): 141866,
    ("transformer", "large"): 1144834,
    ("conformer", "small"): 36026,
    ("conformer", "medium"): 164906,
    ("conformer", "large"): 1404946,
}

PARAM_TOLERANCE = 0.30

DROPOUT_BY_SIZE = {"small": 0.25, "medium": 0.5, "large": 0.75}

EEGNET_SIZES = {
    "small": dict(f1=8, depth=2, f2=16),
    "medium": dict(f1=16, depth=4, f2=64),
    "large": dict(f1=32, depth=8, f2=320),
}
LSTM_SIZES = {
    "small": dict(hidden=13, layers=1),
    "medium": dict(hidden=80, layers=2),
    "large": dict(hidden=224, layers=3),
}
DGCNN_SIZES = {
    "small": dict(k=2, hidden=32, layers=1, node_dense=64),
    "medium": dict(k=2, hidden=160, layers=2, node_dense=160),
    "large": dict(k=3, hidden=512, layers=2, node_dense=512),
}
TRANSFORMER_SIZES = {
    "small": dict(d_model=16, heads=2, layers=1, ffn=32),
    "medium": dict(d_model=64, heads=4, layers=3, ffn=128),
    "large": dict(d_model=128, heads=8, layers=5, ffn=512),
}
CONFORMER_SIZES = {
    "small": dict(f=10, layers=1, heads=2, head_hidden=112),
    "medium": dict(f=40, layers=2, heads=4, head_hidden=24),
    "large": dict(f=40, layers=6, heads=4, head_hidden=1024),
}


class Model:
    """Base: parameter/buffer registry, init rng, dropout rng."""

    arch = ""

    def __init__(
        self,
        size: str,
        seed: int = 0,
        dropout: float | None = None,
        n_classes: int = N_CLASSES,
        n_channels: int = 63,
        n_samples: int = 50,
    ):
        if size not in SIZES:
            raise UsageError(f"unknown size {size!r}; choose from {SIZES}")
        self.size = size
        self.seed = seed
        self.dropout = DROPOUT_BY_SIZE[size] if dropout is None else float(dropout)
        if not 0.0 <= self.dropout < 1.0:
            raise UsageError(f"dropout must be in [0, 1), got {self.dropout}")
        self.n_classes = n_classes
        self.n_channels = n_channels
        self.n_samples = n_samples
        init_ss, drop_ss = np.random.SeedSequence(seed).spawn(2)
        self._init_rng = np.random.default_rng(init_ss)
        self.dropout_rng = np.random.default_rng(drop_ss)
        self._params: list[tuple[str, Parameter]] = []
        self._buffers: list[tuple[str, np.ndarray]] = []

    # -- registry -------------------------------------------------------

    def _register(self, name: str, array: np.ndarray) -> Parameter:
        if any(n == name for n, _ in self._params):
            raise UsageError(f"duplicate parameter name {name!r}")
        p = Parameter(array.astype(np.float32), name=name)
        self._params.append((name, p))
        return p

    def _uniform(self, name: str, shape: tuple[int, ...], fan_in: int) -> Parameter:
        bound = 1.0 / np.sqrt(fan_in)
        return self._register(name, self._init_rng.uniform(-bound, bound, size=shape))

    def _buffer(self, name: str, array: np.ndarray) -> np.ndarray:
        self._buffers.append((name, array))
        return array

    def named_params(self) -> list[tuple[str, Parameter]]:
        return list(self._params)

    def params(self) -> list[Parameter]:
        return [p for _, p in self._params]

    def named_buffers(self) -> list[tuple[str, np.ndarray]]:
        return list(self._buffers)

    @property
    def n_params(self) -> int:
        return sum(p.data.size for _, p in self._params)

    @property
    def dtype(self):
        return self._params[0][1].data.dtype

    def zero_grad(self) -> None:
        for _, p in self._params:
            p.grad = None

    def to_float64(self) -> None:
        """Cast parameters in place; gradient checks require this."""
        for _, p in self._params:
            p.astype(np.float64)

    # -- shared pieces ---------------------------------------------------

    def _drop(self, t: Tensor, training: bool, gradcheck: bool) -> Tensor:
        if gradcheck or not training or self.dropout == 0.0:
            return t
        return ops.dropout(t, self.dropout, self.dropout_rng, True)

    def _input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 3 or x.shape[1] != self.n_channels or x.shape[2] != self.n_samples:
            raise DataError(
                f"{self.arch} expects (batch, {self.n_channels}, {self.n_samples}) input, "
                f"got {x.shape}"
            )
        return x.astype(self.dtype, copy=False)

    def forward(self, x: np.ndarray, training: bool, gradcheck: bool = False) -> Tensor:
        raise NotImplementedError

    def loss(self, x: np.ndarray, y: np.ndarray, training: bool, gradcheck: bool = False):
        """Returns (mean cross-entropy Tensor, logits Tensor)."""
        logits = self.forward(x, training, gradcheck)
        return ops.cross_entropy(logits, y), logits

    def predict(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Class predictions in evaluation mode, without building a tape."""
        out = []
        with no_grad():
            for start in range(0, len(x), batch_size):
                logits = self.forward(x[start : start + batch_size], training=False)
                out.append(np.argmax(logits.data, axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def descriptor(self) -> dict:
        return {
            "arch": self.arch,
            "size": self.size,
            "seed": self.seed,
            "dropout": self.dropout,
            "n_classes": self.n_classes,
            "n_channels": self.n_channels,
            "n_samples": self.n_samples,
        }


class _BatchNorm:
    """Parameter pair plus float64 running buffers, registered on a model.

    ``affine=False`` registers no parameters; required when the norm's
    output reaches another norm through purely linear ops, where the
    affine pair could never train.
    """

    def __init__(self, model: Model, n: int, name: str, affine: bool = True):
        if affine:
            self.gamma = model._register(f"{name}.gamma", np.ones(n))
            self.beta = model._register(f"{name}.beta", np.zeros(n))
        else:
            self.gamma = None
            self.beta = None
        self.running_mean = model._buffer(f"{name}.running_mean", np.zeros(n, dtype=np.float64))
        self.running_var = model._buffer(f"{name}.running_var", np.ones(n, dtype=np.float64))

    def __call__(self, x: Tensor, training: bool, gradcheck: bool) -> Tensor:
        return ops.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            training=training,
            update_running=training and not gradcheck,
        )


class _LayerNorm:
    def __init__(self, model: Model, n: int, name: str):
        self.gamma = model._register(f"{name}.gamma", np.ones(n))
        self.beta = model._register(f"{name}.beta", np.zeros(n))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta)


class _EncoderBlock:
    """Post-norm transformer block: attention + position-wise FFN.

    ``ffn_act`` selects the feed-forward nonlinearity, so each model
    can keep its own activation convention across layers.
    """

    def __init__(
        self, model: Model, d_model: int, n_heads: int, ffn: int, name: str, ffn_act=ops.relu
    ):
        self.n_heads = n_heads
        self.ffn_act = ffn_act
        self.w_q = model._uniform(f"{name}.attn.wq", (d_model, d_model), d_model)
        self.b_q = model._uniform(f"{name}.attn.bq", (d_model,), d_model)
        # no key bias: the softmax cancels it, leaving a dead parameter
        self.w_k = model._uniform(f"{name}.attn.wk", (d_model, d_model), d_model)
        self.w_v = model._uniform(f"{name}.attn.wv", (d_model, d_model), d_model)
        self.b_v = model._uniform(f"{name}.attn.bv", (d_model,), d_model)
        self.w_o = model._uniform(f"{name}.attn.wo", (d_model, d_model), d_model)
        self.b_o = model._uniform(f"{name}.attn.bo", (d_model,), d_model)
        self.ln1 = _LayerNorm(model, d_model, f"{name}.ln1")
        self.w_f1 = model._uniform(f"{name}.ffn.w1", (d_model, ffn), d_model)
        self.b_f1 = model._uniform(f"{name}.ffn.b1", (ffn,), d_model)
        self.w_f2 = model._uniform(f"{name}.ffn.w2", (ffn, d_model), ffn)
        self.b_f2 = model._uniform(f"{name}.ffn.b2", (d_model,), ffn)
        self.ln2 = _LayerNorm(model, d_model, f"{name}.ln2")

    def __call__(self, model: Model, h: Tensor, training: bool, gradcheck: bool) -> Tensor:
        attn = ops.multi_head_attention(
            h,
            self.w_q, self.b_q,
            self.w_k,
            self.w_v, self.b_v,
            self.w_o, self.b_o,
            self.n_heads,
        )
        h = self.ln1(ops.add(h, model._drop(attn, training, gradcheck)))
        ff = ops.dense(h, self.w_f1, self.b_f1)
        ff = model._drop(self.ffn_act(ff), training, gradcheck)
        ff = ops.dense(ff, self.w_f2, self.b_f2)
        return self.ln2(ops.add(h, model._drop(ff, training, gradcheck)))


class EEGNet(Model):
    """Compact convolutional decoder: temporal filters, spatial filters,
    separable temporal refinement, two pooling stages."""

    arch = "eegnet"
    TEMPORAL_KERNEL = 25
    SEPARABLE_KERNEL = 16

    def __init__(self, **kw):
        super().__init__(**kw)
        c = EEGNET_SIZES[self.size]
        f1, depth, f2 = c["f1"], c["depth"], c["f2"]
        self.f1, self.depth, self.f2 = f1, depth, f2
        k = self.TEMPORAL_KERNEL
        self.w_temporal = self._uniform("temporal.w", (f1, 1, k), k)
        # bn1 -> spatial conv -> bn2 is a linear sandwich: bn2 undoes
        # any affine bn1 could apply, so bn1 runs without one
        self.bn1 = _BatchNorm(self, f1, "bn1", affine=False)
        self.w_spatial = self._uniform("spatial.w", (f1, depth, self.n_channels), self.n_channels)
        self.bn2 = _BatchNorm(self, f1 * depth, "bn2")
        ks = self.SEPARABLE_KERNEL
        self.w_sep_depth = self._uniform("separable.depth", (f1 * depth, ks), ks)
        self.w_sep_point = self._uniform("separable.point", (f2, f1 * depth), f1 * depth)
        self.bn3 = _BatchNorm(self, f2, "bn3")
        self.w_head = self._uniform("head.w", (f2, self.n_classes), f2)
        self.b_head = self._uniform("head.b", (self.n_classes,), f2)

    def forward(self, x, training, gradcheck=False):
        x = self._input(x)
        h = constant(x[:, None, :, :])
        h = ops.conv_temporal(h, self.w_temporal)
        h = self.bn1(h, training, gradcheck)
        h = ops.conv_spatial_depthwise(h, self.w_spatial)
        h = self.bn2(h, training, gradcheck)
        h = ops.elu(h)
        h = ops.avg_pool_time(h, 4)
        h = self._drop(h, training, gradcheck)
        h = ops.separable_conv(h, self.w_sep_depth, self.w_sep_point)
        h = self.bn3(h, training, gradcheck)
        h = ops.elu(h)
        h = ops.avg_pool_time(h, 8)
        h = self._drop(h, training, gradcheck)
        h = ops.reshape(h, (x.shape[0], self.f2))
        return ops.dense(h, self.w_head, self.b_head)


class LstmNet(Model):
    """Stacked LSTM over the channel vector sequence; last hidden state
    feeds the classification head."""

    arch = "lstm"

    def __init__(self, **kw):
        super().__init__(**kw)
        c = LSTM_SIZES[self.size]
        self.hidden, self.layers = c["hidden"], c["layers"]
        self.cells = []
        for layer in range(self.layers):
            in_dim = self.n_channels if layer == 0 else self.hidden
            self.cells.append(
                (
                    self._uniform(f"lstm{layer}.w_ih", (in_dim, 4 * self.hidden), in_dim),
                    self._uniform(f"lstm{layer}.w_hh", (self.hidden, 4 * self.hidden), self.hidden),
                    self._uniform(f"lstm{layer}.b", (4 * self.hidden,), self.hidden),
                )
            )
        self.w_head = self._uniform("head.w", (self.hidden, self.n_classes), self.hidden)
        self.b_head = self._uniform("head.b", (self.n_classes,), self.hidden)

    def forward(self, x, training, gradcheck=False):
        x = self._input(x)
        h = constant(np.ascontiguousarray(x.transpose(0, 2, 1)))
        for layer, (w_ih, w_hh, b) in enumerate(self.cells):
            h = ops.lstm_layer(h, w_ih, w_hh, b)
            if layer + 1 < self.layers:
                h = self._drop(h, training, gradcheck)
        last = ops.reshape(
            ops.narrow(h, 1, self.n_samples - 1, 1), (x.shape[0], self.hidden)
        )
        last = self._drop(last, training, gradcheck)
        return ops.dense(last, self.w_head, self.b_head)


class Dgcnn(Model):
    """Chebyshev graph convolutions over a learned channel graph.

    One adjacency is shared by every layer.  The spectral radius of its
    Laplacian is re-estimated each forward pass; gradient checks pin the
    estimate once so the differenced function is smooth.
    """

    arch = "dgcnn"

    def __init__(self, **kw):
        super().__init__(**kw)
        c = DGCNN_SIZES[self.size]
        self.k, self.hidden, self.layers = c["k"], c["hidden"], c["layers"]
        self.node_dense = c["node_dense"]
        adj = self._init_rng.uniform(0.01, 0.05, size=(self.n_channels, self.n_channels))
        np.fill_diagonal(adj, 0.0)
        self.adj = self._register("adjacency", adj)
        self.cheb: list[tuple[list[Parameter], Parameter]] = []
        for layer in range(self.layers):
            in_dim = self.n_samples if layer == 0 else self.hidden
            thetas = [
                self._uniform(f"cheb{layer}.theta{j}", (in_dim, self.hidden), in_dim)
                for j in range(self.k)
            ]
            bias = self._uniform(f"cheb{layer}.b", (self.hidden,), in_dim)
            self.cheb.append((thetas, bias))
        self.w_node = self._uniform("node.w", (self.hidden, self.node_dense), self.hidden)
        self.b_node = self._uniform("node.b", (self.node_dense,), self.hidden)
        self.w_head = self._uniform("head.w", (self.node_dense, self.n_classes), self.node_dense)
        self.b_head = self._uniform("head.b", (self.n_classes,), self.node_dense)
        self._pinned_lam: float | None = None

    def forward(self, x, training, gradcheck=False):
        x = self._input(x)
        lam = None
        if gradcheck:
            if self._pinned_lam is None:
                self._pinned_lam = ops.laplacian_spectral_radius(self.adj.data)
            lam = self._pinned_lam
        h = constant(x)
        for thetas, bias in self.cheb:
            h = ops.relu(ops.chebyshev_graph_conv(h, thetas, self.adj, bias, lam_max=lam))
        h = ops.relu(ops.dense(h, self.w_node, self.b_node))
        h = ops.mean_axis(h, axis=1)
        h = self._drop(h, training, gradcheck)
        return ops.dense(h, self.w_head, self.b_head)


class TransformerNet(Model):
    """Encoder-only transformer over the time axis with mean pooling."""

    arch = "transformer"

    def __init__(self, **kw):
        super().__init__(**kw)
        c = TRANSFORMER_SIZES[self.size]
        self.d_model, self.heads = c["d_model"], c["heads"]
        self.layers, self.ffn = c["layers"], c["ffn"]
        self.w_in = self._uniform("input.w", (self.n_channels, self.d_model), self.n_channels)
        self.b_in = self._uniform("input.b", (self.d_model,), self.n_channels)
        self.blocks = [
            _EncoderBlock(self, self.d_model, self.heads, self.ffn, f"block{i}")
            for i in range(self.layers)
        ]
        self.w_head = self._uniform("head.w", (self.d_model, self.n_classes), self.d_model)
        self.b_head = self._uniform("head.b", (self.n_classes,), self.d_model)

    def forward(self, x, training, gradcheck=False):
        x = self._input(x)
        seq = constant(np.ascontiguousarray(x.transpose(0, 2, 1)))
        h = ops.dense(seq, self.w_in, self.b_in)
        pe = ops.sinusoidal_positions(self.n_samples, self.d_model, dtype=self.dtype)
        h = ops.add(h, pe)
        h = self._drop(h, training, gradcheck)
        for block in self.blocks:
            h = block(self, h, training, gradcheck)
        pooled = ops.mean_axis(h, axis=1)
        return ops.dense(pooled, self.w_head, self.b_head)


class Conformer(Model):
    """Convolutional front end feeding an encoder stack and a wide head.

    The temporal/spatial convolutions tokenize the epoch into 25 tokens
    of width F; the flattened encoder output passes through one hidden
    head layer.
    """

    arch = "conformer"
    TEMPORAL_KERNEL = 25
    POOL = 2

    def __init__(self, **kw):
        super().__init__(**kw)
        c = CONFORMER_SIZES[self.size]
        self.f, self.layers = c["f"], c["layers"]
        self.heads, self.head_hidden = c["heads"], c["head_hidden"]
        k = self.TEMPORAL_KERNEL
        f = self.f
        # the conv stack feeds batch norm, which subtracts any
        # per-channel constant, so conv biases here would never train
        self.w_temporal = self._uniform("temporal.w", (f, 1, k), k)
        fan = f * self.n_channels
        self.w_spatial = self._uniform("spatial.w", (f, fan), fan)
        self.bn = _BatchNorm(self, f, "bn")
        self.blocks = [
            # elu throughout, matching the conv stack and the head
            _EncoderBlock(self, f, self.heads, 4 * f, f"block{i}", ffn_act=ops.elu)
            for i in range(self.layers)
        ]
        self.n_tokens = self.n_samples // self.POOL
        flat = self.n_tokens * f
        self.w_h1 = self._uniform("head.w1", (flat, self.head_hidden), flat)
        self.b_h1 = self._uniform("head.b1", (self.head_hidden,), flat)
        self.w_h2 = self._uniform("head.w2", (self.head_hidden, self.n_classes), self.head_hidden)
        self.b_h2 = self._uniform("head.b2", (self.n_classes,), self.head_hidden)

    def forward(self, x, training, gradcheck=False):
        x = self._input(x)
        B = x.shape[0]
        h = constant(x[:, None, :, :])
        h = ops.conv_temporal(h, self.w_temporal)
        # full spatial convolution: flatten (feature, channel) and mix as 1x1
        h = ops.reshape(h, (B, self.f * self.n_channels, 1, self.n_samples))
        h = ops.pointwise_conv(h, self.w_spatial)
        h = self.bn(h, training, gradcheck)
        h = ops.elu(h)
        h = ops.avg_pool_time(h, self.POOL)
        h = self._drop(h, training, gradcheck)
        tokens = ops.transpose(ops.reshape(h, (B, self.f, self.n_tokens)), (0, 2, 1))
        pe = ops.sinusoidal_positions(self.n_tokens, self.f, dtype=self.dtype)
        tokens = ops.add(tokens, pe)
        for block in self.blocks:
            tokens = block(self, tokens, training, gradcheck)
        flat = ops.reshape(tokens, (B, self.n_tokens * self.f))
        head = ops.elu(ops.dense(flat, self.w_h1, self.b_h1))
        head = self._drop(head, training, gradcheck)
        return ops.dense(head, self.w_h2, self.b_h2)


_ARCH_CLASSES = {
    "eegnet": EEGNet,
    "lstm": LstmNet,
    "dgcnn": Dgcnn,
    "transformer": TransformerNet,
    "conformer": Conformer,
}


def build_model(
    arch: str,
    size: str,
    seed: int = 0,
    dropout: float | None = None,
    n_classes: int = N_CLASSES,
    n_channels: int = 63,
    n_samples: int = 50,
) -> Model:
    if arch not in _ARCH_CLASSES:
        raise UsageError(f"unknown architecture {arch!r}; choose from {ARCHITECTURES}")
    return _ARCH_CLASSES[arch](
        size=size,
        seed=seed,
        dropout=dropout,
        n_classes=n_classes,
        n_channels=n_channels,
        n_samples=n_samples,
    )


@dataclass
class AuditRow:
    arch: str
    size: str
    params: int
    target: int
    deviation: float

    @property
    def within_budget(self) -> bool:
        return abs(self.deviation) <= PARAM_TOLERANCE


def audit_params() -> list[AuditRow]:
    """Instantiate every (architecture, size) cell and compare budgets."""
    rows = []
    for arch in ARCHITECTURES:
        for size in SIZES:
            model = build_model(arch, size, seed=0)
            target = PARAM_TARGETS[(arch, size)]
            count = model.n_params
            rows.append(
                AuditRow(
                    arch=arch,
                    size=size,
                    params=count,
                    target=target,
                    deviation=(count - target) / target,
                )
            )
    return rows


def format_audit(rows: list[AuditRow]) -> str:
    lines = [f"{'arch':<12} {'size':<7} {'params':>9} {'target':>9} {'dev':>8}  budget"]
    for r in rows:
        flag = "ok" if r.within_budget else "OVER"
        lines.append(
            f"{r.arch:<12} {r.size:<7} {r.params:>9} {r.target:>9} {r.deviation:>+7.1%}  {flag}"
        )
    return "\n".join(lines)


def save_model(path, model: Model) -> None:
    tensors: dict[str, np.ndarray] = {}
    for name, p in model.named_params():
        tensors[f"param:{name}"] = p.data
    for name, buf in model.named_buffers():
        tensors[f"buffer:{name}"] = buf
    eegb.save_checkpoint(path, model.descriptor(), tensors)


def load_model(path) -> Model:
    """Rebuild a model from a checkpoint; shapes and names must round-trip."""
    descriptor, tensors = eegb.load_checkpoint(path)
    try:
        model = build_model(
            arch=descriptor["arch"],
            size=descriptor["size"],
            seed=descriptor["seed"],
            dropout=descriptor["dropout"],
            n_classes=descriptor["n_classes"],
            n_channels=descriptor["n_channels"],
            n_samples=descriptor["n_samples"],
        )
    except KeyError as exc:
        raise MetaMismatchError(f"{path}: checkpoint descriptor missing field {exc}") from exc
    expected = {f"param:{name}" for name, _ in model.named_params()}
    expected |= {f"buffer:{name}" for name, _ in model.named_buffers()}
    if expected != set(tensors):
        missing = sorted(expected - set(tensors))[:5]
        extra = sorted(set(tensors) - expected)[:5]
        raise MetaMismatchError(
            f"{path}: checkpoint tensors do not match the described model "
            f"(missing {missing}, unexpected {extra})"
        )
    for name, p in model.named_params():
        arr = tensors[f"param:{name}"]
        if arr.shape != p.data.shape:
            raise MetaMismatchError(
                f"{path}: tensor {name!r} has shape {arr.shape}, model expects {p.data.shape}"
            )
        p.data = arr.astype(np.float32)
        p.momentum = np.zeros_like(p.data)
    for name, buf in model.named_buffers():
        arr = tensors[f"buffer:{name}"]
        if arr.shape != buf.shape:
            raise MetaMismatchError(
                f"{path}: buffer {name!r} has shape {arr.shape}, model expects {buf.shape}"
            )
        buf[...] = arr
    return model

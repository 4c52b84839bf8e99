"""Graph network: parallel recurrent propagation stacks plus a softmax head.

Each of R stacks runs L propagation layers with a skip connection back to
the raw input features,

    H_r^(1)   = act(Â·X·W_r^(0) + X·V_r^(0))
    H_r^(l+1) = act(Â·H_r^(l)·W_r^(l) + X·V_r^(l))

and the stack outputs are averaged. A two-layer perceptron followed by a
row softmax turns the averaged features into a row-stochastic cluster
assignment. A plain propagation variant (no skip term, single stack) is
available behind ``arch="gcn"``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .autodiff import ACTIVATIONS, Tape, Tensor
from .errors import ConfigError, FormatError, ShapeError
from .graph import PatchGraph

__all__ = [
    "ArmaConfig",
    "ArmaModel",
    "ClusterAssignment",
    "init_model",
    "arma_forward",
    "cluster_head",
    "save_model",
    "load_model",
]

CHECKPOINT_MAGIC = b"UAM1"
_ARCHS = ("arma", "gcn")
_ACTIVATION_IDS = ("relu", "gelu", "silu", "selu")


@dataclass(frozen=True)
class ArmaConfig:
    stacks: int = 2
    layers: int = 4
    hidden: int | None = None  # None: match the input feature width
    head_hidden: int = 64
    activation: str = "silu"
    shared_weights: bool = False
    arch: str = "arma"

    def __post_init__(self):
        if self.stacks < 1 or self.layers < 1:
            raise ConfigError("stacks and layers must be >= 1")
        if self.hidden is not None and self.hidden < 1:
            raise ConfigError("hidden width must be positive")
        if self.head_hidden < 1:
            raise ConfigError("head width must be positive")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.arch not in _ARCHS:
            raise ConfigError(f"arch must be one of {_ARCHS}")


@dataclass
class ArmaModel:
    config: ArmaConfig
    c_in: int
    k: int
    # stack_w[r][l]: (c_in|hidden, hidden); stack_v[r][l]: (c_in, hidden)
    stack_w: list[list[Tensor]]
    stack_v: list[list[Tensor]]
    head_w1: Tensor
    head_b1: Tensor
    head_w2: Tensor
    head_b2: Tensor

    @property
    def hidden(self) -> int:
        return self.config.hidden if self.config.hidden is not None else self.c_in

    def parameters(self) -> list[Tensor]:
        """All trainable tensors in declaration order, deduplicated.

        Weight sharing makes the same tensor appear in several layer slots;
        it is listed (and serialized, and stepped) once.
        """
        seen: set[int] = set()
        params: list[Tensor] = []
        for r in range(len(self.stack_w)):
            for t in (*self.stack_w[r], *self.stack_v[r]):
                if id(t) not in seen:
                    seen.add(id(t))
                    params.append(t)
        for t in (self.head_w1, self.head_b1, self.head_w2, self.head_b2):
            params.append(t)
        return params

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.zero_grad()


@dataclass(frozen=True)
class ClusterAssignment:
    """Row-stochastic soft assignment of nodes to k clusters."""

    matrix: np.ndarray  # (n, k)
    k: int

    def hard_labels(self) -> np.ndarray:
        # argmax breaks ties toward the lower cluster index
        return self.matrix.argmax(axis=1)


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    bound = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-bound, bound, size=(rows, cols)), requires_grad=True)


def init_model(cfg: ArmaConfig, c_in: int, k: int, seed: int) -> ArmaModel:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    if c_in < 1:
        raise ConfigError("c_in must be >= 1")
    if k < 2:
        raise ConfigError("k must be >= 2")
    rng = np.random.default_rng(seed)
    hidden = cfg.hidden if cfg.hidden is not None else c_in

    gcn = cfg.arch == "gcn"
    stacks = 1 if gcn else cfg.stacks
    stack_w: list[list[Tensor]] = []
    stack_v: list[list[Tensor]] = []
    for _ in range(stacks):
        ws: list[Tensor] = []
        vs: list[Tensor] = []
        for layer in range(cfg.layers):
            in_w = c_in if layer == 0 else hidden
            if cfg.shared_weights and layer >= 2:
                ws.append(ws[1])
                if not gcn:
                    vs.append(vs[1])
                continue
            ws.append(_glorot(rng, in_w, hidden))
            if not gcn:
                vs.append(_glorot(rng, c_in, hidden))
        stack_w.append(ws)
        stack_v.append(vs)

    head_w1 = _glorot(rng, hidden, cfg.head_hidden)
    head_b1 = Tensor(np.zeros((1, cfg.head_hidden)), requires_grad=True)
    head_w2 = _glorot(rng, cfg.head_hidden, k)
    head_b2 = Tensor(np.zeros((1, k)), requires_grad=True)
    return ArmaModel(
        config=cfg,
        c_in=c_in,
        k=k,
        stack_w=stack_w,
        stack_v=stack_v,
        head_w1=head_w1,
        head_b1=head_b1,
        head_w2=head_w2,
        head_b2=head_b2,
    )


def arma_forward(tape: Tape, model: ArmaModel, graph: PatchGraph, x: Tensor) -> Tensor:
    """Propagate features through every stack and average the results."""
    if x.shape[0] != graph.n:
        raise ShapeError(f"features have {x.shape[0]} rows for a {graph.n}-node graph")
    if x.shape[1] != model.c_in:
        raise ShapeError(f"model expects {model.c_in} input columns, got {x.shape[1]}")
    act = model.config.activation
    gcn = model.config.arch == "gcn"

    stack_outputs: list[Tensor] = []
    for r, ws in enumerate(model.stack_w):
        h = x
        for layer, w in enumerate(ws):
            prop = tape.sparse_matmul(graph.norm_adj, tape.matmul(h, w))
            if gcn:
                h = tape.activation(prop, act)
            else:
                skip = tape.matmul(x, model.stack_v[r][layer])
                h = tape.activation(tape.add(prop, skip), act)
        stack_outputs.append(h)

    out = stack_outputs[0]
    for other in stack_outputs[1:]:
        out = tape.add(out, other)
    if len(stack_outputs) > 1:
        out = tape.scale(out, 1.0 / len(stack_outputs))
    return out


def cluster_head(tape: Tape, model: ArmaModel, h: Tensor) -> Tensor:
    """Two-layer perceptron and row softmax over cluster logits."""
    z = tape.add_bias(tape.matmul(h, model.head_w1), model.head_b1)
    z = tape.activation(z, model.config.activation)
    z = tape.add_bias(tape.matmul(z, model.head_w2), model.head_b2)
    return tape.row_softmax(z)


def forward_assignment(model: ArmaModel, graph: PatchGraph, x: Tensor) -> ClusterAssignment:
    """Inference-only pass producing the soft cluster assignment."""
    tape = Tape()
    c = cluster_head(tape, model, arma_forward(tape, model, graph, x))
    return ClusterAssignment(matrix=c.data.copy(), k=model.k)


# --- checkpoint format -----------------------------------------------------
# "UAM1" magic; header of little-endian u32 fields (arch, stacks, layers,
# c_in, hidden, head_hidden, k, activation id, shared flag); then for each
# parameter in declaration order: u32 rows, u32 cols, rows*cols f64 LE.


def save_model(model: ArmaModel, path) -> None:
    cfg = model.config
    header = struct.pack(
        "<9I",
        _ARCHS.index(cfg.arch),
        cfg.stacks,
        cfg.layers,
        model.c_in,
        model.hidden,
        cfg.head_hidden,
        model.k,
        _ACTIVATION_IDS.index(cfg.activation),
        1 if cfg.shared_weights else 0,
    )
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header)
        for p in model.parameters():
            rows, cols = p.shape
            fh.write(struct.pack("<2I", rows, cols))
            fh.write(p.data.astype("<f8").tobytes())


def load_model(path) -> ArmaModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        raw = fh.read(36)
        if len(raw) != 36:
            raise FormatError("truncated checkpoint header")
        arch_id, stacks, layers, c_in, hidden, head_hidden, k, act_id, shared = struct.unpack("<9I", raw)
        try:
            cfg = ArmaConfig(
                stacks=stacks,
                layers=layers,
                hidden=hidden,
                head_hidden=head_hidden,
                activation=_ACTIVATION_IDS[act_id],
                shared_weights=bool(shared),
                arch=_ARCHS[arch_id],
            )
        except IndexError as exc:
            raise FormatError("checkpoint header references unknown enum value") from exc
        model = init_model(cfg, c_in, k, seed=0)
        for p in model.parameters():
            dims = fh.read(8)
            if len(dims) != 8:
                raise FormatError("truncated checkpoint: missing tensor header")
            rows, cols = struct.unpack("<2I", dims)
            if (rows, cols) != p.shape:
                raise FormatError(
                    f"checkpoint tensor is {rows}x{cols}, expected {p.shape[0]}x{p.shape[1]}"
                )
            payload = fh.read(rows * cols * 8)
            if len(payload) != rows * cols * 8:
                raise FormatError("truncated checkpoint: short tensor payload")
            p.data[...] = np.frombuffer(payload, dtype="<f8").reshape(rows, cols)
        if fh.read(1):
            raise FormatError("trailing bytes after checkpoint payload")
    return model

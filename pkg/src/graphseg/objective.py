"""Modularity objectives and the per-image training loop.

The training loss is the negated relaxed modularity −Tr(CᵀBC)/(2m) plus a
balance penalty that rules out the all-one-cluster solution. Hard
modularity of an integer labeling is kept alongside for evaluation and for
the equivalence tests against the relaxed form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor
from .errors import ConfigError, DegenerateGraphError, DivergenceError, NonFiniteError, ShapeError
from .graph import ModularityMatrix, PatchGraph
from .model import ArmaModel, ClusterAssignment, arma_forward, cluster_head, forward_assignment

__all__ = [
    "LossReport",
    "OptimConfig",
    "AdamState",
    "hard_modularity",
    "max_bipartition_modularity",
    "relaxed_modularity",
    "collapse_regularizer",
    "segmentation_loss",
    "adam_step",
    "train",
]


@dataclass(frozen=True)
class LossReport:
    epoch: int
    total: float
    modularity_term: float  # −Q̄, the negated relaxed modularity
    regularizer: float


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-2
    epochs: int = 60
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    lr_decay: float | None = None  # optional per-epoch multiplicative factor

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lr_decay is not None and not (0.0 < self.lr_decay <= 1.0):
            raise ConfigError("lr_decay must lie in (0, 1]")


def hard_modularity(graph: PatchGraph, labels: np.ndarray) -> float:
    """Partition quality Q of an integer labeling.

    Q = (1/2m)·Σᵢⱼ [Aᵢⱼ − dᵢdⱼ/2m]·[labelᵢ == labelⱼ], computed per
    cluster so the single-cluster case is exactly 0.
    """
    if graph.m < 1:
        raise DegenerateGraphError("modularity is undefined for an edgeless graph")
    labels = np.asarray(labels)
    if labels.shape != (graph.n,):
        raise ShapeError(f"expected {graph.n} labels, got shape {labels.shape}")
    if labels.min(initial=0) < 0:
        raise ConfigError("labels must be non-negative cluster indices")
    two_m = 2.0 * graph.m
    adj = graph.adjacency
    row_of = np.repeat(np.arange(graph.n), np.diff(adj.indptr))
    within = labels[row_of] == labels[adj.indices]
    a_within = float(adj.data[within].sum())
    cluster_degree = np.bincount(labels, weights=graph.degrees.astype(np.float64))
    return float((a_within - float(np.square(cluster_degree).sum()) / two_m) / two_m)


def max_bipartition_modularity(graph: PatchGraph) -> tuple[float, np.ndarray]:
    """Exhaustive best two-way split; exponential, guarded to small n."""
    if graph.n > 20:
        raise ConfigError("exhaustive search is limited to n <= 20 nodes")
    best_q = -np.inf
    best = np.zeros(graph.n, dtype=np.int64)
    for bits in itertools.product((0, 1), repeat=graph.n):
        labels = np.array(bits, dtype=np.int64)
        q = hard_modularity(graph, labels)
        if q > best_q:
            best_q = q
            best = labels
    return float(best_q), best


def relaxed_modularity(tape: Tape, graph: PatchGraph, b: Tensor, c: Tensor) -> Tensor:
    """Differentiable Q̄ = Tr(CᵀBC)/(2m)."""
    if graph.m < 1:
        raise DegenerateGraphError("modularity is undefined for an edgeless graph")
    return tape.scale(tape.trace_quadratic(c, b), 1.0 / (2.0 * graph.m))


def collapse_regularizer(tape: Tape, c: Tensor, k: int) -> Tensor:
    """Differentiable balance penalty; 0 for balanced C, √k − 1 at collapse."""
    return tape.balance_penalty(c, k)


def segmentation_loss(
    tape: Tape, graph: PatchGraph, b: Tensor, c: Tensor, k: int
) -> tuple[Tensor, Tensor, Tensor]:
    """Loss = −Q̄ + balance penalty; returns (loss, −Q̄ term, penalty)."""
    mod_term = tape.scale(relaxed_modularity(tape, graph, b, c), -1.0)
    reg = collapse_regularizer(tape, c, k)
    return tape.add(mod_term, reg), mod_term, reg


@dataclass
class AdamState:
    t: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(
            t=0,
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_step(
    params: list[Tensor],
    grads: list[np.ndarray],
    state: AdamState,
    cfg: OptimConfig,
    lr: float | None = None,
) -> None:
    """One decoupled-weight-decay Adam update, in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and state must align")
    step_lr = cfg.lr if lr is None else lr
    state.t += 1
    bias1 = 1.0 - cfg.beta1**state.t
    bias2 = 1.0 - cfg.beta2**state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.data.shape}")
        if cfg.weight_decay:
            p.data -= step_lr * cfg.weight_decay * p.data
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * np.square(g)
        m_hat = state.m[i] / bias1
        v_hat = state.v[i] / bias2
        p.data -= step_lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def train(
    model: ArmaModel,
    graph: PatchGraph,
    b: ModularityMatrix,
    x: np.ndarray,
    cfg: OptimConfig,
) -> tuple[ArmaModel, ClusterAssignment, list[LossReport]]:
    """Full-graph gradient descent of the modularity loss on one image."""
    if graph.m < 1:
        raise DegenerateGraphError("cannot train on an edgeless graph")
    x_t = Tensor(x)
    b_t = Tensor(b.dense)
    params = model.parameters()
    state = AdamState.for_params(params)
    history: list[LossReport] = []

    for epoch in range(cfg.epochs):
        model.zero_grads()
        tape = Tape()
        try:
            h = arma_forward(tape, model, graph, x_t)
            c = cluster_head(tape, model, h)
            loss, mod_term, reg = segmentation_loss(tape, graph, b_t, c, model.k)
            tape.backward(loss)
        except NonFiniteError as exc:
            raise DivergenceError(epoch) from exc
        history.append(
            LossReport(
                epoch=epoch,
                total=loss.item(),
                modularity_term=mod_term.item(),
                regularizer=reg.item(),
            )
        )
        lr = cfg.lr if cfg.lr_decay is None else cfg.lr * cfg.lr_decay**epoch
        adam_step(params, [p.grad for p in params], state, cfg, lr=lr)

    assignment = forward_assignment(model, graph, x_t)
    return model, assignment, history

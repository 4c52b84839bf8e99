"""Dense 2-D tensors with reverse-mode automatic differentiation.

Everything is a (rows, cols) float64 matrix. Operations are recorded on an
explicit :class:`Tape`; calling :meth:`Tape.backward` on a scalar loss walks
the recorded operations in reverse and accumulates gradients into the
``grad`` buffer of every ``requires_grad`` tensor that the loss touched.

The op set is deliberately small: matrix product, elementwise activations,
row softmax, the quadratic trace form Tr(Cᵀ B C), a fused cluster-balance
penalty, and the handful of glue ops (add, scale, bias, sums) needed to
compose a full training loss. No broadcasting beyond row-bias addition, no
n-d tensors, no higher-order derivatives.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NonFiniteError, ShapeError, TapeStateError

__all__ = ["Tensor", "Tape", "ACTIVATIONS", "SELU_ALPHA", "SELU_LAMBDA"]

# Standard scaled-exponential-linear-unit constants.
SELU_ALPHA = 1.6732632423543772
SELU_LAMBDA = 1.0507009873554805

_erf_ufunc = np.frompyfunc(math.erf, 1, 1)


def _erf(x: np.ndarray) -> np.ndarray:
    return _erf_ufunc(x).astype(np.float64)


def _as_matrix(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D matrices, got ndim={arr.ndim}")
    return arr


class Tensor:
    """A (rows, cols) float64 matrix, immutable once built from forward ops.

    ``grad`` is allocated (zeros) at construction for ``requires_grad``
    tensors and accumulated by each backward pass; call :meth:`zero_grad`
    between optimization steps.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_matrix(data)
        if not np.isfinite(self.data).all():
            raise NonFiniteError("tensor initialised with non-finite entries")
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced non-finite values")
    return arr


# --- activation functions -------------------------------------------------
# Each entry maps a kind name to (forward, derivative); derivatives are the
# exact elementwise d/dx evaluated at the pre-activation input.

def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(x):
    return (x > 0.0).astype(np.float64)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _silu(x):
    return x * _sigmoid(x)


def _silu_grad(x):
    s = _sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


def _gelu(x):
    # Exact Gaussian-CDF form, not the tanh approximation.
    return 0.5 * x * (1.0 + _erf(x / math.sqrt(2.0)))


def _gelu_grad(x):
    cdf = 0.5 * (1.0 + _erf(x / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return cdf + x * pdf


def _selu(x):
    return SELU_LAMBDA * np.where(x > 0.0, x, SELU_ALPHA * np.expm1(x))


def _selu_grad(x):
    return SELU_LAMBDA * np.where(x > 0.0, 1.0, SELU_ALPHA * np.exp(x))


ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "relu": (_relu, _relu_grad),
    "gelu": (_gelu, _gelu_grad),
    "silu": (_silu, _silu_grad),
    "selu": (_selu, _selu_grad),
}


class Tape:
    """Single-threaded record of forward operations for one backward pass.

    Operations append in execution order, so the list is already a valid
    topological order; backward simply walks it in reverse. A tape may be
    consumed by backward() exactly once.
    """

    def __init__(self):
        # (output, inputs, backward_fn); backward_fn(out_grad) returns one
        # gradient array (or None) per input, aligned with `inputs`.
        self._ops: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self._consumed = False

    # -- recording helpers ---------------------------------------------

    def _record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable) -> Tensor:
        if any(t.requires_grad for t in inputs):
            out.requires_grad = True
            self._ops.append((out, inputs, backward))
        return out

    # -- primitive operations ------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(a.data @ b.data, "matmul")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            return g @ b.data.T, a.data.T @ g

        return self._record(out, (a, b), backward)

    def sparse_matmul(self, adj, x: Tensor) -> Tensor:
        """Product Â·x for a symmetric CSR matrix Â (see sparse.CsrMatrix)."""
        if adj.shape[1] != x.shape[0]:
            raise ShapeError(f"sparse_matmul: {adj.shape} x {x.shape}")
        if not adj.symmetric:
            raise ShapeError("sparse_matmul requires a symmetric matrix")
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(adj.dot(x.data), "sparse_matmul")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            # Âᵀ·g = Â·g by symmetry.
            return (adj.dot(g),)

        return self._record(out, (x,), backward)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape != b.shape:
            raise ShapeError(f"add: shapes differ, {a.shape} vs {b.shape}")
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(a.data + b.data, "add")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            return g, g

        return self._record(out, (a, b), backward)

    def add_bias(self, x: Tensor, bias: Tensor) -> Tensor:
        """Add a 1 x cols bias row to every row of x."""
        if bias.shape != (1, x.shape[1]):
            raise ShapeError(f"add_bias: bias {bias.shape} does not fit {x.shape}")
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(x.data + bias.data, "add_bias")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            return g, g.sum(axis=0, keepdims=True)

        return self._record(out, (x, bias), backward)

    def scale(self, x: Tensor, factor: float) -> Tensor:
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(x.data * factor, "scale")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            return (g * factor,)

        return self._record(out, (x,), backward)

    def add_scalar(self, x: Tensor, constant: float) -> Tensor:
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(x.data + constant, "add_scalar")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            return (g,)

        return self._record(out, (x,), backward)

    def activation(self, x: Tensor, kind: str) -> Tensor:
        if kind not in ACTIVATIONS:
            raise ShapeError(f"unknown activation kind {kind!r}; choose from {sorted(ACTIVATIONS)}")
        if not np.isfinite(x.data).all():
            raise NonFiniteError(f"activation({kind}) received non-finite input")
        fn, deriv = ACTIVATIONS[kind]
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(fn(x.data), f"activation({kind})")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            return (g * deriv(x.data),)

        return self._record(out, (x,), backward)

    def row_softmax(self, x: Tensor) -> Tensor:
        shifted = x.data - x.data.max(axis=1, keepdims=True)
        ex = np.exp(shifted)
        y = ex / ex.sum(axis=1, keepdims=True)
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(y, "row_softmax")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            dot = (g * y).sum(axis=1, keepdims=True)
            return (y * (g - dot),)

        return self._record(out, (x,), backward)

    def trace_quadratic(self, c: Tensor, b: Tensor) -> Tensor:
        """Scalar Tr(cᵀ·b·c) for symmetric b."""
        n = c.shape[0]
        if b.shape != (n, n):
            raise ShapeError(f"trace_quadratic: b {b.shape} does not fit c {c.shape}")
        if b.data.size and abs(b.data - b.data.T).max() > 1e-12:
            raise ShapeError("trace_quadratic requires a symmetric matrix")
        bc = b.data @ c.data
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(np.array([[float(np.sum(c.data * bc))]]), "trace_quadratic")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            s = float(g[0, 0])
            # (b + bᵀ)·c = 2·b·c for symmetric b; d/db is the outer product.
            return 2.0 * s * bc, s * (c.data @ c.data.T)

        return self._record(out, (c, b), backward)

    def column_sums(self, x: Tensor) -> Tensor:
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(x.data.sum(axis=0, keepdims=True), "column_sums")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            return (np.broadcast_to(g, x.shape).copy(),)

        return self._record(out, (x,), backward)

    def total_sum(self, x: Tensor) -> Tensor:
        out = Tensor.__new__(Tensor)
        out.data = _check_finite(np.array([[float(x.data.sum())]]), "total_sum")
        out.requires_grad = False
        out.grad = None

        def backward(g):
            return (np.full(x.shape, float(g[0, 0])),)

        return self._record(out, (x,), backward)

    def balance_penalty(self, c: Tensor, k: int) -> Tensor:
        """Fused cluster-balance term sqrt(k·Σⱼ sⱼ²)/n − 1, s = column sums of c.

        Equals (√k/n)·‖Σᵢ cᵢ‖ − 1 but is exactly 0.0 for a perfectly
        balanced hard assignment (k·Σs² is then the exact integer n²).
        """
        n = c.shape[0]
        s = c.data.sum(axis=0)
        root = math.sqrt(k * float(np.dot(s, s)))
        out = Tensor.__new__(Tensor)
        out.data = np.array([[root / n - 1.0]])
        out.requires_grad = False
        out.grad = None

        def backward(g):
            if root == 0.0:
                return (np.zeros_like(c.data),)
            row = (k / (n * root)) * s
            return (float(g[0, 0]) * np.broadcast_to(row, c.shape).copy(),)

        return self._record(out, (c,), backward)

    # -- reverse pass ----------------------------------------------------

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) into .grad of every reachable tensor."""
        if self._consumed:
            raise TapeStateError("backward() already ran on this tape")
        if loss.shape != (1, 1):
            raise ShapeError(f"loss must be scalar (1x1), got {loss.shape}")
        if not np.isfinite(loss.data).all():
            raise NonFiniteError("loss is non-finite")
        self._consumed = True

        flowing: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
        for out, inputs, backward_fn in reversed(self._ops):
            out_grad = flowing.pop(id(out), None)
            if out_grad is None:
                continue
            grads = backward_fn(out_grad)
            for tensor, grad in zip(inputs, grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.grad is not None:
                    # Leaf parameter (or anything built with requires_grad).
                    tensor.grad += grad
                key = id(tensor)
                if key in flowing:
                    flowing[key] = flowing[key] + grad
                else:
                    flowing[key] = grad


def finite_difference(
    loss_fn: Callable[[], float],
    params: Sequence[Tensor] | Iterable[Tensor],
    step: float = 1e-5,
) -> list[np.ndarray]:
    """Central finite-difference gradients of loss_fn w.r.t. each parameter.

    loss_fn must recompute the loss from the parameters' current .data; the
    entries are perturbed in place and restored.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_fn()
            flat[i] = orig - step
            lo = loss_fn()
            flat[i] = orig
            g.ravel()[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads

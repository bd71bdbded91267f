"""A small reverse-mode autodiff core on numpy float64.

Only the ops the comparator and the policy update actually need are
implemented: matmul (2D and batched 3D variants), relu, sigmoid, exp,
log-softmax, reshape, concat, embedding lookup, reductions, and a mean
binary-cross-entropy loss. Gradients accumulate into .grad; backward()
walks a topological order of the graph.
"""
from __future__ import annotations

import numpy as np

# Probabilities are clamped into [BCE_EPS, 1 - BCE_EPS] before the log so a
# saturated sigmoid cannot produce inf; the clamp region gets zero gradient.
BCE_EPS = 1e-12


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad back down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph plumbing ----------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # -- arithmetic ---------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other) -> "Tensor":
        other = Tensor._coerce(other)
        a, b = self, other
        out_data = a.data + b.data

        def backward(grad):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(grad, b.data.shape))

        return Tensor._make(out_data, (a, b), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        a = self

        def backward(grad):
            if a.requires_grad:
                a._accumulate(-grad)

        return Tensor._make(-a.data, (a,), backward)

    def __sub__(self, other) -> "Tensor":
        return self + (-Tensor._coerce(other))

    def __rsub__(self, other) -> "Tensor":
        return Tensor._coerce(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = Tensor._coerce(other)
        a, b = self, other
        out_data = a.data * b.data

        def backward(grad):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(grad * a.data, b.data.shape))

        return Tensor._make(out_data, (a, b), backward)

    __rmul__ = __mul__

    def matmul(self, other: "Tensor") -> "Tensor":
        a, b = self, Tensor._coerce(other)
        ad, bd = a.data, b.data
        if ad.ndim == 2 and bd.ndim == 2:
            out_data = ad @ bd

            def backward(grad):
                if a.requires_grad:
                    a._accumulate(grad @ bd.T)
                if b.requires_grad:
                    b._accumulate(ad.T @ grad)

        elif ad.ndim == 3 and bd.ndim == 2:
            # batched input against a shared weight
            out_data = ad @ bd

            def backward(grad):
                if a.requires_grad:
                    a._accumulate(grad @ bd.T)
                if b.requires_grad:
                    b._accumulate(np.tensordot(ad, grad, axes=([0, 1], [0, 1])))

        elif ad.ndim == 3 and bd.ndim == 3:
            out_data = ad @ bd

            def backward(grad):
                if a.requires_grad:
                    a._accumulate(grad @ bd.transpose(0, 2, 1))
                if b.requires_grad:
                    b._accumulate(ad.transpose(0, 2, 1) @ grad)

        else:
            raise ValueError(f"unsupported matmul ranks {ad.ndim} @ {bd.ndim}")
        return Tensor._make(out_data, (a, b), backward)

    __matmul__ = matmul

    # -- nonlinearities ------------------------------------------------------

    def relu(self) -> "Tensor":
        a = self
        mask = a.data > 0.0  # subgradient 0 at the kink

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad * mask)

        return Tensor._make(a.data * mask, (a,), backward)

    def sigmoid(self) -> "Tensor":
        a = self
        s = sigmoid(a.data)

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad * s * (1.0 - s))

        return Tensor._make(s, (a,), backward)

    def exp(self) -> "Tensor":
        a = self
        e = np.exp(a.data)

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad * e)

        return Tensor._make(e, (a,), backward)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out_data = shifted - lse
        soft = np.exp(out_data)

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad - soft * grad.sum(axis=axis, keepdims=True))

        return Tensor._make(out_data, (a,), backward)

    # -- shape ops -----------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        a = self
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = a.data.reshape(shape)

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad.reshape(a.data.shape))

        return Tensor._make(out_data, (a,), backward)

    @staticmethod
    def concat(tensors: list["Tensor"], axis: int = -1) -> "Tensor":
        parts = [Tensor._coerce(t) for t in tensors]
        out_data = np.concatenate([p.data for p in parts], axis=axis)
        sizes = [p.data.shape[axis] for p in parts]
        splits = np.cumsum(sizes)[:-1]

        def backward(grad):
            chunks = np.split(grad, splits, axis=axis)
            for p, g in zip(parts, chunks):
                if p.requires_grad:
                    p._accumulate(g)

        return Tensor._make(out_data, tuple(parts), backward)

    def gather_rows(self, index: np.ndarray) -> "Tensor":
        """Embedding lookup: self is (V, d), index is an int array; output
        has index.shape + (d,). Repeated ids scatter-add on backward."""
        a = self
        idx = np.asarray(index, dtype=np.int64)
        out_data = a.data[idx]

        def backward(grad):
            if a.requires_grad:
                acc = np.zeros_like(a.data)
                np.add.at(acc, idx, grad)
                a._accumulate(acc)

        return Tensor._make(out_data, (a,), backward)

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def backward(grad):
            if not a.requires_grad:
                return
            g = grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())

        return Tensor._make(out_data, (a,), backward)

    def mean(self) -> "Tensor":
        return self.sum() * (1.0 / self.data.size)

    def bce_mean(self, target: np.ndarray) -> "Tensor":
        """Mean binary cross-entropy of probabilities against {0,1} labels."""
        a = self
        y = _as_array(target)
        if y.shape != a.data.shape:
            raise ValueError(f"label shape {y.shape} != prob shape {a.data.shape}")
        p = np.clip(a.data, BCE_EPS, 1.0 - BCE_EPS)
        losses = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
        out_data = np.array(losses.mean())
        inside = (a.data > BCE_EPS) & (a.data < 1.0 - BCE_EPS)

        def backward(grad):
            if a.requires_grad:
                g = (p - y) / (p * (1.0 - p)) / a.data.size
                a._accumulate(grad * g * inside)

        return Tensor._make(out_data, (a,), backward)


# -- float-level helpers ------------------------------------------------------


def sigmoid(x):
    """Numerically stable logistic function for floats or arrays."""
    x = _as_array(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("sigmoid requires finite input")
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def bce(p, y) -> float:
    """Binary cross-entropy of a single probability against a {0,1} label."""
    if y not in (0, 1, 0.0, 1.0):
        raise ValueError(f"label must be 0 or 1, got {y!r}")
    pc = min(max(float(p), BCE_EPS), 1.0 - BCE_EPS)
    y = float(y)
    return float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def xavier_uniform(shape: tuple[int, ...], rng: np.random.Generator,
                   fan_in: int | None = None, fan_out: int | None = None) -> np.ndarray:
    """Glorot-uniform init; fans default to the first/last dims of shape."""
    if fan_in is None:
        fan_in = shape[0]
    if fan_out is None:
        fan_out = shape[-1]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def grad_check(loss_fn, params: list[Tensor], eps: float = 1e-5) -> float:
    """Compare analytic gradients against central differences.

    loss_fn must rebuild the graph from the current param values on every
    call. Returns the worst relative error over all parameter entries.
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise ValueError("loss is not finite")
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    worst = 0.0
    for p, ag in zip(params, analytic):
        flat = p.data.reshape(-1)
        aflat = ag.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn().item()
            flat[i] = orig - eps
            down = loss_fn().item()
            flat[i] = orig
            fd = (up - down) / (2.0 * eps)
            denom = max(abs(aflat[i]), abs(fd), 1e-8)
            worst = max(worst, abs(aflat[i] - fd) / denom)
    return worst

"""Reverse-mode automatic differentiation over dense float64 matrices.

The engine is a flat tape.  Every operation appends one node recording its
parents and a backward rule; insertion order is a topological order, so
backward() is a single reverse sweep in which the gradient of each node is
the sum of the contributions of all its consumers.

All values are 2-D float64 arrays; scalars are 1x1 matrices.  Reductions
use numpy's fixed summation order, so identical inputs give bitwise
identical gradients.
"""

from dataclasses import dataclass, field

import numpy as np


class Var:
    """A value on a tape.  Leaves may carry gradients after backward()."""

    __slots__ = ("value", "tape", "index", "requires_grad")

    def __init__(self, value, tape, index, requires_grad):
        self.value = value
        self.tape = tape
        self.index = index
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    @property
    def grad(self):
        """Gradient of the last backward() loss w.r.t. this Var (or None)."""
        return self.tape.grad(self)

    def item(self) -> float:
        if self.value.size != 1:
            raise ValueError(f"item() needs a scalar, got shape {self.value.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Var(shape={self.value.shape}, node={self.index})"


class _Node:
    __slots__ = ("var", "parents")

    def __init__(self, var, parents):
        self.var = var
        self.parents = parents  # tuple of (parent Var, vjp callable)


class Tape:
    """Records a computation graph; owns gradients after backward()."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._grads: list | None = None

    def __len__(self):
        return len(self._nodes)

    def var(self, value, requires_grad: bool = False) -> Var:
        """Create a leaf holding `value` (coerced to 2-D float64)."""
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ValueError(f"tape values must be matrices, got ndim={arr.ndim}")
        return self._record(arr, (), requires_grad)

    def _record(self, value, parents, requires_grad=False) -> Var:
        v = Var(value, self, len(self._nodes), requires_grad)
        self._nodes.append(_Node(v, parents))
        return v

    def backward(self, loss: Var) -> None:
        """Accumulate d(loss)/d(leaf) for every requires_grad leaf.

        May be called once per tape; reset() clears the recording.
        """
        if loss.tape is not self:
            raise ValueError("loss belongs to a different tape")
        if loss.value.shape != (1, 1):
            raise ValueError(f"loss must be a 1x1 scalar, got shape {loss.value.shape}")
        if self._grads is not None:
            raise RuntimeError("backward() already ran on this tape; call reset() first")
        grads = [None] * len(self._nodes)
        grads[loss.index] = np.ones((1, 1), dtype=np.float64)
        for i in range(loss.index, -1, -1):
            g = grads[i]
            if g is None:
                continue
            for parent, vjp in self._nodes[i].parents:
                if not self._nodes[parent.index].parents and not parent.requires_grad:
                    continue  # constant leaf: skip allocating a gradient
                contrib = vjp(g)
                if grads[parent.index] is None:
                    grads[parent.index] = contrib
                else:
                    grads[parent.index] = grads[parent.index] + contrib
        self._grads = grads

    def grad(self, var: Var):
        if self._grads is None:
            return None
        if not var.requires_grad:
            return None
        return self._grads[var.index]

    def reset(self) -> None:
        """Drop all nodes and gradients; existing Vars become invalid."""
        self._nodes = []
        self._grads = None


def _check_same_tape(*vars_):
    tape = vars_[0].tape
    for v in vars_[1:]:
        if v.tape is not tape:
            raise ValueError("operands live on different tapes")
    return tape


def matmul(a: Var, b: Var) -> Var:
    """Matrix product a @ b."""
    tape = _check_same_tape(a, b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    out = av @ bv
    return tape._record(out, ((a, lambda g: g @ bv.T), (b, lambda g: av.T @ g)))


def affine(w: Var, x: Var, b: Var) -> Var:
    """w @ x + b with the bias column broadcast across samples."""
    tape = _check_same_tape(w, x, b)
    if w.shape[1] != x.shape[0] or b.shape != (w.shape[0], 1):
        raise ValueError(f"affine shape mismatch: w{w.shape}, x{x.shape}, b{b.shape}")
    wv, xv = w.value, x.value
    out = wv @ xv + b.value
    parents = (
        (w, lambda g: g @ xv.T),
        (x, lambda g: wv.T @ g),
        (b, lambda g: g.sum(axis=1, keepdims=True)),
    )
    return tape._record(out, parents)


def relu(x: Var) -> Var:
    """Elementwise max(0, x); the subgradient at exactly 0 is 0."""
    mask = x.value > 0
    out = np.where(mask, x.value, 0.0)
    return x.tape._record(out, ((x, lambda g: g * mask),))


def frob_sq(x: Var) -> Var:
    """Sum of squared entries as a 1x1 Var."""
    xv = x.value
    out = np.array([[np.sum(xv * xv)]])
    return x.tape._record(out, ((x, lambda g: (2.0 * g[0, 0]) * xv),))


def sup_norm_rows(q: Var) -> Var:
    """Sum over rows of the row sup-norm: sum_i max_j |q_ij|.

    The subgradient places sign(q[i, j*]) at each row's first maximal
    column j* (lowest index on ties) and zero elsewhere.
    """
    qv = q.value
    rows = np.arange(qv.shape[0])
    j_star = np.argmax(np.abs(qv), axis=1)  # first occurrence = lowest index
    peak = qv[rows, j_star]
    out = np.array([[np.sum(np.abs(peak))]])

    def vjp(g):
        grad = np.zeros_like(qv)
        grad[rows, j_star] = np.sign(peak) * g[0, 0]
        return grad

    return q.tape._record(out, ((q, vjp),))


def add(a: Var, b: Var) -> Var:
    tape = _check_same_tape(a, b)
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    return tape._record(a.value + b.value, ((a, lambda g: g), (b, lambda g: g)))


def sub(a: Var, b: Var) -> Var:
    tape = _check_same_tape(a, b)
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    return tape._record(a.value - b.value, ((a, lambda g: g), (b, lambda g: -g)))


def scale(x: Var, c: float) -> Var:
    c = float(c)
    return x.tape._record(c * x.value, ((x, lambda g: c * g),))


# ---------------------------------------------------------------------------
# Adam optimizer over dicts of named parameter arrays.
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """First / second moment accumulators, one pair per parameter name."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_init(params: dict) -> AdamState:
    state = AdamState()
    for key, arr in params.items():
        state.m[key] = np.zeros_like(arr)
        state.v[key] = np.zeros_like(arr)
    return state


def adam_step(params: dict, grads: dict, state: AdamState, *, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              t: int):
    """One bias-corrected Adam update, in place on the parameter arrays.

    Parameters without an entry in `grads` (frozen) are left untouched.
    """
    if t < 1:
        raise ValueError(f"Adam step count must be >= 1, got {t}")
    for key, arr in params.items():
        g = grads.get(key)
        if g is None:
            continue
        if g.shape != arr.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {arr.shape} for {key!r}")
        m = state.m[key]
        v = state.v[key]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        arr -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state

"""Small reverse-mode differentiation kernel over float64 numpy arrays.

Each primitive returns a :class:`Var` holding its value and a closure that maps
the output adjoint to input adjoints. ``backward`` walks the recorded graph in
reverse topological order. The model architecture is static, so this fixed
set of primitives is all that is needed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

DTYPE = np.float64


class ShapeMismatch(ValueError):
    def __init__(self, op: str, a, b):
        super().__init__(f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}")
        self.shapes = (tuple(a), tuple(b))


class DegenerateVector(ValueError):
    pass


class Var:
    __slots__ = ("value", "grad", "parents", "backward_fn")

    def __init__(self, value, parents: tuple = (), backward_fn: Optional[Callable] = None):
        self.value = np.asarray(value, dtype=DTYPE)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


def const(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def backward(loss: Var) -> None:
    """Accumulate d(loss)/d(v) into ``v.grad`` for every ancestor ``v``."""
    if loss.value.size != 1:
        raise ValueError("backward needs a scalar output")
    order, seen = [], set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.backward_fn(node.grad)):
            if g is None:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


# --- primitives ---------------------------------------------------------------


def add(a: Var, b: Var) -> Var:
    if a.shape != b.shape:
        raise ShapeMismatch("add", a.shape, b.shape)
    return Var(a.value + b.value, (a, b), lambda g: (g, g))


def add_broadcast(m: Var, b: Var) -> Var:
    """``m + b`` where ``b`` broadcasts over the leading axes of ``m``."""
    try:
        out = m.value + b.value
    except ValueError:
        raise ShapeMismatch("add_broadcast", m.shape, b.shape) from None
    if out.shape != m.shape:
        raise ShapeMismatch("add_broadcast", m.shape, b.shape)
    lead = m.value.ndim - b.value.ndim

    def back(g):
        gb = g.sum(axis=tuple(range(lead))) if lead else g
        axes = tuple(i for i, s in enumerate(b.shape) if s == 1 and gb.shape[i] != 1)
        if axes:
            gb = gb.sum(axis=axes, keepdims=True)
        return g, gb

    return Var(out, (m, b), back)


def sub(a: Var, b: Var) -> Var:
    if a.shape != b.shape:
        raise ShapeMismatch("sub", a.shape, b.shape)
    return Var(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a: Var, b: Var) -> Var:
    """Elementwise product; ``b`` may also be a scalar Var."""
    if a.shape != b.shape and b.value.size != 1:
        raise ShapeMismatch("mul", a.shape, b.shape)
    av, bv = a.value, b.value

    def back(g):
        gb = g * av
        return g * bv, (gb if gb.shape == bv.shape else np.sum(gb).reshape(bv.shape))

    return Var(av * bv, (a, b), back)


def scale(a: Var, c: float) -> Var:
    return Var(a.value * c, (a,), lambda g: (g * c,))


def matmul(a: Var, b: Var) -> Var:
    """Matrix product; either side may be rank-1 as in ``numpy.matmul``."""
    av, bv = a.value, b.value
    if av.ndim == 0 or bv.ndim == 0 or av.shape[-1] != bv.shape[0]:
        raise ShapeMismatch("matmul", av.shape, bv.shape)

    def back(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        if av.ndim == 1:
            return bv @ g, np.outer(av, g)
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return Var(av @ bv, (a, b), back)


def affine(w: Var, b: Var, x: Var) -> Var:
    """``w @ x + b`` for a vector ``x``; row-wise ``x @ w.T + b`` for a matrix."""
    wv, bv, xv = w.value, b.value, x.value
    if wv.ndim != 2 or xv.shape[-1] != wv.shape[1] or bv.shape != (wv.shape[0],):
        raise ShapeMismatch("affine", wv.shape, xv.shape)
    if xv.ndim == 1:
        return Var(wv @ xv + bv, (w, b, x), lambda g: (np.outer(g, xv), g, wv.T @ g))
    return Var(xv @ wv.T + bv, (w, b, x), lambda g: (g.T @ xv, g.sum(axis=0), g @ wv))


def tanh(x: Var) -> Var:
    y = np.tanh(x.value)
    return Var(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Var) -> Var:
    y = 0.5 * (1.0 + np.tanh(0.5 * x.value))
    return Var(y, (x,), lambda g: (g * y * (1.0 - y),))


def leaky_relu(x: Var, slope: float = 0.2) -> Var:
    xv = x.value
    d = np.where(xv > 0, 1.0, slope)
    return Var(xv * d, (x,), lambda g: (g * d,))


def softmax(x: Var) -> Var:
    """Softmax over a rank-1 vector."""
    if x.value.ndim != 1:
        raise ShapeMismatch("softmax", x.shape, ("n",))
    e = np.exp(x.value - x.value.max())
    y = e / e.sum()
    return Var(y, (x,), lambda g: (y * (g - np.dot(g, y)),))


def mean_rows(m: Var) -> Var:
    n = m.shape[0]
    if n == 0:
        raise ShapeMismatch("mean_rows", m.shape, ("n>0",))
    return Var(m.value.mean(axis=0), (m,), lambda g: (np.broadcast_to(g / n, m.shape).copy(),))


def sum_all(x: Var) -> Var:
    return Var(x.value.sum(), (x,), lambda g: (np.full(x.shape, float(g)),))


def gather_rows(m: Var, idx) -> Var:
    """``m[idx]`` for an integer index array (repeats allowed)."""
    idx = np.asarray(idx, dtype=np.intp)

    def back(g):
        out = np.zeros_like(m.value)
        np.add.at(out, idx, g)
        return (out,)

    return Var(m.value[idx], (m,), back)


def segment_sum(x: Var, segments, n: int) -> Var:
    """Sum rows of ``x`` into ``n`` buckets named by ``segments``."""
    segments = np.asarray(segments, dtype=np.intp)
    out = np.zeros((n,) + x.shape[1:])
    np.add.at(out, segments, x.value)
    return Var(out, (x,), lambda g: (g[segments],))


def segment_softmax(x: Var, segments, n: int) -> Var:
    """Softmax of a rank-1 score vector within each segment."""
    segments = np.asarray(segments, dtype=np.intp)
    xv = x.value
    top = np.full(n, -np.inf)
    np.maximum.at(top, segments, xv)
    e = np.exp(xv - top[segments])
    z = np.zeros(n)
    np.add.at(z, segments, e)
    y = e / z[segments]

    def back(g):
        dot = np.zeros(n)
        np.add.at(dot, segments, g * y)
        return (y * (g - dot[segments]),)

    return Var(y, (x,), back)


def stack(vs: list) -> Var:
    return Var(np.stack([v.value for v in vs]), tuple(vs), lambda g: tuple(g[i] for i in range(len(vs))))


def scale_rows(w: Var, m: Var) -> Var:
    """Row ``i`` of ``m`` times scalar ``w[i]``."""
    if w.shape != (m.shape[0],):
        raise ShapeMismatch("scale_rows", w.shape, m.shape)
    wv, mv = w.value, m.value
    return Var(wv[:, None] * mv, (w, m), lambda g: ((g * mv).sum(axis=1), wv[:, None] * g))


def l2_normalize_rows(m: Var, min_norm: float = 1e-12) -> Var:
    mv = m.value
    norms = np.linalg.norm(mv, axis=1)
    if np.any(norms < min_norm):
        raise DegenerateVector(f"row norm below {min_norm}")
    y = mv / norms[:, None]

    def back(g):
        return ((g - y * (g * y).sum(axis=1, keepdims=True)) / norms[:, None],)

    return Var(y, (m,), back)


def cosine_similarity(u: Var, v: Var, min_norm: float = 1e-12) -> Var:
    if u.value.ndim != 1 or u.shape != v.shape:
        raise ShapeMismatch("cosine_similarity", u.shape, v.shape)
    uv, vv = u.value, v.value
    nu, nv = np.linalg.norm(uv), np.linalg.norm(vv)
    if nu < min_norm or nv < min_norm:
        raise DegenerateVector("cosine of a (near) zero vector")
    c = float(np.dot(uv, vv) / (nu * nv))

    def back(g):
        return (g * (vv / (nu * nv) - c * uv / (nu * nu)), g * (uv / (nu * nv) - c * vv / (nv * nv)))

    # rounding can land one ulp outside [-1, 1]
    return Var(min(1.0, max(-1.0, c)), (u, v), back)


def cosine_matrix(q: Var, c: Var) -> Var:
    """All-pairs cosine similarity between rows of ``q`` and rows of ``c``."""
    if q.value.ndim != 2 or c.value.ndim != 2 or q.shape[1] != c.shape[1]:
        raise ShapeMismatch("cosine_matrix", q.shape, c.shape)
    return matmul(l2_normalize_rows(q), transpose(l2_normalize_rows(c)))


def transpose(m: Var) -> Var:
    return Var(m.value.T, (m,), lambda g: (g.T,))


def softmax_cross_entropy_row(scores: Var, target: int) -> Var:
    """``-log softmax(scores)[target]``, stabilised by max-subtraction."""
    sv = scores.value
    if sv.ndim != 1:
        raise ShapeMismatch("softmax_cross_entropy_row", sv.shape, ("n",))
    if not 0 <= target < sv.shape[0]:
        raise IndexError(f"target {target} out of range for {sv.shape[0]} scores")
    top = int(np.argmax(sv))
    shifted = sv - sv[top]
    e = np.exp(shifted)
    rest = np.delete(e, top).sum()
    # log1p keeps small losses accurate to relative precision
    lse = np.log1p(rest)
    p = e / (1.0 + rest)

    def back(g):
        d = p.copy()
        d[target] -= 1.0
        return (g * d,)

    return Var(lse - shifted[target], (scores,), back)


def row(m: Var, i: int) -> Var:
    def back(g):
        out = np.zeros_like(m.value)
        out[i] = g
        return (out,)

    return Var(m.value[i], (m,), back)


# --- parameters and optimisation --------------------------------------------


class ParamStore:
    """Named float64 arrays, iterated in name order."""

    def __init__(self, arrays: Optional[dict] = None):
        self._arrays = {}
        for name, value in (arrays or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> None:
        if name in self._arrays:
            raise KeyError(f"duplicate parameter {name!r}")
        self._arrays[name] = np.array(value, dtype=DTYPE)

    def names(self) -> list[str]:
        return sorted(self._arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def items(self):
        return [(n, self._arrays[n]) for n in self.names()]

    def size(self) -> int:
        return sum(a.size for a in self._arrays.values())

    def copy(self) -> "ParamStore":
        return ParamStore({n: a.copy() for n, a in self.items()})

    def as_vars(self) -> dict:
        return {n: Var(a) for n, a in self.items()}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParamStore)
            and self.names() == other.names()
            and all(np.array_equal(a, other[n]) for n, a in self.items())
        )


def value_and_grad(loss_fn: Callable[[dict], Var], params: ParamStore) -> tuple[float, dict]:
    """Evaluate ``loss_fn`` on leaf Vars for ``params`` and return gradients by name."""
    leaves = params.as_vars()
    loss = loss_fn(leaves)
    backward(loss)
    grads = {n: (v.grad if v.grad is not None else np.zeros_like(v.value)) for n, v in leaves.items()}
    return float(loss.value), grads


def grad_check(loss_fn: Callable[[dict], Var], params: ParamStore, eps: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    Relative error per entry is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    _, analytic = value_and_grad(loss_fn, params)
    work = params.copy()
    worst = 0.0
    for name, arr in work.items():
        flat = arr.reshape(-1)
        ga = analytic[name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            f_plus = float(loss_fn(work.as_vars()).value)
            flat[k] = orig - eps
            f_minus = float(loss_fn(work.as_vars()).value)
            flat[k] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            err = abs(ga[k] - numeric) / max(1e-8, abs(ga[k]) + abs(numeric))
            worst = max(worst, err)
    return worst


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: ParamStore, grads: dict, state: AdamState) -> tuple[ParamStore, AdamState]:
    """One bias-corrected Adam update, applied in place and returned."""
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ShapeMismatch(f"adam_step[{name}]", params[name].shape, g.shape)
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m, v = np.zeros_like(p), np.zeros_like(p)
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


# --- checkpoints ------------------------------------------------------------------


def checkpoint_to_json(dims: dict, vocab: Iterable[str], params: ParamStore) -> str:
    doc = {
        "version": 1,
        "dims": dims,
        "vocab": list(vocab),
        "params": {n: {"shape": list(a.shape), "data": a.reshape(-1).tolist()} for n, a in params.items()},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def checkpoint_from_json(text: str) -> tuple[dict, list, ParamStore]:
    doc = json.loads(text)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    params = ParamStore()
    for name, item in doc["params"].items():
        params.add(name, np.array(item["data"], dtype=DTYPE).reshape(item["shape"]))
    return doc["dims"], doc["vocab"], params

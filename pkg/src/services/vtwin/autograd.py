"""
Diferenciação automática em modo reverso sobre arrays numpy (float64).

Cada operação devolve um Tensor que guarda os pais e um fechamento de
retropropagação; `Tensor.backward()` percorre o grafo em ordem topológica
inversa acumulando gradientes.
"""

from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

# padrões de ativação (relu/abs) registrados durante kink_trace()
_kink_trace: Optional[List[np.ndarray]] = None


@contextmanager
def kink_trace() -> Iterator[List[np.ndarray]]:
    """Registra os padrões de ativação das não-linearidades por partes do forward."""
    global _kink_trace
    previous, _kink_trace = _kink_trace, []
    try:
        yield _kink_trace
    finally:
        _kink_trace = previous


def _record_kinks(pattern: np.ndarray) -> None:
    if _kink_trace is not None:
        _kink_trace.append(pattern.copy())


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Soma o gradiente nos eixos expandidos por broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    def __init__(
        self,
        value,
        parents: Sequence["Tensor"] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
        name: str = "",
    ):
        self.value = _as_array(value)
        self.grad: Optional[np.ndarray] = None
        self._parents = tuple(parents)
        self._backward = backward
        self.name = name

    def __repr__(self):
        return f"Tensor(name={self.name!r}, shape={self.value.shape})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def accumulate(self, grad: np.ndarray) -> None:
        grad = _unbroadcast(grad, self.value.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.accumulate(np.ones_like(self.value) if grad is None else _as_array(grad))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(lift(other)))

    def __rsub__(self, other):
        return add(lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def add(a, b) -> Tensor:
    a, b = lift(a), lift(b)

    def backward(g):
        a.accumulate(g)
        b.accumulate(g)

    return Tensor(a.value + b.value, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.value, (a,), lambda g: a.accumulate(-g))


def mul(a, b) -> Tensor:
    a, b = lift(a), lift(b)

    def backward(g):
        a.accumulate(g * b.value)
        b.accumulate(g * a.value)

    return Tensor(a.value * b.value, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = lift(a), lift(b)

    def backward(g):
        a.accumulate(g / b.value)
        b.accumulate(-g * a.value / (b.value * b.value))

    return Tensor(a.value / b.value, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = lift(a), lift(b)

    def backward(g):
        a.accumulate(g @ b.value.T)
        b.accumulate(a.value.T @ g)

    return Tensor(a.value @ b.value, (a, b), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    _record_kinks(mask)
    return Tensor(np.where(mask, a.value, 0.0), (a,), lambda g: a.accumulate(g * mask))


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return Tensor(out, (a,), lambda g: a.accumulate(g * out * (1.0 - out)))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)
    return Tensor(out, (a,), lambda g: a.accumulate(g * (1.0 - out * out)))


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(0.0, a.value)
    slope = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return Tensor(out, (a,), lambda g: a.accumulate(g * slope))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.value)
    return Tensor(out, (a,), lambda g: a.accumulate(g * out))


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.value)
    _record_kinks(sign)
    return Tensor(np.abs(a.value), (a,), lambda g: a.accumulate(g * sign))


def total(a: Tensor, axis: Optional[int] = None) -> Tensor:
    """Soma de todos os elementos (ou ao longo de um eixo)."""
    shape = a.value.shape

    def backward(g):
        if axis is None:
            a.accumulate(np.broadcast_to(g, shape))
        else:
            a.accumulate(np.broadcast_to(np.expand_dims(g, axis), shape))

    return Tensor(a.value.sum(axis=axis), (a,), backward)


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    original = a.value.shape
    return Tensor(a.value.reshape(shape), (a,), lambda g: a.accumulate(g.reshape(original)))


def columns(a: Tensor, start: int, stop: int) -> Tensor:
    """Fatia a[:, start:stop] (ou a[start:stop] para vetores)."""

    def backward(g):
        full = np.zeros_like(a.value)
        full[..., start:stop] = g
        a.accumulate(full)

    return Tensor(a.value[..., start:stop], (a,), backward)


def take(a: Tensor, index: np.ndarray) -> Tensor:
    """Seleção de linhas a[index] com acumulação no retorno."""
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(a.value)
        np.add.at(full, index, g)
        a.accumulate(full)

    return Tensor(a.value[index], (a,), backward)


class SegmentLayout:
    """
    Posições (segmento, slot) de cada linha para somas por segmento.

    A soma ordena as contribuições dentro de cada segmento antes de somar, de
    modo que o resultado não depende da ordem das linhas de entrada.
    """

    def __init__(self, segment_ids: np.ndarray, num_segments: int):
        segment_ids = np.asarray(segment_ids, dtype=np.int64)
        self.segment_ids = segment_ids
        self.num_segments = num_segments
        self.counts = np.bincount(segment_ids, minlength=num_segments) if segment_ids.size else np.zeros(num_segments, dtype=np.int64)
        order = np.argsort(segment_ids, kind="stable")
        starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]]) if num_segments else np.zeros(0, dtype=np.int64)
        slots = np.empty_like(segment_ids)
        slots[order] = np.arange(segment_ids.size) - np.repeat(starts, self.counts)
        self.slots = slots
        self.width = int(self.counts.max()) if segment_ids.size else 0

    def reduce(self, values: np.ndarray) -> np.ndarray:
        trailing = values.shape[1:]
        padded = np.zeros((self.num_segments, max(self.width, 1)) + trailing, dtype=np.float64)
        if values.shape[0]:
            padded[self.segment_ids, self.slots] = values
        padded.sort(axis=1)
        return padded.sum(axis=1)


def segment_sum(a: Tensor, layout: SegmentLayout) -> Tensor:
    def backward(g):
        a.accumulate(g[layout.segment_ids])

    return Tensor(layout.reduce(a.value), (a,), backward)


def segment_max(values: np.ndarray, layout: SegmentLayout) -> np.ndarray:
    """Máximo por segmento (sem gradiente; -inf em segmentos vazios)."""
    out = np.full((layout.num_segments,) + values.shape[1:], -np.inf)
    np.maximum.at(out, layout.segment_ids, values)
    return out


def segment_softmax(scores: Tensor, layout: SegmentLayout) -> Tensor:
    """Softmax de `scores` (vetor) dentro de cada segmento."""
    peak = segment_max(scores.value, layout)
    shifted = scores - Tensor(peak[layout.segment_ids])
    weights = exp(shifted)
    norm = segment_sum(weights, layout)
    return weights / take(norm, layout.segment_ids)

"""
Operaciones diferenciables del núcleo tensorial.

Cada operación calcula su valor con numpy y registra en la cinta activa
su función backward. No hay broadcasting: las formas se comprueban
explícitamente y un desajuste lanza ShapeError con ambas formas.

Convención: relu'(0) = 0.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from memcaption.app.core.tensor.autograd import ShapeError, Tensor, record_op

# Cota inferior aplicada a la probabilidad antes del log en cross_entropy
PROB_FLOOR = 1e-12


def _require_ndim(t: Tensor, ndim: int, op: str) -> None:
    if t.ndim != ndim:
        raise ShapeError(f"{op}: se esperaba rango {ndim}, recibido shape={t.shape}")


def _require_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: formas distintas {a.shape} vs {b.shape}")


# =============================================================================
# PROYECCIONES LINEALES
# =============================================================================

def channel_projection(x: Tensor, W: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """
    Proyección por canales: out[i] = x[i]·W + b.

    Es el filtro 1×q×n aplicado posición a posición. Acepta un vector (q,)
    o una matriz (m, q); W tiene forma (q, n) y b forma (n,).
    """
    _require_ndim(W, 2, "channel_projection")
    if x.ndim not in (1, 2) or x.shape[-1] != W.shape[0]:
        raise ShapeError(f"channel_projection: x{x.shape} no compatible con W{W.shape}")
    if b is not None and b.shape != (W.shape[1],):
        raise ShapeError(f"channel_projection: bias{b.shape} no compatible con W{W.shape}")

    out = x.data @ W.data
    if b is not None:
        out = out + b.data

    x_val, w_val = x.data, W.data

    def backward(g: np.ndarray):
        if x_val.ndim == 1:
            gx = w_val @ g
            gw = np.outer(x_val, g)
            gb = g
        else:
            gx = g @ w_val.T
            gw = x_val.T @ g
            gb = g.sum(axis=0)
        return (gx, gw, gb) if b is not None else (gx, gw)

    inputs = (x, W, b) if b is not None else (x, W)
    return record_op("channel_projection", out, inputs, backward)


def matvec(W: Tensor, x: Tensor) -> Tensor:
    """Producto matriz-vector W·x con W (r, c) y x (c,)."""
    _require_ndim(W, 2, "matvec")
    _require_ndim(x, 1, "matvec")
    if W.shape[1] != x.shape[0]:
        raise ShapeError(f"matvec: W{W.shape} no compatible con x{x.shape}")

    w_val, x_val = W.data, x.data

    def backward(g: np.ndarray):
        return np.outer(g, x_val), w_val.T @ g

    return record_op("matvec", w_val @ x_val, (W, x), backward)


def transpose(W: Tensor) -> Tensor:
    _require_ndim(W, 2, "transpose")
    return record_op("transpose", W.data.T.copy(), (W,), lambda g: (g.T,))


# =============================================================================
# CONVOLUCIÓN CIRCULAR
# =============================================================================

@lru_cache(maxsize=32)
def _circulant_index(n: int) -> np.ndarray:
    i = np.arange(n)
    return (i[:, None] - i[None, :]) % n


def circular_conv(kernel: Tensor, signal: Tensor) -> Tensor:
    """out[i] = Σ_j kernel[j] · signal[(i − j) mod n]."""
    _require_ndim(kernel, 1, "circular_conv")
    _require_ndim(signal, 1, "circular_conv")
    _require_same_shape(kernel, signal, "circular_conv")

    idx = _circulant_index(kernel.shape[0])
    k_val = kernel.data
    shifted = signal.data[idx]

    def backward(g: np.ndarray):
        g_signal = np.zeros_like(k_val)
        np.add.at(g_signal, idx, np.outer(g, k_val))
        return shifted.T @ g, g_signal

    return record_op("circular_conv", shifted @ k_val, (kernel, signal), backward)


# =============================================================================
# NO LINEALIDADES
# =============================================================================

def softmax(x: Tensor) -> Tensor:
    """Softmax de un vector, con resta del máximo para evitar overflow."""
    _require_ndim(x, 1, "softmax")
    z = np.exp(x.data - x.data.max())
    y = z / z.sum()

    def backward(g: np.ndarray):
        return (y * (g - np.dot(g, y)),)

    return record_op("softmax", y, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return record_op("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    # Forma basada en tanh: estable para |x| grandes
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return record_op("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0
    return record_op("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


# =============================================================================
# ARITMÉTICA ELEMENTO A ELEMENTO
# =============================================================================

def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "add")
    return record_op("add", a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "mul")
    a_val, b_val = a.data, b.data
    return record_op("mul", a_val * b_val, (a, b), lambda g: (g * b_val, g * a_val))


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiplica por una constante (no diferenciable respecto a la constante)."""
    c = float(factor)
    return record_op("scale", x.data * c, (x,), lambda g: (g * c,))


def add_rows(matrix: Tensor, row: Tensor) -> Tensor:
    """Suma explícita de un vector (d,) a cada fila de una matriz (k, d)."""
    _require_ndim(matrix, 2, "add_rows")
    _require_ndim(row, 1, "add_rows")
    if matrix.shape[1] != row.shape[0]:
        raise ShapeError(f"add_rows: matriz{matrix.shape} no compatible con fila{row.shape}")
    return record_op(
        "add_rows",
        matrix.data + row.data[None, :],
        (matrix, row),
        lambda g: (g, g.sum(axis=0)),
    )


# =============================================================================
# ESTRUCTURA: CONCAT / STACK / SLICE / LOOKUP
# =============================================================================

def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatena a lo largo del eje de canales (último eje)."""
    if not tensors:
        raise ShapeError("concat: lista vacía")
    lead = tensors[0].shape[:-1]
    for t in tensors:
        if t.shape[:-1] != lead:
            raise ShapeError(f"concat: formas incompatibles {tensors[0].shape} vs {t.shape}")
    widths = [t.shape[-1] for t in tensors]
    cuts = np.cumsum(widths)[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, cuts, axis=-1))

    out = np.concatenate([t.data for t in tensors], axis=-1)
    return record_op("concat", out, tuple(tensors), backward)


def stack(vectors: Sequence[Tensor]) -> Tensor:
    """Apila k vectores (n,) en una matriz (k, n)."""
    if not vectors:
        raise ShapeError("stack: lista vacía")
    first = vectors[0].shape
    for v in vectors:
        _require_ndim(v, 1, "stack")
        if v.shape != first:
            raise ShapeError(f"stack: formas distintas {first} vs {v.shape}")

    def backward(g: np.ndarray):
        return tuple(g[i] for i in range(g.shape[0]))

    return record_op("stack", np.stack([v.data for v in vectors]), tuple(vectors), backward)


def slice_(x: Tensor, start: int, stop: int) -> Tensor:
    """Segmento [start, stop) de un vector."""
    _require_ndim(x, 1, "slice")
    if not 0 <= start < stop <= x.shape[0]:
        raise ShapeError(f"slice: rango [{start}, {stop}) fuera de shape={x.shape}")
    size = x.shape[0]

    def backward(g: np.ndarray):
        full = np.zeros(size)
        full[start:stop] = g
        return (full,)

    return record_op("slice", x.data[start:stop].copy(), (x,), backward)


def take_row(table: Tensor, index: int) -> Tensor:
    """Fila `index` de una tabla (lookup de embedding)."""
    _require_ndim(table, 2, "take_row")
    if not 0 <= index < table.shape[0]:
        raise ValueError(f"take_row: índice {index} fuera de rango [0, {table.shape[0]})")
    rows = table.shape

    def backward(g: np.ndarray):
        full = np.zeros(rows)
        full[index] = g
        return (full,)

    return record_op("take_row", table.data[index].copy(), (table,), backward)


# =============================================================================
# REDUCCIONES
# =============================================================================

def sum_(x: Tensor) -> Tensor:
    shape = x.shape
    return record_op("sum", np.array(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def mean(x: Tensor, axis: Optional[int] = None) -> Tensor:
    """Media total (escalar) o media por filas (axis=0) de una matriz."""
    shape = x.shape
    if axis is None:
        count = x.size
        return record_op(
            "mean",
            np.array(x.data.mean()),
            (x,),
            lambda g: (np.full(shape, float(g) / count),),
        )
    if axis != 0 or x.ndim != 2:
        raise ShapeError(f"mean: axis={axis} no soportado para shape={shape}")
    rows = shape[0]
    return record_op(
        "mean",
        x.data.mean(axis=0),
        (x,),
        lambda g: (np.tile(g / rows, (rows, 1)),),
    )


def cross_entropy(probabilities: Tensor, target: int) -> Tensor:
    """−log p[target], con p acotada inferiormente en 1e−12."""
    _require_ndim(probabilities, 1, "cross_entropy")
    k = probabilities.shape[0]
    if not 0 <= target < k:
        raise ValueError(f"cross_entropy: target {target} fuera de rango [0, {k})")
    p = float(probabilities.data[target])
    clamped = max(p, PROB_FLOOR)

    def backward(g: np.ndarray):
        grad = np.zeros(k)
        if p >= PROB_FLOOR:
            grad[target] = -float(g) / p
        return (grad,)

    return record_op("cross_entropy", np.array(-np.log(clamped)), (probabilities,), backward)


# =============================================================================
# DESPACHO GENÉRICO
# =============================================================================

_UNARY = {"tanh": tanh, "sigmoid": sigmoid, "relu": relu, "sum": sum_, "mean": mean}
_BINARY = {"add": add, "mul": mul}


def elementwise(op: str, *args: Tensor) -> Tensor:
    """
    Despacho por nombre: tanh, sigmoid, relu, add, mul, concat, sum, mean.
    """
    if op in _UNARY:
        if len(args) != 1:
            raise ValueError(f"{op} espera 1 argumento, recibió {len(args)}")
        return _UNARY[op](args[0])
    if op in _BINARY:
        if len(args) != 2:
            raise ValueError(f"{op} espera 2 argumentos, recibió {len(args)}")
        return _BINARY[op](args[0], args[1])
    if op == "concat":
        return concat(args)
    raise ValueError(f"Operación desconocida: {op!r}")

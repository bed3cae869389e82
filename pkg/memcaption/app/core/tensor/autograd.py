"""
Núcleo de diferenciación automática en modo reverso.

Contiene:
- Tensor: valores float64 en orden row-major con flag requires_grad
- GradTape: registro ordenado de operaciones ejecutadas durante un forward
- ShapeError: error de forma (siempre reporta las formas implicadas)

La cinta activa vive en un ContextVar, así que cada hilo (o contexto async)
tiene la suya. Una cinta se usa para un único forward y se descarta después
del backward.
"""

from __future__ import annotations

import logging
from contextvars import ContextVar, Token
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class ShapeError(ValueError):
    """Formas incompatibles en una operación del núcleo tensorial."""


class Tensor:
    """
    Tensor denso float64.

    Los datos se copian al construir; las operaciones internas usan
    Tensor.wrap() para evitar copias de arrays recién calculados.
    """

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        if arr.size == 0:
            raise ShapeError(f"Tensor vacío no permitido (shape={arr.shape})")
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def wrap(cls, arr: np.ndarray, requires_grad: bool = False) -> "Tensor":
        """Crea un Tensor sobre un array float64 existente, sin copiarlo."""
        out = cls.__new__(cls)
        out.data = arr
        out.requires_grad = requires_grad
        out.name = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requiere un escalar, shape={self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Copia de los valores."""
        return self.data.copy()

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Azúcar sintáctico; la semántica vive en ops.py
    def __add__(self, other: "Tensor") -> "Tensor":
        from memcaption.app.core.tensor import ops

        return ops.add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from memcaption.app.core.tensor import ops

        return ops.mul(self, other)


@dataclass(frozen=True)
class TapeRecord:
    """Una operación ejecutada: salida, entradas y su función backward."""

    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: BackwardFn


_active_tape: ContextVar[Optional["GradTape"]] = ContextVar("memcaption_active_tape", default=None)


class GradTape:
    """
    Cinta de gradientes.

    Uso:
        with GradTape() as tape:
            loss = f(x)
        (gx,) = tape.gradient(loss, [x])

    gradient() no modifica la cinta: repetirlo produce gradientes idénticos bit a bit.
    """

    def __init__(self) -> None:
        self._records: list[TapeRecord] = []
        self._token: Optional[Token] = None

    def __enter__(self) -> "GradTape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None
        return False

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[TapeRecord, ...]:
        return tuple(self._records)

    def record(
        self,
        op: str,
        output: Tensor,
        inputs: Sequence[Tensor],
        backward: BackwardFn,
    ) -> None:
        self._records.append(TapeRecord(op, output, tuple(inputs), backward))

    def gradient(self, target: Tensor, sources: Sequence[Tensor]) -> list[np.ndarray]:
        """
        Gradiente de un escalar respecto a cada tensor de `sources`.

        Recorre la cinta en orden inverso visitando cada operación una vez.
        Un tensor consumido k veces recibe la suma de sus k contribuciones.
        Las fuentes que no influyen en el objetivo reciben ceros.
        """
        if target.size != 1:
            raise ShapeError(f"gradient() requiere un objetivo escalar, shape={target.shape}")

        grads: dict[int, np.ndarray] = {id(target): np.ones_like(target.data)}
        for rec in reversed(self._records):
            upstream = grads.get(id(rec.output))
            if upstream is None:
                continue
            contributions = rec.backward(upstream)
            for tensor, contrib in zip(rec.inputs, contributions):
                if contrib is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + contrib
                else:
                    grads[key] = np.array(contrib, dtype=np.float64)

        return [
            grads[id(s)].copy() if id(s) in grads else np.zeros_like(s.data)
            for s in sources
        ]


def record_op(
    op: str,
    value: np.ndarray,
    inputs: Sequence[Tensor],
    backward: BackwardFn,
) -> Tensor:
    """
    Envuelve el resultado de una operación y lo registra en la cinta activa
    cuando alguna entrada requiere gradiente.
    """
    requires = any(t.requires_grad for t in inputs)
    out = Tensor.wrap(value, requires_grad=requires)
    tape = _active_tape.get()
    if requires and tape is not None:
        tape.record(op, out, inputs, backward)
    return out

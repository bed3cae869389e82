"""
Estado por vídeo del decodificador de memoria: bancos de memoria por capa
y vectores aleatorios del arranque en frío.
"""

import logging
import zlib
from dataclasses import dataclass

import numpy as np

from memcaption.app.core.tensor import Tensor, ops

logger = logging.getLogger(__name__)


class MemoryBank:
    """
    Slots almacenados por capa, en orden de inserción.

    Solo admite append: en el paso t cada capa tiene exactamente t − 1 entradas.
    """

    def __init__(self, num_layers: int = 5):
        self.num_layers = num_layers
        self._slots: dict[int, list[Tensor]] = {layer: [] for layer in range(1, num_layers + 1)}

    def _layer(self, layer: int) -> list[Tensor]:
        if layer not in self._slots:
            raise RuntimeError(f"Capa {layer} fuera de rango [1, {self.num_layers}]")
        return self._slots[layer]

    def append(self, layer: int, vector: Tensor) -> None:
        self._layer(layer).append(vector)

    def entries(self, layer: int) -> list[Tensor]:
        return list(self._layer(layer))

    def size(self, layer: int) -> int:
        return len(self._layer(layer))

    def sizes(self) -> dict[int, int]:
        return {layer: len(slots) for layer, slots in self._slots.items()}

    def slots(self, layer: int, step: int) -> Tensor:
        """Matriz (t − 1, n) de slots que lee la atención de memoria en el paso t."""
        entries = self._layer(layer)
        if not entries or len(entries) != step - 1:
            raise RuntimeError(
                f"Banco de la capa {layer} con {len(entries)} entradas en el paso {step} "
                f"(se esperaban {step - 1})"
            )
        return ops.stack(entries)


@dataclass(frozen=True)
class ColdStartState:
    """Vectores H^1..H^5 ~ N(0, 1), reproducibles a partir de (seed, video_id)."""

    H: tuple[Tensor, ...]

    @classmethod
    def from_seed(cls, seed: int, video_id: str, n: int, num_layers: int = 5) -> "ColdStartState":
        entropy = [int(seed), zlib.crc32(video_id.encode("utf-8"))]
        rng = np.random.default_rng(np.random.SeedSequence(entropy))
        draws = rng.standard_normal((num_layers, n))
        logger.debug("Cold start para %s (seed=%d)", video_id, seed)
        return cls(H=tuple(Tensor(row) for row in draws))

    def layer(self, layer: int) -> Tensor:
        return self.H[layer - 1]

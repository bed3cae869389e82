"""
Interfaz común de los decodificadores (memoria y baseline LSTM).

Un decodificador se usa así:
    Z, V = decoder.encode(features)
    state = decoder.begin(Z, V, video_id)
    for token in inputs:            # inputs[0] = BOS
        out = decoder.step(state, token)

forward() y batch_loss() se apoyan en ese bucle (teacher forcing).
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from memcaption.app.core.decoder.loss import MultilayerLoss, multilayer_loss
from memcaption.app.core.decoder.params import ParamSpec, init_tensors
from memcaption.app.core.tensor import ShapeError, Tensor, ops
from memcaption.app.schemas.run_config import DecoderConfig
from memcaption.app.utils.batching import Batch

logger = logging.getLogger(__name__)


@dataclass
class StepOutput:
    """Salida de un paso: estados ocultos, distribuciones por cabeza y pesos de atención."""

    hidden: dict[int, Tensor]
    probs: dict[int, Tensor]
    attention: dict[str, Tensor] = field(default_factory=dict)


@dataclass
class ForwardResult:
    steps: list[StepOutput]
    state: Any

    def probs(self, head: int) -> list[Tensor]:
        return [step.probs[head] for step in self.steps]


def project_and_pool(X: Tensor, W_c: Tensor) -> tuple[Tensor, Tensor]:
    """Z = X·W_c fila a fila; V = media de las filas de Z."""
    if X.ndim != 2:
        raise ShapeError(f"project_and_pool: se esperaba X (m, q), recibido {X.shape}")
    if X.shape[0] < 1:
        raise ValueError("project_and_pool: m = 0 frames")
    Z = ops.channel_projection(X, W_c)
    return Z, ops.mean(Z, axis=0)


class BaseCaptionDecoder(ABC):
    """Parámetros nombrados + paso de decodificación + pérdida por batch."""

    kind: str = ""

    def __init__(
        self,
        config: DecoderConfig,
        vocab_size: int,
        feature_dim: int,
        tensors: Optional[Mapping[str, Tensor]] = None,
    ):
        self.config = config
        self.vocab_size = vocab_size
        self.feature_dim = feature_dim
        self.specs = self.param_specs(config, vocab_size, feature_dim)
        if tensors is None:
            tensors = init_tensors(self.specs, config.seed)
        self._check_tensors(tensors)
        self._tensors: dict[str, Tensor] = {name: tensors[name] for name in self.specs}
        self._build(self._tensors)

    # ------------------------------------------------------------------
    # A implementar por cada decodificador
    # ------------------------------------------------------------------

    @classmethod
    @abstractmethod
    def param_specs(cls, config: DecoderConfig, vocab_size: int, feature_dim: int) -> dict[str, ParamSpec]:
        ...

    @abstractmethod
    def _build(self, tensors: Mapping[str, Tensor]) -> None:
        ...

    @abstractmethod
    def begin(self, Z: Tensor, V: Tensor, video_id: str) -> Any:
        ...

    @abstractmethod
    def step(self, state: Any, prev_token: int) -> StepOutput:
        ...

    @abstractmethod
    def loss_weights(self) -> dict[int, float]:
        ...

    # ------------------------------------------------------------------

    def _check_tensors(self, tensors: Mapping[str, Tensor]) -> None:
        missing = [name for name in self.specs if name not in tensors]
        if missing:
            raise KeyError(f"Faltan tensores de parámetros: {', '.join(missing)}")
        for name, spec in self.specs.items():
            if tensors[name].shape != spec.shape:
                raise ShapeError(f"{name}: shape {tensors[name].shape}, se esperaba {spec.shape}")

    def named_parameters(self) -> dict[str, Tensor]:
        return dict(self._tensors)

    @property
    def heads(self) -> tuple[int, ...]:
        return tuple(self.loss_weights())

    def encode(self, features: np.ndarray | Tensor) -> tuple[Tensor, Tensor]:
        X = features if isinstance(features, Tensor) else Tensor(np.asarray(features, dtype=np.float64))
        return project_and_pool(X, self._tensors["feature_proj"])

    def forward(self, features: np.ndarray | Tensor, inputs: Sequence[int], video_id: str) -> ForwardResult:
        """Teacher forcing sobre inputs = tokens[:-1] (inputs[0] = BOS)."""
        if len(inputs) < 1:
            raise ValueError("forward requiere al menos un paso")
        Z, V = self.encode(features)
        state = self.begin(Z, V, video_id)
        steps = [self.step(state, int(token)) for token in inputs]
        return ForwardResult(steps=steps, state=state)

    def batch_loss(self, batch: Batch | Sequence[Any]) -> MultilayerLoss:
        """
        Pérdida multicapa de un batch.

        Acepta un Batch rellenado (solo se leen las posiciones dentro de
        lengths) o una secuencia de ejemplos con .features (m × q),
        .tokens ([BOS, ..., EOS]) y .video_id.
        """
        rows = batch.rows() if isinstance(batch, Batch) else ((e, e.tokens) for e in batch)
        weights = self.loss_weights()
        per_layer: dict[int, list[list[Tensor]]] = {layer: [] for layer in weights}
        targets: list[list[int]] = []
        for example, caption in rows:
            tokens = list(caption)
            result = self.forward(example.features, tokens[:-1], example.video_id)
            for layer in weights:
                per_layer[layer].append(result.probs(layer))
            targets.append(tokens[1:])
        return multilayer_loss(per_layer, targets, weights)

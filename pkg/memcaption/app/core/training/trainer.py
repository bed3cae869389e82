"""
Bucle de entrenamiento con teacher forcing.

Por batch: pérdida multicapa → gradientes de la cinta → clipping por norma
global → paso de Adam. fit() encadena épocas con early stopping sobre la
pérdida de validación (o de entrenamiento si no hay validación), guarda la
mejor instantánea de parámetros y escribe loss_log.jsonl.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from memcaption.app.core.decoder import BaseCaptionDecoder
from memcaption.app.core.tensor import GradTape
from memcaption.app.core.training.checkpoint import snapshot_parameters
from memcaption.app.core.training.optimizer import Adam, clip_grad_norm
from memcaption.app.schemas.results import EpochStats
from memcaption.app.schemas.run_config import TrainingConfig
from memcaption.app.utils.batching import Batch, BatchStream, CaptionExample, pad_batch

logger = logging.getLogger(__name__)

# Holgura de la comprobación L¹ ≥ L³ ≥ L⁵
LAYER_ORDER_SLACK = 0.1


@dataclass
class StepStats:
    loss: float
    per_layer: dict[int, float]
    grad_norm: float


@dataclass
class FitResult:
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_value: float = float("inf")
    best_params: dict[str, np.ndarray] = field(default_factory=dict)
    stopped_early: bool = False


def check_layer_ordering(per_layer: dict[str, float], slack: float = LAYER_ORDER_SLACK) -> bool:
    """L¹ ≥ L³ ≥ L⁵ con holgura; si no se cumple solo avisa."""
    if not {"1", "3", "5"} <= per_layer.keys():
        return True
    l1, l3, l5 = per_layer["1"], per_layer["3"], per_layer["5"]
    ok = l1 + slack >= l3 and l3 + slack >= l5
    if not ok:
        logger.warning("⚠️ Orden de capas no monótono: L1=%.4f L3=%.4f L5=%.4f", l1, l3, l5)
    return ok


class Trainer:
    def __init__(self, decoder: BaseCaptionDecoder, training: TrainingConfig, optimizer: Optional[Adam] = None):
        self.decoder = decoder
        self.training = training
        self.optimizer = optimizer or Adam(
            lr=training.lr, beta1=training.beta1, beta2=training.beta2, eps=training.eps
        )

    def train_step(self, batch: Batch | Sequence[CaptionExample]) -> StepStats:
        params = self.decoder.named_parameters()
        names = list(params)
        with GradTape() as tape:
            loss = self.decoder.batch_loss(batch)
        raw = tape.gradient(loss.total, [params[name] for name in names])
        grads, norm = clip_grad_norm(dict(zip(names, raw)), self.training.clip_norm)
        self.optimizer.step(params, grads)
        return StepStats(loss=loss.total.item(), per_layer=loss.components(), grad_norm=norm)

    def train_epoch(self, batches: Iterable[Batch], epoch: int = 1) -> EpochStats:
        """Una pasada sobre el flujo; medias por batch."""
        steps = [self.train_step(batch) for batch in batches]
        if not steps:
            raise ValueError("train_epoch: flujo de batches vacío")
        layers = steps[0].per_layer.keys()
        return EpochStats(
            epoch=epoch,
            loss=float(np.mean([s.loss for s in steps])),
            per_layer={str(layer): float(np.mean([s.per_layer[layer] for s in steps])) for layer in layers},
            grad_norm=float(np.mean([s.grad_norm for s in steps])),
            batches=len(steps),
        )

    def evaluate_loss(self, examples: Sequence[CaptionExample]) -> float:
        """Pérdida total media por batch, sin cinta."""
        if not examples:
            raise ValueError("evaluate_loss: sin ejemplos")
        size = self.training.batch_size
        values = [
            self.decoder.batch_loss(pad_batch(examples[start : start + size])).total.item()
            for start in range(0, len(examples), size)
        ]
        return float(np.mean(values))

    def fit(
        self,
        stream: BatchStream,
        val_examples: Optional[Sequence[CaptionExample]] = None,
        log_path: Optional[Path] = None,
        start_epoch: int = 1,
    ) -> FitResult:
        cfg = self.training
        result = FitResult()
        stale = 0
        if log_path is not None:
            Path(log_path).write_text("", encoding="utf-8")

        logger.info(
            "🚀 Entrenando %s: %d ejemplos, batch=%d, epochs=%d",
            self.decoder.kind,
            len(stream.examples),
            cfg.batch_size,
            cfg.epochs,
        )
        for epoch in range(start_epoch, start_epoch + cfg.epochs):
            stats = self.train_epoch(stream.epoch(epoch), epoch)
            if val_examples:
                stats.val_loss = self.evaluate_loss(val_examples)
            result.history.append(stats)
            if log_path is not None:
                with Path(log_path).open("a", encoding="utf-8") as fh:
                    fh.write(stats.model_dump_json() + "\n")

            monitored = stats.val_loss if stats.val_loss is not None else stats.loss
            logger.debug("epoch %d: loss=%.6f monitor=%.6f", epoch, stats.loss, monitored)
            if monitored < result.best_value:
                result.best_value = monitored
                result.best_epoch = epoch
                result.best_params = snapshot_parameters(self.decoder)
                stale = 0
            else:
                stale += 1

            if cfg.target_loss is not None and stats.loss < cfg.target_loss:
                logger.info("✅ Pérdida objetivo alcanzada en la época %d (%.6f)", epoch, stats.loss)
                result.stopped_early = True
                break
            if stale >= cfg.patience:
                logger.info("Early stopping en la época %d (sin mejora en %d épocas)", epoch, stale)
                result.stopped_early = True
                break

        if result.history and self.decoder.kind == "memory":
            check_layer_ordering(result.history[-1].per_layer)
        return result

"""
Ejemplos de entrenamiento y flujo de batches barajado de forma determinista.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from memcaption.app.utils.manifest import ManifestRecord
from memcaption.app.utils.vocab import PAD, Vocabulary, encode_caption

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaptionExample:
    """Un par (features del vídeo, una descripción codificada)."""

    video_id: str
    features: np.ndarray
    tokens: tuple[int, ...]
    text: str


@dataclass(frozen=True)
class Batch:
    """
    Ejemplos de un batch con sus descripciones rellenadas con PAD.

    tokens es (B × longitud máxima); lengths marca cuántas posiciones de cada
    fila son reales. Las posiciones de relleno no se leen nunca.
    """

    examples: tuple[CaptionExample, ...]
    tokens: np.ndarray
    lengths: np.ndarray

    def __len__(self) -> int:
        return len(self.examples)

    def rows(self) -> Iterator[tuple[CaptionExample, tuple[int, ...]]]:
        """(ejemplo, tokens sin relleno) por fila."""
        for example, row, length in zip(self.examples, self.tokens, self.lengths):
            yield example, tuple(int(t) for t in row[: int(length)])


def build_examples(
    records: Sequence[ManifestRecord],
    features: Mapping[str, np.ndarray],
    vocab: Vocabulary,
) -> list[CaptionExample]:
    """Un ejemplo por descripción, en el orden del manifiesto."""
    examples: list[CaptionExample] = []
    for record in records:
        if record.video_id not in features:
            raise KeyError(f"Sin features para el vídeo '{record.video_id}'")
        for text in record.captions:
            seq = encode_caption(text, vocab, record.video_id)
            examples.append(
                CaptionExample(
                    video_id=record.video_id,
                    features=features[record.video_id],
                    tokens=seq.tokens,
                    text=text,
                )
            )
    return examples


def pad_batch(examples: Sequence[CaptionExample]) -> Batch:
    lengths = np.array([len(e.tokens) for e in examples], dtype=np.int64)
    tokens = np.full((len(examples), int(lengths.max())), PAD, dtype=np.int64)
    for row, example in enumerate(examples):
        tokens[row, : len(example.tokens)] = example.tokens
    return Batch(examples=tuple(examples), tokens=tokens, lengths=lengths)


class BatchStream:
    """
    Flujo de batches de un split.

    Cada época permuta los ejemplos con un generador derivado de (seed, epoch),
    así que el orden es reproducible y distinto entre épocas.
    """

    def __init__(self, examples: Sequence[CaptionExample], batch_size: int, seed: int = 0):
        if batch_size < 1:
            raise ValueError(f"batch_size debe ser ≥ 1, recibido {batch_size}")
        self.examples = list(examples)
        self.batch_size = batch_size
        self.seed = seed

    def __len__(self) -> int:
        return -(-len(self.examples) // self.batch_size)

    def order(self, epoch: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, epoch])
        return rng.permutation(len(self.examples))

    def epoch(self, epoch: int) -> Iterator[Batch]:
        order = self.order(epoch)
        for start in range(0, len(order), self.batch_size):
            chunk = [self.examples[i] for i in order[start : start + self.batch_size]]
            yield pad_batch(chunk)


def batch_iter(examples: Sequence[CaptionExample], batch_size: int, seed: int = 0) -> BatchStream:
    """Flujo barajado y determinista de un split; stream.epoch(e) da los batches de la época e."""
    return BatchStream(examples, batch_size, seed)

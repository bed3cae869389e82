"""
Vocabulario: índices reservados, construcción desde un corpus y
codificación / decodificación de descripciones.

Fichero de vocabulario: una línea "token<TAB>count" por entrada, en orden
de índice (reservados primero).
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from memcaption.app.utils.text import tokenize

logger = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")


@dataclass(frozen=True)
class CaptionSequence:
    video_id: str
    tokens: tuple[int, ...]
    text: str


@dataclass
class Vocabulary:
    """Lista ordenada de tokens, mapa inverso y frecuencias."""

    tokens: list[str]
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if tuple(self.tokens[: len(RESERVED)]) != RESERVED:
            raise ValueError(f"El vocabulario debe empezar por {RESERVED}")
        self.index = {token: i for i, token in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("Tokens duplicados en el vocabulario")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK)

    # ------------------------------------------------------------------
    # Persistencia
    # ------------------------------------------------------------------

    def save(self, path: Path) -> None:
        lines = [f"{token}\t{self.counts.get(token, 0)}" for token in self.tokens]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        tokens: list[str] = []
        counts: dict[str, int] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            token, sep, count = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: se esperaba 'token<TAB>count'")
            tokens.append(token)
            counts[token] = int(count)
        return cls(tokens=tokens, counts=counts)


def build_vocab(corpus: Iterable[str], min_count: int = 1) -> Vocabulary:
    """
    Construye el vocabulario de un corpus de descripciones.

    Se conservan los tokens con frecuencia ≥ min_count, ordenados por
    frecuencia descendente y, a igualdad, por primera aparición.
    """
    if min_count < 1:
        raise ValueError(f"min_count debe ser ≥ 1, recibido {min_count}")
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    captions = 0
    for text in corpus:
        captions += 1
        for token in tokenize(text):
            counts[token] += 1
            first_seen.setdefault(token, len(first_seen))
    if captions == 0:
        raise ValueError("build_vocab: corpus vacío")

    kept = [t for t in counts if counts[t] >= min_count and t not in RESERVED]
    kept.sort(key=lambda t: (-counts[t], first_seen[t]))
    logger.info(
        "Vocabulario: %d tokens (%d descartados con min_count=%d)",
        len(kept) + len(RESERVED),
        len(counts) - len(kept),
        min_count,
    )
    return Vocabulary(tokens=[*RESERVED, *kept], counts={t: counts[t] for t in kept})


def encode_caption(text: str, vocab: Vocabulary, video_id: str = "") -> CaptionSequence:
    """[BOS, índices..., EOS]; los tokens desconocidos van a UNK. Exige al menos una palabra."""
    ids = [vocab.lookup(token) for token in tokenize(text)]
    if not ids:
        raise ValueError(f"Descripción sin palabras para '{video_id}': {text!r}")
    return CaptionSequence(video_id=video_id, tokens=(BOS, *ids, EOS), text=text)


def decode_tokens(indices: Sequence[int], vocab: Vocabulary) -> str:
    """Quita marcadores (PAD, BOS, EOS) y une con un espacio; corta en el primer EOS."""
    words: list[str] = []
    for index in indices:
        index = int(index)
        if index == EOS:
            break
        if index in (PAD, BOS):
            continue
        words.append(vocab.tokens[index])
    return " ".join(words)

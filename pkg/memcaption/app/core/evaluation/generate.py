"""
Decodificación greedy.

En cada paso se toma el argmax de la distribución de la cabeza elegida
(empates → índice menor) y ese token alimenta el paso siguiente. Se para
en EOS o al llegar a max_len.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from memcaption.app.core.decoder import BaseCaptionDecoder
from memcaption.app.utils.vocab import BOS, EOS, Vocabulary, decode_tokens

logger = logging.getLogger(__name__)

# Peso a partir del cual inspect-attention marca un slot
PEAK_THRESHOLD = 0.95


@dataclass
class GenerationResult:
    video_id: str
    tokens: list[int]
    text: str = ""
    attention: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def attention_lists(self) -> dict[str, list[list[float]]]:
        return {site: [w.tolist() for w in steps] for site, steps in sorted(self.attention.items())}


def greedy_decode(
    decoder: BaseCaptionDecoder,
    features: np.ndarray,
    video_id: str,
    max_len: Optional[int] = None,
    head: int = 5,
    vocab: Optional[Vocabulary] = None,
) -> GenerationResult:
    if head not in decoder.heads:
        raise ValueError(f"La cabeza {head} no existe en el decodificador {decoder.kind} ({decoder.heads})")
    max_len = max_len or decoder.config.max_caption_len

    Z, V = decoder.encode(features)
    state = decoder.begin(Z, V, video_id)
    tokens: list[int] = []
    attention: dict[str, list[np.ndarray]] = {}
    prev = BOS
    for _ in range(max_len):
        out = decoder.step(state, prev)
        for site, weights in out.attention.items():
            attention.setdefault(site, []).append(weights.data.copy())
        token = int(np.argmax(out.probs[head].data))
        if token == EOS:
            break
        tokens.append(token)
        prev = token

    text = decode_tokens(tokens, vocab) if vocab is not None else ""
    return GenerationResult(video_id=video_id, tokens=tokens, text=text, attention=attention)


def attention_peaks(result: GenerationResult, threshold: float = PEAK_THRESHOLD) -> list[tuple[str, int, float]]:
    """(sitio, slot, peso) de los slots con peso ≥ threshold en el último paso de cada sitio."""
    peaks = []
    for site, steps in sorted(result.attention.items()):
        last = steps[-1]
        for slot in np.flatnonzero(last >= threshold):
            peaks.append((site, int(slot), float(last[slot])))
    return peaks

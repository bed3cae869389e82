"""
Métricas de corpus para descripciones: BLEU (1..4) y CIDEr.

Entradas: candidates {video_id: texto} y references {video_id: [textos]}.
Ambos textos pasan por el mismo tokenizador que el vocabulario.

- bleu4: BLEU de corpus sin suavizado, recorte por conteo máximo en las
  referencias del vídeo, brevity penalty con la referencia más cercana
- sentence_bleu: BLEU de frase con suavizado add-one en 3/4-gramas (solo para mostrar)
- cider: coseno tf-idf de n-gramas (n = 1..4), media sobre referencias y
  sobre n, escalado ×10, sin penalización por longitud
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from memcaption.app.utils.text import tokenize

MAX_N = 4
CIDER_SCALE = 10.0


@dataclass
class BleuScore:
    score: float
    bleu: list[float]
    precisions: list[float]
    brevity_penalty: float
    ratio: float


@dataclass
class CiderScore:
    score: float
    per_video: dict[str, float] = field(default_factory=dict)


def ngrams(tokens: Sequence[str], n: int) -> Counter[tuple[str, ...]]:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _check_inputs(candidates: Mapping[str, str], references: Mapping[str, Sequence[str]]) -> None:
    if not candidates:
        raise ValueError("Conjunto de candidatos vacío")
    for video_id in candidates:
        if not references.get(video_id):
            raise ValueError(f"El vídeo '{video_id}' no tiene referencias")


def _closest_length(cand_len: int, ref_lens: Sequence[int]) -> int:
    return min(ref_lens, key=lambda r: (abs(r - cand_len), r))


def _clipped_counts(cand: Sequence[str], refs: Sequence[Sequence[str]], n: int) -> tuple[int, int]:
    counts = ngrams(cand, n)
    max_ref: Counter[tuple[str, ...]] = Counter()
    for ref in refs:
        for gram, count in ngrams(ref, n).items():
            max_ref[gram] = max(max_ref[gram], count)
    clipped = sum(min(count, max_ref[gram]) for gram, count in counts.items())
    return clipped, max(len(cand) - n + 1, 0)


def _brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len == 0:
        return 0.0
    if cand_len > ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def _geometric(precisions: Sequence[float]) -> float:
    if any(p <= 0.0 for p in precisions):
        return 0.0
    return math.exp(sum(math.log(p) for p in precisions) / len(precisions))


def bleu4(candidates: Mapping[str, str], references: Mapping[str, Sequence[str]]) -> BleuScore:
    """BLEU de corpus en porcentaje; BleuScore.bleu trae BLEU@1..4."""
    _check_inputs(candidates, references)
    clipped = [0] * MAX_N
    totals = [0] * MAX_N
    cand_len = ref_len = 0
    for video_id, text in candidates.items():
        cand = tokenize(text)
        refs = [tokenize(r) for r in references[video_id]]
        cand_len += len(cand)
        ref_len += _closest_length(len(cand), [len(r) for r in refs])
        for n in range(1, MAX_N + 1):
            c, t = _clipped_counts(cand, refs, n)
            clipped[n - 1] += c
            totals[n - 1] += t

    precisions = [c / t if t > 0 else 0.0 for c, t in zip(clipped, totals)]
    bp = _brevity_penalty(cand_len, ref_len)
    bleu = [100.0 * bp * _geometric(precisions[:n]) for n in range(1, MAX_N + 1)]
    return BleuScore(
        score=bleu[-1],
        bleu=bleu,
        precisions=precisions,
        brevity_penalty=bp,
        ratio=cand_len / ref_len if ref_len else 0.0,
    )


def sentence_bleu(candidate: str, references: Sequence[str]) -> float:
    """BLEU@4 de una frase con suavizado add-one en 3 y 4-gramas (en porcentaje)."""
    if not references:
        raise ValueError("sentence_bleu sin referencias")
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    precisions = []
    for n in range(1, MAX_N + 1):
        c, t = _clipped_counts(cand, refs, n)
        if n >= 3:
            precisions.append((c + 1) / (t + 1))
        else:
            precisions.append(c / t if t > 0 else 0.0)
    bp = _brevity_penalty(len(cand), _closest_length(len(cand), [len(r) for r in refs]))
    return 100.0 * bp * _geometric(precisions)


# =============================================================================
# CIDEr
# =============================================================================

def _tfidf(
    counts: Counter[tuple[str, ...]], idf: Callable[[tuple[str, ...]], float]
) -> dict[tuple[str, ...], float]:
    return {gram: count * idf(gram) for gram, count in counts.items()}


def _cosine(a: Mapping[tuple[str, ...], float], b: Mapping[tuple[str, ...], float]) -> float:
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return sum(v * b.get(gram, 0.0) for gram, v in a.items()) / (norm_a * norm_b)


def cider(candidates: Mapping[str, str], references: Mapping[str, Sequence[str]]) -> CiderScore:
    """
    CIDEr de corpus.

    idf(g) = ln((N + 1) / max(1, df(g))), con N el número de vídeos
    candidatos y df(g) el número de vídeos cuyas referencias contienen g.
    """
    _check_inputs(candidates, references)
    video_ids = list(candidates)
    n_videos = len(video_ids)
    ref_tokens = {v: [tokenize(r) for r in references[v]] for v in video_ids}

    df: Counter[tuple[str, ...]] = Counter()
    for v in video_ids:
        seen: set[tuple[str, ...]] = set()
        for ref in ref_tokens[v]:
            for n in range(1, MAX_N + 1):
                seen.update(ngrams(ref, n))
        df.update(seen)

    def idf(gram: tuple[str, ...]) -> float:
        return math.log((n_videos + 1) / max(1, df.get(gram, 0)))

    per_video: dict[str, float] = {}
    for v in video_ids:
        cand = tokenize(candidates[v])
        per_n = []
        for n in range(1, MAX_N + 1):
            cand_vec = _tfidf(ngrams(cand, n), idf)
            sims = [_cosine(cand_vec, _tfidf(ngrams(ref, n), idf)) for ref in ref_tokens[v]]
            per_n.append(sum(sims) / len(sims))
        per_video[v] = CIDER_SCALE * sum(per_n) / MAX_N

    return CiderScore(score=sum(per_video.values()) / n_videos, per_video=per_video)

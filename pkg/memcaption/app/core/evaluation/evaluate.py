"""
Evaluación de un split: decodificación greedy por vídeo, BLEU y CIDEr,
reporte y volcado de generaciones.
"""

import logging
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from memcaption.app.core.decoder import BaseCaptionDecoder
from memcaption.app.core.evaluation.generate import greedy_decode
from memcaption.app.core.evaluation.metrics import bleu4, cider, sentence_bleu
from memcaption.app.schemas.results import EvaluationReport, GenerationRecord
from memcaption.app.utils.manifest import ManifestRecord
from memcaption.app.utils.vocab import Vocabulary

logger = logging.getLogger(__name__)


def generate_split(
    decoder: BaseCaptionDecoder,
    records: Sequence[ManifestRecord],
    features: Mapping[str, np.ndarray],
    vocab: Vocabulary,
    head: int = 5,
) -> list[GenerationRecord]:
    """Una generación por vídeo, en el orden del manifiesto, con su BLEU de frase suavizado."""
    generations = []
    for record in records:
        result = greedy_decode(decoder, features[record.video_id], record.video_id, head=head, vocab=vocab)
        generations.append(
            GenerationRecord(
                video_id=record.video_id,
                caption=result.text,
                tokens=result.tokens,
                attention=result.attention_lists(),
                sentence_bleu_smoothed=sentence_bleu(result.text, record.captions),
            )
        )
    return generations


def score_generations(
    generations: Sequence[GenerationRecord],
    records: Sequence[ManifestRecord],
    config_hash: str,
    head: int = 5,
    split: str = "train",
) -> EvaluationReport:
    """Métricas de un volcado de generaciones frente a las referencias del manifiesto."""
    if not generations:
        raise ValueError("Sin generaciones que evaluar")
    references = {r.video_id: list(r.captions) for r in records}
    candidates = {g.video_id: g.caption for g in generations}
    bleu = bleu4(candidates, references)
    cid = cider(candidates, references)
    return EvaluationReport(
        bleu4=bleu.score,
        bleu=bleu.bleu,
        cider=cid.score,
        mean_len=float(np.mean([len(g.tokens) for g in generations])),
        config_hash=config_hash,
        head=head,
        split=split,
        videos=len(generations),
    )


def evaluate_split(
    decoder: BaseCaptionDecoder,
    records: Sequence[ManifestRecord],
    features: Mapping[str, np.ndarray],
    vocab: Vocabulary,
    config_hash: str,
    head: int = 5,
    split: str = "train",
) -> tuple[EvaluationReport, list[GenerationRecord]]:
    if not records:
        raise ValueError(f"Split '{split}' vacío")
    generations = generate_split(decoder, records, features, vocab, head)
    report = score_generations(generations, records, config_hash, head, split)
    logger.info(
        "📊 %s (head=%d): BLEU@4=%.2f CIDEr=%.2f mean_len=%.2f",
        split,
        head,
        report.bleu4,
        report.cider,
        report.mean_len,
    )
    return report, generations


def write_generations(generations: Sequence[GenerationRecord], path: Path) -> None:
    lines = [g.model_dump_json() for g in generations]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_generations(path: Path) -> list[GenerationRecord]:
    return [
        GenerationRecord.model_validate_json(line)
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def write_report(report: EvaluationReport, path: Path) -> None:
    Path(path).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


def rescore_generations(
    path: Path,
    records: Sequence[ManifestRecord],
    config_hash: str,
    head: int = 5,
    split: str = "train",
) -> EvaluationReport:
    """Vuelve a puntuar un generations.jsonl ya escrito contra el manifiesto."""
    generations = read_generations(path)
    known = {r.video_id for r in records}
    unknown = [g.video_id for g in generations if g.video_id not in known]
    if unknown:
        raise ValueError(f"{path}: vídeos sin referencias en el split '{split}': {', '.join(unknown)}")
    return score_generations(generations, records, config_hash, head, split)

"""
Manifiesto de descripciones: JSONL con un registro por vídeo.

    {"video_id": "vid0001", "split": "train", "captions": ["a man is cooking", ...]}
"""

import json
import logging
from pathlib import Path
from typing import Iterable

from pydantic import BaseModel, ConfigDict, Field, field_validator

from memcaption.app.schemas.run_config import SplitName
from memcaption.app.utils.text import tokenize

logger = logging.getLogger(__name__)


class ManifestRecord(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    video_id: str = Field(min_length=1)
    split: SplitName
    captions: list[str] = Field(min_length=1)

    @field_validator("captions")
    @classmethod
    def non_blank(cls, v: list[str]) -> list[str]:
        if any(not tokenize(c) for c in v):
            raise ValueError("captions no puede contener descripciones vacías o sin palabras")
        return v


def read_manifest(path: Path) -> list[ManifestRecord]:
    records: list[ManifestRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = ManifestRecord.model_validate_json(line)
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: registro inválido: {e}") from e
        if record.video_id in seen:
            raise ValueError(f"{path}:{lineno}: video_id duplicado '{record.video_id}'")
        seen.add(record.video_id)
        records.append(record)
    logger.debug("Manifiesto %s: %d vídeos", path, len(records))
    return records


def write_manifest(records: Iterable[ManifestRecord], path: Path) -> None:
    lines = [json.dumps(r.model_dump(mode="json"), ensure_ascii=False) for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def split_records(records: Iterable[ManifestRecord], split: str) -> list[ManifestRecord]:
    return [r for r in records if r.split == split]

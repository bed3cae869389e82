"""
Checkpoints binarios (formato MDCK, little-endian).

    "MDCK" | version u32 | meta_len u32 | meta JSON (UTF-8)
    registros hasta EOF: name_len u32 | name UTF-8 | rank u32 | extents u32×rank | float64 payload

El bloque meta guarda la configuración, el vocabulario, el ancho de las
features, la época, la mejor pérdida de validación, la semilla, el paso de
Adam y el hash del checkpoint padre. Los momentos de Adam se guardan como
registros "adam.m.<nombre>" / "adam.v.<nombre>".
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from memcaption.app.core.decoder import BaseCaptionDecoder
from memcaption.app.schemas.run_config import DecoderConfig, TrainingConfig

logger = logging.getLogger(__name__)

MAGIC = b"MDCK"
VERSION = 1
_U32 = struct.Struct("<I")
_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    """Checkpoint ilegible o incompatible."""


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    decoder: DecoderConfig
    training: TrainingConfig
    vocab_tokens: list[str]
    feature_dim: int
    params: dict[str, np.ndarray]
    adam_step: int = 0
    adam: dict[str, np.ndarray] = field(default_factory=dict)
    epoch: int = 0
    best_val: Optional[float] = None
    seed: int = 0
    parent: Optional[str] = None

    def meta(self) -> dict[str, Any]:
        return {
            "decoder": self.decoder.model_dump(mode="json"),
            "training": self.training.model_dump(mode="json"),
            "vocab": self.vocab_tokens,
            "feature_dim": self.feature_dim,
            "epoch": self.epoch,
            "best_val": self.best_val,
            "seed": self.seed,
            "adam_step": self.adam_step,
            "parent": self.parent,
        }


# =============================================================================
# CODIFICACIÓN
# =============================================================================

def _encode_record(name: str, array: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    out = _U32.pack(len(raw)) + raw + _U32.pack(array.ndim)
    out += b"".join(_U32.pack(int(extent)) for extent in array.shape)
    return out + np.ascontiguousarray(array, dtype=_F64).tobytes()


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    meta = json.dumps(ckpt.meta(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, _U32.pack(VERSION), _U32.pack(len(meta)), meta]
    parts += [_encode_record(name, array) for name, array in ckpt.params.items()]
    parts += [_encode_record(name, array) for name, array in ckpt.adam.items()]
    return b"".join(parts)


def save_checkpoint(ckpt: Checkpoint, path: Path) -> str:
    """Escribe el checkpoint y devuelve su hash corto (para el linaje)."""
    blob = encode_checkpoint(ckpt)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(blob)
    digest = hashlib.sha256(blob).hexdigest()[:16]
    logger.info("💾 Checkpoint guardado en %s (epoch=%d, hash=%s)", path, ckpt.epoch, digest)
    return digest


def checkpoint_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


# =============================================================================
# DECODIFICACIÓN
# =============================================================================

class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.blob):
            raise CheckpointError(f"Checkpoint truncado leyendo {what} (offset {self.offset})")
        chunk = self.blob[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    @property
    def done(self) -> bool:
        return self.offset >= len(self.blob)


def decode_checkpoint(blob: bytes) -> Checkpoint:
    reader = _Reader(blob)
    magic = reader.take(4, "magic") if len(blob) >= 4 else blob
    if magic != MAGIC:
        raise CheckpointVersionError(f"No es un checkpoint MDCK v{VERSION} (magic={magic!r})")
    version = reader.u32("version")
    if version != VERSION:
        raise CheckpointVersionError(f"Versión de checkpoint {version} no soportada (se esperaba {VERSION})")
    meta_len = reader.u32("meta_len")
    try:
        meta = json.loads(reader.take(meta_len, "meta").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Bloque meta ilegible: {e}") from e

    arrays: dict[str, np.ndarray] = {}
    while not reader.done:
        name = reader.take(reader.u32("name_len"), "name").decode("utf-8")
        rank = reader.u32(f"rank de {name}")
        shape = tuple(reader.u32(f"extent de {name}") for _ in range(rank))
        count = int(np.prod(shape)) if shape else 1
        payload = reader.take(count * _F64.itemsize, f"payload de {name}")
        arrays[name] = np.frombuffer(payload, dtype=_F64).reshape(shape).astype(np.float64)

    adam = {k: v for k, v in arrays.items() if k.startswith("adam.")}
    params = {k: v for k, v in arrays.items() if not k.startswith("adam.")}
    return Checkpoint(
        decoder=DecoderConfig.model_validate(meta["decoder"]),
        training=TrainingConfig.model_validate(meta["training"]),
        vocab_tokens=list(meta["vocab"]),
        feature_dim=int(meta["feature_dim"]),
        params=params,
        adam_step=int(meta.get("adam_step", 0)),
        adam=adam,
        epoch=int(meta.get("epoch", 0)),
        best_val=meta.get("best_val"),
        seed=int(meta.get("seed", 0)),
        parent=meta.get("parent"),
    )


def load_checkpoint(path: Path) -> Checkpoint:
    ckpt = decode_checkpoint(Path(path).read_bytes())
    logger.info("Checkpoint cargado: %s (epoch=%d, %d tensores)", path, ckpt.epoch, len(ckpt.params))
    return ckpt


# =============================================================================
# PARÁMETROS ↔ DECODIFICADOR
# =============================================================================

def snapshot_parameters(decoder: BaseCaptionDecoder) -> dict[str, np.ndarray]:
    return {name: tensor.data.copy() for name, tensor in decoder.named_parameters().items()}


def assign_parameters(decoder: BaseCaptionDecoder, arrays: Mapping[str, np.ndarray]) -> None:
    """Copia los arrays en los tensores del decodificador comprobando nombres y formas."""
    params = decoder.named_parameters()
    missing = [name for name in params if name not in arrays]
    if missing:
        raise CheckpointShapeError(f"Faltan tensores en el checkpoint: {', '.join(missing)}")
    for name, tensor in params.items():
        array = arrays[name]
        if array.shape != tensor.shape:
            raise CheckpointShapeError(
                f"Tensor '{name}': checkpoint {array.shape} vs configuración {tensor.shape}"
            )
    for name, tensor in params.items():
        tensor.data = np.array(arrays[name], dtype=np.float64)

"""
Ficheros de features por vídeo (formato VFF1, little-endian).

    "VFF1" | version u32 (=1) | id_len u32 | video_id UTF-8 | m u32 | q u32 | m·q float32

Cada fallo de lectura tiene su propia excepción para que la CLI pueda
informar con precisión.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

MAGIC = b"VFF1"
VERSION = 1
_U32 = struct.Struct("<I")
_FLOAT = np.dtype("<f4")
# Cota de seguridad para m·q
MAX_VALUES = 1 << 31


class FeatureFileError(ValueError):
    """Fichero de features ilegible."""


class BadMagicError(FeatureFileError):
    pass


class UnsupportedVersionError(FeatureFileError):
    pass


class TruncatedPayloadError(FeatureFileError):
    pass


class HeaderOverflowError(FeatureFileError):
    pass


@dataclass
class FeatureFile:
    video_id: str
    values: np.ndarray

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ValueError("video_id vacío")
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError(f"values debe ser (m, q) con m, q ≥ 1, recibido {self.values.shape}")

    @property
    def m(self) -> int:
        return int(self.values.shape[0])

    @property
    def q(self) -> int:
        return int(self.values.shape[1])


def encode_feature_file(feature: FeatureFile) -> bytes:
    vid = feature.video_id.encode("utf-8")
    header = MAGIC + _U32.pack(VERSION) + _U32.pack(len(vid)) + vid
    header += _U32.pack(feature.m) + _U32.pack(feature.q)
    return header + np.ascontiguousarray(feature.values, dtype=_FLOAT).tobytes()


def write_feature_file(feature: FeatureFile, path: Path) -> None:
    Path(path).write_bytes(encode_feature_file(feature))


def _read_u32(blob: bytes, offset: int, what: str) -> tuple[int, int]:
    if offset + 4 > len(blob):
        raise TruncatedPayloadError(f"truncated payload: falta {what} en el offset {offset}")
    return _U32.unpack_from(blob, offset)[0], offset + 4


def decode_feature_file(blob: bytes) -> FeatureFile:
    if blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic: {blob[:4]!r} (se esperaba {MAGIC!r})")
    version, offset = _read_u32(blob, 4, "version")
    if version != VERSION:
        raise UnsupportedVersionError(f"versión {version} no soportada (se esperaba {VERSION})")
    id_len, offset = _read_u32(blob, offset, "id_len")
    if offset + id_len > len(blob):
        raise TruncatedPayloadError(f"truncated payload: video_id de {id_len} bytes")
    try:
        video_id = blob[offset : offset + id_len].decode("utf-8")
    except UnicodeDecodeError as e:
        raise FeatureFileError(f"video_id no es UTF-8 válido: {e}") from e
    offset += id_len
    m, offset = _read_u32(blob, offset, "m")
    q, offset = _read_u32(blob, offset, "q")
    if m < 1 or q < 1 or m * q > MAX_VALUES:
        raise HeaderOverflowError(f"cabecera (m={m}, q={q}) fuera de rango")
    expected = m * q * _FLOAT.itemsize
    payload = blob[offset:]
    if len(payload) < expected:
        raise TruncatedPayloadError(f"truncated payload: {len(payload)} bytes de {expected}")
    if len(payload) > expected:
        raise FeatureFileError(f"{len(payload) - expected} bytes sobrantes tras el payload")
    values = np.frombuffer(payload, dtype=_FLOAT).reshape(m, q).copy()
    return FeatureFile(video_id=video_id, values=values)


def read_feature_file(path: Path) -> FeatureFile:
    return decode_feature_file(Path(path).read_bytes())


def feature_path(features_dir: Path, video_id: str) -> Path:
    return Path(features_dir) / f"{video_id}.vff"


def load_features(features_dir: Path, video_ids: list[str]) -> dict[str, np.ndarray]:
    """Carga las features de varios vídeos y comprueba que el id coincide con el nombre."""
    out: dict[str, np.ndarray] = {}
    for video_id in video_ids:
        feature = read_feature_file(feature_path(features_dir, video_id))
        if feature.video_id != video_id:
            raise FeatureFileError(
                f"{feature_path(features_dir, video_id)} contiene video_id '{feature.video_id}'"
            )
        out[video_id] = feature.values
    logger.debug("Features cargadas: %d vídeos", len(out))
    return out

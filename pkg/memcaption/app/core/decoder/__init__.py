"""
Decodificadores: memoria jerárquica de cinco capas y baseline LSTM.
"""

from typing import Mapping, Optional

from memcaption.app.core.decoder.base import BaseCaptionDecoder, ForwardResult, StepOutput
from memcaption.app.core.decoder.lstm import LstmDecoder
from memcaption.app.core.decoder.memdec import MemoryDecoder
from memcaption.app.core.tensor import Tensor
from memcaption.app.schemas.run_config import DecoderConfig


def build_decoder(
    config: DecoderConfig,
    vocab_size: int,
    feature_dim: int,
    tensors: Optional[Mapping[str, Tensor]] = None,
) -> BaseCaptionDecoder:
    """Instancia el decodificador indicado por config.decoder."""
    cls = LstmDecoder if config.decoder == "lstm" else MemoryDecoder
    return cls(config, vocab_size, feature_dim, tensors)


__all__ = [
    "BaseCaptionDecoder",
    "ForwardResult",
    "LstmDecoder",
    "MemoryDecoder",
    "StepOutput",
    "build_decoder",
]

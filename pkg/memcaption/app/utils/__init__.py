"""
Utils - Entrada/salida de datos compartida por entrenamiento y evaluación.
"""

from .text import tokenize
from .vocab import BOS, EOS, PAD, UNK, CaptionSequence, Vocabulary, build_vocab, decode_tokens, encode_caption
from .features import FeatureFile, FeatureFileError, read_feature_file, write_feature_file
from .manifest import ManifestRecord, read_manifest
from .batching import Batch, BatchStream, CaptionExample, batch_iter, build_examples

__all__ = [
    # Text
    "tokenize",
    # Vocab
    "BOS",
    "EOS",
    "PAD",
    "UNK",
    "CaptionSequence",
    "Vocabulary",
    "build_vocab",
    "decode_tokens",
    "encode_caption",
    # Features
    "FeatureFile",
    "FeatureFileError",
    "read_feature_file",
    "write_feature_file",
    # Manifest
    "ManifestRecord",
    "read_manifest",
    # Batching
    "Batch",
    "BatchStream",
    "CaptionExample",
    "batch_iter",
    "build_examples",
]

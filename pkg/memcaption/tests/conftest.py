"""
Fixtures compartidas para tests de memcaption.
"""

import numpy as np
import pytest

from memcaption.app.core.decoder import build_decoder
from memcaption.app.schemas.run_config import DecoderConfig, TrainingConfig
from memcaption.app.utils.batching import CaptionExample

TINY_VOCAB = 11
TINY_FEATURE_DIM = 5


@pytest.fixture
def rng():
    """Generador con semilla fija."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """Configuración mínima del decodificador (n=8, d_a=4)."""
    return DecoderConfig(n=8, d_a=4, seed=3, max_caption_len=6)


@pytest.fixture
def tiny_training():
    return TrainingConfig(lr=1e-3, batch_size=2, epochs=2)


@pytest.fixture
def tiny_decoder(tiny_config):
    return build_decoder(tiny_config, TINY_VOCAB, TINY_FEATURE_DIM)


@pytest.fixture
def tiny_lstm(tiny_config):
    return build_decoder(tiny_config.model_copy(update={"decoder": "lstm"}), TINY_VOCAB, TINY_FEATURE_DIM)


@pytest.fixture
def make_example(rng):
    """Fábrica de ejemplos: m=3 frames, |V|=11, T pasos."""

    def _make(video_id: str = "vid", steps: int = 4) -> CaptionExample:
        features = rng.normal(size=(3, TINY_FEATURE_DIM))
        words = rng.integers(4, TINY_VOCAB, size=steps - 1)
        return CaptionExample(
            video_id=video_id,
            features=features,
            tokens=(1, *(int(w) for w in words), 2),
            text="",
        )

    return _make


@pytest.fixture
def toy_dir(tmp_path):
    """Corpus sintético escrito en un directorio temporal."""
    from memcaption.app.utils.toy_data import make_toy_data

    paths = make_toy_data(tmp_path / "toy", seed=0)
    return paths

"""
Corpus sintético para el pipeline de sobreajuste.

10 vídeos, m = 5 frames, q = 16, una descripción fija y distinta por vídeo,
vocabulario de 30 entradas (reservados incluidos). Todo en split "train".
"""

import json
import logging
from pathlib import Path

import numpy as np

from memcaption.app.utils.features import FeatureFile, feature_path, write_feature_file
from memcaption.app.utils.manifest import ManifestRecord, write_manifest
from memcaption.app.utils.vocab import build_vocab

logger = logging.getLogger(__name__)

TOY_FRAMES = 5
TOY_FEATURE_DIM = 16

TOY_CAPTIONS = (
    "a man is cooking",
    "a woman is singing",
    "a dog is running",
    "a cat is sleeping",
    "a man is playing guitar",
    "a woman is cutting onions",
    "a boy is riding a bike",
    "a girl is dancing",
    "two men are talking",
    "a car is driving fast",
)

TOY_CONFIG = {
    "decoder": {"n": 32, "d_a": 16, "max_caption_len": 12},
    "training": {"lr": 0.005, "batch_size": 2, "epochs": 500, "target_loss": 0.05, "patience": 500},
}


def make_toy_data(out_dir: Path, seed: int = 0) -> dict[str, Path]:
    """
    Escribe features/, manifest.jsonl, vocab.tsv y toy_config.json en out_dir.

    Returns:
        Rutas de cada artefacto
    """
    out_dir = Path(out_dir)
    features_dir = out_dir / "features"
    features_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    records = []
    for i, caption in enumerate(TOY_CAPTIONS):
        video_id = f"toy{i:02d}"
        values = rng.standard_normal((TOY_FRAMES, TOY_FEATURE_DIM)).astype(np.float32)
        write_feature_file(FeatureFile(video_id=video_id, values=values), feature_path(features_dir, video_id))
        records.append(ManifestRecord(video_id=video_id, split="train", captions=[caption]))

    manifest = out_dir / "manifest.jsonl"
    write_manifest(records, manifest)

    vocab = build_vocab(TOY_CAPTIONS, min_count=1)
    vocab_path = out_dir / "vocab.tsv"
    vocab.save(vocab_path)

    config_path = out_dir / "toy_config.json"
    config_path.write_text(json.dumps(TOY_CONFIG, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    logger.info("🧪 Corpus sintético: %d vídeos, vocabulario %d en %s", len(records), len(vocab), out_dir)
    return {
        "features_dir": features_dir,
        "manifest": manifest,
        "vocab": vocab_path,
        "config": config_path,
    }

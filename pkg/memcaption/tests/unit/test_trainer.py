"""
Tests del bucle de entrenamiento.
"""

import json

import numpy as np
import pytest

from memcaption.app.core.decoder import build_decoder
from memcaption.app.core.training.trainer import Trainer, check_layer_ordering
from memcaption.app.schemas.run_config import DecoderConfig, TrainingConfig
from memcaption.app.utils.batching import BatchStream, CaptionExample


def _examples(seed: int, count: int = 4) -> list[CaptionExample]:
    rng = np.random.default_rng(seed)
    return [
        CaptionExample(
            video_id=f"v{i}",
            features=rng.normal(size=(3, 5)),
            tokens=(1, *(int(w) for w in rng.integers(4, 11, size=3)), 2),
            text="",
        )
        for i in range(count)
    ]


class TestTrainStep:
    def test_single_step_descends(self):
        descended = 0
        for seed in range(10):
            decoder = build_decoder(DecoderConfig(n=8, d_a=4, seed=seed), 11, 5)
            trainer = Trainer(decoder, TrainingConfig(lr=1e-3))
            examples = _examples(seed, 2)
            before = decoder.batch_loss(examples).total.item()
            trainer.train_step(examples)
            after = decoder.batch_loss(examples).total.item()
            descended += after < before
        assert descended >= 9

    def test_stats(self, tiny_decoder):
        stats = Trainer(tiny_decoder, TrainingConfig()).train_step(_examples(0, 2))
        assert set(stats.per_layer) == {1, 3, 5}
        assert stats.grad_norm > 0.0
        assert np.isfinite(stats.loss)

    def test_empty_epoch(self, tiny_decoder):
        with pytest.raises(ValueError, match="vacío"):
            Trainer(tiny_decoder, TrainingConfig()).train_epoch([])


class TestFit:
    def _fit(self, tmp_path, name: str):
        decoder = build_decoder(DecoderConfig(n=8, d_a=4, seed=1), 11, 5)
        training = TrainingConfig(lr=5e-3, batch_size=2, epochs=3, patience=10)
        trainer = Trainer(decoder, training)
        log = tmp_path / f"{name}.jsonl"
        result = trainer.fit(BatchStream(_examples(7), 2, seed=1), val_examples=_examples(8, 2), log_path=log)
        return result, log

    def test_log_and_history(self, tmp_path):
        result, log = self._fit(tmp_path, "a")
        lines = [json.loads(line) for line in log.read_text().splitlines()]
        assert len(lines) == len(result.history) == 3
        assert set(lines[0]["per_layer"]) == {"1", "3", "5"}
        assert lines[0]["val_loss"] is not None
        assert 1 <= result.best_epoch <= 3
        assert result.best_params

    def test_reproducible(self, tmp_path):
        a, _ = self._fit(tmp_path, "a")
        b, _ = self._fit(tmp_path, "b")
        assert [s.loss for s in a.history] == [s.loss for s in b.history]

    def test_target_loss_stops(self, tiny_decoder):
        training = TrainingConfig(epochs=5, batch_size=2, target_loss=1e6)
        result = Trainer(tiny_decoder, training).fit(BatchStream(_examples(0), 2))
        assert result.stopped_early
        assert len(result.history) == 1


class TestLayerOrdering:
    def test_monotone(self):
        assert check_layer_ordering({"1": 3.0, "3": 2.0, "5": 1.0})

    def test_within_slack(self):
        assert check_layer_ordering({"1": 2.0, "3": 2.05, "5": 2.0})

    def test_violation_warns(self, caplog):
        assert not check_layer_ordering({"1": 1.0, "3": 2.0, "5": 3.0})
        assert "Orden de capas" in caplog.text

"""
Tests de checkpoints MDCK.
"""

import struct

import numpy as np
import pytest

from memcaption.app.core.decoder import build_decoder
from memcaption.app.core.training.checkpoint import (
    Checkpoint,
    CheckpointError,
    CheckpointShapeError,
    CheckpointVersionError,
    assign_parameters,
    checkpoint_hash,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
    snapshot_parameters,
)
from memcaption.app.schemas.run_config import TrainingConfig

VOCAB_TOKENS = ["<pad>", "<bos>", "<eos>", "<unk>", "a", "b", "c", "d", "e", "f", "g"]


@pytest.fixture
def checkpoint(tiny_decoder):
    return Checkpoint(
        decoder=tiny_decoder.config,
        training=TrainingConfig(),
        vocab_tokens=VOCAB_TOKENS,
        feature_dim=5,
        params=snapshot_parameters(tiny_decoder),
        adam_step=3,
        adam={"adam.m.fusion.W1": np.ones((8, 8)), "adam.v.fusion.W1": np.full((8, 8), 2.0)},
        epoch=4,
        best_val=1.25,
        seed=3,
    )


class TestRoundTrip:
    def test_meta_and_arrays(self, checkpoint):
        decoded = decode_checkpoint(encode_checkpoint(checkpoint))
        assert decoded.decoder == checkpoint.decoder
        assert decoded.vocab_tokens == VOCAB_TOKENS
        assert (decoded.epoch, decoded.adam_step, decoded.best_val) == (4, 3, 1.25)
        assert set(decoded.params) == set(checkpoint.params)
        np.testing.assert_array_equal(decoded.adam["adam.v.fusion.W1"], np.full((8, 8), 2.0))

    def test_restored_forward_bit_identical(self, tmp_path, checkpoint, tiny_decoder, make_example):
        path = tmp_path / "model.mdck"
        digest = save_checkpoint(checkpoint, path)
        assert digest == checkpoint_hash(path)

        loaded = load_checkpoint(path)
        restored = build_decoder(loaded.decoder, len(loaded.vocab_tokens), loaded.feature_dim)
        assign_parameters(restored, loaded.params)

        ex = make_example()
        a = tiny_decoder.forward(ex.features, ex.tokens[:-1], ex.video_id)
        b = restored.forward(ex.features, ex.tokens[:-1], ex.video_id)
        for sa, sb in zip(a.steps, b.steps):
            np.testing.assert_array_equal(sa.probs[5].data, sb.probs[5].data)


class TestCorruption:
    def test_unknown_version(self, checkpoint):
        blob = bytearray(encode_checkpoint(checkpoint))
        blob[4:8] = struct.pack("<I", 99)
        with pytest.raises(CheckpointVersionError, match="99"):
            decode_checkpoint(bytes(blob))

    def test_bad_magic(self, checkpoint):
        with pytest.raises(CheckpointVersionError, match="MDCK"):
            decode_checkpoint(b"ABCD" + encode_checkpoint(checkpoint)[4:])

    def test_truncated(self, checkpoint):
        with pytest.raises(CheckpointError, match="truncado"):
            decode_checkpoint(encode_checkpoint(checkpoint)[:-5])


class TestAssign:
    def test_width_mismatch_names_tensor(self, checkpoint, tiny_config):
        other = build_decoder(tiny_config.model_copy(update={"n": 6}), 11, 5)
        with pytest.raises(CheckpointShapeError, match="fusion.W1"):
            assign_parameters(other, checkpoint.params)

    def test_missing_tensor(self, checkpoint, tiny_decoder):
        params = dict(checkpoint.params)
        del params["out_head.b"]
        with pytest.raises(CheckpointShapeError, match="out_head.b"):
            assign_parameters(tiny_decoder, params)

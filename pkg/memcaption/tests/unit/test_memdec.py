"""
Tests del decodificador de memoria: capas, bancos, arranque en frío y causalidad.
"""

import numpy as np
import pytest

from memcaption.app.core.decoder import build_decoder
from memcaption.app.core.decoder.base import project_and_pool
from memcaption.app.core.decoder.memdec import cold_layer_step, gated_activation, layer_step, predict_word
from memcaption.app.core.decoder.memory import ColdStartState, MemoryBank
from memcaption.app.core.decoder.params import AttentionParams, MemoryLayerParams, Projection
from memcaption.app.core.tensor import ShapeError, Tensor

TINY_VOCAB = 11
TINY_FEATURE_DIM = 5


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _layer(rng, n: int, d_a: int = 2, zero: bool = False) -> MemoryLayerParams:
    draw = (lambda *s: np.zeros(s)) if zero else (lambda *s: rng.normal(size=s))
    return MemoryLayerParams(
        wf=Tensor(draw(n, n)),
        wg=Tensor(draw(n, n)),
        bf=Tensor(draw(n)),
        bg=Tensor(draw(n)),
        mem_attn=AttentionParams(
            w=Tensor(draw(d_a)), Wa=Tensor(draw(d_a, n)), Ua=Tensor(draw(d_a, n)), ba=Tensor(draw(d_a))
        ),
    )


class TestProjectAndPool:
    def test_mean_of_rows(self, rng):
        X, W = rng.normal(size=(4, 3)), rng.normal(size=(3, 2))
        Z, V = project_and_pool(Tensor(X), Tensor(W))
        np.testing.assert_allclose(Z.data, X @ W)
        np.testing.assert_allclose(V.data, (X @ W).mean(axis=0))

    def test_requires_matrix(self):
        with pytest.raises(ShapeError, match="project_and_pool"):
            project_and_pool(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))


class TestLayerPieces:
    def test_zero_params_give_zero_hidden(self, rng):
        bank = MemoryBank()
        bank.append(1, Tensor(rng.normal(size=4)))
        h, _ = layer_step(1, Tensor(rng.normal(size=4)), bank, 2, _layer(rng, 4, zero=True))
        np.testing.assert_array_equal(h.data, np.zeros(4))

    def test_hand_case_single_slot(self, rng):
        layer = _layer(rng, 2)
        s, x = rng.normal(size=2), rng.normal(size=2)
        bank = MemoryBank()
        bank.append(1, Tensor(s))
        h, weights = layer_step(1, Tensor(x), bank, 2, layer)
        expected = np.tanh(x @ layer.wf.data + layer.bf.data) * _sigmoid(s @ layer.wg.data + layer.bg.data)
        np.testing.assert_allclose(weights.data, [1.0])
        np.testing.assert_allclose(h.data, expected, atol=1e-12)

    def test_input_appended_after_use(self, rng):
        bank = MemoryBank()
        bank.append(2, Tensor(rng.normal(size=3)))
        x = Tensor(rng.normal(size=3))
        layer_step(2, x, bank, 2, _layer(rng, 3))
        assert bank.size(2) == 2
        assert bank.entries(2)[-1] is x

    def test_empty_bank_raises(self, rng):
        with pytest.raises(RuntimeError, match="Banco"):
            layer_step(1, Tensor(np.ones(3)), MemoryBank(), 1, _layer(rng, 3))

    def test_wrong_step_raises(self, rng):
        bank = MemoryBank()
        bank.append(1, Tensor(np.ones(3)))
        with pytest.raises(RuntimeError, match="paso 3"):
            bank.slots(1, 3)

    def test_cold_layer_uses_input_as_context(self, rng):
        layer = _layer(rng, 3)
        x = rng.normal(size=3)
        h = cold_layer_step(1, Tensor(x), MemoryBank(), layer)
        expected = np.tanh(x @ layer.wf.data + layer.bf.data) * _sigmoid(x @ layer.wg.data + layer.bg.data)
        np.testing.assert_allclose(h.data, expected, atol=1e-12)

    def test_gated_activation_bounded(self, rng):
        layer = _layer(rng, 6)
        h = gated_activation(Tensor(rng.normal(size=6) * 50), Tensor(rng.normal(size=6) * 50), layer)
        assert np.all(np.abs(h.data) <= 1.0)

    def test_predict_word_uniform_with_zero_head(self):
        head = Projection(W=Tensor(np.zeros((3, 7))), b=Tensor(np.zeros(7)))
        probs = predict_word(Tensor(np.ones(3)), Tensor(np.ones(3)), head)
        np.testing.assert_allclose(probs.data, np.full(7, 1 / 7))


class TestColdStart:
    def test_deterministic(self):
        a = ColdStartState.from_seed(7, "video42", 6)
        b = ColdStartState.from_seed(7, "video42", 6)
        for ha, hb in zip(a.H, b.H):
            np.testing.assert_array_equal(ha.data, hb.data)

    def test_differs_by_video_and_seed(self):
        base = ColdStartState.from_seed(7, "video42", 6).layer(1).data
        assert not np.array_equal(base, ColdStartState.from_seed(7, "video43", 6).layer(1).data)
        assert not np.array_equal(base, ColdStartState.from_seed(8, "video42", 6).layer(1).data)

    def test_layers_distinct(self):
        state = ColdStartState.from_seed(0, "v", 4)
        assert len(state.H) == 5
        assert not np.array_equal(state.layer(1).data, state.layer(2).data)


class TestMemoryDecoder:
    def test_bank_sizes_after_forward(self, tiny_decoder, make_example):
        ex = make_example(steps=5)
        result = tiny_decoder.forward(ex.features, ex.tokens[:-1], ex.video_id)
        assert result.state.bank.sizes() == {layer: 5 for layer in range(1, 6)}

    def test_distributions_valid(self, tiny_decoder, make_example):
        ex = make_example()
        result = tiny_decoder.forward(ex.features, ex.tokens[:-1], ex.video_id)
        for step in result.steps:
            assert set(step.probs) == {1, 3, 5}
            for probs in step.probs.values():
                assert probs.shape == (TINY_VOCAB,)
                assert probs.data.sum() == pytest.approx(1.0)
                assert np.all(probs.data > 0.0)

    def test_hidden_bounded(self, tiny_decoder, make_example):
        ex = make_example()
        result = tiny_decoder.forward(ex.features * 100.0, ex.tokens[:-1], ex.video_id)
        for step in result.steps:
            for h in step.hidden.values():
                assert np.all(np.abs(h.data) <= 1.0)

    def test_attention_sites(self, tiny_decoder, make_example):
        ex = make_example()
        result = tiny_decoder.forward(ex.features, ex.tokens[:-1], ex.video_id)
        assert set(result.steps[0].attention) == {"visual_1", "visual_4"}
        later = result.steps[2].attention
        assert set(later) == {"visual_1", "visual_4", *(f"memory_{i}" for i in range(1, 6))}
        assert later["memory_3"].shape == (2,)
        assert later["visual_1"].shape == (3,)

    @pytest.mark.parametrize("position", [1, 2, 3])
    def test_causal(self, tiny_decoder, make_example, position):
        ex = make_example(steps=5)
        inputs = list(ex.tokens[:-1])
        perturbed = list(inputs)
        perturbed[position] = 4 if inputs[position] != 4 else 5
        base = tiny_decoder.forward(ex.features, inputs, ex.video_id)
        other = tiny_decoder.forward(ex.features, perturbed, ex.video_id)
        for t in range(position):
            np.testing.assert_array_equal(base.steps[t].probs[5].data, other.steps[t].probs[5].data)
        assert not np.array_equal(base.steps[position].probs[5].data, other.steps[position].probs[5].data)

    def test_step_loop_equals_forward(self, tiny_decoder, make_example):
        ex = make_example()
        result = tiny_decoder.forward(ex.features, ex.tokens[:-1], ex.video_id)
        Z, V = tiny_decoder.encode(ex.features)
        state = tiny_decoder.begin(Z, V, ex.video_id)
        for t, token in enumerate(ex.tokens[:-1]):
            out = tiny_decoder.step(state, token)
            np.testing.assert_array_equal(out.probs[5].data, result.steps[t].probs[5].data)

    def test_forward_deterministic(self, tiny_decoder, make_example):
        ex = make_example()
        a = tiny_decoder.forward(ex.features, ex.tokens[:-1], ex.video_id)
        b = tiny_decoder.forward(ex.features, ex.tokens[:-1], ex.video_id)
        np.testing.assert_array_equal(a.steps[-1].probs[5].data, b.steps[-1].probs[5].data)

    def test_zero_weights_uniform(self, tiny_decoder, make_example):
        zeros = {name: Tensor(np.zeros(spec.shape)) for name, spec in tiny_decoder.specs.items()}
        decoder = build_decoder(tiny_decoder.config, TINY_VOCAB, TINY_FEATURE_DIM, tensors=zeros)
        ex = make_example()
        result = decoder.forward(ex.features, ex.tokens[:-1], ex.video_id)
        for step in result.steps:
            for probs in step.probs.values():
                np.testing.assert_allclose(probs.data, np.full(TINY_VOCAB, 1 / TINY_VOCAB))

    def test_missing_tensor(self, tiny_decoder):
        tensors = tiny_decoder.named_parameters()
        del tensors["fusion.W1"]
        with pytest.raises(KeyError, match="fusion.W1"):
            build_decoder(tiny_decoder.config, TINY_VOCAB, TINY_FEATURE_DIM, tensors=tensors)

    def test_wrong_shape(self, tiny_decoder):
        tensors = tiny_decoder.named_parameters()
        tensors["concat_proj.b"] = Tensor(np.zeros(3))
        with pytest.raises(ShapeError, match="concat_proj.b"):
            build_decoder(tiny_decoder.config, TINY_VOCAB, TINY_FEATURE_DIM, tensors=tensors)

    @pytest.mark.parametrize("update", [{"attention": "dot"}, {"fusion": "sum"}, {"fusion": "product"}])
    def test_variants_run(self, tiny_config, make_example, update):
        decoder = build_decoder(tiny_config.model_copy(update=update), TINY_VOCAB, TINY_FEATURE_DIM)
        ex = make_example()
        loss = decoder.batch_loss([ex])
        assert np.isfinite(loss.total.item())

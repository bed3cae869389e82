"""
Tests de atención soft y dot.
"""

import numpy as np
import pytest

from memcaption.app.core.decoder.attention import attend, dot_attention, soft_attention
from memcaption.app.core.decoder.params import AttentionParams
from memcaption.app.core.tensor import ShapeError, Tensor


def _random_params(rng, n: int, d_a: int) -> AttentionParams:
    return AttentionParams(
        w=Tensor(rng.normal(size=d_a)),
        Wa=Tensor(rng.normal(size=(d_a, n))),
        Ua=Tensor(rng.normal(size=(d_a, n))),
        ba=Tensor(rng.normal(size=d_a)),
    )


class TestSoftAttention:
    def test_single_slot(self, rng):
        slot = Tensor(rng.normal(size=4))
        res = soft_attention(Tensor(rng.normal(size=4)), [slot], _random_params(rng, 4, 3))
        np.testing.assert_allclose(res.weights.data, [1.0])
        np.testing.assert_allclose(res.pooled.data, slot.data)

    def test_identical_slots_uniform(self, rng):
        s = rng.normal(size=4)
        res = soft_attention(Tensor(rng.normal(size=4)), [Tensor(s)] * 3, _random_params(rng, 4, 2))
        np.testing.assert_allclose(res.weights.data, [1 / 3] * 3, atol=1e-12)
        np.testing.assert_allclose(res.pooled.data, s, atol=1e-12)

    def test_scalar_hand_case(self):
        params = AttentionParams(
            w=Tensor([1.0]), Wa=Tensor([[1.0]]), Ua=Tensor([[1.0]]), ba=Tensor([0.0])
        )
        res = soft_attention(Tensor([0.0]), [Tensor([0.0]), Tensor([10.0])], params)
        np.testing.assert_allclose(res.weights.data, [0.2689, 0.7311], atol=1e-4)

    def test_weights_sum_to_one(self, rng):
        S = Tensor(rng.normal(size=(6, 5)))
        res = soft_attention(Tensor(rng.normal(size=5)), S, _random_params(rng, 5, 3))
        assert res.weights.data.sum() == pytest.approx(1.0)
        assert np.all(res.weights.data >= 0.0)

    def test_permutation_equivariant(self, rng):
        S = rng.normal(size=(5, 4))
        q = Tensor(rng.normal(size=4))
        params = _random_params(rng, 4, 3)
        perm = rng.permutation(5)
        base = soft_attention(q, Tensor(S), params)
        permuted = soft_attention(q, Tensor(S[perm]), params)
        np.testing.assert_allclose(permuted.weights.data, base.weights.data[perm], atol=1e-12)
        np.testing.assert_allclose(permuted.pooled.data, base.pooled.data, atol=1e-12)

    def test_empty_slots(self, rng):
        with pytest.raises(ValueError, match="vacío"):
            soft_attention(Tensor(np.ones(4)), [], _random_params(rng, 4, 2))

    def test_query_width_mismatch(self, rng):
        with pytest.raises(ShapeError, match="soft_attention"):
            soft_attention(Tensor(np.ones(3)), Tensor(np.ones((2, 4))), _random_params(rng, 4, 2))


class TestDotAttention:
    def test_closed_form(self):
        s = np.ones(4)
        res = dot_attention(Tensor(s), [Tensor(s), Tensor(-s)])
        expected = np.exp([2.0, -2.0]) / np.exp([2.0, -2.0]).sum()
        np.testing.assert_allclose(res.weights.data, expected, atol=1e-12)

    def test_attend_dispatch(self, rng):
        S = Tensor(rng.normal(size=(3, 4)))
        q = Tensor(rng.normal(size=4))
        np.testing.assert_array_equal(attend(q, S, "dot", None).weights.data, dot_attention(q, S).weights.data)

    def test_soft_requires_params(self):
        with pytest.raises(ValueError, match="soft"):
            attend(Tensor(np.ones(2)), Tensor(np.ones((1, 2))), "soft", None)

"""
Tests de la fusión multimodal (ccmf, sum, product).
"""

import numpy as np
import pytest

from memcaption.app.core.decoder.fusion import ccmf_fuse, fuse
from memcaption.app.core.decoder.params import CcmfParams
from memcaption.app.core.tensor import ShapeError, Tensor


def _params(W1, W2) -> CcmfParams:
    return CcmfParams(W1=Tensor(W1), W2=Tensor(W2))


def _conv(k, s):
    n = len(k)
    return np.array([sum(k[j] * s[(i - j) % n] for j in range(n)) for i in range(n)])


class TestCcmf:
    def test_zero_inputs(self, rng):
        params = _params(rng.normal(size=(4, 4)), rng.normal(size=(4, 4)))
        out = ccmf_fuse(Tensor(np.zeros(4)), Tensor(np.zeros(4)), params)
        np.testing.assert_array_equal(out.data, np.zeros(4))

    @pytest.mark.parametrize("v,c", [(2.0, 3.0), (-2.0, 3.0), (0.5, -4.0), (-1.0, -1.0)])
    def test_scalar_case(self, v, c):
        out = ccmf_fuse(Tensor([v]), Tensor([c]), _params([[1.0]], [[1.0]]))
        assert out.item() == pytest.approx(2.0 * max(0.0, v * c))

    def test_identity_maps_symmetric(self, rng):
        V, C = rng.normal(size=6), rng.normal(size=6)
        params = _params(np.eye(6), np.eye(6))
        a = ccmf_fuse(Tensor(V), Tensor(C), params).data
        b = ccmf_fuse(Tensor(C), Tensor(V), params).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_matches_brute_force(self, rng):
        V, C = rng.normal(size=5), rng.normal(size=5)
        W1, W2 = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
        expected = np.maximum(_conv(W2 @ C, V), 0.0) + np.maximum(_conv(W1 @ V, C), 0.0)
        out = ccmf_fuse(Tensor(V), Tensor(C), _params(W1, W2)).data
        np.testing.assert_allclose(out, expected, atol=1e-10)

    def test_non_negative(self, rng):
        params = _params(rng.normal(size=(8, 8)), rng.normal(size=(8, 8)))
        out = ccmf_fuse(Tensor(rng.normal(size=8)), Tensor(rng.normal(size=8)), params)
        assert np.all(out.data >= 0.0)

    def test_width_mismatch(self):
        with pytest.raises(ShapeError, match="ccmf_fuse"):
            ccmf_fuse(Tensor(np.ones(4)), Tensor(np.ones(3)), _params(np.eye(4), np.eye(4)))


class TestFuseVariants:
    def test_sum(self):
        out = fuse(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]), "sum", None)
        np.testing.assert_array_equal(out.data, [4.0, 6.0])

    def test_product(self):
        out = fuse(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]), "product", None)
        np.testing.assert_array_equal(out.data, [3.0, 8.0])

    def test_ccmf_requires_params(self):
        with pytest.raises(ValueError, match="ccmf"):
            fuse(Tensor([1.0]), Tensor([1.0]), "ccmf", None)

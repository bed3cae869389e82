"""
Fusión multimodal del vector visual medio V y del embedding léxico C.

- ccmf: cada modalidad se proyecta a un kernel que se convoluciona
  (circularmente) con la otra; los dos resultados pasan por ReLU y se suman
- sum / product: variantes sin parámetros para ablación
"""

from typing import Optional

from memcaption.app.core.decoder.params import CcmfParams
from memcaption.app.core.tensor import ShapeError, Tensor, ops
from memcaption.app.schemas.run_config import FusionKind


def ccmf_fuse(V: Tensor, C: Tensor, params: CcmfParams) -> Tensor:
    """
    M = ReLU(conv(kernel2, V)) + ReLU(conv(kernel1, C))

    con kernel1 = V·W1ᵀ y kernel2 = C·W2ᵀ.
    """
    n = V.shape[0]
    if V.shape != (n,) or C.shape != (n,) or params.W1.shape != (n, n) or params.W2.shape != (n, n):
        raise ShapeError(
            f"ccmf_fuse: anchos incompatibles V{V.shape} C{C.shape} "
            f"W1{params.W1.shape} W2{params.W2.shape}"
        )
    kernel1 = ops.matvec(params.W1, V)
    kernel2 = ops.matvec(params.W2, C)
    a = ops.circular_conv(kernel2, V)
    b = ops.circular_conv(kernel1, C)
    return ops.add(ops.relu(a), ops.relu(b))


def fuse(V: Tensor, C: Tensor, kind: FusionKind, params: Optional[CcmfParams]) -> Tensor:
    if kind == "ccmf":
        if params is None:
            raise ValueError("fusion='ccmf' requiere parámetros W1, W2")
        return ccmf_fuse(V, C, params)
    if kind == "sum":
        return ops.add(V, C)
    if kind == "product":
        return ops.mul(V, C)
    raise ValueError(f"Fusión desconocida: {kind!r}")

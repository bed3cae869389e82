"""
Atención aditiva (soft) y atención por producto escalar.

Ambas reciben una consulta (n,) y una secuencia de k ≥ 1 slots (n,) y
devuelven los pesos sobre los slots y el vector agregado.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from memcaption.app.core.decoder.params import AttentionParams
from memcaption.app.core.tensor import ShapeError, Tensor, ops
from memcaption.app.schemas.run_config import AttentionKind


@dataclass
class AttentionResult:
    weights: Tensor
    pooled: Tensor


def _slot_matrix(slots: Sequence[Tensor] | Tensor) -> Tensor:
    if isinstance(slots, Tensor):
        if slots.ndim != 2:
            raise ShapeError(f"atención: slots debe ser (k, n), recibido {slots.shape}")
        return slots
    if len(slots) == 0:
        raise ValueError("atención sobre un conjunto vacío de slots")
    return ops.stack(slots)


def soft_attention(query: Tensor, slots: Sequence[Tensor] | Tensor, params: AttentionParams) -> AttentionResult:
    """e_i = wᵀ·tanh(Wa·q + Ua·s_i + ba); pesos = softmax(e); pooled = Σ pesos_i·s_i."""
    S = _slot_matrix(slots)
    if query.shape != (S.shape[1],):
        raise ShapeError(f"soft_attention: query{query.shape} no compatible con slots{S.shape}")

    q_term = ops.add(ops.matvec(params.Wa, query), params.ba)
    s_terms = ops.channel_projection(S, ops.transpose(params.Ua))
    hidden = ops.tanh(ops.add_rows(s_terms, q_term))
    weights = ops.softmax(ops.matvec(hidden, params.w))
    return AttentionResult(weights=weights, pooled=ops.channel_projection(weights, S))


def dot_attention(query: Tensor, slots: Sequence[Tensor] | Tensor) -> AttentionResult:
    """e_i = (q·s_i)/√n."""
    S = _slot_matrix(slots)
    n = S.shape[1]
    if query.shape != (n,):
        raise ShapeError(f"dot_attention: query{query.shape} no compatible con slots{S.shape}")
    scores = ops.scale(ops.matvec(S, query), 1.0 / np.sqrt(n))
    weights = ops.softmax(scores)
    return AttentionResult(weights=weights, pooled=ops.channel_projection(weights, S))


def attend(
    query: Tensor,
    slots: Sequence[Tensor] | Tensor,
    kind: AttentionKind,
    params: Optional[AttentionParams],
) -> AttentionResult:
    if kind == "dot":
        return dot_attention(query, slots)
    if params is None:
        raise ValueError("attention='soft' requiere parámetros de atención")
    return soft_attention(query, slots, params)

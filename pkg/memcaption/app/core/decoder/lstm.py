"""
Baseline LSTM de una capa con atención visual.

Estado inicial aprendido a partir de V:
    h0 = tanh(V·W_h + b_h),  c0 = V·W_c + b_c
Entrada de la celda en cada paso: |C, V, φ(Z), h_prev|, con φ consultada por h_prev.
"""

import logging
from dataclasses import dataclass
from typing import Mapping

from memcaption.app.core.decoder.attention import attend
from memcaption.app.core.decoder.base import BaseCaptionDecoder, StepOutput
from memcaption.app.core.decoder.params import (
    LstmParams,
    ParamSpec,
    Projection,
    build_lstm_params,
    lstm_baseline_specs,
)
from memcaption.app.core.tensor import Tensor, ops
from memcaption.app.schemas.run_config import DecoderConfig

logger = logging.getLogger(__name__)


@dataclass
class LstmState:
    Z: Tensor
    V: Tensor
    h: Tensor
    c: Tensor
    t: int = 0


def lstm_baseline_step(
    prev_hidden: Tensor,
    prev_cell: Tensor,
    word_embedding: Tensor,
    visual_context: Tensor,
    cell: Projection,
) -> tuple[Tensor, Tensor]:
    """
    Celda LSTM estándar. Las compuertas salen de una única proyección de
    |word_embedding, visual_context, prev_hidden| en el orden (i, f, o, g).
    """
    n = prev_hidden.shape[0]
    gates = cell(ops.concat([word_embedding, visual_context, prev_hidden]))
    i = ops.sigmoid(ops.slice_(gates, 0, n))
    f = ops.sigmoid(ops.slice_(gates, n, 2 * n))
    o = ops.sigmoid(ops.slice_(gates, 2 * n, 3 * n))
    g = ops.tanh(ops.slice_(gates, 3 * n, 4 * n))
    c = ops.add(ops.mul(f, prev_cell), ops.mul(i, g))
    h = ops.mul(o, ops.tanh(c))
    return h, c


class LstmDecoder(BaseCaptionDecoder):
    """
    Una sola cabeza de salida; supervisión solo en la salida.

    La celda recibe |C, V, φ(Z), h_prev| (4n) en lugar de solo |palabra, contexto|,
    y el estado inicial se aprende desde V: el baseline ve la misma evidencia
    visual que el decodificador de memoria.
    """

    kind = "lstm"
    params: LstmParams

    @classmethod
    def param_specs(cls, config: DecoderConfig, vocab_size: int, feature_dim: int) -> dict[str, ParamSpec]:
        return lstm_baseline_specs(config, vocab_size, feature_dim)

    def _build(self, tensors: Mapping[str, Tensor]) -> None:
        self.params = build_lstm_params(tensors)

    def loss_weights(self) -> dict[int, float]:
        return {5: 1.0}

    def begin(self, Z: Tensor, V: Tensor, video_id: str) -> LstmState:
        h0 = ops.tanh(self.params.init_h(V))
        c0 = self.params.init_c(V)
        return LstmState(Z=Z, V=V, h=h0, c=c0)

    def step(self, state: LstmState, prev_token: int) -> StepOutput:
        state.t += 1
        p = self.params
        C = ops.take_row(p.embedding, prev_token)
        vis = attend(state.h, state.Z, self.config.attention, p.vis_attn)
        context = ops.concat([state.V, vis.pooled])
        state.h, state.c = lstm_baseline_step(state.h, state.c, C, context, p.cell)
        probs = ops.softmax(p.out_head(state.h))
        return StepOutput(hidden={5: state.h}, probs={5: probs}, attention={"visual": vis.weights})

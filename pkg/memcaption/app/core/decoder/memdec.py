"""
Decodificador de memoria jerárquico de cinco capas.

Paso t ≥ 2 (C_t = embedding del token anterior):
    capa 1: x = M_t = fuse(V, C_t)
    capa 2: x = concat_proj(|h^1, φ^1(Z)|), con φ^1 atención visual consultada por h^1
    capa 3: x = h^2
    capa 4: x = h^3
    capa 5: x = h^4 + φ^4(Z), con φ^4 atención visual consultada por h^4
    en cada capa: A = atención(x, banco[l]); h^l = tanh(x·wf + bf) ⊙ σ(A·wg + bg)
    y x se añade al banco tras usarse.

Paso 1 (arranque en frío): la capa l recibe H^l + h^{l−1} (H^1 + V en la
primera) a través de la misma construcción de entrada, y la atención de
memoria se sustituye por la propia entrada.

Cabezas: capa 5 → softmax(out_head(h^5 + φ^4)); capas 1 y 3 → cabezas
auxiliares sobre h^1 y h^3.
"""

import logging
from dataclasses import dataclass, field
from typing import Mapping

from memcaption.app.core.decoder.attention import attend
from memcaption.app.core.decoder.base import BaseCaptionDecoder, StepOutput
from memcaption.app.core.decoder.fusion import fuse
from memcaption.app.core.decoder.memory import ColdStartState, MemoryBank
from memcaption.app.core.decoder.params import (
    DecoderParams,
    MemoryLayerParams,
    ParamSpec,
    Projection,
    build_decoder_params,
    memory_decoder_specs,
)
from memcaption.app.core.tensor import Tensor, ops
from memcaption.app.schemas.run_config import AttentionKind, DecoderConfig

logger = logging.getLogger(__name__)


@dataclass
class MemoryDecoderState:
    Z: Tensor
    V: Tensor
    cold: ColdStartState
    bank: MemoryBank = field(default_factory=MemoryBank)
    t: int = 0


# =============================================================================
# PIEZAS DE UNA CAPA
# =============================================================================

def gated_activation(x: Tensor, a: Tensor, layer: MemoryLayerParams) -> Tensor:
    """tanh(x·wf + bf) ⊙ σ(a·wg + bg)"""
    filt = ops.tanh(ops.channel_projection(x, layer.wf, layer.bf))
    gate = ops.sigmoid(ops.channel_projection(a, layer.wg, layer.bg))
    return ops.mul(filt, gate)


def layer_step(
    layer_index: int,
    x: Tensor,
    bank: MemoryBank,
    step: int,
    layer: MemoryLayerParams,
    attention: AttentionKind = "soft",
) -> tuple[Tensor, Tensor]:
    """
    Paso t ≥ 2 de una capa: atiende al banco con la entrada como consulta,
    aplica la activación con compuerta y añade la entrada al banco.

    Devuelve (h_t^l, pesos de atención de memoria).
    """
    slots = bank.slots(layer_index, step)
    result = attend(x, slots, attention, layer.mem_attn)
    h = gated_activation(x, result.pooled, layer)
    bank.append(layer_index, x)
    return h, result.weights


def cold_layer_step(layer_index: int, x: Tensor, bank: MemoryBank, layer: MemoryLayerParams) -> Tensor:
    """Paso 1 de una capa: la entrada ocupa el lugar de la atención de memoria."""
    if bank.size(layer_index) != 0:
        raise RuntimeError(f"Arranque en frío con el banco de la capa {layer_index} no vacío")
    h = gated_activation(x, x, layer)
    bank.append(layer_index, x)
    return h


def predict_word(h5: Tensor, phi4: Tensor, head: Projection) -> Tensor:
    """softmax(w_p(h^5 + φ^4) + b_p)"""
    return ops.softmax(head(ops.add(h5, phi4)))


# =============================================================================
# DECODIFICADOR
# =============================================================================

class MemoryDecoder(BaseCaptionDecoder):
    """Cinco capas de memoria con atención visual tras las capas 1 y 4."""

    kind = "memory"
    params: DecoderParams

    @classmethod
    def param_specs(cls, config: DecoderConfig, vocab_size: int, feature_dim: int) -> dict[str, ParamSpec]:
        return memory_decoder_specs(config, vocab_size, feature_dim)

    def _build(self, tensors: Mapping[str, Tensor]) -> None:
        self.params = build_decoder_params(tensors, self.config.num_layers)

    def loss_weights(self) -> dict[int, float]:
        return self.config.loss_weights()

    def begin(self, Z: Tensor, V: Tensor, video_id: str) -> MemoryDecoderState:
        cold = ColdStartState.from_seed(self.config.seed, video_id, self.config.n, self.config.num_layers)
        return MemoryDecoderState(Z=Z, V=V, cold=cold, bank=MemoryBank(self.config.num_layers))

    def _visual(self, query: Tensor, Z: Tensor, site: int):
        params = self.params.vis_attn_1 if site == 1 else self.params.vis_attn_4
        return attend(query, Z, self.config.attention, params)

    def _heads(self, hidden: dict[int, Tensor], phi4: Tensor) -> dict[int, Tensor]:
        p = self.params
        return {
            1: ops.softmax(p.aux_head_1(hidden[1])),
            3: ops.softmax(p.aux_head_3(hidden[3])),
            5: predict_word(hidden[5], phi4, p.out_head),
        }

    def cold_start_step(self, state: MemoryDecoderState) -> StepOutput:
        """Paso t = 1: siembra los bancos con la entrada de cada capa."""
        p, H, bank = self.params, state.cold, state.bank
        layers = p.layers

        x1 = ops.add(H.layer(1), state.V)
        h1 = cold_layer_step(1, x1, bank, layers[0])

        u2 = ops.add(H.layer(2), h1)
        vis1 = self._visual(u2, state.Z, 1)
        x2 = p.concat_proj(ops.concat([u2, vis1.pooled]))
        h2 = cold_layer_step(2, x2, bank, layers[1])

        x3 = ops.add(H.layer(3), h2)
        h3 = cold_layer_step(3, x3, bank, layers[2])

        x4 = ops.add(H.layer(4), h3)
        h4 = cold_layer_step(4, x4, bank, layers[3])

        u5 = ops.add(H.layer(5), h4)
        vis4 = self._visual(u5, state.Z, 4)
        x5 = ops.add(u5, vis4.pooled)
        h5 = cold_layer_step(5, x5, bank, layers[4])

        hidden = {1: h1, 2: h2, 3: h3, 4: h4, 5: h5}
        attention = {"visual_1": vis1.weights, "visual_4": vis4.weights}
        return StepOutput(hidden=hidden, probs=self._heads(hidden, vis4.pooled), attention=attention)

    def step(self, state: MemoryDecoderState, prev_token: int) -> StepOutput:
        state.t += 1
        if state.t == 1:
            return self.cold_start_step(state)

        p, bank, t, kind = self.params, state.bank, state.t, self.config.attention
        layers = p.layers
        attention: dict[str, Tensor] = {}

        C = ops.take_row(p.embedding, prev_token)
        x1 = fuse(state.V, C, self.config.fusion, p.fusion)
        h1, attention["memory_1"] = layer_step(1, x1, bank, t, layers[0], kind)

        vis1 = self._visual(h1, state.Z, 1)
        attention["visual_1"] = vis1.weights
        x2 = p.concat_proj(ops.concat([h1, vis1.pooled]))
        h2, attention["memory_2"] = layer_step(2, x2, bank, t, layers[1], kind)

        h3, attention["memory_3"] = layer_step(3, h2, bank, t, layers[2], kind)
        h4, attention["memory_4"] = layer_step(4, h3, bank, t, layers[3], kind)

        vis4 = self._visual(h4, state.Z, 4)
        attention["visual_4"] = vis4.weights
        x5 = ops.add(h4, vis4.pooled)
        h5, attention["memory_5"] = layer_step(5, x5, bank, t, layers[4], kind)

        hidden = {1: h1, 2: h2, 3: h3, 4: h4, 5: h5}
        return StepOutput(hidden=hidden, probs=self._heads(hidden, vis4.pooled), attention=attention)

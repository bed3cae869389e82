"""
Parámetros aprendibles de los decodificadores.

El inventario de formas (ParamSpec por nombre) es la fuente única de verdad:
- init_tensors() lo materializa con inicialización uniforme ±1/√fan_in
- audit.count_params() lo cuenta sin reservar memoria
- DecoderParams / LstmParams son vistas tipadas sobre los tensores

Nombres con puntos; las capas de memoria se numeran desde 1 ("layers.3.wf").
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields, is_dataclass
from typing import Mapping, Optional

import numpy as np

from memcaption.app.core.tensor import Tensor, ops
from memcaption.app.schemas.run_config import DecoderConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamSpec:
    """Forma de un tensor de parámetros y su fan-in para la inicialización."""

    shape: tuple[int, ...]
    fan_in: int

    @property
    def count(self) -> int:
        return int(np.prod(self.shape))


# =============================================================================
# VISTAS TIPADAS
# =============================================================================

@dataclass
class Projection:
    """Proyección por canales x·W + b (W con forma entrada × salida)."""

    W: Tensor
    b: Optional[Tensor] = None

    def __call__(self, x: Tensor) -> Tensor:
        return ops.channel_projection(x, self.W, self.b)


@dataclass
class AttentionParams:
    """w (d_a), Wa (d_a × n), Ua (d_a × n), ba (d_a)."""

    w: Tensor
    Wa: Tensor
    Ua: Tensor
    ba: Tensor


@dataclass
class CcmfParams:
    """Mapas W1, W2 (n × n) de la fusión por convolución cruzada."""

    W1: Tensor
    W2: Tensor


@dataclass
class MemoryLayerParams:
    wf: Tensor
    wg: Tensor
    bf: Tensor
    bg: Tensor
    mem_attn: Optional[AttentionParams] = None


@dataclass
class DecoderParams:
    """Estado aprendible completo del decodificador de memoria."""

    fusion: Optional[CcmfParams]
    layers: list[MemoryLayerParams]
    concat_proj: Projection
    vis_attn_1: Optional[AttentionParams]
    vis_attn_4: Optional[AttentionParams]
    out_head: Projection
    aux_head_1: Projection
    aux_head_3: Projection
    embedding: Tensor
    feature_proj: Tensor

    def named_parameters(self) -> dict[str, Tensor]:
        return flatten_params(self)


@dataclass
class LstmParams:
    """Estado aprendible del baseline LSTM con atención visual."""

    cell: Projection
    init_h: Projection
    init_c: Projection
    vis_attn: Optional[AttentionParams]
    out_head: Projection
    embedding: Tensor
    feature_proj: Tensor

    def named_parameters(self) -> dict[str, Tensor]:
        return flatten_params(self)


def flatten_params(obj: object, prefix: str = "") -> dict[str, Tensor]:
    """Recorre una vista tipada y devuelve {nombre: Tensor} en orden estable."""
    out: dict[str, Tensor] = {}
    if isinstance(obj, Tensor):
        out[prefix] = obj
    elif isinstance(obj, list):
        for i, item in enumerate(obj, start=1):
            out.update(flatten_params(item, f"{prefix}.{i}"))
    elif is_dataclass(obj):
        for f in fields(obj):
            value = getattr(obj, f.name)
            if value is not None:
                out.update(flatten_params(value, f"{prefix}.{f.name}" if prefix else f.name))
    return out


# =============================================================================
# INVENTARIO DE FORMAS
# =============================================================================

def _attention_specs(prefix: str, n: int, d_a: int) -> dict[str, ParamSpec]:
    return {
        f"{prefix}.w": ParamSpec((d_a,), d_a),
        f"{prefix}.Wa": ParamSpec((d_a, n), n),
        f"{prefix}.Ua": ParamSpec((d_a, n), n),
        f"{prefix}.ba": ParamSpec((d_a,), n),
    }


def _projection_specs(prefix: str, n_in: int, n_out: int, bias: bool = True) -> dict[str, ParamSpec]:
    specs = {f"{prefix}.W": ParamSpec((n_in, n_out), n_in)}
    if bias:
        specs[f"{prefix}.b"] = ParamSpec((n_out,), n_in)
    return specs


def memory_decoder_specs(config: DecoderConfig, vocab_size: int, feature_dim: int) -> dict[str, ParamSpec]:
    """Inventario de parámetros del decodificador de memoria."""
    n, d_a = config.n, config.d_a
    soft = config.attention == "soft"
    specs: dict[str, ParamSpec] = {}

    if config.fusion == "ccmf":
        specs["fusion.W1"] = ParamSpec((n, n), n)
        specs["fusion.W2"] = ParamSpec((n, n), n)

    for layer in range(1, config.num_layers + 1):
        p = f"layers.{layer}"
        specs[f"{p}.wf"] = ParamSpec((n, n), n)
        specs[f"{p}.wg"] = ParamSpec((n, n), n)
        specs[f"{p}.bf"] = ParamSpec((n,), n)
        specs[f"{p}.bg"] = ParamSpec((n,), n)
        if soft:
            specs.update(_attention_specs(f"{p}.mem_attn", n, d_a))

    specs.update(_projection_specs("concat_proj", 2 * n, n))
    if soft:
        specs.update(_attention_specs("vis_attn_1", n, d_a))
        specs.update(_attention_specs("vis_attn_4", n, d_a))
    specs.update(_projection_specs("out_head", n, vocab_size))
    specs.update(_projection_specs("aux_head_1", n, vocab_size))
    specs.update(_projection_specs("aux_head_3", n, vocab_size))
    specs["embedding"] = ParamSpec((vocab_size, n), n)
    specs["feature_proj"] = ParamSpec((feature_dim, n), feature_dim)
    return specs


def lstm_baseline_specs(config: DecoderConfig, vocab_size: int, feature_dim: int) -> dict[str, ParamSpec]:
    """
    Inventario del baseline LSTM.

    Entrada de la celda: |C, V, φ(Z), h_prev| (4n) → compuertas (4n).
    """
    n, d_a = config.n, config.d_a
    specs: dict[str, ParamSpec] = {}
    specs.update(_projection_specs("cell", 4 * n, 4 * n))
    specs.update(_projection_specs("init_h", n, n))
    specs.update(_projection_specs("init_c", n, n))
    if config.attention == "soft":
        specs.update(_attention_specs("vis_attn", n, d_a))
    specs.update(_projection_specs("out_head", n, vocab_size))
    specs["embedding"] = ParamSpec((vocab_size, n), n)
    specs["feature_proj"] = ParamSpec((feature_dim, n), feature_dim)
    return specs


def decoder_specs(config: DecoderConfig, vocab_size: int, feature_dim: int) -> dict[str, ParamSpec]:
    if config.decoder == "lstm":
        return lstm_baseline_specs(config, vocab_size, feature_dim)
    return memory_decoder_specs(config, vocab_size, feature_dim)


# =============================================================================
# INICIALIZACIÓN Y CONSTRUCCIÓN DE VISTAS
# =============================================================================

def init_tensors(specs: Mapping[str, ParamSpec], seed: int) -> dict[str, Tensor]:
    """Uniforme en ±1/√fan_in, en el orden del inventario."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, spec in specs.items():
        bound = 1.0 / np.sqrt(spec.fan_in)
        values = rng.uniform(-bound, bound, size=spec.shape)
        tensors[name] = Tensor.wrap(values, requires_grad=True)
        tensors[name].name = name
    logger.debug("Inicializados %d tensores de parámetros (seed=%d)", len(tensors), seed)
    return tensors


def _attention(t: Mapping[str, Tensor], prefix: str) -> Optional[AttentionParams]:
    if f"{prefix}.w" not in t:
        return None
    return AttentionParams(
        w=t[f"{prefix}.w"], Wa=t[f"{prefix}.Wa"], Ua=t[f"{prefix}.Ua"], ba=t[f"{prefix}.ba"]
    )


def _projection(t: Mapping[str, Tensor], prefix: str) -> Projection:
    return Projection(W=t[f"{prefix}.W"], b=t.get(f"{prefix}.b"))


def build_decoder_params(t: Mapping[str, Tensor], num_layers: int = 5) -> DecoderParams:
    fusion = CcmfParams(W1=t["fusion.W1"], W2=t["fusion.W2"]) if "fusion.W1" in t else None
    layers = [
        MemoryLayerParams(
            wf=t[f"layers.{i}.wf"],
            wg=t[f"layers.{i}.wg"],
            bf=t[f"layers.{i}.bf"],
            bg=t[f"layers.{i}.bg"],
            mem_attn=_attention(t, f"layers.{i}.mem_attn"),
        )
        for i in range(1, num_layers + 1)
    ]
    return DecoderParams(
        fusion=fusion,
        layers=layers,
        concat_proj=_projection(t, "concat_proj"),
        vis_attn_1=_attention(t, "vis_attn_1"),
        vis_attn_4=_attention(t, "vis_attn_4"),
        out_head=_projection(t, "out_head"),
        aux_head_1=_projection(t, "aux_head_1"),
        aux_head_3=_projection(t, "aux_head_3"),
        embedding=t["embedding"],
        feature_proj=t["feature_proj"],
    )


def build_lstm_params(t: Mapping[str, Tensor]) -> LstmParams:
    return LstmParams(
        cell=_projection(t, "cell"),
        init_h=_projection(t, "init_h"),
        init_c=_projection(t, "init_c"),
        vis_attn=_attention(t, "vis_attn"),
        out_head=_projection(t, "out_head"),
        embedding=t["embedding"],
        feature_proj=t["feature_proj"],
    )

"""
Auditoría de parámetros.

Alcances:
- decoder-core: capas de memoria, sitios de atención, proyección de
  concatenación y fusión (o celda, estado inicial y atención en el LSTM)
- full: añade embedding, cabezas y proyección de features
- lstm-baseline: el alcance decoder-core aplicado al baseline LSTM con la
  misma configuración

Las cabezas auxiliares quedan fuera de decoder-core pero aparecen en el
desglose con in_scope=False.
"""

from typing import Literal, Mapping

from memcaption.app.core.decoder.params import ParamSpec, decoder_specs, lstm_baseline_specs
from memcaption.app.schemas.results import ParamAudit, ParamItem
from memcaption.app.schemas.run_config import DecoderConfig

AuditScope = Literal["decoder-core", "full", "lstm-baseline"]
SCOPES: tuple[str, ...] = ("decoder-core", "full", "lstm-baseline")

CORE_PREFIXES = frozenset(
    {"layers", "vis_attn_1", "vis_attn_4", "concat_proj", "fusion", "cell", "init_h", "init_c", "vis_attn"}
)


def in_core(name: str) -> bool:
    return name.split(".", 1)[0] in CORE_PREFIXES


def audit_specs(specs: Mapping[str, ParamSpec], core_only: bool) -> tuple[int, list[ParamItem]]:
    items = [
        ParamItem(
            name=name,
            shape=list(spec.shape),
            count=spec.count,
            in_scope=in_core(name) or not core_only,
        )
        for name, spec in specs.items()
    ]
    return sum(item.count for item in items if item.in_scope), items


def count_params(
    config: DecoderConfig,
    vocab_size: int,
    feature_dim: int,
    scope: AuditScope = "decoder-core",
) -> ParamAudit:
    """Total de parámetros en el alcance pedido y desglose por tensor."""
    if scope not in SCOPES:
        raise ValueError(f"scope '{scope}' no válido. Opciones: {', '.join(SCOPES)}")
    if scope == "lstm-baseline":
        specs = lstm_baseline_specs(config, vocab_size, feature_dim)
        decoder = "lstm"
    else:
        specs = decoder_specs(config, vocab_size, feature_dim)
        decoder = config.decoder
    total, items = audit_specs(specs, core_only=scope != "full")
    return ParamAudit(decoder=decoder, scope=scope, total=total, items=items)

"""
Esquemas de salida de los subcomandos.

Todo lo que la CLI escribe a disco (loss_log.jsonl, generations.jsonl,
report.json, auditoría de parámetros, grad-check) pasa por estos modelos,
de modo que el orden de claves y los tipos son estables entre ejecuciones.

Uso:
    from memcaption.app.schemas.results import EvaluationReport

    report = EvaluationReport(bleu4=100.0, bleu=[...], cider=..., mean_len=..., ...)
    path.write_text(report.model_dump_json(indent=2))
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


# =============================================================================
# ENTRENAMIENTO
# =============================================================================

class EpochStats(BaseModel):
    """Estadísticas de una época (una línea de loss_log.jsonl)."""

    epoch: int = Field(description="Número de época, desde 1")
    loss: float = Field(description="Pérdida total media por batch")
    per_layer: Dict[str, float] = Field(
        default_factory=dict,
        description="Pérdida media por capa supervisada ('1', '3', '5')",
    )
    grad_norm: float = Field(default=0.0, description="Norma global media antes del clipping")
    val_loss: Optional[float] = Field(default=None, description="Pérdida total en validación")
    batches: int = Field(default=0, description="Batches procesados")


# =============================================================================
# GENERACIÓN Y EVALUACIÓN
# =============================================================================

class GenerationRecord(BaseModel):
    """Una línea de generations.jsonl."""

    video_id: str
    caption: str = Field(description="Texto generado sin marcadores")
    tokens: List[int] = Field(default_factory=list, description="Índices generados (sin BOS, sin EOS)")
    attention: Dict[str, List[List[float]]] = Field(
        default_factory=dict,
        description="Pesos de atención por sitio ('visual_1', 'memory_3', ...) y por paso",
    )
    sentence_bleu_smoothed: Optional[float] = Field(
        default=None,
        description="BLEU@4 de frase con suavizado add-one (solo informativo, no es la métrica de corpus)",
    )


class EvaluationReport(BaseModel):
    """report.json de evaluate."""

    bleu4: float = Field(description="BLEU@4 de corpus, en porcentaje")
    bleu: List[float] = Field(default_factory=list, description="BLEU@1..4 de corpus")
    cider: float = Field(description="CIDEr ×10")
    mean_len: float = Field(description="Longitud media de las descripciones generadas")
    config_hash: str
    head: int = Field(default=5, description="Capa supervisada usada para generar")
    split: str = "train"
    videos: int = 0


class AttentionPeak(BaseModel):
    site: str
    slot: int
    weight: float


class AttentionInspection(BaseModel):
    """Volcado de inspect-attention para un vídeo."""

    video_id: str
    caption: str
    head: int
    steps: int
    sentence_bleu_smoothed: Optional[float] = None
    attention: Dict[str, List[List[float]]]
    peaks: List[AttentionPeak] = Field(
        default_factory=list,
        description="Slots con peso ≥ 0.95 en el último paso de cada sitio",
    )


# =============================================================================
# AUDITORÍA Y VERIFICACIÓN
# =============================================================================

class ParamItem(BaseModel):
    name: str
    shape: List[int]
    count: int
    in_scope: bool = True


class ParamAudit(BaseModel):
    """Conteo de parámetros con desglose por tensor."""

    decoder: str = Field(description="memory | lstm")
    scope: str = Field(description="decoder-core | full | lstm-baseline")
    total: int
    items: List[ParamItem] = Field(default_factory=list)


class GradCheckReport(BaseModel):
    """Resultado de grad-check: error relativo máximo por comprobación."""

    tolerance: float
    epsilon: float
    points_per_primitive: int = Field(default=1, description="Puntos aleatorios por primitiva")
    entries_per_tensor: Optional[int] = Field(
        default=None,
        description="Entradas muestreadas por tensor en la pérdida completa (None: todas)",
    )
    errors: Dict[str, float] = Field(default_factory=dict)
    passed: bool = False

    @property
    def worst(self) -> float:
        return max(self.errors.values(), default=0.0)

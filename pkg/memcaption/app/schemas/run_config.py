"""
Schemas Pydantic para validar la configuración de un run.

Se usan para:
1. Validar la configuración al cargar (errores claros si algo no cuadra)
2. Detectar typos con extra="forbid"
3. Documentar la estructura esperada del JSON de --config

Estructura de un JSON de configuración válido:
    {
        "decoder": {"n": 32, "d_a": 16, "lambda1": 0.2, "lambda3": 0.2, "lambda5": 0.6},
        "training": {"lr": 0.005, "batch_size": 2, "epochs": 500}
    }
"""

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Tolerancia para la regla de suma de los λ
LAMBDA_SUM_TOLERANCE = 1e-9

AttentionKind = Literal["soft", "dot"]
DecoderKind = Literal["memory", "lstm"]
FusionKind = Literal["ccmf", "sum", "product"]
SplitName = Literal["train", "val", "test"]

COMMANDS = (
    "train",
    "generate",
    "evaluate",
    "count-params",
    "inspect-attention",
    "grad-check",
    "make-toy-data",
)


class DecoderConfig(BaseModel):
    """
    Configuración del decodificador.

    Reglas sobre los pesos de supervisión:
        - lambda1 + lambda3 + lambda5 = 1
        - lambda5 estrictamente mayor que lambda1 y que lambda3
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(default=512, ge=1, description="Ancho de canal")
    d_a: int = Field(default=100, ge=1, description="Ancho de la atención")
    num_layers: int = 5
    supervised_layers: tuple[int, ...] = (1, 3, 5)
    lambda1: float = Field(default=0.2, ge=0.0)
    lambda3: float = Field(default=0.2, ge=0.0)
    lambda5: float = Field(default=0.6, ge=0.0)
    max_caption_len: int = Field(default=30, ge=1)
    seed: int = Field(default=0, ge=0, description="Semilla de la inicialización y del arranque en frío")
    attention: AttentionKind = "soft"
    decoder: DecoderKind = "memory"
    fusion: FusionKind = "ccmf"

    @field_validator("num_layers")
    @classmethod
    def five_layers(cls, v: int) -> int:
        if v != 5:
            raise ValueError("num_layers debe ser 5 (el decodificador apila cinco capas de memoria)")
        return v

    @field_validator("supervised_layers")
    @classmethod
    def fixed_supervision(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if tuple(v) != (1, 3, 5):
            raise ValueError("supervised_layers debe ser (1, 3, 5)")
        return tuple(v)

    @model_validator(mode="after")
    def lambda_rules(self) -> "DecoderConfig":
        total = self.lambda1 + self.lambda3 + self.lambda5
        if abs(total - 1.0) > LAMBDA_SUM_TOLERANCE:
            raise ValueError(
                f"lambda1 + lambda3 + lambda5 = 1 no se cumple "
                f"(suma = {total:.6g}: {self.lambda1}, {self.lambda3}, {self.lambda5})"
            )
        if not (self.lambda5 > self.lambda1 and self.lambda5 > self.lambda3):
            raise ValueError(
                f"lambda5 debe ser mayor que lambda1 y lambda3 "
                f"(recibido {self.lambda1}, {self.lambda3}, {self.lambda5})"
            )
        return self

    def loss_weights(self) -> dict[int, float]:
        """Peso λ por capa supervisada."""
        return {1: self.lambda1, 3: self.lambda3, 5: self.lambda5}


class TrainingConfig(BaseModel):
    """Hiperparámetros de entrenamiento (Adam con clipping por norma global)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(default=1e-3, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=16, ge=1)
    epochs: int = Field(default=50, ge=1)
    clip_norm: float = Field(default=5.0, gt=0.0)
    patience: int = Field(default=10, ge=1)
    target_loss: Optional[float] = Field(
        default=None,
        gt=0.0,
        description="Si se indica, el entrenamiento termina cuando la pérdida media baja de este valor",
    )


class RunConfig(BaseModel):
    """
    Configuración completa de una invocación de la CLI.

    Campos requeridos:
        - command: subcomando a ejecutar

    El resto tiene defaults; cada subcomando valida las rutas que necesita
    con require_paths().
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: str
    features_dir: Optional[Path] = None
    manifest: Optional[Path] = None
    vocab: Optional[Path] = None
    checkpoint: Optional[Path] = None
    init_checkpoint: Optional[Path] = None
    out: Optional[Path] = None
    generations: Optional[Path] = Field(default=None, description="Volcado a re-puntuar con evaluate")
    split: SplitName = "train"
    head: int = 5
    video_id: Optional[str] = None
    min_count: int = Field(default=1, ge=1)
    vocab_size: int = Field(default=12_596, ge=4)
    feature_dim: int = Field(default=1_024, ge=1)
    all_entries: bool = Field(default=False, description="grad-check sin muestreo en la pérdida completa")
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)

    @field_validator("command")
    @classmethod
    def known_command(cls, v: str) -> str:
        if v not in COMMANDS:
            raise ValueError(f"command '{v}' no válido. Opciones: {', '.join(COMMANDS)}")
        return v

    @field_validator("head")
    @classmethod
    def supervised_head(cls, v: int) -> int:
        if v not in (1, 3, 5):
            raise ValueError("head debe ser 1, 3 o 5")
        return v

    def require_paths(self, *names: str) -> None:
        """Comprueba que las rutas indicadas estén presentes."""
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            flags = ", ".join("--" + name.replace("_", "-") for name in missing)
            raise ValueError(f"'{self.command}' requiere {flags}")


def config_hash(decoder: DecoderConfig, training: Optional[TrainingConfig] = None) -> str:
    """Hash estable (sha256 corto) de la configuración, para los reportes."""
    payload = {"decoder": decoder.model_dump(mode="json")}
    if training is not None:
        payload["training"] = training.model_dump(mode="json")
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

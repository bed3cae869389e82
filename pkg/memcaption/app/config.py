"""
memcaption - Configuration Module
Centraliza la configuración de proceso usando Pydantic Settings.

La configuración de cada run (decodificador, entrenamiento) vive en
schemas/run_config.py; aquí solo van defaults de proceso sobreescribibles
por entorno (prefijo MEMCAPTION_).
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Configuración principal de memcaption."""

    model_config = SettingsConfigDict(
        env_prefix="MEMCAPTION_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # ===========================================
    # Logging
    # ===========================================
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # ===========================================
    # Reproducibilidad
    # ===========================================
    default_seed: int = Field(default=0, ge=0)

    # ===========================================
    # Verificación de gradientes
    # ===========================================
    grad_check_epsilon: float = 1e-6
    grad_check_tolerance: float = 1e-4
    grad_check_entries_per_tensor: int = 6
    grad_check_points_per_primitive: int = 10

    # ===========================================
    # Configuración de referencia (auditoría de parámetros)
    # ===========================================
    reference_vocab_size: int = 12_596
    reference_feature_dim: int = 1_024


@lru_cache
def get_settings() -> Settings:
    """
    Obtiene la instancia de Settings con cache.
    Usa lru_cache para singleton pattern.
    """
    return Settings()


# Instancia global para imports directos
settings = get_settings()

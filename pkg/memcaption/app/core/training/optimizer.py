"""
Adam con corrección de sesgo y clipping por norma global.
"""

import logging
from typing import Mapping

import numpy as np

from memcaption.app.core.tensor import Tensor

logger = logging.getLogger(__name__)


class NonFiniteGradientError(FloatingPointError):
    """Gradiente NaN/Inf; el mensaje nombra el parámetro."""

    def __init__(self, name: str):
        super().__init__(f"Gradiente no finito en el parámetro '{name}'")
        self.name = name


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """
    Reescala todos los gradientes por max_norm / norma si la norma global
    supera max_norm. Devuelve (gradientes, norma antes del clipping).
    """
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        return {name: g * scale for name, g in grads.items()}, norm
    return dict(grads), norm


class Adam:
    """
    Adam sobre un conjunto nombrado de tensores.

    Los momentos m, v se crean en el primer step() con la forma de cada
    parámetro; step cuenta las actualizaciones aplicadas.
    """

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def step(self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(name)
            if g.shape != params[name].shape:
                raise ValueError(f"{name}: gradiente {g.shape} vs parámetro {params[name].shape}")

        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count

        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)

            m_hat = m / bc1
            v_hat = v / bc2
            params[name].data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    # ------------------------------------------------------------------
    # Persistencia
    # ------------------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"adam.m.{name}": m for name, m in self.m.items()}
        arrays.update({f"adam.v.{name}": v for name, v in self.v.items()})
        return arrays

    def load_state(self, step_count: int, arrays: Mapping[str, np.ndarray]) -> None:
        self.step_count = step_count
        self.m = {k[len("adam.m."):]: np.array(a) for k, a in arrays.items() if k.startswith("adam.m.")}
        self.v = {k[len("adam.v."):]: np.array(a) for k, a in arrays.items() if k.startswith("adam.v.")}
        logger.debug("Estado Adam restaurado: step=%d, %d tensores", step_count, len(self.m))

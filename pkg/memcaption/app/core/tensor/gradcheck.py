"""
Comprobación de gradientes por diferencias finitas centrales.

- grad_check(): función escalar de un único tensor
- grad_check_parameters(): pérdida escalar respecto a un conjunto nombrado
  de parámetros, muestreando hasta K entradas por tensor
"""

import logging
from typing import Callable, Mapping, Optional

import numpy as np

from memcaption.app.core.tensor.autograd import GradTape, ShapeError, Tensor

logger = logging.getLogger(__name__)

EPSILON_RANGE = (1e-7, 1e-3)


def _check_epsilon(epsilon: float) -> None:
    lo, hi = EPSILON_RANGE
    if not lo <= epsilon <= hi:
        raise ValueError(f"epsilon={epsilon} fuera del rango [{lo}, {hi}]")


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def _scalar(out: Tensor) -> float:
    if out.size != 1:
        raise ShapeError(f"grad_check requiere salida escalar, shape={out.shape}")
    return out.item()


def grad_check(
    function: Callable[[Tensor], Tensor],
    point: np.ndarray,
    epsilon: float = 1e-6,
) -> float:
    """
    Error relativo máximo entre el gradiente de la cinta y diferencias centrales.

    El denominador del error relativo es max(1, |analítico|, |numérico|).
    """
    _check_epsilon(epsilon)
    base = np.array(point, dtype=np.float64)

    x = Tensor(base, requires_grad=True)
    with GradTape() as tape:
        out = function(x)
    _scalar(out)
    (analytic,) = tape.gradient(out, [x])

    worst = 0.0
    flat = base.reshape(-1)
    for i in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += epsilon
        minus[i] -= epsilon
        f_plus = _scalar(function(Tensor(plus.reshape(base.shape))))
        f_minus = _scalar(function(Tensor(minus.reshape(base.shape))))
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        worst = max(worst, _relative_error(float(analytic.reshape(-1)[i]), numeric))
    return worst


def grad_check_parameters(
    loss_fn: Callable[[], Tensor],
    parameters: Mapping[str, Tensor],
    epsilon: float = 1e-6,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> dict[str, float]:
    """
    Error relativo máximo por tensor de parámetros.

    loss_fn() debe recalcular la pérdida leyendo los parámetros en su estado
    actual; las perturbaciones se aplican en sitio y se revierten.
    """
    _check_epsilon(epsilon)
    names = list(parameters)
    tensors = [parameters[n] for n in names]

    with GradTape() as tape:
        loss = loss_fn()
    _scalar(loss)
    analytic = tape.gradient(loss, tensors)

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, tensor, grad in zip(names, tensors, analytic):
        tensor.data = np.ascontiguousarray(tensor.data)
        flat = tensor.data.reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        worst = 0.0
        for i in entries:
            original = flat[i]
            flat[i] = original + epsilon
            f_plus = _scalar(loss_fn())
            flat[i] = original - epsilon
            f_minus = _scalar(loss_fn())
            flat[i] = original
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            worst = max(worst, _relative_error(float(grad.reshape(-1)[i]), numeric))
        errors[name] = worst
        logger.debug("grad_check %s: %.3e (%d entradas)", name, worst, len(entries))
    return errors

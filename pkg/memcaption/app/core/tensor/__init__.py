"""
Núcleo tensorial: Tensor float64, cinta de gradientes y operaciones diferenciables.
"""

from memcaption.app.core.tensor.autograd import GradTape, ShapeError, Tensor
from memcaption.app.core.tensor.gradcheck import grad_check, grad_check_parameters
from memcaption.app.core.tensor import ops

__all__ = [
    "GradTape",
    "ShapeError",
    "Tensor",
    "grad_check",
    "grad_check_parameters",
    "ops",
]

"""
Pérdida multicapa: entropía cruzada por capa supervisada, ponderada por λ.
"""

from dataclasses import dataclass
from typing import Mapping, Sequence

from memcaption.app.core.tensor import Tensor, ops


@dataclass
class MultilayerLoss:
    total: Tensor
    per_layer: dict[int, Tensor]

    def components(self) -> dict[int, float]:
        return {layer: loss.item() for layer, loss in self.per_layer.items()}


def sequence_cross_entropy(probabilities: Sequence[Tensor], targets: Sequence[int]) -> Tensor:
    """Σ_t −log p_t[target_t] para una secuencia."""
    if len(probabilities) != len(targets):
        raise ValueError(
            f"{len(probabilities)} distribuciones para {len(targets)} objetivos"
        )
    terms = [ops.cross_entropy(p, int(y)) for p, y in zip(probabilities, targets)]
    total = terms[0]
    for term in terms[1:]:
        total = ops.add(total, term)
    return total


def multilayer_loss(
    per_layer_probs: Mapping[int, Sequence[Sequence[Tensor]]],
    targets: Sequence[Sequence[int]],
    weights: Mapping[int, float],
) -> MultilayerLoss:
    """
    L^j = (1/B) Σ_b Σ_t CE(p^j_{b,t}, y_{b,t});  total = Σ_j λ_j · L^j.

    per_layer_probs[j][b] es la lista de distribuciones del item b emitidas
    por la cabeza de la capa j.
    """
    if not targets:
        raise ValueError("multilayer_loss sobre un batch vacío")
    batch = len(targets)
    per_layer: dict[int, Tensor] = {}
    for layer in weights:
        items = per_layer_probs[layer]
        if len(items) != batch:
            raise ValueError(f"Capa {layer}: {len(items)} items para un batch de {batch}")
        summed = sequence_cross_entropy(items[0], targets[0])
        for probs, ys in zip(items[1:], targets[1:]):
            summed = ops.add(summed, sequence_cross_entropy(probs, ys))
        per_layer[layer] = ops.scale(summed, 1.0 / batch)

    total = None
    for layer, weight in weights.items():
        term = ops.scale(per_layer[layer], weight)
        total = term if total is None else ops.add(total, term)
    return MultilayerLoss(total=total, per_layer=per_layer)

"""
Batería de comprobación de gradientes.

Cubre cada primitiva que usa el decodificador y la pérdida completa de una
configuración mínima (n=8, d_a=4, |V|=11, T=4, m=3) para el decodificador
de memoria y el baseline LSTM.
"""

import logging
from typing import Callable

import numpy as np

from memcaption.app.config import settings
from memcaption.app.core.decoder import build_decoder
from memcaption.app.core.decoder.attention import dot_attention, soft_attention
from memcaption.app.core.decoder.fusion import ccmf_fuse
from memcaption.app.core.decoder.lstm import lstm_baseline_step
from memcaption.app.core.decoder.params import AttentionParams, CcmfParams, Projection
from memcaption.app.core.tensor import Tensor, grad_check, grad_check_parameters, ops
from memcaption.app.schemas.results import GradCheckReport
from memcaption.app.schemas.run_config import DecoderConfig
from memcaption.app.utils.batching import CaptionExample

logger = logging.getLogger(__name__)

TINY_N = 8
TINY_D_A = 4
TINY_VOCAB = 11
TINY_STEPS = 4
TINY_FRAMES = 3
TINY_FEATURE_DIM = 5


def _weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    """Reduce a escalar con pesos fijos para no anular gradientes por simetría."""
    return ops.sum_(ops.mul(out, Tensor(weights.reshape(out.shape))))


def primitive_checks(rng: np.random.Generator) -> dict[str, Callable[[Tensor], Tensor]]:
    n = 6
    W = Tensor(rng.normal(size=(n, n)))
    other = Tensor(rng.normal(size=n))
    slots = Tensor(rng.normal(size=(4, n)))
    r = rng.normal(size=64)
    attn = AttentionParams(
        w=Tensor(rng.normal(size=3)),
        Wa=Tensor(rng.normal(size=(3, n))),
        Ua=Tensor(rng.normal(size=(3, n))),
        ba=Tensor(rng.normal(size=3)),
    )
    fusion = CcmfParams(W1=Tensor(rng.normal(size=(n, n))), W2=Tensor(rng.normal(size=(n, n))))
    cell = Projection(W=Tensor(rng.normal(size=(4 * n, 4 * n)) * 0.3), b=Tensor(rng.normal(size=4 * n)))
    prev_c = Tensor(rng.normal(size=n))
    word = Tensor(rng.normal(size=n))

    def ws(out: Tensor) -> Tensor:
        return _weighted_sum(out, r[: out.size])

    return {
        "channel_projection": lambda x: ws(ops.channel_projection(x, W)),
        "matvec": lambda x: ws(ops.matvec(W, x)),
        "circular_conv": lambda x: ws(ops.circular_conv(x, other)),
        "softmax": lambda x: ws(ops.softmax(x)),
        "tanh": lambda x: ws(ops.tanh(x)),
        "sigmoid": lambda x: ws(ops.sigmoid(x)),
        "relu": lambda x: ws(ops.relu(x)),
        "mul": lambda x: ws(ops.mul(x, other)),
        "concat": lambda x: ws(ops.concat([x, other])),
        "cross_entropy": lambda x: ops.cross_entropy(ops.softmax(x), 2),
        "ccmf_fuse": lambda x: ws(ccmf_fuse(x, other, fusion)),
        "soft_attention": lambda x: ws(soft_attention(x, slots, attn).pooled),
        "dot_attention": lambda x: ws(dot_attention(x, slots).pooled),
        "lstm_step": lambda x: ws(ops.concat(list(lstm_baseline_step(x, prev_c, word, ops.concat([x, other]), cell)))),
    }


def tiny_example(rng: np.random.Generator) -> CaptionExample:
    features = rng.normal(size=(TINY_FRAMES, TINY_FEATURE_DIM))
    words = rng.integers(4, TINY_VOCAB, size=TINY_STEPS - 1)
    tokens = (1, *(int(w) for w in words), 2)
    return CaptionExample(video_id="tiny", features=features, tokens=tokens, text="")


def run_grad_check_suite(
    epsilon: float | None = None,
    tolerance: float | None = None,
    seed: int = 0,
    entries_per_tensor: int | None = None,
    points_per_primitive: int | None = None,
    all_entries: bool = False,
) -> GradCheckReport:
    """
    Error relativo máximo por primitiva y por tensor de la pérdida completa.

    Cada primitiva se comprueba en points_per_primitive puntos aleatorios.
    En la pérdida completa se muestrean entries_per_tensor entradas por
    tensor, salvo con all_entries=True.
    """
    epsilon = epsilon if epsilon is not None else settings.grad_check_epsilon
    tolerance = tolerance if tolerance is not None else settings.grad_check_tolerance
    entries = entries_per_tensor if entries_per_tensor is not None else settings.grad_check_entries_per_tensor
    points = points_per_primitive if points_per_primitive is not None else settings.grad_check_points_per_primitive
    if points < 1:
        raise ValueError(f"points_per_primitive debe ser ≥ 1, recibido {points}")
    sampled = None if all_entries else entries

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, fn in primitive_checks(rng).items():
        errors[f"op.{name}"] = max(grad_check(fn, rng.normal(size=6), epsilon) for _ in range(points))

    example = tiny_example(rng)
    for kind in ("memory", "lstm"):
        config = DecoderConfig(n=TINY_N, d_a=TINY_D_A, seed=seed, decoder=kind)
        decoder = build_decoder(config, TINY_VOCAB, TINY_FEATURE_DIM)
        per_tensor = grad_check_parameters(
            lambda: decoder.batch_loss([example]).total,
            decoder.named_parameters(),
            epsilon=epsilon,
            max_entries=sampled,
            seed=seed,
        )
        errors.update({f"{kind}.{name}": err for name, err in per_tensor.items()})

    report = GradCheckReport(
        tolerance=tolerance,
        epsilon=epsilon,
        points_per_primitive=points,
        entries_per_tensor=sampled,
        errors=errors,
        passed=all(err < tolerance for err in errors.values()),
    )
    logger.info(
        "grad-check: %d comprobaciones, peor error %.3e (pérdida completa: %s)",
        len(errors),
        report.worst,
        "todas las entradas" if sampled is None else f"{sampled} entradas por tensor",
    )
    return report

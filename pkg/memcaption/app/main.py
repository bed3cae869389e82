"""
memcaption - Main Application

CLI por subcomandos:
    train              entrena y guarda checkpoint + loss_log.jsonl
    generate           decodificación greedy de un split → generations.jsonl
    evaluate           BLEU / CIDEr de un split → report.json (--generations: re-puntúa un volcado)
    count-params       auditoría de parámetros (memoria vs baseline LSTM)
    inspect-attention  pesos de atención por capa para un vídeo
    grad-check         batería de comprobación de gradientes
    make-toy-data      corpus sintético para el pipeline de sobreajuste

Códigos de salida: 0 ok, 1 error de uso o de configuración, 2 fallo en ejecución.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from memcaption.app.config import settings
from memcaption.app.core.decoder import BaseCaptionDecoder, build_decoder
from memcaption.app.core.decoder.audit import count_params
from memcaption.app.core.evaluation.evaluate import (
    evaluate_split,
    generate_split,
    rescore_generations,
    write_generations,
    write_report,
)
from memcaption.app.core.evaluation.generate import attention_peaks, greedy_decode
from memcaption.app.core.evaluation.metrics import sentence_bleu
from memcaption.app.core.training.checkpoint import (
    Checkpoint,
    assign_parameters,
    checkpoint_hash,
    load_checkpoint,
    save_checkpoint,
    snapshot_parameters,
)
from memcaption.app.core.training.trainer import Trainer
from memcaption.app.core.verification import run_grad_check_suite
from memcaption.app.schemas.results import AttentionInspection, AttentionPeak, ParamItem
from memcaption.app.schemas.run_config import COMMANDS, RunConfig, config_hash
from memcaption.app.utils.batching import batch_iter, build_examples
from memcaption.app.utils.features import load_features
from memcaption.app.utils.manifest import read_manifest, split_records
from memcaption.app.utils.toy_data import make_toy_data
from memcaption.app.utils.vocab import Vocabulary, build_vocab

logger = logging.getLogger("memcaption")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

# flag → campo de DecoderConfig / TrainingConfig
_DECODER_FLAGS = {
    "n": "n",
    "d_a": "d_a",
    "lambda1": "lambda1",
    "lambda3": "lambda3",
    "lambda5": "lambda5",
    "max_len": "max_caption_len",
    "seed": "seed",
    "attention": "attention",
    "decoder": "decoder",
    "fusion": "fusion",
}
_TRAINING_FLAGS = {
    "lr": "lr",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "patience": "patience",
    "target_loss": "target_loss",
}
_RUN_FLAGS = (
    "features_dir",
    "manifest",
    "vocab",
    "checkpoint",
    "init_checkpoint",
    "out",
    "generations",
    "split",
    "head",
    "video_id",
    "min_count",
    "vocab_size",
    "feature_dim",
    "all_entries",
)


class UsageError(Exception):
    """Error de uso de la CLI (exit 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


# ==============================================================================
# PARSER Y CONFIGURACIÓN
# ==============================================================================


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    paths = common.add_argument_group("rutas")
    paths.add_argument("--config", type=Path, help="JSON con secciones 'decoder' y 'training'")
    paths.add_argument("--features-dir", type=Path)
    paths.add_argument("--manifest", type=Path)
    paths.add_argument("--vocab", type=Path)
    paths.add_argument("--checkpoint", type=Path)
    paths.add_argument("--init-checkpoint", type=Path)
    paths.add_argument("--out", type=Path, help="Directorio de salida")
    paths.add_argument("--generations", type=Path, help="generations.jsonl a re-puntuar con evaluate")

    model = common.add_argument_group("decodificador")
    model.add_argument("--n", type=int)
    model.add_argument("--d-a", type=int)
    model.add_argument("--lambda1", type=float)
    model.add_argument("--lambda3", type=float)
    model.add_argument("--lambda5", type=float)
    model.add_argument("--max-len", type=int)
    model.add_argument("--seed", type=int)
    model.add_argument("--attention", choices=["soft", "dot"])
    model.add_argument("--decoder", choices=["memory", "lstm"])
    model.add_argument("--fusion", choices=["ccmf", "sum", "product"])

    train = common.add_argument_group("entrenamiento")
    train.add_argument("--lr", type=float)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--epochs", type=int)
    train.add_argument("--patience", type=int)
    train.add_argument("--target-loss", type=float)

    run = common.add_argument_group("ejecución")
    run.add_argument("--split", choices=["train", "val", "test"])
    run.add_argument("--head", type=int, choices=[1, 3, 5])
    run.add_argument("--video-id")
    run.add_argument("--min-count", type=int)
    run.add_argument("--vocab-size", type=int)
    run.add_argument("--feature-dim", type=int)
    run.add_argument("--all-entries", action="store_true", help="grad-check: todas las entradas de cada tensor")
    run.add_argument("--log-level", default=None)

    parser = _Parser(prog="memcaption", description="Decodificador de memoria para descripciones de vídeo")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common])
    return parser


class _StderrHandler(logging.StreamHandler):
    """StreamHandler que escribe siempre en el sys.stderr vigente."""

    @property
    def stream(self):  # type: ignore[override]
        return sys.stderr

    @stream.setter
    def stream(self, value) -> None:
        pass


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format=settings.log_format,
        handlers=[_StderrHandler()],
        force=True,
    )


def _read_config_file(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise UsageError(f"--config: no existe {path}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"--config: JSON inválido en {path}: {e}") from e
    if not isinstance(data, dict):
        raise UsageError(f"--config: se esperaba un objeto JSON en {path}")
    return data


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """defaults < entorno (Settings) < --config < flags."""
    payload: dict[str, Any] = {
        "command": args.command,
        "vocab_size": settings.reference_vocab_size,
        "feature_dim": settings.reference_feature_dim,
        "decoder": {"seed": settings.default_seed},
        "training": {},
    }
    if args.config is not None:
        file_cfg = _read_config_file(args.config)
        for key, value in file_cfg.items():
            if key in ("decoder", "training") and isinstance(value, dict):
                payload[key].update(value)
            else:
                payload[key] = value

    flags = vars(args)
    payload["decoder"].update({field: flags[f] for f, field in _DECODER_FLAGS.items() if flags[f] is not None})
    payload["training"].update({field: flags[f] for f, field in _TRAINING_FLAGS.items() if flags[f] is not None})
    payload.update({f: flags[f] for f in _RUN_FLAGS if flags[f] is not None})
    return RunConfig.model_validate(payload)


def _require(run: RunConfig, *names: str) -> None:
    try:
        run.require_paths(*names)
    except ValueError as e:
        raise UsageError(str(e)) from e


# ==============================================================================
# HELPERS
# ==============================================================================


def _load_split(run: RunConfig, split: str):
    records = split_records(read_manifest(run.manifest), split)
    features = load_features(run.features_dir, [r.video_id for r in records])
    return records, features


def _feature_width(features: dict) -> int:
    widths = {values.shape[1] for values in features.values()}
    if len(widths) != 1:
        raise ValueError(f"Anchos de features inconsistentes: {sorted(widths)}")
    return widths.pop()


def _restore(path: Path) -> tuple[BaseCaptionDecoder, Vocabulary, Checkpoint]:
    ckpt = load_checkpoint(path)
    vocab = Vocabulary(tokens=ckpt.vocab_tokens)
    decoder = build_decoder(ckpt.decoder, len(vocab), ckpt.feature_dim)
    assign_parameters(decoder, ckpt.params)
    return decoder, vocab, ckpt


def _out_dir(run: RunConfig) -> Path:
    run.out.mkdir(parents=True, exist_ok=True)
    return run.out


def _print_json(payload: Any) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ==============================================================================
# SUBCOMANDOS
# ==============================================================================


def cmd_train(run: RunConfig) -> int:
    _require(run, "features_dir", "manifest", "out")
    out = _out_dir(run)
    records, features = _load_split(run, "train")
    if not records:
        raise ValueError("El split 'train' está vacío")

    if run.vocab is not None and run.vocab.exists():
        vocab = Vocabulary.load(run.vocab)
    else:
        vocab = build_vocab((c for r in records for c in r.captions), run.min_count)
        vocab.save(run.vocab or out / "vocab.tsv")

    feature_dim = _feature_width(features)
    decoder = build_decoder(run.decoder, len(vocab), feature_dim)
    trainer = Trainer(decoder, run.training)

    parent = None
    start_epoch = 1
    if run.init_checkpoint is not None:
        init = load_checkpoint(run.init_checkpoint)
        assign_parameters(decoder, init.params)
        trainer.optimizer.load_state(init.adam_step, init.adam)
        parent = checkpoint_hash(run.init_checkpoint)
        start_epoch = init.epoch + 1

    stream = batch_iter(build_examples(records, features, vocab), run.training.batch_size, run.decoder.seed)
    val_records, val_features = _load_split(run, "val")
    val_examples = build_examples(val_records, val_features, vocab) if val_records else None

    result = trainer.fit(stream, val_examples, log_path=out / "loss_log.jsonl", start_epoch=start_epoch)
    last = result.history[-1]

    def checkpoint_for(params: dict, epoch: int) -> Checkpoint:
        return Checkpoint(
            decoder=run.decoder,
            training=run.training,
            vocab_tokens=list(vocab.tokens),
            feature_dim=feature_dim,
            params=params,
            adam_step=trainer.optimizer.step_count,
            adam=trainer.optimizer.state_arrays(),
            epoch=epoch,
            best_val=result.best_value if val_examples else None,
            seed=run.decoder.seed,
            parent=parent,
        )

    final_path = run.checkpoint or out / "checkpoint.mdck"
    save_checkpoint(checkpoint_for(snapshot_parameters(decoder), last.epoch), final_path)
    if result.best_params:
        save_checkpoint(checkpoint_for(result.best_params, result.best_epoch), out / "best.mdck")

    _print_json(
        {
            "epochs": len(result.history),
            "final_loss": last.loss,
            "per_layer": last.per_layer,
            "best_epoch": result.best_epoch,
            "checkpoint": str(final_path),
            "config_hash": config_hash(run.decoder, run.training),
        }
    )
    return EXIT_OK


def cmd_generate(run: RunConfig) -> int:
    _require(run, "checkpoint", "features_dir", "manifest", "out")
    decoder, vocab, _ = _restore(run.checkpoint)
    records, features = _load_split(run, run.split)
    if not records:
        raise ValueError(f"El split '{run.split}' está vacío")
    generations = generate_split(decoder, records, features, vocab, run.head)
    path = _out_dir(run) / "generations.jsonl"
    write_generations(generations, path)
    logger.info("Generaciones escritas en %s (%d vídeos)", path, len(generations))
    return EXIT_OK


def _rescore(run: RunConfig) -> int:
    """evaluate --generations: puntúa un volcado existente sin volver a decodificar."""
    _require(run, "manifest", "out")
    records = split_records(read_manifest(run.manifest), run.split)
    if run.checkpoint is not None:
        ckpt = load_checkpoint(run.checkpoint)
        digest = config_hash(ckpt.decoder, ckpt.training)
    else:
        digest = hashlib.sha256(run.generations.read_bytes()).hexdigest()[:16]
    report = rescore_generations(run.generations, records, digest, run.head, run.split)
    write_report(report, _out_dir(run) / "report.json")
    _print_json(report.model_dump(mode="json"))
    return EXIT_OK


def cmd_evaluate(run: RunConfig) -> int:
    if run.generations is not None:
        return _rescore(run)
    _require(run, "checkpoint", "features_dir", "manifest", "out")
    decoder, vocab, ckpt = _restore(run.checkpoint)
    records, features = _load_split(run, run.split)
    report, generations = evaluate_split(
        decoder, records, features, vocab, config_hash(ckpt.decoder, ckpt.training), run.head, run.split
    )
    out = _out_dir(run)
    write_generations(generations, out / "generations.jsonl")
    write_report(report, out / "report.json")
    _print_json(report.model_dump(mode="json"))
    return EXIT_OK


def _audit_lines(title: str, items: list[ParamItem], only_in_scope: bool = False) -> list[str]:
    lines = [f"== {title} =="]
    for item in items:
        if only_in_scope and not item.in_scope:
            continue
        shape = "x".join(str(s) for s in item.shape)
        tag = "core" if item.in_scope else "full"
        lines.append(f"{item.name:<28} {shape:>12} {item.count:>12,d}  {tag}")
    return lines


def cmd_count_params(run: RunConfig) -> int:
    audits = {
        scope: count_params(run.decoder, run.vocab_size, run.feature_dim, scope)
        for scope in ("decoder-core", "full", "lstm-baseline")
    }
    lines = _audit_lines(f"{run.decoder.decoder} decoder", audits["decoder-core"].items)
    lines += _audit_lines("lstm baseline", audits["lstm-baseline"].items, only_in_scope=True)
    lines.append(f"decoder-core total: {audits['decoder-core'].total}")
    lines.append(f"full total: {audits['full'].total}")
    lines.append(f"lstm-baseline total: {audits['lstm-baseline'].total}")
    sys.stdout.write("\n".join(lines) + "\n")

    if run.out is not None:
        payload = {scope: audit.model_dump(mode="json") for scope, audit in audits.items()}
        (_out_dir(run) / "param_audit.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_inspect_attention(run: RunConfig) -> int:
    _require(run, "checkpoint", "features_dir", "manifest", "video_id")
    decoder, vocab, _ = _restore(run.checkpoint)
    records = [r for r in read_manifest(run.manifest) if r.video_id == run.video_id]
    if not records:
        raise UsageError(f"--video-id '{run.video_id}' no está en el manifiesto")
    features = load_features(run.features_dir, [run.video_id])
    result = greedy_decode(decoder, features[run.video_id], run.video_id, head=run.head, vocab=vocab)
    inspection = AttentionInspection(
        video_id=run.video_id,
        caption=result.text,
        head=run.head,
        steps=max((len(v) for v in result.attention.values()), default=0),
        sentence_bleu_smoothed=sentence_bleu(result.text, records[0].captions),
        attention=result.attention_lists(),
        peaks=[AttentionPeak(site=s, slot=i, weight=w) for s, i, w in attention_peaks(result)],
    )
    payload = inspection.model_dump(mode="json")
    if run.out is not None:
        path = _out_dir(run) / f"attention_{run.video_id}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _print_json(payload)
    return EXIT_OK


def cmd_grad_check(run: RunConfig) -> int:
    report = run_grad_check_suite(seed=run.decoder.seed, all_entries=run.all_entries)
    _print_json(report.model_dump(mode="json"))
    if not report.passed:
        failing = [name for name, err in report.errors.items() if err >= report.tolerance]
        logger.error("❌ grad-check fallido en: %s", ", ".join(failing))
        return EXIT_RUNTIME
    logger.info("✅ grad-check correcto (peor error %.3e)", report.worst)
    return EXIT_OK


def cmd_make_toy_data(run: RunConfig) -> int:
    _require(run, "out")
    paths = make_toy_data(run.out, seed=run.decoder.seed)
    _print_json({name: str(path) for name, path in paths.items()})
    return EXIT_OK


HANDLERS = {
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "count-params": cmd_count_params,
    "inspect-attention": cmd_inspect_attention,
    "grad-check": cmd_grad_check,
    "make-toy-data": cmd_make_toy_data,
}


# ==============================================================================
# ENTRY POINT
# ==============================================================================


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.log_level if args.command else None)
        if args.command is None:
            raise UsageError("falta el subcomando. Opciones: " + ", ".join(COMMANDS))
        run = load_run_config(args)
    except UsageError as e:
        configure_logging()
        logger.error("%s", e)
        return EXIT_USAGE
    except ValidationError as e:
        logger.error("Configuración inválida:\n%s", e)
        return EXIT_USAGE
    except ValueError as e:
        configure_logging()
        logger.error("%s", e)
        return EXIT_USAGE

    try:
        return HANDLERS[run.command](run)
    except (UsageError, ValidationError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except Exception as e:
        logger.error("❌ %s falló: %s: %s", run.command, type(e).__name__, e)
        logger.debug("Traza completa", exc_info=True)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

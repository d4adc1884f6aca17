"""Command-line entry point.

Subcommands: ``gen`` builds a synthetic dataset directory, ``train``
fits a model and writes a checkpoint plus a per-epoch JSONL log,
``eval`` scores a checkpoint or runs full LOSO cross-validation, and
``prompt`` prints the prompt pipeline for a set of AU ids. Exit codes:
0 success, 2 config/contract error, 3 I/O error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .aucodes import (
    ALL_TEMPLATES,
    VALID_AU_IDS,
    AuAnnotation,
    TemplateBank,
    describe,
    render,
)
from .config import RunConfig
from .datasets import load_dataset, save_dataset
from .encoder import VideoTextModel
from .errors import ContractError, NumericDomainError
from .evaluation import EvalReport, cm_csv, report_lines
from .sampling import keyframe_downsample
from .synthdata import class_names, gen_dataset
from .train import evaluate, run_loso, train_model

EXIT_CONTRACT = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

OUTPUT_ENV = "AUALIGN_OUT"


def _default_out() -> str:
    return os.environ.get(OUTPUT_ENV, ".")


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = RunConfig.from_json(fh.read())
    overrides = {}
    for name in ("batch_size", "epochs", "seed", "base_lr", "warmup_epochs", "frames",
                 "prompt_style", "au_order", "template_count", "loso_agg"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    for flag in ("emo_prompts", "no_alignment", "constant_lambda"):
        if getattr(args, flag, False):
            overrides[flag] = True
    if getattr(args, "no_lsfm", False):
        overrides["lsfm_enabled"] = False
    if getattr(args, "no_photometric", False):
        overrides["photometric_enabled"] = False
    if overrides:
        cfg = replace(cfg, **overrides)
    if getattr(args, "linear_head", False):
        cfg = replace(cfg, encoder=replace(cfg.encoder, linear_head=True))
    if getattr(args, "num_classes", None) is not None:
        cfg = replace(cfg, encoder=replace(cfg.encoder, num_classes=args.num_classes))
    synth_overrides = {}
    for arg_name, field_name in (
        ("subjects", "num_subjects"),
        ("samples_per_subject", "samples_per_subject"),
        ("size", None),
        ("emotion_mode", "emotion_mode"),
    ):
        value = getattr(args, arg_name, None)
        if value is None:
            continue
        if arg_name == "size":
            synth_overrides["height"] = value
            synth_overrides["width"] = value
        else:
            synth_overrides[field_name] = value
    if getattr(args, "seed", None) is not None:
        synth_overrides["seed"] = args.seed
    if synth_overrides:
        cfg = replace(cfg, synth=replace(cfg.synth, **synth_overrides))
    return cfg


def _write_manifest(out_dir: str, cfg: RunConfig, started: float, refs: dict) -> None:
    manifest = {
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "started_unix": started,
        "finished_unix": time.time(),
        "version": __version__,
        **refs,
    }
    path = os.path.join(out_dir, f"run_{cfg.digest()}.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _write_report(out_dir: str, digest: str, report: EvalReport, tag: str) -> str:
    base = os.path.join(out_dir, f"report_{digest}_{tag}")
    with open(base + ".txt", "w", encoding="utf-8") as fh:
        fh.write(report_lines(report))
    with open(os.path.join(out_dir, f"cm_{digest}_{tag}.csv"), "w", encoding="utf-8") as fh:
        fh.write(cm_csv(report.cm))
    return base + ".txt"


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out or _default_out()
    started = time.time()
    raws = gen_dataset(cfg.synth)
    sequences = []
    for raw in raws:
        _, seq = keyframe_downsample(
            raw.frames,
            raw.keyframes,
            target=cfg.frames,
            subject_id=raw.subject_id,
            emotion=raw.emotion,
            au_set=raw.au_set,
        )
        sequences.append(seq)
    names = class_names(cfg.synth.emotion_mode)
    meta = {
        "emotion_mode": cfg.synth.emotion_mode,
        "class_names": list(names),
        "num_classes": len(names),
        "frames": cfg.frames,
        "height": cfg.synth.height,
        "width": cfg.synth.width,
        "seed": cfg.synth.seed,
        "config_digest": cfg.digest(),
    }
    save_dataset(out_dir, sequences, meta)
    print(f"wrote {len(sequences)} samples to {out_dir} (digest {cfg.digest()})")
    _write_manifest(out_dir, cfg, started, {"dataset": out_dir, "samples": len(sequences)})
    return 0


def _check_classes(cfg: RunConfig, meta: dict) -> tuple[str, ...]:
    names = tuple(meta["class_names"])
    if cfg.encoder.num_classes != len(names):
        raise ContractError(
            f"model is configured for {cfg.encoder.num_classes} classes "
            f"but the dataset has {len(names)}"
        )
    return names


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out or _default_out()
    os.makedirs(out_dir, exist_ok=True)
    started = time.time()
    sequences, meta = load_dataset(args.dataset)
    names = _check_classes(cfg, meta)
    model, logs = train_model(sequences, cfg, names)
    digest = cfg.digest()
    ckpt_dir = os.path.join(out_dir, f"ckpt_{digest}")
    model.save(ckpt_dir)
    log_path = os.path.join(out_dir, f"log_{digest}.jsonl")
    with open(log_path, "w", encoding="utf-8") as fh:
        for row in logs:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, f"config_{digest}.json"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_json())
    print(f"checkpoint: {ckpt_dir}")
    print(f"log: {log_path}")
    _write_manifest(out_dir, cfg, started, {"checkpoint": ckpt_dir, "log": log_path})
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out or _default_out()
    os.makedirs(out_dir, exist_ok=True)
    started = time.time()
    sequences, meta = load_dataset(args.dataset)
    names = _check_classes(cfg, meta)
    digest = cfg.digest()
    refs: dict = {}
    if args.loso:
        combined, fold_reports, _ = run_loso(sequences, cfg, names)
        for rep in fold_reports:
            _write_report(out_dir, digest, rep, f"fold_{rep.fold_id}")
        path = _write_report(out_dir, digest, combined, cfg.loso_agg)
        print(f"LOSO {cfg.loso_agg}: UF1={combined.uf1:.4f} UAR={combined.uar:.4f} ACC={combined.acc:.4f}")
        refs["report"] = path
    else:
        if not args.checkpoint:
            raise ContractError("eval: pass --checkpoint or --loso")
        model = VideoTextModel.load(args.checkpoint)
        if model.cfg.num_classes != len(names):
            raise ContractError(
                f"checkpoint has {model.cfg.num_classes} classes, dataset has {len(names)}"
            )
        report = evaluate(model, sequences, cfg.batch_size, fold_id=args.split)
        path = _write_report(out_dir, digest, report, args.split)
        print(f"{args.split}: UF1={report.uf1:.4f} UAR={report.uar:.4f} ACC={report.acc:.4f}")
        refs["report"] = path
    _write_manifest(out_dir, cfg, started, refs)
    return 0


def cmd_prompt(args) -> int:
    try:
        ids = [int(part) for part in args.au.split(",") if part.strip()]
    except ValueError:
        raise ContractError(f"prompt: cannot parse AU ids from {args.au!r}") from None
    if not ids:
        raise ContractError("prompt: no AU ids given")
    unknown = [i for i in ids if i not in VALID_AU_IDS]
    if unknown:
        raise ContractError(
            f"prompt: unknown AU ids {unknown}; valid ids are {list(VALID_AU_IDS)}"
        )
    annotation = AuAnnotation(ids)
    description = describe(annotation, style=args.style)
    bank = TemplateBank(ALL_TEMPLATES)
    if args.template is not None:
        prompt = render(bank, description, template_index=args.template)
    else:
        prompt = render(bank, description, rng=np.random.default_rng(args.seed or 0))
    print(f"description: {description}")
    print(f"prompt: {prompt.text}")
    print(f"token_ids: {list(prompt.token_ids)}")
    print(f"token_count: {len(prompt.token_ids)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aualign", description=__doc__)
    parser.add_argument("--version", action="version", version=f"aualign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON run-config file; flags override its fields")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or '.')")
        p.add_argument("--seed", type=int, default=None)

    gen = sub.add_parser("gen", help="generate a synthetic dataset directory")
    add_common(gen)
    gen.add_argument("--subjects", type=int, default=None)
    gen.add_argument("--samples-per-subject", dest="samples_per_subject", type=int, default=None)
    gen.add_argument("--size", type=int, default=None, help="square frame size (divisible by 4)")
    gen.add_argument("--emotion-mode", dest="emotion_mode", choices=["3class", "7class"], default=None)
    gen.add_argument("--frames", type=int, default=None, help="frames kept after downsampling")
    gen.set_defaults(func=cmd_gen)

    train = sub.add_parser("train", help="train on a dataset directory")
    add_common(train)
    train.add_argument("--dataset", required=True)
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    train.add_argument("--base-lr", dest="base_lr", type=float, default=None)
    train.add_argument("--warmup-epochs", dest="warmup_epochs", type=int, default=None)
    train.add_argument("--num-classes", dest="num_classes", type=int, default=None)
    train.add_argument("--prompt-style", dest="prompt_style", choices=["action", "facs"], default=None)
    train.add_argument("--au-order", dest="au_order", choices=["fixed", "shuffled"], default=None)
    train.add_argument("--template-count", dest="template_count", type=int, default=None)
    train.add_argument("--emo-prompts", dest="emo_prompts", action="store_true",
                       help="ablation: generic emotion prompts instead of AU prompts")
    train.add_argument("--no-alignment", dest="no_alignment", action="store_true",
                       help="ablation: drop the alignment loss (classification weight takes the full sum)")
    train.add_argument("--linear-head", dest="linear_head", action="store_true",
                       help="ablation: linear classifier instead of the transformer head")
    train.add_argument("--constant-lambda", dest="constant_lambda", action="store_true",
                       help="ablation: fixed loss weights instead of the progressive schedule")
    train.add_argument("--no-lsfm", dest="no_lsfm", action="store_true",
                       help="ablation: disable the region-mix augmentation")
    train.add_argument("--no-photometric", dest="no_photometric", action="store_true",
                       help="ablation: disable flip/jitter augmentation")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint or run LOSO")
    add_common(ev)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--checkpoint", default=None)
    ev.add_argument("--loso", action="store_true", help="train per fold and aggregate")
    ev.add_argument("--loso-agg", dest="loso_agg", choices=["pooled", "averaged"], default=None)
    ev.add_argument("--split", default="full", help="tag for the report files")
    ev.add_argument("--epochs", type=int, default=None)
    ev.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    ev.add_argument("--base-lr", dest="base_lr", type=float, default=None)
    ev.add_argument("--warmup-epochs", dest="warmup_epochs", type=int, default=None)
    ev.add_argument("--num-classes", dest="num_classes", type=int, default=None)
    ev.add_argument("--no-alignment", dest="no_alignment", action="store_true")
    ev.add_argument("--linear-head", dest="linear_head", action="store_true")
    ev.add_argument("--constant-lambda", dest="constant_lambda", action="store_true")
    ev.add_argument("--no-lsfm", dest="no_lsfm", action="store_true")
    ev.add_argument("--no-photometric", dest="no_photometric", action="store_true")
    ev.add_argument("--emo-prompts", dest="emo_prompts", action="store_true")
    ev.set_defaults(func=cmd_eval)

    prompt = sub.add_parser("prompt", help="print the prompt pipeline for AU ids")
    prompt.add_argument("--au", required=True, help="comma-separated AU ids, e.g. 6,12")
    prompt.add_argument("--template", type=int, default=None, help="1-based template number")
    prompt.add_argument("--style", choices=["action", "facs"], default="action")
    prompt.add_argument("--seed", type=int, default=None)
    prompt.set_defaults(func=cmd_prompt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"error (contract): {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except NumericDomainError as exc:
        print(f"error (numeric): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``sbn-aste {stats,train,predict,eval,grad-check}``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from .data import DATASETS, SPLITS, DataError, compute_stats, infer_split, parse_dataset, split_path

logger = logging.getLogger("sbn_aste")

GRAD_TOLERANCE = 1e-4


class CLIError(Exception):
    pass


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _stats_targets(data: list[str]) -> list[tuple[str, str, Path]]:
    targets = []
    for item in data:
        p = Path(item)
        if p.is_dir():
            found = False
            for name in DATASETS:
                for split in SPLITS:
                    f = split_path(p, name, split)
                    if f.exists():
                        targets.append((name, split, f))
                        found = True
            if not found:
                for split in SPLITS:
                    f = p / f"{split}_triplets.txt"
                    if f.exists():
                        targets.append((p.name, split, f))
                        found = True
            if not found:
                raise CLIError(f"{p}: no *_triplets.txt files found")
        elif p.is_file():
            targets.append((p.parent.name, infer_split(p), p))
        else:
            raise CLIError(f"{p}: no such file or directory")
    return targets


def cmd_stats(args) -> int:
    columns = ("#S", "POS", "NEU", "NEG", "#SW", "#MW")
    rows = []
    for name, split, path in _stats_targets(args.data):
        stats = compute_stats(parse_dataset(path, split))
        rows.append((name, split, stats))
    print(f"{'Dataset':<10}{'Split':<7}" + "".join(f"{c:>7}" for c in columns))
    for name, split, stats in rows:
        print(f"{name:<10}{split:<7}" + "".join(f"{v:>7}" for v in stats.as_row().values()))
    print()
    for name, split, stats in rows:
        for key in ("num_sentences", "pos", "neu", "neg", "single_word", "multi_word"):
            print(f"{name}.{split}.{key}={getattr(stats, key)}")
    return 0


def _resolve_config(args):
    from .config import load_config, parse_overrides

    overrides = parse_overrides(args.set)
    config = load_config(args.config, overrides)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.deterministic:
        config = replace(config, deterministic=True)
    return config


def _train_files(args) -> tuple[Path, Path]:
    if args.data:
        root = Path(args.data)
        train_file, dev_file = root / "train_triplets.txt", root / "dev_triplets.txt"
    else:
        if not (args.train and args.dev):
            raise CLIError("train needs --data DIR or both --train and --dev")
        train_file, dev_file = Path(args.train), Path(args.dev)
    for f in (train_file, dev_file):
        if not f.is_file():
            raise CLIError(f"{f}: no such file")
    return train_file, dev_file


def cmd_train(args) -> int:
    from .config import dump_config
    from .training import train

    config = _resolve_config(args)
    train_file, dev_file = _train_files(args)
    train_set = parse_dataset(train_file, "train")
    dev_set = parse_dataset(dev_file, "dev")

    out = Path(args.out)
    existed = out.exists()
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {
        "checkpoint": out / "checkpoint.pt",
        "metrics": out / "metrics.jsonl",
        "config": out / "config.yaml",
        "manifest": out / "manifest.json",
    }
    try:
        result = train(config, train_set, dev_set, log_path=artifacts["metrics"])
        _atomic(artifacts["checkpoint"], result.checkpoint.save)
        artifacts["config"].write_text(dump_config(config), encoding="utf-8")
        manifest = {
            "command": "train",
            "config": config.to_dict(),
            "config_fingerprint": config.fingerprint(),
            "datasets": {str(train_file): file_sha256(train_file), str(dev_file): file_sha256(dev_file)},
            "seed": config.seed,
            "artifacts": {k: str(v) for k, v in artifacts.items()},
            "best_epoch": result.best_epoch,
            "best_dev_f1": result.best_dev_f1,
            "tool_version": tool_version(),
        }
        _atomic(artifacts["manifest"], lambda p: Path(p).write_text(json.dumps(manifest, indent=2), encoding="utf-8"))
    except BaseException:
        for p in artifacts.values():
            p.unlink(missing_ok=True)
        if not existed:
            shutil.rmtree(out, ignore_errors=True)
        raise
    print(f"best_epoch={result.best_epoch}")
    print(f"best_dev_f1={result.best_dev_f1:.6f}")
    print(f"checkpoint={artifacts['checkpoint']}")
    return 0


def _atomic(path: Path, write) -> None:
    """Write via a temporary sibling so a crash never leaves a half-written file."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def cmd_predict(args) -> int:
    from .records import write_predictions
    from .training import Checkpoint

    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.is_file():
        raise CLIError(f"{ckpt_path}: no such checkpoint")
    model = Checkpoint.load(ckpt_path).build_model()
    sentences = parse_dataset(args.data, args.split)
    predictions = model.predict(sentences)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic(out, lambda p: write_predictions(p, predictions))
    print(f"sentences={len(sentences)}")
    print(f"triplets={sum(len(v) for v in predictions.values())}")
    print(f"predictions={out}")
    return 0


def cmd_eval(args) -> int:
    from .evaluation import format_report, score
    from .records import read_predictions

    gold = {s.id: s.gold for s in parse_dataset(args.gold, args.split)}
    predictions = read_predictions(args.pred)
    report = score(predictions, gold)
    print(format_report(report))
    if args.out:
        out = Path(args.out)
        _atomic(out, lambda p: Path(p).write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8"))
    return 0


def cmd_grad_check(args) -> int:
    from .gradcheck import run_suite

    report = run_suite(args.seed)
    ok = True
    for name, err in report.items():
        status = "PASS" if err <= GRAD_TOLERANCE else "FAIL"
        ok &= status == "PASS"
        print(f"{name}={err:.3e} {status}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbn-aste", description="Span-level bidirectional triplet extraction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus statistics for ASTE-Data-V2 files")
    p.add_argument("--data", nargs="+", required=True, help="triplet files or dataset directories")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model and keep the best dev checkpoint")
    p.add_argument("--data", help="directory with train_triplets.txt and dev_triplets.txt")
    p.add_argument("--train", help="training file (instead of --data)")
    p.add_argument("--dev", help="development file (instead of --data)")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration value")
    p.add_argument("--seed", type=int)
    p.add_argument("--deterministic", action="store_true", help="single-threaded deterministic kernels")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="extract triplets with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="ASTE-Data-V2 file to annotate")
    p.add_argument("--split", choices=SPLITS, help="split used for sentence ids (default: from file name)")
    p.add_argument("--out", required=True, help="prediction file (JSON lines)")
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="exact-match scores of a prediction file")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--split", choices=SPLITS, help="split used for sentence ids (default: from file name)")
    p.add_argument("--out", help="also write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad-check", help="finite-difference gradient checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "deterministic", False):
        import torch

        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
    try:
        return args.func(args)
    except (CLIError, DataError, OSError, ValueError, KeyError) as exc:
        print(f"sbn-aste {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 success, 1 runtime or input-data failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .config import Config, ConfigError, load_config
from .dispatch import dispatch_prompts, write_offline
from .evaluate import evaluate
from .loss import gradient_check, total_loss
from .model import ValidationError
from .pipeline import CaptionPrompt, build_dataset, ingest_captions
from .records import (
    FormatError,
    dumps_document,
    dumps_record,
    parse_frames,
    parse_predictions,
    parse_samples,
    serialize_frames,
    serialize_samples,
)
from .stats import task_distribution, view_distribution, word_frequency
from .synthetic import synthetic_frames

log = logging.getLogger("drivekit")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FAILURE):
        super().__init__(message)
        self.code = code


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_lines(path: Path) -> List[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise CliError(f"{path}: no such file") from None


def _config(path: Optional[str], seed: Optional[int] = None) -> Config:
    if path is not None and not Path(path).exists():
        raise CliError(f"{path}: no such config file", EXIT_USAGE)
    cfg = load_config(path)
    return cfg if seed is None else cfg.with_seed(seed)


def _read_jsonl(path: Path) -> List[dict]:
    out = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", lineno, None, str(path)) from None
        if not isinstance(obj, dict):
            raise FormatError("expected an object", lineno, None, str(path))
        obj["_line"] = lineno
        out.append(obj)
    return out


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_build(args) -> int:
    cfg = _config(args.config, args.seed)
    frames_path = Path(args.frames)
    frames = parse_frames(_read_lines(frames_path), cfg.pipeline.categories, source=str(frames_path))
    skipped: List[str] = []
    inputs = {"frames": {"name": frames_path.name, "sha256": _sha256(frames_path)},
              "config": {"name": Path(args.config).name, "sha256": _sha256(Path(args.config))}}
    if args.captions:
        cap_path = Path(args.captions)
        responses = [(str(r["frame_id"]), r["text"]) for r in _read_jsonl(cap_path) if r.get("text")]
        frames, skipped = ingest_captions(frames, responses)
        inputs["captions"] = {"name": cap_path.name, "sha256": _sha256(cap_path)}

    result = build_dataset(frames, cfg.pipeline)
    out = Path(args.out)
    outputs = ["samples.jsonl", "frames_filtered.jsonl", "caption_prompts.jsonl", "manifest.json"]
    _write(out / "samples.jsonl", serialize_samples(result.samples))
    _write(out / "frames_filtered.jsonl", serialize_frames(result.frames))
    _write(out / "caption_prompts.jsonl",
           "".join(dumps_record({"frame_id": p.frame_id, "prompt": p.prompt}) + "\n" for p in result.prompts))
    if args.offline_prompts:
        write_offline(result.prompts, out / "prompts")
        outputs.append("prompts/")

    manifest = {
        "tool": "drivekit",
        "version": __version__,
        "seed": cfg.seed,
        "inputs": inputs,
        "counts": {
            "frames": len(result.frames),
            "samples": len(result.samples),
            "caption_prompts": len(result.prompts),
            "per_task": result.task_counts(),
        },
        "drops": result.stats.as_dict(),
        "captions_skipped": skipped,
        "outputs": outputs,
        "config": cfg.raw,
    }
    _write(out / "manifest.json", dumps_document(manifest))
    print(f"built {len(result.samples)} samples from {len(result.frames)} frames -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args.config)
    gt_path, pred_path = Path(args.gt), Path(args.pred)
    samples = parse_samples(_read_lines(gt_path), source=str(gt_path))
    preds = parse_predictions(_read_lines(pred_path), source=str(pred_path))
    report = evaluate(samples, preds, cfg)
    _write(Path(args.report), dumps_document(report))
    for task, section in report["tasks"].items():
        scores = ", ".join(f"{k}={v:.4f}" for k, v in section.items() if isinstance(v, float))
        print(f"{task}: {scores} (missing {section['missing']}/{section['samples']})")
    return EXIT_OK


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])


def cmd_stats(args) -> int:
    samples_path = Path(args.samples)
    samples = parse_samples(_read_lines(samples_path), source=str(samples_path))
    captions: List[str] = []
    if args.captions:
        captions = [str(r["text"]) for r in _read_jsonl(Path(args.captions)) if r.get("text")]
    words = word_frequency(captions, args.top_n)
    tasks = task_distribution(samples) if samples else {}
    try:
        views, surround = view_distribution(samples)
    except ValueError:
        views, surround = {}, len(samples)
    report = {
        "counts": {"samples": len(samples), "captions": len(captions), "surround_samples": surround},
        "task_distribution": tasks,
        "view_distribution": views,
        "word_frequency": [[w, c] for w, c in words],
    }
    _write(Path(args.out), dumps_document(report))
    if args.csv_dir:
        d = Path(args.csv_dir)
        _write_csv(d / "word_frequency.csv", ("token", "count"), words)
        _write_csv(d / "task_distribution.csv", ("label", "fraction"), tasks.items())
        _write_csv(d / "view_distribution.csv", ("label", "fraction"), views.items())
    for view, frac in views.items():
        print(f"{view}: {frac:.6f}")
    return EXIT_OK


def cmd_loss_check(args) -> int:
    cfg = _config(args.config)
    path = Path(args.instances)
    worst = 0.0
    for i, inst in enumerate(_read_jsonl(path)):
        try:
            res = total_loss(inst["probs"], inst["boxes"], inst["gt_labels"], inst["gt_boxes"], cfg.loss)
            err = gradient_check(inst["probs"], inst["boxes"], inst["gt_labels"], inst["gt_boxes"], cfg.loss,
                                 step=args.step)
        except KeyError as exc:
            raise FormatError("missing", inst["_line"], str(exc.args[0]), str(path)) from None
        except ValueError as exc:
            raise CliError(f"{path}:{inst['_line']}: {exc}") from None
        worst = max(worst, err)
        matching = " ".join(f"{q}->{g}" for q, g in res.matching) or "none"
        print(f"instance {i}: value={res.value:.6f} cls={res.cls:.6f} reg={res.reg:.6f} "
              f"grad_max_rel_err={err:.3e} matching={matching}")
    return EXIT_OK


def cmd_prompts(args) -> int:
    cfg = _config(args.config)
    path = Path(args.prompts)
    prompts = []
    for rec in _read_jsonl(path):
        if "frame_id" not in rec or "prompt" not in rec:
            raise FormatError("need frame_id and prompt", rec["_line"], None, str(path))
        prompts.append(CaptionPrompt(str(rec["frame_id"]), str(rec["prompt"])))
    out = Path(args.out)
    if args.offline:
        paths = write_offline(prompts, out)
        print(f"wrote {len(paths)} prompt files to {out}")
        return EXIT_OK
    endpoint = cfg.endpoint
    if args.endpoint:
        from dataclasses import replace
        endpoint = replace(endpoint, url=args.endpoint)
    if not endpoint.url:
        raise CliError("no endpoint url: pass --endpoint or set endpoint.url in the config", EXIT_USAGE)
    responses = dispatch_prompts(prompts, endpoint)
    _write(out, "".join(dumps_record({"frame_id": r.frame_id, "text": r.text, "error": r.error}) + "\n"
                        for r in responses))
    failed = sum(not r.ok for r in responses)
    print(f"{len(responses) - failed} responses, {failed} failed -> {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    frames = synthetic_frames(args.n, args.seed, caption_every=args.caption_every)
    _write(Path(args.out), serialize_frames(frames))
    print(f"wrote {len(frames)} synthetic frames -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drivekit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="dedup, filter and generate task samples from frame records")
    p.add_argument("--frames", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--captions", help="caption responses (JSONL with frame_id, text)")
    p.add_argument("--offline-prompts", action="store_true", help="also write one caption prompt file per frame")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="score predictions against task samples")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="word frequency, task and view distributions")
    p.add_argument("--samples", required=True)
    p.add_argument("--captions")
    p.add_argument("--out", required=True)
    p.add_argument("--top-n", type=int, default=50)
    p.add_argument("--csv-dir")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("loss-check", help="evaluate the grounding loss and check its gradient")
    p.add_argument("--instances", required=True)
    p.add_argument("--config")
    p.add_argument("--step", type=float, default=1e-5)
    p.set_defaults(func=cmd_loss_check)

    p = sub.add_parser("prompts", help="send caption prompts to an endpoint, or write them offline")
    p.add_argument("--prompts", required=True)
    p.add_argument("--out", required=True, help="responses JSONL, or a directory with --offline")
    p.add_argument("--config")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--endpoint")
    g.add_argument("--offline", action="store_true")
    p.set_defaults(func=cmd_prompts)

    p = sub.add_parser("synth", help="write seeded synthetic frames")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--caption-every", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"drivekit: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CliError as exc:
        print(f"drivekit: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, ValidationError) as exc:
        print(f"drivekit: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, OSError) as exc:
        print(f"drivekit: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

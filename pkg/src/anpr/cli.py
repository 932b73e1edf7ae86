"""Command-line front end for the plate reader.

One executable, six subcommands covering the whole workflow:

    gen-dataset   render an augmented character training set to disk
    train         fit the character classifier on such a set
    ocr           read a single plate crop (no detector needed)
    detect        locate plates in a frame with a YOLO network, read each
    batch         detect/ocr over a directory of frames
    eval          score a predictions CSV against ground truth
    config        print the active tuning parameters

Exit codes: 0 success, 1 operational failure (bad file, parse error),
2 usage error.  Precedence for tuning values is flags (--set) over a
--config file over built-in defaults.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import darknet, pipeline
from .charnet import (
    CharModel,
    TrainConfig,
    load_model,
    save_model,
    train,
    train_log_csv,
)
from .config import PipelineConfig, dump_config, parse_config, set_key
from .errors import AnprError
from .imgio import read_image, read_image_gray
from .imgproc import to_grayscale
from .synthgen import GlyphSet, load_dataset, write_dataset

__all__ = ["run", "main"]

# Characters the classifier mixes up most at plate resolution.
LOOKALIKES = ("08BD", "GC6")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".pbm"}


def _lookalike_note(ch: str) -> str:
    for group in LOOKALIKES:
        if ch in group:
            return "  (easily confused: " + "/".join(group) + ")"
    return ""


def _build_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = parse_config(args.config, base=cfg)
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise AnprError(f"--set needs key=value, got {item!r}")
        cfg = set_key(cfg, key.strip(), value.strip())
    return cfg.validate()


def _add_config_flags(sub):
    sub.add_argument("--config", metavar="FILE",
                     help="tuning parameters file (key = value lines)")
    sub.add_argument("--set", metavar="KEY=VALUE", action="append",
                     help="override one tuning parameter (repeatable)")


def _load_charmodel(path) -> CharModel:
    return load_model(Path(path).read_bytes())


def _load_detector(cfg_path, weights_path) -> darknet.Network:
    spec = darknet.parse_cfg(Path(cfg_path).read_text(encoding="utf-8"))
    return darknet.load_weights(spec, Path(weights_path).read_bytes())


# ----------------------------------------------------------------- commands

def _cmd_gen_dataset(args) -> int:
    glyphs = GlyphSet.from_dir(args.font_dir) if args.font_dir else None
    paths = write_dataset(
        args.out, glyphs=glyphs, per_class=args.per_class, seed=args.seed
    )
    print(f"wrote {len(paths)} samples under {args.out}")
    return 0


def _cmd_train(args) -> int:
    data = load_dataset(args.data)
    cfg = TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    model, log = train(CharModel(), data, cfg)
    Path(args.out).write_bytes(save_model(model))
    sys.stdout.write(train_log_csv(log))
    print(f"saved model to {args.out}")
    return 0


def _cmd_ocr(args) -> int:
    cfg = _build_config(args)
    model = _load_charmodel(args.model)
    gray = read_image_gray(args.image)
    r = pipeline.recognize_plate(gray, cfg, model, source=str(args.image))
    print(r.text)
    for i, (ch, p) in enumerate(zip(r.text, r.probs), start=1):
        print(f"{i:3d}  {ch}  {p.max():.4f}{_lookalike_note(ch)}")
    if r.unreadable:
        print("no characters recognized", file=sys.stderr)
    return 0


def _persist_all(results, gray, out_dir) -> list:
    names = []
    for r in results:
        box = r.plate_box
        crop = gray[box.y:box.y + box.h, box.x:box.x + box.w]
        names.append(pipeline.persist_result(r, crop, out_dir).name)
    return names


def _cmd_detect(args) -> int:
    cfg = _build_config(args)
    model = _load_charmodel(args.model)
    net = _load_detector(args.cfg, args.weights)
    img = read_image(args.image)
    source = Path(args.image).name
    results = pipeline.process_image(img, net, cfg, model, source=source)
    gray = img if img.ndim == 2 else to_grayscale(img)
    names = _persist_all(results, gray, args.out)
    if not results:
        print("no plates found", file=sys.stderr)
    for r, name in zip(results, names):
        text = r.text if r.text else "(unreadable)"
        print(f"{name}: {text}  mean_prob={r.mean_prob:.3f}  "
              f"{r.total_ms:.1f} ms")
    return 0


def _cmd_batch(args) -> int:
    cfg = _build_config(args)
    if bool(args.cfg) != bool(args.weights):
        raise AnprError("--cfg and --weights must be given together")
    model = _load_charmodel(args.model)
    net = _load_detector(args.cfg, args.weights) if args.cfg else None

    frames_dir = Path(args.frames)
    if not frames_dir.is_dir():
        raise AnprError(f"not a directory: {frames_dir}")
    frames = sorted(
        p for p in frames_dir.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not frames:
        print("no frames found", file=sys.stderr)
        return 0

    def work(path):
        try:
            img = read_image(path)
            gray = img if img.ndim == 2 else to_grayscale(img)
            results = pipeline.process_image(
                img, net, cfg, model, source=path.name
            )
            return results, gray, None
        except (AnprError, OSError, ValueError) as exc:
            return None, None, f"{path.name}: {exc}"

    failures = []
    n_results = 0
    workers = max(1, args.workers)
    # frames fan out to the pool; persistence stays on this thread, in
    # input order, so results.csv comes out identical run to run
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for path, (results, gray, err) in zip(frames, pool.map(work, frames)):
            if err is not None:
                failures.append(err)
                continue
            names = _persist_all(results, gray, args.out)
            n_results += len(results)
            for r, name in zip(results, names):
                text = r.text if r.text else "(unreadable)"
                print(f"{path.name} -> {name}: {text}")
    print(f"{len(frames)} frames, {n_results} plates, "
          f"{len(failures)} failures")
    for line in failures:
        print(f"error: {line}", file=sys.stderr)
    return 1 if failures else 0


def _read_text_csv(path, what):
    import csv

    rows = {}
    order = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise AnprError(f"cannot read {what} file: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "source" not in fields or "text" not in fields:
            raise AnprError(
                f"{what} file needs 'source' and 'text' columns, has {fields}"
            )
        for row in reader:
            key = row["source"]
            rows[key] = row
            order.append(key)
    return rows, order


def _cmd_eval(args) -> int:
    preds, order = _read_text_csv(args.pred, "predictions")
    truths, _ = _read_text_csv(args.truth, "truth")
    pairs = []
    for source in order:
        if source not in truths:
            raise AnprError(f"no ground truth for source {source!r}")
        row = preds[source]
        seconds = float(row["total_ms"]) / 1000.0 if "total_ms" in row else 0.0
        pairs.append((source, row["text"], truths[source]["text"], seconds))
    report = pipeline.evaluate_batch(pairs)
    if args.csv:
        sys.stdout.write(pipeline.report_csv(report))
    else:
        print(pipeline.render_report(report))
    return 0


def _cmd_config(args) -> int:
    if not args.dump:
        print("config: nothing to do (did you mean --dump?)", file=sys.stderr)
        return 2
    cfg = _build_config(args)
    sys.stdout.write(dump_config(cfg))
    return 0


# ------------------------------------------------------------------- parser

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anpr",
        description="number plate reading toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-dataset", help="render a character training set")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--per-class", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--font-dir", help="directory of glyph images (A.png ...)")
    p.set_defaults(func=_cmd_gen_dataset)

    p = subs.add_parser("train", help="train the character classifier")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="model output file")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = subs.add_parser("ocr", help="read one plate crop")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_ocr)

    p = subs.add_parser("detect", help="find and read plates in one frame")
    p.add_argument("--model", required=True)
    p.add_argument("--cfg", required=True, help="detector network cfg")
    p.add_argument("--weights", required=True, help="detector weights file")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="directory for crops + csv")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_detect)

    p = subs.add_parser("batch", help="process a directory of frames")
    p.add_argument("frames", help="directory of frame images")
    p.add_argument("--model", required=True)
    p.add_argument("--cfg", help="detector network cfg (else bypass mode)")
    p.add_argument("--weights", help="detector weights file")
    p.add_argument("--out", required=True, help="directory for crops + csv")
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_batch)

    p = subs.add_parser("eval", help="score predictions against truth")
    p.add_argument("--pred", required=True,
                   help="CSV with source,text columns (results.csv works)")
    p.add_argument("--truth", required=True,
                   help="CSV with source,text columns")
    p.add_argument("--csv", action="store_true",
                   help="emit the report as CSV instead of a table")
    p.set_defaults(func=_cmd_eval)

    p = subs.add_parser("config", help="print tuning parameters")
    p.add_argument("--dump", action="store_true",
                   help="print the resolved configuration")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_config)

    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (AnprError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

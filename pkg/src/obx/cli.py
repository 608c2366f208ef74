"""Command-line entry point: ``obx <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .angle import ApeConfig
from .codec import CodecConfig, decode_rpn_arrays, encode_rpn_grids
from .evaluation import APMetric, Annotation, Detection, OverlapMode, evaluate, rotated_nms
from .geometry import DegenerateGeometryError, OrientedBox, Quad, box_to_quad, quad_to_box, rotated_iou
from .matching import OverlapKind, assign, liiou
from .svg import render_svg

EXIT_USAGE = 1
EXIT_DATA = 2
UNLABELLED = "object"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def worker_count() -> int:
    env = os.environ.get("OBX_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"OBX_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError("OBX_THREADS must be at least 1")
        return n
    return min(4, os.cpu_count() or 1)


def _pool_map(fn, items):
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("image size must be positive")
    return w, h


def _unit_interval(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"{v} is not in (0, 1)")
    return v


def _classes(args) -> io.ClassNames:
    return io.ClassNames(io.CLASS_SETS[args.classes])


def _existing_dir(path) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise FileNotFoundError(f"{p}: no such directory")
    return p


def _parse_box(text: str, as_quad: bool):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"not a box literal: {text!r}") from None
    if as_quad:
        if len(vals) != 8:
            raise UsageError(f"--quad literals need 8 numbers, got {len(vals)}: {text!r}")
        return quad_to_box(Quad.from_flat(vals))
    if len(vals) != 5:
        raise UsageError(f"box literal needs 'cx cy w h theta_deg', got {text!r}")
    return OrientedBox.from_degrees(*vals)


def cmd_iou(args) -> int:
    a = _parse_box(args.a, args.quad)
    b = _parse_box(args.b, args.quad)
    v = liiou(a, b) if args.kind == "liiou" else rotated_iou(a, b)
    print(f"{v:.12f}")
    return 0


def _boxes_and_labels(af: io.AnnotationFile, classes: io.ClassNames):
    return [(quad_to_box(a.quad), classes.name_of(a.class_id)) for a in af.annotations]


def cmd_encode_targets(args) -> int:
    classes = _classes(args)
    files = io.read_annotation_dir(_existing_dir(args.ann), classes)
    try:
        cfg = CodecConfig(r1=args.r1, r2=args.r2, k0=args.k0, n_norm=args.n)
        ape = ApeConfig(lambda_=args.lambda_)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    extra = {"r1": args.r1, "r2": args.r2, "k0": args.k0, "n": args.n, "lambda": args.lambda_}

    def one(af):
        grids = encode_rpn_grids(_boxes_and_labels(af, classes), args.size, cfg, ape)
        return io.write_grid_archive(grids, args.out, af.image_id, extra)

    written = _pool_map(one, files)
    print(f"wrote {len(written)} grid archives to {args.out}", file=sys.stderr)
    return 0


def _manifest_codec(manifest: dict) -> tuple[CodecConfig, ApeConfig]:
    c = manifest.get("config", {})
    cfg = CodecConfig(r1=c.get("r1", 0.1), r2=c.get("r2", 0.25), k0=c.get("k0", 4), n_norm=c.get("n", 6.0))
    return cfg, ApeConfig(lambda_=c.get("lambda", 0.5))


def cmd_decode(args) -> int:
    base = list(io.CLASS_SETS[args.classes])
    manifests = sorted(_existing_dir(args.grids).glob("*.json"))

    def one(path):
        manifest, tensors = io.read_grid_archive(path)
        cfg, ape = _manifest_codec(manifest)
        dec = decode_rpn_arrays(io.archive_outputs(manifest, tensors), args.score_th, cfg, ape)
        labels = manifest.get("labels", [])
        out = []
        for box, score, k, i, j in zip(dec.boxes, dec.scores, dec.levels, dec.rows, dec.cols):
            key = ("gt_index", int(k))
            g = int(tensors[key][0, i, j]) if key in tensors else -1
            label = labels[g] if 0 <= g < len(labels) else UNLABELLED
            out.append((manifest["image_id"], label, float(score), box_to_quad(OrientedBox.from_array(box))))
        return out

    rows = [r for part in _pool_map(one, manifests) for r in part]
    extra = sorted({r[1] for r in rows} - set(base))
    classes = io.ClassNames(base + extra)
    dets = [Detection(img, classes.id_of(lbl), min(max(s, 0.0), 1.0), q) for img, lbl, s, q in rows]
    Path(args.out).mkdir(parents=True, exist_ok=True)
    paths = io.write_detection_dir(dets, args.out, classes)
    print(f"decoded {len(dets)} boxes from {len(manifests)} archives into {len(paths)} files", file=sys.stderr)
    return 0


def cmd_nms(args) -> int:
    classes = _classes(args)
    dets = io.read_detection_dir(_existing_dir(args.inp), classes)
    kept = rotated_nms(dets, args.th, OverlapMode(args.overlap))
    Path(args.out).mkdir(parents=True, exist_ok=True)
    io.write_detection_dir(kept, args.out, classes)
    print(f"kept {len(kept)} of {len(dets)} detections", file=sys.stderr)
    return 0


def cmd_match_stats(args) -> int:
    classes = _classes(args)
    files = io.read_annotation_dir(_existing_dir(args.ann), classes)
    props = io.read_detection_file(args.proposals)
    by_image: dict = {}
    for p in props:
        by_image.setdefault(p.image_id, []).append(quad_to_box(p.quad))
    kind = OverlapKind(args.kind)
    print(f"# kind={kind.value} threshold={args.th:g}")
    print("image_id\tgt\tclass\tlength\twidth\tproposals\tpositives\tbest")
    total = covered = 0
    for af in files:
        gts = [quad_to_box(a.quad) for a in af.annotations]
        proposals = by_image.get(af.image_id, [])
        if not gts:
            continue
        res = assign(proposals, gts, kind, args.th)
        counts = np.bincount(res.assignments[res.positive], minlength=len(gts))
        best = res.overlaps.max(axis=0) if len(proposals) else np.zeros(len(gts))
        for g, (box, a) in enumerate(zip(gts, af.annotations)):
            n_near = int(np.count_nonzero(res.overlaps[:, g] > 0)) if len(proposals) else 0
            print(f"{af.image_id}\t{g}\t{classes.name_of(a.class_id)}\t{box.w:.1f}\t{box.h:.1f}"
                  f"\t{n_near}\t{int(counts[g])}\t{best[g]:.4f}")
            total += 1
            covered += int(counts[g] > 0)
    print(f"# covered {covered}/{total} ground truths")
    return 0


def cmd_eval(args) -> int:
    classes = _classes(args)
    anns = [a for af in io.read_annotation_dir(_existing_dir(args.ann), classes) for a in af.annotations]
    dets = io.read_detection_dir(_existing_dir(args.dets), classes)
    report = evaluate(dets, anns, args.iou, APMetric(args.metric), OverlapMode(args.overlap), classes.names)
    sys.stdout.write(report.format_table())
    if args.json:
        text = json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
        if args.json == "-":
            sys.stdout.write(text)
        else:
            io.atomic_write(args.json, text)
    if report.unknown_class_detections:
        print(f"warning: {report.unknown_class_detections} detections of classes absent from the "
              "ground truth were ignored", file=sys.stderr)
    return 0


def cmd_render_svg(args) -> int:
    classes = _classes(args)
    files = {af.image_id: af for af in io.read_annotation_dir(_existing_dir(args.ann), classes)}
    dets: dict = {}
    if args.dets:
        for d in io.read_detection_dir(_existing_dir(args.dets), classes):
            dets.setdefault(d.image_id, []).append(d)
    ids = sorted(set(files) | set(dets))

    def one(image_id):
        af = files.get(image_id)
        text = render_svg(image_id, af.annotations if af else [], dets.get(image_id, []),
                          classes.names, args.size)
        io.atomic_write(Path(args.out) / f"{image_id}.svg", text)

    _pool_map(one, ids)
    print(f"rendered {len(ids)} images to {args.out}", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    """Random annotation corpus plus noisy detections, for demos and tests."""
    rng = np.random.default_rng(args.seed)
    classes = _classes(args)
    width, height = args.size
    out = Path(args.out)
    all_dets = []
    for n in range(args.images):
        image_id = f"P{n:04d}"
        anns = []
        for _ in range(int(rng.integers(1, args.max_objects + 1))):
            h = float(np.round(rng.uniform(12, 90), 1))
            w = float(np.round(h * rng.uniform(1.0, 6.0), 1))
            r = 0.5 * math.hypot(w, h)
            cx = float(np.round(rng.uniform(r, max(r + 1, width - r)), 1))
            cy = float(np.round(rng.uniform(r, max(r + 1, height - r)), 1))
            theta = float(rng.integers(0, 180))
            box = OrientedBox.from_degrees(cx, cy, w, h, theta)
            quad = Quad.from_flat([round(c, 1) for c in box_to_quad(box).flat()])
            c = int(rng.integers(0, len(classes.names)))
            anns.append(Annotation(image_id, c, quad, bool(rng.random() < 0.1)))
            if rng.random() < 0.85:
                jitter = OrientedBox.from_degrees(cx + rng.normal(0, 2), cy + rng.normal(0, 2),
                                                  w * rng.uniform(0.9, 1.1), h * rng.uniform(0.9, 1.1),
                                                  theta + rng.normal(0, 3))
                all_dets.append(Detection(image_id, c, round(float(rng.uniform(0.3, 1.0)), 4), box_to_quad(jitter)))
        for _ in range(int(rng.integers(0, 3))):
            fp = OrientedBox.from_degrees(rng.uniform(50, width - 50), rng.uniform(50, height - 50),
                                          rng.uniform(20, 80), rng.uniform(10, 20), rng.uniform(0, 180))
            c = int(rng.integers(0, len(classes.names)))
            all_dets.append(Detection(image_id, c, round(float(rng.uniform(0.0, 0.6)), 4), box_to_quad(fp)))
        af = io.AnnotationFile(image_id, anns, {"imagesource": "synthetic", "gsd": "0.5"})
        io.write_annotation_file(out / "ann" / f"{image_id}.txt", af, classes)
    (out / "dets").mkdir(parents=True, exist_ok=True)
    io.write_detection_dir(all_dets, out / "dets", classes)
    print(f"wrote {args.images} images and {len(all_dets)} detections to {out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="obx", description="Oriented-box geometry, target codecs and evaluation.")
    p.add_argument("--classes", choices=sorted(io.CLASS_SETS), default="v1.0",
                   help="category list (default: v1.0)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("iou", help="overlap of two boxes given as 'cx cy w h theta_deg'")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--kind", choices=["iou", "liiou"], default="iou")
    s.add_argument("--quad", action="store_true", help="read A and B as 8-number quads")
    s.set_defaults(func=cmd_iou)

    s = sub.add_parser("encode-targets", help="write RPN label-grid archives for an annotation dir")
    s.add_argument("--ann", required=True)
    s.add_argument("--size", required=True, type=_size, help="image size WxH")
    s.add_argument("--out", required=True)
    s.add_argument("--r1", type=float, default=0.1)
    s.add_argument("--r2", type=float, default=0.25)
    s.add_argument("--k0", type=int, default=4)
    s.add_argument("--n", type=float, default=6.0)
    s.add_argument("--lambda", dest="lambda_", type=float, default=0.5)
    s.set_defaults(func=cmd_encode_targets)

    s = sub.add_parser("decode", help="decode grid archives into detection files")
    s.add_argument("--grids", required=True)
    s.add_argument("--score-th", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("nms", help="rotated NMS over a detection dir")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--th", type=_unit_interval, default=0.5)
    s.add_argument("--overlap", choices=[m.value for m in OverlapMode], default="rect")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_nms)

    s = sub.add_parser("match-stats", help="per-gt proposal coverage table")
    s.add_argument("--ann", required=True)
    s.add_argument("--proposals", required=True, help="detection-format file of proposals")
    s.add_argument("--kind", choices=[k.value for k in OverlapKind], default="liiou")
    s.add_argument("--th", type=_unit_interval, default=0.5)
    s.set_defaults(func=cmd_match_stats)

    s = sub.add_parser("eval", help="per-class AP and mAP")
    s.add_argument("--dets", required=True)
    s.add_argument("--ann", required=True)
    s.add_argument("--metric", choices=[m.value for m in APMetric], default="voc07")
    s.add_argument("--iou", type=_unit_interval, default=0.5)
    s.add_argument("--overlap", choices=[m.value for m in OverlapMode], default="rect")
    s.add_argument("--json", help="also write the report as JSON ('-' for stdout)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("render-svg", help="draw annotations and detections per image")
    s.add_argument("--ann", required=True)
    s.add_argument("--dets")
    s.add_argument("--out", required=True)
    s.add_argument("--size", type=_size, help="canvas WxH (default: fit the drawn quads)")
    s.set_defaults(func=cmd_render_svg)

    s = sub.add_parser("synth", help="generate a random annotation and detection corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--images", type=int, default=4)
    s.add_argument("--max-objects", type=int, default=8)
    s.add_argument("--size", type=_size, default=(1024, 1024))
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def _format_warning(message, category, filename, lineno, line=None):
    return f"warning: {message}\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.formatwarning = _format_warning
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"obx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.DataFormatError, DegenerateGeometryError, ValueError, OSError, KeyError) as exc:
        print(f"obx: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

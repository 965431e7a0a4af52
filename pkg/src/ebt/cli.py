"""Command-line surface: track, eval, proposals, synth, ablate."""
from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np
from PIL import Image, ImageDraw

from . import rerank as rr
from .edgebox import EdgeStructures, generate_pool
from .evalharness import (
    Sequence,
    evaluate,
    load_sequence,
    save_sequence,
    subsample,
    synth_sequence,
    write_report_csv,
    write_report_svg,
)
from .geometry import Box
from .imaging import edges_from_frame, load_frame
from .synth import SceneSpec
from .tracker import EdgeBoxTracker

SET_NAMES = {"E": "E", "R": "R", "ER": "E+R", "E+R": "E+R"}

# CLI/config keys accepted as tracker parameter overrides
_PARAM_TYPES = {
    "core": str,
    "H": int,
    "w_s": float,
    "test_set": str,
    "update_set": str,
    "rerank": str,
    "feature": int,
    "seed": int,
    "alpha": float,
    "beta": float,
    "e_threshold": float,
    "area_min_ratio": float,
    "area_max_ratio": float,
    "radius": float,
    "local_count": int,
    "exhaustive_stride": int,
    "max_side": int,
    "edge_threshold": float,
    "budget": int,
    "C": float,
}


def _parse_box(text: str) -> Box:
    vals = [float(v) for v in text.replace(",", " ").split()]
    return Box(*vals[:4])


def _coerce(key: str, value: str):
    if key not in _PARAM_TYPES:
        raise SystemExit(f"unknown config key: {key}")
    if key == "rerank":
        if value not in ("on", "off"):
            raise SystemExit("rerank must be 'on' or 'off'")
        return value == "on"
    if key in ("test_set", "update_set"):
        if value not in SET_NAMES:
            raise SystemExit(f"{key} must be one of {sorted(set(SET_NAMES))}")
        return SET_NAMES[value]
    return _PARAM_TYPES[key](value)


def _resolve_params(args) -> dict:
    params: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, _, value = line.partition("=")
                params[key.strip()] = _coerce(key.strip(), value.strip())
    for flag in ("core", "H", "seed", "feature", "stride"):
        pass  # dedicated flags handled below
    if getattr(args, "core", None):
        params["core"] = args.core
    if getattr(args, "H", None) is not None:
        params["H"] = args.H
    if getattr(args, "test_set", None):
        params["test_set"] = SET_NAMES[args.test_set]
    if getattr(args, "update_set", None):
        params["update_set"] = SET_NAMES[args.update_set]
    if getattr(args, "rerank", None):
        params["rerank"] = args.rerank == "on"
    if getattr(args, "feature", None) is not None:
        params["feature"] = args.feature
    if getattr(args, "seed", None) is not None:
        params["seed"] = args.seed
    for item in getattr(args, "set", None) or []:
        key, _, value = item.partition("=")
        params[key] = _coerce(key, value)
    return params


def _write_manifest(out_dir: str, params: dict, extra: dict | None = None) -> None:
    """Echo the fully resolved configuration so runs can be reproduced."""
    tracker = EdgeBoxTracker(**params)
    resolved = tracker.get_params()
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        for key in sorted(resolved):
            fh.write(f"{key}={resolved[key]}\n")
        for key, value in sorted((extra or {}).items()):
            fh.write(f"{key}={value}\n")


def _track_sequence(seq: Sequence, params: dict, out_dir: str) -> list[Box]:
    tracker = EdgeBoxTracker(**params)
    boxes: list[Box] = []
    log_path = os.path.join(out_dir, f"{seq.name}_log.csv")
    t_start = time.perf_counter()
    with open(log_path, "w") as log:
        log.write("frame,score,smoothness,pool_size,n_proposals,"
                  "edges_ms,pool_ms,rerank_ms,score_ms,update_ms\n")
        for i in range(len(seq)):
            frame = seq.frame(i)
            if i == 0:
                if seq.ground_truth[0] is None:
                    raise ValueError(f"{seq.name}: first frame has no ground truth")
                tracker.fit(frame, seq.ground_truth[0])
                boxes.append(tracker.estimate_)
            else:
                boxes.append(tracker.predict(frame))
            info = tracker.last_info_
            t = info.timings_ms
            log.write(
                f"{i + 1},{info.score:.6f},{info.smoothness:.6f},"
                f"{info.pool_size},{info.n_proposals},"
                f"{t.get('edges', 0):.2f},{t.get('pool', 0):.2f},{t.get('rerank', 0):.2f},"
                f"{t.get('score', 0):.2f},{t.get('update', 0):.2f}\n"
            )
    elapsed = time.perf_counter() - t_start
    with open(os.path.join(out_dir, f"{seq.name}_trajectory.txt"), "w") as fh:
        for b in boxes:
            fh.write(f"{b.x!r},{b.y!r},{b.w!r},{b.h!r}\n")
    with open(os.path.join(out_dir, f"{seq.name}_fps.txt"), "w") as fh:
        fh.write(f"{len(seq) / elapsed:.3f}\n")
    return boxes


def cmd_track(args) -> int:
    params = _resolve_params(args)
    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args.out, params, {"sequences": ";".join(args.seq)})
    status = 0
    for path in args.seq:
        try:
            seq = load_sequence(path)
            if args.stride and args.stride > 1:
                seq = subsample(seq, args.stride)
            _track_sequence(seq, params, args.out)
        except (OSError, ValueError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            status = 1
    return status


def _load_trajectory(path: str) -> list[Box]:
    boxes = []
    with open(path) as fh:
        for line in fh:
            vals = [float(v) for v in line.replace(",", " ").split()[:4]]
            boxes.append(Box(*vals))
    return boxes


def cmd_eval(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    reports = []
    status = 0
    for pred_path, seq_path in zip(args.pred, args.seq):
        try:
            seq = load_sequence(seq_path)
            if args.stride and args.stride > 1:
                seq = subsample(seq, args.stride)
            pred = _load_trajectory(pred_path)
            report = evaluate(pred, seq.ground_truth, name=seq.name)
            reports.append(report)
            write_report_csv(report, os.path.join(args.out, f"{seq.name}_report.csv"))
            if args.svg:
                write_report_svg(report, os.path.join(args.out, f"{seq.name}_report.svg"))
        except (OSError, ValueError) as exc:
            print(f"error: {seq_path}: {exc}", file=sys.stderr)
            status = 1
    if reports:
        mean_auc = float(np.mean([r.auc for r in reports]))
        mean_ps = float(np.mean([r.precision_score_20 for r in reports]))
        with open(os.path.join(args.out, "summary.csv"), "w") as fh:
            fh.write("name,auc,ps20,fps\n")
            for r in reports:
                fh.write(r.summary_line() + "\n")
            fh.write(f"mean,{mean_auc:.6f},{mean_ps:.6f},0.000\n")
        print(f"mean AUC {mean_auc:.4f}  mean PS20 {mean_ps:.4f}")
    return status


def cmd_proposals(args) -> int:
    try:
        frame = load_frame(args.frame)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    params = _resolve_params(args)
    tracker = EdgeBoxTracker(**params)
    prev = _parse_box(args.prev)
    edges = edges_from_frame(frame, tracker.edge_threshold)
    structures = EdgeStructures.from_edge_map(edges)
    pool = generate_pool(structures, prev, tracker._proposal_config())
    model = rr.RerankModel()
    top = rr.select_top(model, pool, args.topk or len(pool) or 1, structures)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "proposals.csv")
    with open(csv_path, "w") as fh:
        fh.write("frame,x,y,w,h,objectness,rerank_score\n")
        for p in top:
            b = p.box
            fh.write(
                f"{os.path.basename(args.frame)},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},"
                f"{p.objectness:.6f},{p.rerank_score:.6f}\n"
            )
    img = Image.fromarray(frame)
    draw = ImageDraw.Draw(img)
    for p in top[: args.topk]:
        b = p.box
        draw.rectangle([b.x, b.y, b.x2, b.y2], outline=(0, 255, 0))
    draw.rectangle([prev.x, prev.y, prev.x2, prev.y2], outline=(255, 0, 0))
    img.save(os.path.join(args.out, "overlay.png"))
    print(f"{len(top)} proposals -> {csv_path}")
    return 0


def _parse_spec_file(path: str) -> SceneSpec:
    kwargs = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key in ("motion",):
                kwargs[key] = value
            elif key in ("speed", "teleport_min", "teleport_max"):
                kwargs[key] = float(value)
            else:
                kwargs[key] = int(value)
    return SceneSpec(**kwargs)


def cmd_synth(args) -> int:
    try:
        spec = _parse_spec_file(args.spec) if args.spec else SceneSpec(
            frame_count=args.frames, motion=args.motion, seed=args.seed or 0
        )
        seq = synth_sequence(spec)
        save_sequence(seq, args.out)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(seq)} frames to {args.out}")
    return 0


def cmd_ablate(args) -> int:
    params = _resolve_params(args)
    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args.out, params, {"sequences": ";".join(args.seq)})
    sequences = [load_sequence(p) for p in args.seq]
    sets = ("R", "E", "E+R")
    table = np.zeros((3, 3))
    for ui, upd in enumerate(sets):
        for ti, tst in enumerate(sets):
            aucs = []
            for seq in sequences:
                run_params = dict(params, test_set=tst, update_set=upd)
                boxes = _track_sequence(
                    Sequence(seq.frames, seq.ground_truth, f"{seq.name}_u{upd}_t{tst}".replace("+", "")),
                    run_params,
                    args.out,
                )
                aucs.append(evaluate(boxes, seq.ground_truth).auc)
            table[ui, ti] = float(np.mean(aucs))
    path = os.path.join(args.out, "ablation.csv")
    with open(path, "w") as fh:
        fh.write("update\\test," + ",".join(sets) + "\n")
        for ui, upd in enumerate(sets):
            fh.write(upd + "," + ",".join(f"{v:.6f}" for v in table[ui]) + "\n")
    print(f"ablation grid -> {path}")
    return 0


def _add_common_tracker_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--core", choices=("ssvm", "ncc"), default=None)
    p.add_argument("--test-set", dest="test_set", choices=("E", "R", "ER"), default=None)
    p.add_argument("--update-set", dest="update_set", choices=("E", "R", "ER"), default=None)
    p.add_argument("--H", type=int, default=None)
    p.add_argument("--rerank", choices=("on", "off"), default=None)
    p.add_argument("--feature", type=int, choices=(2640, 480), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker over sequences")
    p.add_argument("--seq", action="append", required=True, help="sequence directory (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=1, help="temporal subsampling stride")
    _add_common_tracker_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score trajectories against ground truth")
    p.add_argument("--pred", action="append", required=True, help="trajectory file (repeatable)")
    p.add_argument("--seq", action="append", required=True, help="matching sequence directory")
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--svg", action="store_true", help="also render curves as SVG")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("proposals", help="dump the scored proposal pool for one frame")
    p.add_argument("--frame", required=True)
    p.add_argument("--prev", required=True, help="previous box as x,y,w,h")
    p.add_argument("--out", required=True)
    p.add_argument("--topk", type=int, default=20)
    _add_common_tracker_flags(p)
    p.set_defaults(func=cmd_proposals)

    p = sub.add_parser("synth", help="render a synthetic sequence to disk")
    p.add_argument("--spec", help="key=value scene spec file")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--motion", choices=("static", "smooth", "teleport"), default="smooth")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="run the 3x3 test/update combination grid")
    p.add_argument("--seq", action="append", required=True)
    p.add_argument("--out", required=True)
    _add_common_tracker_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line surface: rasterize, simulate, derive-cues, train, eval, selfcheck.

Exit codes: 0 success, 1 unreadable or unparseable input file, 2 documented
constraint violation (for example a depth delta outside [-1, 1]). Messages
go to standard error.

Cue spec JSON, mask paths relative to the spec file:

    {"width": W, "height": H, "sigma": optional,
     "instances": [{"mask_path": "m.pgm",
                    "arrow": {"start": [x, y], "end": [x, y], "dz": f},
                    "mass": f}, ...]}

Scene JSON is either {"preset": "head_on", "mass_ratio": f, "speed": f} or
{"width": W, "height": H, "dt": f, "balls": [{"center": [x, y],
"velocity": [vx, vy], "radius": r, "mass": m, "z": f, "vz": f}, ...]}.

A simulated clip directory holds manifest.json plus CUE1 tensors:
frames.cue1 and depth.cue1 as (H, W, F); flow.cue1 as (H, W, 2*(F-1)) with
channel t*2+c for (u, v); masks.cue1 as (H, W, F*K) with channel t*K+k.
Per-frame PGM previews are written alongside.
"""

import argparse
import json
import os
import sys

import numpy as np

from .cue_field import Arrow, CueField, InstanceSpec, compose_cue_field
from .cue_field import derive_delta_depth, derive_mean_flow, paint_training_cue
from .diffusion_loss import (
    JointDenoiser,
    make_training_set,
    trace_to_csv,
    train_toy,
)
from .errors import ConstraintViolation, MalformedFile, MotionCueError
from .formats import read_cue1, read_pgm, write_cue1, write_pgm, write_ppm
from .metrics import DEFAULT_THRESHOLD, score
from .sim_data import Ball, Scene, head_on_scene, render_clip
from . import selfcheck


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: invalid JSON ({exc})") from exc


def flow_wheel(field: CueField) -> np.ndarray:
    """Color-wheel rendering: hue = direction, brightness = alpha.

    The depth plane tints the image red for motion into the screen and blue
    for motion out of it.
    """
    u, v, dz = field.u, field.v, field.dz
    mag = np.clip(np.hypot(u, v), 0.0, 1.0)
    turns = (np.arctan2(v, u) % (2.0 * np.pi)) / (2.0 * np.pi)
    h6 = turns * 6.0
    sector = np.floor(h6).astype(int) % 6
    frac = h6 - np.floor(h6)
    zero = np.zeros_like(mag)
    q = mag * (1.0 - frac)
    t = mag * frac
    sel = [sector == s for s in range(6)]
    r = np.select(sel, [mag, q, zero, zero, t, mag])
    g = np.select(sel, [t, mag, mag, q, zero, zero])
    b = np.select(sel, [zero, zero, t, mag, mag, q])
    r = np.clip(r + 0.5 * np.maximum(dz, 0.0), 0.0, 1.0)
    b = np.clip(b + 0.5 * np.maximum(-dz, 0.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


# -- subcommands -------------------------------------------------------------


def cmd_rasterize(args) -> int:
    doc = _load_json(args.spec)
    try:
        width, height = int(doc["width"]), int(doc["height"])
        raw_instances = doc["instances"]
    except KeyError as exc:
        raise MalformedFile(f"{args.spec}: missing key {exc}") from exc
    sigma = args.sigma if args.sigma is not None else doc.get("sigma")
    base = os.path.dirname(os.path.abspath(args.spec))

    specs = []
    for i, inst in enumerate(raw_instances):
        try:
            arrow_doc = inst["arrow"]
            start = tuple(float(c) for c in arrow_doc["start"])
            end = tuple(float(c) for c in arrow_doc["end"])
            dz = float(arrow_doc.get("dz", 0.0))
            mass = float(inst["mass"])
            mask_path = os.path.join(base, inst["mask_path"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFile(f"{args.spec}: instance {i} malformed ({exc})") from exc
        if not -1.0 <= dz <= 1.0:
            raise ConstraintViolation(f"instance {i}: dz {dz} outside [-1, 1]")
        mask = read_pgm(mask_path) != 0
        if mask.shape != (height, width):
            raise ConstraintViolation(
                f"instance {i}: mask {mask.shape} does not match {height}x{width}"
            )
        specs.append(InstanceSpec(mask=mask, arrow=Arrow(start, end, dz), mass=mass))

    field = compose_cue_field(specs, sigma=sigma)
    write_cue1(args.out, field.as_hwc())
    if args.viz:
        write_ppm(args.viz, flow_wheel(field))
    return 0


def _scene_from_json(doc, path) -> Scene:
    if "preset" in doc:
        if doc["preset"] != "head_on":
            raise MalformedFile(f"{path}: unknown preset {doc['preset']!r}")
        return head_on_scene(
            mass_ratio=float(doc.get("mass_ratio", 1.0)),
            speed=float(doc.get("speed", 1.5)),
        )
    try:
        balls = tuple(
            Ball(
                center=tuple(float(c) for c in b["center"]),
                velocity=tuple(float(c) for c in b["velocity"]),
                radius=float(b["radius"]),
                mass=float(b["mass"]),
                z=float(b.get("z", 0.5)),
                vz=float(b.get("vz", 0.0)),
            )
            for b in doc["balls"]
        )
        return Scene(
            width=int(doc["width"]),
            height=int(doc["height"]),
            balls=balls,
            dt=float(doc.get("dt", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"{path}: bad scene ({exc})") from exc


def cmd_simulate(args) -> int:
    scene = _scene_from_json(_load_json(args.scene), args.scene)
    clip = render_clip(scene, frames=args.frames)
    os.makedirs(args.out_dir, exist_ok=True)

    f, h, w = clip.frames.shape
    k = clip.masks.shape[1]
    write_cue1(os.path.join(args.out_dir, "frames.cue1"), clip.frames.transpose(1, 2, 0))
    write_cue1(os.path.join(args.out_dir, "depth.cue1"), clip.depth.transpose(1, 2, 0))
    write_cue1(
        os.path.join(args.out_dir, "flow.cue1"),
        clip.flow.transpose(1, 2, 0, 3).reshape(h, w, 2 * (f - 1)),
    )
    write_cue1(
        os.path.join(args.out_dir, "masks.cue1"),
        clip.masks.astype(np.float32).transpose(2, 3, 0, 1).reshape(h, w, f * k),
    )
    for t in range(f):
        write_pgm(os.path.join(args.out_dir, f"frame_{t:03d}.pgm"), clip.frames[t])
    manifest = {
        "width": w,
        "height": h,
        "frames": f,
        "fps": clip.fps,
        "num_balls": k,
        "masses": [b.mass for b in clip.states[0]],
        "radii": [b.radius for b in clip.states[0]],
        "layout": {
            "frames": "(H, W, F)",
            "depth": "(H, W, F)",
            "flow": "(H, W, 2*(F-1)), channel t*2+c for (u, v)",
            "masks": "(H, W, F*K), channel t*K+k",
        },
    }
    with open(os.path.join(args.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return 0


def cmd_derive_cues(args) -> int:
    manifest = _load_json(os.path.join(args.clip_dir, "manifest.json"))
    try:
        k = int(manifest["num_balls"])
        masses = [float(m) for m in manifest["masses"]]
        h, w = int(manifest["height"]), int(manifest["width"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"{args.clip_dir}: bad manifest ({exc})") from exc

    flow = read_cue1(os.path.join(args.clip_dir, "flow.cue1")).astype(np.float64)
    masks = read_cue1(os.path.join(args.clip_dir, "masks.cue1")) > 0.5
    depth = read_cue1(os.path.join(args.clip_dir, "depth.cue1")).astype(np.float64)
    flow0 = flow[:, :, 0:2]

    planes = np.zeros((4, h, w))
    for ball in range(k):
        mask0 = masks[:, :, 0 * k + ball]
        if not mask0.any():
            continue
        mask1 = masks[:, :, 1 * k + ball]
        mean = derive_mean_flow(flow0, mask0)
        overlap = mask0 & mask1
        dz = (
            derive_delta_depth(depth[:, :, 0], depth[:, :, 1], overlap)
            if overlap.any()
            else 0.0
        )
        painted = paint_training_cue(mean, dz, masses[ball], mask0, args.max_speed)
        planes += painted.planes

    write_cue1(args.out, CueField(planes).as_hwc())
    return 0


def cmd_train(args) -> int:
    doc = _load_json(args.config) if args.config != "-" else {}

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return type(default)(doc.get(key, default))

    steps = pick(args.steps, "steps", 200)
    count = pick(None, "count", 16)
    lr = pick(args.lr, "lr", 0.05)
    lambda_aux = pick(args.lambda_aux, "lambda_aux", 1.0)
    seed = pick(args.seed, "seed", 0)
    budget = pick(args.budget, "budget", 64)
    heads = pick(None, "heads", 2)

    data = make_training_set(count, seed=seed, budget=budget, mode=args.mode)
    model = JointDenoiser(d=16, heads=heads, seed=seed)
    result = train_toy(
        model, data, steps=steps, seed=seed, lr=lr, lambda_aux=lambda_aux
    )
    with open(args.trace_out, "w", encoding="utf-8") as fh:
        fh.write(trace_to_csv(result.trace))
    first, last = result.trace[0], result.trace[-1]
    print(
        f"steps={steps} initial_total={first[3]:.6f} final_total={last[3]:.6f} "
        f"ratio={last[3] / first[3]:.4f}"
    )
    return 0


def cmd_eval(args) -> int:
    gen = read_cue1(os.path.join(args.gen_dir, "frames.cue1"))
    ref = read_cue1(os.path.join(args.ref_dir, "frames.cue1"))
    result = score(
        gen.transpose(2, 0, 1).astype(np.float64),
        ref.transpose(2, 0, 1).astype(np.float64),
        threshold=args.threshold,
    )
    with open(args.json_out, "w", encoding="utf-8") as fh:
        json.dump(result, fh)
    print(f"aggregate={result['aggregate']:.4f}")
    return 0


def cmd_selfcheck(args) -> int:
    return selfcheck.run()


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motioncue",
        description="Author motion cues, simulate clips, train and score the toy model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rasterize", help="cue spec JSON to a CUE1 field")
    p.add_argument("spec", help="cue spec JSON path")
    p.add_argument("out", help="output CUE1 path")
    p.add_argument("--viz", help="optional PPM color-wheel rendering")
    p.add_argument("--sigma", type=float, default=None,
                   help="Gaussian falloff; default min(H, W)/20")
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("simulate", help="scene JSON to a clip directory")
    p.add_argument("scene", help="scene JSON path")
    p.add_argument("out_dir", help="output directory")
    p.add_argument("--frames", type=int, default=49)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("derive-cues", help="paint training cues from a clip directory")
    p.add_argument("clip_dir", help="directory written by simulate")
    p.add_argument("out", help="output CUE1 path")
    p.add_argument("--max-speed", type=float, default=1.0,
                   help="declared speed bound used to normalize directions")
    p.set_defaults(func=cmd_derive_cues)

    p = sub.add_parser("train", help="run the toy joint-training loop")
    p.add_argument("config", help="config JSON path, or - for defaults")
    p.add_argument("trace_out", help="loss trace CSV path")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="default 0")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--lambda-aux", dest="lambda_aux", type=float, default=None,
                   help="aux loss weight, default 1.0")
    p.add_argument("--budget", type=int, default=None,
                   help="motion token budget, default 64")
    p.add_argument("--mode", choices=("tile", "replace"), default="tile",
                   help="budget fill rule when active sites <= budget")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="physics-iq-lite score of two clip directories")
    p.add_argument("gen_dir")
    p.add_argument("ref_dir")
    p.add_argument("json_out")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selfcheck", help="run the invariant battery")
    p.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except MalformedFile as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MotionCueError as exc:
        print(f"constraint violated: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

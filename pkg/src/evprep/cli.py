"""Command-line entry point: simulate / intensity / report / pretrain-toy / bench."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from evprep import _kernels, bench
from evprep.errors import EvprepError, FormatError
from evprep.events import SegmentConfig, SensorGeometry
from evprep.formats import (
    load_state,
    read_evt1,
    read_text_events,
    save_state,
    write_evt1,
    write_intf,
    read_intf,
    write_pgm,
)
from evprep.intensity import IntensityConfig, Method, run_sequence
from evprep.losses import trail_energy
from evprep.scenefile import load_scene
from evprep.simulate import simulate_events, trail_region
from evprep.toymodel import (
    ToyModelConfig,
    serialize_params,
    train_toy,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_segment_flags(p):
    p.add_argument("--segment-ms", type=float, default=50.0, help="segment duration T (ms)")
    p.add_argument("--bins", type=int, default=10, help="temporal bins B per segment")


def _seg_config(args) -> SegmentConfig:
    return SegmentConfig(int(round(args.segment_ms * 1000)), args.bins)


def _int_config(args, seg_config) -> IntensityConfig:
    return IntensityConfig(
        method=Method.PER_EVENT_DECAY if args.method == "decay" else Method.ADAPTIVE_BATCH,
        alpha_per_s=args.alpha,
        threshold=args.threshold,
        normalizer=args.normalizer,
        bin_duration_us=seg_config.bin_duration_us,
    )


def _print_config(payload: dict):
    print(json.dumps(payload, indent=2, default=str))


def cmd_simulate(args) -> int:
    scene, noise = load_scene(args.scene)
    if args.no_noise:
        noise = None
    events = simulate_events(scene, noise)
    write_evt1(args.output, events, scene.geometry)
    if args.print_config:
        _print_config(
            {
                "geometry": f"{scene.geometry.width}x{scene.geometry.height}",
                "threshold": scene.threshold,
                "duration_us": scene.duration_us,
                "sample_interval_us": scene.sample_interval_us,
                "discs": len(scene.objects),
                "noise": noise is not None,
            }
        )
    print(f"wrote {events.shape[0]} events to {args.output}")
    return EXIT_OK


def cmd_intensity(args) -> int:
    if args.geometry:
        w, h = args.geometry.lower().split("x")
        geometry = SensorGeometry(int(w), int(h))
        events = read_text_events(args.input)
    else:
        events, geometry = read_evt1(args.input)
    seg_config = _seg_config(args)
    int_config = _int_config(args, seg_config)
    resume = load_state(args.resume) if args.resume else None
    state, frames = run_sequence(
        events,
        geometry,
        seg_config,
        int_config,
        resume=resume,
        num_segments=args.segments,
    )
    write_intf(args.output, frames, geometry)
    if args.save_state:
        save_state(args.save_state, state)
    if args.pgm_dir:
        out_dir = Path(args.pgm_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(frames):
            write_pgm(out_dir / f"frame_{i:05d}.pgm", frame)
    if args.print_config:
        _print_config(
            {
                "geometry": f"{geometry.width}x{geometry.height}",
                "method": int_config.method.value,
                "segment_duration_us": seg_config.segment_duration_us,
                "bins_per_segment": seg_config.bins_per_segment,
                "alpha_per_s": int_config.alpha_per_s,
                "threshold": int_config.threshold,
                "normalizer": int_config.normalizer,
                "segments": len(frames),
            }
        )
    print(f"wrote {len(frames)} frames to {args.output}")
    return EXIT_OK


def cmd_report(args) -> int:
    frames, geometry = read_intf(args.frames)
    scene, _ = load_scene(args.scene)
    if scene.geometry != geometry:
        raise FormatError(
            f"frame geometry {geometry.width}x{geometry.height} does not match "
            f"scene {scene.geometry.width}x{scene.geometry.height}"
        )
    after_us = args.after_us if args.after_us is not None else scene.duration_us // 2
    region = trail_region(scene, after_us)
    energies = trail_energy(frames, region)
    for i, e in enumerate(energies, start=1):
        print(f"{i} {e:.9g}")
    if args.report:
        payload = {
            "trail_after_us": after_us,
            "trail_pixels": int(region.sum()),
            "energies": energies,
        }
        Path(args.report).write_text(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_pretrain_toy(args) -> int:
    scene, _ = load_scene(args.scene)
    seg_config = _seg_config(args)
    int_config = IntensityConfig(
        method=Method.ADAPTIVE_BATCH,
        alpha_per_s=args.alpha,
        threshold=args.threshold,
        normalizer=args.normalizer,
        bin_duration_us=seg_config.bin_duration_us,
    )
    num_segments = args.segments or max(
        1, scene.duration_us // seg_config.segment_duration_us
    )
    config = ToyModelConfig(
        patch_size=args.patch,
        embed_dim=args.embed,
        in_channels=2 * seg_config.bins_per_segment + 1,
        recurrent=not args.feedforward,
        seed=args.seed,
    )
    curve, state = train_toy(
        scene,
        args.steps,
        args.lr,
        config,
        seg_config,
        int_config,
        num_segments,
        mask_ratio=args.ratio,
    )
    with open(args.output, "w") as fh:
        for i, loss in enumerate(curve):
            fh.write(f"{i} {loss:.9g}\n")
    if args.params:
        Path(args.params).write_bytes(serialize_params(state))
    print(f"trained {args.steps} steps: loss {curve[0]:.6g} -> {curve[-1]:.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    events, geometry = read_evt1(args.input)
    seg_config = _seg_config(args)
    n = events.shape[0]
    print(f"events: {n}")
    print(f"active backend: {_kernels.BACKEND}")
    if n == 0:
        print("histogram_events_per_s: 0")
        print("adaptive_events_per_s: 0")
        return EXIT_OK
    rates = bench.bench_histogram(events, geometry, seg_config)
    for backend, rate in rates.items():
        print(f"segmentation+histogram [{backend}]: {rate / 1e6:.2f} M events/s")
        print(f"histogram_events_per_s[{backend}]: {rate:.0f}")
    adaptive = bench.bench_adaptive(events, geometry, seg_config)
    print(f"adaptive intensity: {adaptive / 1e6:.2f} M events/s")
    print(f"adaptive_events_per_s: {adaptive:.0f}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="evprep", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a scene file to an EVT1 event stream")
    p.add_argument("scene")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--no-noise", action="store_true", help="drop the scene's noise section")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("intensity", help="estimate the pseudo-grayscale video")
    p.add_argument("input", help="EVT1 file (or text events with --geometry)")
    p.add_argument("-o", "--output", required=True, help="INTF output path")
    p.add_argument("--method", choices=("decay", "adaptive"), default="adaptive")
    p.add_argument("--geometry", help="WxH, switches input to text event format")
    _add_segment_flags(p)
    p.add_argument("--alpha", type=float, default=5.0)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--normalizer", type=int, default=5000)
    p.add_argument("--segments", type=int, help="number of segments (default: cover stream)")
    p.add_argument("--resume", help="state file from a previous --save-state run")
    p.add_argument("--save-state", help="write resumable state here")
    p.add_argument("--pgm-dir", help="also write 8-bit PGM previews")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_intensity)

    p = sub.add_parser("report", help="trail-energy table for an INTF frame stack")
    p.add_argument("frames", help="INTF file")
    p.add_argument("scene", help="scene file that produced the events")
    p.add_argument("--after-us", type=int, help="passage time (default: half duration)")
    p.add_argument("--report", help="also write a JSON report here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pretrain-toy", help="train the toy masked autoencoder")
    p.add_argument("scene")
    p.add_argument("-o", "--output", required=True, help="loss curve file")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--patch", type=int, default=8)
    p.add_argument("--embed", type=int, default=16)
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feedforward", action="store_true", help="disable recurrence")
    _add_segment_flags(p)
    p.add_argument("--alpha", type=float, default=5.0)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--normalizer", type=int, default=5000)
    p.add_argument("--segments", type=int)
    p.add_argument("--params", help="write trained parameter blob here")
    p.set_defaults(func=cmd_pretrain_toy)

    p = sub.add_parser("bench", help="kernel throughput report")
    p.add_argument("input", help="EVT1 file")
    _add_segment_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EvprepError, OSError, ValueError) as exc:
        print(f"evprep: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

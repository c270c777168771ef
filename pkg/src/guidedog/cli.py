"""Command-line entry point: ``guidedog run|replay|bench|render-preview|validate-scenario``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .controller import load_config
from .errors import GuideDogError, ParseError
from .lightsense import LightClass
from .maskmodel import write_mask_image
from .pipeline import bench, dump_record, replay, simulate
from .simworld import bundled_scenarios, load_scenario

log = logging.getLogger("guidedog")

EXIT_OK = 0
EXIT_FAILED_RUN = 1
EXIT_BAD_INPUT = 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="controller config file (default: $GUIDEDOG_CONFIG, then built-in defaults)")
    p.add_argument("--seed", type=int, help="RNG seed (default: the scenario's own seed)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging; repeat for debug")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="guidedog", description="Sidewalk guidance for a drone guide dog.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="closed-loop run of a scenario")
    p.add_argument("scenario", help=f"scenario file or bundled name ({', '.join(bundled_scenarios())})")
    p.add_argument("--noise", type=float, default=0.0, help="light classifier label-noise probability")
    p.add_argument("--max-steps", type=int, help="override the scenario's step cap")
    p.add_argument("--sweep", type=int, metavar="N", help="run N consecutive seeds in parallel")
    p.add_argument("--jobs", type=int, help="worker processes for --sweep")

    p = sub.add_parser("replay", parents=[common], help="run the pipeline over recorded colorized masks")
    p.add_argument("frames", type=Path, help="directory of PNG masks, processed in file-name order")
    p.add_argument("--labels", type=Path, help="sidecar label file, one '<label> [altitude]' line per frame")
    p.add_argument("--tolerance", type=int, default=0, help="per-channel color tolerance when decoding")

    p = sub.add_parser("bench", parents=[common], help="time the per-frame pipeline")
    p.add_argument("frames", type=Path)
    p.add_argument("--iterations", type=int, default=800)
    p.add_argument("--warmup", type=int, default=200)

    p = sub.add_parser("render-preview", parents=[common], help="dump rendered masks of a closed-loop run")
    p.add_argument("scenario")
    p.add_argument("--steps", type=int, default=50, help="number of frames to render")
    p.add_argument("--every", type=int, default=1, help="keep every k-th frame")
    p.add_argument("--noise", type=float, default=0.0)

    p = sub.add_parser("validate-scenario", parents=[common], help="parse scenario files and report errors")
    p.add_argument("scenarios", nargs="+")
    return parser


def _run_one(args: tuple) -> dict:
    scenario_path, config_path, seed, noise, max_steps, out = args
    record = simulate(load_scenario(scenario_path), load_config(config_path), seed=seed, noise=noise, max_steps=max_steps)
    if out is not None:
        record.write(out)
    return record.summary()


def _print_summary(s: dict) -> None:
    m = s["metrics"]
    print(
        f"{s['scenario']} seed={s['seed']} success={s['success']} goal={m['goal_reached']} "
        f"steps={m['steps']} violations={m['red_light_violations']} obstacle_hits={m['obstacle_hits']} "
        f"rms={m['rms_deviation']:.3f}m walkable={m['walkable_fraction']:.3f}"
    )


def cmd_run(a) -> int:
    # parse everything up front so a bad file leaves no partial output behind
    scenario = load_scenario(a.scenario)
    load_config(a.config)
    base = scenario.seed if a.seed is None else a.seed
    if a.sweep is None:
        s = _run_one((a.scenario, a.config, base, a.noise, a.max_steps, a.out))
        _print_summary(s)
        return EXIT_OK if s["success"] else EXIT_FAILED_RUN
    if a.sweep < 1:
        raise GuideDogError("--sweep needs at least one seed")
    jobs = [
        (a.scenario, a.config, base + i, a.noise, a.max_steps, a.out / f"seed_{base + i:04d}" if a.out else None)
        for i in range(a.sweep)
    ]
    with ProcessPoolExecutor(max_workers=a.jobs) as ex:
        summaries = list(ex.map(_run_one, jobs))
    for s in summaries:
        _print_summary(s)
    ok = sum(s["success"] for s in summaries)
    print(f"{ok}/{len(summaries)} seeds succeeded")
    if a.out:
        a.out.mkdir(parents=True, exist_ok=True)
        (a.out / "sweep.json").write_text(json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if ok == len(summaries) else EXIT_FAILED_RUN


def cmd_replay(a) -> int:
    result = replay(a.frames, a.labels, load_config(a.config), tolerance=a.tolerance)
    for line in result.command_lines():
        print(line)
    for e in result.events:
        print(f"# voice frame={e.frame_index} {e.text}")
    if a.out:
        a.out.mkdir(parents=True, exist_ok=True)
        (a.out / "replay.jsonl").write_text("".join(dump_record(e) + "\n" for e in result.entries))
    return EXIT_OK


def cmd_bench(a) -> int:
    report = bench(a.frames, a.iterations, a.warmup, load_config(a.config))
    print(
        f"{report.iterations} frames at {report.width}x{report.height} after {report.warmup} warm-up: "
        f"median {report.median_ms:.3f} ms, p95 {report.p95_ms:.3f} ms, max {report.max_ms:.3f} ms"
    )
    if a.out:
        a.out.mkdir(parents=True, exist_ok=True)
        (a.out / "bench.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_render_preview(a) -> int:
    scenario = load_scenario(a.scenario)
    config = load_config(a.config)
    if a.steps < 1 or a.every < 1:
        raise GuideDogError("--steps and --every must be positive")
    out = a.out or Path("preview")
    labels: list[str] = []
    frames = []

    def sink(k, frame, prediction: LightClass | None, h):
        if k % a.every == 0:
            frames.append(frame.colorize())
            labels.append(f"{prediction.value if prediction else 'none'} {h:.6f}")

    simulate(scenario, config, seed=a.seed, noise=a.noise, max_steps=a.steps, frame_sink=sink)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(frames):
        write_mask_image(out / f"frame_{i:05d}.png", img)
    (out / "labels.txt").write_text("".join(line + "\n" for line in labels))
    print(f"wrote {len(frames)} frames and labels.txt to {out}")
    return EXIT_OK


def cmd_validate(a) -> int:
    status = EXIT_OK
    for path in a.scenarios:
        try:
            sc = load_scenario(path)
        except ParseError as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = EXIT_BAD_INPUT
        except OSError as exc:
            print(f"error: {path}: {exc.strerror}", file=sys.stderr)
            status = EXIT_BAD_INPUT
        else:
            print(f"{path}: ok ({len(sc.surfaces)} surfaces, {len(sc.obstacles)} obstacles, {len(sc.lights)} lights)")
    return status


COMMANDS = {
    "run": cmd_run,
    "replay": cmd_replay,
    "bench": cmd_bench,
    "render-preview": cmd_render_preview,
    "validate-scenario": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (GuideDogError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())

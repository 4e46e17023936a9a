"""Command-line front end: detect, eval, report, serve, synth."""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

from . import detector as det
from . import evaluation as ev
from . import report as rep
from . import service as svc
from . import synthetic as syn
from .features import SamplingConfig, open_stream, resample_and_batch, schema_from_names, write_session
from .sdem import EngineConfig


def _add_detector_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--components", type=int, default=2, help="mixture components")
    parser.add_argument("--forgetting", type=float, default=0.1, help="forgetting rate in (0,1)")
    parser.add_argument("--sample-period", type=float, default=0.5, help="seconds between samples")
    parser.add_argument("--batch-seconds", type=float, default=30.0, help="batch window length")
    parser.add_argument("--warmup-seconds", type=float, default=180.0, help="cue-free warm-up period")
    parser.add_argument(
        "--threshold", default="auto", help="auto | fixed:<value> | topk:<k>"
    )
    parser.add_argument("--outliers", type=int, default=2, help="outlier frames per cue")
    parser.add_argument("--seed", type=int, default=0, help="initialization seed")
    parser.add_argument(
        "--channels", default="posture,gaze", help="comma-separated channel names"
    )
    parser.add_argument(
        "--covariance", choices=["full", "diagonal"], default="full", help="covariance structure"
    )
    parser.add_argument("--ridge", type=float, default=1e-6, help="covariance regularizer")


def _detector_config(args: argparse.Namespace) -> det.DetectorConfig:
    return det.DetectorConfig(
        engine=EngineConfig(
            components=args.components,
            forgetting_rate=args.forgetting,
            covariance_mode=args.covariance,
            ridge=args.ridge,
            seed=args.seed,
        ),
        sampling=SamplingConfig(
            sample_period=args.sample_period,
            batch_duration=args.batch_seconds,
            warmup=args.warmup_seconds,
        ),
        threshold=det.ThresholdMode.parse(args.threshold),
        outlier_count=args.outliers,
    )


def _schema(args: argparse.Namespace):
    return schema_from_names([c.strip() for c in args.channels.split(",") if c.strip()])


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = _detector_config(args)
    schema = _schema(args)
    _, frames = open_stream(args.input, schema)
    batches = resample_and_batch(frames, cfg.sampling)
    cues, trace = det.run_detector(batches, cfg)
    if args.output:
        det.write_cues(args.output, cues)
    if args.trace:
        det.write_trace(args.trace, trace)
    print(f"scored {len(trace)} batches, emitted {len(cues)} cues")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    truth = ev.load_ground_truth(args.truth)
    cues = det.load_cues(args.detected)
    detected = det.ranked_cues(cues)
    matching = ev.MatchingConfig(tolerance=args.tolerance)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    out: dict[str, float] = {}
    try:
        for metric in metrics:
            if metric == "recall":
                out["recall"] = ev.recall(detected, truth, matching)
            elif metric == "kendall":
                out["kendall_min_distance"] = ev.kendall_min_distance(detected, truth, matching)
            else:
                print(f"unknown metric {metric!r}", file=sys.stderr)
                return 2
    except ev.UndefinedMetricError as exc:
        print(f"cannot compute {metric}: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(out, indent=2))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if len(args.session) != len(args.truth):
        print("--session and --truth must be given the same number of times", file=sys.stderr)
        return 2
    cfg = _detector_config(args)
    matching = ev.MatchingConfig(tolerance=args.tolerance)
    sessions = []
    for session_path, truth_path in zip(args.session, args.truth):
        schema, frames = open_stream(session_path)
        sessions.append(
            rep.SessionData(schema=schema, frames=list(frames), truth=ev.load_ground_truth(truth_path))
        )
    if args.subset:
        subsets = [[c.strip() for c in s.split(",") if c.strip()] for s in args.subset]
    else:
        # Default: every non-empty subset of the first session's channels.
        channels = sessions[0].schema.channels
        subsets = []
        for mask in range(1, 2 ** len(channels)):
            subsets.append([c for i, c in enumerate(channels) if mask >> i & 1])
    try:
        results = rep.modality_report(sessions, subsets, cfg, matching)
    except ev.UndefinedMetricError as exc:
        print(f"cannot build the report: {exc}", file=sys.stderr)
        return 2
    csv_text = rep.report_csv(results, matching)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    print(csv_text, end="")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    host, _, port_text = args.listen.rpartition(":")
    if not host:
        print("--listen must look like host:port", file=sys.stderr)
        return 2
    cfg = svc.ServeConfig(
        detector=_detector_config(args),
        schema=_schema(args),
        clock=svc.SessionClock.parse(args.clock),
        replay_path=args.replay,
        output_path=args.output,
        trace_path=args.trace,
    )
    service = svc.CueService(cfg)
    try:
        asyncio.run(service.serve_forever(host, int(port_text)))
    except KeyboardInterrupt:
        pass
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    schema = _schema(args)
    shifts = args.shift_at or [600.0]
    if args.stationary:
        scenario = syn.stationary_scenario(schema, duration=args.duration)
    elif len(shifts) == 1:
        scenario = syn.mean_shift_scenario(
            schema,
            duration=args.duration,
            shift_time=shifts[0],
            shift_sigmas=args.shift_sigmas,
        )
    else:
        scenario = syn.multi_shift_scenario(
            schema,
            duration=args.duration,
            shifts=[(t, args.shift_sigmas) for t in sorted(shifts)],
        )
    frames, truth = syn.synthesize_session(scenario, seed=args.seed)
    write_session(args.output, schema, frames)
    if args.truth:
        ev.save_ground_truth(args.truth, truth)
    print(f"wrote {len(frames)} frames to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cuestream")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="run detection over a recorded session file")
    p.add_argument("--input", required=True, help="session .jsonl file")
    p.add_argument("--output", help="write detected cues (JSON array)")
    p.add_argument("--trace", help="write the outlierness trace (CSV)")
    _add_detector_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detected cues against ground truth")
    p.add_argument("--detected", required=True, help="cues.json from detect")
    p.add_argument("--truth", required=True, help="ground-truth JSON file")
    p.add_argument("--tolerance", type=float, default=30.0)
    p.add_argument("--metrics", default="recall,kendall")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="per-modality metric table (CSV)")
    p.add_argument("--session", action="append", required=True, help="session file (repeatable)")
    p.add_argument("--truth", action="append", required=True, help="matching truth file (repeatable)")
    p.add_argument("--subset", action="append", help="channel subset, e.g. posture,gaze (repeatable)")
    p.add_argument("--tolerance", type=float, default=30.0)
    p.add_argument("--output", help="also write the CSV here")
    _add_detector_flags(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the live/replay session server")
    p.add_argument("--listen", default="127.0.0.1:8765", help="host:port")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--replay", help="session file to replay")
    mode.add_argument("--live", action="store_true", help="accept live frame ingest")
    p.add_argument("--clock", default="realtime", help="realtime | x<factor> | fast")
    p.add_argument("--output", help="(replay) write cues.json when the replay ends")
    p.add_argument("--trace", help="(replay) write trace.csv when the replay ends")
    _add_detector_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="generate a synthetic session file")
    p.add_argument("--output", required=True, help="session .jsonl to write")
    p.add_argument("--truth", help="ground-truth JSON to write")
    p.add_argument("--duration", type=float, default=1200.0)
    p.add_argument(
        "--shift-at", type=float, action="append",
        help="change-point time; repeat for several changes (default 600)",
    )
    p.add_argument("--shift-sigmas", type=float, default=3.0)
    p.add_argument("--stationary", action="store_true", help="no change point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", default="posture,gaze")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

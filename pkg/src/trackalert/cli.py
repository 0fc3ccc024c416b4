"""Command line entry point: ``trackalert {monitor,evaluate,simulate}``.

Exit codes: 0 = ran without alert, 2 = alert raised, 1 = error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from . import traces
from .betting import BettingConfig
from .eprocess import MonitorConfig, run_monitor
from .evaluation import OracleConfig, TrialConfig, aggregate, perturb, run_videos
from .simulator import StreamSpec, generate_response_maps, generate_values
from .stream import MetricSample
from .traces import TraceBundle

EXIT_OK, EXIT_ERROR, EXIT_ALERT = 0, 1, 2

# Tolerance per metric; "raw" has no default and needs --epsilon.
DEFAULT_EPSILON = {"ngiou": 0.55, "pc": 0.50, "cg": 0.95, "sg": 0.90}
DEFAULT_ALPHA = 0.1
DEFAULT_SMOOTHING = 0.25
DEFAULT_SIGMA = 10
# Recency and ground-truth windows: two seconds for the supervised metric,
# ten frames otherwise.
SUPERVISED_WINDOW_SECONDS = 2.0
UNSUPERVISED_WINDOW_FRAMES = 10


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as "alert".
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


def _window_arg(text: str) -> Optional[int]:
    if text.lower() in ("none", "inf", "0"):
        return None
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("window must be a positive frame count or 'none'")
    return value


def seconds_to_frames(seconds: float, frame_rate: Optional[float], what: str) -> int:
    if frame_rate is None:
        raise CliError(f"{what} given in seconds but no frame rate is known (use --frame-rate or a bundle)")
    return max(1, int(round(seconds * frame_rate)))


def _add_test_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", choices=["ngiou", "pc", "cg", "sg", "raw"],
                   help="quality metric (default: the source's natural metric)")
    p.add_argument("--epsilon", type=float, help="tolerance level (default per metric)")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="significance level")
    p.add_argument("--betting", choices=["agrapa", "sfogd"], default="agrapa")
    p.add_argument("--gamma", type=float, default=0.1, help="SF-OGD learning rate")
    win = p.add_mutually_exclusive_group()
    win.add_argument("--window", type=_window_arg, default=argparse.SUPPRESS,
                     help="betting recency window in frames, or 'none' for full history")
    win.add_argument("--window-seconds", type=float, help="betting recency window in seconds")
    p.add_argument("--sigma", type=int, default=DEFAULT_SIGMA, help="CG/SG normalization window (frames)")
    p.add_argument("--smoothing", type=float, default=DEFAULT_SMOOTHING, help="EMA factor (1 disables smoothing)")
    p.add_argument("--normalize-maps", action="store_true", help="min-max normalize each response map")
    p.add_argument("--frame-rate", type=float, help="frames per second (overrides bundle metadata)")
    p.add_argument("--seed", type=int, default=0, help="noise seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trackalert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    mon = sub.add_parser("monitor", help="run the sequential test over one trace")
    src = mon.add_mutually_exclusive_group(required=True)
    src.add_argument("--bundle", type=Path, help="bundle sidecar JSON")
    src.add_argument("--values", type=Path, help="metric CSV (frame,value)")
    src.add_argument("--maps", type=Path, help="response-map JSONL")
    src.add_argument("--pred", type=Path, help="predicted box CSV (needs --gt)")
    mon.add_argument("--gt", type=Path, help="ground-truth box CSV")
    _add_test_options(mon)
    mon.add_argument("--noise-sigma", type=float, default=0.0,
                     help="Gaussian noise added to metric values before testing (uses --seed)")
    mon.add_argument("--events", help="write the JSONL event log here ('-' for stdout)")
    mon.add_argument("--continue", dest="keep_going", action="store_true",
                     help="keep processing after an alert (post-alert values carry no guarantee)")

    ev = sub.add_parser("evaluate", help="FPR/ADD over a directory of trace bundles")
    ev.add_argument("directory", type=Path)
    _add_test_options(ev)
    gt = ev.add_mutually_exclusive_group()
    gt.add_argument("--w-gt", type=int, help="ground-truth window in frames")
    gt.add_argument("--w-gt-seconds", type=float, help="ground-truth window in seconds")
    ev.add_argument("--trials", type=int, default=50)
    ev.add_argument("--noise-sigma", type=float, default=0.01)
    ev.add_argument("--jobs", type=int, default=1)
    ev.add_argument("--out", type=Path, default=Path("."), help="output directory")

    sim = sub.add_parser("simulate", help="write synthetic trace bundles")
    sim.add_argument("directory", type=Path)
    sim.add_argument("--videos", type=int, default=1)
    sim.add_argument("--length", type=int, default=500)
    sim.add_argument("--null-mean", type=float, default=0.8)
    sim.add_argument("--spread", type=float, default=0.1)
    sim.add_argument("--failure-at", type=int)
    sim.add_argument("--post-mean", type=float, default=0.2)
    sim.add_argument("--ramp", type=int, default=0, help="transition length in frames")
    sim.add_argument("--source", choices=["raw_metric", "response_maps"], default="raw_metric")
    sim.add_argument("--rows", type=int, default=17)
    sim.add_argument("--cols", type=int, default=17)
    sim.add_argument("--frame-rate", type=float, default=30.0)
    sim.add_argument("--seed", type=int, default=0, help="video j uses seed + j")
    return parser


def _resolve_metric(source: str, metric: Optional[str]) -> str:
    metric = metric or traces.METRICS_BY_SOURCE[source][0]
    traces.check_metric(source, metric)
    return metric


def _resolve_epsilon(args, metric: str) -> float:
    if args.epsilon is not None:
        return args.epsilon
    if metric not in DEFAULT_EPSILON:
        raise CliError(f"--epsilon is required for metric {metric!r}")
    return DEFAULT_EPSILON[metric]


def _resolve_window(args, metric: str, frame_rate: Optional[float]) -> Optional[int]:
    if hasattr(args, "window"):
        return args.window
    if args.window_seconds is not None:
        return seconds_to_frames(args.window_seconds, frame_rate, "--window-seconds")
    if metric == "ngiou":
        return seconds_to_frames(SUPERVISED_WINDOW_SECONDS, frame_rate, "the default NGIoU window")
    return UNSUPERVISED_WINDOW_FRAMES


def _monitor_config(args, metric: str, window: Optional[int], halt: bool = True) -> MonitorConfig:
    eps = _resolve_epsilon(args, metric)
    try:
        betting = BettingConfig(args.betting, eps, learning_rate=args.gamma)
        return MonitorConfig(eps, args.alpha, betting, args.smoothing, window, halt)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _bundle_from_args(args) -> TraceBundle:
    if args.bundle is not None:
        return traces.load_bundle(args.bundle)
    if args.gt is not None and args.pred is None:
        raise CliError("--gt needs --pred")
    if args.pred is not None:
        if args.gt is None:
            raise CliError("--pred needs --gt")
        return TraceBundle(args.pred.stem, "box_pair", None, {"pred": args.pred, "gt": args.gt})
    if args.maps is not None:
        return TraceBundle(args.maps.stem, "response_maps", None, {"maps": args.maps})
    return TraceBundle(args.values.stem, "raw_metric", None, {"metric": args.values})


def cmd_monitor(args) -> int:
    bundle = _bundle_from_args(args)
    metric = _resolve_metric(bundle.source, args.metric)
    frame_rate = args.frame_rate or bundle.frame_rate
    window = _resolve_window(args, metric, frame_rate)
    cfg = _monitor_config(args, metric, window, halt=not args.keep_going)
    samples = traces.ingest(bundle, metric, args.sigma, args.normalize_maps)
    if args.noise_sigma > 0:
        noisy = perturb([s.value for s in samples], TrialConfig(1, args.noise_sigma, args.seed))[0]
        samples = [MetricSample(s.t, float(v)) for s, v in zip(samples, noisy)]
    result = run_monitor(samples, cfg)

    verdict_out = sys.stdout
    if args.events:
        header = {"video_id": bundle.video_id, "metric": metric, "seed": args.seed,
                  "noise_sigma": args.noise_sigma, "monitor": cfg.to_dict()}
        if args.events == "-":
            traces.write_events(sys.stdout, result.trajectory, header)
            verdict_out = sys.stderr
        else:
            with open(args.events, "w") as fh:
                traces.write_events(fh, result.trajectory, header)
    if result.alerted:
        print(f"alert at frame {result.stopping_time}", file=verdict_out)
        return EXIT_ALERT
    print(f"no alert (final x={result.final_x:.6g})", file=verdict_out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.directory.is_dir():
        raise CliError(f"{args.directory} is not a directory")
    paths = sorted(args.directory.glob("*.json"))
    if not paths:
        raise CliError(f"no bundle sidecars (*.json) in {args.directory}")
    bundles = [traces.load_bundle(p) for p in paths]
    sources = {b.source for b in bundles}
    if len(sources) > 1:
        raise CliError(f"bundles mix source kinds {sorted(sources)}; evaluate one kind at a time")
    source = sources.pop()
    metric = _resolve_metric(source, args.metric)
    try:
        trial_cfg = TrialConfig(args.trials, args.noise_sigma, args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from None

    # Windows may depend on each video's frame rate; group videos sharing both.
    groups: dict[tuple, list[int]] = {}
    videos = []
    for i, b in enumerate(bundles):
        rate = args.frame_rate or b.frame_rate
        window = _resolve_window(args, metric, rate)
        if args.w_gt is not None:
            w_gt = args.w_gt
        elif args.w_gt_seconds is not None:
            w_gt = seconds_to_frames(args.w_gt_seconds, rate, "--w-gt-seconds")
        elif metric == "ngiou":
            w_gt = seconds_to_frames(SUPERVISED_WINDOW_SECONDS, rate, "the default NGIoU ground-truth window")
        else:
            w_gt = UNSUPERVISED_WINDOW_FRAMES
        samples = traces.ingest(b, metric, args.sigma, args.normalize_maps)
        videos.append((b.video_id, [s.value for s in samples]))
        groups.setdefault((window, w_gt), []).append(i)

    results = [None] * len(videos)
    windows = {}
    for (window, w_gt), idx in groups.items():
        cfg = _monitor_config(args, metric, window)
        try:
            oracle = OracleConfig(cfg.epsilon, w_gt)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        out = run_videos([videos[i] for i in idx], cfg, oracle, trial_cfg, args.jobs)
        for i, res in zip(idx, out):
            results[i] = res
            windows[videos[i][0]] = {"recency_window": window, "w_gt": w_gt}
    report = aggregate(results)

    config = {
        "metric": metric,
        "source": source,
        "monitor": _monitor_config(args, metric, None).to_dict(),
        "windows": windows,
        "trials": {"n_trials": trial_cfg.n_trials, "noise_sigma": trial_cfg.noise_sigma,
                   "base_seed": trial_cfg.base_seed},
    }
    del config["monitor"]["recency_window"]
    args.out.mkdir(parents=True, exist_ok=True)
    traces.write_summary(args.out / "summary.json", report, config)
    traces.write_trials_csv(args.out / "trials.csv", report)

    s = report.summary()
    add = "n/a" if s["add_mean"] is None else f"{s['add_mean']:.2f} +/- {s['add_std']:.2f}"
    print(f"videos={s['n_videos']} trials={s['n_trials']} FPR={s['fpr']:.4f} "
          f"ADD={add} miss_rate={s['miss_rate']:.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    args.directory.mkdir(parents=True, exist_ok=True)
    for j in range(args.videos):
        try:
            spec = StreamSpec(args.length, args.null_mean, args.spread, args.failure_at,
                              args.post_mean, args.ramp, args.seed + j)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        vid = f"video{j:04d}"
        if args.source == "raw_metric":
            data = args.directory / f"{vid}.metric.csv"
            traces.write_metric_csv(data, generate_values(spec))
            files = {"metric": data}
        else:
            data = args.directory / f"{vid}.maps.jsonl"
            traces.write_response_maps(data, generate_response_maps(spec, args.rows, args.cols))
            files = {"maps": data}
        traces.write_bundle(TraceBundle(vid, args.source, args.frame_rate, files),
                            args.directory / f"{vid}.json")
    print(f"wrote {args.videos} bundle(s) to {args.directory}")
    return EXIT_OK


COMMANDS = {"monitor": cmd_monitor, "evaluate": cmd_evaluate, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except (CliError, ValueError, OSError) as exc:
        print(f"trackalert: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: calibrate, simulate, track, report, replay.

calibrate  fit the polynomial sensor model on an oracle pin grid and save it
simulate   generate a synthetic trial CSV from a config (trajectory + contour)
track      replay a trial CSV through an estimator; emit per-sample estimates
report     replay a trial CSV and emit a metrics report (JSON lines default)
replay     simulate + track + report in one deterministic pass; the same
           config and seed always produce a byte-identical report

All verbs accept --config; missing sections fall back to the same defaults
as `write_default_config`.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import beam, estimators, experiments, sensor_model
from .kinematics import ContactState


def _load_config(path: str | None) -> experiments.Config:
    if path is None:
        return experiments.Config(
            whisker=beam.STRAIGHT_WHISKER,
            filter=estimators.FilterConfig(),
            trial=experiments.TrialSettings(),
        )
    return experiments.load_config(path)


def _resolve_trajectory(cfg: experiments.Config, seed: int):
    """Trajectory and contour from the config, or the randomized pin trial."""
    if cfg.trajectory is not None and cfg.contour is not None:
        return cfg.trajectory, cfg.contour
    rng = np.random.default_rng(seed)
    if cfg.whisker.is_straight:
        traj, pin = experiments.pin_trajectory(rng, cfg.trial.duration, cfg.trial.rate)
    else:
        traj, pin = experiments.curved_pin_trajectory(
            cfg.whisker, rng, cfg.trial.duration, cfg.trial.rate
        )
    contour = cfg.contour if cfg.contour is not None else beam.PointPin(pin)
    trajectory = cfg.trajectory if cfg.trajectory is not None else traj
    return trajectory, contour


def _simulate_record(cfg: experiments.Config, seed: int) -> experiments.TrialRecord:
    trajectory, contour = _resolve_trajectory(cfg, seed)
    return experiments.generate_trial(
        cfg.whisker,
        trajectory,
        contour,
        gain=cfg.trial.gain,
        noise_std=cfg.trial.noise_std,
        seed=seed,
        n_segments=cfg.trial.n_segments,
    )


def _get_model(args, cfg: experiments.Config) -> sensor_model.PolynomialModel:
    if getattr(args, "model", None):
        return sensor_model.load_model(args.model)
    return experiments.calibration_model(
        cfg.whisker, gain=cfg.trial.gain, n_segments=cfg.trial.n_segments
    )


def _hint(record: experiments.TrialRecord, cfg: experiments.Config) -> ContactState:
    """Benchmark hint: first ground-truth contact offset 5 mm along +y when
    ground truth is available, else the signal-independent default."""
    idx = np.flatnonzero(record.contact & ~np.isnan(record.gt[:, 0]))
    if idx.size:
        first = record.gt[idx[0]]
        return ContactState(float(first[0]), float(first[1]) + 0.005)
    return experiments.default_hint(cfg.whisker)


def cmd_calibrate(args) -> int:
    cfg = _load_config(args.config)
    model = experiments.calibration_model(
        cfg.whisker, gain=cfg.trial.gain, n_segments=cfg.trial.n_segments
    )
    sensor_model.save_model(model, args.out)
    stats = model.fit_stats
    print(
        f"calibrated degree-{model.degree} model: r_squared="
        f"{stats['r_squared']:.6f} rmse={stats['rmse']:.3f} counts "
        f"({stats['n_samples']} samples) -> {args.out}"
    )
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    seed = cfg.trial.seed if args.seed is None else args.seed
    record = _simulate_record(cfg, seed)
    experiments.save_trial(record, args.out)
    print(
        f"simulated {len(record)} samples at {record.sample_rate:.0f} Hz, "
        f"{100.0 * record.contact.mean():.0f}% in contact -> {args.out}"
    )
    return 0


def cmd_track(args) -> int:
    cfg = _load_config(args.config)
    record = experiments.ingest_log(args.trial)
    model = _get_model(args, cfg)
    method = args.method or cfg.method
    seed = cfg.filter.rng_seed if args.seed is None else args.seed
    result = experiments.run_estimator(
        record, model, method, cfg.filter, cfg.whisker,
        hint=_hint(record, cfg), seed=seed,
    )
    experiments.emit_plotdata(record, result, args.out, downsample=args.downsample)
    metrics = experiments.trial_metrics(record, result, 0)
    if np.isnan(metrics.mean_error_mm):
        print(f"tracked {args.trial} with {method} (no ground truth) -> {args.out}")
    else:
        print(
            f"tracked {args.trial} with {method}: mean error "
            f"{metrics.mean_error_mm:.3f} mm -> {args.out}"
        )
    return 0


def cmd_report(args) -> int:
    cfg = _load_config(args.config)
    records = [experiments.ingest_log(p) for p in args.trials]
    model = _get_model(args, cfg)
    method = args.method or cfg.method
    seed = cfg.filter.rng_seed if args.seed is None else args.seed
    results = [
        experiments.run_estimator(
            rec, model, method, cfg.filter, cfg.whisker,
            hint=_hint(rec, cfg), seed=seed,
        )
        for rec in records
    ]
    report = experiments.build_report(records, results)
    experiments.emit_report(report, args.out, fmt=args.format)
    print(
        f"{len(records)} trial(s), {method}: pooled mean error "
        f"{report.aggregate.mean_error_mm:.3f} mm -> {args.out}"
    )
    return 0


def cmd_replay(args) -> int:
    cfg = _load_config(args.config)
    seed = cfg.trial.seed if args.seed is None else args.seed
    record = _simulate_record(cfg, seed)
    model = _get_model(args, cfg)
    method = args.method or cfg.method
    result = experiments.run_estimator(
        record, model, method, cfg.filter, cfg.whisker,
        hint=_hint(record, cfg), seed=cfg.filter.rng_seed,
    )
    report = experiments.build_report([record], [result])
    experiments.emit_report(report, args.out, fmt=args.format)
    print(
        f"replayed seed {seed} with {method}: pooled mean error "
        f"{report.aggregate.mean_error_mm:.3f} mm -> {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whiskertrack",
        description="Whisker-sensor contact point localization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model_flag=True):
        p.add_argument("--config", help="sectioned key-value config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if model_flag:
            p.add_argument("--model", help="saved sensor model file "
                           "(default: calibrate from the config whisker)")

    p = sub.add_parser("calibrate", help="fit and save the sensor model")
    common(p, model_flag=False)
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="generate a synthetic trial CSV")
    common(p, model_flag=False)
    p.add_argument("--out", required=True, help="output trial CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="replay a trial; emit estimate scatter CSV")
    common(p)
    p.add_argument("trial", help="input trial CSV")
    p.add_argument("--method", choices=experiments.METHODS,
                   help="estimator (default from config)")
    p.add_argument("--downsample", type=int, default=1,
                   help="keep every Nth in-contact sample")
    p.add_argument("--out", required=True, help="output estimates CSV")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("report", help="replay trials; emit a metrics report")
    common(p)
    p.add_argument("trials", nargs="+", help="input trial CSVs")
    p.add_argument("--method", choices=experiments.METHODS,
                   help="estimator (default from config)")
    p.add_argument("--format", choices=("jsonl", "csv", "table"),
                   default="jsonl", help="report format")
    p.add_argument("--out", required=True, help="output report file")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser(
        "replay", help="deterministic simulate + track + report from a config"
    )
    common(p)
    p.add_argument("--method", choices=experiments.METHODS,
                   help="estimator (default from config)")
    p.add_argument("--format", choices=("jsonl", "csv", "table"),
                   default="jsonl", help="report format")
    p.add_argument("--out", required=True, help="output report file")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

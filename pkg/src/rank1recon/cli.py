"""Command-line entry point: ``rank1recon {synth,corrupt,reconstruct,bench,sweep}``.

Signals travel between subcommands as CSV files with an ``index,value,observed``
header (``observed`` is 1/0), or as WAV files when the path ends in ``.wav``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .audio import AudioFormatError, load_wav, write_wav
from .baselines import gabor_dictionary, omp_reconstruct, qv_reconstruct, spline_reconstruct
from .corruption import CorruptionSpec
from .embedding import EmbeddingGeometry
from .exceptions import Rank1ReconError
from .experiment import (METHODS, SWEEP_FIELDS, ExperimentConfig, run_experiment, sweep,
                         write_dicts_csv, write_outputs, write_trajectory_csv)
from .model import ObservationMask, reconstruct, scale_hyperparameters
from .signals import SignalSpec, generate, mse, snr_db
from .solver import SolverConfig, monte_carlo_solve

logger = logging.getLogger("rank1recon")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class AllSegmentsFailed(Exception):
    pass


def read_signal(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if path.suffix.lower() == ".wav":
        signal, _ = load_wav(path)
        return signal, np.ones(signal.size, dtype=bool)
    values, observed = [], []
    try:
        with open(path, newline="") as fh:
            for record in csv.DictReader(fh):
                values.append(float(record["value"]))
                observed.append(record.get("observed", "1") not in ("0", "false", "False"))
    except (KeyError, ValueError) as exc:
        raise OSError(f"{path}: malformed signal CSV ({exc})") from exc
    if not values:
        raise OSError(f"{path}: no samples")
    return np.array(values), np.array(observed, dtype=bool)


def write_signal(path, values, observed=None, rate: int = 16000) -> None:
    path = Path(path)
    values = np.asarray(values, dtype=float)
    if path.suffix.lower() == ".wav":
        write_wav(path, values, rate)
        return
    if observed is None:
        observed = np.ones(values.size, dtype=bool)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "value", "observed"])
        for k, (v, o) in enumerate(zip(values, observed)):
            writer.writerow([k, repr(float(v)), int(bool(o))])


def _signal_spec(args, kind: str) -> SignalSpec:
    return SignalSpec(kind=kind, n=args.n, frequency=args.frequency, amplitude=args.amplitude,
                      phase=args.phase, chirp_rate=args.chirp_rate, width=args.width)


def _corruptions(args) -> tuple:
    specs = []
    for c in args.clip or ():
        specs.append(CorruptionSpec("clip", clip_level=c, rng_seed=args.seed))
    for r in args.missing or ():
        specs.append(CorruptionSpec("random_missing", missing_rate=r, rng_seed=args.seed))
    for s in args.noise or ():
        specs.append(CorruptionSpec("additive_noise", noise_std=s, rng_seed=args.seed))
    if not specs:
        raise ConfigError("give at least one of --clip, --missing, --noise")
    return tuple(specs)


def _add_signal_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=128, help="signal length in samples")
    p.add_argument("--frequency", type=float, default=1 / 32, help="cycles/sample")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--chirp-rate", type=float, default=0.0, help="chirp frequency slope per sample")
    p.add_argument("--width", type=float, default=16.0, help="wavelet envelope std in samples")


def _add_method_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=int, default=128)
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=20, help="Monte-Carlo restarts K")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-9, help="relative objective change to stop")
    p.add_argument("--qv-lambda", type=float, default=0.01)
    p.add_argument("--omp-epsilon", type=float, default=1e-3)


def _add_bench_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--wav", help="PCM WAV input")
    src.add_argument("--synthetic", nargs="+", choices=("sine", "wavelet", "chirp"),
                     help="synthetic signal kinds, one segment each")
    _add_signal_args(p)
    p.add_argument("--clip", type=float, nargs="+", help="clip levels")
    p.add_argument("--missing", type=float, nargs="+", help="random missing rates")
    p.add_argument("--noise", type=float, nargs="+", help="additive noise std values")
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--segment-length", type=int, default=128)
    p.add_argument("--segments", type=int, default=None, help="maximum number of segments")
    p.add_argument("--min-rms", type=float, default=0.05, help="segment selection threshold")
    p.add_argument("--no-normalize", action="store_true", help="skip per-segment peak normalization")
    p.add_argument("--timing", action="store_true", help="record runtimes (breaks byte-identical output)")
    p.add_argument("--workers", type=int, default=1)
    _add_method_args(p)
    p.add_argument("--out", required=True, help="output directory")


def _experiment_config(args, methods=None, tau=None) -> ExperimentConfig:
    if args.wav:
        source = args.wav
    else:
        source = tuple(_signal_spec(args, kind) for kind in args.synthetic)
    return ExperimentConfig(
        source=source, corruptions=_corruptions(args),
        methods=tuple(methods or args.methods), segment_length=args.segment_length,
        max_segments=args.segments, min_rms=args.min_rms, normalize_peak=not args.no_normalize,
        tau=args.tau if tau is None else tau, lambda1=args.lambda1, lambda2=args.lambda2,
        restarts_k=args.restarts, max_outer_iters=args.max_iters, outer_tol=args.tol,
        qv_lambda=args.qv_lambda, omp_epsilon=args.omp_epsilon, seed=args.seed,
        record_timing=args.timing, workers=args.workers)


def cmd_synth(args) -> int:
    write_signal(args.out, generate(_signal_spec(args, args.kind)), rate=args.rate)
    return EXIT_OK


def cmd_corrupt(args) -> int:
    y0, _ = read_signal(args.input)
    spec = _corruptions(args)
    if len(spec) != 1:
        raise ConfigError("corrupt takes exactly one of --clip, --missing, --noise")
    y, mask = spec[0].apply(y0)
    if Path(args.out).suffix.lower() == ".wav":
        raise ConfigError("corrupted output must be CSV to keep the observation mask")
    write_signal(args.out, y, mask.observed)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    y, observed = read_signal(args.input)
    mask = ObservationMask(observed)
    extra = {}
    if args.method == "proposed":
        geometry = EmbeddingGeometry(y.size, args.tau)
        hp = scale_hyperparameters(args.lambda1, args.lambda2, mask, geometry)
        config = SolverConfig(max_outer_iters=args.max_iters, outer_tol=args.tol,
                              restarts_k=args.restarts, rng_seed=args.seed)
        report = monte_carlo_solve(y, mask, hp, config, tau=args.tau)
        x_hat = reconstruct(report.final_model)
        extra = {"objective": report.objective, "restart_index": report.restart_index,
                 "converged": report.converged, "iterations": report.iterations_used}
        if args.trajectory:
            write_trajectory_csv(args.trajectory, report.restart_trajectories)
    elif args.method == "qv":
        x_hat = qv_reconstruct(y, mask, args.qv_lambda)
    elif args.method == "spline":
        x_hat = spline_reconstruct(y, mask)
    else:
        x_hat, code = omp_reconstruct(y, mask, gabor_dictionary(y.size), args.omp_epsilon)
        extra = {"atoms": len(code.support), "residual_norm_sq": code.residual_norm_sq}
    write_signal(args.out, x_hat)
    if args.reference:
        x0, _ = read_signal(args.reference)
        extra.update(snr_db=snr_db(x0, x_hat), mse=mse(x0, x_hat))
    if extra:
        print(json.dumps(extra, sort_keys=True))
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _experiment_config(args)
    result = run_experiment(config)
    write_outputs(result, config, args.out)
    if result.rows and all(r.error for r in result.rows if r.method == "proposed") \
            and any(r.method == "proposed" for r in result.rows):
        raise AllSegmentsFailed("proposed method failed on every segment")
    if not result.rows:
        raise AllSegmentsFailed("no segments were processed")
    return EXIT_OK


def cmd_sweep(args) -> int:
    # the grid supplies tau; validate the base config against its first value
    config = _experiment_config(args, methods=("proposed",), tau=args.tau_grid[0])
    records = sweep(config, args.tau_grid, args.lambda_grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dicts_csv(out / "sweep.csv", records, SWEEP_FIELDS)
    if all(np.isnan(r["snr_mean"]) for r in records):
        raise AllSegmentsFailed("every sweep cell failed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rank1recon", description="Rank-1 delay-embedding reconstruction of clipped or incomplete signals.")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic test signal")
    p.add_argument("kind", choices=("sine", "wavelet", "chirp"))
    _add_signal_args(p)
    p.add_argument("--rate", type=int, default=16000, help="sample rate for WAV output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("corrupt", help="clip, drop, or add noise to a signal")
    p.add_argument("input")
    p.add_argument("--clip", type=float, nargs=1)
    p.add_argument("--missing", type=float, nargs=1)
    p.add_argument("--noise", type=float, nargs=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("reconstruct", help="restore the unobserved samples of a signal CSV")
    p.add_argument("input")
    p.add_argument("--method", choices=METHODS, default="proposed")
    _add_method_args(p)
    p.add_argument("--reference", help="clean signal for SNR/MSE")
    p.add_argument("--trajectory", help="write per-restart objective trajectories here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("bench", help="benchmark methods over segments and corruptions")
    _add_bench_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="proposed-method SNR over a (tau, lambda1, lambda2) grid")
    _add_bench_args(p)
    p.add_argument("--tau-grid", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    p.add_argument("--lambda-grid", type=float, nargs="+", default=[0.001, 0.01, 0.1, 1, 10])
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AllSegmentsFailed as exc:
        logger.error("%s", exc)
        return EXIT_SOLVER
    except (ConfigError, ValueError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (OSError, AudioFormatError) as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    except Rank1ReconError as exc:
        logger.error("solver failure: %s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

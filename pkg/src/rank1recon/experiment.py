"""Benchmark orchestration: corrupt segments, reconstruct with each method,
score, and emit CSV/WAV artifacts."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .audio import extract_segments, load_wav, write_wav
from .baselines import gabor_dictionary, omp_reconstruct, qv_reconstruct, spline_reconstruct
from .corruption import CorruptionSpec
from .embedding import EmbeddingGeometry
from .exceptions import ParameterError, Rank1ReconError
from .model import reconstruct, scale_hyperparameters
from .signals import SignalSpec, generate, mse, snr_db
from .solver import SolverConfig, monte_carlo_solve

logger = logging.getLogger(__name__)

METHODS = ("proposed", "qv", "spline", "omp")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a benchmark run.

    ``source`` is a WAV path or one or more :class:`SignalSpec`; each
    synthetic signal is a single segment.
    """

    source: Union[str, Path, SignalSpec, Tuple[SignalSpec, ...]]
    corruptions: Tuple[CorruptionSpec, ...]
    methods: Tuple[str, ...] = METHODS
    segment_length: int = 128
    max_segments: Optional[int] = None
    min_rms: float = 0.05
    normalize_peak: bool = True
    tau: int = 128
    lambda1: float = 1.0
    lambda2: float = 1.0
    restarts_k: int = 20
    max_outer_iters: int = 1000
    outer_tol: float = 1e-9
    qv_lambda: float = 0.01
    omp_epsilon: float = 1e-3
    omp_rho: float = 2.0
    seed: int = 0
    record_timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.segment_length < 2:
            raise ParameterError("segment length must be at least 2")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ParameterError(f"unknown or empty methods: {sorted(unknown)}")
        if not self.corruptions:
            raise ParameterError("at least one corruption is required")
        if "proposed" in self.methods:
            if not 1 <= self.tau <= self.segment_length:
                raise ParameterError(f"tau={self.tau} must lie in [1, {self.segment_length}]")
            if self.restarts_k < 1 or self.max_outer_iters < 1:
                raise ParameterError("restarts and iterations must be >= 1")
            if self.lambda1 < 0 or self.lambda2 < 0:
                raise ParameterError("lambda1 and lambda2 must be nonnegative")

    def to_json(self) -> Dict:
        def convert(value):
            if isinstance(value, Path):
                return str(value)
            if dataclasses.is_dataclass(value):
                return {"type": type(value).__name__, **dataclasses.asdict(value)}
            if isinstance(value, tuple):
                return [convert(v) for v in value]
            return value
        return {f.name: convert(getattr(self, f.name)) for f in dataclasses.fields(self)}


@dataclass
class ResultRow:
    segment_id: int
    method: str
    corruption: str
    snr_db: float
    snr_missing_db: float
    mse: float
    runtime_ms: Optional[float] = None
    objective: Optional[float] = None
    restart_index: Optional[int] = None
    min_restart_objective: Optional[float] = None
    error: str = ""


RESULT_FIELDS = [f.name for f in dataclasses.fields(ResultRow)]


@dataclass
class Segment:
    segment_id: int
    start: int
    clean: np.ndarray
    scale: float = 1.0


@dataclass
class ExperimentResult:
    rows: List[ResultRow]
    # (segment_id, corruption) -> per-restart objective trajectories
    trajectories: Dict[Tuple[int, str], Tuple[np.ndarray, ...]] = field(default_factory=dict)
    # (segment_id, method, corruption) -> reconstruction in the source scale
    reconstructions: Dict[Tuple[int, str, str], np.ndarray] = field(default_factory=dict)
    segments: List[Segment] = field(default_factory=list)
    sample_rate: Optional[int] = None


def derive_seed(*keys: int) -> int:
    """Stable 32-bit seed from a tuple of nonnegative integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def load_segments(config: ExperimentConfig) -> Tuple[List[Segment], Optional[int]]:
    source = config.source
    if isinstance(source, SignalSpec):
        source = (source,)
    if isinstance(source, tuple):
        segments = [Segment(k, 0, generate(spec)) for k, spec in enumerate(source)]
        rate = None
    else:
        signal, rate = load_wav(source)
        found = extract_segments(signal, config.segment_length, config.min_rms,
                                 config.max_segments)
        segments = [Segment(k, start, seg) for k, (start, seg) in enumerate(found)]
    if config.normalize_peak:
        for seg in segments:
            peak = float(np.max(np.abs(seg.clean)))
            if peak > 0:
                seg.scale = peak
                seg.clean = seg.clean / peak
    return segments, rate


def _missing_snr(x0, x_hat, observed) -> float:
    missing = ~observed
    if not missing.any() or not np.any(x0[missing]):
        return math.nan
    return snr_db(x0[missing], x_hat[missing])


def _run_segment(config: ExperimentConfig, seg: Segment, corruption_index: int):
    spec = config.corruptions[corruption_index]
    label = spec.describe()
    offset = derive_seed(config.seed, seg.segment_id, corruption_index) % 2**31
    y, mask = spec.apply(seg.clean, seed_offset=offset)
    rows, recons, trajectories = [], {}, None
    dictionary = gabor_dictionary(seg.clean.size, config.omp_rho) if "omp" in config.methods else None
    for method in config.methods:
        start = time.perf_counter()
        row = ResultRow(seg.segment_id, method, label, math.nan, math.nan, math.nan)
        try:
            if method == "proposed":
                geometry = EmbeddingGeometry(seg.clean.size, config.tau)
                hp = scale_hyperparameters(config.lambda1, config.lambda2, mask, geometry)
                solver_config = SolverConfig(
                    max_outer_iters=config.max_outer_iters, outer_tol=config.outer_tol,
                    restarts_k=config.restarts_k,
                    rng_seed=derive_seed(config.seed, seg.segment_id, corruption_index, 1))
                report = monte_carlo_solve(y, mask, hp, solver_config, tau=config.tau)
                x_hat = reconstruct(report.final_model)
                row.objective = report.objective
                row.restart_index = report.restart_index
                row.min_restart_objective = min(
                    o for o, bad in zip(report.restart_objectives, report.restart_degenerate)
                    if not bad)
                trajectories = report.restart_trajectories
            elif method == "qv":
                x_hat = qv_reconstruct(y, mask, config.qv_lambda)
            elif method == "spline":
                x_hat = spline_reconstruct(y, mask)
            else:
                x_hat, _ = omp_reconstruct(y, mask, dictionary, config.omp_epsilon)
            row.snr_db = snr_db(seg.clean, x_hat)
            row.snr_missing_db = _missing_snr(seg.clean, x_hat, mask.observed)
            row.mse = mse(seg.clean, x_hat)
            recons[(seg.segment_id, method, label)] = x_hat * seg.scale
        except (Rank1ReconError, np.linalg.LinAlgError) as exc:
            logger.warning("segment %d, %s, %s failed: %s", seg.segment_id, method, label, exc)
            row.error = f"{type(exc).__name__}: {exc}"
        if config.record_timing:
            row.runtime_ms = 1e3 * (time.perf_counter() - start)
        rows.append(row)
    return rows, recons, ((seg.segment_id, label), trajectories) if trajectories else None


def _sort_key(row: ResultRow):
    return (row.segment_id, METHODS.index(row.method), row.corruption)


def run_experiment(config: ExperimentConfig, segments: Optional[List[Segment]] = None,
                   sample_rate: Optional[int] = None) -> ExperimentResult:
    """Corrupt, reconstruct, and score every (segment, corruption, method) triple.

    Failures are recorded in the row's ``error`` field and the run continues.
    Rows are sorted by segment id, then method, then corruption, regardless
    of ``workers``.
    """
    if segments is None:
        segments, sample_rate = load_segments(config)
    jobs = [(config, seg, k) for seg in segments for k in range(len(config.corruptions))]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outputs = list(pool.map(_run_segment_star, jobs))
    else:
        outputs = [_run_segment(*job) for job in jobs]
    result = ExperimentResult(rows=[], segments=segments, sample_rate=sample_rate)
    for rows, recons, traj in outputs:
        result.rows.extend(rows)
        result.reconstructions.update(recons)
        if traj is not None:
            result.trajectories[traj[0]] = traj[1]
    result.rows.sort(key=_sort_key)
    return result


def _run_segment_star(job):
    return _run_segment(*job)


def aggregate(rows: Sequence[ResultRow]) -> List[Dict]:
    """Mean and sample standard deviation of SNR and MSE per (method, corruption)."""
    groups: Dict[Tuple[str, str], List[ResultRow]] = {}
    for row in rows:
        if not row.error:
            groups.setdefault((row.method, row.corruption), []).append(row)
    out = []
    for (method, corruption), members in sorted(
            groups.items(), key=lambda kv: (kv[0][1], METHODS.index(kv[0][0]))):
        snr = np.array([r.snr_db for r in members])
        err = np.array([r.mse for r in members])
        out.append({
            "method": method,
            "corruption": corruption,
            "count": len(members),
            "snr_mean": float(np.mean(snr)),
            "snr_std": float(np.std(snr, ddof=1)) if len(members) > 1 else 0.0,
            "mse_mean": float(np.mean(err)),
            "mse_std": float(np.std(err, ddof=1)) if len(members) > 1 else 0.0,
        })
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(path, rows: Sequence[ResultRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_FIELDS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, name)) for name in RESULT_FIELDS])


def read_results_csv(path) -> List[ResultRow]:
    types = {f.name: f.type for f in dataclasses.fields(ResultRow)}
    rows = []
    with open(path, newline="") as fh:
        for record in csv.DictReader(fh):
            kwargs = {}
            for name, text in record.items():
                kind = types[name]
                if kind == "str":
                    kwargs[name] = text
                elif text == "":
                    kwargs[name] = None
                elif kind in ("int", "Optional[int]"):
                    kwargs[name] = int(text)
                else:
                    kwargs[name] = float(text)
            rows.append(ResultRow(**kwargs))
    return rows


def write_dicts_csv(path, records: Sequence[Dict], fieldnames: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for record in records:
            writer.writerow([_fmt(record[name]) for name in fieldnames])


AGGREGATE_FIELDS = ["method", "corruption", "count", "snr_mean", "snr_std", "mse_mean", "mse_std"]


def write_trajectory_csv(path, trajectories: Sequence[np.ndarray]) -> None:
    """One ``restart,iteration,objective`` line per recorded objective value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["restart", "iteration", "objective"])
        for k, traj in enumerate(trajectories):
            for it, value in enumerate(traj):
                writer.writerow([k, it, repr(float(value))])


def _safe(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in label).strip("_")


def write_outputs(result: ExperimentResult, config: ExperimentConfig, out_dir) -> Dict[str, Path]:
    """Write results, aggregates, trajectories, manifest, and (for WAV input) reconstructions."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"results": out_dir / "results.csv", "aggregate": out_dir / "aggregate.csv",
             "manifest": out_dir / "manifest.json"}
    write_results_csv(paths["results"], result.rows)
    write_dicts_csv(paths["aggregate"], aggregate(result.rows), AGGREGATE_FIELDS)
    with open(paths["manifest"], "w") as fh:
        json.dump(config.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.trajectories:
        traj_dir = out_dir / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        for (seg_id, label), trajs in sorted(result.trajectories.items()):
            write_trajectory_csv(traj_dir / f"seg{seg_id:04d}_{_safe(label)}.csv", trajs)
    if result.sample_rate is not None:
        length = config.segment_length
        for method in config.methods:
            for spec in config.corruptions:
                label = spec.describe()
                pieces = []
                for seg in result.segments:
                    x = result.reconstructions.get((seg.segment_id, method, label))
                    pieces.append(np.zeros(length) if x is None else x)
                if pieces:
                    path = out_dir / f"recon_{method}_{_safe(label)}.wav"
                    write_wav(path, np.concatenate(pieces), result.sample_rate)
                    paths[f"wav:{method}:{label}"] = path
    return paths


SWEEP_FIELDS = ["tau", "lambda1", "lambda2", "count", "snr_mean", "snr_std"]


def sweep(config: ExperimentConfig, tau_grid: Sequence[int],
          lambda_grid: Sequence[float]) -> List[Dict]:
    """Proposed-method SNR for every ``(tau, lambda1, lambda2)`` combination.

    Returns one record per cell in ``tau``-major, then ``lambda1``, then
    ``lambda2`` order.
    """
    if not tau_grid or not lambda_grid:
        raise ParameterError("sweep grids must be nonempty")
    segments, rate = load_segments(config)
    records = []
    for tau in tau_grid:
        for lam1 in lambda_grid:
            for lam2 in lambda_grid:
                cell = dataclasses.replace(config, methods=("proposed",), tau=int(tau),
                                           lambda1=float(lam1), lambda2=float(lam2))
                result = run_experiment(cell, segments, rate)
                snr = [r.snr_db for r in result.rows if not r.error]
                records.append({
                    "tau": int(tau), "lambda1": float(lam1), "lambda2": float(lam2),
                    "count": len(snr),
                    "snr_mean": float(np.mean(snr)) if snr else math.nan,
                    "snr_std": float(np.std(snr, ddof=1)) if len(snr) > 1 else 0.0,
                })
    return records

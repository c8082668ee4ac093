"""``streamsparse`` command-line front end.

Subcommands::

    streamsparse simulate <config>
    streamsparse resume <checkpoint> <config> [--method M] [--seed S]
    streamsparse ingest <csv> --response <col> --batch-size <n> <config>
    streamsparse compare <config>

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 bad
checkpoint or dimension mismatch, 5 unparseable input data.  Diagnostics go
to standard error; the paths of written files go to standard output.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import re
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .config import METHODS, ConfigError, ExperimentConfig, load_config
from .engine import AdIhtLearner
from .errors import (
    CheckpointError,
    ConvergenceError,
    DataFormatError,
    DivergenceError,
    SingularHessianError,
)
from .glm import BatchData
from .metrics import CSV_COLUMNS, BatchMetrics, ScoreAccumulator, format_float, l2_error
from .oracle import oracle_support_mle
from .renewable import RenewableLearner
from .simdata import SyntheticStream
from .svgplot import error_curve_svg

log = logging.getLogger("streamsparse")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_CHECKPOINT, EXIT_DATA = 0, 2, 3, 4, 5
THREADS_ENV = "STREAMSPARSE_THREADS"
_CKPT_NAME = re.compile(r"^(?P<method>[a-z]+)_(?P<seed>\d+)_b(?P<b>\d+)\.ckpt$")


class DimensionMismatchError(CheckpointError):
    """A checkpoint does not fit the stream described by the config."""


@dataclass
class JobResult:
    method: str
    seed: int
    csv_path: Path
    rows: list = field(default_factory=list)
    oracle_l2: dict = field(default_factory=dict)
    error: Optional[BaseException] = None


def _new_learner(cfg: ExperimentConfig, method: str, p: int):
    if method == "adiht":
        return AdIhtLearner(cfg.family, p=p, config=cfg.iht)
    return RenewableLearner(cfg.family, p=p, config=cfg.renewable)


def _load_learner(cfg: ExperimentConfig, method: str, path: Path):
    with open(path, "rb") as fh:
        if method == "adiht":
            return AdIhtLearner.load(fh, cfg.family, cfg.iht)
        return RenewableLearner.load(fh, cfg.family, cfg.renewable)


def checkpoint_path(cfg: ExperimentConfig, method: str, seed: int, b: int) -> Path:
    return cfg.output_dir / f"{method}_{seed}_b{b}.ckpt"


def _save_checkpoint(learner, path: Path) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        learner.save(fh)
    os.replace(tmp, path)


def _csv_writer(fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    return writer


def run_job(cfg: ExperimentConfig, method: str, seed: int, csv_path: Path, learner=None) -> JobResult:
    """Run one method on one seeded stream, writing one CSV row per batch as it goes.

    With ``learner`` given (a resumed state) the run continues after the
    batches already absorbed.  Those earlier batches are regenerated only to
    rebuild the truth-based diagnostics; the estimator never sees them again.
    """
    stream = SyntheticStream(cfg.stream_spec(seed))
    if learner is None:
        learner = _new_learner(cfg, method, stream.p)
    start = learner.state.batches_absorbed + 1
    result = JobResult(method, seed, csv_path)
    acc = ScoreAccumulator(cfg.family, stream.beta_star, stream.support) if cfg.diagnostics else None
    held: list[BatchData] = []
    for b in range(1, start):
        if acc is None and not cfg.compute_oracle:
            break
        old = stream.batch(b)
        if acc is not None:
            acc.absorb(old)
        if cfg.compute_oracle:
            held.append(old)
    if start == 1 and 0 in cfg.checkpoint_at:
        _save_checkpoint(learner, checkpoint_path(cfg, method, seed, 0))

    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        for b in range(start, len(stream) + 1):
            batch = stream.batch(b)
            try:
                record = learner.partial_fit(batch)
            except DivergenceError as exc:
                exc.batch_index = b
                result.error = exc
                break
            extra = dict(method=method, seed=seed, iters=record.iterations_run, lambda_final=record.lambda_final)
            if cfg.record_timing:
                extra["wall_ms"] = record.wall_time * 1000.0
            if acc is not None:
                acc.absorb(batch)
                extra["alpha_emp"], extra["theta_emp"] = acc.read()
            m = BatchMetrics.compute(b, record.n_cumulative, record.beta_hat, stream.beta_star, stream.support, **extra)
            if cfg.compute_oracle:
                held.append(batch)
                oracle_l2 = _oracle_l2(cfg, held, stream)
                if oracle_l2 is not None:
                    result.oracle_l2[b] = oracle_l2
                    if oracle_l2 > 0:
                        m.oracle_ratio = m.l2_error / oracle_l2
            writer.writerow(m.to_row())
            fh.flush()
            result.rows.append(m)
            if b in cfg.checkpoint_at:
                _save_checkpoint(learner, checkpoint_path(cfg, method, seed, b))
    return result


def _oracle_l2(cfg, held, stream) -> Optional[float]:
    if len(stream.support) > sum(batch.n for batch in held):
        return None
    try:
        beta = oracle_support_mle(cfg.family, held, stream.support)
    except (ConvergenceError, SingularHessianError) as exc:
        log.warning("oracle unavailable at b=%d: %s", held[-1].batch_index, exc)
        return None
    return l2_error(beta, stream.beta_star)


def _worker_count(n_jobs: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        limit = os.cpu_count() or 1
    else:
        try:
            limit = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if limit < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return max(1, min(limit, n_jobs))


def run_all(cfg: ExperimentConfig) -> list[JobResult]:
    cfg.require_stream()
    for seed in cfg.seeds:
        cfg.stream_spec(seed)  # surface config errors before any work starts
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(m, s) for s in cfg.seeds for m in cfg.methods]
    with ThreadPoolExecutor(max_workers=_worker_count(len(jobs))) as pool:
        futures = [pool.submit(run_job, cfg, m, s, cfg.output_dir / f"{m}_{s}.csv") for m, s in jobs]
        return [f.result() for f in futures]


def _medians(results: list[JobResult], attr: str) -> dict:
    out = {}
    for method in METHODS:
        by_b: dict[int, list[float]] = {}
        for r in results:
            if r.method != method:
                continue
            for m in r.rows:
                v = getattr(m, attr)
                if v is not None:
                    by_b.setdefault(m.b, []).append(v)
        if by_b:
            out[method] = [(b, statistics.median(by_b[b])) for b in sorted(by_b)]
    return out


def _finish(cfg: ExperimentConfig, results: list[JobResult]) -> int:
    for r in results:
        print(r.csv_path)
    if cfg.emit_svg:
        svg = cfg.output_dir / "error_curve.svg"
        svg.write_text(error_curve_svg(_medians(results, "l2_error"), _medians(results, "scaled_error")), encoding="utf-8")
        print(svg)
    failed = [r for r in results if r.error is not None]
    for r in failed:
        log.error("%s seed %d diverged at batch %s: %s", r.method, r.seed, r.error.batch_index, r.error)
    return EXIT_DIVERGED if failed else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    return _finish(cfg, run_all(cfg))


def cmd_compare(args) -> int:
    cfg = dataclasses.replace(load_config(args.config), methods=METHODS, compute_oracle=True)
    results = run_all(cfg)
    code = _finish(cfg, results)
    path = cfg.output_dir / "comparison.csv"
    _write_comparison(path, cfg, results)
    print(path)
    return code


COMPARISON_FIELDS = ("l2_error", "scaled_error", "support_size", "fp", "fn", "oracle_ratio")


def _write_comparison(path: Path, cfg: ExperimentConfig, results: list[JobResult]) -> None:
    header = ["b", "N_b", "seed", "oracle_l2_error"] + [f"{m}_{f}" for m in METHODS for f in COMPARISON_FIELDS]
    index = {(r.method, r.seed): r for r in results}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for seed in cfg.seeds:
            stream = SyntheticStream(cfg.stream_spec(seed))
            rows = {m: {row.b: row for row in index[(m, seed)].rows} for m in METHODS}
            oracle = index[("adiht", seed)].oracle_l2 or index[("renewable", seed)].oracle_l2
            for b in range(1, len(stream) + 1):
                line = [str(b), str(stream.n_cumulative(b)), str(seed), format_float(oracle.get(b))]
                for m in METHODS:
                    row = rows[m].get(b)
                    for f in COMPARISON_FIELDS:
                        v = None if row is None else getattr(row, f)
                        line.append(format_float(v) if isinstance(v, float) else ("" if v is None else str(v)))
                writer.writerow(line)


def cmd_resume(args) -> int:
    cfg = load_config(args.config)
    ckpt = Path(args.checkpoint)
    match = _CKPT_NAME.match(ckpt.name)
    method = args.method or (match.group("method") if match else None)
    seed = args.seed if args.seed is not None else (int(match.group("seed")) if match else None)
    if method not in METHODS:
        raise ConfigError("cannot tell the method from the checkpoint name; pass --method adiht|renewable")
    if seed is None:
        raise ConfigError("cannot tell the seed from the checkpoint name; pass --seed")
    stream = SyntheticStream(cfg.stream_spec(seed))
    try:
        learner = _load_learner(cfg, method, ckpt)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {ckpt}: {exc.strerror}") from None
    state = learner.state
    if state.p != stream.p:
        raise DimensionMismatchError(f"dimension mismatch: checkpoint has p={state.p}, config has p={stream.p}")
    k = state.batches_absorbed
    if k > len(stream) or state.n_total != stream.n_cumulative(k):
        raise DimensionMismatchError(
            f"checkpoint (batches={k}, N={state.n_total}) does not match the configured stream"
        )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    result = run_job(cfg, method, seed, cfg.output_dir / f"{method}_{seed}_resumed.csv", learner=learner)
    print(result.csv_path)
    if result.error is not None:
        log.error("%s seed %d diverged at batch %s: %s", method, seed, result.error.batch_index, result.error)
        return EXIT_DIVERGED
    return EXIT_OK


def _read_batches(path: Path, response: str, batch_size: int) -> Iterator[BatchData]:
    """Chunk a headed numeric CSV into batches without holding the whole file."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if response not in header:
            raise ConfigError(f"response column {response!r} not found in the CSV header")
        y_col = header.index(response)
        x_cols = [j for j in range(len(header)) if j != y_col]
        if not x_cols:
            raise ConfigError("the CSV has no feature columns")
        rows: list[list[float]] = []
        b = 0
        for line_no, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataFormatError(f"line {line_no}: expected {len(header)} cells, found {len(cells)}")
            values = []
            for j, cell in enumerate(cells):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"non-numeric value {cell!r} at line {line_no} (data row {line_no - 1}), column {header[j]!r}"
                    ) from None
            rows.append(values)
            if len(rows) == batch_size:
                b += 1
                yield _to_batch(rows, x_cols, y_col, b)
                rows = []
        if rows:
            yield _to_batch(rows, x_cols, y_col, b + 1)


def _to_batch(rows, x_cols, y_col, b) -> BatchData:
    arr = np.asarray(rows, dtype=np.float64)
    return BatchData(arr[:, x_cols], arr[:, y_col], b)


def cmd_ingest(args) -> int:
    cfg = load_config(args.config)
    if args.batch_size < 1:
        raise ConfigError(f"--batch-size must be >= 1, got {args.batch_size}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    learners: dict = {}
    paths = {m: cfg.output_dir / f"{m}_ingest.csv" for m in cfg.methods}
    handles = {m: open(paths[m], "w", newline="", encoding="utf-8") for m in cfg.methods}
    code = EXIT_OK
    try:
        writers = {m: _csv_writer(fh) for m, fh in handles.items()}
        for batch in _read_batches(Path(args.csv), args.response, args.batch_size):
            for m in cfg.methods:
                if m not in learners:
                    learners[m] = _new_learner(cfg, m, batch.p)
                if learners[m] is None:
                    continue
                try:
                    record = learners[m].partial_fit(batch)
                except DivergenceError as exc:
                    log.error("%s diverged at batch %d: %s", m, batch.batch_index, exc)
                    learners[m] = None
                    code = EXIT_DIVERGED
                    continue
                extra = dict(method=m, iters=record.iterations_run, lambda_final=record.lambda_final)
                if cfg.record_timing:
                    extra["wall_ms"] = record.wall_time * 1000.0
                row = BatchMetrics.compute(batch.batch_index, record.n_cumulative, record.beta_hat, **extra)
                writers[m].writerow(row.to_row())
                handles[m].flush()
    finally:
        for fh in handles.values():
            fh.close()
    for m in cfg.methods:
        print(paths[m])
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamsparse", description="Streaming sparse GLM experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run simulated streams for every seed and method")
    p.add_argument("config")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("resume", help="continue a simulated stream from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("config")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_resume)

    p = sub.add_parser("ingest", help="fit a headed numeric CSV chunked into batches")
    p.add_argument("csv")
    p.add_argument("config")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--batch-size", type=int, required=True)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("compare", help="run both methods plus the oracle and join the results")
    p.add_argument("config")
    p.set_defaults(handler=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("streamsparse: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    log.propagate = False
    try:
        return args.handler(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DivergenceError as exc:
        log.error("divergence: %s", exc)
        return EXIT_DIVERGED
    except CheckpointError as exc:
        log.error("checkpoint error: %s", exc)
        return EXIT_CHECKPOINT
    except DataFormatError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    finally:
        log.removeHandler(handler)

if __name__ == "__main__":
    sys.exit(main())

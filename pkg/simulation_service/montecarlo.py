# simulation_service/montecarlo.py
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, List, Literal, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.stats import norm

from common_utils.errors import NotBracketedError, UsageError
from common_utils.logger.client import LoggerClient
from construction_service.gf2matrix import ParityCheckMatrix, SystematicEncoder
from simulation_service.channel_decoder import DEFAULT_MAX_ITERS, BPDecoder, ChannelConfig, init_llrs, transmit

logger = LoggerClient("montecarlo")

CSV_COLUMNS = ["code_id", "snr_db", "trials", "block_errors", "bit_errors", "bler", "ber", "ci_low", "ci_high"]

TransmissionMode = Literal["zero", "systematic"]


class CurvePoint(BaseModel):
    snr_db: float
    trials: int = Field(ge=1)
    block_errors: int = Field(ge=0)
    bit_errors: int = Field(ge=0)
    bler: float
    ber: float
    ci_low: float
    ci_high: float
    bits_per_trial: Optional[int] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def _check_counts(self):
        if self.block_errors > self.trials:
            raise ValueError("block_errors cannot exceed trials")
        if self.bits_per_trial is not None and self.bit_errors > self.trials * self.bits_per_trial:
            raise ValueError("bit_errors cannot exceed trials times the reference length")
        if not 0.0 <= self.ci_low <= self.bler <= self.ci_high <= 1.0:
            raise ValueError("Wilson bounds must bracket the BLER inside [0, 1]")
        return self


class BlerCurve(BaseModel):
    code_id: str = ""
    seed: int = 0
    points: List[CurvePoint] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_grid(self):
        snrs = [p.snr_db for p in self.points]
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError("curve points must be strictly increasing in SNR")
        return self


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise UsageError("Wilson interval needs at least one trial")
    z = norm.ppf(1.0 - (1.0 - confidence) / 2.0)
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
    return min(max(0.0, center - half), p), max(min(1.0, center + half), p)


def make_point(snr_db: float, trials: int, block_errors: int, bit_errors: int,
               bits_per_trial: int) -> CurvePoint:
    low, high = wilson_interval(block_errors, trials)
    return CurvePoint(
        snr_db=snr_db,
        trials=trials,
        block_errors=block_errors,
        bit_errors=bit_errors,
        bler=block_errors / trials,
        ber=bit_errors / (trials * bits_per_trial),
        ci_low=low,
        ci_high=high,
        bits_per_trial=bits_per_trial,
    )


def _simulate_chunk(args) -> Tuple[int, int]:
    H, snr_db, seed, start, stop, mode, max_iters = args
    channel = ChannelConfig(snr_db=snr_db, seed=seed)
    decoder = BPDecoder(H, max_iters)
    encoder = SystematicEncoder(H) if mode == "systematic" else None
    block_errors = bit_errors = 0
    for trial in range(start, stop):
        rng = np.random.default_rng(seed + trial)
        if encoder is None:
            codeword = np.zeros(H.n, dtype=np.uint8)
        else:
            message = rng.integers(0, 2, size=encoder.k, dtype=np.uint8)
            codeword = encoder.encode(message)
        llrs = init_llrs(transmit(codeword, channel, rng), channel.sigma2)
        decoded = decoder.decode(llrs).hard_decision
        if encoder is None:
            wrong = int(decoded.sum())
        else:
            wrong = int((decoded[encoder.info_positions] != message).sum())
        bit_errors += wrong
        block_errors += wrong > 0
    return block_errors, bit_errors


def _chunks(trials: int, workers: int) -> List[Tuple[int, int]]:
    bounds = np.linspace(0, trials, max(1, min(workers, trials)) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds, bounds[1:]) if b > a]


def run_point(H: ParityCheckMatrix, snr_db: float, trials: int, seed: int,
              mode: TransmissionMode = "zero", workers: int = 1,
              max_iters: int = DEFAULT_MAX_ITERS) -> CurvePoint:
    """
    Monte Carlo estimate at one SNR. Trial t draws all its randomness from
    seed + t, so counts do not depend on how trials are split across workers.
    """
    if trials < 1:
        raise UsageError("trials must be >= 1")
    if mode == "systematic":
        bits_per_trial = SystematicEncoder(H).k
    elif mode == "zero":
        bits_per_trial = H.n
    else:
        raise UsageError(f"unknown transmission mode {mode!r}")

    jobs = [(H, snr_db, seed, a, b, mode, max_iters) for a, b in _chunks(trials, workers)]
    if len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            counts = list(pool.map(_simulate_chunk, jobs))
    else:
        counts = [_simulate_chunk(job) for job in jobs]

    point = make_point(snr_db, trials, sum(c[0] for c in counts), sum(c[1] for c in counts), bits_per_trial)
    logger.info("SNR point simulated", {
        "snr_db": snr_db,
        "trials": trials,
        "block_errors": point.block_errors,
        "bler": point.bler,
    })
    return point


def _check_grid(snr_grid: Sequence[float]) -> List[float]:
    grid = [float(s) for s in snr_grid]
    if not grid:
        raise UsageError("SNR grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("SNR grid must be strictly increasing")
    return grid


def run_sweep(H: ParityCheckMatrix, snr_grid: Sequence[float], trials: int, seed: int,
              mode: TransmissionMode = "zero", workers: int = 1, code_id: str = "",
              max_iters: int = DEFAULT_MAX_ITERS) -> BlerCurve:
    grid = _check_grid(snr_grid)
    points = [run_point(H, snr, trials, seed, mode, workers, max_iters) for snr in grid]
    return BlerCurve(code_id=code_id, seed=seed, points=points)


def _bracket(curve: BlerCurve, target_bler: float) -> Tuple[CurvePoint, CurvePoint]:
    if not 0.0 < target_bler < 1.0:
        raise UsageError(f"target BLER must lie in (0, 1), got {target_bler}")
    for a, b in zip(curve.points, curve.points[1:]):
        if a.bler > 0 and b.bler > 0 and min(a.bler, b.bler) <= target_bler <= max(a.bler, b.bler):
            return a, b
    raise NotBracketedError(
        f"target BLER {target_bler:g} is not bracketed by two nonzero measured points"
        f"{' of ' + curve.code_id if curve.code_id else ''}; no extrapolation is done"
    )


def snr_at_bler(curve: BlerCurve, target_bler: float) -> float:
    """SNR where the curve crosses `target_bler`, linear in (snr, log10 bler)."""
    a, b = _bracket(curve, target_bler)
    la, lb = math.log10(a.bler), math.log10(b.bler)
    if la == lb:
        return a.snr_db
    return a.snr_db + (math.log10(target_bler) - la) * (b.snr_db - a.snr_db) / (lb - la)


def snr_gain(curve_a: BlerCurve, curve_b: BlerCurve, target_bler: float) -> float:
    """Gain of a over b in dB; positive when a needs less SNR."""
    return snr_at_bler(curve_b, target_bler) - snr_at_bler(curve_a, target_bler)


def ci_width_db(curve: BlerCurve, target_bler: float) -> float:
    """
    Half-width in dB of the 95% Wilson interval at the target, mapped through
    the local slope of log10(bler) against SNR. Used for report text only.
    """
    a, b = _bracket(curve, target_bler)
    slope = abs((math.log10(b.bler) - math.log10(a.bler)) / (b.snr_db - a.snr_db))
    if slope == 0:
        return math.inf
    trials = min(a.trials, b.trials)
    low, high = wilson_interval(max(1, round(target_bler * trials)), trials)
    return (math.log10(high) - math.log10(low)) / 2.0 / slope


def parse_snr_grid(text: str) -> List[float]:
    """
    "start:stop:step" (both ends included when step divides the span) or a
    comma-separated list of values.
    """
    text = text.strip()
    try:
        if ":" not in text:
            return _check_grid([float(v) for v in text.split(",") if v.strip()])
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"cannot parse SNR grid {text!r}; expected start:stop:step")
    if step <= 0 or stop < start:
        raise UsageError(f"SNR grid {text!r} needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return _check_grid([round(start + i * step, 10) for i in range(count)])


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def write_curve_csv(curves: Union[BlerCurve, Iterable[BlerCurve]], destination: Union[str, os.PathLike, TextIO]) -> None:
    if isinstance(curves, BlerCurve):
        curves = [curves]
    rows = [
        [curve.code_id, _fmt(p.snr_db), p.trials, p.block_errors, p.bit_errors,
         _fmt(p.bler), _fmt(p.ber), _fmt(p.ci_low), _fmt(p.ci_high)]
        for curve in curves for p in curve.points
    ]
    if hasattr(destination, "write"):
        _write_rows(destination, rows)
        return
    with open(destination, mode="w", newline="", encoding="utf-8") as file:
        _write_rows(file, rows)
    logger.debug("Curve CSV written", {"path": str(destination), "rows": len(rows)})


def _write_rows(file: TextIO, rows: List[list]) -> None:
    writer = csv.writer(file, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)


def read_curve_csv(source: Union[str, os.PathLike], code_id: Optional[str] = None) -> BlerCurve:
    """Load one curve; `code_id` selects among several codes in one file."""
    with open(source, newline="", encoding="utf-8") as file:
        reader = csv.DictReader(file)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise UsageError(f"{source}: missing CSV columns {sorted(missing)}")
        rows = list(reader)
    ids = sorted({row["code_id"] for row in rows})
    if code_id is None:
        if len(ids) > 1:
            raise UsageError(f"{source} holds several codes {ids}; pick one with a code id")
        code_id = ids[0] if ids else ""
    try:
        points = [
            CurvePoint(
                snr_db=float(row["snr_db"]),
                trials=int(row["trials"]),
                block_errors=int(row["block_errors"]),
                bit_errors=int(row["bit_errors"]),
                bler=float(row["bler"]),
                ber=float(row["ber"]),
                ci_low=float(row["ci_low"]),
                ci_high=float(row["ci_high"]),
            )
            for row in rows if row["code_id"] == code_id
        ]
        return BlerCurve(code_id=code_id, points=sorted(points, key=lambda p: p.snr_db))
    except ValueError as e:
        raise UsageError(f"{source}: invalid curve data ({e})")

# experiment_service/experiments.py
"""
Named experiment presets and the drivers that run them: construction of
every method for every seed, Monte Carlo sweeps, gain summaries and the
block-structure Pareto sweep.
"""
import csv
import json
import pathlib
import time
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from common_utils.errors import ConfigError, ConstructionError, NotBracketedError, UsageError
from common_utils.logger.client import LoggerClient
from common_utils.report.client import ReportClient
from construction_service.annealer import AnnealConfig, construct_hybrid
from construction_service.baselines import PegConfig, construct_block_peg, construct_peg, construct_random
from construction_service.energy import EnergyWeights, weight_ordering_warnings
from construction_service.gf2matrix import ParityCheckMatrix, validity_violations, write_alist
from construction_service.graphmetrics import compute_metrics
from experiment_service.manifest import RunManifest, config_digest, write_manifest
from simulation_service.montecarlo import (
    BlerCurve,
    ci_width_db,
    parse_snr_grid,
    run_sweep,
    snr_gain,
    write_curve_csv,
)

logger = LoggerClient("experiments")

TEMPLATE_DIR = pathlib.Path(__file__).parent / "templates"

Method = Literal["hybrid", "peg", "random", "block_peg"]

UNCONSTRAINED_GRID = "0:7.5:0.5"
CONSTRAINED_GRID = "0:5:0.25"
DEFAULT_SEEDS = [1, 2, 3, 4, 5]
BLOCKLENGTHS = (64, 96, 128)

# α_b ladder around the SET4 value
PARETO_PROFILES = {
    "cycle-dominant": 20.0,
    "balanced": 200.0,
    "structure-dominant": 2000.0,
}


class CodeParams(BaseModel):
    n: int = Field(ge=2)
    k: int = Field(ge=1)
    target_col_weight: Optional[int] = Field(default=None, ge=1)
    target_col_weights: Optional[List[int]] = None
    block_size: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_code(self):
        if not self.n > self.k:
            raise ValueError("n must exceed k")
        if self.target_col_weights is None and self.target_col_weight is None:
            raise ValueError("either target_col_weight or target_col_weights is required")
        if self.target_col_weights is not None and len(self.target_col_weights) != self.n:
            raise ValueError(f"target_col_weights has length {len(self.target_col_weights)}, expected n = {self.n}")
        if self.block_size is not None and (self.n % self.block_size or self.m % self.block_size):
            raise ValueError(f"block_size {self.block_size} must divide m = {self.m} and n = {self.n}")
        return self

    @property
    def m(self) -> int:
        return self.n - self.k

    def targets(self) -> List[int]:
        if self.target_col_weights is not None:
            return list(self.target_col_weights)
        return [self.target_col_weight] * self.n


class ExperimentSpec(BaseModel):
    name: str
    code: CodeParams
    weights: EnergyWeights = Field(default_factory=EnergyWeights)
    anneal: AnnealConfig = Field(default_factory=AnnealConfig)
    methods: List[Method] = Field(min_length=1)
    snr_grid: List[float]
    trials: int = Field(default=1000, ge=1)
    targets_bler: List[float] = Field(default_factory=lambda: [0.01, 0.001])
    seeds: List[int] = Field(default_factory=lambda: [1], min_length=1)
    transmission: Literal["zero", "systematic"] = "zero"

    @field_validator("snr_grid", mode="before")
    @classmethod
    def _parse_grid(cls, value):
        if isinstance(value, str):
            return parse_snr_grid(value)
        return value

    @model_validator(mode="after")
    def _check_spec(self):
        if not self.snr_grid or any(b <= a for a, b in zip(self.snr_grid, self.snr_grid[1:])):
            raise ValueError("snr_grid must be nonempty and strictly increasing")
        if "block_peg" in self.methods and self.code.block_size is None:
            raise ValueError("block_peg needs code.block_size")
        if any(not 0 < t < 1 for t in self.targets_bler):
            raise ValueError("targets_bler entries must lie in (0, 1)")
        return self


class ParetoPoint(BaseModel):
    weight_profile: str
    c4: int = Field(ge=0)
    c6: Union[int, float] = Field(ge=0)
    block_deviation: int = Field(ge=0)
    matrix_ref: Optional[str] = None


class GainEntry(BaseModel):
    seed: int
    baseline: str
    target_bler: float
    gain_db: Optional[float] = None
    ci_half_width_db: Optional[float] = None
    reason: Optional[str] = None


class ExperimentSummary(BaseModel):
    name: str
    methods: List[str]
    seeds: List[int]
    targets_bler: List[float]
    gains: List[GainEntry] = Field(default_factory=list)
    mean_gain_db: Dict[str, Optional[float]] = Field(default_factory=dict)


# presets

def _unconstrained(n: int) -> ExperimentSpec:
    return ExperimentSpec(
        name=f"unconstrained-{n}",
        code=CodeParams(n=n, k=n // 2, target_col_weight=3),
        methods=["hybrid", "peg", "random"],
        snr_grid=UNCONSTRAINED_GRID,
        seeds=DEFAULT_SEEDS,
    )


def _set1(n: int) -> ExperimentSpec:
    return ExperimentSpec(
        name=f"set1-{n}",
        code=CodeParams(n=n, k=n // 2, target_col_weight=2),
        weights=EnergyWeights(alpha_w=50.0),
        anneal=AnnealConfig(move_mode="column_swap"),
        methods=["hybrid", "peg", "random"],
        snr_grid=CONSTRAINED_GRID,
        seeds=DEFAULT_SEEDS,
    )


def _set2(n: int) -> ExperimentSpec:
    return ExperimentSpec(
        name=f"set2-{n}",
        code=CodeParams(n=n, k=n // 2, target_col_weights=[2] * (n // 2) + [4] * (n - n // 2)),
        weights=EnergyWeights(alpha_w=50.0),
        anneal=AnnealConfig(move_mode="column_swap"),
        methods=["hybrid", "peg", "random"],
        snr_grid=CONSTRAINED_GRID,
        seeds=DEFAULT_SEEDS,
    )


def _set3() -> ExperimentSpec:
    return ExperimentSpec(
        name="set3",
        code=CodeParams(n=64, k=32, target_col_weight=3),
        weights=EnergyWeights(alpha_w=50.0, alpha_f=100.0),
        anneal=AnnealConfig(move_mode="column_swap"),
        methods=["hybrid", "peg", "random"],
        snr_grid=CONSTRAINED_GRID,
        targets_bler=[0.1, 0.01, 0.001],
        seeds=DEFAULT_SEEDS,
    )


def _set4(n: int, b: int) -> ExperimentSpec:
    return ExperimentSpec(
        name=f"set4-{n}-b{b}",
        code=CodeParams(n=n, k=n // 2, target_col_weight=3, block_size=b),
        weights=EnergyWeights(alpha_w=50.0, alpha_b=200.0, block_size=b),
        anneal=AnnealConfig(move_mode="column_swap"),
        methods=["hybrid", "peg", "block_peg"],
        snr_grid=CONSTRAINED_GRID,
        seeds=DEFAULT_SEEDS,
    )


def _registry() -> Dict[str, Callable[[], ExperimentSpec]]:
    presets = {"set3": _set3, "set3-64": _set3}
    for n in BLOCKLENGTHS:
        presets[f"unconstrained-{n}"] = lambda n=n: _unconstrained(n)
        presets[f"set1-{n}"] = lambda n=n: _set1(n)
        presets[f"set2-{n}"] = lambda n=n: _set2(n)
        for b in (4, 8):
            presets[f"set4-{n}-b{b}"] = lambda n=n, b=b: _set4(n, b)
    return presets


_PRESETS = _registry()


def list_presets() -> List[str]:
    return sorted(_PRESETS)


def preset(name: str) -> ExperimentSpec:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise UsageError(f"unknown preset {name!r}; available presets: {', '.join(list_presets())}")


def load_spec(path: Union[str, pathlib.Path]) -> ExperimentSpec:
    try:
        text = pathlib.Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    try:
        return ExperimentSpec.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}: {e}")


# construction

def build_code(method: str, spec: ExperimentSpec, seed: int, workers: int = 1) -> Tuple[ParityCheckMatrix, Dict[str, float]]:
    """Construct one code; returns the matrix and per-phase wall-clock seconds."""
    code = spec.code
    targets = code.targets()
    start = time.perf_counter()
    if method == "hybrid":
        cfg = spec.anneal.model_copy(update={"seed": seed})
        result = construct_hybrid(code.n, code.k, targets, spec.weights, cfg, workers)
        return result.matrix, dict(result.timings)
    if method == "peg":
        H = construct_peg(PegConfig(n=code.n, k=code.k, target_col_weights=targets, seed=seed))
    elif method == "block_peg":
        if code.block_size is None:
            raise UsageError("block_peg needs a block size")
        H = construct_block_peg(PegConfig(n=code.n, k=code.k, target_col_weights=targets,
                                          block_size=code.block_size, seed=seed))
    elif method == "random":
        H = construct_random(code.n, code.k, targets, seed, spec.anneal.rank_repair_budget)
    else:
        raise UsageError(f"unknown construction method {method!r}")
    zero_rows, zero_cols = validity_violations(H)
    if zero_rows or zero_cols:
        raise ConstructionError(f"{method} produced {zero_rows} empty rows and {zero_cols} empty columns")
    return H, {"construct": time.perf_counter() - start}


def code_metrics(H: ParityCheckMatrix, spec: ExperimentSpec, seed: int = 0) -> dict:
    metrics = compute_metrics(
        H,
        block_size=spec.code.block_size,
        trap42=spec.weights.alpha_f > 0,
        seed=seed,
    )
    return metrics.model_dump(mode="json")


def _gains(spec: ExperimentSpec, curves: Dict[Tuple[str, int], BlerCurve]) -> List[GainEntry]:
    entries = []
    baselines = [m for m in spec.methods if m != "hybrid"]
    if "hybrid" not in spec.methods:
        return entries
    for seed in spec.seeds:
        hybrid = curves[("hybrid", seed)]
        for baseline in baselines:
            for target in spec.targets_bler:
                entry = GainEntry(seed=seed, baseline=baseline, target_bler=target)
                try:
                    entry.gain_db = snr_gain(hybrid, curves[(baseline, seed)], target)
                    entry.ci_half_width_db = ci_width_db(hybrid, target)
                except NotBracketedError as e:
                    entry.gain_db = None
                    entry.reason = e.detail
                entries.append(entry)
    return entries


def _mean_gains(spec: ExperimentSpec, gains: Sequence[GainEntry]) -> Dict[str, Optional[float]]:
    means = {}
    for baseline in (m for m in spec.methods if m != "hybrid"):
        for target in spec.targets_bler:
            values = [g.gain_db for g in gains
                      if g.baseline == baseline and g.target_bler == target and g.gain_db is not None]
            means[f"{baseline}@{target:g}"] = sum(values) / len(values) if values else None
    return means


def run_experiment(spec: ExperimentSpec, out_dir: Union[str, pathlib.Path], workers: int = 1,
                   command: Optional[List[str]] = None) -> ExperimentSummary:
    """
    Construct, measure and simulate every method for every seed, writing
    under <out_dir>/<name>/: <method>-<seed>.alist, metrics.json, bler.csv,
    summary.json, summary.txt and manifest.json.
    """
    weight_ordering_warnings(spec.weights)
    root = pathlib.Path(out_dir) / spec.name
    root.mkdir(parents=True, exist_ok=True)
    logger.info("Experiment started", {"name": spec.name, "methods": spec.methods, "seeds": spec.seeds})

    phases = {"construct": 0.0, "refine": 0.0, "rank_repair": 0.0, "simulate": 0.0}
    records = []
    curves = {}
    for method in spec.methods:
        for seed in spec.seeds:
            H, timings = build_code(method, spec, seed, workers)
            for phase, seconds in timings.items():
                phases[phase] += seconds
            alist_path = root / f"{method}-{seed}.alist"
            write_alist(H, alist_path)
            records.append({
                "method": method,
                "seed": seed,
                "alist": alist_path.name,
                "construct_seconds": round(sum(timings.values()), 3),
                "metrics": code_metrics(H, spec, seed),
            })

            start = time.perf_counter()
            curves[(method, seed)] = run_sweep(H, spec.snr_grid, spec.trials, seed, spec.transmission,
                                               workers, code_id=f"{method}-{seed}")
            phases["simulate"] += time.perf_counter() - start

    (root / "metrics.json").write_text(json.dumps(records, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_curve_csv(list(curves.values()), root / "bler.csv")

    gains = _gains(spec, curves)
    summary = ExperimentSummary(
        name=spec.name,
        methods=list(spec.methods),
        seeds=list(spec.seeds),
        targets_bler=list(spec.targets_bler),
        gains=gains,
        mean_gain_db=_mean_gains(spec, gains),
    )
    (root / "summary.json").write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    ReportClient(TEMPLATE_DIR).write("summary", {"summary": summary, "records": records, "spec": spec},
                                     root / "summary.txt")
    write_manifest(root, RunManifest(
        command=command or ["run", "--preset", spec.name],
        config_digest=config_digest(spec),
        seeds=list(spec.seeds),
        phase_seconds=phases,
    ))
    logger.info("Experiment finished", {"name": spec.name, "out": str(root)})
    return summary


# Pareto sweep

def run_pareto(spec: ExperimentSpec, profiles: Optional[Dict[str, float]] = None,
               out_dir: Optional[Union[str, pathlib.Path]] = None, workers: int = 1,
               seed: Optional[int] = None) -> List[ParetoPoint]:
    """
    One hybrid construction per α_b profile plus standard-PEG and block-PEG
    reference points, each reported as (c4, c6, block deviation).
    """
    b = spec.code.block_size
    if b is None:
        raise UsageError(f"preset {spec.name} has no block size; the Pareto sweep needs one")
    profiles = profiles or PARETO_PROFILES
    seed = spec.seeds[0] if seed is None else seed
    root = pathlib.Path(out_dir) if out_dir is not None else None
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)

    def measure(label: str, H: ParityCheckMatrix) -> ParetoPoint:
        metrics = compute_metrics(H, block_size=b, seed=seed)
        matrix_ref = None
        if root is not None:
            path = root / f"{label}-{seed}.alist"
            write_alist(H, path)
            matrix_ref = path.name
        logger.info("Pareto point", {"profile": label, "c4": metrics.c4, "c6": metrics.c6,
                                     "block_deviation": metrics.block_deviation})
        return ParetoPoint(weight_profile=label, c4=metrics.c4, c6=metrics.c6,
                           block_deviation=metrics.block_deviation, matrix_ref=matrix_ref)

    points = []
    code = spec.code
    for label, alpha_b in profiles.items():
        weights = spec.weights.model_copy(update={"alpha_b": alpha_b, "block_size": b})
        cfg = spec.anneal.model_copy(update={"seed": seed})
        result = construct_hybrid(code.n, code.k, code.targets(), weights, cfg, workers)
        points.append(measure(label, result.matrix))
    peg_cfg = PegConfig(n=code.n, k=code.k, target_col_weights=code.targets(), block_size=b, seed=seed)
    points.append(measure("peg", construct_peg(peg_cfg)))
    points.append(measure("block_peg", construct_block_peg(peg_cfg)))
    return points


def write_pareto_csv(points: Sequence[ParetoPoint], destination: Union[str, pathlib.Path]) -> None:
    with open(destination, mode="w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["profile", "c4", "c6", "block_deviation", "alist_path"])
        for p in points:
            writer.writerow([p.weight_profile, p.c4, p.c6, p.block_deviation, p.matrix_ref or ""])

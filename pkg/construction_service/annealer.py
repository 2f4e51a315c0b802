# construction_service/annealer.py
"""
Tunneling-augmented simulated annealing (TASA) and the hybrid construction
pipeline built on it: parallel restarts, first-improvement refinement and
GF(2) rank repair.

A move is accepted with probability min(1, exp(-ΔE/T(t)) + p_tunnel(t)), so
even arbitrarily bad moves keep a decaying chance p_tunnel(t) of acceptance.
"""
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from common_utils.errors import MoveUnavailableError, UsageError
from common_utils.logger.client import LoggerClient
from construction_service.energy import EnergyBreakdown, EnergyWeights, Move, apply_with_delta, evaluate
from construction_service.gf2matrix import ParityCheckMatrix, gf2_rank, validity_violations
from construction_service.graphmetrics import CodeMetrics, compute_metrics

logger = LoggerClient("annealer")

# strict improvement threshold for hill climbing
IMPROVEMENT_EPS = 1e-9


class AnnealConfig(BaseModel):
    t_max: int = Field(default=500, ge=1)
    t_init: float = Field(default=10.0, gt=0)
    t_final: float = Field(default=0.01, gt=0)
    p0: float = Field(default=0.1, ge=0, le=1)
    restarts: int = Field(default=8, ge=1)
    move_mode: Literal["toggle", "column_swap"] = "toggle"
    refine_budget: int = Field(default=100, ge=0)
    rank_repair_budget: int = Field(default=200, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_schedule(self):
        if not self.t_init > self.t_final:
            raise ValueError("t_init must exceed t_final")
        return self


class TrialResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: ParityCheckMatrix
    energy: EnergyBreakdown
    energy_trace: List[float]
    accepted_moves: int = 0
    tunnel_accepts: int = 0
    repair_invocations: int = 0
    seed: Optional[int] = None


class HybridResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: ParityCheckMatrix
    metrics: CodeMetrics
    trials: List[TrialResult]
    best_trial: int
    refined_energy: EnergyBreakdown
    final_energy: EnergyBreakdown
    rank: int
    timings: Dict[str, float] = Field(default_factory=dict)


def temperature(t: float, cfg: AnnealConfig) -> float:
    return cfg.t_init * (cfg.t_final / cfg.t_init) ** (t / cfg.t_max)


def tunnel_probability(t: float, cfg: AnnealConfig) -> float:
    return cfg.p0 * math.exp(-t / cfg.t_max)


def _metropolis(dE: float, T: float) -> float:
    if dE <= 0:
        return 1.0
    return math.exp(-dE / T)


def acceptance_probability(dE: float, t: float, cfg: AnnealConfig) -> float:
    p = _metropolis(dE, temperature(t, cfg)) + tunnel_probability(t, cfg)
    return min(1.0, max(0.0, p))


def accept(dE: float, t: float, cfg: AnnealConfig, rng: np.random.Generator) -> bool:
    return rng.random() < acceptance_probability(dE, t, cfg)


def propose_move(H: ParityCheckMatrix, cfg: AnnealConfig, rng: np.random.Generator) -> Move:
    if cfg.move_mode == "toggle":
        return Move("toggle", ((int(rng.integers(H.m)), int(rng.integers(H.n))),))

    # drawing among swappable columns is the same as re-drawing the others
    weights = H.col_weights()
    swappable = np.flatnonzero((weights > 0) & (weights < H.m))
    if swappable.size == 0:
        raise MoveUnavailableError("no column has both a 1 and a 0 to swap")
    j = int(swappable[rng.integers(swappable.size)])
    ones = H.col_support[j]
    zeros = np.setdiff1d(np.arange(H.m), ones)
    r1 = int(ones[rng.integers(len(ones))])
    r0 = int(zeros[rng.integers(zeros.size)])
    return Move("column_swap", ((r1, j), (r0, j)))


def _is_feasible(H: ParityCheckMatrix) -> bool:
    return validity_violations(H) == (0, 0)


def repair_in_place(H: ParityCheckMatrix, rng: np.random.Generator,
                    targets: Optional[np.ndarray] = None, enforce_weights: bool = False) -> List[Tuple[int, int]]:
    toggles = []

    def flip(i: int, j: int) -> None:
        H.flip(i, j)
        toggles.append((i, j))

    for j in range(H.n):
        if not H.col_support[j]:
            for i in rng.choice(H.m, size=min(2, H.m), replace=False):
                flip(int(i), j)

    for i in range(H.m):
        if H.row_support[i]:
            continue
        under = [] if targets is None else [j for j in range(H.n) if H.col_weight(j) < targets[j]]
        j = under[rng.integers(len(under))] if under else int(rng.integers(H.n))
        flip(i, j)

    if enforce_weights and targets is not None:
        for j in range(H.n):
            target = max(1, min(int(targets[j]), H.m))
            while H.col_weight(j) < target:
                free = np.setdiff1d(np.arange(H.m), H.col_support[j])
                flip(int(free[rng.integers(free.size)]), j)
            while H.col_weight(j) > target:
                removable = [i for i in H.col_support[j] if H.row_weight(i) > 1]
                if not removable:
                    break
                flip(removable[rng.integers(len(removable))], j)
    return toggles


def repair(H: ParityCheckMatrix, rng: np.random.Generator, targets: Optional[Sequence[int]] = None,
           enforce_weights: bool = False) -> ParityCheckMatrix:
    """
    Restore feasibility on a copy of H:
      1. every all-zero column gets ones in min(2, m) random rows
      2. every all-zero row gets a one, in a column below its target when possible
      3. with `enforce_weights`, column weights are driven to their targets,
         removing ones only from rows that keep at least one other entry
    """
    repaired = H.copy()
    if targets is not None:
        targets = np.asarray(targets, dtype=np.int64)
    repair_in_place(repaired, rng, targets, enforce_weights)
    return repaired


def place_random_columns(n: int, m: int, targets: Sequence[int], rng: np.random.Generator) -> ParityCheckMatrix:
    """Each column gets min(target, m) ones in uniformly drawn distinct rows."""
    entries = np.zeros((m, n), dtype=np.uint8)
    for j, t in enumerate(targets):
        entries[rng.choice(m, size=min(int(t), m), replace=False), j] = 1
    return ParityCheckMatrix(entries)


def _undo(H: ParityCheckMatrix, toggles: Sequence[Tuple[int, int]]) -> None:
    for i, j in reversed(toggles):
        H.flip(i, j)


def run_tasa_trial(initial: ParityCheckMatrix, cfg: AnnealConfig, weights: EnergyWeights,
                   rng: np.random.Generator, seed: Optional[int] = None) -> TrialResult:
    targets = weights.resolved_targets(initial.n)
    enforce = cfg.move_mode == "column_swap"
    H = initial.copy()
    repair_invocations = 0
    if not _is_feasible(H):
        repair_in_place(H, rng, targets, enforce)
        repair_invocations += 1

    current = evaluate(H, weights).total
    best, best_H = current, H.copy()
    trace = []
    accepted = tunnels = 0

    for t in range(cfg.t_max):
        move = propose_move(H, cfg, rng)
        toggles = list(move.toggles)
        dE = apply_with_delta(H, toggles, weights, targets).total
        if not _is_feasible(H):
            repaired = repair_in_place(H, rng, targets, enforce)
            _undo(H, repaired)
            dE += apply_with_delta(H, repaired, weights, targets).total
            toggles.extend(repaired)
            repair_invocations += 1

        u = rng.random()
        if u < acceptance_probability(dE, t, cfg):
            current += dE
            accepted += 1
            if dE > 0 and u >= _metropolis(dE, temperature(t, cfg)):
                tunnels += 1
            if current < best:
                best, best_H = current, H.copy()
        else:
            _undo(H, toggles)
        trace.append(best)

    result = TrialResult(
        matrix=best_H,
        energy=evaluate(best_H, weights),
        energy_trace=trace,
        accepted_moves=accepted,
        tunnel_accepts=tunnels,
        repair_invocations=repair_invocations,
        seed=seed,
    )
    logger.info("TASA trial finished", {
        "seed": seed,
        "energy": result.energy.total,
        "accepted": accepted,
        "tunnel_accepts": tunnels,
        "repairs": repair_invocations,
    })
    return result


def local_refine(H: ParityCheckMatrix, weights: EnergyWeights, budget: int,
                 rng: Optional[np.random.Generator] = None) -> ParityCheckMatrix:
    """
    First-improvement hill climbing over single-bit flips in random order.
    Stops after `budget` accepted improvements or after a full pass in which
    no flip lowers the energy.
    """
    if budget < 0:
        raise UsageError("refine budget must be >= 0")
    rng = rng if rng is not None else np.random.default_rng(0)
    targets = weights.resolved_targets(H.n)
    H = H.copy()
    improvements = 0
    while improvements < budget:
        improved = False
        for idx in rng.permutation(H.m * H.n):
            i, j = divmod(int(idx), H.n)
            if apply_with_delta(H, [(i, j)], weights, targets).total < -IMPROVEMENT_EPS:
                improved = True
                improvements += 1
                if improvements >= budget:
                    break
            else:
                H.flip(i, j)
        if not improved:
            break
    return H


def _zero_lines_touched(H: ParityCheckMatrix, i: int, j: int) -> bool:
    return not H.row_support[i] or not H.col_support[j]


def rank_repair(H: ParityCheckMatrix, budget: int, rng: Optional[np.random.Generator] = None,
                target_rank: Optional[int] = None, swap_only: bool = False) -> Tuple[ParityCheckMatrix, int]:
    """
    Raise the GF(2) rank of H towards `target_rank` (default m). The first
    half of the budget tries weight-preserving swaps inside columns; the rest
    tries single toggles, fixing any emptied row or column on the spot. Only
    rank-increasing changes are kept. With `swap_only` the whole budget goes
    to swaps and column weights never change.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    target = H.m if target_rank is None else target_rank
    H = H.copy()
    rank = gf2_rank(H)
    swap_budget = budget if swap_only else budget // 2
    swap_cfg = AnnealConfig(move_mode="column_swap")

    attempts = 0
    while rank < target and attempts < swap_budget:
        attempts += 1
        try:
            move = propose_move(H, swap_cfg, rng)
        except MoveUnavailableError:
            break
        for i, j in move.toggles:
            H.flip(i, j)
        (r1, j), _ = move.toggles
        new_rank = gf2_rank(H)
        if new_rank > rank and H.row_support[r1]:
            rank = new_rank
        else:
            _undo(H, move.toggles)

    while rank < target and attempts < budget:
        attempts += 1
        i, j = int(rng.integers(H.m)), int(rng.integers(H.n))
        H.flip(i, j)
        toggles = [(i, j)]
        if _zero_lines_touched(H, i, j):
            toggles.extend(repair_in_place(H, rng))
        new_rank = gf2_rank(H)
        if new_rank > rank:
            rank = new_rank
        else:
            _undo(H, toggles)

    if rank < target:
        logger.warning("Rank repair stopped below target", {"rank": rank, "target": target, "budget": budget})
    return H, rank


def _resolve_targets(n: int, targets: Union[int, Sequence[int]]) -> List[int]:
    if isinstance(targets, (int, np.integer)):
        return [int(targets)] * n
    targets = [int(t) for t in targets]
    if len(targets) != n:
        raise UsageError(f"expected {n} column-weight targets, got {len(targets)}")
    return targets


def _trial_worker(args) -> TrialResult:
    index, n, m, targets, weights, cfg = args
    seed = cfg.seed + index
    rng = np.random.default_rng(seed)
    initial = place_random_columns(n, m, targets, rng)
    initial = repair(initial, rng, targets, enforce_weights=cfg.move_mode == "column_swap")
    return run_tasa_trial(initial, cfg, weights, rng, seed=seed)


def construct_hybrid(n: int, k: int, targets: Union[int, Sequence[int]], weights: EnergyWeights,
                     cfg: AnnealConfig, workers: int = 1) -> HybridResult:
    if not n > k >= 1:
        raise UsageError(f"need n > k >= 1, got n={n}, k={k}")
    m = n - k
    targets = _resolve_targets(n, targets)
    weights = weights.model_copy(update={"target_col_weights": targets})
    timings = {}

    start = time.perf_counter()
    jobs = [(idx, n, m, targets, weights, cfg) for idx in range(cfg.restarts)]
    if workers > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.restarts)) as pool:
            trials = list(pool.map(_trial_worker, jobs))
    else:
        trials = [_trial_worker(job) for job in jobs]
    best_idx = min(range(len(trials)), key=lambda idx: (trials[idx].energy.total, idx))
    timings["construct"] = time.perf_counter() - start

    start = time.perf_counter()
    refine_rng = np.random.default_rng(cfg.seed + cfg.restarts)
    refined = local_refine(trials[best_idx].matrix, weights, cfg.refine_budget, refine_rng)
    refined_energy = evaluate(refined, weights)
    timings["refine"] = time.perf_counter() - start

    start = time.perf_counter()
    repair_rng = np.random.default_rng(cfg.seed + cfg.restarts + 1)
    final, rank = rank_repair(refined, cfg.rank_repair_budget, repair_rng)
    timings["rank_repair"] = time.perf_counter() - start

    metrics = compute_metrics(
        final,
        block_size=weights.block_size if weights.alpha_b > 0 else None,
        trap42=weights.alpha_f > 0,
    )
    logger.info("Hybrid construction finished", {
        "n": n,
        "k": k,
        "best_trial": best_idx,
        "energy": refined_energy.total,
        "rank": rank,
        "c4": metrics.c4,
        "timings": timings,
    })
    return HybridResult(
        matrix=final,
        metrics=metrics,
        trials=trials,
        best_trial=best_idx,
        refined_energy=refined_energy,
        final_energy=evaluate(final, weights),
        rank=rank,
        timings=timings,
    )

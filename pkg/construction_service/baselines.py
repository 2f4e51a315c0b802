# construction_service/baselines.py
"""
Reference constructions: random placement, Progressive Edge Growth (PEG) and
a block-aware PEG that grows one reference column per block and derives the
rest of the block by cyclic row shifts.
"""
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from common_utils.errors import UsageError
from common_utils.logger.client import LoggerClient
from construction_service.annealer import place_random_columns, rank_repair, repair_in_place
from construction_service.gf2matrix import ParityCheckMatrix
from construction_service.graphmetrics import shift_support

logger = LoggerClient("baselines")


class PegConfig(BaseModel):
    n: int = Field(ge=2)
    k: int = Field(ge=1)
    target_col_weights: List[int]
    block_size: Optional[int] = Field(default=None, ge=1)
    seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _expand_scalar_target(cls, data):
        if isinstance(data, dict) and isinstance(data.get("target_col_weights"), int):
            data = dict(data, target_col_weights=[data["target_col_weights"]] * data.get("n", 0))
        return data

    @model_validator(mode="after")
    def _check_code(self):
        if not self.n > self.k:
            raise ValueError("n must exceed k")
        if len(self.target_col_weights) != self.n:
            raise ValueError(f"target_col_weights has length {len(self.target_col_weights)}, expected {self.n}")
        if any(d < 1 for d in self.target_col_weights):
            raise ValueError("column degrees must be >= 1")
        return self

    @property
    def m(self) -> int:
        return self.n - self.k


def construct_random(n: int, k: int, targets: Union[int, Sequence[int]], seed: int,
                     rank_repair_budget: int = 200) -> ParityCheckMatrix:
    """
    Random placement at the target column weights, then zero-row repair and
    the same rank repair used for annealed codes. A zero budget skips rank repair.
    """
    if not n > k >= 1:
        raise UsageError(f"need n > k >= 1, got n={n}, k={k}")
    if isinstance(targets, (int, np.integer)):
        targets = [int(targets)] * n
    rng = np.random.default_rng(seed)
    H = place_random_columns(n, n - k, targets, rng)
    repair_in_place(H, rng, np.asarray(targets))
    if rank_repair_budget > 0:
        H, _ = rank_repair(H, rank_repair_budget, rng)
    return H


class _PegGrowth:
    """Edge-by-edge Tanner graph growth with BFS depth tracking."""

    def __init__(self, m: int, n: int, rng: np.random.Generator):
        self.H = ParityCheckMatrix.zeros(m, n)
        self.check_degrees = np.zeros(m, dtype=np.int64)
        self.rng = rng

    def grow_edge(self, var: int, chk: int) -> None:
        self.H.flip(chk, var)
        self.check_degrees[chk] += 1

    def pick(self, candidates: Sequence[int]) -> int:
        candidates = np.asarray(candidates)
        degrees = self.check_degrees[candidates]
        lightest = candidates[degrees == degrees.min()]
        return int(lightest[self.rng.integers(lightest.size)])

    def bfs_candidates(self, var: int) -> List[int]:
        """
        Checks unreachable from `var` if the expansion stalls before covering
        all checks, otherwise the checks first reached at the deepest level.
        """
        H = self.H
        reached = set(H.col_support[var])
        frontier = list(reached)
        seen_vars = {var}
        while True:
            next_vars = {v for c in frontier for v in H.row_support[c] if v not in seen_vars}
            seen_vars |= next_vars
            level = {c for v in next_vars for c in H.col_support[v] if c not in reached}
            if not level:
                return [c for c in range(H.m) if c not in reached]
            if len(reached) + len(level) == H.m:
                return sorted(level)
            reached |= level
            frontier = list(level)

    def grow_column(self, var: int, degree: int) -> None:
        for edge in range(min(degree, self.H.m)):
            if edge == 0:
                chk = self.pick(np.arange(self.H.m))
            else:
                chk = self.pick(self.bfs_candidates(var))
            self.grow_edge(var, chk)


def _processing_order(degrees: Sequence[int]) -> List[int]:
    return sorted(range(len(degrees)), key=lambda j: (degrees[j], j))


def construct_peg(cfg: PegConfig) -> ParityCheckMatrix:
    growth = _PegGrowth(cfg.m, cfg.n, np.random.default_rng(cfg.seed))
    for var in _processing_order(cfg.target_col_weights):
        growth.grow_column(var, cfg.target_col_weights[var])
    logger.debug("PEG construction finished", {"n": cfg.n, "k": cfg.k, "seed": cfg.seed})
    return growth.H


def construct_block_peg(cfg: PegConfig) -> ParityCheckMatrix:
    b = cfg.block_size
    if b is None or cfg.n % b or cfg.m % b:
        raise UsageError(f"block size {b} must divide m = {cfg.m} and n = {cfg.n}")
    growth = _PegGrowth(cfg.m, cfg.n, np.random.default_rng(cfg.seed))
    references = list(range(0, cfg.n, b))
    degrees = [cfg.target_col_weights[j] for j in references]
    for pos in _processing_order(degrees):
        j0 = references[pos]
        growth.grow_column(j0, degrees[pos])
        # shifted images join the graph before the next reference column grows
        for d in range(1, b):
            for r in shift_support(growth.H.col_support[j0], d, b):
                growth.grow_edge(j0 + d, r)
    logger.debug("Block PEG construction finished", {"n": cfg.n, "k": cfg.k, "block_size": b, "seed": cfg.seed})
    return growth.H

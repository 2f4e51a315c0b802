# construction_service/energy.py
"""
Multi-term energy E(H) driving the annealer:

  E = α4·C4 + α6·C6 + αw·W + αd·D + αv·V + αf·F + αb·B

W is the L1 column-weight deviation from targets, D the sum of reciprocal
nonzero column weights, V the number of all-zero rows plus all-zero columns,
F the (4,2) trapping-set count and B the block deviation.
"""
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from common_utils.errors import UsageError
from common_utils.logger.client import LoggerClient
from construction_service import graphmetrics
from construction_service.gf2matrix import ParityCheckMatrix, validity_violations

logger = LoggerClient("energy")

# α_v ≫ α4 ≫ α6, "≫" read as at least this ratio
DOMINANCE_RATIO = 10.0


class EnergyWeights(BaseModel):
    alpha4: float = Field(default=10.0, ge=0)
    alpha6: float = Field(default=0.1, ge=0)
    alpha_w: float = Field(default=2.0, ge=0)
    alpha_d: float = Field(default=0.5, ge=0)
    alpha_v: float = Field(default=1000.0, ge=0)
    alpha_f: float = Field(default=0.0, ge=0)
    alpha_b: float = Field(default=0.0, ge=0)
    block_size: Optional[int] = Field(default=None, ge=1)
    target_col_weight: Optional[int] = Field(default=None, ge=0)
    target_col_weights: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_terms(self):
        if self.alpha_b > 0 and self.block_size is None:
            raise ValueError("alpha_b > 0 requires block_size")
        if self.target_col_weights is not None and any(t < 0 for t in self.target_col_weights):
            raise ValueError("target column weights must be nonnegative")
        return self

    @classmethod
    def for_code(cls, n: int, targets, **overrides) -> "EnergyWeights":
        """Weights with per-column targets resolved for a code of length n."""
        if isinstance(targets, int):
            targets = [targets] * n
        return cls(target_col_weights=list(targets), **overrides)

    def resolved_targets(self, n: int) -> np.ndarray:
        if self.target_col_weights is not None:
            targets = np.asarray(self.target_col_weights, dtype=np.int64)
        elif self.target_col_weight is not None:
            targets = np.full(n, self.target_col_weight, dtype=np.int64)
        else:
            raise UsageError("energy weights carry no column-weight targets")
        if targets.shape != (n,):
            raise UsageError(f"target_col_weights has length {targets.shape[0]}, expected n = {n}")
        return targets


class EnergyBreakdown(BaseModel):
    total: float
    c4_term: float = 0.0
    c6_term: float = 0.0
    weight_term: float = 0.0
    degree_term: float = 0.0
    validity_term: float = 0.0
    forbidden_term: float = 0.0
    block_term: float = 0.0

    @classmethod
    def from_terms(cls, **terms: float) -> "EnergyBreakdown":
        return cls(total=float(sum(terms.values())), **terms)

    def components(self) -> dict:
        return self.model_dump(exclude={"total"})


class Move(NamedTuple):
    """A proposal as the ordered list of entries it flips."""
    kind: str
    toggles: Tuple[Tuple[int, int], ...]


def weight_ordering_warnings(w: EnergyWeights) -> List[str]:
    """Lint the α_v ≫ α4 ≫ α6 ordering; returns messages, never raises."""
    warnings = []
    if w.alpha_v < DOMINANCE_RATIO * w.alpha4:
        warnings.append(f"alpha_v ({w.alpha_v}) is not >> alpha4 ({w.alpha4})")
    if w.alpha4 < DOMINANCE_RATIO * w.alpha6:
        warnings.append(f"alpha4 ({w.alpha4}) is not >> alpha6 ({w.alpha6})")
    for message in warnings:
        logger.warning("Energy weight ordering", {"lint": message})
    return warnings


def _reciprocal(weight: int) -> float:
    return 1.0 / weight if weight > 0 else 0.0


def _check_block_term(H: ParityCheckMatrix, w: EnergyWeights) -> None:
    if w.alpha_b > 0:
        b = w.block_size
        if b is None or H.n % b or H.m % b:
            raise UsageError(f"block term needs a block size dividing m = {H.m} and n = {H.n}, got {b}")


def evaluate(H: ParityCheckMatrix, w: EnergyWeights) -> EnergyBreakdown:
    targets = w.resolved_targets(H.n)
    _check_block_term(H, w)
    col_w = H.col_weights()
    zero_rows, zero_cols = validity_violations(H)
    return EnergyBreakdown.from_terms(
        c4_term=w.alpha4 * graphmetrics.count_4_cycles(H) if w.alpha4 else 0.0,
        c6_term=w.alpha6 * graphmetrics.count_6_cycles(H, "exact") if w.alpha6 else 0.0,
        weight_term=w.alpha_w * float(np.abs(col_w - targets).sum()),
        degree_term=w.alpha_d * float(sum(_reciprocal(int(c)) for c in col_w)),
        validity_term=w.alpha_v * float(zero_rows + zero_cols),
        forbidden_term=w.alpha_f * graphmetrics.count_trapping_sets_4_2(H) if w.alpha_f else 0.0,
        block_term=w.alpha_b * graphmetrics.block_deviation(H, w.block_size) if w.alpha_b else 0.0,
    )


def apply_with_delta(H: ParityCheckMatrix, toggles: Sequence[Tuple[int, int]], w: EnergyWeights,
                     targets: Optional[np.ndarray] = None) -> EnergyBreakdown:
    """
    Flip `toggles` on H in order and return the per-term energy change.
    C4, W, D and V are updated incrementally; C6 through the touched row,
    trapping sets through the touched column and the touched column block are
    recounted before and after each flip.
    """
    if targets is None:
        targets = w.resolved_targets(H.n)
    c4 = c6 = wt = dg = vd = fb = bk = 0.0
    b = w.block_size
    for i, j in toggles:
        adding = not H.entries[i, j]
        col_before = H.col_weight(j)
        row_before = H.row_weight(i)

        if w.alpha4:
            partners = [r for r in H.col_support[j] if r != i]
            if partners:
                shared = H.entries[partners].astype(np.int64) @ H.entries[i].astype(np.int64)
                c4 += float(shared.sum()) if adding else -float((shared - 1).sum())
        c6_before = graphmetrics.c6_through_row(H, i) if w.alpha6 else 0
        trap_before = graphmetrics.trapping_sets_through_column(H, j) if w.alpha_f else 0
        block_before = graphmetrics.block_deviation_of(H, b, j // b) if w.alpha_b else 0

        H.flip(i, j)

        col_after = col_before + (1 if adding else -1)
        row_after = row_before + (1 if adding else -1)
        if w.alpha6:
            c6 += graphmetrics.c6_through_row(H, i) - c6_before
        if w.alpha_f:
            fb += graphmetrics.trapping_sets_through_column(H, j) - trap_before
        if w.alpha_b:
            bk += graphmetrics.block_deviation_of(H, b, j // b) - block_before
        t = int(targets[j])
        wt += abs(col_after - t) - abs(col_before - t)
        dg += _reciprocal(col_after) - _reciprocal(col_before)
        vd += (col_after == 0) - (col_before == 0) + (row_after == 0) - (row_before == 0)

    return EnergyBreakdown.from_terms(
        c4_term=w.alpha4 * c4,
        c6_term=w.alpha6 * c6,
        weight_term=w.alpha_w * wt,
        degree_term=w.alpha_d * dg,
        validity_term=w.alpha_v * vd,
        forbidden_term=w.alpha_f * fb,
        block_term=w.alpha_b * bk,
    )


def evaluate_delta(H: ParityCheckMatrix, w: EnergyWeights, move: Move) -> EnergyBreakdown:
    """Energy change of applying `move` to H; H is not modified."""
    _check_block_term(H, w)
    for i, j in move.toggles:
        if not (0 <= i < H.m and 0 <= j < H.n):
            raise UsageError(f"move entry ({i}, {j}) out of range for {H.m}x{H.n} matrix")
    return apply_with_delta(H.copy(), move.toggles, w)

# construction_service/graphmetrics.py
"""
Exact structural metrics on the Tanner graph of a parity-check matrix.

Cycle counts work from the check-overlap matrix O = H·Hᵀ (O[i, j] is the
number of variables shared by checks i and j):

  C4 = Σ_{i<j} C(O_ij, 2)
  C6 = Σ_{i<j<k} O_ij·O_jk·O_ki − T_ijk·(O_ij + O_jk + O_ki − 2)

where T_ijk counts variables shared by all three checks. The second term
removes the closed walks whose three variables are not pairwise distinct.
"""
from collections import deque
from functools import lru_cache
from itertools import combinations
from typing import Dict, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from common_utils.errors import UsageError
from common_utils.logger.client import LoggerClient
from construction_service.gf2matrix import ParityCheckMatrix, gf2_rank

logger = LoggerClient("graphmetrics")

# Exact 6-cycle enumeration up to this blocklength, sampling above it
EXACT_C6_MAX_N = 96
DEFAULT_C6_SAMPLES = 20000

_POPCOUNT = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)


class CodeMetrics(BaseModel):
    n: int
    m: int
    c4: int = Field(ge=0)
    c6: Union[int, float] = Field(ge=0)
    c6_exact: bool
    trap_42: Optional[int] = Field(default=None, ge=0)
    block_deviation: Optional[int] = Field(default=None, ge=0)
    girth: Optional[int] = None
    rank: int = Field(ge=0)
    col_weight_histogram: Dict[int, int] = Field(default_factory=dict)
    row_weight_histogram: Dict[int, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_girth(self):
        if self.girth is not None and (self.girth < 4 or self.girth % 2):
            raise ValueError("girth of a Tanner graph is even and at least 4")
        if (self.c4 > 0) != (self.girth == 4):
            raise ValueError("c4 > 0 must coincide with girth 4")
        return self


def overlap_matrix(H: ParityCheckMatrix) -> np.ndarray:
    """Check-by-check shared-variable counts with a zeroed diagonal."""
    E = H.entries.astype(np.int64)
    O = E @ E.T
    np.fill_diagonal(O, 0)
    return O


def count_4_cycles(H: ParityCheckMatrix) -> int:
    O = overlap_matrix(H)
    return int((O * (O - 1)).sum() // 4)


@lru_cache(maxsize=16)
def _check_triples(m: int) -> np.ndarray:
    if m < 3:
        return np.zeros((0, 3), dtype=np.int64)
    return np.array(list(combinations(range(m), 3)), dtype=np.int64)


def _triple_cycle_counts(bits: np.ndarray, O: np.ndarray, triples: np.ndarray) -> np.ndarray:
    I, J, K = triples[:, 0], triples[:, 1], triples[:, 2]
    a, b, c = O[I, J], O[J, K], O[K, I]
    shared = (bits[I] & bits[J] & bits[K]).sum(axis=1, dtype=np.int64)
    return a * b * c - shared * (a + b + c - 2)


def count_6_cycles(
    H: ParityCheckMatrix,
    mode: Literal["exact", "sampled"] = "exact",
    sample_count: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Number of simple 6-cycles. In sampled mode, `sample_count` check triples
    are drawn uniformly without replacement and the total is scaled up, which
    gives an unbiased estimate (exact when every triple is drawn).
    """
    O = overlap_matrix(H)
    triples = _check_triples(H.m)
    if mode == "exact":
        return int(_triple_cycle_counts(H.entries, O, triples).sum())
    if mode != "sampled":
        raise UsageError(f"unknown 6-cycle mode {mode!r}")
    if sample_count is None or sample_count < 1:
        raise UsageError("sampled 6-cycle counting requires sample_count >= 1")
    total = len(triples)
    if total == 0:
        return 0.0
    rng = rng if rng is not None else np.random.default_rng(0)
    size = min(sample_count, total)
    chosen = triples[rng.choice(total, size=size, replace=False)]
    return float(_triple_cycle_counts(H.entries, O, chosen).sum()) * total / size


def c6_through_row(H: ParityCheckMatrix, i: int) -> int:
    """6-cycles whose check triple contains row i."""
    E = H.entries.astype(np.int64)
    O = E @ E.T
    np.fill_diagonal(O, 0)
    oi = O[i]
    shared = (E * E[i]) @ E.T
    counts = np.outer(oi, oi) * O - shared * (oi[:, None] + oi[None, :] + O - 2)
    keep = np.ones(H.m, dtype=bool)
    keep[i] = False
    counts = counts[np.ix_(keep, keep)]
    return int(np.triu(counts, k=1).sum())


# trapping sets

def _packed_columns(H: ParityCheckMatrix) -> np.ndarray:
    """Each column's check neighbourhood as packed bytes, shape (n, ceil(m/8))."""
    return np.packbits(H.entries.T, axis=1)


@lru_cache(maxsize=8)
def _pair_table(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    pairs = np.array(list(combinations(range(n), 2)), dtype=np.int64).reshape(-1, 2)
    # pairs are ordered by first index; offsets[c] is the first pair starting at c
    offsets = np.searchsorted(pairs[:, 0], np.arange(n + 1))
    return pairs[:, 0], pairs[:, 1], offsets


def _odd_two(xor_rows: np.ndarray) -> int:
    return int((_POPCOUNT[xor_rows].sum(axis=1, dtype=np.int64) == 2).sum())


def count_trapping_sets_4_2(H: ParityCheckMatrix) -> int:
    """
    (4,2) trapping sets: 4-variable subsets whose induced subgraph leaves
    exactly two checks with odd degree. Exhaustive over all C(n,4) subsets;
    the odd-degree checks of a subset are the XOR of its column neighbourhoods.
    """
    if H.n < 4:
        raise UsageError("(4,2) trapping sets need n >= 4")
    cols = _packed_columns(H)
    first, second, offsets = _pair_table(H.n)
    pair_xor = cols[first] ^ cols[second]
    total = 0
    for p in range(len(first)):
        b = second[p]
        start = offsets[b + 1]
        if start >= len(first):
            continue
        total += _odd_two(pair_xor[start:] ^ pair_xor[p])
    return total


@lru_cache(maxsize=8)
def _triples_of(n: int) -> np.ndarray:
    return np.array(list(combinations(range(n), 3)), dtype=np.int64).reshape(-1, 3)


def trapping_sets_through_column(H: ParityCheckMatrix, j: int) -> int:
    """(4,2) trapping sets that contain variable j."""
    if H.n < 4:
        return 0
    cols = _packed_columns(H)
    others = _triples_of(H.n - 1)
    others = others + (others >= j)
    xor = cols[j] ^ cols[others[:, 0]] ^ cols[others[:, 1]] ^ cols[others[:, 2]]
    return _odd_two(xor)


# block structure

def _check_block_size(H: ParityCheckMatrix, b: int) -> None:
    if b < 1 or H.n % b or H.m % b:
        raise UsageError(f"block size {b} must divide m = {H.m} and n = {H.n}")


@lru_cache(maxsize=32)
def _shift_sources(m: int, b: int) -> np.ndarray:
    """sources[d][r] is the row that shift_d maps onto row r."""
    rows = np.arange(m)
    base = (rows // b) * b
    return np.stack([base + ((rows % b) - d) % b for d in range(b)])


def block_deviation_of(H: ParityCheckMatrix, b: int, block: int) -> int:
    """Deviation contributed by column block `block`."""
    sources = _shift_sources(H.m, b)
    j0 = block * b
    reference = H.entries[:, j0]
    members = H.entries[:, j0 + 1:j0 + b].T
    shifted = reference[sources[1:b]]
    return int((members != shifted).sum())


def block_deviation(H: ParityCheckMatrix, b: int) -> int:
    """
    Σ over column blocks and offsets d of |support(j0+d) Δ shift_d(support(j0))|,
    where shift_d rotates a row by d inside its b-row block. Zero exactly for
    block-circulant matrices built from b×b circulants.
    """
    _check_block_size(H, b)
    return sum(block_deviation_of(H, b, c) for c in range(H.n // b))


def shift_support(support, d: int, b: int):
    return sorted((r // b) * b + ((r % b) + d) % b for r in support)


def girth(H: ParityCheckMatrix) -> Optional[int]:
    """Shortest cycle length by BFS from every variable node; None for forests."""
    n = H.n
    best = None
    for start in range(n):
        # nodes: variables 0..n-1, checks n..n+m-1
        dist = {start: 0}
        parent = {start: -1}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            if best is not None and 2 * dist[u] + 1 >= best:
                break
            if u < n:
                neighbours = [n + i for i in H.col_support[u]]
            else:
                neighbours = H.row_support[u - n]
            for v in neighbours:
                if v == parent[u]:
                    continue
                if v in dist:
                    length = dist[u] + dist[v] + 1
                    if best is None or length < best:
                        best = length
                else:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    queue.append(v)
        if best == 4:
            break
    return best


def compute_metrics(
    H: ParityCheckMatrix,
    block_size: Optional[int] = None,
    trap42: bool = False,
    c6_mode: Literal["auto", "exact", "sampled"] = "auto",
    sample_count: int = DEFAULT_C6_SAMPLES,
    seed: int = 0,
) -> CodeMetrics:
    if c6_mode == "auto":
        c6_mode = "exact" if H.n <= EXACT_C6_MAX_N else "sampled"
    if c6_mode == "exact":
        c6 = count_6_cycles(H, "exact")
    else:
        c6 = count_6_cycles(H, "sampled", sample_count=sample_count, rng=np.random.default_rng(seed))
    col_hist = np.bincount(H.col_weights(), minlength=1)
    row_hist = np.bincount(H.row_weights(), minlength=1)
    metrics = CodeMetrics(
        n=H.n,
        m=H.m,
        c4=count_4_cycles(H),
        c6=c6,
        c6_exact=c6_mode == "exact",
        trap_42=count_trapping_sets_4_2(H) if trap42 else None,
        block_deviation=block_deviation(H, block_size) if block_size else None,
        girth=girth(H),
        rank=gf2_rank(H),
        col_weight_histogram={int(w): int(c) for w, c in enumerate(col_hist) if c},
        row_weight_histogram={int(w): int(c) for w, c in enumerate(row_hist) if c},
    )
    logger.debug("Metrics computed", {"n": H.n, "m": H.m, "c4": metrics.c4, "c6": metrics.c6})
    return metrics

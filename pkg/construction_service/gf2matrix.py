# construction_service/gf2matrix.py
"""
Binary parity-check matrix representation, GF(2) linear algebra and alist I/O.

The matrix keeps a dense 0/1 array for O(1) entry tests next to sorted
per-row and per-column support lists for sparse iteration. Both views are
updated together by `ParityCheckMatrix.flip`.
"""
import io
import os
from bisect import bisect_left, insort
from typing import List, Sequence, TextIO, Tuple, Union

import numpy as np
from pydantic import BaseModel, model_validator

from common_utils.errors import AlistParseError, UsageError


class ParityCheckMatrix:
    """m×n binary matrix with consistent row/column support lists."""

    __slots__ = ("entries", "row_support", "col_support")

    def __init__(self, entries: np.ndarray):
        entries = np.asarray(entries)
        if entries.ndim != 2:
            raise UsageError(f"parity-check matrix must be 2-D, got shape {entries.shape}")
        if entries.size and not np.isin(entries, (0, 1)).all():
            raise UsageError("parity-check matrix entries must be 0 or 1")
        self.entries = np.ascontiguousarray(entries, dtype=np.uint8)
        self.row_support, self.col_support = _supports_of(self.entries)

    @classmethod
    def zeros(cls, m: int, n: int) -> "ParityCheckMatrix":
        return cls(np.zeros((m, n), dtype=np.uint8))

    @classmethod
    def identity(cls, n: int) -> "ParityCheckMatrix":
        return cls(np.eye(n, dtype=np.uint8))

    @classmethod
    def from_dense(cls, rows: Union[np.ndarray, Sequence[Sequence[int]]]) -> "ParityCheckMatrix":
        return cls(np.asarray(rows, dtype=np.uint8))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def k(self) -> int:
        return self.n - self.m

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def copy(self) -> "ParityCheckMatrix":
        clone = object.__new__(ParityCheckMatrix)
        clone.entries = self.entries.copy()
        clone.row_support = [list(r) for r in self.row_support]
        clone.col_support = [list(c) for c in self.col_support]
        return clone

    def to_dense(self) -> np.ndarray:
        return self.entries.copy()

    def col_weights(self) -> np.ndarray:
        return np.array([len(c) for c in self.col_support], dtype=np.int64)

    def row_weights(self) -> np.ndarray:
        return np.array([len(r) for r in self.row_support], dtype=np.int64)

    def col_weight(self, j: int) -> int:
        return len(self.col_support[j])

    def row_weight(self, i: int) -> int:
        return len(self.row_support[i])

    def flip(self, i: int, j: int) -> "ParityCheckMatrix":
        """Toggle entry (i, j) in place, keeping both support lists sorted."""
        if not (0 <= i < self.m and 0 <= j < self.n):
            raise UsageError(f"index ({i}, {j}) out of range for {self.m}x{self.n} matrix")
        if self.entries[i, j]:
            self.entries[i, j] = 0
            row = self.row_support[i]
            del row[bisect_left(row, j)]
            col = self.col_support[j]
            del col[bisect_left(col, i)]
        else:
            self.entries[i, j] = 1
            insort(self.row_support[i], j)
            insort(self.col_support[j], i)
        return self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.entries, other.entries)

    def __repr__(self) -> str:
        return f"ParityCheckMatrix(m={self.m}, n={self.n}, edges={int(self.entries.sum())})"


def _supports_of(entries: np.ndarray) -> Tuple[List[List[int]], List[List[int]]]:
    rows = [np.flatnonzero(r).tolist() for r in entries]
    cols = [np.flatnonzero(c).tolist() for c in entries.T]
    return rows, cols


def recompute_supports(H: ParityCheckMatrix) -> Tuple[List[List[int]], List[List[int]]]:
    """Support lists derived from scratch from the dense entries."""
    return _supports_of(H.entries)


class DegreeProfile(BaseModel):
    col_weights: List[int]
    row_weights: List[int]
    target_col_weights: List[int]

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.target_col_weights) != len(self.col_weights):
            raise ValueError("target_col_weights length must equal n")
        return self


def degree_profile(H: ParityCheckMatrix, targets: Sequence[int]) -> DegreeProfile:
    return DegreeProfile(
        col_weights=H.col_weights().tolist(),
        row_weights=H.row_weights().tolist(),
        target_col_weights=[int(t) for t in targets],
    )


def toggle(H: ParityCheckMatrix, i: int, j: int) -> ParityCheckMatrix:
    """Return a copy of H with entry (i, j) flipped; H itself is untouched."""
    if not (0 <= i < H.m and 0 <= j < H.n):
        raise UsageError(f"index ({i}, {j}) out of range for {H.m}x{H.n} matrix")
    return H.copy().flip(i, j)


def validity_violations(H: ParityCheckMatrix) -> Tuple[int, int]:
    """(all-zero row count, all-zero column count)"""
    zero_rows = sum(1 for r in H.row_support if not r)
    zero_cols = sum(1 for c in H.col_support if not c)
    return zero_rows, zero_cols


def _packed_rows(entries: np.ndarray) -> List[int]:
    packed = np.packbits(entries, axis=1)
    return [int.from_bytes(row.tobytes(), "big") for row in packed]


def gf2_rank(H: Union[ParityCheckMatrix, np.ndarray]) -> int:
    """Rank over GF(2) by elimination on word-packed rows."""
    entries = H.entries if isinstance(H, ParityCheckMatrix) else np.asarray(H, dtype=np.uint8)
    basis = {}
    for row in _packed_rows(entries):
        while row:
            pivot = row.bit_length() - 1
            if pivot in basis:
                row ^= basis[pivot]
            else:
                basis[pivot] = row
                break
    return len(basis)


def _rref(entries: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    R = entries.astype(np.uint8).copy()
    m, n = R.shape
    pivots = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        candidates = np.flatnonzero(R[row:, col])
        if candidates.size == 0:
            continue
        p = row + candidates[0]
        if p != row:
            R[[row, p]] = R[[p, row]]
        others = np.flatnonzero(R[:, col])
        others = others[others != row]
        R[others] ^= R[row]
        pivots.append(col)
        row += 1
    return R[:row], pivots


class SystematicEncoder:
    """
    Encoder for a full-rank H. Information bits occupy the non-pivot columns of
    the reduced row-echelon form; parity bits are solved on the pivot columns.
    """

    def __init__(self, H: ParityCheckMatrix):
        rank = gf2_rank(H)
        if rank < H.m:
            raise UsageError(f"systematic encoding requires full rank: rank {rank} < m = {H.m}")
        R, pivots = _rref(H.entries)
        self.n = H.n
        self.parity_positions = np.array(pivots, dtype=np.int64)
        self.info_positions = np.array(sorted(set(range(H.n)) - set(pivots)), dtype=np.int64)
        self._parity_map = R[:, self.info_positions].astype(np.int64)

    @property
    def k(self) -> int:
        return len(self.info_positions)

    def encode(self, message: np.ndarray) -> np.ndarray:
        message = np.asarray(message, dtype=np.int64)
        if message.shape != (self.k,):
            raise UsageError(f"message length {message.shape} does not match k = {self.k}")
        codeword = np.zeros(self.n, dtype=np.uint8)
        codeword[self.info_positions] = message
        codeword[self.parity_positions] = (self._parity_map @ message) % 2
        return codeword


def systematic_encoder(H: ParityCheckMatrix) -> SystematicEncoder:
    return SystematicEncoder(H)


def syndrome(H: ParityCheckMatrix, word: np.ndarray) -> np.ndarray:
    return (H.entries.astype(np.int64) @ np.asarray(word, dtype=np.int64)) % 2


# alist I/O

def write_alist(H: ParityCheckMatrix, destination: Union[str, os.PathLike, TextIO]) -> None:
    """
    Write H in alist layout: "n m", "max_col_weight max_row_weight", column
    weights, row weights, then 1-indexed zero-padded column and row lists.
    A list that would be empty (maximum weight 0) is written as a single 0.
    """
    col_w = H.col_weights()
    row_w = H.row_weights()
    max_col = int(col_w.max()) if H.n else 0
    max_row = int(row_w.max()) if H.m else 0
    lines = [
        f"{H.n} {H.m}",
        f"{max_col} {max_row}",
        " ".join(str(int(w)) for w in col_w),
        " ".join(str(int(w)) for w in row_w),
    ]
    for support in H.col_support:
        padded = [i + 1 for i in support] + [0] * (max_col - len(support)) or [0]
        lines.append(" ".join(str(v) for v in padded))
    for support in H.row_support:
        padded = [j + 1 for j in support] + [0] * (max_row - len(support)) or [0]
        lines.append(" ".join(str(v) for v in padded))
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _int_tokens(line: str, line_no: int) -> List[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        raise AlistParseError(line_no, f"non-integer token in {line.strip()!r}")


def read_alist(source: Union[str, os.PathLike, TextIO]) -> ParityCheckMatrix:
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as f:
            text = f.read()
    numbered = [(no, line) for no, line in enumerate(text.splitlines(), start=1) if line.strip()]

    def take(index: int, what: str) -> Tuple[int, List[int]]:
        if index >= len(numbered):
            last = numbered[-1][0] if numbered else 0
            raise AlistParseError(last + 1, f"unexpected end of file, expected {what}")
        no, line = numbered[index]
        return no, _int_tokens(line, no)

    no, header = take(0, "header 'n m'")
    if len(header) != 2 or header[0] <= 0 or header[1] <= 0:
        raise AlistParseError(no, "malformed header, expected two positive integers 'n m'")
    n, m = header

    no, maxima = take(1, "'max_col_weight max_row_weight'")
    if len(maxima) != 2:
        raise AlistParseError(no, "expected 'max_col_weight max_row_weight'")
    max_col, max_row = maxima

    no, col_w = take(2, "column weights")
    if len(col_w) != n:
        raise AlistParseError(no, f"declared n={n} but listed {len(col_w)} column weights")
    if any(w < 0 or w > m for w in col_w) or (col_w and max(col_w) != max_col):
        raise AlistParseError(no, "column weights inconsistent with header")

    no, row_w = take(3, "row weights")
    if len(row_w) != m:
        raise AlistParseError(no, f"declared m={m} but listed {len(row_w)} row weights")
    if any(w < 0 or w > n for w in row_w) or (row_w and max(row_w) != max_row):
        raise AlistParseError(no, "row weights inconsistent with header")

    entries = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        no, values = take(4 + j, f"column list {j + 1}")
        support = [v for v in values if v != 0]
        if any(v < 1 or v > m for v in support):
            raise AlistParseError(no, f"row index out of range 1..{m}")
        if len(values) > max(max_col, 1) or len(set(support)) != len(support):
            raise AlistParseError(no, "malformed column list")
        if len(support) != col_w[j]:
            raise AlistParseError(no, f"column {j + 1} lists {len(support)} entries, weight says {col_w[j]}")
        entries[[v - 1 for v in support], j] = 1

    for i in range(m):
        no, values = take(4 + n + i, f"row list {i + 1}")
        support = [v for v in values if v != 0]
        if any(v < 1 or v > n for v in support):
            raise AlistParseError(no, f"column index out of range 1..{n}")
        if len(support) != row_w[i]:
            raise AlistParseError(no, f"row {i + 1} lists {len(support)} entries, weight says {row_w[i]}")
        if sorted(v - 1 for v in support) != np.flatnonzero(entries[i]).tolist():
            raise AlistParseError(no, f"row {i + 1} disagrees with the column lists")

    if len(numbered) > 4 + n + m:
        raise AlistParseError(numbered[4 + n + m][0], "trailing content after row lists")
    return ParityCheckMatrix(entries)


def alist_text(H: ParityCheckMatrix) -> str:
    buffer = io.StringIO()
    write_alist(H, buffer)
    return buffer.getvalue()

# test_gf2matrix.py
import io

import numpy as np
import pytest

from common_utils.errors import AlistParseError, UsageError
from construction_service.gf2matrix import (
    ParityCheckMatrix,
    alist_text,
    degree_profile,
    gf2_rank,
    read_alist,
    recompute_supports,
    syndrome,
    systematic_encoder,
    toggle,
    validity_violations,
    write_alist,
)


def rank_reversed_pivots(entries):
    """Independent elimination: columns scanned right to left, pivot row taken from the bottom."""
    A = np.array(entries, dtype=np.uint8) % 2
    m, n = A.shape
    rank = 0
    remaining = list(range(m))
    for col in reversed(range(n)):
        pivot = next((r for r in reversed(remaining) if A[r, col]), None)
        if pivot is None:
            continue
        remaining.remove(pivot)
        for r in remaining:
            if A[r, col]:
                A[r] ^= A[pivot]
        rank += 1
    return rank


def random_matrix(rng, m, n, density=0.4):
    return ParityCheckMatrix((rng.random((m, n)) < density).astype(np.uint8))


def test_rank_identity():
    """Identity is full rank"""
    assert gf2_rank(ParityCheckMatrix.identity(4)) == 4


def test_rank_duplicate_row():
    """A duplicated row does not add rank"""
    H = ParityCheckMatrix.from_dense([[1, 0, 1, 1], [0, 1, 1, 0], [0, 1, 1, 0]])
    assert gf2_rank(H) == 2


def test_rank_matches_reversed_elimination():
    """Packed-row rank agrees with an elimination using the opposite pivot order"""
    rng = np.random.default_rng(11)
    for _ in range(30):
        H = random_matrix(rng, 10, 20)
        assert gf2_rank(H) == rank_reversed_pivots(H.entries)


def test_rank_bounds_and_row_permutation():
    rng = np.random.default_rng(5)
    for _ in range(20):
        H = random_matrix(rng, 8, 12, density=0.3)
        r = gf2_rank(H)
        assert 0 <= r <= min(H.m, H.n)
        assert gf2_rank(H.entries[rng.permutation(H.m)]) == r


def test_rank_leaves_input_untouched():
    H = ParityCheckMatrix.from_dense([[1, 1, 0], [1, 1, 0]])
    before = H.to_dense()
    gf2_rank(H)
    assert np.array_equal(H.entries, before)


def test_toggle_zero_matrix():
    """Toggling a zero matrix sets exactly that entry"""
    H = toggle(ParityCheckMatrix.zeros(3, 4), 0, 0)
    expected = np.zeros((3, 4), dtype=np.uint8)
    expected[0, 0] = 1
    assert np.array_equal(H.entries, expected)
    assert H.col_support[0] == [0]
    assert H.row_support[0] == [0]


def test_toggle_is_involution():
    H = ParityCheckMatrix.from_dense([[1, 0, 1], [0, 1, 1]])
    assert toggle(toggle(H, 1, 2), 1, 2) == H


def test_toggle_returns_copy():
    H = ParityCheckMatrix.zeros(2, 3)
    toggle(H, 1, 1)
    assert H.entries.sum() == 0


def test_support_lists_match_recompute_after_toggles():
    """Incremental support lists equal a from-scratch recompute after many flips"""
    rng = np.random.default_rng(3)
    H = random_matrix(rng, 6, 10)
    for _ in range(500):
        H.flip(int(rng.integers(6)), int(rng.integers(10)))
    rows, cols = recompute_supports(H)
    assert H.row_support == rows
    assert H.col_support == cols
    assert all(a < b for c in H.col_support for a, b in zip(c, c[1:]))


def test_toggle_out_of_range():
    H = ParityCheckMatrix.zeros(2, 3)
    with pytest.raises(UsageError):
        toggle(H, 2, 0)
    with pytest.raises(UsageError):
        toggle(H, 0, -1)


def test_rejects_non_binary_entries():
    with pytest.raises(UsageError):
        ParityCheckMatrix(np.array([[0, 2], [1, 0]]))


def test_validity_violations():
    assert validity_violations(ParityCheckMatrix.identity(4)) == (0, 0)
    assert validity_violations(ParityCheckMatrix.zeros(3, 4)) == (3, 4)
    H = ParityCheckMatrix.from_dense([[1, 0, 1], [1, 0, 1]])
    assert validity_violations(H) == (0, 1)


def test_degree_profile():
    H = ParityCheckMatrix.from_dense([[1, 1, 0], [0, 1, 1]])
    profile = degree_profile(H, [1, 2, 1])
    assert profile.col_weights == [1, 2, 1]
    assert profile.row_weights == [2, 2]
    with pytest.raises(ValueError):
        degree_profile(H, [1, 2])


def test_alist_layout():
    """Exact alist text, zero-padded column and row lists"""
    H = ParityCheckMatrix.from_dense([[1, 1, 0], [0, 1, 1]])
    assert alist_text(H) == (
        "3 2\n"
        "2 2\n"
        "1 2 1\n"
        "2 2\n"
        "1 0\n"
        "1 2\n"
        "2 0\n"
        "1 2\n"
        "2 3\n"
    )


def test_alist_round_trip_small():
    H = ParityCheckMatrix.from_dense([[1, 0, 1], [0, 1, 1]])
    assert read_alist(io.StringIO(alist_text(H))) == H


def test_alist_round_trip_all_zero():
    H = ParityCheckMatrix.zeros(3, 4)
    text = alist_text(H)
    assert text.splitlines()[4:] == ["0"] * 7
    assert read_alist(io.StringIO(text)) == H


def test_alist_round_trip_random_file(tmp_path):
    rng = np.random.default_rng(21)
    for trial in range(5):
        H = random_matrix(rng, 32, 64, density=0.1)
        path = tmp_path / f"code-{trial}.alist"
        write_alist(H, path)
        assert read_alist(path) == H


def test_alist_wrong_column_weight_count():
    """Declaring n=4 with five column weights fails on line 3"""
    text = "4 2\n2 2\n1 1 1 1 1\n2 2\n1\n2\n1\n2\n1 3\n2 4\n"
    with pytest.raises(AlistParseError) as exc:
        read_alist(io.StringIO(text))
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)
    assert exc.value.exit_code == 2


def test_alist_index_out_of_range():
    text = "2 1\n1 2\n1 1\n2\n1\n3\n1 2\n"
    with pytest.raises(AlistParseError) as exc:
        read_alist(io.StringIO(text))
    assert exc.value.line == 6


def test_alist_malformed_header():
    with pytest.raises(AlistParseError) as exc:
        read_alist(io.StringIO("4\n"))
    assert exc.value.line == 1


def test_alist_row_column_disagreement():
    text = "2 2\n1 1\n1 1\n1 1\n1\n2\n2\n1\n"
    with pytest.raises(AlistParseError) as exc:
        read_alist(io.StringIO(text))
    assert exc.value.line == 7


def test_syndrome_and_systematic_encoder():
    """Encoded words satisfy every check and carry the message on information positions"""
    rng = np.random.default_rng(8)
    H = ParityCheckMatrix.from_dense([
        [1, 1, 0, 1, 0, 0],
        [0, 1, 1, 0, 1, 0],
        [1, 0, 1, 0, 0, 1],
    ])
    encoder = systematic_encoder(H)
    assert encoder.k == 3
    for _ in range(20):
        message = rng.integers(0, 2, size=encoder.k)
        codeword = encoder.encode(message)
        assert not syndrome(H, codeword).any()
        assert np.array_equal(codeword[encoder.info_positions], message)


def test_systematic_encoder_rank_deficient():
    H = ParityCheckMatrix.from_dense([[1, 1, 0, 1], [1, 1, 0, 1]])
    with pytest.raises(UsageError):
        systematic_encoder(H)

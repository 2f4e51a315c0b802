# test_channel_decoder.py
import itertools

import numpy as np
import pytest

from common_utils.errors import UsageError
from construction_service.baselines import PegConfig, construct_peg
from construction_service.gf2matrix import ParityCheckMatrix, syndrome
from simulation_service.channel_decoder import BPDecoder, ChannelConfig, bp_decode, init_llrs, transmit

REPETITION_2 = ParityCheckMatrix.from_dense([[1, 1]])


def random_forest(rng, m, n, edges):
    """Tanner graph with no cycles: edges joining already-connected nodes are skipped."""
    parent = list(range(m + n))

    def root(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    entries = np.zeros((m, n), dtype=np.uint8)
    for _ in range(edges):
        i, j = int(rng.integers(m)), int(rng.integers(n))
        a, b = root(i), root(m + j)
        if a != b:
            parent[a] = b
            entries[i, j] = 1
    return ParityCheckMatrix(entries)


def codewords(H):
    words = np.array(list(itertools.product((0, 1), repeat=H.n)), dtype=np.uint8)
    return words[~((words @ H.entries.T.astype(np.int64)) % 2).any(axis=1)]


def bitwise_map(words, llrs):
    """Log-odds of bit 0 against bit 1 by summing over every codeword."""
    log_w = -(words * llrs).sum(axis=1)
    odds = []
    for i in range(words.shape[1]):
        zero = np.logaddexp.reduce(log_w[words[:, i] == 0]) if (words[:, i] == 0).any() else -np.inf
        one = np.logaddexp.reduce(log_w[words[:, i] == 1]) if (words[:, i] == 1).any() else -np.inf
        odds.append(zero - one)
    return np.array(odds)


def test_sigma2_convention():
    assert ChannelConfig(snr_db=0.0).sigma2 == pytest.approx(0.5)
    assert ChannelConfig(snr_db=10.0).sigma2 == pytest.approx(0.05)


def test_transmit_noiseless_limit():
    c = np.array([0, 1, 1, 0, 1])
    y = transmit(c, ChannelConfig(snr_db=200.0), np.random.default_rng(0))
    assert np.allclose(y, 2 * c - 1, atol=1e-9)


def test_transmit_noise_statistics():
    cfg = ChannelConfig(snr_db=3.0)
    c = np.zeros(1_000_000, dtype=np.uint8)
    noise = transmit(c, cfg, np.random.default_rng(1)) + 1.0
    sigma = np.sqrt(cfg.sigma2)
    assert abs(noise.mean()) < 4 * sigma / 1000
    assert noise.var() == pytest.approx(cfg.sigma2, rel=0.01)


def test_transmit_rejects_non_binary():
    with pytest.raises(UsageError):
        transmit(np.array([0, 2]), ChannelConfig(snr_db=1.0), np.random.default_rng(0))


def test_init_llrs():
    assert init_llrs(np.array([-1.0]), 0.5)[0] == pytest.approx(4.0)
    assert init_llrs(np.array([0.0]), 0.5)[0] == 0
    y = np.random.default_rng(2).normal(size=100)
    assert (np.sign(init_llrs(y, 0.7)) == -np.sign(y)).all()
    with pytest.raises(UsageError):
        init_llrs(y, 0.0)


def test_noiseless_zero_word():
    H = construct_peg(PegConfig(n=32, k=16, target_col_weights=3, seed=0))
    result = bp_decode(H, np.full(32, 20.0))
    assert result.converged
    assert result.iterations_used == 0
    assert not result.hard_decision.any()


def test_two_bit_repetition_code():
    llrs = init_llrs(np.array([-0.9, -1.1]), 0.5)
    result = bp_decode(REPETITION_2, llrs)
    assert result.converged
    assert result.hard_decision.tolist() == [0, 0]


def test_negated_llrs_give_complementary_word():
    llrs = init_llrs(np.array([-0.9, -1.1]), 0.5)
    assert bp_decode(REPETITION_2, -llrs).hard_decision.tolist() == [1, 1]


def test_rejects_wrong_length():
    with pytest.raises(UsageError):
        bp_decode(REPETITION_2, np.zeros(3))


def test_single_flip_corrected():
    H = construct_peg(PegConfig(n=64, k=32, target_col_weights=3, seed=4))
    llrs = np.full(64, 8.0)
    llrs[17] = -8.0
    result = bp_decode(H, llrs)
    assert result.converged
    assert not result.hard_decision.any()
    assert result.iterations_used >= 1


def test_converged_means_zero_syndrome():
    H = construct_peg(PegConfig(n=32, k=16, target_col_weights=3, seed=5))
    decoder = BPDecoder(H, max_iters=20)
    cfg = ChannelConfig(snr_db=1.0)
    rng = np.random.default_rng(5)
    for _ in range(50):
        llrs = init_llrs(transmit(np.zeros(32, dtype=np.uint8), cfg, rng), cfg.sigma2)
        result = decoder.decode(llrs)
        assert result.iterations_used <= 20
        if result.converged:
            assert not syndrome(H, result.hard_decision).any()
        again = decoder.decode(llrs)
        assert np.array_equal(again.final_llrs, result.final_llrs)


def test_forest_decisions_match_bitwise_map():
    """On cycle-free graphs sum-product marginals are exact"""
    rng = np.random.default_rng(6)
    mismatches = 0
    for _ in range(20):
        m, n = int(rng.integers(1, 5)), int(rng.integers(2, 11))
        H = random_forest(rng, m, n, edges=int(rng.integers(1, m + n)))
        decoder = BPDecoder(H, max_iters=30)
        words = codewords(H)
        for _ in range(100):
            llrs = init_llrs(rng.normal(-1.0, np.sqrt(2.0), size=n), 2.0)
            decision = decoder.decode(llrs, early_stop=False).hard_decision
            odds = bitwise_map(words, llrs)
            clear = np.abs(odds) > 1e-6
            mismatches += int((decision[clear] != (odds[clear] < 0)).sum())
    assert mismatches == 0

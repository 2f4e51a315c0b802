# simulation_service/channel_decoder.py
"""
BPSK over AWGN and flooding sum-product decoding in the LLR domain.

Bits map to symbols 2c - 1 (bit 0 -> -1), so the channel LLR
log P(c=0|y)/P(c=1|y) is -2y/σ² and a positive LLR favours bit 0.
"""
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from common_utils.errors import UsageError
from construction_service.gf2matrix import ParityCheckMatrix

MAX_MESSAGE = 30.0
MIN_MESSAGE = 1e-12
DEFAULT_MAX_ITERS = 50


class ChannelConfig(BaseModel):
    snr_db: float
    seed: int = 0

    @computed_field
    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * 10.0 ** (self.snr_db / 10.0))


class DecodeResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    hard_decision: np.ndarray
    converged: bool
    iterations_used: int = Field(ge=0)
    final_llrs: np.ndarray


def transmit(codeword: np.ndarray, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    codeword = np.asarray(codeword)
    if not np.isin(codeword, (0, 1)).all():
        raise UsageError("codeword bits must be 0 or 1")
    symbols = 2.0 * codeword - 1.0
    return symbols + rng.normal(0.0, math.sqrt(cfg.sigma2), size=symbols.shape)


def init_llrs(y: np.ndarray, sigma2: float) -> np.ndarray:
    if sigma2 <= 0:
        raise UsageError(f"noise variance must be positive, got {sigma2}")
    return -2.0 * np.asarray(y, dtype=np.float64) / sigma2


def _phi(x: np.ndarray) -> np.ndarray:
    # phi(x) = -log tanh(x/2), its own inverse on x > 0
    return -np.log(np.tanh(x / 2.0))


class BPDecoder:
    """
    Sum-product decoder bound to one parity-check matrix. Edges are stored
    check-major so per-check reductions are segment sums; the tanh product
    is evaluated as phi(Σ phi|m|) with signs handled separately.
    """

    def __init__(self, H: ParityCheckMatrix, max_iters: int = DEFAULT_MAX_ITERS):
        self.H = H
        self.max_iters = max_iters
        self.rows, self.cols = np.nonzero(H.entries)
        boundary = np.ones(self.rows.size, dtype=bool)
        boundary[1:] = self.rows[1:] != self.rows[:-1]
        self.starts = np.flatnonzero(boundary)
        self.segment = np.cumsum(boundary) - 1

    def syndrome_ok(self, hard: np.ndarray) -> bool:
        if self.rows.size == 0:
            return True
        parity = np.add.reduceat(hard[self.cols].astype(np.int64), self.starts) % 2
        return not parity.any()

    def decode(self, channel_llrs: np.ndarray, early_stop: bool = True) -> DecodeResult:
        llrs = np.asarray(channel_llrs, dtype=np.float64)
        if llrs.shape != (self.H.n,):
            raise UsageError(f"expected {self.H.n} channel LLRs, got shape {llrs.shape}")
        posterior = llrs.copy()
        hard = posterior < 0
        if early_stop and self.syndrome_ok(hard):
            return DecodeResult(hard_decision=hard.astype(np.uint8), converged=True,
                                iterations_used=0, final_llrs=posterior)

        v2c = np.clip(llrs[self.cols], -MAX_MESSAGE, MAX_MESSAGE)
        converged = False
        iterations = 0
        for iterations in range(1, self.max_iters + 1):
            negative = v2c < 0
            odd = np.add.reduceat(negative.astype(np.int64), self.starts) % 2
            sign = np.where(odd[self.segment].astype(bool) ^ negative, -1.0, 1.0)
            phi_self = _phi(np.clip(np.abs(v2c), MIN_MESSAGE, MAX_MESSAGE))
            others = np.add.reduceat(phi_self, self.starts)[self.segment] - phi_self
            c2v = np.clip(sign * _phi(np.maximum(others, MIN_MESSAGE)), -MAX_MESSAGE, MAX_MESSAGE)

            posterior = llrs + np.bincount(self.cols, weights=c2v, minlength=self.H.n)
            hard = posterior < 0
            v2c = np.clip(posterior[self.cols] - c2v, -MAX_MESSAGE, MAX_MESSAGE)
            converged = self.syndrome_ok(hard)
            if converged and early_stop:
                break

        return DecodeResult(hard_decision=hard.astype(np.uint8), converged=converged,
                            iterations_used=iterations, final_llrs=posterior)


def bp_decode(H: ParityCheckMatrix, channel_llrs: np.ndarray, max_iters: int = DEFAULT_MAX_ITERS,
              early_stop: bool = True, decoder: Optional[BPDecoder] = None) -> DecodeResult:
    decoder = decoder if decoder is not None else BPDecoder(H, max_iters)
    return decoder.decode(channel_llrs, early_stop=early_stop)

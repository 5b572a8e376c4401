"""Pilot-aided coherent receiver used as the comparison system.

Each coherence block of ``block_len`` uses starts with a short preamble of
pilots; the least-squares channel estimate from that preamble is held for the
remaining data uses of the block.  The data are Alamouti-coded, so the
coherent detectors reuse the DPSK machinery with the channel estimate in the
place of the previous quantized block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcode import DispersionSet, PskConstellation
from .detect_dpsk import decoupled_detect, ml_multibit_detect, ml_one_bit_detect
from .quantize import QuantizerSpec

__all__ = [
    "PilotPlan",
    "dft_pilots",
    "ls_channel_estimate",
    "coherent_ml_detect",
    "coherent_linear_detect",
]


def dft_pilots(num_tx: int, length: int) -> np.ndarray:
    """First ``num_tx`` rows of the ``length``-point DFT, scaled to unit total power per use."""
    if length < num_tx:
        raise ValueError(f"need at least {num_tx} pilot uses, got {length}")
    k = np.arange(num_tx)[:, None]
    t = np.arange(length)[None, :]
    return np.exp(-2j * np.pi * k * t / length) / np.sqrt(num_tx)


@dataclass(frozen=True)
class PilotPlan:
    """Contiguous pilot preambles, one per coherence block.

    ``fraction * block_len`` must be an integer, so the total pilot count is
    exactly ``round(fraction * num_uses)``.
    """

    fraction: float
    num_uses: int
    num_tx: int
    block_len: int = 32

    def __post_init__(self):
        if not 0 < self.fraction < 1:
            raise ValueError(f"pilot fraction must lie in (0, 1), got {self.fraction}")
        if self.block_len < 1 or self.num_uses % self.block_len:
            raise ValueError(f"N = {self.num_uses} is not a multiple of the pilot block length {self.block_len}")
        per = self.fraction * self.block_len
        if abs(per - round(per)) > 1e-9:
            raise ValueError(f"fraction {self.fraction} does not give a whole number of pilots per block")
        if round(per) < self.num_tx:
            raise ValueError(f"{round(per)} pilots per block cannot identify {self.num_tx} transmit antennas")

    @property
    def per_block(self) -> int:
        return int(round(self.fraction * self.block_len))

    @property
    def num_blocks(self) -> int:
        return self.num_uses // self.block_len

    @property
    def pilot_positions(self) -> np.ndarray:
        starts = np.arange(self.num_blocks) * self.block_len
        return (starts[:, None] + np.arange(self.per_block)).ravel()

    @property
    def data_positions(self) -> np.ndarray:
        starts = np.arange(self.num_blocks) * self.block_len
        return (starts[:, None] + np.arange(self.per_block, self.block_len)).ravel()

    @property
    def pilot_symbols(self) -> np.ndarray:
        """``(K, per_block)``, the same preamble in every block."""
        return dft_pilots(self.num_tx, self.per_block)

    @property
    def data_fraction(self) -> float:
        return 1.0 - self.fraction


def ls_channel_estimate(q_pilots, pilots) -> np.ndarray:
    """Least-squares channel from observations ``(..., U, P)`` of pilots ``(K, P)``: ``(..., U, K)``.

    Solves ``min ||q_u - h_u^T X||^2`` per antenna through the normal
    equations ``h^T = q X^H (X X^H)^{-1}``.
    """
    X = np.asarray(pilots)
    gram = X @ X.conj().T
    if np.linalg.matrix_rank(gram) < X.shape[0]:
        raise np.linalg.LinAlgError("pilot matrix is rank deficient")
    rhs = np.asarray(q_pilots) @ X.conj().T  # (..., U, K)
    return np.linalg.solve(gram.T, np.swapaxes(rhs, -1, -2)).swapaxes(-1, -2)


def coherent_ml_detect(q_curr, h_hat, rho, constellation: PskConstellation, disp: DispersionSet,
                       spec: QuantizerSpec | None = None) -> np.ndarray:
    """Quantized ML detection of Alamouti blocks given a channel estimate.

    ``q_curr`` is ``(..., U, N_d)``; ``h_hat`` is ``(..., U, K)`` with
    ``K = N_d``.  One-bit labels use the probit likelihood; multi-bit labels
    the bin-probability likelihood of ``spec``.
    """
    h_hat = np.asarray(h_hat)
    q_curr = np.asarray(q_curr)
    h_hat = np.broadcast_to(h_hat, q_curr.shape[:-1] + (h_hat.shape[-1],))
    if spec is None or (spec.is_sign and np.array_equal(spec.labels, [-1.0, 1.0])):
        return ml_one_bit_detect(h_hat, q_curr, disp, constellation, rho)
    return ml_multibit_detect(h_hat, q_curr, disp, constellation, spec, rho)


def coherent_linear_detect(q_curr, h_hat, constellation: PskConstellation, disp: DispersionSet) -> np.ndarray:
    """Alamouti matched combining with the channel estimate, then per-symbol decisions."""
    h_hat = np.asarray(h_hat)
    q_curr = np.asarray(q_curr)
    h_hat = np.broadcast_to(h_hat, q_curr.shape[:-1] + (h_hat.shape[-1],))
    return decoupled_detect(h_hat, q_curr, disp, constellation)

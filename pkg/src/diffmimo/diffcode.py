"""Differential space-time block encoding (DPSK) and two-ring DAPSK encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PskConstellation",
    "DispersionSet",
    "DapskState",
    "alamouti_dispersion",
    "scalar_dispersion",
    "build_data_matrix",
    "diff_encode",
    "to_transmit",
    "dapsk_encode",
    "dapsk_modulate",
    "ring_amplitudes",
]


def _gray(m):
    return m ^ (m >> 1)


class PskConstellation:
    """Gray-labelled M-PSK with the all-zero label at ``exp(0j)``."""

    def __init__(self, M: int):
        if M < 2 or M & (M - 1):
            raise ValueError(f"M must be a power of two >= 2, got {M}")
        self.M = M
        self.bits_per_symbol = M.bit_length() - 1
        self.points = np.exp(2j * np.pi * np.arange(M) / M)
        self.labels = _gray(np.arange(M))  # label of point m
        self._index_of_label = np.argsort(self.labels)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        self.bit_table = (self.labels[:, None] >> shifts) & 1  # (M, nbits), MSB first

    def __repr__(self):
        return f"PskConstellation(M={self.M})"

    def map(self, bits) -> np.ndarray:
        """Bits ``(..., log2 M)`` (MSB first) to PSK points ``(...)``."""
        bits = np.asarray(bits, dtype=np.int64)
        if bits.shape[-1] != self.bits_per_symbol:
            raise ValueError(f"expected {self.bits_per_symbol} bits per symbol, got {bits.shape[-1]}")
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        label = bits @ weights
        return self.points[self._index_of_label[label]]

    def nearest_index(self, symbols) -> np.ndarray:
        """Index of the closest point in angle (exact for any non-zero input)."""
        ang = np.angle(np.asarray(symbols))
        return np.mod(np.rint(ang * self.M / (2 * np.pi)), self.M).astype(np.int64)

    def demap(self, symbols) -> np.ndarray:
        """Nearest point's bits, shape ``(..., log2 M)``."""
        return self.bit_table[self.nearest_index(symbols)]


@dataclass(frozen=True)
class DispersionSet:
    """Dispersion matrices ``A[n], B[n]`` of shape ``(N_s, N_d, N_d)``.

    The constructor checks numerically that the composite matrix built from
    any vector ``q`` satisfies ``Gamma^H Gamma = ||q||^2 I``; every DPSK
    detector relies on that identity.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        if A.shape != B.shape or A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A and B must both have shape (N_s, N_d, N_d)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        rng = np.random.default_rng(0x5EED)
        q = rng.standard_normal((8, self.N_d)) + 1j * rng.standard_normal((8, self.N_d))
        G = self.gamma(q)
        gram = np.conj(np.swapaxes(G, -1, -2)) @ G
        target = np.sum(np.abs(q) ** 2, axis=-1)[:, None, None] * np.eye(2 * self.N_s)
        if not np.allclose(gram, target, atol=1e-10 * target.max()):
            raise ValueError("dispersion matrices violate the orthogonality identity")

    @property
    def N_s(self) -> int:
        return self.A.shape[0]

    @property
    def N_d(self) -> int:
        return self.A.shape[1]

    def stacked(self, q):
        """``(A_tilde, B_tilde)`` built from reference vectors ``q`` ``(..., N_d)``.

        ``A_tilde[..., j, n] = (A[n]^T q)[j]``; shapes ``(..., N_d, N_s)``.
        """
        q = np.asarray(q)
        At = np.swapaxes(np.tensordot(q, self.A, axes=([-1], [1])), -1, -2)
        Bt = np.swapaxes(np.tensordot(q, self.B, axes=([-1], [1])), -1, -2)
        return At, Bt

    def gamma(self, q):
        """Composite matrix ``[[A_t, B_t], [B_t*, A_t*]]``, shape ``(..., 2N_d, 2N_s)``."""
        At, Bt = self.stacked(q)
        top = np.concatenate([At, Bt], axis=-1)
        bottom = np.concatenate([np.conj(Bt), np.conj(At)], axis=-1)
        return np.concatenate([top, bottom], axis=-2)


def alamouti_dispersion() -> DispersionSet:
    """Rate-one two-antenna code giving ``S = [[s1, s2], [-s2*, s1*]] / sqrt(2)``."""
    A = np.array([[[1, 0], [0, 0]], [[0, 1], [0, 0]]])
    B = np.array([[[0, 0], [0, 1]], [[0, 0], [-1, 0]]])
    return DispersionSet(A, B)


def scalar_dispersion() -> DispersionSet:
    """Degenerate single-antenna code ``S = s`` (plain DPSK)."""
    return DispersionSet(np.ones((1, 1, 1)), np.zeros((1, 1, 1)))


def build_data_matrix(s_block, disp: DispersionSet, check: bool = True) -> np.ndarray:
    """``S = N_s^{-1/2} sum_n (A[n] s[n] + B[n] s[n]*)``; batched over leading axes."""
    s = np.asarray(s_block, dtype=complex)
    if s.shape[-1] != disp.N_s:
        raise ValueError(f"expected blocks of {disp.N_s} symbols, got {s.shape[-1]}")
    if check and not np.allclose(np.abs(s), 1.0, atol=1e-9):
        raise ValueError("DPSK data matrices need unit-modulus symbols")
    S = np.einsum("nij,...n->...ij", disp.A, s) + np.einsum("nij,...n->...ij", disp.B, np.conj(s))
    return S / np.sqrt(disp.N_s)


def diff_encode(blocks, disp: DispersionSet) -> np.ndarray:
    """Differentially encode ``(n_blocks, N_s)`` symbols into a ``(K, n_blocks * N_d)`` codeword.

    ``C[-1] = I`` and ``C[v] = C[v-1] S[v]``.
    """
    S = build_data_matrix(blocks, disp)
    n_blocks, N_d = S.shape[0], disp.N_d
    C = np.empty((N_d, n_blocks * N_d), dtype=complex)
    prev = np.eye(N_d, dtype=complex)
    for v in range(n_blocks):
        prev = prev @ S[v]
        C[:, v * N_d:(v + 1) * N_d] = prev
    return C


def to_transmit(C, mode: str = "sc") -> np.ndarray:
    """Map a codeword onto channel uses: unchanged for SC, unitary IDFT for OFDM."""
    C = np.asarray(C)
    if mode == "sc":
        return C
    if mode == "ofdm":
        return np.fft.ifft(C, norm="ortho", axis=-1)
    raise ValueError(f"unknown mode {mode!r}")


def ring_amplitudes(a: float):
    """``(psi0, psi1)`` with ``psi1 / psi0 = a`` and ``psi0^2 + psi1^2 = 2``."""
    if not a > 1:
        raise ValueError(f"ring ratio must exceed 1, got {a}")
    psi0 = np.sqrt(2.0 / (a * a + 1.0))
    return psi0, a * psi0


@dataclass(frozen=True)
class DapskState:
    prev_code: complex = 1.0 + 0j
    prev_amp: float | None = None
    ring_ratio: float = 2.0

    def __post_init__(self):
        psi0, _ = ring_amplitudes(self.ring_ratio)
        if self.prev_amp is None:
            object.__setattr__(self, "prev_amp", psi0)
        if not (np.isclose(self.prev_amp, self.psi0) or np.isclose(self.prev_amp, self.psi1)):
            raise ValueError("previous amplitude must lie on one of the two rings")

    @property
    def psi0(self) -> float:
        return ring_amplitudes(self.ring_ratio)[0]

    @property
    def psi1(self) -> float:
        return ring_amplitudes(self.ring_ratio)[1]


def dapsk_encode(bits, state: DapskState, constellation: PskConstellation):
    """Encode one DAPSK symbol.

    ``bits[0]`` toggles the ring, the remaining bits select the PSK phase
    increment.  Returns ``(x, new_state)``.
    """
    bits = np.asarray(bits)
    if bits.shape != (1 + constellation.bits_per_symbol,):
        raise ValueError(f"expected {1 + constellation.bits_per_symbol} bits, got shape {bits.shape}")
    s = constellation.map(bits[1:])
    code = state.prev_code * s
    if bits[0] == 0:
        amp = state.prev_amp
    elif np.isclose(state.prev_amp, state.psi0):
        amp = state.psi1
    else:
        amp = state.psi0
    return amp * code, DapskState(code, amp, state.ring_ratio)


def dapsk_modulate(bits, constellation: PskConstellation, a: float = 2.0) -> np.ndarray:
    """Vectorised DAPSK modulation of ``(V, 1 + log2 M)`` bits.

    Returns ``V + 1`` transmit symbols; the first is the reference ``psi0``.
    """
    bits = np.asarray(bits)
    psi0, psi1 = ring_amplitudes(a)
    s = constellation.map(bits[:, 1:])
    code = np.concatenate([[1.0 + 0j], np.cumprod(s)])
    ring = np.concatenate([[0], np.cumsum(bits[:, 0]) % 2])
    amp = np.where(ring == 0, psi0, psi1)
    # cumprod drifts off the unit circle only at the 1e-16 level per step
    code = code / np.abs(code)
    return amp * code

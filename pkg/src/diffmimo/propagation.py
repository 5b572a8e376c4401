"""Frequency-selective, time-varying MIMO channels and SC/OFDM framing.

Array conventions
-----------------
* tap gains: ``(U, K, L)``
* transmit frames: ``(K, n_samples)``
* received frames: ``(U, n_samples)``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .statmath import complex_gaussian

__all__ = [
    "ChannelSpec",
    "ChannelRealization",
    "exp_pdp",
    "draw_realization",
    "channel_at_use",
    "taps_over_time",
    "freq_response",
    "freq_response_all",
    "ofdm_modulate",
    "ofdm_demodulate",
    "receive_frame",
    "group_blocks",
]

SC = "sc"
OFDM = "ofdm"


def exp_pdp(Ts: float, tau_rms: float):
    """Exponential power delay profile.

    Returns ``(L, p)`` with ``p[l] ~ exp(-l * Ts / tau_rms)`` truncated after
    ``L = round(10 * tau_rms / Ts) + 1`` taps and renormalised to unit sum.
    ``tau_rms == 0`` gives the flat channel ``p = [1]``.
    """
    if not Ts > 0:
        raise ValueError(f"sample period must be positive, got {Ts}")
    if tau_rms < 0:
        raise ValueError(f"rms delay spread must be non-negative, got {tau_rms}")
    if tau_rms == 0:
        return 1, np.ones(1)
    L = int(round(10.0 * tau_rms / Ts)) + 1
    p = np.exp(-np.arange(L) * Ts / tau_rms)
    return L, p / p.sum()


@dataclass(frozen=True)
class ChannelSpec:
    """Static description of the multipath channel seen by one frame."""

    sample_period: float
    tau_rms: float
    num_tx: int
    num_rx: int
    num_uses: int
    doppler_hz: float = 0.0
    pdp: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        if self.num_uses < 1 or self.num_tx < 1 or self.num_rx < 1:
            raise ValueError("num_uses, num_tx and num_rx must be positive")
        if self.pdp is None:
            _, p = exp_pdp(self.sample_period, self.tau_rms)
        else:
            p = np.asarray(self.pdp, dtype=float)
        if p.ndim != 1 or p.size < 1 or np.any(p < 0):
            raise ValueError("pdp must be a non-empty vector of tap powers")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"pdp must sum to 1, got {p.sum()!r}")
        object.__setattr__(self, "pdp", p)

    @property
    def num_taps(self) -> int:
        return self.pdp.size


@dataclass(frozen=True)
class ChannelRealization:
    tap_gains: np.ndarray  # (U, K, L), unit-variance
    tap_doppler: np.ndarray  # (L,), Hz
    tap_aoa: np.ndarray  # (L,), radians


def draw_realization(spec: ChannelSpec, rng: np.random.Generator) -> ChannelRealization:
    """Draw Rayleigh tap gains and per-tap Doppler shifts ``f_d cos(theta_l)``."""
    L = spec.num_taps
    g = complex_gaussian(rng, 1.0, (spec.num_rx, spec.num_tx, L))
    theta = rng.uniform(-np.pi, np.pi, L)
    return ChannelRealization(g, spec.doppler_hz * np.cos(theta), theta)


def taps_over_time(spec: ChannelSpec, real: ChannelRealization, n) -> np.ndarray:
    """Tap gains at sample indices ``n``; shape ``(len(n), U, K, L)``.

    The Doppler phase advances as ``2 pi f_l n Ts`` (physical time).
    """
    n = np.atleast_1d(np.asarray(n, dtype=float))
    amp = np.sqrt(spec.pdp) * real.tap_gains  # (U, K, L)
    phase = np.exp(2j * np.pi * np.outer(n, real.tap_doppler) * spec.sample_period)  # (T, L)
    return amp[None, :, :, :] * phase[:, None, None, :]


def channel_at_use(spec: ChannelSpec, real: ChannelRealization, n: int) -> np.ndarray:
    """Tap gains ``h[u, k, l]`` during channel use ``n``."""
    if not 0 <= n < spec.num_uses:
        raise IndexError(f"channel use {n} outside [0, {spec.num_uses})")
    return taps_over_time(spec, real, [n])[0]


def freq_response_all(spec: ChannelSpec, real: ChannelRealization) -> np.ndarray:
    """Frequency response on every subchannel, shape ``(U, K, N)``."""
    N = spec.num_uses
    if spec.num_taps > N:
        raise ValueError("channel longer than the number of subchannels")
    amp = np.sqrt(spec.pdp) * real.tap_gains
    return np.fft.fft(amp, n=N, axis=-1)


def freq_response(spec: ChannelSpec, real: ChannelRealization, v: int) -> np.ndarray:
    """``h[u, k] = sum_l sqrt(p[l]) g[u, k, l] exp(-2j pi l v / N)``."""
    N = spec.num_uses
    if not 0 <= v < N:
        raise IndexError(f"subcarrier {v} outside [0, {N})")
    l = np.arange(spec.num_taps)
    amp = np.sqrt(spec.pdp) * real.tap_gains
    return amp @ np.exp(-2j * np.pi * l * v / N)


def ofdm_modulate(symbols, cp_len: int, num_taps: int = 1) -> np.ndarray:
    """Unitary IDFT over the last axis followed by a cyclic prefix."""
    if cp_len < num_taps - 1:
        raise ValueError(f"cyclic prefix {cp_len} shorter than channel memory {num_taps - 1}")
    x = np.fft.ifft(np.asarray(symbols), norm="ortho", axis=-1)
    if cp_len == 0:
        return x
    return np.concatenate([x[..., -cp_len:], x], axis=-1)


def ofdm_demodulate(samples, cp_len: int) -> np.ndarray:
    """Drop the cyclic prefix and apply the unitary DFT over the last axis."""
    return np.fft.fft(np.asarray(samples)[..., cp_len:], norm="ortho", axis=-1)


def receive_frame(
    spec: ChannelSpec,
    real: ChannelRealization,
    X: np.ndarray,
    noise_var: float,
    rng: np.random.Generator | None = None,
    mode: str = SC,
    cp_len: int = 0,
) -> np.ndarray:
    """Pass a transmit frame through the channel and add receiver noise.

    ``SC``: ``X`` is ``(K, N)`` and use ``n`` sees the flat gain of
    subchannel ``n``.  ``OFDM``: ``X`` is ``(K, N + cp_len)`` time samples
    (prefix first); every sample is convolved with the taps valid at that
    instant, so Doppler-induced inter-carrier interference is kept.
    """
    X = np.asarray(X)
    U, K, N = spec.num_rx, spec.num_tx, spec.num_uses
    if X.ndim != 2 or X.shape[0] != K:
        raise ValueError(f"transmit frame must have {K} rows, got shape {X.shape}")
    if mode == SC:
        if X.shape[1] != N:
            raise ValueError(f"SC frame must have {N} uses, got {X.shape[1]}")
        H = freq_response_all(spec, real)  # (U, K, N)
        Y = np.einsum("ukn,kn->un", H, X)
    elif mode == OFDM:
        if X.shape[1] != N + cp_len:
            raise ValueError(f"OFDM frame must have {N + cp_len} samples, got {X.shape[1]}")
        L = spec.num_taps
        if cp_len < L - 1:
            raise ValueError("cyclic prefix shorter than channel memory")
        n = np.arange(-cp_len, N)
        taps = taps_over_time(spec, real, n)  # (T, U, K, L)
        T = n.size
        Y = np.zeros((U, T), dtype=complex)
        for l in range(L):
            shifted = np.zeros((K, T), dtype=complex)
            shifted[:, l:] = X[:, : T - l]
            Y += np.einsum("tuk,kt->ut", taps[:, :, :, l], shifted)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if noise_var > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_var > 0")
        Y = Y + complex_gaussian(rng, noise_var, Y.shape)
    return Y


def group_blocks(y, N_d: int) -> np.ndarray:
    """Split the last axis (length ``N``) into ``N / N_d`` consecutive blocks."""
    y = np.asarray(y)
    N = y.shape[-1]
    if N % N_d:
        raise ValueError(f"N = {N} is not divisible by N_d = {N_d}")
    return y.reshape(y.shape[:-1] + (N // N_d, N_d))

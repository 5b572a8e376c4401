"""Monte-Carlo link simulation: configuration, per-trial pipeline, sweeps and CSV output.

A trial is one frame of ``N`` channel uses (or subcarriers).  Trial ``k``
draws everything from the stream ``RandomSource(seed, k)``, at every SNR
point, so SNR points share their bits, channels and noise shapes.
Calibration (Bussgang pairs, energy thresholds) uses separate substreams.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
import csv
import io
import math
import os
import time

import numpy as np

from . import coherent as coh
from . import detect_dapsk as dap
from . import detect_dpsk as dps
from .diffcode import (
    PskConstellation,
    alamouti_dispersion,
    build_data_matrix,
    dapsk_modulate,
    diff_encode,
    ring_amplitudes,
    scalar_dispersion,
)
from .propagation import (
    ChannelSpec,
    draw_realization,
    exp_pdp,
    group_blocks,
    ofdm_demodulate,
    ofdm_modulate,
    receive_frame,
)
from .quantize import (
    QuantizerSpec,
    VqlPartition,
    calibrated,
    dapsk_two_bit_spec,
    one_bit_spec,
    quantize_complex,
    quantize_vql,
    vql_partition,
)
from .statmath import RandomSource

__all__ = [
    "ConfigError",
    "ChannelConfig",
    "SimConfig",
    "Counts",
    "MetricRecord",
    "SimContext",
    "prepare",
    "run_trial",
    "run_trials",
    "sweep",
    "spectral_efficiency",
    "emit_csv",
    "csv_text",
    "threshold_table",
    "CSV_HEADER",
]

CSV_HEADER = ("snr_db", "ber", "ser", "spectral_efficiency", "bits", "trials", "seed")

SCHEMES = ("dpsk", "dapsk", "coherent")
MODES = ("sc", "ofdm")
DETECTORS = {
    "dpsk": ("decoupled", "ml", "multibit"),
    "dapsk": ("ml", "multibit", "id", "energy", "vql"),
    "coherent": ("coherent", "ml", "decoupled"),
}
DEFAULT_DETECTOR = {"dpsk": "decoupled", "dapsk": "energy", "coherent": "coherent"}

# substream tags for calibration draws
_TAG_BUSSGANG = 1
_TAG_THRESHOLD = 1000


class ConfigError(ValueError):
    """Inconsistent or unsupported simulation configuration."""


@dataclass(frozen=True)
class ChannelConfig:
    sample_period: float = 50e-9
    tau_rms: float = 50e-9
    doppler_hz: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce a sweep.

    ``M`` is the PSK order for DPSK and the coherent scheme, and the total
    number of DAPSK points (two rings of ``M / 2`` phases) for DAPSK.
    ``q_b = 0`` selects an ideal (unquantized) receiver.  ``N_cp = None``
    uses the shortest cyclic prefix covering the channel memory.
    """

    mode: str = "sc"
    scheme: str = "dpsk"
    U: int = 64
    K: int = 2
    N: int = 256
    N_s: int = 2
    N_d: int = 2
    N_cp: int | None = None
    M: int = 8
    a: float = 2.0
    q_b: int = 1
    vql: tuple | None = None
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    snr_db: tuple = (0.0, 5.0, 10.0)
    trials: int = 100
    seed: int = 0
    xi: float = 0.125
    pilot_block: int = 32
    ser_threshold: float = 0.05
    detector: str | None = None
    phase: str = "id"
    chunk: int = 8
    workers: int = 1
    stop_after_errors: int = 0
    calibration_trials: int = 10**4
    bussgang_samples: int = 10**6

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in np.atleast_1d(self.snr_db)))
        if self.vql is not None and not isinstance(self.vql, bool):
            object.__setattr__(self, "vql", tuple(int(v) for v in self.vql))
        if isinstance(self.channel, dict):
            object.__setattr__(self, "channel", ChannelConfig(**self.channel))
        if self.detector is None and self.scheme in DEFAULT_DETECTOR:
            object.__setattr__(self, "detector", DEFAULT_DETECTOR[self.scheme])

    # derived quantities -------------------------------------------------

    def channel_spec(self) -> ChannelSpec:
        return ChannelSpec(self.channel.sample_period, self.channel.tau_rms, self.K, self.U, self.N,
                           self.channel.doppler_hz)

    @property
    def num_taps(self) -> int:
        return exp_pdp(self.channel.sample_period, self.channel.tau_rms)[0]

    @property
    def cp_len(self) -> int:
        return self.num_taps - 1 if self.N_cp is None else self.N_cp

    @property
    def psk_order(self) -> int:
        return self.M // 2 if self.scheme == "dapsk" else self.M

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.M))

    @property
    def data_fraction(self) -> float:
        if self.scheme == "dpsk":
            return (self.N - self.N_d) / self.N
        if self.scheme == "dapsk":
            return (self.N - 1) / self.N
        return 1.0 - self.xi

    @property
    def symbols_per_frame(self) -> int:
        if self.scheme == "dpsk":
            return (self.N // self.N_d - 1) * self.N_s
        if self.scheme == "dapsk":
            return self.N - 1
        return self.pilot_plan().data_positions.size // self.N_d * self.N_s

    @property
    def bits_per_frame(self) -> int:
        return self.symbols_per_frame * self.bits_per_symbol

    def pilot_plan(self) -> coh.PilotPlan:
        return coh.PilotPlan(self.xi, self.N, self.K, self.pilot_block)

    def dispersion(self):
        return alamouti_dispersion() if self.N_d == 2 else scalar_dispersion()

    def validate(self) -> "SimConfig":
        """Raise :class:`ConfigError` on any inconsistency; return ``self``."""
        try:
            self._validate()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def _validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("U", "K", "N", "N_s", "N_d", "trials", "chunk", "workers", "pilot_block"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.q_b not in (0, 1, 2):
            raise ConfigError(f"q_b must be 0 (ideal), 1 or 2, got {self.q_b}")
        if self.N % self.N_d:
            raise ConfigError(f"N = {self.N} is not divisible by N_d = {self.N_d}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not self.snr_db:
            raise ConfigError("the SNR grid is empty")
        if any(math.isnan(s) or s == -math.inf for s in self.snr_db):
            raise ConfigError("SNR values must be finite or +inf")
        if not 0 <= self.ser_threshold <= 1:
            raise ConfigError("ser_threshold must lie in [0, 1]")
        if self.stop_after_errors < 0:
            raise ConfigError("stop_after_errors must be non-negative")
        if self.M < 2 or self.M & (self.M - 1):
            raise ConfigError(f"M must be a power of two, got {self.M}")
        if self.detector not in DETECTORS[self.scheme]:
            raise ConfigError(f"detector {self.detector!r} is not available for {self.scheme}; "
                              f"choose from {DETECTORS[self.scheme]}")
        if self.phase not in ("id", "ml"):
            raise ConfigError(f"phase detector must be 'id' or 'ml', got {self.phase!r}")
        self.channel_spec()
        if self.mode == "ofdm" and self.cp_len < self.num_taps - 1:
            raise ConfigError(f"cyclic prefix {self.cp_len} shorter than channel memory {self.num_taps - 1}")
        if self.mode == "sc" and self.num_taps > self.N:
            raise ConfigError("channel longer than the frame")
        if self.vql and not (self.scheme == "dapsk" and self.detector == "vql"):
            raise ConfigError("vql partitions are only used by the DAPSK vql detector")
        getattr(self, f"_validate_{self.scheme}")()

    def _validate_space_time(self):
        if self.N_s != self.N_d or self.N_d not in (1, 2) or self.K != self.N_d:
            raise ConfigError("supported space-time codes: N_s = N_d = K = 2 (Alamouti) or 1")

    def _validate_dpsk(self):
        self._validate_space_time()
        if self.detector == "ml" and self.q_b == 0:
            raise ConfigError("the ML detector needs a quantized receiver (q_b = 1 or 2)")
        if self.detector == "multibit" and self.q_b != 2:
            raise ConfigError("the multibit detector needs q_b = 2")
        if self.mode == "ofdm" and self.detector != "decoupled":
            raise ConfigError("OFDM samples after the DFT are not ADC labels; use the decoupled detector")

    def _validate_dapsk(self):
        if self.K != 1 or self.N_s != 1 or self.N_d != 1:
            raise ConfigError("DAPSK is a single-antenna scheme: set K = N_s = N_d = 1")
        if self.mode != "sc":
            raise ConfigError("DAPSK is simulated for single-carrier frames only")
        if self.M < 4:
            raise ConfigError("DAPSK needs M >= 4 (two rings of at least two phases)")
        if not self.a > 1:
            raise ConfigError("ring ratio a must exceed 1")
        need = {"ml": (1,), "multibit": (2,), "energy": (0, 2), "vql": (1,), "id": (0, 1, 2)}[self.detector]
        if self.q_b not in need:
            raise ConfigError(f"the {self.detector} detector needs q_b in {need}")
        if self.phase == "ml" and self.q_b == 0 and self.detector in ("energy", "vql"):
            raise ConfigError("ML phase detection needs a quantized receiver")
        if self.calibration_trials < 10**4 and self.detector in ("energy", "vql"):
            raise ConfigError("threshold calibration needs at least 1e4 trials")
        if self.detector == "vql" and isinstance(self.vql, tuple):
            if len(self.vql) != 3 or sum(self.vql) != self.U:
                raise ConfigError(f"vql group sizes {self.vql} must be three sizes summing to U = {self.U}")
            if self.vql[1] < 1:
                raise ConfigError("the sign group must not be empty")

    def _validate_coherent(self):
        self._validate_space_time()
        plan = self.pilot_plan()
        if (plan.block_len - plan.per_block) % self.N_d:
            raise ConfigError("data uses per pilot block must be a multiple of N_d")
        if self.mode == "ofdm" and self.detector == "ml":
            raise ConfigError("OFDM samples after the DFT are not ADC labels; use the linear detector")
        if self.detector == "ml" and self.q_b == 0:
            raise ConfigError("the ML detector needs a quantized receiver")


@dataclass
class Counts:
    bit_errors: int = 0
    bits: int = 0
    symbol_errors: int = 0
    symbols: int = 0
    amp_bit_errors: int = 0
    amp_bits: int = 0
    trials: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


@dataclass(frozen=True)
class MetricRecord:
    snr_db: float
    bit_errors: int
    bits: int
    symbol_errors: int
    symbols: int
    ber: float
    ser: float
    spectral_efficiency: float
    wall_time: float
    trials: int
    seed: int
    amp_bit_errors: int = 0
    amp_bits: int = 0

    @property
    def amp_ber(self) -> float:
        return self.amp_bit_errors / self.amp_bits if self.amp_bits else float("nan")


@dataclass(frozen=True, eq=False)
class SimContext:
    """Calibrated quantities shared by every trial of a sweep."""

    quantizer: QuantizerSpec | VqlPartition | None
    thresholds: dict  # snr_db -> gamma (DAPSK energy/vql only)


def spectral_efficiency(ser: float, config: SimConfig) -> float:
    """``xi_data * N * N_b * (1 - ser)`` if ``ser <= ser_threshold``, else 0."""
    if not 0 <= ser <= 1:
        raise ValueError(f"SER must lie in [0, 1], got {ser}")
    if ser > config.ser_threshold:
        return 0.0
    return config.data_fraction * config.N * config.bits_per_symbol * (1.0 - ser)


def _base_quantizer(config: SimConfig):
    if config.q_b == 0:
        return None
    if config.detector == "vql":
        sizes = None if config.vql in (None, True) else config.vql
        return vql_partition(config.U, config.a, sizes)
    if config.q_b == 1:
        return one_bit_spec()
    return dapsk_two_bit_spec(config.a)


def prepare(config: SimConfig) -> SimContext:
    """Validate the configuration and run all calibrations it needs."""
    config.validate()
    quant = _base_quantizer(config)
    rng = RandomSource(config.seed).substream(_TAG_BUSSGANG).generator()
    if isinstance(quant, VqlPartition):
        specs = tuple(calibrated(s, rng, n_samples=config.bussgang_samples) for s in quant.specs)
        quant = VqlPartition(quant.groups, specs, quant.sgn_group)
    elif quant is not None:
        quant = calibrated(quant, rng, n_samples=config.bussgang_samples)
    thresholds = {}
    if config.scheme == "dapsk" and config.detector in ("energy", "vql"):
        for snr in sorted(set(config.snr_db)):
            # keyed by the SNR value so a point's threshold does not depend on the rest of the grid
            key = int(np.float64(snr + 0.0).view(np.uint64))
            trng = RandomSource(config.seed).substream(_TAG_THRESHOLD).substream(key).generator()
            thresholds[snr] = dap.calibrate_threshold_mc(quant, config.U, snr, config.a, trng,
                                                         config.calibration_trials)
    return SimContext(quant, thresholds)


def _noise_power(snr_db: float) -> float:
    return 0.0 if snr_db == math.inf else 10.0 ** (-snr_db / 10.0)


def _bussgang(quant):
    if quant is None:
        return 1.0, 0.0
    return dap._bussgang_pair(quant)


def _composite(quant, snr_db):
    """Per-use distortion-plus-noise power at the quantizer output."""
    sz = _noise_power(snr_db)
    eta, eps = _bussgang(quant)
    return eta * eta * sz / (1.0 + sz) + eps


def _adc(y, quant, snr_db):
    y = y / np.sqrt(1.0 + _noise_power(snr_db))
    if quant is None:
        return y
    if isinstance(quant, VqlPartition):
        return quantize_vql(y, quant)
    return quantize_complex(y, quant)


# per-trial observation generators -------------------------------------------

def _receive(config, spec, real, X, rng, snr_db, quant):
    """Channel, noise, AGC and ADC; returns ``(U, N)`` samples per use/subcarrier."""
    mode = config.mode
    if mode == "ofdm":
        X = ofdm_modulate(X, config.cp_len, spec.num_taps)
    y = receive_frame(spec, real, X, _noise_power(snr_db), rng, mode=mode, cp_len=config.cp_len)
    q = _adc(y.T, quant, snr_db).T
    if mode == "ofdm":
        q = ofdm_demodulate(q, config.cp_len)
    return q


def _dpsk_observe(config, ctx, rng, snr_db):
    psk = PskConstellation(config.M)
    disp = config.dispersion()
    n_blocks = config.N // config.N_d
    idx = rng.integers(0, config.M, (n_blocks - 1, config.N_s))
    ref = np.zeros((1, config.N_s), dtype=np.int64)
    C = diff_encode(psk.points[np.concatenate([ref, idx])], disp)
    spec = config.channel_spec()
    real = draw_realization(spec, rng)
    q = _receive(config, spec, real, C, rng, snr_db, ctx.quantizer)
    blocks = np.moveaxis(group_blocks(q, config.N_d), 0, 1)  # (n_blocks, U, N_d)
    return blocks, idx


def _coherent_observe(config, ctx, rng, snr_db):
    psk = PskConstellation(config.M)
    disp = config.dispersion()
    plan = config.pilot_plan()
    data_pos = plan.data_positions
    n_data_blocks = data_pos.size // config.N_d
    idx = rng.integers(0, config.M, (n_data_blocks, config.N_s))
    S = build_data_matrix(psk.points[idx], disp)  # (B, K, N_d)
    X = np.empty((config.K, config.N), dtype=complex)
    X[:, data_pos] = np.moveaxis(S, 0, 1).reshape(config.K, -1)
    pil = plan.pilot_symbols
    X[:, plan.pilot_positions] = np.tile(pil, plan.num_blocks)
    spec = config.channel_spec()
    real = draw_realization(spec, rng)
    q = _receive(config, spec, real, X, rng, snr_db, ctx.quantizer)
    qp = q[:, plan.pilot_positions].reshape(config.U, plan.num_blocks, plan.per_block)
    h_hat = coh.ls_channel_estimate(np.moveaxis(qp, 1, 0), pil)  # (blocks, U, K)
    per = (plan.block_len - plan.per_block) // config.N_d
    h_data = np.repeat(h_hat, per, axis=0)  # (n_data_blocks, U, K)
    qd = q[:, data_pos].reshape(config.U, n_data_blocks, config.N_d)
    return (np.moveaxis(qd, 1, 0), h_data), idx


def _dapsk_observe(config, ctx, rng, snr_db):
    psk = PskConstellation(config.psk_order)
    V = config.N - 1
    bits = rng.integers(0, 2, (V, 1 + psk.bits_per_symbol))
    x = dapsk_modulate(bits, psk, config.a)
    spec = config.channel_spec()
    real = draw_realization(spec, rng)
    q = _receive(config, spec, real, x[None, :], rng, snr_db, ctx.quantizer)
    return q.T, bits  # (N, U), (V, N_b)


_OBSERVE = {"dpsk": _dpsk_observe, "coherent": _coherent_observe, "dapsk": _dapsk_observe}


# batched detection ------------------------------------------------------------

def _in_slices(n, step):
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def _detect_dpsk(config, ctx, snr_db, blocks):
    psk = PskConstellation(config.M)
    disp = config.dispersion()
    qp, qc = blocks[:, :-1], blocks[:, 1:]
    if config.detector == "decoupled":
        return dps.decoupled_detect(qp, qc, disp, psk)
    rho = 1.0 / (2.0 * _composite(ctx.quantizer, snr_db))
    if ctx.quantizer.is_sign and config.detector == "ml":
        return dps.ml_one_bit_detect(qp, qc, disp, psk, rho)
    return dps.ml_multibit_detect(qp, qc, disp, psk, ctx.quantizer, rho)


def _detect_coherent(config, ctx, snr_db, obs):
    qd, h = obs
    psk = PskConstellation(config.M)
    disp = config.dispersion()
    linear = config.detector == "decoupled" or (config.detector == "coherent"
                                               and (config.mode == "ofdm" or ctx.quantizer is None))
    if linear:
        return coh.coherent_linear_detect(qd, h, psk, disp)
    rho = 1.0 / _composite(ctx.quantizer, snr_db)
    return coh.coherent_ml_detect(qd, h, rho, psk, disp, ctx.quantizer)


def _detect_dapsk(config, ctx, snr_db, q):
    """``q`` is ``(T, N, U)``; returns ``(b1_hat, phase_index, forced_error)`` for uses 1..N-1."""
    psk = PskConstellation(config.psk_order)
    a = config.a
    quant = ctx.quantizer
    sz = _noise_power(snr_db)
    eta, eps = _bussgang(quant)
    rhos = dap.rho_set(eta, eps, sz / (1.0 + sz), a)
    qp, qc = q[:, :-1], q[:, 1:]
    det = config.detector
    forced = np.zeros(qp.shape[:2], dtype=bool)
    if det in ("energy", "vql"):
        gamma = ctx.thresholds[snr_db]
        if det == "energy":
            b1, m = dap.energy_detect(q, gamma, psk, rhos, config.phase, quant)
        else:
            b1, m = dap.vql_detect(quant, q, gamma, psk, rhos, config.phase)
        return b1, m, forced
    if det == "id":
        a_hat, m, ok = dap.inverse_decode(qp, qc, psk, a)
        forced = ~ok
    else:
        # the likelihood grid is (uses, 3, 3, M, U); evaluate in slices to bound memory
        flat_p = qp.reshape(-1, qp.shape[-1])
        flat_c = qc.reshape(-1, qc.shape[-1])
        a_hat = np.empty(flat_p.shape[0])
        m = np.empty(flat_p.shape[0], dtype=np.int64)
        step = max(1, 2**21 // (9 * psk.M * config.U))
        for sl in _in_slices(flat_p.shape[0], step):
            if det == "ml":
                a_hat[sl], m[sl] = dap.ml_one_bit_dapsk(flat_p[sl], flat_c[sl], rhos, psk, a)
            else:
                a_hat[sl], m[sl], erased = dap.multibit_ml(flat_p[sl], flat_c[sl], quant, rhos, psk, a)
                forced.reshape(-1)[sl] = erased
        a_hat = a_hat.reshape(qp.shape[:2])
        m = m.reshape(qp.shape[:2])
    b1 = (~np.isclose(a_hat, 1.0)).astype(np.int64)
    return b1, m, forced


def _count(config, snr_db, ctx, obs_list, truth_list) -> Counts:
    T = len(obs_list)
    scheme = config.scheme
    if scheme == "dapsk":
        psk = PskConstellation(config.psk_order)
        q = np.stack(obs_list)
        bits = np.stack(truth_list)  # (T, V, N_b)
        b1, m, forced = _detect_dapsk(config, ctx, snr_db, q)
        hat = np.concatenate([b1[..., None], psk.bit_table[m]], axis=-1)
        wrong = hat != bits
        sym_err = wrong.any(axis=-1) | forced
        amp_err = int(wrong[..., 0].sum())
        return Counts(int(wrong.sum()), bits.size, int(sym_err.sum()), sym_err.size, amp_err, b1.size, T)
    psk = PskConstellation(config.M)
    idx = np.stack(truth_list)
    if scheme == "dpsk":
        blocks = np.stack(obs_list)
        hat = _detect_dpsk(config, ctx, snr_db, blocks)
    else:
        qd = np.stack([o[0] for o in obs_list])
        h = np.stack([o[1] for o in obs_list])
        hat = _detect_coherent(config, ctx, snr_db, (qd, h))
    bit_err = int((psk.bit_table[hat] != psk.bit_table[idx]).sum())
    sym_err = int((hat != idx).sum())
    return Counts(bit_err, idx.size * psk.bits_per_symbol, sym_err, idx.size, 0, 0, T)


def run_trials(config: SimConfig, snr_db: float, trial_indices, ctx: SimContext | None = None) -> Counts:
    """Summed error counts over the given trials at one SNR point."""
    ctx = prepare(config) if ctx is None else ctx
    observe = _OBSERVE[config.scheme]
    obs, truth = [], []
    for k in trial_indices:
        rng = RandomSource(config.seed, int(k)).generator()
        o, t = observe(config, ctx, rng, snr_db)
        obs.append(o)
        truth.append(t)
    if not obs:
        return Counts()
    return _count(config, snr_db, ctx, obs, truth)


def run_trial(config: SimConfig, trial_index: int, snr_db: float | None = None,
              ctx: SimContext | None = None) -> Counts:
    """Error counts of one frame; fully determined by ``(config, trial_index, snr_db)``."""
    snr = config.snr_db[0] if snr_db is None else float(snr_db)
    return run_trials(config, snr, [trial_index], ctx)


def _chunk_job(args):
    config, snr, indices, ctx = args
    return run_trials(config, snr, indices, ctx)


def _chunks(config):
    for start in range(0, config.trials, config.chunk):
        yield range(start, min(config.trials, start + config.chunk))


def _collect(config, snr, results) -> Counts:
    """Sum chunk results in order, stopping on the fixed chunk grid once enough errors are seen."""
    total = Counts()
    for res in results:
        total = total + res
        if config.stop_after_errors and total.bit_errors >= config.stop_after_errors:
            break
    return total


def _record(config, snr, counts, wall):
    ber = counts.bit_errors / counts.bits if counts.bits else 0.0
    ser = counts.symbol_errors / counts.symbols if counts.symbols else 0.0
    return MetricRecord(snr, counts.bit_errors, counts.bits, counts.symbol_errors, counts.symbols, ber, ser,
                        spectral_efficiency(ser, config), wall, counts.trials, config.seed,
                        counts.amp_bit_errors, counts.amp_bits)


def sweep(config: SimConfig, workers: int | None = None, ctx: SimContext | None = None) -> list:
    """One :class:`MetricRecord` per SNR point, ascending in SNR.

    Trials are processed in fixed chunks; with ``workers > 1`` chunks run in
    worker processes but are summed in chunk order, so the counts do not
    depend on scheduling.
    """
    ctx = prepare(config) if ctx is None else ctx
    workers = config.workers if workers is None else workers
    records = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for snr in sorted(set(config.snr_db)):
            t0 = time.perf_counter()
            jobs = [(config, snr, list(c), ctx) for c in _chunks(config)]
            if pool is None:
                results = (_chunk_job(j) for j in jobs)
            else:
                results = pool.map(_chunk_job, jobs)
            counts = _collect(config, snr, results)
            records.append(_record(config, snr, counts, time.perf_counter() - t0))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return records


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(int(x))


def csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([_fmt(float(r.snr_db)), _fmt(float(r.ber)), _fmt(float(r.ser)),
                    _fmt(float(r.spectral_efficiency)), _fmt(r.bits), _fmt(r.trials), _fmt(r.seed)])
    return buf.getvalue()


def emit_csv(records, path) -> None:
    """Write records as CSV; the bytes depend only on the records."""
    text = csv_text(records)
    try:
        with open(os.fspath(path), "w", encoding="ascii", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def threshold_table(U_values, snr_values, a: float = 2.0, q_b: int = 2, vql: bool = False, seed: int = 0,
                    trials: int = 10**4):
    """Monte-Carlo and closed-form energy thresholds for every ``(U, SNR)`` pair.

    Returns a list of ``(U, snr_db, gamma_mc, gamma_analytic)`` tuples.
    """
    rows = []
    for j, U in enumerate(U_values):
        cfg = SimConfig(scheme="dapsk", K=1, N_s=1, N_d=1, M=16, U=int(U), a=a, q_b=q_b,
                        detector="vql" if vql else "energy", snr_db=tuple(snr_values), seed=seed,
                        calibration_trials=trials, vql=True if vql else None)
        ctx = prepare(cfg)
        for snr in sorted(set(cfg.snr_db)):
            analytic = dap.amplitude_threshold(dap.energy_model(ctx.quantizer, int(U), snr, a)) \
                if snr != math.inf else float("nan")
            rows.append((int(U), snr, ctx.thresholds[snr], analytic))
    return rows

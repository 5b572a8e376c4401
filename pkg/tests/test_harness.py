import csv
import io
import math

import numpy as np
import pytest

from diffmimo.harness import (
    CSV_HEADER,
    ChannelConfig,
    ConfigError,
    Counts,
    SimConfig,
    csv_text,
    emit_csv,
    prepare,
    run_trial,
    run_trials,
    spectral_efficiency,
    sweep,
    threshold_table,
)

FLAT = ChannelConfig(tau_rms=0.0)


def _small(**kw):
    base = dict(U=16, N=32, trials=4, snr_db=(5.0,), bussgang_samples=10**5)
    base.update(kw)
    return SimConfig(**base)


@pytest.mark.parametrize(
    "kw",
    [
        dict(scheme="dpsk", mode="sc"),
        dict(scheme="dpsk", mode="ofdm"),
        dict(scheme="dpsk", mode="sc", channel=ChannelConfig()),
        dict(scheme="coherent", mode="sc", N=64),
        dict(scheme="coherent", mode="ofdm", N=64),
        dict(scheme="dapsk", K=1, N_s=1, N_d=1, M=16, detector="id"),
    ],
)
def test_zero_noise_unquantized_is_error_free(kw):
    kw.setdefault("channel", FLAT)
    cfg = _small(q_b=0, snr_db=(math.inf,), **kw)
    rec = sweep(cfg)[0]
    assert rec.bit_errors == 0 and rec.symbol_errors == 0 and rec.bits > 0


def test_zero_noise_energy_detector_unquantized():
    cfg = _small(scheme="dapsk", K=1, N_s=1, N_d=1, M=16, U=128, q_b=0, snr_db=(math.inf,), channel=FLAT)
    rec = sweep(cfg)[0]
    assert rec.bit_errors == 0


def test_run_trial_deterministic():
    cfg = _small()
    ctx = prepare(cfg)
    a = run_trial(cfg, 3, ctx=ctx)
    b = run_trial(cfg, 3, ctx=ctx)
    assert a == b
    assert a.trials == 1


def test_trials_sum_to_batch():
    cfg = _small(snr_db=(0.0,))
    ctx = prepare(cfg)
    total = sum((run_trial(cfg, k, ctx=ctx) for k in range(4)), Counts())
    assert total == run_trials(cfg, 0.0, range(4), ctx)


@pytest.mark.parametrize("M", [4, 8, 16])
def test_bits_per_frame(M):
    cfg = SimConfig(M=M)
    assert cfg.bits_per_frame == (256 // 2 - 1) * 2 * int(math.log2(M))
    rec = sweep(_small(M=M, trials=1))[0]
    assert rec.bits == (32 // 2 - 1) * 2 * int(math.log2(M))


def test_reference_overhead_below_point_eight_percent():
    cfg = SimConfig()
    assert 1 - cfg.data_fraction < 0.008


def test_sweep_records_sorted_and_single_point():
    assert len(sweep(_small())) == 1
    recs = sweep(_small(snr_db=(10.0, 0.0, 5.0), trials=2))
    assert [r.snr_db for r in recs] == [0.0, 5.0, 10.0]
    for r in recs:
        assert 0 <= r.ber <= 1 and r.ber == r.bit_errors / r.bits


def test_serial_equals_parallel():
    cfg = _small(snr_db=(0.0, 5.0), trials=6, chunk=2)
    a = sweep(cfg, workers=1)
    b = sweep(cfg, workers=2)
    assert [(r.bit_errors, r.symbol_errors, r.bits) for r in a] == [(r.bit_errors, r.symbol_errors, r.bits) for r in b]


def test_early_stop_on_chunk_grid():
    cfg = _small(snr_db=(-5.0,), trials=40, chunk=4, stop_after_errors=1)
    rec = sweep(cfg)[0]
    assert rec.trials % 4 == 0 and rec.trials < 40
    assert rec.bit_errors >= 1


def test_spectral_efficiency_examples():
    cfg = SimConfig()
    full = cfg.data_fraction * 256 * 3
    assert spectral_efficiency(0.10, cfg) == 0.0
    assert spectral_efficiency(0.0, cfg) == full
    assert math.isclose(spectral_efficiency(0.02, cfg), 0.98 * full)
    assert spectral_efficiency(0.05, cfg) > 0
    with pytest.raises(ValueError):
        spectral_efficiency(1.5, cfg)


def test_more_pilots_cost_spectral_efficiency():
    lo = SimConfig(scheme="coherent", xi=0.125)
    hi = SimConfig(scheme="coherent", xi=0.5)
    assert spectral_efficiency(0.0, hi) < spectral_efficiency(0.0, lo)


def test_csv_empty_and_round_trip(tmp_path):
    assert csv_text([]) == ",".join(CSV_HEADER) + "\n"
    recs = sweep(_small(snr_db=(0.0, 3.3), trials=2))
    path = tmp_path / "out.csv"
    emit_csv(recs, path)
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert len(rows) == 2
    for row, rec in zip(rows, recs):
        assert float(row["snr_db"]) == rec.snr_db
        assert float(row["ber"]) == rec.ber
        assert float(row["spectral_efficiency"]) == rec.spectral_efficiency
        assert int(row["bits"]) == rec.bits and int(row["seed"]) == rec.seed


def test_csv_byte_identical_across_runs(tmp_path):
    cfg = _small(snr_db=(0.0, 5.0), trials=3)
    emit_csv(sweep(cfg), tmp_path / "a.csv")
    emit_csv(sweep(cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_emit_csv_reports_path(tmp_path):
    with pytest.raises(OSError, match="nowhere"):
        emit_csv([], tmp_path / "nowhere" / "x.csv")


@pytest.mark.parametrize(
    "kw",
    [
        dict(N=33),
        dict(q_b=3),
        dict(trials=0),
        dict(mode="tdd"),
        dict(detector="energy"),
        dict(mode="ofdm", detector="ml"),
        dict(scheme="dapsk", M=16),
        dict(scheme="dapsk", K=1, N_s=1, N_d=1, M=16, q_b=1, detector="energy"),
        dict(scheme="dapsk", K=1, N_s=1, N_d=1, M=16, q_b=1, detector="vql", vql=(5, 5, 5)),
        dict(scheme="coherent", xi=0.1),
        dict(snr_db=()),
        dict(seed=-1),
    ],
)
def test_invalid_configs_rejected(kw):
    with pytest.raises(ConfigError):
        SimConfig(**kw).validate()


def test_threshold_depends_only_on_its_snr():
    cfg = dict(scheme="dapsk", K=1, N_s=1, N_d=1, M=16, U=42, q_b=2, bussgang_samples=10**5)
    a = prepare(SimConfig(snr_db=(0.0, 10.0), **cfg)).thresholds[10.0]
    b = prepare(SimConfig(snr_db=(10.0,), **cfg)).thresholds[10.0]
    assert a == b


def test_threshold_table_shape():
    rows = threshold_table([16, 32], [10.0], trials=10**4)
    assert [(r[0], r[1]) for r in rows] == [(16, 10.0), (32, 10.0)]
    for _, _, mc, an in rows:
        assert mc > 0 and an > 0


def test_dapsk_counts_amplitude_bits():
    cfg = _small(scheme="dapsk", K=1, N_s=1, N_d=1, M=16, q_b=2, U=42, trials=2, snr_db=(10.0,),
                 calibration_trials=10**4)
    rec = sweep(cfg)[0]
    assert rec.amp_bits == 2 * 31
    assert rec.bits == 2 * 31 * 4
    assert 0 <= rec.amp_ber <= 1

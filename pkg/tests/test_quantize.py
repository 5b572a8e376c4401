import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffmimo.quantize import (
    QuantizerSpec,
    bussgang_calibrate,
    calibrated,
    dapsk_thresholds,
    dapsk_two_bit_spec,
    equiprobable_spec,
    gaussian_centroids,
    one_bit,
    one_bit_spec,
    quantize_complex,
    quantize_vql,
    vql_partition,
    VqlPartition,
)
from diffmimo.statmath import RandomSource

from oracles import gaussian_centroid


def test_one_bit_values():
    assert one_bit(0.3 - 0.2j) == 1 - 1j
    assert one_bit(-5 + 7j) == -1 + 1j
    assert one_bit(0j) == 1 + 1j
    x = np.random.default_rng(0).standard_normal(100) * (1 + 2j)
    assert np.allclose(np.abs(one_bit(x)) ** 2, 2.0)


def test_one_bit_spec_agrees_with_sign():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    assert np.array_equal(quantize_complex(x, one_bit_spec()), one_bit(x))


def test_two_bit_index_and_thresholds():
    spec = dapsk_two_bit_spec(2.0)
    assert spec.indices(0.5) == 2
    assert spec.indices(0.0) == 2
    assert spec.indices(-5.0) == 0
    assert spec.indices(5.0) == 3
    z2, z3, z4 = dapsk_thresholds(2.0)
    assert abs(z4 - 0.894427191) < 1e-9 and z2 == -z4 and z3 == 0.0
    assert abs(dapsk_thresholds(1 + 1e-9)[2] - np.sqrt(0.5)) < 1e-6
    with pytest.raises(ValueError):
        dapsk_thresholds(1.0)


def test_two_bit_centroids_match_quadrature():
    spec = dapsk_two_bit_spec(2.0)
    sd = np.sqrt(0.5)
    b = spec.boundaries
    for l in range(4):
        assert abs(spec.labels[l] - gaussian_centroid(b[l], b[l + 1], sd)) < 1e-8


def test_centroids_scale_with_variance():
    b = np.array([-np.inf, -0.3, 0.2, np.inf])
    c1 = gaussian_centroids(b * 2, 4.0)
    c0 = gaussian_centroids(b, 1.0)
    assert np.allclose(c1, 2 * c0)


def test_spec_validation():
    with pytest.raises(ValueError):
        QuantizerSpec(1, np.array([0.0, 1.0, np.inf]), np.array([-1.0, 1.0]))
    with pytest.raises(ValueError):
        QuantizerSpec(1, np.array([-np.inf, 0.0, np.inf]), np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        QuantizerSpec(2, np.array([-np.inf, 0.0, np.inf]), np.array([-1.0, 1.0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.sampled_from([1, 2, 3]))
def test_quantizer_idempotent(v, bits):
    spec = equiprobable_spec(bits)
    z = complex(v[0], v[1])
    q = quantize_complex(z, spec)
    assert quantize_complex(q, spec) == q
    assert np.array_equal(spec.label_indices(q.real), spec.indices(z.real))


def test_bussgang_one_bit():
    rng = RandomSource(3).generator()
    eta, noise = bussgang_calibrate(one_bit_spec(), 1.0, rng, 10**6)
    assert abs(eta - np.sqrt(4 / np.pi)) / np.sqrt(4 / np.pi) < 0.01
    assert abs(noise - (2 - 4 / np.pi)) / (2 - 4 / np.pi) < 0.02


def test_bussgang_distortion_uncorrelated_and_power_identity():
    spec = calibrated(dapsk_two_bit_spec(2.0), RandomSource(4).generator())
    rng = RandomSource(5).generator()
    x = (rng.standard_normal(400_000) + 1j * rng.standard_normal(400_000)) / np.sqrt(2)
    q = quantize_complex(x, spec)
    eps = q - spec.eta * x
    assert abs(np.mean(eps * x.conj())) < 5e-3
    assert abs(np.mean(np.abs(q) ** 2) - (spec.eta**2 + spec.noise_var)) < 5e-3


def test_bussgang_rejects_bad_inputs():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        bussgang_calibrate(one_bit_spec(), 0.0, rng)
    with pytest.raises(ValueError):
        bussgang_calibrate(one_bit_spec(), 1.0, rng, 1000)


def test_vql_partition_sizes_and_outputs():
    part = vql_partition(126)
    assert [g.size for g in part.groups] == [42, 42, 42]
    assert part.num_antennas == 126
    rng = np.random.default_rng(6)
    y = rng.standard_normal((10, 126)) + 1j * rng.standard_normal((10, 126))
    q = quantize_vql(y, part)
    sg = q[:, part.sgn_antennas]
    assert np.all(np.isin(sg.real, [-1, 1])) and np.all(np.isin(sg.imag, [-1, 1]))
    # every group is one-bit: two output levels per dimension
    for idx in part.groups:
        assert np.unique(q[:, idx].real).size <= 2
    with pytest.raises(ValueError):
        quantize_vql(y[:, :10], part)


def test_vql_partition_validation():
    assert [g.size for g in vql_partition(10).groups] == [4, 3, 3]
    with pytest.raises(ValueError):
        vql_partition(10, sizes=[3, 3, 3])
    s = one_bit_spec()
    with pytest.warns(UserWarning):
        VqlPartition((np.arange(2), np.arange(2, 4)), (s, s), 0)
    with pytest.raises(ValueError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            VqlPartition((np.arange(3), np.arange(2, 4)), (s, s), 0)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffmimo.diffcode import (
    DapskState,
    DispersionSet,
    PskConstellation,
    alamouti_dispersion,
    build_data_matrix,
    dapsk_encode,
    dapsk_modulate,
    diff_encode,
    ring_amplitudes,
    scalar_dispersion,
    to_transmit,
)

from oracles import alamouti_matrix

R2 = np.sqrt(2)


def test_alamouti_matrices():
    d = alamouti_dispersion()
    assert np.array_equal(d.A[0], [[1, 0], [0, 0]])
    assert np.array_equal(d.A[1], [[0, 1], [0, 0]])
    assert np.array_equal(d.B[0], [[0, 0], [0, 1]])
    assert np.array_equal(d.B[1], [[0, 0], [-1, 0]])
    assert d.N_s == 2 and d.N_d == 2


@pytest.mark.parametrize(
    "s, expected",
    [
        ((1, 1), [[1, 1], [-1, 1]]),
        ((1, 1j), [[1, 1j], [1j, 1]]),
        ((1j, -1j), [[1j, -1j], [-1j, -1j]]),
    ],
)
def test_data_matrix_values(s, expected):
    S = build_data_matrix(np.array(s), alamouti_dispersion())
    assert np.allclose(S, np.array(expected) / R2, atol=1e-15)
    assert np.allclose(S.conj().T @ S, np.eye(2), atol=1e-12)


def test_data_matrix_matches_explicit_form():
    rng = np.random.default_rng(0)
    s = np.exp(2j * np.pi * rng.random((50, 2)))
    S = build_data_matrix(s, alamouti_dispersion())
    for k in range(50):
        assert np.allclose(S[k], alamouti_matrix(*s[k]))


def test_data_matrix_rejects_non_unit_symbols():
    with pytest.raises(ValueError):
        build_data_matrix(np.array([2.0, 1.0]), alamouti_dispersion())
    with pytest.raises(ValueError):
        build_data_matrix(np.array([1.0]), alamouti_dispersion())


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_gamma_identity_property(v):
    q = np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]])
    G = alamouti_dispersion().gamma(q)
    gram = G.conj().T @ G
    assert np.allclose(gram, np.vdot(q, q).real * np.eye(4), atol=1e-10 * max(1, np.vdot(q, q).real))


def test_gamma_reproduces_received_block():
    # [q S; (q S)*] equals Gamma(q) applied to [s; s*] / sqrt(2)
    d = alamouti_dispersion()
    rng = np.random.default_rng(1)
    q = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    s = np.exp(2j * np.pi * rng.random(2))
    y = q @ alamouti_matrix(*s)
    G = d.gamma(q)
    assert G.shape == (4, 4)
    assert np.allclose(np.concatenate([y, y.conj()]), G @ np.concatenate([s, s.conj()]) / R2)


def test_invalid_dispersion_rejected():
    A = np.ones((2, 2, 2))
    B = np.zeros((2, 2, 2))
    with pytest.raises(ValueError):
        DispersionSet(A, B)
    with pytest.raises(ValueError):
        DispersionSet(np.ones((2, 2, 3)), np.ones((2, 2, 3)))


def test_scalar_dispersion_is_plain_dpsk():
    d = scalar_dispersion()
    S = build_data_matrix(np.array([1j]), d)
    assert S.shape == (1, 1) and np.isclose(S[0, 0], 1j)


def test_diff_encode_first_block_and_recursion():
    d = alamouti_dispersion()
    psk = PskConstellation(4)
    rng = np.random.default_rng(2)
    blocks = psk.points[rng.integers(0, 4, (128, 2))]
    blocks[0] = [1, 1]
    C = diff_encode(blocks, d)
    assert C.shape == (2, 256)
    assert np.allclose(C[:, :2], np.array([[1, 1], [-1, 1]]) / R2)
    prev = np.eye(2)
    for v in range(128):
        prev = prev @ alamouti_matrix(*blocks[v])
        Cv = C[:, 2 * v: 2 * v + 2]
        assert np.allclose(Cv, prev, atol=1e-12)
    last = C[:, -2:]
    assert np.allclose(last.conj().T @ last, np.eye(2), atol=1e-10)


def test_to_transmit_modes():
    rng = np.random.default_rng(3)
    C = rng.standard_normal((2, 16)) + 1j * rng.standard_normal((2, 16))
    assert to_transmit(C, "sc") is C
    X = to_transmit(C, "ofdm")
    assert np.allclose(np.fft.fft(X, norm="ortho", axis=-1), C, atol=1e-12)
    assert np.allclose(np.sum(np.abs(X) ** 2, axis=1), np.sum(np.abs(C) ** 2, axis=1))
    with pytest.raises(ValueError):
        to_transmit(C, "fdd")


def test_psk_gray_and_anchor():
    for M in (2, 4, 8, 16, 32):
        psk = PskConstellation(M)
        nb = psk.bits_per_symbol
        assert np.isclose(psk.map(np.zeros(nb, dtype=int)), 1.0)
        table = psk.bit_table
        for m in range(M):
            assert np.sum(table[m] != table[(m + 1) % M]) == 1
        assert np.array_equal(psk.demap(psk.map(table)), table)
        assert len({tuple(r) for r in table}) == M


def test_psk_rejects_bad_order():
    with pytest.raises(ValueError):
        PskConstellation(6)
    with pytest.raises(ValueError):
        PskConstellation(4).map(np.zeros(3, dtype=int))


@settings(max_examples=50, deadline=None)
@given(st.floats(-np.pi, np.pi), st.sampled_from([4, 8, 16]))
def test_nearest_index_matches_distance(theta, M):
    psk = PskConstellation(M)
    z = 0.7 * np.exp(1j * theta)
    assert psk.nearest_index(z) == np.argmin(np.abs(psk.points - z))


def test_ring_amplitudes():
    psi0, psi1 = ring_amplitudes(2.0)
    assert np.isclose(psi0, np.sqrt(2 / 5))
    assert np.isclose(psi1, 1.2649110640673518)
    assert np.isclose(psi0**2 + psi1**2, 2.0)
    with pytest.raises(ValueError):
        ring_amplitudes(1.0)


def test_dapsk_encode_amplitude_rules():
    psk = PskConstellation(8)
    st0 = DapskState()
    x, s1 = dapsk_encode(np.array([0, 0, 0, 0]), st0, psk)
    assert np.isclose(abs(x), st0.psi0)
    x, s2 = dapsk_encode(np.array([1, 0, 0, 0]), s1, psk)
    assert np.isclose(abs(x), 1.2649110640673518)
    x, s3 = dapsk_encode(np.array([1, 0, 0, 1]), s2, psk)
    assert np.isclose(abs(x), st0.psi0)
    assert np.isclose(s3.prev_code, psk.map(np.array([0, 0, 1])))
    with pytest.raises(ValueError):
        dapsk_encode(np.array([1, 0]), s3, psk)


def test_dapsk_state_validation():
    with pytest.raises(ValueError):
        DapskState(prev_amp=0.9)


def test_dapsk_modulate_matches_sequential_encoder():
    psk = PskConstellation(8)
    rng = np.random.default_rng(4)
    bits = rng.integers(0, 2, (200, 4))
    x = dapsk_modulate(bits, psk, 2.0)
    assert x.shape == (201,)
    assert np.isclose(x[0], ring_amplitudes(2.0)[0])
    state = DapskState()
    for v in range(200):
        xv, state = dapsk_encode(bits[v], state, psk)
        assert np.isclose(x[v + 1], xv)
    amps = np.abs(x)
    assert np.all(np.isclose(amps, ring_amplitudes(2.0)[0]) | np.isclose(amps, ring_amplitudes(2.0)[1]))

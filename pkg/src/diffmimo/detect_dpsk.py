"""DPSK detection from quantized adjacent blocks.

Both detectors treat the previous quantized block as the channel reference:
``q[v] = N_s^{-1/2} (A_t s + B_t s*) + w`` where ``A_t, B_t`` are built from
``q[v-1]`` (see :meth:`DispersionSet.stacked`).

Shapes: ``q_prev`` and ``q_curr`` are ``(..., U, N_d)``; decisions are
``(..., N_s)`` constellation indices.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import special

from .diffcode import DispersionSet, PskConstellation
from .quantize import QuantizerSpec
from .statmath import log_normal_cdf_diff

__all__ = [
    "candidate_blocks",
    "block_means",
    "refine_rows",
    "one_bit_loglik",
    "ml_one_bit_detect",
    "bin_loglik",
    "ml_multibit_detect",
    "matched_combine",
    "decoupled_detect",
    "joint_metric",
    "argmax_lowest",
]


def argmax_lowest(values, rtol: float = 1e-12) -> np.ndarray:
    """Index of the maximum over the last axis, lowest index among near-ties.

    One-bit labels take few distinct values, so different candidates often
    have exactly equal likelihoods whose floating-point sums differ in the
    last bits; values within ``rtol`` of the maximum are treated as tied.
    """
    values = np.asarray(values, dtype=float)
    best = values.max(axis=-1, keepdims=True)
    tol = rtol * np.maximum(np.abs(best), 1.0)
    return np.argmax(values >= best - tol, axis=-1)


def candidate_blocks(constellation: PskConstellation, N_s: int):
    """All ``M^N_s`` joint candidates as ``(indices, symbols)``, lexicographic order."""
    idx = np.array(list(itertools.product(range(constellation.M), repeat=N_s)), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty candidate set")
    return idx, constellation.points[idx]


def _rows(q_prev, disp: DispersionSet):
    """``f_u[l] = [A_t[l, :], B_t[l, :]]``, shape ``(..., U, N_d, 2 N_s)``."""
    At, Bt = disp.stacked(q_prev)
    return np.concatenate([At, Bt], axis=-1)


def block_means(q_prev, disp: DispersionSet, cand_symbols) -> np.ndarray:
    """Noise-free ``f_u[l]^T s_tilde`` for every candidate: ``(..., C, U, N_d)``.

    Excludes the ``N_s^{-1/2}`` factor.
    """
    F = _rows(q_prev, disp)
    s_tilde = np.concatenate([cand_symbols, np.conj(cand_symbols)], axis=-1)  # (C, 2N_s)
    return np.einsum("...ulm,cm->...cul", F, s_tilde)


def refine_rows(q_prev, q_curr, disp: DispersionSet) -> np.ndarray:
    """Sign-refined real rows, shape ``(..., U, N_d, 2, 4 N_s)``.

    Row ``(u, l, i)`` is the real form of ``f_u[l]`` producing the real
    (``i = 0``) or imaginary (``i = 1``) part of ``f_u[l]^T s_tilde``,
    multiplied by the sign of the matching component of ``q_curr``.
    """
    q_curr = np.asarray(q_curr)
    if not (np.all(np.abs(q_curr.real) == 1) and np.all(np.abs(q_curr.imag) == 1)):
        raise ValueError("sign refinement needs one-bit labels in the current block")
    f = _rows(q_prev, disp)
    re_row = np.concatenate([f.real, -f.imag], axis=-1)
    im_row = np.concatenate([f.imag, f.real], axis=-1)
    rows = np.stack([re_row, im_row], axis=-2)
    signs = np.stack([q_curr.real, q_curr.imag], axis=-1)
    return rows * signs[..., None]


def one_bit_loglik(q_prev, q_curr, disp: DispersionSet, cand_symbols, rho) -> np.ndarray:
    """``sum log Phi`` over antennas, rows and I/Q for each candidate: ``(..., C)``.

    The probit argument is ``sqrt(2 rho / N_s) * refined mean``, i.e. the
    refined mean divided by the per-dimension standard deviation of a
    composite noise of total power ``1 / rho``.
    """
    q_curr = np.asarray(q_curr)
    if not (np.all(np.abs(q_curr.real) == 1) and np.all(np.abs(q_curr.imag) == 1)):
        raise ValueError("one-bit likelihood needs +-1 labels in the current block")
    z = block_means(q_prev, disp, cand_symbols)  # (..., C, U, N_d)
    scale = np.sqrt(2.0 * rho / disp.N_s)
    sr = q_curr.real[..., None, :, :]
    si = q_curr.imag[..., None, :, :]
    ll = special.log_ndtr(scale * sr * z.real) + special.log_ndtr(scale * si * z.imag)
    return ll.sum(axis=(-1, -2))


def ml_one_bit_detect(q_prev, q_curr, disp: DispersionSet, constellation: PskConstellation, rho,
                      chunk: int = 64) -> np.ndarray:
    """Exhaustive one-bit ML over all ``M^N_s`` blocks; ties go to the lowest index."""
    idx, cand = candidate_blocks(constellation, disp.N_s)
    q_prev = np.asarray(q_prev)
    q_curr = np.asarray(q_curr)
    batch = q_prev.shape[:-2]
    if not batch:
        return idx[argmax_lowest(one_bit_loglik(q_prev, q_curr, disp, cand, rho))]
    qp = q_prev.reshape((-1,) + q_prev.shape[-2:])
    qc = q_curr.reshape((-1,) + q_curr.shape[-2:])
    out = np.empty((qp.shape[0], disp.N_s), dtype=np.int64)
    for start in range(0, qp.shape[0], chunk):
        sl = slice(start, start + chunk)
        ll = one_bit_loglik(qp[sl], qc[sl], disp, cand, rho)
        out[sl] = idx[argmax_lowest(ll)]
    return out.reshape(batch + (disp.N_s,))


def bin_loglik(q_curr, means, spec: QuantizerSpec, rho) -> np.ndarray:
    """Bin log-probabilities of the observed labels given complex means, summed over ``(U, N_d)``.

    ``means`` is ``(..., C, U, N_d)`` in the label domain; the bin edges are
    scaled by the Bussgang gain and the per-dimension noise deviation is
    ``1 / sqrt(2 rho)``.  With the sign quantizer this equals the one-bit
    probit likelihood.
    """
    eta = 1.0 if spec.eta is None else spec.eta
    edges = eta * spec.boundaries
    c = np.sqrt(2.0 * rho)
    q_curr = np.asarray(q_curr)
    total = 0.0
    for obs, mean in ((q_curr.real, means.real), (q_curr.imag, means.imag)):
        lab = spec.label_indices(obs)[..., None, :, :]
        total = total + log_normal_cdf_diff(c * (edges[lab] - mean), c * (edges[lab + 1] - mean)).sum(axis=(-1, -2))
    return total


def ml_multibit_detect(q_prev, q_curr, disp: DispersionSet, constellation: PskConstellation, spec: QuantizerSpec,
                       rho, chunk: int = 64) -> np.ndarray:
    """Exhaustive ML over all blocks using the bin-probability likelihood."""
    idx, cand = candidate_blocks(constellation, disp.N_s)
    q_prev = np.asarray(q_prev)
    q_curr = np.asarray(q_curr)
    batch = q_prev.shape[:-2]
    qp = q_prev.reshape((-1,) + q_prev.shape[-2:])
    qc = q_curr.reshape((-1,) + q_curr.shape[-2:])
    out = np.empty((qp.shape[0], disp.N_s), dtype=np.int64)
    for start in range(0, qp.shape[0], chunk):
        sl = slice(start, start + chunk)
        means = block_means(qp[sl], disp, cand) / np.sqrt(disp.N_s)
        out[sl] = idx[argmax_lowest(bin_loglik(qc[sl], means, spec, rho))]
    return out.reshape(batch + (disp.N_s,))


def matched_combine(q_prev, q_curr, disp: DispersionSet):
    """First ``N_s`` entries of ``Gamma_u^H q_tilde_u`` summed over antennas, and the summed gain.

    Returns ``(r, gain)`` with ``r`` of shape ``(..., N_s)`` and
    ``gain = N_s^{-1/2} sum_u ||q_prev_u||^2``.
    """
    # sum_u conj(A_t) q_curr only needs the N_d x N_d Gram matrix q_prev^H q_curr
    q_prev = np.asarray(q_prev)
    G = np.swapaxes(np.conj(q_prev), -1, -2) @ np.asarray(q_curr)
    r = np.einsum("nij,...ij->...n", np.conj(disp.A), G) + np.einsum("nij,...ij->...n", disp.B, np.conj(G))
    gain = np.sum(np.abs(q_prev) ** 2, axis=(-1, -2)) / np.sqrt(disp.N_s)
    return r, gain


def decoupled_detect(q_prev, q_curr, disp: DispersionSet, constellation: PskConstellation) -> np.ndarray:
    """Per-symbol nearest point to the matched-combined statistic.

    Works for any label resolution (including post-FFT OFDM samples).  For
    constant-modulus constellations the nearest point does not depend on
    the gain, so only the phase of ``r`` matters.
    """
    r, gain = matched_combine(q_prev, q_curr, disp)
    d = np.abs(r[..., None] - gain[..., None, None] * constellation.points)
    return np.argmin(d, axis=-1)


def joint_metric(q_prev, q_curr, disp: DispersionSet, cand_symbols) -> np.ndarray:
    """``sum_u ||q_tilde_u - N_s^{-1/2} Gamma_u s_tilde||^2`` per candidate, ``(..., C)``."""
    G = disp.gamma(q_prev)  # (..., U, 2N_d, 2N_s)
    q_curr = np.asarray(q_curr)
    q_tilde = np.concatenate([q_curr, np.conj(q_curr)], axis=-1)
    s_tilde = np.concatenate([cand_symbols, np.conj(cand_symbols)], axis=-1)
    pred = np.einsum("...ujm,cm->...cuj", G, s_tilde) / np.sqrt(disp.N_s)
    return np.sum(np.abs(q_tilde[..., None, :, :] - pred) ** 2, axis=(-1, -2))

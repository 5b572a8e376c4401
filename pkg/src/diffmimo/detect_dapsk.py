"""Receivers for two-ring DAPSK with low-resolution ADCs.

Observations are the quantized samples at two consecutive uses,
``q_prev`` and ``q_curr``, with antennas on the last axis; any leading axes
are treated as a batch.  The model behind the likelihood detectors is
``q_curr = a' s q_prev + w`` with ``a'`` the ring transition in
``{1, a, 1/a}``.

Candidate order everywhere: ring transition outer (``1, a, 1/a``), PSK
point inner, so flat index ``t * M + m``.
"""

from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import special

from .detect_dpsk import argmax_lowest
from .diffcode import PskConstellation, ring_amplitudes
from .quantize import QuantizerSpec, VqlPartition, quantize_complex, quantize_vql
from .statmath import complex_gaussian, log_normal_cdf_diff

__all__ = [
    "transition_set",
    "rho_set",
    "ml_one_bit_dapsk",
    "inverse_decode",
    "multibit_ml",
    "energy_statistic",
    "EnergyModel",
    "energy_model",
    "amplitude_threshold",
    "pdf_intersection",
    "sample_energy",
    "calibrate_threshold_mc",
    "detect_amplitude",
    "energy_detect",
    "vql_detect",
    "recover_bits",
]


def transition_set(a: float) -> np.ndarray:
    return np.array([1.0, a, 1.0 / a])


def rho_set(eta: float, noise_var: float, sigma_z2: float, a: float) -> np.ndarray:
    """Genie SNRs ``1 / ((1 + a'^2)(eta^2 sigma_z^2 + sigma_eps^2))`` for ``a' = 1, a, 1/a``.

    ``sigma_z2`` is the thermal noise power in the units seen by the ADC.
    """
    base = eta * eta * sigma_z2 + noise_var
    with np.errstate(divide="ignore"):
        return 1.0 / ((1.0 + transition_set(a) ** 2) * base)


def _products(q_prev, constellation):
    """``q_prev * s`` for every PSK point: ``(..., M, U)``."""
    return np.asarray(q_prev)[..., None, :] * constellation.points[:, None]


def _split(flat, M, a):
    t, m = np.divmod(flat, M)
    return transition_set(a)[t], m


def ml_one_bit_dapsk(q_prev, q_curr, rhos, constellation: PskConstellation, a: float,
                     transitions=None):
    """One-bit ML over ring transitions and PSK points.

    For each candidate the log-likelihood ``sum log Phi(sqrt(2 rho) a' sign * (q_prev s))``
    is evaluated at every ``rho`` in ``rhos``; the best ``rho`` is kept and the
    candidate with the largest value wins (lowest index on ties).

    Returns ``(a_hat, s_index)``.
    """
    q_curr = np.asarray(q_curr)
    if not (np.all(np.abs(q_curr.real) == 1) and np.all(np.abs(q_curr.imag) == 1)):
        raise ValueError("one-bit DAPSK ML needs +-1 labels")
    ratios = transition_set(a) if transitions is None else np.asarray(transitions, dtype=float)
    p = _products(q_prev, constellation)  # (..., M, U)
    base_r = q_curr.real[..., None, :] * p.real
    base_i = q_curr.imag[..., None, :] * p.imag
    c = np.sqrt(2.0 * np.asarray(rhos, dtype=float))
    scale = (c[:, None] * ratios[None, :])[..., None, None]  # (R, T, 1, 1)
    ll = (special.log_ndtr(scale * base_r[..., None, None, :, :])
          + special.log_ndtr(scale * base_i[..., None, None, :, :])).sum(axis=-1)  # (..., R, T, M)
    ll = ll.max(axis=-3)
    flat = argmax_lowest(ll.reshape(ll.shape[:-2] + (-1,)))
    t, m = np.divmod(flat, constellation.M)
    return ratios[t], m


def inverse_decode(q_prev, q_curr, constellation: PskConstellation, a: float):
    """Least-squares estimate of ``a' s`` followed by a nearest-point decision.

    ``x_hat = pinv(F_R) q_R``; because ``F_R`` is the real form of
    multiplication by ``q_prev``, this equals
    ``sum_u conj(q_prev_u) q_curr_u / sum_u |q_prev_u|^2``.

    Returns ``(a_hat, s_index, ok)``; ``ok`` is False when ``q_prev`` is all
    zero (rank-deficient system), in which case the decision is arbitrary
    and must be counted as an error.
    """
    q_prev = np.asarray(q_prev)
    q_curr = np.asarray(q_curr)
    energy = np.sum(np.abs(q_prev) ** 2, axis=-1)
    ok = energy > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        x_hat = np.where(ok, np.sum(np.conj(q_prev) * q_curr, axis=-1) / np.where(ok, energy, 1.0), 0.0)
    cands = (transition_set(a)[:, None] * constellation.points[None, :]).ravel()
    d = np.abs(np.asarray(x_hat)[..., None] - cands) ** 2
    a_hat, m = _split(d.argmin(axis=-1), constellation.M, a)
    return a_hat, m, ok


def inverse_decode_estimate(q_prev, q_curr):
    """The unconstrained estimate ``x_hat`` alone."""
    q_prev = np.asarray(q_prev)
    return np.sum(np.conj(q_prev) * q_curr, axis=-1) / np.sum(np.abs(q_prev) ** 2, axis=-1)


def multibit_ml(q_prev, q_curr, spec: QuantizerSpec, rhos, constellation: PskConstellation, a: float,
                transitions=None):
    """Exact-model ML with bin probabilities for any resolution.

    Per antenna and dimension the probability of the observed bin is
    ``Phi(c (eta z_hi - a' m)) - Phi(c (eta z_lo - a' m))`` with
    ``m = Re/Im(q_prev s)``, ``c = sqrt(2 rho)`` and the bin edges mapped
    into the label domain by the Bussgang gain ``eta``.  With the sign
    quantizer this reduces to :func:`ml_one_bit_dapsk`.

    Returns ``(a_hat, s_index, erased)``; ``erased`` marks observations that
    have zero probability under every candidate.
    """
    eta = 1.0 if spec.eta is None else spec.eta
    ratios = transition_set(a) if transitions is None else np.asarray(transitions, dtype=float)
    q_curr = np.asarray(q_curr)
    lr = spec.label_indices(q_curr.real)
    li = spec.label_indices(q_curr.imag)
    edges = eta * spec.boundaries
    p = _products(q_prev, constellation)  # (..., M, U)
    c = np.sqrt(2.0 * np.asarray(rhos, dtype=float))[:, None, None, None]  # (R, 1, 1, 1)
    ar = ratios[:, None, None]  # (T, 1, 1)
    total = 0.0
    for comp, lab in ((p.real, lr), (p.imag, li)):
        mean = ar * comp[..., None, :, :]  # (..., T, M, U)
        lo = edges[lab][..., None, None, :]
        hi = edges[lab + 1][..., None, None, :]
        mean = mean[..., None, :, :, :]  # (..., 1, T, M, U)
        lo = lo[..., None, :, :, :]
        hi = hi[..., None, :, :, :]
        total = total + log_normal_cdf_diff(c * (lo - mean), c * (hi - mean)).sum(axis=-1)
    ll = total.max(axis=-3)  # (..., T, M)
    flat_ll = ll.reshape(ll.shape[:-2] + (-1,))
    erased = ~np.isfinite(flat_ll).any(axis=-1)
    with np.errstate(invalid="ignore"):
        flat = np.where(erased, 0, argmax_lowest(np.where(erased[..., None], 0.0, flat_ll)))
    t, m = np.divmod(flat, constellation.M)
    return ratios[t], m, erased


def energy_statistic(q) -> np.ndarray:
    """``(1/U) sum_u |q_u|^2`` over the last axis."""
    q = np.asarray(q)
    return np.mean(q.real**2 + q.imag**2, axis=-1)


@dataclass(frozen=True)
class EnergyModel:
    """Large-array Gaussian model of the energy statistic.

    ``noise`` is the composite distortion-plus-noise power at the quantizer
    output and ``alpha2`` the hardened channel power seen by the ADC.
    """

    eta: float
    noise: float
    alpha2: float
    U: int
    psi0: float
    psi1: float

    def __post_init__(self):
        if min(self.eta, self.noise, self.alpha2, self.psi0, self.psi1) <= 0 or self.U < 1:
            raise ValueError("energy model parameters must be positive")

    def moments(self, amplitude: float):
        """Mean and variance of the statistic when the ring amplitude is ``amplitude``."""
        signal = amplitude**2 * self.eta**2 * self.alpha2
        mean = self.noise + signal
        var = 2.0 * self.noise / self.U * (2.0 * self.noise + 2.0 * signal)
        return mean, var


def energy_model(quantizer, U: int, snr_db: float, a: float, alpha2: float | None = None) -> EnergyModel:
    """Energy model for a calibrated quantizer (or VQL partition, or ``None`` for no ADC).

    Received samples are normalised to unit average power before the ADC,
    so channel and thermal noise powers are both divided by ``1 + sigma_z^2``.
    """
    sigma_z2 = 10.0 ** (-snr_db / 10.0)
    agc = 1.0 / (1.0 + sigma_z2)
    eta, noise = _bussgang_pair(quantizer)
    psi0, psi1 = ring_amplitudes(a)
    return EnergyModel(
        eta=eta,
        noise=eta * eta * sigma_z2 * agc + noise,
        alpha2=agc if alpha2 is None else alpha2,
        U=U,
        psi0=psi0,
        psi1=psi1,
    )


def _bussgang_pair(quantizer):
    if quantizer is None:
        return 1.0, 0.0
    if isinstance(quantizer, VqlPartition):
        sizes = np.array([g.size for g in quantizer.groups], dtype=float)
        if any(s.eta is None for s in quantizer.specs):
            raise ValueError("VQL group quantizers must be Bussgang-calibrated")
        eta2 = np.array([s.eta**2 for s in quantizer.specs])
        noise = np.array([s.noise_var for s in quantizer.specs])
        w = sizes / sizes.sum()
        return float(np.sqrt(w @ eta2)), float(w @ noise)
    if quantizer.eta is None:
        raise ValueError("quantizer must be Bussgang-calibrated")
    return quantizer.eta, quantizer.noise_var


def _gauss_logpdf(x, mean, var):
    return -0.5 * (x - mean) ** 2 / var - 0.5 * np.log(2 * np.pi * var)


def pdf_intersection(mean0, var0, mean1, var1, tol: float = 1e-13) -> float:
    """Point in ``(mean0, mean1)`` where the two Gaussian densities are equal (bisection)."""
    f = lambda x: _gauss_logpdf(x, mean1, var1) - _gauss_logpdf(x, mean0, var0)
    lo, hi = mean0, mean1
    flo = f(lo)
    if flo * f(hi) > 0:
        raise ValueError("densities do not cross between the means")
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def amplitude_threshold(model: EnergyModel) -> float:
    """Closed-form threshold: root of the equal-density quadratic between the two ring means."""
    if np.isclose(model.psi0, model.psi1):
        raise ValueError("ring amplitudes must differ")
    m0, v0 = model.moments(model.psi0)
    m1, v1 = model.moments(model.psi1)
    A = 1.0 / v1 - 1.0 / v0
    B = m1 / v1 - m0 / v0
    C = m1 * m1 / v1 - m0 * m0 / v0 + np.log(v1 / v0)
    # A g^2 - 2 B g + C = 0
    if abs(A) <= 1e-12 * max(abs(1.0 / v1), abs(1.0 / v0)):
        roots = [C / (2.0 * B)]
    else:
        disc = B * B - A * C
        if disc >= 0:
            sq = np.sqrt(disc)
            # cancellation-free pair
            r1 = (B + np.copysign(sq, B)) / A
            r2 = C / (A * r1) if r1 != 0 else (B - np.copysign(sq, B)) / A
            roots = [r1, r2]
        else:
            roots = []
    inside = [r for r in roots if m0 < r < m1]
    if inside:
        return float(inside[0])
    return pdf_intersection(m0, v0, m1, v1)


def sample_energy(quantizer, U: int, snr_db: float, amplitude: float, rng: np.random.Generator,
                  trials: int) -> np.ndarray:
    """Energy statistic under Rayleigh channels for a fixed ring amplitude, ``(trials,)``."""
    sigma_z2 = 10.0 ** (-snr_db / 10.0)
    h = complex_gaussian(rng, 1.0, (trials, U))
    phase = np.exp(2j * np.pi * rng.random((trials, 1)))
    y = h * amplitude * phase
    if sigma_z2 > 0:
        y = y + complex_gaussian(rng, sigma_z2, (trials, U))
    y = y / np.sqrt(1.0 + sigma_z2)
    return energy_statistic(_quantize(y, quantizer))


def _quantize(y, quantizer):
    if quantizer is None:
        return y
    if isinstance(quantizer, VqlPartition):
        return quantize_vql(y, quantizer)
    return quantize_complex(y, quantizer)


def min_error_threshold(lam0, lam1) -> float:
    """Threshold minimising the empirical misclassification count of two samples."""
    lam0 = np.asarray(lam0, dtype=float)
    lam1 = np.asarray(lam1, dtype=float)
    vals = np.concatenate([lam0, lam1])
    lab = np.concatenate([np.zeros(lam0.size, int), np.ones(lam1.size, int)])
    order = np.argsort(vals, kind="stable")
    vals, lab = vals[order], lab[order]
    # errors when the threshold sits just before sorted position k
    ones_below = np.concatenate([[0], np.cumsum(lab)])
    zeros_above = lam0.size - np.concatenate([[0], np.cumsum(1 - lab)])
    errors = ones_below + zeros_above
    # a split is only realisable between distinct values
    valid = np.ones(vals.size + 1, dtype=bool)
    valid[1:-1] = vals[1:] > vals[:-1]
    errors = np.where(valid, errors, vals.size + 1)
    best = np.flatnonzero(errors == errors.min())
    k = int(best[best.size // 2])
    if errors[k] >= min(lam0.size, lam1.size):
        warnings.warn("energy histograms do not separate; using the midpoint of the means", stacklevel=2)
        return float(0.5 * (lam0.mean() + lam1.mean()))
    if k == 0:
        return float(vals[0])
    if k == vals.size:
        return float(np.nextafter(vals[-1], np.inf))
    return float(0.5 * (vals[k - 1] + vals[k]))


def calibrate_threshold_mc(quantizer, U: int, snr_db: float, a: float, rng: np.random.Generator,
                           trials: int = 10**4) -> float:
    """Empirical amplitude threshold from simulated energy statistics of both rings."""
    if trials < 10**4:
        raise ValueError("threshold calibration needs at least 1e4 trials")
    psi0, psi1 = ring_amplitudes(a)
    lam0 = sample_energy(quantizer, U, snr_db, psi0, rng, trials)
    lam1 = sample_energy(quantizer, U, snr_db, psi1, rng, trials)
    return min_error_threshold(lam0, lam1)


def detect_amplitude(lam, gamma: float, prev_ring=None):
    """Ring decisions (0 for ``psi0``, 1 for ``psi1``) and the toggle bit.

    ``lam`` may be a scalar (then ``prev_ring`` is required) or a sequence
    over the last axis, in which case the toggle bits compare consecutive
    decisions and have one entry fewer unless ``prev_ring`` is given.
    """
    if not gamma > 0:
        raise ValueError("threshold must be positive")
    lam = np.asarray(lam, dtype=float)
    ring = (lam >= gamma).astype(np.int64)
    if lam.ndim == 0:
        if prev_ring is None:
            raise ValueError("a scalar decision needs the previous ring")
        return int(ring), int(ring != prev_ring)
    if prev_ring is None:
        return ring, (ring[..., 1:] != ring[..., :-1]).astype(np.int64)
    prev = np.concatenate([np.broadcast_to(prev_ring, ring.shape[:-1] + (1,)), ring[..., :-1]], axis=-1)
    return ring, (ring != prev).astype(np.int64)


def _phase_decision(q_prev, q_curr, constellation, rhos, phase, spec=None):
    if phase == "id":
        x_hat = inverse_decode_estimate(q_prev, q_curr)
        return constellation.nearest_index(x_hat)
    if phase == "ml":
        if spec is None or spec.is_sign:
            _, m = ml_one_bit_dapsk(q_prev, q_curr, rhos, constellation, 2.0, transitions=[1.0])
        else:
            _, m, _ = multibit_ml(q_prev, q_curr, spec, rhos, constellation, 2.0, transitions=[1.0])
        return m
    raise ValueError(f"unknown phase detector {phase!r}")


def energy_detect(q, gamma: float, constellation: PskConstellation, rhos=None, phase: str = "id",
                  spec: QuantizerSpec | None = None):
    """Energy-threshold amplitude detection with a separate phase detector.

    ``q`` is a frame ``(..., V, U)`` of quantized samples.  Returns the toggle
    bits and PSK indices for uses ``1..V-1``.
    """
    q = np.asarray(q)
    _, b1 = detect_amplitude(energy_statistic(q), gamma)
    m = _phase_decision(q[..., :-1, :], q[..., 1:, :], constellation, rhos, phase, spec)
    return b1, m


def vql_detect(partition: VqlPartition, q, gamma: float, constellation: PskConstellation, rhos=None,
               phase: str = "ml"):
    """VQL receiver: energy over all antennas, phase from the sign group only.

    ``q`` is ``(..., V, U)``.  Returns toggle bits and PSK indices for uses ``1..V-1``.
    """
    sgn = partition.sgn_antennas
    if sgn.size == 0:
        raise ValueError("the sign group must not be empty")
    q = np.asarray(q)
    _, b1 = detect_amplitude(energy_statistic(q), gamma)
    qs = q[..., sgn]
    m = _phase_decision(qs[..., :-1, :], qs[..., 1:, :], constellation, rhos, phase)
    return b1, m


def recover_bits(a_hat, s_index, constellation: PskConstellation) -> np.ndarray:
    """Toggle bit (0 iff the detected transition is 1) followed by the PSK bits."""
    a_hat = np.asarray(a_hat, dtype=float)
    b1 = (~np.isclose(a_hat, 1.0)).astype(np.int64)
    rest = constellation.bit_table[np.asarray(s_index)]
    return np.concatenate([b1[..., None], rest], axis=-1)

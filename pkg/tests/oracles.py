"""Reference implementations used only by the tests.

Nothing here calls the package's detector or likelihood code: models are
written out from first principles (explicit code matrices, high-precision
CDFs, direct sums) so agreement is a real cross-check.
"""

import functools
import itertools

import mpmath as mp
import numpy as np
from scipy import integrate, optimize, stats

mp.mp.dps = 40


def alamouti_matrix(s1, s2):
    return np.array([[s1, s2], [-np.conj(s2), np.conj(s1)]]) / np.sqrt(2)


def psk_points(M):
    return np.exp(2j * np.pi * np.arange(M) / M)


def mp_log_phi(x):
    return _mp_log_phi(float(x))


@functools.lru_cache(maxsize=None)
def _mp_log_phi(x):
    # one-bit arguments repeat a lot, so cache on the exact float value
    return mp.log(mp.ncdf(mp.mpf(x)))


def mp_log_bin(lo, hi):
    """log(Phi(hi) - Phi(lo)) in high precision; bounds may be infinite."""
    return _mp_log_bin(float(lo), float(hi))


@functools.lru_cache(maxsize=None)
def _mp_log_bin(lo, hi):
    def cdf(t):
        if t == np.inf:
            return mp.mpf(1)
        if t == -np.inf:
            return mp.mpf(0)
        return mp.ncdf(mp.mpf(float(t)))
    p = cdf(hi) - cdf(lo)
    return mp.log(p) if p > 0 else mp.mpf("-inf")


def lowest_best(values, rtol=1e-12):
    """First index whose value is within ``rtol`` of the maximum."""
    best = max(values)
    tol = rtol * max(abs(best), 1)
    for i, v in enumerate(values):
        if v >= best - tol:
            return i


def dpsk_one_bit_ml(q_prev, q_curr, M, rho):
    """Brute-force one-bit ML for Alamouti DPSK: ``q_curr ~ sign(q_prev S + noise)``.

    Returns the index pair of the best block (lexicographic order, lowest on ties).
    """
    pts = psk_points(M)
    scores = []
    pairs = list(itertools.product(range(M), repeat=2))
    c = np.sqrt(2 * rho)
    for i, j in pairs:
        mean = q_prev @ alamouti_matrix(pts[i], pts[j])
        ll = mp.mpf(0)
        for z, q in zip(mean.ravel(), q_curr.ravel()):
            ll += mp_log_phi(c * np.sign(q.real) * z.real) + mp_log_phi(c * np.sign(q.imag) * z.imag)
        scores.append(ll)
    return pairs[lowest_best(scores)]


def dpsk_joint_min(q_prev, q_curr, M):
    """Exhaustive minimiser of ``||q_curr - q_prev S||^2`` over all Alamouti blocks."""
    pts = psk_points(M)
    pairs = list(itertools.product(range(M), repeat=2))
    d = [np.sum(np.abs(q_curr - q_prev @ alamouti_matrix(pts[i], pts[j])) ** 2) for i, j in pairs]
    return pairs[int(np.argmin(d))]


def dapsk_one_bit_ml(q_prev, q_curr, M, a, rhos):
    """Brute-force one-bit DAPSK ML; returns ``(transition, phase index)``."""
    pts = psk_points(M)
    scores, labels = [], []
    for t in (1.0, a, 1.0 / a):
        for m in range(M):
            mean = t * q_prev * pts[m]
            best = None
            for rho in rhos:
                c = np.sqrt(2 * rho)
                ll = mp.mpf(0)
                for z, q in zip(mean, q_curr):
                    ll += mp_log_phi(c * np.sign(q.real) * z.real) + mp_log_phi(c * np.sign(q.imag) * z.imag)
                best = ll if best is None else max(best, ll)
            scores.append(best)
            labels.append((t, m))
    return labels[lowest_best(scores)]


def dapsk_bin_ml(q_prev, q_curr, M, a, rhos, edges, labels, eta):
    """Brute-force bin-probability DAPSK ML for any scalar quantizer."""
    pts = psk_points(M)
    scores, out = [], []
    lab_r = [int(np.argmin(np.abs(labels - q.real))) for q in q_curr]
    lab_i = [int(np.argmin(np.abs(labels - q.imag))) for q in q_curr]
    for t in (1.0, a, 1.0 / a):
        for m in range(M):
            mean = t * q_prev * pts[m]
            best = None
            for rho in rhos:
                c = np.sqrt(2 * rho)
                ll = mp.mpf(0)
                for u, z in enumerate(mean):
                    for comp, l in ((z.real, lab_r[u]), (z.imag, lab_i[u])):
                        ll += mp_log_bin(c * (eta * edges[l] - comp), c * (eta * edges[l + 1] - comp))
                best = ll if best is None else max(best, ll)
            scores.append(best)
            out.append((t, m))
    return out[lowest_best(scores)]


def real_form(q_prev):
    """``F_R`` with ``[Re(q s); Im(q s)]`` stacked per antenna, shape ``(2U, 2)``."""
    rows = []
    for q in q_prev:
        rows.append([q.real, -q.imag])
        rows.append([q.imag, q.real])
    return np.array(rows)


def gaussian_centroid(lo, hi, sd):
    """Conditional mean of ``N(0, sd^2)`` on ``[lo, hi)`` by quadrature."""
    pdf = stats.norm(scale=sd).pdf
    num = integrate.quad(lambda x: x * pdf(x), lo, hi)[0]
    den = integrate.quad(pdf, lo, hi)[0]
    return num / den


def gaussian_crossing(m0, v0, m1, v1):
    """Where two Gaussian densities cross between their means (Brent's method)."""
    f = lambda x: stats.norm.logpdf(x, m1, np.sqrt(v1)) - stats.norm.logpdf(x, m0, np.sqrt(v0))
    return optimize.brentq(f, m0, m1, xtol=1e-15, rtol=1e-15)


def direct_dft(x):
    N = x.shape[-1]
    n = np.arange(N)
    W = np.exp(-2j * np.pi * np.outer(n, n) / N) / np.sqrt(N)
    return x @ W.T

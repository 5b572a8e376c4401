"""Per-dimension ADC models, Bussgang linearisation and VQL antenna groups."""

from __future__ import annotations

from dataclasses import dataclass, replace
import warnings

import numpy as np
from scipy import stats

from .statmath import complex_gaussian

__all__ = [
    "QuantizerSpec",
    "VqlPartition",
    "quantize_complex",
    "quantize_vql",
    "one_bit",
    "one_bit_spec",
    "gaussian_centroids",
    "equiprobable_spec",
    "dapsk_thresholds",
    "dapsk_two_bit_spec",
    "bussgang_calibrate",
    "calibrated",
    "vql_partition",
]


@dataclass(frozen=True, eq=False)
class QuantizerSpec:
    """Scalar quantizer applied independently to I and Q.

    ``boundaries`` holds all ``E + 1`` bin edges including ``-inf`` and
    ``+inf``; bin ``l`` is ``[boundaries[l], boundaries[l + 1])`` and maps to
    ``labels[l]``.  ``eta`` and ``noise_var`` are the Bussgang gain and
    distortion power, filled in by :func:`calibrated`.
    """

    bits: int
    boundaries: np.ndarray
    labels: np.ndarray
    eta: float | None = None
    noise_var: float | None = None

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        e = np.asarray(self.labels, dtype=float)
        if b.ndim != 1 or b[0] != -np.inf or b[-1] != np.inf:
            raise ValueError("boundaries must start at -inf and end at +inf")
        if np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must be strictly increasing")
        if e.size != b.size - 1:
            raise ValueError("need exactly one label per bin")
        if self.bits and e.size != 2**self.bits:
            raise ValueError(f"{self.bits}-bit quantizer needs {2**self.bits} labels, got {e.size}")
        if np.any(np.diff(e) <= 0):
            raise ValueError("labels must be strictly increasing")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "labels", e)

    @property
    def inner(self) -> np.ndarray:
        return self.boundaries[1:-1]

    @property
    def is_sign(self) -> bool:
        return self.labels.size == 2 and self.inner[0] == 0.0

    def indices(self, x) -> np.ndarray:
        """Bin index of real inputs; inputs on an edge go to the upper bin."""
        return np.searchsorted(self.inner, x, side="right")

    def label_indices(self, q) -> np.ndarray:
        """Recover bin indices from real label values."""
        q = np.asarray(q)
        return np.abs(q[..., None] - self.labels).argmin(axis=-1)


def quantize_complex(s, spec: QuantizerSpec) -> np.ndarray:
    s = np.asarray(s)
    return spec.labels[spec.indices(s.real)] + 1j * spec.labels[spec.indices(s.imag)]


def one_bit(s) -> np.ndarray:
    """``sgn(Re s) + j sgn(Im s)`` with ``sgn(0) = +1``."""
    s = np.asarray(s)
    out = np.where(s.real >= 0, 1.0, -1.0) + 1j * np.where(s.imag >= 0, 1.0, -1.0)
    return out if out.ndim else complex(out)


def one_bit_spec() -> QuantizerSpec:
    return QuantizerSpec(1, np.array([-np.inf, 0.0, np.inf]), np.array([-1.0, 1.0]))


def gaussian_centroids(boundaries, input_variance: float = 1.0) -> np.ndarray:
    """Conditional means of each bin for one real dimension of a ``CN(0, input_variance)`` input."""
    sd = np.sqrt(input_variance / 2.0)
    z = np.asarray(boundaries, dtype=float) / sd
    mass = np.diff(stats.norm.cdf(z))
    return sd * -np.diff(stats.norm.pdf(z)) / mass


def equiprobable_spec(bits: int, input_variance: float = 1.0) -> QuantizerSpec:
    """Equal-mass bins with centroid labels (used as a near-identity reference)."""
    E = 2**bits
    sd = np.sqrt(input_variance / 2.0)
    b = sd * stats.norm.ppf(np.linspace(0, 1, E + 1))
    return QuantizerSpec(bits, b, gaussian_centroids(b, input_variance))


def dapsk_thresholds(a: float):
    """``(zeta2, zeta3, zeta4)``: the inner edges ``-+cos(pi/4) sqrt(2a^2 / (a^2 + 1))`` and 0."""
    if not a > 1:
        raise ValueError(f"ring ratio must exceed 1, got {a}")
    z4 = np.cos(np.pi / 4) * np.sqrt(2 * a * a / (a * a + 1))
    return -z4, 0.0, z4


def dapsk_two_bit_spec(a: float) -> QuantizerSpec:
    """Two bits per dimension with ring-ratio dependent edges; labels are bin centroids at unit input power."""
    z2, z3, z4 = dapsk_thresholds(a)
    b = np.array([-np.inf, z2, z3, z4, np.inf])
    return QuantizerSpec(2, b, gaussian_centroids(b))


def bussgang_calibrate(spec: QuantizerSpec, input_variance: float, rng, n_samples: int = 10**6):
    """Monte-Carlo Bussgang pair ``(eta, sigma_eps^2)`` for ``CN(0, input_variance)`` input.

    ``eta = E[x* q] / E|x|^2`` and ``sigma_eps^2 = E|q - eta x|^2``.
    """
    if not input_variance > 0:
        raise ValueError("input variance must be positive")
    if n_samples < 10**5:
        raise ValueError("Bussgang calibration needs at least 1e5 samples")
    if spec.labels.size < 2:
        raise ValueError("cannot calibrate a single-label quantizer")
    x = complex_gaussian(rng, input_variance, n_samples)
    q = quantize_complex(x, spec)
    eta = float(np.real(np.vdot(x, q)) / np.vdot(x, x).real)
    eps = q - eta * x
    return eta, float(np.mean(np.abs(eps) ** 2))


def calibrated(spec: QuantizerSpec, rng, input_variance: float = 1.0, n_samples: int = 10**6) -> QuantizerSpec:
    """Copy of ``spec`` with its Bussgang pair attached."""
    eta, noise = bussgang_calibrate(spec, input_variance, rng, n_samples)
    return replace(spec, eta=eta, noise_var=noise)


@dataclass(frozen=True, eq=False)
class VqlPartition:
    """Antennas split into one-bit groups with different thresholds."""

    groups: tuple
    specs: tuple
    sgn_group: int

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=np.int64) for g in self.groups)
        if len(groups) != len(self.specs):
            raise ValueError("one quantizer spec per group is required")
        allidx = np.concatenate(groups) if groups else np.array([], dtype=np.int64)
        if np.unique(allidx).size != allidx.size:
            raise ValueError("antenna groups overlap")
        if not self.specs[self.sgn_group].is_sign:
            raise ValueError("the designated sgn group must use a zero-threshold quantizer")
        if all(s.is_sign for s in self.specs):
            warnings.warn("every group uses the sign quantizer; the energy statistic is constant", stacklevel=2)
        object.__setattr__(self, "groups", groups)

    @property
    def num_antennas(self) -> int:
        return int(sum(g.size for g in self.groups))

    @property
    def sgn_antennas(self) -> np.ndarray:
        return self.groups[self.sgn_group]


def vql_partition(U: int, a: float = 2.0, sizes=None) -> VqlPartition:
    """Three contiguous antenna groups with thresholds ``zeta2``, ``0`` and ``zeta4``.

    The middle group is the sign quantizer with labels +-1.  The offset groups
    output the Gaussian centroids on either side of their threshold, so their
    label power depends on the received amplitude.
    """
    if sizes is None:
        base, extra = divmod(U, 3)
        sizes = [base + (j < extra) for j in range(3)]
    sizes = [int(s) for s in sizes]
    if len(sizes) != 3 or any(s < 0 for s in sizes):
        raise ValueError("VQL needs three non-negative group sizes")
    if sum(sizes) != U:
        raise ValueError(f"group sizes {sizes} do not add up to U = {U}")
    z2, _, z4 = dapsk_thresholds(a)
    specs = []
    for t in (z2, 0.0, z4):
        b = np.array([-np.inf, t, np.inf])
        labels = np.array([-1.0, 1.0]) if t == 0.0 else gaussian_centroids(b)
        specs.append(QuantizerSpec(1, b, labels))
    edges = np.cumsum([0] + sizes)
    groups = tuple(np.arange(edges[j], edges[j + 1]) for j in range(3))
    return VqlPartition(groups, tuple(specs), sgn_group=1)


def quantize_vql(y, partition: VqlPartition) -> np.ndarray:
    """Quantize ``y`` (antennas on the last axis) with each group's quantizer."""
    y = np.asarray(y)
    if y.shape[-1] != partition.num_antennas:
        raise ValueError("antenna axis does not match the partition")
    out = np.empty(y.shape, dtype=complex)
    for idx, spec in zip(partition.groups, partition.specs):
        out[..., idx] = quantize_complex(y[..., idx], spec)
    return out

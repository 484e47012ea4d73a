"""Fourier-side primitives on the unit circle.

Functions on the circle are sampled on the uniform grid
``theta_j = 2*pi*j/N`` (``N`` a power of two) and represented by truncated
trigonometric series

    u(theta) = c_0 + sum_{n=1}^{M} c_n cos(n theta) + s_n sin(n theta).

The Hilbert transform with kernel ``cot((theta - s)/2) / (2 pi)`` acts as the
multiplier ``cos(n.) -> sin(n.)``, ``sin(n.) -> -cos(n.)``; it is applied
exactly on coefficients.  :func:`hilbert_quadrature_oracle` evaluates the
singular integral directly and exists only to check the multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_N = 256
MIN_N = 16


def _check_n_points(n_points: int) -> int:
    n = int(n_points)
    if n != n_points or n < MIN_N or n & (n - 1):
        raise ValueError(f"n_points must be a power of two >= {MIN_N}, got {n_points!r}")
    return n


def grid_angles(n_points: int) -> np.ndarray:
    """Equispaced angles ``2*pi*j/N``, ``j = 0..N-1``."""
    n = _check_n_points(n_points)
    return 2.0 * np.pi * np.arange(n) / n


@dataclass(frozen=True)
class GridSampling:
    """Samples of a function at the uniform grid angles."""

    n_points: int
    values: np.ndarray

    def __post_init__(self):
        n = _check_n_points(self.n_points)
        vals = np.array(self.values, copy=True)
        if vals.shape != (n,):
            raise ValueError(f"expected {n} samples, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, func, n_points: int = DEFAULT_N) -> "GridSampling":
        return cls(n_points, func(grid_angles(n_points)))

    @property
    def theta(self) -> np.ndarray:
        return grid_angles(self.n_points)


@dataclass(frozen=True)
class TrigSeries:
    """Real trigonometric series truncated at mode ``M``.

    ``cos_coeffs`` holds ``c_0..c_M`` and ``sin_coeffs`` holds ``s_1..s_M``.
    """

    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.cos_coeffs, dtype=float)
        s = np.array(self.sin_coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1 or s.shape != (c.size - 1,):
            raise ValueError("need cos_coeffs c_0..c_M and sin_coeffs s_1..s_M")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
            raise ValueError("trigonometric coefficients must be finite")
        c.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "cos_coeffs", c)
        object.__setattr__(self, "sin_coeffs", s)

    @property
    def truncation(self) -> int:
        return self.cos_coeffs.size - 1

    @classmethod
    def zeros(cls, truncation: int) -> "TrigSeries":
        return cls(np.zeros(truncation + 1), np.zeros(truncation))

    def __call__(self, theta):
        """Evaluate the series at arbitrary angles."""
        theta = np.asarray(theta, dtype=float)
        n = np.arange(1, self.truncation + 1)
        nt = np.multiply.outer(theta, n)
        return (self.cos_coeffs[0] + np.cos(nt) @ self.cos_coeffs[1:]
                + np.sin(nt) @ self.sin_coeffs)


@dataclass(frozen=True)
class CosineSeries:
    """Even function on the circle, ``sum_n coeffs[n] cos(n theta)``.

    ``sine_content`` records the largest sine coefficient discarded when
    the series was obtained by projecting grid samples (0 when built
    directly).
    """

    coeffs: np.ndarray
    sine_content: float = field(default=0.0, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("coeffs must be a non-empty 1-d sequence")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def truncation(self) -> int:
        return self.coeffs.size - 1

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def as_trig(self) -> TrigSeries:
        return TrigSeries(self.coeffs, np.zeros(self.truncation))


def project(samples: GridSampling, truncation: int | None = None) -> TrigSeries:
    """Trigonometric coefficients of real grid samples.

    ``truncation`` defaults to the largest mode free of Nyquist ambiguity,
    ``N/2 - 1``.
    """
    vals = np.asarray(samples.values)
    if np.iscomplexobj(vals):
        if np.any(vals.imag != 0):
            raise ValueError("project expects real-valued samples")
        vals = vals.real
    if not np.all(np.isfinite(vals)):
        raise ValueError("samples contain non-finite values")
    n = samples.n_points
    m = n // 2 - 1 if truncation is None else int(truncation)
    if not 0 <= m <= n // 2 - 1:
        raise ValueError(f"truncation must lie in [0, {n // 2 - 1}], got {truncation}")
    c, s = _rfft_coeffs(vals, m)
    return TrigSeries(c, s)


def _rfft_coeffs(vals: np.ndarray, truncation: int, offset: float = 0.0):
    """cos/sin coefficients of samples taken at ``theta_j + offset``.

    Works on the last axis, so a stack of sample rows can be projected at once.
    """
    n = vals.shape[-1]
    X = np.fft.rfft(vals, axis=-1)[..., : truncation + 1] / n
    if offset:
        X = X * np.exp(-1j * np.arange(truncation + 1) * offset)
    c = 2.0 * X.real
    c[..., 0] *= 0.5
    s = -2.0 * X.imag[..., 1:]
    return c, s


def synthesize(series: TrigSeries, n_points: int) -> GridSampling:
    """Sample a trigonometric series on the ``n_points`` grid."""
    n = _check_n_points(n_points)
    m = series.truncation
    if m > n // 2 - 1:
        raise ValueError(f"truncation {m} too large for a grid of {n} points")
    X = np.zeros(n // 2 + 1, dtype=complex)
    X[0] = series.cos_coeffs[0]
    X[1 : m + 1] = 0.5 * (series.cos_coeffs[1:] - 1j * series.sin_coeffs)
    return GridSampling(n, np.fft.irfft(X * n, n))


def hilbert(series: TrigSeries) -> TrigSeries:
    """Circle Hilbert transform as an exact Fourier multiplier."""
    c = np.concatenate(([0.0], -series.sin_coeffs))
    return TrigSeries(c, series.cos_coeffs[1:].copy())


def deriv_theta(series: TrigSeries) -> TrigSeries:
    n = np.arange(1, series.truncation + 1)
    c = np.concatenate(([0.0], n * series.sin_coeffs))
    return TrigSeries(c, -n * series.cos_coeffs[1:])


def dtheta_hilbert_samples(values: np.ndarray) -> np.ndarray:
    """``d/dtheta H[u]`` for real grid samples (last axis), i.e. the ``|n|`` multiplier.

    Same action as ``deriv_theta(hilbert(project(u)))`` resampled on the
    grid; the Nyquist mode is dropped as in :func:`project`.
    """
    n = values.shape[-1]
    X = np.fft.rfft(values, axis=-1)
    k = np.arange(n // 2 + 1, dtype=float)
    k[-1] = 0.0
    return np.fft.irfft(X * k, n, axis=-1)


def hilbert_quadrature_oracle(samples: GridSampling, theta) -> np.ndarray:
    """Principal-value quadrature of the cot-kernel Hilbert integral.

    Trapezoidal sum of ``f(s_j) cot((theta - s_j)/2) / N``.  ``theta`` must
    avoid the grid nodes (half-grid points are the intended targets: the
    nodes then sit symmetrically about the singularity and the principal
    value needs no correction).  O(N) per target angle; test use only.
    """
    vals = np.asarray(samples.values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("samples contain non-finite values")
    n = samples.n_points
    theta = np.asarray(theta, dtype=float)
    nodes = grid_angles(n)
    diff = np.subtract.outer(theta, nodes)
    # distance of each target to its nearest node, measured on the circle
    gap = np.min(np.abs(np.angle(np.exp(1j * diff))), axis=-1)
    if np.any(gap < 1e-3 * np.pi / n):
        raise ValueError("target angle collides with a grid node (singular sample)")
    return (vals / np.tan(0.5 * diff)).sum(axis=-1) / n


def half_grid_angles(n_points: int) -> np.ndarray:
    """Midpoints ``theta_j + pi/N`` of the uniform grid."""
    n = _check_n_points(n_points)
    return grid_angles(n) + np.pi / n

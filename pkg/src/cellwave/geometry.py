"""Conformal-map boundary ``phi(w) = (1 + mu) w + sum_n a_n w^(n+1)`` on |w| = 1."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .spectral import GridSampling, grid_angles, _check_n_points

JACOBIAN_FLOOR = 1e-8


class DegenerateMapError(ValueError):
    """The conformal map has (nearly) vanishing derivative on the circle."""


class InadmissibleShapeError(ValueError):
    """Shape coefficients outside the admissible ball."""


@dataclass(frozen=True)
class ShapeCoeffs:
    """Dilation ``mu`` and real coefficients ``a[n]`` of ``w**(n+1)``.

    ``a`` is stored densely up to the truncation ``M = len(a) - 1``;
    ``a[0]`` and ``a[1]`` are always zero (constants are removed by
    translation invariance and the first mode is excluded from the shape
    space).  With ``symmetry_fold = m > 1`` only multiples of ``m`` may be
    nonzero.
    """

    mu: float
    a: np.ndarray
    symmetry_fold: int = 1

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 1 or a.size < 3:
            raise ValueError("a must be a 1-d array covering at least index 2")
        if not (np.all(np.isfinite(a)) and np.isfinite(self.mu)):
            raise ValueError("shape coefficients must be finite")
        if a[0] != 0.0 or a[1] != 0.0:
            raise ValueError("coefficients a_0 and a_1 are excluded from the shape space")
        m = int(self.symmetry_fold)
        if m < 1 or m != self.symmetry_fold:
            raise ValueError(f"symmetry_fold must be a positive integer, got {self.symmetry_fold!r}")
        if m > 1:
            idx = np.arange(a.size)
            bad = (idx % m != 0) & (a != 0.0)
            if np.any(bad):
                raise ValueError(f"{m}-fold shape has nonzero a_n at n = {idx[bad].tolist()}")
        a.flags.writeable = False
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "symmetry_fold", m)

    @classmethod
    def zero(cls, truncation: int, symmetry_fold: int = 1, mu: float = 0.0) -> "ShapeCoeffs":
        return cls(mu, np.zeros(truncation + 1), symmetry_fold)

    @classmethod
    def from_modes(cls, modes: Mapping[int, float], truncation: int,
                   mu: float = 0.0, symmetry_fold: int = 1) -> "ShapeCoeffs":
        a = np.zeros(truncation + 1)
        for n, val in modes.items():
            if not 2 <= n <= truncation:
                raise ValueError(f"mode index {n} outside [2, {truncation}]")
            a[n] = val
        return cls(mu, a, symmetry_fold)

    @property
    def truncation(self) -> int:
        return self.a.size - 1

    @property
    def modes(self) -> list[int]:
        """Admissible index set: n in [2, M], multiples of the symmetry fold."""
        m = self.symmetry_fold
        return [n for n in range(2, self.truncation + 1) if n % m == 0]

    def ball_norm(self) -> float:
        """``|mu| + sum (n+1)|a_n|``; below 1 the map has ``|phi'| > 0`` on the circle."""
        n = np.arange(self.a.size)
        return abs(self.mu) + float(np.sum((n + 1) * np.abs(self.a)))

    def is_admissible(self, rho: float = 1.0) -> bool:
        return self.ball_norm() < rho

    def replace(self, mu=None, a=None) -> "ShapeCoeffs":
        return ShapeCoeffs(self.mu if mu is None else mu,
                           self.a if a is None else a, self.symmetry_fold)

    def taylor_coeffs(self) -> np.ndarray:
        """Coefficients ``c_k`` of ``phi(w) = sum_k c_k w^k``, k = 0..M+1."""
        c = np.zeros(self.a.size + 1)
        c[1] = 1.0 + self.mu
        c[3:] = self.a[2:]
        return c


@dataclass(frozen=True)
class BoundaryCurve:
    """Samples of phi, phi', phi'' and |phi'| at ``w_j = exp(i theta_j)``."""

    positions: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    jacobian: np.ndarray
    n_points: int

    @property
    def theta(self) -> np.ndarray:
        return grid_angles(self.n_points)

    @property
    def w(self) -> np.ndarray:
        return np.exp(1j * self.theta)


def _power_series_samples(c: np.ndarray, n: int) -> np.ndarray:
    """Evaluate ``sum_k c_k w^k`` at the N-th roots of unity via the inverse FFT."""
    if c.size > n:
        raise ValueError(f"series of length {c.size} does not fit a {n}-point grid")
    buf = np.zeros(n, dtype=complex)
    buf[: c.size] = c
    return np.fft.ifft(buf) * n


def map_samples(shape: ShapeCoeffs, n_points: int):
    """phi, phi', phi'' on the grid (no admissibility checks)."""
    n = _check_n_points(n_points)
    c = shape.taylor_coeffs()
    k = np.arange(c.size)
    z = _power_series_samples(c, n)
    w = np.exp(1j * grid_angles(n))
    # w*phi' and w^2*phi'' are power series too; divide the w factors back out
    dz = _power_series_samples(k * c, n) / w
    ddz = _power_series_samples(k * (k - 1) * c, n) / (w * w)
    return z, dz, ddz


def curve_from_samples(z, dz, ddz, n_points: int,
                       jacobian_floor: float = JACOBIAN_FLOOR) -> BoundaryCurve:
    jac = np.abs(dz)
    if np.min(jac) <= jacobian_floor:
        raise DegenerateMapError(f"min |phi'| = {np.min(jac):.3e} <= {jacobian_floor:g}")
    return BoundaryCurve(z, dz, ddz, jac, n_points)


def synthesize_boundary(shape: ShapeCoeffs, n_points: int,
                        jacobian_floor: float = JACOBIAN_FLOOR) -> BoundaryCurve:
    """Sample the boundary parametrization ``theta -> phi(exp(i theta))``."""
    if not shape.is_admissible():
        raise InadmissibleShapeError(f"ball norm {shape.ball_norm():.6g} >= 1")
    z, dz, ddz = map_samples(shape, n_points)
    return curve_from_samples(z, dz, ddz, n_points, jacobian_floor)


def curvature(curve: BoundaryCurve) -> GridSampling:
    """``kappa = Re[1 + w phi''/phi'] / |phi'|``."""
    kappa = np.real(1.0 + curve.w * curve.d2 / curve.d1) / curve.jacobian
    return GridSampling(curve.n_points, kappa)


def outward_normal(curve: BoundaryCurve) -> GridSampling:
    """``n = -w phi' / |phi'|``, keeping the sign convention of the model."""
    return GridSampling(curve.n_points, -curve.w * curve.d1 / curve.jacobian)


def write_shape_csv(path, curve: BoundaryCurve) -> None:
    """Export ``theta,x,y,kappa`` rows at 17 significant digits."""
    kappa = curvature(curve).values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "x", "y", "kappa"])
        for row in zip(curve.theta, curve.positions.real, curve.positions.imag, kappa):
            writer.writerow([f"{v:.17g}" for v in row])


def read_shape_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {key: np.array([float(r[key]) for r in rows]) for key in ("theta", "x", "y", "kappa")}

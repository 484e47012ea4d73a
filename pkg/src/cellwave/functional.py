"""Traveling-wave residual and its analytic Jacobian.

For a boundary ``phi = (1 + mu) w + f(w)`` moving with horizontal speed ``V``
the residual sampled at ``w = exp(i theta)`` is

    F = Re[ V w phi'
            + beta/4 d_theta H[kappa]
            - 1/4    d_theta H[|phi|^2]
            + 1/2    w conj(phi) phi'
            - 1/2    |phi'| ]

and it is reported through its cosine coefficients ``F_0..F_M``.  A real
shape makes ``F`` even in ``theta``; the discarded sine part is kept as a
diagnostic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ShapeCoeffs,
    curve_from_samples,
    map_samples,
    synthesize_boundary,
)
from .spectral import CosineSeries, _rfft_coeffs, dtheta_hilbert_samples

SINE_TOLERANCE = 1e-12


class SymmetryWarning(RuntimeWarning):
    """Residual carries sine content although the shape is real."""


@dataclass(frozen=True)
class SolutionPoint:
    beta: float
    V: float
    shape: ShapeCoeffs
    residual_norm: float = field(default=float("nan"))


@dataclass(frozen=True)
class JacobianMatrix:
    """Cosine coefficients (rows) of directional derivatives of F (columns)."""

    matrix: np.ndarray
    column_labels: tuple
    row_labels: tuple

    def column(self, label) -> np.ndarray:
        return self.matrix[:, self.column_labels.index(label)]


def _check_grid(shape: ShapeCoeffs, n_points: int):
    if n_points < 4 * shape.truncation:
        raise ValueError(f"grid of {n_points} points under-resolves truncation "
                         f"{shape.truncation} (need N >= 4 M)")


def _residual_samples(beta, V, z, dz, ddz, w):
    jac = np.abs(dz)
    kappa = np.real(1.0 + w * ddz / dz) / jac
    return (np.real(V * w * dz)
            + 0.25 * beta * dtheta_hilbert_samples(kappa)
            - 0.25 * dtheta_hilbert_samples(np.abs(z) ** 2)
            + 0.5 * np.real(w * np.conj(z) * dz)
            - 0.5 * jac)


def _to_cosine(samples, truncation, check_sine=True) -> CosineSeries:
    c, s = _rfft_coeffs(samples, truncation)
    sine = float(np.max(np.abs(s))) if s.size else 0.0
    if check_sine and sine > SINE_TOLERANCE:
        warnings.warn(f"residual sine content {sine:.3e} exceeds {SINE_TOLERANCE:g}",
                      SymmetryWarning, stacklevel=3)
    return CosineSeries(c, sine)


def evaluate_F(beta: float, V: float, shape: ShapeCoeffs, n_points: int = 256,
               truncation: int | None = None) -> CosineSeries:
    """Cosine coefficients ``F_0..F_M`` of the residual.

    ``truncation`` defaults to the shape truncation ``M``.
    """
    _check_grid(shape, n_points)
    curve = synthesize_boundary(shape, n_points)
    vals = _residual_samples(beta, V, curve.positions, curve.d1, curve.d2, curve.w)
    m = shape.truncation if truncation is None else truncation
    return _to_cosine(vals, m)


def residual_norm(beta: float, V: float, shape: ShapeCoeffs, n_points: int = 256) -> float:
    return evaluate_F(beta, V, shape, n_points).sup_norm()


def evaluate_F_translated(beta, V, shape: ShapeCoeffs, shift: float, n_points: int = 256,
                          truncation: int | None = None) -> CosineSeries:
    """Residual for the map ``phi + shift``, sampled directly.

    The constant term is not representable in :class:`ShapeCoeffs`, so the
    translated map is built from samples.
    """
    _check_grid(shape, n_points)
    z, dz, ddz = map_samples(shape, n_points)
    curve = curve_from_samples(z + shift, dz, ddz, n_points)
    vals = _residual_samples(beta, V, curve.positions, curve.d1, curve.d2, curve.w)
    m = shape.truncation if truncation is None else truncation
    return _to_cosine(vals, m)


def translation_invariance_check(beta, V, shape: ShapeCoeffs, shift: float,
                                 n_points: int = 256) -> float:
    """Sup-difference of cosine coefficients of F for ``phi`` and ``phi + shift``."""
    base = evaluate_F(beta, V, shape, n_points)
    if shift == 0:
        return 0.0
    moved = evaluate_F_translated(beta, V, shape, shift, n_points)
    return float(np.max(np.abs(moved.coeffs - base.coeffs)))


def _directional_samples(beta, V, z, dz, ddz, w, h, dh, ddh):
    """Samples of dF[h] for a stack of directions ``h`` (rows)."""
    jac = np.abs(dz)
    curv_num = np.real(1.0 + w * ddz / dz)
    djac = np.real(np.conj(dz) * dh) / jac
    dcurv_num = np.real(w * (ddh * dz - dh * ddz) / dz**2)
    dkappa = dcurv_num / jac - curv_num * djac / jac**2
    return (np.real(V * w * dh)
            + 0.25 * beta * dtheta_hilbert_samples(dkappa)
            - 0.5 * dtheta_hilbert_samples(np.real(np.conj(z) * h))
            + 0.5 * np.real(w * (np.conj(h) * dz + dh * np.conj(z)))
            - 0.5 * djac)


def _monomial_samples(powers, n_points):
    """w^k, d/dw w^k and d2/dw2 w^k on the grid for each power k (rows).

    Phases are reduced mod N in integer arithmetic; ``w**k`` would carry a
    phase error growing like k * eps.
    """
    k = np.asarray(powers, dtype=np.int64)[:, None]
    j = np.arange(n_points)

    def unit(p):
        return np.exp(2j * np.pi * ((p * j) % n_points) / n_points)

    return unit(k), k * unit(k - 1), k * (k - 1) * unit(k - 2)


def jacobian(point: SolutionPoint, n_points: int = 256,
             truncation: int | None = None) -> JacobianMatrix:
    """Analytic derivative of the cosine coefficients w.r.t. (mu, V, a_n).

    Columns are ``mu``, ``V`` and ``a_n`` for the admissible modes of the
    shape; rows are cosine modes ``0..M``.  The ``mu`` direction is the
    shape derivative along ``h = w``.
    """
    shape = point.shape
    _check_grid(shape, n_points)
    curve = synthesize_boundary(shape, n_points)
    z, dz, ddz, w = curve.positions, curve.d1, curve.d2, curve.w
    modes = shape.modes
    h, dh, ddh = _monomial_samples([1] + [n + 1 for n in modes], n_points)
    cols = _directional_samples(point.beta, point.V, z, dz, ddz, w, h, dh, ddh)
    dV = np.real(w * dz)
    stacked = np.vstack([cols[:1], dV[None, :], cols[1:]])
    m = shape.truncation if truncation is None else truncation
    c, _ = _rfft_coeffs(stacked, m)
    labels = ("mu", "V") + tuple(f"a_{n}" for n in modes)
    return JacobianMatrix(c.T, labels, tuple(range(m + 1)))


def beta_column(point: SolutionPoint, n_points: int = 256,
                truncation: int | None = None) -> np.ndarray:
    """Cosine coefficients of ``dF/dbeta = 1/4 d_theta H[kappa]``."""
    shape = point.shape
    _check_grid(shape, n_points)
    curve = synthesize_boundary(shape, n_points)
    kappa = np.real(1.0 + curve.w * curve.d2 / curve.d1) / curve.jacobian
    m = shape.truncation if truncation is None else truncation
    c, _ = _rfft_coeffs(0.25 * dtheta_hilbert_samples(kappa), m)
    return c


def with_residual(beta, V, shape: ShapeCoeffs, n_points: int = 256) -> SolutionPoint:
    return SolutionPoint(beta, V, shape, residual_norm(beta, V, shape, n_points))


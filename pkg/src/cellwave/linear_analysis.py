"""Linear stability of the disk and the spectral data of the linearized residual.

Rest state
----------
A disk of radius ``R0`` is stationary provided ``k_d * R0 == 2 * v_p``.  Its
pressure is radial, ``P0(r) = k_d/4 (r^2 - R0^2) + const``; the boundary
value is the Young-Laplace jump ``gamma / R0`` (the same constant is sometimes
quoted as ``gamma / R0**2``).  Only ``grad P0`` enters any computation here.

Perturbations ``R0 + eps * cos(m theta)`` grow at rate

    sigma_m = k_d/2 (m - 1) - gamma R0^-3 m (m^2 - 1)
            = (m - 1) (k_d/2 - gamma R0^-3 m (m + 1)),

used for both cosine and sine families.  In normalized units
(``k_d = 2 v_p = xi = 1``, ``beta = 4 gamma``) mode ``m`` is marginal at
``beta_m = 2 / (m (m + 1))``, which is also where the linearized residual
acquires its one-dimensional kernel ``w^(m+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .functional import SolutionPoint, jacobian
from .geometry import ShapeCoeffs
from .spectral import CosineSeries

KERNEL_RTOL = 1e-10
REST_STATE_RTOL = 1e-12


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional constants of the motility model."""

    xi: float = 1.0
    k_d: float = 1.0
    v_p: float = 0.5
    gamma: float = 0.0
    R0: float = 1.0

    def __post_init__(self):
        for name in ("xi", "k_d", "v_p", "R0"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite number, got {val!r}")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")

    @classmethod
    def normalized(cls, beta: float) -> "PhysicalParams":
        """``k_d = 2 v_p = xi = 1``, ``R0 = 1`` and ``gamma = beta / 4``."""
        return cls(xi=1.0, k_d=1.0, v_p=0.5, gamma=beta / 4.0, R0=1.0)

    @property
    def beta(self) -> float:
        """Normalized surface tension ``k_d gamma / (xi v_p^2)``."""
        return self.k_d * self.gamma / (self.xi * self.v_p**2)

    def rest_state_compatible(self) -> bool:
        return abs(self.k_d * self.R0 - 2.0 * self.v_p) <= REST_STATE_RTOL * 2.0 * self.v_p

    def require_rest_state(self):
        if not self.rest_state_compatible():
            raise ValueError(f"rest state requires k_d*R0 == 2*v_p, got k_d*R0 = "
                             f"{self.k_d * self.R0!r} and 2*v_p = {2 * self.v_p!r}")

    def rest_pressure(self, r):
        """Rest-state pressure with boundary value ``gamma / R0``."""
        r = np.asarray(r, dtype=float)
        return 0.25 * self.k_d * (r**2 - self.R0**2) + self.gamma / self.R0


@dataclass(frozen=True)
class SpectralReport:
    mode: int
    growth_rate: float
    marginal_beta: float
    kernel_dim: int
    transversality_coeff: float
    singular_values: np.ndarray = field(default=None, repr=False)
    kernel_basis: np.ndarray = field(default=None, repr=False)
    column_labels: tuple = field(default=(), repr=False)

    @property
    def kernel_vector(self):
        if self.kernel_dim != 1:
            return None
        return self.kernel_basis[:, 0]


def growth_rate(m: int, params: PhysicalParams) -> float:
    """Linear growth rate of boundary mode ``m`` around the rest disk."""
    if m < 0:
        raise ValueError("mode index must be >= 0")
    return (m - 1) * (0.5 * params.k_d - params.gamma * m * (m + 1) / params.R0**3)


def unstable_modes(params: PhysicalParams, m_max: int) -> list[int]:
    if m_max < 2:
        raise ValueError("m_max must be >= 2")
    return [m for m in range(2, m_max + 1) if growth_rate(m, params) > 0]


def bifurcation_beta(m: int) -> float:
    if m < 2:
        raise ValueError(f"bifurcation points exist for m >= 2, got {m}")
    return 2.0 / (m * (m + 1))


def transversality_coefficient(m: int) -> float:
    """Projection of ``d_beta dF[w^(m+1)]`` on ``cos(m theta)``: ``m (m^2 - 1) / 4``."""
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    return 0.25 * m * (m + 1) * (m - 1)


def apply_L(beta: float, lambda1: float, lambda2: float,
            h: Mapping[int, float] | ShapeCoeffs, truncation: int | None = None) -> CosineSeries:
    """Closed-form linearization at the disk applied to ``(lambda1, lambda2, h)``.

    ``h`` maps mode ``n >= 2`` to the coefficient of ``w^(n+1)``.
    """
    if isinstance(h, ShapeCoeffs):
        modes = {n: float(h.a[n]) for n in range(2, h.truncation + 1) if h.a[n] != 0}
        m_top = h.truncation
    else:
        modes = dict(h)
        m_top = max(modes, default=1)
    if any(n < 2 for n in modes):
        raise ValueError("h may only contain modes n >= 2")
    size = max(m_top, 1) if truncation is None else truncation
    out = np.zeros(size + 1)
    out[0] = 0.5 * lambda1
    out[1] = lambda2
    for n, a in modes.items():
        if n <= size:
            out[n] += 0.25 * a * n * (n + 1) * (n - 1) * (beta - bifurcation_beta(n))
    return CosineSeries(out)


def trivial_jacobian(beta: float, truncation: int, n_points: int = 256,
                     symmetry_fold: int = 1):
    """Jacobian of F at ``(beta, V=0, mu=0, f=0)`` restricted to the equation rows.

    Rows are cosine modes ``{0, 1}`` plus the admissible shape modes, so the
    matrix is square.
    """
    shape = ShapeCoeffs.zero(truncation, symmetry_fold)
    J = jacobian(SolutionPoint(beta, 0.0, shape), n_points)
    rows = [0, 1] + shape.modes
    return J.matrix[rows, :], J.column_labels


def kernel_analysis(beta: float, truncation: int = 32, n_points: int = 256,
                    symmetry_fold: int = 1, rtol: float = KERNEL_RTOL) -> SpectralReport:
    """SVD of the discretized linearization at the disk.

    The kernel dimension counts singular values below ``rtol`` times the
    largest.  A kernel of dimension > 1 is reported in full through
    ``kernel_basis``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    A, labels = trivial_jacobian(beta, truncation, n_points, symmetry_fold)
    _, sv, vh = np.linalg.svd(A)
    null = sv < rtol * sv[0]
    basis = vh[null].T
    dim = int(np.count_nonzero(null))
    mode = -1
    if dim == 1:
        lead = labels[int(np.argmax(np.abs(basis[:, 0])))]
        if lead.startswith("a_"):
            mode = int(lead[2:])
    if mode >= 2:
        marginal = bifurcation_beta(mode)
        rate = growth_rate(mode, PhysicalParams.normalized(beta))
        trans = transversality_coefficient(mode)
    else:
        marginal = rate = trans = float("nan")
    return SpectralReport(mode, rate, marginal, dim, trans, sv, basis, labels)


def transversality_fd(m: int, truncation: int = 32, n_points: int = 256,
                      step: float = 1e-6) -> float:
    """Central difference in beta of the ``a_m`` column entry at row ``m``."""
    b = bifurcation_beta(m)
    shape = ShapeCoeffs.zero(truncation)
    lab = f"a_{m}"
    plus = jacobian(SolutionPoint(b + step, 0.0, shape), n_points).column(lab)[m]
    minus = jacobian(SolutionPoint(b - step, 0.0, shape), n_points).column(lab)[m]
    return (plus - minus) / (2 * step)


"""Spectral solver for traveling waves of a cell-motility free-boundary model.

The boundary is the image of the unit circle under
``phi(w) = (1 + mu) w + sum_n a_n w^(n+1)``; interior fields are eliminated
through the circle Hilbert transform, leaving a residual ``F(beta, V, mu, f)``
whose zeros are traveling waves with speed ``V``.
"""

from .continuation import (
    Branch,
    ContinuationConfig,
    continue_branch,
    solve_at_amplitude,
    verify_branch,
)
from .functional import SolutionPoint, evaluate_F, jacobian, translation_invariance_check
from .geometry import ShapeCoeffs, curvature, outward_normal, synthesize_boundary
from .linear_analysis import (
    PhysicalParams,
    apply_L,
    bifurcation_beta,
    growth_rate,
    kernel_analysis,
    transversality_coefficient,
    unstable_modes,
)

__version__ = "0.1.0"

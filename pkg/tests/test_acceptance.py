"""Acceptance suite: one test per criterion, each within its runtime budget.

A pass/fail line per criterion is printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from cellwave.cli import main
from cellwave.continuation import (
    ContinuationConfig,
    continue_branch,
    solve_at_amplitude,
    verify_branch,
)
from cellwave.functional import (
    SolutionPoint,
    beta_column,
    evaluate_F,
    jacobian,
    translation_invariance_check,
)
from cellwave.geometry import ShapeCoeffs
from cellwave.linear_analysis import (
    PhysicalParams,
    bifurcation_beta,
    growth_rate,
    kernel_analysis,
    transversality_coefficient,
    transversality_fd,
    unstable_modes,
)
from helpers import random_shape


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s > {self.seconds}s"


def fd_column(point, label, step=1e-6):
    def at(eps):
        shape = point.shape
        if label == "V":
            return evaluate_F(point.beta, point.V + eps, shape).coeffs
        if label == "mu":
            return evaluate_F(point.beta, point.V, shape.replace(mu=shape.mu + eps)).coeffs
        if label == "beta":
            return evaluate_F(point.beta + eps, point.V, shape).coeffs
        a = shape.a.copy()
        a[int(label[2:])] += eps
        return evaluate_F(point.beta, point.V, shape.replace(a=a)).coeffs
    return (at(step) - at(-step)) / (2 * step)


@pytest.mark.criterion(1, "trivial-branch residual <= 1e-13 (N=256, M=64)")
def test_criterion_1_trivial_branch():
    with Budget(1.0):
        for beta in (0.1, 1 / 3, 1.0, 2.0):
            F = evaluate_F(beta, 0.0, ShapeCoeffs.zero(64), 256)
            assert F.sup_norm() <= 1e-13


@pytest.mark.criterion(2, "dilation identity 1/2 (1 + mu) mu to 1e-13")
def test_criterion_2_dilation():
    with Budget(1.0):
        for mu in (-0.2, 0.1, 0.3):
            for beta in (0.1, 1 / 3, 1.0):
                F = evaluate_F(beta, 0.0, ShapeCoeffs.zero(16, mu=mu))
                assert abs(F.coeffs[0] - 0.5 * (1 + mu) * mu) <= 1e-13
                assert np.max(np.abs(F.coeffs[1:])) <= 1e-13


@pytest.mark.criterion(3, "translation invariance <= 1e-11 over 100 random shapes")
def test_criterion_3_translation():
    rng = np.random.default_rng(2024)
    with Budget(30.0):
        worst = 0.0
        for _ in range(100):
            shape = random_shape(rng, 12, budget=0.5)
            beta, V, shift = rng.uniform(0.01, 2), rng.uniform(-1, 1), rng.uniform(-0.3, 0.3)
            worst = max(worst, translation_invariance_check(beta, V, shape, shift))
        assert worst <= 1e-11


@pytest.mark.criterion(4, "spectral diagonalization at the disk, n in [2, 32], 20 beta")
def test_criterion_4_diagonalization():
    rng = np.random.default_rng(7)
    M = 32
    with Budget(30.0):
        for beta in rng.uniform(0.01, 2, 20):
            J = jacobian(SolutionPoint(beta, 0.0, ShapeCoeffs.zero(M)))
            for n in range(2, M + 1):
                col = J.column(f"a_{n}")
                expected = 0.25 * n * (n + 1) * (n - 1) * (beta - 2 / (n * (n + 1)))
                assert abs(col[n] - expected) <= 1e-10
                assert np.max(np.abs(np.delete(col, n))) <= 1e-11


@pytest.mark.criterion(5, "Jacobian vs finite differences at 20 random points, rel <= 1e-6")
def test_criterion_5_jacobian_fd():
    rng = np.random.default_rng(5)
    with Budget(120.0):
        for _ in range(20):
            point = SolutionPoint(rng.uniform(0.05, 1.5), rng.uniform(-0.5, 0.5),
                                  random_shape(rng, 10, budget=0.4))
            J = jacobian(point)
            cols = {label: J.column(label) for label in J.column_labels}
            cols["beta"] = beta_column(point)
            for label, col in cols.items():
                fd = fd_column(point, label)
                assert np.max(np.abs(col - fd)) <= 1e-6 * np.max(np.abs(fd)), label


@pytest.mark.criterion(6, "dispersion marginality at beta_m and census {2, 3}")
def test_criterion_6_dispersion():
    with Budget(1.0):
        for m in range(2, 13):
            assert abs(growth_rate(m, PhysicalParams.normalized(bifurcation_beta(m)))) <= 1e-14
        resonant = PhysicalParams(k_d=1.0, v_p=0.5, R0=1.0, gamma=1 / 40)
        assert unstable_modes(resonant, 8) == [2, 3]


@pytest.mark.criterion(7, "kernel dimension and transversality")
def test_criterion_7_kernel():
    with Budget(60.0):
        for m in (2, 3, 4, 5):
            assert kernel_analysis(bifurcation_beta(m)).kernel_dim == 1
            coeff = transversality_coefficient(m)
            assert coeff == 0.25 * m * (m + 1) * (m - 1)
            assert abs(transversality_fd(m) - coeff) <= 1e-8
        assert kernel_analysis(0.2).kernel_dim == 0


@pytest.mark.criterion(8, "branches m in {2, 3} to s = 0.03 with tangency decay")
def test_criterion_8_branches():
    with Budget(300.0):
        for m in (2, 3):
            config = ContinuationConfig(m=m, s_max=0.03)
            branch = continue_branch(config)
            assert branch.s[-1] == pytest.approx(0.03)
            assert max(p.residual_norm for p in branch.points) <= 1e-11
            assert verify_branch(branch).max_residual <= 1e-8

            beta_err, shape_err = [], []
            for s in (0.02, 0.01, 0.005):
                a = np.zeros(config.M + 1)
                a[m] = s
                guess = SolutionPoint(config.beta_m, 0.0, ShapeCoeffs(0.0, a, m))
                p, _ = solve_at_amplitude(config, s, guess)
                beta_err.append(abs(p.beta - bifurcation_beta(m)))
                defect = p.shape.a / s
                defect[m] -= 1.0
                shape_err.append(max(abs(p.shape.mu) / s, np.max(np.abs(defect))))
            for errs in (beta_err, shape_err):
                order = np.log2(np.array(errs[:-1]) / errs[1:])
                assert np.all(order >= 1.0), (m, errs)


@pytest.mark.criterion(9, "doubling M moves beta(0.02) by <= 1e-8")
def test_criterion_9_truncation():
    with Budget(300.0):
        betas = []
        for M, N in ((32, 256), (64, 512)):
            branch = continue_branch(ContinuationConfig(m=2, M=M, N=N, s_max=0.02))
            assert branch.s[-1] == 0.02
            betas.append(branch.points[-1].beta)
        assert abs(betas[0] - betas[1]) <= 1e-8


@pytest.mark.criterion(10, "byte-identical branch output across runs")
def test_criterion_10_determinism(tmp_path):
    with Budget(600.0):
        outs = []
        for k in range(2):
            d = tmp_path / f"run{k}"
            assert main(["branch", "--out", str(d), "--m", "2"]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        assert set(outs[0]) >= {"branch_m2.csv", "branch_m2.json"}
        assert outs[0] == outs[1]

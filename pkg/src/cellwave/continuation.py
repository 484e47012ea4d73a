"""Newton solver and branch continuation for m-fold symmetric traveling waves.

The branch bifurcating from the disk at ``beta_m = 2/(m(m+1))`` is
parametrized by the amplitude of the kernel mode: ``a_m = s`` is pinned and
``beta`` is released as an unknown.  The remaining unknowns are ``V``, ``mu``
and ``a_n`` for the other multiples ``n`` of ``m`` up to the truncation.
Equations are the cosine coefficients of F at modes 0 (paired with ``mu``),
1 (paired with ``V``) and the multiples of ``m``.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .functional import SolutionPoint, beta_column, evaluate_F, jacobian
from .geometry import DegenerateMapError, InadmissibleShapeError, ShapeCoeffs, map_samples
from .linear_analysis import bifurcation_beta, kernel_analysis
from .spectral import (
    GridSampling,
    _rfft_coeffs,
    deriv_theta,
    dtheta_hilbert_samples,
    grid_angles,
    half_grid_angles,
    hilbert_quadrature_oracle,
    project,
    synthesize,
)

log = logging.getLogger(__name__)

VERIFY_TOL = 1e-8
COND_LIMIT = 1e14
MAX_HALVINGS = 8


class NewtonError(RuntimeError):
    """Newton iteration failed to reach the residual tolerance."""


class SingularJacobianError(NewtonError):
    pass


class BifurcationError(RuntimeError):
    """The first continuation step failed to leave the disk."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class ContinuationError(RuntimeError):
    """Continuation stopped before ``s_max``; ``branch`` holds the points found."""

    def __init__(self, msg, branch, failed_at):
        super().__init__(msg)
        self.branch = branch
        self.failed_at = failed_at


@dataclass(frozen=True)
class ContinuationConfig:
    m: int = 2
    M: int = 32
    N: int = 256
    s_max: float = 0.05
    ds: float = 1e-3
    ds_max: float | None = None
    ds_min: float = 1e-7
    newton_tol: float = 1e-11
    newton_max_iter: int = 25
    step_adapt: tuple = (0.25, 2.0)
    rho: float = 0.5

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if self.M < self.m:
            raise ValueError(f"truncation M={self.M} must include the kernel mode m={self.m}")
        if self.N & (self.N - 1) or self.N < 16:
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")
        if self.N < 4 * (self.M + 2):
            raise ValueError(f"N={self.N} must be >= 4(M+2) = {4 * (self.M + 2)}")
        if not self.ds > 0 or not self.s_max > 0:
            raise ValueError("ds and s_max must be positive")
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        lo, hi = self.step_adapt
        if not 0 < lo <= 1 <= hi:
            raise ValueError(f"step_adapt bounds must bracket 1, got {self.step_adapt}")
        if self.ds_max is None:
            object.__setattr__(self, "ds_max", self.ds)
        if self.ds_max < self.ds:
            raise ValueError("ds_max must be >= ds")
        object.__setattr__(self, "step_adapt", (float(lo), float(hi)))

    @property
    def beta_m(self) -> float:
        return bifurcation_beta(self.m)

    @property
    def modes(self) -> list[int]:
        return list(range(self.m, self.M + 1, self.m))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["step_adapt"] = list(self.step_adapt)
        return d


@dataclass
class Branch:
    """Solution points ordered by amplitude ``s`` plus solver diagnostics."""

    config: ContinuationConfig
    s: list = field(default_factory=list)
    points: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def append(self, s, point, iters):
        self.s.append(float(s))
        self.points.append(point)
        self.diagnostics.append({"iters": int(iters), "residual": point.residual_norm})


def _amplitude_pinned(config: ContinuationConfig):
    """Unknown labels and equation rows of the pinned system."""
    free = [n for n in config.modes if n != config.m]
    rows = [0, 1] + config.modes
    return free, rows


def _pack(point: SolutionPoint, free) -> np.ndarray:
    return np.concatenate(([point.beta, point.V, point.shape.mu], point.shape.a[free]))


def _unpack(x, s, config, free) -> tuple[float, float, ShapeCoeffs]:
    a = np.zeros(config.M + 1)
    a[config.m] = s
    a[free] = x[3:]
    return float(x[0]), float(x[1]), ShapeCoeffs(float(x[2]), a, config.m)


def _system(beta, V, shape, config, rows, free, with_jacobian=True):
    res = evaluate_F(beta, V, shape, config.N).coeffs[rows]
    if not with_jacobian:
        return res, None
    point = SolutionPoint(beta, V, shape)
    J = jacobian(point, config.N)
    cols = [J.column("V"), J.column("mu")] + [J.column(f"a_{n}") for n in free]
    A = np.column_stack([beta_column(point, config.N)] + cols)[rows]
    return res, A


def _trial(x, s, config, free, rows):
    """Residual at a trial iterate, or None if the shape is not admissible."""
    beta, V, shape = _unpack(x, s, config, free)
    if not shape.is_admissible():
        return None
    try:
        res, _ = _system(beta, V, shape, config, rows, free, with_jacobian=False)
    except (DegenerateMapError, InadmissibleShapeError):
        return None
    return res


def solve_at_amplitude(config: ContinuationConfig, s: float,
                       initial_guess: SolutionPoint) -> tuple[SolutionPoint, int]:
    """Solve ``F = 0`` with ``a_m = s`` pinned; returns the point and Newton iterations.

    Damped Newton: a step is halved (at most 8 times) until the sup-norm of
    the equation residual decreases.
    """
    if s == 0:
        raise ValueError("amplitude s must be nonzero")
    free, rows = _amplitude_pinned(config)
    guess = initial_guess.shape
    if guess.truncation != config.M:
        a = np.zeros(config.M + 1)
        k = min(config.M, guess.truncation) + 1
        a[:k] = guess.a[:k]
        guess = ShapeCoeffs(guess.mu, a, guess.symmetry_fold)
    x = _pack(SolutionPoint(initial_guess.beta, initial_guess.V, guess), free)

    res = _trial(x, s, config, free, rows)
    if res is None:
        raise InadmissibleShapeError("initial guess is not admissible")
    norm = np.max(np.abs(res))
    for it in range(config.newton_max_iter + 1):
        if norm <= config.newton_tol:
            beta, V, shape = _unpack(x, s, config, free)
            full = evaluate_F(beta, V, shape, config.N).sup_norm()
            return SolutionPoint(beta, V, shape, full), it
        if it == config.newton_max_iter:
            break
        beta, V, shape = _unpack(x, s, config, free)
        _, A = _system(beta, V, shape, config, rows, free)
        cond = np.linalg.cond(A)
        if not cond < COND_LIMIT:
            raise SingularJacobianError(f"Jacobian condition number {cond:.3e} at s={s:g}")
        dx = np.linalg.solve(A, -res)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = _trial(x + lam * dx, s, config, free, rows)
            if trial is not None and np.max(np.abs(trial)) < norm:
                break
            lam *= 0.5
        else:
            raise NewtonError(f"no decrease after {MAX_HALVINGS} halvings at s={s:g} "
                              f"(residual {norm:.3e})")
        x = x + lam * dx
        res = trial
        norm = np.max(np.abs(res))
    raise NewtonError(f"no convergence in {config.newton_max_iter} iterations at s={s:g} "
                      f"(residual {norm:.3e})")


def solve_pseudo_arclength(config: ContinuationConfig, y_prev: np.ndarray,
                           tangent: np.ndarray, ds: float) -> tuple[SolutionPoint, int]:
    """Corrector on the hyperplane ``tangent . (y - y_prev) = ds``.

    ``y = (beta, V, mu, a_n for n in the mode set)`` with ``a_m`` unpinned.
    Used when the amplitude parametrization becomes singular.
    """
    modes = config.modes
    rows = [0, 1] + modes
    tangent = tangent / np.linalg.norm(tangent)

    def unpack(y):
        a = np.zeros(config.M + 1)
        a[modes] = y[3:]
        return float(y[0]), float(y[1]), ShapeCoeffs(float(y[2]), a, config.m)

    y = y_prev + ds * tangent
    for it in range(config.newton_max_iter + 1):
        beta, V, shape = unpack(y)
        if not shape.is_admissible():
            raise InadmissibleShapeError("arclength iterate left the admissible ball")
        res, A = _system(beta, V, shape, config, rows, modes)
        res = np.append(res, tangent @ (y - y_prev) - ds)
        if np.max(np.abs(res)) <= config.newton_tol:
            full = evaluate_F(beta, V, shape, config.N).sup_norm()
            return SolutionPoint(beta, V, shape, full), it
        A = np.vstack([A, tangent])
        cond = np.linalg.cond(A)
        if not cond < COND_LIMIT:
            raise SingularJacobianError(f"arclength Jacobian condition number {cond:.3e}")
        y = y + np.linalg.solve(A, -res)
    raise NewtonError("pseudo-arclength corrector did not converge")


def _full_vector(point: SolutionPoint, modes) -> np.ndarray:
    return np.concatenate(([point.beta, point.V, point.shape.mu], point.shape.a[modes]))


def _predict(branch: Branch, s_next: float, config: ContinuationConfig, free) -> SolutionPoint:
    """Secant extrapolation in (beta, V, mu, a); the disk acts as the point before the first."""
    if not branch.points:
        a = np.zeros(config.M + 1)
        a[config.m] = s_next
        return SolutionPoint(config.beta_m, 0.0, ShapeCoeffs(0.0, a, config.m))
    s1, x1 = branch.s[-1], _pack(branch.points[-1], free)
    if len(branch.points) >= 2:
        s0, x0 = branch.s[-2], _pack(branch.points[-2], free)
    else:
        s0, x0 = 0.0, np.concatenate(([config.beta_m], np.zeros(x1.size - 1)))
    x = x1 + (s_next - s1) / (s1 - s0) * (x1 - x0)
    beta, V, shape = _unpack(x, s_next, config, free)
    return SolutionPoint(beta, V, shape)


def continue_branch(config: ContinuationConfig) -> Branch:
    """Follow the ``m``-fold branch from ``s = ds`` up to ``s_max``.

    The step halves on Newton failure and grows by 1.3 (capped at
    ``ds_max``) after a solve taking at most 4 iterations.  Continuation
    stops early, without error, when the next predicted shape would leave
    the ball of radius ``rho``.
    """
    free, _ = _amplitude_pinned(config)
    lo, hi = config.step_adapt
    shrink, grow = max(0.5, lo), min(1.3, hi)
    branch = Branch(config, metadata={"config": config.to_dict(), "started_at": time.time(),
                                      "stop_reason": None, "failed_at": None})
    step = config.ds
    s_next = min(config.ds, config.s_max)
    while True:
        guess = _predict(branch, s_next, config, free)
        if guess.shape.ball_norm() >= config.rho:
            branch.metadata["stop_reason"] = (f"admissibility: predicted ball norm "
                                              f"{guess.shape.ball_norm():.6g} >= rho at s={s_next:.6g}")
            log.info("stopping early: %s", branch.metadata["stop_reason"])
            break
        try:
            point, iters = solve_at_amplitude(config, s_next, guess)
            if point.shape.ball_norm() >= config.rho:
                branch.metadata["stop_reason"] = f"admissibility: solution left ball at s={s_next:.6g}"
                break
        except SingularJacobianError as exc:
            point, iters = _arclength_fallback(branch, config, step, exc)
            if point is None:
                break
            s_next = float(point.shape.a[config.m])
        except (NewtonError, DegenerateMapError, InadmissibleShapeError) as exc:
            if not branch.points:
                report = kernel_analysis(config.beta_m, config.M, config.N, config.m)
                branch.metadata["failed_at"] = s_next
                raise BifurcationError(
                    f"first step at s={s_next:g} failed ({exc}); kernel at beta_m: "
                    f"dim={report.kernel_dim}, mode={report.mode}", report) from exc
            step *= shrink
            if step < config.ds_min:
                branch.metadata["failed_at"] = s_next
                branch.metadata["stop_reason"] = f"step below ds_min: {exc}"
                branch.metadata["finished_at"] = time.time()
                raise ContinuationError(str(exc), branch, s_next) from exc
            s_next = _tidy(branch.s[-1] + step)
            continue
        branch.append(s_next, point, iters)
        log.debug("s=%.6g beta=%.17g iters=%d res=%.2e", s_next, point.beta, iters,
                  point.residual_norm)
        if s_next >= config.s_max:
            branch.metadata["stop_reason"] = "reached s_max"
            break
        if iters <= 4:
            step = min(step * grow, config.ds_max)
        s_next = min(_tidy(s_next + step), config.s_max)
    branch.metadata["finished_at"] = time.time()
    return branch


def _tidy(s: float) -> float:
    """Round an accumulated amplitude to 12 significant digits (keeps 0.001*k exact-looking)."""
    return float(f"{s:.12g}")


def _arclength_fallback(branch, config, step, exc):
    if len(branch.points) < 2:
        raise BifurcationError(f"amplitude parametrization singular near the disk: {exc}")
    modes = config.modes
    y1 = _full_vector(branch.points[-1], modes)
    y0 = _full_vector(branch.points[-2], modes)
    try:
        point, iters = solve_pseudo_arclength(config, y1, y1 - y0, step)
    except (NewtonError, DegenerateMapError, InadmissibleShapeError):
        branch.metadata["stop_reason"] = f"pseudo-arclength fallback failed: {exc}"
        return None, 0
    if point.shape.a[config.m] <= branch.s[-1]:
        branch.metadata["stop_reason"] = "fold in amplitude: branch turns back"
        return None, 0
    return point, iters


@dataclass(frozen=True)
class BranchVerification:
    residual_verify: np.ndarray
    discrepancy: np.ndarray
    tol: float = VERIFY_TOL

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual_verify)) if self.residual_verify.size else 0.0

    @property
    def max_discrepancy(self) -> float:
        return float(np.max(self.discrepancy)) if self.discrepancy.size else 0.0

    @property
    def flagged(self) -> np.ndarray:
        return self.residual_verify > self.tol

    @property
    def ok(self) -> bool:
        return not np.any(self.flagged)


def _polyval(c, w):
    return np.polynomial.polynomial.polyval(w, c)


def oracle_residual(point: SolutionPoint, n_points: int, truncation: int | None = None) -> np.ndarray:
    """Cosine coefficients of F re-evaluated through an independent path.

    The boundary is evaluated at the half-grid of an ``n_points`` grid by
    direct polynomial evaluation; the curvature term uses
    ``d_theta H[kappa] = H[d_theta kappa]`` with the Hilbert transform taken by
    principal-value quadrature from the node samples.
    """
    shape = point.shape
    m = shape.truncation if truncation is None else truncation
    c = shape.taylor_coeffs()
    k = np.arange(c.size)
    dc = (k * c)[1:]
    ddc = (k * (k - 1) * c)[2:]

    z, dz, ddz = map_samples(shape, n_points)
    w = np.exp(1j * grid_angles(n_points))
    kappa = np.real(1.0 + w * ddz / dz) / np.abs(dz)
    dkappa = synthesize(deriv_theta(project(GridSampling(n_points, kappa))), n_points)

    theta = half_grid_angles(n_points)
    wh = np.exp(1j * theta)
    zh, dzh, ddzh = _polyval(c, wh), _polyval(dc, wh), _polyval(ddc, wh)
    curv_term = hilbert_quadrature_oracle(dkappa, theta)
    vals = (np.real(point.V * wh * dzh)
            + 0.25 * point.beta * curv_term
            - 0.25 * dtheta_hilbert_samples(np.abs(zh) ** 2)
            + 0.5 * np.real(wh * np.conj(zh) * dzh)
            - 0.5 * np.abs(dzh))
    coeffs, _ = _rfft_coeffs(vals, m, offset=np.pi / n_points)
    return coeffs


def verify_branch(branch: Branch, grid_hi: int | None = None) -> BranchVerification:
    """Re-evaluate every point on a finer grid through :func:`oracle_residual`.

    ``residual_verify`` is the sup of the re-evaluated cosine coefficients;
    ``discrepancy`` is its sup-distance from the solver's own evaluation.
    """
    n_hi = 2 * branch.config.N if grid_hi is None else grid_hi
    resid, disc = [], []
    for p in branch.points:
        ref = evaluate_F(p.beta, p.V, p.shape, branch.config.N).coeffs
        chk = oracle_residual(p, n_hi, p.shape.truncation)
        resid.append(np.max(np.abs(chk)))
        disc.append(np.max(np.abs(chk - ref)))
    return BranchVerification(np.array(resid), np.array(disc))


BRANCH_CSV_HEADER = ["s", "beta", "V", "mu", "a_m", "residual_newton", "residual_verify", "iters"]


def _fmt(x) -> str:
    # shortest repr that round-trips a 64-bit float; never more than 17 digits
    return repr(float(x))


def branch_rows(branch: Branch, verification: BranchVerification | None = None):
    m = branch.config.m
    for i, (s, p, d) in enumerate(zip(branch.s, branch.points, branch.diagnostics)):
        rv = verification.residual_verify[i] if verification is not None else float("nan")
        yield [s, p.beta, p.V, p.shape.mu, p.shape.a[m], p.residual_norm, rv, d["iters"]]


def write_branch_csv(path, branch: Branch, verification: BranchVerification | None = None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BRANCH_CSV_HEADER)
        for row in branch_rows(branch, verification):
            writer.writerow([_fmt(v) for v in row[:-1]] + [str(row[-1])])


def read_branch_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "iters" else float(v)) for k, v in r.items()} for r in rows]


def branch_document(branch: Branch, verification: BranchVerification | None = None) -> dict:
    """JSON-ready record of the branch; wall-clock timestamps are left out."""
    meta = {k: v for k, v in branch.metadata.items() if k not in ("started_at", "finished_at")}
    points = []
    for row, p in zip(branch_rows(branch, verification), branch.points):
        s, beta, V, mu, _, rn, rv, iters = row
        points.append({
            "s": s, "beta": beta, "V": V, "mu": mu,
            "a": {str(n): float(p.shape.a[n]) for n in branch.config.modes},
            "residual_newton": rn,
            "residual_verify": None if np.isnan(rv) else float(rv),
            "iters": iters,
        })
    return {"metadata": meta, "points": points}


def write_branch_json(path, branch: Branch, verification: BranchVerification | None = None):
    with open(path, "w") as fh:
        json.dump(branch_document(branch, verification), fh, indent=1)
        fh.write("\n")


def read_branch_json(path) -> Branch:
    with open(path) as fh:
        doc = json.load(fh)
    cfg = dict(doc["metadata"]["config"])
    cfg["step_adapt"] = tuple(cfg["step_adapt"])
    config = ContinuationConfig(**cfg)
    branch = Branch(config, metadata=doc["metadata"])
    for rec in doc["points"]:
        a = np.zeros(config.M + 1)
        for n, v in rec["a"].items():
            a[int(n)] = v
        shape = ShapeCoeffs(rec["mu"], a, config.m)
        branch.append(rec["s"], SolutionPoint(rec["beta"], rec["V"], shape, rec["residual_newton"]),
                      rec["iters"])
    return branch

"""Command-line front end.

Subcommands: ``dispersion``, ``bifurcation-points``, ``branch``, ``residual``
and ``linearize``.  Parameters come from an optional JSON config file
(``--config``), overridden by flags and ``--set key=value``.  Unknown keys
are rejected.

Exit codes: 0 success, 1 internal/solver error, 2 config or schema error,
3 tolerance breach.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .continuation import (
    BifurcationError,
    Branch,
    ContinuationConfig,
    ContinuationError,
    continue_branch,
    verify_branch,
    write_branch_csv,
    write_branch_json,
)
from .functional import SolutionPoint, evaluate_F, jacobian
from .geometry import ShapeCoeffs, synthesize_boundary, write_shape_csv
from .linear_analysis import (
    PhysicalParams,
    bifurcation_beta,
    growth_rate,
    kernel_analysis,
    transversality_coefficient,
    unstable_modes,
)

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_TOLERANCE = 0, 1, 2, 3
MARGINAL_TOL = 1e-14

log = logging.getLogger("cellwave")

_PARAM_KEYS = {"xi": float, "k_d": float, "v_p": float, "gamma": float, "R0": float}
_COMMON_KEYS = {"out": str, "format": str, "verbosity": int}
_KEYS = {
    "dispersion": {**_PARAM_KEYS, "m_max": int},
    "bifurcation-points": {"m_min": int, "m_max": int, "M": int, "N": int},
    "branch": {"m": int, "M": int, "N": int, "s_max": float, "ds": float, "ds_max": float,
               "ds_min": float, "newton_tol": float, "newton_max_iter": int,
               "step_adapt": list, "rho": float, "shape_s": list, "sweep": list},
    "residual": {"point": str, "tol": float, "N": int},
    "linearize": {"beta": float, "M": int, "N": int, "m": int},
}
_DEFAULTS = {
    "dispersion": {"m_max": 10},
    "bifurcation-points": {"m_min": 2, "m_max": 10, "M": 32, "N": 256},
    "branch": {},
    "residual": {"tol": 1e-11, "N": 256},
    "linearize": {"beta": bifurcation_beta(2), "M": 16, "N": 256, "m": 1},
}
# flag dest -> config key
_FLAG_KEYS = {"m": "m", "m_max": "m_max", "s_max": "s_max", "ds": "ds", "grid": "N",
              "modes": "M", "tol": "tol", "sweep": "sweep", "beta": "beta"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    out: Path = Path(".")
    format: str = "csv"
    verbosity: int = 0

    def get(self, key, default=None):
        return self.values.get(key, _DEFAULTS[self.command].get(key, default))


def _coerce(command, key, value):
    allowed = _KEYS[command]
    if key in _COMMON_KEYS:
        kind = _COMMON_KEYS[key]
    elif key in allowed:
        kind = allowed[key]
    else:
        raise ConfigError(f"unknown key {key!r} for '{command}'")
    try:
        if kind is list:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            if not isinstance(value, list):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            out = float(value)
            if not math.isfinite(out):
                raise TypeError
            return out
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {key!r}: {value!r}") from None


def build_run_config(args: argparse.Namespace) -> RunConfig:
    command = args.command
    raw: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        raw.update(loaded)
    for dest, key in _FLAG_KEYS.items():
        val = getattr(args, dest, None)
        if val is not None:
            if key not in _KEYS[command]:
                raise ConfigError(f"option for {key!r} does not apply to '{command}'")
            raw[key] = val
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    if getattr(args, "point", None):
        raw["point"] = args.point
    if args.out is not None:
        raw["out"] = args.out
    if args.format is not None:
        raw["format"] = args.format

    values = {k: _coerce(command, k, v) for k, v in raw.items()}
    fmt = values.pop("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    out = Path(values.pop("out", "."))
    verbosity = values.pop("verbosity", 0) + (args.verbose or 0)
    return RunConfig(command, values, out, fmt, verbosity)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _write_table(path: Path, header, rows, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    else:
        records = [{h: (int(v) if isinstance(v, (int, np.integer)) else float(v))
                    for h, v in zip(header, row)} for row in rows]
        with open(path, "w") as fh:
            json.dump(records, fh, indent=1)
            fh.write("\n")
    return path


def _params(cfg: RunConfig) -> PhysicalParams:
    kw = {k: cfg.values[k] for k in _PARAM_KEYS if k in cfg.values}
    if "v_p" not in kw:
        # default to the rest-state compatible polymerization speed
        kw["v_p"] = kw.get("k_d", 1.0) * kw.get("R0", 1.0) / 2.0
    try:
        params = PhysicalParams(**kw)
        params.require_rest_state()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return params


def _format_set(modes) -> str:
    return "{" + ", ".join(str(m) for m in modes) + "}"


def cmd_dispersion(cfg: RunConfig) -> int:
    params = _params(cfg)
    m_max = cfg.get("m_max")
    if m_max < 2:
        raise ConfigError("m_max must be >= 2")
    rows = []
    for m in range(m_max + 1):
        sigma = growth_rate(m, params)
        rows.append([m, sigma, int(abs(sigma) <= MARGINAL_TOL)])
    path = _write_table(cfg.out / "dispersion", ["m", "growth_rate", "marginal"], rows, cfg.format)
    print(f"unstable modes: {_format_set(unstable_modes(params, m_max))}")
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_bifurcation_points(cfg: RunConfig) -> int:
    m_min, m_max = cfg.get("m_min"), cfg.get("m_max")
    M, N = cfg.get("M"), cfg.get("N")
    if not 2 <= m_min <= m_max:
        raise ConfigError(f"need 2 <= m_min <= m_max, got {m_min}, {m_max}")
    if m_max > M:
        raise ConfigError(f"m_max={m_max} exceeds the truncation M={M}")
    if N & (N - 1) or N < 4 * M:
        raise ConfigError(f"N={N} must be a power of two >= 4M")
    rows = []
    for m in range(m_min, m_max + 1):
        beta = bifurcation_beta(m)
        report = kernel_analysis(beta, M, N)
        rows.append([m, beta, transversality_coefficient(m), report.kernel_dim])
    _write_table(cfg.out / "bifurcation_points",
                 ["m", "beta_m", "transversality_coeff", "kernel_dim"], rows, cfg.format)
    return EXIT_OK


def _continuation_config(cfg: RunConfig, m: int) -> ContinuationConfig:
    keys = ("M", "N", "s_max", "ds", "ds_max", "ds_min", "newton_tol", "newton_max_iter", "rho")
    kw = {k: cfg.values[k] for k in keys if k in cfg.values}
    if "step_adapt" in cfg.values:
        try:
            kw["step_adapt"] = tuple(float(v) for v in cfg.values["step_adapt"])
        except (TypeError, ValueError):
            raise ConfigError("step_adapt must be two numbers") from None
    try:
        return ContinuationConfig(m=m, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _shape_targets(cfg: RunConfig, branch: Branch) -> list[int]:
    """Indices of branch points whose shapes are exported."""
    if not branch.points:
        return []
    s = np.array(branch.s)
    if "shape_s" in cfg.values:
        try:
            targets = [float(v) for v in cfg.values["shape_s"]]
        except (TypeError, ValueError):
            raise ConfigError("shape_s must be a list of numbers") from None
    else:
        targets = [0.5 * s[-1], s[-1]]
    return sorted({int(np.argmin(np.abs(s - t))) for t in targets})


def run_branch(cfg: RunConfig, m: int) -> int:
    config = _continuation_config(cfg, m)
    status = EXIT_OK
    try:
        branch = continue_branch(config)
    except ContinuationError as exc:
        log.error("continuation failed at s=%g: %s", exc.failed_at, exc)
        branch, status = exc.branch, EXIT_ERROR
    except BifurcationError as exc:
        log.error("%s", exc)
        branch = Branch(config, metadata={"config": config.to_dict(), "stop_reason": str(exc),
                                          "failed_at": config.ds})
        status = EXIT_ERROR
    check = verify_branch(branch)
    stem = cfg.out / f"branch_m{m}"
    write_branch_csv(stem.with_suffix(".csv"), branch, check)
    write_branch_json(stem.with_suffix(".json"), branch, check)
    for i in _shape_targets(cfg, branch):
        curve = synthesize_boundary(branch.points[i].shape, config.N)
        write_shape_csv(cfg.out / f"shape_m{m}_s{branch.s[i]!r}.csv", curve)
    if status == EXIT_OK:
        bad_newton = [p.residual_norm for p in branch.points if p.residual_norm > config.newton_tol]
        if bad_newton or not check.ok:
            log.error("contract breach: %d Newton residuals above %g, max verify residual %.3e",
                      len(bad_newton), config.newton_tol, check.max_residual)
            status = EXIT_TOLERANCE
    print(f"m={m}: {len(branch)} points, s in [{branch.s[0] if branch.s else 0:g}, "
          f"{branch.s[-1] if branch.s else 0:g}], max verify residual {check.max_residual:.3e}"
          f" ({branch.metadata.get('stop_reason')})")
    return status


def _run_branch_job(job):
    cfg, m = job
    return run_branch(cfg, m)


def cmd_branch(cfg: RunConfig) -> int:
    if "sweep" in cfg.values:
        try:
            ms = [int(v) for v in cfg.values["sweep"]]
        except (TypeError, ValueError):
            raise ConfigError("sweep must be a list of integers") from None
    else:
        ms = [cfg.values.get("m", 2)]
    for m in ms:
        _continuation_config(cfg, m)
    if len(ms) == 1:
        return run_branch(cfg, ms[0])
    with ProcessPoolExecutor(max_workers=len(ms)) as pool:
        codes = list(pool.map(_run_branch_job, [(cfg, m) for m in ms]))
    return max(codes)


_POINT_KEYS = {"beta", "V", "mu", "coefficients", "symmetry_fold"}


def load_point(path) -> tuple[float, float, ShapeCoeffs]:
    """Read a residual point file: ``{"beta", "V", "mu", "coefficients": {n: a_n}}``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read point file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("point file must hold a JSON object")
    for key in doc:
        if key not in _POINT_KEYS:
            raise ConfigError(f"unknown key {key!r} in point file")
    for key in ("beta", "V", "mu", "coefficients"):
        if key not in doc:
            raise ConfigError(f"missing key {key!r} in point file")
    nums = {}
    for key in ("beta", "V", "mu"):
        val = doc[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ConfigError(f"key {key!r} must be a finite number")
        nums[key] = float(val)
    coeffs = doc["coefficients"]
    if not isinstance(coeffs, dict):
        raise ConfigError("key 'coefficients' must map mode index to value")
    modes = {}
    for k, v in coeffs.items():
        try:
            n = int(k)
        except ValueError:
            raise ConfigError(f"coefficient index {k!r} is not an integer") from None
        if n < 2:
            raise ConfigError(f"coefficient index {k!r} must be >= 2")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"coefficient {k!r} must be a finite number")
        modes[n] = float(v)
    fold = doc.get("symmetry_fold", 1)
    if isinstance(fold, bool) or not isinstance(fold, int) or fold < 1:
        raise ConfigError("key 'symmetry_fold' must be a positive integer")
    truncation = max([8] + list(modes))
    try:
        shape = ShapeCoeffs.from_modes(modes, truncation, nums["mu"], fold)
    except ValueError as exc:
        raise ConfigError(f"key 'coefficients': {exc}") from None
    return nums["beta"], nums["V"], shape


def cmd_residual(cfg: RunConfig) -> int:
    if "point" not in cfg.values:
        raise ConfigError("residual needs a point file")
    beta, V, shape = load_point(cfg.values["point"])
    N = cfg.get("N")
    if N & (N - 1) or N < 4 * shape.truncation:
        raise ConfigError(f"N={N} must be a power of two >= 4 * {shape.truncation}")
    series = evaluate_F(beta, V, shape, N)
    for n, c in enumerate(series.coeffs):
        print(f"F_{n} {float(c)!r}")
    sup = series.sup_norm()
    print(f"sup_norm {sup!r}")
    return EXIT_OK if sup <= cfg.get("tol") else EXIT_TOLERANCE


def cmd_linearize(cfg: RunConfig) -> int:
    beta, M, N, fold = cfg.get("beta"), cfg.get("M"), cfg.get("N"), cfg.get("m")
    if N & (N - 1) or N < 4 * M:
        raise ConfigError(f"N={N} must be a power of two >= 4M")
    try:
        shape = ShapeCoeffs.zero(M, fold)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    J = jacobian(SolutionPoint(beta, 0.0, shape), N)
    rows = [[r] + list(J.matrix[r]) for r in J.row_labels]
    _write_table(cfg.out / "linearization", ["row"] + list(J.column_labels), rows, cfg.format)
    return EXIT_OK


COMMANDS = {
    "dispersion": cmd_dispersion,
    "bifurcation-points": cmd_bifurcation_points,
    "branch": cmd_branch,
    "residual": cmd_residual,
    "linearize": cmd_linearize,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of key/value settings")
    common.add_argument("--out", help="output directory (default: current)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="cellwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dispersion", parents=[common], help="growth rates of disk perturbations")
    p.add_argument("--m-max", dest="m_max", type=int)

    p = sub.add_parser("bifurcation-points", parents=[common], help="beta_m, transversality, kernel")
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--modes", type=int)

    p = sub.add_parser("branch", parents=[common], help="continue an m-fold traveling-wave branch")
    p.add_argument("--m", type=int)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--ds", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--modes", type=int)
    p.add_argument("--tol", type=float, help="Newton residual tolerance")
    p.add_argument("--sweep", help="comma-separated list of m values")

    p = sub.add_parser("residual", parents=[common], help="residual of a user-supplied point")
    p.add_argument("point", help="JSON point file")
    p.add_argument("--grid", type=int)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("linearize", parents=[common], help="dump the Jacobian at the disk")
    p.add_argument("--beta", type=float)
    p.add_argument("--m", type=int, help="symmetry fold")
    p.add_argument("--grid", type=int)
    p.add_argument("--modes", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "branch" and getattr(args, "tol", None) is not None:
        args.set = (args.set or []) + [f"newton_tol={args.tol!r}"]
        args.tol = None
    try:
        cfg = build_run_config(args)
        logging.basicConfig(level=logging.WARNING - 10 * min(cfg.verbosity, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Batch experiment runner.

Every operation in the package is exposed as a subcommand taking a JSON
config file and writing a CSV report (versioned header ``# nlthin-v1``)
plus a JSON sidecar with the full structured result.  Exit codes: 0 on
success, 2 on config/usage errors (the message names the offending
field path), 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Any, Optional, Sequence

import numpy as np

from .densities import Density, homogeneous_convex, pure_convolution, rotation_example
from .energy import ScaleParams, energy_rescaled
from .homogenization import (
    asymptotic_formula,
    cell_formula_delta,
    cell_formula_infinity,
    cell_formula_zero,
    oracle_pure_conv,
    rotation_invariance_experiment,
    scaling_probe,
    theta,
)
from .kernels import (
    DivergenceError,
    audit_hypotheses,
    cylinder_indicator,
    gaussian_separable,
    mollifier_over_norm_p,
    vertical_singular,
)
from .lattice import CylinderSpec, Field, build_lattice, build_stencil
from .solvers import DirichletClassSpec, SolverOptions, minimize_dirichlet

CSV_VERSION = "# nlthin-v1"


class ConfigError(ValueError):
    """Validation failure; the message starts with the field path."""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a JSON object")
    return cfg


def _get(cfg: dict, path: str, key: str, kind, required: bool = True, default=None):
    full = f"{path}.{key}" if path else key
    if key not in cfg:
        if required:
            raise ConfigError(f"{full}: required field is missing")
        return default
    val = cfg[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if kind is bool and isinstance(val, bool):
        return val
    if kind is str and isinstance(val, str):
        return val
    if kind is dict and isinstance(val, dict):
        return val
    if kind is list and isinstance(val, list):
        return val
    raise ConfigError(f"{full}: expected {kind.__name__}, got {type(val).__name__}")


def _matrix(cfg: dict, path: str, key: str, required: bool = True):
    raw = _get(cfg, path, key, list, required=required)
    if raw is None:
        return None
    full = f"{path}.{key}" if path else key
    try:
        M = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{full}: not a numeric matrix: {exc}") from exc
    if M.ndim == 1:
        M = M[None, :]
    if M.ndim != 2:
        raise ConfigError(f"{full}: expected a vector or matrix")
    return M


_KERNEL_FAMILIES = (
    "cylinder_indicator",
    "mollifier_over_norm_p",
    "gaussian_separable",
    "vertical_singular",
)


def kernel_from_config(cfg: dict, path: str = "kernel"):
    family = _get(cfg, path, "family", str)
    dim = _get(cfg, path, "dim", int, required=False, default=2)
    if family == "cylinder_indicator":
        return cylinder_indicator(_get(cfg, path, "r", float), dim=dim)
    if family == "mollifier_over_norm_p":
        return mollifier_over_norm_p(_get(cfg, path, "p", float), dim=dim)
    if family == "gaussian_separable":
        return gaussian_separable(dim=dim)
    if family == "vertical_singular":
        return vertical_singular(_get(cfg, path, "beta", float), dim=dim)
    raise ConfigError(
        f"{path}.family: unknown kernel family {family!r}, "
        f"expected one of {', '.join(_KERNEL_FAMILIES)}"
    )


_DENSITY_FAMILIES = ("pure_convolution", "homogeneous_convex", "rotation_example")


def density_from_config(cfg: dict, path: str = "density") -> Density:
    family = _get(cfg, path, "family", str)
    if family == "pure_convolution":
        return pure_convolution(
            _get(cfg, path, "r", float), _get(cfg, path, "p", float)
        )
    if family == "homogeneous_convex":
        kernel = kernel_from_config(
            _get(cfg, path, "kernel", dict), f"{path}.kernel"
        )
        return homogeneous_convex(kernel, _get(cfg, path, "p", float))
    if family == "rotation_example":
        return rotation_example(
            _get(cfg, path, "eta", float),
            _get(cfg, path, "p", float),
            d=_get(cfg, path, "d", int, required=False, default=3),
        )
    raise ConfigError(
        f"{path}.family: unknown density family {family!r}, "
        f"expected one of {', '.join(_DENSITY_FAMILIES)}"
    )


def solver_from_config(cfg: Optional[dict], path: str = "solver") -> SolverOptions:
    if cfg is None:
        return SolverOptions()
    known = {
        "tol_g": float,
        "max_iters": int,
        "multistart": int,
        "seed": int,
        "armijo_c": float,
        "max_backtracks": int,
        "perturbation_scale": float,
    }
    kwargs = {}
    for key in cfg:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown field")
        kwargs[key] = _get(cfg, path, key, known[key])
    return SolverOptions(**kwargs)


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str, columns: Sequence[str], rows: Sequence[dict]) -> None:
    lines = [CSV_VERSION, ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _output_paths(cfg: dict, args, default_stem: str) -> tuple[str, str]:
    out = cfg.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("output: expected an object with csv/json paths")
    stem = args.output or out.get("stem") or default_stem
    return out.get("csv", stem + ".csv"), out.get("json", stem + ".json")


# ---------------------------------------------------------------------------
# the gamma-min sweep
# ---------------------------------------------------------------------------

_TRAJECTORIES = ("constant", "eps=gamma^2", "gamma=eps^2")


def _trajectory_gamma(tag: str, eps: float, delta: Optional[float]) -> float:
    if tag == "constant":
        if delta is None:
            raise ConfigError("delta: required for the constant-delta trajectory")
        return eps / delta
    if tag == "eps=gamma^2":
        return float(np.sqrt(eps))
    if tag == "gamma=eps^2":
        return eps * eps
    raise ConfigError(
        f"trajectory: unknown tag {tag!r}, expected one of {', '.join(_TRAJECTORIES)}"
    )


def gamma_min_sweep(config: dict) -> list[dict]:
    """Dirichlet minimum per unit cross-section along a (eps, gamma) path.

    One row per eps with the matching homogenized oracle and the signed
    relative gap.  Only the convex built-in density is accepted; the
    affine datum makes the sweep a direct check of the limit theorem.
    """
    density_cfg = _get(config, "", "density", dict)
    if _get(density_cfg, "density", "family", str) != "pure_convolution":
        raise ConfigError(
            "density.family: only pure_convolution has a closed-form oracle"
        )
    density = density_from_config(density_cfg)
    r = density.params["r"]
    p = density.params["p"]
    kernel = density.growth.kernel
    d = kernel.dim
    M = _matrix(config, "", "M")
    if M.shape[1] != d - 1:
        raise ConfigError(f"M: expected {d - 1} columns for a d = {d} run")
    trajectory = _get(config, "", "trajectory", str)
    if trajectory not in _TRAJECTORIES:
        raise ConfigError(
            f"trajectory: unknown tag {trajectory!r}, "
            f"expected one of {', '.join(_TRAJECTORIES)}"
        )
    delta0 = _get(config, "", "delta", float, required=trajectory == "constant")
    eps_list = _get(config, "", "eps_list", list)
    if not eps_list or not all(
        isinstance(e, (int, float)) and 0 < e < 1 for e in eps_list
    ):
        raise ConfigError("eps_list: expected a nonempty list of eps in (0, 1)")
    sigma_a = _get(config, "", "xi_spacing", float, required=False, default=1.0 / 256.0)
    sigma_v = _get(
        config, "", "xi_spacing_vertical", float, required=False, default=1.0 / 8.0
    )
    opts = solver_from_config(config.get("solver"))

    regime = {"constant": "delta", "eps=gamma^2": "zero", "gamma=eps^2": "infinity"}[
        trajectory
    ]
    rows = []
    for eps in eps_list:
        eps = float(eps)
        gamma = _trajectory_gamma(trajectory, eps, delta0)
        delta = eps / gamma
        oracle = oracle_pure_conv(M, r, p, regime, delta=delta)

        h = eps * sigma_a
        n = int(round(1.0 / h)) + 1
        h_d = min(sigma_v * delta, 0.25)
        n_d = max(2, int(round(2.0 / h_d)) + 1)
        spec_dom = CylinderSpec(
            planar_box=tuple(((0.0, 1.0),) * (d - 1)), half_thickness=1.0
        )
        lattice = build_lattice(
            spec_dom, [n] * (d - 1) + [n_d], [False] * d
        )
        stencil = build_stencil(kernel, eps, gamma, lattice)
        t0 = time.perf_counter()
        report = minimize_dirichlet(
            density,
            ScaleParams(eps=eps, gamma=gamma),
            lattice,
            DirichletClassSpec(datum_matrix=M, collar_width=eps * r),
            stencil,
            opts,
        )
        runtime = time.perf_counter() - t0
        min_norm = report.value  # |A| = 1 for the unit planar box
        gap = 0.0 if oracle == 0.0 else (min_norm - oracle) / oracle
        rows.append(
            {
                "eps": eps,
                "gamma": gamma,
                "delta": delta,
                "min_per_area": min_norm,
                "oracle": oracle,
                "gap": gap,
                "converged": report.converged,
                "runtime_s": runtime,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_audit(cfg: dict, args) -> int:
    kernel = kernel_from_config(_get(cfg, "", "kernel", dict))
    p = _get(cfg, "", "p", float)
    report = audit_hypotheses(kernel, p)
    csv_path, json_path = _output_paths(cfg, args, "nlthin_audit")
    rows = [
        {
            "hypothesis": name,
            "passed": entry.passed,
            "statistic": entry.statistic,
            "tolerance": entry.tolerance,
            "detail": entry.detail.replace(",", ";"),
        }
        for name, entry in report.entries.items()
    ]
    write_csv(csv_path, ["hypothesis", "passed", "statistic", "tolerance", "detail"], rows)
    write_json(json_path, json.loads(report.to_json()))
    for row in rows:
        print(f"{row['hypothesis']}: {'pass' if row['passed'] else 'FAIL'}")
    print(f"audit {'passed' if report.passed_all else 'FAILED'} "
          f"for {report.kernel_family} at p = {p}")
    return 0


def _cmd_energy(cfg: dict, args) -> int:
    density = density_from_config(_get(cfg, "", "density", dict))
    scale_cfg = _get(cfg, "", "scale", dict)
    scale = ScaleParams(
        eps=_get(scale_cfg, "scale", "eps", float),
        gamma=_get(scale_cfg, "scale", "gamma", float),
    )
    dom = _get(cfg, "", "domain", dict)
    box = _get(dom, "domain", "planar_box", list)
    try:
        planar_box = tuple((float(a), float(b)) for a, b in box)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"domain.planar_box: expected [[lo, hi], ...]: {exc}") from exc
    spec_dom = CylinderSpec(
        planar_box=planar_box,
        half_thickness=_get(dom, "domain", "half_thickness", float, required=False,
                            default=1.0),
    )
    resolution = _get(dom, "domain", "resolution", list)
    if len(resolution) != len(planar_box) + 1:
        raise ConfigError("domain.resolution: one node count per axis (incl. vertical)")
    lattice = build_lattice(spec_dom, resolution, [False] * len(resolution))

    field_cfg = _get(cfg, "", "field", dict)
    kind = _get(field_cfg, "field", "kind", str)
    coords = lattice.coordinates().reshape(-1, lattice.ndim)
    if kind == "affine":
        M = _matrix(field_cfg, "field", "M")
        vals = coords[:, : lattice.ndim - 1] @ M.T
    elif kind == "zero":
        m = _get(field_cfg, "field", "m", int, required=False, default=1)
        vals = np.zeros((coords.shape[0], m))
    else:
        raise ConfigError(f"field.kind: unknown kind {kind!r}, expected affine or zero")
    u = Field(values=vals.reshape(*lattice.shape, vals.shape[1]), lattice=lattice)

    kernel = density.growth.kernel
    stencil = build_stencil(kernel, scale.eps, scale.gamma, lattice)
    bd = energy_rescaled(u, density, scale, stencil)

    csv_path, json_path = _output_paths(cfg, args, "nlthin_energy")
    rows = [
        {"offset": " ".join(str(k) for k in off), "contribution": val}
        for off, val in sorted(bd.per_offset.items())
    ]
    write_csv(csv_path, ["offset", "contribution"], rows)
    write_json(json_path, bd.to_json_dict())
    print(f"energy = {bd.total!r} over {len(rows)} offsets")
    return 0


def _cmd_scaling(cfg: dict, args) -> int:
    kernel = kernel_from_config(_get(cfg, "", "kernel", dict))
    p = _get(cfg, "", "p", float)
    pairs_raw = _get(cfg, "", "pairs", list)
    try:
        pairs = [(float(e), float(g)) for e, g in pairs_raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"pairs: expected [[eps, gamma], ...]: {exc}") from exc
    table = scaling_probe(
        kernel,
        p,
        pairs,
        spacing=_get(cfg, "", "spacing", float, required=False, default=1.0 / 64.0),
        singular_spacing=_get(cfg, "", "singular_spacing", float, required=False,
                              default=1.0 / 4096.0),
    )
    csv_path, json_path = _output_paths(cfg, args, "nlthin_scaling")
    cols = ["eps", "gamma", "s", "vertical_factor", "vertical_exact", "predicted",
            "ratio"]
    write_csv(csv_path, cols, list(table.rows))
    write_json(json_path, table.to_json_dict())
    if table.fitted_exponent is not None:
        print(f"fitted exponent = {table.fitted_exponent!r}")
    worst = max(abs(r["ratio"] - 1.0) for r in table.rows)
    print(f"{len(table.rows)} rows, worst |ratio - 1| = {worst:.3e}")
    return 0


def _cmd_cell(cfg: dict, args) -> int:
    density = density_from_config(_get(cfg, "", "density", dict))
    regime = _get(cfg, "", "regime", str)
    M = _matrix(cfg, "", "M")
    res = _get(cfg, "", "resolutions", list, required=False)
    opts = solver_from_config(cfg.get("solver"))
    if regime == "delta":
        delta = _get(cfg, "", "delta", float)
        est = cell_formula_delta(density, delta, M, resolutions=res or (8, 16),
                                 opts=opts)
    elif regime == "zero":
        est = cell_formula_zero(density, M, resolutions=res or (8, 16), opts=opts)
    elif regime == "infinity":
        est = cell_formula_infinity(density, M, resolutions=res or (16, 32), opts=opts)
    else:
        raise ConfigError(
            f"regime: unknown regime {regime!r}, expected delta, zero or infinity"
        )
    csv_path, json_path = _output_paths(cfg, args, "nlthin_cell")
    rows = [{"resolution": n, "value": v} for n, v in est.ladder]
    write_csv(csv_path, ["resolution", "value"], rows)
    write_json(json_path, est.to_json_dict())
    print(f"{regime}-regime cell value = {est.value!r} (grid {est.grid})")
    return 0


def _cmd_asymptotic(cfg: dict, args) -> int:
    density = density_from_config(_get(cfg, "", "density", dict))
    rows = asymptotic_formula(
        density,
        _get(cfg, "", "delta", float),
        _matrix(cfg, "", "M"),
        R_sequence=_get(cfg, "", "R_sequence", list, required=False, default=[4, 8, 16]),
        resolution=_get(cfg, "", "resolution", int, required=False, default=8),
        opts=solver_from_config(cfg.get("solver")),
    )
    csv_path, json_path = _output_paths(cfg, args, "nlthin_asymptotic")
    write_csv(csv_path, ["R", "H_R", "grad_norm", "converged", "runtime_s"], rows)
    write_json(json_path, {"rows": rows})
    for row in rows:
        print(f"R = {row['R']}: H_R = {row['H_R']!r}")
    return 0


def _cmd_gamma_min(cfg: dict, args) -> int:
    rows = gamma_min_sweep(cfg)
    csv_path, json_path = _output_paths(cfg, args, "nlthin_gamma_min")
    cols = ["eps", "gamma", "delta", "min_per_area", "oracle", "gap", "converged",
            "runtime_s"]
    write_csv(csv_path, cols, rows)
    write_json(json_path, {"rows": rows})
    for row in rows:
        print(f"eps = {row['eps']!r}: min/|A| = {row['min_per_area']!r}, "
              f"oracle = {row['oracle']!r}, gap = {row['gap']:+.4%}")
    return 0


def _cmd_rotation(cfg: dict, args) -> int:
    report = rotation_invariance_experiment(
        _get(cfg, "", "eta", float),
        _get(cfg, "", "p", float),
        _get(cfg, "", "delta", float),
        resolution=_get(cfg, "", "resolution", int, required=False, default=16),
        delta_invariant=_get(cfg, "", "delta_invariant", float, required=False,
                             default=8.0),
        opts=solver_from_config(cfg.get("solver")),
        seed=_get(cfg, "", "seed", int, required=False, default=args.seed),
    )
    csv_path, json_path = _output_paths(cfg, args, "nlthin_rotation")
    rows = [
        {"quantity": "value_plus", "value": report.value_plus},
        {"quantity": "value_minus_lower_bound",
         "value": report.value_minus_lower_bound},
        {"quantity": "upper_bound_closed_form",
         "value": report.upper_bound_closed_form},
        {"quantity": "lower_bound_closed_form",
         "value": report.lower_bound_closed_form},
    ] + [
        {"quantity": f"invariance_{i}", "value": v}
        for i, v in enumerate(report.invariance_values)
    ]
    write_csv(csv_path, ["quantity", "value"], rows)
    write_json(json_path, report.to_json_dict())
    print(f"verdict: {'asymmetric' if report.asymmetric else 'inconclusive'} "
          f"at small delta; spread {report.invariance_spread:.4%} at large delta "
          f"({'invariant' if report.invariant else 'NOT invariant'})")
    return 0


def _cmd_oracle(args) -> int:
    if args.theta is not None:
        delta, r = args.theta
        print(repr(theta(delta, r)))
        return 0
    if args.pure_conv is not None:
        regime, r, p = args.pure_conv[0], float(args.pure_conv[1]), float(
            args.pure_conv[2])
        if regime not in ("zero", "infinity", "delta"):
            raise ConfigError(
                f"regime: unknown regime {regime!r}, expected delta, zero or infinity"
            )
        if regime == "delta" and args.delta is None:
            raise ConfigError("delta: --delta is required for the delta regime")
        M = np.array([[float(x) for x in args.M.split(",")]]) if args.M else np.eye(1)
        print(repr(oracle_pure_conv(M, r, p, regime, delta=args.delta)))
        return 0
    raise ConfigError("oracle: give either --theta or --pure-conv")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _apply_threads(n: Optional[int]) -> None:
    """Cap BLAS/OpenMP pools; effective only before numpy spins them up,
    best effort otherwise."""
    if n is None:
        env = os.environ.get("NLTHIN_THREADS")
        if env is None:
            return
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"NLTHIN_THREADS: not an integer: {env!r}") from exc
    if n < 1:
        raise ConfigError("threads: must be a positive integer")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlthin",
        description="Experiments on nonlocal convolution energies over thin "
        "cylindrical domains.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap internal thread pools (env: NLTHIN_THREADS)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed override for randomized experiments")
    parser.add_argument("--output", "-o", default=None,
                        help="output file stem (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, desc in (
        ("audit", "run the kernel hypothesis audit"),
        ("energy", "evaluate one energy with its per-offset breakdown"),
        ("scaling", "compare discrete scaling factors with the exact laws"),
        ("cell", "solve a periodic cell problem over a resolution ladder"),
        ("asymptotic", "normalized Dirichlet minima on growing boxes"),
        ("gamma-min", "Dirichlet-minimum sweep along an (eps, gamma) path"),
        ("rotation", "rotational-invariance experiment"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("config", help="path to the JSON experiment config")

    p = sub.add_parser("oracle", help="print closed-form homogenized values")
    p.add_argument("--theta", nargs=2, type=float, metavar=("DELTA", "R"),
                   default=None, help="evaluate the theta prefactor")
    p.add_argument("--pure-conv", nargs=3, metavar=("REGIME", "R", "P"),
                   default=None, help="pure-convolution formula (zero/infinity/delta)")
    p.add_argument("--delta", type=float, default=None,
                   help="delta for the delta regime")
    p.add_argument("--M", default=None,
                   help="comma-separated row of the slope matrix (default 1)")
    return parser


_HANDLERS = {
    "audit": _cmd_audit,
    "energy": _cmd_energy,
    "scaling": _cmd_scaling,
    "cell": _cmd_cell,
    "asymptotic": _cmd_asymptotic,
    "gamma-min": _cmd_gamma_min,
    "rotation": _cmd_rotation,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args.threads)
        if args.command == "oracle":
            return _cmd_oracle(args)
        cfg = _load_config(args.config)
        seed = cfg.get("seed", args.seed)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed: expected an integer")
        args.seed = seed
        return _HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # contract violations from the library layer are config problems
        # (bad parameter combinations), reported with the same exit code
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

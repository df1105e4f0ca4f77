"""Command line driver: solve, gen, inspect.

Configuration merges four layers, strongest first: command line flags,
``AMGKIT_*`` environment variables, a TOML recipe file, and built-in
defaults.  Recipe sections group keys per component (``[soc] theta = 0.25``
maps to the ``soc.theta`` key and the ``AMGKIT_SOC_THETA`` variable).

Exit codes: 0 converged, 2 finished without converging, 1 any error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import AmgError, RecipeError
from .hierarchy import AmgConfig, SolveReport, complexities, level_table, setup, summary, vcycle
from .io import read_binary, read_matrix_market, write_binary, write_matrix_market, write_matrix_market_dense
from .krylov import KrylovConfig, bicgstab, pcg
from .problems import gen_elasticity3d, gen_heterogeneous, gen_poisson7, gen_rotated_anisotropy
from .sparse import spmv
from .striped import StripedMatrix, spmv_striped

__all__ = ["main", "run_solve", "report_emit", "load_config"]

ENV_PREFIX = "AMGKIT_"

# key -> (type, default); section.name mirrors the recipe layout
CONFIG_KEYS = {
    "solver.method": (str, "pcg"),
    "solver.rtol": (float, 1e-8),
    "solver.max_iters": (int, 5000),
    "solver.rhs_seed": (int, 42),
    "smoother.kind": (str, "jacobi"),
    "smoother.fsai_nsteps": (int, 4),
    "smoother.fsai_candidates": (int, 2),
    "smoother.fsai_density": (float, 0.4),
    "smoother.relax_target": (float, None),
    "smoother.omega": (float, None),
    "smoother.power_iters": (int, 20),
    "smoother.seed": (int, 42),
    "soc.kind": (str, "classical"),
    "soc.theta": (float, 0.25),
    "soc.avg_degree": (float, None),
    "soc.seed": (int, 42),
    "interp.kind": (str, "classical"),
    "interp.bamg_lmin": (int, 1),
    "interp.bamg_lmax": (int, 3),
    "interp.bamg_eps": (float, None),
    "interp.bamg_mu": (float, 10.0),
    "interp.smooth_p": (bool, False),
    "interp.filter_rho": (float, 1.0),
    "interp.filter_target": (str, "none"),
    "testspace.kind": (str, None),
    "testspace.n_vectors": (int, 4),
    "testspace.srqm_iters": (int, 10),
    "cycle.nu1": (int, 1),
    "cycle.nu2": (int, 1),
    "cycle.max_coarse": (int, 200),
    "cycle.max_levels": (int, 20),
    "cycle.stall_fraction": (float, 0.9),
    "run.threads": (int, 1),
    "run.stripes": (int, 0),
}


def _coerce(key, value):
    typ, _ = CONFIG_KEYS[key]
    if value is None:
        return None
    if typ is bool:
        if isinstance(value, bool):
            return value
        s = str(value).strip().lower()
        if s in ("1", "true", "on", "yes"):
            return True
        if s in ("0", "false", "off", "no"):
            return False
        raise RecipeError(f"key {key}: cannot read {value!r} as a boolean")
    try:
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise RecipeError(f"key {key}: cannot read {value!r} as {typ.__name__}") from exc


def load_config(recipe_path=None, env=None, overrides=None):
    """Merge defaults, recipe file, environment, and explicit overrides."""
    cfg = {k: d for k, (_, d) in CONFIG_KEYS.items()}
    if recipe_path:
        try:
            with open(recipe_path, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise RecipeError(f"cannot read recipe {recipe_path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise RecipeError(f"recipe {recipe_path}: {exc}") from exc
        for section, body in doc.items():
            if not isinstance(body, dict):
                raise RecipeError(f"recipe {recipe_path}: top-level key {section!r} "
                                  "must be a section")
            for name, value in body.items():
                key = f"{section}.{name}"
                if key not in CONFIG_KEYS:
                    raise RecipeError(f"recipe {recipe_path}: unknown key {key!r}")
                cfg[key] = _coerce(key, value)
    env = os.environ if env is None else env
    for key in CONFIG_KEYS:
        var = ENV_PREFIX + key.replace(".", "_").upper()
        if var in env:
            cfg[key] = _coerce(key, env[var])
    for key, value in (overrides or {}).items():
        if key not in CONFIG_KEYS:
            raise RecipeError(f"unknown configuration key {key!r}")
        if value is not None:
            cfg[key] = _coerce(key, value)
    return cfg


def _amg_config(cfg, coords=None):
    return AmgConfig(
        smoother=cfg["smoother.kind"],
        fsai_nsteps=cfg["smoother.fsai_nsteps"],
        fsai_candidates=cfg["smoother.fsai_candidates"],
        fsai_density=cfg["smoother.fsai_density"],
        relax_target=cfg["smoother.relax_target"],
        omega=cfg["smoother.omega"],
        power_iters=cfg["smoother.power_iters"],
        seed=cfg["smoother.seed"],
        soc_kind=cfg["soc.kind"].replace("-", "_"),
        soc_theta=cfg["soc.theta"],
        soc_avg_degree=cfg["soc.avg_degree"],
        coarsen_seed=cfg["soc.seed"],
        interp=cfg["interp.kind"].replace("-", "_"),
        bamg_lmin=cfg["interp.bamg_lmin"],
        bamg_lmax=cfg["interp.bamg_lmax"],
        bamg_eps=cfg["interp.bamg_eps"],
        bamg_mu=cfg["interp.bamg_mu"],
        smooth_p=cfg["interp.smooth_p"],
        filter_rho=cfg["interp.filter_rho"],
        filter_target=cfg["interp.filter_target"].replace("-", "_"),
        testspace=(cfg["testspace.kind"].replace("-", "_")
                   if cfg["testspace.kind"] else None),
        n_test_vectors=cfg["testspace.n_vectors"],
        srqm_iters=cfg["testspace.srqm_iters"],
        coords=coords,
        nu1=cfg["cycle.nu1"],
        nu2=cfg["cycle.nu2"],
        max_coarse=cfg["cycle.max_coarse"],
        max_levels=cfg["cycle.max_levels"],
        stall_fraction=cfg["cycle.stall_fraction"],
    )


def parse_gen_spec(spec):
    """Build a generator matrix from a ``kind:arg,arg,...`` string."""
    kind, _, rest = spec.partition(":")
    args = [a for a in rest.split(",") if a] if rest else []
    try:
        if kind == "poisson7":
            nx, ny, nz = (int(a) for a in args)
            return gen_poisson7(nx, ny, nz), None
        if kind == "rtanis":
            nx, ny, nz = (int(a) for a in args[:3])
            theta_deg = float(args[3]) if len(args) > 3 else 30.0
            kx = float(args[4]) if len(args) > 4 else 10.0
            ky = float(args[5]) if len(args) > 5 else 1.0e-3
            kz = float(args[6]) if len(args) > 6 else 1.0e-6
            return (
                gen_rotated_anisotropy(nx, ny, nz, theta=np.deg2rad(theta_deg),
                                       kx=kx, ky=ky, kz=kz),
                None,
            )
        if kind == "elasticity":
            nx, ny, nz = (int(a) for a in args[:3])
            e = float(args[3]) if len(args) > 3 else 1.0
            nu = float(args[4]) if len(args) > 4 else 0.3
            bc = args[5] if len(args) > 5 else "clamped"
            a, coords = gen_elasticity3d(nx, ny, nz, e=e, nu=nu, bc=bc)
            return a, coords
        if kind == "hetero":
            nx, ny = (int(a) for a in args[:2])
            contrast = float(args[2]) if len(args) > 2 else 1.0e4
            seed = int(args[3]) if len(args) > 3 else 0
            return gen_heterogeneous(nx, ny, contrast=contrast, seed=seed), None
    except (TypeError, ValueError) as exc:
        raise RecipeError(f"bad generator spec {spec!r}: {exc}") from exc
    raise RecipeError(
        f"unknown generator {kind!r} (try poisson7, rtanis, elasticity, hetero)"
    )


def _load_matrix(args):
    if bool(args.matrix) == bool(args.gen):
        raise RecipeError("give exactly one of --matrix or --gen")
    coords = None
    if args.gen:
        a, coords = parse_gen_spec(args.gen)
    else:
        path = args.matrix
        if path.endswith((".bin", ".amgf")):
            a = read_binary(path)
        else:
            a = read_matrix_market(path)
            if isinstance(a, np.ndarray):
                raise RecipeError(f"{path}: expected a sparse matrix, found a dense array")
    if getattr(args, "coords", None):
        coords = read_matrix_market(args.coords)
        if not isinstance(coords, np.ndarray):
            coords = coords.to_dense()
    return a, coords


def _load_rhs(args, a, cfg):
    if getattr(args, "rhs", None):
        rhs = read_matrix_market(args.rhs)
        if not isinstance(rhs, np.ndarray):
            rhs = rhs.to_dense()
        rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
        if rhs.size != a.nrows:
            raise RecipeError(
                f"right-hand side has {rhs.size} entries for a {a.nrows}-row matrix"
            )
        return rhs
    rng = np.random.default_rng(cfg["solver.rhs_seed"])
    return rng.standard_normal(a.nrows)


def run_solve(a, b, cfg, coords=None):
    """Set up the hierarchy and run the configured Krylov method."""
    method = cfg["solver.method"].lower()
    if method not in ("pcg", "bicgstab"):
        raise RecipeError(f"unknown solver {method!r} (pcg or bicgstab)")
    if (
        method == "pcg"
        and cfg["interp.filter_target"].replace("-", "_") in ("operator", "both")
        and cfg["interp.filter_rho"] < 1.0
    ):
        raise RecipeError(
            "operator filtering can leave the coarse operators nonsymmetric, so "
            "conjugate gradients cannot be trusted; use solver.method = bicgstab "
            "or filter the prolongation only"
        )
    if cfg["run.threads"] < 1:
        raise RecipeError(f"run.threads must be >= 1, got {cfg['run.threads']}")
    if cfg["run.stripes"] < 0:
        raise RecipeError(f"run.stripes must be >= 0, got {cfg['run.stripes']}")

    t0 = time.perf_counter()
    h = setup(a, _amg_config(cfg, coords=coords))
    t1 = time.perf_counter()

    if cfg["run.stripes"] > 0:
        striped = StripedMatrix.from_csr(a, cfg["run.stripes"])
        threads = cfg["run.threads"]
        apply_a = lambda x: spmv_striped(striped, x, threads=threads)
    else:
        apply_a = lambda x: spmv(a, x)
    apply_m = lambda r: vcycle(h, r)
    kcfg = KrylovConfig(
        rtol=cfg["solver.rtol"],
        max_iters=cfg["solver.max_iters"],
        record_history=True,
    )
    solver = pcg if method == "pcg" else bicgstab
    result = solver(apply_a, b, apply_m=apply_m, config=kcfg)
    t2 = time.perf_counter()

    c_gd, c_op = complexities(h)
    report = SolveReport(
        method=method,
        converged=bool(result.converged),
        n_iterations=int(result.n_iterations),
        rtol=float(cfg["solver.rtol"]),
        final_relres=float(result.relres),
        c_gd=round(c_gd, 6),
        c_op=round(c_op, 6),
        n_levels=h.n_levels,
        levels=level_table(h),
        setup_seconds=round(t1 - t0, 6),
        solve_seconds=round(t2 - t1, 6),
        total_seconds=round(t2 - t0, 6),
        matrix_n=a.nrows,
        matrix_nnz=a.nnz,
        history=[(int(i), float(r)) for i, r in result.history],
    )
    return result, report, h


REPORT_SCALARS = (
    "method",
    "converged",
    "n_iterations",
    "rtol",
    "final_relres",
    "c_gd",
    "c_op",
    "n_levels",
    "matrix_n",
    "matrix_nnz",
    "setup_seconds",
    "solve_seconds",
    "total_seconds",
)


def report_emit(report, fmt="text"):
    """Render a :class:`SolveReport` as text, json, or csv (stable order)."""
    if fmt == "json":
        doc = {"schema_version": 1}
        for k in REPORT_SCALARS:
            doc[k] = getattr(report, k)
        doc["levels"] = report.levels
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        lines = ["level,n,nnz,avg_nnz_per_row,coarsening_ratio"]
        for row in report.levels:
            lines.append(
                f"{row['level']},{row['n']},{row['nnz']},"
                f"{row['avg_nnz_per_row']},{row['coarsening_ratio']}"
            )
        return "\n".join(lines) + "\n"
    if fmt == "text":
        lines = []
        for k in REPORT_SCALARS:
            lines.append(f"{k:>16}: {getattr(report, k)}")
        lines.append(f"{'level':>5} {'n':>10} {'nnz':>12} {'nnz/row':>9} {'ratio':>7}")
        for row in report.levels:
            lines.append(
                f"{row['level']:>5} {row['n']:>10} {row['nnz']:>12} "
                f"{row['avg_nnz_per_row']:>9} {row['coarsening_ratio']:>7}"
            )
        return "\n".join(lines) + "\n"
    raise RecipeError(f"unknown report format {fmt!r} (text, json, csv)")


def _write_history(path, history):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("iteration,relative_residual\n")
        for it, res in history:
            fh.write(f"{it},{res!r}\n")


def _add_common(p):
    p.add_argument("--matrix", help="matrix market (.mtx) or binary (.bin) operator")
    p.add_argument("--gen", help="generator spec, e.g. poisson7:16,16,16")
    p.add_argument("--coords", help="node coordinates sidecar (matrix market array)")
    p.add_argument("--recipe", help="TOML recipe file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key, e.g. --set soc.theta=0.5")
    p.add_argument("--smoother", help="jacobi or fsai")
    p.add_argument("--soc", help="classical, strong-coupling, or affinity")
    p.add_argument("--theta", type=float, help="strength threshold")
    p.add_argument("--avg-degree", type=float, help="strength filter by average degree")
    p.add_argument("--interp", help="classical, extended-i, hybrid, or bamg")
    p.add_argument("--testspace", help="constant, rigid-body, srqm, or srqm-analytic")
    p.add_argument("--n-test-vectors", type=int)
    p.add_argument("--smooth-p", action="store_true", default=None,
                   help="smooth the prolongation")
    p.add_argument("--filter-rho", type=float)
    p.add_argument("--filter-target", help="none, prolongation, operator, or both")
    p.add_argument("--nu1", type=int)
    p.add_argument("--nu2", type=int)
    p.add_argument("--max-coarse", type=int)
    p.add_argument("--max-levels", type=int)
    p.add_argument("--seed", type=int, help="smoother and coarsening seed")


def _flag_overrides(args):
    pairs = {
        "smoother.kind": args.smoother,
        "soc.kind": args.soc,
        "soc.theta": args.theta,
        "soc.avg_degree": args.avg_degree,
        "interp.kind": args.interp,
        "testspace.kind": args.testspace,
        "testspace.n_vectors": args.n_test_vectors,
        "interp.smooth_p": args.smooth_p,
        "interp.filter_rho": args.filter_rho,
        "interp.filter_target": args.filter_target,
        "cycle.nu1": args.nu1,
        "cycle.nu2": args.nu2,
        "cycle.max_coarse": args.max_coarse,
        "cycle.max_levels": args.max_levels,
    }
    if args.seed is not None:
        pairs["smoother.seed"] = args.seed
        pairs["soc.seed"] = args.seed
    for kv in args.set:
        key, eq, value = kv.partition("=")
        if not eq:
            raise RecipeError(f"--set needs KEY=VALUE, got {kv!r}")
        pairs[key.strip()] = value.strip()
    return {k: v for k, v in pairs.items() if v is not None}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="amgkit", description="algebraic multigrid solver toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="build a hierarchy and solve")
    _add_common(ps)
    ps.add_argument("--rhs", help="right-hand side file (matrix market)")
    ps.add_argument("--rhs-seed", type=int, help="seed for the random right-hand side")
    ps.add_argument("--solver", help="pcg or bicgstab")
    ps.add_argument("--rtol", type=float)
    ps.add_argument("--max-iters", type=int)
    ps.add_argument("--threads", type=int, help="stripe workers (1 = sequential)")
    ps.add_argument("--stripes", type=int, help="apply the operator via striped storage")
    ps.add_argument("--report", default="text", help="report format: text, json, csv")
    ps.add_argument("--report-out", help="write the report to a file instead of stdout")
    ps.add_argument("--history-out", help="write iteration,relres history CSV")

    pg = sub.add_parser("gen", help="generate a benchmark matrix")
    pg.add_argument("--gen", required=True, help="generator spec")
    pg.add_argument("--out", required=True, help="output path (.mtx or .bin)")
    pg.add_argument("--coords-out", help="write node coordinates sidecar (.mtx)")
    pg.add_argument("--symmetric", action="store_true",
                    help="store only the lower triangle")

    pi = sub.add_parser("inspect", help="build and describe a hierarchy")
    _add_common(pi)

    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "inspect":
            return _cmd_inspect(args)
        return _cmd_solve(args)
    except AmgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _cmd_gen(args):
    a, coords = parse_gen_spec(args.gen)
    if args.out.endswith((".bin", ".amgf")):
        write_binary(args.out, a)
    else:
        write_matrix_market(
            args.out, a, symmetry="symmetric" if args.symmetric else "general"
        )
    if args.coords_out:
        if coords is None:
            raise RecipeError(f"generator {args.gen!r} has no node coordinates")
        write_matrix_market_dense(args.coords_out, coords)
    print(f"wrote {args.out}: n={a.nrows}, nnz={a.nnz}")
    return 0


def _cmd_inspect(args):
    cfg = load_config(args.recipe, overrides=_flag_overrides(args))
    a, coords = _load_matrix(args)
    h = setup(a, _amg_config(cfg, coords=coords))
    print(summary(h))
    return 0


def _cmd_solve(args):
    overrides = _flag_overrides(args)
    if args.solver is not None:
        overrides["solver.method"] = args.solver
    if args.rtol is not None:
        overrides["solver.rtol"] = args.rtol
    if args.max_iters is not None:
        overrides["solver.max_iters"] = args.max_iters
    if args.rhs_seed is not None:
        overrides["solver.rhs_seed"] = args.rhs_seed
    if args.threads is not None:
        overrides["run.threads"] = args.threads
    if args.stripes is not None:
        overrides["run.stripes"] = args.stripes
    cfg = load_config(args.recipe, overrides=overrides)
    a, coords = _load_matrix(args)
    b = _load_rhs(args, a, cfg)
    result, report, _ = run_solve(a, b, cfg, coords=coords)
    text = report_emit(report, args.report)
    if args.report_out:
        with open(args.report_out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.history_out:
        _write_history(args.history_out, report.history)
    return 0 if result.converged else 2


if __name__ == "__main__":
    sys.exit(main())

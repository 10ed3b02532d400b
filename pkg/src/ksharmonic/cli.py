"""Command-line front end.

Usage::

    ksharmonic solve     --config problem.toml --out results/ [--seed N] [--tol T] [--max-iter K]
    ksharmonic flow      --config problem.toml --out results/
    ksharmonic diag      --config problem.toml --out results/
    ksharmonic suite     --out results/ [--config suite.toml] [--seed N]
    ksharmonic gen-graph --out graph/ (--config problem.toml | --kind grid --n 8 [...])

Exit status: 0 on success, 1 when a property-suite criterion fails, 2 for
config or usage errors, 3 for numerical failures (an ``error.json`` with the
diagnostic payload is written to the output directory).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (DirichletForm, check_weak_subharmonic, green_function, harnack_diagnostic,
                       intrinsic_distance, liouville_diagnostic, strengthened_subharmonicity_gap)
from .config import ConfigError, Problem, _Section, build_graph_section, load_problem, load_toml, task_section
from .dirichlet import (SolverError, initial_mapping, oscillation_decay, scalar_laplacian_oracle,
                        solve_dirichlet)
from .energy import CONVENTIONS, distance_pullback, energy_report
from .flow import run_flow
from .geometry import BarycenterError, DomainError, EuclideanSpace
from .graph import GraphError, doubling_constant, poincare_constant, write_edge_list, write_measure
from .reports import point_json, write_csv, write_json, write_mapping
from .suite import CRITERIA, FULL, QUICK, Suite, report, report_csv

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _header(command, problem: Problem | None, **extra) -> dict:
    out = {"command": command, "version": __version__, "conventions": CONVENTIONS}
    if problem is not None:
        g = problem.graph
        out.update({
            "seed": problem.seed, "tol": problem.tol, "max_iter": problem.max_iter,
            "config": problem.raw,
            "graph": {"n": g.n, "edges": len(g.edges), "eps": g.eps, "total_measure": g.total_measure},
            "target": problem.target.describe(),
            "boundary_vertices": problem.domain.boundary,
        })
    out.update(extra)
    return out


def _solve(problem: Problem, task: _Section):
    init = task.str("init", "boundary_barycenter", choices={"boundary_barycenter", "random"})
    return solve_dirichlet(problem.graph, problem.domain, problem.target, problem.boundary_data,
                           init=init, tol=problem.tol, max_sweeps=problem.max_iter, seed=problem.seed)


def _oracle_error(problem: Problem, u) -> float | None:
    T = problem.target
    if not isinstance(T, EuclideanSpace):
        return None
    vals = {x: np.asarray(p.coords) for x, p in problem.boundary_data.items()}
    if T.dim == 1:
        vals = {x: v[0] for x, v in vals.items()}
    want = np.asarray(scalar_laplacian_oracle(problem.graph, problem.domain, vals)).reshape(problem.graph.n, T.dim)
    return float(np.max(np.abs(T.as_array(u.values) - want)))


def cmd_solve(problem: Problem, out: Path) -> int:
    task = task_section(problem)
    u, rep = _solve(problem, task)
    er = energy_report(u)
    summary = _header("solve", problem, solve=rep.to_dict(), energy=er.total,
                      oracle_max_abs_error=_oracle_error(problem, u))
    write_json(out / "summary.json", summary)
    write_mapping(out / "solution.csv", u)
    write_csv(out / "sweeps.csv", ["sweep", "energy", "residual"],
              [(k + 1, e, r) for k, (e, r) in enumerate(zip(rep.energies, rep.residuals))])
    write_csv(out / "density.csv", ["vertex", "density"], list(enumerate(er.density)))
    return EXIT_OK


def cmd_flow(problem: Problem, out: Path) -> int:
    task = task_section(problem)
    h = task.float("h", 0.1, positive=True)
    n_steps = task.int("n_steps", 100, minimum=1)
    constrained = task.bool("constrained", True)
    dump = task.bool("dump_steps", False)
    stop_tol = task.float("stop_tol", None, positive=True)
    init = task.str("init", "random", choices={"boundary_barycenter", "random"})
    rng = np.random.default_rng(problem.seed)
    u0 = initial_mapping(problem.graph, problem.domain, problem.target, problem.boundary_data, init, rng)
    traj = run_flow(u0, h=h, n_steps=n_steps, constrained=constrained, tol=problem.tol, stop_tol=stop_tol,
                    keep_maps=dump)
    slack = traj.variational_slack()
    summary = _header("flow", problem, h=h, steps=len(traj.steps) - 1, constrained=constrained,
                      initial_energy=float(traj.energies[0]), final_energy=float(traj.energies[-1]),
                      min_variational_slack=float(slack.min()) if slack.size else None,
                      final_image_diameter=traj.final.image_diameter(),
                      tolerance_note="terminal tolerances are engineering choices; no rate is asserted")
    if constrained and task.bool("compare", True):
        ref, _ = solve_dirichlet(problem.graph, problem.domain, problem.target, problem.boundary_data,
                                 tol=problem.tol * 1e-2, max_sweeps=problem.max_iter, n_probes=0)
        T = problem.target
        summary["distance_to_dirichlet_solution"] = float(np.sqrt(T.sq_dist_many(traj.final.values, ref.values).max()))
    write_json(out / "summary.json", summary)
    (out / "trajectory.csv").write_text(traj.to_csv())
    write_mapping(out / "solution.csv", traj.final)
    if dump:
        steps_dir = out / "steps"
        steps_dir.mkdir(exist_ok=True)
        for k, s in enumerate(traj.steps):
            write_mapping(steps_dir / f"step_{k:05d}.csv", s.mapping)
    return EXIT_OK


def _center(g) -> int:
    return int(np.argmin(g.dist_matrix.max(axis=1)))


def cmd_diag(problem: Problem, out: Path) -> int:
    task = task_section(problem)
    g, T = problem.graph, problem.target
    u, rep = _solve(problem, task)
    df = DirichletForm.from_graph(g)
    x0 = task.int("x0", _center(g), minimum=0)
    if x0 >= g.n:
        raise ConfigError(problem.source, "task", "x0", f"vertex {x0} outside 0..{g.n - 1}")
    ecc = float(g.dist_matrix[x0].max())
    rng = np.random.default_rng(problem.seed)
    p = task.float("p", 2.0, positive=True)

    sub_rows, probes = [], []
    min_def = {1: np.inf, 2: np.inf}
    min_gap = np.inf
    for k in range(task.int("probes", 10, minimum=1)):
        if k % 2 == 0:
            a, b = rng.choice(g.n, size=2)
            y0 = T.geodesic_point(u.values[a], u.values[b], float(rng.uniform()))
        else:
            y0 = T.random_point(rng)
        probes.append(point_json(T, y0))
        for power in (1, 2):
            r = check_weak_subharmonic(df, distance_pullback(u, y0, power), problem.domain)
            min_def[power] = min(min_def[power], r.min_defect)
            sub_rows += [(k, power, x, d) for x, d in sorted(r.defects.items())]
        min_gap = min(min_gap, min(strengthened_subharmonicity_gap(df, u, y0).values()))

    radii = task.get("radii")
    if radii is None:
        d = np.unique(g.dist_matrix[x0])
        radii = sorted((float(r) for r in d[(d > 0) & (d < ecc)]), reverse=True)
    osc = oscillation_decay(u, x0, radii)

    green = None
    R = task.float("green_R", 0.3 * ecc, positive=True)
    try:
        green = green_function(df, x0, R).to_dict()
        green.pop("G")
    except GraphError as exc:
        green = {"error": str(exc)}

    f0 = distance_pullback(u, u.values[x0], 2)
    harnack = harnack_diagnostic(g, f0, x0, task.float("harnack_r", 0.5 * ecc, positive=True), p)
    liou = liouville_diagnostic(u, x0, x0, max(p, 1.5))

    intrinsic = None
    if task.bool("intrinsic", g.n <= 200):
        far = int(np.argmax(g.dist_matrix[x0]))
        lo, hi = intrinsic_distance(df, x0, far, return_bounds=True)
        intrinsic = {"x": x0, "y": far, "lower": lo, "upper": hi, "graph_distance": float(g.dist_matrix[x0, far])}

    summary = _header(
        "diag", problem, solve=rep.to_dict(), x0=x0,
        doubling_constant=doubling_constant(g, 0.5 * float(g.dist_matrix.max())),
        poincare_constant=poincare_constant(g, problem.domain),
        subharmonicity={"probes": probes, "min_defect_power1": min_def[1], "min_defect_power2": min_def[2],
                        "min_strengthened_gap": min_gap, "tol": 1e-9},
        oscillation=osc.to_dict(), green=green, harnack=harnack, liouville=liou, intrinsic_distance=intrinsic,
        note="constants are empirical discrete analogues; none is asserted to be universal",
    )
    write_json(out / "summary.json", summary)
    write_csv(out / "subharmonic.csv", ["probe", "power", "vertex", "defect"], sub_rows)
    write_csv(out / "oscillation.csv", ["radius", "diameter"], osc.pairs())
    write_mapping(out / "solution.csv", u)
    return EXIT_OK


def cmd_suite(args, out: Path) -> int:
    scale, tol, names, seed = FULL, 1e-9, CRITERIA, 0
    if args.config:
        raw = load_toml(args.config)
        sec = _Section(args.config, "task", raw.get("task", {}))
        sec.reject_unknown(("scale", "criteria"))
        scale = {"full": FULL, "quick": QUICK}[sec.str("scale", "full", choices={"full", "quick"})]
        names = sec.get("criteria", list(CRITERIA))
        if not isinstance(names, list) or any(n not in CRITERIA for n in names):
            raise ConfigError(args.config, "task", "criteria", f"expected a list drawn from {list(CRITERIA)}")
        tsec = _Section(args.config, "tolerances", raw.get("tolerances", {}))
        tol = tsec.float("tol", tol, positive=True)
        seed = _Section(args.config, None, {"seed": raw.get("seed", 0)}).int("seed", 0, minimum=0)
    seed = seed if args.seed is None else args.seed
    tol = tol if args.tol is None else args.tol
    suite = Suite(seed=seed, scale=scale, tol=tol)
    results = []
    for name in names:
        r = getattr(suite, name)()
        results.append(r)
        print(r.line(), flush=True)
    write_json(out / "suite.json", report(results, seed, scale, tol))
    (out / "suite.csv").write_text(report_csv(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_gen_graph(args, out: Path) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.config:
        raw = load_toml(args.config)
        if "graph" not in raw:
            raise ConfigError(args.config, "graph", None, "missing section")
        seed = raw.get("seed", 0) if args.seed is None else seed
        sec = _Section(args.config, "graph", raw["graph"])
        base = Path(args.config).parent
    else:
        if args.kind is None:
            raise ConfigError("command line", "graph", "kind", "give --config or --kind")
        data = {"kind": args.kind}
        for key in ("n", "m", "k", "leg"):
            if getattr(args, key) is not None:
                data[key] = getattr(args, key)
        if args.eps is not None:
            data["eps"] = args.eps
        if args.measure is not None:
            data["measure"] = args.measure
        sec = _Section("command line", "graph", data)
        base = Path.cwd()
    g = build_graph_section(sec, base, np.random.default_rng(seed))
    write_edge_list(g, out / "edges.txt")
    write_measure(g, out / "measure.txt")
    write_json(out / "graph.json", {"command": "gen-graph", "version": __version__, "seed": seed,
                                    "graph": sec.data, "n": g.n, "eps": g.eps, "edges": len(g.edges),
                                    "total_measure": g.total_measure})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML problem file")
    common.add_argument("--out", required=True, help="output directory (created if missing)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--tol", type=float, help="override [tolerances].tol")
    common.add_argument("--max-iter", type=int, dest="max_iter", help="override [tolerances].max_iter (sweeps)")
    parser = argparse.ArgumentParser(prog="ksharmonic", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve the Dirichlet problem")
    sub.add_parser("flow", parents=[common], help="run the minimizing-movement flow")
    sub.add_parser("diag", parents=[common], help="solve, then run all diagnostics")
    sub.add_parser("suite", parents=[common], help="run the property suite")
    gen = sub.add_parser("gen-graph", parents=[common], help="write edge and measure files")
    gen.add_argument("--kind", choices=["path", "grid", "star", "random"])
    gen.add_argument("--n", type=int)
    gen.add_argument("--m", type=int)
    gen.add_argument("--k", type=int)
    gen.add_argument("--leg", type=int)
    gen.add_argument("--eps", type=float)
    gen.add_argument("--measure", type=float)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "suite":
            return cmd_suite(args, out)
        if args.command == "gen-graph":
            return cmd_gen_graph(args, out)
        if not args.config:
            raise ConfigError("command line", None, "--config", f"required for '{args.command}'")
        if args.tol is not None and not args.tol > 0:
            raise ConfigError("command line", None, "--tol", "must be positive")
        if args.max_iter is not None and args.max_iter < 1:
            raise ConfigError("command line", None, "--max-iter", "must be >= 1")
        problem = load_problem(args.config, seed=args.seed, tol=args.tol, max_iter=args.max_iter)
        return {"solve": cmd_solve, "flow": cmd_flow, "diag": cmd_diag}[args.command](problem, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, BarycenterError, GraphError, DomainError, np.linalg.LinAlgError) as exc:
        payload = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, SolverError):
            payload["residual"] = exc.residual
            write_mapping(out / "last_iterate.csv", exc.mapping)
        if isinstance(exc, BarycenterError):
            payload["residual"] = exc.residual
        write_json(out / "error.json", payload)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

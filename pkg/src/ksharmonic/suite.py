"""Property suite: every structural check run at a fixed scale from one seed.

Each criterion draws its randomness from its own child of the master seed, so
criteria can be run alone or in any order with identical results. Results
carry numbers only (no timings), so two runs with the same seed serialize to
identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (DirichletForm, check_weak_subharmonic, form_value, green_function,
                       polarization_residual, strengthened_subharmonicity_gap)
from .dirichlet import (initial_mapping, oscillation_decay, random_admissible, scalar_laplacian_oracle, solve_dirichlet,
                        uniqueness_check)
from .energy import CONVENTIONS, Mapping, convexity_defect, distance_pullback, ks_energy, scalar_mapping
from .flow import run_flow
from .geometry import EuclideanSpace, HyperbolicPlane, ProductSpace, npc_comparison_defect, random_tree, tripod
from .graph import DomainSpec, grid_graph, random_graph
from .reports import csv_text, dumps

CRITERIA = ("npc_comparison", "oracle_equivalence", "convexity", "uniqueness", "subharmonicity",
            "flow", "form_algebra", "green_function", "holder", "maximum_principle")


@dataclass(frozen=True)
class Scale:
    """Sample counts; ``FULL`` is the acceptance scale."""

    comparison_samples: int = 10_000
    random_graphs: int = 20
    max_vertices: int = 100
    grid_sizes: tuple = (8, 16, 32)
    convexity_pairs: int = 1_000
    uniqueness_problems: int = 10
    restarts: int = 5
    probes: int = 10
    polarization_triples: int = 50
    green_graphs: int = 10
    sector_size: int = 16
    flow_grid: int = 5
    flow_max_steps: int = 10_000


FULL = Scale()
QUICK = Scale(comparison_samples=500, random_graphs=3, max_vertices=30, grid_sizes=(6,),
              convexity_pairs=50, uniqueness_problems=2, restarts=3, probes=3,
              polarization_triples=10, green_graphs=3, sector_size=8, flow_grid=4, flow_max_steps=10_000)


@dataclass
class CriterionResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(self.metrics.items()) if not isinstance(v, list))
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {shown}"


def _fmt(v):
    return f"{v:.3g}" if isinstance(v, float) else str(v)


def target_spaces(rng) -> dict:
    """The five targets: plane, tripod, random 5-leaf tree, hyperbolic plane, tripod x line."""
    return {
        "euclidean_R2": EuclideanSpace(2),
        "tripod": tripod(),
        "tree5": random_tree(rng, n_leaves=5),
        "hyperbolic": HyperbolicPlane(),
        "tripod_x_R": ProductSpace([tripod(), EuclideanSpace(1)]),
    }


def _random_problem(rng, target, n_lo, n_hi):
    g = random_graph(rng, int(rng.integers(n_lo, n_hi + 1)))
    nb = max(2, g.n // 3)
    bd = set(int(v) for v in rng.choice(g.n, size=nb, replace=False))
    dom = DomainSpec([v for v in range(g.n) if v not in bd], g.n)
    return g, dom, {v: target.random_point(rng) for v in sorted(bd)}


def _ring(n):
    return [v for v in range(n * n) if v // n in (0, n - 1) or v % n in (0, n - 1)]


def _grid_domain(n):
    ring = set(_ring(n))
    return grid_graph(n), DomainSpec([v for v in range(n * n) if v not in ring], n * n)


def sector_problem(n):
    """``n x n`` grid into the tripod; the boundary ring goes to the three leaf tips by angle."""
    T = tripod()
    g, dom = _grid_domain(n)
    c = (n - 1) / 2

    def sector(v):
        i, j = divmod(v, n)
        return int((math.atan2(i - c, j - c) % (2 * math.pi)) // (2 * math.pi / 3))

    return g, dom, T, {v: T.leg_point(sector(v), 1.0) for v in dom.boundary}


def _probe_points(rng, T, u, count):
    # half from geodesics between image points, half anywhere in the target
    out = []
    for k in range(count):
        if k % 2 == 0:
            a, b = rng.choice(len(u.values), size=2)
            out.append(T.geodesic_point(u.values[a], u.values[b], float(rng.uniform())))
        else:
            out.append(T.random_point(rng))
    return out


class Suite:
    """Runs criteria and shares solved problems between them."""

    def __init__(self, seed: int = 0, scale: Scale = FULL, tol: float = 1e-9):
        self.seed = int(seed)
        self.scale = scale
        self.tol = tol
        self._children = dict(zip(CRITERIA, np.random.SeedSequence(self.seed).spawn(len(CRITERIA))))
        self._cache = {}

    def rng(self, name):
        return np.random.default_rng(self._children[name])

    def spaces(self):
        if "spaces" not in self._cache:
            self._cache["spaces"] = target_spaces(np.random.default_rng([self.seed, 7]))
        return self._cache["spaces"]

    # 1 -------------------------------------------------------------------
    def npc_comparison(self) -> CriterionResult:
        rng = self.rng("npc_comparison")
        worst = {}
        for name, S in self.spaces().items():
            m = math.inf
            for _ in range(self.scale.comparison_samples):
                P, Q, R = S.random_point(rng), S.random_point(rng), S.random_point(rng)
                m = min(m, npc_comparison_defect(S, P, Q, R, float(rng.uniform())))
            worst[name] = m
        low = min(worst.values())
        return CriterionResult("npc_comparison", low >= -1e-10,
                               {"min_defect": low, "per_space": [[k, v] for k, v in sorted(worst.items())],
                                "samples_per_space": self.scale.comparison_samples})

    # 2 -------------------------------------------------------------------
    def _oracle_cases(self):
        if "oracle" in self._cache:
            return self._cache["oracle"]
        rng = self.rng("oracle_equivalence")
        cases = []
        for _ in range(self.scale.random_graphs):
            g = random_graph(rng, int(rng.integers(10, self.scale.max_vertices + 1)))
            nb = max(2, g.n // 5)
            bd = set(int(v) for v in rng.choice(g.n, size=nb, replace=False))
            cases.append((g, DomainSpec([v for v in range(g.n) if v not in bd], g.n)))
        for n in self.scale.grid_sizes:
            cases.append(_grid_domain(n))
        out = []
        for g, dom in cases:
            for dim in (1, 3):
                R = EuclideanSpace(dim)
                vals = {v: rng.normal(size=dim) for v in dom.boundary}
                u, rep = solve_dirichlet(g, dom, R, {v: R.point(x) for v, x in vals.items()},
                                         tol=self.tol * 1e-3, n_probes=0)
                got = R.as_array(u.values)
                want = scalar_laplacian_oracle(g, dom, vals if dim > 1 else {v: x[0] for v, x in vals.items()})
                want = np.asarray(want).reshape(g.n, dim)
                out.append({"n": g.n, "dim": dim, "err": float(np.max(np.abs(got - want))),
                            "solution": got, "boundary": np.array([vals[v] for v in dom.boundary]),
                            "mapping": u,
                            "monotone": rep.monotone})
        self._cache["oracle"] = out
        return out

    def oracle_equivalence(self) -> CriterionResult:
        cases = self._oracle_cases()
        err = max(c["err"] for c in cases)
        mono = all(c["monotone"] for c in cases)
        return CriterionResult("oracle_equivalence", err <= 1e-8 and mono,
                               {"max_sup_error": err, "solves": len(cases), "energy_monotone": mono,
                                "largest_graph": max(c["n"] for c in cases)})

    # 3 -------------------------------------------------------------------
    def convexity(self) -> CriterionResult:
        rng = self.rng("convexity")
        worst = {}
        for name, S in self.spaces().items():
            m = math.inf
            per_graph = 50
            for start in range(0, self.scale.convexity_pairs, per_graph):
                g, dom, data = _random_problem(rng, S, 6, 14)
                for _ in range(min(per_graph, self.scale.convexity_pairs - start)):
                    u = random_admissible(g, dom, S, data, rng)
                    v = random_admissible(g, dom, S, data, rng)
                    f = rng.uniform(0, 1, size=g.n)
                    m = min(m, convexity_defect(u, v, f))
            worst[name] = m
        low = min(worst.values())
        return CriterionResult("convexity", low >= -1e-10,
                               {"min_defect": low, "per_space": [[k, v] for k, v in sorted(worst.items())],
                                "pairs_per_space": self.scale.convexity_pairs})

    # 4 -------------------------------------------------------------------
    def _uniqueness_runs(self):
        if "uniq" in self._cache:
            return self._cache["uniq"]
        rng = self.rng("uniqueness")
        runs = []
        for name, S in self.spaces().items():
            for k in range(self.scale.uniqueness_problems):
                g, dom, data = _random_problem(rng, S, 8, 16)
                spread = uniqueness_check(g, dom, S, data, n_restarts=self.scale.restarts, tol=self.tol,
                                          seed=int(rng.integers(2 ** 31)))
                u, _ = solve_dirichlet(g, dom, S, data, tol=self.tol * 1e-2, n_probes=0)
                runs.append({"space": name, "problem": k, "spread": spread, "solution": u})
        self._cache["uniq"] = runs
        return runs

    def uniqueness(self) -> CriterionResult:
        runs = self._uniqueness_runs()
        worst = max(r["spread"] for r in runs)
        per = {}
        for r in runs:
            per[r["space"]] = max(per.get(r["space"], 0.0), r["spread"])
        return CriterionResult("uniqueness", worst <= 10 * self.tol,
                               {"max_pairwise_sup_distance": worst, "threshold": 10 * self.tol,
                                "per_space": [[k, v] for k, v in sorted(per.items())],
                                "problems": len(runs), "restarts": self.scale.restarts})

    # 5 -------------------------------------------------------------------
    def _sector_solution(self):
        if "sector" not in self._cache:
            g, dom, T, data = sector_problem(self.scale.sector_size)
            u, rep = solve_dirichlet(g, dom, T, data, tol=self.tol * 1e-3, n_probes=0)
            self._cache["sector"] = (u, rep)
        return self._cache["sector"]

    def subharmonicity(self) -> CriterionResult:
        rng = self.rng("subharmonicity")
        solved = [(f"euclidean{c['dim']}", c["mapping"]) for c in self._oracle_cases()]
        solved += [(r["space"], r["solution"]) for r in self._uniqueness_runs()]
        solved.append(("sector", self._sector_solution()[0]))
        m2 = m1 = mg = math.inf
        for _, u in solved:
            df = DirichletForm.from_graph(u.graph)
            for y0 in _probe_points(rng, u.target, u, self.scale.probes):
                m2 = min(m2, check_weak_subharmonic(df, distance_pullback(u, y0, 2), u.domain).min_defect)
                m1 = min(m1, check_weak_subharmonic(df, distance_pullback(u, y0, 1), u.domain).min_defect)
                mg = min(mg, min(strengthened_subharmonicity_gap(df, u, y0).values()))
        ok = min(m1, m2, mg) >= -1e-9
        return CriterionResult("subharmonicity", ok,
                               {"min_defect_power2": m2, "min_defect_power1": m1, "min_strengthened_gap": mg,
                                "solutions": len(solved), "probes_each": self.scale.probes})

    # 6 -------------------------------------------------------------------
    def flow(self) -> CriterionResult:
        rng = self.rng("flow")
        n = self.scale.flow_grid
        g, dom = _grid_domain(n)
        h = 0.1
        slack = math.inf
        # real line: compare with the linear oracle
        R = EuclideanSpace(1)
        bvals = {v: float(rng.normal()) for v in dom.boundary}
        data = {v: R.point([x]) for v, x in bvals.items()}
        u0 = initial_mapping(g, dom, R, data, "boundary_barycenter")
        traj = run_flow(u0, h=h, n_steps=self.scale.flow_max_steps, tol=self.tol, stop_tol=1e-12,
                        keep_maps=False)
        got = np.array([p.coords[0] for p in traj.final.values])
        err_real = float(np.max(np.abs(got - scalar_laplacian_oracle(g, dom, bvals))))
        slack = min(slack, float(traj.variational_slack().min()))
        # NPC targets: compare with the Dirichlet solver
        err_npc = {}
        for name in ("tripod", "tree5", "hyperbolic", "tripod_x_R"):
            S = self.spaces()[name]
            data = {v: S.random_point(rng) for v in dom.boundary}
            u0 = random_admissible(g, dom, S, data, rng)
            traj = run_flow(u0, h=h, n_steps=self.scale.flow_max_steps, tol=self.tol, stop_tol=1e-12,
                            keep_maps=False)
            ref, _ = solve_dirichlet(g, dom, S, data, tol=self.tol * 1e-2, n_probes=0)
            err_npc[name] = float(np.sqrt(S.sq_dist_many(traj.final.values, ref.values).max()))
            slack = min(slack, float(traj.variational_slack().min()))
        # unconstrained collapse into the tripod
        T = self.spaces()["tripod"]
        u = Mapping(g, T, [T.random_point(rng) for _ in range(g.n)])
        traj = run_flow(u, h=h, n_steps=self.scale.flow_max_steps, constrained=False, tol=self.tol,
                        stop_tol=1e-9)
        diams = [s.mapping.image_diameter() for s in traj.steps]
        hit = next((k for k, d in enumerate(diams) if d <= 1e-5), None)
        slack = min(slack, float(traj.variational_slack().min()))
        energies_ok = bool(np.all(np.diff(traj.energies) <= 1e-12))
        worst_npc = max(err_npc.values())
        ok = (err_real <= 1e-6 and worst_npc <= 10 * self.tol and slack >= -1e-12 and hit is not None
              and energies_ok)
        return CriterionResult("flow", ok, {
            "real_line_error": err_real, "npc_max_error": worst_npc,
            "npc_errors": [[k, v] for k, v in sorted(err_npc.items())],
            "min_variational_slack": slack, "collapse_step": -1 if hit is None else hit,
            "collapse_diameter": diams[hit] if hit is not None else diams[-1], "h": h,
        })

    # 7 -------------------------------------------------------------------
    def form_algebra(self) -> CriterionResult:
        rng = self.rng("form_algebra")
        pol = ks = 0.0
        for _ in range(self.scale.polarization_triples):
            g = random_graph(rng, int(rng.integers(5, 31)))
            u, v, phi = rng.normal(size=(3, g.n))
            df = DirichletForm.from_graph(g)
            pol = max(pol, abs(polarization_residual(df, u, v, phi)))
            ks = max(ks, abs(form_value(df, u, u) - ks_energy(scalar_mapping(g, u))))
        return CriterionResult("form_algebra", pol <= 1e-12 and ks <= 1e-12,
                               {"max_polarization_residual": pol, "max_form_vs_energy": ks,
                                "triples": self.scale.polarization_triples})

    # 8 -------------------------------------------------------------------
    def green_function(self) -> CriterionResult:
        rng = self.rng("green_function")
        min_all = min_inner = math.inf
        resid = 0.0
        for _ in range(self.scale.green_graphs):
            g = random_graph(rng, 30)
            x0 = int(rng.integers(g.n))
            R = 0.3 * float(g.dist_matrix[x0].max())
            rep = green_function(g, x0, R)
            min_all = min(min_all, float(rep.G.min()))
            min_inner = min(min_inner, float(rep.G[rep.inner].min()))
            resid = max(resid, rep.residual)
        return CriterionResult("green_function", min_all >= 0 and min_inner > 0 and resid <= 1e-10,
                               {"min_G": min_all, "min_G_inner_ball": min_inner, "max_residual": resid,
                                "graphs": self.scale.green_graphs})

    # 9 -------------------------------------------------------------------
    def holder(self) -> CriterionResult:
        u, _ = self._sector_solution()
        n = self.scale.sector_size
        x0 = (n // 2 - 1) * n + (n // 2 - 1)
        radii = [r + 0.5 for r in range(n // 2 - 1, 0, -1)] + [1.0]
        rep = oscillation_decay(u, x0, radii)
        d = rep.diameters
        mono = all(b <= a for a, b in zip(d, d[1:]))
        return CriterionResult("holder", mono and rep.alpha > 0,
                               {"radii": rep.radii, "diameters": d, "alpha": rep.alpha,
                                "nonincreasing": mono, "center": x0})

    # 10 ------------------------------------------------------------------
    def maximum_principle(self) -> CriterionResult:
        checked = violations = 0
        for c in self._oracle_cases():
            lo, hi = c["boundary"].min(axis=0), c["boundary"].max(axis=0)
            bad = (c["solution"] < lo) | (c["solution"] > hi)
            violations += int(bad.sum())
            checked += 1
        return CriterionResult("maximum_principle", violations == 0,
                               {"solves_checked": checked, "violations": violations})

    def run(self, names=CRITERIA) -> list:
        return [getattr(self, name)() for name in names]


def report(results, seed: int, scale: Scale, tol: float) -> dict:
    return {
        "seed": seed,
        "tol": tol,
        "scale": {k: list(v) if isinstance(v, tuple) else v for k, v in scale.__dict__.items()},
        "conventions": CONVENTIONS,
        "all_passed": all(r.passed for r in results),
        "criteria": [{"name": r.name, "passed": r.passed, "metrics": r.metrics} for r in results],
    }


def report_json(results, seed, scale, tol) -> str:
    return dumps(report(results, seed, scale, tol))


def report_csv(results) -> str:
    rows = []
    for r in results:
        for k, v in sorted(r.metrics.items()):
            rows.append((r.name, r.passed, k, v))
    return csv_text(["criterion", "passed", "metric", "value"], rows)

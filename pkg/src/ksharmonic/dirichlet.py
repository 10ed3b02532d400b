"""Discrete Dirichlet problem for the approximating energy.

The solver is nonlinear Gauss-Seidel: interior vertices are visited in
ascending order and each is moved to the barycenter of its ball neighbours,
weighted by the symmetric energy weights ``c(x, y)``. Every update is an exact
minimization of the energy in one vertex, so the energy never increases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.sparse import csr_matrix, tril, triu
from scipy.sparse.linalg import spsolve, spsolve_triangular

from .energy import CONVENTIONS, Mapping
from .geometry import DomainError, EuclideanSpace, NpcSpace, WeightedPoints
from .graph import DomainSpec, MetricMeasureGraph, ball

__all__ = [
    "SolverError",
    "SolveReport",
    "OscillationReport",
    "solve_dirichlet",
    "scalar_laplacian_oracle",
    "uniqueness_check",
    "oscillation_decay",
    "random_admissible",
    "initial_mapping",
    "local_optimality_probe",
]

# above this many free vertices the Euclidean sweep switches to sparse triangular solves
_DENSE_LIMIT = 3000


class SolverError(RuntimeError):
    """Raised when an iteration exceeds its sweep budget.

    Attributes
    ----------
    mapping : Mapping
        Last iterate.
    residual : float
        Largest vertex move of the last sweep.
    """

    def __init__(self, message, mapping, residual):
        super().__init__(message)
        self.mapping = mapping
        self.residual = residual


@dataclass
class SolveReport:
    energies: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    sweeps: int = 0
    initial_energy: float = math.nan
    final_energy: float = math.nan
    probe_min_increase: float = math.nan
    tol: float = math.nan

    @property
    def monotone(self) -> bool:
        e = [self.initial_energy] + list(self.energies)
        return all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(e, e[1:]))

    def to_dict(self) -> dict:
        return {
            "initial_energy": self.initial_energy,
            "final_energy": self.final_energy,
            "sweeps": self.sweeps,
            "tol": self.tol,
            "final_residual": self.residuals[-1] if self.residuals else None,
            "energy_trajectory": list(self.energies),
            "residuals": list(self.residuals),
            "probe_min_increase": self.probe_min_increase,
            "conventions": CONVENTIONS,
        }


# ---------------------------------------------------------------------------
# relaxation engine (shared with the proximal steps of the flow)
# ---------------------------------------------------------------------------


def _objective(g, target, values, anchor, anchor_w):
    sq = target.sq_dist_many([values[i] for i in g.pair_i], [values[j] for j in g.pair_j])
    e = float(np.sum(g.pair_a * sq))
    if anchor is not None:
        idx = sorted(anchor)
        sq_a = target.sq_dist_many([values[x] for x in idx], [anchor[x] for x in idx])
        e += float(np.dot([anchor_w[x] for x in idx], sq_a))
    return e


def relax(u: Mapping, free, tol: float, max_sweeps: int, anchor=None, anchor_w=None,
          fast: bool = True, report: SolveReport | None = None) -> Mapping:
    """Gauss-Seidel minimization of ``ks_energy + sum_x anchor_w[x] d(v(x), anchor[x])**2``.

    Only the vertices in ``free`` move. ``anchor`` / ``anchor_w`` are dicts
    keyed by vertex (the proximal term of a flow step). Sweeps stop when the
    largest vertex move falls below ``tol``.
    """
    g, T = u.graph, u.target
    free = sorted(int(x) for x in free)
    report = SolveReport() if report is None else report
    report.tol = tol
    report.initial_energy = _objective(g, T, u.values, anchor, anchor_w)
    if not free:
        report.final_energy = report.initial_energy
        return u
    if fast and isinstance(T, EuclideanSpace):
        values = _relax_euclidean(u, free, tol, max_sweeps, anchor, anchor_w, report)
    else:
        values = _relax_generic(u, free, tol, max_sweeps, anchor, anchor_w, report)
    out = u.with_values(values)
    report.final_energy = report.energies[-1] if report.energies else report.initial_energy
    return out


def _relax_generic(u, free, tol, max_sweeps, anchor, anchor_w, report):
    g, T = u.graph, u.target
    nbrs = g.neighbors()
    values = list(u.values)
    bary_tol = max(tol * 1e-2, 1e-14)
    residual = math.inf
    for _ in range(max_sweeps):
        residual = 0.0
        for x in free:
            idx, w = nbrs[x]
            pts = [values[y] for y in idx]
            if anchor is not None:
                pts.append(anchor[x])
                # the energy counts each pair from both ends, hence the half
                w = np.append(w, 0.5 * anchor_w[x])
            old = values[x]
            new = T._barycenter(pts, w, bary_tol, 10_000, old)
            if not T.exact_barycenter:
                # iterative barycenters stop near the minimizer; never accept a point
                # that is worse by more than the rounding error of the objective
                f_old = float(w @ T.sq_dist_many([old] * len(pts), pts))
                f_new = float(w @ T.sq_dist_many([new] * len(pts), pts))
                if f_new > f_old + 1e-14 * max(1.0, f_old):
                    new = old
            residual = max(residual, T.dist(old, new))
            values[x] = new
        report.sweeps += 1
        report.residuals.append(residual)
        report.energies.append(_objective(g, T, values, anchor, anchor_w))
        if residual < tol:
            return values
    raise SolverError(f"no convergence within {max_sweeps} sweeps (residual {residual:.3g})",
                      u.with_values(values), residual)


def _relax_euclidean(u, free, tol, max_sweeps, anchor, anchor_w, report):
    # Gauss-Seidel in index order on a linear system is exactly a forward
    # triangular solve per sweep: (D - L) u_new = U u_old + rhs.
    g, T = u.graph, u.target
    X = T.as_array(u.values)
    free_arr = np.array(free)
    is_free = np.zeros(g.n, dtype=bool)
    is_free[free_arr] = True
    fixed = np.flatnonzero(~is_free)
    C = g.sym_weights()
    Cff = C[np.ix_(free_arr, free_arr)]
    alpha = np.zeros(len(free))
    A = np.zeros((len(free), T.dim))
    if anchor is not None:
        alpha = 0.5 * np.array([anchor_w[x] for x in free], dtype=float)
        A = T.as_array([anchor[x] for x in free])
    diag = C[free_arr].sum(axis=1) + alpha
    rhs0 = C[np.ix_(free_arr, fixed)] @ X[fixed] + alpha[:, None] * A
    pinned = [X[fixed]] + ([A] if anchor is not None else [])
    pinned = np.vstack(pinned)
    lo, hi = pinned.min(axis=0), pinned.max(axis=0)
    if len(free) <= _DENSE_LIMIT:
        M = np.diag(diag) - np.tril(Cff, -1)
        Up = np.triu(Cff, 1)

        def sweep(uf):
            return solve_triangular(M, Up @ uf + rhs0, lower=True, check_finite=False)
    else:
        Cs = csr_matrix(Cff)
        M = (csr_matrix(np.diag(diag)) - tril(Cs, -1)).tocsr()
        Up = triu(Cs, 1).tocsr()

        def sweep(uf):
            return spsolve_triangular(M, Up @ uf + rhs0, lower=True)

    pi, pj, pa = g.pair_i, g.pair_j, g.pair_a
    mu_anchor = 2.0 * alpha

    def objective(Xfull):
        d = Xfull[pi] - Xfull[pj]
        e = float(np.sum(pa * np.einsum("ij,ij->i", d, d)))
        if anchor is not None:
            da = Xfull[free_arr] - A
            e += float(np.sum(mu_anchor * np.einsum("ij,ij->i", da, da)))
        return e

    uf = X[free_arr].copy()
    residual = math.inf
    for _ in range(max_sweeps):
        new = np.clip(sweep(uf), lo, hi)
        residual = float(np.sqrt(np.max(np.sum((new - uf) ** 2, axis=1))))
        uf = new
        X[free_arr] = uf
        report.sweeps += 1
        report.residuals.append(residual)
        report.energies.append(objective(X))
        if residual < tol:
            return T.from_array(X)
    raise SolverError(f"no convergence within {max_sweeps} sweeps (residual {residual:.3g})",
                      u.with_values(T.from_array(X)), residual)


# ---------------------------------------------------------------------------
# Dirichlet problem
# ---------------------------------------------------------------------------


def _initial_values(g, domain, target, boundary_data, init, rng=None):
    if isinstance(init, Mapping):
        return list(init.values)
    bd = domain.boundary
    if init == "boundary_barycenter":
        wp = WeightedPoints([boundary_data[x] for x in bd], g.measure[bd])
        center = target.barycenter(wp)
        return [boundary_data[x] if x in boundary_data and x not in domain.omega else center
                for x in range(g.n)]
    if init == "random":
        rng = np.random.default_rng(0) if rng is None else rng
        return [boundary_data[x] if x not in domain.omega else _random_point(target, boundary_data, rng)
                for x in range(g.n)]
    raise DomainError(f"unknown initialization {init!r}")


def _random_point(target, boundary_data, rng):
    if isinstance(target, EuclideanSpace):
        B = target.as_array(list(boundary_data.values()))
        lo, hi = B.min(axis=0), B.max(axis=0)
        span = np.maximum(hi - lo, 1.0)
        return target.point(rng.uniform(lo - span, hi + span))
    return target.random_point(rng)


def random_admissible(g, domain, target, boundary_data, rng) -> Mapping:
    """Map with the given boundary data and random interior values."""
    return initial_mapping(g, domain, target, boundary_data, "random", rng)


def initial_mapping(g, domain, target, boundary_data, init="boundary_barycenter", rng=None) -> Mapping:
    """Admissible starting map: ``"boundary_barycenter"`` or ``"random"`` interior values."""
    vals = _initial_values(g, domain, target, boundary_data, init, rng)
    return Mapping(g, target, vals, domain, {x: boundary_data[x] for x in domain.boundary})


def solve_dirichlet(g: MetricMeasureGraph, domain: DomainSpec, target: NpcSpace, boundary_data: dict,
                    init="boundary_barycenter", tol: float = 1e-9, max_sweeps: int = 100_000,
                    n_probes: int = 20, seed: int = 0, fast: bool = True):
    """Minimize the energy over maps equal to ``boundary_data`` off ``domain``.

    Parameters
    ----------
    init : Mapping, "boundary_barycenter" or "random"
        Starting map. The default puts every interior vertex at the
        measure-weighted barycenter of the boundary values.
    tol : float
        Stop when no interior vertex moves by ``tol`` or more in a sweep.
    n_probes : int
        Number of single-vertex perturbation probes recorded in the report.
    fast : bool
        Use the triangular-solve form of the sweep for Euclidean targets.

    Returns
    -------
    u : Mapping
    report : SolveReport
    """
    domain.require_boundary()
    boundary_data = {int(k): target.check(v) for k, v in boundary_data.items()}
    missing = [x for x in domain.boundary if x not in boundary_data]
    if missing:
        raise DomainError(f"boundary data missing at vertices {missing[:5]}")
    rng = np.random.default_rng(seed)
    vals = _initial_values(g, domain, target, boundary_data, init, rng)
    u0 = Mapping(g, target, vals, domain, {x: boundary_data[x] for x in domain.boundary})
    report = SolveReport()
    u = relax(u0, domain.interior, tol, max_sweeps, fast=fast, report=report)
    if n_probes:
        report.probe_min_increase = local_optimality_probe(u, n_probes, rng)
    return u, report


def local_optimality_probe(u: Mapping, n_probes: int, rng, step: float = 1e-3) -> float:
    """Smallest energy change over random single-vertex perturbations.

    Each probe moves one interior vertex a fraction ``step`` of the way toward a
    random point. Returns the minimum of ``E(perturbed) - E(u)``.
    """
    g, T = u.graph, u.target
    nbrs = g.neighbors()
    interior = u.domain.interior if u.domain is not None else list(range(g.n))
    best = math.inf
    for _ in range(n_probes):
        x = int(rng.choice(interior))
        target_pt = _random_point(T, dict(enumerate(u.values)), rng)
        new = T.geodesic_point(u.values[x], target_pt, step)
        idx, w = nbrs[x]
        pts = [u.values[y] for y in idx]
        before = T.sq_dist_many([u.values[x]] * len(pts), pts)
        after = T.sq_dist_many([new] * len(pts), pts)
        best = min(best, 2.0 * float(w @ (after - before)))
    return best


def scalar_laplacian_oracle(g: MetricMeasureGraph, domain: DomainSpec, boundary_values) -> np.ndarray:
    """Direct solve of the real-valued Dirichlet problem.

    Solves ``sum_y c(x, y) (u(x) - u(y)) = 0`` at interior vertices with ``u``
    fixed off ``domain``. The weights are rebuilt here from the distance
    matrix and measure. ``boundary_values`` maps boundary vertices to reals
    (or to equal-length vectors, solved column by column).
    """
    domain.require_boundary()
    n, eps, mu, D = g.n, g.eps, g.measure, g.dist_matrix
    in_ball = (D < eps).astype(float)
    np.fill_diagonal(in_ball, 0.0)
    ball_mu = (D < eps).astype(float) @ mu
    a = in_ball * np.outer(mu, mu) / (ball_mu[:, None] * eps ** 2)
    c = 0.5 * (a + a.T)
    lap = np.diag(c.sum(axis=1)) - c
    interior = np.array(domain.interior)
    bd = np.array(domain.boundary)
    vals = np.array([np.atleast_1d(np.asarray(boundary_values[int(x)], dtype=float)) for x in bd])
    L_ii = csr_matrix(lap[np.ix_(interior, interior)])
    rhs = -lap[np.ix_(interior, bd)] @ vals
    sol = spsolve(L_ii.tocsc(), rhs)
    sol = np.asarray(sol).reshape(len(interior), vals.shape[1])
    out = np.zeros((n, vals.shape[1]))
    out[interior] = sol
    out[bd] = vals
    return out[:, 0] if out.shape[1] == 1 else out


def uniqueness_check(g, domain, target, boundary_data, n_restarts: int = 5, tol: float = 1e-9,
                     seed: int = 0, max_sweeps: int = 100_000) -> float:
    """Largest sup-distance between solutions started from random admissible maps.

    Each solve runs with stopping tolerance ``tol / 100`` so the stopping error
    stays well below ``tol``; the result should not exceed ``10 * tol``.
    """
    if n_restarts < 2:
        raise DomainError("need at least two restarts")
    rng = np.random.default_rng(seed)
    sols = []
    for _ in range(n_restarts):
        init = random_admissible(g, domain, target, boundary_data, rng)
        u, _ = solve_dirichlet(g, domain, target, boundary_data, init=init, tol=tol / 100,
                               max_sweeps=max_sweeps, n_probes=0)
        sols.append(u)
    worst = 0.0
    for i in range(n_restarts):
        for j in range(i + 1, n_restarts):
            d = np.sqrt(target.sq_dist_many(sols[i].values, sols[j].values))
            worst = max(worst, float(d.max()))
    return worst


@dataclass
class OscillationReport:
    radii: list
    diameters: list
    alpha: float

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.radii, self.diameters))

    def to_dict(self) -> dict:
        return {"radii": list(self.radii), "diameters": list(self.diameters), "holder_exponent": self.alpha}


def oscillation_decay(u: Mapping, x0: int, radii) -> OscillationReport:
    """Diameters of ``u(B(x0, r))`` and a fitted decay exponent.

    ``alpha`` is the slope of ``log diam`` against ``log r`` over the radii
    with positive diameter (``nan`` if fewer than two).
    """
    T = u.target
    radii = [float(r) for r in radii]
    diams = []
    for r in radii:
        pts = [u.values[y] for y in ball(u.graph, x0, r)]
        n = len(pts)
        if n < 2:
            diams.append(0.0)
            continue
        ii, jj = np.triu_indices(n, 1)
        diams.append(float(np.sqrt(T.sq_dist_many([pts[i] for i in ii], [pts[j] for j in jj]).max())))
    r = np.array(radii)
    d = np.array(diams)
    ok = (d > 0) & (r > 0)
    alpha = float(np.polyfit(np.log(r[ok]), np.log(d[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
    return OscillationReport(radii, diams, alpha)

"""Harmonic map flow by minimizing movements on ``L2(X, Y)``.

Each step solves ``u_{k+1} = argmin_v E(v) + D(v, u_k)**2 / (2h)`` with
``D(u, v)**2 = sum_x mu(x) d(u(x), v(x))**2``. The objective is strictly
convex along geodesics of the NPC space ``L2(X, Y)``, so the step is unique;
it is computed by the same Gauss-Seidel relaxation as the Dirichlet solver,
with the previous state as an extra anchor point at every vertex.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dirichlet import SolveReport, relax
from .energy import Mapping, ks_energy
from .geometry import DomainError

__all__ = [
    "FlowStep",
    "FlowTrajectory",
    "l2_distance",
    "prox_step",
    "run_flow",
    "l2_comparison_defect",
]


def _check_pair(u: Mapping, v: Mapping):
    if u.graph is not v.graph or u.target is not v.target:
        raise DomainError("maps live on different graphs or targets")


def l2_distance(u: Mapping, v: Mapping) -> float:
    """``sqrt(sum_x mu(x) d(u(x), v(x))**2)``."""
    _check_pair(u, v)
    sq = u.target.sq_dist_many(u.values, v.values)
    return float(np.sqrt(np.dot(u.graph.measure, sq)))


def l2_comparison_defect(P: Mapping, Q: Mapping, R: Mapping, lam: float) -> float:
    """NPC comparison slack in ``L2(X, Y)``, geodesics taken pointwise."""
    _check_pair(P, Q)
    _check_pair(P, R)
    T = P.target
    Q_lam = Q.with_values([T.geodesic_point(q, r, lam) for q, r in zip(Q.values, R.values)])
    D2 = lambda a, b: l2_distance(a, b) ** 2  # noqa: E731
    return ((1 - lam) * D2(P, Q) + lam * D2(P, R) - lam * (1 - lam) * D2(Q, R) - D2(P, Q_lam))


def prox_step(u_t: Mapping, h: float, constrained: bool = True, tol: float = 1e-9,
              max_sweeps: int = 100_000, fast: bool = True, report: SolveReport | None = None) -> Mapping:
    """One minimizing-movement step of size ``h``.

    With ``constrained=True`` the boundary values of ``u_t`` stay fixed and
    only interior vertices move; otherwise every vertex is free.
    """
    if not h > 0:
        raise DomainError("step size must be positive")
    g = u_t.graph
    if constrained:
        if u_t.domain is None:
            raise DomainError("constrained step needs a mapping with a domain")
        free = u_t.domain.interior
    else:
        free = range(g.n)
        u_t = Mapping(g, u_t.target, u_t.values)
    anchor = {x: u_t.values[x] for x in free}
    anchor_w = {x: g.measure[x] / (2.0 * h) for x in free}
    return relax(u_t, free, tol, max_sweeps, anchor=anchor, anchor_w=anchor_w, fast=fast, report=report)


@dataclass
class FlowStep:
    time: float
    mapping: Mapping = field(repr=False)
    energy: float
    displacement: float


@dataclass
class FlowTrajectory:
    h: float
    steps: list = field(default_factory=list)

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.steps])

    @property
    def displacements(self) -> np.ndarray:
        return np.array([s.displacement for s in self.steps])

    @property
    def final(self) -> Mapping:
        return self.steps[-1].mapping

    def variational_slack(self) -> np.ndarray:
        """``E(u_k) - E(u_{k+1}) - D(u_{k+1}, u_k)**2 / (2h)`` for each step (should be >= 0)."""
        e = self.energies
        d = self.displacements[1:]
        return e[:-1] - e[1:] - d * d / (2.0 * self.h)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "time", "energy", "displacement"])
        for k, s in enumerate(self.steps):
            w.writerow([k, repr(s.time), repr(s.energy), repr(s.displacement)])
        return buf.getvalue()


def run_flow(u0: Mapping, h: float = 0.1, n_steps: int = 100, constrained: bool = True,
             tol: float = 1e-9, stop_tol: float | None = None, keep_maps: bool = True,
             fast: bool = True) -> FlowTrajectory:
    """Iterate :func:`prox_step` from ``u0``.

    The inner relaxation runs at ``min(tol, h * tol)``. With ``stop_tol`` the
    flow ends early once a step moves the map by less than ``stop_tol`` in
    ``L2``. Step 0 holds ``u0`` with displacement 0. With ``keep_maps=False``
    only the last map is retained.
    """
    inner = min(tol, h * tol)
    traj = FlowTrajectory(h=h)
    u = u0
    traj.steps.append(FlowStep(0.0, u, ks_energy(u), 0.0))
    for k in range(1, n_steps + 1):
        v = prox_step(u, h, constrained=constrained, tol=inner, fast=fast)
        if not constrained:
            v = Mapping(u0.graph, u0.target, v.values)
        disp = l2_distance(u, v)
        if not keep_maps and traj.steps:
            traj.steps[-1].mapping = None
        traj.steps.append(FlowStep(k * h, v, ks_energy(v), disp))
        u = v
        if stop_tol is not None and disp < stop_tol:
            break
    return traj

"""Approximating energies of maps from a graph into an NPC space.

Normalization
-------------
``ks_energy`` carries no global one-half::

    E(u)(f) = sum_x f(x) mu(x) e(x),
    e(x)    = 1/mu(B(x,eps)) * sum_{y in B(x,eps)} mu(y) d(u(x), u(y))**2 / eps**2.

``ks_energy_kuwae_shioya`` carries the explicit ``1 / (2 b(eps))`` of the
rate-function normalization and no ball average.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping as TMapping

import numpy as np

from .geometry import DomainError, EuclideanSpace, NpcPoint, NpcSpace
from .graph import DomainSpec, MetricMeasureGraph

__all__ = [
    "CONVENTIONS",
    "Mapping",
    "RateFunction",
    "EnergyReport",
    "energy_density",
    "ks_energy",
    "ks_energy_kuwae_shioya",
    "energy_report",
    "midpoint_map",
    "convexity_defect",
    "distance_pullback",
    "scalar_mapping",
    "energy_measure_of_map",
]

CONVENTIONS = {
    "ball": "open ball d(x,y) < eps, center included (self term contributes 0)",
    "ks_energy": "sum_x f(x) mu(x) avg_{B(x,eps)} d^2/eps^2, no global 1/2",
    "kuwae_shioya": "1/(2 b(eps)) sum_x f(x) mu(x) sum_{B(x,eps)} mu(y) d^2/eps^2",
    "dirichlet_form": "E0(u,v) = sum_{x,y} c(x,y) du dv with c = (a(x,y)+a(y,x))/2, so E0(u,u) = ks_energy(u)",
    "energy_measure": "Gamma(u,v)(x) = sum_y c(x,y) du dv (symmetric split); discrete analogue",
    "flow": "u_{k+1} = argmin ks_energy(v) + D^2(v,u_k)/(2h), D^2 = sum_x mu(x) d^2",
}


@dataclass(eq=False)
class Mapping:
    """Vertex-to-point assignment with optional Dirichlet data.

    ``values[x]`` is the image of vertex ``x``. When ``domain`` is given,
    ``boundary_data`` must be defined on every boundary vertex and the values
    there must agree with it exactly.
    """

    graph: MetricMeasureGraph
    target: NpcSpace
    values: list
    domain: DomainSpec | None = None
    boundary_data: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = list(self.values)
        if len(self.values) != self.graph.n:
            raise DomainError(f"mapping has {len(self.values)} values for {self.graph.n} vertices")
        for p in self.values:
            self.target.check(p)
        self.boundary_data = {int(k): v for k, v in self.boundary_data.items()}
        if self.domain is not None:
            for x in self.domain.boundary:
                if x not in self.boundary_data:
                    raise DomainError(f"boundary data missing at vertex {x}")
                if self.values[x] != self.boundary_data[x]:
                    raise DomainError(f"value at boundary vertex {x} differs from boundary data")

    def with_values(self, values) -> "Mapping":
        return Mapping(self.graph, self.target, values, self.domain, self.boundary_data)

    def pair_sq_dists(self) -> np.ndarray:
        """``d(u(x), u(y))**2`` over the graph's ordered ball pairs."""
        g = self.graph
        vals = self.values
        return self.target.sq_dist_many([vals[i] for i in g.pair_i], [vals[j] for j in g.pair_j])

    def image_diameter(self) -> float:
        return _diameter(self.target, self.values)


def _diameter(space, points) -> float:
    n = len(points)
    if n < 2:
        return 0.0
    ii, jj = np.triu_indices(n, 1)
    return float(np.sqrt(space.sq_dist_many([points[i] for i in ii], [points[j] for j in jj]).max()))


def scalar_mapping(g: MetricMeasureGraph, values, domain=None, boundary=None) -> Mapping:
    """Wrap a real vertex function as a map into the real line."""
    R = EuclideanSpace(1)
    pts = [R.point([float(v)]) for v in np.asarray(values, dtype=float)]
    bd = {}
    if domain is not None:
        bd = {x: pts[x] for x in domain.boundary}
    return Mapping(g, R, pts, domain, bd if boundary is None else boundary)


def _check_f(g, f):
    if f is None:
        return np.ones(g.n)
    f = np.broadcast_to(np.asarray(f, dtype=float), (g.n,))
    if np.any(f < 0) or np.any(f > 1):
        raise DomainError("test function must take values in [0, 1]")
    return f


def energy_density(u: Mapping) -> np.ndarray:
    """Pointwise density ``e(x)``, one entry per vertex."""
    g = u.graph
    contrib = g.pair_a * u.pair_sq_dists()
    return np.bincount(g.pair_i, weights=contrib, minlength=g.n) / g.measure


def ks_energy(u: Mapping, f=None) -> float:
    """``sum_x f(x) mu(x) e(x)``; ``f`` defaults to 1 (where the sup is attained)."""
    f = _check_f(u.graph, f)
    g = u.graph
    dens_mass = np.bincount(g.pair_i, weights=g.pair_a * u.pair_sq_dists(), minlength=g.n)
    return float(f @ dens_mass)


@dataclass(frozen=True)
class RateFunction:
    """Increasing rate ``b`` with ``b(0+) = 0``.

    Build with :meth:`power` (``b(r) = r**nu``) or :meth:`tabulated`
    (piecewise-linear through the given samples).
    """

    name: str
    fn: Callable[[float], float] = field(repr=False, compare=False)

    @classmethod
    def power(cls, nu: float) -> "RateFunction":
        nu = float(nu)
        if nu <= 0:
            raise DomainError("power rate needs nu > 0")
        return cls(f"power({nu:g})", lambda r: float(r) ** nu)

    @classmethod
    def tabulated(cls, radii, values) -> "RateFunction":
        r = np.concatenate([[0.0], np.asarray(radii, dtype=float)])
        b = np.concatenate([[0.0], np.asarray(values, dtype=float)])
        if np.any(np.diff(r) <= 0) or np.any(np.diff(b) <= 0):
            raise DomainError("tabulated rate must be strictly increasing")
        return cls("tabulated", lambda s: float(np.interp(s, r, b)))

    def __call__(self, r: float) -> float:
        return self.fn(r)


def ks_energy_kuwae_shioya(u: Mapping, f=None, b: RateFunction | None = None,
                           variant: str = "ball_normalized") -> float:
    """Rate-normalized energy.

    ``ball_normalized``: ``1/(2 b(eps)) sum_x f(x) mu(x) sum_{y in B(x,eps)} mu(y) d^2 / eps^2``.
    ``chordal``: same with ``d(x, y)**2`` in place of ``eps**2`` and ``y != x``.
    """
    g = u.graph
    f = _check_f(g, f)
    b = RateFunction.power(2.0) if b is None else b
    be = b(g.eps)
    if not be > 0:
        raise DomainError("rate function must be positive at eps")
    sq = u.pair_sq_dists()
    w = g.measure[g.pair_i] * g.measure[g.pair_j] * f[g.pair_i]
    if variant == "ball_normalized":
        denom = g.eps ** 2
    elif variant == "chordal":
        denom = g.dist_matrix[g.pair_i, g.pair_j] ** 2
    else:
        raise DomainError(f"unknown variant {variant!r}")
    return float(np.sum(w * sq / denom) / (2.0 * be))


@dataclass
class EnergyReport:
    total: float
    density: np.ndarray
    mapping: Mapping = field(repr=False)

    def weighted_total(self, f) -> float:
        f = _check_f(self.mapping.graph, f)
        return float(np.sum(f * self.mapping.graph.measure * self.density))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vertex", "density"])
        for x, e in enumerate(self.density):
            w.writerow([x, repr(float(e))])
        return buf.getvalue()

    def summary(self, f=None) -> dict:
        g = self.mapping.graph
        return {
            "total": self.total,
            "f": "constant 1" if f is None else [float(v) for v in np.broadcast_to(f, (g.n,))],
            "weighted_total": self.weighted_total(f),
            "eps": g.eps,
            "total_measure": g.total_measure,
            "conventions": CONVENTIONS,
        }

    def to_json(self, f=None) -> str:
        return json.dumps(self.summary(f), indent=2, sort_keys=True)


def energy_report(u: Mapping) -> EnergyReport:
    dens = energy_density(u)
    return EnergyReport(total=float(np.sum(u.graph.measure * dens)), density=dens, mapping=u)


def _check_compatible(u: Mapping, v: Mapping):
    if u.graph is not v.graph or u.target is not v.target:
        raise DomainError("maps live on different graphs or targets")


def midpoint_map(u: Mapping, v: Mapping) -> Mapping:
    """Pointwise geodesic midpoint of two maps."""
    _check_compatible(u, v)
    if u.domain != v.domain or u.boundary_data != v.boundary_data:
        raise DomainError("maps carry different boundary data")
    T = u.target
    return u.with_values([T.midpoint(p, q) for p, q in zip(u.values, v.values)])


def distance_pullback(u: Mapping, y0: NpcPoint, power: int = 2) -> np.ndarray:
    """``x -> d(u(x), y0)**power`` for ``power`` in {1, 2}."""
    if power not in (1, 2):
        raise DomainError("power must be 1 or 2")
    u.target.check(y0)
    sq = u.target.sq_dist_many(u.values, [y0] * len(u.values))
    return sq if power == 2 else np.sqrt(sq)


def _scalar_energy(g: MetricMeasureGraph, h: np.ndarray, f) -> float:
    diff = h[g.pair_i] - h[g.pair_j]
    return float(np.sum(f[g.pair_i] * g.pair_a * diff * diff))


def convexity_defect(u: Mapping, v: Mapping, f=None) -> float:
    """``E(u)(f) + E(v)(f) - E(d(u, v))(f) / 2 - 2 E(w)(f)`` with ``w`` the midpoint map.

    Nonnegative for NPC targets. For Euclidean targets it equals
    ``(E(u - v) - E(|u - v|)) / 2``, which vanishes for real maps with
    ``u >= v`` everywhere (or ``u <= v``).
    """
    w = midpoint_map(u, v)
    g = u.graph
    f = _check_f(g, f)
    h = np.sqrt(u.target.sq_dist_many(u.values, v.values))
    return ks_energy(u, f) + ks_energy(v, f) - 0.5 * _scalar_energy(g, h, f) - 2.0 * ks_energy(w, f)


def energy_measure_of_map(u: Mapping) -> np.ndarray:
    """Discrete energy measure ``mu_u(x) = sum_y c(x, y) d(u(x), u(y))**2``.

    This splits each pair term evenly between its endpoints; it sums to
    ``ks_energy(u)`` and agrees with ``mu(x) e(x)`` wherever neighbouring
    balls carry equal measure.
    """
    g = u.graph
    contrib = 0.5 * g.pair_a * u.pair_sq_dists()
    return (np.bincount(g.pair_i, weights=contrib, minlength=g.n)
            + np.bincount(g.pair_j, weights=contrib, minlength=g.n))

"""Concrete NPC (CAT(0)) target spaces.

Every space exposes exact distances, constant-speed geodesics, midpoints and
weighted barycenters. Points are immutable :class:`NpcPoint` values tagged
with the ``space_id`` of the space that owns them:

* Euclidean: ``coords`` is a tuple of floats.
* Metric tree: ``coords`` is ``(edge_index, offset)``, the offset measured
  from the edge's start vertex in length units.
* Hyperbolic plane: hyperboloid coordinates ``(x0, x1, x2)`` with
  ``x0**2 - x1**2 - x2**2 == 1``.
* Product: ``coords`` is a tuple of component points.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "BarycenterError",
    "NpcPoint",
    "WeightedPoints",
    "NpcSpace",
    "EuclideanSpace",
    "MetricTree",
    "HyperbolicPlane",
    "ProductSpace",
    "tripod",
    "random_tree",
    "dist",
    "geodesic_point",
    "midpoint",
    "npc_comparison_defect",
    "barycenter",
    "barycenter_objective",
    "inductive_mean",
]


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


class BarycenterError(RuntimeError):
    """Raised when an iterative barycenter fails to converge.

    Attributes
    ----------
    last : NpcPoint
        Last iterate.
    residual : float
        Length of the last step.
    """

    def __init__(self, message, last, residual):
        super().__init__(message)
        self.last = last
        self.residual = residual


@dataclass(frozen=True)
class NpcPoint:
    space_id: str
    coords: tuple


@dataclass(frozen=True)
class WeightedPoints:
    points: tuple
    weights: tuple

    def __init__(self, points, weights):
        points = tuple(points)
        weights = tuple(float(w) for w in weights)
        if len(points) != len(weights):
            raise DomainError("points and weights differ in length")
        if not points:
            raise DomainError("empty point set")
        if any(w < 0 or not math.isfinite(w) for w in weights):
            raise DomainError("weights must be finite and nonnegative")
        if sum(weights) <= 0:
            raise DomainError("weights sum to zero")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)


class NpcSpace:
    """Base class for NPC target spaces.

    Subclasses implement :meth:`dist`, :meth:`geodesic_point`,
    :meth:`sq_dist_many` and :meth:`_barycenter`. Instances are immutable
    after construction.
    """

    space_id: str = ""
    #: True when :meth:`_barycenter` returns the exact minimizer (up to
    #: roundoff) rather than an iterate.
    exact_barycenter = True

    # -- validation ---------------------------------------------------------
    def check(self, p: NpcPoint) -> NpcPoint:
        if not isinstance(p, NpcPoint) or p.space_id != self.space_id:
            got = getattr(p, "space_id", type(p).__name__)
            raise DomainError(f"point of space {got!r} used in {self.space_id!r}")
        return p

    def contains(self, p) -> bool:
        try:
            self.check(p)
        except DomainError:
            return False
        return True

    # -- metric ---------------------------------------------------------------
    def dist(self, p: NpcPoint, q: NpcPoint) -> float:
        raise NotImplementedError

    def sq_dist_many(self, ps: Sequence[NpcPoint], qs: Sequence[NpcPoint]) -> np.ndarray:
        """Elementwise squared distances ``d(ps[i], qs[i])**2``."""
        return np.array([self.dist(p, q) ** 2 for p, q in zip(ps, qs)], dtype=float)

    def geodesic_point(self, p: NpcPoint, q: NpcPoint, t: float) -> NpcPoint:
        raise NotImplementedError

    def midpoint(self, p: NpcPoint, q: NpcPoint) -> NpcPoint:
        return self.geodesic_point(p, q, 0.5)

    def _check_t(self, t):
        if not (0.0 <= t <= 1.0):
            raise DomainError(f"geodesic parameter {t} outside [0, 1]")

    # -- barycenters ----------------------------------------------------------
    def barycenter(self, wp: WeightedPoints, tol: float = 1e-10, max_iter: int = 10_000,
                   init: NpcPoint | None = None) -> NpcPoint:
        """Minimizer of ``sum_i w_i d(x, p_i)**2``."""
        if tol <= 0:
            raise DomainError("tol must be positive")
        for p in wp.points:
            self.check(p)
        return self._barycenter(wp.points, np.asarray(wp.weights), tol, max_iter, init)

    def _barycenter(self, points, weights, tol, max_iter, init):
        raise NotImplementedError

    # -- sampling / serialization -------------------------------------------
    def random_point(self, rng: np.random.Generator) -> NpcPoint:
        raise NotImplementedError

    def point(self, coords) -> NpcPoint:
        """Build a validated point from raw coordinates."""
        raise NotImplementedError

    def to_json(self, p: NpcPoint) -> Any:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Euclidean
# ---------------------------------------------------------------------------


class EuclideanSpace(NpcSpace):
    def __init__(self, dim: int):
        if dim < 1:
            raise DomainError("dimension must be >= 1")
        self.dim = int(dim)
        self.space_id = f"euclidean({self.dim})"

    def point(self, coords) -> NpcPoint:
        c = tuple(float(v) for v in np.atleast_1d(np.asarray(coords, dtype=float)))
        if len(c) != self.dim:
            raise DomainError(f"expected {self.dim} coordinates, got {len(c)}")
        return NpcPoint(self.space_id, c)

    def as_array(self, points: Sequence[NpcPoint]) -> np.ndarray:
        return np.array([p.coords for p in points], dtype=float).reshape(len(points), self.dim)

    def from_array(self, arr) -> list[NpcPoint]:
        arr = np.asarray(arr, dtype=float).reshape(-1, self.dim)
        return [NpcPoint(self.space_id, tuple(float(v) for v in row)) for row in arr]

    def dist(self, p, q):
        self.check(p)
        self.check(q)
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(p.coords, q.coords)))

    def sq_dist_many(self, ps, qs):
        if not len(ps):
            return np.zeros(0)
        diff = self.as_array(ps) - self.as_array(qs)
        return np.einsum("ij,ij->i", diff, diff)

    def geodesic_point(self, p, q, t):
        self.check(p)
        self.check(q)
        self._check_t(t)
        if t == 0.0:
            return p
        if t == 1.0:
            return q
        return NpcPoint(self.space_id, tuple(a + t * (b - a) for a, b in zip(p.coords, q.coords)))

    def _barycenter(self, points, weights, tol, max_iter, init):
        X = self.as_array(points)
        mean = weights @ X / weights.sum()
        # keep the mean inside the coordinate hull of the inputs despite roundoff
        active = X[weights > 0]
        mean = np.clip(mean, active.min(axis=0), active.max(axis=0))
        return NpcPoint(self.space_id, tuple(float(v) for v in mean))

    def random_point(self, rng, scale=1.0):
        return self.point(rng.uniform(-scale, scale, size=self.dim))

    def to_json(self, p):
        self.check(p)
        return list(p.coords)

    def describe(self):
        return {"kind": "euclidean", "dim": self.dim}


# ---------------------------------------------------------------------------
# Metric trees
# ---------------------------------------------------------------------------


class MetricTree(NpcSpace):
    """A finite metric tree with positive edge lengths.

    Parameters
    ----------
    n_vertices : int
        Number of tree vertices.
    edges : sequence of (start, end, length)
        Edge list. The graph must be connected and acyclic.
    name : str
        Label used in the space id.
    """

    def __init__(self, n_vertices: int, edges, name: str = "tree"):
        edges = [(int(s), int(t), float(L)) for s, t, L in edges]
        n = int(n_vertices)
        if n < 2 or len(edges) != n - 1:
            raise DomainError("a tree on n vertices needs exactly n - 1 edges (n >= 2)")
        for s, t, L in edges:
            if not (0 <= s < n and 0 <= t < n) or s == t:
                raise DomainError(f"bad edge ({s}, {t})")
            if not (L > 0 and math.isfinite(L)):
                raise DomainError("edge lengths must be strictly positive")
        self.n_vertices = n
        self.edges = tuple(edges)
        self.name = name
        self.space_id = f"tree:{name}"
        self.start = np.array([e[0] for e in edges], dtype=int)
        self.end = np.array([e[1] for e in edges], dtype=int)
        self.length = np.array([e[2] for e in edges], dtype=float)

        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for k, (s, t, _) in enumerate(edges):
            adj[s].append((t, k))
            adj[t].append((s, k))
        self._adj = adj
        # all-pairs vertex distances and next hop toward each target
        D = np.full((n, n), np.inf)
        nxt = np.full((n, n), -1, dtype=int)  # nxt[a, b]: edge leaving a toward b
        for root in range(n):
            D[root, root] = 0.0
            queue = deque([root])
            seen = {root}
            while queue:
                v = queue.popleft()
                for w, k in adj[v]:
                    if w not in seen:
                        seen.add(w)
                        D[root, w] = D[root, v] + self.length[k]
                        nxt[w, root] = k
                        queue.append(w)
            if len(seen) != n:
                raise DomainError("tree is disconnected")
        self.vertex_dist = D
        self._next_edge = nxt
        # designated edge for each vertex, so vertex points have one representation
        self._designated = [adj[v][0][1] for v in range(n)]

    # -- point helpers --------------------------------------------------------
    def vertex_point(self, v: int) -> NpcPoint:
        k = self._designated[v]
        off = 0.0 if self.start[k] == v else float(self.length[k])
        return NpcPoint(self.space_id, (k, off))

    def _canonical(self, k: int, off: float) -> NpcPoint:
        L = float(self.length[k])
        if off <= 0.0:
            return self.vertex_point(int(self.start[k]))
        if off >= L:
            return self.vertex_point(int(self.end[k]))
        return NpcPoint(self.space_id, (int(k), float(off)))

    def point(self, coords) -> NpcPoint:
        k, off = coords
        k = int(k)
        off = float(off)
        if not 0 <= k < len(self.edges):
            raise DomainError(f"edge {k} does not exist")
        L = float(self.length[k])
        if not (0.0 <= off <= L):
            raise DomainError(f"offset {off} outside [0, {L}] on edge {k}")
        return self._canonical(k, off)

    def leg_point(self, k: int, offset: float) -> NpcPoint:
        """Point on edge ``k`` at ``offset`` from its start (alias of :meth:`point`)."""
        return self.point((k, offset))

    def _vertex_to_point(self, v: int, k: int, off: float) -> float:
        return min(self.vertex_dist[v, self.start[k]] + off,
                   self.vertex_dist[v, self.end[k]] + self.length[k] - off)

    def dist(self, p, q):
        self.check(p)
        self.check(q)
        (k1, o1), (k2, o2) = p.coords, q.coords
        if k1 == k2:
            return abs(o1 - o2)
        D = self.vertex_dist
        L1, L2 = self.length[k1], self.length[k2]
        s1, t1, s2, t2 = self.start[k1], self.end[k1], self.start[k2], self.end[k2]
        return float(min(o1 + D[s1, s2] + o2, o1 + D[s1, t2] + L2 - o2,
                         L1 - o1 + D[t1, s2] + o2, L1 - o1 + D[t1, t2] + L2 - o2))

    def as_arrays(self, points):
        k = np.fromiter((p.coords[0] for p in points), dtype=int, count=len(points))
        o = np.fromiter((p.coords[1] for p in points), dtype=float, count=len(points))
        return k, o

    def sq_dist_many(self, ps, qs):
        if not len(ps):
            return np.zeros(0)
        k1, o1 = self.as_arrays(ps)
        k2, o2 = self.as_arrays(qs)
        D = self.vertex_dist
        L1, L2 = self.length[k1], self.length[k2]
        s1, t1, s2, t2 = self.start[k1], self.end[k1], self.start[k2], self.end[k2]
        d = np.minimum.reduce([o1 + D[s1, s2] + o2, o1 + D[s1, t2] + L2 - o2,
                               L1 - o1 + D[t1, s2] + o2, L1 - o1 + D[t1, t2] + L2 - o2])
        d = np.where(k1 == k2, np.abs(o1 - o2), d)
        return d * d

    def geodesic_point(self, p, q, t):
        self.check(p)
        self.check(q)
        self._check_t(t)
        if t == 0.0:
            return p
        if t == 1.0:
            return q
        (k1, o1), (k2, o2) = p.coords, q.coords
        if k1 == k2:
            return self._canonical(k1, o1 + t * (o2 - o1))
        D = self.vertex_dist
        # choose the exit vertex a of p's edge and entry vertex b of q's edge
        best = None
        for a, da in ((self.start[k1], o1), (self.end[k1], self.length[k1] - o1)):
            for b, db in ((self.start[k2], o2), (self.end[k2], self.length[k2] - o2)):
                total = da + D[a, b] + db
                if best is None or total < best[0]:
                    best = (total, int(a), float(da), int(b), float(db))
        total, a, da, b, db = best
        s = t * total
        if s <= da:
            return self._canonical(k1, o1 - s if a == self.start[k1] else o1 + s)
        if s >= total - db:
            r = total - s  # remaining distance to q, measured along q's edge
            return self._canonical(k2, o2 - r if b == self.start[k2] else o2 + r)
        s -= da
        v = a
        while v != b:
            k = int(self._next_edge[v, b])
            L = float(self.length[k])
            w = int(self.end[k]) if self.start[k] == v else int(self.start[k])
            if s <= L:
                return self._canonical(k, s if self.start[k] == v else L - s)
            s -= L
            v = w
        return self.vertex_point(b)

    def _barycenter(self, points, weights, tol, max_iter, init):
        # On each edge d(x(o), p) is affine in the offset o with slope +-1, so
        # F restricted to the edge is a quadratic; minimize edge by edge.
        kp, op = self.as_arrays(points)
        D = self.vertex_dist
        Lp = self.length[kp]
        # distance from every tree vertex to every point: (V, n)
        dv = np.minimum(D[:, self.start[kp]] + op, D[:, self.end[kp]] + Lp - op)
        ds = dv[self.start]  # (E, n)
        dt = dv[self.end]
        L = self.length[:, None]
        on_edge = np.arange(len(self.edges))[:, None] == kp[None, :]
        alpha = np.where(ds < dt, 1.0, -1.0)
        beta = np.where(ds < dt, ds, L + dt)
        alpha = np.where(on_edge, 1.0, alpha)
        beta = np.where(on_edge, -op[None, :], beta)
        W = weights.sum()
        lin = (weights * alpha * beta).sum(axis=1)
        const = (weights * beta * beta).sum(axis=1)
        # F(o) = sum w (o - t)**2 with t = -alpha * beta; average relative to
        # the smallest t so that coincident points come back exactly
        t = -alpha * beta
        t0 = t.min(axis=1)
        o_star = np.clip(t0 + (weights * (t - t0[:, None])).sum(axis=1) / W, 0.0, self.length)
        F = W * o_star ** 2 + 2 * lin * o_star + const
        k = int(np.argmin(F))
        return self._canonical(k, float(o_star[k]))

    def random_point(self, rng):
        k = int(rng.choice(len(self.edges), p=self.length / self.length.sum()))
        return self._canonical(k, float(rng.uniform(0.0, self.length[k])))

    def to_json(self, p):
        self.check(p)
        return [int(p.coords[0]), float(p.coords[1])]

    def describe(self):
        return {"kind": "metric_tree", "name": self.name, "n_vertices": self.n_vertices,
                "edges": [list(e) for e in self.edges]}


def tripod(leg_length: float = 1.0) -> MetricTree:
    """Three legs of equal length glued at a hub (vertex 0).

    Edge ``k`` runs from the hub to leaf ``k + 1``, so a point on leg ``k`` at
    distance ``s`` from the hub is ``tree.leg_point(k, s)``.
    """
    L = float(leg_length)
    return MetricTree(4, [(0, 1, L), (0, 2, L), (0, 3, L)], name=f"tripod({L:g})")


def random_tree(rng: np.random.Generator, n_leaves: int = 5, lengths=(0.5, 2.0)) -> MetricTree:
    """Random tree grown by attaching leaves until it has ``n_leaves`` leaves."""
    edges = [(0, 1, float(rng.uniform(*lengths)))]
    degree = [1, 1]
    while sum(1 for d in degree if d == 1) < n_leaves:
        v = int(rng.integers(len(degree)))
        w = len(degree)
        edges.append((v, w, float(rng.uniform(*lengths))))
        degree[v] += 1
        degree.append(1)
    return MetricTree(len(degree), edges, name=f"random{len(degree)}")


# ---------------------------------------------------------------------------
# Hyperbolic plane (hyperboloid model)
# ---------------------------------------------------------------------------


def _minkowski(x, y):
    return x[..., 0] * y[..., 0] - x[..., 1] * y[..., 1] - x[..., 2] * y[..., 2]


def _lift(x1, x2):
    return np.stack([np.sqrt(1.0 + x1 * x1 + x2 * x2), x1, x2], axis=-1)


def _hyp_dist(x, y):
    # 2 asinh(|x - y|_L / 2) avoids the cancellation of arccosh near 1
    d = x - y
    q = d[..., 1] ** 2 + d[..., 2] ** 2 - d[..., 0] ** 2
    return 2.0 * np.arcsinh(np.sqrt(np.maximum(q, 0.0)) / 2.0)


class HyperbolicPlane(NpcSpace):
    """Hyperbolic plane of curvature -1 in the hyperboloid model."""

    space_id = "hyperbolic"
    exact_barycenter = False

    def point(self, coords) -> NpcPoint:
        c = np.asarray(coords, dtype=float)
        if c.shape == (2,):
            c = _lift(c[0], c[1])
        if c.shape != (3,) or c[0] <= 0:
            raise DomainError("hyperboloid point needs (x0, x1, x2) with x0 > 0")
        if abs(_minkowski(c, c) - 1.0) > 1e-9 * max(1.0, c[0] ** 2):
            raise DomainError("point is not on the hyperboloid x0^2 - x1^2 - x2^2 = 1")
        return self._wrap(c)

    def _wrap(self, c) -> NpcPoint:
        c = _lift(c[1], c[2])
        return NpcPoint(self.space_id, (float(c[0]), float(c[1]), float(c[2])))

    def from_polar(self, r: float, theta: float) -> NpcPoint:
        return self._wrap(np.array([0.0, math.sinh(r) * math.cos(theta), math.sinh(r) * math.sin(theta)]))

    def as_array(self, points):
        return np.array([p.coords for p in points], dtype=float).reshape(len(points), 3)

    def dist(self, p, q):
        self.check(p)
        self.check(q)
        return float(_hyp_dist(np.asarray(p.coords), np.asarray(q.coords)))

    def sq_dist_many(self, ps, qs):
        if not len(ps):
            return np.zeros(0)
        return _hyp_dist(self.as_array(ps), self.as_array(qs)) ** 2

    @staticmethod
    def _log(x, y):
        """Tangent vector at x pointing to y with Minkowski length d(x, y)."""
        d = _hyp_dist(x, y)
        a = np.maximum(_minkowski(x, y), 1.0)
        v = y - a[..., None] * x
        n = np.sqrt(np.maximum(-_minkowski(v, v), 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(n > 0, d / np.where(n > 0, n, 1.0), 0.0)
        return scale[..., None] * v

    @staticmethod
    def _exp(x, v):
        n = math.sqrt(max(-float(_minkowski(v, v)), 0.0))
        if n == 0.0:
            return x
        return math.cosh(n) * x + (math.sinh(n) / n) * v

    def geodesic_point(self, p, q, t):
        self.check(p)
        self.check(q)
        self._check_t(t)
        if t == 0.0:
            return p
        if t == 1.0:
            return q
        x, y = np.asarray(p.coords), np.asarray(q.coords)
        d = float(_hyp_dist(x, y))
        if d == 0.0:
            return p
        if d < 1e-6:
            z = x + t * (y - x)
        else:
            z = (math.sinh((1 - t) * d) * x + math.sinh(t * d) * y) / math.sinh(d)
        return self._wrap(z)

    @staticmethod
    def _tangent_basis(b):
        # Minkowski-orthonormal basis of the tangent plane at b (<b, b> = 1)
        basis = []
        for e in (np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])):
            v = e - float(_minkowski(b, e)) * b
            for f in basis:
                v = v + float(_minkowski(v, f)) * f
            basis.append(v / math.sqrt(-float(_minkowski(v, v))))
        return np.array(basis)

    def _barycenter(self, points, weights, tol, max_iter, init):
        # Riemannian Newton on F(b) = sum w d(b, p)**2 / 2. The Hessian of
        # d**2 / 2 is 1 along the geodesic and d coth d across it, so it
        # dominates the identity and every Newton step is no longer than the
        # fixed-point step exp_b(mean log_b p); if Newton fails to shrink the
        # gradient the fixed-point step is taken instead.
        X = self.as_array(points)
        w = weights / weights.sum()
        if init is None:
            m = w @ X
            b = m / math.sqrt(float(_minkowski(m, m)))
        else:
            b = np.asarray(self.check(init).coords, dtype=float)
        b = _lift(b[1], b[2])

        def local(b):
            E = self._tangent_basis(b)
            L = self._log(b[None, :], X)
            coords = -(L @ np.diag([1.0, -1.0, -1.0])) @ E.T  # components along the basis
            return E, coords

        E, coords = local(b)
        grad = -(w @ coords)
        step = math.inf
        for _ in range(max_iter):
            d = np.sqrt(np.sum(coords * coords, axis=1))
            H = np.zeros((2, 2))
            for wi, di, ci in zip(w, d, coords):
                if di < 1e-12:
                    H += wi * np.eye(2)
                    continue
                u = ci / di
                k = di / math.tanh(di)
                H += wi * (k * np.eye(2) + (1.0 - k) * np.outer(u, u))
            gnorm = float(np.linalg.norm(grad))
            for s in (np.linalg.solve(H, -grad), -grad):
                cand = _lift(*self._exp(b, s @ E)[1:])
                E_c, coords_c = local(cand)
                grad_c = -(w @ coords_c)
                if np.linalg.norm(grad_c) <= gnorm or gnorm == 0.0:
                    break
            step = float(_hyp_dist(b, cand))
            b, E, coords, grad = cand, E_c, coords_c, grad_c
            if step < tol or float(np.linalg.norm(grad)) < 1e-15:
                return self._wrap(b)
        raise BarycenterError("hyperbolic barycenter did not converge", self._wrap(b), step)

    def random_point(self, rng, radius=2.0):
        r = radius * math.sqrt(rng.uniform())
        return self.from_polar(r, rng.uniform(0.0, 2 * math.pi))

    def to_json(self, p):
        self.check(p)
        return list(p.coords)

    def describe(self):
        return {"kind": "hyperbolic_plane"}


# ---------------------------------------------------------------------------
# Products
# ---------------------------------------------------------------------------


class ProductSpace(NpcSpace):
    """l2-product of NPC spaces; again NPC."""

    def __init__(self, factors: Sequence[NpcSpace]):
        factors = tuple(factors)
        if len(factors) < 2:
            raise DomainError("a product needs at least two factors")
        self.factors = factors
        self.space_id = "product(" + ",".join(f.space_id for f in factors) + ")"
        self.exact_barycenter = all(f.exact_barycenter for f in factors)

    def check(self, p):
        super().check(p)
        if len(p.coords) != len(self.factors):
            raise DomainError("wrong number of product components")
        for f, c in zip(self.factors, p.coords):
            f.check(c)
        return p

    def point(self, coords) -> NpcPoint:
        if len(coords) != len(self.factors):
            raise DomainError("wrong number of product components")
        comps = tuple(c if isinstance(c, NpcPoint) else f.point(c) for f, c in zip(self.factors, coords))
        return self.check(NpcPoint(self.space_id, comps))

    def dist(self, p, q):
        self.check(p)
        self.check(q)
        return math.sqrt(sum(f.dist(a, b) ** 2 for f, a, b in zip(self.factors, p.coords, q.coords)))

    def sq_dist_many(self, ps, qs):
        total = np.zeros(len(ps))
        for i, f in enumerate(self.factors):
            total += f.sq_dist_many([p.coords[i] for p in ps], [q.coords[i] for q in qs])
        return total

    def geodesic_point(self, p, q, t):
        self.check(p)
        self.check(q)
        self._check_t(t)
        if t == 0.0:
            return p
        if t == 1.0:
            return q
        return NpcPoint(self.space_id, tuple(
            f.geodesic_point(a, b, t) for f, a, b in zip(self.factors, p.coords, q.coords)))

    def _barycenter(self, points, weights, tol, max_iter, init):
        comps = []
        for i, f in enumerate(self.factors):
            sub_init = None if init is None else init.coords[i]
            comps.append(f._barycenter([p.coords[i] for p in points], weights, tol, max_iter, sub_init))
        return NpcPoint(self.space_id, tuple(comps))

    def random_point(self, rng):
        return NpcPoint(self.space_id, tuple(f.random_point(rng) for f in self.factors))

    def to_json(self, p):
        self.check(p)
        return [f.to_json(c) for f, c in zip(self.factors, p.coords)]

    def describe(self):
        return {"kind": "product", "factors": [f.describe() for f in self.factors]}


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------


def dist(space: NpcSpace, p: NpcPoint, q: NpcPoint) -> float:
    return space.dist(p, q)


def geodesic_point(space: NpcSpace, p: NpcPoint, q: NpcPoint, t: float) -> NpcPoint:
    return space.geodesic_point(p, q, t)


def midpoint(space: NpcSpace, p: NpcPoint, q: NpcPoint) -> NpcPoint:
    return space.midpoint(p, q)


def npc_comparison_defect(space: NpcSpace, P, Q, R, lam: float) -> float:
    """Slack in the CAT(0) comparison inequality.

    Returns ``(1-lam) d(P,Q)^2 + lam d(P,R)^2 - lam (1-lam) d(Q,R)^2 - d(P,Q_lam)^2``
    where ``Q_lam`` is the point at fraction ``lam`` from ``Q`` to ``R``. The value is
    nonnegative in an NPC space and zero in Euclidean space.
    """
    if not (0.0 <= lam <= 1.0):
        raise DomainError(f"lambda {lam} outside [0, 1]")
    Q_lam = space.geodesic_point(Q, R, lam)
    d = space.dist
    return ((1 - lam) * d(P, Q) ** 2 + lam * d(P, R) ** 2
            - lam * (1 - lam) * d(Q, R) ** 2 - d(P, Q_lam) ** 2)


def barycenter_objective(space: NpcSpace, wp: WeightedPoints, x: NpcPoint) -> float:
    """``sum_i w_i d(x, p_i)**2``."""
    sq = space.sq_dist_many([x] * len(wp.points), wp.points)
    return float(np.dot(wp.weights, sq))


def barycenter(space: NpcSpace, wp: WeightedPoints, tol: float = 1e-10, max_iter: int = 10_000,
               method: str = "auto", seed: int = 0) -> NpcPoint:
    """Weighted barycenter (Frechet mean) of ``wp`` in ``space``.

    ``method="auto"`` uses the space's direct solver (closed form for Euclidean
    space, per-edge quadratic minimization on trees, safeguarded Riemannian
    Newton iteration on the hyperbolic plane, componentwise on products).
    ``method="inductive"`` runs inductive-mean passes over seeded random
    permutations; it converges slowly and only suits loose tolerances.
    """
    if method == "auto":
        return space.barycenter(wp, tol=tol, max_iter=max_iter)
    if method == "inductive":
        return inductive_mean(space, wp, tol=tol, max_iter=max_iter, seed=seed)
    raise DomainError(f"unknown barycenter method {method!r}")


def inductive_mean(space: NpcSpace, wp: WeightedPoints, tol: float = 1e-10,
                   max_iter: int = 10_000, seed: int = 0) -> NpcPoint:
    """Barycenter by iterated geodesic averaging.

    ``b_1 = p_1``, ``b_k = geodesic_point(b_{k-1}, p_k, w_k / sum_{i<=k} w_i)``,
    with the running weight carried across passes over random permutations.
    Stops when a full pass moves the estimate by less than ``tol``.
    """
    for p in wp.points:
        space.check(p)
    rng = np.random.default_rng(seed)
    pts, w = wp.points, np.asarray(wp.weights)
    order = [i for i in range(len(pts)) if w[i] > 0]
    b = pts[order[0]]
    cum = 0.0
    moved = math.inf
    for _ in range(max_iter):
        start = b
        for i in rng.permutation(order):
            cum += w[i]
            b = space.geodesic_point(b, pts[i], float(w[i] / cum))
        moved = space.dist(start, b)
        if moved < tol:
            return b
    raise BarycenterError("inductive mean did not converge", b, moved)

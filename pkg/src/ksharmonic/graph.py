"""Finite weighted metric measure graphs.

A :class:`MetricMeasureGraph` carries the shortest-path metric of a weighted
edge list, a positive vertex measure and the ball radius ``eps`` used by the
approximating energies. All ball-dependent weights are precomputed once.

Balls are open, ``B(x, r) = {y : d(x, y) < r}``, and contain their center.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

__all__ = [
    "GraphError",
    "MetricMeasureGraph",
    "DomainSpec",
    "build_graph",
    "ball",
    "path_graph",
    "grid_graph",
    "star_graph",
    "random_graph",
    "doubling_constant",
    "poincare_constant",
    "read_edge_list",
    "read_measure",
    "write_edge_list",
    "write_measure",
]


class GraphError(ValueError):
    """Invalid graph input (disconnected, bad lengths, empty punctured balls)."""


@dataclass(frozen=True, eq=False)
class MetricMeasureGraph:
    """Source space ``(X, d, mu)`` with ball radius ``eps``.

    Attributes
    ----------
    n : int
        Number of vertices, labelled ``0 .. n-1``.
    edges : tuple of (u, v, length)
    measure : ndarray, shape (n,)
    eps : float
    dist_matrix : ndarray, shape (n, n)
        All-pairs shortest-path distances.
    ball_measure : ndarray, shape (n,)
        ``mu(B(x, eps))``.
    pair_i, pair_j : ndarray
        Ordered pairs ``x != y`` with ``d(x, y) < eps``.
    pair_a : ndarray
        ``mu(x) mu(y) / (mu(B(x, eps)) eps**2)`` for each ordered pair, so that
        the approximating energy is ``sum a(x, y) d(u(x), u(y))**2``.
    coords : ndarray or None
        Optional embedding used by generators (grid positions etc).
    """

    n: int
    edges: tuple
    measure: np.ndarray
    eps: float
    dist_matrix: np.ndarray
    ball_measure: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_a: np.ndarray
    coords: np.ndarray | None = field(default=None, repr=False)

    @property
    def vertices(self) -> range:
        return range(self.n)

    @property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    def ball(self, x: int, r: float) -> np.ndarray:
        return ball(self, x, r)

    def sym_weights(self) -> np.ndarray:
        """Dense symmetric energy weights ``c(x, y) = (a(x, y) + a(y, x)) / 2``."""
        c = np.zeros((self.n, self.n))
        np.add.at(c, (self.pair_i, self.pair_j), 0.5 * self.pair_a)
        np.add.at(c, (self.pair_j, self.pair_i), 0.5 * self.pair_a)
        return c

    def neighbors(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per vertex: indices ``y != x`` with ``c(x, y) > 0`` and those weights."""
        c = self.sym_weights()
        out = []
        for x in range(self.n):
            idx = np.flatnonzero(c[x] > 0)
            out.append((idx, c[x, idx]))
        return out

    def with_measure(self, measure) -> "MetricMeasureGraph":
        return build_graph(self.edges, measure, self.eps, n_vertices=self.n, coords=self.coords)

    def with_eps(self, eps) -> "MetricMeasureGraph":
        return build_graph(self.edges, self.measure, eps, n_vertices=self.n, coords=self.coords)


@dataclass(frozen=True)
class DomainSpec:
    """Interior vertex set ``omega``; the boundary is its complement."""

    omega: frozenset
    n: int

    def __init__(self, omega: Iterable[int], n: int):
        om = frozenset(int(v) for v in omega)
        if not om:
            raise GraphError("omega must be nonempty")
        if any(v < 0 or v >= n for v in om):
            raise GraphError("omega contains vertices outside the graph")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "n", int(n))

    @property
    def interior(self) -> list[int]:
        return sorted(self.omega)

    @property
    def boundary(self) -> list[int]:
        return [v for v in range(self.n) if v not in self.omega]

    def require_boundary(self):
        if not self.boundary:
            raise GraphError("Dirichlet problem needs a nonempty boundary")
        return self


def build_graph(edge_list: Sequence, measure, eps: float, n_vertices: int | None = None,
                coords=None) -> MetricMeasureGraph:
    """Build a :class:`MetricMeasureGraph`.

    Parameters
    ----------
    edge_list : sequence of (u, v, length)
    measure : float or array_like
        Vertex measure; a scalar means a uniform measure.
    eps : float
        Ball radius.
    n_vertices : int, optional
        Defaults to ``1 + max vertex label``.

    Raises
    ------
    GraphError
        If lengths or measures are not positive, the graph is disconnected,
        some punctured ball ``B(x, eps) \\ {x}`` is empty, or the
        ``eps``-neighbourhood graph is disconnected.
    """
    edges = tuple((int(u), int(v), float(L)) for u, v, L in edge_list)
    if not edges:
        raise GraphError("empty edge list")
    n = int(n_vertices) if n_vertices is not None else 1 + max(max(u, v) for u, v, _ in edges)
    for u, v, L in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) references a missing vertex")
        if not (L > 0 and np.isfinite(L)):
            raise GraphError(f"edge ({u}, {v}) has non-positive length {L}")
    mu = np.broadcast_to(np.asarray(measure, dtype=float), (n,)).copy()
    if not np.all(mu > 0) or not np.all(np.isfinite(mu)):
        raise GraphError("measure must be positive at every vertex")
    eps = float(eps)
    if not eps > 0:
        raise GraphError("eps must be positive")

    rows = [u for u, v, _ in edges] + [v for u, v, _ in edges]
    cols = [v for u, v, _ in edges] + [u for u, v, _ in edges]
    lens = [L for *_, L in edges] * 2
    # parallel edges: keep the shortest
    best: dict = {}
    for r, c, L in zip(rows, cols, lens):
        if (r, c) not in best or L < best[(r, c)]:
            best[(r, c)] = L
    keys = list(best)
    adj = csr_matrix(([best[k] for k in keys], ([k[0] for k in keys], [k[1] for k in keys])), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise GraphError(f"graph is disconnected ({ncomp} components)")
    D = shortest_path(adj, method="D", directed=False)

    inside = D < eps
    np.fill_diagonal(inside, False)
    empty = np.flatnonzero(~inside.any(axis=1))
    if empty.size:
        x = int(empty[0])
        nearest = float(np.min(np.delete(D[x], x)))
        raise GraphError(f"punctured ball around vertex {x} is empty; eps must exceed {nearest:g}")
    ncomp_eps, _ = connected_components(csr_matrix(inside), directed=False)
    if ncomp_eps != 1:
        raise GraphError("eps-neighbourhood graph is disconnected; increase eps")

    ball_mu = (D < eps) @ mu
    pi, pj = np.nonzero(inside)
    a = mu[pi] * mu[pj] / (ball_mu[pi] * eps * eps)
    return MetricMeasureGraph(n=n, edges=edges, measure=mu, eps=eps, dist_matrix=D,
                              ball_measure=ball_mu, pair_i=pi, pair_j=pj, pair_a=a,
                              coords=None if coords is None else np.asarray(coords, dtype=float))


def ball(g: MetricMeasureGraph, x: int, r: float) -> np.ndarray:
    """Vertices of the open ball ``{y : d(x, y) < r}`` in ascending order."""
    if not r > 0:
        raise GraphError("radius must be positive")
    return np.flatnonzero(g.dist_matrix[x] < r)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def path_graph(n: int, eps: float = 1.5, measure=1.0, length: float = 1.0) -> MetricMeasureGraph:
    """Path ``0 - 1 - ... - (n-1)`` with equal edge lengths."""
    edges = [(i, i + 1, length) for i in range(n - 1)]
    return build_graph(edges, measure, eps, n_vertices=n,
                       coords=np.arange(n, dtype=float)[:, None] * length)


def grid_graph(n: int, m: int | None = None, eps: float = 1.1, measure=1.0) -> MetricMeasureGraph:
    """``n x m`` unit grid; vertex ``i * m + j`` sits at ``(i, j)``."""
    m = n if m is None else m
    edges = []
    for i in range(n):
        for j in range(m):
            v = i * m + j
            if j + 1 < m:
                edges.append((v, v + 1, 1.0))
            if i + 1 < n:
                edges.append((v, v + m, 1.0))
    coords = np.array([(i, j) for i in range(n) for j in range(m)], dtype=float)
    return build_graph(edges, measure, eps, n_vertices=n * m, coords=coords)


def star_graph(k: int, leg: int, eps: float = 1.5, measure=1.0) -> MetricMeasureGraph:
    """Star with ``k`` legs of ``leg`` unit edges; hub is vertex 0.

    Leg ``j`` holds vertices ``1 + j*leg .. (j+1)*leg`` ordered outward, so the
    tip of leg ``j`` is ``(j + 1) * leg``.
    """
    edges = []
    for j in range(k):
        prev = 0
        for s in range(leg):
            v = 1 + j * leg + s
            edges.append((prev, v, 1.0))
            prev = v
    return build_graph(edges, measure, eps, n_vertices=1 + k * leg)


def random_graph(rng: np.random.Generator, n: int, extra_edges: float = 0.5,
                 lengths=(0.5, 1.5), measure_range=(0.5, 2.0), eps_factor: float = 1.05):
    """Random connected graph: a random spanning tree plus extra chords.

    ``eps`` is set to ``eps_factor`` times the largest nearest-neighbour
    distance so that every punctured ball is nonempty.
    """
    edges = []
    for v in range(1, n):
        edges.append((int(rng.integers(v)), v, float(rng.uniform(*lengths))))
    for _ in range(int(extra_edges * n)):
        u, v = rng.choice(n, size=2, replace=False)
        edges.append((int(u), int(v), float(rng.uniform(*lengths))))
    mu = rng.uniform(*measure_range, size=n)
    probe = build_graph(edges, mu, 10.0 * lengths[1] * n, n_vertices=n)
    D = probe.dist_matrix + np.diag(np.full(n, np.inf))
    eps = eps_factor * float(D.min(axis=1).max())
    while True:
        try:
            return build_graph(edges, mu, eps, n_vertices=n)
        except GraphError:
            eps *= 1.25


# ---------------------------------------------------------------------------
# empirical constants
# ---------------------------------------------------------------------------


def _radius_grid(g: MetricMeasureGraph, r_max: float) -> np.ndarray:
    # ball contents change only when r or 2r crosses a realized distance
    d = np.unique(g.dist_matrix[g.dist_matrix > 0])
    cand = np.unique(np.concatenate([d, d / 2.0, [r_max]]))
    return cand[(cand > 0) & (cand <= r_max)]


def doubling_constant(g: MetricMeasureGraph, r_max: float) -> float:
    """``max mu(B(x, 2r)) / mu(B(x, r))`` over vertices and ``0 < r <= r_max``.

    Both balls are piecewise constant in ``r`` and right-continuous at the
    breakpoints ``d`` and ``d / 2`` (``d`` a realized distance), so evaluating
    at the breakpoints and at ``r_max`` gives the exact maximum.
    """
    if not r_max > 0:
        raise GraphError("r_max must be positive")
    D, mu = g.dist_matrix, g.measure
    best = 1.0
    for r in _radius_grid(g, r_max):
        small = (D < r) @ mu
        big = (D < 2 * r) @ mu
        best = max(best, float(np.max(big / small)))
    return best


def poincare_constant(g: MetricMeasureGraph, omega: DomainSpec, probes=None) -> float:
    """Empirical (1,2)-Poincare constant of the domain.

    Smallest ``C`` with ``sum_Omega |v| mu <= C * E0(v, v)**0.5`` over the probe
    functions, each vanishing on the boundary. ``E0`` is the discrete
    Dirichlet form; for ``v`` supported in ``Omega`` it carries the discrete
    gradient, including the pair terms that straddle the boundary.

    The default probes are the hat functions of interior vertices, the
    indicator of ``Omega`` and the first Dirichlet eigenfunction. This is a
    diagnostic, not a certificate.
    """
    omega.require_boundary()
    interior = np.array(omega.interior)
    c = g.sym_weights()
    lap = 2.0 * (np.diag(c.sum(axis=1)) - c)
    if probes is None:
        probes = []
        for x in interior:
            v = np.zeros(g.n)
            v[x] = 1.0
            probes.append(v)
        ind = np.zeros(g.n)
        ind[interior] = 1.0
        probes.append(ind)
        from scipy.linalg import eigh

        sub = lap[np.ix_(interior, interior)]
        _, vecs = eigh(sub, np.diag(g.measure[interior]))
        first = np.zeros(g.n)
        first[interior] = np.abs(vecs[:, 0])
        probes.append(first)
    mask = np.zeros(g.n, dtype=bool)
    mask[interior] = True
    best = 0.0
    for v in probes:
        v = np.asarray(v, dtype=float)
        if np.any(v[~mask] != 0):
            raise GraphError("Poincare probes must vanish off omega")
        energy = float(v @ lap @ v)
        if energy <= 0:
            continue
        best = max(best, float(np.abs(v[mask]) @ g.measure[mask]) / np.sqrt(energy))
    return best


# ---------------------------------------------------------------------------
# text formats
# ---------------------------------------------------------------------------


def read_edge_list(path) -> list[tuple[int, int, float]]:
    """Edge file: one ``u v length`` triple per line; ``#`` starts a comment."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise GraphError(f"{path}:{lineno}: expected 'u v length'")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return edges


def read_measure(path, n: int) -> np.ndarray:
    """Measure file: one ``v mu`` pair per line; every vertex must appear."""
    mu = np.full(n, np.nan)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected 'v mu'")
            mu[int(parts[0])] = float(parts[1])
    if np.isnan(mu).any():
        raise GraphError(f"{path}: measure missing for vertex {int(np.flatnonzero(np.isnan(mu))[0])}")
    return mu


def write_edge_list(g: MetricMeasureGraph, path):
    with open(path, "w") as fh:
        for u, v, L in g.edges:
            fh.write(f"{u} {v} {L!r}\n")


def write_measure(g: MetricMeasureGraph, path):
    with open(path, "w") as fh:
        for v in range(g.n):
            fh.write(f"{v} {float(g.measure[v])!r}\n")

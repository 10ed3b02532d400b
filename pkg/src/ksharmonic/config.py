"""Problem configuration files.

A config is a TOML document with the sections ``[graph]``, ``[target]``,
``[boundary]``, ``[task]`` and ``[tolerances]`` plus an optional top-level
``seed``. Every field error is reported as ``ConfigError`` naming the file,
the section and the field. Example::

    seed = 0

    [graph]
    kind = "path"        # path | grid | star | random | file
    n = 5
    eps = 1.5

    [target]
    kind = "euclidean"   # euclidean | tripod | tree | random_tree | hyperbolic | product
    dim = 1

    [boundary]
    vertices = "ends"    # ends | ring | tips | list of vertex ids
    values = "linear"    # linear | sectors | random | constant | explicit

    [tolerances]
    tol = 1e-9
    max_iter = 100000
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import (DomainError, EuclideanSpace, HyperbolicPlane, MetricTree, NpcSpace,
                       ProductSpace, random_tree, tripod)
from .graph import (DomainSpec, GraphError, MetricMeasureGraph, build_graph, grid_graph, path_graph,
                    random_graph, read_edge_list, read_measure, star_graph)

SECTIONS = ("graph", "target", "boundary", "task", "tolerances")


class ConfigError(ValueError):
    def __init__(self, source, section, key, message):
        self.source = str(source)
        self.section = section
        self.key = key
        where = f"[{section}]" if section else "<top level>"
        if key:
            where += f".{key}"
        super().__init__(f"{self.source}: {where}: {message}")


@dataclass
class Problem:
    """Everything a task needs, built from a config."""

    graph: MetricMeasureGraph
    target: NpcSpace
    domain: DomainSpec
    boundary_data: dict
    task: dict
    tol: float
    max_iter: int
    seed: int
    raw: dict = field(repr=False, default_factory=dict)
    source: str = "config"


class _Section:
    """Typed accessor that turns bad values into ``ConfigError``."""

    def __init__(self, source, name, data):
        if not isinstance(data, dict):
            raise ConfigError(source, name, None, "must be a table")
        self.source, self.name, self.data = source, name, data

    def err(self, key, msg):
        return ConfigError(self.source, self.name, key, msg)

    def get(self, key, default=None, required=False):
        if key not in self.data:
            if required:
                raise self.err(key, "missing required field")
            return default
        return self.data[key]

    def int(self, key, default=None, required=False, minimum=None):
        v = self.get(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            raise self.err(key, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            raise self.err(key, f"must be >= {minimum}, got {v}")
        return v

    def float(self, key, default=None, required=False, positive=False):
        v = self.get(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.err(key, f"expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v) or (positive and v <= 0):
            raise self.err(key, f"must be a positive finite number, got {v!r}")
        return v

    def str(self, key, default=None, required=False, choices=None):
        v = self.get(key, default, required)
        if v is None:
            return None
        if not isinstance(v, str):
            raise self.err(key, f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            raise self.err(key, f"expected one of {sorted(choices)}, got {v!r}")
        return v

    def bool(self, key, default=None):
        v = self.get(key, default)
        if v is not None and not isinstance(v, bool):
            raise self.err(key, f"expected true/false, got {v!r}")
        return v

    def reject_unknown(self, allowed):
        extra = sorted(set(self.data) - set(allowed))
        if extra:
            raise self.err(extra[0], "unknown field")


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(path, None, None, "file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(path, None, None, f"not valid TOML ({exc})") from None


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------

GRAPH_FIELDS = ("kind", "n", "m", "k", "leg", "eps", "measure", "edges", "measure_file",
                "extra_edges")


def build_graph_section(sec: _Section, base_dir: Path, rng) -> MetricMeasureGraph:
    sec.reject_unknown(GRAPH_FIELDS)
    kind = sec.str("kind", required=True, choices={"path", "grid", "star", "random", "file"})
    measure = sec.float("measure", 1.0, positive=True)
    try:
        if kind == "path":
            return path_graph(sec.int("n", required=True, minimum=2), eps=sec.float("eps", 1.5, positive=True),
                              measure=measure)
        if kind == "grid":
            n = sec.int("n", required=True, minimum=2)
            return grid_graph(n, sec.int("m", n, minimum=2), eps=sec.float("eps", 1.1, positive=True),
                              measure=measure)
        if kind == "star":
            return star_graph(sec.int("k", required=True, minimum=1), sec.int("leg", required=True, minimum=1),
                              eps=sec.float("eps", 1.5, positive=True), measure=measure)
        if kind == "random":
            g = random_graph(rng, sec.int("n", required=True, minimum=2),
                             extra_edges=sec.float("extra_edges", 0.5))
            return g.with_eps(sec.float("eps")) if "eps" in sec.data else g
        edges_path = base_dir / sec.str("edges", required=True)
        edges = read_edge_list(edges_path)
        n = 1 + max(max(u, v) for u, v, _ in edges)
        mu = measure
        if "measure_file" in sec.data:
            mu = read_measure(base_dir / sec.str("measure_file"), n)
        return build_graph(edges, mu, sec.float("eps", required=True, positive=True), n_vertices=n)
    except (GraphError, OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise sec.err("kind", f"cannot build {kind} graph: {exc}") from None


# ---------------------------------------------------------------------------
# target
# ---------------------------------------------------------------------------

TARGET_KINDS = {"euclidean", "tripod", "tree", "random_tree", "hyperbolic", "product"}


def build_target(sec: _Section, rng) -> NpcSpace:
    kind = sec.str("kind", required=True, choices=TARGET_KINDS)
    try:
        if kind == "euclidean":
            sec.reject_unknown(("kind", "dim"))
            return EuclideanSpace(sec.int("dim", 1, minimum=1))
        if kind == "tripod":
            sec.reject_unknown(("kind", "leg_length"))
            return tripod(sec.float("leg_length", 1.0, positive=True))
        if kind == "tree":
            sec.reject_unknown(("kind", "edges", "name"))
            edges = sec.get("edges", required=True)
            if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 3 for e in edges):
                raise sec.err("edges", "expected a list of [u, v, length] triples")
            n = 1 + max(max(int(e[0]), int(e[1])) for e in edges)
            return MetricTree(n, [(int(u), int(v), float(L)) for u, v, L in edges], name=sec.str("name", "config"))
        if kind == "random_tree":
            sec.reject_unknown(("kind", "n_leaves"))
            return random_tree(rng, n_leaves=sec.int("n_leaves", 5, minimum=2))
        if kind == "hyperbolic":
            sec.reject_unknown(("kind",))
            return HyperbolicPlane()
        sec.reject_unknown(("kind", "factors"))
        factors = sec.get("factors", required=True)
        if not isinstance(factors, list) or len(factors) < 2:
            raise sec.err("factors", "expected a list of at least two target tables")
        return ProductSpace([build_target(_Section(sec.source, f"{sec.name}.factors[{i}]", f), rng)
                             for i, f in enumerate(factors)])
    except DomainError as exc:
        raise sec.err("kind", f"invalid {kind} target: {exc}") from None


# ---------------------------------------------------------------------------
# boundary
# ---------------------------------------------------------------------------


def _auto_vertices(sec, g, graph_sec, which):
    kind = graph_sec.get("kind")
    if which == "ends":
        return [0, g.n - 1]
    if which == "ring":
        if kind != "grid":
            raise sec.err("vertices", "'ring' needs a grid graph")
        n = graph_sec.get("n")
        m = graph_sec.get("m", n)
        return [v for v in range(g.n) if v // m in (0, n - 1) or v % m in (0, m - 1)]
    if which == "tips":
        if kind != "star":
            raise sec.err("vertices", "'tips' needs a star graph")
        leg = graph_sec.get("leg")
        return [(j + 1) * leg for j in range(graph_sec.get("k"))]
    raise sec.err("vertices", f"unknown vertex rule {which!r}")


def _positions(g: MetricMeasureGraph) -> np.ndarray:
    if g.coords is not None:
        return np.asarray(g.coords, dtype=float)
    return np.arange(g.n, dtype=float)[:, None]


def _parse_point(sec, key, target, coords):
    try:
        return target.point(coords)
    except (DomainError, TypeError, ValueError) as exc:
        raise sec.err(key, f"not a point of the target: {exc}") from None


def build_boundary(sec: _Section, g: MetricMeasureGraph, target: NpcSpace, graph_sec: _Section, rng):
    sec.reject_unknown(("vertices", "values", "coefficients", "point", "points", "count"))
    spec = sec.get("vertices", required=True)
    if isinstance(spec, str):
        if spec == "random":
            count = sec.int("count", max(2, g.n // 4), minimum=1)
            if count >= g.n:
                raise sec.err("count", "must leave at least one interior vertex")
            verts = sorted(int(v) for v in rng.choice(g.n, size=count, replace=False))
        else:
            verts = _auto_vertices(sec, g, graph_sec, spec)
    elif isinstance(spec, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in spec):
        verts = sorted(set(spec))
        bad = [v for v in verts if not 0 <= v < g.n]
        if bad:
            raise sec.err("vertices", f"vertex {bad[0]} outside 0..{g.n - 1}")
    else:
        raise sec.err("vertices", "expected a rule name or a list of vertex ids")
    omega = [v for v in range(g.n) if v not in set(verts)]
    if not omega:
        raise sec.err("vertices", "every vertex is on the boundary")
    domain = DomainSpec(omega, g.n)

    rule = sec.str("values", "linear", choices={"linear", "sectors", "random", "constant", "explicit"})
    data = {}
    if rule == "linear":
        if not isinstance(target, EuclideanSpace):
            raise sec.err("values", "'linear' needs a euclidean target")
        pos = _positions(g)
        coef = sec.get("coefficients")
        if coef is None:
            A = np.zeros((target.dim, pos.shape[1]))
            A[0, 0] = 1.0
        else:
            A = np.asarray(coef, dtype=float).reshape(target.dim, pos.shape[1]) \
                if np.size(coef) == target.dim * pos.shape[1] else None
            if A is None:
                raise sec.err("coefficients", f"expected a {target.dim} x {pos.shape[1]} matrix")
        data = {v: target.point(A @ pos[v]) for v in verts}
    elif rule == "sectors":
        if not isinstance(target, MetricTree):
            raise sec.err("values", "'sectors' needs a tree target")
        degree = np.bincount(np.concatenate([target.start, target.end]), minlength=target.n_vertices)
        leaves = [int(v) for v in np.flatnonzero(degree == 1)]
        if len(leaves) < 2:
            raise sec.err("values", "target tree needs at least two leaf edges")
        pos = _positions(g)
        if pos.shape[1] >= 2:
            center = pos.mean(axis=0)
            ang = np.arctan2(pos[:, 0] - center[0], pos[:, 1] - center[1]) % (2 * np.pi)
            sector = {v: int(ang[v] // (2 * np.pi / len(leaves))) % len(leaves) for v in verts}
        else:
            sector = {v: i % len(leaves) for i, v in enumerate(verts)}
        data = {v: target.vertex_point(leaves[sector[v]]) for v in verts}
    elif rule == "random":
        data = {v: target.random_point(rng) for v in verts}
    elif rule == "constant":
        p = _parse_point(sec, "point", target, sec.get("point", required=True))
        data = {v: p for v in verts}
    else:
        pts = sec.get("points", required=True)
        if not isinstance(pts, dict):
            raise sec.err("points", "expected a table mapping vertex ids to coordinates")
        for v in verts:
            if str(v) not in pts:
                raise sec.err("points", f"no value for boundary vertex {v}")
            data[v] = _parse_point(sec, f"points.{v}", target, pts[str(v)])
    return domain, data


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------


def load_problem(path, seed: int | None = None, tol: float | None = None,
                 max_iter: int | None = None) -> Problem:
    """Parse and validate a config; command-line overrides win over file values."""
    path = Path(path)
    raw = load_toml(path)
    extra = sorted(set(raw) - set(SECTIONS) - {"seed"})
    if extra:
        raise ConfigError(path, None, extra[0], "unknown top-level entry")
    top = _Section(path, None, {k: v for k, v in raw.items() if k == "seed"})
    seed = top.int("seed", 0, minimum=0) if seed is None else seed
    rng = np.random.default_rng(seed)
    for name in ("graph", "target", "boundary"):
        if name not in raw:
            raise ConfigError(path, name, None, "missing section")
    graph_sec = _Section(path, "graph", raw["graph"])
    g = build_graph_section(graph_sec, path.parent, rng)
    target = build_target(_Section(path, "target", raw["target"]), rng)
    domain, data = build_boundary(_Section(path, "boundary", raw["boundary"]), g, target, graph_sec, rng)
    tsec = _Section(path, "tolerances", raw.get("tolerances", {}))
    tsec.reject_unknown(("tol", "max_iter"))
    tol = tsec.float("tol", 1e-9, positive=True) if tol is None else tol
    max_iter = tsec.int("max_iter", 100_000, minimum=1) if max_iter is None else max_iter
    task = raw.get("task", {})
    problem = Problem(g, target, domain, data, dict(task), tol, max_iter, seed, raw, str(path))
    task_section(problem)
    return problem


# one [task] table may serve solve, flow and diag alike; each reads its own keys
TASK_KEYS = ("init", "h", "n_steps", "constrained", "stop_tol", "dump_steps", "compare",
             "x0", "probes", "p", "radii", "green_R", "intrinsic", "harnack_r")


def task_section(problem: Problem) -> _Section:
    sec = _Section(problem.source, "task", problem.task)
    sec.reject_unknown(TASK_KEYS)
    return sec

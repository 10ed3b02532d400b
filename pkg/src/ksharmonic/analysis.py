"""Discrete Dirichlet form and diagnostics for harmonic maps.

The form is built from the symmetric energy weights ``c(x, y)`` of the graph::

    E0(u, v)     = sum_{x, y} c(x, y) (u(x) - u(y)) (v(x) - v(y))
    Gamma(u,v)(x) = sum_y c(x, y) (u(x) - u(y)) (v(x) - v(y))

so that ``E0(u, u)`` equals the scalar approximating energy, ``Gamma`` sums to
``E0`` and ``sum_x phi(x) Gamma(u, v)(x)`` satisfies the polarization identity
``(E0(u, phi v) + E0(v, phi u) - E0(uv, phi)) / 2`` exactly.

All reported constants (Harnack ratios, Green bounds, Liouville integrals) are
empirical discrete analogues; none is asserted to be universal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve

from .energy import Mapping, distance_pullback, energy_measure_of_map
from .geometry import DomainError, NpcPoint
from .graph import DomainSpec, GraphError, MetricMeasureGraph, ball

__all__ = [
    "DirichletForm",
    "SubharmonicReport",
    "GreenReport",
    "IntrinsicDistanceError",
    "form_value",
    "energy_measure",
    "polarization_residual",
    "check_weak_subharmonic",
    "strengthened_subharmonicity_gap",
    "green_function",
    "intrinsic_distance",
    "harnack_diagnostic",
    "liouville_diagnostic",
]


@dataclass(eq=False)
class DirichletForm:
    """Symmetric bilinear form on vertex functions of ``graph``."""

    graph: MetricMeasureGraph
    c: np.ndarray = field(repr=False)

    @classmethod
    def from_graph(cls, g: MetricMeasureGraph) -> "DirichletForm":
        return cls(g, g.sym_weights())

    @property
    def laplacian(self) -> np.ndarray:
        """``L`` with ``E0(u, v) = 2 u^T L v``."""
        return np.diag(self.c.sum(axis=1)) - self.c

    def __call__(self, u, v) -> float:
        return form_value(self, u, v)


def _as_form(df):
    return DirichletForm.from_graph(df) if isinstance(df, MetricMeasureGraph) else df


def form_value(df: DirichletForm, u, v) -> float:
    df = _as_form(df)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du = u[:, None] - u[None, :]
    dv = v[:, None] - v[None, :]
    return float(np.sum(df.c * du * dv))


def energy_measure(df: DirichletForm, u, v) -> np.ndarray:
    df = _as_form(df)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.sum(df.c * (u[:, None] - u[None, :]) * (v[:, None] - v[None, :]), axis=1)


def polarization_residual(df: DirichletForm, u, v, phi) -> float:
    """``sum phi Gamma(u, v) - (E0(u, phi v) + E0(v, phi u) - E0(uv, phi)) / 2``."""
    df = _as_form(df)
    u, v, phi = (np.asarray(a, dtype=float) for a in (u, v, phi))
    lhs = float(phi @ energy_measure(df, u, v))
    rhs = 0.5 * (form_value(df, u, phi * v) + form_value(df, v, phi * u) - form_value(df, u * v, phi))
    return lhs - rhs


# ---------------------------------------------------------------------------
# subharmonicity
# ---------------------------------------------------------------------------


def _hat_defects(df, v, interior):
    # -E0(hat_x, v) = 2 sum_y c(x, y) (v(y) - v(x))
    v = np.asarray(v, dtype=float)
    c = df.c[interior]
    return 2.0 * (c @ v - c.sum(axis=1) * v[interior])


@dataclass
class SubharmonicReport:
    min_defect: float
    defects: dict
    witnesses: list
    tol: float

    @property
    def passed(self) -> bool:
        return self.min_defect >= -self.tol

    def to_csv(self) -> str:
        lines = ["vertex,defect"]
        lines += [f"{x},{self.defects[x]!r}" for x in self.witnesses]
        return "\n".join(lines) + "\n"


def check_weak_subharmonic(df: DirichletForm, v, omega, tol: float = 1e-9) -> SubharmonicReport:
    """Test ``-E0(lambda, v) >= 0`` for every hat function ``lambda`` inside ``omega``.

    Nonnegative test functions supported in ``omega`` are exactly the
    nonnegative combinations of hats, so checking hats is complete.
    ``witnesses`` lists the vertices whose defect is below ``-tol``.
    """
    df = _as_form(df)
    interior = omega.interior if isinstance(omega, DomainSpec) else sorted(int(x) for x in omega)
    d = _hat_defects(df, v, interior)
    defects = {int(x): float(val) for x, val in zip(interior, d)}
    witnesses = [x for x in interior if defects[x] < -tol]
    return SubharmonicReport(float(d.min()), defects, witnesses, tol)


def strengthened_subharmonicity_gap(df: DirichletForm, u: Mapping, y0: NpcPoint, omega=None) -> dict:
    """``-E0(hat_x, d(u, y0)**2) - 2 mu_u(x)`` at each interior vertex.

    ``mu_u`` is the discrete energy measure of the map
    (:func:`ksharmonic.energy.energy_measure_of_map`). For a harmonic map the
    gap is nonnegative: the vertex value is the barycenter of its neighbours,
    and the variance inequality of NPC spaces bounds the neighbour average of
    ``d(., y0)**2`` from below.
    """
    df = _as_form(df)
    if omega is None:
        omega = u.domain
    interior = omega.interior if isinstance(omega, DomainSpec) else sorted(int(x) for x in omega)
    f = distance_pullback(u, y0, 2)
    mu_u = energy_measure_of_map(u)
    d = _hat_defects(df, f, interior) - 2.0 * mu_u[interior]
    return {int(x): float(val) for x, val in zip(interior, d)}


# ---------------------------------------------------------------------------
# Green function
# ---------------------------------------------------------------------------


@dataclass
class GreenReport:
    G: np.ndarray
    w: np.ndarray
    gamma_lower: float   # min of w over B(x0, R)
    gamma_upper: float   # max of w over B(x0, 2R)
    residual: float      # max |E0(hat_x, G) - rhs_x| over interior test hats
    inner: np.ndarray
    support: np.ndarray

    def to_dict(self) -> dict:
        return {"G": [float(v) for v in self.G], "w": [float(v) for v in self.w],
                "gamma_lower": self.gamma_lower, "gamma_upper": self.gamma_upper,
                "residual": self.residual, "inner_ball": [int(v) for v in self.inner],
                "outer_ball": [int(v) for v in self.support]}


def green_function(df: DirichletForm, x0: int, R: float) -> GreenReport:
    """Green function of ``B(x0, R)`` relative to ``B(x0, 2R)``.

    Solves ``E0(hat_x, G) = mu(x) / mu(B(x0, R)) * [x in B(x0, R)]`` for every
    ``x`` in ``B(x0, 2R)`` with ``G = 0`` outside, by direct elimination.
    Also returns ``w = mu(B(x0, R)) / R**2 * G`` with its lower bound on
    ``B(x0, R)`` and upper bound on ``B(x0, 2R)``.
    """
    df = _as_form(df)
    g = df.graph
    if not R > 0:
        raise GraphError("R must be positive")
    support = ball(g, x0, 2 * R)
    if len(support) == g.n:
        raise GraphError("B(x0, 2R) is the whole graph; the Dirichlet condition needs an outside")
    inner = ball(g, x0, R)
    mu = g.measure
    mass = float(mu[inner].sum())
    rhs = np.zeros(g.n)
    rhs[inner] = mu[inner] / mass
    A = 2.0 * df.laplacian[np.ix_(support, support)]
    try:
        sol = solve(A, rhs[support], assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise GraphError("degenerate ball configuration; Green system is singular") from exc
    G = np.zeros(g.n)
    G[support] = sol
    resid = 0.0
    for x in support:
        hat = np.zeros(g.n)
        hat[x] = 1.0
        resid = max(resid, abs(form_value(df, hat, G) - rhs[x]))
    w = mass / R ** 2 * G
    return GreenReport(G=G, w=w, gamma_lower=float(w[inner].min()), gamma_upper=float(w[support].max()),
                       residual=resid, inner=inner, support=support)


# ---------------------------------------------------------------------------
# intrinsic distance
# ---------------------------------------------------------------------------


class IntrinsicDistanceError(RuntimeError):
    def __init__(self, message, lower, upper):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


def intrinsic_distance(df: DirichletForm, x: int, y: int, tol: float = 1e-6, return_bounds: bool = False):
    """``sup {u(x) - u(y) : Gamma(u, u) <= mu}``.

    The convex program (linear objective, one convex quadratic constraint per
    vertex) goes to an interior-point conic solver. The solver's point is then
    scaled down until every constraint holds exactly, which gives a certified
    lower bound; the solver's optimal value serves as the upper bound. An
    error is raised when the two differ by more than ``tol``.
    """
    import cvxpy as cp

    df = _as_form(df)
    g = df.graph
    if x == y:
        return (0.0, 0.0) if return_bounds else 0.0
    n = g.n
    mu = g.measure
    u = cp.Variable(n)
    cons = [u[y] == 0]
    for z in range(n):
        nb = np.flatnonzero(df.c[z] > 0)
        if nb.size == 0:
            continue
        diffs = cp.multiply(np.sqrt(df.c[z, nb]), u[z] - u[nb])
        cons.append(cp.sum_squares(diffs) <= mu[z])
    prob = cp.Problem(cp.Maximize(u[x] - u[y]), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or u.value is None:
        raise IntrinsicDistanceError(f"solver status {prob.status}", 0.0, math.inf)
    val = np.asarray(u.value, dtype=float)
    gam = energy_measure(df, val, val)
    scale = min(1.0, float(np.min(np.sqrt(mu / np.maximum(gam, 1e-300)))))
    lower = scale * float(val[x] - val[y])
    upper = float(prob.value)
    if upper - lower > tol:
        raise IntrinsicDistanceError(f"bound gap {upper - lower:.3g} exceeds tol", lower, upper)
    return (lower, upper) if return_bounds else lower


# ---------------------------------------------------------------------------
# Harnack and Liouville diagnostics
# ---------------------------------------------------------------------------


def harnack_diagnostic(g: MetricMeasureGraph, v, x: int, r: float, p: float) -> dict:
    """Empirical constant in ``sup_{B(x, r/2)} v <= c_p (avg_{B(x, r)} v**p)**(1/p)``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError("v must be nonnegative")
    if not p > 0:
        raise DomainError("p must be positive")
    half = ball(g, x, r / 2)
    full = ball(g, x, r)
    lhs = float(v[half].max())
    mu = g.measure[full]
    rhs = float((mu @ v[full] ** p / mu.sum()) ** (1.0 / p))
    ratio = lhs / rhs if rhs > 0 else (math.nan if lhs == 0 else math.inf)
    return {"lhs": lhs, "rhs_base": rhs, "ratio": ratio, "p": p, "r": r}


def liouville_diagnostic(u: Mapping, x: int, x0: int, p: float, radii=None) -> dict:
    """Growth ``v_p(r) = sum_{z in B(x, r)} mu(z) d(u(z), u(x0))**p`` and ``int r / v_p(r) dr``.

    The integral uses the trapezoid rule over ``radii`` (default: the realized
    distances from ``x`` that are at least 1). If some ``v_p(r)`` vanishes the
    integrand is unbounded and the integral is reported as ``inf`` with
    ``diverges = True``.
    """
    if not p > 1:
        raise DomainError("p must exceed 1")
    g = u.graph
    if radii is None:
        d = np.unique(g.dist_matrix[x])
        radii = d[d >= 1.0]
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise DomainError("radii must be increasing")
    dist_p = distance_pullback(u, u.values[x0], 1) ** p
    vp = np.array([float(g.measure[b] @ dist_p[b]) for b in (ball(g, x, r) for r in radii)])
    if np.any(vp == 0):
        integral = math.inf
    elif len(radii) < 2:
        integral = 0.0
    else:
        integral = float(np.trapezoid(radii / vp, radii)) if hasattr(np, "trapezoid") \
            else float(np.trapz(radii / vp, radii))
    return {"radii": [float(r) for r in radii], "v_p": [float(v) for v in vp],
            "partial_integral": integral, "diverges": math.isinf(integral), "p": p}

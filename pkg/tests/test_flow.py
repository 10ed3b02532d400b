import numpy as np
import pytest

import ksharmonic as kh
from ksharmonic.analysis import DirichletForm

from conftest import SPACES, outer_ring


def grid_problem(n, T, rng):
    g = kh.grid_graph(n)
    dom = kh.DomainSpec([v for v in range(g.n) if v not in outer_ring(n)], g.n)
    data = {v: T.random_point(rng) for v in dom.boundary}
    return g, dom, data


def test_l2_distance_examples(space, rng):
    g = kh.random_graph(rng, 9).with_measure(rng.uniform(0.5, 2.0, size=9))
    p, q = space.random_point(rng), space.random_point(rng)
    u = kh.Mapping(g, space, [p] * g.n)
    v = kh.Mapping(g, space, [q] * g.n)
    assert kh.l2_distance(u, u) == 0.0
    assert kh.l2_distance(u, v) == pytest.approx(space.dist(p, q) * np.sqrt(g.measure.sum()), rel=1e-12)
    a = kh.Mapping(g, space, [space.random_point(rng) for _ in range(g.n)])
    b = kh.Mapping(g, space, [space.random_point(rng) for _ in range(g.n)])
    direct = np.sqrt(sum(m * space.dist(x, y) ** 2 for m, x, y in zip(g.measure, a.values, b.values)))
    assert kh.l2_distance(a, b) == pytest.approx(direct, rel=1e-12)


def test_l2_distance_mismatch():
    g1, g2 = kh.path_graph(3), kh.path_graph(3)
    with pytest.raises(kh.DomainError):
        kh.l2_distance(kh.scalar_mapping(g1, [0, 1, 2]), kh.scalar_mapping(g2, [0, 1, 2]))


def test_l2_space_comparison(space, rng):
    g = kh.random_graph(rng, 6)
    for _ in range(100):
        P, Q, R = (kh.Mapping(g, space, [space.random_point(rng) for _ in range(g.n)]) for _ in range(3))
        assert kh.l2_comparison_defect(P, Q, R, float(rng.uniform())) >= -1e-10


def test_prox_two_vertex_closed_form():
    m0, m1, h = 1.0, 3.0, 0.37
    g = kh.build_graph([(0, 1, 1.0)], [m0, m1], 1.5)
    u = kh.scalar_mapping(g, [0.2, -1.1])
    c = g.sym_weights()[0, 1]
    # F(v) = 2c (v0 - v1)**2 + (m0 (v0 - u0)**2 + m1 (v1 - u1)**2) / (2h)
    A = np.array([[4 * c + m0 / h, -4 * c], [-4 * c, 4 * c + m1 / h]])
    want = np.linalg.solve(A, [m0 / h * 0.2, m1 / h * -1.1])
    for fast in (True, False):
        v = kh.prox_step(u, h, constrained=False, tol=1e-14, fast=fast)
        assert np.allclose([p.coords[0] for p in v.values], want, atol=1e-10)


def test_prox_objective_is_minimized(rng):
    # F at the prox point is below F at random perturbations
    T = SPACES["tripod"]
    g = kh.random_graph(rng, 10)
    u = kh.Mapping(g, T, [T.random_point(rng) for _ in range(g.n)])
    h = 0.2
    v = kh.prox_step(u, h, constrained=False, tol=1e-12)

    def F(w):
        return kh.ks_energy(w) + kh.l2_distance(w, u) ** 2 / (2 * h)

    base = F(v)
    for _ in range(50):
        x = int(rng.integers(g.n))
        vals = list(v.values)
        vals[x] = T.geodesic_point(vals[x], T.random_point(rng), float(rng.uniform(0, 0.1)))
        assert F(v.with_values(vals)) >= base - 1e-12


def test_prox_displacement_bounded_by_slope(rng):
    g = kh.random_graph(rng, 10)
    vals = rng.normal(size=g.n)
    u = kh.scalar_mapping(g, vals)
    c = g.sym_weights()
    grad = 4 * (c.sum(axis=1) * vals - c @ vals)
    slope = np.sqrt(np.sum(grad ** 2 / g.measure))
    ratios = []
    for h in (1e-1, 1e-2, 1e-3, 1e-4):
        v = kh.prox_step(u, h, constrained=False, tol=1e-14)
        ratios.append(kh.l2_distance(u, v) / h)
    assert max(ratios) <= slope * (1 + 1e-8)
    # the ratio tends to the slope as h -> 0
    assert ratios[-1] == pytest.approx(slope, rel=1e-2)


def test_prox_fixed_point_of_solution(rng):
    for name in ("R2", "tripod", "H2"):
        T = SPACES[name]
        g, dom, data = grid_problem(5, T, rng)
        tol = 1e-9
        u, _ = kh.solve_dirichlet(g, dom, T, data, tol=tol * 1e-2)
        v = kh.prox_step(u, 0.1, constrained=True, tol=tol)
        moved = max(T.dist(a, b) for a, b in zip(u.values, v.values))
        assert moved < 10 * tol


def test_prox_validation():
    u = kh.scalar_mapping(kh.path_graph(3), [0, 1, 2])
    with pytest.raises(kh.DomainError):
        kh.prox_step(u, 0.0)
    with pytest.raises(kh.DomainError):
        kh.prox_step(u, 0.1, constrained=True)


def test_constant_flow(space, rng):
    g = kh.random_graph(rng, 8)
    p = space.random_point(rng)
    traj = kh.run_flow(kh.Mapping(g, space, [p] * g.n), h=0.1, n_steps=5, constrained=False)
    assert np.all(traj.energies == 0)
    assert all(all(q == p for q in s.mapping.values) for s in traj.steps)
    assert [s.time for s in traj.steps] == pytest.approx([0.1 * k for k in range(6)])


def test_flow_invariants(space, rng):
    g = kh.random_graph(rng, 10)
    u0 = kh.Mapping(g, space, [space.random_point(rng) for _ in range(g.n)])
    h = 0.05
    traj = kh.run_flow(u0, h=h, n_steps=15, constrained=False, tol=1e-11)
    e = traj.energies
    assert np.all(np.diff(e) <= 1e-12)
    assert np.all(traj.variational_slack() >= -1e-12)
    assert np.sum(traj.displacements ** 2) / (2 * h) <= e[0] + 1e-12


def test_constrained_flow_reaches_oracle():
    g = kh.grid_graph(5)
    dom = kh.DomainSpec([v for v in range(25) if v not in outer_ring(5)], 25)
    R = kh.EuclideanSpace(1)
    bvals = {v: float((v % 5) ** 2 - v // 5) for v in dom.boundary}
    data = {v: R.point([x]) for v, x in bvals.items()}
    u0 = kh.random_admissible(g, dom, R, data, np.random.default_rng(3))
    traj = kh.run_flow(u0, h=1.0, n_steps=5000, tol=1e-10, stop_tol=1e-12)
    got = np.array([p.coords[0] for p in traj.final.values])
    assert np.max(np.abs(got - kh.scalar_laplacian_oracle(g, dom, bvals))) <= 1e-6
    assert np.all(traj.variational_slack() >= -1e-12)


def test_constrained_flow_tripod_matches_solver(rng):
    T = SPACES["tripod"]
    g, dom, data = grid_problem(5, T, rng)
    tol = 1e-9
    u0 = kh.random_admissible(g, dom, T, data, rng)
    traj = kh.run_flow(u0, h=2.0, n_steps=3000, tol=tol, stop_tol=tol * 1e-2, keep_maps=False)
    ref, _ = kh.solve_dirichlet(g, dom, T, data, tol=tol * 1e-2)
    gap = max(T.dist(a, b) for a, b in zip(traj.final.values, ref.values))
    assert gap <= 10 * tol
    assert all(s.mapping is None for s in traj.steps[:-1])


def test_unconstrained_flow_collapses(rng):
    T = SPACES["tripod"]
    g = kh.grid_graph(4)
    u0 = kh.Mapping(g, T, [T.random_point(rng) for _ in range(g.n)])
    traj = kh.run_flow(u0, h=1.0, n_steps=2000, constrained=False, tol=1e-9, stop_tol=1e-9, keep_maps=False)
    assert traj.final.image_diameter() <= 1e-5


def test_trajectory_csv():
    u0 = kh.scalar_mapping(kh.path_graph(4), [0, 3, 1, 2])
    traj = kh.run_flow(u0, h=0.1, n_steps=3, constrained=False)
    rows = traj.to_csv().splitlines()
    assert rows[0] == "step,time,energy,displacement"
    assert len(rows) == 5


def test_energy_is_form_value_along_flow(rng):
    g = kh.random_graph(rng, 8)
    df = DirichletForm.from_graph(g)
    u0 = kh.scalar_mapping(g, rng.normal(size=g.n))
    traj = kh.run_flow(u0, h=0.1, n_steps=3, constrained=False)
    for s in traj.steps:
        vals = np.array([p.coords[0] for p in s.mapping.values])
        assert s.energy == pytest.approx(kh.form_value(df, vals, vals), rel=1e-12, abs=1e-15)

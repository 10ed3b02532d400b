import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import ksharmonic as kh
from ksharmonic.dirichlet import SolverError

from conftest import SPACES, outer_ring, sector_problem


def path_problem(n=5, lo=0.0, hi=1.0):
    g = kh.path_graph(n, eps=1.5)
    dom = kh.DomainSpec(range(1, n - 1), n)
    R = kh.EuclideanSpace(1)
    return g, dom, R, {0: R.point([lo]), n - 1: R.point([hi])}


def dense_oracle(g, dom, bvals):
    """Independent Dirichlet solve: assemble weights pair by pair, eliminate with numpy."""
    n, eps, mu = g.n, g.eps, g.measure
    D = g.dist_matrix
    mass = np.array([sum(mu[y] for y in range(n) if D[x, y] < eps) for x in range(n)])
    c = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            if x != y and D[x, y] < eps:
                w = mu[x] * mu[y] / (mass[x] * eps ** 2)
                c[x, y] += w / 2
                c[y, x] += w / 2
    I, B = dom.interior, dom.boundary
    A = np.diag(c[I].sum(axis=1)) - c[np.ix_(I, I)]
    rhs = c[np.ix_(I, B)] @ np.array([bvals[b] for b in B], dtype=float)
    out = np.zeros(n)
    out[B] = [bvals[b] for b in B]
    out[I] = np.linalg.solve(A, rhs)
    return out


def test_path_matches_oracle():
    g, dom, R, data = path_problem()
    u, rep = kh.solve_dirichlet(g, dom, R, data)
    vals = np.array([p.coords[0] for p in u.values])
    oracle = kh.scalar_laplacian_oracle(g, dom, {0: 0.0, 4: 1.0})
    assert np.max(np.abs(vals - oracle)) <= 1e-8
    assert np.allclose(oracle, dense_oracle(g, dom, {0: 0.0, 4: 1.0}), atol=1e-13)
    assert rep.monotone and rep.final_energy <= rep.initial_energy


def test_path_endpoint_balls_shift_solution():
    # endpoint balls hold two vertices, interior balls three, so the linear profile is not harmonic
    g, dom, R, data = path_problem()
    oracle = kh.scalar_laplacian_oracle(g, dom, {0: 0.0, 4: 1.0})
    assert oracle[2] == pytest.approx(0.5, abs=1e-14)
    assert abs(oracle[1] - 0.25) > 1e-3
    # uniform weights on a cycle-free interior: with equal ball masses the profile is linear
    ring = kh.build_graph([(i, (i + 1) % 8, 1.0) for i in range(8)], 1.0, 1.5)
    dom8 = kh.DomainSpec([1, 2, 3], 8)
    sol = kh.scalar_laplacian_oracle(ring, kh.DomainSpec([1, 2, 3, 5, 6, 7], 8), {0: 0.0, 4: 1.0})
    assert np.allclose(sol[:5], [0, 0.25, 0.5, 0.75, 1.0], atol=1e-14)
    assert dom8.boundary == [0, 4, 5, 6, 7]


def test_oracle_examples():
    g = kh.path_graph(3)
    dom = kh.DomainSpec([1], 3)
    assert kh.scalar_laplacian_oracle(g, dom, {0: 0.0, 2: 2.0})[1] == pytest.approx(1.0, abs=1e-15)
    grid = kh.grid_graph(3)
    ring = outer_ring(3)
    gdom = kh.DomainSpec([4], 9)
    sol = kh.scalar_laplacian_oracle(grid, gdom, {v: float(v % 3) for v in ring})
    assert sol[4] == pytest.approx(np.mean([sol[1], sol[3], sol[5], sol[7]]), abs=1e-15)
    sol = kh.scalar_laplacian_oracle(grid, gdom, {v: 3.5 for v in ring})
    assert np.all(sol == 3.5)


def test_oracle_vector_values():
    g = kh.grid_graph(4)
    dom = kh.DomainSpec([5, 6, 9, 10], 16)
    rng = np.random.default_rng(0)
    bv = {v: rng.normal(size=3) for v in dom.boundary}
    vec = kh.scalar_laplacian_oracle(g, dom, bv)
    for k in range(3):
        col = kh.scalar_laplacian_oracle(g, dom, {v: bv[v][k] for v in bv})
        assert np.allclose(vec[:, k], col, atol=1e-14)


def test_constant_boundary_gives_constant(space, rng):
    g = kh.random_graph(rng, 12)
    dom = kh.DomainSpec(range(3, 12), 12)
    y0 = space.random_point(rng)
    u, rep = kh.solve_dirichlet(g, dom, space, {x: y0 for x in dom.boundary})
    assert all(p == y0 for p in u.values)
    assert rep.final_energy == 0.0


def test_star_hub_maps_to_tripod_hub():
    n = 3
    g = kh.star_graph(3, n)
    tips = [(j + 1) * n for j in range(3)]
    dom = kh.DomainSpec([v for v in range(g.n) if v not in tips], g.n)
    T = kh.tripod()
    data = {tip: T.leg_point(j, 1.0) for j, tip in enumerate(tips)}
    for init in ("boundary_barycenter", "random"):
        u, _ = kh.solve_dirichlet(g, dom, T, data, init=init, tol=1e-12)
        assert T.dist(u.values[0], T.vertex_point(0)) <= 1e-10


def test_solver_matches_oracle_random_graphs():
    rng = np.random.default_rng(11)
    R3 = kh.EuclideanSpace(3)
    for _ in range(5):
        g = kh.random_graph(rng, int(rng.integers(10, 40)))
        nb = max(2, g.n // 4)
        bd = rng.choice(g.n, size=nb, replace=False)
        dom = kh.DomainSpec([v for v in range(g.n) if v not in set(bd.tolist())], g.n)
        vals = {int(v): rng.normal(size=3) for v in bd}
        u, _ = kh.solve_dirichlet(g, dom, R3, {v: R3.point(x) for v, x in vals.items()}, tol=1e-11)
        got = R3.as_array(u.values)
        want = kh.scalar_laplacian_oracle(g, dom, vals)
        assert np.max(np.abs(got - want)) <= 1e-8
        for k in range(3):
            assert np.allclose(want[:, k], dense_oracle(g, dom, {v: x[k] for v, x in vals.items()}), atol=1e-10)


def test_fast_and_generic_paths_agree():
    g = kh.grid_graph(6)
    dom = kh.DomainSpec([v for v in range(36) if v not in outer_ring(6)], 36)
    R2 = kh.EuclideanSpace(2)
    rng = np.random.default_rng(4)
    data = {v: R2.point(rng.normal(size=2)) for v in dom.boundary}
    a, ra = kh.solve_dirichlet(g, dom, R2, data, tol=1e-11, fast=True)
    b, rb = kh.solve_dirichlet(g, dom, R2, data, tol=1e-11, fast=False)
    assert np.max(np.abs(R2.as_array(a.values) - R2.as_array(b.values))) < 1e-9
    assert ra.sweeps == rb.sweeps


def test_energy_monotone_and_local_optimality(space, rng):
    g = kh.random_graph(rng, 15)
    dom = kh.DomainSpec(range(4, 15), 15)
    data = {x: space.random_point(rng) for x in dom.boundary}
    init = kh.random_admissible(g, dom, space, data, rng)
    u, rep = kh.solve_dirichlet(g, dom, space, data, init=init, tol=1e-10)
    assert rep.monotone
    assert rep.final_energy <= kh.ks_energy(init) + 1e-12
    assert rep.final_energy == pytest.approx(kh.ks_energy(u), rel=1e-10, abs=1e-14)
    assert rep.probe_min_increase >= -1e-12
    assert rep.residuals[-1] < 1e-10


def test_max_sweeps_error_carries_iterate():
    g, dom, R, data = kh.grid_graph(8), None, kh.EuclideanSpace(1), None
    dom = kh.DomainSpec([v for v in range(64) if v not in outer_ring(8)], 64)
    data = {v: R.point([float(v % 8)]) for v in dom.boundary}
    with pytest.raises(SolverError) as err:
        kh.solve_dirichlet(g, dom, R, data, tol=1e-14, max_sweeps=3)
    assert err.value.residual > 0
    assert len(err.value.mapping.values) == 64


def test_missing_boundary_data():
    g, dom, R, data = path_problem()
    with pytest.raises(kh.DomainError):
        kh.solve_dirichlet(g, dom, R, {0: R.point([0.0])})


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_maximum_principle(seed):
    rng = np.random.default_rng(seed)
    g = kh.random_graph(rng, int(rng.integers(6, 30)))
    nb = int(rng.integers(1, g.n - 1))
    bd = set(rng.choice(g.n, size=nb, replace=False).tolist())
    dom = kh.DomainSpec([v for v in range(g.n) if v not in bd], g.n)
    R = kh.EuclideanSpace(1)
    vals = {v: float(rng.normal()) for v in bd}
    init = "random" if seed % 2 else "boundary_barycenter"
    u, _ = kh.solve_dirichlet(g, dom, R, {v: R.point([x]) for v, x in vals.items()}, init=init, seed=seed)
    out = np.array([p.coords[0] for p in u.values])
    assert out.min() >= min(vals.values()) and out.max() <= max(vals.values())


@pytest.mark.parametrize("name", ["tripod", "H2", "tree_x_R"])
def test_uniqueness_npc_targets(name):
    T = SPACES[name]
    rng = np.random.default_rng(21)
    g = kh.random_graph(rng, 12)
    dom = kh.DomainSpec(range(4, 12), 12)
    data = {x: T.random_point(rng) for x in dom.boundary}
    assert kh.uniqueness_check(g, dom, T, data, n_restarts=3, tol=1e-9) <= 1e-8


def test_uniqueness_real_target_matches_oracle():
    g, dom, R, data = path_problem(7, 0.0, 3.0)
    sols = []
    rng = np.random.default_rng(0)
    for _ in range(3):
        u, _ = kh.solve_dirichlet(g, dom, R, data, init=kh.random_admissible(g, dom, R, data, rng), tol=1e-11)
        sols.append(np.array([p.coords[0] for p in u.values]))
    oracle = kh.scalar_laplacian_oracle(g, dom, {0: 0.0, 6: 3.0})
    assert all(np.max(np.abs(s - oracle)) <= 1e-8 for s in sols)


def test_uniqueness_constant_boundary_exact():
    T = kh.tripod()
    g = kh.path_graph(6)
    dom = kh.DomainSpec(range(1, 5), 6)
    y0 = T.leg_point(1, 0.3)
    assert kh.uniqueness_check(g, dom, T, {0: y0, 5: y0}, n_restarts=3) <= 1e-8
    with pytest.raises(kh.DomainError):
        kh.uniqueness_check(g, dom, T, {0: y0, 5: y0}, n_restarts=1)


def test_oscillation_constant_and_linear():
    g = kh.path_graph(11)
    c = kh.scalar_mapping(g, np.full(11, 2.0))
    assert kh.oscillation_decay(c, 5, [4, 3, 2]).diameters == [0.0, 0.0, 0.0]
    slope = 0.7
    lin = kh.scalar_mapping(g, slope * np.arange(11.0))
    # the open ball of radius k + 1/2 holds offsets up to k
    rep = kh.oscillation_decay(lin, 5, [4.5, 3.5, 2.5, 1.5])
    assert rep.diameters == pytest.approx([2 * k * slope for k in (4, 3, 2, 1)], abs=1e-14)
    assert rep.alpha > 0


def test_oscillation_sector_problem():
    g, dom, T, data = sector_problem(10)
    u, _ = kh.solve_dirichlet(g, dom, T, data, tol=1e-9)
    center = 4 * 10 + 4
    radii = [4.5, 3.5, 2.5, 1.5, 1.0]
    rep = kh.oscillation_decay(u, center, radii)
    assert all(b <= a + 1e-12 for a, b in zip(rep.diameters, rep.diameters[1:]))
    assert rep.alpha > 0
    assert set(rep.to_dict()) == {"radii", "diameters", "holder_exponent"}


def test_report_dict_has_conventions():
    g, dom, R, data = path_problem()
    _, rep = kh.solve_dirichlet(g, dom, R, data)
    d = rep.to_dict()
    assert d["sweeps"] == len(d["energy_trajectory"]) == len(d["residuals"])
    assert "ks_energy" in d["conventions"]

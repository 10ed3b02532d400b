import numpy as np
import pytest

import ksharmonic as kh
from ksharmonic.geometry import DomainError

from conftest import SPACES


def brute_density(g, target, values):
    """e(x) straight from the definition, with balls read off the distance matrix."""
    out = np.zeros(g.n)
    for x in range(g.n):
        members = [y for y in range(g.n) if g.dist_matrix[x, y] < g.eps]
        mass = sum(g.measure[y] for y in members)
        out[x] = sum(g.measure[y] * target.dist(values[x], values[y]) ** 2 for y in members) / (mass * g.eps ** 2)
    return out


def linear_path(n=3, eps=1.5):
    g = kh.path_graph(n, eps=eps)
    return kh.scalar_mapping(g, np.arange(n, dtype=float))


def test_density_path_example():
    u = linear_path()
    e = kh.energy_density(u)
    assert e[1] == pytest.approx(8 / 27, abs=1e-15)
    assert e[0] == pytest.approx(2 / 9, abs=1e-15)
    assert np.allclose(e, brute_density(u.graph, u.target, u.values), atol=1e-15)


def test_energy_path_example():
    u = linear_path()
    # 2/9 + 8/27 + 2/9 with unit measure
    assert kh.ks_energy(u) == pytest.approx(20 / 27, abs=1e-15)


def test_constant_map_has_zero_energy(space, rng):
    g = kh.random_graph(rng, 10)
    p = space.random_point(rng)
    u = kh.Mapping(g, space, [p] * g.n)
    assert kh.ks_energy(u) == 0.0
    assert np.all(kh.energy_density(u) == 0)


def test_energy_f_zero_and_range():
    u = linear_path()
    assert kh.ks_energy(u, np.zeros(3)) == 0.0
    with pytest.raises(DomainError):
        kh.ks_energy(u, [0.0, 1.5, 0.0])


def test_density_matches_brute_force_random(space, rng):
    g = kh.random_graph(rng, 12)
    vals = [space.random_point(rng) for _ in range(g.n)]
    u = kh.Mapping(g, space, vals)
    ref = brute_density(g, space, vals)
    assert np.allclose(kh.energy_density(u), ref, atol=1e-12)
    assert kh.ks_energy(u) == pytest.approx(float(g.measure @ ref), rel=1e-12)
    rep = kh.energy_report(u)
    assert rep.total == pytest.approx(kh.ks_energy(u), rel=1e-13)
    f = rng.uniform(0, 1, size=g.n)
    assert rep.weighted_total(f) == pytest.approx(kh.ks_energy(u, f), rel=1e-12)


def test_isometric_relabeling_invariance(rng):
    # the same tripod with legs listed in another order
    T1 = kh.tripod()
    T2 = kh.MetricTree(4, [(0, 3, 1.0), (0, 1, 1.0), (0, 2, 1.0)], name="relabelled")
    perm = {0: 1, 1: 2, 2: 0}
    g = kh.random_graph(rng, 15)
    vals1, vals2 = [], []
    for _ in range(g.n):
        k, o = int(rng.integers(3)), float(rng.uniform())
        vals1.append(T1.leg_point(k, o))
        vals2.append(T2.leg_point(perm[k], o))
    u1, u2 = kh.Mapping(g, T1, vals1), kh.Mapping(g, T2, vals2)
    assert np.allclose(kh.energy_density(u1), kh.energy_density(u2), atol=1e-14)
    assert kh.ks_energy(u1) == pytest.approx(kh.ks_energy(u2), rel=1e-14)


def test_tree_embedding_invariance(rng):
    # tripod sitting isometrically inside a larger tree
    T1 = kh.tripod()
    big = kh.MetricTree(6, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 4, 2.0), (2, 5, 0.5)], name="big")
    g = kh.random_graph(rng, 10)
    ks = [int(rng.integers(3)) for _ in range(g.n)]
    os_ = rng.uniform(0, 1, size=g.n)
    u1 = kh.Mapping(g, T1, [T1.leg_point(k, o) for k, o in zip(ks, os_)])
    u2 = kh.Mapping(g, big, [big.leg_point(k, o) for k, o in zip(ks, os_)])
    assert kh.ks_energy(u1) == pytest.approx(kh.ks_energy(u2), rel=1e-14)


def test_zero_energy_iff_constant(rng):
    g = kh.random_graph(rng, 10)
    vals = np.zeros(g.n)
    vals[3] = 1e-6
    assert kh.ks_energy(kh.scalar_mapping(g, vals)) > 0


def test_kuwae_shioya_ball_normalized_oracle(rng):
    g = kh.random_graph(rng, 10)
    T = SPACES["tripod"]
    vals = [T.random_point(rng) for _ in range(g.n)]
    u = kh.Mapping(g, T, vals)
    b = kh.RateFunction.power(2.0)
    ref = 0.0
    for x in range(g.n):
        for y in range(g.n):
            if g.dist_matrix[x, y] < g.eps:
                ref += g.measure[x] * g.measure[y] * T.dist(vals[x], vals[y]) ** 2 / g.eps ** 2
    ref /= 2 * b(g.eps)
    assert kh.ks_energy_kuwae_shioya(u, b=b) == pytest.approx(ref, rel=1e-12)
    # uniform measure and uniform ball mass: the two energies differ by mu(B) / (2 b(eps))
    grid = kh.grid_graph(5, eps=1.1)
    torus_like = kh.scalar_mapping(grid, rng.normal(size=grid.n))
    ratio = kh.ks_energy_kuwae_shioya(torus_like, b=b) / kh.ks_energy(torus_like)
    assert np.isfinite(ratio) and ratio > 0


def test_kuwae_shioya_matches_ks_with_matching_rate():
    # mu = 1 and every ball of equal mass m: E^b = E * m / (2 b(eps)); choose b(eps) = m / 2
    g = kh.build_graph([(i, (i + 1) % 6, 1.0) for i in range(6)], 1.0, 1.5)  # cycle, m = 3
    u = kh.scalar_mapping(g, [0, 1, 3, 2, 5, 4])
    b = kh.RateFunction.tabulated([1.5], [1.5])
    assert kh.ks_energy_kuwae_shioya(u, b=b) == pytest.approx(kh.ks_energy(u), rel=1e-14)


def test_kuwae_shioya_chordal_closed_form():
    g = kh.path_graph(4, eps=1.5)
    u = kh.scalar_mapping(g, np.arange(4.0))
    b = kh.RateFunction.power(1.0)
    # 6 ordered neighbour pairs, each quotient 1, mu = 1
    assert kh.ks_energy_kuwae_shioya(u, b=b, variant="chordal") == pytest.approx(6 / (2 * 1.5), rel=1e-14)
    const = kh.scalar_mapping(g, np.ones(4))
    assert kh.ks_energy_kuwae_shioya(const, b=b, variant="chordal") == 0.0
    assert kh.ks_energy_kuwae_shioya(const, b=b) == 0.0


def test_rate_function_validation():
    with pytest.raises(DomainError):
        kh.RateFunction.power(0.0)
    with pytest.raises(DomainError):
        kh.RateFunction.tabulated([1.0, 0.5], [1.0, 2.0])


def test_midpoint_map_examples(rng):
    g = kh.path_graph(4)
    u = kh.scalar_mapping(g, [0, 1, 2, 3])
    v = kh.scalar_mapping(g, [2, 2, 0, 1])
    v = kh.Mapping(g, u.target, v.values)
    w = kh.midpoint_map(u, v)
    assert [p.coords[0] for p in w.values] == [1.0, 1.5, 1.0, 2.0]
    assert kh.midpoint_map(u, u).values == u.values
    T = SPACES["tripod"]
    a = kh.Mapping(g, T, [T.leg_point(0, 1.0)] * 4)
    b = kh.Mapping(g, T, [T.leg_point(1, 1.0)] * 4)
    assert all(p == T.vertex_point(0) for p in kh.midpoint_map(a, b).values)


def test_midpoint_map_mismatch():
    g1, g2 = kh.path_graph(3), kh.path_graph(3)
    with pytest.raises(DomainError):
        kh.midpoint_map(kh.scalar_mapping(g1, [0, 1, 2]), kh.scalar_mapping(g2, [0, 1, 2]))


def brute_convexity_defect(u, v):
    g, T = u.graph, u.target
    w = [T.midpoint(p, q) for p, q in zip(u.values, v.values)]
    h = [T.dist(p, q) for p, q in zip(u.values, v.values)]
    total = 0.0
    for x in range(g.n):
        members = [y for y in range(g.n) if g.dist_matrix[x, y] < g.eps]
        mass = sum(g.measure[y] for y in members)
        for y in members:
            k = g.measure[x] * g.measure[y] / (mass * g.eps ** 2)
            total += k * (T.dist(u.values[x], u.values[y]) ** 2 + T.dist(v.values[x], v.values[y]) ** 2
                          - 0.5 * (h[x] - h[y]) ** 2 - 2 * T.dist(w[x], w[y]) ** 2)
    return total


def test_convexity_defect_zero_cases(rng):
    g = kh.random_graph(rng, 8)
    u = kh.Mapping(g, kh.EuclideanSpace(1), [kh.EuclideanSpace(1).point([x]) for x in rng.normal(size=g.n)])
    assert kh.convexity_defect(u, u) == pytest.approx(0.0, abs=1e-14)
    R1 = kh.EuclideanSpace(1)
    lo = rng.normal(size=g.n)
    hi = lo + rng.uniform(0, 2, size=g.n)
    a = kh.Mapping(g, R1, [R1.point([t]) for t in lo])
    b = kh.Mapping(g, R1, [R1.point([t]) for t in hi])
    # ordered real maps: |u - v| = v - u, so every inequality used is an equality
    assert abs(kh.convexity_defect(a, b)) < 1e-12


@pytest.mark.parametrize("dim", [1, 3])
def test_convexity_defect_euclidean_closed_form(rng, dim):
    # in R^n the midpoint identity leaves (E(|u - v| as a vector) - E(|u - v|)) / 2
    g = kh.random_graph(rng, 8)
    R3 = kh.EuclideanSpace(dim)
    A, B = rng.normal(size=(g.n, dim)), rng.normal(size=(g.n, dim))
    a = kh.Mapping(g, R3, [R3.point(r) for r in A])
    b = kh.Mapping(g, R3, [R3.point(r) for r in B])
    diff = kh.Mapping(g, R3, [R3.point(r) for r in A - B])
    norm = kh.scalar_mapping(g, np.linalg.norm(A - B, axis=1))
    expected = 0.5 * (kh.ks_energy(diff) - kh.ks_energy(norm))
    assert kh.convexity_defect(a, b) == pytest.approx(expected, rel=1e-10, abs=1e-12)
    assert expected >= 0


def test_convexity_defect_tripod_brute_force(rng):
    g = kh.path_graph(5)
    T = SPACES["tripod"]
    for _ in range(20):
        u = kh.Mapping(g, T, [T.random_point(rng) for _ in range(5)])
        v = kh.Mapping(g, T, [T.random_point(rng) for _ in range(5)])
        d = kh.convexity_defect(u, v)
        assert d == pytest.approx(brute_convexity_defect(u, v), abs=1e-12)
        assert d >= -1e-10


def test_convexity_defect_nonnegative(space, rng):
    g = kh.random_graph(rng, 8)
    for _ in range(50):
        u = kh.Mapping(g, space, [space.random_point(rng) for _ in range(g.n)])
        v = kh.Mapping(g, space, [space.random_point(rng) for _ in range(g.n)])
        f = rng.uniform(0, 1, size=g.n)
        assert kh.convexity_defect(u, v, f) >= -1e-10


def test_distance_pullback_examples():
    g = kh.path_graph(4)
    u = kh.scalar_mapping(g, [0, 1, 2, 3])
    y0 = u.target.point([0.0])
    assert np.allclose(kh.distance_pullback(u, y0, 2), [0, 1, 4, 9])
    assert np.allclose(kh.distance_pullback(u, y0, 1), [0, 1, 2, 3])
    c = kh.Mapping(g, u.target, [y0] * 4)
    assert np.all(kh.distance_pullback(c, y0) == 0)
    T = SPACES["tripod"]
    t = kh.Mapping(g, T, [T.leg_point(k % 3, 0.1 * (k + 1)) for k in range(4)])
    assert np.allclose(kh.distance_pullback(t, T.vertex_point(0)), [0.01, 0.04, 0.09, 0.16])
    with pytest.raises(DomainError):
        kh.distance_pullback(u, y0, 3)


def test_triangle_domination(space, rng):
    g = kh.random_graph(rng, 10)
    for _ in range(20):
        u = kh.Mapping(g, space, [space.random_point(rng) for _ in range(g.n)])
        v = kh.distance_pullback(u, space.random_point(rng), 1)
        assert kh.ks_energy(kh.scalar_mapping(g, v)) <= kh.ks_energy(u) + 1e-10


def test_energy_measure_of_map_sums_to_energy(space, rng):
    g = kh.random_graph(rng, 10)
    u = kh.Mapping(g, space, [space.random_point(rng) for _ in range(g.n)])
    assert kh.energy_measure_of_map(u).sum() == pytest.approx(kh.ks_energy(u), rel=1e-12)


def test_mapping_boundary_validation():
    g = kh.path_graph(3)
    R = kh.EuclideanSpace(1)
    dom = kh.DomainSpec([1], 3)
    vals = [R.point([0]), R.point([5]), R.point([1])]
    kh.Mapping(g, R, vals, dom, {0: R.point([0]), 2: R.point([1])})
    with pytest.raises(DomainError):
        kh.Mapping(g, R, vals, dom, {0: R.point([0]), 2: R.point([2])})
    with pytest.raises(DomainError):
        kh.Mapping(g, R, vals, dom, {0: R.point([0])})
    with pytest.raises(DomainError):
        kh.Mapping(g, R, vals[:2])


def test_energy_report_serialization():
    u = linear_path()
    rep = kh.energy_report(u)
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0] == "vertex,density"
    assert len(csv_text.splitlines()) == 4
    import json

    summary = json.loads(rep.to_json())
    assert summary["total"] == pytest.approx(20 / 27)
    assert "conventions" in summary and summary["eps"] == 1.5

"""Grid into the tripod with the boundary ring split into three sectors.

The harmonic map pushes the interior toward the hub: each vertex is printed as
the leg it lands on (a, b, c) with its distance from the hub in tenths, and
``*`` marks vertices mapped to the hub itself.

    python3 demos/sector_tripod.py [n]
"""

import math
import sys

import ksharmonic as kh


def main(n=16):
    T = kh.tripod()
    g = kh.grid_graph(n)
    ring = [v for v in range(g.n) if v // n in (0, n - 1) or v % n in (0, n - 1)]
    omega = kh.DomainSpec([v for v in range(g.n) if v not in ring], g.n)
    c = (n - 1) / 2
    data = {}
    for v in ring:
        i, j = divmod(v, n)
        leg = int((math.atan2(i - c, j - c) % (2 * math.pi)) // (2 * math.pi / 3))
        data[v] = T.leg_point(leg, 1.0)

    u, rep = kh.solve_dirichlet(g, omega, T, data, tol=1e-10)
    print(f"{n}x{n} grid, {rep.sweeps} sweeps, energy {rep.energies[-1]:.6f}, residual {rep.residuals[-1]:.1e}\n")
    hub = T.vertex_point(0)
    for i in range(n):
        row = []
        for j in range(n):
            p = u.values[i * n + j]
            s = T.dist(p, hub)
            row.append(" *" if s < 1e-6 else f"{'abc'[p.coords[0]]}{min(9, int(10 * s))}")
        print(" ".join(row))

    x0 = (n // 2 - 1) * n + (n // 2 - 1)
    osc = kh.oscillation_decay(u, x0, [r + 0.5 for r in range(n // 2 - 1, 0, -1)] + [1.0])
    print("\nradius  image diameter")
    for r, d in zip(osc.radii, osc.diameters):
        print(f"{r:6.1f}  {d:.4f}")
    print(f"fitted decay exponent {osc.alpha:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 16)

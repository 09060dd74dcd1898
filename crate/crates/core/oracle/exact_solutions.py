"""Symbolic reference values for the built-in exact solutions.

Run with `python3 oracle/exact_solutions.py > tests/data/oracle_values.txt`
from the crate root. Derivatives are taken symbolically with sympy and
evaluated with 30 significant digits at 100 pseudo-random points per problem
(fixed seed). Columns:

    problem x1 x2 u ux uy uxx uxy uyy extra

where `extra` is the source f for linear problems, det D^2 u for the
Monge-Ampere solutions and 0 for hjb-aniso.
"""
import random

import mpmath
import sympy as sp

mpmath.mp.dps = 30
x1, x2 = sp.symbols("x1 x2", real=True)
rng = random.Random(20261015)


def disk_points(n, rmin=0.0, rmax=0.95):
    pts = []
    while len(pts) < n:
        p = (rng.uniform(-1, 1), rng.uniform(-1, 1))
        r = (p[0] ** 2 + p[1] ** 2) ** 0.5
        if rmin < r < rmax:
            pts.append(p)
    return pts


def jet(u):
    return [u, sp.diff(u, x1), sp.diff(u, x2), sp.diff(u, x1, 2), sp.diff(u, x1, x2), sp.diff(u, x2, 2)]


def emit(name, exprs, points):
    fns = [sp.lambdify((x1, x2), e, modules="mpmath") for e in exprs]
    for p in points:
        a, b = mpmath.mpf(p[0]), mpmath.mpf(p[1])
        vals = [fn(a, b) for fn in fns]
        print(name, f"{p[0]:.17e} {p[1]:.17e}", " ".join(f"{float(v):.17e}" for v in vals))


# poisson-disk: Laplace u = -1
u_p = (1 - x1**2 - x2**2) / 4
emit("poisson-disk", jet(u_p) + [sp.Integer(-1)], disk_points(100))

# linear-cordes: f = A : D^2 u + b . grad u - c u
u_lin = (1 - x1**2 - x2**2) * sp.cos(x1 + 2 * x2)
A = sp.Matrix([[2 + x1**2, x1 * x2 / 2], [x1 * x2 / 2, 2 + x2**2]])
b = sp.Matrix([sp.Rational(1, 2) + x2 / 2, -x1 / 2])
c = 1 + x1**2
H = sp.hessian(u_lin, (x1, x2))
grad = sp.Matrix([sp.diff(u_lin, x1), sp.diff(u_lin, x2)])
f_lin = sum(A[i, j] * H[i, j] for i in range(2) for j in range(2)) + (b.T * grad)[0] - c * u_lin
emit("linear-cordes", jet(u_lin) + [f_lin], disk_points(100))

# Monge-Ampere: u = -sqrt(R^2 - r^2) + sqrt(R^2 - 1)
for Rv, tag in [(sp.sqrt(2), "ma-sqrt2"), (sp.Integer(2), "ma-2")]:
    u_ma = -sp.sqrt(Rv**2 - x1**2 - x2**2) + sp.sqrt(Rv**2 - 1)
    Hm = sp.hessian(u_ma, (x1, x2))
    assert sp.simplify(Hm.det() - Rv**2 / (Rv**2 - x1**2 - x2**2) ** 2) == 0
    emit(tag, jet(u_ma) + [Hm.det()], disk_points(100))

# hjb-aniso: u = r^{5/3} (1 - r)^{5/2} sin(2 phi / 3)^{5/2} on 0 < phi < 3 pi / 2, else 0.
# phi in [0, 2 pi): atan2 on the upper half plane, atan2 + 2 pi below.
r = sp.sqrt(x1**2 + x2**2)
upper = sp.atan2(x2, x1)
lower = upper + 2 * sp.pi
for phi, pred in [(upper, lambda p: p[1] >= 0), (lower, lambda p: p[1] < 0)]:
    u_h = r ** sp.Rational(5, 3) * (1 - r) ** sp.Rational(5, 2) * sp.sin(2 * phi / 3) ** sp.Rational(5, 2)
    pts = [p for p in disk_points(200, rmin=0.02) if pred(p)][:50]
    inside = [p for p in pts if not (p[0] > 0 and p[1] < 0)]
    outside = [p for p in pts if p[0] > 0 and p[1] < 0]
    emit("hjb-aniso", jet(u_h) + [sp.Integer(0)], inside)
    for p in outside:
        print("hjb-aniso", f"{p[0]:.17e} {p[1]:.17e}", " ".join(["0.00000000000000000e+00"] * 7))

"""Symbolic derivation of the built-in problems' sources and tensor partials.

Run ``python tools/derive_problems.py`` to print the expressions and compare
them with the closed forms in ``meshbench.problems`` at random points.
"""
import numpy as np
import sympy as sp

from meshbench.problems import builtin_problem

x, y = sp.symbols("x y", real=True)


def rotated(theta, d1, d2):
    P = sp.Matrix([[sp.cos(theta), sp.sin(theta)], [-sp.sin(theta), sp.cos(theta)]])
    return sp.simplify(P.T * sp.diag(d1, d2) * P)


DEFINITIONS = {
    1: (sp.eye(2), 2 * sp.exp(2 * x + y)),
    2: (rotated(sp.pi / 8, 1 + 2 * x**2 + y**2, 1 + x**2 + 2 * y**2), sp.sin(sp.pi * x) * sp.sin(sp.pi * y)),
    3: (
        rotated(sp.pi / 4, 1 + 2 * x**2 + y**2 + y**5, 1 + x**2 + 2 * y**2 + x**3),
        sp.sin(sp.pi * x) * sp.sin(sp.pi * y),
    ),
}


def derive(pid):
    K, u = DEFINITIONS[pid]
    flux = K * sp.Matrix([sp.diff(u, x), sp.diff(u, y)])
    f = -(sp.diff(flux[0], x) + sp.diff(flux[1], y))
    dK = [sp.diff(K[0, 0], x), sp.diff(K[0, 1], y), sp.diff(K[0, 1], x), sp.diff(K[1, 1], y)]
    return K, u, sp.simplify(f), [sp.simplify(e) for e in dK]


def main():
    rng = np.random.default_rng(1)
    pts = rng.random((200, 2))
    for pid in (1, 2, 3):
        K, u, f, dK = derive(pid)
        print(f"problem {pid}")
        print("  K  =", K.tolist())
        print("  dK =", dK)
        print("  f  =", f)
        prob = builtin_problem(pid)
        fn = sp.lambdify((x, y), f, "numpy")
        kn = sp.lambdify((x, y), K, "numpy")
        dn = sp.lambdify((x, y), dK, "numpy")
        worst = 0.0
        for px, py in pts:
            worst = max(
                worst,
                abs(fn(px, py) - prob.f(px, py)),
                np.max(np.abs(np.array(kn(px, py), dtype=float) - prob.K(px, py))),
                np.max(np.abs(np.array(dn(px, py), dtype=float) - prob.dK(px, py))),
            )
        print(f"  max deviation from meshbench.problems: {worst:.3e}")
        assert worst < 1e-11


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""One-off reference computation of the H2/STO-3G FCI energy.

Deliberately independent of the package: the Coulomb kernel enters only
through adaptive quadrature over the transform
1/r12 = (2/sqrt(pi)) * int_0^inf exp(-t^2 r12^2) dt (no Boys function and no
closed-form ERI prefactor), the four 1D Gaussian axis integrals are verified
against direct numerical quadrature before use, and the CI matrix is written
in first-quantized spatial form.  The frozen constant in
tests/test_hamiltonians.py comes from this script.

Run: python scripts/h2_sto3g_reference.py [spacing_angstrom]
"""
import sys

import numpy as np
from scipy.integrate import dblquad, quad

ANGSTROM_PER_BOHR = 0.52917721092
EXPS = np.array([3.425250914, 0.6239137298, 0.1688554040])
COEFS = np.array([0.1543289673, 0.5353281423, 0.4446345422])


# 1D Gaussian axis integrals (completed squares), each checked numerically
# in verify_axis_formulas() before anything else runs.

def S1(a, b, A, B):
    """int exp(-a(x-A)^2 - b(x-B)^2) dx"""
    p = a + b
    return np.sqrt(np.pi / p) * np.exp(-a * b / p * (A - B) ** 2)


def D1(a, b, A, B):
    """int d/dx[exp(-a(x-A)^2)] d/dx[exp(-b(x-B)^2)] dx"""
    p = a + b
    ab = a * b / p
    return 2 * ab * (1 - 2 * ab * (A - B) ** 2) * S1(a, b, A, B)


def ATT1(a, b, t, A, B):
    """int exp(-a(x-A)^2 - b(x-B)^2 - t^2 x^2) dx"""
    p = a + b + t * t
    q = a * A + b * B
    c = a * A * A + b * B * B
    return np.sqrt(np.pi / p) * np.exp(q * q / p - c)


def TWO1(a, b, t, A, B):
    """int int exp(-a(x1-A)^2 - b(x2-B)^2 - t^2 (x1-x2)^2) dx1 dx2"""
    tt = t * t
    den = a * b + tt * (a + b)
    return np.pi / np.sqrt(den) * np.exp(-a * b * tt * (A - B) ** 2 / den)


def verify_axis_formulas():
    cases = [(0.7, 1.9, -0.3, 0.8, 0.6), (2.5, 0.2, 0.0, 1.4, 1.1),
             (1.0, 1.0, 0.5, 0.5, 2.0)]
    for a, b, A, B, t in cases:
        num, _ = quad(lambda x: np.exp(-a * (x - A) ** 2 - b * (x - B) ** 2),
                      -np.inf, np.inf)
        assert abs(num - S1(a, b, A, B)) < 1e-12, "S1 formula"
        num, _ = quad(lambda x: (-2 * a * (x - A)) * (-2 * b * (x - B))
                      * np.exp(-a * (x - A) ** 2 - b * (x - B) ** 2),
                      -np.inf, np.inf)
        assert abs(num - D1(a, b, A, B)) < 1e-11, "D1 formula"
        num, _ = quad(lambda x: np.exp(-a * (x - A) ** 2 - b * (x - B) ** 2
                                       - t**2 * x**2), -np.inf, np.inf)
        assert abs(num - ATT1(a, b, t, A, B)) < 1e-12, "ATT1 formula"
        num, _ = dblquad(
            lambda x2, x1: np.exp(-a * (x1 - A) ** 2 - b * (x2 - B) ** 2
                                  - t**2 * (x1 - x2) ** 2),
            -8, 8, -8, 8, epsabs=1e-11)
        assert abs(num - TWO1(a, b, t, A, B)) < 1e-9, "TWO1 formula"


def main(spacing=0.7414):
    verify_axis_formulas()
    rbohr = spacing / ANGSTROM_PER_BOHR
    centers = [0.0, rbohr]
    # contraction coefficients refer to unit-normalized primitives; the
    # primitive norm comes from the verified axis overlap, 1/sqrt(S1^3)
    coefs = COEFS / np.sqrt(S1(EXPS, EXPS, 0.0, 0.0) ** 3)
    cc = np.outer(coefs, coefs).ravel()
    aa = np.repeat(EXPS, 3)
    bb = np.tile(EXPS, 3)

    def overlap(za, zb):
        return float(np.sum(cc * S1(aa, bb, 0.0, 0.0) ** 2 * S1(aa, bb, za, zb)))

    def kinetic(za, zb):
        # -1/2 <ga|lap gb> = +1/2 <grad ga|grad gb>, axis by axis
        sx = S1(aa, bb, 0.0, 0.0)
        dx = D1(aa, bb, 0.0, 0.0)
        sz = S1(aa, bb, za, zb)
        dz = D1(aa, bb, za, zb)
        return float(np.sum(cc / 2 * (2 * dx * sx * sz + sx * sx * dz)))

    def attraction(za, zb, zc):
        def f(t):
            return np.sum(cc * ATT1(aa, bb, t, 0.0, 0.0) ** 2
                          * ATT1(aa, bb, t, za - zc, zb - zc))
        val, _ = quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=400)
        return -2 / np.sqrt(np.pi) * val

    def eri(za, zb, zc, zd):
        w4 = np.outer(cc, cc).ravel()
        a1, b1 = np.repeat(aa, 9), np.repeat(bb, 9)
        a2, b2 = np.tile(aa, 9), np.tile(bb, 9)

        # each bra/ket primitive product is itself a Gaussian (weighted center
        # zp/zq with prefactor), so the t-coupled integral is TWO1 per axis
        p = a1 + b1
        q = a2 + b2
        zp = (a1 * za + b1 * zb) / p
        zq = (a2 * zc + b2 * zd) / q
        pref = (np.exp(-a1 * b1 / p * (za - zb) ** 2)
                * np.exp(-a2 * b2 / q * (zc - zd) ** 2))

        def f(t):
            return np.sum(w4 * pref * TWO1(p, q, t, 0.0, 0.0) ** 2
                          * TWO1(p, q, t, zp, zq))
        val, _ = quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=400)
        return 2 / np.sqrt(np.pi) * val

    norm = 1 / np.sqrt(overlap(0.0, 0.0))
    scale2, scale4 = norm**2, norm**4

    z0, z1 = centers
    s01 = overlap(z0, z1) * scale2
    tmat = np.array([[kinetic(zi, zj) for zj in centers] for zi in centers]) * scale2
    vmat = np.array([[sum(attraction(zi, zj, zc) for zc in centers)
                      for zj in centers] for zi in centers]) * scale2
    hcore = tmat + vmat

    def canonical(i, j, k, l):
        return min((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                   (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i))

    keys = {canonical(i, j, k, l)
            for i in range(2) for j in range(2) for k in range(2) for l in range(2)}
    g = {idx: eri(*(centers[k] for k in idx)) * scale4 for idx in sorted(keys)}

    def geri(i, j, k, l):
        return g[canonical(i, j, k, l)]

    # Lowdin S^{-1/2} written out for the 2x2 overlap [[1, s],[s, 1]]
    xp = 1 / np.sqrt(1 + s01)
    xm = 1 / np.sqrt(1 - s01)
    x = np.array([[(xp + xm) / 2, (xp - xm) / 2],
                  [(xp - xm) / 2, (xp + xm) / 2]])

    h = x @ hcore @ x
    gt = np.zeros((2, 2, 2, 2))
    for p in range(2):
        for q in range(2):
            for r in range(2):
                for s in range(2):
                    gt[p, q, r, s] = sum(
                        x[p, i] * x[q, j] * x[r, k] * x[s, l] * geri(i, j, k, l)
                        for i in range(2) for j in range(2)
                        for k in range(2) for l in range(2))

    # 2-electron CI over opposite-spin products |p q~>:
    # <p q~|H|r s~> = h_pr d_qs + d_pr h_qs + (pr|qs)
    basis = [(0, 0), (0, 1), (1, 0), (1, 1)]
    hci = np.zeros((4, 4))
    for a_, (p, q) in enumerate(basis):
        for b_, (r, s) in enumerate(basis):
            val = gt[p, r, q, s]
            if q == s:
                val += h[p, r]
            if p == r:
                val += h[q, s]
            hci[a_, b_] = val

    e_elec = float(np.linalg.eigvalsh(hci)[0])
    e_nuc = 1 / rbohr
    print(f"spacing      : {spacing} angstrom ({rbohr:.12f} bohr)")
    print(f"overlap s01  : {s01:.12f}")
    print(f"e_nuc        : {e_nuc:.12f}")
    print(f"E_FCI (elec) : {e_elec:.12f}")
    print(f"E_FCI (total): {e_elec + e_nuc:.12f}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 0.7414)

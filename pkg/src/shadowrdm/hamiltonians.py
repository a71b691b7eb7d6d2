"""Second-quantized Hamiltonians.

Sources: FCIDUMP files, STO-3G hydrogen chains with analytic s-Gaussian
integrals, and Hubbard chains.  Also builds the pair-space coefficient matrix
that turns a 2-RDM into an energy.

Index conventions fixed here for the whole project:

* spatial ERIs are stored in chemists' notation (pq|rs) with 8-fold symmetry;
* spin orbitals are spatial-major with alpha before beta, p_alpha = 2p,
  p_beta = 2p + 1;
* antisymmetric pair space enumerates spin-orbital pairs (i < j)
  lexicographically.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ANGSTROM_PER_BOHR",
    "MolecularIntegrals",
    "ReducedHamiltonian",
    "parse_fcidump",
    "write_fcidump",
    "hydrogen_chain_sto3g",
    "sto3g_hydrogen_integrals",
    "hubbard_chain",
    "reduced_hamiltonian",
    "spin_orbital_integrals",
    "energy_from_2rdm",
    "system_from_key",
]

ANGSTROM_PER_BOHR = 0.52917721092

# STO-3G hydrogen 1s contraction (scale factor 1.24 already folded into the
# exponents, standard published values).
STO3G_H_EXPONENTS = (3.425250914, 0.6239137298, 0.1688554040)
STO3G_H_COEFFS = (0.1543289673, 0.5353281423, 0.4446345422)


@dataclass
class MolecularIntegrals:
    """Spatial-orbital integrals in Hartree: core Hamiltonian h, ERIs (pq|rs),
    and the nuclear repulsion constant."""

    n_spatial: int
    h: np.ndarray
    eri: np.ndarray
    e_nuc: float
    n_electrons: int | None = None
    ms2: int | None = None

    def __post_init__(self) -> None:
        self.h = np.asarray(self.h, dtype=float)
        self.eri = np.asarray(self.eri, dtype=float)
        n = self.n_spatial
        if self.h.shape != (n, n) or self.eri.shape != (n, n, n, n):
            raise ValueError("integral arrays do not match n_spatial")
        if np.max(np.abs(self.h - self.h.T), initial=0.0) > 1e-12:
            raise ValueError("core Hamiltonian is not symmetric")
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if np.max(np.abs(self.eri - self.eri.transpose(perm)), initial=0.0) > 1e-12:
                raise ValueError("ERIs lack 8-fold permutational symmetry")


@dataclass
class ReducedHamiltonian:
    """Pair-space energy functional: energy = <k2, 2-RDM> + e_nuc.

    ``k2`` acts on the antisymmetric spin-orbital pair space; the one-body
    part is folded in with the 1/(N-1) contraction weight.
    """

    n_spin: int
    k2: np.ndarray
    e_nuc: float
    n_electrons: int


class FcidumpError(ValueError):
    pass


# ---------------------------------------------------------------------------
# FCIDUMP

def parse_fcidump(text: str | bytes) -> MolecularIntegrals:
    """Parse FCIDUMP text: ``&FCI NORB=..., NELEC=..., MS2=...`` header, then
    ``value i j k l`` records (1-based; ``i j 0 0`` one-electron, all-zero
    indices nuclear repulsion).  Stored unique ERI elements are expanded to
    the full 8-fold-symmetric tensor.
    """
    if isinstance(text, bytes):
        text = text.decode("ascii")
    lines = text.splitlines()

    header_lines: list[str] = []
    body_start = None
    for ln, line in enumerate(lines):
        header_lines.append(line)
        if "&END" in line.upper() or line.strip() == "/" or line.strip().endswith("/"):
            body_start = ln + 1
            break
    if body_start is None:
        raise FcidumpError("no &END (or /) terminating the FCIDUMP header")
    header = " ".join(header_lines)
    if "&FCI" not in header.upper():
        raise FcidumpError("missing &FCI header")

    def header_int(name: str) -> int | None:
        m = re.search(rf"{name}\s*=\s*(-?\d+)", header, re.IGNORECASE)
        return int(m.group(1)) if m else None

    norb = header_int("NORB")
    if norb is None or norb < 1:
        raise FcidumpError("header does not define NORB")
    nelec = header_int("NELEC")
    ms2 = header_int("MS2")

    h = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    e_nuc = 0.0

    for ln in range(body_start, len(lines)):
        stripped = lines[ln].strip()
        if not stripped:
            continue
        fields = stripped.split()
        if len(fields) != 5:
            raise FcidumpError(f"line {ln + 1}: expected 'value i j k l', got {stripped!r}")
        try:
            value = float(fields[0])
            i, j, k, l = (int(f) for f in fields[1:])
        except ValueError as exc:
            raise FcidumpError(f"line {ln + 1}: non-numeric field ({exc})") from None
        if min(i, j, k, l) < 0 or max(i, j, k, l) > norb:
            raise FcidumpError(f"line {ln + 1}: orbital index out of range 1..{norb}")
        if i == j == k == l == 0:
            e_nuc = value
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise FcidumpError(f"line {ln + 1}: malformed one-electron record")
            h[i - 1, j - 1] = value
            h[j - 1, i - 1] = value
        elif min(i, j, k, l) == 0:
            raise FcidumpError(f"line {ln + 1}: mixed zero/nonzero indices")
        else:
            p, q, r, s = i - 1, j - 1, k - 1, l - 1
            for a, b, c, d in (
                (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
                (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
            ):
                eri[a, b, c, d] = value

    return MolecularIntegrals(norb, h, eri, e_nuc, n_electrons=nelec, ms2=ms2)


def write_fcidump(ints: MolecularIntegrals, n_electrons: int | None = None,
                  ms2: int = 0) -> str:
    """Serialize integrals to FCIDUMP text (unique nonzero elements only)."""
    n = ints.n_spatial
    nelec = n_electrons if n_electrons is not None else (ints.n_electrons or 0)
    out = [f"&FCI NORB={n}, NELEC={nelec}, MS2={ms2},",
           " ORBSYM=" + "1," * n,
           " ISYM=1,",
           "&END"]

    def rec(v: float, i: int, j: int, k: int, l: int) -> str:
        return f"{v: .16e} {i:4d} {j:4d} {k:4d} {l:4d}"

    for p in range(n):
        for q in range(p + 1):
            pq = p * (p + 1) // 2 + q
            for r in range(p + 1):
                for s in range(r + 1):
                    rs = r * (r + 1) // 2 + s
                    if rs > pq:
                        continue
                    v = ints.eri[p, q, r, s]
                    if v != 0.0:
                        out.append(rec(v, p + 1, q + 1, r + 1, s + 1))
    for p in range(n):
        for q in range(p + 1):
            if ints.h[p, q] != 0.0:
                out.append(rec(ints.h[p, q], p + 1, q + 1, 0, 0))
    out.append(rec(ints.e_nuc, 0, 0, 0, 0))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# STO-3G s-Gaussian integrals

def boys0(x: float) -> float:
    """F0(x) = (1/2) sqrt(pi/x) erf(sqrt(x)), with the x -> 0 Taylor limit."""
    if x < 1e-12:
        return 1.0 - x / 3.0
    sx = math.sqrt(x)
    return 0.5 * math.sqrt(math.pi / x) * math.erf(sx)


def _contracted_s(center: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized STO-3G hydrogen 1s function: (exponents, coefficients, center).

    Primitive normalization is folded into the coefficients and the contracted
    function is rescaled to unit self-overlap.
    """
    a = np.array(STO3G_H_EXPONENTS)
    c = np.array(STO3G_H_COEFFS) * (2.0 * a / math.pi) ** 0.75
    p = a[:, None] + a[None, :]
    s_self = float(np.sum(c[:, None] * c[None, :] * (math.pi / p) ** 1.5))
    return a, c / math.sqrt(s_self), np.asarray(center, dtype=float)


def sto3g_hydrogen_integrals(centers_bohr: np.ndarray) -> MolecularIntegrals:
    """Integrals for hydrogen atoms at the given centers (bohr), one normalized
    STO-3G s function per atom, in the Lowdin-orthogonalized AO basis.
    """
    centers = np.atleast_2d(np.asarray(centers_bohr, dtype=float))
    n = centers.shape[0]
    basis = [_contracted_s(centers[i]) for i in range(n)]

    s_mat = np.zeros((n, n))
    t_mat = np.zeros((n, n))
    v_mat = np.zeros((n, n))
    for i in range(n):
        ai, ci, ri = basis[i]
        for j in range(i + 1):
            aj, cj, rj = basis[j]
            rab2 = float(np.dot(ri - rj, ri - rj))
            s = t = v = 0.0
            for ca, a in zip(ci, ai):
                for cb, b in zip(cj, aj):
                    p = a + b
                    mu = a * b / p
                    pref = ca * cb * math.exp(-mu * rab2)
                    s00 = pref * (math.pi / p) ** 1.5
                    s += s00
                    t += mu * (3.0 - 2.0 * mu * rab2) * s00
                    rp = (a * ri + b * rj) / p
                    for rc in centers:
                        rpc2 = float(np.dot(rp - rc, rp - rc))
                        v -= pref * (2.0 * math.pi / p) * boys0(p * rpc2)
            s_mat[i, j] = s_mat[j, i] = s
            t_mat[i, j] = t_mat[j, i] = t
            v_mat[i, j] = v_mat[j, i] = v

    eri = np.zeros((n, n, n, n))
    pair_list = [(i, j) for i in range(n) for j in range(i + 1)]
    for ij_idx, (i, j) in enumerate(pair_list):
        ai, ci, ri = basis[i]
        aj, cj, rj = basis[j]
        rab2 = float(np.dot(ri - rj, ri - rj))
        for kl_idx in range(ij_idx + 1):
            k, l = pair_list[kl_idx]
            ak, ck, rk = basis[k]
            al, cl, rl = basis[l]
            rcd2 = float(np.dot(rk - rl, rk - rl))
            val = 0.0
            for ca, a in zip(ci, ai):
                for cb, b in zip(cj, aj):
                    p = a + b
                    kab = math.exp(-a * b / p * rab2)
                    rp = (a * ri + b * rj) / p
                    for cc, c in zip(ck, ak):
                        for cd, d in zip(cl, al):
                            q = c + d
                            kcd = math.exp(-c * d / q * rcd2)
                            rq = (c * rk + d * rl) / q
                            rpq2 = float(np.dot(rp - rq, rp - rq))
                            val += (ca * cb * cc * cd * kab * kcd
                                    * 2.0 * math.pi ** 2.5
                                    / (p * q * math.sqrt(p + q))
                                    * boys0(p * q / (p + q) * rpq2))
            for a_, b_, c_, d_ in (
                (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
            ):
                eri[a_, b_, c_, d_] = val

    e_nuc = 0.0
    for i in range(n):
        for j in range(i):
            e_nuc += 1.0 / float(np.linalg.norm(centers[i] - centers[j]))

    # Lowdin orthogonalization: X = S^{-1/2}, h' = X h X, (pq|rs)' likewise.
    w, u = np.linalg.eigh(s_mat)
    if np.min(w) < 1e-10:
        raise ValueError("AO overlap matrix is numerically singular")
    x = (u / np.sqrt(w)) @ u.T
    h = x @ (t_mat + v_mat) @ x
    g = np.einsum("pi,qj,rk,sl,ijkl->pqrs", x, x, x, x, eri, optimize=True)
    h = 0.5 * (h + h.T)

    return MolecularIntegrals(n, h, g, e_nuc, n_electrons=n)


def hydrogen_chain_sto3g(n_atoms: int, spacing: float) -> MolecularIntegrals:
    """Equally spaced hydrogen chain, spacing in Angstrom, STO-3G basis."""
    if not 2 <= n_atoms <= 8:
        raise ValueError("hydrogen chains support 2 to 8 atoms")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    d = spacing / ANGSTROM_PER_BOHR
    centers = np.array([[0.0, 0.0, k * d] for k in range(n_atoms)])
    return sto3g_hydrogen_integrals(centers)


# ---------------------------------------------------------------------------
# Hubbard chains

def hubbard_chain(n_sites: int, t: float, u: float, periodic: bool = False) -> MolecularIntegrals:
    """Hubbard chain as spatial-orbital integrals: h(i, i+-1) = -t and
    (ii|ii) = u.  The periodic bond accumulates onto existing elements, so a
    periodic two-site chain has hopping -2t.
    """
    if n_sites < 2:
        raise ValueError("need at least 2 sites")
    h = np.zeros((n_sites, n_sites))
    for i in range(n_sites - 1):
        h[i, i + 1] -= t
        h[i + 1, i] -= t
    if periodic:
        h[0, n_sites - 1] -= t
        h[n_sites - 1, 0] -= t
    eri = np.zeros((n_sites,) * 4)
    for i in range(n_sites):
        eri[i, i, i, i] = u
    return MolecularIntegrals(n_sites, h, eri, 0.0, n_electrons=n_sites)


# ---------------------------------------------------------------------------
# Spin-orbital lifting and the pair-space energy functional

def spin_orbital_integrals(ints: MolecularIntegrals) -> tuple[np.ndarray, np.ndarray]:
    """Lift to spin orbitals: returns (h_so, g_anti) where h_so is the one-body
    matrix and g_anti[p,q,r,s] = <pq||rs> the antisymmetrized physicists'
    two-electron integrals.
    """
    n = ints.n_spatial
    eye2 = np.eye(2)
    h_so = np.kron(ints.h, eye2)
    phys = ints.eri.transpose(0, 2, 1, 3)  # <PQ|RS> = (PR|QS)
    g = np.einsum("PQRS,st,uv->PsQuRtSv", phys, eye2, eye2).reshape((2 * n,) * 4)
    return h_so, np.ascontiguousarray(g - g.transpose(0, 1, 3, 2))


def pair_indices(n_spin: int) -> list[tuple[int, int]]:
    """Lexicographic spin-orbital pairs (i < j); the packed pair-space order."""
    return [(i, j) for i in range(n_spin) for j in range(i + 1, n_spin)]


def reduced_hamiltonian(ints: MolecularIntegrals, n_electrons: int) -> ReducedHamiltonian:
    """Pack the Hamiltonian into the antisymmetric pair space.

    k2[(ij),(kl)] = <ij||kl> + (d_ik h_jl + d_jl h_ik - d_il h_jk - d_jk h_il)/(N-1),
    so that sum_{IJ} k2[I,J] D[I,J] + e_nuc is the energy of any N-electron
    2-RDM with packed trace N(N-1)/2.
    """
    if n_electrons < 2:
        raise ValueError("need at least 2 electrons")
    h_so, g_anti = spin_orbital_integrals(ints)
    pairs = pair_indices(2 * ints.n_spatial)
    npair = len(pairs)
    k2 = np.zeros((npair, npair))
    w = 1.0 / (n_electrons - 1)
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            v = g_anti[i, j, k, l]
            if i == k:
                v += w * h_so[j, l]
            if j == l:
                v += w * h_so[i, k]
            if i == l:
                v -= w * h_so[j, k]
            if j == k:
                v -= w * h_so[i, l]
            k2[a, b] = v
    k2 = 0.5 * (k2 + k2.T)
    return ReducedHamiltonian(2 * ints.n_spatial, k2, ints.e_nuc, n_electrons)


def energy_from_2rdm(red: ReducedHamiltonian, d2_packed: np.ndarray) -> float:
    """Energy of a packed 2-RDM under the reduced Hamiltonian."""
    return float(np.sum(red.k2 * d2_packed)) + red.e_nuc


# ---------------------------------------------------------------------------
# System registry

_H_CHAIN_RE = re.compile(r"^h(\d+)@([0-9.eE+-]+)$")
_HUBBARD_RE = re.compile(r"^hubbard:(\d+):t=([0-9.eE+-]+):u=([0-9.eE+-]+)(:periodic)?$")


def system_from_key(key: str) -> tuple[MolecularIntegrals, int]:
    """Resolve a system key to (integrals, electron count).

    Keys: ``h4@1.0`` (hydrogen chain, spacing in Angstrom),
    ``hubbard:6:t=1:u=4[:periodic]`` (half filling), ``fcidump:<path>``.
    """
    m = _H_CHAIN_RE.match(key)
    if m:
        n = int(m.group(1))
        return hydrogen_chain_sto3g(n, float(m.group(2))), n
    m = _HUBBARD_RE.match(key)
    if m:
        n = int(m.group(1))
        ints = hubbard_chain(n, float(m.group(2)), float(m.group(3)),
                             periodic=m.group(4) is not None)
        return ints, n
    if key.startswith("fcidump:"):
        path = key[len("fcidump:"):]
        with open(path, "rb") as fh:
            ints = parse_fcidump(fh.read())
        if ints.n_electrons is None:
            raise ValueError(f"{path}: FCIDUMP header lacks NELEC")
        return ints, ints.n_electrons
    raise KeyError(f"unknown system key: {key!r}")

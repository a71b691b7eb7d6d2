"""Exact diagonalization oracle: determinant enumeration, Slater-Condon
Hamiltonian assembly, and reduced density matrices.

Determinants are stored as (alpha, beta) occupation bitmasks over spatial
orbitals.  For fermionic phases the two masks are merged into one bitstring
over spin orbitals ordered by the project-wide index p = 2*spatial + spin,
and the sign of a ladder operator at p is (-1)^(occupied bits below p).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .hamiltonians import MolecularIntegrals, pair_indices, spin_orbital_integrals

__all__ = [
    "DeterminantBasis",
    "FCISolution",
    "TwoRDM",
    "enumerate_determinants",
    "build_hamiltonian",
    "ground_state",
    "solve_system",
    "compute_2rdm",
    "compute_q2_direct",
    "compute_g2_direct",
    "contract_to_1rdm",
    "unpack_2rdm",
    "apply_operator_string",
]


@dataclass
class DeterminantBasis:
    n_spatial: int
    n_alpha: int
    n_beta: int
    dets: list[tuple[int, int]]

    def __post_init__(self) -> None:
        self._spin_masks = [
            _interleave(a, b, self.n_spatial) for a, b in self.dets
        ]
        self._index = {m: i for i, m in enumerate(self._spin_masks)}

    @property
    def n_spin(self) -> int:
        return 2 * self.n_spatial

    @property
    def size(self) -> int:
        return len(self.dets)

    @property
    def spin_masks(self) -> list[int]:
        """Combined spin-orbital occupation masks, bit p = orbital 2*spatial + spin."""
        return self._spin_masks

    def index_of(self, spin_mask: int) -> int | None:
        return self._index.get(spin_mask)


@dataclass
class FCISolution:
    """One eigenpair of the Hamiltonian over a determinant basis."""

    energy: float
    ci: np.ndarray
    basis: DeterminantBasis


@dataclass
class TwoRDM:
    """2-RDM on the antisymmetric pair space.

    ``data[(i<j), (k<l)]`` holds <a+_i a+_j a_l a_k> with pairs enumerated
    lexicographically; the packed trace of an N-electron state is N(N-1)/2.
    """

    n_spin: int
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        npair = self.n_spin * (self.n_spin - 1) // 2
        if self.data.shape != (npair, npair):
            raise ValueError("packed matrix does not match n_spin")
        if np.max(np.abs(self.data - self.data.T), initial=0.0) > 1e-12:
            raise ValueError("packed 2-RDM is not symmetric")
        self.data = 0.5 * (self.data + self.data.T)

    @property
    def trace(self) -> float:
        return float(np.trace(self.data))


def _interleave(amask: int, bmask: int, n_spatial: int) -> int:
    m = 0
    for p in range(n_spatial):
        if (amask >> p) & 1:
            m |= 1 << (2 * p)
        if (bmask >> p) & 1:
            m |= 1 << (2 * p + 1)
    return m


def _annihilate(mask: int, p: int) -> tuple[int, int]:
    """(new_mask, sign); sign 0 when the orbital is empty."""
    bit = 1 << p
    if not mask & bit:
        return 0, 0
    sign = -1 if (mask & (bit - 1)).bit_count() & 1 else 1
    return mask & ~bit, sign


def _create(mask: int, p: int) -> tuple[int, int]:
    bit = 1 << p
    if mask & bit:
        return 0, 0
    sign = -1 if (mask & (bit - 1)).bit_count() & 1 else 1
    return mask | bit, sign


def _occupied(mask: int) -> list[int]:
    occ = []
    p = 0
    while mask:
        if mask & 1:
            occ.append(p)
        mask >>= 1
        p += 1
    return occ


def enumerate_determinants(n_spatial: int, n_alpha: int, n_beta: int) -> DeterminantBasis:
    """All determinants with the given occupations, ordered by ascending
    (alpha, beta) mask value."""
    if not (0 <= n_alpha <= n_spatial and 0 <= n_beta <= n_spatial):
        raise ValueError("electron count exceeds orbital count")

    def masks(k: int) -> list[int]:
        return sorted(sum(1 << p for p in occ) for occ in combinations(range(n_spatial), k))

    amasks, bmasks = masks(n_alpha), masks(n_beta)
    dets = [(a, b) for a in amasks for b in bmasks]
    return DeterminantBasis(n_spatial, n_alpha, n_beta, dets)


def build_hamiltonian(ints: MolecularIntegrals, basis: DeterminantBasis) -> np.ndarray:
    """Dense Hamiltonian by Slater-Condon rules.

    Matrix elements come from H = sum h_pq a+_p a_q
    + sum_{p<q, r<s} <pq||rs> a+_p a+_q a_s a_r, with phases evaluated by
    explicit ladder-operator application on the bitmasks.
    """
    if ints.n_spatial != basis.n_spatial:
        raise ValueError("integral/basis dimension mismatch")
    h_so, g_anti = spin_orbital_integrals(ints)
    r = basis.n_spin
    dim = basis.size
    ham = np.zeros((dim, dim))

    for i, mask in enumerate(basis.spin_masks):
        occ = _occupied(mask)
        occ_arr = np.array(occ, dtype=int)
        diag = float(h_so[occ_arr, occ_arr].sum())
        if len(occ) > 1:
            sub = g_anti[np.ix_(occ_arr, occ_arr, occ_arr, occ_arr)]
            diag += 0.5 * float(np.einsum("pqpq->", sub))
        ham[i, i] = diag

        virt = [p for p in range(r) if not (mask >> p) & 1]

        # singles: spin is conserved, so only same-spin replacements survive
        for a in occ:
            for b in virt:
                if (a ^ b) & 1:
                    continue
                m1, s1 = _annihilate(mask, a)
                m2, s2 = _create(m1, b)
                j = basis.index_of(m2)
                if j is None or j <= i:
                    continue
                val = h_so[b, a]
                for c in occ:
                    if c != a:
                        val += g_anti[b, c, a, c]
                ham[j, i] = ham[i, j] = s1 * s2 * val

        # doubles
        for a, b in combinations(occ, 2):
            m1, s1 = _annihilate(mask, a)
            m2, s2 = _annihilate(m1, b)
            for c, d in combinations(virt, 2):
                val = g_anti[c, d, a, b]
                if val == 0.0:
                    continue
                m3, s3 = _create(m2, d)
                m4, s4 = _create(m3, c)
                j = basis.index_of(m4)
                if j is None or j <= i:
                    continue
                ham[j, i] = ham[i, j] = s1 * s2 * s3 * s4 * val

    return ham


def ground_state(ham: np.ndarray, basis: DeterminantBasis) -> FCISolution:
    """Lowest eigenpair; the first CI coefficient larger than 1e-12 in
    magnitude is made positive so degenerate solvers stay deterministic."""
    w, v = np.linalg.eigh(ham)
    ci = v[:, 0].copy()
    for c in ci:
        if abs(c) > 1e-12:
            if c < 0:
                ci = -ci
            break
    return FCISolution(float(w[0]), ci, basis)


def solve_system(ints: MolecularIntegrals, n_electrons: int) -> FCISolution:
    """Enumerate, build, and diagonalize in one call (n_alpha = ceil(N/2))."""
    n_beta = n_electrons // 2
    n_alpha = n_electrons - n_beta
    basis = enumerate_determinants(ints.n_spatial, n_alpha, n_beta)
    return ground_state(build_hamiltonian(ints, basis), basis)


# ---------------------------------------------------------------------------
# Operator strings and reduced density matrices

def _apply_string(state: dict[int, float], ops: list[tuple[int, bool]]) -> dict[int, float]:
    """Apply a ladder-operator string (rightmost operator first) to a
    mask-amplitude state; ops entries are (orbital, is_creation)."""
    for p, dagger in reversed(ops):
        new: dict[int, float] = {}
        for mask, amp in state.items():
            m, s = (_create if dagger else _annihilate)(mask, p)
            if s:
                new[m] = new.get(m, 0.0) + s * amp
        state = new
    return state


def apply_operator_string(sol: FCISolution, ops: list[tuple[int, bool]]) -> float:
    """<Psi| O |Psi> for the ladder-operator string O, written left to right."""
    state = {m: float(c) for m, c in zip(sol.basis.spin_masks, sol.ci) if c != 0.0}
    out = _apply_string(state, ops)
    acc = 0.0
    for mask, amp in out.items():
        i = sol.basis.index_of(mask)
        if i is not None:
            acc += sol.ci[i] * amp
    return acc


def _gram_of_strings(sol: FCISolution, strings: list[list[tuple[int, bool]]]) -> np.ndarray:
    """Gram matrix <phi_a|phi_b> of phi_a = O_a |Psi>; exactly symmetric PSD."""
    state = {m: float(c) for m, c in zip(sol.basis.spin_masks, sol.ci) if c != 0.0}
    vecs = [_apply_string(state, ops) for ops in strings]
    mask_index: dict[int, int] = {}
    for vec in vecs:
        for mask in vec:
            mask_index.setdefault(mask, len(mask_index))
    phi = np.zeros((len(strings), max(len(mask_index), 1)))
    for a, vec in enumerate(vecs):
        for mask, amp in vec.items():
            phi[a, mask_index[mask]] = amp
    return phi @ phi.T


def compute_2rdm(sol: FCISolution) -> TwoRDM:
    """Packed 2-RDM via pair annihilation: D[(ij),(kl)] = <a_j a_i Psi|a_l a_k Psi>."""
    r = sol.basis.n_spin
    strings = [[(l, False), (k, False)] for k, l in pair_indices(r)]
    return TwoRDM(r, _gram_of_strings(sol, strings))


def compute_q2_direct(sol: FCISolution) -> np.ndarray:
    """Hole-pair metric on the packed pair space, evaluated directly as
    Q[(ij),(kl)] = <Psi| a_i a_j a+_l a+_k |Psi>."""
    r = sol.basis.n_spin
    strings = [[(l, True), (k, True)] for k, l in pair_indices(r)]
    return _gram_of_strings(sol, strings)


def compute_g2_direct(sol: FCISolution) -> np.ndarray:
    """Particle-hole metric on the full r^2 space, evaluated directly as
    G[(pq),(rs)] = <Psi| a+_p a_q a+_s a_r |Psi> with row index p*r + q."""
    r = sol.basis.n_spin
    strings = [[(q, True), (p, False)] for p in range(r) for q in range(r)]
    return _gram_of_strings(sol, strings)


def unpack_2rdm(d2: TwoRDM) -> np.ndarray:
    """Full antisymmetric 4-index tensor D[i,j,k,l] = <a+_i a+_j a_l a_k>."""
    r = d2.n_spin
    d4 = np.zeros((r, r, r, r))
    pairs = pair_indices(r)
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            v = d2.data[a, b]
            d4[i, j, k, l] = v
            d4[j, i, k, l] = -v
            d4[i, j, l, k] = -v
            d4[j, i, l, k] = v
    return d4


def contract_to_1rdm(d2: TwoRDM, n_electrons: int) -> np.ndarray:
    """1-RDM from the 2-RDM: D1[i,k] = sum_j D[ij,kj] / (N-1)."""
    if n_electrons < 2:
        raise ValueError("need at least 2 electrons")
    d4 = unpack_2rdm(d2)
    return np.einsum("ijkj->ik", d4) / (n_electrons - 1)

import math

import numpy as np
import pytest

from shadowrdm.fci import (DeterminantBasis, FCISolution, TwoRDM,
                           apply_operator_string, build_hamiltonian,
                           compute_2rdm, compute_g2_direct, compute_q2_direct,
                           contract_to_1rdm, enumerate_determinants,
                           ground_state, solve_system, unpack_2rdm)
from shadowrdm.fci import _annihilate, _create
from shadowrdm.hamiltonians import (MolecularIntegrals, hubbard_chain,
                                    hydrogen_chain_sto3g, pair_indices,
                                    spin_orbital_integrals)

HUBBARD_DIMER_E = (4.0 - math.sqrt(32.0)) / 2.0


def brute_force_hamiltonian(ints, basis):
    """Independent oracle: apply the full second-quantized operator sum to
    each determinant, no Slater-Condon shortcuts."""
    h_so, g_anti = spin_orbital_integrals(ints)
    r = basis.n_spin
    dim = basis.size
    ham = np.zeros((dim, dim))
    for col, mask in enumerate(basis.spin_masks):
        out = {}
        for p in range(r):
            for q in range(r):
                if h_so[p, q] == 0.0:
                    continue
                m1, s1 = _annihilate(mask, q)
                if not s1:
                    continue
                m2, s2 = _create(m1, p)
                if not s2:
                    continue
                out[m2] = out.get(m2, 0.0) + s1 * s2 * h_so[p, q]
        pairs = pair_indices(r)
        for rr, ss in pairs:
            m1, s1 = _annihilate(mask, rr)
            if not s1:
                continue
            m2, s2 = _annihilate(m1, ss)
            if not s2:
                continue
            for pp, qq in pairs:
                val = g_anti[pp, qq, rr, ss]
                if val == 0.0:
                    continue
                m3, s3 = _create(m2, qq)
                if not s3:
                    continue
                m4, s4 = _create(m3, pp)
                if not s4:
                    continue
                out[m4] = out.get(m4, 0.0) + s1 * s2 * s3 * s4 * val
        for m_out, amp in out.items():
            row = basis.index_of(m_out)
            if row is not None:
                ham[row, col] += amp
    return ham


def random_integrals(rng, n):
    h = rng.standard_normal((n, n))
    h = 0.5 * (h + h.T)
    eri = rng.standard_normal((n, n, n, n))
    eri = eri + eri.transpose(1, 0, 2, 3)
    eri = eri + eri.transpose(0, 1, 3, 2)
    eri = eri + eri.transpose(2, 3, 0, 1)
    return MolecularIntegrals(n, h, eri, 0.0)


class TestEnumeration:
    @pytest.mark.parametrize("rs, na, nb, count", [
        (2, 1, 1, 4), (4, 2, 2, 36), (8, 4, 4, 4900),
    ])
    def test_counts(self, rs, na, nb, count):
        basis = enumerate_determinants(rs, na, nb)
        assert basis.size == count

    def test_popcounts_and_order(self):
        basis = enumerate_determinants(4, 2, 1)
        for a, b in basis.dets:
            assert bin(a).count("1") == 2
            assert bin(b).count("1") == 1
        assert basis.dets == sorted(basis.dets)

    def test_rejects_overfilling(self):
        with pytest.raises(ValueError):
            enumerate_determinants(2, 3, 0)


class TestBuildHamiltonian:
    def test_zero_integrals(self):
        ints = MolecularIntegrals(3, np.zeros((3, 3)), np.zeros((3,) * 4), 0.0)
        basis = enumerate_determinants(3, 1, 1)
        assert not build_hamiltonian(ints, basis).any()

    def test_hubbard_dimer_spectrum(self):
        ints = hubbard_chain(2, 1.0, 4.0)
        basis = enumerate_determinants(2, 1, 1)
        ham = build_hamiltonian(ints, basis)
        assert np.max(np.abs(ham - ham.T)) <= 1e-12
        w = np.linalg.eigvalsh(ham)
        u = 4.0
        expected = sorted([0.0, u, (u - math.sqrt(u * u + 16)) / 2,
                           (u + math.sqrt(u * u + 16)) / 2])
        assert np.allclose(w, expected, atol=1e-10)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_bruteforce_operator_application(self, seed):
        rng = np.random.default_rng(seed)
        ints = random_integrals(rng, 3)
        basis = enumerate_determinants(3, 1, 1)
        ham = build_hamiltonian(ints, basis)
        oracle = brute_force_hamiltonian(ints, basis)
        assert np.max(np.abs(ham - oracle)) <= 1e-12

    def test_matches_bruteforce_with_more_electrons(self):
        rng = np.random.default_rng(7)
        ints = random_integrals(rng, 3)
        basis = enumerate_determinants(3, 2, 1)
        assert np.max(np.abs(build_hamiltonian(ints, basis)
                             - brute_force_hamiltonian(ints, basis))) <= 1e-12


class TestGroundState:
    def test_hubbard_dimer_analytic(self):
        sol = solve_system(hubbard_chain(2, 1.0, 4.0), 2)
        assert abs(sol.energy - HUBBARD_DIMER_E) <= 1e-10

    def test_tight_binding_dimer(self):
        # u = 0: two electrons in the bonding orbital, E = 2(-t)
        sol = solve_system(hubbard_chain(2, 1.0, 0.0), 2)
        assert abs(sol.energy - (-2.0)) <= 1e-12

    def test_residual_and_norm(self):
        ints = hydrogen_chain_sto3g(3, 0.9)
        basis = enumerate_determinants(3, 2, 1)
        ham = build_hamiltonian(ints, basis)
        sol = ground_state(ham, basis)
        assert abs(np.linalg.norm(sol.ci) - 1.0) <= 1e-12
        assert np.linalg.norm(ham @ sol.ci - sol.energy * sol.ci) <= 1e-8

    def test_zero_matrix_sign_convention(self):
        basis = enumerate_determinants(2, 1, 1)
        sol = ground_state(np.zeros((4, 4)), basis)
        assert sol.energy == 0.0
        first = next(c for c in sol.ci if abs(c) > 1e-12)
        assert first > 0

    def test_variational_bound_vs_diagonal(self):
        ints = hydrogen_chain_sto3g(4, 1.0)
        basis = enumerate_determinants(4, 2, 2)
        ham = build_hamiltonian(ints, basis)
        assert ground_state(ham, basis).energy <= np.min(np.diag(ham)) + 1e-12


def single_determinant_solution(rs, na, nb):
    basis = enumerate_determinants(rs, na, nb)
    ci = np.zeros(basis.size)
    ci[0] = 1.0
    return FCISolution(0.0, ci, basis)


class TestTwoRdm:
    def test_single_determinant_is_pair_indicator(self):
        sol = single_determinant_solution(3, 2, 1)
        occ_mask = sol.basis.spin_masks[0]
        d2 = compute_2rdm(sol)
        for t, (i, j) in enumerate(pair_indices(6)):
            both = bool((occ_mask >> i) & 1) and bool((occ_mask >> j) & 1)
            assert d2.data[t, t] == pytest.approx(1.0 if both else 0.0, abs=1e-14)
        off = d2.data - np.diag(np.diag(d2.data))
        assert np.max(np.abs(off)) <= 1e-14

    def test_trace_identity(self):
        sol = solve_system(hydrogen_chain_sto3g(4, 1.0), 4)
        d2 = compute_2rdm(sol)
        assert abs(d2.trace - 4 * 3 / 2) <= 1e-10

    def test_psd(self):
        sol = solve_system(hubbard_chain(3, 1.0, 2.0), 3)
        w = np.linalg.eigvalsh(compute_2rdm(sol).data)
        assert w.min() >= -1e-10

    def test_antisymmetry_of_unpacked(self):
        sol = solve_system(hubbard_chain(2, 1.0, 4.0), 2)
        d4 = unpack_2rdm(compute_2rdm(sol))
        assert np.max(np.abs(d4 + d4.transpose(1, 0, 2, 3))) <= 1e-12
        assert np.max(np.abs(d4 + d4.transpose(0, 1, 3, 2))) <= 1e-12

    def test_validation_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            TwoRDM(4, np.arange(36.0).reshape(6, 6))


class TestOneRdm:
    def test_single_determinant_occupations(self):
        sol = single_determinant_solution(3, 2, 1)
        d1 = contract_to_1rdm(compute_2rdm(sol), 3)
        occ_mask = sol.basis.spin_masks[0]
        expected = np.diag([float((occ_mask >> p) & 1) for p in range(6)])
        assert np.allclose(d1, expected, atol=1e-12)

    def test_trace_is_electron_count(self):
        sol = solve_system(hydrogen_chain_sto3g(4, 1.0), 4)
        d1 = contract_to_1rdm(compute_2rdm(sol), 4)
        assert abs(np.trace(d1) - 4.0) <= 1e-10

    def test_matches_direct_expectation(self):
        sol = solve_system(hubbard_chain(3, 1.0, 2.0), 3)
        d1 = contract_to_1rdm(compute_2rdm(sol), 3)
        r = 6
        direct = np.array([[apply_operator_string(sol, [(i, True), (k, False)])
                            for k in range(r)] for i in range(r)])
        assert np.max(np.abs(d1 - direct)) <= 1e-12

    def test_singlet_spin_blocks_equal(self):
        sol = solve_system(hydrogen_chain_sto3g(2, 0.9), 2)
        d1 = contract_to_1rdm(compute_2rdm(sol), 2)
        aa = d1[0::2, 0::2]
        bb = d1[1::2, 1::2]
        ab = d1[0::2, 1::2]
        assert np.max(np.abs(aa - bb)) <= 1e-10
        assert np.max(np.abs(ab)) <= 1e-10

    def test_rejects_single_electron(self):
        sol = solve_system(hubbard_chain(2, 1.0, 4.0), 2)
        with pytest.raises(ValueError):
            contract_to_1rdm(compute_2rdm(sol), 1)


class TestDirectMetrics:
    def test_q2_direct_full_filling_vanishes(self):
        sol = single_determinant_solution(2, 2, 2)
        assert np.max(np.abs(compute_q2_direct(sol))) <= 1e-14

    def test_g2_direct_single_determinant_psd(self):
        sol = single_determinant_solution(3, 2, 1)
        w = np.linalg.eigvalsh(compute_g2_direct(sol))
        assert w.min() >= -1e-10

import math

import numpy as np
import pytest

from shadowrdm.fci import (FCISolution, TwoRDM, compute_2rdm,
                           compute_g2_direct, compute_q2_direct,
                           contract_to_1rdm, enumerate_determinants,
                           solve_system)
from shadowrdm.hamiltonians import (hubbard_chain, hydrogen_chain_sto3g,
                                    pair_indices, reduced_hamiltonian)
from shadowrdm.numerics import RngStream
from shadowrdm.rdm_sdp import (ConditionSet, ConstraintRow, RdmResult,
                               SDPBlock, SDPBuildError, SDPProblem,
                               SolverOptions, SolverStatus, build_sdp,
                               frobenius_error, map_d_to_g, map_d_to_q,
                               solve_sdp, sv2rdm, v2rdm)
from shadowrdm.shadows import (ShadowRecord, SpinRotationMode,
                               add_gaussian_noise, sample_shadow_ensemble)

HUBBARD_DIMER_E = (4.0 - math.sqrt(32.0)) / 2.0


@pytest.fixture(scope="module")
def dimer():
    ints = hubbard_chain(2, 1.0, 4.0)
    sol = solve_system(ints, 2)
    return reduced_hamiltonian(ints, 2), sol, compute_2rdm(sol)


def zero_rdm(r):
    npair = r * (r - 1) // 2
    return TwoRDM(r, np.zeros((npair, npair)))


class TestConditionSet:
    def test_parse(self):
        assert ConditionSet.parse("d") == ConditionSet(q=False, g=False)
        assert ConditionSet.parse("dq").label == "DQ"
        assert ConditionSet.parse("DQG").label == "DQG"

    def test_parse_rejects_unknown(self):
        with pytest.raises(ValueError):
            ConditionSet.parse("dg")


class TestMetricMaps:
    def test_q_vacuum_limit_is_pair_identity(self):
        r = 6
        q = map_d_to_q(zero_rdm(r), np.zeros((r, r)), 2)
        assert np.allclose(q, np.eye(r * (r - 1) // 2), atol=1e-14)

    def test_q_full_filling_vanishes(self):
        basis = enumerate_determinants(2, 2, 2)
        sol = FCISolution(0.0, np.ones(1), basis)
        d2 = compute_2rdm(sol)
        d1 = contract_to_1rdm(d2, 4)
        assert np.max(np.abs(map_d_to_q(d2, d1, 4))) <= 1e-12

    def test_g_zero_input_vanishes(self):
        r = 4
        assert not map_d_to_g(zero_rdm(r), np.zeros((r, r))).any()

    @pytest.mark.parametrize("system, n", [
        ("h2", 2), ("hubbard2", 2), ("hubbard3", 3),
    ])
    def test_maps_match_direct_operator_evaluation(self, system, n):
        ints = {"h2": hydrogen_chain_sto3g(2, 0.8),
                "hubbard2": hubbard_chain(2, 1.0, 4.0),
                "hubbard3": hubbard_chain(3, 1.0, 2.0)}[system]
        sol = solve_system(ints, n)
        d2 = compute_2rdm(sol)
        d1 = contract_to_1rdm(d2, n)
        assert np.max(np.abs(map_d_to_q(d2, d1, n) - compute_q2_direct(sol))) <= 1e-10
        assert np.max(np.abs(map_d_to_g(d2, d1) - compute_g2_direct(sol))) <= 1e-10

    def test_maps_are_linear_in_their_homogeneous_part(self):
        # the Q map is affine (constant pair-identity term); its homogeneous
        # part and the G map must be exactly linear
        rng = np.random.default_rng(0)
        r = 4
        npair = r * (r - 1) // 2

        def rand_pair():
            m = rng.standard_normal((npair, npair))
            d2 = TwoRDM(r, 0.5 * (m + m.T))
            d1 = rng.standard_normal((r, r))
            return d2, 0.5 * (d1 + d1.T)

        (da, d1a), (db, d1b) = rand_pair(), rand_pair()
        alpha, beta = 0.7, -1.3
        mix = TwoRDM(r, alpha * da.data + beta * db.data)
        d1mix = alpha * d1a + beta * d1b

        q0 = map_d_to_q(zero_rdm(r), np.zeros((r, r)), 2)
        lhs = map_d_to_q(mix, d1mix, 2) - q0
        rhs = (alpha * (map_d_to_q(da, d1a, 2) - q0)
               + beta * (map_d_to_q(db, d1b, 2) - q0))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12

        lhs_g = map_d_to_g(mix, d1mix)
        rhs_g = alpha * map_d_to_g(da, d1a) + beta * map_d_to_g(db, d1b)
        assert np.max(np.abs(lhs_g - rhs_g)) <= 1e-12


class TestBuildSdp:
    def test_minimal_problem(self, dimer):
        red, _, _ = dimer
        prob = build_sdp(red, ConditionSet(q=False, g=False), [])
        assert [b.name for b in prob.blocks] == ["D"]
        assert len(prob.equalities) == 1
        assert not prob.intervals

    def test_dqg_constraint_counts_h4(self):
        ints = hydrogen_chain_sto3g(4, 1.0)
        red = reduced_hamiltonian(ints, 4)
        d2 = compute_2rdm(solve_system(ints, 4))
        m = 3
        shadows = sample_shadow_ensemble(d2, m, SpinRotationMode.SPATIAL_REPLICATED,
                                         RngStream(0))
        prob = build_sdp(red, ConditionSet(q=True, g=True), shadows)
        r = 8
        npair = r * (r - 1) // 2
        assert [b.name for b in prob.blocks] == ["D", "Q", "G"]
        assert prob.block("Q").dim == npair
        assert prob.block("G").dim == r * r
        assert len(prob.equalities) == 1 + npair**2 + r**4 + m * npair
        assert not prob.intervals

    def test_noisy_shadows_become_intervals(self, dimer):
        red, _, d2 = dimer
        shadows = sample_shadow_ensemble(d2, 2, SpinRotationMode.SPATIAL_REPLICATED,
                                         RngStream(1))
        gen = RngStream(1).derived(7).generator()
        noisy = [add_gaussian_noise(s, 1e-3, gen) for s in shadows]
        prob = build_sdp(red, ConditionSet(q=True, g=True), noisy)
        r, npair = 4, 6
        assert len(prob.intervals) == 2 * npair
        assert len(prob.equalities) == 1 + npair**2 + r**4
        assert prob.block("slack").dim == 2 * len(prob.intervals)
        assert prob.block("slack").kind == "diag"

    def test_rejects_infeasible_upper_bound(self, dimer):
        red, _, d2 = dimer
        rec = sample_shadow_ensemble(d2, 1, SpinRotationMode.SPATIAL_REPLICATED,
                                     RngStream(2))[0]
        bad = ShadowRecord(rec.u.copy(), rec.values - 10.0,
                           np.full_like(rec.values, 1e-6))
        with pytest.raises(SDPBuildError):
            build_sdp(red, ConditionSet(), [bad])

    def test_fci_rdm_is_feasible(self, dimer):
        # every noiseless constraint built from the state's own measurements
        # is satisfied by the state's own blocks
        red, sol, d2 = dimer
        n = 2
        shadows = sample_shadow_ensemble(d2, 4, SpinRotationMode.FULL_SPIN_ORBITAL,
                                         RngStream(3))
        prob = build_sdp(red, ConditionSet(q=True, g=True), shadows)
        d1 = contract_to_1rdm(d2, n)
        blocks = {"D": d2.data, "Q": map_d_to_q(d2, d1, n), "G": map_d_to_g(d2, d1)}
        resid = [row.apply(blocks) - rhs for row, rhs in prob.equalities]
        assert np.max(np.abs(resid)) <= 1e-8


class TestSolveSdp:
    def test_analytic_feasibility_toy(self):
        row = ConstraintRow()
        row.add("X", 0, 0, 1.0)
        row.add("X", 1, 1, 1.0)
        prob = SDPProblem([SDPBlock("X", 2, "psd")],
                          {"X": np.array([[1.0, 0.0], [0.0, 0.0]])},
                          [(row, 1.0)])
        sol = solve_sdp(prob, SolverOptions(tol_primal=1e-10, tol_dual=1e-10))
        assert sol.status is SolverStatus.CONVERGED
        assert abs(sol.objective_value) <= 1e-7
        assert abs(sol.blocks["X"][1, 1] - 1.0) <= 1e-7

    def test_analytic_trace_toy(self):
        row = ConstraintRow()
        row.add("X", 0, 0, 1.0)
        row.add("X", 1, 1, 1.0)
        prob = SDPProblem([SDPBlock("X", 2, "psd")], {"X": np.diag([1.0, 2.0])},
                          [(row, 1.0)])
        sol = solve_sdp(prob, SolverOptions(tol_primal=1e-10, tol_dual=1e-10))
        assert sol.status is SolverStatus.CONVERGED
        assert abs(sol.objective_value - 1.0) <= 1e-7
        assert abs(sol.blocks["X"][0, 0] - 1.0) <= 1e-7

    def test_solver_certificate(self, dimer):
        # recompute all constraint residuals outside the solver
        red, _, d2 = dimer
        shadows = sample_shadow_ensemble(d2, 2, SpinRotationMode.SPATIAL_REPLICATED,
                                         RngStream(5))
        prob = build_sdp(red, ConditionSet(q=True, g=True), shadows)
        opts = SolverOptions()
        sol = solve_sdp(prob, opts)
        assert sol.status is SolverStatus.CONVERGED
        b_norm = 1.0 + np.linalg.norm([rhs for _, rhs in prob.equalities])
        resid = np.array([row.apply(sol.blocks) - rhs for row, rhs in prob.equalities])
        assert np.linalg.norm(resid) <= 10.0 * opts.tol_primal * b_norm
        for name in ("D", "Q", "G"):
            w = np.linalg.eigvalsh(sol.blocks[name])
            assert w.min() >= -1e-8

    def test_infeasible_flag_on_contradictory_duplicate(self, dimer):
        red, _, _ = dimer
        prob = build_sdp(red, ConditionSet(q=False, g=False), [])
        row = ConstraintRow()
        for t in range(6):
            row.add("D", t, t, 1.0)
        prob.equalities.append((row, 50.0))  # trace cannot be both 1 and 50
        sol = solve_sdp(prob, SolverOptions(max_iter=5000))
        assert sol.status is SolverStatus.INFEASIBLE

    def test_infeasible_flag_on_cone_conflict(self, dimer):
        # trace 1 but a diagonal element forced to 5: no PSD matrix qualifies
        red, _, _ = dimer
        prob = build_sdp(red, ConditionSet(q=False, g=False), [])
        row = ConstraintRow()
        row.add("D", 0, 0, 1.0)
        prob.equalities.append((row, 5.0))
        sol = solve_sdp(prob, SolverOptions(max_iter=8000))
        assert sol.status is SolverStatus.INFEASIBLE

    def test_debug_dump(self, dimer, tmp_path):
        import json
        red, _, _ = dimer
        prob = build_sdp(red, ConditionSet(q=False, g=False), [])
        path = tmp_path / "dump.json"
        solve_sdp(prob, SolverOptions(debug_json=str(path)))
        doc = json.loads(path.read_text())
        assert doc["n_equalities"] == 1
        assert doc["status"] == "Converged"
        assert len(doc["residual_history"]) > 0


class TestDrivers:
    def test_v2rdm_dimer_matches_fci(self, dimer):
        red, sol_fci, _ = dimer
        res = v2rdm(red, ConditionSet(q=True, g=True))
        assert isinstance(res, RdmResult)
        assert res.solution.status is SolverStatus.CONVERGED
        assert abs(res.energy - HUBBARD_DIMER_E) <= 1e-4
        assert abs(res.d2.trace - 1.0) <= 1e-5

    def test_sv2rdm_empty_equals_v2rdm_bit_for_bit(self, dimer):
        red, _, _ = dimer
        a = v2rdm(red, ConditionSet(q=True, g=True))
        b = sv2rdm(red, ConditionSet(q=True, g=True), [])
        assert a.energy == b.energy
        assert np.array_equal(a.d2.data, b.d2.data)
        assert a.solution.iterations == b.solution.iterations

    def test_sv2rdm_with_shadows_stays_variational(self, dimer):
        red, sol_fci, d2 = dimer
        shadows = sample_shadow_ensemble(d2, 3, SpinRotationMode.SPATIAL_REPLICATED,
                                         RngStream(6))
        res = sv2rdm(red, ConditionSet(q=True, g=True), shadows)
        assert res.energy <= sol_fci.energy + 1e-5


class TestFrobeniusError:
    def test_zero_for_equal_inputs(self, dimer):
        _, _, d2 = dimer
        assert frobenius_error(d2, d2) == 0.0

    def test_scale_invariance(self, dimer):
        _, _, d2 = dimer
        scaled = TwoRDM(d2.n_spin, 2.0 * d2.data)
        assert frobenius_error(d2, scaled) <= 1e-15

    def test_zero_trace_rejected(self, dimer):
        _, _, d2 = dimer
        with pytest.raises(ValueError):
            frobenius_error(d2, zero_rdm(d2.n_spin))

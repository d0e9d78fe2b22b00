"""Solver tests: saddle solves, active-set loops, Newton stepping, stability estimate."""
from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from igacontact.assembly import (
    assemble_load,
    assemble_stiffness,
    dirichlet_on_face,
    merge_constraints,
)
from igacontact.benchmarks import (
    RunConfig,
    build_hertz2d_problem,
    build_large_deformation_problem,
    quarter_disc_level_patch,
)
from igacontact.contact import (
    GapField,
    coupling_matrix,
    multiplier_basis,
    scalar_coupling_and_masses,
    weighted_gap,
)
from igacontact.geometry import extract_trace, face_id, unit_square_patch
from igacontact.materials import LinearMaterial
from igacontact.solver import (
    SmallDeformationProblem,
    SolveSettings,
    SolverError,
    complementarity_ok,
    inf_sup_estimate,
    saddle_solve,
    solve_large_deformation,
    solve_small_deformation,
)
from igacontact.verification import arc_coordinate_2d, hertz_2d

MAT = LinearMaterial(1.0, 0.3)


def square_contact_problem(n=3, plane_offset=0.0, traction=(0.0, -0.05), fix_top=False):
    """Unit square over the rigid plane y = plane_offset (negative gap none).

    Side edges roll (u_x = 0); optionally the top edge is clamped to keep
    the stiffness nonsingular for separation tests.
    """
    patch = unit_square_patch(2, n)
    system = assemble_stiffness(patch, MAT)
    system.load = assemble_load(patch, tractions={face_id(1, 1): np.array(traction)})
    constraints = merge_constraints(
        dirichlet_on_face(patch, face_id(0, 0), component=0),
        dirichlet_on_face(patch, face_id(0, 1), component=0),
    )
    if fix_top:
        constraints = merge_constraints(
            constraints, dirichlet_on_face(patch, face_id(1, 1), component=1)
        )
    system.constraints = constraints
    normal = np.array([0.0, 1.0])
    trace = extract_trace(patch, face_id(1, 0), rigid_normal=normal)
    basis = multiplier_basis(trace)
    gap = GapField(trace=trace, normal=normal, offset=plane_offset)
    g0 = gap.gap_at(basis.quadrature.params)
    problem = SmallDeformationProblem(
        system=system,
        coupling=coupling_matrix(basis, 2, patch.space.dim),
        gap_integrals=weighted_gap(g0, basis) * basis.measures,
        measures=basis.measures,
    )
    return problem, patch, basis


class TestSaddleSolve:
    def test_empty_active_set_reduces_to_elasticity(self):
        K = sp.csr_matrix(np.diag([2.0, 3.0]))
        F = np.array([4.0, 9.0])
        u, lam = saddle_solve(K, F, sp.csr_matrix((0, 2)))
        np.testing.assert_allclose(u, [2.0, 3.0], atol=1e-14)
        assert lam.size == 0

    def test_one_dof_spring_reaction(self):
        K = sp.csr_matrix(np.array([[1.0]]))
        B = sp.csr_matrix(np.array([[1.0]]))
        u, lam = saddle_solve(K, np.array([-1.0]), B, np.zeros(1))
        assert abs(u[0]) <= 1e-14
        assert abs(lam[0] + 1.0) <= 1e-14

    def test_matches_dense_schur_oracle(self):
        rng = np.random.default_rng(31)
        A = rng.normal(size=(6, 6))
        K = A @ A.T + 6 * np.eye(6)
        B = rng.normal(size=(2, 6))
        F = rng.normal(size=6)
        g = rng.normal(size=2)
        # dense block-elimination oracle
        Kinv_F = sla.solve(K, F)
        Kinv_Bt = sla.solve(K, B.T)
        S = B @ Kinv_Bt
        lam_oracle = sla.solve(S, B @ Kinv_F - g)
        u_oracle = Kinv_F - Kinv_Bt @ lam_oracle
        u, lam = saddle_solve(sp.csr_matrix(K), F, sp.csr_matrix(B), g)
        np.testing.assert_allclose(u, u_oracle, atol=1e-10)
        np.testing.assert_allclose(lam, lam_oracle, atol=1e-10)

    def test_residual_invariant(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(8, 8))
        K = sp.csr_matrix(A @ A.T + 8 * np.eye(8))
        B = sp.csr_matrix(rng.normal(size=(3, 8)))
        F = rng.normal(size=8)
        g = rng.normal(size=3)
        u, lam = saddle_solve(K, F, B, g)
        mat = sp.bmat([[K, B.T], [B, None]]).tocsr()
        x = np.concatenate([u, lam])
        rhs = np.concatenate([F, g])
        assert np.linalg.norm(mat @ x - rhs) <= 1e-9 * np.linalg.norm(rhs)

    def test_rank_deficient_active_block_reported(self):
        K = sp.csr_matrix(np.eye(3))
        B = sp.csr_matrix(np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
        with pytest.raises(SolverError, match="rank-deficient"):
            saddle_solve(K, np.zeros(3), B, np.zeros(2))


class TestSmallDeformation:
    def test_pull_away_converges_in_one_iteration_empty_set(self):
        problem, _, _ = square_contact_problem(
            n=2, plane_offset=-0.1, traction=(0.0, 0.05), fix_top=True
        )
        bundle = solve_small_deformation(problem)
        assert bundle.converged
        assert bundle.active.sum() == 0
        assert len(bundle.iterations) == 1
        np.testing.assert_array_equal(bundle.lam, 0.0)

    def test_flat_punch_uniform_pressure(self):
        P = 0.05
        problem, patch, basis = square_contact_problem(n=3, traction=(0.0, -P))
        bundle = solve_small_deformation(problem)
        assert bundle.converged
        assert bundle.active.all()
        np.testing.assert_allclose(bundle.lam, -P, atol=1e-12)
        assert complementarity_ok(bundle.state, 1e-10)

    def test_energy_balance_identity(self):
        P = 0.02
        problem, _, _ = square_contact_problem(n=4, traction=(0.0, -P))
        bundle = solve_small_deformation(problem)
        from igacontact.assembly import apply_constraints

        K, F = apply_constraints(
            problem.system.stiffness, problem.system.load, problem.system.constraints
        )
        a_uu = bundle.u @ (K @ bundle.u)
        L_u = bundle.u @ F
        act = bundle.active
        coupling_term = bundle.lam[act] @ (problem.coupling[np.flatnonzero(act)] @ bundle.u)
        scale = max(abs(a_uu), abs(L_u), 1e-30)
        assert abs(a_uu - L_u + coupling_term) <= 1e-8 * scale

    def test_hertz2d_coarse_active_width(self):
        config = RunConfig(benchmark="hertz2d", pressure=0.003, base_spans=(6, 6), levels=2)
        patch = quarter_disc_level_patch(config, 2)
        problem, setup = build_hertz2d_problem(patch, config)
        bundle = solve_small_deformation(problem, config.settings)
        assert bundle.converged
        assert complementarity_ok(bundle.state, config.settings.gap_tol)
        analytic = hertz_2d(1.0, 1.0, 0.3, 0.003)
        r_of = arc_coordinate_2d(setup.trace)
        from igacontact.benchmarks import active_region_extent

        r_max, el_width = active_region_extent(bundle, setup.basis, r_of)
        assert abs(r_max - analytic.a) <= el_width + 1e-12
        # multipliers are compressive where active
        assert bundle.lam[bundle.active].max() < 0.0

    def test_iteration_cap_raises(self):
        # positive initial gap: the first pass only seeds, so one iteration cannot finish
        problem, _, _ = square_contact_problem(n=2, plane_offset=-0.05, traction=(0.0, -0.2))
        with pytest.raises(SolverError):
            solve_small_deformation(
                problem, SolveSettings(max_active_set_iters=1, gap_tol=1e-10)
            )

    def test_gap_closing_punch(self):
        # body must translate down 0.05 before touching; solution compresses uniformly
        P = 0.2
        problem, _, _ = square_contact_problem(n=2, plane_offset=-0.05, traction=(0.0, -P))
        bundle = solve_small_deformation(problem)
        assert bundle.converged
        assert bundle.active.all()
        np.testing.assert_allclose(bundle.lam, -P, atol=1e-11)
        np.testing.assert_allclose(bundle.weighted_gap, 0.0, atol=1e-11)


class TestLargeDeformation:
    def test_zero_load_zero_displacement(self):
        config = RunConfig(
            benchmark="hertz2d-large", pressure=0.0, base_spans=(3, 3), levels=2
        )
        patch = quarter_disc_level_patch(config, 0)
        problem, _ = build_large_deformation_problem(patch, config)
        bundle = solve_large_deformation(problem, config.settings, n_steps=1)
        assert bundle.converged
        assert np.abs(bundle.u).max() <= 1e-12

    def test_tiny_load_matches_linear_solution(self):
        P = 1e-6
        config = RunConfig(benchmark="hertz2d-large", pressure=P, base_spans=(4, 4), levels=2)
        patch = quarter_disc_level_patch(config, 1)
        lin_problem, _ = build_hertz2d_problem(
            patch, RunConfig(benchmark="hertz2d", pressure=P, base_spans=(4, 4), levels=2)
        )
        lin = solve_small_deformation(lin_problem, config.settings)
        nl_problem, _ = build_large_deformation_problem(patch, config)
        nl = solve_large_deformation(nl_problem, config.settings, n_steps=1)
        scale = np.abs(lin.u).max()
        assert np.abs(nl.u - lin.u).max() <= 1e-4 * scale

    def test_moderate_pressure_run_converges(self):
        config = RunConfig(
            benchmark="hertz2d-large", pressure=0.1, base_spans=(4, 4), levels=2
        )
        patch = quarter_disc_level_patch(config, 1)
        problem, setup = build_large_deformation_problem(patch, config)
        bundle = solve_large_deformation(problem, config.settings, n_steps=5)
        assert bundle.converged
        assert complementarity_ok(bundle.state, config.settings.gap_tol)
        # single-humped pressure: active multipliers peak at the pole side
        lam_act = -bundle.lam[bundle.active]
        assert lam_act.max() > 0


class TestInfSup:
    def test_identical_spaces_give_one(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(5, 5))
        M = A @ A.T + 5 * np.eye(5)
        beta = inf_sup_estimate(M, M, M)
        assert abs(beta - 1.0) <= 1e-10

    def test_matches_dense_svd_oracle(self):
        patch = unit_square_patch(2, 4)
        trace = extract_trace(patch, face_id(1, 0), rigid_normal=[0.0, 1.0])
        basis = multiplier_basis(trace)
        B, Mp, Mm = scalar_coupling_and_masses(basis)
        beta = inf_sup_estimate(B, Mp, Mm)
        # oracle: smallest singular value of Mm^{-1/2} B Mp^{-1/2}
        Lp = sla.cholesky(Mp, lower=True)
        Lm = sla.cholesky(Mm, lower=True)
        X = sla.solve_triangular(Lm, B, lower=True)
        X = sla.solve_triangular(Lp, X.T, lower=True).T
        sv = sla.svdvals(X)
        assert abs(beta - sv.min()) <= 1e-8

    def test_stability_under_refinement(self):
        betas = []
        for n in (4, 8, 16):
            patch = unit_square_patch(2, n)
            trace = extract_trace(patch, face_id(1, 0), rigid_normal=[0.0, 1.0])
            basis = multiplier_basis(trace)
            betas.append(inf_sup_estimate(*scalar_coupling_and_masses(basis)))
        assert max(betas) / min(betas) < 2.0

    def test_singular_gram_raises(self):
        M = np.zeros((3, 3))
        with pytest.raises(SolverError):
            inf_sup_estimate(np.eye(3), M, np.eye(3))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cauchy_ahlfors.ahlfors import cauchy_ahlfors_S, div_sym
from cauchy_ahlfors.decomp import (
    SolverConfig,
    cg_solve,
    decompose_traceless,
    decomposition_checks,
    derived_constant,
    kernel_basis,
    printed_constant,
    verify_theorem1,
)
from cauchy_ahlfors.errors import (
    InconsistentSystemError,
    InvalidArgumentError,
    SolverFailureError,
)
from cauchy_ahlfors.grid import OneForm, SymTensor2, random_oneform, random_symtensor
from cauchy_ahlfors.tensor import l2_inner, l2_norm, traceless_part, traceless_ricci
from cauchy_ahlfors.constraints import tt_project

FAST = SolverConfig(preconditioner="flat")


def remove_kernel(g, theta, kernel):
    for kappa in kernel:
        theta = theta - l2_inner(theta, kappa, g) * kappa
    return theta


def flat_tt(grid):
    """cos(x3) (dx1 dx2 + dx2 dx1): trace free and divergence free on the flat torus."""
    z = grid.coordinates[2]
    full = np.zeros((3, 3) + grid.shape)
    full[0, 1] = full[1, 0] = np.cos(z)
    return SymTensor2.from_full(grid, full)


class TestSolverConfig:
    def test_defaults(self, grid3):
        cfg = SolverConfig()
        assert cfg.rel_tolerance == 1e-10
        assert cfg.iteration_cap(grid3) == 10 * grid3.size
        assert cfg.preconditioner == "none"

    @pytest.mark.parametrize("kwargs", [
        {"rel_tolerance": 0.0},
        {"rel_tolerance": 1.5},
        {"max_iterations": 0},
        {"preconditioner": "jacobi"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            SolverConfig(**kwargs)


class TestKernel:
    def test_flat_constant_forms(self, flat3):
        kernel = kernel_basis(flat3)
        assert len(kernel) == 3
        gram = np.array([[l2_inner(a, b, flat3) for b in kernel] for a in kernel])
        assert np.allclose(gram, np.eye(3), atol=1e-12)

    def test_perturbed_trivial(self, perturbed3_small):
        assert kernel_basis(perturbed3_small) == []

    def test_conformal_members_are_conformal_killing(self, conformal2):
        kernel = kernel_basis(conformal2)
        assert len(kernel) == 2
        for kappa in kernel:
            defect = l2_norm(cauchy_ahlfors_S(conformal2, kappa), conformal2)
            assert defect < 1e-8


class TestCG:
    def test_zero_rhs(self, flat2):
        theta, info = cg_solve(flat2, OneForm.zeros(flat2.grid))
        assert theta.sup_norm() == 0.0 and info["iterations"] == 0

    def test_inconsistent(self, flat2, grid2):
        data = np.zeros((2,) + grid2.shape)
        data[0] = 1.0
        cfg = SolverConfig(deflation=kernel_basis(flat2))
        with pytest.raises(InconsistentSystemError):
            cg_solve(flat2, OneForm(grid2, data), cfg)

    def test_iteration_cap(self, perturbed3_small):
        rhs = div_sym(perturbed3_small, traceless_ricci(perturbed3_small))
        with pytest.raises(SolverFailureError) as exc:
            cg_solve(perturbed3_small, rhs, SolverConfig(max_iterations=2))
        assert len(exc.value.residual_history) == 2

    @pytest.mark.parametrize("preconditioner", ["none", "flat"])
    def test_residual_reached(self, perturbed3_small, preconditioner):
        g = perturbed3_small
        rhs = div_sym(g, traceless_ricci(g))
        cfg = SolverConfig(rel_tolerance=1e-10, preconditioner=preconditioner)
        theta, info = cg_solve(g, rhs, cfg)
        from cauchy_ahlfors.ahlfors import ahlfors_laplacian

        res = l2_norm(ahlfors_laplacian(g, theta) - rhs, g) / l2_norm(rhs, g)
        assert res <= 1e-10
        assert info["relative_residual"] == pytest.approx(res, rel=1e-3, abs=1e-13)


class TestDecomposition:
    def test_rejects_trace(self, flat3):
        with pytest.raises(InvalidArgumentError):
            decompose_traceless(flat3, flat3.components)

    def test_zero_input(self, flat3):
        dec = decompose_traceless(flat3, SymTensor2.zeros(flat3.grid))
        assert dec.phi_tt.sup_norm() == 0.0 and dec.theta.sup_norm() == 0.0

    @pytest.mark.parametrize("name", ["flat3", "perturbed3_small", "conformal2"])
    @settings(max_examples=3, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_recover_s_theta(self, name, seed, request):
        g = request.getfixturevalue(name)
        theta_hat = random_oneform(g.grid, seed, 2, 1.0)
        phi0 = cauchy_ahlfors_S(g, theta_hat)
        dec = decompose_traceless(g, phi0, FAST)
        assert dec.phi_tt_norm <= 1e-9 * l2_norm(phi0, g)
        kernel = kernel_basis(g)
        expected = remove_kernel(g, theta_hat, kernel)
        assert l2_norm(dec.theta - expected, g) <= 1e-8 * l2_norm(expected, g)

    def test_recover_tt_flat(self, flat3):
        phi0 = flat_tt(flat3.grid)
        dec = decompose_traceless(flat3, phi0)
        assert dec.s_theta_norm <= 1e-9 * l2_norm(phi0, flat3)

    def test_recover_tt_curved(self, perturbed3_small):
        g = perturbed3_small
        tt = tt_project(g, random_symtensor(g.grid, 3, 2, 1.0), FAST)
        dec = decompose_traceless(g, tt, FAST)
        assert dec.s_theta_norm <= 1e-9 * l2_norm(tt, g)

    @pytest.mark.parametrize("name", ["perturbed3_small", "perturbed2", "conformal2"])
    def test_invariants(self, name, request):
        g = request.getfixturevalue(name)
        phi0 = traceless_part(random_symtensor(g.grid, 1, 2, 1.0), g)
        dec = decompose_traceless(g, phi0, FAST)
        assert all(ok for _, _, ok in decomposition_checks(dec, FAST).values())
        assert (dec.s_theta + dec.phi_tt - phi0).sup_norm() == pytest.approx(0.0, abs=1e-13)

    def test_linear(self, perturbed3_small):
        g = perturbed3_small
        a = traceless_part(random_symtensor(g.grid, 4, 2, 1.0), g)
        b = traceless_part(random_symtensor(g.grid, 5, 2, 1.0), g)
        cfg = SolverConfig(rel_tolerance=1e-12, preconditioner="flat")
        tt = lambda phi: decompose_traceless(g, phi, cfg).phi_tt
        combo = tt(2.0 * a + b) - (2.0 * tt(a) + tt(b))
        assert l2_norm(combo, g) <= 1e-9 * l2_norm(a, g)

    @pytest.mark.slow
    def test_idempotent(self, perturbed3_small):
        # default solver: the flat preconditioner leaves its residual in the
        # near-kernel modes, where ||S theta'|| is amplified by 1/sqrt(lambda_min)
        g = perturbed3_small
        cfg = SolverConfig()
        phi0 = traceless_part(random_symtensor(g.grid, 6, 2, 1.0), g)
        first = decompose_traceless(g, phi0, cfg)
        second = decompose_traceless(g, first.phi_tt, cfg)
        assert second.s_theta_norm <= 10 * cfg.rel_tolerance * first.phi_tt_norm

    def test_gauge_invariance(self, flat3):
        # adding a kernel element to theta-hat changes nothing
        grid = flat3.grid
        theta_hat = random_oneform(grid, 7, 2, 1.0)
        shifted = theta_hat + OneForm(grid, np.stack([np.full(grid.shape, c) for c in (1.0, -2.0, 0.5)]))
        d1 = decompose_traceless(flat3, cauchy_ahlfors_S(flat3, theta_hat))
        d2 = decompose_traceless(flat3, cauchy_ahlfors_S(flat3, shifted))
        assert l2_norm(d1.theta - d2.theta, flat3) <= 1e-9 * l2_norm(d1.theta, flat3)


class TestRicciSplit:
    def test_constants(self):
        assert derived_constant(3) == pytest.approx(-1 / 6)
        assert printed_constant(3) == pytest.approx(-1 / 3)
        assert derived_constant(2) == 0.0

    def test_requires_three_dimensions(self, conformal2):
        with pytest.raises(InvalidArgumentError):
            verify_theorem1(conformal2)

    def test_perturbed(self, perturbed3):
        report = verify_theorem1(perturbed3, FAST)
        assert report.passed
        assert report.laplacian_identity_residual <= 1e-6
        assert report.integral_formula_residual <= 1e-6
        # the printed constant is off by a factor of two
        assert report.laplacian_identity_residual_printed > 0.1
        assert report.integral_formula_rhs_printed == pytest.approx(2 * report.integral_formula_rhs)
        assert report.integral_formula_lhs >= 0
        d = report.to_dict()
        assert d["checks"]["laplacian_identity"]["passed"]

    def test_einstein_metric_trivial(self, flat3):
        report = verify_theorem1(flat3)
        assert report.decomposition.phi_tt_norm < 1e-10
        assert report.passed


class TestExamples:
    def test_invert_eigenform(self, flat2, grid2):
        x, _ = grid2.coordinates
        sine = OneForm(grid2, np.stack([np.sin(x), 0 * x]))
        cfg = SolverConfig(deflation=kernel_basis(flat2))
        theta, _ = cg_solve(flat2, 0.5 * sine, cfg)
        assert (theta - sine).sup_norm() < 1e-9

    def test_flat_random_rhs_iteration_budget(self, flat3, grid3):
        kernel = kernel_basis(flat3)
        rhs = remove_kernel(flat3, random_oneform(grid3, 3, 3, 1.0), kernel)
        theta, info = cg_solve(flat3, rhs, SolverConfig(deflation=kernel))
        assert info["relative_residual"] <= 1e-10
        assert info["iterations"] <= 10 * grid3.resolution[0]

    def test_constant_tensor_on_flat_torus(self, flat2, grid2):
        full = np.zeros((2, 2) + grid2.shape)
        full[0, 0], full[1, 1] = 1.0, -1.0
        phi0 = SymTensor2.from_full(grid2, full)
        dec = decompose_traceless(flat2, phi0)
        assert cauchy_ahlfors_S(flat2, dec.theta).sup_norm() < 1e-12
        assert (dec.phi_tt - phi0).sup_norm() < 1e-12

    def test_diagonal_tt_on_flat_three_torus(self, flat3, grid3):
        z = grid3.coordinates[2]
        full = np.zeros((3, 3) + grid3.shape)
        full[0, 0], full[1, 1] = 0.1 * np.cos(z), -0.1 * np.cos(z)
        phi0 = SymTensor2.from_full(grid3, full)
        dec = decompose_traceless(flat3, phi0)
        assert (dec.phi_tt - phi0).sup_norm() < 1e-12
        assert dec.s_theta_norm < 1e-12

    def test_kernel_annihilated_by_laplacian(self, flat3, conformal2):
        from cauchy_ahlfors.ahlfors import ahlfors_laplacian

        for g in (flat3, conformal2):
            for kappa in kernel_basis(g):
                assert l2_norm(ahlfors_laplacian(g, kappa), g) <= 1e-7
                theta = random_oneform(g.grid, 1, 2, 1.0)
                diff = cauchy_ahlfors_S(g, theta + kappa) - cauchy_ahlfors_S(g, theta)
                assert diff.sup_norm() <= 1e-10

    def test_theta_linear_modulo_kernel(self, flat3, grid3):
        p1 = cauchy_ahlfors_S(flat3, random_oneform(grid3, 1, 2, 1.0)) + flat_tt(grid3)
        p2 = cauchy_ahlfors_S(flat3, random_oneform(grid3, 2, 2, 1.0))
        theta = lambda phi: decompose_traceless(flat3, phi).theta
        combo = theta(3.0 * p1 - p2) - (3.0 * theta(p1) - theta(p2))
        assert l2_norm(combo, flat3) <= 1e-8 * l2_norm(theta(p1), flat3)

    def test_flat_split_conformal_killing(self, flat3):
        report = verify_theorem1(flat3)
        assert report.decomposition.s_theta_norm <= 1e-9

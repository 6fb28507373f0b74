import numpy as np
import pytest
from scipy import sparse

from manifold_imputation._grid import GridFunction, GridMask, IndexRectangle, UniformGrid
from manifold_imputation._linalg import infinity_norm_inverse
from manifold_imputation._types import HoleScenario
from manifold_imputation._variational import (
    DifferencePatch,
    VariationalConfig,
    affected_stencil_report,
    assemble_variational,
    difference_matrix,
    error_scaling_study,
    impute_variational,
    inverse_operator_bound,
    patch_functional,
    solve_variational,
    summarize_patches,
)
from manifold_imputation.exceptions import MarginViolation, NonUniqueMinimizer

from .fixtures import disk_mask


def _holed(grid, func, mask):
    exact = GridFunction.from_function(grid, func)
    return exact, GridFunction(grid, exact.values, mask)


class TestAssembly:
    def test_config_rejects_zero_order(self):
        with pytest.raises(ValueError):
            VariationalConfig(k=0)

    def test_single_unknown_1d(self):
        grid = UniformGrid(dim=1, points_per_axis=20, box_edge=20.0)
        known = np.ones(20, dtype=bool)
        known[10] = False
        gf = GridFunction(grid, np.arange(20.0), GridMask(known))

        patch = assemble_variational(gf, VariationalConfig(k=1))

        assert patch.rectangle == IndexRectangle((8,), (12,))
        assert patch.affected_stencils == 3
        assert patch.total_stencils == 3
        np.testing.assert_allclose(patch.matrix.toarray().ravel(), [1.0, -2.0, 1.0])
        # known neighbours moved to the right-hand side
        np.testing.assert_allclose(patch.rhs, [10.0, -20.0, 10.0])

    def test_only_affected_rows_are_kept(self, grid_2d):
        mask = disk_mask(grid_2d, (12, 12), 0.5)
        gf = GridFunction(grid_2d, np.zeros(grid_2d.shape), mask)
        patch = assemble_variational(gf, VariationalConfig(k=2))
        # the k-inset keeps three centres per axis around a single unknown
        assert patch.affected_stencils == 2 * 3
        assert patch.total_stencils == 2 * patch.centers.shape[0] * patch.centers.shape[1]

    def test_margin_violation(self):
        grid = UniformGrid(dim=2, points_per_axis=16)
        gf = GridFunction(grid, np.zeros(grid.shape), disk_mask(grid, (2, 8), 0.5))
        with pytest.raises(MarginViolation):
            assemble_variational(gf, VariationalConfig(k=2))


class TestSolve:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_reproduces_polynomials_of_degree_2k_minus_1(self, k):
        grid = UniformGrid(dim=1, points_per_axis=40, box_edge=1.0)

        def poly(x):
            return sum((j + 1) * (x - 0.3) ** j for j in range(2 * k))

        exact, gf = _holed(grid, poly, disk_mask(grid, (20,), 3.0))
        completed, diagnostics = impute_variational(gf, VariationalConfig(k=k), workers=1)
        np.testing.assert_allclose(completed.array(), exact.array(), atol=1e-9)
        assert diagnostics[0].J_value == pytest.approx(0.0, abs=1e-16)

    def test_reproduces_plane_in_2d(self, grid_2d, holed_2d):
        exact, gf = _holed(grid_2d, lambda x, y: 0.5 * x - 2.0 * y + 1.0, holed_2d.mask)
        completed, _ = impute_variational(gf, VariationalConfig(k=1), workers=1)
        np.testing.assert_allclose(completed.array(), exact.array(), atol=1e-10)

    def test_smooth_data_small_error(self, grid_2d, holed_2d):
        exact, gf = _holed(grid_2d, lambda x, y: np.sin(x) * np.cos(y), holed_2d.mask)
        completed, diagnostics = impute_variational(gf, VariationalConfig(k=3))
        error = np.abs(completed.array() - exact.array()).max()
        assert error < 1e-2
        assert diagnostics[0].cond_AtA > 1.0

    def test_known_values_are_copied(self, holed_2d):
        completed, _ = impute_variational(holed_2d, VariationalConfig(k=2), workers=1)
        known = holed_2d.mask.known
        np.testing.assert_array_equal(completed.values[known], holed_2d.values[known])

    def test_independent_patches(self):
        grid = UniformGrid(dim=2, points_per_axis=40)
        known = np.ones(grid.shape, dtype=bool)
        known[7:9, 7:9] = False
        known[30:32, 30:32] = False
        exact, gf = _holed(grid, lambda x, y: np.sin(x) * np.cos(y), GridMask(known))

        completed, diagnostics = impute_variational(gf, VariationalConfig(k=2), workers=2)

        assert completed.is_complete
        assert len(diagnostics) == 2
        summary = summarize_patches(diagnostics)
        assert summary["cols"] == 8
        assert len(summary["patches"]) == 2

    @pytest.mark.parametrize("axis", [0, 1])
    def test_reflection_symmetric_input_gives_symmetric_output(self, grid_2d, axis):
        values = GridFunction.from_function(grid_2d, lambda x, y: np.sin(x) * np.cos(y)).values
        values = (values + np.flip(values, axis=axis)) / 2
        center = [12, 12]
        center[axis] = 11.5
        gf = GridFunction(grid_2d, values, disk_mask(grid_2d, center, 2.5))
        assert np.array_equal(gf.mask.known, np.flip(gf.mask.known, axis=axis))

        completed, _ = impute_variational(gf, VariationalConfig(k=2), workers=1)

        np.testing.assert_allclose(
            completed.array(), np.flip(completed.array(), axis=axis), atol=1e-9
        )

    def test_rank_deficient_patch(self, holed_2d):
        patch = DifferencePatch(
            gf=holed_2d,
            k=1,
            rectangle=IndexRectangle((8, 8), (16, 16)),
            unknown_indices=np.array([[12, 12], [12, 13]]),
            matrix=sparse.csr_matrix(np.array([[1.0, 1.0]])),
            rhs=np.array([1.0]),
        )
        with pytest.raises(NonUniqueMinimizer) as excinfo:
            solve_variational(patch)
        assert excinfo.value.nullity == 1


class TestAffectedStencils:
    def test_minimality_on_exact_data(self, holed_2d, exact_2d):
        patch = assemble_variational(holed_2d, VariationalConfig(k=2))
        completed, diagnostics = solve_variational(patch)
        report = affected_stencil_report(patch, completed, exact_2d)

        assert report.count == diagnostics.affected_stencils
        assert report.minimality_holds
        assert report.affected_sum <= report.exact_affected_sum * (1 + 1e-9)
        assert report.to_dict()["minimality_holds"] is True

    def test_without_exact_data(self, holed_2d):
        patch = assemble_variational(holed_2d, VariationalConfig(k=1))
        completed, diagnostics = solve_variational(patch)
        report = affected_stencil_report(patch, completed)
        assert report.minimality_holds is None
        assert report.max_abs_diff == pytest.approx(diagnostics.max_affected_diff)

    def test_patch_functional_needs_known_values(self, holed_2d):
        with pytest.raises(ValueError, match="known"):
            patch_functional(holed_2d, IndexRectangle((8, 8), (16, 16)), 1)


class TestInverseOperator:
    def test_difference_matrix(self):
        np.testing.assert_allclose(
            difference_matrix(3, 1), [[2, -1, 0], [-1, 2, -1], [0, -1, 2]]
        )
        assert difference_matrix(2, 2).shape == (2, 2)

    def test_smallest_case_attains_bound(self):
        exact, coarse = inverse_operator_bound(1, 1)
        assert exact == pytest.approx(0.5)
        assert coarse == pytest.approx(0.5)
        assert infinity_norm_inverse(difference_matrix(1, 1)) == pytest.approx(0.5)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_bound_holds(self, k):
        for n in range(1, 25):
            exact, coarse = inverse_operator_bound(n, k)
            assert infinity_norm_inverse(difference_matrix(n, k)) <= exact * (1 + 1e-12)
            assert exact <= coarse * (1 + 1e-12)

    @pytest.mark.parametrize("n, k", [(0, 1), (5, 0), (5, 7)])
    def test_bound_arguments(self, n, k):
        with pytest.raises(ValueError):
            inverse_operator_bound(n, k)


class TestScalingStudy:
    def test_small_hole_converges(self):
        table = error_scaling_study(
            HoleScenario.SMALL, k=2, dim=1, noise=0.0, meshes=(32, 64, 128)
        )
        errors = [row.max_error for row in table.rows]
        assert errors[0] > errors[1] > errors[2]
        assert table.slope is not None and table.slope > 3.0
        assert all(row.unknowns == 1 for row in table.rows)

    @pytest.mark.slow
    def test_large_hole_2d(self):
        table = error_scaling_study("large-hole", k=2, dim=2, noise=0.0, meshes=(24, 32, 48))
        unknowns = [row.unknowns for row in table.rows]
        assert unknowns == sorted(unknowns) and unknowns[0] < unknowns[-1]
        assert all(row.max_error < 0.5 for row in table.rows)
        assert table.to_dict()["scenario"] == "large-hole"

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import KIND_SIZES, lagrange_product
from optrecovery import (
    ChebyshevPropertyError,
    SamplingGrid,
    collocate,
    lagrange_value,
    lagrange_values,
    make_system,
    moment_vector,
)


class TestMakeSystem:
    def test_polynomial_basis_is_chebyshev_t(self, poly3):
        xs = np.linspace(-1, 1, 7)
        np.testing.assert_allclose(poly3.basis(xs), [np.ones(7), xs, 2 * xs**2 - 1], atol=1e-15)

    def test_evaluate_third_basis_function(self, poly3):
        assert poly3.evaluate(2, 0.5) == -0.5

    @pytest.mark.parametrize("kind,n", KIND_SIZES)
    def test_first_basis_function_is_one(self, systems, kind, n):
        xs = np.linspace(-1, 1, 101)
        assert np.all(systems[kind, n].basis(xs)[0] == 1.0)

    def test_exponential_determinant_sign_constant(self):
        system = make_system("exponential", 3, [1.0, 2.0])
        rng = np.random.default_rng(7)
        triples = np.sort(rng.uniform(-1, 1, size=(10_000, 3)), axis=1)
        dets = np.linalg.det(np.stack([system.basis(t) for t in triples]))
        assert np.all(dets > 0) or np.all(dets < 0)

    def test_dimension_too_small(self):
        with pytest.raises(ValueError, match=">= 3"):
            make_system("polynomial", 2)

    def test_duplicate_rates(self):
        with pytest.raises(ValueError, match="distinct"):
            make_system("exponential", 3, [1.0, 1.0])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_system("wavelet", 3)

    def test_non_chebyshev_custom_basis_rejected(self):
        # {1, x^2, x^4} is even, so two symmetric pointsets collide
        with pytest.raises(ChebyshevPropertyError):
            make_system("custom", 3, functions=[lambda x: x**2, lambda x: x**4])

    def test_symmetric_trig_truncation_rejected(self):
        # cos(2t) + a cos(t) + b has four zeros on a symmetric t-interval
        funcs = [
            lambda x: np.cos(np.pi * x / 2),
            lambda x: np.sin(np.pi * x / 2),
            lambda x: np.cos(np.pi * x),
        ]
        with pytest.raises(ChebyshevPropertyError):
            make_system("custom", 4, functions=funcs)

    def test_custom_basis_accepted(self):
        system = make_system("custom", 3, functions=[lambda x: x, np.exp])
        assert system.basis(0.5).tolist() == [1.0, 0.5, np.exp(0.5)]
        with pytest.raises(ValueError):
            system.descriptor()

    def test_descriptor_resolves_defaults(self):
        assert make_system("trigonometric", 4).descriptor()["params"] == [math.pi / 2]
        assert make_system("exponential", 4).descriptor()["params"] == [1.0, -1.0, 2.0]


class TestSamplingGrid:
    def test_completion(self):
        grid = SamplingGrid([-0.5, 0.5])
        assert grid.augmented.tolist() == [-1.0, -0.5, 0.5, 1.0]
        assert [(s.left_index, s.right_index) for s in grid.subintervals] == [
            (None, 0), (0, 1), (1, None)
        ]

    def test_no_empty_subintervals(self):
        grid = SamplingGrid([-1.0, 0.0, 1.0])
        assert len(grid.subintervals) == 2
        assert all(s.right > s.left for s in grid.subintervals)

    @pytest.mark.parametrize("points", [[0.0, 0.0, 0.5], [0.5, 0.0], [-1.5, 0.0], [0.0, np.nan]])
    def test_invalid(self, points):
        with pytest.raises(ValueError):
            SamplingGrid(points)

    def test_locate_and_index(self):
        grid = SamplingGrid([-0.5, 0.5])
        assert grid.locate(-1.0) == 0
        assert grid.locate(0.0) == 1
        assert grid.locate(1.0) == 2
        assert grid.index_of(0.5) == 1
        assert grid.index_of(0.25) is None

    def test_generators(self):
        assert SamplingGrid.equispaced(5).points.tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
        cheb = SamplingGrid.chebyshev(4).points
        np.testing.assert_allclose(np.polynomial.chebyshev.chebval(cheb, [0, 0, 0, 0, 1]), 0, atol=1e-14)
        assert SamplingGrid.random(6, 3) == SamplingGrid.random(6, 3)


class TestCollocate:
    def test_three_points(self, poly3):
        M = collocate(poly3, [-1.0, 0.0, 1.0])
        np.testing.assert_array_equal(M.entries, [[1, 1, 1], [-1, 0, 1], [1, -1, 1]])

    def test_four_points(self, poly3):
        M = collocate(poly3, [-1.0, -1 / 3, 1 / 3, 1.0])
        assert M.shape == (3, 4)
        assert M.entries[0].tolist() == [1.0] * 4

    def test_too_few_points(self, poly3):
        with pytest.raises(ValueError, match="at least n=3"):
            collocate(poly3, [-1.0, 1.0])

    @pytest.mark.parametrize("kind,n", KIND_SIZES)
    def test_columns_are_moment_vectors(self, systems, kind, n):
        system = systems[kind, n]
        grid = SamplingGrid.random(n + 3, 11)
        M = collocate(system, grid)
        for i, x in enumerate(grid.points):
            assert np.array_equal(M.entries[:, i], moment_vector(system, x))


class TestMomentVector:
    def test_values(self, poly3):
        assert moment_vector(poly3, 0.0).tolist() == [1.0, 0.0, -1.0]
        assert moment_vector(poly3, 1.0).tolist() == [1.0, 1.0, 1.0]

    def test_outside(self, poly3):
        with pytest.raises(ValueError):
            moment_vector(poly3, 1.5)


class TestLagrange:
    def test_golden_values(self, poly3):
        # exact product-formula values: (-1/8, 3/4, 3/8)
        expected = [-0.125, 0.75, 0.375]
        assert [float(lagrange_product([-1, 0, 1], i, 0.5)) for i in range(3)] == expected
        np.testing.assert_allclose(lagrange_values(poly3, [-1, 0, 1], 0.5), expected, atol=1e-15)
        assert lagrange_value(poly3, [-1, 0, 1], 1, 0.5) == pytest.approx(0.75, abs=1e-15)

    def test_mixed_signs(self, poly3):
        vals = lagrange_values(poly3, [-1, 0, 1], 0.5)
        assert vals.min() < 0 < vals.max()

    def test_interpolation_property(self, systems):
        rng = np.random.default_rng(5)
        for (kind, n), system in systems.items():
            nodes = np.sort(rng.uniform(-1, 1, n))
            np.testing.assert_allclose(lagrange_values(system, nodes, nodes), np.eye(n), atol=1e-9)

    def test_polynomial_matches_product_formula(self):
        system = make_system("polynomial", 5)
        rng = np.random.default_rng(9)
        for _ in range(50):
            nodes = np.sort(rng.uniform(-1, 1, 5))
            x = rng.uniform(-1, 1)
            oracle = [lagrange_product(nodes, i, x) for i in range(5)]
            np.testing.assert_allclose(lagrange_values(system, nodes, x), oracle, rtol=1e-8, atol=1e-9)

    def test_duplicate_nodes(self, poly3):
        with pytest.raises(ValueError):
            lagrange_values(poly3, [0.0, 0.0, 1.0], 0.5)

    def test_partition_of_unity(self, systems):
        rng = np.random.default_rng(13)
        keys = list(systems)
        for t in range(1000):
            system = systems[keys[t % len(keys)]]
            nodes = np.sort(rng.uniform(-1, 1, system.n))
            if np.diff(nodes).min() < 1e-3:
                continue
            assert lagrange_values(system, nodes, rng.uniform(-1, 1)).sum() == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-1, 1), min_size=3, max_size=3, unique=True),
        st.floats(-1, 1),
    )
    def test_sign_alternation(self, poly3, nodes, x):
        nodes = sorted(nodes)
        if np.diff(nodes).min() < 1e-3 or min(abs(x - t) for t in nodes) < 1e-3:
            return
        vals = lagrange_values(poly3, nodes, x)
        assert vals.min() < 0 < vals.max()

    def test_nonzero_off_nodes(self, systems):
        rng = np.random.default_rng(17)
        for system in systems.values():
            nodes = np.linspace(-0.9, 0.9, system.n)
            xs = rng.uniform(-1, 1, 200)
            assert np.all(np.abs(lagrange_values(system, nodes, xs)) > 0)

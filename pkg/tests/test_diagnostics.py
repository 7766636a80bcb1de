import numpy as np
import pytest

from conftest import brute_force_l1, lagrange_product, random_grid
from optrecovery import (
    SamplingGrid,
    build_recovery_map,
    collocate,
    enumerate_supports,
    ersatz_solver,
    l1_profile,
    make_system,
    rho_norm_ratio,
    wce_audit,
)
from optrecovery.diagnostics import golden_section_max, random_perturbation, signed_piece_function


@pytest.fixture(scope="module")
def sample_maps(systems):
    rng = np.random.default_rng(83)
    out = []
    for (kind, n), system in systems.items():
        m = int(rng.integers(n, 2 * n + 1))
        out.append(build_recovery_map(system, random_grid(rng, m)))
    return out


class TestErsatz:
    def test_golden_probe(self, poly3):
        (sol,) = ersatz_solver(poly3, [-1.0, -1 / 3, 1 / 3, 1.0], [0.0])
        assert sol.objective == pytest.approx(1.25, abs=1e-12)

    def test_matches_enumeration(self, poly3):
        grid = SamplingGrid([-0.9, -0.4, 0.1, 0.5, 0.8])
        M = collocate(poly3, grid).entries
        probes = np.linspace(-1, 1, 17)
        for x, sol in zip(probes, ersatz_solver(poly3, grid, probes)):
            assert sol.objective == pytest.approx(brute_force_l1(M, poly3.basis(x)), abs=1e-10)

    def test_probe_outside(self, poly3):
        with pytest.raises(ValueError):
            ersatz_solver(poly3, [-1.0, 0.0, 1.0], [2.0])


class TestEnumerateSupports:
    def test_guard(self):
        with pytest.raises(ValueError, match="guard"):
            enumerate_supports(np.ones((3, 30)), np.ones(3), max_count=100)

    def test_singular_listed_infeasible(self):
        M = np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
        cands = {c.support: c for c in enumerate_supports(M, [1.0, 0.5])}
        assert not cands[0, 1].feasible and cands[0, 1].objective == np.inf
        assert cands[0, 2].feasible


def test_golden_section_finds_parabola_peak():
    x, v = golden_section_max(lambda t: 1 - (t - 0.3) ** 2, -1.0, 1.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-8)
    assert v == pytest.approx(1.0, abs=1e-15)


class TestRatio:
    def test_golden_three_points(self, map_101):
        # on [0, 1] the l1 norm of the weights is 1 + x - x^2, peaking at 5/4
        rep = rho_norm_ratio(map_101)
        assert rep.rho == pytest.approx(1.25, abs=1e-12)
        assert rep.mu == pytest.approx(2.25, abs=1e-12)
        assert abs(rep.argmax[1]) == pytest.approx(0.5, abs=1e-6)
        assert [p.value for p in rep.per_subinterval] == pytest.approx([1.25, 1.25], abs=1e-12)

    def test_report_dict(self, map_101):
        doc = rho_norm_ratio(map_101).to_dict()
        assert set(doc) == {"rho", "mu", "argmax", "per_subinterval"}
        assert len(doc["per_subinterval"]) == 2

    def test_square_grid_is_lebesgue_constant(self):
        rng = np.random.default_rng(89)
        for n in (3, 4, 5):
            system = make_system("polynomial", n)
            nodes = random_grid(rng, n)
            rep = rho_norm_ratio(build_recovery_map(system, nodes))
            xs = np.linspace(-1, 1, 200_001)
            lebesgue = sum(np.abs(lagrange_product(nodes, i, xs)) for i in range(n)).max()
            assert rep.rho == pytest.approx(lebesgue, abs=1e-6)

    def test_bounds_random_elements(self, sample_maps):
        rng = np.random.default_rng(97)
        for rmap in sample_maps:
            rho = rho_norm_ratio(rmap).rho
            xs = np.linspace(-1, 1, 2001)
            coef = rng.standard_normal((10_000 // len(sample_maps) + 1, rmap.n))
            sup = np.abs(coef @ rmap.system.basis(xs)).max(axis=1)
            sampled = np.abs(coef @ rmap.system.basis(rmap.grid.points)).max(axis=1)
            assert np.all(sup / sampled <= rho + 1e-6)

    def test_consistent_with_dense_profile(self, sample_maps):
        for rmap in sample_maps:
            rep = rho_norm_ratio(rmap)
            dense = l1_profile(rmap, np.linspace(-1, 1, 20_001))
            assert dense.max() <= rep.rho + 1e-6
            assert l1_profile(rmap, rep.argmax[1]) == pytest.approx(rep.rho, abs=1e-9)

    def test_sign_choice_matches_weights(self, sample_maps):
        rng = np.random.default_rng(101)
        for rmap in sample_maps:
            for p in rmap.pieces:
                coef = p.coefficients(rmap.system.basis(p.probe))
                assert tuple(np.sign(coef).astype(int)) == p.signs
                g = signed_piece_function(rmap, p.k)
                xs = rng.uniform(p.left, p.right, 50)
                np.testing.assert_allclose(g(xs), l1_profile(rmap, xs), atol=1e-10)


    def test_adjacent_pieces_agree_at_shared_nodes(self, sample_maps):
        for rmap in sample_maps:
            for left, right in zip(rmap.pieces, rmap.pieces[1:]):
                x = left.right
                a = signed_piece_function(rmap, left.k)(x)
                b = signed_piece_function(rmap, right.k)(x)
                assert a == pytest.approx(1.0, abs=1e-9) and b == pytest.approx(1.0, abs=1e-9)


class TestAudit:
    def test_exact_data(self, map_four):
        rep = wce_audit(map_four, 0.0, trials=200)
        assert rep.observed <= 1e-12 and rep.passed

    def test_bound_attained_not_exceeded(self, map_101):
        rep = wce_audit(map_101, 0.1, trials=300, seed=4)
        assert rep.bound == pytest.approx(0.225, abs=1e-12)
        assert rep.passed
        assert rep.observed > 0.5 * rep.bound

    def test_no_perturbation(self, map_101):
        rep = wce_audit(map_101, 0.1, trials=50, perturb=False)
        assert rep.observed <= 1e-12

    def test_negative_epsilon(self, map_101):
        with pytest.raises(ValueError):
            wce_audit(map_101, -1.0)

    def test_reproducible(self, map_four):
        a = wce_audit(map_four, 1e-3, trials=20, seed=9)
        b = wce_audit(map_four, 1e-3, trials=20, seed=9)
        assert a == b
        assert a.to_dict()["trials"] == 20

    def test_perturbation_has_unit_norm(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            g = random_perturbation(rng)
            vals = g(np.linspace(-1, 1, 5001))
            assert np.abs(vals).max() <= 1.0
        # knots are hit exactly, so the norm is attained at some knot
        g = random_perturbation(np.random.default_rng(1), knots=2)
        assert np.abs(g(np.array([-1.0, 1.0]))).max() == 1.0

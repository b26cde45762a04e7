import math

import numpy as np
import pytest

from mapdyn import marginals as mg
from mapdyn import phasespace as ps


class TestAnalytic:
    def test_origin_values(self):
        gamma = ps.gamma_star(2)
        M = mg.marginal_f2_analytic(0.0, 0.0, gamma)
        assert M[0, 0] == pytest.approx(0.0919, abs=5e-5)
        assert M[0, 0] == pytest.approx(1 / (2 * math.pi * (1 + 2 * gamma)))
        assert M[0, 1] == 0.0

    def test_pointwise_trace(self):
        gamma = 0.15
        rng = np.random.default_rng(0)
        for _ in range(50):
            x1, x2 = rng.uniform(-1, 1, 2)
            M = mg.marginal_f2_analytic(x1, x2, gamma)
            assert M[0, 0] + M[1, 1] == pytest.approx(1 / (math.pi * (1 + 2 * gamma)))

    def test_support(self):
        gamma = 0.1
        r = math.sqrt(2 * (1 + 2 * gamma))
        assert np.all(mg.marginal_f2_analytic(r + 0.01, 0.0, gamma) == 0.0)
        assert mg.marginal_f2_analytic(r - 0.01, 0.0, gamma)[0, 0] != 0.0

    def test_normalization_quadrature(self):
        gamma = ps.gamma_star(2)
        xs = np.linspace(-2.5, 2.5, 801)
        X1, X2 = np.meshgrid(xs, xs, indexing="ij")
        M = mg.marginal_f2_analytic(X1, X2, gamma)
        h = xs[1] - xs[0]
        assert np.sum(M[..., 0, 0]) * h * h == pytest.approx(1.0, abs=2e-3)


class TestWeighted:
    def test_coefficients_match_pair_weights(self):
        delta = 0.07
        wp, wm = ps.pair_weights(delta, 2)
        x1, x2 = 0.9, -0.4
        expected = wp * mg.marginal_f2_analytic(x1, x2, delta) + wm * mg.marginal_f2_analytic(
            x1, x2, -delta
        )
        assert np.allclose(mg.marginal_f2_weighted(x1, x2, delta), expected, atol=1e-14)

    def test_outside_outer_disc_zero(self):
        delta = 0.05
        r = math.sqrt(2 * (1 + 2 * delta))
        assert np.all(mg.marginal_f2_weighted(r + 1e-3, 0.0, delta) == 0.0)

    def test_hollow_ring(self):
        delta = 0.05
        xs = np.linspace(-2.2, 2.2, 161)
        X1, X2 = np.meshgrid(xs, xs, indexing="ij")
        W = mg.marginal_f2_weighted(X1, X2, delta)
        r2 = X1**2 + X2**2
        inner = r2 <= 2 * (1 - 2 * delta) * 0.97
        annulus = (r2 > 2 * (1 - 2 * delta) * 1.03) & (r2 <= 2 * (1 + 2 * delta) * 0.97)
        assert np.mean(np.abs(W[..., 0, 0][inner])) < 0.2 * np.mean(np.abs(W[..., 0, 0][annulus]))

    def test_small_delta_cancellation(self):
        delta = 1e-3
        inside = mg.marginal_f2_weighted(0.5, 0.5, delta)
        assert np.max(np.abs(inside)) < 5e-3


def _interior_supnorm(grid, exact_fn, entry, support_r2):
    h = grid.axis1[1] - grid.axis1[0]
    gl = h / 2 / math.sqrt(3)
    worst = 0.0
    for i, a in enumerate(grid.axis1):
        for j, b in enumerate(grid.axis2):
            corners = [(a + sa * h / 2) ** 2 + (b + sb * h / 2) ** 2 for sa in (-1, 1) for sb in (-1, 1)]
            if not all(c <= support_r2 for c in corners):
                continue
            pts = [(a + s1 * gl, b + s2 * gl) for s1 in (-1, 1) for s2 in (-1, 1)]
            exact = np.mean([exact_fn(x, y)[entry] for x, y in pts])
            worst = max(worst, abs(grid.values[i, j].real - exact) / max(grid.stderr[i, j], 1e-12))
    return worst


class TestMonteCarlo:
    def test_single_gamma_agreement(self):
        gamma = ps.gamma_star(2)
        rng = np.random.Generator(np.random.Philox(key=[21, 0]))
        axis = np.linspace(-2.2, 2.2, 31)
        for entry in [(0, 0), (0, 1)]:
            grid = mg.marginal_mc(
                entry[0], entry[1], ps.SingleGamma(gamma), 2, axis, axis, rng, 1_000_000
            )
            worst = _interior_supnorm(
                grid, lambda a, b: mg.marginal_f2_analytic(a, b, gamma), entry, 2 * (1 + 2 * gamma)
            )
            assert worst < 4.5

    def test_offdiagonal_parity(self):
        gamma = 0.2
        rng = np.random.Generator(np.random.Philox(key=[22, 0]))
        axis = np.linspace(-2.2, 2.2, 21)
        grid = mg.marginal_mc(0, 1, ps.SingleGamma(gamma), 2, axis, axis, rng, 400_000)
        sym = grid.values.real + grid.values.real[::-1, :]
        # odd under x1 -> -x1: symmetrized estimate is zero within errors
        err = np.sqrt(grid.stderr**2 + grid.stderr[::-1, :] ** 2) + 1e-12
        assert np.max(np.abs(sym) / err) < 5.0

    def test_f3_diagonals_integrate_to_one(self):
        axis = np.linspace(-2.4, 2.4, 25)
        area = (axis[1] - axis[0]) ** 2
        gamma = ps.gamma_star(3)
        for n in range(3):
            rng = np.random.Generator(np.random.Philox(key=[23, n]))
            grid = mg.marginal_mc(n, n, ps.SingleGamma(gamma), 3, axis, axis, rng, 400_000)
            integral = np.sum(grid.values.real) * area
            err = math.sqrt(np.sum(grid.stderr**2)) * area + 1e-12
            assert abs(integral - 1.0) < 4 * err

    def test_weighted_mc_support(self):
        delta = 0.1
        rng = np.random.Generator(np.random.Philox(key=[24, 0]))
        axis = np.linspace(-2.2, 2.2, 23)
        grid = mg.marginal_mc(0, 0, ps.SymmetricPairGamma(delta, 2), 2, axis, axis, rng, 400_000)
        h = grid.axis1[1] - grid.axis1[0]
        r2 = grid.axis1[:, None] ** 2 + grid.axis2[None, :] ** 2
        # bins whose entire area lies outside the outer support disc
        outside = np.sqrt(r2) > math.sqrt(2 * (1 + 2 * delta)) + h
        assert np.max(np.abs(grid.values[outside])) == 0.0

    def test_undersampled_warning(self):
        rng = np.random.Generator(np.random.Philox(key=[25, 0]))
        axis = np.linspace(-2, 2, 101)
        grid = mg.marginal_mc(0, 0, ps.SingleGamma(0.0), 2, axis, axis, rng, 20_000)
        assert "warning" in grid.meta


class TestGridCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(key=[26, 0]))
        axis = np.linspace(-2, 2, 9)
        grid = mg.marginal_mc(0, 1, ps.SingleGamma(0.1), 2, axis, axis, rng, 50_000)
        path = tmp_path / "g.csv"
        grid.to_csv(path)
        back = mg.Grid2D.from_csv(path)
        assert np.allclose(back.axis1, grid.axis1)
        assert np.allclose(back.values, grid.values)
        assert np.allclose(back.stderr, grid.stderr)
        assert back.meta["nm-pair"] == "0,1"


class TestHybridJoint:
    def test_product_state_factorizes(self):
        R = np.linspace(-2, 2, 9)
        P = np.linspace(-2, 2, 9)
        grid = mg.hybrid_joint_grid(R, P, "product_cat", ps.SingleGamma(ps.gamma_star(2)))
        norms = np.abs(grid).max(axis=(2, 3))
        i0, j0 = np.unravel_index(np.argmax(norms), norms.shape)
        ref = grid[i0, j0]
        for i, j in [(2, 3), (6, 1), (5, 5)]:
            block = grid[i, j]
            mask = np.abs(ref) > 1e-12
            ratios = block[mask] / ref[mask]
            assert np.max(np.abs(ratios - ratios.flat[0])) < 1e-10

    def test_bell_gaussian_decay(self):
        R = np.array([-5.0, 0.0, 5.0])
        P = np.array([-5.0, 0.0, 5.0])
        grid = mg.hybrid_joint_grid(R, P, "bell", ps.SingleGamma(0.2))
        assert np.max(np.abs(grid[0, 0])) < 1e-6
        assert np.max(np.abs(grid[2, 2])) < 1e-6
        assert np.max(np.abs(grid[1, 1])) > 1e-3

    def test_bell_distinguishable_from_cat(self):
        R = np.linspace(-3, 3, 13)
        P = np.linspace(-3, 3, 13)
        scheme = ps.SingleGamma(ps.gamma_star(2))
        bell = mg.hybrid_joint_grid(R, P, "bell", scheme)
        cat = mg.hybrid_joint_grid(R, P, "product_cat", scheme)
        noise = 1e-14  # closed forms: numeric noise is at machine precision
        assert np.max(np.abs(bell - cat)) > 10 * noise
        assert np.max(np.abs(bell - cat)) > 1e-3

    def test_weighted_scheme_accepted(self):
        R = np.linspace(-2, 2, 5)
        grid = mg.hybrid_joint_grid(R, R, "bell", ps.SymmetricPairGamma(0.05, 2))
        assert grid.shape == (5, 5, 2, 2)

    def test_unknown_state_rejected(self):
        with pytest.raises(ValueError):
            mg.hybrid_joint_grid(np.zeros(2), np.zeros(2), "ghz", ps.SingleGamma(0.1))


class TestHermiticity:
    def test_conjugate_pair_grids(self):
        axis = np.linspace(-2.2, 2.2, 17)
        g01 = mg.marginal_mc(
            0, 1, ps.SingleGamma(0.1), 2, axis, axis,
            np.random.Generator(np.random.Philox(key=[30, 0])), 200_000,
        )
        g10 = mg.marginal_mc(
            1, 0, ps.SingleGamma(0.1), 2, axis, axis,
            np.random.Generator(np.random.Philox(key=[30, 0])), 200_000,
            axis_states=(0, 1),
        )
        # same samples, conjugate entries: grids are exact complex conjugates
        assert np.max(np.abs(g01.values - np.conj(g10.values))) < 1e-12

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from entroreg.field import Grid, GridError, ScalarField, quadrature_mean
from entroreg.fixtures import two_valued
from entroreg.orlicz import PHI_EXP, PHI_LOG, holder_pair, luxemburg_norm, phi_eval
from oracles import FROZEN

G1 = Grid.unit(64)
bounded = arrays(np.float64, (6, 7), elements=st.floats(-5, 5, allow_nan=False))


class TestYoungFunctions:
    def test_values(self):
        assert phi_eval(PHI_EXP, 1.0) == 1.0
        assert phi_eval(PHI_LOG, 1.0) == 0.0
        assert phi_eval(PHI_EXP, 2.0) == pytest.approx(math.e, rel=1e-15)
        assert phi_eval(PHI_EXP, 0.5) == 0.5
        assert phi_eval(PHI_LOG, math.e) == pytest.approx(math.e, rel=1e-15)

    @pytest.mark.parametrize("phi", [PHI_EXP, PHI_LOG])
    def test_negative_argument(self, phi):
        with pytest.raises(ValueError):
            phi_eval(phi, -0.1)

    @pytest.mark.parametrize("phi", [PHI_EXP, PHI_LOG])
    def test_zero_monotone_convex(self, phi):
        t = np.linspace(0, 6, 2001)
        y = phi(t)
        assert y[0] == 0.0
        assert np.all(np.diff(y) >= 0)
        assert np.all(y[:-2] + y[2:] - 2 * y[1:-1] >= -1e-12)

    def test_fenchel_young(self, rng):
        y, z = rng.uniform(0, 8, 100_000), rng.uniform(0, 100, 100_000)
        assert np.all(y * z <= PHI_EXP(y) + PHI_LOG(z) + 1e-12)


class TestLuxemburg:
    @pytest.mark.parametrize("c", [0.3, 1.0, 2.7])
    def test_constant_exp(self, c):
        assert abs(luxemburg_norm(ScalarField(G1, np.full(64, c)), PHI_EXP) - c) <= 1e-8

    @pytest.mark.parametrize("c", [0.3, 1.0, 2.7])
    def test_constant_log(self, c):
        assert abs(luxemburg_norm(ScalarField(G1, np.full(64, c)), PHI_LOG) - FROZEN["lux_log_one"] * c) <= 1e-8

    def test_two_valued_exp(self):
        assert abs(luxemburg_norm(two_valued(G1, 0.0, 2.0), PHI_EXP) - FROZEN["lux_exp_two_valued"]) <= 1e-8

    def test_zero_field(self):
        assert luxemburg_norm(ScalarField(G1, np.zeros(64))) == 0.0

    def test_bracket_expansion(self):
        # a tiny set of huge values pushes the root above max|f| + 1
        vals = np.zeros(64)
        vals[20] = 50.0
        f = ScalarField(G1, vals)
        n = luxemburg_norm(f, PHI_LOG)
        w = G1.weights / G1.weights.sum()
        assert np.sum(w * PHI_LOG(np.abs(vals) / n)) <= 1.0
        assert np.sum(w * PHI_LOG(np.abs(vals) / (n * (1 - 1e-9)))) > 1.0

    @given(bounded, st.floats(-10, 10).filter(lambda c: abs(c) > 1e-3))
    @settings(max_examples=60, deadline=None)
    def test_homogeneity(self, values, c):
        g = Grid.unit(6, 2).with_dims((6, 7))
        f = ScalarField(g, values)
        for phi in (PHI_EXP, PHI_LOG):
            a = luxemburg_norm(ScalarField(g, c * values), phi)
            b = abs(c) * luxemburg_norm(f, phi)
            assert abs(a - b) <= 2e-10 * max(a, b) + 1e-300

    @given(bounded)
    @settings(max_examples=60, deadline=None)
    def test_norm_bound(self, values):
        g = Grid.unit(6, 2).with_dims((6, 7))
        f = ScalarField(g, values)
        for phi in (PHI_EXP, PHI_LOG):
            modular = quadrature_mean(ScalarField(g, phi(np.abs(values))))
            assert luxemburg_norm(f, phi) <= max(modular, 1.0) + 1e-10


class TestHolder:
    def test_zero(self):
        lhs, rhs = holder_pair(ScalarField(G1, np.zeros(64)), ScalarField(G1, np.ones(64)))
        assert lhs == 0.0 <= rhs

    def test_ones(self):
        lhs, rhs = holder_pair(ScalarField(G1, np.ones(64)), ScalarField(G1, np.ones(64)))
        assert lhs == pytest.approx(1.0, rel=1e-15)
        assert rhs == pytest.approx(FROZEN["holder_rhs_ones"], abs=1e-8)
        assert lhs <= rhs

    def test_random_pairs(self, rng):
        g = Grid.unit(12, 2)
        for _ in range(100):
            f = ScalarField(g, rng.uniform(-3, 3, g.dims))
            h = ScalarField(g, rng.uniform(-3, 3, g.dims) * rng.uniform(0, 1, g.dims))
            lhs, rhs = holder_pair(f, h)
            assert lhs <= rhs + 1e-10

    def test_grid_mismatch(self):
        with pytest.raises(GridError):
            holder_pair(ScalarField(G1, np.ones(64)), ScalarField(Grid.unit(8), np.ones(8)))

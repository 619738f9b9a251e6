import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from detree.elements import (
    Cuboid,
    DistributionElement,
    MarginalModel,
    SplitMode,
    element_density,
    linear_inverse_cdf,
    make_element,
    marginal_density,
    mmse_slope,
    mmse_slopes,
    score_threshold,
    split_cuboid,
)
from detree.errors import UnsplittableInterval

trapezoid = getattr(np, "trapezoid", None) or np.trapz
thetas = st.floats(min_value=-2.0, max_value=2.0)


class TestMmseSlope:
    def test_centered_mean_gives_zero(self):
        for var in (0.0, 0.01, 0.08):
            for n in (1, 10, 1000):
                assert mmse_slope(0.5, var, n) == 0.0

    def test_large_n_limit(self):
        # data with slope 2 have mean (6 + 2) / 12
        assert mmse_slope(2.0 / 3.0, 1.0 / 18.0, 10 ** 12) == pytest.approx(2.0, abs=1e-9)

    def test_hand_example(self):
        # s = -1.2, variance 0.38 / 3, n = 3
        expected = 3 * (-1.2) ** 3 / (3 * 1.44 + 144 * 0.38 / 3)
        assert mmse_slope(0.4, 0.38 / 3, 3) == pytest.approx(expected, rel=1e-14)
        assert mmse_slope(0.4, 0.38 / 3, 3) == pytest.approx(-0.2298, abs=5e-5)

    def test_clipped(self):
        assert mmse_slope(1.0, 0.0, 5) == 2.0
        assert mmse_slope(0.0, 0.0, 5) == -2.0

    def test_zero_over_zero(self):
        assert mmse_slope(0.5, 0.0, 10) == 0.0

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(0)
        mean = rng.random(50)
        var = rng.random(50) * 0.1
        vec = mmse_slopes(mean, var, 17)
        np.testing.assert_allclose(vec, [mmse_slope(m, v, 17) for m, v in zip(mean, var)],
                                   rtol=1e-15)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30),
           st.floats(0.1, 100.0), st.floats(-50.0, 50.0))
    def test_affine_invariance(self, coords, scale, shift):
        x = np.array(coords)
        lo, hi = x.min() - 1.0, x.max() + 1.0
        z = (x - lo) / (hi - lo)
        y = x * scale + shift
        zy = (y - (lo * scale + shift)) / ((hi - lo) * scale)
        a = mmse_slope(z.mean(), z.var(), z.size)
        b = mmse_slope(zy.mean(), zy.var(), zy.size)
        assert a == pytest.approx(b, abs=1e-9)

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_shrinkage_lowers_mse(self, n):
        rng = np.random.default_rng(n)
        reps = 100_000
        for true_theta in (0.0, 0.5, 1.0, 1.5, 2.0, -1.0):
            z = linear_inverse_cdf(rng.random((reps, n)), true_theta)
            mean = z.mean(axis=1)
            var = z.var(axis=1)
            plain = 6.0 * (2.0 * mean - 1.0)
            shrunk = mmse_slopes(mean, var, n)
            mse_plain = np.mean((plain - true_theta) ** 2)
            mse_shrunk = np.mean((shrunk - true_theta) ** 2)
            assert mse_shrunk <= mse_plain


class TestMarginalDensity:
    def test_constant(self):
        assert marginal_density(MarginalModel.constant(), 1.0, 0.0, 4.0) == 0.25

    def test_linear_endpoints(self):
        m = MarginalModel.linear(2.0)
        assert marginal_density(m, 0.0, 0.0, 1.0) == 0.0
        assert marginal_density(m, 1.0, 0.0, 1.0) == 2.0

    def test_midpoint(self):
        assert marginal_density(MarginalModel.linear(-1.2), 0.5, 0.0, 1.0) == pytest.approx(1.0)

    def test_outside_is_zero(self):
        m = MarginalModel.linear(1.0)
        np.testing.assert_array_equal(marginal_density(m, np.array([-0.1, 1.1]), 0.0, 1.0), [0, 0])

    def test_slope_range_enforced(self):
        with pytest.raises(ValueError):
            MarginalModel.linear(2.5)

    @given(thetas, st.floats(-100, 100), st.floats(1e-3, 100))
    def test_integrates_to_one(self, theta, lo, width):
        hi = lo + width
        x = np.linspace(lo, hi, 1001)
        y = marginal_density(MarginalModel.linear(theta), x, lo, hi)
        # exact for a linear integrand
        assert trapezoid(y, x) == pytest.approx(1.0, abs=1e-10)
        assert np.all(y >= -1e-15)

    @given(thetas)
    def test_cdf_consistent(self, theta):
        m = MarginalModel.linear(theta)
        z = np.linspace(0, 1, 11)
        np.testing.assert_allclose(m.cdf01(z), [trapezoid(m.pdf01(np.linspace(0, t, 201)),
                                                         np.linspace(0, t, 201)) for t in z],
                                   atol=1e-12)

    def test_extreme_slope_touches_zero_once(self):
        z = np.linspace(0, 1, 101)
        for theta, where in ((2.0, 0), (-2.0, -1)):
            y = MarginalModel.linear(theta).pdf01(z)
            assert y[where] == 0.0
            assert np.count_nonzero(y == 0.0) == 1


class TestElementDensity:
    def test_constant_2d(self):
        de = make_element([0, 0], [2, 4], [0, 0], "constant", 5, 10)
        assert element_density(de, [1.0, 1.0]) == pytest.approx(0.0625)

    def test_outside(self):
        de = make_element([0, 0], [2, 4], [0, 0], "constant", 5, 10)
        assert element_density(de, [3.0, 1.0]) == 0.0

    def test_linear_1d(self):
        de = make_element([0], [1], [2.0], "linear", 1, 1)
        assert element_density(de, [0.75]) == pytest.approx(1.5)

    def test_half_open(self):
        de = make_element([0], [1], [0.0], "constant", 1, 1, closed_upper=[False])
        assert element_density(de, [1.0]) == 0.0
        de = make_element([0], [1], [0.0], "constant", 1, 1, closed_upper=[True])
        assert element_density(de, [1.0]) == 1.0

    @given(st.lists(thetas, min_size=1, max_size=4), st.integers(0, 50))
    def test_integral_equals_weight(self, th, count):
        d = len(th)
        de = make_element(np.zeros(d), np.arange(1, d + 1), th, "linear", count, 50)
        assert de.integral() == pytest.approx(count / 50, abs=1e-15)

    def test_count_validation(self):
        with pytest.raises(ValueError):
            DistributionElement(Cuboid([0], [1]), (MarginalModel.constant(),), 3, 2)


class TestSplit:
    def test_size(self):
        left, right, thr = split_cuboid(Cuboid([0.0], [4.0]), 0, SplitMode.SIZE)
        assert thr == 2.0
        assert left.upper[0] == 2.0 and right.lower[0] == 2.0

    def test_score(self):
        left, right, thr = split_cuboid(Cuboid([0.0], [1.0]), 0, SplitMode.SCORE,
                                        [0.1, 0.2, 0.8, 0.9])
        assert thr == pytest.approx(0.5)

    def test_score_ties_at_edge(self):
        with pytest.raises(UnsplittableInterval):
            split_cuboid(Cuboid([0.0], [1.0]), 0, SplitMode.SCORE, [0.0, 0.0, 0.0, 0.5])

    def test_score_needs_two(self):
        with pytest.raises(UnsplittableInterval):
            score_threshold([0.3], 0.0, 1.0)

    def test_size_too_narrow(self):
        lo = 1.0
        hi = np.nextafter(lo, 2.0)
        with pytest.raises(UnsplittableInterval):
            split_cuboid(Cuboid([lo], [hi]), 0, SplitMode.SIZE)

    @given(st.lists(st.integers(0, 1000), min_size=2, max_size=50))
    def test_score_balance(self, coords):
        c = np.array(coords) / 1000.0
        try:
            thr = score_threshold(c, -1e-9, 1.0 + 1e-9)
        except UnsplittableInterval:
            return
        below = np.count_nonzero(c < thr)
        k = c.size
        # without duplicates the split is as even as possible
        if np.unique(c).size == k:
            assert below == (k + 1) // 2

    @given(st.integers(1, 4), st.data())
    def test_children_tile_parent(self, d, data):
        lo = np.array(data.draw(st.lists(st.floats(-10, 0), min_size=d, max_size=d)))
        hi = lo + np.array(data.draw(st.lists(st.floats(0.01, 10), min_size=d, max_size=d)))
        dim = data.draw(st.integers(0, d - 1))
        parent = Cuboid(lo, hi)
        left, right, thr = split_cuboid(parent, dim, SplitMode.SIZE)
        assert left.volume + right.volume == pytest.approx(parent.volume, rel=1e-12)
        assert left.upper[dim] == right.lower[dim] == thr
        np.testing.assert_array_equal(left.lower, parent.lower)
        np.testing.assert_array_equal(right.upper, parent.upper)


class TestInverseCdf:
    @given(thetas, st.floats(0.0, 1.0))
    def test_inverts(self, theta, u):
        z = float(linear_inverse_cdf(u, theta))
        assert 0.0 <= z <= 1.0
        assert MarginalModel.linear(theta).cdf01(z) == pytest.approx(u, abs=1e-12)

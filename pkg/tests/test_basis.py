"""Tests for univariate basis functions."""

from __future__ import annotations

import numpy as np
import pytest

from transport_filter.core.exceptions import InsufficientSamplesError, MapArgumentError
from transport_filter.transport.basis import (
    LINEAR,
    BasisFunction,
    BasisKind,
    UnivariateFunction,
    monotone_bases,
    select_centers_scales,
)

CENTERED_KINDS = [
    BasisKind.GAUSSIAN_RBF,
    BasisKind.SIGMOID_LEFT,
    BasisKind.SIGMOID_BUMP,
    BasisKind.SIGMOID_RIGHT,
]


# =============================================================================
# Center and Scale Selection
# =============================================================================


class TestSelectCentersScales:
    """Tests for quantile-based center placement."""

    def test_zero_p_gives_no_centers(self):
        """p=0 returns empty center and scale arrays."""
        centers, scales = select_centers_scales(np.arange(10.0), 0)
        assert centers.size == 0
        assert scales.size == 0

    def test_nonmonotone_quantiles(self):
        """Non-monotone centers sit at quantiles j/(p+1)."""
        centers, scales = select_centers_scales(np.arange(101.0), 3, gamma=2.0)
        np.testing.assert_allclose(centers, [25.0, 50.0, 75.0])
        np.testing.assert_allclose(scales, [25.0, 50.0, 25.0])

    def test_monotone_quantiles(self):
        """Monotone centers are p + 2 points at quantiles j/(p+3)."""
        centers, _ = select_centers_scales(np.arange(101.0), 1, monotone=True)
        np.testing.assert_allclose(centers, [25.0, 50.0, 75.0])

    def test_constant_samples_fall_back_to_gamma(self):
        """Zero widths on degenerate samples fall back to gamma."""
        _, scales = select_centers_scales(np.ones(10), 2, gamma=2.0)
        np.testing.assert_allclose(scales, [2.0, 2.0])

    def test_too_few_samples_raises(self):
        """Fewer than p + 2 samples cannot place p centers."""
        with pytest.raises(InsufficientSamplesError):
            select_centers_scales(np.arange(3.0), 2)

    def test_nonpositive_gamma_raises(self):
        """gamma must be positive."""
        with pytest.raises(MapArgumentError):
            select_centers_scales(np.arange(10.0), 1, gamma=0.0)


# =============================================================================
# Basis Functions
# =============================================================================


class TestBasisFunction:
    """Tests for single basis functions."""

    @pytest.mark.parametrize("kind", CENTERED_KINDS + [BasisKind.LINEAR])
    def test_derivative_matches_central_difference(self, kind: BasisKind):
        """Closed-form derivatives agree with central differences."""
        basis = BasisFunction(kind, 0.3, 0.7)
        z = np.linspace(-3.0, 3.0, 41)
        h = 1e-5
        numeric = (basis.evaluate(z + h) - basis.evaluate(z - h)) / (2 * h)
        np.testing.assert_allclose(basis.derivative(z), numeric, atol=1e-6)

    @pytest.mark.parametrize("kind", CENTERED_KINDS)
    def test_second_derivative_matches_central_difference(self, kind: BasisKind):
        """Second derivatives agree with differences of the first."""
        basis = BasisFunction(kind, -0.4, 1.3)
        z = np.linspace(-3.0, 3.0, 41)
        h = 1e-5
        numeric = (basis.derivative(z + h) - basis.derivative(z - h)) / (2 * h)
        np.testing.assert_allclose(basis.second_derivative(z), numeric, atol=1e-6)

    def test_edge_terms_have_complementary_slopes(self):
        """Left and right edge derivatives at a shared center sum to one."""
        left = BasisFunction(BasisKind.SIGMOID_LEFT, 0.5, 2.0)
        right = BasisFunction(BasisKind.SIGMOID_RIGHT, 0.5, 2.0)
        z = np.linspace(-10.0, 10.0, 101)
        np.testing.assert_allclose(left.derivative(z) + right.derivative(z), 1.0)

    @pytest.mark.parametrize(("center", "scale"), [(0.0, 1.0), (-2.5, 0.3), (4.0, 3.0)])
    def test_edge_terms_tail_limits(self, center: float, scale: float):
        """Edge slopes are 1 on their own side and 0 on the far side, twenty widths out."""
        left = BasisFunction(BasisKind.SIGMOID_LEFT, center, scale)
        right = BasisFunction(BasisKind.SIGMOID_RIGHT, center, scale)
        below, above = center - 20.0 * scale, center + 20.0 * scale

        assert left.derivative(below) == pytest.approx(1.0, abs=1e-12)
        assert left.derivative(above) == pytest.approx(0.0, abs=1e-12)
        assert right.derivative(below) == pytest.approx(0.0, abs=1e-12)
        assert right.derivative(above) == pytest.approx(1.0, abs=1e-12)
        # the edge terms become z - center on their own side and flatten to 0 on the other
        assert left.evaluate(below) == pytest.approx(below - center, abs=1e-10)
        assert left.evaluate(above) == pytest.approx(0.0, abs=1e-10)
        assert right.evaluate(below) == pytest.approx(0.0, abs=1e-10)
        assert right.evaluate(above) == pytest.approx(above - center, abs=1e-10)

    def test_monotone_kinds_are_nondecreasing(self):
        """Every monotone kind has a nonnegative derivative."""
        z = np.linspace(-20.0, 20.0, 401)
        for kind in (BasisKind.SIGMOID_LEFT, BasisKind.SIGMOID_BUMP, BasisKind.SIGMOID_RIGHT):
            assert np.all(BasisFunction(kind, 0.0, 1.0).derivative(z) >= 0)

    @pytest.mark.parametrize("kind", CENTERED_KINDS + [BasisKind.LINEAR, BasisKind.CONSTANT])
    def test_destandardized_matches_standardized(self, kind: BasisKind):
        """A basis of (x - loc)/scale equals the returned raw basis up to an affine change."""
        location, scale = 1.5, 2.0
        basis = BasisFunction(kind, 0.2, 0.8)
        raw, multiplier, offset = basis.destandardized(location, scale)
        x = np.linspace(-5.0, 8.0, 27)
        np.testing.assert_allclose(
            basis.evaluate((x - location) / scale), multiplier * raw.evaluate(x) + offset, atol=1e-12
        )

    def test_nonpositive_scale_raises(self):
        """Centered bases need a positive width."""
        with pytest.raises(MapArgumentError):
            BasisFunction(BasisKind.GAUSSIAN_RBF, 0.0, 0.0)

    def test_dict_round_trip(self):
        """to_dict and from_dict preserve kind, center and scale."""
        basis = BasisFunction(BasisKind.SIGMOID_BUMP, 0.25, 1.75)
        assert BasisFunction.from_dict(basis.to_dict()) == basis


# =============================================================================
# Univariate Functions
# =============================================================================


class TestUnivariateFunction:
    """Tests for weighted basis sums."""

    def test_monotone_rejects_negative_coefficient(self):
        """Monotone functions need nonnegative coefficients."""
        with pytest.raises(MapArgumentError):
            UnivariateFunction(((-1.0, LINEAR),), monotone=True)

    def test_monotone_rejects_rbf(self):
        """Gaussian RBFs are not monotone."""
        rbf = BasisFunction(BasisKind.GAUSSIAN_RBF, 0.0, 1.0)
        with pytest.raises(MapArgumentError):
            UnivariateFunction(((1.0, rbf),), monotone=True)

    def test_sigmoid_family_is_strictly_increasing(self):
        """Positive combinations of the family have a positive derivative everywhere."""
        centers = np.array([-1.0, 0.0, 0.5, 2.0])
        bases = monotone_bases(centers, np.ones(4))
        fn = UnivariateFunction.from_terms([0.7, 0.1, 0.2, 1.3], bases, monotone=True)
        z = np.linspace(-50.0, 50.0, 2001)
        assert np.all(fn.derivative(z) > 0)
        assert np.all(np.diff(fn.evaluate(z)) > 0)

    def test_linear_is_linear(self):
        """UnivariateFunction.linear evaluates to slope * z."""
        fn = UnivariateFunction.linear(3.0)
        assert fn.is_linear
        np.testing.assert_allclose(fn.evaluate(np.array([1.0, -2.0])), [3.0, -6.0])

    def test_empty_centers_give_affine_family(self):
        """No centers means a single linear term."""
        assert monotone_bases(np.empty(0), np.empty(0)) == [LINEAR]

    def test_single_center_raises(self):
        """The sigmoid family needs both edge terms."""
        with pytest.raises(MapArgumentError):
            monotone_bases(np.array([0.0]), np.array([1.0]))

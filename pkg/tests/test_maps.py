"""Tests for monotone triangular maps."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import multivariate_normal

from transport_filter.core.exceptions import InversionError, MapArgumentError, MonotonicityError
from transport_filter.transport.basis import (
    BasisFunction,
    BasisKind,
    UnivariateFunction,
    monotone_bases,
    nonmonotone_bases,
)
from transport_filter.transport.maps import (
    MapComponent,
    TriangularMap,
    dumps_map,
    loads_map,
    solve_monotone,
)


def random_map(rng: np.random.Generator, n: int, p: int) -> TriangularMap:
    """Dense map with random positive monotone terms and random RBF cross terms."""
    components = []
    for k in range(n):
        centers = np.sort(rng.normal(size=p + 2)) if p else np.empty(0)
        mono_bases = monotone_bases(centers, rng.uniform(0.5, 2.0, size=centers.size))
        monotone = UnivariateFunction.from_terms(
            rng.uniform(0.1, 2.0, size=len(mono_bases)), mono_bases, monotone=True
        )
        nonmonotone = {}
        for i in range(k):
            bases = nonmonotone_bases(rng.normal(size=p), rng.uniform(0.5, 2.0, size=p))
            nonmonotone[i] = UnivariateFunction.from_terms(rng.normal(size=len(bases)), bases)
        components.append(
            MapComponent(k, tuple(range(k + 1)), monotone, nonmonotone, constant=float(rng.normal()))
        )
    return TriangularMap(tuple(components))


# =============================================================================
# Evaluation
# =============================================================================


class TestEvaluate:
    """Tests for forward evaluation."""

    def test_identity_map_returns_input(self, rng: np.random.Generator):
        """The identity map copies its input."""
        z = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(TriangularMap.identity(3).evaluate(z), z)

    def test_single_point_returns_vector(self, nonlinear_map: TriangularMap):
        """A 1-D input gives a 1-D output."""
        assert nonlinear_map.evaluate(np.array([0.1, 0.2])).shape == (2,)

    def test_wrong_width_raises(self, nonlinear_map: TriangularMap):
        """Inputs must have one column per input variable."""
        with pytest.raises(MapArgumentError):
            nonlinear_map.evaluate(np.zeros((4, 3)))

    def test_linear_map_is_matrix_product(self, linear_map: TriangularMap, rng: np.random.Generator):
        """A linear map evaluates as L z."""
        z = rng.normal(size=(10, 2))
        lower = np.array([[2.0, 0.0], [0.5, 1.5]])
        np.testing.assert_allclose(linear_map.evaluate(z), z @ lower.T)

    def test_components_ignore_inactive_inputs(self, rng: np.random.Generator):
        """A sparse component does not react to inputs outside its set."""
        component = MapComponent(2, (1, 2), UnivariateFunction.linear(1.0), {1: UnivariateFunction.linear(3.0)})
        z = rng.normal(size=(6, 3))
        moved = z.copy()
        moved[:, 0] += 100.0
        np.testing.assert_array_equal(component.evaluate(z), component.evaluate(moved))

    def test_partial_last_matches_central_difference(self, nonlinear_map: TriangularMap, rng: np.random.Generator):
        """Diagonal partials agree with central differences."""
        z = rng.normal(size=(20, 2))
        h = 1e-5
        diagonal = nonlinear_map.partial_diagonal(z)
        for k in range(2):
            step = np.zeros(2)
            step[k] = h
            numeric = (nonlinear_map.evaluate(z + step)[:, k] - nonlinear_map.evaluate(z - step)[:, k]) / (2 * h)
            np.testing.assert_allclose(diagonal[:, k], numeric, atol=1e-6)

    def test_wrong_variable_order_raises(self):
        """Component k must be monotone in input k."""
        component = MapComponent.identity(0, variable=1)
        with pytest.raises(MapArgumentError):
            TriangularMap((component,))

    def test_inputs_must_end_with_own_variable(self):
        """Nonmonotone terms are only allowed on earlier active inputs."""
        with pytest.raises(MapArgumentError):
            MapComponent(
                1, (1,), UnivariateFunction.linear(1.0), nonmonotone={0: UnivariateFunction.linear(1.0)}
            )


# =============================================================================
# Inversion
# =============================================================================


class TestInvert:
    """Tests for component-wise inversion."""

    def test_round_trip_nonlinear(self, nonlinear_map: TriangularMap, rng: np.random.Generator):
        """invert(evaluate(z)) recovers z."""
        z = 2.0 * rng.normal(size=(200, 2))
        np.testing.assert_allclose(nonlinear_map.invert(nonlinear_map.evaluate(z)), z, atol=1e-8)

    def test_round_trip_random_maps(self, rng: np.random.Generator):
        """S(S^{-1}(x)) = x for random dense monotone maps."""
        for n, p in [(1, 0), (3, 1), (5, 2), (8, 3)]:
            transport_map = random_map(rng, n, p)
            x = rng.normal(size=(100, n))
            residual = transport_map.evaluate(transport_map.invert(x)) - x
            assert np.abs(residual).max() <= 1e-8

    def test_single_point(self, nonlinear_map: TriangularMap):
        """Inverting one point returns one point."""
        z = np.array([0.3, -1.2])
        np.testing.assert_allclose(nonlinear_map.invert(nonlinear_map.evaluate(z)), z, atol=1e-8)

    def test_data_slot_conditions_inversion(self):
        """With a data slot, invert solves for the states given the data."""
        component = MapComponent(
            0, (0, 1), UnivariateFunction.linear(1.0), nonmonotone={0: UnivariateFunction.linear(1.0)}
        )
        joint = TriangularMap((component,), data_dimension=1)
        np.testing.assert_allclose(joint.invert(np.array([[3.0]]), data_values=[1.0]), [[2.0]])

    def test_data_slot_without_values_raises(self):
        """A map with a data slot needs data values to invert."""
        joint = TriangularMap.identity(2, data_dimension=1)
        with pytest.raises(MapArgumentError):
            joint.invert(np.zeros((3, 2)))

    def test_unbracketed_root_raises(self):
        """A bounded monotone function cannot reach every target."""
        bounded = UnivariateFunction(((1.0, BasisFunction(BasisKind.SIGMOID_BUMP, 0.0, 1.0)),), monotone=True)
        with pytest.raises(InversionError) as excinfo:
            solve_monotone(bounded, np.array([0.5, 2.0]), component=3)
        assert excinfo.value.component == 3
        assert excinfo.value.particles == (1,)

    def test_with_identity_replaces_one_component(self, nonlinear_map: TriangularMap, rng: np.random.Generator):
        """with_identity(k) makes component k copy its variable."""
        z = rng.normal(size=(5, 2))
        replaced = nonlinear_map.with_identity(1)
        np.testing.assert_array_equal(replaced.evaluate(z)[:, 1], z[:, 1])
        np.testing.assert_array_equal(replaced.evaluate(z)[:, 0], nonlinear_map.evaluate(z)[:, 0])


# =============================================================================
# Densities
# =============================================================================


class TestPullbackDensity:
    """Tests for the pullback of the standard normal."""

    def test_linear_map_gives_gaussian(self, linear_map: TriangularMap, rng: np.random.Generator):
        """The pullback through L z is N(0, (L'L)^{-1})."""
        lower = np.array([[2.0, 0.0], [0.5, 1.5]])
        covariance = np.linalg.inv(lower.T @ lower)
        z = rng.normal(size=(50, 2))
        expected = multivariate_normal(mean=np.zeros(2), cov=covariance).logpdf(z)
        np.testing.assert_allclose(linear_map.log_pullback_density(z), expected, atol=1e-10)

    def test_one_dimensional_density_integrates_to_one(self, rng: np.random.Generator):
        """exp(log pullback) of random 1-D maps has unit mass."""
        grid = np.linspace(-60.0, 60.0, 200_001)
        for _ in range(5):
            transport_map = random_map(rng, 1, 2)
            density = np.exp(transport_map.log_pullback_density(grid[:, None]))
            assert trapezoid(density, grid) == pytest.approx(1.0, abs=1e-3)

    def test_gradient_matches_central_difference(self, nonlinear_map: TriangularMap, rng: np.random.Generator):
        """The analytic gradient agrees with central differences."""
        z = rng.normal(size=(10, 2))
        h = 1e-6
        numeric = np.empty_like(z)
        for j in range(2):
            step = np.zeros(2)
            step[j] = h
            numeric[:, j] = (
                nonlinear_map.log_pullback_density(z + step) - nonlinear_map.log_pullback_density(z - step)
            ) / (2 * h)
        np.testing.assert_allclose(nonlinear_map.grad_log_pullback_density(z), numeric, atol=1e-5)

    def test_flat_component_raises(self):
        """A zero diagonal derivative has no density."""
        flat = TriangularMap((MapComponent(0, (0,), UnivariateFunction.linear(0.0)),))
        with pytest.raises(MonotonicityError):
            flat.log_pullback_density(np.zeros((2, 1)))

    def test_pushforward_samples_have_target_moments(self, linear_map: TriangularMap, rng: np.random.Generator):
        """Inverse-mapped normals follow the pullback density."""
        lower = np.array([[2.0, 0.0], [0.5, 1.5]])
        covariance = np.linalg.inv(lower.T @ lower)
        samples = linear_map.sample_pushforward(40_000, rng)
        np.testing.assert_allclose(np.cov(samples, rowvar=False), covariance, atol=0.02)


# =============================================================================
# Serialization
# =============================================================================


class TestSerialization:
    """Tests for JSON map documents."""

    def test_round_trip_is_exact(self, nonlinear_map: TriangularMap, rng: np.random.Generator):
        """A reloaded map evaluates bit-identically."""
        reloaded = loads_map(dumps_map(nonlinear_map))
        z = rng.normal(size=(10, 2))
        np.testing.assert_array_equal(reloaded.evaluate(z), nonlinear_map.evaluate(z))

    def test_rejects_foreign_document(self):
        """Documents without the map format tag are rejected."""
        with pytest.raises(MapArgumentError):
            TriangularMap.from_dict({"format": "something-else", "components": [], "dimension": 0})

    def test_data_dimension_survives(self):
        """The data slot width is stored."""
        joint = TriangularMap.identity(2, data_dimension=1)
        assert loads_map(dumps_map(joint)).data_dimension == 1

"""Tests for the analysis steps."""

from __future__ import annotations

import numpy as np
import pytest

from transport_filter.core.exceptions import (
    AnalysisError,
    ConfigError,
    DegeneracyError,
    FitError,
    LikelihoodUnavailableError,
    MapArgumentError,
)
from transport_filter.core.models import FilterConfig, FilterKind
from transport_filter.dynamics.observations import GaussianNoise, ScalarObservation
from transport_filter.estimation.sparsity import cycle_distance, line_distance
from transport_filter.filters.deterministic import (
    deterministic_local_analysis,
    deterministic_map_analysis,
)
from transport_filter.filters.enkf import enkf_analysis, kalman_gain
from transport_filter.filters.ensemble import Ensemble, gaspari_cohn, inflate
from transport_filter.filters.particle import sir_step, systematic_resample
from transport_filter.filters.sequential import scalar_analysis, sequential_assimilate
from transport_filter.filters.stochastic_map import stochastic_map_analysis

PRIOR_COVARIANCE = np.array([[1.0, 0.8], [0.8, 1.0]])
UNIT_NOISE = GaussianNoise(1.0)


def kalman_posterior(covariance: np.ndarray, y: float, noise_var: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Exact posterior of a zero-mean Gaussian prior observed in its first component."""
    gain = covariance[:, 0] / (covariance[0, 0] + noise_var)
    mean = gain * y
    posterior = covariance - np.outer(gain, covariance[0])
    return mean, posterior


@pytest.fixture
def prior_states(rng: np.random.Generator) -> np.ndarray:
    """4000 draws from a correlated 2-D Gaussian."""
    return rng.multivariate_normal(np.zeros(2), PRIOR_COVARIANCE, size=4000)


# =============================================================================
# Ensembles
# =============================================================================


class TestEnsemble:
    """Tests for the Ensemble container and helpers."""

    def test_needs_two_members(self):
        """Single-member ensembles are rejected."""
        with pytest.raises(MapArgumentError):
            Ensemble(np.zeros((1, 3)))

    def test_weights_must_sum_to_one(self):
        """Weights are validated."""
        with pytest.raises(MapArgumentError):
            Ensemble(np.zeros((2, 1)), weights=np.array([0.3, 0.3]))

    def test_weighted_mean(self):
        """Weighted ensembles use their weights for the mean."""
        ensemble = Ensemble(np.array([[0.0], [4.0]]), weights=np.array([0.75, 0.25]))
        np.testing.assert_allclose(ensemble.mean(), [1.0])

    def test_with_states_drops_simulated_observations(self):
        """Moved particles no longer match their simulated observations."""
        ensemble = Ensemble(np.zeros((3, 2)), simulated_obs=np.ones((3, 1)))
        assert ensemble.with_states(np.ones((3, 2))).simulated_obs is None

    def test_inflation_about_the_mean(self):
        """{0, 2} inflated by 2 becomes {-1, 3}."""
        np.testing.assert_allclose(inflate(np.array([[0.0], [2.0]]), 2.0), [[-1.0], [3.0]])

    def test_inflation_keeps_mean(self, prior_states: np.ndarray):
        """Inflation preserves the ensemble mean and scales the spread."""
        inflated = inflate(Ensemble(prior_states), 1.5)
        np.testing.assert_allclose(inflated.mean(), prior_states.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(inflated.covariance(), 2.25 * np.cov(prior_states, rowvar=False))

    def test_deflation_raises(self):
        """Inflation factors below one are rejected."""
        with pytest.raises(MapArgumentError):
            inflate(np.zeros((2, 1)), 0.9)

    def test_gaspari_cohn_values(self):
        """The taper is 1 at 0, 5/24 at c and 0 from 2c on."""
        values = gaspari_cohn(np.array([0.0, 3.0, 6.0, 9.0]), 3.0)
        np.testing.assert_allclose(values, [1.0, 5.0 / 24.0, 0.0, 0.0], atol=1e-12)

    def test_gaspari_cohn_is_continuous(self):
        """Both pieces meet at distance c."""
        below = gaspari_cohn(np.array([1.0 - 1e-9]), 1.0)
        above = gaspari_cohn(np.array([1.0 + 1e-9]), 1.0)
        assert below[0] == pytest.approx(above[0], abs=1e-7)


# =============================================================================
# EnKF
# =============================================================================


class TestEnkf:
    """Tests for the perturbed-observation EnKF."""

    def test_scalar_gaussian_posterior(self, rng: np.random.Generator):
        """Prior N(0, 1), unit noise and y = 1 give mean 1/2 and variance 1/2."""
        states = rng.standard_normal((40_000, 1))
        simulated = states + rng.standard_normal((40_000, 1))
        analysis = enkf_analysis(Ensemble(states, simulated_obs=simulated), [1.0], [0])
        assert analysis.states.mean() == pytest.approx(0.5, abs=0.02)
        assert analysis.states.var() == pytest.approx(0.5, abs=0.02)

    def test_gain_of_exact_moments(self):
        """The gain is Sigma_XY / Sigma_Y."""
        states = np.array([[-1.0, -2.0], [1.0, 2.0]])
        simulated = np.array([[-2.0], [2.0]])
        np.testing.assert_allclose(kalman_gain(states, simulated), [[0.5], [1.0]])

    def test_localization_freezes_distant_components(self, rng: np.random.Generator):
        """Components beyond 2c from the observation are untouched."""
        states = rng.normal(size=(50, 8))
        simulated = states[:, :1] + rng.normal(size=(50, 1))
        analysis = enkf_analysis(
            Ensemble(states, simulated_obs=simulated), [0.5], [0], radius=1.0, distance=cycle_distance(8)
        )
        np.testing.assert_array_equal(analysis.states[:, 2:7], states[:, 2:7])
        assert not np.array_equal(analysis.states[:, 0], states[:, 0])

    def test_missing_simulated_observations_raise(self):
        """The EnKF needs perturbed observations."""
        with pytest.raises(MapArgumentError):
            enkf_analysis(Ensemble(np.zeros((3, 2))), [0.0], [0])


# =============================================================================
# Stochastic Map Filter
# =============================================================================


class TestStochasticMap:
    """Tests for the likelihood-free map analysis."""

    def test_equals_enkf_for_linear_maps(self, rng: np.random.Generator):
        """Affine dense maps with shared perturbations reproduce the EnKF exactly."""
        states = rng.multivariate_normal(np.zeros(4), np.eye(4) + 0.5, size=200)
        noise = rng.standard_normal(200)
        observation = ScalarObservation(0.7, 2, UNIT_NOISE)
        config = FilterConfig(kind=FilterKind.STOCHASTIC_MAP, p=0, local_likelihood=False)

        mapped = stochastic_map_analysis(
            Ensemble(states), observation, config, distance=line_distance, noise=noise
        )
        simulated = states[:, 2:3] + noise[:, None]
        kalman = enkf_analysis(Ensemble(states, simulated_obs=simulated), [0.7], [2])
        np.testing.assert_allclose(mapped.states, kalman.states, atol=1e-8)

    def test_identity_cutoff_leaves_other_components(self, rng: np.random.Generator):
        """With cutoff 1 only the observed component moves."""
        states = rng.normal(size=(100, 5))
        observation = ScalarObservation(0.2, 3, UNIT_NOISE)
        config = FilterConfig(p=1, identity_cutoff=1)
        analysis = stochastic_map_analysis(
            Ensemble(states), observation, config, distance=line_distance, rng=rng
        )
        unobserved = [0, 1, 2, 4]
        np.testing.assert_array_equal(analysis.states[:, unobserved], states[:, unobserved])
        assert not np.array_equal(analysis.states[:, 3], states[:, 3])

    def test_gaussian_moments(self, prior_states: np.ndarray, rng: np.random.Generator):
        """Linear maps reach the Kalman posterior moments."""
        observation = ScalarObservation(1.0, 0, UNIT_NOISE, likelihood_available=False)
        config = FilterConfig(p=0)
        analysis = stochastic_map_analysis(
            Ensemble(prior_states), observation, config, distance=line_distance, rng=rng
        )
        mean, covariance = kalman_posterior(PRIOR_COVARIANCE, 1.0)
        np.testing.assert_allclose(analysis.mean(), mean, atol=0.06)
        np.testing.assert_allclose(analysis.covariance(), covariance, atol=0.06)

    @pytest.mark.parametrize("config", [FilterConfig(p=0), FilterConfig(p=1, radius=2.5, inflation=1.05)])
    def test_relabeling_components_commutes(self, config: FilterConfig, rng: np.random.Generator):
        """Relabeling the state together with its distance relabels the analysis."""
        positions = np.array([0.0, 1.1, 2.3, 3.6, 5.0])

        def distance(i: int, j: int) -> float:
            return abs(positions[i] - positions[j])

        states = rng.multivariate_normal(np.zeros(5), 0.5 * np.eye(5) + 0.5, size=300)
        noise = rng.standard_normal(300)
        analysis = stochastic_map_analysis(
            Ensemble(states), ScalarObservation(0.4, 1, UNIT_NOISE), config, distance=distance, noise=noise
        )

        relabel = [3, 0, 4, 1, 2]  # new component j is old component relabel[j]

        def relabeled_distance(i: int, j: int) -> float:
            return distance(relabel[i], relabel[j])

        moved = stochastic_map_analysis(
            Ensemble(states[:, relabel]),
            ScalarObservation(0.4, relabel.index(1), UNIT_NOISE),
            config,
            distance=relabeled_distance,
            noise=noise,
        )
        np.testing.assert_allclose(moved.states, analysis.states[:, relabel], atol=1e-10)

    def test_needs_noise_source(self, prior_states: np.ndarray):
        """Without a stream or draws the perturbations are undefined."""
        observation = ScalarObservation(1.0, 0, UNIT_NOISE)
        with pytest.raises(MapArgumentError):
            stochastic_map_analysis(Ensemble(prior_states), observation, FilterConfig(), distance=line_distance)


# =============================================================================
# Deterministic Map Filters
# =============================================================================


class TestDeterministicMaps:
    """Tests for the likelihood-based map analyses."""

    def test_map_analysis_gaussian_moments(self, prior_states: np.ndarray, rng: np.random.Generator):
        """The density-targeted analysis reaches the Kalman posterior."""
        observation = ScalarObservation(1.0, 0, UNIT_NOISE)
        config = FilterConfig(kind=FilterKind.DETERMINISTIC_MAP, p=0, reference_samples=4000)
        analysis = deterministic_map_analysis(
            Ensemble(prior_states), observation, config, distance=line_distance, rng=rng
        )
        mean, covariance = kalman_posterior(PRIOR_COVARIANCE, 1.0)
        np.testing.assert_allclose(analysis.mean(), mean, atol=0.06)
        np.testing.assert_allclose(analysis.covariance(), covariance, atol=0.06)

    def test_map_analysis_keeps_components_past_cutoff(self, rng: np.random.Generator):
        """Components past the identity cutoff keep their forecast values exactly."""
        covariance = 0.5 * np.eye(5) + 0.5
        states = 3.0 + 2.0 * rng.multivariate_normal(np.zeros(5), covariance, size=400)
        observation = ScalarObservation(4.0, 2, UNIT_NOISE)
        config = FilterConfig(kind=FilterKind.DETERMINISTIC_MAP, p=0, identity_cutoff=2, reference_samples=2000)
        analysis = deterministic_map_analysis(
            Ensemble(states), observation, config, distance=line_distance, rng=rng
        )
        # permuted order is 2, 1, 3, 0, 4, so the cutoff keeps 2 and 1
        np.testing.assert_array_equal(analysis.states[:, [0, 3, 4]], states[:, [0, 3, 4]])
        assert not np.array_equal(analysis.states[:, 2], states[:, 2])
        assert not np.array_equal(analysis.states[:, 1], states[:, 1])
        assert np.all(np.isfinite(analysis.states))

    def test_local_analysis_gaussian_moments(self, prior_states: np.ndarray):
        """The 1-D rearrangement analysis reaches the Kalman posterior."""
        observation = ScalarObservation(1.0, 0, UNIT_NOISE)
        config = FilterConfig(kind=FilterKind.DETERMINISTIC_LOCAL, p=0)
        analysis = deterministic_local_analysis(
            Ensemble(prior_states), observation, config, distance=line_distance
        )
        mean, covariance = kalman_posterior(PRIOR_COVARIANCE, 1.0)
        np.testing.assert_allclose(analysis.mean(), mean, atol=0.06)
        np.testing.assert_allclose(analysis.covariance(), covariance, atol=0.06)

    def test_local_analysis_is_deterministic(self, prior_states: np.ndarray):
        """Repeated local analyses give identical particles."""
        observation = ScalarObservation(-0.5, 1, UNIT_NOISE)
        config = FilterConfig(kind=FilterKind.DETERMINISTIC_LOCAL, p=1)
        first = deterministic_local_analysis(Ensemble(prior_states), observation, config, distance=line_distance)
        second = deterministic_local_analysis(Ensemble(prior_states), observation, config, distance=line_distance)
        np.testing.assert_array_equal(first.states, second.states)

    def test_likelihood_is_required(self, prior_states: np.ndarray):
        """Deterministic analyses evaluate the likelihood."""
        observation = ScalarObservation(1.0, 0, UNIT_NOISE, likelihood_available=False)
        config = FilterConfig(kind=FilterKind.DETERMINISTIC_LOCAL)
        with pytest.raises(LikelihoodUnavailableError):
            deterministic_local_analysis(Ensemble(prior_states), observation, config, distance=line_distance)


# =============================================================================
# Particle Filter
# =============================================================================


class TestSir:
    """Tests for the SIR analysis."""

    def test_gaussian_posterior_mean(self, rng: np.random.Generator):
        """Prior N(0, 1) and y = 1 give posterior mean 1/2."""
        states = rng.standard_normal((100_000, 1))
        update = sir_step(Ensemble(states), [ScalarObservation(1.0, 0, UNIT_NOISE)], rng)
        assert update.ensemble.states.mean() == pytest.approx(0.5, abs=3 * np.sqrt(0.5 / 100_000) * 3)
        assert 1.0 <= update.ess <= 100_000

    def test_resampled_weights_are_uniform(self, rng: np.random.Generator):
        """Resampling returns equally weighted particles."""
        update = sir_step(Ensemble(rng.normal(size=(50, 2))), [ScalarObservation(0.0, 1, UNIT_NOISE)], rng)
        np.testing.assert_allclose(update.ensemble.weights, 1.0 / 50)
        assert update.ensemble.size == 50

    def test_vanishing_weights_raise(self, rng: np.random.Generator):
        """An impossible observation leaves no weight."""
        observation = ScalarObservation(np.inf, 0, UNIT_NOISE)
        with pytest.raises(DegeneracyError):
            sir_step(Ensemble(rng.normal(size=(10, 1))), [observation], rng)

    def test_systematic_uniform_weights(self, rng: np.random.Generator):
        """Uniform weights select every particle exactly once."""
        indices = systematic_resample(np.full(8, 1.0 / 8), rng)
        np.testing.assert_array_equal(np.sort(indices), np.arange(8))

    def test_systematic_point_mass(self, rng: np.random.Generator):
        """A point mass selects only that particle."""
        indices = systematic_resample(np.array([0.0, 1.0, 0.0]), rng)
        np.testing.assert_array_equal(indices, [1, 1, 1])


# =============================================================================
# Sequential Assimilation
# =============================================================================


class TestSequential:
    """Tests for scalar-by-scalar assimilation."""

    def test_observations_in_ascending_order(self):
        """Scalar analyses run by increasing observed index."""
        seen = []

        def record(ensemble: Ensemble, observation: ScalarObservation) -> Ensemble:
            seen.append(observation.index)
            return ensemble

        observations = [ScalarObservation(0.0, i, UNIT_NOISE) for i in (3, 0, 2)]
        sequential_assimilate(Ensemble(np.zeros((2, 4))), observations, record)
        assert seen == [0, 2, 3]

    def test_failures_name_the_observation(self):
        """Analysis failures are wrapped with the observation index."""

        def fail(ensemble: Ensemble, observation: ScalarObservation) -> Ensemble:
            if observation.index == 2:
                raise FitError("boom")
            return ensemble

        observations = [ScalarObservation(0.0, i, UNIT_NOISE) for i in (0, 2)]
        with pytest.raises(AnalysisError) as excinfo:
            sequential_assimilate(Ensemble(np.zeros((2, 3))), observations, fail)
        assert excinfo.value.observation_index == 2

    def test_batch_filters_have_no_scalar_form(self):
        """EnKF and SIR analyses are not bound per scalar."""
        with pytest.raises(ConfigError):
            scalar_analysis(FilterConfig(kind=FilterKind.SIR), line_distance, lambda _obs: np.random.default_rng())

    def test_sequential_matches_joint_kalman(self, rng: np.random.Generator):
        """Two independent scalar observations give the joint Kalman update."""
        states = rng.multivariate_normal(np.zeros(2), PRIOR_COVARIANCE, size=4000)
        config = FilterConfig(kind=FilterKind.STOCHASTIC_MAP, p=0)
        analysis_fn = scalar_analysis(config, line_distance, lambda _obs: rng)
        observations = [ScalarObservation(1.0, 0, UNIT_NOISE), ScalarObservation(-0.5, 1, UNIT_NOISE)]
        analysis = sequential_assimilate(Ensemble(states), observations, analysis_fn)

        precision = np.linalg.inv(PRIOR_COVARIANCE) + np.eye(2)
        covariance = np.linalg.inv(precision)
        mean = covariance @ np.array([1.0, -0.5])
        np.testing.assert_allclose(analysis.mean(), mean, atol=0.06)
        np.testing.assert_allclose(analysis.covariance(), covariance, atol=0.06)

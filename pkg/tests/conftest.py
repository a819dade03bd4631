"""Pytest configuration and shared fixtures."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import yaml

from transport_filter.core.models import (
    DynamicsKind,
    DynamicsSpec,
    ExperimentConfig,
    FilterConfig,
    FilterKind,
    ObservationSpec,
)
from transport_filter.transport.basis import BasisFunction, BasisKind, UnivariateFunction
from transport_filter.transport.maps import MapComponent, TriangularMap


# =============================================================================
# Random Data Fixtures
# =============================================================================

@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test draws the same numbers."""
    return np.random.default_rng(20240607)


@pytest.fixture
def gaussian_covariance() -> np.ndarray:
    """A 3x3 SPD covariance with nontrivial correlations."""
    return np.array(
        [
            [2.0, 0.8, 0.3],
            [0.8, 1.5, 0.5],
            [0.3, 0.5, 1.0],
        ]
    )


@pytest.fixture
def gaussian_samples(rng: np.random.Generator, gaussian_covariance: np.ndarray) -> np.ndarray:
    """50 000 draws from N(m, gaussian_covariance)."""
    mean = np.array([1.0, -1.0, 0.5])
    return rng.multivariate_normal(mean, gaussian_covariance, size=50_000)


@pytest.fixture
def bimodal_samples(rng: np.random.Generator) -> np.ndarray:
    """Equal mixture of N(-2, 0.5^2) and N(2, 0.5^2) as a (4000, 1) column."""
    left = rng.normal(-2.0, 0.5, 2000)
    right = rng.normal(2.0, 0.5, 2000)
    return np.concatenate([left, right])[:, None]


# =============================================================================
# Map Fixtures
# =============================================================================

@pytest.fixture
def sigmoid_family() -> tuple[BasisFunction, ...]:
    """Left edge, one interior sigmoid and a right edge."""
    return (
        BasisFunction(BasisKind.SIGMOID_LEFT, -1.0, 1.0),
        BasisFunction(BasisKind.SIGMOID_BUMP, 0.0, 1.0),
        BasisFunction(BasisKind.SIGMOID_RIGHT, 1.0, 1.0),
    )


@pytest.fixture
def nonlinear_map(sigmoid_family: tuple[BasisFunction, ...]) -> TriangularMap:
    """Two-dimensional map with a sigmoid diagonal and an RBF cross term."""
    first = MapComponent(
        index=0,
        active_inputs=(0,),
        monotone=UnivariateFunction.from_terms([1.0, 0.5, 1.0], sigmoid_family, monotone=True),
        constant=0.2,
    )
    second = MapComponent(
        index=1,
        active_inputs=(0, 1),
        monotone=UnivariateFunction.linear(2.0),
        nonmonotone={
            0: UnivariateFunction.from_terms(
                [0.5, 1.5],
                [BasisFunction(BasisKind.LINEAR), BasisFunction(BasisKind.GAUSSIAN_RBF, 0.0, 1.0)],
            )
        },
        constant=-0.3,
    )
    return TriangularMap((first, second))


@pytest.fixture
def linear_map() -> TriangularMap:
    """S(z) = L z with L = [[2, 0], [0.5, 1.5]]."""
    first = MapComponent(0, (0,), UnivariateFunction.linear(2.0))
    second = MapComponent(
        1, (0, 1), UnivariateFunction.linear(1.5), nonmonotone={0: UnivariateFunction.linear(0.5)}
    )
    return TriangularMap((first, second))


# =============================================================================
# Configuration Fixtures
# =============================================================================

@pytest.fixture
def lorenz63_spec() -> DynamicsSpec:
    """Lorenz-63 with the usual coefficients."""
    return DynamicsSpec(kind=DynamicsKind.LORENZ63, dt=0.01, dt_obs=0.1)


@pytest.fixture
def lorenz96_spec() -> DynamicsSpec:
    """An eight-site Lorenz-96 ring."""
    return DynamicsSpec(kind=DynamicsKind.LORENZ96, dimension=8, dt=0.05, dt_obs=0.1)


@pytest.fixture
def small_config() -> ExperimentConfig:
    """Short Lorenz-96 stochastic map run that finishes in seconds."""
    return ExperimentConfig(
        name="small",
        dynamics=DynamicsSpec(kind=DynamicsKind.LORENZ96, dimension=8, dt=0.05, dt_obs=0.1),
        observation=ObservationSpec(count=4, theta=1.0),
        filter=FilterConfig(kind=FilterKind.STOCHASTIC_MAP, p=0, radius=2, inflation=1.02),
        ensemble_size=40,
        spinup_steps=20,
        test_steps=10,
        metric_window=5,
        seed=7,
    )


@pytest.fixture
def enkf_config() -> ExperimentConfig:
    """Short fully observed Lorenz-63 EnKF run."""
    return ExperimentConfig(
        name="enkf63",
        dynamics=DynamicsSpec(kind=DynamicsKind.LORENZ63, dt=0.05, dt_obs=0.1),
        observation=ObservationSpec(count=3, theta=2.0),
        filter=FilterConfig(kind=FilterKind.ENKF, inflation=1.02),
        ensemble_size=30,
        spinup_steps=10,
        test_steps=8,
        metric_window=4,
        seed=3,
    )


@pytest.fixture
def config_file(tmp_path: Path, enkf_config: ExperimentConfig) -> Path:
    """The EnKF config written as a YAML file."""
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(enkf_config.model_dump(mode="json")))
    return path


@pytest.fixture
def chain_edge_file(tmp_path: Path) -> Path:
    """Edge list of the chain 1-2-3-4 with a comment line."""
    path = tmp_path / "chain.txt"
    path.write_text("# chain graph\n1 2\n2 3\n3 4\n")
    return path

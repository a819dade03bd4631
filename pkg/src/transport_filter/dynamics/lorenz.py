"""
Lorenz-63 and Lorenz-96 dynamics with classical RK4 integration.

Every routine works on a single state (n,) or an ensemble (M, n); the
right-hand sides are vectorized over rows.
"""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from transport_filter.core.exceptions import DivergenceError, MapArgumentError
from transport_filter.core.models import DynamicsKind, DynamicsSpec

logger = logging.getLogger(__name__)

RightHandSide = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def lorenz63_rhs(
    z: NDArray[np.float64], sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0
) -> NDArray[np.float64]:
    x, y, w = z[..., 0], z[..., 1], z[..., 2]
    return np.stack([sigma * (y - x), x * (rho - w) - y, x * y - beta * w], axis=-1)


def lorenz96_rhs(z: NDArray[np.float64], forcing: float = 8.0) -> NDArray[np.float64]:
    """dz_j/dt = (z_{j+1} - z_{j-2}) z_{j-1} - z_j + F with periodic indices."""
    ahead = np.roll(z, -1, axis=-1)
    behind = np.roll(z, 1, axis=-1)
    behind2 = np.roll(z, 2, axis=-1)
    return (ahead - behind2) * behind - z + forcing


def rhs(spec: DynamicsSpec, z: ArrayLike) -> NDArray[np.float64]:
    """Right-hand side of the configured system at one state or a batch."""
    state = np.asarray(z, dtype=float)
    if state.shape[-1] != spec.dimension:
        raise MapArgumentError(f"state has {state.shape[-1]} components, dynamics need {spec.dimension}")
    if spec.kind == DynamicsKind.LORENZ63:
        return lorenz63_rhs(state, spec.sigma, spec.rho, spec.beta)
    return lorenz96_rhs(state, spec.forcing)


def _as_rhs(spec_or_rhs: DynamicsSpec | RightHandSide) -> RightHandSide:
    if isinstance(spec_or_rhs, DynamicsSpec):
        spec = spec_or_rhs
        return lambda z: rhs(spec, z)
    return spec_or_rhs


def rk4_step(
    spec_or_rhs: DynamicsSpec | RightHandSide,
    z: ArrayLike,
    dt: float,
) -> NDArray[np.float64]:
    """
    One classical fourth-order Runge-Kutta step.

    Raises DivergenceError when the new state is not finite.
    """
    if not dt > 0:
        raise MapArgumentError(f"dt must be positive, got {dt}")
    f = _as_rhs(spec_or_rhs)
    state = np.asarray(z, dtype=float)
    k1 = f(state)
    k2 = f(state + 0.5 * dt * k1)
    k3 = f(state + 0.5 * dt * k2)
    k4 = f(state + dt * k3)
    out = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("state became non-finite during integration")
    return out


def propagate(
    spec: DynamicsSpec,
    z: ArrayLike,
    rng: np.random.Generator | None = None,
    rhs_override: RightHandSide | None = None,
) -> NDArray[np.float64]:
    """
    Advance one observation interval (dt_obs / dt RK4 steps).

    With ``process_noise_std`` > 0, N(0, std^2 I) is added after every
    integration step; the noise for the whole interval is drawn as one
    block from ``rng``. ``rhs_override`` replaces the model's vector field.
    """
    state = np.asarray(z, dtype=float).copy()
    steps = spec.steps_per_cycle
    f = rhs_override if rhs_override is not None else _as_rhs(spec)
    noise = None
    if spec.process_noise_std > 0:
        if rng is None:
            raise MapArgumentError("process noise is configured but no random stream was given")
        noise = spec.process_noise_std * rng.standard_normal((steps, *state.shape))
    for s in range(steps):
        state = rk4_step(f, state, spec.dt)
        if noise is not None:
            state += noise[s]
    return state


def trajectory(
    spec: DynamicsSpec,
    z0: ArrayLike,
    cycles: int,
    rng_for_cycle: Callable[[int], np.random.Generator] | None = None,
) -> NDArray[np.float64]:
    """States at observation times 0..cycles, shape (cycles + 1, n)."""
    states = np.empty((cycles + 1, spec.dimension))
    states[0] = np.asarray(z0, dtype=float)
    for k in range(1, cycles + 1):
        rng = rng_for_cycle(k) if rng_for_cycle is not None else None
        try:
            states[k] = propagate(spec, states[k - 1], rng)
        except DivergenceError as exc:
            exc.step = k
            raise
    return states

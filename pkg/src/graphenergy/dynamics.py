"""Continuous-time feature flows discretized with explicit Euler.

Three right-hand sides:

* diffusion: ``dX/dt = Delta X``; the Dirichlet energy decays like
  ``exp(-2 lambda_2 t)`` asymptotically on a connected graph;
* gated diffusion: ``dX/dt = m(t) Delta X`` with the scalar gate
  ``m = ∫ |Delta X|^2 dmu``; the gate starves the flow as features
  homogenize, turning exponential decay into an algebraic ``C / t`` tail;
* normalized aggregation: ``dX/dt = P(Norm X)`` where ``Norm`` projects
  every row to the sphere of radius ``r = sqrt(n / ∫ 1 dmu)``; the
  Dirichlet energy can grow, but only quadratically in time.

For the gated flow, ``FlowSpec.dt`` is the *effective* step: each Euler
update is ``X += dt * Delta X`` while real time advances by ``dt / m``.
That keeps the stability constraint (effective step times spectral radius)
satisfied uniformly and reaches long horizons in logarithmically many
steps. The other flows treat ``dt`` as the plain step size.

A fixed-step classical Runge-Kutta integrator is included solely as a
test oracle for cross-checking the Euler paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from graphenergy.graph import (
    WeightedGraph,
    aggregate_apply,
    dense_spectrum,
    derivative_energy,
    integrate,
    laplacian_apply,
)

FLOW_HEAT = "heat"
FLOW_GATED = "nonlocal"
FLOW_NORMALIZED = "preln"
FLOW_KINDS = (FLOW_HEAT, FLOW_GATED, FLOW_NORMALIZED)

_DENSE_SPECTRUM_LIMIT = 2000


class FlowInstabilityError(RuntimeError):
    """Step size too large for the spectral radius, or energy increased."""


@dataclass(frozen=True)
class FlowSpec:
    """Flow selector and integration controls.

    ``dt=None`` picks ``0.5 * safety / lambda_max``. Every recorded state
    keeps its time stamp; recording happens every ``record_stride`` steps
    plus the initial and final states.
    """

    kind: str
    horizon: float
    dt: float | None = None
    record_stride: int = 1
    safety: float = 0.9

    def __post_init__(self) -> None:
        if self.kind not in FLOW_KINDS:
            raise ValueError(f"unknown flow kind {self.kind!r}; expected {FLOW_KINDS}")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Recorded times, states, and scalar series of one flow run.

    ``dirichlet`` and ``laplacian`` are the order-1 and order-2 energies
    on the flow's own graph; ``gate`` is ``∫ |Delta X|^2 dmu``;
    ``norm_mass`` is ``∫ |Norm X|^2 dmu`` and stays None outside the
    normalized flow.
    """

    kind: str
    times: np.ndarray
    states: tuple[np.ndarray, ...]
    dirichlet: np.ndarray
    laplacian: np.ndarray
    gate: np.ndarray
    norm_mass: np.ndarray | None
    lambda_max: float

    def relative_rate(self) -> tuple[np.ndarray, np.ndarray]:
        """Discrete ``(dE/dt) / E`` of the Dirichlet series.

        Returns midpoint times and rates; series must hold >= 2 records.
        """
        t, E = self.times, self.dirichlet
        if t.size < 2:
            raise ValueError("need at least two records for a rate")
        dE = np.diff(E) / np.diff(t)
        mid = 0.5 * (t[1:] + t[:-1])
        return mid, dE / (0.5 * (E[1:] + E[:-1]))


def estimate_lambda_max(G: WeightedGraph) -> float:
    """Largest eigenvalue of ``-Delta``: dense for small graphs, else
    sparse Lanczos on the similar symmetric operator
    ``M^{-1/2} (D - A) M^{-1/2}``."""
    if G.n <= _DENSE_SPECTRUM_LIMIT:
        return float(dense_spectrum(G)[-1])
    inv_sqrt = scipy.sparse.diags(1.0 / np.sqrt(G.measure))
    drift = scipy.sparse.diags(G.weight_row_sums / G.measure)
    sym = drift - inv_sqrt @ G.adjacency @ inv_sqrt
    lam = scipy.sparse.linalg.eigsh(sym, k=1, which="LA", return_eigenvectors=False)
    return float(lam[0])


def simulate_heat(G: WeightedGraph, X0: np.ndarray, spec: FlowSpec) -> FlowTrajectory:
    """Explicit Euler for the diffusion flow.

    Requires ``dt <= safety / lambda_max``. The recorded Dirichlet series
    is checked to be non-increasing; an increase beyond roundoff raises
    :class:`FlowInstabilityError` advising a smaller step.
    """
    if spec.kind != FLOW_HEAT:
        raise ValueError(f"spec.kind is {spec.kind!r}, expected {FLOW_HEAT!r}")
    X = _initial_state(G, X0)
    lam_max, dt = _resolve_step(G, spec)

    steps = int(np.ceil(spec.horizon / dt))
    times, states = [0.0], [X.copy()]
    t = 0.0
    for k in range(1, steps + 1):
        X = X + dt * laplacian_apply(G, X)
        t += dt
        if k % spec.record_stride == 0 or k == steps:
            times.append(t)
            states.append(X.copy())
    traj = _finish(FLOW_HEAT, G, times, states, None, lam_max)
    _check_monotone_decay(traj)
    return traj


def simulate_nonlocal(
    G: WeightedGraph, X0: np.ndarray, spec: FlowSpec
) -> FlowTrajectory:
    """Explicit Euler for the gated diffusion flow.

    ``spec.dt`` is the effective step (gate folded in); real time advances
    by ``dt / gate``, so step sizes stretch as the gate starves. A gate at
    zero means the state is stationary; the run then jumps straight to the
    horizon.
    """
    if spec.kind != FLOW_GATED:
        raise ValueError(f"spec.kind is {spec.kind!r}, expected {FLOW_GATED!r}")
    X = _initial_state(G, X0)
    lam_max, dt_eff = _resolve_step(G, spec)

    times, states = [0.0], [X.copy()]
    t = 0.0
    k = 0
    while t < spec.horizon:
        gate = float(integrate(G, _laplacian_sq_rows(G, X)))
        if gate <= 1e-280:
            t = spec.horizon
            times.append(t)
            states.append(X.copy())
            break
        X = X + dt_eff * laplacian_apply(G, X)
        t += dt_eff / gate
        k += 1
        if k % spec.record_stride == 0 or t >= spec.horizon:
            times.append(t)
            states.append(X.copy())
    traj = _finish(FLOW_GATED, G, times, states, None, lam_max)
    _check_monotone_decay(traj)
    return traj


def simulate_preln_flow(
    G: WeightedGraph, X0: np.ndarray, spec: FlowSpec
) -> FlowTrajectory:
    """Explicit Euler for the normalized aggregation flow.

    Needs an aggregation-admissible graph (spectrum inside [0, 2], which
    is asserted) and rows that never vanish, since every row is projected
    to the sphere of radius ``sqrt(n / ∫ 1 dmu)`` before aggregating.
    """
    if spec.kind != FLOW_NORMALIZED:
        raise ValueError(
            f"spec.kind is {spec.kind!r}, expected {FLOW_NORMALIZED!r}"
        )
    if not G.aggregation_admissible:
        raise ValueError(
            "normalized aggregation flow needs sum of incident weights < "
            "vertex measure at every vertex"
        )
    X = _initial_state(G, X0)
    if X.shape[1] < 1:
        raise ValueError("need at least one feature column")
    lam_max, dt = _resolve_step(G, spec)
    if lam_max > 2.0 + 1e-9:
        raise AssertionError(
            "admissible graph produced an eigenvalue above 2; construction bug"
        )

    radius = np.sqrt(G.n / float(G.measure.sum()))
    steps = int(np.ceil(spec.horizon / dt))
    times, states, masses = [0.0], [X.copy()], [_norm_mass(G, X, radius)]
    t = 0.0
    for k in range(1, steps + 1):
        X = X + dt * aggregate_apply(G, _sphere_project(X, radius))
        t += dt
        if k % spec.record_stride == 0 or k == steps:
            times.append(t)
            states.append(X.copy())
            masses.append(_norm_mass(G, X, radius))
    return _finish(FLOW_NORMALIZED, G, times, states, np.asarray(masses), lam_max)


def rk4_reference(G, X0, rhs, dt: float, horizon: float):
    """Classical fixed-step Runge-Kutta. Test oracle only.

    ``rhs`` maps a state to its derivative; returns (times, states) at
    every step.
    """
    X = _initial_state(G, X0)
    steps = int(np.ceil(horizon / dt))
    times, states = [0.0], [X.copy()]
    t = 0.0
    for _ in range(steps):
        k1 = rhs(X)
        k2 = rhs(X + 0.5 * dt * k1)
        k3 = rhs(X + 0.5 * dt * k2)
        k4 = rhs(X + dt * k3)
        X = X + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        times.append(t)
        states.append(X.copy())
    return np.asarray(times), states


def _sphere_project(X: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if norms.min() <= 1e-300:
        raise FlowInstabilityError(
            "a feature row collapsed to zero; the sphere projection is undefined"
        )
    return radius * X / norms


def _norm_mass(G: WeightedGraph, X: np.ndarray, radius: float) -> float:
    projected = _sphere_project(X, radius)
    return float(integrate(G, (projected**2).sum(axis=1)))


def _laplacian_sq_rows(G: WeightedGraph, X: np.ndarray) -> np.ndarray:
    LX = laplacian_apply(G, X)
    return (LX**2).sum(axis=1)


def _initial_state(G: WeightedGraph, X0) -> np.ndarray:
    X = np.asarray(X0, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != G.n:
        raise ValueError(f"initial state of shape {np.shape(X0)} does not match n={G.n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("initial state contains non-finite entries")
    return X


def _resolve_step(G: WeightedGraph, spec: FlowSpec) -> tuple[float, float]:
    lam_max = estimate_lambda_max(G)
    if lam_max <= 0.0:
        # edgeless graph: any step works, nothing moves
        return 0.0, spec.dt if spec.dt is not None else spec.horizon
    limit = spec.safety / lam_max
    dt = spec.dt if spec.dt is not None else 0.5 * limit
    if dt > limit * (1 + 1e-12):
        raise FlowInstabilityError(
            f"step {dt:g} exceeds the stability limit safety/lambda_max = {limit:g}"
        )
    return lam_max, dt


def _finish(kind, G, times, states, masses, lam_max) -> FlowTrajectory:
    dirichlet = np.array([derivative_energy(G, X, 1) for X in states])
    laplacian = np.array([derivative_energy(G, X, 2) for X in states])
    gate = laplacian * G.n  # ∫|ΔX|² dμ = n * order-2 energy
    return FlowTrajectory(
        kind=kind,
        times=np.asarray(times),
        states=tuple(states),
        dirichlet=dirichlet,
        laplacian=laplacian,
        gate=gate,
        norm_mass=masses,
        lambda_max=lam_max,
    )


def _check_monotone_decay(traj: FlowTrajectory) -> None:
    E = traj.dirichlet
    if E.size < 2:
        return
    scale = max(E[0], 1.0)
    rises = np.diff(E) > 1e-9 * scale
    if rises.any():
        k = int(rises.argmax())
        raise FlowInstabilityError(
            f"Dirichlet energy increased between records {k} and {k + 1}; "
            "reduce dt"
        )

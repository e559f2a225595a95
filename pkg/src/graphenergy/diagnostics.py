"""Measurement helpers for layer stacks and flows.

Everything here consumes recorded trajectories and produces plot-ready
series: smoothness energies per layer or per time stamp, relative energy
increments with a stall verdict, pairwise cosine similarity between
recorded states, least-squares decay-law fits, and the representation
cost of skipping a single layer.

Energies are always measured on the canonical unit-weight graph
(``canonical_energy_graph``), whatever weights the trajectory itself ran
on, so numbers from different architectures are comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from graphenergy.dynamics import FlowTrajectory
from graphenergy.graph import (
    WeightedGraph,
    canonical_energy_graph,
    derivative_energy,
)
from graphenergy.network import (
    LayerTrajectory,
    ModelConfig,
    ModelParams,
    forward_trajectory,
)

R_SQUARED_FLOOR = 0.95
AUTO_BURN_IN = 0.10
STALL_THRESHOLD = 0.05
LAW_POWER = "power"
LAW_EXPONENTIAL = "exponential"
LAW_GROWTH = "growth-power"


@dataclass(frozen=True, eq=False)
class EnergySeries:
    """Smoothness energy of each recorded state.

    ``indices`` are layer numbers or time stamps, strictly increasing;
    ``order`` is the derivative order of the energy; ``source`` names
    what produced the states (architecture variant or flow kind).
    """

    indices: np.ndarray
    values: np.ndarray
    order: int
    source: str

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d and aligned")
        if idx.size == 0:
            raise ValueError("empty series")
        if not (np.diff(idx) > 0).all():
            raise ValueError("indices must be strictly increasing")
        if (val < 0).any():
            raise ValueError("energies cannot be negative")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        self.indices.setflags(write=False)
        self.values.setflags(write=False)


@dataclass(frozen=True)
class StallVerdict:
    """Whether the tail of a series holds its energy while per-step
    relative increments die out.

    ``stalled`` is True when all three hold over the tail window: the
    least-squares slope of the energy is nonnegative, the median absolute
    relative increment sits below ``threshold``, and the increments trend
    flat or downward.
    """

    stalled: bool
    energy_slope: float
    median_tail_change: float
    change_trend: float
    tail_start: int
    threshold: float


@dataclass(frozen=True, eq=False)
class RelativeChangeSeries:
    """Per-step relative energy increments plus the stall verdict.

    ``values[k]`` is ``(E[k+1] - E[k]) / E[k]``; entries with a zero
    denominator are NaN.
    """

    values: np.ndarray
    verdict: StallVerdict


class LineFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class FitReport:
    """Decay-law fit of an energy series.

    ``law`` is the winning family; ``exponent`` is its slope (power
    exponent, or exponential rate per index unit); ``window`` is the
    inclusive index range actually used after dropping burn-in and
    nonpositive values. Both raw fits are kept for inspection; either
    may be None when too few points qualified.
    """

    law: str
    exponent: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    classification: str
    power_fit: LineFit | None
    exponential_fit: LineFit | None


@dataclass(frozen=True)
class PruneReport:
    """Output deviation caused by skipping one layer."""

    layer: int
    deviation: float
    mean_cosine: float


def energy_series(trajectory, order: int = 2, *, topology: WeightedGraph) -> EnergySeries:
    """Measure every recorded state of a trajectory on the canonical
    unit-weight graph built over ``topology``.

    Accepts either a layer trajectory (indices are layer numbers) or a
    flow trajectory (indices are time stamps).
    """
    canonical = canonical_energy_graph(topology)
    if isinstance(trajectory, LayerTrajectory):
        states = trajectory.states
        indices = np.arange(len(states), dtype=float)
        source = trajectory.source
    elif isinstance(trajectory, FlowTrajectory):
        states = trajectory.states
        indices = np.asarray(trajectory.times, dtype=float)
        source = trajectory.kind
    else:
        raise TypeError(f"unsupported trajectory type {type(trajectory).__name__}")
    values = np.array([derivative_energy(canonical, X, order) for X in states])
    return EnergySeries(indices=indices, values=values, order=order, source=source)


def relative_change_series(
    series: EnergySeries,
    tail_fraction: float = 0.5,
    threshold: float = STALL_THRESHOLD,
) -> RelativeChangeSeries:
    """Relative increments of an energy series with a stall verdict.

    Zero denominators yield NaN entries instead of raising, so sweeps
    over many seeds never abort on a degenerate series.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    E = series.values
    if E.size < 2:
        raise ValueError("need at least two energies for increments")
    prev = E[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(prev > 0, (E[1:] - prev) / prev, np.nan)

    tail_start = int(np.floor(E.size * (1 - tail_fraction)))
    tail_start = min(tail_start, E.size - 2)
    idx = series.indices
    energy_slope = _ls_slope(idx[tail_start:], E[tail_start:])
    tail_changes = values[tail_start:]
    finite = tail_changes[np.isfinite(tail_changes)]
    if finite.size == 0:
        median_change, trend = np.nan, np.nan
        stalled = False
    else:
        median_change = float(np.median(np.abs(finite)))
        mask = np.isfinite(tail_changes)
        trend = _ls_slope(idx[tail_start:-1][mask], np.abs(tail_changes[mask]))
        scale = max(abs(E[tail_start:]).max(), 1e-300)
        stalled = (
            energy_slope >= -1e-12 * scale
            and median_change < threshold
            and trend <= 1e-12
        )
    verdict = StallVerdict(
        stalled=bool(stalled),
        energy_slope=float(energy_slope),
        median_tail_change=float(median_change),
        change_trend=float(trend),
        tail_start=tail_start,
        threshold=threshold,
    )
    return RelativeChangeSeries(values=values, verdict=verdict)


def cosine_similarity_matrix(trajectory) -> np.ndarray:
    """Mean per-node cosine similarity between every pair of recorded
    states: entry (s, t) averages the cosine of matching feature rows.

    Any state containing a zero row poisons its matrix row and column
    with NaN rather than raising.
    """
    states = trajectory.states
    normalized = []
    defined = []
    for X in states:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        ok = norms.min() > 0
        defined.append(ok)
        normalized.append(X / norms if ok else np.full_like(X, np.nan))
    m = len(states)
    sim = np.full((m, m), np.nan)
    for s in range(m):
        if not defined[s]:
            continue
        for t in range(s, m):
            if not defined[t]:
                continue
            value = float(np.einsum("ij,ij->", normalized[s], normalized[t]))
            sim[s, t] = sim[t, s] = value / states[s].shape[0]
    ids = np.arange(m)
    sim[ids[defined], ids[defined]] = 1.0  # exact, not just up to roundoff
    return sim


def fit_decay(series: EnergySeries, window="auto") -> FitReport:
    """Least-squares decay-law fit over a window of an energy series.

    Fits log-energy against the index (exponential family) and against
    the log-index (power family), then classifies:

    * exponential-decay: exponential fit has R^2 >= 0.95, negative rate,
      and at least the power fit's R^2;
    * algebraic-decay: otherwise, the power fit wins with a negative
      exponent;
    * growth: otherwise, the better fit has a positive slope;
    * inconclusive: anything else.

    Nonpositive values never enter a fit; the power fit also drops
    nonpositive indices. The reported window reflects those drops.
    ``window="auto"`` discards the first 10% of points as burn-in;
    otherwise pass an inclusive ``(lo, hi)`` index range.
    """
    idx, val = series.indices, series.values
    if isinstance(window, str):
        if window != "auto":
            raise ValueError(f"unknown window {window!r}")
        drop = int(np.floor(AUTO_BURN_IN * idx.size))
        selected = np.zeros(idx.size, dtype=bool)
        selected[drop:] = True
    else:
        lo, hi = window
        if lo > hi:
            raise ValueError("window lo exceeds hi")
        selected = (idx >= lo) & (idx <= hi)
        if not selected.any():
            raise ValueError("window lies outside the series range")

    exp_mask = selected & (val > 0)
    if exp_mask.sum() < 5:
        raise ValueError("need at least five positive points to fit")
    pow_mask = exp_mask & (idx > 0)

    exp_fit = _line_fit(idx[exp_mask], np.log(val[exp_mask]))
    pow_fit = (
        _line_fit(np.log(idx[pow_mask]), np.log(val[pow_mask]))
        if pow_mask.sum() >= 5
        else None
    )

    pow_r2 = pow_fit.r_squared if pow_fit is not None else -np.inf
    if exp_fit.r_squared >= R_SQUARED_FLOOR and exp_fit.slope < 0 and (
        exp_fit.r_squared >= pow_r2
    ):
        classification, law, chosen, mask = (
            "exponential-decay",
            LAW_EXPONENTIAL,
            exp_fit,
            exp_mask,
        )
    elif pow_fit is not None and pow_r2 > exp_fit.r_squared and pow_fit.slope < 0:
        classification, law, chosen, mask = (
            "algebraic-decay",
            LAW_POWER,
            pow_fit,
            pow_mask,
        )
    else:
        best_is_power = pow_fit is not None and pow_r2 > exp_fit.r_squared
        best = pow_fit if best_is_power else exp_fit
        if best.slope > 0:
            classification = "growth"
            if pow_fit is not None and pow_fit.slope > 0:
                law, chosen, mask = LAW_GROWTH, pow_fit, pow_mask
            else:
                law, chosen, mask = LAW_EXPONENTIAL, exp_fit, exp_mask
        else:
            classification = "inconclusive"
            if best_is_power:
                law = LAW_GROWTH if best.slope >= 0 else LAW_POWER
                mask = pow_mask
            else:
                law = LAW_EXPONENTIAL
                mask = exp_mask
            chosen = best
    used = idx[mask]
    return FitReport(
        law=law,
        exponent=float(chosen.slope),
        intercept=float(chosen.intercept),
        r_squared=float(chosen.r_squared),
        window=(float(used.min()), float(used.max())),
        classification=classification,
        power_fit=pow_fit,
        exponential_fit=exp_fit,
    )


def prune_layer_deviation(
    params: ModelParams,
    config: ModelConfig,
    G: WeightedGraph,
    X_in: np.ndarray,
    layer: int,
) -> PruneReport:
    """Compare decoder outputs of the intact stack against the stack with
    one layer's input passed through untouched.

    ``deviation`` is the relative Frobenius distance between the two
    outputs; ``mean_cosine`` averages per-node cosine similarity. Layer
    indices are 1-based, matching ``forward_trajectory``.
    """
    full = forward_trajectory(params, config, G, X_in)
    pruned = forward_trajectory(params, config, G, X_in, skip_layer=layer)
    reference = full.decoder_output
    candidate = pruned.decoder_output
    scale = np.linalg.norm(reference)
    if scale == 0:
        raise ValueError("reference output is identically zero")
    deviation = float(np.linalg.norm(candidate - reference) / scale)

    ref_norms = np.linalg.norm(reference, axis=1)
    cand_norms = np.linalg.norm(candidate, axis=1)
    ok = (ref_norms > 0) & (cand_norms > 0)
    cosines = np.full(reference.shape[0], np.nan)
    cosines[ok] = (reference[ok] * candidate[ok]).sum(axis=1) / (
        ref_norms[ok] * cand_norms[ok]
    )
    return PruneReport(
        layer=layer,
        deviation=deviation,
        mean_cosine=float(np.nanmean(cosines)),
    )


def _ls_slope(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def _line_fit(x: np.ndarray, y: np.ndarray) -> LineFit:
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    ss_res = float(residual @ residual)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return LineFit(slope=float(slope), intercept=float(intercept), r_squared=r2)
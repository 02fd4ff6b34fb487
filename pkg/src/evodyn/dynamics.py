"""Revision protocols and time integration of the heterogeneous dynamic.

Agents receive revision opportunities at rate one and switch only toward
the current best response.  The conditional switching rate depends on the
payoff deficit d = (payoff of the best response) - (payoff of the current
action):

* standard best-response: rate 1 whenever d > 0;
* tempered best-response: rate Q(d) with Q nondecreasing, Q(d <= 0) = 0.
  ``power`` uses Q(d) = d^k (a rate, not a probability: it may exceed 1 but
  is bounded by Q(d_max) on the deficits any game here can realize);
  ``bounded_power`` uses Q(d) = min((d / pisharp)^k, 1), strictly increasing
  up to the sensitivity bound pisharp and saturated at 1 beyond it.

The per-type law of motion at aggregate xbar with common payoff F(xbar):

    xdot(theta) = (1 - x(theta)) * rate(F - theta)   if theta <= F
    xdot(theta) = -x(theta) * rate(theta - F)        if theta >  F

(the tie contributes nothing since rate(0) = 0).  Integration is classical
fixed-step RK4; the tempered field is continuous in the state and the grid,
not the step size, governs accuracy at the tolerances used here.  States are
clamped to [0, 1] after each step and the total clamped magnitude is kept as
a diagnostic (the continuous field points inward, so it stays negligible).

The aggregate of the standard dynamic follows the homogenized smooth
best-response dynamic xbardot = P(F(xbar)) - xbar regardless of the
underlying composition; tempered dynamics are generically not aggregable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .composition import BayesianStrategy, TypeGrid, aggregate
from .errors import InputError, IntegrationError
from .games import AggregateGame, TypeDistribution, aggregate_best_response

KIND_STANDARD = "standard"
KIND_POWER = "power"
KIND_BOUNDED_POWER = "bounded_power"


@dataclass(frozen=True)
class RevisionProtocol:
    """Conditional switching rate as a function of the payoff deficit."""

    kind: str
    k: float = 1.0
    pisharp: float | None = None

    def __post_init__(self):
        if self.kind not in (KIND_STANDARD, KIND_POWER, KIND_BOUNDED_POWER):
            raise InputError(f"unknown protocol kind {self.kind!r}")
        if self.kind != KIND_STANDARD and self.k <= 0.0:
            raise InputError(f"tempering exponent k={self.k} must be positive")
        if self.kind == KIND_BOUNDED_POWER and (
            self.pisharp is None or self.pisharp <= 0.0
        ):
            raise InputError("bounded_power needs a positive sensitivity bound pisharp")

    @property
    def is_tempered(self) -> bool:
        return self.kind != KIND_STANDARD

    def _power(self, base: np.ndarray) -> np.ndarray:
        # integer exponents by repeated multiply: float pow dominates the
        # integration profile otherwise
        k = self.k
        if k == int(k) and 1 <= k <= 6:
            out = base
            for _ in range(int(k) - 1):
                out = out * base
            return out
        return base**k

    def rate(self, deficit):
        """Vectorized switching rate; zero for nonpositive deficits."""
        d = np.asarray(deficit, dtype=float)
        if self.kind == KIND_STANDARD:
            out = np.where(d > 0.0, 1.0, 0.0)
        elif self.kind == KIND_POWER:
            out = self._power(np.maximum(d, 0.0))
        else:
            scaled = np.maximum(d, 0.0) / self.pisharp
            out = np.minimum(self._power(scaled), 1.0)
        return float(out) if np.ndim(deficit) == 0 else out


def standard_protocol() -> RevisionProtocol:
    return RevisionProtocol(kind=KIND_STANDARD)


def power_protocol(k: float) -> RevisionProtocol:
    return RevisionProtocol(kind=KIND_POWER, k=k)


def bounded_power_protocol(k: float, pisharp: float) -> RevisionProtocol:
    return RevisionProtocol(kind=KIND_BOUNDED_POWER, k=k, pisharp=pisharp)


def switching_rate(protocol: RevisionProtocol, deficit: float) -> float:
    """Rate of switching toward an action whose payoff advantage is ``deficit``."""
    if not np.isfinite(deficit):
        raise InputError(f"deficit {deficit!r} must be finite")
    return protocol.rate(deficit)


def _field_function(
    game: AggregateGame,
    dist: TypeDistribution,
    protocol: RevisionProtocol,
    grid: TypeGrid,
) -> Callable[[np.ndarray], np.ndarray]:
    del dist  # type data enters through the grid nodes
    theta = grid.nodes
    weights = grid.weights
    slope, intercept = game.slope, game.intercept
    dom_lo, dom_hi = game.domain

    def field(values: np.ndarray) -> np.ndarray:
        xbar = float(np.dot(weights, values))
        if not dom_lo <= xbar <= dom_hi:
            raise InputError(f"aggregate {xbar!r} left the payoff evaluation domain")
        gap = slope * xbar + intercept - theta
        rates = protocol.rate(np.abs(gap))
        return np.where(gap >= 0.0, (1.0 - values) * rates, -values * rates)

    return field


def vector_field(
    game: AggregateGame,
    dist: TypeDistribution,
    protocol: RevisionProtocol,
    x: BayesianStrategy,
) -> np.ndarray:
    """Per-node participation velocities at the strategy's own aggregate."""
    return _field_function(game, dist, protocol, x.grid)(x.values)


@dataclass(frozen=True)
class Trajectory:
    """Recorded aggregate path plus optional full-strategy snapshots."""

    times: np.ndarray
    xbars: np.ndarray
    snapshots: tuple[tuple[float, np.ndarray], ...]
    clamp_total: float
    final_values: np.ndarray

    @property
    def final_xbar(self) -> float:
        return float(self.xbars[-1])

    def xbar_at(self, t: float) -> float:
        """Aggregate at the recorded step time nearest to ``t``."""
        idx = int(np.argmin(np.abs(self.times - t)))
        return float(self.xbars[idx])


def _rk4(
    field: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    t_end: float,
    dt: float,
    snapshot_times: Sequence[float],
) -> Trajectory:
    if t_end <= 0.0:
        raise InputError(f"t_end={t_end} must be positive")
    if dt <= 0.0:
        raise InputError(f"dt={dt} must be positive")

    steps = int(round(t_end / dt))
    steps = max(steps, 1)
    wanted = sorted(float(s) for s in snapshot_times)
    times = np.empty(steps + 1)
    xbars = np.empty(steps + 1)
    snaps: list[tuple[float, np.ndarray]] = []
    clamp_total = 0.0

    x = np.array(x0, dtype=float)
    times[0] = 0.0
    xbars[0] = x.mean() if x.size > 1 else float(x[0])
    t = 0.0
    si = 0
    while si < len(wanted) and wanted[si] <= 0.0:
        snaps.append((t, x.copy()))
        si += 1

    for step in range(1, steps + 1):
        k1 = field(x)
        k2 = field(x + 0.5 * dt * k1)
        k3 = field(x + 0.5 * dt * k2)
        k4 = field(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = step * dt
        if not np.all(np.isfinite(x)):
            raise IntegrationError("state became non-finite", time=t)
        clipped = np.clip(x, 0.0, 1.0)
        clamp_total += float(np.abs(x - clipped).sum())
        x = clipped
        times[step] = t
        xbars[step] = x.mean() if x.size > 1 else float(x[0])
        while si < len(wanted) and wanted[si] <= t + 1e-12:
            snaps.append((t, x.copy()))
            si += 1

    return Trajectory(
        times=times,
        xbars=xbars,
        snapshots=tuple(snaps),
        clamp_total=clamp_total,
        final_values=x,
    )


def integrate(
    game: AggregateGame,
    dist: TypeDistribution,
    protocol: RevisionProtocol,
    x0: BayesianStrategy,
    t_end: float,
    dt: float,
    snapshot_times: Sequence[float] = (),
) -> Trajectory:
    """Integrate the heterogeneous dynamic from composition ``x0``.

    Records (t, aggregate) every step and full strategies at the requested
    snapshot times (snapped to the next step boundary).
    """
    weights = x0.grid.weights
    if not np.allclose(weights, weights[0]):
        # recorded aggregates use the plain mean, valid only for uniform weights
        raise InputError("integration requires the equiprobable grid")
    field = _field_function(game, dist, protocol, x0.grid)
    return _rk4(field, x0.values, t_end, dt, snapshot_times)


def homogenized_field(
    game: AggregateGame, dist: TypeDistribution, xbar: float
) -> float:
    """Scalar field of the homogenized smooth dynamic: P(F(xbar)) - xbar."""
    if not 0.0 <= xbar <= 1.0:
        raise InputError(f"xbar={xbar} outside [0, 1]")
    return float(aggregate_best_response(game, dist, xbar)) - xbar


def integrate_homogenized(
    game: AggregateGame,
    dist: TypeDistribution,
    xbar0: float,
    t_end: float,
    dt: float,
) -> Trajectory:
    """Integrate the scalar homogenized dynamic from aggregate ``xbar0``."""
    if not 0.0 <= xbar0 <= 1.0:
        raise InputError(f"xbar0={xbar0} outside [0, 1]")

    def field(state: np.ndarray) -> np.ndarray:
        x = min(max(float(state[0]), 0.0), 1.0)
        return np.array([float(aggregate_best_response(game, dist, x)) - x])

    return _rk4(field, np.array([xbar0]), t_end, dt, snapshot_times=())

"""Discretized strategy compositions on a type grid.

A Bayesian strategy assigns each type a participation rate in [0, 1]; its
aggregate is the weight-averaged rate.  The grid is equiprobable (mass 1/n
per node, nodes at the quantiles of the type distribution), which makes
cut-off constructions index computations and keeps flow-distribution atom
masses uniform.

Constructors provided here are the canonical compositions used throughout:

* ``sorted_composition``   -- lowest types participate (cut-off form);
* ``reversed_composition`` -- highest types participate (anti-sorted worst case);
* ``balanced_composition`` -- unsorted but flow-balanced at an aggregate
  equilibrium, built from the mirrored-density band identity
  (1 - x(t* - d)) p(t* - d) = x(t* + d) p(t* + d);
* ``destabilizing_perturbation`` -- a small composition change that pushes
  the aggregate strictly up while staying close to the original.

Boundary nodes take fractional values so constructed aggregates hit the
requested level exactly (up to float rounding), not just within 1/n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, InputError
from .games import AggregateGame, TypeDistribution


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TypeGrid:
    """Increasing type nodes with probability masses summing to one."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _freeze(self.nodes))
        object.__setattr__(self, "weights", _freeze(self.weights))
        if self.nodes.ndim != 1 or self.nodes.shape != self.weights.shape:
            raise InputError("nodes and weights must be 1-d arrays of equal length")
        if np.any(np.diff(self.nodes) < 0.0):
            raise InputError("grid nodes must be nondecreasing")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise InputError("grid weights must sum to 1 within 1e-12")

    @property
    def n(self) -> int:
        return self.nodes.size


def make_grid(dist: TypeDistribution, n: int) -> TypeGrid:
    """Equiprobable grid: node i at the ((i - 1/2)/n)-quantile, weight 1/n."""
    if n < 2:
        raise InputError(f"grid size n={n} must be at least 2")
    u = (np.arange(n) + 0.5) / n
    return TypeGrid(nodes=np.asarray(dist.inverse_cdf(u), dtype=float),
                    weights=np.full(n, 1.0 / n))


@dataclass(frozen=True)
class BayesianStrategy:
    """Participation rate per grid node, each in [0, 1]."""

    grid: TypeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.nodes.shape:
            raise InputError("strategy values must match the grid shape")
        if vals.min(initial=0.0) < -1e-9 or vals.max(initial=0.0) > 1.0 + 1e-9:
            raise InputError("strategy values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(np.clip(vals, 0.0, 1.0)))

    def with_values(self, values: np.ndarray) -> "BayesianStrategy":
        return BayesianStrategy(grid=self.grid, values=values)


def aggregate(x: BayesianStrategy) -> float:
    """Total participating mass: sum of weight * rate."""
    return float(np.dot(x.grid.weights, x.values))


def _cutoff_split(grid: TypeGrid, xbar: float) -> tuple[int, float]:
    """Number of fully filled nodes and the fractional fill of the next one.

    The index arithmetic is exact only for uniform masses, so the cut-off
    constructors insist on the equiprobable grid.
    """
    if not 0.0 <= xbar <= 1.0:
        raise InputError(f"xbar={xbar} outside [0, 1]")
    weights = grid.weights
    if not np.allclose(weights, weights[0]):
        raise InputError("cut-off constructors require the equiprobable grid")
    scaled = xbar * grid.n
    k = min(int(np.floor(scaled)), grid.n)
    return k, scaled - k


def sorted_composition(grid: TypeGrid, xbar: float) -> BayesianStrategy:
    """Perfectly sorted composition: the lowest types participate.

    With an equiprobable grid the cut-off type is the inverse c.d.f. at xbar;
    the boundary node is filled fractionally so the aggregate equals xbar.
    """
    k, frac = _cutoff_split(grid, xbar)
    values = np.zeros(grid.n)
    values[:k] = 1.0
    if k < grid.n:
        values[k] = frac
    return BayesianStrategy(grid=grid, values=values)


def reversed_composition(
    grid: TypeGrid, dist: TypeDistribution, xbar: float
) -> BayesianStrategy:
    """Anti-sorted composition: the highest types participate.

    The participation threshold type is the inverse c.d.f. at 1 - xbar.
    ``dist`` fixes that interpretation; the values themselves only need the
    grid ordering.
    """
    del dist  # threshold type is inverse_cdf(1 - xbar); grid nodes already sorted
    k, frac = _cutoff_split(grid, xbar)
    values = np.zeros(grid.n)
    if k > 0:
        values[grid.n - k:] = 1.0
    if k < grid.n:
        values[grid.n - k - 1] = frac
    return BayesianStrategy(grid=grid, values=values)


def balanced_composition(
    grid: TypeGrid,
    dist: TypeDistribution,
    game: AggregateGame,
    xbar_star: float,
    kappa: float,
    pimax: float,
) -> BayesianStrategy:
    """Unsorted composition whose in/out flow distributions coincide.

    Around the indifferent type t* = F(xbar_star) of an aggregate
    equilibrium, participation is lowered to 1 - kappa on the band
    (t* - pimax, t*) and raised to kappa * p(2 t* - theta) / p(theta) on
    (t*, t* + pimax); outside the bands the strategy is the sorted
    equilibrium.  The mirrored-density identity then balances the deficit
    distributions on both sides at every deficit level, and the aggregate is
    preserved because the mass moved out below t* equals the mass moved in
    above it.
    """
    if not 0.0 < kappa <= 1.0:
        if kappa == 0.0:
            return sorted_composition(grid, xbar_star)
        raise InputError(f"kappa={kappa} must lie in [0, 1]")
    if pimax <= 0.0:
        raise InputError(f"pimax={pimax} must be positive")

    theta_star = game.payoff(xbar_star)
    if abs(float(dist.cdf(theta_star)) - xbar_star) > 1e-6:
        raise InputError(f"xbar_star={xbar_star} is not an aggregate equilibrium")
    lo, hi = dist.support
    if theta_star - pimax < lo - 1e-12:
        raise ConstructionError(
            f"band bottom {theta_star - pimax:.6g} below the support minimum {lo:.6g}"
        )
    if theta_star + pimax > hi + 1e-12:
        raise ConstructionError(
            f"band top {theta_star + pimax:.6g} above the support maximum {hi:.6g}"
        )

    # Participation above t* must stay <= 1: kappa * max density ratio <= 1.
    probe = np.linspace(0.0, pimax, 4097)[1:]
    ratio = np.asarray(dist.pdf(theta_star - probe)) / np.asarray(
        dist.pdf(theta_star + probe)
    )
    worst = float(ratio.max())
    if kappa * worst > 1.0 + 1e-12:
        raise ConstructionError(
            f"kappa * max density ratio = {kappa * worst:.6g} exceeds 1; "
            f"lower kappa below {1.0 / worst:.6g}"
        )

    theta = grid.nodes
    values = np.where(theta <= theta_star, 1.0, 0.0)
    lower = (theta >= theta_star - pimax) & (theta < theta_star)
    upper = (theta > theta_star) & (theta <= theta_star + pimax)
    values[lower] = 1.0 - kappa
    mirrored = 2.0 * theta_star - theta[upper]
    values[upper] = kappa * np.asarray(dist.pdf(mirrored)) / np.asarray(
        dist.pdf(theta[upper])
    )
    out = BayesianStrategy(grid=grid, values=values)
    if abs(aggregate(out) - xbar_star) > 2.0 / grid.n:
        raise ConstructionError(
            f"balanced construction drifted from xbar_star by "
            f"{abs(aggregate(out) - xbar_star):.3g} > 2/n"
        )
    return out


def min_mass_ratio(protocol, band_width: float) -> float:
    """Smallest admissible mass ratio w for the band perturbation.

    Equals the ratio of the switching-rate integrals over the gain band
    [e, 2e] and the loss band [3e, 4e]; below it the perturbation's
    instantaneous aggregate velocity is not guaranteed positive.
    """
    if band_width <= 0.0:
        raise InputError("band width must be positive")
    lo_grid = np.linspace(band_width, 2.0 * band_width, 2049)
    hi_grid = np.linspace(3.0 * band_width, 4.0 * band_width, 2049)
    lo_int = float(_trapezoid(protocol.rate(lo_grid), lo_grid))
    hi_int = float(_trapezoid(protocol.rate(hi_grid), hi_grid))
    if hi_int <= 0.0:
        raise InputError("protocol rate vanishes on the loss band")
    return lo_int / hi_int


def destabilizing_perturbation(
    xstar: BayesianStrategy,
    game: AggregateGame,
    dist: TypeDistribution,
    e: float,
    w: float,
    eps: float,
    protocol=None,
    variant: str = "band",
) -> BayesianStrategy:
    """Perturb a composition so the aggregate rises and keeps rising initially.

    ``variant="band"`` (for cut-off equilibrium compositions) adds density
    eps/p on the band [t* + e, t* + 2e) and removes w * eps/p on
    [t* - 4e, t* - 3e), where t* = F(aggregate).  The aggregate increases by
    (1 - w) * e * eps.  When ``protocol`` is given, w is validated against
    ``min_mass_ratio`` so the tempered aggregate velocity at the result is
    strictly positive.

    ``variant="uniform"`` (for balanced non-equilibrium compositions) mixes
    every type below t* toward participation: x -> (1 - eps) x + eps there.
    The aggregate increases by eps times the non-participating mass below t*.
    """
    if eps < 0.0:
        raise InputError(f"eps={eps} must be nonnegative")
    if eps == 0.0:
        return xstar

    grid = xstar.grid
    theta = grid.nodes
    theta_star = game.payoff(aggregate(xstar))
    lo, hi = dist.support

    if variant == "uniform":
        below = theta < theta_star
        values = np.where(below, (1.0 - eps) * xstar.values + eps, xstar.values)
        return BayesianStrategy(grid=grid, values=values)
    if variant != "band":
        raise InputError(f"unknown perturbation variant {variant!r}")

    if not (lo < theta_star < hi):
        raise ConstructionError(
            f"indifferent type {theta_star:.6g} not interior to [{lo:.6g}, {hi:.6g}]"
        )
    if e <= 0.0:
        raise InputError(f"band width e={e} must be positive")
    if theta_star - 4.0 * e < lo - 1e-12 or theta_star + 2.0 * e > hi + 1e-12:
        raise ConstructionError(
            f"perturbation bands [{theta_star - 4 * e:.6g}, {theta_star - 3 * e:.6g}) "
            f"and [{theta_star + e:.6g}, {theta_star + 2 * e:.6g}) leave the support"
        )
    if not w < 1.0:
        raise ConstructionError(f"mass ratio w={w} must be below 1")
    if protocol is not None:
        w_min = min_mass_ratio(protocol, e)
        if w <= w_min:
            raise ConstructionError(
                f"mass ratio w={w} must exceed the rate-integral ratio {w_min:.6g}"
            )

    density = np.asarray(dist.pdf(theta))
    gain = (theta >= theta_star + e) & (theta < theta_star + 2.0 * e)
    loss = (theta >= theta_star - 4.0 * e) & (theta < theta_star - 3.0 * e)
    values = xstar.values.copy()
    values[gain] = values[gain] + eps / density[gain]
    values[loss] = values[loss] - w * eps / density[loss]
    if values.min() < -1e-12 or values.max() > 1.0 + 1e-12:
        raise ConstructionError(
            "perturbed participation leaves [0, 1]; reduce eps or the bands"
        )
    return BayesianStrategy(grid=grid, values=values)

"""Flow-source distributions and escape analysis at aggregate equilibria.

When the aggregate sits at a reference level, the agents who are not
best-responding split into two flow sources: the *inflow* source (types
below the indifferent type still playing O) and the *outflow* source (types
above it still playing I).  Collecting each source's switching rates with
their masses gives two atomic distributions; on the grid every c.d.f. and
integral below is an exact finite sum.

These distributions carry the aggregate dynamics at the reference point:

* the aggregate velocity is (sum of rate * mass over inflows) minus the same
  over outflows, matching the per-node quadrature exactly;
* the aggregate stays put iff the two distributions coincide (detailed
  balance); the sup-distance between their c.d.f.s is the residual;
* if the outflow distribution second-order stochastically dominates the
  inflow one, the aggregate stays strictly below the equilibrium at every
  later time (and symmetrically above when dominated);
* freezing every rate at its time-0 value yields the closed-form trajectory

      bound(t) = xbar* - sum_in m e^(-q t) + sum_out m e^(-q t),

  an upper bound on the true aggregate: falling aggregates only speed exits
  and slow entries.  If the bound stays below xbar* and dips under a
  certified decrease level, the true path reaches that level in finite time
  and never crosses back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .composition import BayesianStrategy, aggregate
from .dynamics import RevisionProtocol
from .equilibria import STABLE, UNSTABLE, find_aggregate_equilibria
from .errors import AnalysisError, InputError
from .games import AggregateGame, TypeDistribution, aggregate_best_response
from .stability import is_critical_mass_decrease

KIND_RATES = "rates"
KIND_DEFICITS = "deficits"

O_DOMINATES = "O_dominates"
I_DOMINATES = "I_dominates"
INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class SwitchingRateDistribution:
    """Atomic distribution of switching rates (or payoff deficits) in a source."""

    qs: np.ndarray
    ms: np.ndarray
    kind: str = KIND_RATES

    def __post_init__(self):
        qs = np.asarray(self.qs, dtype=float)
        ms = np.asarray(self.ms, dtype=float)
        if qs.shape != ms.shape or qs.ndim != 1:
            raise InputError("atom values and masses must be 1-d arrays of equal length")
        keep = ms > 0.0
        qs, ms = qs[keep], ms[keep]
        order = np.argsort(qs, kind="stable")
        qs, ms = qs[order], ms[order]
        if ms.sum(initial=0.0) > 1.0 + 1e-9:
            raise InputError("total atom mass exceeds 1")
        for name, arr in (("qs", qs), ("ms", ms)):
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def total_mass(self) -> float:
        return float(self.ms.sum(initial=0.0))

    def cdf(self, q) -> np.ndarray:
        """Right-continuous c.d.f. evaluated at ``q`` (scalar or array)."""
        cum = np.concatenate(([0.0], np.cumsum(self.ms)))
        idx = np.searchsorted(self.qs, np.asarray(q, dtype=float), side="right")
        out = cum[idx]
        return float(out) if np.ndim(q) == 0 else out

    def integrated_cdf(self, q) -> np.ndarray:
        """Exact integral of the c.d.f. from -inf to ``q``: sum m_k (q - q_k)+."""
        points = np.atleast_1d(np.asarray(q, dtype=float))
        cum_m = np.concatenate(([0.0], np.cumsum(self.ms)))
        cum_qm = np.concatenate(([0.0], np.cumsum(self.ms * self.qs)))
        idx = np.searchsorted(self.qs, points, side="right")
        out = points * cum_m[idx] - cum_qm[idx]
        return float(out[0]) if np.ndim(q) == 0 else out

    def rate_mass_sum(self) -> float:
        """Sum of q_k m_k over the atoms."""
        return float(np.dot(self.qs, self.ms))


def _sources(
    game: AggregateGame,
    dist: TypeDistribution,
    x: BayesianStrategy,
    xbar_ref: float,
):
    del dist
    theta = x.grid.nodes
    w = x.grid.weights
    common = game.payoff(xbar_ref)
    below = theta < common
    above = theta > common
    return theta, w, common, below, above


def flow_distributions(
    game: AggregateGame,
    dist: TypeDistribution,
    protocol: RevisionProtocol,
    x: BayesianStrategy,
    xbar_ref: float,
) -> tuple[SwitchingRateDistribution, SwitchingRateDistribution]:
    """Switching-rate distributions (inflow to I, outflow from I) at ``xbar_ref``.

    Rates are frozen at the common payoff F(xbar_ref); the composition's own
    aggregate need not equal the reference.
    """
    theta, w, common, below, above = _sources(game, dist, x, xbar_ref)
    inflow = SwitchingRateDistribution(
        qs=protocol.rate(common - theta[below]),
        ms=w[below] * (1.0 - x.values[below]),
        kind=KIND_RATES,
    )
    outflow = SwitchingRateDistribution(
        qs=protocol.rate(theta[above] - common),
        ms=w[above] * x.values[above],
        kind=KIND_RATES,
    )
    return inflow, outflow


def deficit_distributions(
    game: AggregateGame,
    dist: TypeDistribution,
    x: BayesianStrategy,
    xbar_ref: float,
) -> tuple[SwitchingRateDistribution, SwitchingRateDistribution]:
    """Payoff-deficit distributions in the two flow sources (protocol-free)."""
    theta, w, common, below, above = _sources(game, dist, x, xbar_ref)
    inflow = SwitchingRateDistribution(
        qs=common - theta[below],
        ms=w[below] * (1.0 - x.values[below]),
        kind=KIND_DEFICITS,
    )
    outflow = SwitchingRateDistribution(
        qs=theta[above] - common,
        ms=w[above] * x.values[above],
        kind=KIND_DEFICITS,
    )
    return inflow, outflow


def aggregate_velocity_from_flows(
    inflow: SwitchingRateDistribution, outflow: SwitchingRateDistribution
) -> float:
    """Aggregate velocity identified from the two rate distributions alone."""
    return inflow.rate_mass_sum() - outflow.rate_mass_sum()


def detailed_balance_residual(
    inflow: SwitchingRateDistribution, outflow: SwitchingRateDistribution
) -> float:
    """Sup-distance between the two c.d.f.s over the merged atom values.

    Zero iff the distributions coincide, the necessary and sufficient
    condition for the aggregate to stay at an aggregate equilibrium.
    """
    merged = np.union1d(inflow.qs, outflow.qs)
    if merged.size == 0:
        return 0.0
    return float(np.abs(inflow.cdf(merged) - outflow.cdf(merged)).max())


def sosd_compare(
    outflow: SwitchingRateDistribution,
    inflow: SwitchingRateDistribution,
    mass_tol: float = 1e-9,
    strict_tol: float = 1e-12,
) -> str:
    """Second-order stochastic dominance between the flow distributions.

    The dominant distribution is the one with the pointwise *smaller*
    integrated c.d.f. (strictly somewhere).  Comparison happens on the merged
    atom grid, where both integrated c.d.f.s are piecewise linear, so the
    grid comparison is exact.  Identical distributions are incomparable (no
    strict part).  Total masses must agree within ``mass_tol``.
    """
    if abs(outflow.total_mass - inflow.total_mass) > mass_tol:
        raise InputError(
            f"flow masses differ by {abs(outflow.total_mass - inflow.total_mass):.3g} "
            f"(tolerance {mass_tol:.3g}); dominance needs an aggregate-equilibrium context"
        )
    merged = np.union1d(outflow.qs, inflow.qs)
    if merged.size == 0:
        return INCOMPARABLE
    diff = outflow.integrated_cdf(merged) - inflow.integrated_cdf(merged)
    o_weak = bool(np.all(diff <= strict_tol))
    i_weak = bool(np.all(diff >= -strict_tol))
    if o_weak and np.any(diff < -strict_tol):
        return O_DOMINATES
    if i_weak and np.any(diff > strict_tol):
        return I_DOMINATES
    return INCOMPARABLE


def bound_trajectory(
    inflow: SwitchingRateDistribution,
    outflow: SwitchingRateDistribution,
    xbar_star: float,
    times: np.ndarray,
) -> np.ndarray:
    """Frozen-rate upper bound on the aggregate after arriving at ``xbar_star``.

    Every agent keeps its time-0 switching rate, so each atom's remaining
    mass decays like e^(-q t); under positive externality the true dynamic
    only loses entrants and gains leavers relative to this, making the
    frozen path an upper bound on the actual aggregate.
    """
    ts = np.asarray(times, dtype=float)
    if np.any(ts < 0.0):
        raise InputError("bound trajectory times must be nonnegative")
    out = np.full(ts.shape, xbar_star, dtype=float)
    chunk = 4096
    for start in range(0, ts.size, chunk):
        sl = slice(start, min(start + chunk, ts.size))
        block = ts[sl, None]
        if inflow.qs.size:
            out[sl] -= np.exp(-block * inflow.qs[None, :]) @ inflow.ms
        if outflow.qs.size:
            out[sl] += np.exp(-block * outflow.qs[None, :]) @ outflow.ms
    return out


@dataclass(frozen=True)
class RateRatioBound:
    """Reversed-composition escape check from the two extreme switching rates.

    ``r`` is the time-0 rate of the slowest entrant (the lowest type) over
    the rate of the marginal leaver (the reversed threshold type).  The
    aggregate level the frozen dynamics are guaranteed to reach is
    xbar* (1 - (1 - r) r^(r/(1-r))); the check holds when that level is at
    or below the largest prefix-certified decrease level.
    """

    r: float
    max_certified_decrease: float
    bound_value: float
    holds: bool


@dataclass(frozen=True)
class EscapeReport:
    dominance: str
    times: np.ndarray
    bound: np.ndarray
    crossing_time: float | None
    rate_ratio: RateRatioBound | None


def rate_ratio_escape_bound(
    game: AggregateGame,
    dist: TypeDistribution,
    protocol: RevisionProtocol,
    resolution: float = 1e-4,
) -> RateRatioBound:
    """Escape certificate for the reversed composition in a coordination game.

    Requires the coordination shape: a stable equilibrium at 0, one interior
    unstable equilibrium, one interior stable equilibrium xbar*, and a
    reversed-composition threshold type above the indifferent type.
    """
    report = find_aggregate_equilibria(game, dist)
    eqs = report.equilibria
    shape_ok = (
        len(eqs) == 3
        and abs(eqs[0].xbar) <= 1e-9
        and eqs[0].stability == STABLE
        and eqs[1].stability == UNSTABLE
        and eqs[2].stability == STABLE
        and eqs[2].xbar < 1.0 - 1e-9
    )
    if not shape_ok:
        raise InputError(
            "rate-ratio bound needs the coordination shape "
            "{stable 0, interior unstable, interior stable}; got "
            + ", ".join(f"{e.xbar:.4g}:{e.stability}" for e in eqs)
        )
    xbar_star = eqs[2].xbar
    theta_min, _ = dist.support
    theta_star = game.payoff(xbar_star)
    theta_hat = float(dist.inverse_cdf(1.0 - xbar_star))
    if not theta_hat > theta_star:
        raise InputError(
            f"reversed threshold type {theta_hat:.6g} must exceed the "
            f"indifferent type {theta_star:.6g}"
        )
    rate_in = float(protocol.rate(theta_star - theta_min))
    rate_out = float(protocol.rate(theta_hat - theta_star))
    if rate_out <= 0.0:
        raise InputError("marginal leaver's switching rate must be positive")
    r = rate_in / rate_out
    if not r < 1.0:
        raise InputError(f"rate ratio r={r:.6g} must be below 1")

    # Largest level such that the cut-off type's exit rate beats the fastest
    # entrant's rate at every smaller level (prefix scan).
    xs = np.linspace(resolution, 1.0, int(round(1.0 / resolution)))
    common = np.asarray(game.payoff(xs))
    lhs = protocol.rate(np.maximum(np.asarray(dist.inverse_cdf(xs)) - common, 0.0))
    rhs = protocol.rate(np.maximum(common - theta_min, 0.0))
    ok = lhs >= rhs
    first_fail = int(np.argmin(ok)) if not ok.all() else xs.size
    if first_fail == 0:
        raise AnalysisError("no positive level satisfies the prefix rate condition")
    max_certified = float(xs[first_fail - 1])

    if r <= 0.0:
        bound_value = 0.0
    else:
        bound_value = xbar_star * (1.0 - (1.0 - r) * r ** (r / (1.0 - r)))
    return RateRatioBound(
        r=r,
        max_certified_decrease=max_certified,
        bound_value=bound_value,
        holds=bound_value <= max_certified,
    )


def escape_certificate(
    game: AggregateGame,
    dist: TypeDistribution,
    protocol: RevisionProtocol,
    x0: BayesianStrategy,
    xbar_dagger: float,
    t_end: float = 50.0,
    n_times: int = 2000,
) -> EscapeReport:
    """Certify permanent escape below ``xbar_dagger`` from an equilibrium.

    The composition's aggregate must be an aggregate equilibrium, the game
    must have positive externality, and ``xbar_dagger`` must be a certified
    decrease level.  The report samples the frozen-rate bound on a
    log-spaced time grid; the crossing time is the first sample where the
    bound has stayed below the equilibrium throughout and is below
    ``xbar_dagger``.  A crossing certifies that the true aggregate reaches
    the certified level in finite time and stays below it forever.
    """
    xbar_star = aggregate(x0)
    residual = float(aggregate_best_response(game, dist, xbar_star)) - xbar_star
    if abs(residual) > 1e-6:
        raise InputError(
            f"composition aggregate {xbar_star:.6g} is not an aggregate "
            f"equilibrium (residual {residual:.3g})"
        )
    if not game.positive_externality:
        raise InputError("escape certification requires positive externality")
    if not 0.0 < xbar_dagger < xbar_star:
        raise InputError(
            f"xbar_dagger={xbar_dagger} must lie strictly between 0 and the "
            f"equilibrium {xbar_star:.6g}"
        )
    certified, certificate = is_critical_mass_decrease(game, dist, protocol, xbar_dagger)
    if not certified:
        raise InputError(
            f"xbar_dagger={xbar_dagger} is not a certified decrease level: "
            f"{certificate.reason}"
        )

    inflow, outflow = flow_distributions(game, dist, protocol, x0, xbar_star)
    mass_tol = 2.0 / x0.grid.n
    dominance = sosd_compare(outflow, inflow, mass_tol=mass_tol)
    times = np.geomspace(1e-3, t_end, n_times)
    bound = bound_trajectory(inflow, outflow, xbar_star, times)

    below_star = np.maximum.accumulate(bound) < xbar_star
    hit = below_star & (bound < xbar_dagger)
    crossing_time = float(times[int(np.argmax(hit))]) if hit.any() else None

    rate_ratio = None
    try:
        rate_ratio = rate_ratio_escape_bound(game, dist, protocol)
    except (InputError, AnalysisError):
        pass
    return EscapeReport(
        dominance=dominance,
        times=times,
        bound=bound,
        crossing_time=crossing_time,
        rate_ratio=rate_ratio,
    )

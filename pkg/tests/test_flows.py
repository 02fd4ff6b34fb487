import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evodyn import (
    InputError,
    SwitchingRateDistribution,
    aggregate,
    aggregate_velocity_from_flows,
    bound_trajectory,
    deficit_distributions,
    detailed_balance_residual,
    escape_certificate,
    flow_distributions,
    integrate,
    rate_ratio_escape_bound,
    sorted_composition,
    sosd_compare,
    vector_field,
)
from evodyn.composition import BayesianStrategy
from tests.conftest import random_composition


def atoms(pairs, kind="rates"):
    qs, ms = zip(*pairs) if pairs else ((), ())
    return SwitchingRateDistribution(qs=np.array(qs, float), ms=np.array(ms, float), kind=kind)


@pytest.fixture(scope="module")
def inflow_dominant(grid2000):
    """Participants packed just above the cut-off: leavers are slow, entrants
    fast, so the inflow rate distribution first-order dominates."""
    n = grid2000.n
    values = np.zeros(n)
    values[156:656] = 1.0  # 500 nodes: aggregate exactly 0.25
    return BayesianStrategy(grid=grid2000, values=values)


class TestFlowDistributions:
    def test_sorted_equilibrium_has_empty_sources(self, canon_game, canon_dist, cubic, grid4000):
        x = sorted_composition(grid4000, 0.25)
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, x, 0.25)
        assert inflow.total_mass == 0.0
        assert outflow.total_mass == 0.0

    def test_reversed_masses_and_rate_ranges(self, canon_game, canon_dist, cubic, reversed25):
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, reversed25, 0.25)
        n = reversed25.grid.n
        assert inflow.total_mass == pytest.approx(0.25, abs=2 / n)
        assert outflow.total_mass == pytest.approx(0.25, abs=2 / n)
        assert inflow.qs.min() >= 0.0
        assert inflow.qs.max() <= (9 / 16) ** 3
        assert outflow.qs.min() >= (3 / 2) ** 3 - 0.01
        assert outflow.qs.max() <= (39 / 16) ** 3 + 1e-12

    def test_equilibrium_balances_source_masses(self, canon_game, canon_dist, cubic, grid2000):
        rng = np.random.default_rng(17)
        x = random_composition(grid2000, 0.25, rng)
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, x, 0.25)
        assert abs(inflow.total_mass - outflow.total_mass) <= 2 / grid2000.n

    def test_deficit_distributions_empty_at_sorted_equilibrium(
        self, canon_game, canon_dist, grid4000
    ):
        x = sorted_composition(grid4000, 0.25)
        inflow, outflow = deficit_distributions(canon_game, canon_dist, x, 0.25)
        assert inflow.total_mass == 0.0 and outflow.total_mass == 0.0

    def test_deficit_spans_for_reversed(self, canon_game, canon_dist, reversed25):
        inflow, outflow = deficit_distributions(canon_game, canon_dist, reversed25, 0.25)
        assert 0.0 <= inflow.qs.min() and inflow.qs.max() <= 9 / 16
        assert 3 / 2 - 0.01 <= outflow.qs.min() and outflow.qs.max() <= 39 / 16


class TestVelocityIdentity:
    def test_arithmetic_examples(self):
        assert aggregate_velocity_from_flows(atoms([(2.0, 0.1)]), atoms([(1.0, 0.2)])) == 0.0
        same = atoms([(0.5, 0.1), (1.5, 0.1)])
        assert aggregate_velocity_from_flows(same, same) == 0.0

    def test_reversed_matches_vector_field(self, canon_game, canon_dist, cubic, reversed25):
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, reversed25, 0.25)
        from_flows = aggregate_velocity_from_flows(inflow, outflow)
        direct = float(
            np.dot(reversed25.grid.weights, vector_field(canon_game, canon_dist, cubic, reversed25))
        )
        assert from_flows == pytest.approx(direct, abs=1e-9)

    def test_identity_on_random_compositions(self, canon_game, canon_dist, cubic, standard, grid2000):
        rng = np.random.default_rng(29)
        for _ in range(100):
            x = random_composition(grid2000, float(rng.uniform(0, 1)), rng)
            xbar = aggregate(x)
            for proto in (cubic, standard):
                inflow, outflow = flow_distributions(canon_game, canon_dist, proto, x, xbar)
                from_flows = aggregate_velocity_from_flows(inflow, outflow)
                direct = float(
                    np.dot(grid2000.weights, vector_field(canon_game, canon_dist, proto, x))
                )
                assert abs(from_flows - direct) <= 1e-12


class TestDetailedBalance:
    def test_empty_distributions_balance(self, canon_game, canon_dist, cubic, grid4000):
        x = sorted_composition(grid4000, 0.25)
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, x, 0.25)
        assert detailed_balance_residual(inflow, outflow) == 0.0

    def test_reversed_residual_saturates(self, canon_game, canon_dist, cubic, reversed25):
        # inflow c.d.f. reaches its full 0.25 mass before any outflow rate
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, reversed25, 0.25)
        assert detailed_balance_residual(inflow, outflow) == pytest.approx(0.25, abs=1e-12)

    def test_balanced_composition_residual(self, canon_game, canon_dist, cubic, grid4000):
        from evodyn import balanced_composition

        bal = balanced_composition(grid4000, canon_dist, canon_game, 0.25, 0.2, 0.3)
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, bal, 0.25)
        assert detailed_balance_residual(inflow, outflow) <= 3 / grid4000.n

    def test_balance_implies_aggregate_stationarity(self, canon_game, canon_dist, cubic, grid4000):
        from evodyn import balanced_composition

        bal = balanced_composition(grid4000, canon_dist, canon_game, 0.25, 0.2, 0.3)
        traj = integrate(canon_game, canon_dist, cubic, bal, t_end=5.0, dt=0.005)
        assert np.abs(traj.xbars - 0.25).max() <= 5e-3


class TestSecondOrderDominance:
    def test_identical_is_incomparable(self):
        d = atoms([(0.5, 0.1), (1.5, 0.1)])
        assert sosd_compare(d, d) == "incomparable"

    def test_mean_preserving_spread_is_dominated(self):
        inflow = atoms([(1.0, 0.2)])
        outflow = atoms([(0.5, 0.1), (1.5, 0.1)])
        assert sosd_compare(outflow, inflow) == "I_dominates"

    def test_disjoint_supports_give_first_order_ranking(self, canon_game, canon_dist, cubic, reversed25):
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, reversed25, 0.25)
        assert sosd_compare(outflow, inflow, mass_tol=2 / reversed25.grid.n) == "O_dominates"

    def test_mass_mismatch_rejected(self):
        with pytest.raises(InputError):
            sosd_compare(atoms([(1.0, 0.3)]), atoms([(1.0, 0.2)]))

    @settings(max_examples=100, deadline=None)
    @given(
        data=st.lists(
            st.tuples(
                st.floats(min_value=0.0, max_value=10.0),
                st.floats(min_value=0.01, max_value=0.05),
            ),
            min_size=1,
            max_size=8,
        ),
        data2=st.lists(
            st.tuples(
                st.floats(min_value=0.0, max_value=10.0),
                st.floats(min_value=0.01, max_value=0.05),
            ),
            min_size=1,
            max_size=8,
        ),
    )
    def test_antisymmetry(self, data, data2):
        total = sum(m for _, m in data)
        scaled = [(q, m / total * 0.5) for q, m in data]
        total2 = sum(m for _, m in data2)
        scaled2 = [(q, m / total2 * 0.5) for q, m in data2]
        a, b = atoms(scaled), atoms(scaled2)
        forward = sosd_compare(a, b)
        backward = sosd_compare(b, a)
        flip = {"O_dominates": "I_dominates", "I_dominates": "O_dominates",
                "incomparable": "incomparable"}
        assert backward == flip[forward]


class TestBoundTrajectory:
    def test_starts_at_equilibrium(self, canon_game, canon_dist, cubic, reversed25):
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, reversed25, 0.25)
        assert bound_trajectory(inflow, outflow, 0.25, np.array([0.0]))[0] == pytest.approx(
            0.25, abs=1e-12
        )

    def test_decreasing_on_the_dip(self, canon_game, canon_dist, cubic, reversed25):
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, reversed25, 0.25)
        ts = np.linspace(0.0, 0.5, 501)
        bound = bound_trajectory(inflow, outflow, 0.25, ts)
        assert np.all(np.diff(bound) < 0.0)

    def test_dips_below_one_tenth_within_unit_time(self, canon_game, canon_dist, cubic, reversed25):
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, reversed25, 0.25)
        ts = np.geomspace(1e-3, 1.0, 500)
        assert bound_trajectory(inflow, outflow, 0.25, ts).min() < 0.1

    def test_standard_rates_cancel_exactly(self, canon_game, canon_dist, standard, reversed25):
        inflow, outflow = flow_distributions(canon_game, canon_dist, standard, reversed25, 0.25)
        ts = np.geomspace(1e-3, 50.0, 200)
        bound = bound_trajectory(inflow, outflow, 0.25, ts)
        assert np.abs(bound - 0.25).max() <= 1e-12

    def test_upper_bounds_simulation(self, canon_game, canon_dist, cubic, reversed25, escape_run):
        inflow, outflow = flow_distributions(canon_game, canon_dist, cubic, reversed25, 0.25)
        upto = int(50 / 0.005) + 1
        ts = escape_run.times[1:upto]
        bound = bound_trajectory(inflow, outflow, 0.25, ts)
        assert float((escape_run.xbars[1:upto] - bound).max()) <= 1e-3


class TestEscapeCertificate:
    def test_reversed_certified_escape(self, canon_game, canon_dist, cubic, reversed25, escape_run):
        report = escape_certificate(canon_game, canon_dist, cubic, reversed25, 0.03)
        assert report.dominance == "O_dominates"
        assert report.crossing_time is not None
        # permanent escape: once the simulation falls below the certified
        # level it never comes back
        below = escape_run.xbars < 0.03
        first = int(np.argmax(below))
        assert below[first:].all()

    def test_sorted_equilibrium_never_crosses(self, canon_game, canon_dist, cubic, grid2000):
        x = sorted_composition(grid2000, 0.25)
        report = escape_certificate(canon_game, canon_dist, cubic, x, 0.03)
        assert report.crossing_time is None
        assert np.abs(report.bound - 0.25).max() <= 1e-12

    def test_standard_reversed_never_crosses(self, canon_game, canon_dist, standard, grid2000):
        from evodyn import reversed_composition

        rev = reversed_composition(grid2000, canon_dist, 0.25)
        report = escape_certificate(canon_game, canon_dist, standard, rev, 0.15)
        assert report.crossing_time is None

    def test_preconditions(self, canon_game, canon_dist, cubic, grid2000):
        not_eq = sorted_composition(grid2000, 0.3)
        with pytest.raises(InputError, match="equilibrium"):
            escape_certificate(canon_game, canon_dist, cubic, not_eq, 0.03)
        eq = sorted_composition(grid2000, 0.25)
        with pytest.raises(InputError, match="certified"):
            escape_certificate(canon_game, canon_dist, cubic, eq, 0.1)
        from evodyn import affine_game

        flat = affine_game(0.0, 0.7)
        flat_eq = sorted_composition(grid2000, float(np.sqrt(1.7) - 1.0))
        with pytest.raises(InputError, match="externality"):
            escape_certificate(flat, canon_dist, cubic, flat_eq, 0.03)

    def test_escape_converges_to_lower_equilibrium(self, escape_run):
        # exactly one stable equilibrium below the start: the trajectory ends there
        assert abs(escape_run.final_xbar - 0.0) <= 1e-3


class TestSymmetricDominance:
    def test_inflow_dominance_certified_and_realized(
        self, canon_game, canon_dist, cubic, inflow_dominant
    ):
        assert aggregate(inflow_dominant) == pytest.approx(0.25, abs=1e-12)
        inflow, outflow = flow_distributions(
            canon_game, canon_dist, cubic, inflow_dominant, 0.25
        )
        assert sosd_compare(outflow, inflow, mass_tol=2 / 2000) == "I_dominates"
        traj = integrate(canon_game, canon_dist, cubic, inflow_dominant, t_end=50.0, dt=0.01)
        assert traj.xbars[1:].min() > 0.25


class TestRateRatioBound:
    def test_canonical_numbers(self, canon_game, canon_dist, cubic):
        result = rate_ratio_escape_bound(canon_game, canon_dist, cubic)
        assert result.r == pytest.approx(27 / 512, abs=1e-15)
        expected = 0.25 * (1.0 - (1.0 - result.r) * result.r ** (result.r / (1.0 - result.r)))
        assert result.bound_value == pytest.approx(expected, abs=1e-15)
        assert result.bound_value == pytest.approx(0.0489655, abs=1e-6)
        assert result.max_certified_decrease == pytest.approx(
            (2.9 - np.sqrt(8.01)) / 2, abs=1e-3
        )
        assert result.holds is False

    def test_sharp_tempering_makes_bound_hold(self, canon_game, canon_dist):
        from evodyn import power_protocol

        # r = 0.375^k: sharp tempering collapses the bound value toward 0
        result = rate_ratio_escape_bound(canon_game, canon_dist, power_protocol(20))
        assert result.r < 1e-8
        assert result.bound_value < 1e-6
        assert result.holds is True

    def test_flat_tempering_pushes_bound_to_equilibrium(self, canon_game, canon_dist):
        from evodyn import power_protocol

        # nearly payoff-insensitive rates: r -> 1 and the guaranteed dip
        # shrinks to nothing, so the certified level is out of reach
        result = rate_ratio_escape_bound(canon_game, canon_dist, power_protocol(0.001))
        assert 0.99 < result.r < 1.0
        assert result.bound_value > 0.24
        assert result.holds is False

    def test_tempered_condition_matches_midpoint_form(self, canon_game, canon_dist, cubic):
        # for tempered protocols the prefix condition is F <= (inverse_cdf + theta_min)/2
        result = rate_ratio_escape_bound(canon_game, canon_dist, cubic)
        xs = np.arange(1e-4, 0.2, 1e-4)
        common = np.asarray(canon_game.payoff(xs))
        midpoint = 0.5 * (np.asarray(canon_dist.inverse_cdf(xs)) + 0.0)
        oracle = xs[: int(np.argmin(common <= midpoint))][-1] if not (common <= midpoint).all() else xs[-1]
        assert result.max_certified_decrease == pytest.approx(float(oracle), abs=2e-4)

    def test_requires_coordination_shape(self, canon_dist, cubic):
        from evodyn import affine_game

        with pytest.raises(InputError, match="coordination shape"):
            rate_ratio_escape_bound(affine_game(0.0, 0.7), canon_dist, cubic)

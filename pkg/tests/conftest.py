import pytest

from evodyn import (
    SqrtShiftTypes,
    affine_game,
    integrate,
    make_grid,
    power_protocol,
    reversed_composition,
    standard_protocol,
)
from evodyn.composition import BayesianStrategy

# Canonical entry game: F(xbar) = (49 xbar - 1)/20 with sqrt-shift types.
# Aggregate equilibria: 0 and 0.25 (stable), 0.2 (unstable) — the roots of
# 20 xbar^2 - 9 xbar + 1 = 0 plus the clamped corner.
CANON_A = 2.45
CANON_B = -0.05


@pytest.fixture(scope="session")
def canon_game():
    return affine_game(CANON_A, CANON_B)


@pytest.fixture(scope="session")
def canon_dist():
    return SqrtShiftTypes()


@pytest.fixture(scope="session")
def cubic():
    return power_protocol(3)


@pytest.fixture(scope="session")
def standard():
    return standard_protocol()


@pytest.fixture(scope="session")
def grid2000(canon_dist):
    return make_grid(canon_dist, 2000)


@pytest.fixture(scope="session")
def grid4000(canon_dist):
    return make_grid(canon_dist, 4000)


@pytest.fixture(scope="session")
def reversed25(grid4000, canon_dist):
    return reversed_composition(grid4000, canon_dist, 0.25)


@pytest.fixture(scope="session")
def escape_run(canon_game, canon_dist, cubic, reversed25):
    """The canonical escape trajectory: reversed composition at 0.25 under the
    cubic tempered protocol, n=4000, dt=0.005, out to t=200."""
    return integrate(
        canon_game,
        canon_dist,
        cubic,
        reversed25,
        t_end=200.0,
        dt=0.005,
        snapshot_times=(1.0, 5.0),
    )


def random_composition(grid, xbar, rng) -> BayesianStrategy:
    """Random participation values rescaled to hit the target aggregate."""
    values = rng.random(grid.n)
    mean = values.mean()
    if mean >= xbar:
        values = values * (xbar / mean)
    else:
        values = 1.0 - (1.0 - values) * ((1.0 - xbar) / (1.0 - mean))
    return BayesianStrategy(grid=grid, values=values)

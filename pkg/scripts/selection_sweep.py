"""Robustness-threshold sweep for the coordination game with logistic types.

For each cost c, computes the side-wise deficit thresholds of every stable
equilibrium and which equilibrium the bounded-tempering criterion selects,
next to the risk-dominant action of the underlying 2x2 game.

Usage: python scripts/selection_sweep.py
"""

import numpy as np

from evodyn import (
    TruncatedLogisticTypes,
    linear_coordination_game,
    risk_dominant_action,
    select_most_robust,
)


def main() -> None:
    dist = TruncatedLogisticTypes(mu=0.0, s=0.05)
    print(f"{'c':>5} {'risk-dom':>8} {'selected':>9}  thresholds")
    for c in np.arange(0.15, 0.90, 0.1):
        game = linear_coordination_game(float(c))
        report = select_most_robust(game, dist)
        levels = {f"{e.xbar_star:.4f}": f"{e.overall:.4f}" for e in report.entries}
        selected = "tie" if report.tie else f"{report.selected:.4f}"
        print(f"{c:5.2f} {risk_dominant_action(float(c)):>8} {selected:>9}  {levels}")


if __name__ == "__main__":
    main()

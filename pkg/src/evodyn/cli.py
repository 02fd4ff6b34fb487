"""Config-driven scenario runner.

Invocation::

    evodyn <subcommand> --config <path> [--out <dir>] [--override key=value ...]

Subcommands: equilibria, simulate, critical-mass, select, flows, escape.
Each writes JSON reports and/or CSV files into the output directory.  Floats
are serialized with 17 significant digits and keys are sorted, so repeated
runs of the same config produce byte-identical files.  Exit codes: 0 on
success, 2 for config errors, 3 for analysis errors; errors also emit a
machine-readable JSON line on stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import composition as comp
from . import dynamics, equilibria, flows, stability
from .config import Scenario, parse_config
from .errors import ConfigError, EvodynError, InputError

SUBCOMMANDS = ("equilibria", "simulate", "critical-mass", "select", "flows", "escape")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _to_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f'{pad}  "{key}": {_to_json(obj[key], indent + 1)}' for key in sorted(obj)
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        inner = ",\n".join(f"{pad}  {_to_json(item, indent + 1)}" for item in obj)
        return "[\n" + inner + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _write_json(path: Path, obj) -> None:
    path.write_text(_to_json(obj) + "\n")


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(_fmt(cell) if not isinstance(cell, str) else cell for cell in row)
                 for row in rows)
    path.write_text("\n".join(lines) + "\n")


def build_initial(scenario: Scenario, grid: comp.TypeGrid) -> comp.BayesianStrategy:
    """Materialize the configured initial composition on the scenario grid."""
    spec = scenario.initial
    if spec is None:
        raise ConfigError("this subcommand needs an [initial] section")
    kind = spec.composition
    if kind in ("sorted", "reversed", "balanced") and spec.xbar0 is None:
        raise ConfigError(f"initial.composition = {kind} needs initial.xbar0")
    if kind == "sorted":
        return comp.sorted_composition(grid, spec.xbar0)
    if kind == "reversed":
        return comp.reversed_composition(grid, scenario.dist, spec.xbar0)
    if kind == "balanced":
        if spec.kappa is None or spec.pimax is None:
            raise ConfigError("balanced composition needs initial.kappa and initial.pimax")
        return comp.balanced_composition(
            grid, scenario.dist, scenario.game, spec.xbar0, spec.kappa, spec.pimax
        )
    if kind == "custom-csv":
        if spec.path is None:
            raise ConfigError("custom-csv composition needs initial.path")
        return _load_custom_csv(Path(spec.path), grid)
    raise ConfigError(f"unknown initial composition {kind!r}")


def _load_custom_csv(path: Path, grid: comp.TypeGrid) -> comp.BayesianStrategy:
    if not path.is_file():
        raise ConfigError(f"composition file {path} does not exist")
    thetas, values = [], []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if lineno == 1 and text.lower().replace(" ", "") == "theta,x":
                continue
            parts = text.split(",")
            if len(parts) != 2:
                raise ConfigError(f"expected 'theta,x' in {path}", lineno)
            try:
                thetas.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError:
                raise ConfigError(f"malformed number in {path}", lineno) from None
    if not thetas:
        raise ConfigError(f"composition file {path} has no rows")
    order = np.argsort(thetas)
    thetas = np.asarray(thetas)[order]
    values = np.asarray(values)[order]
    # piecewise-constant: each node takes the value of the last row at or below it
    idx = np.clip(np.searchsorted(thetas, grid.nodes, side="right") - 1, 0, None)
    return comp.BayesianStrategy(grid=grid, values=values[idx])


def _scenario_meta(scenario: Scenario) -> dict:
    return {
        "grid_n": scenario.n,
        "dt": scenario.dt,
        "t_end": scenario.t_end,
        "seed": scenario.seed,
    }


def _run_equilibria(scenario: Scenario, out: Path) -> None:
    report = equilibria.find_aggregate_equilibria(scenario.game, scenario.dist)
    payload = {
        "equilibria": [
            {
                "xbar": eq.xbar,
                "stability": eq.stability,
                "basin_lo": eq.basin_lo,
                "basin_hi": eq.basin_hi,
            }
            for eq in report.equilibria
        ]
    }
    _write_json(out / "equilibria.json", payload)


def _run_simulate(scenario: Scenario, out: Path) -> None:
    grid = comp.make_grid(scenario.dist, scenario.n)
    x0 = build_initial(scenario, grid)
    traj = dynamics.integrate(
        scenario.game,
        scenario.dist,
        scenario.protocol,
        x0,
        t_end=scenario.t_end,
        dt=scenario.dt,
        snapshot_times=scenario.snapshot_times,
    )
    _write_csv(out / "trajectory.csv", "t,xbar", zip(traj.times, traj.xbars))
    if traj.snapshots:
        rows = []
        for t, values in traj.snapshots:
            rows.extend(zip([t] * grid.n, grid.nodes, values))
        _write_csv(out / "snapshots.csv", "t,theta,x", rows)
    _write_json(
        out / "summary.json",
        {
            "xbar0": float(traj.xbars[0]),
            "xbar_final": traj.final_xbar,
            "clamp_total": traj.clamp_total,
            **_scenario_meta(scenario),
        },
    )


def _run_critical_mass(scenario: Scenario, out: Path) -> None:
    report = stability.critical_mass_sets(scenario.game, scenario.dist, scenario.protocol)
    payload = {
        "decrease_intervals": [list(iv) for iv in report.decrease_intervals],
        "increase_intervals": [list(iv) for iv in report.increase_intervals],
        "basins": [
            {"xbar_star": b.xbar_star, "lo": b.lo, "hi": b.hi} for b in report.basins
        ],
        "resolution": report.resolution,
    }
    _write_json(out / "critical_mass.json", payload)
    xs = np.linspace(0.0, 1.0, 1001)
    deficit = np.abs(
        np.asarray(scenario.game.payoff(xs)) - np.asarray(scenario.dist.inverse_cdf(xs))
    )
    _write_csv(out / "deficit_curve.csv", "xbar,deficit", zip(xs, deficit))


def _select_payload(scenario: Scenario) -> dict:
    report = stability.select_most_robust(scenario.game, scenario.dist)
    return {
        "selected": report.selected,
        "tie": report.tie,
        "thresholds": {_fmt(e.xbar_star): e.overall for e in report.entries},
        "equilibria": [
            {
                "xbar": e.xbar_star,
                "threshold_left": e.threshold_left,
                "attained_left": e.attained_left,
                "threshold_right": e.threshold_right,
                "attained_right": e.attained_right,
                "overall": e.overall,
            }
            for e in report.entries
        ],
    }


def _run_select(scenario: Scenario, out: Path) -> None:
    payload = _select_payload(scenario)
    _write_json(out / "select.json", payload)
    sweep = scenario.pisharp_sweep
    if not sweep:
        return
    report = stability.select_most_robust(scenario.game, scenario.dist)

    def one(pisharp: float) -> dict:
        surviving = report.surviving(pisharp)
        entry = {
            "pisharp": pisharp,
            "surviving": list(surviving),
            "selected": surviving[0] if len(surviving) == 1 else None,
        }
        sub = out / "sweep" / _fmt(pisharp)
        sub.mkdir(parents=True, exist_ok=True)
        _write_json(sub / "select.json", entry)
        return entry

    max_workers = int(os.environ.get("EVODYN_THREADS", "0")) or None
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(one, sweep))
    _write_json(out / "sweep.json", {"entries": results})


def _run_flows(scenario: Scenario, out: Path) -> None:
    grid = comp.make_grid(scenario.dist, scenario.n)
    x0 = build_initial(scenario, grid)
    xbar_ref = comp.aggregate(x0)
    inflow, outflow = flows.flow_distributions(
        scenario.game, scenario.dist, scenario.protocol, x0, xbar_ref
    )
    rows = [(q, m, "inflow") for q, m in zip(inflow.qs, inflow.ms)]
    rows += [(q, m, "outflow") for q, m in zip(outflow.qs, outflow.ms)]
    _write_csv(out / "flows.csv", "q,m,source", rows)
    _write_json(
        out / "flows.json",
        {
            "xbar_ref": xbar_ref,
            "inflow_mass": inflow.total_mass,
            "outflow_mass": outflow.total_mass,
            "velocity": flows.aggregate_velocity_from_flows(inflow, outflow),
            "detailed_balance_residual": flows.detailed_balance_residual(inflow, outflow),
        },
    )


def _pick_decrease_level(scenario: Scenario, xbar_star: float) -> float:
    report = stability.critical_mass_sets(scenario.game, scenario.dist, scenario.protocol)
    candidates = [hi for _, hi in report.decrease_intervals if hi < xbar_star]
    if not candidates:
        raise InputError(
            f"no certified decrease level below the starting equilibrium {xbar_star:.6g}"
        )
    return max(candidates)


def _run_escape(scenario: Scenario, out: Path) -> None:
    grid = comp.make_grid(scenario.dist, scenario.n)
    x0 = build_initial(scenario, grid)
    xbar_star = comp.aggregate(x0)
    xbar_dagger = _pick_decrease_level(scenario, xbar_star)
    report = flows.escape_certificate(
        scenario.game,
        scenario.dist,
        scenario.protocol,
        x0,
        xbar_dagger,
        t_end=scenario.t_end,
    )
    rate_ratio = None
    if report.rate_ratio is not None:
        rate_ratio = {
            "r": report.rate_ratio.r,
            "max_certified_decrease": report.rate_ratio.max_certified_decrease,
            "bound_value": report.rate_ratio.bound_value,
            "holds": report.rate_ratio.holds,
        }
    _write_json(
        out / "escape.json",
        {
            "xbar_star": xbar_star,
            "xbar_dagger": xbar_dagger,
            "dominance": report.dominance,
            "crossing_time": report.crossing_time,
            "rate_ratio": rate_ratio,
        },
    )
    _write_csv(out / "bound.csv", "t,xbarbar", zip(report.times, report.bound))


_RUNNERS = {
    "equilibria": _run_equilibria,
    "simulate": _run_simulate,
    "critical-mass": _run_critical_mass,
    "select": _run_select,
    "flows": _run_flows,
    "escape": _run_escape,
}


def run(scenario: Scenario, subcommand: str, out_dir) -> None:
    """Execute one subcommand, writing its outputs under ``out_dir``."""
    if subcommand not in _RUNNERS:
        raise InputError(f"unknown subcommand {subcommand!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _RUNNERS[subcommand](scenario, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="evodyn",
        description="Heterogeneous best-response dynamics in binary aggregate games",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="scenario config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry, e.g. game.a=2.45 (repeatable)",
    )
    args = parser.parse_args(argv)

    try:
        scenario = parse_config(args.config, overrides=tuple(args.override))
        run(scenario, args.subcommand, args.out)
    except ConfigError as exc:
        print(_to_json({"error": {"kind": "config", "message": str(exc), "line": exc.line}}))
        return 2
    except EvodynError as exc:
        print(_to_json({"error": {"kind": "analysis", "message": str(exc), "line": None}}))
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: scenario runs, presets, sweeps, validation.

Exit codes: 0 success, 2 validation error, 3 numerical failure (trace drift
or positivity), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, analysis, dynamics, pauli, svg, trajectories, twomode
from .errors import (
    CutoffTooSmall,
    FockdampError,
    NoInteriorMinimum,
    ParseError,
    StepSizeUnderflow,
    TraceDriftExceeded,
    ValidationError,
)
from .fock import PureState, coherent_density, coherent_state
from .integrate import IntegratorConfig
from .scenario import (
    RATE_KEYS,
    Scenario,
    load_raw,
    parse_scenario,
    preset_scenarios,
    sweep_grid,
    validate_dict,
)

_POSITIVITY_LIMIT = -1e-8

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


@dataclass
class RunResult:
    scenario: Scenario
    series: analysis.TimeSeries
    extras: dict


def run_scenario(scn: Scenario) -> RunResult:
    """Dispatch to the selected engine and collect its time series."""
    extras = {}
    if scn.engine == "dense":
        rho0 = coherent_density(scn.alpha, scn.cutoff)
        series, final = dynamics.evolve(rho0, scn.channels(), scn.kerr(), scn.t_grid, scn.integrator)
        extras["final_state"] = final
    elif scn.engine == "pauli":
        rho0 = coherent_density(scn.alpha, scn.cutoff)
        series = pauli.evolve_populations(
            pauli.PopulationVector.from_density(rho0), scn.channels(), scn.t_grid, scn.integrator
        )
    elif scn.engine == "trajectories":
        psi0 = coherent_state(scn.alpha, scn.cutoff)
        result = trajectories.run_ensemble(psi0, scn.channels(), scn.kerr(), scn.trajectory_config())
        series = result.to_timeseries()
        extras["stderr"] = result.stderr
    elif scn.engine == "twomode":
        rho_a = coherent_density(scn.alpha, scn.cutoff, tail_tol=1e-4)
        params = scn.twomode_params
        state0 = twomode.product_with_vacuum(rho_a, params.nmax_b)
        result = twomode.two_mode_evolve(state0, params, scn.t_grid, scn.integrator)
        series = result.series
        extras["b_occupation"] = result.b_occupation
        extras["final_state"] = result.final_state
    else:  # pragma: no cover - schema forbids
        raise ValidationError([f"unknown engine {scn.engine!r}"])
    if series.min_eigenvalue is not None:
        worst = float(series.min_eigenvalue.min())
        if worst < _POSITIVITY_LIMIT:
            raise TraceDriftExceeded(
                f"positivity violated: min eigenvalue {worst:.3e} < {_POSITIVITY_LIMIT:.0e}"
            )
    return RunResult(scn, series, extras)


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def series_csv(series: analysis.TimeSeries) -> str:
    """Pinned column order: t, mean_n, std_n, g2, trace_err, p0..pN, 17 significant digits."""
    n_levels = series.n_levels
    header = ["t", "mean_n", "std_n", "g2", "trace_err"] + [f"p{n}" for n in range(n_levels)]
    lines = [",".join(header)]
    for i in range(series.t.size):
        row = [
            _g17(series.t[i]),
            _g17(series.mean_n[i]),
            _g17(series.std_n[i]),
            _g17(series.g2[i]),
            _g17(series.trace_err[i]),
        ] + [_g17(v) for v in series.populations[i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def series_json(series: analysis.TimeSeries) -> str:
    obj = {
        "t": list(series.t),
        "mean_n": list(series.mean_n),
        "std_n": list(series.std_n),
        "g2": list(series.g2),
        "trace_err": list(series.trace_err),
        "populations": [list(row) for row in series.populations],
    }
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_outputs(result: RunResult, out_dir: Path, fmt: str, want_svg: bool) -> Path:
    scn = result.scenario
    run_dir = out_dir / scn.name
    run_dir.mkdir(parents=True, exist_ok=True)
    ext = "csv" if fmt == "csv" else "json"
    series_path = run_dir / f"timeseries.{ext}"
    text = series_csv(result.series) if fmt == "csv" else series_json(result.series)
    series_path.write_text(text)
    outputs = {"timeseries": series_path.name}
    if "stderr" in result.extras:
        se = result.extras["stderr"]
        lines = [",".join(["t"] + [f"se_p{n}" for n in range(se.shape[1])])]
        for i in range(se.shape[0]):
            lines.append(",".join([_g17(result.series.t[i])] + [_g17(v) for v in se[i]]))
        (run_dir / "stderr.csv").write_text("\n".join(lines) + "\n")
        outputs["stderr"] = "stderr.csv"
    if "b_occupation" in result.extras:
        occ = result.extras["b_occupation"]
        lines = ["t,mode_b_occupation"]
        for i in range(occ.size):
            lines.append(f"{_g17(result.series.t[i])},{_g17(occ[i])}")
        (run_dir / "mode_b.csv").write_text("\n".join(lines) + "\n")
        outputs["mode_b"] = "mode_b.csv"
    if want_svg:
        (run_dir / "plot.svg").write_text(svg.render_timeseries(result.series, scn.name))
        outputs["plot"] = "plot.svg"
    manifest = {
        "tool": {"name": "fockdamp", "version": __version__},
        "scenario": scn.to_dict(),
        "outputs": outputs,
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return run_dir


def _apply_overrides(raw: dict, args) -> dict:
    raw = dict(raw)
    if getattr(args, "engine", None):
        raw["engine"] = args.engine
    if getattr(args, "seed", None) is not None:
        raw.setdefault("trajectory", {})
        raw["trajectory"] = dict(raw["trajectory"], master_seed=args.seed)
    if getattr(args, "fixed_step", None) is not None:
        raw["integrator"] = dict(raw.get("integrator", {}), fixed_step=args.fixed_step)
    return raw


def _scenario_from_flags(args) -> dict:
    obj = {
        "name": args.name or "adhoc",
        "alpha": args.alpha,
        "t_max": args.tmax,
        "samples": args.samples,
        "engine": args.engine or "dense",
    }
    if args.nmax is not None:
        obj["nmax"] = args.nmax
    if args.u1:
        obj["u1"] = args.u1
    rates = {}
    if args.rates:
        short = {"e": "gamma_e", "q": "gamma_q", "s": "gamma_s", "t": "gamma_t"}
        for part in args.rates.split(","):
            if "=" not in part:
                raise ValidationError([f"bad --rates entry {part!r}; expected key=value"])
            key, _, val = part.partition("=")
            key = key.strip()
            key = short.get(key, key)
            if key not in RATE_KEYS:
                raise ValidationError([f"unknown rate {key!r}; use e, q, s, t"])
            try:
                rates[key] = float(val)
            except ValueError:
                raise ValidationError([f"bad rate value {val!r} for {key}"])
    obj["rates"] = rates
    if (args.engine or "dense") == "trajectories":
        obj["trajectory"] = {
            "n_traj": args.n_traj,
            "master_seed": args.seed if args.seed is not None else 0,
        }
    return obj


def _print_summary(result: RunResult):
    s = result.series
    print(
        f"{result.scenario.name}: engine={result.scenario.engine} "
        f"mean_n(t_end)={s.mean_n[-1]:.6g} std_n={s.std_n[-1]:.6g} "
        f"p0={s.populations[-1, 0]:.6g} p1={s.populations[-1, 1]:.6g} "
        f"max_trace_err={s.trace_err.max():.3e}"
    )


def _cmd_run(args) -> int:
    if args.scenario:
        raw = load_raw(args.scenario)
    else:
        if args.alpha is None or args.tmax is None:
            raise ValidationError(["run without a scenario file requires --alpha and --tmax"])
        raw = _scenario_from_flags(args)
    raw = _apply_overrides(raw, args)
    scn = parse_scenario(raw)
    result = run_scenario(scn)
    run_dir = write_outputs(result, Path(args.out), args.format, args.svg)
    _print_summary(result)
    print(f"wrote {run_dir}")
    return EXIT_OK


def _cmd_preset(args) -> int:
    raws = preset_scenarios(args.which)
    results = []
    for raw in raws:
        raw = _apply_overrides(raw, args)
        scn = parse_scenario(raw)
        result = run_scenario(scn)
        write_outputs(result, Path(args.out), args.format, args.svg)
        _print_summary(result)
        results.append(result)
    if args.which == "fig2":
        mixed = results[-1]
        try:
            sm = analysis.find_sigma_min(mixed.series, (0.5, 20.0))
            report = {
                "scenario": mixed.scenario.name,
                "t_star": sm.t_star,
                "sigma_star": sm.sigma_star,
                "p1_at_t_star": float(sm.populations[1]),
            }
            print(
                f"sigma minimum of {mixed.scenario.name}: t*={sm.t_star:.4f} "
                f"sigma*={sm.sigma_star:.5f} p1={sm.populations[1]:.5f}"
            )
        except NoInteriorMinimum as exc:
            report = {"scenario": mixed.scenario.name, "t_star": None, "detail": str(exc)}
            print(f"no interior sigma minimum: {exc}")
        path = Path(args.out) / f"{args.which}_sigma_min.json"
        path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _sigma_row(result: RunResult) -> dict:
    """Stopping-time summary of one run: interior minimum if it exists,
    otherwise the global grid minimum, flagged."""
    series = result.series
    try:
        sm = analysis.find_sigma_min(series, (float(series.t[0]), float(series.t[-1])))
        return {
            "t_star": sm.t_star,
            "sigma_star": sm.sigma_star,
            "p1_star": float(sm.populations[1]),
            "interior": 1,
        }
    except NoInteriorMinimum:
        i = int(np.argmin(series.std_n))
        return {
            "t_star": float(series.t[i]),
            "sigma_star": float(series.std_n[i]),
            "p1_star": float(series.populations[i, 1]),
            "interior": 0,
        }


def _cmd_sweep(args) -> int:
    raw = load_raw(args.scenario)
    fields, grid = sweep_grid(raw)
    scenarios = [parse_scenario(g) for g in grid]

    def one(scn):
        return _sigma_row(run_scenario(scn))

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(one, scenarios))
    else:
        rows = [one(s) for s in scenarios]

    out_path = Path(args.out)
    out_path.mkdir(parents=True, exist_ok=True)
    header = fields + ["t_star", "sigma_star", "p1_star", "interior"]
    lines = [",".join(header)]
    for point, row in zip(grid, rows):
        vals = []
        for f in fields:
            if f == "alpha":
                vals.append(_g17(point["alpha"]))
            else:
                vals.append(_g17(point["rates"][f]))
        vals += [_g17(row["t_star"]), _g17(row["sigma_star"]), _g17(row["p1_star"]), str(row["interior"])]
        lines.append(",".join(vals))
    csv_path = out_path / "sweep.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    print(f"wrote {csv_path} ({len(rows)} rows)")

    # report-only monotonicity check: more linear loss should not help p1(t*)
    if "gamma_q" in fields:
        others = [f for f in fields if f != "gamma_q"]
        groups = {}
        for point, row in zip(grid, rows):
            key = tuple(
                point["alpha"] if f == "alpha" else point["rates"][f] for f in others
            )
            groups.setdefault(key, []).append((point["rates"]["gamma_q"], row["p1_star"]))
        for key, pairs in groups.items():
            pairs.sort()
            p1s = [p for _, p in pairs]
            if any(b > a + 1e-9 for a, b in zip(p1s, p1s[1:])):
                print(f"WARNING: p1(t*) not nonincreasing in gamma_q at {dict(zip(others, key))}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    raw = load_raw(args.scenario)
    violations = validate_dict(raw, allow_sweep=True)
    if violations:
        raise ValidationError(violations)
    print(f"{args.scenario}: valid")
    return EXIT_OK


def _add_common(p):
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--svg", action="store_true", help="also write an SVG plot")
    p.add_argument("--engine", choices=("dense", "pauli", "trajectories", "twomode"))
    p.add_argument("--seed", type=int, help="override the trajectory master seed")
    p.add_argument("--fixed-step", type=float, dest="fixed_step", metavar="DT",
                   help="disable adaptivity; integrate with this fixed step")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fockdamp",
        description="Simulate multi-photon damping cascades in a truncated Fock space.",
    )
    ap.add_argument("--version", action="version", version=f"fockdamp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario (file or flags)")
    run_p.add_argument("scenario", nargs="?", help="scenario or manifest JSON file")
    run_p.add_argument("--alpha", type=float, help="coherent amplitude (flag mode)")
    run_p.add_argument("--rates", help="comma list like e=1,q=0.05 (flag mode)")
    run_p.add_argument("--tmax", type=float, help="final time (flag mode)")
    run_p.add_argument("--samples", type=int, default=201)
    run_p.add_argument("--nmax", type=int)
    run_p.add_argument("--u1", type=float, default=0.0, help="Kerr strength")
    run_p.add_argument("--n-traj", type=int, default=10000, dest="n_traj")
    run_p.add_argument("--name", help="run name (flag mode)")
    _add_common(run_p)
    run_p.set_defaults(func=_cmd_run)

    preset_p = sub.add_parser("preset", help="run a bundled demonstration preset")
    preset_p.add_argument("which", choices=("fig1", "fig2"))
    _add_common(preset_p)
    preset_p.set_defaults(func=_cmd_preset)

    sweep_p = sub.add_parser("sweep", help="run a scenario file with sweep ranges")
    sweep_p.add_argument("scenario")
    sweep_p.add_argument("--workers", type=int, default=1)
    _add_common(sweep_p)
    sweep_p.set_defaults(func=_cmd_sweep)

    val_p = sub.add_parser("validate", help="validate a scenario file")
    val_p.add_argument("scenario")
    val_p.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError, CutoffTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TraceDriftExceeded, StepSizeUnderflow) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FockdampError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

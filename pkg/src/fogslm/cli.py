"""Command-line front end.

    fogslm solve      [--config FILE] [--set key=value ...] [--solver slm|oracle] [--compare]
    fogslm compare    [--config FILE] ...
    fogslm sweep      [--config FILE] [--figure fig3|fig4] [--realizations N] [--out-dir DIR]
    fogslm grid-dump  [--config FILE] [--grid-step STEP] [--out-dir DIR]

Config files are flat ``key: value`` documents. Physical keys are the fields
of ``ParameterSet``; run keys are listed in ``RUN_DEFAULTS``. Flags override
the file, and an empty file reproduces the default numerical setup. Every
command that writes files also writes ``manifest.yaml``, which can be passed
back via ``--config`` to reproduce the outputs.

Exit codes: 0 success, 2 config error, 3 infeasible, 4 not converged within
the iteration limit, 5 stopped on a stalled grid.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import sys
from pathlib import Path

from . import __version__
from .config import (
    PARAMETER_KEYS,
    ConfigError,
    dump_flat,
    load_config_file,
    parameters_from_mapping,
    parse_override,
)
from .experiments import (
    CHANNELS,
    SOLVERS,
    THREE_LAYER,
    ExperimentConfig,
    figure_configs,
    run_sweep,
    threshold_crossing,
)
from .model import UnboundedLatencyError, evaluate
from .oracle import grid_oracle, grid_table
from .slm import CONVERGED, STALLED, slm_run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_CONVERGED = 4
EXIT_STALLED = 5

RUN_DEFAULTS = {
    "seed": 42,
    "epsilon": 1e-9,
    "grid_step": 1e-3,
    "oracle_step": 1e-2,
    "max_iterations": 500,
    "realizations": 4000,
    "threads": 1,
    "solver": "slm",
    "figure": None,
    "sweep_axis": "workload",
    "sweep_values": [1e6],
    "architectures": [THREE_LAYER],
    "channel": "rayleigh",
    "optimized_baselines": False,
}
META_KEYS = ("tool_version", "command", "created_at", "outputs")


def _coerce(key: str, value):
    default = RUN_DEFAULTS[key]
    try:
        if key == "figure":
            if value not in (None, "fig3", "fig4"):
                raise ValueError
            return value
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValueError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            items = value if isinstance(value, list) else [value]
            return [float(v) for v in items] if key == "sweep_values" else [str(v) for v in items]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"invalid value {value!r}") from None


def resolve_settings(args) -> tuple:
    """Merge defaults, config file, ``--set`` overrides and flags."""
    raw = load_config_file(args.config) if args.config else {}
    for item in args.set or []:
        key, value = parse_override(item)
        raw[key] = value
    physical, run = {}, dict(RUN_DEFAULTS)
    for key, value in raw.items():
        if key in META_KEYS:
            continue
        if key in PARAMETER_KEYS:
            physical[key] = value
        elif key in RUN_DEFAULTS:
            run[key] = _coerce(key, value)
        else:
            raise ConfigError(key, "unknown config key")
    flag_map = {
        "seed": "seed", "epsilon": "epsilon", "grid_step": "grid_step",
        "realizations": "realizations", "threads": "threads", "figure": "figure",
        "solver": "solver", "channel": "channel", "max_iterations": "max_iterations",
    }
    for key, attr in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            run[key] = _coerce(key, value)
    if run["solver"] not in SOLVERS:
        raise ConfigError("solver", f"must be one of {SOLVERS}")
    if run["channel"] not in CHANNELS:
        raise ConfigError("channel", f"must be one of {CHANNELS}")
    for key in ("epsilon", "grid_step", "oracle_step"):
        if not run[key] > 0:
            raise ConfigError(key, "must be positive")
    params = parameters_from_mapping(physical)
    return params, run


def _experiment_config(params, run) -> ExperimentConfig:
    try:
        return ExperimentConfig(
            params=params,
            sweep_axis=run["sweep_axis"],
            sweep_values=tuple(run["sweep_values"]),
            n_realizations=run["realizations"],
            seed=run["seed"],
            solver=run["solver"],
            architectures=tuple(run["architectures"]),
            channel=run["channel"],
            epsilon=run["epsilon"],
            grid_step=run["grid_step"],
            oracle_step=run["oracle_step"],
            optimized_baselines=run["optimized_baselines"],
            workers=run["threads"],
        )
    except ValueError as exc:
        raise ConfigError("sweep", str(exc)) from None


def write_manifest(out_dir: Path, command: str, params, run, outputs) -> Path:
    data = {"tool_version": __version__, "command": command,
            "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    data.update(params.as_dict())
    data.update(run)
    data["outputs"] = [str(p) for p in outputs]
    path = out_dir / "manifest.yaml"
    path.write_text(dump_flat(data))
    return path


def _print_solution(label, sol, instance, out) -> None:
    res = evaluate(instance, sol.allocation)
    print(f"[{label}] t* = {sol.t:.9g} s", file=out)
    print(f"  m* = {sol.m:.6f} bits   k* = {sol.k:.6f} bits", file=out)
    print(f"  alpha* = {sol.alpha:.6f}   gamma* = {sol.gamma:.6f}", file=out)
    if res.bounded:
        print(f"  T_I = {res.T_I:.9g} s   T_F = {res.T_F:.9g} s   T_C = {res.T_C:.9g} s", file=out)
        print(f"  T = max(T_I, T_F, T_C) = {res.T:.9g} s", file=out)
    else:
        print(f"  unbounded: {res.reason}", file=out)


def cmd_solve(args, out=None) -> int:
    out = out or sys.stdout
    params, run = resolve_settings(args)
    instance = params.build()
    compare = args.compare or args.command == "compare"
    code = EXIT_OK
    outputs = []
    slm_sol = oracle_sol = None
    if run["solver"] in ("slm", "both") or compare:
        slm_sol, trace = slm_run(instance, run["epsilon"], run["grid_step"], run["max_iterations"])
        _print_solution("slm", slm_sol, instance, out)
        print(f"  status = {trace.status} after {trace.iterations} iteration(s)", file=out)
        if trace.status == STALLED:
            code = EXIT_STALLED
        elif trace.status != CONVERGED:
            code = EXIT_NOT_CONVERGED
        if args.trace:
            Path(args.trace).parent.mkdir(parents=True, exist_ok=True)
            trace.write_csv(args.trace)
            outputs.append(Path(args.trace))
    if run["solver"] in ("oracle", "both") or compare:
        oracle_sol = grid_oracle(instance, run["oracle_step"])
        _print_solution("oracle", oracle_sol, instance, out)
    if slm_sol is not None and oracle_sol is not None:
        gap = abs(slm_sol.t - oracle_sol.t) / oracle_sol.t if oracle_sol.t > 0 else 0.0
        print(f"relative gap |t_slm - t_oracle| / t_oracle = {gap:.3e}", file=out)
    if outputs and args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_manifest(out_dir, args.command, params, run, outputs)
    return code


def _summarize_figure(name, result, out) -> None:
    arches = result.config.architectures
    level = 2e-3 if name.startswith("fig3") else 1e-3
    for arch in arches:
        x, y, _ = result.series(arch)
        cross = threshold_crossing(x, y, level)
        text = "none" if cross is None else f"{cross:.6g}"
        print(f"  {name} {arch}: {level * 1e3:g} ms crossing at {text}", file=out)


def cmd_sweep(args, out=None) -> int:
    out = out or sys.stdout
    params, run = resolve_settings(args)
    base = _experiment_config(params, run)
    if run["figure"]:
        changes = {}
        if args.channel is not None:
            changes["channel"] = run["channel"]
        configs = figure_configs(run["figure"], base, **changes)
    else:
        configs = {"sweep": base}
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, cfg in configs.items():
        result = run_sweep(cfg)
        path = out_dir / f"{name}.csv"
        result.write_csv(path)
        outputs.append(path)
        flags = sum(r.unreliable for r in result.rows)
        print(f"{name}: {len(result.rows)} rows -> {path}"
              + (f" ({flags} unreliable)" if flags else ""), file=out)
        if run["figure"]:
            _summarize_figure(name, result, out)
    write_manifest(out_dir, "sweep", params, run, outputs)
    return EXIT_OK


def cmd_grid_dump(args, out=None) -> int:
    out = out or sys.stdout
    params, run = resolve_settings(args)
    instance = params.build()
    step = next((v for v in (args.oracle_step, args.grid_step) if v is not None), run["oracle_step"])
    run["oracle_step"] = step
    table = grid_table(instance, step)
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "grid.csv"
    table.write_csv(path)
    best = table.best()
    print(f"{table.t.size} cells -> {path}", file=out)
    print(f"best: t = {best.t:.9g} s at alpha = {best.alpha:g}, gamma = {best.gamma:g}", file=out)
    write_manifest(out_dir, "grid-dump", params, run, [path])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogslm", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key: value config file (or a manifest.yaml)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--seed", type=int)
        p.add_argument("--epsilon", type=float, help="SLM stopping tolerance in seconds")
        p.add_argument("--grid-step", type=float, help="SLM power-fraction grid step")
        p.add_argument("--realizations", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--threads", type=int, help="worker processes; 0 means one per CPU")
        p.add_argument("--figure", choices=("fig3", "fig4"))
        p.add_argument("--solver", choices=SOLVERS)
        p.add_argument("--channel", choices=CHANNELS)
        p.add_argument("--max-iterations", type=int)
        return p

    for name in ("solve", "compare"):
        p = common(sub.add_parser(name, help="solve one instance"))
        p.add_argument("--compare", action="store_true", help="also run the grid oracle")
        p.add_argument("--trace", help="write the per-iteration SLM trace CSV here")
    common(sub.add_parser("sweep", help="Monte-Carlo latency sweep"))
    p = common(sub.add_parser("grid-dump", help="dump the oracle's (alpha, gamma) grid"))
    p.add_argument("--oracle-step", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"solve": cmd_solve, "compare": cmd_solve, "sweep": cmd_sweep,
                "grid-dump": cmd_grid_dump}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnboundedLatencyError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())

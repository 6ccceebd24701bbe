"""Batch front-end.

Subcommands: ``dynamics`` (time evolution, one CSV per backend),
``blp`` (trace-distance witness for a fixed initial-state pair),
``steadystate`` (long-time transport report) and ``sweep`` (parameter
scans in a worker pool).  Every invocation writes a RunRecord JSON,
success or failure.

Exit codes: 0 success, 2 configuration error, 3 numeric non-convergence,
4 resource budget exceeded.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import observables, pipeline
from .accel import set_threads
from .bath import QuadratureError
from .config import ConfigError, build_config, config_from_dict, with_updates
from .heom import IntegrationError, SteadyStateError
from .hierarchy import ResourceError
from .records import RunRecord, Stopwatch, write_csv, write_json, write_rows_csv

log = logging.getLogger("spinboson2q")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_RESOURCE = 4


def _threads():
    raw = os.environ.get("SB2Q_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer SB2Q_THREADS=%r", raw)
    return os.cpu_count() or 1


def _add_common(parser):
    parser.add_argument("--preset", help="named parameter set (see config.schema.ini)")
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="SECTION.KEY=VALUE", help="override one config key",
    )
    parser.add_argument(
        "--from-record", help="rebuild the exact config of an earlier RunRecord JSON"
    )
    parser.add_argument("--outdir", default=".", help="output directory")
    parser.add_argument("--label", default="", help="prefix for output file names")


def _resolve_config(args):
    if args.from_record:
        with open(args.from_record, encoding="utf-8") as fh:
            data = json.load(fh)
        cfg = config_from_dict(data["config"])
        if args.preset or args.config or args.overrides:
            raise ConfigError("--from-record cannot be combined with other sources")
        return cfg
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs SECTION.KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if not (args.preset or args.config or overrides):
        raise ConfigError("no configuration given (use --preset, --config or --set)")
    return build_config(preset=args.preset, ini_path=args.config, overrides=overrides)


def _out(args, name):
    prefix = f"{args.label}_" if args.label else ""
    return Path(args.outdir) / f"{prefix}{name}"


STATE_CHOICES = ("ground", "excited", "plusplus")


def cmd_dynamics(args, cfg, record, watch):
    methods = ("heom", "rcm") if cfg.method == "both" else (cfg.method,)
    for method in methods:
        with watch.time(f"propagate_{method}"):
            if method == "heom":
                traj, _final, h = pipeline.heom_dynamics(cfg)
                record.hierarchy_size = h.n_ados
                record.note_expansions(*h.expansions)
            else:
                traj, _sys = pipeline.rcm_dynamics(cfg)
        cols = pipeline.trajectory_columns(traj, cfg)
        path = record.add_output(write_csv(_out(args, f"dynamics_{method}.csv"), cols))
        print(f"dynamics[{method}]: {len(traj.times)} samples -> {path}")
    return EXIT_OK


def cmd_blp(args, cfg, record, watch):
    grid = pipeline.default_grid(cfg)
    pair = (args.state_a, args.state_b)
    trajectories = []
    for name in pair:
        cfg_i = with_updates(cfg, initial_state=name)
        with watch.time(f"propagate_{name}"):
            traj, _final, h = pipeline.heom_dynamics(cfg_i, t_grid=grid)
        trajectories.append(traj)
    record.hierarchy_size = h.n_ados
    record.note_expansions(*h.expansions)
    td = np.array(
        [
            observables.trace_distance(a, b)
            for a, b in zip(trajectories[0].states, trajectories[1].states)
        ]
    )
    measure, revivals = observables.blp_witness(td)
    record.summary = {
        "blp_measure": measure,
        "revival_count": revivals,
        "initial_pair": list(pair),
    }
    record.add_output(write_csv(_out(args, "blp.csv"), {"t": grid, "trace_distance": td}))
    record.add_output(write_json(_out(args, "blp_summary.json"), record.summary))
    print(f"blp: measure={measure:.6g} revivals={revivals}")
    return EXIT_OK


def cmd_steadystate(args, cfg, record, watch):
    if cfg.method == "rcm":
        raise ConfigError("steadystate runs on the hierarchy backend only")
    with watch.time("steady_state"):
        report, _state, h = pipeline.steady_report(cfg)
    record.hierarchy_size = h.n_ados
    record.note_expansions(*h.expansions)
    payload = {
        "rho_real": report.rho.real,
        "rho_imag": report.rho.imag,
        "coherence_l1": report.coherence,
        "heat_current_j21": report.heat_current,
        "spin_current_j12": report.spin_current,
        "bath_current_1": report.bath_current_1,
        "bath_current_2": report.bath_current_2,
        "bath_current_local_1": report.bath_current_local_1,
        "bath_current_local_2": report.bath_current_local_2,
        "residual": report.residual,
        "converged": bool(report.converged),
    }
    if cfg.delta1 == 0.0:
        lhs = abs(report.heat_current)
        rhs = 0.5 * cfg.eps1 * abs(report.spin_current)
        payload["current_relationship"] = {
            "abs_j21": lhs,
            "half_eps1_abs_j12": rhs,
            "satisfied": bool(abs(lhs - rhs) <= 1e-6 * max(lhs, rhs, 1e-300)),
        }
    record.summary = {k: payload[k] for k in payload if not k.startswith("rho")}
    record.add_output(write_json(_out(args, "ness.json"), payload))
    rows = [
        ["coherence_l1", report.coherence],
        ["heat_current_j21", report.heat_current],
        ["spin_current_j12", report.spin_current],
        ["bath_current_1", report.bath_current_1],
        ["bath_current_2", report.bath_current_2],
        ["residual", report.residual],
    ]
    for i in range(4):
        for j in range(4):
            rows.append([f"rho_{i}{j}_re", report.rho[i, j].real])
            rows.append([f"rho_{i}{j}_im", report.rho[i, j].imag])
    record.add_output(write_rows_csv(_out(args, "ness.csv"), ["observable", "data"], rows))
    print(
        f"steadystate: residual={report.residual:.3e} coherence={report.coherence:.6g} "
        f"J21={report.heat_current:.6g}"
    )
    if not report.converged:
        raise SteadyStateError(
            f"steady-state residual {report.residual:.3e} above 1e-8"
        )
    return EXIT_OK


_AXES = ("T2", "delta", "L", "M")


def _sweep_config(cfg, axis, value):
    if axis == "T2":
        from dataclasses import replace

        return with_updates(cfg, bath2=replace(cfg.bath2, temperature=float(value)))
    if axis == "delta":
        return with_updates(cfg, delta1=float(value), delta2=float(value))
    if axis == "L":
        return with_updates(cfg, num_depth=int(value))
    if axis == "M":
        return with_updates(cfg, num_fock=int(value))
    raise ConfigError(f"unknown sweep axis {axis!r}")


def _sweep_point(payload):
    cfg, axis, value, target = payload
    cfg_v = _sweep_config(cfg, axis, value)
    try:
        if target == "steadystate":
            report, _state, _h = pipeline.steady_report(cfg_v)
            scalars = {
                "coherence_l1": report.coherence,
                "heat_current_j21": report.heat_current,
                "spin_current_j12": report.spin_current,
                "bath_current_1": report.bath_current_1,
                "bath_current_2": report.bath_current_2,
                "residual": report.residual,
            }
            series = None
        else:
            if axis == "M":
                traj, _sys = pipeline.rcm_dynamics(cfg_v)
            else:
                traj, _final, _h = pipeline.heom_dynamics(cfg_v)
            cols = pipeline.trajectory_columns(traj, cfg_v)
            scalars = {
                "peak_coherence": float(np.max(cols["coherence_l1"])),
                "final_sz1": float(cols["sz1"][-1]),
                "final_entropy": float(cols["entropy"][-1]),
            }
            series = {k: np.asarray(v) for k, v in cols.items() if k != "t"}
        return value, "ok", scalars, series
    except Exception as exc:  # survives into the status column, sweep continues
        return value, f"error: {type(exc).__name__}: {exc}", {}, None


def cmd_sweep(args, cfg, record, watch):
    values = [float(tok) for tok in args.values.split(",") if tok.strip()]
    if not values:
        raise ConfigError("--values must list at least one number")
    axis = args.axis
    target = args.target or ("steadystate" if axis == "T2" else "dynamics")
    payloads = [(cfg, axis, v, target) for v in values]

    workers = min(_threads(), len(values))
    with watch.time("sweep"):
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_sweep_point, payloads))
        else:
            results = [_sweep_point(p) for p in payloads]

    results.sort(key=lambda r: r[0])
    rows = []
    prev_series = None
    for value, status, scalars, series in results:
        for name, data in sorted(scalars.items()):
            rows.append([value, status, name, data])
        if target == "dynamics" and series is not None:
            if prev_series is not None:
                diff = float(np.max(np.abs(series["sz1"] - prev_series["sz1"])))
                rows.append([value, status, "max_sz1_diff_prev", diff])
            prev_series = series
        if status != "ok":
            rows.append([value, status, "failed", np.nan])
    path = record.add_output(
        write_rows_csv(
            _out(args, f"sweep_{axis}.csv"), ["value", "status", "observable", "data"], rows
        )
    )
    record.summary = {"axis": axis, "target": target, "points": len(values)}
    print(f"sweep[{axis}->{target}]: {len(values)} points -> {path}")
    if any(status != "ok" for _v, status, _s, _series in results):
        raise IntegrationError("one or more sweep points failed; see status column")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sb2q",
        description="Two-qubit spin-boson simulator (hierarchy + reaction-coordinate backends)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dyn = sub.add_parser("dynamics", help="propagate and emit observable columns")
    _add_common(p_dyn)

    p_blp = sub.add_parser("blp", help="trace-distance witness for an initial-state pair")
    _add_common(p_blp)
    p_blp.add_argument("--state-a", default="excited", choices=STATE_CHOICES)
    p_blp.add_argument("--state-b", default="plusplus", choices=STATE_CHOICES)

    p_ness = sub.add_parser("steadystate", help="steady-state transport report")
    _add_common(p_ness)

    p_sweep = sub.add_parser("sweep", help="scan one axis across values")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated numbers")
    p_sweep.add_argument("--target", choices=("dynamics", "steadystate"))
    return parser


_HANDLERS = {
    "dynamics": cmd_dynamics,
    "blp": cmd_blp,
    "steadystate": cmd_steadystate,
    "sweep": cmd_sweep,
}


def main(argv=None):
    logging.basicConfig(level=os.environ.get("SB2Q_LOGLEVEL", "INFO"))
    parser = build_parser()
    args = parser.parse_args(argv)
    set_threads(_threads())

    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    record = RunRecord.start(args.command, cfg)
    watch = Stopwatch(record)
    record_path = _out(args, "run_record.json")

    try:
        code = _HANDLERS[args.command](args, cfg, record, watch)
        record.status = "ok"
        return code
    except ConfigError as exc:
        record.status, record.error = "config-error", str(exc)
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        record.status, record.error = "resource-error", str(exc)
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (IntegrationError, SteadyStateError, QuadratureError) as exc:
        record.status, record.error = "numeric-error", str(exc)
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        record.write(record_path)


if __name__ == "__main__":
    sys.exit(main())

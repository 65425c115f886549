"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 dataset error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, MgDispatchError, PipelineError, SchemaError

EXIT_OK, EXIT_CONFIG, EXIT_DATASET, EXIT_RUNTIME = 0, 1, 2, 3


def _config(args):
    from .config import load_config, replace

    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_run(args):
    from .pipeline import run_pipeline

    cfg = _config(args)
    out = Path(args.out_dir) if args.out_dir else cfg.out_dir
    report = run_pipeline(cfg, out, threads=args.threads)
    c, b = report.cost, report.cost_baseline
    print(f"wrote {out}")
    print(f"converged={'true' if report.converged else 'false'}  z={c.z:.4f}  baseline z={b.z:.4f}")
    print(f"losses kWh/day: optimized {report.losses_optimized:.3f}  "
          f"baseline {report.losses_baseline:.3f}  no DG {report.losses_no_dg:.3f}")
    return EXIT_OK


def cmd_validate(args):
    cfg = _config(args)
    fl = cfg.fleet
    print(f"ok: dataset {cfg.dataset.name}, {len(fl.chps)} CHP, {len(fl.esss)} ESS, "
          f"{len(fl.wts)} WT, {len(fl.pvs)} PV, {cfg.n_generate}->{cfg.n_keep} scenarios, "
          f"seed {cfg.seed}")
    return EXIT_OK


def cmd_benchmark(args):
    from .benchmarks import run_suite

    seeds = range(args.seed, args.seed + args.runs)
    runs = run_suite(seeds, dim=args.dim, max_iterations=args.iterations)
    print("function,seed,best,iterations,solved,monotone")
    for r in runs:
        print(f"{r.function},{r.seed},{r.best!r},{r.iterations},{r.solved},{r.monotone}")
    for name in sorted({r.function for r in runs}):
        ok = sum(r.solved for r in runs if r.function == name)
        print(f"# {name}: solved {ok}/{args.runs}", file=sys.stderr)
    return EXIT_OK


def cmd_powerflow(args):
    import numpy as np

    from .config import resolve_dataset
    from .grid import distflow_residual, load_network, run_power_flow
    from .report import _write

    try:
        path = resolve_dataset(args.dataset, Path.cwd())
    except ConfigError as exc:
        raise SchemaError(str(exc)) from None
    net = load_network(path)
    sol = run_power_flow(net, -net.p_load, -net.q_load)
    if not sol.converged:
        raise MgDispatchError("power flow did not converge")
    v = np.abs(sol.v)
    k = int(np.argmin(v))
    print(f"{net.name}: {net.n_bus} buses, converged in {sol.iterations} iterations")
    print(f"losses {float(sol.losses_kw):.4f} kW, min voltage {v[k]:.6f} p.u. at bus {net.bus_ids[k]}")
    print(f"DistFlow residual {float(np.max(np.abs(distflow_residual(net, sol)))):.3e} p.u.")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "voltage.csv", ["bus_id", "v_pu"], zip(net.bus_ids, v))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mgdispatch", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log pipeline stages")
    sub = p.add_subparsers(dest="command", required=True)

    threads = argparse.ArgumentParser(add_help=False)
    threads.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")

    r = sub.add_parser("run", parents=[threads], help="run the full dispatch pipeline")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir", help="run directory (default: output.dir from the config)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a configuration file")
    v.add_argument("config")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("benchmark-coa", help="run the optimiser on sphere and Rastrigin")
    b.add_argument("--seed", type=int, default=0, help="first seed")
    b.add_argument("--runs", type=int, default=10)
    b.add_argument("--dim", type=int, default=2)
    b.add_argument("--iterations", type=int, default=200)
    b.set_defaults(func=cmd_benchmark)

    f = sub.add_parser("powerflow", help="nominal power flow of a dataset")
    f.add_argument("dataset", help="dataset directory or bundled:<name>")
    f.add_argument("--out-dir", help="write voltage.csv here")
    f.set_defaults(func=cmd_powerflow)
    return p


def exit_code(exc):
    if isinstance(exc, PipelineError):
        return EXIT_DATASET if exc.stage == "dataset" else exit_code(exc.cause)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, SchemaError):
        return EXIT_DATASET
    return EXIT_RUNTIME


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except MgDispatchError as exc:
        code = exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())

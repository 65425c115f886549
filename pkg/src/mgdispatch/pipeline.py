"""End-to-end run: load, generate, reduce, optimise, evaluate, report."""

from __future__ import annotations

import hashlib
import logging
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .coa import optimize
from .config import RunConfig
from .costs import DispatchProblem, DispatchSchedule, renewable_penetration
from .errors import PipelineError
from .grid import load_network
from .reliability import evaluate_reliability, installed_supply
from .report import (baseline_dispatch, build_report, evaluate_schedule, no_dg_flow,
                     write_report)
from .scenarios import generate_scenarios, reduce_scenarios

log = logging.getLogger(__name__)


@contextmanager
def stage(name):
    log.info("stage %s", name)
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def dataset_digest(path):
    """SHA-256 over the dataset's CSV files, in name order."""
    h = hashlib.sha256()
    for f in sorted(Path(path).glob("*.csv")):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def expected_renewable_kw(problem: DispatchProblem):
    """Scenario- and hour-averaged output of each WT then PV unit."""
    w = problem.prob
    wt = [float(w @ problem.wt_kw[:, :, i].mean(axis=1)) for i in range(problem.wt_kw.shape[2])]
    pv = [float(w @ problem.pv_kw[:, :, i].mean(axis=1)) for i in range(problem.pv_kw.shape[2])]
    return wt + pv


def run_pipeline(cfg: RunConfig, out_dir=None, threads=1):
    """Execute every stage and write the run directory; returns the :class:`RunReport`.

    ``threads`` only spreads work across cores; results do not depend on it.
    """
    out_dir = Path(out_dir) if out_dir is not None else cfg.out_dir

    with stage("dataset"):
        net = load_network(cfg.dataset)
    with stage("generate"):
        full = generate_scenarios(cfg.models, cfg.horizon, cfg.n_generate, cfg.seed, workers=threads)
    with stage("reduce"):
        scen = reduce_scenarios(full, cfg.n_keep)

    with stage("reliability"):
        bare = DispatchProblem(scen, net, cfg.fleet, cfg.prices, cfg.dt, t_cell=cfg.t_cell)
        supply = installed_supply(net, cfg.fleet, expected_renewable_kw(bare))
        rel = evaluate_reliability(net, bare.load_p, scen.probabilities, supply, cfg.c_int,
                                   cfg.h_c, cfg.t_res, cfg.t_rep, cfg.dt)
        problem = DispatchProblem(scen, net, cfg.fleet, cfg.prices, cfg.dt, f2=rel.ic_day,
                                  t_cell=cfg.t_cell)

    with stage("optimize"):
        base = baseline_dispatch(net, cfg.fleet, scen)
        if problem.dim:
            result = optimize(lambda X: problem.objective(X, workers=threads), problem.bounds(),
                              cfg.coa, vectorized=True, initial_positions=base.to_vector())
            best = DispatchSchedule.from_vector(result.best_position, cfg.horizon,
                                                len(cfg.fleet.chps), len(cfg.fleet.esss))
            trace, iters, evals = result.trace, result.iterations, result.evaluations
        else:
            best, trace, iters, evals = base, [], 0, 0

    with stage("evaluate"):
        opt_ev = evaluate_schedule(problem, best)
        base_ev = evaluate_schedule(problem, base)
        nodg = no_dg_flow(problem)
        rep = renewable_penetration(problem)

    with stage("report"):
        meta = {"seed": cfg.seed, "n_generate": cfg.n_generate, "n_keep": cfg.n_keep,
                "coa.iterations": iters, "coa.evaluations": evals}
        report = build_report(opt_ev, base_ev, problem, rel, nodg, cfg.period_len,
                              cfg.histogram_bins, trace, rep, meta)
        manifest = [
            ("package_version", __version__),
            ("seed", cfg.seed),
            ("config_file", cfg.source.name if cfg.source else ""),
            ("config_sha256", cfg.digest),
            ("dataset", cfg.dataset.name),
            ("dataset_sha256", dataset_digest(cfg.dataset)),
            ("numpy_version", np.__version__),
        ]
        write_report(report, out_dir, manifest)
    return report

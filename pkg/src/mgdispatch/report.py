"""Run reports: period dispatch table, voltages, losses, histograms and summaries.

Everything here is a pure function of evaluated schedules, so writing the
same report twice gives byte-identical files.  Floats are written with
``repr`` and rows follow fixed orders; no timestamps are recorded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import CostBreakdown, DispatchProblem, DispatchSchedule, aggregate_periods
from .errors import InvalidInputError
from .grid import run_power_flow
from .reliability import ReliabilityReport
from .scenarios import Histogram, empirical_distribution


def baseline_dispatch(net, fleet, scen):
    """Load-following reference schedule: every CHP at p_max times the ratio of
    expected hourly load to its daily peak, storage idle."""
    lm = scen.load_multiplier
    if lm.ndim == 2:
        lm = lm[:, :, None]
    hourly = np.einsum("s,sh->h", scen.probabilities, (lm * net.p_load).sum(axis=2))
    peak = hourly.max()
    ratio = hourly / peak if peak > 0 else np.zeros_like(hourly)
    chp = np.outer(ratio, [c.p_max for c in fleet.chps]).reshape(len(ratio), len(fleet.chps))
    return DispatchSchedule(chp, np.zeros((len(ratio), len(fleet.esss))))


@dataclass(frozen=True)
class ScheduleEvaluation:
    schedule: DispatchSchedule
    scen: object
    cost: CostBreakdown
    voltage: np.ndarray  # (S, H, n) p.u.
    losses_kw: np.ndarray  # (S, H)
    slack_kw: np.ndarray  # (S, H)
    converged: bool
    dt: float = 1.0

    @property
    def expected_losses_kw(self):
        return self.scen.probabilities @ self.losses_kw

    @property
    def losses_kwh(self):
        return float(self.expected_losses_kw.sum()) * self.dt


def evaluate_schedule(problem: DispatchProblem, s: DispatchSchedule):
    r = problem.evaluate_batch(s.to_vector()[None, :])
    sol = r["solution"]
    cost = CostBreakdown(*(float(r[k][0]) for k in ("fuel", "om", "emission", "losses", "grid")),
                         problem.f2, float(r["penalty"][0]), float(r["z"][0]),
                         problem.prices.h1, problem.prices.h2)
    return ScheduleEvaluation(s, problem.scen, cost, np.abs(sol.v[0]), sol.losses_kw[0],
                              sol.slack_p[0], bool(sol.converged), problem.dt)


@dataclass(frozen=True)
class FlowSnapshot:
    """Voltages and losses of a fixed operating point (used for the no-DG case)."""

    scen: object
    voltage: np.ndarray
    losses_kw: np.ndarray
    dt: float = 1.0

    @property
    def expected_losses_kw(self):
        return self.scen.probabilities @ self.losses_kw

    @property
    def losses_kwh(self):
        return float(self.expected_losses_kw.sum()) * self.dt


def no_dg_flow(problem: DispatchProblem):
    """Power flow with every generator and store disconnected."""
    sol = run_power_flow(problem.net, -problem.load_p, -problem.load_q)
    if not sol.converged:
        raise InvalidInputError("power flow without DG did not converge")
    return FlowSnapshot(problem.scen, np.abs(sol.v), sol.losses_kw, problem.dt)


@dataclass
class RunReport:
    dispatch_columns: list
    dispatch_table: np.ndarray  # (periods, columns) mean kW
    bus_ids: list
    voltage: dict  # case -> (mean per bus, min per bus)
    losses_hourly: dict  # case -> (H,) expected kW
    losses_optimized: float  # kWh/day
    losses_baseline: float
    losses_no_dg: float
    histograms: dict
    cost: CostBreakdown
    cost_baseline: CostBreakdown
    reliability: ReliabilityReport
    rep: dict
    converged: bool
    trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def v_min(self):
        return {case: float(v[1].min()) for case, v in self.voltage.items()}


def _same_scenarios(a, b):
    if a is b:
        return True
    return (len(a) == len(b) and np.array_equal(a.probabilities, b.probabilities)
            and np.array_equal(a.wind_speed, b.wind_speed)
            and np.array_equal(a.irradiance, b.irradiance)
            and np.array_equal(a.load_multiplier, b.load_multiplier))


def _voltage_stats(scen, v):
    w = scen.probabilities
    mean = np.einsum("s,shn->n", w, v) / v.shape[1]
    return mean, v.min(axis=(0, 1))


def build_report(optimized: ScheduleEvaluation, baseline: ScheduleEvaluation,
                 problem: DispatchProblem, reliability: ReliabilityReport, no_dg: FlowSnapshot,
                 period_len=3, bins=20, trace=(), rep=None, meta=None):
    """Assemble a :class:`RunReport`; all evaluations must share one scenario set."""
    scen = problem.scen
    for what, ev in (("optimized", optimized), ("baseline", baseline), ("no-DG", no_dg)):
        if not _same_scenarios(ev.scen, scen):
            raise InvalidInputError(f"{what} evaluation uses a different scenario set")
    fl, w = problem.fleet, scen.probabilities
    H = problem.horizon

    cols, series = [], []
    for i, u in enumerate(fl.pvs):
        cols.append(u.name)
        series.append(w @ problem.pv_kw[:, :, i])
    for i, u in enumerate(fl.wts):
        cols.append(u.name)
        series.append(w @ problem.wt_kw[:, :, i])
    s = optimized.schedule
    for i, c in enumerate(fl.chps):
        cols.append(c.name)
        series.append(s.chp_p[:, i])
    for i, e in enumerate(fl.esss):
        cols.append(e.name)
        series.append(s.ess_p[:, i])
    cols.append("grid")
    series.append(w @ optimized.slack_kw)
    table = aggregate_periods(np.column_stack(series), period_len)

    voltage = {
        "optimized": _voltage_stats(scen, optimized.voltage),
        "baseline": _voltage_stats(scen, baseline.voltage),
        "no_dg": _voltage_stats(scen, no_dg.voltage),
    }
    losses = {"optimized": optimized.expected_losses_kw, "baseline": baseline.expected_losses_kw,
              "no_dg": no_dg.expected_losses_kw}

    hour_w = np.repeat(w, H) / H
    hist = {}
    if fl.pvs:
        hist["pv"] = empirical_distribution(zip(problem.pv_kw.sum(axis=2).ravel(), hour_w), bins)
    if fl.wts:
        hist["wt"] = empirical_distribution(zip(problem.wt_kw.sum(axis=2).ravel(), hour_w), bins)
    hist["grid"] = empirical_distribution(zip(optimized.slack_kw.ravel(), hour_w), bins)
    if reliability.scenario_cost is not None:
        hist["ens_cost"] = empirical_distribution(zip(reliability.scenario_cost, w), bins)

    return RunReport(
        dispatch_columns=cols, dispatch_table=table, bus_ids=list(problem.net.bus_ids),
        voltage=voltage, losses_hourly=losses, losses_optimized=optimized.losses_kwh,
        losses_baseline=baseline.losses_kwh, losses_no_dg=no_dg.losses_kwh, histograms=hist,
        cost=optimized.cost, cost_baseline=baseline.cost, reliability=reliability,
        rep=dict(rep or {}), converged=optimized.converged and optimized.cost.penalty == 0,
        trace=list(trace), meta=dict(meta or {}),
    )


# --- writing ------------------------------------------------------------------


def fmt(value):
    """Deterministic text for a CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value + 0.0)  # folds -0.0 into 0.0
    return str(value)


def _write(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


def write_histogram(path, h: Histogram):
    rows = zip(h.bin_edges[:-1], h.bin_edges[1:], h.densities, h.cdf[1:])
    _write(Path(path), ("bin_lo", "bin_hi", "density", "cdf_hi"), rows)


def summary_rows(r: RunReport):
    rows = [("converged", r.converged)]
    for tag, c in (("optimized", r.cost), ("baseline", r.cost_baseline)):
        for k in ("fuel", "om", "emission", "losses", "grid"):
            rows.append((f"{tag}.{k}_cost", getattr(c, k)))
        rows += [(f"{tag}.f1", c.f1), (f"{tag}.f2", c.f2), (f"{tag}.penalty", c.penalty),
                 (f"{tag}.z", c.z)]
    rows += [("losses_kwh.optimized", r.losses_optimized), ("losses_kwh.baseline", r.losses_baseline),
             ("losses_kwh.no_dg", r.losses_no_dg)]
    rows += [(f"v_min.{case}", v) for case, v in r.v_min.items()]
    rel = r.reliability
    rows += [("reliability.aens_kwh", rel.aens), ("reliability.eir", rel.eir),
             ("reliability.c_aens", rel.c_aens), ("reliability.ic_day", rel.ic_day),
             ("reliability.total_demand_kwh", rel.total_demand)]
    for z, vals in sorted(rel.by_zone.items()):
        rows += [(f"zone{z}.{k}", vals[k]) for k in ("aens", "eir", "c_aens", "ic_day")]
    rows += [(f"zone{z}.rep", v) for z, v in sorted(r.rep.items())]
    rows += [(k, v) for k, v in r.meta.items()]
    return rows


def write_report(r: RunReport, out_dir, manifest=()):
    """Write the run directory and return its path."""
    out = Path(out_dir)
    (out / "histograms").mkdir(parents=True, exist_ok=True)
    n = r.dispatch_table.shape[0]
    per = len(r.losses_hourly["optimized"]) // n
    _write(out / "dispatch.csv", ["period", "start_hour", "end_hour", *r.dispatch_columns],
           ([p + 1, p * per, (p + 1) * per, *row] for p, row in enumerate(r.dispatch_table)))
    cases = list(r.voltage)
    _write(out / "voltage.csv",
           ["bus_id", *(f"{c}_{s}" for c in cases for s in ("mean", "min"))],
           ([b, *(r.voltage[c][k][i] for c in cases for k in (0, 1))]
            for i, b in enumerate(r.bus_ids)))
    _write(out / "losses.csv", ["hour", *(f"{c}_kw" for c in r.losses_hourly)],
           ([t, *(r.losses_hourly[c][t] for c in r.losses_hourly)]
            for t in range(len(r.losses_hourly["optimized"]))))
    for name, h in r.histograms.items():
        write_histogram(out / "histograms" / f"{name}.csv", h)
    _write(out / "summary.csv", ["key", "value"], summary_rows(r))
    _write(out / "trace.csv", ["iteration", "best_fitness", "population_size"], r.trace)
    _write(out / "manifest.csv", ["key", "value"], manifest)
    return out


def read_summary(path):
    """Summary file as a ``{key: text}`` mapping."""
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["key"]: row["value"] for row in csv.DictReader(fh)}

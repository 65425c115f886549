"""Contingency-based reliability: energy not supplied and interruption cost.

Each branch outage interrupts every bus downstream of it.  If the faulted
branch carries a sectionaliser and the installed generation inside the
downstream island covers the island's peak load, the island is re-energised
after the switching time ``t_res``; otherwise it waits ``t_rep`` for repair.
Failure rates are per year, so one day carries 1/365 of the expected outages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError
from .grid import NetworkModel

DAYS_PER_YEAR = 365.0
T_RES = 0.5
T_REP = 4.0
C_INT = 1.5


@dataclass(frozen=True)
class Contingency:
    branch_id: int
    probability_weight: float  # expected outages of this branch per day
    restored_load: float  # kW
    unrestored_load: float  # kW
    t_res: float = T_RES
    t_rep: float = T_REP
    restored_buses: tuple = ()
    unrestored_buses: tuple = ()

    @property
    def ens(self):
        return self.restored_load * self.t_res + self.unrestored_load * self.t_rep


def contingency_partition(net: NetworkModel, supply_kw, branch_id, load_kw=None,
                          peak_load_kw=None, t_res=T_RES, t_rep=T_REP):
    """Split the load cut off by an outage of ``branch_id`` into restored and unrestored.

    ``supply_kw`` is the installed generation per bus, ``load_kw`` the load
    whose interruption is counted (default: nominal), and ``peak_load_kw``
    the load the island must be able to carry (default: ``load_kw``).  A 2-D
    ``peak_load_kw`` of shape (hours, n_bus) uses the largest hourly island sum.
    """
    try:
        b = net.branch_index(branch_id)
    except KeyError:
        raise InvalidInputError(f"unknown branch id {branch_id}") from None
    if t_res > t_rep:
        raise InvalidInputError("t_res must not exceed t_rep")
    load = net.p_load if load_kw is None else np.asarray(load_kw, dtype=float)
    peak = load if peak_load_kw is None else np.asarray(peak_load_kw, dtype=float)
    supply = np.asarray(supply_kw, dtype=float)
    island = net.downstream[b]
    branch = net.branches[b]
    ids = tuple(net.buses[j].id for j in np.flatnonzero(island))
    lost = float(load[island].sum())
    need = peak[..., island].sum(axis=-1).max() if peak.ndim == 2 else peak[island].sum()
    restorable = bool(branch.has_sectionalizer and supply[island].sum() >= need)
    weight = branch.failure_rate * branch.length / DAYS_PER_YEAR
    if restorable:
        return Contingency(branch_id, weight, lost, 0.0, t_res, t_rep, ids, ())
    return Contingency(branch_id, weight, 0.0, lost, t_res, t_rep, (), ids)


def aens(contingencies):
    """Expected energy not supplied from ``(ens_kwh, probability)`` pairs."""
    total = 0.0
    for ens, prob in contingencies:
        if prob < 0:
            raise InvalidInputError("contingency probabilities must be >= 0")
        total += ens * prob
    return total


def eir(aens_kwh, total_demand_kwh):
    if total_demand_kwh <= 0:
        raise UndefinedMetricError("EIR needs positive total demand")
    return 1.0 - aens_kwh / total_demand_kwh


def interruption_cost_day(c_aens_value, h_c=1.0):
    if h_c < 0:
        raise InvalidInputError("h_c must be >= 0")
    return h_c * c_aens_value


def f2_total(ic_by_zone):
    return float(sum(ic_by_zone.values() if isinstance(ic_by_zone, dict) else ic_by_zone))


@dataclass(frozen=True)
class ReliabilityReport:
    aens: float  # kWh/day
    eir: float
    c_aens: float  # $/day
    ic_day: float  # $/day, equals F2
    total_demand: float  # kWh/day
    by_zone: dict = field(default_factory=dict)
    scenario_cost: np.ndarray = field(default=None, repr=False)  # C_AENS per scenario


def evaluate_reliability(net: NetworkModel, bus_load, prob, supply_kw, c_int=C_INT,
                         h_c=1.0, t_res=T_RES, t_rep=T_REP, dt=1.0):
    """Scenario-weighted reliability indices.

    ``bus_load`` is (S, H, n) kW.  Outages are equally likely in any hour, so
    interrupted power is the scenario's hour-mean load; restoration is tested
    against the scenario's peak island load.
    """
    bus_load = np.asarray(bus_load, dtype=float)
    prob = np.asarray(prob, dtype=float)
    zones = net.zones
    zone_ids = sorted(set(zones.tolist()))
    S = bus_load.shape[0]
    mean_load = bus_load.mean(axis=1)  # (S, n)
    total_demand = float(np.sum(prob[:, None] * bus_load.sum(axis=2)) * dt)

    ens_zone = {z: 0.0 for z in zone_ids}
    cost_zone = {z: 0.0 for z in zone_ids}
    scen_cost = np.zeros(S)
    for s in range(S):
        for br in net.branches:
            cont = contingency_partition(net, supply_kw, br.id, mean_load[s], bus_load[s],
                                         t_res, t_rep)
            island = net.downstream[net.branch_index(br.id)]
            hours = t_res if cont.restored_buses else t_rep
            for z in zone_ids:
                m = island & (zones == z)
                if not m.any():
                    continue
                ens = float(mean_load[s, m].sum()) * hours
                ens_zone[z] += prob[s] * cont.probability_weight * ens
                cost = c_int * cont.probability_weight * ens
                cost_zone[z] += prob[s] * cost
                scen_cost[s] += cost
    a = sum(ens_zone.values())
    c = sum(cost_zone.values())
    ic = {z: interruption_cost_day(v, h_c) for z, v in cost_zone.items()}
    by_zone = {}
    for z in zone_ids:
        demand = float(np.sum(prob[:, None] * bus_load[:, :, zones == z].sum(axis=2)) * dt)
        by_zone[z] = {
            "aens": ens_zone[z],
            "eir": eir(ens_zone[z], demand) if demand > 0 else float("nan"),
            "c_aens": cost_zone[z],
            "ic_day": ic[z],
        }
    return ReliabilityReport(a, eir(a, total_demand), c, f2_total(ic), total_demand,
                             by_zone, scen_cost)


def c_aens(net: NetworkModel, bus_load, prob, supply_kw, c_int=C_INT, t_res=T_RES, t_rep=T_REP):
    """Expected daily interruption cost summed over scenarios and branch outages."""
    return evaluate_reliability(net, bus_load, prob, supply_kw, c_int, 1.0, t_res, t_rep).c_aens


def installed_supply(net: NetworkModel, fleet, expected_renewable_kw=None):
    """Per-bus generation available to an island: CHP and ESS ratings plus
    expected renewable output (one value per WT then PV unit, in fleet order)."""
    supply = np.zeros(net.n_bus)
    for c in fleet.chps:
        supply[net.bus_index(c.bus_id)] += c.p_max
    for e in fleet.esss:
        supply[net.bus_index(e.bus_id)] += e.p_dis_max
    if expected_renewable_kw is not None:
        for u, p in zip(fleet.wts + fleet.pvs, expected_renewable_kw):
            supply[net.bus_index(u.bus_id)] += p
    return supply

"""Device models, the operating-cost stack and scenario-expected fitness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, UndefinedMetricError
from .grid import NetworkModel, run_power_flow
from .stochastic import PvParams, WtParams, pv_power, wt_power

DEFAULT_PENALTY = 1e6


@dataclass(frozen=True)
class EmissionCoeffs:
    e_a: float = 0.0
    e_b: float = 0.0
    e_c: float = 0.0
    e_zeta: float = 0.0
    e_lambda: float = 0.0

    def __post_init__(self):
        if not all(map(math.isfinite, (self.e_a, self.e_b, self.e_c, self.e_zeta, self.e_lambda))):
            raise InvalidParameterError("emission coefficients must be finite")


@dataclass(frozen=True)
class ChpParams:
    bus_id: int
    theta: float = 0.0
    varrho: float = 0.0
    gamma: float = 0.0
    gas_price: float = 0.03
    elec_eff: float = 0.35
    thermal_price: float = 0.03
    heat_to_electric: float = 1.2
    p_min: float = 0.0
    p_max: float = 100.0
    k_om: float = 0.0
    emission: EmissionCoeffs = field(default_factory=EmissionCoeffs)
    name: str = "chp"

    def __post_init__(self):
        if self.theta < 0:
            raise InvalidParameterError("theta must be >= 0")
        if not 0 < self.elec_eff <= 1:
            raise InvalidParameterError("elec_eff must lie in (0, 1]")
        if not 0 <= self.p_min <= self.p_max:
            raise InvalidParameterError("need 0 <= p_min <= p_max")


@dataclass(frozen=True)
class EssParams:
    bus_id: int
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    soc_min: float = 0.0
    soc_max: float = 100.0
    soc_init: float = 50.0
    p_ch_max: float = 50.0
    p_dis_max: float = 50.0
    k_om: float = 0.0
    soc_final_min: float | None = None
    name: str = "ess"

    def __post_init__(self):
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dis <= 1):
            raise InvalidParameterError("ESS efficiencies must lie in (0, 1]")
        if not self.soc_min <= self.soc_init <= self.soc_max:
            raise InvalidParameterError("need soc_min <= soc_init <= soc_max")
        if self.p_ch_max < 0 or self.p_dis_max < 0:
            raise InvalidParameterError("ESS power limits must be >= 0")


@dataclass(frozen=True)
class WtUnit:
    bus_id: int
    params: WtParams = field(default_factory=WtParams)
    om_fixed: float = 0.0  # $/h, independent of output
    name: str = "wt"


@dataclass(frozen=True)
class PvUnit:
    bus_id: int
    params: PvParams = field(default_factory=PvParams)
    om_fixed: float = 0.0
    name: str = "pv"


@dataclass(frozen=True)
class Fleet:
    chps: tuple = ()
    esss: tuple = ()
    wts: tuple = ()
    pvs: tuple = ()

    def __post_init__(self):
        for name in ("chps", "esss", "wts", "pvs"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def units(self):
        return self.chps + self.esss + self.wts + self.pvs


@dataclass(frozen=True)
class Prices:
    grid_buy: np.ndarray  # $/kWh per hour
    grid_sell: np.ndarray
    loss_price: float = 0.0  # $/kWh of branch losses
    penalty: float = DEFAULT_PENALTY
    h1: float = 1.0
    h2: float = 1.0

    def __post_init__(self):
        for name in ("grid_buy", "grid_sell"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.h1 < 0 or self.h2 < 0 or self.penalty < 0:
            raise InvalidParameterError("weights and penalty must be >= 0")


@dataclass(frozen=True)
class DispatchSchedule:
    chp_p: np.ndarray  # (horizon, n_chp) kW
    ess_p: np.ndarray  # (horizon, n_ess) kW, + discharge / - charge

    def __post_init__(self):
        for name in ("chp_p", "ess_p"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2 or not np.all(np.isfinite(arr)):
                raise InvalidParameterError(f"{name} must be a finite 2-D array")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.chp_p.shape[0] != self.ess_p.shape[0]:
            raise InvalidParameterError("CHP and ESS schedules cover different horizons")

    @property
    def horizon(self):
        return self.chp_p.shape[0]

    def to_vector(self):
        return np.concatenate([self.chp_p.ravel(), self.ess_p.ravel()])

    @classmethod
    def from_vector(cls, x, horizon, n_chp, n_ess):
        x = np.asarray(x, dtype=float)
        k = horizon * n_chp
        return cls(x[:k].reshape(horizon, n_chp), x[k:].reshape(horizon, n_ess))

    @classmethod
    def zeros(cls, horizon, fleet: Fleet):
        return cls(np.zeros((horizon, len(fleet.chps))), np.zeros((horizon, len(fleet.esss))))


@dataclass(frozen=True)
class CostBreakdown:
    fuel: float
    om: float
    emission: float
    losses: float
    grid: float
    interruption: float
    penalty: float
    z: float
    h1: float = 1.0
    h2: float = 1.0

    @property
    def f1(self):
        return self.fuel + self.om + self.emission + self.losses + self.grid

    @property
    def f2(self):
        return self.interruption


def compose_z(f1, f2, h1=1.0, h2=1.0, penalty=0.0):
    return h1 * f1 + h2 * f2 + penalty


# --- device cost terms ------------------------------------------------------


def _nonneg(p, what="power"):
    if np.any(np.asarray(p) < 0):
        raise InvalidInputError(f"{what} must be >= 0")


def chp_fuel_rate(p, c: ChpParams):
    """Fuel consumption theta·p² + varrho·p + gamma."""
    _nonneg(p)
    return c.theta * p * p + c.varrho * p + c.gamma


def chp_fuel_cost(p, c: ChpParams, dt=1.0):
    """Gas cost of producing ``p`` kW less the value of the recovered heat."""
    _nonneg(p)
    return (c.gas_price * p / c.elec_eff - c.thermal_price * c.heat_to_electric * p) * dt


def om_cost(p, k_om, dt=1.0):
    return k_om * p * dt


def emission_cost(p, e: EmissionCoeffs):
    return e.e_a + e.e_b * p + e.e_c * p * p + e.e_zeta * np.exp(e.e_lambda * p)


def split_ess_power(p):
    p = np.asarray(p, dtype=float)
    return np.maximum(-p, 0.0), np.maximum(p, 0.0)


def ess_step(soc, p_ch, p_dis, e: EssParams, dt=1.0):
    """State of charge after one step of charging ``p_ch`` or discharging ``p_dis``."""
    if p_ch < 0 or p_dis < 0:
        raise InvalidInputError("charge and discharge powers must be >= 0")
    if p_ch > 0 and p_dis > 0:
        raise InvalidInputError("an ESS cannot charge and discharge in the same step")
    return soc + e.eta_ch * p_ch * dt - p_dis * dt / e.eta_dis


def soc_trajectory(ess_p, e: EssParams, dt=1.0):
    """SOC after each hour for signed powers; ``ess_p`` may be batched on axis 0..-2."""
    p_ch, p_dis = split_ess_power(ess_p)
    delta = e.eta_ch * p_ch * dt - p_dis * dt / e.eta_dis
    return e.soc_init + np.cumsum(delta, axis=-1)


# --- constraints --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    constraint: str
    hour: int
    magnitude: float
    device: str = ""


def _violations_batch(chp_p, ess_p, fleet: Fleet, dt):
    """Summed violation magnitude per schedule; chp_p is (B, H, n_chp)."""
    total = np.zeros(chp_p.shape[0])
    for i, c in enumerate(fleet.chps):
        p = chp_p[:, :, i]
        total += np.sum(np.maximum(p - c.p_max, 0) + np.maximum(c.p_min - p, 0), axis=1)
    for i, e in enumerate(fleet.esss):
        p = ess_p[:, :, i]
        total += np.sum(np.maximum(p - e.p_dis_max, 0) + np.maximum(-p - e.p_ch_max, 0), axis=1)
        soc = soc_trajectory(p, e, dt)
        total += np.sum(np.maximum(soc - e.soc_max, 0) + np.maximum(e.soc_min - soc, 0), axis=1)
        if e.soc_final_min is not None:
            total += np.maximum(e.soc_final_min - soc[:, -1], 0)
    return total


def check_constraints(s: DispatchSchedule, fleet: Fleet, sols=None, dt=1.0, balance_tol=1e-6):
    """List every bound violation in a schedule.

    ``sols`` (optional) are hourly power-flow solutions; their slack balance
    is re-checked and a non-converged hour is reported as ``power_flow``.
    """
    if s.chp_p.shape[1] != len(fleet.chps) or s.ess_p.shape[1] != len(fleet.esss):
        raise InvalidInputError("schedule shape does not match the fleet")
    out = []
    for i, c in enumerate(fleet.chps):
        for t, p in enumerate(s.chp_p[:, i]):
            if p > c.p_max:
                out.append(Violation("chp_max", t, float(p - c.p_max), c.name))
            elif p < c.p_min:
                out.append(Violation("chp_min", t, float(c.p_min - p), c.name))
    for i, e in enumerate(fleet.esss):
        p = s.ess_p[:, i]
        for t in range(s.horizon):
            if p[t] > e.p_dis_max:
                out.append(Violation("ess_discharge_max", t, float(p[t] - e.p_dis_max), e.name))
            elif -p[t] > e.p_ch_max:
                out.append(Violation("ess_charge_max", t, float(-p[t] - e.p_ch_max), e.name))
        soc = e.soc_init
        for t in range(s.horizon):
            p_ch, p_dis = split_ess_power(p[t])
            soc = ess_step(soc, float(p_ch), float(p_dis), e, dt)
            if soc > e.soc_max:
                out.append(Violation("soc_max", t, float(soc - e.soc_max), e.name))
            elif soc < e.soc_min:
                out.append(Violation("soc_min", t, float(e.soc_min - soc), e.name))
        if e.soc_final_min is not None and soc < e.soc_final_min:
            out.append(Violation("soc_final", s.horizon - 1, float(e.soc_final_min - soc), e.name))
    for t, sol in enumerate(sols or ()):
        if not sol.converged:
            out.append(Violation("power_flow", t, 1.0))
            continue
        gen = -np.sum(sol.load_p)
        res = abs(gen + float(np.sum(sol.slack_p)) - float(np.sum(sol.losses_kw)))
        if res > balance_tol * sol.net.s_base:
            out.append(Violation("balance", t, res))
    return out


def penalty(violations, coefficient=DEFAULT_PENALTY):
    return coefficient * sum(v.magnitude for v in violations)


# --- scenario-expected evaluation ---------------------------------------------


def aggregate_periods(values, period_len=3):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if period_len < 1 or n % period_len:
        raise InvalidParameterError(f"period length {period_len} does not divide {n}")
    return values.reshape(n // period_len, period_len, *values.shape[1:]).mean(axis=1)


class DispatchProblem:
    """Everything needed to price dispatch schedules against a scenario set.

    Scenario-hour operating points are precomputed once; ``evaluate_batch``
    then solves one stacked power flow per batch of schedules.
    """

    def __init__(self, scen, net: NetworkModel, fleet: Fleet, prices: Prices, dt=1.0,
                 f2=0.0, t_cell=None, q_load_follows=True):
        self.scen = scen
        self.net = net
        self.fleet = fleet
        self.prices = prices
        self.dt = dt
        self.f2 = float(f2)
        self.horizon = scen.horizon
        if prices.grid_buy.shape != (self.horizon,) or prices.grid_sell.shape != (self.horizon,):
            raise InvalidParameterError("grid tariffs must have one value per hour")
        H, n = self.horizon, net.n_bus
        self.prob = scen.probabilities
        S = len(self.prob)

        lm = scen.load_multiplier
        if lm.ndim == 2:
            lm = lm[:, :, None]
        self.load_p = lm * net.p_load  # (S, H, n)
        self.load_q = lm * net.q_load if q_load_follows else np.broadcast_to(net.q_load, (S, H, n))

        self.wt_kw = np.zeros((S, H, len(fleet.wts)))
        for i, u in enumerate(fleet.wts):
            self.wt_kw[:, :, i] = wt_power(scen.wind_speed, u.params)
        self.pv_kw = np.zeros((S, H, len(fleet.pvs)))
        for i, u in enumerate(fleet.pvs):
            self.pv_kw[:, :, i] = pv_power(scen.irradiance, u.params, t_cell)
        self.ren_inj = np.zeros((S, H, n))
        for i, u in enumerate(fleet.wts):
            self.ren_inj[:, :, net.bus_index(u.bus_id)] += self.wt_kw[:, :, i]
        for i, u in enumerate(fleet.pvs):
            self.ren_inj[:, :, net.bus_index(u.bus_id)] += self.pv_kw[:, :, i]

        self.chp_idx = np.array([net.bus_index(c.bus_id) for c in fleet.chps], dtype=int)
        self.ess_idx = np.array([net.bus_index(e.bus_id) for e in fleet.esss], dtype=int)
        self.ren_om = sum(u.om_fixed for u in fleet.wts + fleet.pvs) * H * dt
        self.dim = H * (len(fleet.chps) + len(fleet.esss))

    # bounds of the flattened decision vector
    def bounds(self):
        H, fl = self.horizon, self.fleet
        lo = np.concatenate([np.tile([c.p_min for c in fl.chps], H),
                             np.tile([-e.p_ch_max for e in fl.esss], H)])
        hi = np.concatenate([np.tile([c.p_max for c in fl.chps], H),
                             np.tile([e.p_dis_max for e in fl.esss], H)])
        return lo, hi

    def split(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        B, H = x.shape[0], self.horizon
        k = H * len(self.fleet.chps)
        return (x[:, :k].reshape(B, H, len(self.fleet.chps)),
                x[:, k:].reshape(B, H, len(self.fleet.esss)))

    def injections(self, chp_p, ess_p):
        """Net bus injections (B, S, H, n) for batched schedules."""
        B = chp_p.shape[0]
        inj = np.broadcast_to(self.ren_inj - self.load_p, (B,) + self.load_p.shape).copy()
        for i, j in enumerate(self.chp_idx):
            inj[..., j] += chp_p[:, None, :, i]
        for i, j in enumerate(self.ess_idx):
            inj[..., j] += ess_p[:, None, :, i]
        return inj

    def power_flow(self, chp_p, ess_p):
        inj = self.injections(chp_p, ess_p)
        q = np.broadcast_to(-self.load_q, inj.shape)
        return run_power_flow(self.net, inj, q)

    def evaluate_batch(self, x):
        """Cost components for each row of ``x``; returns a dict of (B,) arrays."""
        chp_p, ess_p = self.split(x)
        fl, dt, pr = self.fleet, self.dt, self.prices
        B = chp_p.shape[0]

        fuel = np.zeros(B)
        om = np.zeros(B) + self.ren_om
        emis = np.zeros(B)
        for i, c in enumerate(fl.chps):
            p = chp_p[:, :, i]
            pc = np.maximum(p, 0.0)
            fuel += np.sum(c.gas_price * pc / c.elec_eff - c.thermal_price * c.heat_to_electric * pc, axis=1) * dt
            om += np.sum(om_cost(pc, c.k_om, dt), axis=1)
            emis += np.sum(emission_cost(pc, c.emission), axis=1) * dt
        for i, e in enumerate(fl.esss):
            om += np.sum(np.abs(ess_p[:, :, i]), axis=1) * e.k_om * dt

        sol = self.power_flow(chp_p, ess_p)
        loss = sol.losses_kw  # (B, S, H)
        slack = sol.slack_p
        w = self.prob[None, :, None]
        losses = np.sum(w * loss, axis=(1, 2)) * pr.loss_price * dt
        grid_t = pr.grid_buy * np.maximum(slack, 0) - pr.grid_sell * np.maximum(-slack, 0)
        grid = np.sum(w * grid_t, axis=(1, 2)) * dt

        viol = _violations_batch(chp_p, ess_p, fl, dt)
        bad = ~np.isfinite(loss) | (np.abs(sol.v).min(axis=-1) <= 0)
        if not sol.converged:
            bad |= True
        viol = viol + np.sum(bad, axis=(1, 2))
        pen = pr.penalty * viol
        f1 = fuel + om + emis + losses + grid
        z = compose_z(f1, self.f2, pr.h1, pr.h2, pen)
        z = np.where(np.isfinite(z), z, np.inf)
        return {"fuel": fuel, "om": om, "emission": emis, "losses": losses, "grid": grid,
                "penalty": pen, "f1": f1, "z": z, "solution": sol}

    def objective(self, x, chunk=16, workers=1):
        """Batched fitness for the optimiser: rows of ``x`` -> z.

        Rows are priced independently, so chunking and ``workers`` never
        change the values.
        """
        x = np.atleast_2d(x)
        parts = [x[i:i + chunk] for i in range(0, len(x), chunk)]
        run = lambda part: self.evaluate_batch(part)["z"]
        if workers > 1 and len(parts) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(workers) as pool:
                return np.concatenate(list(pool.map(run, parts)))
        return np.concatenate([run(part) for part in parts])

    def breakdown(self, s: DispatchSchedule):
        r = self.evaluate_batch(s.to_vector()[None, :])
        g = lambda k: float(r[k][0])
        return CostBreakdown(g("fuel"), g("om"), g("emission"), g("losses"), g("grid"),
                             self.f2, g("penalty"), g("z"), self.prices.h1, self.prices.h2)

    def expected_demand_kwh(self, zone=None):
        mask = np.ones(self.net.n_bus, bool) if zone is None else self.net.zones == zone
        return float(np.sum(self.prob[:, None] * self.load_p[:, :, mask].sum(axis=2)) * self.dt)


def evaluate_F1(s: DispatchSchedule, scen, net, fleet, prices, dt=1.0):
    """Probability-weighted daily fuel, O&M, emission, loss and grid cost."""
    return DispatchProblem(scen, net, fleet, prices, dt).breakdown(s).f1


def fitness(s: DispatchSchedule, scen, net, fleet, prices, f2=0.0, dt=1.0):
    """Weighted objective with the exterior constraint penalty."""
    return DispatchProblem(scen, net, fleet, prices, dt, f2=f2).breakdown(s)


def renewable_penetration(problem: DispatchProblem, s: DispatchSchedule | None = None):
    """Expected renewable energy over demand energy for every zone that has load.

    Renewables run at maximum power point, so ``s`` does not change the result.
    """
    net, fl = problem.net, problem.fleet
    zones = sorted(set(net.zones.tolist()))
    out = {}
    for zone in zones:
        demand = problem.expected_demand_kwh(zone)
        if demand <= 0:
            continue
        ren = 0.0
        for i, u in enumerate(fl.wts):
            if net.buses[net.bus_index(u.bus_id)].mg_zone == zone:
                ren += float(np.sum(problem.prob[:, None] * problem.wt_kw[:, :, i]))
        for i, u in enumerate(fl.pvs):
            if net.buses[net.bus_index(u.bus_id)].mg_zone == zone:
                ren += float(np.sum(problem.prob[:, None] * problem.pv_kw[:, :, i]))
        out[zone] = penetration_ratio(ren * problem.dt, demand)
    return out


def penetration_ratio(renewable_kwh, demand_kwh):
    if demand_kwh <= 0:
        raise UndefinedMetricError("renewable penetration needs positive demand")
    return renewable_kwh / demand_kwh

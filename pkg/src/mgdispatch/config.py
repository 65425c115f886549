"""Run configuration: a versioned YAML file with strict keys and bundled-case defaults.

Every key is optional except ``dataset``.  Unknown keys, wrong types and bus
references missing from the dataset raise :class:`ConfigError` naming the key.
Hourly profiles accept either a scalar (repeated for every hour) or a list of
``horizon`` values.  Relative paths resolve against the config file's folder.
"""

from __future__ import annotations

import copy
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .coa import CoaConfig
from .costs import ChpParams, EmissionCoeffs, EssParams, Fleet, Prices, PvUnit, WtUnit
from .errors import ConfigError, MgDispatchError
from .grid import bundled_dataset
from .scenarios import HourlyModels
from .stochastic import PvParams, WtParams

CONFIG_VERSION = 1

# Diurnal shapes shipped with the bundled case.  They are illustrative
# planning profiles, not measured data.
LOAD_MEAN = [0.62, 0.58, 0.56, 0.55, 0.56, 0.60, 0.68, 0.78, 0.86, 0.90, 0.92, 0.93,
             0.92, 0.91, 0.90, 0.90, 0.92, 0.96, 1.00, 0.99, 0.95, 0.88, 0.78, 0.68]
IRR_MEAN = [0.0] * 6 + [round(0.65 * math.sin(math.pi * (t - 6) / 12), 4) for t in range(6, 18)] \
    + [0.0] * 6
T_CELL = [20, 19, 19, 18, 18, 19, 22, 26, 30, 34, 37, 39,
          40, 40, 39, 37, 34, 30, 27, 25, 23, 22, 21, 20]
GRID_BUY = [0.09] * 7 + [0.13] * 10 + [0.18] * 5 + [0.09] * 2

_EMISSION = {"e_a": 0.1, "e_b": 0.005, "e_c": 1e-6, "e_zeta": 0.01, "e_lambda": 0.005}
_CHP = {"theta": 2e-5, "varrho": 0.28, "gamma": 2.0, "gas_price": 0.035, "elec_eff": 0.35,
        "thermal_price": 0.03, "heat_to_electric": 1.2, "p_min": 60.0, "p_max": 300.0,
        "k_om": 0.005, "emission": _EMISSION}
_ESS = {"eta_ch": 0.95, "eta_dis": 0.95, "soc_min": 40.0, "soc_max": 400.0, "soc_init": 200.0,
        "soc_final_min": 200.0, "p_ch_max": 60.0, "p_dis_max": 60.0, "k_om": 0.002}
_WT = {"p_rate": 250.0, "v_ci": 2.0, "v_r": 14.0, "v_co": 25.0, "om_fixed": 1.0}
_PV = {"p_stc": 250.0, "g_stc": 1000.0, "k": 0.001, "t_ref": 25.0, "om_fixed": 0.5}

DEFAULTS = {
    "config_version": CONFIG_VERSION,
    "dataset": None,
    "seed": 42,
    "horizon": 24,
    "period_len": 3,
    "dt": 1.0,
    "scenarios": {"n_generate": 1000, "n_keep": 30, "per_bus_load": False,
                  "beta_variant": "printed"},
    "profiles": {"load_mean": LOAD_MEAN, "load_std": [round(0.05 * v, 4) for v in LOAD_MEAN],
                 "wind_shape": 3.0, "wind_scale": 12.0, "irr_mean": IRR_MEAN, "irr_std": 0.1,
                 "g_max": 1000.0, "t_cell": T_CELL},
    "prices": {"grid_buy": GRID_BUY, "grid_sell": 0.05, "loss_price": 0.1, "c_int": 1.5,
               "penalty": 1e6},
    "weights": {"h1": 1.0, "h2": 1.0, "h_c": 1.0},
    "reliability": {"t_res": 0.5, "t_rep": 4.0},
    "fleet": {
        "chp": [{"name": "CHP1", "bus": 50}, {"name": "CHP2", "bus": 61},
                {"name": "CHP3", "bus": 12}],
        "ess": [{"name": "ESS1", "bus": 50}, {"name": "ESS2", "bus": 61},
                {"name": "ESS3", "bus": 12}],
        "wt": [{"name": "WT1", "bus": 49}, {"name": "WT2", "bus": 59}],
        "pv": [{"name": "PV1", "bus": 64}, {"name": "PV2", "bus": 21}],
    },
    "coa": {"n_initial": 20, "max_population": 50, "eggs_min": 2, "eggs_max": 4,
            "n_clusters": 3, "motion_coefficient": 2.0, "max_iterations": 300,
            "elr_alpha": 5.0, "egg_demise": 0.1, "stall_iterations": 50},
    "output": {"dir": "runs/latest", "histogram_bins": 20},
}
DEVICE_DEFAULTS = {"chp": _CHP, "ess": _ESS, "wt": _WT, "pv": _PV}


def _merge(defaults, user, path):
    if not isinstance(user, dict):
        raise ConfigError(path or "<root>", "expected a mapping")
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        full = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(full, "unknown key")
        if isinstance(defaults[key], dict) and key != "fleet":
            out[key] = _merge(defaults[key], value, full)
        else:
            out[key] = value
    return out


def _num(value, key, lo=None, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if integer:
        ok = ok and float(value).is_integer()
    if not ok or not math.isfinite(value):
        raise ConfigError(key, f"expected {'an integer' if integer else 'a number'}, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(key, f"must be >= {lo}")
    return int(value) if integer else float(value)


def _profile(value, key, horizon):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(horizon, _num(value, key))
    if not isinstance(value, list) or len(value) != horizon:
        raise ConfigError(key, f"expected a number or a list of {horizon} numbers")
    return np.array([_num(v, f"{key}[{i}]") for i, v in enumerate(value)])


def _device(kind, spec, idx):
    key = f"fleet.{kind}[{idx}]"
    if not isinstance(spec, dict):
        raise ConfigError(key, "expected a mapping")
    merged = dict(DEVICE_DEFAULTS[kind], name=f"{kind.upper()}{idx + 1}", bus=None)
    for k, v in spec.items():
        if k not in merged:
            raise ConfigError(f"{key}.{k}", "unknown key")
        merged[k] = v
    if merged["bus"] is None:
        raise ConfigError(f"{key}.bus", "missing")
    bus = _num(merged.pop("bus"), f"{key}.bus", integer=True)
    name = str(merged.pop("name"))
    try:
        if kind == "chp":
            em = merged.pop("emission")
            unknown = set(em) - set(_EMISSION)
            if unknown:
                raise ConfigError(f"{key}.emission.{sorted(unknown)[0]}", "unknown key")
            em = {k: _num(v, f"{key}.emission.{k}") for k, v in dict(_EMISSION, **em).items()}
            vals = {k: _num(v, f"{key}.{k}") for k, v in merged.items()}
            return ChpParams(bus, emission=EmissionCoeffs(**em), name=name, **vals)
        if kind == "ess":
            final = merged.pop("soc_final_min")
            vals = {k: _num(v, f"{key}.{k}") for k, v in merged.items()}
            final = None if final is None else _num(final, f"{key}.soc_final_min")
            return EssParams(bus, soc_final_min=final, name=name, **vals)
        om = _num(merged.pop("om_fixed"), f"{key}.om_fixed", lo=0)
        vals = {k: _num(v, f"{key}.{k}") for k, v in merged.items()}
        if kind == "wt":
            return WtUnit(bus, WtParams(**vals), om, name)
        return PvUnit(bus, PvParams(**vals), om, name)
    except ConfigError:
        raise
    except MgDispatchError as exc:
        raise ConfigError(key, str(exc)) from None


@dataclass(frozen=True)
class RunConfig:
    dataset: Path
    seed: int
    horizon: int
    period_len: int
    dt: float
    n_generate: int
    n_keep: int
    models: HourlyModels
    t_cell: np.ndarray
    fleet: Fleet
    prices: Prices
    c_int: float
    h_c: float
    t_res: float
    t_rep: float
    coa: CoaConfig
    out_dir: Path
    histogram_bins: int
    source: Path | None = None
    digest: str = ""
    raw: dict = field(default_factory=dict, repr=False)


def resolve_dataset(value, base: Path):
    if not isinstance(value, str) or not value:
        raise ConfigError("dataset", "expected a dataset path or 'bundled:<name>'")
    if value.startswith("bundled:"):
        path = bundled_dataset(value.split(":", 1)[1])
    else:
        path = (base / value).resolve()
    if not path.is_dir():
        raise ConfigError("dataset", f"{value!r} is not a dataset directory")
    return path


def build_config(user: dict, base: Path = Path("."), n_bus_lookup=None, source=None, digest=""):
    """Validate a parsed mapping and apply defaults.

    ``n_bus_lookup`` is a callable returning the dataset's bus ids; when given,
    device placements are checked against it.
    """
    if user is None:
        user = {}
    c = _merge(DEFAULTS, user, "")
    if c["config_version"] != CONFIG_VERSION:
        raise ConfigError("config_version", f"unsupported version {c['config_version']!r}")
    dataset = resolve_dataset(c["dataset"], base)
    H = _num(c["horizon"], "horizon", lo=1, integer=True)
    period = _num(c["period_len"], "period_len", lo=1, integer=True)
    if H % period:
        raise ConfigError("period_len", f"must divide horizon {H}")
    sc = c["scenarios"]
    n_gen = _num(sc["n_generate"], "scenarios.n_generate", lo=1, integer=True)
    n_keep = _num(sc["n_keep"], "scenarios.n_keep", lo=1, integer=True)
    if n_keep > n_gen:
        raise ConfigError("scenarios.n_keep", "must not exceed scenarios.n_generate")
    if sc["beta_variant"] not in ("printed", "standard"):
        raise ConfigError("scenarios.beta_variant", "expected 'printed' or 'standard'")
    if not isinstance(sc["per_bus_load"], bool):
        raise ConfigError("scenarios.per_bus_load", "expected true or false")

    pr = c["profiles"]
    prof = {k: _profile(pr[k], f"profiles.{k}", H)
            for k in ("load_mean", "load_std", "wind_shape", "wind_scale", "irr_mean", "irr_std",
                      "t_cell")}
    bus_ids = list(n_bus_lookup()) if n_bus_lookup else None
    try:
        models = HourlyModels(prof["load_mean"], prof["load_std"], prof["wind_shape"],
                              prof["wind_scale"], prof["irr_mean"], prof["irr_std"],
                              _num(pr["g_max"], "profiles.g_max"), sc["beta_variant"],
                              sc["per_bus_load"], len(bus_ids) if bus_ids else 1)
    except MgDispatchError as exc:
        raise ConfigError("profiles", str(exc)) from None

    fl = c["fleet"]
    if not isinstance(fl, dict):
        raise ConfigError("fleet", "expected a mapping")
    for kind in fl:
        if kind not in DEVICE_DEFAULTS:
            raise ConfigError(f"fleet.{kind}", "unknown device type")
    devices = {}
    for kind in DEVICE_DEFAULTS:
        specs = fl.get(kind, [])
        if not isinstance(specs, list):
            raise ConfigError(f"fleet.{kind}", "expected a list")
        devices[kind] = [_device(kind, s, i) for i, s in enumerate(specs)]
        if bus_ids is not None:
            for i, d in enumerate(devices[kind]):
                if d.bus_id not in bus_ids:
                    raise ConfigError(f"fleet.{kind}[{i}].bus",
                                      f"bus {d.bus_id} does not exist in the dataset")
    fleet = Fleet(devices["chp"], devices["ess"], devices["wt"], devices["pv"])

    p, w = c["prices"], c["weights"]
    weights = {k: _num(w[k], f"weights.{k}", lo=0) for k in ("h1", "h2", "h_c")}
    prices = Prices(_profile(p["grid_buy"], "prices.grid_buy", H),
                    _profile(p["grid_sell"], "prices.grid_sell", H),
                    loss_price=_num(p["loss_price"], "prices.loss_price", lo=0),
                    penalty=_num(p["penalty"], "prices.penalty", lo=0),
                    h1=weights["h1"], h2=weights["h2"])

    r = c["reliability"]
    t_res = _num(r["t_res"], "reliability.t_res", lo=0)
    t_rep = _num(r["t_rep"], "reliability.t_rep", lo=0)
    if t_res > t_rep:
        raise ConfigError("reliability.t_res", "must not exceed reliability.t_rep")

    co = c["coa"]
    ints = ("n_initial", "max_population", "eggs_min", "eggs_max", "n_clusters",
            "max_iterations", "stall_iterations")
    coa_vals = {k: _num(v, f"coa.{k}", lo=0, integer=k in ints) for k, v in co.items()}
    seed = _num(c["seed"], "seed", lo=0, integer=True)
    try:
        coa = CoaConfig(seed=seed, **coa_vals)
    except MgDispatchError as exc:
        raise ConfigError("coa", str(exc)) from None

    out = c["output"]
    bins = _num(out["histogram_bins"], "output.histogram_bins", lo=1, integer=True)
    if not isinstance(out["dir"], str):
        raise ConfigError("output.dir", "expected a path")
    return RunConfig(
        dataset=dataset, seed=seed, horizon=H, period_len=period,
        dt=_num(c["dt"], "dt", lo=0), n_generate=n_gen, n_keep=n_keep, models=models,
        t_cell=prof["t_cell"], fleet=fleet, prices=prices,
        c_int=_num(p["c_int"], "prices.c_int", lo=0), h_c=weights["h_c"],
        t_res=t_res, t_rep=t_rep, coa=coa, out_dir=(base / out["dir"]), histogram_bins=bins,
        source=source, digest=digest, raw=c,
    )


def load_config(path):
    """Parse, validate and default a run configuration file."""
    from .grid import load_network

    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    try:
        user = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError("<root>", "expected a mapping")
    base = path.resolve().parent
    dataset = resolve_dataset(user.get("dataset"), base)
    lookup = lambda: load_network(dataset).bus_ids
    return build_config(user, base, lookup, path, hashlib.sha256(text).hexdigest())


def replace(cfg: RunConfig, **changes):
    """Copy of ``cfg`` with top-level fields changed (seed also reseeds the optimiser)."""
    import dataclasses

    if "seed" in changes:
        changes.setdefault("coa", dataclasses.replace(cfg.coa, seed=changes["seed"]))
    return dataclasses.replace(cfg, **changes)

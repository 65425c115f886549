"""Monte Carlo scenario generation, backward scenario reduction and
probability-weighted histograms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidInputError, InvalidParameterError
from .stochastic import (
    NormalDist,
    WeibullDist,
    beta_params_from_moments,
    weibull_inverse_cdf,
)

HORIZON = 24


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HourlyModels:
    """Per-hour distribution parameters for every stochastic input.

    ``load_mean``/``load_std`` describe the load multiplier applied to the
    nominal bus load; irradiance moments are fractions of ``g_max``.
    """

    load_mean: np.ndarray
    load_std: np.ndarray
    wind_shape: np.ndarray
    wind_scale: np.ndarray
    irr_mean: np.ndarray
    irr_std: np.ndarray
    g_max: float = 1000.0
    beta_variant: str = "printed"
    per_bus_load: bool = False
    n_bus: int = 1

    def __post_init__(self):
        lengths = set()
        for name in ("load_mean", "load_std", "wind_shape", "wind_scale", "irr_mean", "irr_std"):
            arr = _frozen(getattr(self, name))
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise InvalidParameterError(f"{name} must be a finite 1-D profile")
            object.__setattr__(self, name, arr)
            lengths.add(arr.size)
        if len(lengths) != 1:
            raise InvalidParameterError("all hourly profiles must share one length")
        if np.any(self.load_std < 0) or np.any(self.irr_std < 0):
            raise InvalidParameterError("standard deviations must be non-negative")
        if np.any(self.wind_shape <= 0) or np.any(self.wind_scale <= 0):
            raise InvalidParameterError("Weibull parameters must be positive")
        if np.any(self.irr_mean < 0) or np.any(self.irr_mean >= 1):
            raise InvalidParameterError("irradiance mean fractions must lie in [0, 1)")
        if self.g_max <= 0:
            raise InvalidParameterError("g_max must be positive")
        # Fail early on infeasible Beta moments instead of mid-generation.
        for m, s in zip(self.irr_mean, self.irr_std):
            if m > 0:
                beta_params_from_moments(float(m), float(s), self.beta_variant)

    @property
    def horizon(self):
        return int(self.load_mean.size)


@dataclass(frozen=True)
class Scenario:
    probability: float
    wind_speed: np.ndarray
    irradiance: np.ndarray
    load_multiplier: np.ndarray  # (horizon,) system-wide or (horizon, n_bus)
    index: int = 0

    def __post_init__(self):
        for name in ("wind_speed", "irradiance", "load_multiplier"):
            arr = _frozen(getattr(self, name))
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InvalidParameterError(f"{name} entries must be finite and >= 0")
            object.__setattr__(self, name, arr)
        h = self.wind_speed.shape[0]
        if self.irradiance.shape != (h,) or self.load_multiplier.shape[0] != h:
            raise InvalidParameterError("scenario arrays must share the horizon length")
        if not 0 < self.probability <= 1:
            raise InvalidParameterError("scenario probability must lie in (0, 1]")

    def features(self):
        return np.concatenate(
            [self.wind_speed, self.irradiance, self.load_multiplier.ravel()]
        )


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple
    horizon: int = HORIZON
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.scenarios:
            raise InvalidParameterError("scenario set is empty")
        if any(s.wind_speed.shape[0] != self.horizon for s in self.scenarios):
            raise InvalidParameterError("scenario horizon mismatch")
        total = sum(s.probability for s in self.scenarios)
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameterError(f"scenario probabilities sum to {total!r}, not 1")

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    @property
    def probabilities(self):
        return np.array([s.probability for s in self.scenarios])

    @property
    def wind_speed(self):
        return np.stack([s.wind_speed for s in self.scenarios])

    @property
    def irradiance(self):
        return np.stack([s.irradiance for s in self.scenarios])

    @property
    def load_multiplier(self):
        return np.stack([s.load_multiplier for s in self.scenarios])

    def feature_matrix(self):
        return np.stack([s.features() for s in self.scenarios])


def _draw_scenario(models: HourlyModels, seed, index, probability):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    h = models.horizon

    u = rng.random(h)
    wind = np.array(
        [
            weibull_inverse_cdf(u[t], WeibullDist(models.wind_shape[t], models.wind_scale[t]))
            for t in range(h)
        ]
    )

    irr = np.zeros(h)
    for t in range(h):
        m = float(models.irr_mean[t])
        if m > 0:
            d = beta_params_from_moments(m, float(models.irr_std[t]), models.beta_variant)
            irr[t] = rng.beta(d.alpha, d.beta) * models.g_max

    width = models.n_bus if models.per_bus_load else 1
    loads = np.empty((h, width))
    for t in range(h):
        d = NormalDist(float(models.load_mean[t]), float(models.load_std[t]))
        loads[t] = np.maximum(rng.normal(d.mean, d.std, width), 0.0)
    if not models.per_bus_load:
        loads = loads[:, 0]
    return Scenario(probability, wind, irr, loads, index=index)


def generate_scenarios(models: HourlyModels, horizon, n, seed, workers=1):
    """Draw ``n`` equiprobable scenarios.

    Scenario ``i`` uses its own sub-stream derived from ``(seed, i)``, so the
    result does not depend on ``workers``.
    """
    if n < 1:
        raise InvalidParameterError("scenario count must be >= 1")
    if horizon != models.horizon:
        raise InvalidParameterError(
            f"horizon {horizon} does not match profile length {models.horizon}"
        )
    p = 1.0 / n
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            scen = list(pool.map(lambda i: _draw_scenario(models, seed, i, p), range(n)))
    else:
        scen = [_draw_scenario(models, seed, i, p) for i in range(n)]
    return ScenarioSet(tuple(scen), horizon, seed)


def scenario_distances(sset: ScenarioSet):
    """Pairwise L2 distances after scaling each feature by its std."""
    x = sset.feature_matrix()
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return cdist(x / sd, x / sd)


def _backward_reduce(dist, prob, target):
    n = len(prob)
    prob = prob.astype(float).copy()
    d = dist.astype(float).copy()
    np.fill_diagonal(d, np.inf)
    alive = np.ones(n, dtype=bool)
    nn = np.argmin(d, axis=1)
    for _ in range(n - target):
        score = np.full(n, np.inf)
        score[alive] = prob[alive] * d[alive, nn[alive]]
        k = int(np.argmin(score))  # first minimum wins ties
        j = int(nn[k])
        prob[j] += prob[k]
        prob[k] = 0.0
        alive[k] = False
        d[:, k] = np.inf
        d[k, :] = np.inf
        stale = np.flatnonzero(alive & (nn == k))
        if stale.size:
            nn[stale] = np.argmin(d[stale], axis=1)
    return np.flatnonzero(alive), prob


def reduce_scenarios(sset: ScenarioSet, target):
    """Backward reduction to ``target`` scenarios.

    Repeatedly drops the scenario with the smallest probability-weighted
    distance to its nearest retained neighbour and hands its probability to
    that neighbour.
    """
    n = len(sset)
    if not 1 <= target <= n:
        raise InvalidParameterError(f"target must be in [1, {n}], got {target}")
    if target == n:
        return sset
    keep, prob = _backward_reduce(scenario_distances(sset), sset.probabilities, target)
    kept_p = prob[keep] / prob[keep].sum()
    scen = [
        Scenario(float(p), s.wind_speed, s.irradiance, s.load_multiplier, s.index)
        for p, s in zip(kept_p, (sset.scenarios[i] for i in keep))
    ]
    return ScenarioSet(tuple(scen), sset.horizon, sset.master_seed)


def transport_cost(dist, prob, kept):
    """Kantorovich cost of collapsing every dropped scenario onto its nearest kept one."""
    kept = np.asarray(kept)
    dropped = np.setdiff1d(np.arange(len(prob)), kept)
    if dropped.size == 0:
        return 0.0
    return float(np.sum(prob[dropped] * dist[np.ix_(dropped, kept)].min(axis=1)))


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    densities: np.ndarray
    cdf: np.ndarray = field(repr=False)

    @property
    def widths(self):
        return np.diff(self.bin_edges)

    def mean(self):
        mids = 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])
        return float(np.sum(mids * self.densities * self.widths))


def empirical_distribution(samples, bins=20):
    """Probability-weighted histogram of ``(value, probability)`` pairs.

    Weights are normalised to sum to one.  A zero-width sample range is
    widened to a unit interval centred on the value.
    """
    samples = list(samples)
    if not samples:
        raise InvalidInputError("no samples")
    if bins < 1:
        raise InvalidParameterError("bins must be >= 1")
    values = np.array([float(v) for v, _ in samples])
    weights = np.array([float(w) for _, w in samples])
    if np.any(weights < 0) or weights.sum() <= 0:
        raise InvalidInputError("sample weights must be non-negative with a positive sum")
    weights = weights / weights.sum()
    lo, hi = values.min(), values.max()
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    mass, _ = np.histogram(values, bins=edges, weights=weights)
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    cdf[-1] = 1.0
    return Histogram(edges, mass / np.diff(edges), cdf)


CSV_COLUMNS = ("scenario_id", "probability", "hour", "wind_speed", "irradiance", "load_multiplier")


def write_scenarios_csv(sset: ScenarioSet, path):
    """One row per scenario-hour.  Per-bus multipliers add ``load_multiplier_<k>`` columns."""
    per_bus = sset.scenarios[0].load_multiplier.ndim == 2
    width = sset.scenarios[0].load_multiplier.shape[1] if per_bus else 0
    header = list(CSV_COLUMNS[:-1]) + (
        [f"load_multiplier_{k}" for k in range(width)] if per_bus else ["load_multiplier"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s in sset:
            for t in range(sset.horizon):
                lm = s.load_multiplier[t]
                lm_cells = [repr(float(v)) for v in lm] if per_bus else [repr(float(lm))]
                w.writerow(
                    [s.index, repr(s.probability), t, repr(float(s.wind_speed[t])),
                     repr(float(s.irradiance[t]))] + lm_cells
                )


def read_scenarios_csv(path, master_seed=0):
    rows = {}
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        lm_cols = [c for c in reader.fieldnames or () if c.startswith("load_multiplier")]
        missing = set(CSV_COLUMNS[:-1]) - set(reader.fieldnames or ())
        if missing or not lm_cols:
            raise InvalidInputError(f"scenario CSV missing columns {sorted(missing)}")
        per_bus = lm_cols != ["load_multiplier"]
        for line_no, row in enumerate(reader, start=2):
            try:
                sid, hour = int(row["scenario_id"]), int(row["hour"])
                rec = rows.setdefault(sid, {"p": float(row["probability"]), "h": {}})
                lm = [float(row[c]) for c in lm_cols]
                rec["h"][hour] = (float(row["wind_speed"]), float(row["irradiance"]),
                                  lm if per_bus else lm[0])
            except (TypeError, ValueError) as exc:
                raise InvalidInputError(f"{path} line {line_no}: {exc}") from None
    scen = []
    horizon = None
    for sid in sorted(rows):
        hours = rows[sid]["h"]
        if sorted(hours) != list(range(len(hours))):
            raise InvalidInputError(f"scenario {sid} has non-contiguous hours")
        horizon = horizon or len(hours)
        cols = list(zip(*(hours[t] for t in range(len(hours)))))
        scen.append(Scenario(rows[sid]["p"], np.array(cols[0]), np.array(cols[1]),
                             np.array(cols[2]), index=sid))
    if not scen:
        raise InvalidInputError("scenario CSV has no rows")
    return ScenarioSet(tuple(scen), horizon, master_seed)

"""Cuckoo optimization algorithm for bound-constrained continuous minimisation.

Each iteration: every cuckoo lays a few eggs inside its egg-laying radius,
the worst eggs die, parents and eggs compete for ``max_population`` slots,
the survivors are clustered with k-means and all of them fly part of the way
towards the best member of the best cluster, with a small angular deviation.
The incumbent best never moves and is never culled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

MAX_DEVIATION = math.pi / 6


@dataclass(frozen=True)
class CoaConfig:
    n_initial: int = 20
    max_population: int = 50
    eggs_min: int = 2
    eggs_max: int = 4
    n_clusters: int = 3
    motion_coefficient: float = 2.0
    max_iterations: int = 300
    seed: int = 0
    elr_alpha: float = 5.0
    egg_demise: float = 0.1
    kmeans_iterations: int = 20
    stall_iterations: int = 50
    stall_tolerance: float = 1e-9

    def __post_init__(self):
        if not 1 <= self.eggs_min <= self.eggs_max:
            raise InvalidParameterError("need 1 <= eggs_min <= eggs_max")
        if self.n_initial < 1 or self.n_clusters < 1 or self.max_population < 1:
            raise InvalidParameterError("population sizes and cluster count must be >= 1")
        if self.max_iterations < 0 or not 0 <= self.egg_demise < 1:
            raise InvalidParameterError("bad iteration count or egg demise fraction")


@dataclass
class Habitat:
    position: np.ndarray
    fitness: float = math.inf


@dataclass
class CoaResult:
    best_position: np.ndarray
    best_fitness: float
    trace: list = field(default_factory=list)  # (iteration, best_fitness, population_size)
    iterations: int = 0
    stopped_early: bool = False
    evaluations: int = 0


def _check_bounds(bounds):
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
        raise InvalidParameterError("bounds must be two equal-length 1-D arrays")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
        raise InvalidParameterError("every dimension needs finite lo < hi")
    return lo, hi


def init_population(bounds, cfg: CoaConfig, rng: np.random.Generator):
    lo, hi = _check_bounds(bounds)
    return lo + rng.random((cfg.n_initial, lo.size)) * (hi - lo)


def egg_laying_radius(eggs, total_eggs, bounds, alpha=5.0):
    lo, hi = bounds
    return alpha * (eggs / total_eggs) * (np.asarray(hi) - np.asarray(lo))


def lay_eggs(cuckoo, egg_count, elr, rng: np.random.Generator, bounds):
    """``egg_count`` positions uniform within ``±elr`` of the cuckoo, clipped to bounds."""
    pos = cuckoo.position if isinstance(cuckoo, Habitat) else np.asarray(cuckoo, dtype=float)
    lo, hi = bounds
    offsets = rng.uniform(-1.0, 1.0, (egg_count, pos.size)) * np.asarray(elr)
    return np.clip(pos + offsets, lo, hi)


def migration_step(x, goal, coefficient, u, angle=0.0, plane=None):
    """Move ``x`` by coefficient·u·(goal − x), rotated by ``angle`` in coordinate ``plane``."""
    d = np.asarray(goal, dtype=float) - np.asarray(x, dtype=float)
    if plane is not None and angle:
        i, j = plane
        c, s = math.cos(angle), math.sin(angle)
        di, dj = d[i], d[j]
        d = d.copy()
        d[i], d[j] = c * di - s * dj, s * di + c * dj
    return x + coefficient * u * d


def migrate(positions, goal, cfg: CoaConfig, rng: np.random.Generator, bounds,
            max_angle=MAX_DEVIATION, frozen=()):
    """Fly every habitat part of the way towards ``goal``; rows in ``frozen`` stay put."""
    positions = np.asarray(positions, dtype=float)
    goal = goal.position if isinstance(goal, Habitat) else np.asarray(goal, dtype=float)
    n, dim = positions.shape
    u = rng.random(n)
    angles = rng.uniform(-max_angle, max_angle, n)
    planes = rng.integers(0, dim, (n, 2)) if dim > 1 else None
    out = positions.copy()
    for k in range(n):
        if k in frozen:
            continue
        plane = None
        if planes is not None:
            i, j = planes[k]
            if i == j:
                j = (i + 1) % dim
            plane = (i, j)
        out[k] = migration_step(positions[k], goal, cfg.motion_coefficient, u[k],
                                angles[k] if plane else 0.0, plane)
    lo, hi = bounds
    return np.clip(out, lo, hi)


def kmeans(points, k, rng: np.random.Generator, iterations=20):
    """Lloyd's algorithm from ``k`` distinct random starting points; returns labels."""
    n = len(points)
    k = min(k, n)
    centres = points[rng.choice(n, size=k, replace=False)].copy()
    labels = np.zeros(n, dtype=int)
    for _ in range(iterations):
        d = ((points[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d, axis=1)
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centres[c] = members.mean(axis=0)
    return labels


def select_goal(positions, fitness, cfg: CoaConfig, rng: np.random.Generator):
    """Best member of the cluster with the lowest mean fitness."""
    labels = kmeans(positions, cfg.n_clusters, rng, cfg.kmeans_iterations)
    finite = np.where(np.isfinite(fitness), fitness, np.nan)
    best_cluster, best_mean = None, math.inf
    for c in np.unique(labels):
        vals = finite[labels == c]
        mean = np.nanmean(vals) if np.any(~np.isnan(vals)) else math.inf
        if mean < best_mean:
            best_cluster, best_mean = c, mean
    if best_cluster is None:
        return int(np.argmin(fitness))
    idx = np.flatnonzero(labels == best_cluster)
    return int(idx[np.argmin(fitness[idx])])


class _Evaluator:
    def __init__(self, objective, vectorized, workers):
        self.objective = objective
        self.vectorized = vectorized
        self.workers = workers
        self.count = 0

    def __call__(self, X):
        if len(X) == 0:
            return np.empty(0)
        self.count += len(X)
        if self.vectorized:
            f = np.asarray(self.objective(X), dtype=float).reshape(len(X))
        elif self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                f = np.array(list(pool.map(lambda row: float(self.objective(row)), X)))
        else:
            f = np.array([float(self.objective(row)) for row in X])
        return np.where(np.isfinite(f), f, math.inf)


def optimize(objective, bounds, cfg: CoaConfig = CoaConfig(), vectorized=False,
             initial_positions=None, workers=1, callback=None):
    """Minimise ``objective`` over the box ``bounds = (lo, hi)``.

    ``vectorized=True`` means ``objective`` maps an (m, dim) array to m values.
    ``initial_positions`` are extra habitats added to the random start.
    Non-finite objective values count as +inf.
    """
    lo, hi = _check_bounds(bounds)
    bounds = (lo, hi)
    rng = np.random.default_rng(cfg.seed)
    evaluate = _Evaluator(objective, vectorized, workers)

    pos = init_population(bounds, cfg, rng)
    if initial_positions is not None:
        extra = np.clip(np.atleast_2d(np.asarray(initial_positions, dtype=float)), lo, hi)
        pos = np.vstack([extra, pos])
    fit = evaluate(pos)
    order = np.argsort(fit, kind="stable")
    pos, fit = pos[order], fit[order]

    best_x, best_f = pos[0].copy(), float(fit[0])
    result = CoaResult(best_x, best_f)
    stall = 0
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        n = len(pos)
        eggs = rng.integers(cfg.eggs_min, cfg.eggs_max + 1, n)
        total = eggs.sum()
        egg_pos = np.vstack([
            lay_eggs(pos[k], eggs[k], egg_laying_radius(eggs[k], total, bounds, cfg.elr_alpha),
                     rng, bounds)
            for k in range(n)
        ])
        egg_fit = evaluate(egg_pos)
        n_die = int(cfg.egg_demise * len(egg_pos))
        if n_die:
            keep = np.argsort(egg_fit, kind="stable")[: len(egg_pos) - n_die]
            keep.sort()
            egg_pos, egg_fit = egg_pos[keep], egg_fit[keep]

        pos = np.vstack([pos, egg_pos])
        fit = np.concatenate([fit, egg_fit])
        order = np.argsort(fit, kind="stable")[: cfg.max_population]
        pos, fit = pos[order], fit[order]

        goal = select_goal(pos, fit, cfg, rng)
        moved = migrate(pos, pos[goal], cfg, rng, bounds, frozen={0, goal})
        changed = np.flatnonzero(np.any(moved != pos, axis=1))
        if changed.size:
            fit = fit.copy()
            fit[changed] = evaluate(moved[changed])
            pos = moved
        order = np.argsort(fit, kind="stable")
        pos, fit = pos[order], fit[order]

        prev = best_f
        if fit[0] < best_f:
            best_x, best_f = pos[0].copy(), float(fit[0])
        result.trace.append((it, best_f, len(pos)))
        if callback is not None:
            callback(it, best_f, len(pos))

        if math.isfinite(prev) and prev - best_f <= cfg.stall_tolerance * abs(prev):
            stall += 1
        else:
            stall = 0
        if cfg.stall_iterations and stall >= cfg.stall_iterations:
            result.stopped_early = True
            break

    result.best_position, result.best_fitness = best_x, best_f
    result.iterations = it
    result.evaluations = evaluate.count
    return result

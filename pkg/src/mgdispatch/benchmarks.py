"""Standard test functions and a seed sweep for the cuckoo optimiser."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .coa import CoaConfig, optimize


def sphere(x):
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def rastrigin(x):
    x = np.asarray(x, dtype=float)
    return 10.0 * x.shape[-1] + np.sum(x * x - 10.0 * np.cos(2 * np.pi * x), axis=-1)


# name -> (function, half-width of the search box, success threshold)
SUITE = {
    "sphere": (sphere, 5.0, 1e-6),
    "rastrigin": (rastrigin, 5.12, 1e-2),
}


@dataclass(frozen=True)
class BenchmarkRun:
    function: str
    seed: int
    best: float
    iterations: int
    solved: bool
    monotone: bool


def run_suite(seeds=range(10), dim=2, max_iterations=200, cfg: CoaConfig = CoaConfig()):
    out = []
    for name, (f, half, tol) in SUITE.items():
        bounds = (np.full(dim, -half), np.full(dim, half))
        for seed in seeds:
            r = optimize(f, bounds, replace(cfg, seed=seed, max_iterations=max_iterations),
                         vectorized=True)
            best = [b for _, b, _ in r.trace]
            out.append(BenchmarkRun(name, seed, r.best_fitness, r.iterations, r.best_fitness < tol,
                                    all(b <= a for a, b in zip(best, best[1:]))))
    return out

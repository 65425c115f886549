import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgdispatch.benchmarks import rastrigin, run_suite, sphere
from mgdispatch.coa import (
    CoaConfig,
    Habitat,
    egg_laying_radius,
    init_population,
    kmeans,
    lay_eggs,
    migrate,
    migration_step,
    optimize,
    select_goal,
)
from mgdispatch.errors import InvalidParameterError

UNIT = (np.array([0.0]), np.array([1.0]))


def test_config_validation():
    for kw in ({"eggs_min": 0}, {"eggs_min": 5, "eggs_max": 4}, {"n_initial": 0},
               {"n_clusters": 0}, {"egg_demise": 1.0}):
        with pytest.raises(InvalidParameterError):
            CoaConfig(**kw)


def test_init_population():
    pos = init_population(UNIT, CoaConfig(n_initial=5), np.random.default_rng(0))
    assert pos.shape == (5, 1) and np.all((pos >= 0) & (pos <= 1))
    again = init_population(UNIT, CoaConfig(n_initial=5), np.random.default_rng(0))
    assert np.array_equal(pos, again)
    big = init_population((-np.ones(2), np.ones(2)), CoaConfig(n_initial=1000),
                          np.random.default_rng(1))
    assert np.all(np.abs(big.mean(axis=0)) < 0.06)
    for bad in ((np.array([1.0]), np.array([1.0])), (np.array([0.0]), np.array([np.inf])),
                (np.zeros(2), np.ones(3))):
        with pytest.raises(InvalidParameterError):
            init_population(bad, CoaConfig(), np.random.default_rng(0))


def test_lay_eggs():
    rng = np.random.default_rng(0)
    eggs = lay_eggs(Habitat(np.array([0.3])), 5, 0.0, rng, UNIT)
    assert np.all(eggs == 0.3)
    eggs = lay_eggs(np.array([1.0]), 100, 0.5, rng, UNIT)
    assert np.all((eggs >= 0) & (eggs <= 1))
    eggs = lay_eggs(np.array([0.5]), 10_000, 0.1, rng, UNIT)
    assert np.max(np.abs(eggs - 0.5)) <= 0.1


def test_egg_laying_radius():
    r = egg_laying_radius(3, 60, (np.zeros(2), np.array([10.0, 20.0])), alpha=5.0)
    np.testing.assert_allclose(r, [2.5, 5.0])


def test_migration_examples():
    assert migration_step(np.array([0.0]), np.array([1.0]), 1.0, 0.5)[0] == 0.5
    cfg0 = CoaConfig(motion_coefficient=0.0)
    pos = np.random.default_rng(0).random((6, 3))
    bounds = (np.zeros(3), np.ones(3))
    assert np.array_equal(migrate(pos, pos[2], cfg0, np.random.default_rng(1), bounds), pos)
    at_goal = np.tile(pos[0], (4, 1))
    out = migrate(at_goal, pos[0], CoaConfig(), np.random.default_rng(1), bounds)
    assert np.array_equal(out, at_goal)


def test_migration_rotation_preserves_length():
    x, goal = np.zeros(3), np.array([1.0, 2.0, 0.5])
    moved = migration_step(x, goal, 1.0, 1.0, math.pi / 6, (0, 1))
    assert np.linalg.norm(moved) == pytest.approx(np.linalg.norm(goal), rel=1e-12)
    cos = moved @ goal / (np.linalg.norm(moved) * np.linalg.norm(goal))
    assert cos < 1 and cos >= math.cos(math.pi / 6) - 1e-12


def test_migrate_respects_frozen_rows_and_bounds():
    rng = np.random.default_rng(3)
    pos = rng.random((8, 4))
    bounds = (np.zeros(4), np.ones(4))
    out = migrate(pos, np.ones(4), CoaConfig(), rng, bounds, frozen={0, 5})
    assert np.array_equal(out[[0, 5]], pos[[0, 5]])
    assert np.all((out >= 0) & (out <= 1))


def test_kmeans_and_goal():
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(0, 0.1, (10, 2)), rng.normal(5, 0.1, (10, 2))])
    labels = kmeans(pts, 2, rng)
    assert len(set(labels[:10])) == 1 and len(set(labels[10:])) == 1
    assert labels[0] != labels[10]
    fit = np.r_[np.full(10, 5.0), np.full(10, 1.0)]
    fit[13] = 0.5
    assert select_goal(pts, fit, CoaConfig(n_clusters=2), rng) == 13


def test_one_dimensional_quadratic():
    r = optimize(lambda x: (x[0] - 3) ** 2, (np.array([-10.0]), np.array([10.0])),
                 CoaConfig(seed=1))
    assert abs(r.best_position[0] - 3) <= 1e-4


def test_determinism_and_vectorised_equivalence():
    bounds = (np.full(3, -5.0), np.full(3, 5.0))
    cfg = CoaConfig(seed=4, max_iterations=40)
    a = optimize(rastrigin, bounds, cfg)
    b = optimize(rastrigin, bounds, cfg)
    c = optimize(rastrigin, bounds, cfg, vectorized=True)
    d = optimize(rastrigin, bounds, cfg, workers=3)
    assert a.trace == b.trace == c.trace == d.trace
    assert np.array_equal(a.best_position, c.best_position)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 4))
def test_trace_monotone_and_positions_in_bounds(seed, dim):
    bounds = (np.full(dim, -2.0), np.full(dim, 3.0))
    seen = []

    def f(X):
        X = np.atleast_2d(X)
        seen.append(X.copy())
        return rastrigin(X)

    r = optimize(f, bounds, CoaConfig(seed=seed, max_iterations=25), vectorized=True)
    best = [b for _, b, _ in r.trace]
    assert all(b <= a for a, b in zip(best, best[1:]))
    allx = np.vstack(seen)
    assert np.all(allx >= -2.0) and np.all(allx <= 3.0)
    assert r.best_fitness == best[-1]
    assert all(p <= 50 for _, _, p in r.trace)


def test_non_finite_objective_values_are_worst():
    def f(x):
        return math.nan if x[0] > 0 else (x[0] + 1) ** 2

    r = optimize(f, (np.array([-3.0]), np.array([3.0])), CoaConfig(seed=0, max_iterations=60))
    assert r.best_position[0] <= 0
    assert math.isfinite(r.best_fitness)


def test_initial_positions_are_never_lost():
    x0 = np.array([0.01, -0.01])
    f0 = float(sphere(x0))
    r = optimize(sphere, (np.full(2, -5.0), np.full(2, 5.0)),
                 CoaConfig(seed=0, max_iterations=3, n_initial=3), initial_positions=x0)
    assert r.best_fitness <= f0


def test_degenerate_local_search():
    # one habitat that never migrates: only its own eggs can improve it
    cfg = CoaConfig(seed=2, n_initial=1, max_population=1, motion_coefficient=0.0,
                    max_iterations=300, elr_alpha=0.1, stall_iterations=300)
    r = optimize(sphere, (np.full(2, -5.0), np.full(2, 5.0)), cfg)
    assert all(p == 1 for _, _, p in r.trace)
    assert r.best_fitness < 1e-2 < r.trace[0][1]


def test_stall_rule_stops_early():
    r = optimize(lambda x: 1.0, (np.zeros(2), np.ones(2)),
                 CoaConfig(seed=0, max_iterations=300, stall_iterations=50))
    assert r.stopped_early and r.iterations == 50


def test_benchmark_suite_small():
    runs = run_suite(seeds=range(3), max_iterations=200)
    assert len(runs) == 6
    assert all(r.monotone for r in runs)
    assert all(r.solved for r in runs if r.function == "sphere")

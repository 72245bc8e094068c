import math
from multiprocessing import get_context

import numpy as np
import pytest

from vsr_snca.errors import ConfigError
from vsr_snca.evolution import (EsParams, EvaluatedIndividual, init_population, next_generation,
                                run_es)


def sphere(g):
    return -float(np.sum(g * g))


def test_init_population_shape_and_range():
    pop = init_population(36, 500, np.random.default_rng(0))
    assert len(pop) == 36 and all(p.shape == (500,) for p in pop)
    assert all(p.min() >= -1 and p.max() <= 1 for p in pop)


def test_init_population_mean():
    pop = init_population(10000, 1, np.random.default_rng(1))
    assert abs(np.mean(pop)) < 0.05


def test_init_population_seeded():
    a = init_population(4, 7, np.random.default_rng(3))
    b = init_population(4, 7, np.random.default_rng(3))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def individuals(fitnesses, dim=3, rng=None):
    rng = rng or np.random.default_rng(0)
    return [EvaluatedIndividual(rng.normal(size=dim), float(f), i) for i, f in enumerate(fitnesses)]


def test_selection_by_rank():
    params = EsParams(n_pop=36, sigma=1e-12)
    evaluated = individuals([-i for i in range(36)])
    nxt = next_generation(evaluated, params, np.random.default_rng(0))
    assert np.array_equal(nxt[0], evaluated[0].genotype)  # elite
    mu = np.mean([e.genotype for e in evaluated[:9]], axis=0)
    assert all(np.allclose(c, mu, atol=1e-9) for c in nxt[1:])
    assert len(nxt) == 36


def test_ties_go_to_earlier_evaluation():
    params = EsParams(n_pop=4, sigma=1e-12)
    evaluated = individuals([1.0, 5.0, 5.0, 0.0])
    nxt = next_generation(evaluated, params, np.random.default_rng(0))
    assert np.array_equal(nxt[0], evaluated[1].genotype)
    assert np.allclose(nxt[1], evaluated[1].genotype)


def test_identical_parents_child_distribution():
    g = np.linspace(-1, 1, 2000)
    params = EsParams(n_pop=8, sigma=0.35)
    evaluated = [EvaluatedIndividual(g.copy(), 0.0, i) for i in range(8)]
    kids = np.array(next_generation(evaluated, params, np.random.default_rng(9))[1:])
    eps = kids - g
    assert abs(eps.mean()) < 0.01
    assert eps.std() == pytest.approx(0.35, rel=0.02)


def test_single_parent_mean_expectation():
    params = EsParams(n_pop=4, sigma=0.35)
    parent = np.array([0.3, -0.7, 0.1])
    evaluated = [EvaluatedIndividual(parent, 10.0, 0)] + \
        [EvaluatedIndividual(np.zeros(3), -1.0, i) for i in (1, 2, 3)]
    rng = np.random.default_rng(5)
    kids = np.array([next_generation(evaluated, params, rng)[1:] for _ in range(4000)])
    assert kids.reshape(-1, 3).mean(axis=0) == pytest.approx(parent, abs=0.02)


def test_budget_equals_population():
    calls = []

    def f(g):
        calls.append(1)
        return sphere(g)

    best, hist = run_es(f, EsParams(n_pop=36, n_evals=36, seed=0), 10)
    assert len(calls) == 36 and len(hist) == 1


def test_budget_arithmetic():
    calls = []

    def f(g):
        calls.append(1)
        return sphere(g)

    params = EsParams(n_pop=36, n_evals=720, seed=2)
    _, hist = run_es(f, params, 5)
    assert len(calls) == 720
    assert hist.evaluations[-1] == 720
    assert len(hist) == math.ceil((720 - 36) / 35) + 1 == 21


def test_constant_fitness():
    best, hist = run_es(lambda g: 1.0, EsParams(n_pop=8, n_evals=80, seed=1), 4)
    assert best.fitness == 1.0 and best.eval_index == 0
    assert set(hist.best) == {1.0} and set(hist.median) == {1.0}


def test_elitism_monotone():
    _, hist = run_es(sphere, EsParams(n_pop=12, n_evals=1200, seed=4), 20)
    assert all(b >= a for a, b in zip(hist.best, hist.best[1:]))


def test_seed_determinism():
    a, ha = run_es(sphere, EsParams(n_pop=8, n_evals=200, seed=11), 6)
    b, hb = run_es(sphere, EsParams(n_pop=8, n_evals=200, seed=11), 6)
    c, _ = run_es(sphere, EsParams(n_pop=8, n_evals=200, seed=12), 6)
    assert np.array_equal(a.genotype, b.genotype) and ha.best == hb.best
    assert not np.array_equal(a.genotype, c.genotype)


def test_parallel_map_matches_serial():
    params = EsParams(n_pop=8, n_evals=120, seed=3)
    serial, hs = run_es(sphere, params, 6)
    with get_context("fork").Pool(2) as pool:
        parallel, hp = run_es(sphere, params, 6, map_fn=pool.map)
    assert np.array_equal(serial.genotype, parallel.genotype) and hs.best == hp.best


def test_non_finite_fitness_flagged():
    def f(g):
        return float("nan") if g[0] > 0 else sphere(g)

    best, hist = run_es(f, EsParams(n_pop=8, n_evals=64, seed=0), 3)
    assert math.isfinite(best.fitness)
    assert sum(r.n_flagged for r in hist.records) > 0


@pytest.mark.parametrize("kw,key", [({"n_pop": 6}, "es.n_pop"), ({"sigma": 0}, "es.sigma"),
                                     ({"n_evals": 10}, "es.n_evals"), ({"seed": -1}, "es.seed")])
def test_params_validation(kw, key):
    with pytest.raises(ConfigError) as info:
        EsParams(**kw)
    assert info.value.key == key


def test_sphere_example():
    _, hist = run_es(sphere, EsParams(n_evals=30000, seed=0), 100)
    assert hist.best[-1] > -0.01

"""Mean-plus-Gaussian evolutionary strategy with elitism and a fixed
evaluation budget.

Randomness is drawn only in the calling process: the initial population
comes from the stream ``(seed,)`` and generation ``g``'s offspring from
``(seed, g)``. Fitness evaluations are pure, so any ordered ``map_fn``
(serial or a process pool) yields the same run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class EsParams:
    n_pop: int = 36
    n_evals: int = 30000
    sigma: float = 0.35
    seed: int = 0

    def __post_init__(self):
        if self.n_pop < 4 or self.n_pop % 4:
            raise ConfigError("es.n_pop", f"must be >= 4 and divisible by 4, got {self.n_pop}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError("es.sigma", f"must be positive, got {self.sigma}")
        if self.n_evals < self.n_pop:
            raise ConfigError("es.n_evals", f"must be >= n_pop ({self.n_pop}), got {self.n_evals}")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError("es.seed", f"must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class EvaluatedIndividual:
    genotype: np.ndarray
    fitness: float
    eval_index: int
    flagged: bool = False


@dataclass
class GenerationRecord:
    generation: int
    evaluations: int  # cumulative
    best: float  # best so far, elite included
    median: float  # median of this generation's population
    n_flagged: int


@dataclass
class EsHistory:
    records: list[GenerationRecord] = field(default_factory=list)

    @property
    def best(self) -> list[float]:
        return [r.best for r in self.records]

    @property
    def median(self) -> list[float]:
        return [r.median for r in self.records]

    @property
    def evaluations(self) -> list[int]:
        return [r.evaluations for r in self.records]

    def __len__(self) -> int:
        return len(self.records)


def init_population(n_pop: int, genotype_len: int, rng: np.random.Generator) -> list[np.ndarray]:
    if genotype_len <= 0:
        raise ValueError("genotype_len must be positive")
    block = rng.uniform(-1.0, 1.0, size=(n_pop, genotype_len))
    return [block[i].copy() for i in range(n_pop)]


def rank(evaluated: Iterable[EvaluatedIndividual]) -> list[EvaluatedIndividual]:
    """Best first; ties go to the earlier evaluation."""
    return sorted(evaluated, key=lambda e: (-e.fitness, e.eval_index))


def next_generation(evaluated: list[EvaluatedIndividual], params: EsParams,
                    rng: np.random.Generator) -> list[np.ndarray]:
    """Elite followed by ``n_pop - 1`` children of the fittest-quarter mean."""
    ranked = rank(evaluated)
    n_parents = max(1, params.n_pop // 4)
    parents = np.stack([e.genotype for e in ranked[:n_parents]])
    mu = parents.mean(axis=0)
    noise = rng.normal(0.0, params.sigma, size=(params.n_pop - 1, mu.shape[0]))
    return [ranked[0].genotype.copy()] + [mu + noise[i] for i in range(params.n_pop - 1)]


def _sanitize(value) -> tuple[float, bool]:
    try:
        f = float(value)
    except (TypeError, ValueError):
        return float("-inf"), True
    if not math.isfinite(f):
        return float("-inf"), True
    return f, False


def run_es(fitness_fn: Callable[[np.ndarray], float], params: EsParams, genotype_len: int,
           map_fn: Callable = map, callback: Callable[[GenerationRecord], None] | None = None):
    """Optimize until ``params.n_evals`` evaluations are spent.

    The elite carries its fitness forward instead of being re-evaluated. If
    the budget runs out mid-generation, only the individuals evaluated so
    far form the last generation. Returns ``(best, history)``.
    """
    init_rng = np.random.default_rng([params.seed])
    population = init_population(params.n_pop, genotype_len, init_rng)
    history = EsHistory()
    used = 0
    best: EvaluatedIndividual | None = None
    elite: EvaluatedIndividual | None = None
    gen = 0
    while True:
        fresh = population if elite is None else population[1:]
        fresh = fresh[:params.n_evals - used]
        scores = list(map_fn(fitness_fn, fresh))
        evaluated = [] if elite is None else [elite]
        n_flagged = 0
        for g, s in zip(fresh, scores):
            f, bad = _sanitize(s)
            n_flagged += bad
            evaluated.append(EvaluatedIndividual(np.asarray(g), f, used, bad))
            used += 1
        ranked = rank(evaluated)
        if best is None or ranked[0].fitness > best.fitness:
            best = ranked[0]
        record = GenerationRecord(gen, used, best.fitness,
                                  float(np.median([e.fitness for e in evaluated])), n_flagged)
        history.records.append(record)
        if callback is not None:
            callback(record)
        if used >= params.n_evals or len(evaluated) < params.n_pop:
            break
        gen += 1
        population = next_generation(evaluated, params, np.random.default_rng([params.seed, gen]))
        elite = ranked[0]
    return best, history

"""Search over activation functions: evolution, random search, exhaustive search.

Every candidate is scored by training a network with it and reading the
validation metrics. Fitness is the softmax of ``L_i`` over the population,
where ``L_i`` is validation accuracy or negative validation loss.

Per-candidate training seeds are hashes of ``(master_seed, generation, slot)``
and per-generation reproduction streams are hashes of
``(master_seed, generation)``, so results do not depend on evaluation order,
parallelism, or on whether a run was resumed.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import SearchConfig
from .data import Dataset
from .errors import ConfigError
from .expr import Binary, canonical_id, crossover, enumerate_s1, mutate, parse, sample_random
from .nn import TrainingMetrics, init_network, train
from .rng import Rng, derive_seed, make_rng

log = logging.getLogger(__name__)

ORIGINS = ("initial", "elite", "random_inject", "offspring", "enumerated")


class EmptyPopulation(ValueError):
    pass


class SpaceTooLarge(ValueError):
    pass


@dataclass
class Candidate:
    tree: Binary
    origin: str
    generation: int = 0
    slot: int = 0
    metrics: TrainingMetrics | None = None
    seed: int | None = None
    train_seconds: float = 0.0
    cache_hit: bool = False
    id: str = field(init=False)

    def __post_init__(self):
        self.id = canonical_id(self.tree)

    @property
    def val_acc(self) -> float:
        return self.metrics.final_val_acc

    @property
    def val_loss(self) -> float:
        return self.metrics.final_val_loss

    def score(self, mode: str) -> float:
        """The evaluation metric ``L_i`` for a fitness mode."""
        if mode == "loss_based":
            return -self.metrics.final_val_loss
        return self.metrics.final_val_acc


@dataclass
class GenerationRecord:
    index: int
    candidates: list[Candidate]
    fitness_vector: np.ndarray
    best_so_far: Candidate


@dataclass
class SearchResult:
    config: SearchConfig
    generations: list[GenerationRecord]
    cache_hits: int = 0
    trainings: int = 0

    @property
    def history(self) -> list[Candidate]:
        return [c for g in self.generations for c in g.candidates]

    @property
    def run_id(self) -> str:
        return self.config.run_id()


# -- fitness and selection ---------------------------------------------------------

def fitness(scores: Sequence[float]) -> np.ndarray:
    """Softmax of the evaluation metrics (shift-invariant)."""
    L = np.asarray(scores, dtype=np.float64)
    if L.size == 0:
        raise EmptyPopulation("fitness of an empty population")
    e = np.exp(L - L.max())
    return e / e.sum()


def select_parents(population: Sequence[Candidate], p: np.ndarray, count: int, rng: Rng) -> list[Candidate]:
    """``count`` independent draws, with replacement, from the categorical distribution ``p``."""
    if len(p) != len(population):
        raise ValueError("fitness vector and population differ in length")
    idx = rng.choice(len(population), size=count, p=p)
    return [population[i] for i in idx]


def rank_key(c: Candidate):
    """Leaderboard order: accuracy desc, then loss asc, then id asc."""
    return (-c.val_acc, c.val_loss, c.id)


def top_k(result: SearchResult | Iterable[Candidate], k: int) -> list[Candidate]:
    """The ``k`` best distinct candidates over a whole history."""
    if k < 1:
        raise ValueError("k must be >= 1")
    history = result.history if isinstance(result, SearchResult) else list(result)
    best: dict[str, Candidate] = {}
    for c in history:
        if c.id not in best:
            best[c.id] = c
    return sorted(best.values(), key=rank_key)[:k]


def best_so_far_loss(result: SearchResult) -> list[float]:
    out, best = [], float("inf")
    for g in result.generations:
        best = min(best, min(c.val_loss for c in g.candidates))
        out.append(best)
    return out


def best_so_far_acc(result: SearchResult) -> list[float]:
    out, best = [], 0.0
    for g in result.generations:
        best = max(best, max(c.val_acc for c in g.candidates))
        out.append(best)
    return out


# -- reproduction -----------------------------------------------------------------

def next_generation(prev: GenerationRecord, cfg: SearchConfig, rng: Rng) -> list[Candidate]:
    """Elites, then fresh random functions, then mutated crossover children."""
    if cfg.elite + cfg.random_inject + cfg.offspring != cfg.population:
        raise ConfigError("elite + random_inject + offspring must equal population")
    g = prev.index + 1
    ranked = sorted(prev.candidates, key=lambda c: (-c.score(cfg.fitness), c.id))
    distinct: list[Candidate] = []
    seen: set[str] = set()
    for c in ranked:
        if c.id not in seen:
            seen.add(c.id)
            distinct.append(c)
    kept = {id(c) for c in distinct}
    pool = distinct + [c for c in ranked if id(c) not in kept]
    elites = [Candidate(c.tree, "elite") for c in pool[:cfg.elite]]

    fresh = [Candidate(sample_random(cfg.space_depth, rng, cfg.extended_alphabet), "random_inject")
             for _ in range(cfg.random_inject)]

    parents = select_parents(prev.candidates, prev.fitness_vector, 2 * cfg.offspring, rng)
    children = []
    for a, b in zip(parents[::2], parents[1::2]):
        child = crossover(a.tree, b.tree, rng)
        children.append(Candidate(mutate(child, rng, cfg.extended_alphabet), "offspring"))

    out = elites + fresh + children
    for s, c in enumerate(out):
        c.generation, c.slot = g, s
    return out


def initial_population(cfg: SearchConfig) -> list[Candidate]:
    rng = make_rng(derive_seed(cfg.master_seed, 0, "init"))
    out = [Candidate(parse(e, cfg.extended_alphabet), "initial") for e in cfg.initial_exprs]
    while len(out) < cfg.population:
        out.append(Candidate(sample_random(cfg.space_depth, rng, cfg.extended_alphabet), "initial"))
    for s, c in enumerate(out):
        c.generation, c.slot = 0, s
    return out


def random_generation(cfg: SearchConfig, g: int) -> list[Candidate]:
    if g == 0:
        return initial_population(cfg)
    rng = make_rng(derive_seed(cfg.master_seed, g, "sample"))
    out = [Candidate(sample_random(cfg.space_depth, rng, cfg.extended_alphabet), "random_inject",
                     generation=g, slot=s) for s in range(cfg.population)]
    return out


def exhaustive_blocks(cfg: SearchConfig) -> list[list[Candidate]]:
    trees = enumerate_s1(cfg.extended_alphabet)
    n = cfg.population
    return [[Candidate(t, "enumerated", generation=i // n, slot=i % n)
             for i, t in enumerate(trees[start:start + n], start)]
            for start in range(0, len(trees), n)]


# -- evaluation -------------------------------------------------------------------

Evaluator = Callable[[Binary, int, SearchConfig, Dataset], TrainingMetrics]


def train_candidate(tree: Binary, seed: int, cfg: SearchConfig, data: Dataset) -> TrainingMetrics:
    """Train a fresh network with activation ``tree``; the default evaluator."""
    net = init_network(cfg.network_config(data), make_rng(derive_seed(seed, "init")))
    tc = replace(cfg.train, seed=derive_seed(seed, "shuffle"))
    return train(net, tree, data, tc, cfg.policy)


_worker_state: dict = {}


def _worker_init(cfg: SearchConfig, data: Dataset, evaluator: Evaluator) -> None:
    _worker_state.update(cfg=cfg, data=data, evaluator=evaluator)


def _worker_eval(job: tuple[Binary, int]) -> tuple[TrainingMetrics, float]:
    tree, seed = job
    st = _worker_state
    t0 = time.perf_counter()
    m = st["evaluator"](tree, seed, st["cfg"], st["data"])
    return m, time.perf_counter() - t0


class _Engine:
    """Evaluates generations through a cache and forwards records to a sink."""

    def __init__(self, cfg: SearchConfig, data: Dataset, evaluator: Evaluator,
                 jobs: int, sink: Callable[[Candidate], None] | None):
        self.cfg = cfg
        self.data = data
        self.evaluator = evaluator
        self.jobs = max(1, jobs)
        self.sink = sink
        self.cache: dict[str, tuple[TrainingMetrics, int]] = {}
        self.cache_hits = 0
        self.trainings = 0
        self.history: list[Candidate] = []
        self._pool: ProcessPoolExecutor | None = None

    def __enter__(self):
        if self.jobs > 1:
            self._pool = ProcessPoolExecutor(self.jobs, initializer=_worker_init,
                                             initargs=(self.cfg, self.data, self.evaluator))
        else:
            _worker_init(self.cfg, self.data, self.evaluator)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()

    def restore(self, candidates: Iterable[Candidate]) -> None:
        for c in candidates:
            self.cache.setdefault(c.id, (c.metrics, c.seed))
            self.history.append(c)

    def evaluate(self, candidates: list[Candidate]) -> None:
        # one training per new id, in slot order; duplicates and repeats reuse it
        jobs, owners, pending = [], {}, set()
        for c in candidates:
            if c.id not in self.cache and c.id not in pending:
                pending.add(c.id)
                owners[c.slot] = len(jobs)
                jobs.append((c.tree, derive_seed(self.cfg.master_seed, c.generation, c.slot)))
        if self._pool is not None:
            results = self._pool.map(_worker_eval, jobs)
        else:
            results = map(_worker_eval, jobs)
        for c in candidates:
            if c.slot in owners:
                metrics, seconds = next(results)
                c.metrics, c.seed, c.train_seconds = metrics, jobs[owners[c.slot]][1], seconds
                self.cache[c.id] = (metrics, c.seed)
                self.trainings += 1
            else:
                c.metrics, c.seed = self.cache[c.id]
                c.cache_hit = True
                self.cache_hits += 1
                log.debug("cache hit: %s (generation %d, slot %d)", c.id, c.generation, c.slot)
            self.history.append(c)
            if self.sink is not None:
                self.sink(c)

    def record(self, index: int, candidates: list[Candidate]) -> GenerationRecord:
        p = fitness([c.score(self.cfg.fitness) for c in candidates])
        best = top_k(self.history, 1)[0]
        return GenerationRecord(index, candidates, p, best)


def _plan(cfg: SearchConfig) -> int:
    if cfg.strategy == "exhaustive":
        if cfg.space_depth != 1:
            raise SpaceTooLarge(
                f"S_{cfg.space_depth} is too large to enumerate; use evolution or random search")
        return len(exhaustive_blocks(cfg))
    return cfg.generations


def run_search(cfg: SearchConfig, *, data: Dataset | None = None,
               evaluator: Evaluator = train_candidate, jobs: int = 1,
               sink: Callable[[Candidate], None] | None = None,
               resume_from: list[GenerationRecord] | None = None,
               on_generation: Callable[[GenerationRecord], None] | None = None) -> SearchResult:
    """Run ``cfg.strategy`` to completion.

    ``resume_from`` holds already-evaluated generations (e.g. read back from a
    results file); the run continues after the last of them and produces the
    same records an uninterrupted run would. ``on_generation`` is called after
    each generation is fully evaluated.
    """
    total = _plan(cfg)
    data = data if data is not None else cfg.data.build()
    done = list(resume_from or [])
    blocks = exhaustive_blocks(cfg) if cfg.strategy == "exhaustive" else None

    with _Engine(cfg, data, evaluator, jobs, sink) as engine:
        for rec in done:
            engine.restore(rec.candidates)
        records = []
        for rec in done:
            records.append(engine.record(rec.index, rec.candidates))
        for g in range(len(done), total):
            if cfg.strategy == "exhaustive":
                population = blocks[g]
            elif cfg.strategy == "random":
                population = random_generation(cfg, g)
            elif g == 0:
                population = initial_population(cfg)
            else:
                rng = make_rng(derive_seed(cfg.master_seed, g, "reproduce"))
                population = next_generation(records[-1], cfg, rng)
            engine.evaluate(population)
            rec = engine.record(g, population)
            records.append(rec)
            log.info("generation %d/%d: best val_acc %.4f (%s)", g + 1, total,
                     rec.best_so_far.val_acc, rec.best_so_far.id)
            if on_generation is not None:
                on_generation(rec)
    return SearchResult(cfg, records, engine.cache_hits, engine.trainings)


def run_evolution(cfg: SearchConfig, **kwargs) -> SearchResult:
    if cfg.strategy != "evolution":
        raise ConfigError("run_evolution needs strategy = evolution")
    return run_search(cfg, **kwargs)


def run_random_search(cfg: SearchConfig, **kwargs) -> SearchResult:
    if cfg.strategy != "random":
        raise ConfigError("run_random_search needs strategy = random")
    return run_search(cfg, **kwargs)


def run_exhaustive(cfg: SearchConfig, **kwargs) -> SearchResult:
    if cfg.strategy != "exhaustive":
        raise ConfigError("run_exhaustive needs strategy = exhaustive")
    return run_search(cfg, **kwargs)


def exhaustive_ranking(result: SearchResult) -> list[Candidate]:
    """Every evaluated candidate, best first by validation accuracy."""
    return sorted(result.history, key=rank_key)

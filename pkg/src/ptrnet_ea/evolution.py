"""Negatively Correlated Search over pointer-network weight vectors.

Each of the ``N`` search processes is an isotropic Gaussian ``N(x_i, sigma_i^2 I)``.
Per iteration every process samples one offspring; offspring are scored on
a batch shared by the whole population and compared with the frozen parent
snapshot, so the outcome does not depend on evaluation order or worker count.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _rng
from .exceptions import ConfigError, InvalidDimensionError
from .ptrnet import NetworkConfig, as_param_vector, decode_coordinates, init_params
from .tsp import Dataset, Instance, tour_lengths
from .validation import check_coordinates

SIGMA_RULES = ("one_fifth_standard", "paper_literal")
SHRINK = 0.99


@dataclass(frozen=True)
class NcsConfig:
    population_size: int = 5
    max_iterations: int = 8000
    epoch_length: int = 10
    sigma_init: float = 0.05
    batch_size: int = 256
    normalize_acceptance: bool = True
    sigma_rule: str = "one_fifth_standard"
    time_budget: Optional[float] = None

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2 (diversity needs another distribution)")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.epoch_length < 1:
            raise ConfigError("epoch_length must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not (math.isfinite(self.sigma_init) and self.sigma_init > 0):
            raise ConfigError("sigma_init must be finite and > 0")
        if self.sigma_rule not in SIGMA_RULES:
            raise ConfigError(f"sigma_rule must be one of {SIGMA_RULES}, got {self.sigma_rule!r}")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ConfigError("time_budget must be > 0 seconds when given")


@dataclass
class SearchState:
    individual: np.ndarray
    sigma: float
    success_count: int = 0
    fitness: float = math.inf


@dataclass
class IterationRow:
    t: int
    lam: float
    fitness: list[float]
    best_fitness: float
    mean_fitness: float
    mean_sigma: float
    accepts: int
    wallclock_ms: Optional[float] = None
    sigmas: Optional[list[float]] = None  # set on epoch boundaries, after the update


@dataclass
class RunRecord:
    initial_fitness: list[float] = field(default_factory=list)
    initial_best_index: int = 0
    rows: list[IterationRow] = field(default_factory=list)
    budget_exhausted: bool = False

    @property
    def best_curve(self) -> list[float]:
        return [row.best_fitness for row in self.rows]


# -- operators ------------------------------------------------------------------


def fitness_on(params: np.ndarray, coords: np.ndarray, config: NetworkConfig) -> float:
    """Mean greedy tour length over a validated ``(m, n, 2)`` batch."""
    tours = decode_coordinates(coords, params, config)
    return float(tour_lengths(coords, tours).mean())


def fitness(params: np.ndarray, batch: Sequence[Instance] | np.ndarray, config: NetworkConfig) -> float:
    """Mean tour length of greedy decodes over ``batch``; lower is better."""
    if isinstance(batch, (list, tuple)) and not batch:
        raise InvalidDimensionError("fitness needs a non-empty batch")
    return fitness_on(params, check_coordinates(batch, name="batch"), config)


def mutate(parent: np.ndarray, sigma: float, seed: int, *key: int) -> np.ndarray:
    """``parent + sigma * eps`` with standard-normal ``eps`` from stream ``(seed, *key)``."""
    if not sigma > 0:
        raise ConfigError("sigma must be > 0")
    rng = _rng.stream(seed, _rng.TAG_MUTATE, *key)
    eps = rng.standard_normal(parent.shape[0])
    return as_param_vector(parent.astype(np.float64) + sigma * eps)


def bhattacharyya(mean_a, sigma_a: float, mean_b, sigma_b: float) -> float:
    """Bhattacharyya distance between ``N(mean_a, sigma_a^2 I)`` and ``N(mean_b, sigma_b^2 I)``."""
    if not (sigma_a > 0 and sigma_b > 0):
        raise ValueError("sigmas must be > 0")
    a = np.asarray(mean_a, dtype=np.float64)
    b = np.asarray(mean_b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidDimensionError(f"mean shapes differ: {a.shape} vs {b.shape}")
    dim = a.size
    var_a, var_b = sigma_a * sigma_a, sigma_b * sigma_b
    avg = 0.5 * (var_a + var_b)
    sq = float(np.dot(a - b, a - b))
    log_term = 0.5 * dim * math.log(avg / (sigma_a * sigma_b))
    return sq / (8.0 * avg) + max(log_term, 0.0)  # AM-GM: the log term is >= 0 up to rounding


def correlation(
    index: int,
    means: Sequence[np.ndarray],
    sigmas: Sequence[float],
    candidate: Optional[tuple[np.ndarray, float]] = None,
) -> float:
    """Minimum Bhattacharyya distance from distribution ``index`` (or ``candidate``) to every other parent."""
    if len(means) < 2:
        raise ConfigError("correlation needs at least two distributions")
    mean_i, sigma_i = candidate if candidate is not None else (means[index], sigmas[index])
    return min(
        bhattacharyya(mean_i, sigma_i, means[j], sigmas[j]) for j in range(len(means)) if j != index
    )


def lambda_std(t: int, max_iterations: int) -> float:
    return 0.1 - 0.1 * t / max_iterations


def lambda_schedule(t: int, max_iterations: int, seed: int) -> float:
    """One draw of ``N(1, 0.1 - 0.1 t / T_max)``, clamped at 0."""
    if not 0 <= t < max_iterations:
        raise ValueError(f"iteration {t} outside [0, {max_iterations})")
    rng = _rng.stream(seed, _rng.TAG_LAMBDA, t)
    return max(0.0, 1.0 + lambda_std(t, max_iterations) * float(rng.standard_normal()))


def accept_literal(f_offspring: float, corr_offspring: float, lam: float, is_iteration_best: bool = False) -> bool:
    """Raw ratio test ``f / corr < lambda``.

    Zero correlation rejects unless the offspring is the iteration's best.
    """
    if corr_offspring == 0:
        return bool(is_iteration_best)
    return f_offspring / corr_offspring < lam


@dataclass(frozen=True)
class IterationContext:
    """Everything the acceptance rule may look at in one iteration (arrays over individuals)."""

    parent_fitness: np.ndarray
    offspring_fitness: np.ndarray
    parent_corr: np.ndarray
    offspring_corr: np.ndarray


def _share(x: float, y: float) -> float:
    total = x + y
    return 0.5 if total == 0 else x / total


def normalized_scores(ctx: IterationContext) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise-normalised fitness and correlation of each offspring against its parent.

    Fitness is shifted by the best value seen this iteration (parents and
    offspring) and expressed as the offspring's share of the pair,
    ``(f' - f*) / ((f' - f*) + (f - f*))``; 0 means the offspring is the
    iteration best. Correlation is likewise the offspring's share
    ``corr' / (corr' + corr)``. Both lie in ``[0, 1]`` and equal 0.5 when
    child and parent are indistinguishable.
    """
    floor = min(ctx.parent_fitness.min(), ctx.offspring_fitness.min())
    f_hat = np.array(
        [_share(fc - floor, fp - floor) for fc, fp in zip(ctx.offspring_fitness, ctx.parent_fitness)]
    )
    c_hat = np.array([_share(cc, cp) for cc, cp in zip(ctx.offspring_corr, ctx.parent_corr)])
    return f_hat, c_hat


def acceptance(lam: float, ctx: IterationContext, normalize: bool = True) -> np.ndarray:
    """Boolean replacement decision per individual.

    Normalised mode accepts when ``f_hat / c_hat < lambda``; literal mode when
    ``f' / corr' < lambda``. A zero denominator accepts only an offspring that
    ties the iteration's best fitness.
    """
    best = min(ctx.parent_fitness.min(), ctx.offspring_fitness.min())
    is_best = ctx.offspring_fitness == best
    if not normalize:
        return np.array(
            [
                accept_literal(f, c, lam, b)
                for f, c, b in zip(ctx.offspring_fitness, ctx.offspring_corr, is_best)
            ]
        )
    f_hat, c_hat = normalized_scores(ctx)
    return np.array([accept_literal(f, c, lam, b) for f, c, b in zip(f_hat, c_hat, is_best)])


def update_sigma(sigma: float, successes: int, epoch_length: int, rule: str = "one_fifth_standard") -> float:
    """Step-size adaptation at the end of an epoch of ``epoch_length`` iterations."""
    if rule not in SIGMA_RULES:
        raise ConfigError(f"unknown sigma rule {rule!r}")
    # compare successes / epoch_length with 1/5 exactly in integers
    scaled, threshold = 5 * successes, epoch_length
    if rule == "paper_literal":
        return sigma / SHRINK if scaled <= threshold else SHRINK * sigma
    if scaled > threshold:
        return sigma / SHRINK
    if scaled < threshold:
        return SHRINK * sigma
    return sigma


# -- parallel evaluation ------------------------------------------------------------

_WORKER: dict = {}


def _worker_init(coords: np.ndarray, config: NetworkConfig) -> None:
    from threadpoolctl import threadpool_limits

    threadpool_limits(1)
    _WORKER["coords"] = coords
    _WORKER["config"] = config


def _evaluate_pair(parent, sigma, seed, t, i, batch_index):
    """Mutate one parent and score both parent and offspring on the shared batch."""
    coords = _WORKER["coords"][batch_index]
    config = _WORKER["config"]
    child = mutate(parent, sigma, seed, t, i)
    return child, fitness_on(child, coords, config), fitness_on(parent, coords, config)


def _evaluate_initial(params, batch_index):
    return fitness_on(params, _WORKER["coords"][batch_index], _WORKER["config"])


class _Evaluator:
    """Runs tasks in-process (``n_jobs == 1``) or on a process pool."""

    def __init__(self, coords, config, n_jobs):
        self.n_jobs = n_jobs
        self.pool = None
        if n_jobs > 1:
            self.pool = ProcessPoolExecutor(n_jobs, initializer=_worker_init, initargs=(coords, config))
        else:
            _worker_init(coords, config)

    def map(self, fn, *iterables):
        if self.pool is None:
            return list(map(fn, *iterables))
        return list(self.pool.map(fn, *iterables))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


# -- trainer --------------------------------------------------------------------------


@dataclass
class TrainerState:
    """Complete resumable state of a run at an iteration boundary."""

    t: int
    population: list[SearchState]
    best_params: np.ndarray
    best_fitness: float
    record: RunRecord


@dataclass
class TrainResult:
    population: list[SearchState]
    best_params: np.ndarray
    record: RunRecord


class NcsTrainer:
    """Iteration-level driver for NCS; :func:`train` wraps it for one-shot use."""

    def __init__(
        self,
        ncs_config: NcsConfig,
        net_config: NetworkConfig,
        train_data,
        seed: int,
        *,
        n_jobs: int = 1,
        record_wallclock: bool = True,
    ):
        self.ncs = ncs_config
        self.net = net_config
        self.coords = check_coordinates(train_data, name="train_data")
        self.seed = int(seed)
        self.n_jobs = max(1, int(n_jobs))
        self.record_wallclock = record_wallclock
        self.state: Optional[TrainerState] = None
        self._evaluator: Optional[_Evaluator] = None

    # batch drawn for iteration t; the initial evaluation uses key -1 -> 0 offset
    def batch_index(self, t: int) -> np.ndarray:
        rng = _rng.stream(self.seed, _rng.TAG_BATCH, t + 1)
        m = self.coords.shape[0]
        size = self.ncs.batch_size
        return np.sort(rng.choice(m, size=size, replace=size > m))

    def _pool(self) -> _Evaluator:
        if self._evaluator is None:
            self._evaluator = _Evaluator(self.coords, self.net, self.n_jobs)
        return self._evaluator

    def close(self):
        if self._evaluator is not None:
            self._evaluator.close()
            self._evaluator = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def initialize(self) -> TrainerState:
        n = self.ncs.population_size
        params = [initial_individual(self.net, self.seed, i) for i in range(n)]
        idx = self.batch_index(-1)
        fits = self._pool().map(_evaluate_initial, params, [idx] * n)
        population = [SearchState(p, self.ncs.sigma_init, 0, f) for p, f in zip(params, fits)]
        best = int(np.argmin(fits))
        record = RunRecord(initial_fitness=list(fits), initial_best_index=best)
        self.state = TrainerState(0, population, params[best], float(fits[best]), record)
        return self.state

    def resume(self, state: TrainerState) -> None:
        if len(state.population) != self.ncs.population_size:
            raise ConfigError("checkpoint population size differs from the configuration")
        self.state = state

    @property
    def done(self) -> bool:
        s = self.state
        return s is not None and (s.t >= self.ncs.max_iterations or s.record.budget_exhausted)

    def step(self) -> IterationRow:
        """Run iteration ``t`` and advance to ``t + 1``."""
        if self.state is None:
            self.initialize()
        s = self.state
        start = time.perf_counter()
        t = s.t
        pop = s.population
        n = len(pop)
        lam = lambda_schedule(t, self.ncs.max_iterations, self.seed)
        idx = self.batch_index(t)
        parents = [st.individual for st in pop]
        sigmas = [st.sigma for st in pop]
        results = self._pool().map(
            _evaluate_pair, parents, sigmas, [self.seed] * n, [t] * n, range(n), [idx] * n
        )
        children = [r[0] for r in results]
        f_child = np.array([r[1] for r in results])
        f_parent = np.array([r[2] for r in results])
        corr_parent = np.array([correlation(i, parents, sigmas) for i in range(n)])
        corr_child = np.array(
            [correlation(i, parents, sigmas, (children[i], sigmas[i])) for i in range(n)]
        )
        ctx = IterationContext(f_parent, f_child, corr_parent, corr_child)
        accepted = acceptance(lam, ctx, self.ncs.normalize_acceptance)

        for i, st in enumerate(pop):
            if accepted[i]:
                st.individual = children[i]
                st.fitness = float(f_child[i])
                st.success_count += 1
            else:
                st.fitness = float(f_parent[i])
        # best-ever over every network scored this iteration
        candidates = list(zip(f_parent, parents)) + list(zip(f_child, children))
        k = int(np.argmin([f for f, _ in candidates]))
        if candidates[k][0] < s.best_fitness:
            s.best_fitness = float(candidates[k][0])
            s.best_params = candidates[k][1]

        s.t = t + 1
        sigma_snapshot = None
        if s.t % self.ncs.epoch_length == 0:
            for st in pop:
                st.sigma = update_sigma(st.sigma, st.success_count, self.ncs.epoch_length, self.ncs.sigma_rule)
                st.success_count = 0
            sigma_snapshot = [st.sigma for st in pop]

        fits = [st.fitness for st in pop]
        row = IterationRow(
            t=t,
            lam=lam,
            fitness=fits,
            best_fitness=s.best_fitness,
            mean_fitness=float(np.mean(fits)),
            mean_sigma=float(np.mean([st.sigma for st in pop])),
            accepts=int(accepted.sum()),
            wallclock_ms=(time.perf_counter() - start) * 1e3 if self.record_wallclock else None,
            sigmas=sigma_snapshot,
        )
        s.record.rows.append(row)
        return row

    def run(
        self,
        on_iteration: Optional[Callable[[TrainerState, IterationRow], None]] = None,
        max_steps: Optional[int] = None,
    ) -> TrainResult:
        """Iterate until ``max_iterations``, the time budget, or ``max_steps`` more iterations."""
        if self.state is None:
            self.initialize()
        began = time.monotonic()
        steps = 0
        while not self.done and (max_steps is None or steps < max_steps):
            row = self.step()
            steps += 1
            if self.ncs.time_budget is not None and time.monotonic() - began >= self.ncs.time_budget:
                self.state.record.budget_exhausted = True
            if on_iteration is not None:
                on_iteration(self.state, row)
        return TrainResult(self.state.population, self.state.best_params, self.state.record)


def _init_seed(seed: int, index: int) -> int:
    # independent init stream per individual, derived from the run seed
    return int(np.random.SeedSequence([seed, _rng.TAG_INIT, index]).generate_state(1, np.uint64)[0] >> 1)


def initial_individual(net_config: NetworkConfig, seed: int, index: int) -> np.ndarray:
    """The iteration-0 weights of search process ``index`` in a run seeded with ``seed``."""
    return init_params(net_config, _init_seed(seed, index))


def train(
    ncs_config: NcsConfig,
    net_config: NetworkConfig,
    train_dataset: Dataset | np.ndarray,
    seed: int,
    *,
    n_jobs: int = 1,
    record_wallclock: bool = True,
) -> TrainResult:
    """Run NCS from scratch; returns the final population, best-ever weights and the record."""
    with NcsTrainer(ncs_config, net_config, train_dataset, seed, n_jobs=n_jobs, record_wallclock=record_wallclock) as tr:
        return tr.run()


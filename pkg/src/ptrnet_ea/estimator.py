"""scikit-learn compatible estimators.

``X`` is always a batch of TSP instances: an array of shape ``(m, n, 2)``
(a single ``(n, 2)`` instance is accepted), a :class:`~ptrnet_ea.tsp.Dataset`
or a list of :class:`~ptrnet_ea.tsp.Instance`. ``predict`` returns tours as an
integer array of shape ``(m, n)``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import evolution, tsp
from .exceptions import ConfigError
from .portfolio import Portfolio, evaluate_portfolio
from .ptrnet import NetworkConfig, decode_coordinates
from .validation import check_coordinates, check_positive_int, check_seed

INFERENCE_MODES = ("best", "portfolio")
BASELINE_METHODS = ("nn", "two_opt", "oracle")


class PtrNetEA(BaseEstimator):
    """Pointer network trained by Negatively Correlated Search.

    Parameters mirror :class:`~ptrnet_ea.ptrnet.NetworkConfig` and
    :class:`~ptrnet_ea.evolution.NcsConfig`. ``inference`` selects whether
    :meth:`predict` uses the best-ever network or the whole final population
    as a best-of portfolio.

    Attributes
    ----------
    population_ : list of SearchState
    best_params_ : ndarray of float32
    record_ : RunRecord
    net_config_, ncs_config_ : the validated configurations
    n_nodes_ : node count seen during ``fit``
    """

    def __init__(
        self,
        embedding_size=32,
        hidden_size=256,
        num_layers=5,
        population_size=5,
        max_iterations=8000,
        epoch_length=10,
        sigma_init=0.05,
        batch_size=256,
        normalize_acceptance=True,
        sigma_rule="one_fifth_standard",
        time_budget=None,
        inference="best",
        n_jobs=1,
        random_state=0,
    ):
        self.embedding_size = embedding_size
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.population_size = population_size
        self.max_iterations = max_iterations
        self.epoch_length = epoch_length
        self.sigma_init = sigma_init
        self.batch_size = batch_size
        self.normalize_acceptance = normalize_acceptance
        self.sigma_rule = sigma_rule
        self.time_budget = time_budget
        self.inference = inference
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _configs(self):
        net = NetworkConfig(self.embedding_size, self.hidden_size, self.num_layers)
        ncs = evolution.NcsConfig(
            population_size=self.population_size,
            max_iterations=self.max_iterations,
            epoch_length=self.epoch_length,
            sigma_init=self.sigma_init,
            batch_size=self.batch_size,
            normalize_acceptance=bool(self.normalize_acceptance),
            sigma_rule=self.sigma_rule,
            time_budget=self.time_budget,
        )
        return net, ncs

    def fit(self, X, y=None):
        coords = check_coordinates(X)
        seed = check_seed(self.random_state)
        n_jobs = check_positive_int(self.n_jobs, "n_jobs")
        if self.inference not in INFERENCE_MODES:
            raise ConfigError(f"inference must be one of {INFERENCE_MODES}")
        net, ncs = self._configs()
        result = evolution.train(ncs, net, coords, seed, n_jobs=n_jobs)
        self.net_config_, self.ncs_config_ = net, ncs
        self.population_ = result.population
        self.best_params_ = result.best_params
        self.record_ = result.record
        self.n_nodes_ = coords.shape[1]
        return self

    @property
    def portfolio_(self) -> Portfolio:
        check_is_fitted(self, "population_")
        return Portfolio(tuple(s.individual for s in self.population_), self.net_config_)

    def predict(self, X):
        check_is_fitted(self, "best_params_")
        coords = check_coordinates(X)
        if self.inference == "portfolio":
            tours, lengths = self.portfolio_.length_matrix(coords)
            return tours[np.argmin(lengths, axis=0), np.arange(coords.shape[0])]
        return decode_coordinates(coords, self.best_params_, self.net_config_)

    def tour_lengths(self, X):
        coords = check_coordinates(X)
        return tsp.tour_lengths(coords, self.predict(coords))

    def score(self, X, y=None):
        """Negative mean tour length (higher is better, as scikit-learn expects)."""
        return -float(self.tour_lengths(X).mean())

    def portfolio_report(self, X):
        return evaluate_portfolio(self.portfolio_, check_coordinates(X))


class ClassicalTSPSolver(BaseEstimator):
    """Nearest-neighbour, 2-opt (seeded by nearest neighbour) or exact solver.

    ``fit`` only validates parameters; the solvers are instance-wise.
    """

    def __init__(self, method="two_opt", start=0, max_passes=1000):
        self.method = method
        self.start = start
        self.max_passes = max_passes

    def fit(self, X=None, y=None):
        if self.method not in BASELINE_METHODS:
            raise ConfigError(f"method must be one of {BASELINE_METHODS}, got {self.method!r}")
        check_positive_int(self.max_passes, "max_passes")
        self.fitted_ = True
        return self

    def _solve(self, inst: tsp.Instance):
        if self.method == "oracle":
            return tsp.brute_force_optimal(inst)
        tour = tsp.nearest_neighbor_tour(inst, self.start)
        if self.method == "two_opt":
            tour = tsp.two_opt(inst, tour, self.max_passes)
        return tour

    def predict(self, X):
        check_is_fitted(self, "fitted_")
        coords = check_coordinates(X)
        return np.array([self._solve(tsp.Instance(c)) for c in coords], dtype=np.intp)

    def tour_lengths(self, X):
        coords = check_coordinates(X)
        return tsp.tour_lengths(coords, self.predict(coords))

    def score(self, X, y=None):
        return -float(self.tour_lengths(X).mean())

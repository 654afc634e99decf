"""Pointer networks for Euclidean TSP trained by Negatively Correlated Search."""
from .estimator import ClassicalTSPSolver, PtrNetEA
from .evolution import NcsConfig, NcsTrainer, RunRecord, SearchState, train
from .portfolio import Portfolio, PortfolioReport, evaluate_portfolio, infer_best
from .ptrnet import NetworkConfig, batch_decode, forward_decode, init_params, param_count
from .tsp import Dataset, Instance, generate_dataset, generate_instance, tour_length

__version__ = "0.1.0"

__all__ = [
    "ClassicalTSPSolver",
    "Dataset",
    "Instance",
    "NcsConfig",
    "NcsTrainer",
    "NetworkConfig",
    "Portfolio",
    "PortfolioReport",
    "PtrNetEA",
    "RunRecord",
    "SearchState",
    "batch_decode",
    "evaluate_portfolio",
    "forward_decode",
    "generate_dataset",
    "generate_instance",
    "infer_best",
    "init_params",
    "param_count",
    "tour_length",
    "train",
]

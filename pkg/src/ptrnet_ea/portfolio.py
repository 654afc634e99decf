"""Best-of-population inference over an evolved population."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ConfigError, LayoutError
from .ptrnet import NetworkConfig, decode_coordinates, param_count
from .tsp import Instance, Tour, tour_lengths
from .validation import check_coordinates


@dataclass(frozen=True)
class Portfolio:
    """Policies are identified by their position; lower ids win ties."""

    policies: tuple[np.ndarray, ...]
    net_config: NetworkConfig

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.policies:
            raise ConfigError("a portfolio needs at least one policy")
        expected = param_count(self.net_config)
        for k, p in enumerate(self.policies):
            if np.shape(p) != (expected,):
                raise LayoutError(f"policy {k} has shape {np.shape(p)}, expected ({expected},)")

    def __len__(self):
        return len(self.policies)

    def length_matrix(self, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Greedy tours ``(P, m, n)`` and their lengths ``(P, m)`` for every policy."""
        tours = np.stack([decode_coordinates(coords, p, self.net_config) for p in self.policies])
        lengths = np.stack([tour_lengths(coords, t) for t in tours])
        return tours, lengths


@dataclass(frozen=True)
class PortfolioReport:
    winners: np.ndarray  # policy id per instance
    lengths: np.ndarray  # portfolio tour length per instance
    member_means: np.ndarray  # mean length of each policy on its own
    shares: np.ndarray  # fraction of instances won by each policy

    @property
    def mean_length(self) -> float:
        return float(self.lengths.mean())

    @property
    def std_length(self) -> float:
        return float(self.lengths.std())

    @property
    def best_member(self) -> int:
        """Policy with the lowest standalone mean (lowest id on ties)."""
        return int(np.argmin(self.member_means))

    @property
    def non_best_share(self) -> float:
        """Fraction of instances where a policy other than the best member wins."""
        return float(1.0 - self.shares[self.best_member])

    def to_dict(self) -> dict:
        return {
            "mean_length": self.mean_length,
            "std_length": self.std_length,
            "best_member": self.best_member,
            "best_member_mean": float(self.member_means[self.best_member]),
            "non_best_share": self.non_best_share,
            "member_means": [float(x) for x in self.member_means],
            "shares": [float(x) for x in self.shares],
            "winners": [int(x) for x in self.winners],
        }


def infer_best(portfolio: Portfolio, instance: Instance) -> tuple[Tour, int]:
    """Decode with every policy and keep the shortest tour."""
    coords = instance.nodes[None]
    tours, lengths = portfolio.length_matrix(coords)
    k = int(np.argmin(lengths[:, 0]))  # argmin returns the first (lowest id) minimum
    return tuple(int(i) for i in tours[k, 0]), k


def evaluate_portfolio(portfolio: Portfolio, dataset: Sequence[Instance] | np.ndarray) -> PortfolioReport:
    coords = check_coordinates(dataset, name="dataset")
    _, lengths = portfolio.length_matrix(coords)
    winners = np.argmin(lengths, axis=0)
    best = lengths[winners, np.arange(lengths.shape[1])]
    shares = np.bincount(winners, minlength=len(portfolio)) / lengths.shape[1]
    return PortfolioReport(winners=winners, lengths=best, member_means=lengths.mean(axis=1), shares=shares)

"""Euclidean TSP instances, tours, datasets and classical solvers.

Coordinates live in the unit square. A tour is a sequence of 0-based node
indices; the closing edge back to the first node is implicit.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _rng
from .exceptions import (
    DatasetFormatError,
    InstanceSizeError,
    InvalidDimensionError,
    InvalidTourError,
)

Tour = tuple[int, ...]

FORMAT_TAG = "TSPSET"
FORMAT_VERSION = "v1"
SPLITS = ("train", "test")

# desk-scale defaults; the full-scale counts are 1_000_000 and 2000
DESK_TRAIN_COUNT = 10_000
DESK_TEST_COUNT = 500
FULL_TRAIN_COUNT = 1_000_000
FULL_TEST_COUNT = 2000

BRUTE_FORCE_MAX_N = 10


@dataclass(eq=False, frozen=True)
class Instance:
    """``n`` planar nodes in ``[0, 1]^2``."""

    nodes: np.ndarray
    id: str = ""

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=np.float64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise InvalidDimensionError(f"nodes must have shape (n, 2), got {nodes.shape}")
        if nodes.shape[0] < 2:
            raise InvalidDimensionError(f"an instance needs n >= 2 nodes, got {nodes.shape[0]}")
        if not np.isfinite(nodes).all() or nodes.min() < 0.0 or nodes.max() > 1.0:
            raise InvalidDimensionError("node coordinates must lie in [0, 1]")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash((self.id, self.nodes.tobytes()))


@dataclass(eq=True, frozen=True)
class Dataset:
    instances: tuple[Instance, ...]
    split: str = "train"
    generator_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if not self.instances:
            raise DatasetFormatError("empty dataset")
        if self.split not in SPLITS:
            raise DatasetFormatError(f"split must be one of {SPLITS}, got {self.split!r}")
        sizes = {inst.n for inst in self.instances}
        if len(sizes) != 1:
            raise DatasetFormatError(f"mixed node counts in dataset: {sorted(sizes)}")

    @property
    def n(self) -> int:
        return self.instances[0].n

    def __len__(self):
        return len(self.instances)

    def coordinates(self) -> np.ndarray:
        """Stacked ``(count, n, 2)`` float64 array."""
        return np.stack([inst.nodes for inst in self.instances])


def _uniform_nodes(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.random((n, 2))


def generate_instance(n: int, seed: int) -> Instance:
    """Draw ``n`` nodes i.i.d. uniform on the unit square."""
    if n < 2:
        raise InvalidDimensionError(f"n must be >= 2, got {n}")
    return Instance(_uniform_nodes(_rng.stream(seed, _rng.TAG_INSTANCE), n), id=f"seed{seed}")


def generate_dataset(n: int, count: int, seed: int, split: str = "train") -> Dataset:
    """Generate ``count`` instances; instance ``k`` uses its own keyed stream.

    Train and test splits draw from disjoint stream keys, so a train and a
    test set built from the same seed never share an instance.
    """
    if n < 2:
        raise InvalidDimensionError(f"n must be >= 2, got {n}")
    if count < 1:
        raise DatasetFormatError("empty dataset: count must be >= 1")
    if split not in SPLITS:
        raise DatasetFormatError(f"split must be one of {SPLITS}, got {split!r}")
    code = _rng.SPLIT_CODES[split]
    instances = [
        Instance(
            _uniform_nodes(_rng.stream(seed, _rng.TAG_INSTANCE, code, k), n),
            id=f"{split}-{seed}-{k}",
        )
        for k in range(count)
    ]
    return Dataset(tuple(instances), split=split, generator_seed=seed)


# -- tours ------------------------------------------------------------------


@dataclass(frozen=True)
class TourCheck:
    """Result of :func:`validate_tour`; ``violations`` is empty when valid."""

    violations: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_tour(instance: Instance, tour: Sequence[int]) -> TourCheck:
    """Report every violated tour constraint (never raises)."""
    n = instance.n
    problems = []
    try:
        order = [int(i) for i in tour]
    except (TypeError, ValueError):
        return TourCheck(("non-integer index",))
    if len(order) != n:
        problems.append(f"length mismatch: tour has {len(order)} indices, instance has {n} nodes")
    bad = sorted({i for i in order if i < 0 or i >= n})
    if bad:
        problems.append(f"out-of-range index: {bad}")
    seen, repeated = set(), set()
    for i in order:
        if i in seen:
            repeated.add(i)
        seen.add(i)
    if repeated:
        problems.append(f"repeated index: {sorted(repeated)}")
    return TourCheck(tuple(problems))


def _checked_order(instance: Instance, tour: Sequence[int]) -> np.ndarray:
    check = validate_tour(instance, tour)
    if not check.ok:
        raise InvalidTourError("; ".join(check.violations))
    return np.asarray(tour, dtype=np.intp)


def tour_length(instance: Instance, tour: Sequence[int]) -> float:
    """Closed Euclidean tour length (double precision)."""
    order = _checked_order(instance, tour)
    pts = instance.nodes[order]
    return float(np.sqrt(((pts - np.roll(pts, -1, axis=0)) ** 2).sum(axis=1)).sum())


def tour_lengths(coords: np.ndarray, tours: np.ndarray) -> np.ndarray:
    """Vectorised closed lengths for ``(m, n, 2)`` coordinates and ``(m, n)`` tours.

    Tours are trusted to be permutations (used on decoder output).
    """
    pts = np.take_along_axis(coords, tours[..., None], axis=1)
    step = pts - np.roll(pts, -1, axis=1)
    return np.sqrt((step**2).sum(axis=2)).sum(axis=1)


def distance_matrix(instance: Instance) -> np.ndarray:
    diff = instance.nodes[:, None, :] - instance.nodes[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def nearest_neighbor_tour(instance: Instance, start: int = 0) -> Tour:
    """Greedy construction; ties go to the lowest index."""
    n = instance.n
    if not 0 <= start < n:
        raise InvalidTourError(f"start index {start} out of range for n={n}")
    dist = distance_matrix(instance)
    visited = np.zeros(n, dtype=bool)
    order = [start]
    visited[start] = True
    current = start
    for _ in range(n - 1):
        row = np.where(visited, np.inf, dist[current])
        current = int(np.argmin(row))
        visited[current] = True
        order.append(current)
    return tuple(order)


_IMPROVEMENT_EPS = 1e-12


def two_opt(instance: Instance, initial: Sequence[int], max_passes: int = 1000) -> Tour:
    """First-improvement 2-opt.

    A pass scans edge pairs ``(i, j)`` with ``i < j`` lexicographically and
    applies each improving exchange as soon as it is found, continuing the
    scan on the modified tour. Stops after a pass with no exchange or after
    ``max_passes`` passes. Only exchanges that shorten the tour by more than
    ``1e-12`` are taken, so the length strictly decreases with every move.
    """
    if max_passes < 1:
        raise ValueError("max_passes must be >= 1")
    tour = _checked_order(instance, initial).copy()
    n = len(tour)
    if n < 4:
        return tuple(int(i) for i in tour)
    dist = distance_matrix(instance)
    for _ in range(max_passes):
        improved = False
        i = 0
        while i < n - 2:
            a, b = tour[i], tour[i + 1]
            # j ranges over i+2 .. n-1; for i == 0 the pair with j == n-1 shares node a
            j_hi = n - 1 if i == 0 else n
            js = np.arange(i + 2, j_hi)
            if js.size:
                c = tour[js]
                d = tour[(js + 1) % n]
                delta = dist[a, c] + dist[b, d] - dist[a, b] - dist[c, d]
                hits = np.flatnonzero(delta < -_IMPROVEMENT_EPS)
                if hits.size:
                    j = int(js[hits[0]])
                    tour[i + 1 : j + 1] = tour[i + 1 : j + 1][::-1].copy()
                    improved = True
                    continue  # rescan from the same i on the new tour
            i += 1
        if not improved:
            break
    return tuple(int(i) for i in tour)


def brute_force_optimal(instance: Instance) -> Tour:
    """Exact optimum by enumerating the ``(n-1)!/2`` canonical tours.

    The returned tour starts at node 0 and has ``tour[1] < tour[-1]``; among
    equal-length optima the lexicographically smallest one is returned.
    """
    n = instance.n
    if n > BRUTE_FORCE_MAX_N:
        raise InstanceSizeError(f"brute force refused for n={n} > {BRUTE_FORCE_MAX_N}")
    if n <= 3:
        return tuple(range(n))
    dist = distance_matrix(instance)
    best_len, best = np.inf, None
    rest = range(1, n)
    chunk = 40_320
    perms_iter = itertools.permutations(rest)
    while True:
        block = list(itertools.islice(perms_iter, chunk))
        if not block:
            break
        perms = np.asarray(block, dtype=np.intp)
        perms = perms[perms[:, 0] < perms[:, -1]]
        if not len(perms):
            continue
        lengths = dist[0, perms[:, 0]] + dist[perms[:, -1], 0]
        lengths = lengths + dist[perms[:, :-1], perms[:, 1:]].sum(axis=1)
        k = int(np.argmin(lengths))
        if lengths[k] < best_len:
            best_len, best = lengths[k], perms[k]
    return (0, *(int(i) for i in best))


# -- dataset files ------------------------------------------------------------


def format_dataset(dataset: Dataset) -> str:
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION} n={dataset.n} count={len(dataset)} "
        f"seed={dataset.generator_seed} split={dataset.split}"
    ]
    for inst in dataset.instances:
        if ";" in inst.id or "\n" in inst.id:
            raise DatasetFormatError(f"instance id {inst.id!r} contains a reserved character")
        pts = ";".join(f"{x!r},{y!r}" for x, y in inst.nodes.tolist())
        lines.append(f"{inst.id};{pts}")
    return "\n".join(lines) + "\n"


def write_dataset(dataset: Dataset, path) -> None:
    """Write ``dataset`` atomically in the line-oriented ``TSPSET v1`` format."""
    text = format_dataset(dataset)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _parse_header(line: str) -> dict:
    parts = line.split()
    if len(parts) != 6 or parts[0] != FORMAT_TAG:
        raise DatasetFormatError(f"line 1: expected '{FORMAT_TAG} {FORMAT_VERSION} n=.. count=.. seed=.. split=..'")
    if parts[1] != FORMAT_VERSION:
        raise DatasetFormatError(f"line 1: unsupported version {parts[1]!r}")
    fields = {}
    for item in parts[2:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise DatasetFormatError(f"line 1: malformed header field {item!r}")
        fields[key] = value
    try:
        header = {
            "n": int(fields["n"]),
            "count": int(fields["count"]),
            "seed": int(fields["seed"]),
            "split": fields["split"],
        }
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"line 1: bad header ({exc})") from None
    if header["split"] not in SPLITS:
        raise DatasetFormatError(f"line 1: unknown split {header['split']!r}")
    return header


def read_dataset(path) -> Dataset:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError("line 1: empty file")
    header = _parse_header(lines[0])
    body = [(no, line) for no, line in enumerate(lines[1:], start=2) if line.strip()]
    if not body:
        raise DatasetFormatError("empty dataset: no instance records")
    instances = []
    for no, line in body:
        fields = line.split(";")
        inst_id, coords = fields[0], fields[1:]
        try:
            nodes = [tuple(float(v) for v in c.split(",")) for c in coords]
        except ValueError:
            raise DatasetFormatError(f"line {no}: unparsable coordinate") from None
        if any(len(p) != 2 for p in nodes):
            raise DatasetFormatError(f"line {no}: every node needs exactly two coordinates")
        if len(nodes) != header["n"]:
            raise DatasetFormatError(
                f"line {no}: mixed dimension, record has {len(nodes)} nodes but header says n={header['n']}"
            )
        arr = np.asarray(nodes, dtype=np.float64)
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise DatasetFormatError(f"line {no}: coordinate outside [0, 1]")
        instances.append(Instance(arr, id=inst_id))
    if len(instances) != header["count"]:
        raise DatasetFormatError(f"header declares count={header['count']} but file has {len(instances)} records")
    return Dataset(tuple(instances), split=header["split"], generator_seed=header["seed"])

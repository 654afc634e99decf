"""Versioned binary checkpoints.

Layout (all integers little-endian)::

    magic        8 bytes   b"PNEACKPT"
    version      uint32
    header_len   uint64
    header       JSON, UTF-8, sorted keys
    params       (N + 1) * P float32 little-endian: N individuals, then best-ever
    sha256       32 bytes over everything above

Random streams are keyed by ``(master seed, purpose, iteration, ...)``, so the
stream state is fully described by the master seed and the next iteration;
both are stored under ``header["rng"]``.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..evolution import IterationRow, NcsConfig, RunRecord, SearchState, TrainerState
from ..exceptions import CheckpointError
from ..ptrnet import NetworkConfig, as_param_vector, param_count
from .config import config_digest

MAGIC = b"PNEACKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def _record_to_json(record: RunRecord) -> dict:
    return {
        "initial_fitness": record.initial_fitness,
        "initial_best_index": record.initial_best_index,
        "budget_exhausted": record.budget_exhausted,
        "rows": [asdict(r) for r in record.rows],
    }


def _record_from_json(data: dict) -> RunRecord:
    return RunRecord(
        initial_fitness=list(data["initial_fitness"]),
        initial_best_index=int(data["initial_best_index"]),
        rows=[IterationRow(**row) for row in data["rows"]],
        budget_exhausted=bool(data["budget_exhausted"]),
    )


def encode_checkpoint(state: TrainerState, net: NetworkConfig, ncs: NcsConfig, seed: int) -> bytes:
    header = {
        "format_version": VERSION,
        "net_config": asdict(net),
        "ncs_config": asdict(ncs),
        "config_digest": config_digest(net, ncs),
        "t": state.t,
        "sigmas": [s.sigma for s in state.population],
        "success_counts": [s.success_count for s in state.population],
        "fitness": [s.fitness for s in state.population],
        "best_fitness": state.best_fitness,
        "param_count": param_count(net),
        "rng": {"generator": "philox4x64", "keying": "SeedSequence", "master_seed": seed, "next_iteration": state.t},
        "record": _record_to_json(state.record),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()
    blocks = [np.asarray(s.individual, dtype="<f4").tobytes() for s in state.population]
    blocks.append(np.asarray(state.best_params, dtype="<f4").tobytes())
    body = _PREFIX.pack(MAGIC, VERSION, len(blob)) + blob + b"".join(blocks)
    return body + hashlib.sha256(body).digest()


def save_checkpoint(path, state: TrainerState, net: NetworkConfig, ncs: NcsConfig, seed: int) -> None:
    """Write atomically (temp file, fsync, rename)."""
    data = encode_checkpoint(state, net, ncs, seed)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def decode_checkpoint(data: bytes) -> dict:
    """Parse and verify checkpoint bytes.

    Returns a dict with ``state`` (:class:`TrainerState`), ``net_config``,
    ``ncs_config``, ``seed`` and the raw ``header``.
    """
    if len(data) < _PREFIX.size + 32:
        raise CheckpointError("checkpoint truncated")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint integrity check failed (sha256 mismatch)")
    magic, version, hlen = _PREFIX.unpack_from(body)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(body[start : start + hlen])
        net = NetworkConfig(**header["net_config"])
        ncs = NcsConfig(**header["ncs_config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None
    if header["config_digest"] != config_digest(net, ncs):
        raise CheckpointError("checkpoint header digest does not match its configuration")
    P = param_count(net)
    n = len(header["sigmas"])
    raw = body[start + hlen :]
    if len(raw) != (n + 1) * P * 4:
        raise CheckpointError("parameter block size does not match the header")
    vectors = np.frombuffer(raw, dtype="<f4").reshape(n + 1, P)
    population = [
        SearchState(as_param_vector(vectors[i]), float(sig), int(c), float(f))
        for i, (sig, c, f) in enumerate(zip(header["sigmas"], header["success_counts"], header["fitness"]))
    ]
    state = TrainerState(
        t=int(header["t"]),
        population=population,
        best_params=as_param_vector(vectors[n]),
        best_fitness=float(header["best_fitness"]),
        record=_record_from_json(header["record"]),
    )
    return {"state": state, "net_config": net, "ncs_config": ncs, "seed": int(header["rng"]["master_seed"]), "header": header}


def load_checkpoint(path) -> dict:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    return decode_checkpoint(data)

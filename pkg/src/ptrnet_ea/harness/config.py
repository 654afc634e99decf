"""Run configuration files.

A run config is a plain ``key = value`` text file; ``#`` starts a comment.
Relative dataset and output paths resolve against the config file's
directory. Recognised keys::

    train, test, out, tag, seed, threads,
    embedding_size, hidden_size, num_layers,
    population_size, max_iterations, epoch_length, sigma_init, batch_size,
    normalize_acceptance, sigma_rule, time_budget,
    checkpoint_every, record_wallclock
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from ..evolution import NcsConfig
from ..exceptions import ConfigError
from ..ptrnet import NetworkConfig

_NET_KEYS = ("embedding_size", "hidden_size", "num_layers")
_NCS_KEYS = tuple(f.name for f in fields(NcsConfig))
_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


@dataclass
class RunConfig:
    net_config: NetworkConfig = field(default_factory=NetworkConfig)
    ncs_config: NcsConfig = field(default_factory=NcsConfig)
    train_path: Optional[Path] = None
    test_path: Optional[Path] = None
    seed: int = 0
    out_dir: Path = Path("run")
    tag: str = "run"
    threads: int = 1
    checkpoint_every: int = 50
    record_wallclock: bool = True


def _convert(key: str, raw: str, kind):
    try:
        if kind is bool:
            return _BOOL[raw.strip().lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except (KeyError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


_TYPES = {
    "embedding_size": int,
    "hidden_size": int,
    "num_layers": int,
    "population_size": int,
    "max_iterations": int,
    "epoch_length": int,
    "sigma_init": float,
    "batch_size": int,
    "normalize_acceptance": bool,
    "sigma_rule": str,
    "time_budget": float,
    "seed": int,
    "threads": int,
    "checkpoint_every": int,
    "record_wallclock": bool,
    "train": str,
    "test": str,
    "out": str,
    "tag": str,
}


def parse_run_config(text: str, base_dir: Path = Path(".")) -> RunConfig:
    values: dict = {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {no}: expected 'key = value'")
        if key not in _TYPES:
            raise ConfigError(f"line {no}: unknown key {key!r}")
        if key == "time_budget" and raw.lower() in ("", "none"):
            values[key] = None
            continue
        values[key] = _convert(key, raw, _TYPES[key])

    net = NetworkConfig(**{k: values[k] for k in _NET_KEYS if k in values})
    ncs = NcsConfig(**{k: values[k] for k in _NCS_KEYS if k in values})

    def path(key):
        return (base_dir / values[key]).resolve() if key in values else None

    cfg = RunConfig(
        net_config=net,
        ncs_config=ncs,
        train_path=path("train"),
        test_path=path("test"),
        seed=values.get("seed", 0),
        out_dir=path("out") or (base_dir / "run").resolve(),
        tag=values.get("tag", "run"),
        threads=values.get("threads", 1),
        checkpoint_every=values.get("checkpoint_every", 50),
        record_wallclock=values.get("record_wallclock", True),
    )
    if cfg.seed < 0 or cfg.threads < 1 or cfg.checkpoint_every < 1:
        raise ConfigError("seed must be >= 0; threads and checkpoint_every must be >= 1")
    return cfg


def load_run_config(path) -> RunConfig:
    path = Path(path)
    return parse_run_config(path.read_text(), base_dir=path.parent)


def format_run_config(cfg: RunConfig) -> str:
    lines = [f"tag = {cfg.tag}", f"seed = {cfg.seed}", f"threads = {cfg.threads}", f"out = {cfg.out_dir}"]
    if cfg.train_path:
        lines.append(f"train = {cfg.train_path}")
    if cfg.test_path:
        lines.append(f"test = {cfg.test_path}")
    for key in _NET_KEYS:
        lines.append(f"{key} = {getattr(cfg.net_config, key)}")
    for key in _NCS_KEYS:
        value = getattr(cfg.ncs_config, key)
        lines.append(f"{key} = {'none' if value is None else str(value).lower() if isinstance(value, bool) else value}")
    lines.append(f"checkpoint_every = {cfg.checkpoint_every}")
    lines.append(f"record_wallclock = {str(cfg.record_wallclock).lower()}")
    return "\n".join(lines) + "\n"


def config_digest(net: NetworkConfig, ncs: NcsConfig) -> str:
    """SHA-256 over the canonical JSON of both configurations.

    ``time_budget`` is excluded: it only decides where a run stops, so a
    resumed run may change it.
    """
    ncs_fields = {k: v for k, v in asdict(ncs).items() if k != "time_budget"}
    blob = json.dumps({"net": asdict(net), "ncs": ncs_fields}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()

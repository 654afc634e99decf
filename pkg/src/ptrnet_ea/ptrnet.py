"""Framework-free pointer network driven by a single flat weight vector.

Parameter layout (in order; every block is row-major):

===========================  ===========================
block                        shape
===========================  ===========================
``embedding``                ``(2, E)``
``start_token``              ``(E,)``
``encoder.{l}.w_ih``         ``(4d, E if l == 0 else d)``
``encoder.{l}.w_hh``         ``(4d, d)``
``encoder.{l}.bias``         ``(4d,)``
``decoder.{l}.*``            same as the encoder
``attention.w_ref``          ``(d, d)``
``attention.w_q``            ``(d, d)``
``attention.v``              ``(d,)``
===========================  ===========================

LSTM gate rows are stacked in the order input, forget, cell, output; there
are no peepholes. The total is ``3E + 2 * sum_l 4d(in_l + d + 1) + 2d^2 + d``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _rng
from .exceptions import ConfigError, InvalidDimensionError, LayoutError, NumericError
from .tsp import Instance, Tour

DECODE_MODES = ("greedy", "sample")
INIT_RANGE = 0.08
MASK_SENTINEL = -1e9


@dataclass(frozen=True)
class NetworkConfig:
    embedding_size: int = 32
    hidden_size: int = 256
    num_layers: int = 5
    decode_mode: str = "greedy"

    def __post_init__(self):
        for name in ("embedding_size", "hidden_size", "num_layers"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        if self.decode_mode not in DECODE_MODES:
            raise ConfigError(f"decode_mode must be one of {DECODE_MODES}, got {self.decode_mode!r}")


def param_layout(config: NetworkConfig) -> dict[str, tuple[slice, tuple[int, ...]]]:
    """Ordered mapping ``block name -> (slice into the flat vector, shape)``."""
    E, d, L = config.embedding_size, config.hidden_size, config.num_layers
    shapes: list[tuple[str, tuple[int, ...]]] = [("embedding", (2, E)), ("start_token", (E,))]
    for stack in ("encoder", "decoder"):
        for layer in range(L):
            width = E if layer == 0 else d
            shapes += [
                (f"{stack}.{layer}.w_ih", (4 * d, width)),
                (f"{stack}.{layer}.w_hh", (4 * d, d)),
                (f"{stack}.{layer}.bias", (4 * d,)),
            ]
    shapes += [("attention.w_ref", (d, d)), ("attention.w_q", (d, d)), ("attention.v", (d,))]
    layout, offset = {}, 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        layout[name] = (slice(offset, offset + size), shape)
        offset += size
    return layout


def param_count(config: NetworkConfig) -> int:
    return max(s.stop for s, _ in param_layout(config).values())


def init_params(config: NetworkConfig, seed: int) -> np.ndarray:
    """Uniform ``[-0.08, 0.08]`` initialisation, stored as read-only float32."""
    rng = _rng.stream(seed, _rng.TAG_INIT)
    values = rng.uniform(-INIT_RANGE, INIT_RANGE, size=param_count(config)).astype(np.float32)
    np.clip(values, -INIT_RANGE, INIT_RANGE, out=values)  # float32 rounding can step past the edge
    values.setflags(write=False)
    return values


def as_param_vector(values) -> np.ndarray:
    """Freeze ``values`` as a 1-D read-only float32 vector."""
    arr = np.array(values, dtype=np.float32).reshape(-1)
    if not np.isfinite(arr).all():
        raise LayoutError("parameter vector contains non-finite values")
    arr.setflags(write=False)
    return arr


def unpack_params(params: np.ndarray, config: NetworkConfig) -> dict[str, np.ndarray]:
    """Split ``params`` into named float64 blocks."""
    params = np.asarray(params)
    expected = param_count(config)
    if params.ndim != 1 or params.shape[0] != expected:
        raise LayoutError(f"parameter vector has shape {params.shape}, config needs ({expected},)")
    flat = params.astype(np.float64)
    return {name: flat[s].reshape(shape) for name, (s, shape) in param_layout(config).items()}


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def lstm_cell(gates: np.ndarray, c_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply gate nonlinearities to pre-activations ``(..., 4d)``; returns ``(h, c)``."""
    i, f, g, o = np.split(gates, 4, axis=-1)
    c = _sigmoid(f) * c_prev + _sigmoid(i) * np.tanh(g)
    h = _sigmoid(o) * np.tanh(c)
    return h, c


def lstm_step(x, h_prev, c_prev, w_ih, w_hh, bias):
    """One LSTM step with weights in the layout's ``(4d, in)`` orientation."""
    return lstm_cell(x @ w_ih.T + h_prev @ w_hh.T + bias, c_prev)


@dataclass(frozen=True)
class DecodeTrace:
    tour: Tour
    step_distributions: np.ndarray  # (n, n); row t is the distribution at step t
    masked: tuple[frozenset, ...]  # nodes disabled at each step


def _prepare(weights: dict, config: NetworkConfig) -> dict:
    """Fold the sigmoid's 1/2 into the i, f, o gate rows and pre-transpose matrices.

    With the halving folded in, ``sigmoid(z) = (tanh(z / 2) + 1) / 2`` lets one
    ``tanh`` call cover all four gates.
    """
    d = config.hidden_size
    scale = np.full(4 * d, 0.5)
    scale[2 * d : 3 * d] = 1.0
    fast = {}
    for stack in ("encoder", "decoder"):
        for layer in range(config.num_layers):
            key = f"{stack}.{layer}"
            fast[key] = (
                np.ascontiguousarray((weights[f"{key}.w_ih"] * scale[:, None]).T),
                np.ascontiguousarray((weights[f"{key}.w_hh"] * scale[:, None]).T),
                weights[f"{key}.bias"] * scale,
            )
    return fast


def _cell(z: np.ndarray, c_prev: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.tanh(z)
    c = 0.5 * ((a[:, d : 2 * d] + 1.0) * c_prev + (a[:, :d] + 1.0) * a[:, 2 * d : 3 * d])
    h = 0.5 * (a[:, 3 * d :] + 1.0) * np.tanh(c)
    return h, c


def _decode(coords, weights, config, mode, rng, record):
    """Batched decode of ``coords`` ``(B, n, 2)``; returns tours and optional probabilities."""
    B, n, _ = coords.shape
    d, L = config.hidden_size, config.num_layers
    fast = _prepare(weights, config)
    emb = coords @ weights["embedding"]  # (B, n, E)

    seq = emb
    states = []
    for layer in range(L):
        w_ih, w_hh, bias = fast[f"encoder.{layer}"]
        pre = seq @ w_ih + bias  # (B, n, 4d)
        h = np.zeros((B, d))
        c = np.zeros((B, d))
        out = np.empty((B, n, d))
        for t in range(n):
            h, c = _cell(pre[:, t] + h @ w_hh, c, d)
            out[:, t] = h
        seq = out
        states.append((h, c))

    ref_proj = seq @ weights["attention.w_ref"].T  # (B, n, d)
    w_q_t, v = np.ascontiguousarray(weights["attention.w_q"].T), weights["attention.v"]
    dec = [fast[f"decoder.{l}"] for l in range(L)]
    # first decoder layer input is an embedding; project every candidate once
    w_ih0, _, bias0 = dec[0]
    node_proj = emb @ w_ih0 + bias0  # (B, n, 4d)
    in_proj = np.broadcast_to(weights["start_token"] @ w_ih0 + bias0, (B, 4 * d))

    rows = np.arange(B)
    mask = np.zeros((B, n), dtype=bool)
    penalty = np.zeros((B, n))
    tours = np.empty((B, n), dtype=np.intp)
    probs_log = np.empty((B, n, n)) if record else None
    for step in range(n):
        h, c = _cell(in_proj + states[0][0] @ dec[0][1], states[0][1], d)
        states[0] = (h, c)
        for layer in range(1, L):
            w_ih, w_hh, bias = dec[layer]
            h, c = _cell(h @ w_ih + states[layer][0] @ w_hh + bias, states[layer][1], d)
            states[layer] = (h, c)
        logits = np.tanh(ref_proj + (h @ w_q_t)[:, None, :]) @ v  # (B, n)
        if not np.isfinite(logits).all():
            raise NumericError(f"non-finite attention logits at decode step {step}")
        logits += penalty
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p[mask] = 0.0
        p /= p.sum(axis=1, keepdims=True)
        if mode == "greedy":
            choice = np.argmax(p, axis=1)
        else:
            cdf = np.cumsum(p, axis=1)
            target = rng.random(B) * cdf[:, -1]
            # first index whose cdf exceeds target; zero-probability entries never qualify
            choice = np.minimum((cdf <= target[:, None]).sum(axis=1), n - 1)
            choice = np.where(mask[rows, choice], np.argmax(p, axis=1), choice)
        if record:
            probs_log[:, step] = p
        tours[:, step] = choice
        mask[rows, choice] = True
        penalty[rows, choice] = MASK_SENTINEL
        in_proj = node_proj[rows, choice]
    return tours, probs_log


def forward_decode(
    instance: Instance, params: np.ndarray, config: NetworkConfig, seed: int = 0
) -> DecodeTrace:
    """Decode one instance, recording per-step distributions and masks.

    Greedy mode ignores ``seed``; sample mode draws from the keyed stream for
    ``seed``.
    """
    weights = unpack_params(params, config)
    rng = _rng.stream(seed, _rng.TAG_DECODE) if config.decode_mode == "sample" else None
    tours, probs = _decode(instance.nodes[None], weights, config, config.decode_mode, rng, True)
    tour = tuple(int(i) for i in tours[0])
    masked = tuple(frozenset(tour[:t]) for t in range(len(tour)))
    return DecodeTrace(tour=tour, step_distributions=probs[0], masked=masked)


def decode_coordinates(coords: np.ndarray, params: np.ndarray, config: NetworkConfig) -> np.ndarray:
    """Greedy tours ``(m, n)`` for a validated ``(m, n, 2)`` coordinate array."""
    weights = unpack_params(params, config)
    tours, _ = _decode(coords, weights, config, "greedy", None, False)
    return tours


def batch_decode(
    instances: Sequence[Instance], params: np.ndarray, config: NetworkConfig
) -> list[Tour]:
    """Greedy-decode a batch of equally sized instances, preserving order."""
    sizes = {inst.n for inst in instances}
    if len(sizes) > 1:
        raise InvalidDimensionError(f"batch has mixed node counts {sorted(sizes)}")
    if not instances:
        return []
    coords = np.stack([inst.nodes for inst in instances])
    return [tuple(int(i) for i in row) for row in decode_coordinates(coords, params, config)]

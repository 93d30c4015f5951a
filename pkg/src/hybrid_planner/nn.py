"""Dense MLPs with hand-written backpropagation, Adam, and the tanh-squashed
Gaussian policy head.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``x`` of shape
``(B, fan_in)`` maps through ``x @ W + b``.  Hidden layers use ReLU, the output
layer is linear.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
LOG_SIGMA_MIN = -20.0
LOG_SIGMA_MAX = 2.0
EPS_NUM = 1e-6
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class DivergenceError(FloatingPointError):
    """Raised when a loss or gradient stops being finite."""


@dataclass
class MlpParams:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "linear"
    # bumped on every in-place update so stale forward caches can be detected
    version: int = field(default=0, compare=False)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in self.arrays():
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())


def init_scale(fan_in: int) -> float:
    """Half-width of the uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)), variance 1/(3 fan_in)."""
    return 1.0 / math.sqrt(fan_in)


def mlp_init(layer_sizes, seed: int) -> MlpParams:
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ValueError(f"layer_sizes must hold at least two positive sizes, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = init_scale(fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(sizes, weights, biases)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activation of each layer
    squeeze: bool
    params_id: int
    params_version: int


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"input width {x.shape[1]} != first layer size {params.layer_sizes[0]}")
    inputs, pre = [], []
    h = x
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k < last else z
    cache = ForwardCache(inputs, pre, squeeze, id(params), params.version)
    return (h[0] if squeeze else h), cache


def mlp_apply(params: MlpParams, x) -> np.ndarray:
    """Forward pass without keeping a cache."""
    h = np.asarray(x, dtype=np.float64)
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k < last:
            np.maximum(h, 0.0, out=h)
    return h


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def mlp_backward(
    params: MlpParams,
    cache: ForwardCache,
    grad_output,
    need_input_grad: bool = True,
    need_param_grads: bool = True,
) -> Gradients:
    """Gradients of ``sum(grad_output * output)`` w.r.t. every parameter and the input.

    Batch contributions are summed, not averaged.  With ``need_param_grads``
    off only the input gradient is produced (parameter slots hold ``None``).
    """
    if cache.params_id != id(params) or cache.params_version != params.version:
        raise ValueError("forward cache does not belong to the current parameter values")
    g = np.asarray(grad_output, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != cache.pre[-1].shape:
        raise ValueError(f"grad_output shape {g.shape} != output shape {cache.pre[-1].shape}")
    n = params.n_layers
    dws: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    dbs: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    dx = None
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            g = g * (cache.pre[k] > 0.0)
        if need_param_grads:
            dws[k] = cache.inputs[k].T @ g
            dbs[k] = g.sum(axis=0)
        if k > 0 or need_input_grad:
            g = g @ params.weights[k].T
    if need_input_grad:
        dx = g[0] if cache.squeeze else g
    return Gradients(dws, dbs, dx)


# --------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(arrays) -> AdamState:
    arrays = list(arrays)
    return AdamState([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])


def adam_step_arrays(arrays, grads, state: AdamState, lr: float) -> None:
    """In-place Adam update of a list of arrays."""
    if len(arrays) != len(state.m) or len(grads) != len(arrays):
        raise ValueError("parameter, gradient and moment lists differ in length")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient passed to Adam")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if p.shape != g.shape or m.shape != p.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def adam_update(params: MlpParams, grads: Gradients, state: AdamState, lr: float):
    adam_step_arrays(params.arrays(), grads.arrays(), state, lr)
    params.version += 1
    return params, state


# --------------------------------------------------------------------------
# squashed Gaussian head


@dataclass
class ActorHeadOutput:
    mu: np.ndarray
    log_sigma: np.ndarray
    # pre-clamp values, kept so the backward pass can zero clamped gradients
    raw_log_sigma: np.ndarray | None = None


def split_head(out: np.ndarray, action_dim: int = 2) -> ActorHeadOutput:
    mu = out[..., :action_dim]
    raw = out[..., action_dim : 2 * action_dim]
    return ActorHeadOutput(mu, np.clip(raw, LOG_SIGMA_MIN, LOG_SIGMA_MAX), raw)


def squashed_gaussian(head: ActorHeadOutput, eps) -> tuple[np.ndarray, np.ndarray]:
    """Reparameterised sample ``tanh(mu + sigma * eps)`` and its log-density.

    Works on a single head (vectors) or a batch (rows); log_prob sums over the
    last axis.
    """
    eps = np.asarray(eps, dtype=np.float64)
    sigma = np.exp(head.log_sigma)
    u = head.mu + sigma * eps
    action = np.tanh(u)
    log_prob = np.sum(
        -HALF_LOG_2PI - head.log_sigma - 0.5 * eps * eps - np.log(1.0 - action * action + EPS_NUM),
        axis=-1,
    )
    return action, log_prob


def squashed_gaussian_grads(head: ActorHeadOutput, eps, action):
    """Partial derivatives of the sample and its log-density w.r.t. the head.

    Returns ``(da_dmu, da_dls, dlogp_dmu, dlogp_dls)``, each shaped like ``mu``;
    the action derivatives are element-wise (the Jacobian is diagonal).
    Gradients w.r.t. log_sigma are zero where the clamp is active.
    """
    eps = np.asarray(eps, dtype=np.float64)
    sigma = np.exp(head.log_sigma)
    one_minus = 1.0 - action * action
    da_dmu = one_minus
    da_dls = one_minus * sigma * eps
    dlogp_du = 2.0 * action * one_minus / (one_minus + EPS_NUM)
    dlogp_dmu = dlogp_du
    dlogp_dls = -1.0 + dlogp_du * sigma * eps
    if head.raw_log_sigma is not None:
        free = (head.raw_log_sigma > LOG_SIGMA_MIN) & (head.raw_log_sigma < LOG_SIGMA_MAX)
        da_dls = da_dls * free
        dlogp_dls = dlogp_dls * free
    return da_dmu, da_dls, dlogp_dmu, dlogp_dls


# --------------------------------------------------------------------------
# checkpoint documents


def params_to_doc(params: MlpParams) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "layer_sizes": list(params.layer_sizes),
        "activation": {"hidden": params.hidden_activation, "output": params.output_activation},
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def params_from_doc(doc: dict, name: str = "network") -> MlpParams:
    try:
        if doc["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {doc['format_version']}")
        sizes = [int(s) for s in doc["layer_sizes"]]
        ws = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        bs = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        act = doc.get("activation", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{name}: malformed network document ({exc})") from exc
    if len(ws) != len(sizes) - 1 or len(bs) != len(ws):
        raise ValueError(f"{name}: layer count does not match layer_sizes")
    for k, (w, b) in enumerate(zip(ws, bs)):
        if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
            raise ValueError(f"{name}: layer {k} has shape {w.shape}/{b.shape}, expected "
                             f"{(sizes[k], sizes[k + 1])}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError(f"{name}: layer {k} holds non-finite values")
    return MlpParams(sizes, ws, bs, act.get("hidden", "relu"), act.get("output", "linear"))


def save_params(params: MlpParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_doc(params)))


def load_params(path) -> MlpParams:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path.name}: invalid JSON ({exc})") from exc
    return params_from_doc(doc, path.name)

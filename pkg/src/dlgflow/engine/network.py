"""Numerical core of the recurrent policy.

A single LSTM cell (input/forget/output gates plus candidate), a linear
output layer, and a softmax restricted to the actions a mask allows. The
backward pass is non-truncated backpropagation through time over one whole
dialog; everything runs in float64 so gradient checks are meaningful and
results reproduce bit-for-bit across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteActivationError

PARAM_ORDER = ("emb", "wx", "wh", "b", "wy", "by")
INIT_RANGE = 0.08


def init_params(vocab_size: int, embedding_dim: int, hidden_size: int,
                template_count: int, input_size: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    shapes = param_shapes(vocab_size, embedding_dim, hidden_size,
                          template_count, input_size)
    return {name: rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape)
            for name, shape in shapes.items()}


def param_shapes(vocab_size: int, embedding_dim: int, hidden_size: int,
                 template_count: int, input_size: int) -> dict[str, tuple]:
    return {
        "emb": (vocab_size, embedding_dim),
        "wx": (4 * hidden_size, input_size),
        "wh": (4 * hidden_size, hidden_size),
        "b": (4 * hidden_size,),
        "wy": (template_count, hidden_size),
        "by": (template_count,),
    }


def zeros_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_step(params: dict[str, np.ndarray], x: np.ndarray,
              h: np.ndarray, c: np.ndarray):
    """One recurrent step; returns (h', c', cache for backward)."""
    hidden = h.shape[0]
    z = params["wx"] @ x + params["wh"] @ h + params["b"]
    i = _sigmoid(z[:hidden])
    f = _sigmoid(z[hidden:2 * hidden])
    o = _sigmoid(z[2 * hidden:3 * hidden])
    g = np.tanh(z[3 * hidden:])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    return h_new, c_new, (x, h, c, i, f, o, g, tanh_c)


def lstm_step_backward(params, cache, dh: np.ndarray, dc: np.ndarray, grads):
    """Backward through one step; returns (dx, dh_prev, dc_prev)."""
    x, h_prev, c_prev, i, f, o, g, tanh_c = cache
    do = dh * tanh_c
    dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    dc_prev = dc * f
    dz = np.concatenate([di * i * (1.0 - i),
                         df * f * (1.0 - f),
                         do * o * (1.0 - o),
                         dg * (1.0 - g * g)])
    grads["wx"] += np.outer(dz, x)
    grads["wh"] += np.outer(dz, h_prev)
    grads["b"] += dz
    dx = params["wx"].T @ dz
    dh_prev = params["wh"].T @ dz
    return dx, dh_prev, dc_prev


def output_logits(params: dict[str, np.ndarray], h: np.ndarray) -> np.ndarray:
    return params["wy"] @ h + params["by"]


def softmax(logits: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(logits)):
        raise NonFiniteActivationError("non-finite logits in forward pass")
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def restricted_log_softmax(logits: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Log-softmax with masked-out actions excluded from the normalizer."""
    masked = np.where(allowed, logits, -np.inf)
    top = masked.max()
    lse = top + np.log(np.exp(masked - top).sum())
    return np.where(allowed, logits - lse, -np.inf)


@dataclass(frozen=True)
class Step:
    """One policy decision inside a dialog, ready for the network."""
    token_indexes: tuple[int, ...]
    static_features: np.ndarray  # bow + entity flags + last-action one-hot
    label: int
    allowed: np.ndarray          # bool per template


def compose_input(params: dict[str, np.ndarray], embedding_dim: int,
                  step: Step) -> np.ndarray:
    if step.token_indexes:
        emb = params["emb"][list(step.token_indexes)].mean(axis=0)
    else:
        emb = np.zeros(embedding_dim)
    return np.concatenate([emb, step.static_features])


def run_dialog(params: dict[str, np.ndarray], steps: list[Step],
               hidden_size: int, embedding_dim: int, compute_grads: bool = True):
    """Forward (and optionally backward) over one dialog.

    Returns (total loss, gradients or None, masked-argmax predictions).
    """
    h = np.zeros(hidden_size)
    c = np.zeros(hidden_size)
    caches = []
    hs = []
    dlogits_list = []
    predictions = []
    loss = 0.0
    for step in steps:
        x = compose_input(params, embedding_dim, step)
        h, c, cache = lstm_step(params, x, h, c)
        logits = output_logits(params, h)
        if not np.all(np.isfinite(logits)):
            raise NonFiniteActivationError("non-finite logits during dialog run")
        log_probs = restricted_log_softmax(logits, step.allowed)
        loss -= log_probs[step.label]
        masked_logits = np.where(step.allowed, logits, -np.inf)
        predictions.append(int(masked_logits.argmax()))
        if compute_grads:
            probs = np.where(step.allowed, np.exp(log_probs), 0.0)
            dlogit = probs
            dlogit[step.label] -= 1.0
            dlogits_list.append(dlogit)
            caches.append(cache)
            hs.append(h)
    if not compute_grads:
        return loss, None, predictions

    grads = zeros_like_params(params)
    dh_next = np.zeros(hidden_size)
    dc_next = np.zeros(hidden_size)
    for t in range(len(steps) - 1, -1, -1):
        dlogit = dlogits_list[t]
        grads["wy"] += np.outer(dlogit, hs[t])
        grads["by"] += dlogit
        dh = params["wy"].T @ dlogit + dh_next
        dx, dh_next, dc_next = lstm_step_backward(params, caches[t], dh, dc_next, grads)
        idxs = steps[t].token_indexes
        if idxs:
            demb = dx[:embedding_dim] / len(idxs)
            for idx in idxs:
                grads["emb"][idx] += demb
    return loss, grads, predictions


def clip_global_norm(grads: dict[str, np.ndarray], clip_norm: float) -> float:
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if clip_norm > 0 and norm > clip_norm:
        scale = clip_norm / norm
        for g in grads.values():
            g *= scale
    return float(norm)


class AdamOptimizer:
    """Adaptive-moment gradient descent with bias correction."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = zeros_like_params(params)
        self.v = zeros_like_params(params)
        self.t = 0

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)

"""Stochastic policies and their hand-written gradients.

Two policy families share one protocol (``action_probs``,
``weighted_score_sum``, ``log_prob_grad``, flat ``theta``):

* :class:`MlpPolicy` - three-layer feed-forward net, rectifier hidden
  activations, softmax output, reverse-mode gradients written out by hand;
* :class:`LinearSoftmaxPolicy` - softmax over a linear map of features,
  which on one-hot features is exactly a tabular softmax policy. Used as the
  closed-form oracle target.

:class:`ValueMlp` reuses the same core with a scalar linear head for
actor-critic value estimation. All arithmetic is float64; gradient checks at
1e-5 relative tolerance depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NumericFault
from .rng import RngStream

CHECKPOINT_MAGIC = "equm-policy v1"


def softmax(logits: np.ndarray) -> np.ndarray:
    """Overflow-safe softmax via max subtraction."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Adam with decoupled weight decay
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """Adam moments plus step counter.

    ``decoupled=True`` applies weight decay directly to the parameters
    (theta <- theta * (1 - lr * weight_decay)) before the Adam increment;
    ``decoupled=False`` folds ``weight_decay * theta`` into the gradient the
    classical way, for sensitivity checks.
    """

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.1
    decoupled: bool = True

    @classmethod
    def fresh(cls, n_params: int, **kwargs) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), **kwargs)


def adam_apply(state: AdamState, theta: np.ndarray, grad: np.ndarray, ascent: bool = False) -> np.ndarray:
    """One bias-corrected Adam step; returns the updated parameter vector.

    ``ascent=True`` climbs the objective instead of descending it. Raises
    :class:`NumericFault` on a non-finite gradient without touching state.
    """
    if theta.shape != grad.shape:
        raise DimensionMismatch(f"theta {theta.shape} vs grad {grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericFault("non-finite gradient passed to adam_apply")
    g = -grad if ascent else grad
    if state.weight_decay != 0.0 and not state.decoupled:
        g = g + state.weight_decay * theta
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    if state.weight_decay != 0.0 and state.decoupled:
        theta = theta * (1.0 - state.lr * state.weight_decay)
    return theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# Three-layer MLP core
# ---------------------------------------------------------------------------


class _MlpBase:
    """Weight storage and batched forward/backward for a 3-layer net.

    Flat parameter layout (row-major, fixed): W1, b1, W2, b2, W3, b3.
    """

    def __init__(self, layer_dims: list[int], theta: np.ndarray | None = None):
        if len(layer_dims) != 4:
            raise DimensionMismatch(f"expected 4 layer dims, got {layer_dims}")
        self.layer_dims = [int(d) for d in layer_dims]
        d, h1, h2, k = self.layer_dims
        self._shapes = [(h1, d), (h1,), (h2, h1), (h2,), (k, h2), (k,)]
        self._sizes = [int(np.prod(s)) for s in self._shapes]
        n = sum(self._sizes)
        if theta is None:
            theta = np.zeros(n)
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != n:
            raise DimensionMismatch(f"theta has {theta.size} entries, expected {n}")
        self._theta = theta.copy()
        self._unpack()

    def _unpack(self) -> None:
        views = []
        ofs = 0
        for shape, size in zip(self._shapes, self._sizes):
            views.append(self._theta[ofs : ofs + size].reshape(shape))
            ofs += size
        self.W1, self.b1, self.W2, self.b2, self.W3, self.b3 = views

    @property
    def n_params(self) -> int:
        return self._theta.size

    def get_theta(self) -> np.ndarray:
        return self._theta.copy()

    def set_theta(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self._theta.size:
            raise DimensionMismatch(f"theta has {theta.size} entries, expected {self._theta.size}")
        self._theta = theta.copy()
        self._unpack()

    theta = property(get_theta, set_theta)

    @classmethod
    def glorot_init(cls, layer_dims: list[int], rng: RngStream):
        """Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero."""
        net = cls(layer_dims)
        gen = rng.generator()
        for W in (net.W1, net.W2, net.W3):
            fan_out, fan_in = W.shape
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            W[...] = gen.uniform(-lim, lim, size=W.shape)
        return net

    def _forward_batch(self, X: np.ndarray):
        Z1 = X @ self.W1.T + self.b1
        A1 = np.maximum(Z1, 0.0)
        Z2 = A1 @ self.W2.T + self.b2
        A2 = np.maximum(Z2, 0.0)
        Z3 = A2 @ self.W3.T + self.b3
        return Z1, A1, Z2, A2, Z3

    def _backward_batch(self, X, Z1, A1, Z2, A2, dZ3) -> np.ndarray:
        gW3 = dZ3.T @ A2
        gb3 = dZ3.sum(axis=0)
        dA2 = dZ3 @ self.W3
        dZ2 = dA2 * (Z2 > 0.0)
        gW2 = dZ2.T @ A1
        gb2 = dZ2.sum(axis=0)
        dA1 = dZ2 @ self.W2
        dZ1 = dA1 * (Z1 > 0.0)
        gW1 = dZ1.T @ X
        gb1 = dZ1.sum(axis=0)
        return np.concatenate(
            [gW1.ravel(), gb1, gW2.ravel(), gb2, gW3.ravel(), gb3]
        )


class MlpPolicy(_MlpBase):
    """Softmax policy over a three-layer rectifier network."""

    @property
    def action_count(self) -> int:
        return self.layer_dims[-1]

    @property
    def state_dim(self) -> int:
        return self.layer_dims[0]

    def logits(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.state_dim,):
            raise DimensionMismatch(f"state shape {state.shape}, expected ({self.state_dim},)")
        *_, Z3 = self._forward_batch(state[None, :])
        return Z3[0]

    def action_probs(self, state: np.ndarray) -> np.ndarray:
        logits = self.logits(state)
        if not np.all(np.isfinite(logits)):
            raise NumericFault("non-finite activations in policy forward pass")
        return softmax(logits)

    def weighted_score_sum(
        self, states: np.ndarray, actions: np.ndarray, weights=None
    ) -> np.ndarray:
        """sum_t weights_t * grad_theta log pi(actions_t | states_t).

        ``weights`` may be a scalar, a per-step vector, or None (all ones).
        One batched forward/backward pass over the whole episode.
        """
        X = np.atleast_2d(np.asarray(states, dtype=np.float64))
        acts = np.asarray(actions, dtype=np.int64).ravel()
        Z1, A1, Z2, A2, Z3 = self._forward_batch(X)
        P = softmax(Z3)
        dZ3 = -P
        dZ3[np.arange(len(acts)), acts] += 1.0
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)
            dZ3 = dZ3 * (w if w.ndim == 0 else w[:, None])
        return self._backward_batch(X, Z1, A1, Z2, A2, dZ3)

    def log_prob_grad(self, state: np.ndarray, action: int) -> np.ndarray:
        return self.weighted_score_sum(
            np.asarray(state)[None, :], np.array([action])
        )

    def log_prob(self, state: np.ndarray, action: int) -> float:
        logits = self.logits(state)
        z = logits - np.max(logits)
        return float(z[action] - np.log(np.sum(np.exp(z))))


class LinearSoftmaxPolicy:
    """Softmax over a linear map; tabular policy when features are one-hot.

    Parameters form a (action_count, state_dim) matrix, flattened row-major.
    """

    def __init__(self, state_dim: int, action_count: int, theta: np.ndarray | None = None):
        self._d = int(state_dim)
        self._k = int(action_count)
        if theta is None:
            theta = np.zeros(self._k * self._d)
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self._k * self._d:
            raise DimensionMismatch(
                f"theta has {theta.size} entries, expected {self._k * self._d}"
            )
        self._theta = theta.copy()

    @property
    def layer_dims(self) -> list[int]:
        return [self._d, self._k]

    @property
    def action_count(self) -> int:
        return self._k

    @property
    def state_dim(self) -> int:
        return self._d

    @property
    def n_params(self) -> int:
        return self._theta.size

    def get_theta(self) -> np.ndarray:
        return self._theta.copy()

    def set_theta(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self._theta.size:
            raise DimensionMismatch(f"theta has {theta.size} entries, expected {self._theta.size}")
        self._theta = theta.copy()

    theta = property(get_theta, set_theta)

    @property
    def weights(self) -> np.ndarray:
        return self._theta.reshape(self._k, self._d)

    def action_probs(self, state: np.ndarray) -> np.ndarray:
        logits = self.weights @ np.asarray(state, dtype=np.float64)
        if not np.all(np.isfinite(logits)):
            raise NumericFault("non-finite activations in policy forward pass")
        return softmax(logits)

    def weighted_score_sum(self, states, actions, weights=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(states, dtype=np.float64))
        acts = np.asarray(actions, dtype=np.int64).ravel()
        P = softmax(X @ self.weights.T)
        dZ = -P
        dZ[np.arange(len(acts)), acts] += 1.0
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)
            dZ = dZ * (w if w.ndim == 0 else w[:, None])
        return (dZ.T @ X).ravel()

    def log_prob_grad(self, state, action: int) -> np.ndarray:
        return self.weighted_score_sum(np.asarray(state)[None, :], np.array([action]))

    def log_prob(self, state, action: int) -> float:
        logits = self.weights @ np.asarray(state, dtype=np.float64)
        z = logits - np.max(logits)
        return float(z[action] - np.log(np.sum(np.exp(z))))


class ValueMlp(_MlpBase):
    """Scalar-output three-layer net for critic value estimates."""

    def __init__(self, layer_dims: list[int], theta: np.ndarray | None = None):
        if layer_dims[-1] != 1:
            raise DimensionMismatch(f"value net output dim must be 1, got {layer_dims[-1]}")
        super().__init__(layer_dims, theta)

    @property
    def state_dim(self) -> int:
        return self.layer_dims[0]

    def value(self, state: np.ndarray) -> float:
        return float(self.values(np.asarray(state)[None, :])[0])

    def values(self, states: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(states, dtype=np.float64))
        *_, Z3 = self._forward_batch(X)
        return Z3[:, 0]

    def weighted_grad_sum(self, states: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """sum_t weights_t * grad_theta V(states_t)."""
        X = np.atleast_2d(np.asarray(states, dtype=np.float64))
        Z1, A1, Z2, A2, _ = self._forward_batch(X)
        dZ3 = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
        return self._backward_batch(X, Z1, A1, Z2, A2, dZ3)


# ---------------------------------------------------------------------------
# Checkpoint persistence (plain text, layout-stable)
# ---------------------------------------------------------------------------


def save_policy(policy, path) -> None:
    """Write a policy checkpoint.

    Line 1 is the format tag, line 2 the layer dims, then one parameter per
    line with 17 significant digits; the format round-trips float64 exactly.
    """
    lines = [CHECKPOINT_MAGIC, " ".join(str(d) for d in policy.layer_dims)]
    lines.extend(f"{x:.17g}" for x in policy.get_theta())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_policy(path):
    """Read a checkpoint back into an MlpPolicy or LinearSoftmaxPolicy."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise DimensionMismatch(f"{path}: not a policy checkpoint")
    dims = [int(tok) for tok in lines[1].split()]
    theta = np.array([float(tok) for tok in lines[2:] if tok], dtype=np.float64)
    if len(dims) == 2:
        return LinearSoftmaxPolicy(dims[0], dims[1], theta)
    if len(dims) == 4:
        return MlpPolicy(dims, theta)
    raise DimensionMismatch(f"{path}: unsupported layer dims {dims}")

"""Dense MLP primitives with exact hand-derived gradients.

Networks are plain weight/bias lists with tanh hidden layers and an
identity output. Gradients are reverse-mode and exact; the test suite
checks every entry against central finite differences. The inner array
loops live in :mod:`samrl._kernels` (compiled when the extension built).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import ConfigError

LOG_2PI = math.log(2.0 * math.pi)

# Bounds on the state-independent log-std of the Gaussian policy head;
# keeps the density strictly positive and bounded.
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass
class MlpParams:
    """Weights and biases of a fully-connected net.

    weights[k] has shape (layer_sizes[k+1], layer_sizes[k]); a net with no
    hidden layers (len(layer_sizes) == 2) is plain affine, which is the
    linear family used by the small-game oracle tests.
    """

    layer_sizes: tuple
    weights: list
    biases: list

    @classmethod
    def init(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> "MlpParams":
        """Glorot-uniform weights, zero biases."""
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ConfigError(f"bad layer sizes {sizes}")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def arrays(self) -> list:
        """All parameter arrays, weights then bias per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class MlpGrads:
    """Gradient record, same shapes as the MlpParams it came from."""

    weights: list
    biases: list

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.in_dim,):
        raise ConfigError(
            f"input shape {x.shape} does not match layer sizes {params.layer_sizes}"
        )
    return K.mlp_forward(params.weights, params.biases, x)


def mlp_grad(params: MlpParams, x, upstream):
    """Gradient of upstream . output w.r.t. all parameters and the input.

    Returns (MlpGrads, input_gradient).
    """
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if x.shape != (params.in_dim,):
        raise ConfigError(f"input shape {x.shape} vs in_dim {params.in_dim}")
    if upstream.shape != (params.out_dim,):
        raise ConfigError(f"upstream shape {upstream.shape} vs out_dim {params.out_dim}")
    _, acts = K.mlp_forward_cached(params.weights, params.biases, x)
    gws, gbs, dx = K.mlp_backward(params.weights, params.biases, acts, upstream)
    return MlpGrads(gws, gbs), dx


@dataclass
class PolicyParams:
    """Gaussian policy: MLP mean plus a state-independent log-std vector."""

    mean_net: MlpParams
    log_std: np.ndarray

    @classmethod
    def init(
        cls,
        obs_dim: int,
        act_dim: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
        log_std0: float = -0.7,
    ) -> "PolicyParams":
        net = MlpParams.init((obs_dim, *hidden, act_dim), rng)
        return cls(net, np.full(act_dim, float(log_std0)))

    def arrays(self) -> list:
        return self.mean_net.arrays() + [self.log_std]

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.mean_net.copy(), self.log_std.copy())


@dataclass
class PolicyGrads:
    mean_net: MlpGrads
    log_std: np.ndarray

    def arrays(self) -> list:
        return self.mean_net.arrays() + [self.log_std]


@dataclass
class ValueParams:
    """State-value critic: MLP mapping a joint-observation vector to a scalar."""

    value_net: MlpParams

    @classmethod
    def init(
        cls, obs_dim: int, hidden: Sequence[int], rng: np.random.Generator
    ) -> "ValueParams":
        return cls(MlpParams.init((obs_dim, *hidden, 1), rng))

    def arrays(self) -> list:
        return self.value_net.arrays()

    def copy(self) -> "ValueParams":
        return ValueParams(self.value_net.copy())


def value_of(critic: ValueParams, joint_obs) -> float:
    return float(mlp_forward(critic.value_net, joint_obs)[0])


def gaussian_sample_logprob(mean, log_std, rng: np.random.Generator):
    """Sample a ~ N(mean, diag(exp(log_std))^2) and return (a, log pi(a))."""
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    z = rng.standard_normal(mean.shape[0])
    action = mean + np.exp(log_std) * z
    logp = float(np.sum(-0.5 * LOG_2PI - log_std - 0.5 * z * z))
    return action, logp


def gaussian_logprob(mean, log_std, action) -> float:
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    z = (np.asarray(action, dtype=np.float64) - mean) * np.exp(-log_std)
    return float(np.sum(-0.5 * LOG_2PI - log_std - 0.5 * z * z))


def grad_log_pi(policy: PolicyParams, obs, action) -> PolicyGrads:
    """Exact gradient of log pi(action | obs) w.r.t. all policy parameters.

    For each log-std entry the closed form is z_k^2 - 1 with
    z = (action - mean) / sigma.
    """
    obs = np.asarray(obs, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    net = policy.mean_net
    if action.shape != (net.out_dim,):
        raise ConfigError(f"action shape {action.shape} vs act_dim {net.out_dim}")
    mean, acts = K.mlp_forward_cached(net.weights, net.biases, obs)
    inv_std = np.exp(-policy.log_std)
    z = (action - mean) * inv_std
    # d log pi / d mean = z / sigma
    gws, gbs, _ = K.mlp_backward(net.weights, net.biases, acts, z * inv_std)
    return PolicyGrads(MlpGrads(gws, gbs), z * z - 1.0)


def flat_norm(arrays) -> float:
    return math.sqrt(K.sq_norm(list(arrays)))


def _arrays_of(record):
    if isinstance(record, (MlpParams, PolicyParams, ValueParams, MlpGrads, PolicyGrads)):
        return record.arrays()
    return list(record)


def project_params(record, radius: float):
    """Project a parameter record onto the L2 ball of the given radius.

    The record is returned unchanged when its flattened norm is within the
    ball; otherwise a uniformly rescaled copy is returned. Idempotent.
    """
    if radius <= 0:
        raise ConfigError(f"projection radius must be positive, got {radius}")
    arrays = _arrays_of(record)
    norm = flat_norm(arrays)
    if norm <= radius:
        return record
    factor = radius / norm

    def scaled_net(net: MlpParams) -> MlpParams:
        return MlpParams(
            net.layer_sizes,
            [w * factor for w in net.weights],
            [b * factor for b in net.biases],
        )

    if isinstance(record, MlpParams):
        return scaled_net(record)
    if isinstance(record, PolicyParams):
        return PolicyParams(scaled_net(record.mean_net), record.log_std * factor)
    if isinstance(record, ValueParams):
        return ValueParams(scaled_net(record.value_net))
    return [a * factor for a in arrays]


def project_params_inplace(arrays, radius: float) -> None:
    """In-place variant used by the training loop."""
    norm = flat_norm(arrays)
    if norm > radius:
        K.scale_inplace(list(arrays), radius / norm)

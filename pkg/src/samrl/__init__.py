"""Shaping-advice multi-agent reinforcement learning.

Potential-based shaping advice for actor-critic learners with centralized
critics and decentralized Gaussian actors, the three sparse-reward
particle-world tasks it is evaluated on, sparse-only and reward
redistribution baselines, and a seeded experiment harness.
"""

from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]

"""Generalized advantage estimation and per-batch advantage normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ShapeError

# Below this spread a batch of advantages is treated as constant and zeroed
# instead of being blown up by division.
SIGMA_FLOOR = 1e-8


@dataclass
class RolloutSegment:
    """A contiguous run of transitions plus the value estimates around it.

    `values` has one extra trailing entry: the bootstrap estimate for the
    state after the final transition (ignored when that transition is
    terminal). `dones` marks episode boundaries inside the segment.
    """

    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    gamma_discount: float
    lambda_gae: float

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.dones = np.asarray(self.dones, dtype=bool)
        t = self.rewards.shape[0]
        if t == 0:
            raise ShapeError("segment must contain at least one transition")
        if self.values.shape != (t + 1,):
            raise ShapeError(
                f"values must have length {t + 1} (one bootstrap entry), got {self.values.shape}"
            )
        if self.dones.shape != (t,):
            raise ShapeError(f"dones must have length {t}, got {self.dones.shape}")
        if not 0.0 <= self.gamma_discount <= 1.0:
            raise ConfigError(f"gamma_discount must lie in [0, 1], got {self.gamma_discount}")
        if not 0.0 <= self.lambda_gae <= 1.0:
            raise ConfigError(f"lambda_gae must lie in [0, 1], got {self.lambda_gae}")


@dataclass
class AdvantageBatch:
    """Advantages and return targets for one update batch.

    `mu_a` and `sigma_a` always describe the raw advantages this batch was
    derived from: for a fresh GAE batch they are its own statistics, after
    `normalize_advantages` they are the statistics that were divided out.
    """

    advantages: np.ndarray
    returns: np.ndarray
    mu_a: float
    sigma_a: float


def compute_gae(segment: RolloutSegment) -> AdvantageBatch:
    """Exponentially weighted advantage estimates over a rollout segment.

    The one-step residual is r + gamma * V(next) * (1 - done) - V(cur);
    residuals accumulate backwards with weight gamma * lambda, cut at
    episode boundaries. Return targets are advantage + V(cur).
    """
    r = segment.rewards
    v = segment.values
    dones = segment.dones
    gamma = segment.gamma_discount
    glam = gamma * segment.lambda_gae
    t = r.shape[0]
    adv = np.empty(t)
    acc = 0.0
    for i in range(t - 1, -1, -1):
        nonterminal = 0.0 if dones[i] else 1.0
        delta = r[i] + gamma * v[i + 1] * nonterminal - v[i]
        acc = delta + glam * nonterminal * acc
        adv[i] = acc
    returns = adv + v[:t]
    return AdvantageBatch(adv, returns, float(adv.mean()), float(adv.std()))


def normalize_advantages(batch: AdvantageBatch) -> AdvantageBatch:
    """Z-normalize advantages to mean 0, population std 1.

    Return targets pass through untouched. A batch whose advantages are all
    but constant (population std below SIGMA_FLOOR) normalizes to zeros
    rather than amplifying noise.
    """
    adv = batch.advantages
    if adv.size < 2:
        raise ConfigError(f"normalization needs at least 2 advantages, got {adv.size}")
    mu = float(adv.mean())
    sigma = float(adv.std())
    if sigma < SIGMA_FLOOR:
        normalized = np.zeros_like(adv)
    else:
        normalized = (adv - mu) / sigma
    return AdvantageBatch(normalized, batch.returns, mu, sigma)

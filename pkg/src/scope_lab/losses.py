"""Per-example losses over a probability vector.

Every function takes a probability vector of DiffNodes (normally the output
of `autodiff.softmax`), the index of the chosen class or action, and plain
float constants. Advantages and behavior-policy probabilities enter as
floats, never as nodes: they are frozen inputs and must not receive gradient.
All logs are natural logs of probabilities clamped to
[PROB_CLAMP_LO, PROB_CLAMP_HI]; factors such as (1 - p) use the raw
probability.

Naming: the `_supervised` variants treat the label as a chosen action with
unit advantage, the `_ac` variants weight by a per-transition advantage, and
the `ppo_` variants use a clipped probability ratio against the behavior
policy that collected the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .autodiff import DiffNode, add_n, clamp, log, minimum, power
from .exceptions import ConfigError, NumericError

PROB_CLAMP_LO = 1e-12
PROB_CLAMP_HI = 1.0 - 1e-12


@dataclass
class LossConfig:
    """Loss-family hyperparameters; only the relevant ones apply per loss."""

    alpha_scope: float = 0.01
    alpha_entropy: float = 0.01
    alpha_focal: float = 2.0
    gamma_focal: float = 2.0
    alpha_value: float = 0.5
    epsilon_clip: float = 0.2

    def __post_init__(self):
        for name in ("alpha_scope", "alpha_entropy", "alpha_focal", "gamma_focal", "alpha_value"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not v >= 0.0:
                raise ConfigError(f"{name} must be a finite non-negative real, got {v!r}")
            setattr(self, name, float(v))
        if not self.epsilon_clip > 0.0:
            raise ConfigError(f"epsilon_clip must be positive, got {self.epsilon_clip!r}")
        self.epsilon_clip = float(self.epsilon_clip)


def _pick(probs: Sequence[DiffNode], index: int) -> DiffNode:
    if not 0 <= index < len(probs):
        raise IndexError(f"class index {index} out of range for {len(probs)} classes")
    return probs[index]


def _log_prob(p: DiffNode) -> DiffNode:
    return log(clamp(p, PROB_CLAMP_LO, PROB_CLAMP_HI))


def cross_entropy(probs: Sequence[DiffNode], index: int) -> DiffNode:
    """Negative log probability of the chosen class."""
    return -_log_prob(_pick(probs, index))


def focal_supervised(probs: Sequence[DiffNode], index: int, gamma_focal: float) -> DiffNode:
    """Cross entropy scaled by (1 - p)**gamma to damp easy examples."""
    if gamma_focal < 0.0:
        raise ConfigError(f"gamma_focal must be non-negative, got {gamma_focal}")
    p = _pick(probs, index)
    return -(power(1.0 - p, gamma_focal) * _log_prob(p))


def policy_loss_ac(probs: Sequence[DiffNode], index: int, advantage: float) -> DiffNode:
    """Advantage-weighted negative log probability of the taken action."""
    return -(float(advantage) * _log_prob(_pick(probs, index)))


def entropy_term(probs: Sequence[DiffNode]) -> DiffNode:
    """Sum of p*log(p) over all classes (the negated entropy)."""
    return add_n([p * _log_prob(p) for p in probs])


def policy_entropy_ac(
    probs: Sequence[DiffNode], index: int, advantage: float, alpha_entropy: float
) -> DiffNode:
    """Policy loss plus an entropy bonus that rewards spread-out policies."""
    return policy_loss_ac(probs, index, advantage) + float(alpha_entropy) * entropy_term(probs)


def policy_entropy_supervised(
    probs: Sequence[DiffNode], index: int, alpha_entropy: float
) -> DiffNode:
    """Cross entropy plus the entropy bonus (unit advantage)."""
    return cross_entropy(probs, index) + float(alpha_entropy) * entropy_term(probs)


def focal_ac(
    probs: Sequence[DiffNode],
    index: int,
    advantage: float,
    alpha_focal: float,
    gamma_focal: float,
) -> DiffNode:
    """Focal-style policy loss: scaling factor (A - alpha*p)**gamma.

    The base can go negative when the advantage is below alpha*p; `power`
    keeps that real for non-integer exponents via its odd extension.
    """
    if gamma_focal < 0.0:
        raise ConfigError(f"gamma_focal must be non-negative, got {gamma_focal}")
    p = _pick(probs, index)
    base = float(advantage) - float(alpha_focal) * p
    return -(power(base, gamma_focal) * _log_prob(p))


def scope_ac(
    probs: Sequence[DiffNode], index: int, advantage: float, alpha_scope: float
) -> DiffNode:
    """Policy loss with the differentiable scaling factor (A - alpha*p).

    The factor shrinks as the chosen action's probability grows, so the pull
    toward determinism fades out; gradient flows through both factors.
    """
    p = _pick(probs, index)
    return -((float(advantage) - float(alpha_scope) * p) * _log_prob(p))


def scope_supervised(probs: Sequence[DiffNode], index: int) -> DiffNode:
    """Supervised scope loss: -(1 - p) * log(p), unit advantage and weight."""
    p = _pick(probs, index)
    return -((1.0 - p) * _log_prob(p))


def value_loss(value: DiffNode, return_target: float) -> DiffNode:
    """Squared error between the value head and the empirical return."""
    d = value - float(return_target)
    return d * d


# -- clipped-ratio (PPO-style) variants -------------------------------------


def ppo_clip_g(epsilon_clip: float, advantage: float) -> float:
    """Clipped-branch value: A*(1+eps) for A >= 0, else A*(1-eps)."""
    if not epsilon_clip > 0.0:
        raise ConfigError(f"epsilon_clip must be positive, got {epsilon_clip}")
    a = float(advantage)
    return a * (1.0 + epsilon_clip) if a >= 0.0 else a * (1.0 - epsilon_clip)


def _check_behavior_prob(p_k: float) -> float:
    p_k = float(p_k)
    if not 0.0 < p_k <= 1.0:
        raise NumericError(f"behavior probability must lie in (0, 1], got {p_k}")
    return p_k


def _ppo_min(
    probs: Sequence[DiffNode],
    behavior_prob: float,
    index: int,
    advantage: float,
    epsilon_clip: float,
) -> DiffNode:
    """min(ratio * A, clipped branch); ties resolve to the clipped branch,
    so gradient flows through the ratio only when it strictly wins."""
    p_k = _check_behavior_prob(behavior_prob)
    ratio = _pick(probs, index) / p_k
    return minimum(ratio * float(advantage), ppo_clip_g(epsilon_clip, advantage))


def ppo_unclipped_active(
    p_i: float, behavior_prob: float, advantage: float, epsilon_clip: float
) -> bool:
    """True when the differentiable branch of the ratio clip is active.

    This is exactly the comparison `_ppo_min` performs on its node values,
    exposed so trainers can count clipped transitions without reaching into
    graph internals.
    """
    p_k = _check_behavior_prob(behavior_prob)
    return (float(p_i) / p_k) * float(advantage) < ppo_clip_g(epsilon_clip, advantage)


def ppo_policy(
    probs: Sequence[DiffNode],
    behavior_prob: float,
    index: int,
    advantage: float,
    epsilon_clip: float,
) -> DiffNode:
    """Clipped-ratio policy loss: -min(ratio*A, g(eps, A))."""
    return -_ppo_min(probs, behavior_prob, index, advantage, epsilon_clip)


def ppo_policy_entropy(
    probs: Sequence[DiffNode],
    behavior_prob: float,
    index: int,
    advantage: float,
    epsilon_clip: float,
    alpha_entropy: float,
) -> DiffNode:
    """Clipped-ratio policy loss plus the full entropy bonus.

    The clip's min cannot be factorized away, so the entropy term stays a
    separate sum over all actions."""
    pol = ppo_policy(probs, behavior_prob, index, advantage, epsilon_clip)
    return pol + float(alpha_entropy) * entropy_term(probs)


def ppo_scope(
    probs: Sequence[DiffNode],
    behavior_prob: float,
    index: int,
    advantage: float,
    epsilon_clip: float,
    alpha_scope: float,
) -> DiffNode:
    """Clipped-ratio policy loss plus the chosen-action term alpha*p*log(p).

    On the unclipped branch this collapses to
    -(p/p_k) * (A - alpha * p_k * log(p)), i.e. a ratio loss whose scaling
    factor fades with the action's own log probability."""
    pol = ppo_policy(probs, behavior_prob, index, advantage, epsilon_clip)
    p = _pick(probs, index)
    return pol + float(alpha_scope) * (p * _log_prob(p))


def ppo_scope_factor(
    p_i: float, behavior_prob: float, advantage: float, alpha_scope: float
) -> float:
    """Scaling factor (A - alpha * p_k * log(p_i)) of the unclipped branch."""
    p_k = _check_behavior_prob(behavior_prob)
    p_i = min(max(float(p_i), PROB_CLAMP_LO), PROB_CLAMP_HI)
    return float(advantage) - float(alpha_scope) * p_k * math.log(p_i)


def ppo_focal(
    probs: Sequence[DiffNode],
    behavior_prob: float,
    index: int,
    advantage: float,
    epsilon_clip: float,
    alpha_focal: float,
) -> DiffNode:
    """Clipped-ratio focal loss, from squaring the (A - alpha*p) factor.

    Expanding -(A - alpha*p)**2 * log(p) and substituting the clipped ratio
    term M = min(ratio*A, g(eps, A)) for each advantage-weighted log term
    gives -M*A + 2*alpha*M*p - alpha**2 * p**2 * log(p), which is what this
    computes, advantage-squared scale and all."""
    m = _ppo_min(probs, behavior_prob, index, advantage, epsilon_clip)
    p = _pick(probs, index)
    a = float(alpha_focal)
    return -(m * float(advantage)) + (2.0 * a) * (m * p) - (a * a) * ((p * p) * _log_prob(p))

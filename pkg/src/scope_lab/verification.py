"""Cross-checks of the loss algebra, gradients, and advantage machinery.

Three groups of checks, all deterministic given a seed:

* identity checks: pairs of loss formulations that must agree to float
  precision on random inputs (factored vs expanded forms, special-case
  parameter settings that collapse one loss into another);
* gradient checks: every loss composed with softmax against central finite
  differences;
* advantage checks: normalization moments and closed-form special cases of
  the advantage recursion.

The CLI's `verify` subcommand and the identity_suite experiment both run
`run_all_checks` and report one line per check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import losses
from .advantage import RolloutSegment, SIGMA_FLOOR, compute_gae, normalize_advantages
from .autodiff import DiffNode, backward, finite_difference_gradient, softmax
from .exceptions import NumericError

IDENTITY_TOL = 1e-12
GRADIENT_TOL = 1e-5
ADVANTAGE_TOL = 1e-10
MOMENT_TOL = 1e-9
# Finite differences lie about kinks; inputs are resampled until every
# branch point is at least this far away.
KINK_MARGIN = 1e-3


@dataclass(slots=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_probs(rng: np.random.Generator, dim: int | None = None) -> list[DiffNode]:
    d = int(dim) if dim is not None else int(rng.integers(2, 11))
    return softmax([DiffNode(v) for v in rng.uniform(-4.0, 4.0, d)])


def _clamped_log(p: float) -> float:
    return math.log(min(max(p, losses.PROB_CLAMP_LO), losses.PROB_CLAMP_HI))


# -- identity checks ---------------------------------------------------------


def _identity_scope_vs_focal_gamma1(rng) -> float:
    probs = _random_probs(rng)
    i = int(rng.integers(len(probs)))
    a = losses.scope_supervised(probs, i)
    b = losses.focal_supervised(probs, i, gamma_focal=1.0)
    return abs(a.value - b.value)


def _identity_entropy_alpha0_vs_cross_entropy(rng) -> float:
    probs = _random_probs(rng)
    i = int(rng.integers(len(probs)))
    a = losses.policy_entropy_supervised(probs, i, alpha_entropy=0.0)
    b = losses.cross_entropy(probs, i)
    return abs(a.value - b.value)


def _identity_scope_ac_bias_vs_policy_entropy_ac(rng) -> float:
    # The entropy-regularized loss splits into the scope form plus the
    # entropy contributions of the non-chosen classes.
    probs = _random_probs(rng)
    i = int(rng.integers(len(probs)))
    adv = float(rng.uniform(-3.0, 3.0))
    alpha = float(rng.uniform(0.001, 2.0))
    scope = losses.scope_ac(probs, i, adv, alpha_scope=alpha)
    bias = sum(p.value * _clamped_log(p.value) for j, p in enumerate(probs) if j != i)
    pel = losses.policy_entropy_ac(probs, i, adv, alpha_entropy=alpha)
    return abs(scope.value + alpha * bias - pel.value)


def _identity_ratio_scope_factored_unclipped(rng) -> float:
    # On the unclipped branch the ratio-clipped scope loss factors into
    # -(p/p_k) * (A - alpha * p_k * log p); compare against the direct form.
    for _ in range(1000):
        probs = _random_probs(rng)
        i = int(rng.integers(len(probs)))
        p_i = probs[i].value
        eps = float(rng.uniform(0.05, 0.4))
        adv = float(rng.uniform(0.1, 3.0)) * (1.0 if rng.random() < 0.5 else -1.0)
        u = float(rng.uniform(1.0 - 0.9 * eps, 1.0 + 0.9 * eps))
        if p_i / u <= 1.0:
            p_k = p_i / u
        else:
            p_k = 1.0
            adv = abs(adv)
        alpha = float(rng.uniform(0.001, 2.0))
        if not losses.ppo_unclipped_active(p_i, p_k, adv, eps):
            continue
        direct = losses.ppo_scope(probs, p_k, i, adv, eps, alpha)
        factored = -(p_i / p_k) * losses.ppo_scope_factor(p_i, p_k, adv, alpha)
        return abs(direct.value - factored)
    raise NumericError("could not sample an unclipped configuration")


def _identity_focal_ac_unit_vs_scope_supervised(rng) -> float:
    probs = _random_probs(rng)
    i = int(rng.integers(len(probs)))
    a = losses.focal_ac(probs, i, advantage=1.0, alpha_focal=1.0, gamma_focal=1.0)
    b = losses.scope_supervised(probs, i)
    return abs(a.value - b.value)


_IDENTITY_CHECKS = (
    ("identity_scope_vs_focal_gamma1", _identity_scope_vs_focal_gamma1),
    ("identity_entropy_alpha0_vs_cross_entropy", _identity_entropy_alpha0_vs_cross_entropy),
    ("identity_scope_ac_bias_vs_policy_entropy_ac", _identity_scope_ac_bias_vs_policy_entropy_ac),
    ("identity_ratio_scope_factored_unclipped", _identity_ratio_scope_factored_unclipped),
    ("identity_focal_ac_unit_vs_scope_supervised", _identity_focal_ac_unit_vs_scope_supervised),
)


def run_identity_checks(n_inputs: int = 1000, seed: int = 0) -> list[CheckResult]:
    """Each identity over `n_inputs` random draws; pass iff max diff < 1e-12."""
    results = []
    for name, fn in _IDENTITY_CHECKS:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_inputs):
            worst = max(worst, fn(rng))
        results.append(
            CheckResult(name, worst < IDENTITY_TOL, f"max abs diff {worst:.3e} over {n_inputs} inputs")
        )
    return results


# -- gradient checks ---------------------------------------------------------


def _draw_context(rng: np.random.Generator) -> dict:
    return {
        "advantage": float(rng.uniform(0.1, 3.0)) * (1.0 if rng.random() < 0.5 else -1.0),
        "alpha_scope": float(rng.uniform(0.001, 1.0)),
        "alpha_entropy": float(rng.uniform(0.001, 0.1)),
        "alpha_focal": float(rng.uniform(0.5, 3.0)),
        "gamma_focal": 2.0,
        "eps": 0.2,
        "ratio_u": float(rng.uniform(0.7, 1.4)),
    }


def _ratio_margin(probs, i, ctx) -> float:
    lhs = (probs[i].value / ctx["p_k"]) * ctx["advantage"]
    return abs(lhs - losses.ppo_clip_g(ctx["eps"], ctx["advantage"]))


def _focal_margin(probs, i, ctx) -> float:
    return abs(ctx["advantage"] - ctx["alpha_focal"] * probs[i].value)


_GRADIENT_CHECKS = (
    ("grad_cross_entropy", lambda p, i, c: losses.cross_entropy(p, i), None),
    (
        "grad_focal_supervised",
        lambda p, i, c: losses.focal_supervised(p, i, c["gamma_focal"]),
        None,
    ),
    ("grad_policy_ac", lambda p, i, c: losses.policy_loss_ac(p, i, c["advantage"]), None),
    (
        "grad_policy_entropy_ac",
        lambda p, i, c: losses.policy_entropy_ac(p, i, c["advantage"], c["alpha_entropy"]),
        None,
    ),
    (
        "grad_policy_entropy_supervised",
        lambda p, i, c: losses.policy_entropy_supervised(p, i, c["alpha_entropy"]),
        None,
    ),
    (
        "grad_focal_ac",
        lambda p, i, c: losses.focal_ac(p, i, c["advantage"], c["alpha_focal"], c["gamma_focal"]),
        _focal_margin,
    ),
    (
        "grad_scope_ac",
        lambda p, i, c: losses.scope_ac(p, i, c["advantage"], c["alpha_scope"]),
        None,
    ),
    ("grad_scope_supervised", lambda p, i, c: losses.scope_supervised(p, i), None),
    (
        "grad_ratio_policy",
        lambda p, i, c: losses.ppo_policy(p, c["p_k"], i, c["advantage"], c["eps"]),
        _ratio_margin,
    ),
    (
        "grad_ratio_policy_entropy",
        lambda p, i, c: losses.ppo_policy_entropy(
            p, c["p_k"], i, c["advantage"], c["eps"], c["alpha_entropy"]
        ),
        _ratio_margin,
    ),
    (
        "grad_ratio_scope",
        lambda p, i, c: losses.ppo_scope(
            p, c["p_k"], i, c["advantage"], c["eps"], c["alpha_scope"]
        ),
        _ratio_margin,
    ),
    (
        "grad_ratio_focal",
        lambda p, i, c: losses.ppo_focal(
            p, c["p_k"], i, c["advantage"], c["eps"], c["alpha_focal"]
        ),
        _ratio_margin,
    ),
)


def _scaled_gradient_error(builder, margin_fn, rng: np.random.Generator) -> float:
    """Analytic-vs-central-difference error for one random input.

    The error is |analytic - numeric| scaled by max(1, |analytic|, |numeric|)
    so near-zero components do not divide away the finite-difference noise
    floor. Inputs landing within KINK_MARGIN of a clip or sign branch are
    redrawn.
    """
    for _ in range(1000):
        dim = int(rng.integers(2, 11))
        logit_vals = rng.uniform(-2.0, 2.0, dim)
        i = int(rng.integers(dim))
        ctx = _draw_context(rng)
        nodes = [DiffNode(v) for v in logit_vals]
        probs = softmax(nodes)
        # The behavior probability is an input, not a function of the logits:
        # freeze it here so the finite-difference pass cannot move it.
        ctx["p_k"] = min(1.0, probs[i].value / ctx["ratio_u"])
        if margin_fn is not None and margin_fn(probs, i, ctx) <= KINK_MARGIN:
            continue
        loss = builder(probs, i, ctx)
        table = backward(loss)
        analytic = np.array([table.get(n, 0.0) for n in nodes])

        def f(arr):
            leaf = [DiffNode(v) for v in arr]
            return builder(softmax(leaf), i, ctx).value

        numeric = finite_difference_gradient(f, logit_vals.copy(), h=1e-6)
        scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
        return float((np.abs(analytic - numeric) / scale).max())
    raise NumericError("could not sample an input away from branch points")


def run_gradient_checks(n_trials: int = 100, seed: int = 0) -> list[CheckResult]:
    """Every loss composed with softmax vs central differences (h = 1e-6)."""
    results = []
    for name, builder, margin_fn in _GRADIENT_CHECKS:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_trials):
            worst = max(worst, _scaled_gradient_error(builder, margin_fn, rng))
        results.append(
            CheckResult(
                name, worst < GRADIENT_TOL, f"max scaled error {worst:.3e} over {n_trials} trials"
            )
        )
    return results


# -- advantage checks --------------------------------------------------------


def _random_segment(rng, gamma=None, lam=None, zero_values=False) -> RolloutSegment:
    t = int(rng.integers(2, 64))
    values = np.zeros(t + 1) if zero_values else rng.normal(size=t + 1)
    return RolloutSegment(
        rewards=rng.normal(size=t),
        values=values,
        dones=rng.random(t) < 0.15,
        gamma_discount=float(rng.uniform(0.0, 1.0)) if gamma is None else gamma,
        lambda_gae=float(rng.uniform(0.0, 1.0)) if lam is None else lam,
    )


def run_advantage_checks(n_trials: int = 200, seed: int = 0) -> list[CheckResult]:
    results = []

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        batch = normalize_advantages(compute_gae(_random_segment(rng)))
        if batch.sigma_a < SIGMA_FLOOR:
            worst = max(worst, float(np.abs(batch.advantages).max()))
        else:
            worst = max(
                worst,
                abs(float(batch.advantages.mean())),
                abs(float(batch.advantages.std()) - 1.0),
            )
    results.append(
        CheckResult(
            "advantage_normalized_moments",
            worst < MOMENT_TOL,
            f"max moment deviation {worst:.3e} over {n_trials} batches",
        )
    )

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        # All-done segments with zero values and a shared reward produce a
        # constant advantage batch, which must normalize to zeros.
        t = int(rng.integers(2, 32))
        seg = RolloutSegment(
            rewards=np.full(t, float(rng.normal())),
            values=np.zeros(t + 1),
            dones=np.ones(t, dtype=bool),
            gamma_discount=0.9,
            lambda_gae=0.9,
        )
        batch = normalize_advantages(compute_gae(seg))
        worst = max(worst, float(np.abs(batch.advantages).max()))
    results.append(
        CheckResult(
            "advantage_constant_batch_zeros",
            worst == 0.0,
            f"max |normalized| {worst:.3e} on constant batches",
        )
    )

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        seg = _random_segment(rng, lam=0.0)
        adv = compute_gae(seg).advantages
        nonterminal = 1.0 - seg.dones.astype(np.float64)
        td = seg.rewards + seg.gamma_discount * seg.values[1:] * nonterminal - seg.values[:-1]
        worst = max(worst, float(np.abs(adv - td).max()))
    results.append(
        CheckResult(
            "advantage_lambda0_is_td_residual",
            worst < ADVANTAGE_TOL,
            f"max abs diff {worst:.3e} vs one-step residuals",
        )
    )

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        seg = _random_segment(rng, gamma=1.0, lam=1.0, zero_values=True)
        adv = compute_gae(seg).advantages
        # Brute-force oracle: undiscounted reward suffix sums within episodes.
        expected = np.empty_like(adv)
        acc = 0.0
        for i in range(len(adv) - 1, -1, -1):
            acc = seg.rewards[i] + (0.0 if seg.dones[i] else acc)
            expected[i] = acc
        worst = max(worst, float(np.abs(adv - expected).max()))
    results.append(
        CheckResult(
            "advantage_suffix_sum_oracle",
            worst < ADVANTAGE_TOL,
            f"max abs diff {worst:.3e} vs suffix sums",
        )
    )
    return results


def run_all_checks(
    seed: int = 0,
    n_identity: int = 1000,
    n_gradient: int = 100,
    n_advantage: int = 200,
) -> list[CheckResult]:
    return (
        run_identity_checks(n_identity, seed)
        + run_gradient_checks(n_gradient, seed)
        + run_advantage_checks(n_advantage, seed)
    )

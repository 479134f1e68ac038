import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scope_lab import autodiff as ad
from scope_lab import losses
from scope_lab.exceptions import ConfigError, NumericError

LN2 = math.log(2.0)


def nodes(*vals):
    return [ad.DiffNode(v) for v in vals]


def rand_probs(rng, n):
    p = rng.dirichlet(np.ones(n))
    return [ad.DiffNode(v) for v in p], p


def grad_wrt(loss, leaves):
    table = ad.backward(loss)
    return [table.get(leaf, 0.0) for leaf in leaves]


# -- supervised family -------------------------------------------------------


def test_cross_entropy_values():
    assert losses.cross_entropy(nodes(0.5, 0.5), 0).value == -math.log(0.5)
    assert abs(losses.cross_entropy(nodes(1.0, 0.0), 0).value) < 1e-11
    assert losses.cross_entropy(nodes(0.5, 0.5), 0).value == pytest.approx(0.6931472, abs=5e-8)


def test_cross_entropy_clamps_zero_probability():
    loss = losses.cross_entropy(nodes(0.0, 1.0), 0)
    assert loss.value == -math.log(1e-12)


def test_cross_entropy_index_errors():
    with pytest.raises(IndexError):
        losses.cross_entropy(nodes(0.5, 0.5), 2)
    with pytest.raises(IndexError):
        losses.cross_entropy(nodes(0.5, 0.5), -1)


def test_focal_supervised_values():
    loss = losses.focal_supervised(nodes(0.5, 0.5), 0, gamma_focal=2.0)
    assert loss.value == pytest.approx(0.25 * LN2, rel=1e-15)
    assert loss.value == pytest.approx(0.1732868, abs=5e-8)
    with pytest.raises(ConfigError):
        losses.focal_supervised(nodes(0.5, 0.5), 0, gamma_focal=-0.1)


def test_focal_gamma0_is_cross_entropy_exactly():
    rng = np.random.default_rng(1)
    for _ in range(50):
        probs, _ = rand_probs(rng, 4)
        i = int(rng.integers(4))
        assert losses.focal_supervised(probs, i, 0.0).value == losses.cross_entropy(probs, i).value


def test_focal_gamma1_is_scope_supervised_exactly():
    rng = np.random.default_rng(2)
    for _ in range(50):
        probs, _ = rand_probs(rng, 5)
        i = int(rng.integers(5))
        assert losses.focal_supervised(probs, i, 1.0).value == losses.scope_supervised(probs, i).value


def test_scope_supervised_values():
    assert losses.scope_supervised(nodes(0.5, 0.5), 0).value == pytest.approx(0.5 * LN2, rel=1e-15)
    assert losses.scope_supervised(nodes(0.5, 0.5), 0).value == pytest.approx(0.3465736, abs=5e-8)
    assert abs(losses.scope_supervised(nodes(1.0, 0.0), 0).value) < 1e-11


# -- actor-critic family -----------------------------------------------------


def test_policy_loss_values():
    assert losses.policy_loss_ac(nodes(0.5, 0.5), 0, advantage=0.0).value == 0.0
    assert losses.policy_loss_ac(nodes(0.5, 0.5), 0, advantage=2.0).value == pytest.approx(
        2.0 * LN2, rel=1e-15
    )
    assert losses.policy_loss_ac(nodes(0.5, 0.5), 0, 2.0).value == pytest.approx(1.3862944, abs=5e-8)


def test_policy_loss_unit_advantage_is_cross_entropy():
    rng = np.random.default_rng(3)
    for _ in range(50):
        probs, _ = rand_probs(rng, 3)
        i = int(rng.integers(3))
        assert losses.policy_loss_ac(probs, i, 1.0).value == losses.cross_entropy(probs, i).value


def test_entropy_term_values():
    assert losses.entropy_term(nodes(0.5, 0.5)).value == pytest.approx(-LN2, rel=1e-15)
    assert abs(losses.entropy_term(nodes(1.0, 0.0)).value) < 1e-11


@given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=10_000))
def test_uniform_minimizes_entropy_term(n, seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n))
    uniform = losses.entropy_term(nodes(*([1.0 / n] * n))).value
    perturbed = losses.entropy_term(nodes(*p)).value
    if np.max(np.abs(p - 1.0 / n)) > 1e-4:
        assert uniform < perturbed
    else:
        assert uniform <= perturbed + 1e-12


def test_policy_entropy_ac_worked_example():
    loss = losses.policy_entropy_ac(nodes(0.5, 0.5), 0, advantage=1.0, alpha_entropy=0.01)
    assert loss.value == pytest.approx(LN2 - 0.01 * LN2, rel=1e-14)
    assert loss.value == pytest.approx(0.6862157, abs=5e-8)


def test_policy_entropy_ac_alpha0_is_policy_loss_exactly():
    rng = np.random.default_rng(4)
    for _ in range(50):
        probs, _ = rand_probs(rng, 4)
        i = int(rng.integers(4))
        a = float(rng.normal())
        assert (
            losses.policy_entropy_ac(probs, i, a, 0.0).value
            == losses.policy_loss_ac(probs, i, a).value
        )


def test_policy_entropy_supervised_values():
    loss = losses.policy_entropy_supervised(nodes(0.5, 0.5), 0, alpha_entropy=8e-6)
    assert loss.value == pytest.approx(LN2 * (1.0 - 8e-6), rel=1e-14)
    assert loss.value == pytest.approx(0.6931417, abs=1e-7)
    near_one = losses.policy_entropy_supervised(nodes(1.0, 0.0), 0, alpha_entropy=0.5)
    assert abs(near_one.value) < 1e-9
    rng = np.random.default_rng(5)
    probs, _ = rand_probs(rng, 3)
    assert (
        losses.policy_entropy_supervised(probs, 1, 0.0).value
        == losses.cross_entropy(probs, 1).value
    )


def test_focal_ac_values():
    loss = losses.focal_ac(nodes(0.5, 0.5), 0, advantage=2.0, alpha_focal=2.0, gamma_focal=2.0)
    assert loss.value == pytest.approx(LN2, rel=1e-15)
    assert loss.value == pytest.approx(0.6931472, abs=5e-8)
    with pytest.raises(ConfigError):
        losses.focal_ac(nodes(0.5, 0.5), 0, 1.0, 1.0, gamma_focal=-1.0)


def test_focal_ac_alpha0_strips_probability_from_scale():
    rng = np.random.default_rng(6)
    for _ in range(20):
        probs, pvals = rand_probs(rng, 4)
        i = int(rng.integers(4))
        a = float(rng.uniform(0.1, 3.0))
        g = float(rng.uniform(0.5, 3.0))
        expect = -(a**g) * math.log(min(max(pvals[i], 1e-12), 1.0 - 1e-12))
        assert losses.focal_ac(probs, i, a, 0.0, g).value == pytest.approx(expect, rel=1e-12)


def test_focal_ac_unit_case_is_scope_ac_exactly():
    rng = np.random.default_rng(7)
    for _ in range(50):
        probs, _ = rand_probs(rng, 3)
        i = int(rng.integers(3))
        assert (
            losses.focal_ac(probs, i, 1.0, 1.0, 1.0).value
            == losses.scope_ac(probs, i, 1.0, 1.0).value
        )


def test_focal_ac_negative_base_stays_real():
    # A below alpha*p makes the base negative; the odd power extension must
    # return a finite real for fractional gamma.
    loss = losses.focal_ac(nodes(0.9, 0.1), 0, advantage=0.1, alpha_focal=2.0, gamma_focal=1.5)
    assert math.isfinite(loss.value)


def test_scope_ac_worked_example():
    loss = losses.scope_ac(nodes(0.5, 0.5), 0, advantage=1.0, alpha_scope=0.01)
    assert loss.value == pytest.approx(0.995 * LN2, rel=1e-15)
    assert loss.value == pytest.approx(0.6896814, abs=5e-8)


def test_scope_ac_bias_term_identity():
    # Adding back the dropped sum over non-chosen classes recovers the
    # policy-and-entropy loss.
    rng = np.random.default_rng(8)
    for _ in range(100):
        probs, pvals = rand_probs(rng, 5)
        i = int(rng.integers(5))
        a = float(rng.normal())
        alpha = float(rng.uniform(0.001, 2.0))
        bias = sum(
            pvals[j] * math.log(min(max(pvals[j], 1e-12), 1.0 - 1e-12)) for j in range(5) if j != i
        )
        lhs = losses.scope_ac(probs, i, a, alpha).value + alpha * bias
        rhs = losses.policy_entropy_ac(probs, i, a, alpha).value
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_scope_ac_gradient_fades_at_certainty():
    # With alpha equal to the advantage, full certainty zeroes the factor:
    # both the loss and its logit gradients vanish.
    logits = [ad.DiffNode(20.0), ad.DiffNode(-20.0)]
    probs = ad.softmax(logits)
    loss = losses.scope_ac(probs, 0, advantage=1.0, alpha_scope=1.0)
    assert abs(loss.value) < 1e-8
    grads = grad_wrt(loss, logits)
    assert max(abs(g) for g in grads) < 1e-8


def test_value_loss_is_squared_error():
    v = ad.DiffNode(1.5)
    loss = losses.value_loss(v, 2.0)
    assert loss.value == pytest.approx(0.25, rel=1e-15)
    (g,) = grad_wrt(loss, [v])
    assert g == pytest.approx(-1.0, rel=1e-15)


# -- clipped-ratio family ----------------------------------------------------


def test_ppo_clip_g_branches():
    assert losses.ppo_clip_g(0.2, 1.0) == pytest.approx(1.2, rel=1e-15)
    assert losses.ppo_clip_g(0.2, -1.0) == pytest.approx(-0.8, rel=1e-15)
    assert losses.ppo_clip_g(0.3, 0.0) == 0.0
    with pytest.raises(ConfigError):
        losses.ppo_clip_g(0.0, 1.0)


def test_ppo_policy_worked_examples():
    assert losses.ppo_policy(nodes(0.6, 0.4), 0.5, 0, 1.0, 0.2).value == pytest.approx(
        -1.2, rel=1e-15
    )
    assert losses.ppo_policy(nodes(0.8, 0.2), 0.5, 0, 1.0, 0.2).value == pytest.approx(
        -1.2, rel=1e-15
    )
    # Unit ratio comes out exactly -A because p/p is exact division.
    assert losses.ppo_policy(nodes(0.37, 0.63), 0.37, 0, 1.0, 0.2).value == -1.0


def test_ppo_policy_rejects_unsupported_action():
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(NumericError):
            losses.ppo_policy(nodes(0.5, 0.5), bad, 0, 1.0, 0.2)


def test_ppo_clipped_branch_has_zero_gradient():
    probs = nodes(0.8, 0.2)
    loss = losses.ppo_policy(probs, 0.5, 0, advantage=1.0, epsilon_clip=0.2)
    grads = grad_wrt(loss, probs)
    assert grads == [0.0, 0.0]


def test_ppo_unclipped_branch_gradient_is_advantage_over_behavior():
    probs = nodes(0.55, 0.45)
    loss = losses.ppo_policy(probs, 0.5, 0, advantage=1.0, epsilon_clip=0.2)
    grads = grad_wrt(loss, probs)
    assert grads[0] == pytest.approx(-1.0 / 0.5, rel=1e-15)
    assert grads[1] == 0.0


def test_ppo_unclipped_active_matches_graph_branch():
    # The float predicate must agree with the branch the graph actually takes,
    # bit for bit, including ties (ties count as clipped).
    rng = np.random.default_rng(9)
    for _ in range(300):
        p_i = float(rng.uniform(0.01, 0.99))
        p_k = float(rng.uniform(0.01, 0.99))
        a = float(rng.normal())
        eps = 0.2
        probs = nodes(p_i, 1.0 - p_i)
        loss = losses.ppo_policy(probs, p_k, 0, a, eps)
        grads = grad_wrt(loss, probs)
        active = losses.ppo_unclipped_active(p_i, p_k, a, eps)
        ratio_grad_flows = grads[0] != 0.0
        if a != 0.0:
            assert active == ratio_grad_flows
    # Exact tie: min resolves to the clipped branch, predicate says clipped.
    assert not losses.ppo_unclipped_active(0.6, 0.5, 1.0, 0.2)


def test_ppo_policy_entropy_worked_example():
    loss = losses.ppo_policy_entropy(nodes(0.6, 0.4), 0.5, 0, 1.0, 0.2, alpha_entropy=0.01)
    expect = -1.2 + 0.01 * (0.6 * math.log(0.6) + 0.4 * math.log(0.4))
    assert loss.value == pytest.approx(expect, rel=1e-14)
    assert loss.value == pytest.approx(-1.2067301, abs=5e-8)


def test_ppo_entropy_vs_scope_bias_identity():
    rng = np.random.default_rng(10)
    for _ in range(100):
        probs, pvals = rand_probs(rng, 4)
        i = int(rng.integers(4))
        p_k = float(rng.uniform(0.05, 1.0))
        a = float(rng.normal())
        alpha = float(rng.uniform(0.001, 1.0))
        bias = sum(
            pvals[j] * math.log(min(max(pvals[j], 1e-12), 1.0 - 1e-12)) for j in range(4) if j != i
        )
        lhs = losses.ppo_policy_entropy(probs, p_k, i, a, 0.2, alpha).value
        rhs = losses.ppo_scope(probs, p_k, i, a, 0.2, alpha).value + alpha * bias
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_ppo_scope_worked_example():
    loss = losses.ppo_scope(nodes(0.6, 0.4), 0.5, 0, 1.0, 0.2, alpha_scope=0.01)
    assert loss.value == pytest.approx(-1.2 + 0.01 * 0.6 * math.log(0.6), rel=1e-14)
    assert loss.value == pytest.approx(-1.2030650, abs=5e-8)


def test_ppo_scope_alpha0_is_ppo_policy_exactly():
    rng = np.random.default_rng(11)
    for _ in range(50):
        probs, _ = rand_probs(rng, 3)
        i = int(rng.integers(3))
        p_k = float(rng.uniform(0.05, 1.0))
        a = float(rng.normal())
        assert (
            losses.ppo_scope(probs, p_k, i, a, 0.2, 0.0).value
            == losses.ppo_policy(probs, p_k, i, a, 0.2).value
        )


def test_ppo_scope_factored_form_on_unclipped_branch():
    rng = np.random.default_rng(12)
    hits = 0
    for _ in range(300):
        probs, pvals = rand_probs(rng, 3)
        i = int(rng.integers(3))
        p_i = float(pvals[i])
        p_k = float(rng.uniform(0.05, 1.0))
        a = float(rng.normal())
        alpha = float(rng.uniform(0.001, 1.0))
        if not losses.ppo_unclipped_active(p_i, p_k, a, 0.2):
            continue
        hits += 1
        whole = losses.ppo_scope(probs, p_k, i, a, 0.2, alpha).value
        factored = -(p_i / p_k) * losses.ppo_scope_factor(p_i, p_k, a, alpha)
        assert whole == pytest.approx(factored, abs=1e-12)
    assert hits > 50


def test_ppo_scope_factor_values():
    assert losses.ppo_scope_factor(0.3, 0.5, 2.5, 0.0) == 2.5
    factor = losses.ppo_scope_factor(0.9, 0.5, 1.0, 0.01)
    assert factor == pytest.approx(1.0 - 0.005 * math.log(0.9), rel=1e-14)
    assert factor == pytest.approx(1.0005268, abs=5e-8)


def test_ppo_scope_factor_decreases_with_certainty():
    grid = np.linspace(0.02, 0.98, 25)
    factors = [losses.ppo_scope_factor(p, 0.5, 1.0, 0.5) for p in grid]
    assert all(a > b for a, b in zip(factors, factors[1:]))


def test_gradient_balancing_scenarios():
    """The scope factor damps the ratio gradient in the three narrative cases:
    high certainty under positive advantage, main ahead of behavior under
    positive advantage, behavior ahead of main under negative advantage."""
    cases = [
        (0.9, 0.85, 1.0),
        (0.6, 0.55, 1.0),
        (0.3, 0.35, -1.0),
    ]
    for p_i, p_k, a in cases:
        assert losses.ppo_unclipped_active(p_i, p_k, a, 0.2)
        plain = nodes(p_i, 1.0 - p_i)
        g_plain = grad_wrt(losses.ppo_policy(plain, p_k, 0, a, 0.2), plain)[0]
        scoped = nodes(p_i, 1.0 - p_i)
        g_scope = grad_wrt(losses.ppo_scope(scoped, p_k, 0, a, 0.2, 0.01), scoped)[0]
        assert abs(g_scope) < abs(g_plain)


def test_ppo_focal_worked_example():
    # M = min(1.2, 1.2) = 1.2; -M*A + 2*alpha*M*p - alpha^2*p^2*log p.
    loss = losses.ppo_focal(nodes(0.6, 0.4), 0.5, 0, 1.0, 0.2, alpha_focal=2.0)
    expect = -1.2 + 2.0 * 2.0 * 1.2 * 0.6 - 4.0 * 0.36 * math.log(0.6)
    assert loss.value == pytest.approx(expect, rel=1e-14)
    assert loss.value == pytest.approx(2.4155888982230267, rel=1e-12)


def test_ppo_focal_degenerate_cases():
    rng = np.random.default_rng(13)
    for _ in range(30):
        probs, pvals = rand_probs(rng, 3)
        i = int(rng.integers(3))
        p_k = float(rng.uniform(0.05, 1.0))
        a = float(rng.normal())
        # alpha=0 leaves only the advantage-weighted min term.
        lhs = losses.ppo_focal(probs, p_k, i, a, 0.2, 0.0).value
        rhs = a * losses.ppo_policy(probs, p_k, i, a, 0.2).value
        assert lhs == pytest.approx(rhs, abs=1e-12)
    probs, pvals = rand_probs(rng, 3)
    p = float(pvals[1])
    lhs = losses.ppo_focal(probs, 0.4, 1, 0.0, 0.2, 2.0).value
    clamped = min(max(p, 1e-12), 1.0 - 1e-12)
    assert lhs == pytest.approx(-4.0 * p * p * math.log(clamped), rel=1e-12)


# -- vanishing-gradient contrast ----------------------------------------------


def test_focal_crushes_gradient_on_well_classified_examples():
    # The focal scale (1-p)^2 shrinks the pull on examples the model already
    # gets right; cross entropy keeps the full 1/p pull. Compare d/dp at the
    # chosen probability.
    for p in (0.9, 0.99):
        leaf_ce = nodes(p, 1.0 - p)
        g_ce = grad_wrt(losses.cross_entropy(leaf_ce, 0), leaf_ce)[0]
        leaf_f = nodes(p, 1.0 - p)
        g_f = grad_wrt(losses.focal_supervised(leaf_f, 0, 2.0), leaf_f)[0]
        assert abs(g_ce) == pytest.approx(1.0 / p, rel=1e-12)
        assert abs(g_f) < 0.1 * abs(g_ce)
    # On badly misclassified examples the two pulls are comparable.
    leaf_ce = nodes(0.05, 0.95)
    g_ce = grad_wrt(losses.cross_entropy(leaf_ce, 0), leaf_ce)[0]
    leaf_f = nodes(0.05, 0.95)
    g_f = grad_wrt(losses.focal_supervised(leaf_f, 0, 2.0), leaf_f)[0]
    assert abs(g_f) > 0.5 * abs(g_ce)


def test_loss_config_validation():
    cfg = losses.LossConfig()
    assert cfg.alpha_value == 0.5
    with pytest.raises(ConfigError):
        losses.LossConfig(alpha_scope=-0.01)
    with pytest.raises(ConfigError):
        losses.LossConfig(epsilon_clip=0.0)
    with pytest.raises(ConfigError):
        losses.LossConfig(gamma_focal=-2.0)

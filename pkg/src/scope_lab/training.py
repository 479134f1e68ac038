"""Training loops: advantage actor-critic, clipped-ratio updates, supervised epochs.

All three trainers share the same skeleton: a seeded generator drives network
initialization and every sampling decision, per-example losses come from one
dispatch table into `losses`, and each update backpropagates the mean loss of
a batch through shared gradient accumulators before a clipped optimizer step.
Identical configs therefore produce bit-identical metric streams on one
platform.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import losses
from .advantage import AdvantageBatch, RolloutSegment, compute_gae, normalize_advantages
from .autodiff import add_n, backward, softmax, softmax_values
from .envs import Transition
from .exceptions import ConfigError, ShapeError
from .losses import LossConfig, value_loss
from .nets import GradArrays, MlpParams, forward_mlp, forward_values, zero_grads
from .optim import clip_gradient_norm, make_optimizer

LOSS_KINDS = ("cross_entropy", "focal", "policy", "policy_entropy", "scope")
RL_LOSS_KINDS = ("focal", "policy", "policy_entropy", "scope")
SUPERVISED_LOSS_KINDS = ("cross_entropy", "focal", "policy_entropy", "scope")
ALGOS = ("a2c", "ppo", "supervised")
LR_SCHEDULES = ("constant", "cosine_decay_to_zero")
OPTIMIZERS = ("sgd", "adam")
ACTIVATIONS = ("tanh", "relu")


@dataclass
class TrainConfig:
    """One trial's worth of knobs, shared across the three algorithms.

    `batch_size` is the minibatch size for ppo and supervised runs; a2c
    always updates on the full rollout. `epochs_per_update` only applies to
    ppo, `epochs` only to supervised, and gamma/lambda are ignored by
    supervised training (each example is a one-step episode). lr is allowed
    to be zero, in which case updates are skipped and parameters stay at
    their initialization.
    """

    loss_kind: str = "policy"
    algo: str = "a2c"
    loss: LossConfig = field(default_factory=LossConfig)
    lr: float = 1e-4
    optimizer: str = "adam"
    lr_schedule: str = "constant"
    gamma_discount: float = 0.999
    lambda_gae: float = 0.95
    rollout_length: int = 256
    batch_size: int = 64
    total_steps: int = 50_000
    epochs_per_update: int = 4
    epochs: int = 100
    hidden_sizes: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    grad_clip: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss_kind {self.loss_kind!r}; expected one of {LOSS_KINDS}")
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; expected one of {ALGOS}")
        if not isinstance(self.loss, LossConfig):
            raise ConfigError(f"loss must be a LossConfig, got {type(self.loss).__name__}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not (isinstance(self.lr, (int, float)) and math.isfinite(self.lr) and self.lr >= 0.0):
            raise ConfigError(f"lr must be a finite non-negative real, got {self.lr!r}")
        self.lr = float(self.lr)
        if not 0.0 <= self.gamma_discount <= 1.0:
            raise ConfigError(f"gamma_discount must lie in [0, 1], got {self.gamma_discount}")
        if not 0.0 <= self.lambda_gae <= 1.0:
            raise ConfigError(f"lambda_gae must lie in [0, 1], got {self.lambda_gae}")
        # Advantage normalization needs at least two samples per update.
        if self.rollout_length < 2:
            raise ConfigError(f"rollout_length must be at least 2, got {self.rollout_length}")
        for name in ("batch_size", "total_steps", "epochs_per_update", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if any(h < 1 for h in self.hidden_sizes):
            raise ConfigError(f"hidden sizes must be positive, got {self.hidden_sizes}")
        if not self.grad_clip > 0.0:
            raise ConfigError(f"grad_clip must be positive, got {self.grad_clip}")
        self.seed = int(self.seed)


def config_hash(config: TrainConfig) -> str:
    """Short stable digest of a config, stored in checkpoints."""
    payload = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class MetricsRow:
    """One logged update (RL) or epoch (supervised); None means not applicable."""

    step: int
    episode_return_mean: float | None = None
    policy_entropy: float | None = None
    loss_value: float | None = None
    outcome_histogram: dict[str, int] | None = None
    val_accuracy: float | None = None


@dataclass
class TrainResult:
    rows: list[MetricsRow]
    params: MlpParams
    best_params: MlpParams | None = None
    best_val_accuracy: float | None = None
    best_epoch: int | None = None


# -- loss dispatch -----------------------------------------------------------


def build_policy_loss(
    algo: str,
    loss_kind: str,
    probs,
    index: int,
    advantage: float,
    behavior_prob: float,
    loss_cfg: LossConfig,
):
    """Route one example to its loss; the single point trainers go through."""
    if algo == "supervised":
        if loss_kind == "cross_entropy":
            return losses.cross_entropy(probs, index)
        if loss_kind == "focal":
            return losses.focal_supervised(probs, index, loss_cfg.gamma_focal)
        if loss_kind == "policy_entropy":
            return losses.policy_entropy_supervised(probs, index, loss_cfg.alpha_entropy)
        if loss_kind == "scope":
            return losses.scope_supervised(probs, index)
        raise ConfigError(f"loss_kind {loss_kind!r} has no supervised form")
    if algo == "a2c":
        if loss_kind == "policy":
            return losses.policy_loss_ac(probs, index, advantage)
        if loss_kind == "policy_entropy":
            return losses.policy_entropy_ac(probs, index, advantage, loss_cfg.alpha_entropy)
        if loss_kind == "scope":
            return losses.scope_ac(probs, index, advantage, loss_cfg.alpha_scope)
        if loss_kind == "focal":
            return losses.focal_ac(
                probs, index, advantage, loss_cfg.alpha_focal, loss_cfg.gamma_focal
            )
        raise ConfigError(f"loss_kind {loss_kind!r} is supervised-only; a2c cannot use it")
    if algo == "ppo":
        eps = loss_cfg.epsilon_clip
        if loss_kind == "policy":
            return losses.ppo_policy(probs, behavior_prob, index, advantage, eps)
        if loss_kind == "policy_entropy":
            return losses.ppo_policy_entropy(
                probs, behavior_prob, index, advantage, eps, loss_cfg.alpha_entropy
            )
        if loss_kind == "scope":
            return losses.ppo_scope(
                probs, behavior_prob, index, advantage, eps, loss_cfg.alpha_scope
            )
        if loss_kind == "focal":
            return losses.ppo_focal(
                probs, behavior_prob, index, advantage, eps, loss_cfg.alpha_focal
            )
        raise ConfigError(f"loss_kind {loss_kind!r} is supervised-only; ppo cannot use it")
    raise ConfigError(f"unknown algo {algo!r}")


def policy_entropy_metric(prob_rows) -> float:
    """Mean over states of -sum_j p_j log p_j."""
    rows = list(prob_rows)
    if not rows:
        raise ConfigError("entropy metric needs at least one distribution")
    total = 0.0
    for row in rows:
        p = np.asarray(row, dtype=np.float64)
        total += float(-(p * np.log(np.clip(p, losses.PROB_CLAMP_LO, None))).sum())
    return total / len(rows)


# -- rollout collection ------------------------------------------------------


@dataclass
class Rollout:
    """A fixed-length slice of experience plus bookkeeping for GAE.

    `bootstrap_value` is the value estimate of the state following the last
    transition (0 if that transition ended its episode); `episode_returns`
    holds the undiscounted returns of episodes that finished inside this
    slice.
    """

    transitions: list[Transition]
    bootstrap_value: float
    mean_entropy: float
    episode_returns: list[float]


class RolloutCollector:
    """On-policy collector that persists episode state across slices.

    Episodes routinely straddle rollout boundaries; the collector carries the
    current observation and the running episode return from one `collect`
    call to the next, auto-resetting the environment on done.
    """

    def __init__(self, env, rng: np.random.Generator):
        self.env = env
        self.rng = rng
        self._obs: np.ndarray | None = None
        self._ep_return = 0.0

    def collect(self, params: MlpParams, n_steps: int) -> Rollout:
        if params.out_dim != self.env.n_actions + 1:
            raise ShapeError(
                f"network has {params.out_dim - 1} action logits for "
                f"{self.env.n_actions} actions"
            )
        if n_steps < 1:
            raise ConfigError(f"n_steps must be at least 1, got {n_steps}")
        transitions: list[Transition] = []
        prob_rows: list[np.ndarray] = []
        episode_returns: list[float] = []
        for _ in range(n_steps):
            if self._obs is None:
                self._obs = self.env.reset().observation
                self._ep_return = 0.0
            obs = self._obs
            logits, value = forward_values(params, obs)
            p = softmax_values(logits)
            action = int(min(np.searchsorted(np.cumsum(p), self.rng.random(), side="right"),
                             p.size - 1))
            state, reward, done = self.env.step(action)
            transitions.append(
                Transition(obs, action, float(reward), bool(done), float(p[action]), value)
            )
            prob_rows.append(p)
            self._ep_return += reward
            if done:
                episode_returns.append(self._ep_return)
                self._obs = None
            else:
                self._obs = state.observation
        if transitions[-1].done:
            bootstrap = 0.0
        else:
            _, bootstrap = forward_values(params, self._obs)
        return Rollout(transitions, bootstrap, policy_entropy_metric(prob_rows), episode_returns)


def collect_rollout(env, params: MlpParams, rollout_length: int, rng) -> list[Transition]:
    """One-shot collection of exactly `rollout_length` transitions."""
    return RolloutCollector(env, rng).collect(params, rollout_length).transitions


# -- shared update plumbing --------------------------------------------------


def _mean_or_none(xs: Sequence[float]) -> float | None:
    return float(np.mean(xs)) if len(xs) else None


def _schedule_lr(config: TrainConfig, i: int, total: int) -> float:
    if config.lr_schedule == "constant" or total < 2:
        return config.lr
    return config.lr * 0.5 * (1.0 + math.cos(math.pi * i / (total - 1)))


def _advantage_batch(roll: Rollout, config: TrainConfig) -> AdvantageBatch:
    segment = RolloutSegment(
        rewards=np.array([tr.reward for tr in roll.transitions]),
        values=np.array([tr.value_estimate for tr in roll.transitions] + [roll.bootstrap_value]),
        dones=np.array([tr.done for tr in roll.transitions]),
        gamma_discount=config.gamma_discount,
        lambda_gae=config.lambda_gae,
    )
    return normalize_advantages(compute_gae(segment))


def _apply_batch(
    params: MlpParams,
    grads: GradArrays,
    config: TrainConfig,
    opt,
    lr: float,
    examples,
    make_loss,
) -> float:
    """Mean loss over `examples`, one backward pass, one clipped step.

    `make_loss` maps one example to its total per-example loss node. When the
    effective learning rate is zero the backward pass is skipped entirely:
    the loss value is still logged but the parameters must not move.
    """
    nodes = [make_loss(ex) for ex in examples]
    mean_loss = add_n(nodes) * (1.0 / len(nodes))
    if opt is not None and lr > 0.0:
        opt.lr = lr
        backward(mean_loss)
        clip_gradient_norm(grads, config.grad_clip)
        opt.step(params, grads)
    return float(mean_loss.value)


def _init_run(config: TrainConfig, env):
    rng = np.random.default_rng(config.seed)
    layer_sizes = [env.obs_dim, *config.hidden_sizes, env.n_actions + 1]
    params = MlpParams.init(layer_sizes, rng, config.activation)
    opt = make_optimizer(config.optimizer, config.lr) if config.lr > 0.0 else None
    return rng, params, opt


def _require_rl_kind(config: TrainConfig, algo: str) -> None:
    if config.algo != algo:
        raise ConfigError(f"config.algo is {config.algo!r}, expected {algo!r}")
    if config.loss_kind not in RL_LOSS_KINDS:
        raise ConfigError(
            f"loss_kind {config.loss_kind!r} is supervised-only; "
            f"{algo} accepts {RL_LOSS_KINDS}"
        )


# -- actor-critic ------------------------------------------------------------


def train_a2c(config: TrainConfig, env) -> TrainResult:
    """On-policy actor-critic: one full-batch update per rollout.

    Each update collects `rollout_length` steps, turns them into normalized
    advantage estimates, and descends the mean of per-transition policy loss
    plus alpha_value times the squared value error.
    """
    _require_rl_kind(config, "a2c")
    rng, params, opt = _init_run(config, env)
    collector = RolloutCollector(env, rng)
    grads = zero_grads(params)
    n_updates = config.total_steps // config.rollout_length
    if n_updates < 1:
        raise ConfigError("total_steps is smaller than a single rollout")
    rows: list[MetricsRow] = []
    for u in range(n_updates):
        roll = collector.collect(params, config.rollout_length)
        batch = _advantage_batch(roll, config)
        pairs = list(zip(roll.transitions, range(len(roll.transitions))))

        def make_loss(pair):
            tr, i = pair
            logits, value = forward_mlp(params, tr.observation, grads)
            probs = softmax(logits)
            pol = build_policy_loss(
                "a2c", config.loss_kind, probs, tr.action,
                float(batch.advantages[i]), tr.behavior_prob, config.loss,
            )
            return pol + config.loss.alpha_value * value_loss(value, float(batch.returns[i]))

        lr = _schedule_lr(config, u, n_updates)
        loss_val = _apply_batch(params, grads, config, opt, lr, pairs, make_loss)
        rows.append(
            MetricsRow(
                step=(u + 1) * config.rollout_length,
                episode_return_mean=_mean_or_none(roll.episode_returns),
                policy_entropy=roll.mean_entropy,
                loss_value=loss_val,
                outcome_histogram=env.transition_histogram(roll.transitions),
            )
        )
    return TrainResult(rows=rows, params=params)


# -- clipped-ratio training --------------------------------------------------


@dataclass(slots=True)
class ClipEvent:
    """Branch bookkeeping for one transition in one minibatch pass."""

    transition_index: int
    p_i: float
    behavior_prob: float
    advantage: float
    clipped: bool


@dataclass(slots=True)
class MinibatchProbe:
    update: int
    epoch: int
    minibatch: int
    events: list[ClipEvent]


def train_ppo(
    config: TrainConfig,
    env,
    probe: Callable[[MinibatchProbe], None] | None = None,
) -> TrainResult:
    """Clipped-ratio training against a frozen behavior snapshot.

    Each rollout is reused for `epochs_per_update` shuffled minibatch epochs;
    the per-transition behavior probabilities recorded at collection time
    stay fixed, so the probability ratio starts at exactly 1 and the clip
    only engages once the policy has moved. Advantages are normalized once
    per update batch, not per minibatch. `probe`, when given, receives the
    clip branch taken for every transition of every minibatch.
    """
    _require_rl_kind(config, "ppo")
    rng, params, opt = _init_run(config, env)
    collector = RolloutCollector(env, rng)
    grads = zero_grads(params)
    n_updates = config.total_steps // config.rollout_length
    if n_updates < 1:
        raise ConfigError("total_steps is smaller than a single rollout")
    eps = config.loss.epsilon_clip
    rows: list[MetricsRow] = []
    for u in range(n_updates):
        roll = collector.collect(params, config.rollout_length)
        batch = _advantage_batch(roll, config)
        t = len(roll.transitions)
        lr = _schedule_lr(config, u, n_updates)
        loss_sum = 0.0
        n_batches = 0
        for e in range(config.epochs_per_update):
            perm = rng.permutation(t)
            for m, start in enumerate(range(0, t, config.batch_size)):
                idxs = perm[start : start + config.batch_size]
                events: list[ClipEvent] = []

                def make_loss(i):
                    tr = roll.transitions[i]
                    adv = float(batch.advantages[i])
                    logits, value = forward_mlp(params, tr.observation, grads)
                    probs = softmax(logits)
                    pol = build_policy_loss(
                        "ppo", config.loss_kind, probs, tr.action,
                        adv, tr.behavior_prob, config.loss,
                    )
                    p_i = float(probs[tr.action].value)
                    events.append(
                        ClipEvent(
                            transition_index=int(i),
                            p_i=p_i,
                            behavior_prob=tr.behavior_prob,
                            advantage=adv,
                            clipped=not losses.ppo_unclipped_active(
                                p_i, tr.behavior_prob, adv, eps
                            ),
                        )
                    )
                    return pol + config.loss.alpha_value * value_loss(
                        value, float(batch.returns[i])
                    )

                loss_sum += _apply_batch(params, grads, config, opt, lr, idxs, make_loss)
                n_batches += 1
                if probe is not None:
                    probe(MinibatchProbe(update=u, epoch=e, minibatch=m, events=events))
        rows.append(
            MetricsRow(
                step=(u + 1) * config.rollout_length,
                episode_return_mean=_mean_or_none(roll.episode_returns),
                policy_entropy=roll.mean_entropy,
                loss_value=loss_sum / n_batches,
                outcome_histogram=env.transition_histogram(roll.transitions),
            )
        )
    return TrainResult(rows=rows, params=params)


# -- supervised --------------------------------------------------------------


def evaluate_classifier(params: MlpParams, xs: np.ndarray, ys: np.ndarray):
    """Accuracy, mean prediction entropy, and argmax predictions on a split."""
    if len(xs) == 0:
        raise ConfigError("cannot evaluate on an empty split")
    preds = np.empty(len(xs), dtype=np.int64)
    prob_rows = []
    for i, x in enumerate(xs):
        logits, _ = forward_values(params, x)
        preds[i] = int(np.argmax(logits))
        prob_rows.append(softmax_values(logits))
    accuracy = float((preds == np.asarray(ys)).mean())
    return accuracy, policy_entropy_metric(prob_rows), preds


def train_supervised(config: TrainConfig, dataset) -> TrainResult:
    """Minibatch epochs over the train split, keeping the best-validation net.

    The label plays the role of a chosen action with unit advantage, so the
    same dispatch and network code as the RL loops applies; the value head is
    simply never part of the loss. Logged rows are per epoch (step = epoch
    number); the retained checkpoint is the earliest epoch achieving the
    highest validation accuracy.
    """
    if config.algo != "supervised":
        raise ConfigError(f"config.algo is {config.algo!r}, expected 'supervised'")
    if config.loss_kind not in SUPERVISED_LOSS_KINDS:
        raise ConfigError(
            f"loss_kind {config.loss_kind!r} is RL-only; "
            f"supervised accepts {SUPERVISED_LOSS_KINDS}"
        )
    rng = np.random.default_rng(config.seed)
    layer_sizes = [dataset.feature_dim, *config.hidden_sizes, dataset.num_classes + 1]
    params = MlpParams.init(layer_sizes, rng, config.activation)
    opt = make_optimizer(config.optimizer, config.lr) if config.lr > 0.0 else None
    grads = zero_grads(params)
    n = len(dataset.y_train)
    rows: list[MetricsRow] = []
    best_acc = -1.0
    best_params: MlpParams | None = None
    best_epoch: int | None = None
    for e in range(config.epochs):
        lr = _schedule_lr(config, e, config.epochs)
        perm = rng.permutation(n)
        loss_total = 0.0
        for start in range(0, n, config.batch_size):
            idxs = perm[start : start + config.batch_size]

            def make_loss(i):
                logits, _ = forward_mlp(params, dataset.x_train[i], grads)
                probs = softmax(logits)
                return build_policy_loss(
                    "supervised", config.loss_kind, probs,
                    int(dataset.y_train[i]), 1.0, 1.0, config.loss,
                )

            loss_total += len(idxs) * _apply_batch(
                params, grads, config, opt, lr, idxs, make_loss
            )
        val_acc, val_entropy, _ = evaluate_classifier(params, dataset.x_val, dataset.y_val)
        rows.append(
            MetricsRow(
                step=e + 1,
                policy_entropy=val_entropy,
                loss_value=loss_total / n,
                val_accuracy=val_acc,
            )
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = params.copy()
            best_epoch = e + 1
    return TrainResult(
        rows=rows,
        params=params,
        best_params=best_params,
        best_val_accuracy=best_acc,
        best_epoch=best_epoch,
    )


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(path, params: MlpParams, config: TrainConfig) -> None:
    """JSON dump of the parameters, tagged with a hash of the config."""
    doc = {
        "version": 1,
        "config_hash": config_hash(config),
        "activation": params.activation,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path) -> tuple[MlpParams, str]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != 1:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')!r}")
    params = MlpParams(
        [np.asarray(w, dtype=np.float64) for w in doc["weights"]],
        [np.asarray(b, dtype=np.float64) for b in doc["biases"]],
        doc["activation"],
    )
    return params, doc["config_hash"]

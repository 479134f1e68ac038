"""Desk-scale environments and the synthetic imbalanced dataset.

All three environments speak the same tiny protocol: `reset() -> EnvState`,
`step(action) -> (EnvState, reward, done)`, plus `n_actions` / `obs_dim`
attributes so trainers can size their networks. Stepping a finished episode
without a reset raises EnvUsageError.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, EnvUsageError, ShapeError


@dataclass(slots=True)
class EnvState:
    observation: np.ndarray
    terminal: bool = False


@dataclass(slots=True)
class Transition:
    """One step of experience as recorded at collection time.

    `behavior_prob` is the acting policy's probability of the sampled action
    and `value_estimate` its value-head output, both frozen at collection so
    later updates can compare against the exact numbers that produced the
    data.
    """

    observation: np.ndarray
    action: int
    reward: float
    done: bool
    behavior_prob: float
    value_estimate: float


class BinaryMaze:
    """One forced binary choice per episode.

    From the single starting junction, action 0 walks to the low-reward
    terminal (the easy, common outcome) and action 1 to the high-reward one.
    Episodes always last exactly one step, which makes the environment a
    microscope for how a loss trades off exploiting the known-good arm
    against keeping the other arm alive.
    """

    n_actions = 2
    obs_dim = 1
    outcomes = ("cat", "dog")
    dog_action = 1

    def __init__(self, reward_cat: float = 0.5, reward_dog: float = 1.0):
        if not reward_dog > reward_cat:
            raise ConfigError(
                f"reward_dog must exceed reward_cat, got {reward_dog} <= {reward_cat}"
            )
        self.reward_cat = float(reward_cat)
        self.reward_dog = float(reward_dog)
        self._needs_reset = True

    def reset(self) -> EnvState:
        self._needs_reset = False
        return EnvState(np.ones(1))

    def step(self, action: int) -> tuple[EnvState, float, bool]:
        if self._needs_reset:
            raise EnvUsageError("episode finished; call reset() before step()")
        if action not in (0, 1):
            raise ConfigError(f"action must be 0 or 1, got {action}")
        self._needs_reset = True
        reward = self.reward_dog if action == self.dog_action else self.reward_cat
        return EnvState(np.zeros(1), terminal=True), reward, True

    def transition_histogram(self, transitions) -> dict[str, int]:
        counts = {"cat": 0, "dog": 0}
        for tr in transitions:
            if tr.done:
                counts[self.outcomes[tr.action]] += 1
        return counts


class SparseChain:
    """A 1-d corridor with a single rewarding state at the far end.

    The agent starts at position 0; action 1 moves right, action 0 moves
    left (bumping against the wall at 0). Every step costs `step_penalty`;
    arriving at position n-1 additionally pays `goal_reward` and ends the
    episode. Episodes are cut off after `max_steps` steps. Observations are
    one-hot positions.
    """

    def __init__(
        self,
        n: int = 10,
        step_penalty: float = -0.01,
        goal_reward: float = 1.0,
        max_steps: int = 50,
    ):
        if n < 3:
            raise ConfigError(f"chain length must be at least 3, got {n}")
        if step_penalty > 0.0:
            raise ConfigError(f"step_penalty must be <= 0, got {step_penalty}")
        if goal_reward <= 0.0:
            raise ConfigError(f"goal_reward must be positive, got {goal_reward}")
        if max_steps < 1:
            raise ConfigError(f"max_steps must be at least 1, got {max_steps}")
        self.n = int(n)
        self.step_penalty = float(step_penalty)
        self.goal_reward = float(goal_reward)
        self.max_steps = int(max_steps)
        self.n_actions = 2
        self.obs_dim = self.n
        self._pos = 0
        self._steps = 0
        self._needs_reset = True

    def _obs(self) -> np.ndarray:
        obs = np.zeros(self.n)
        obs[self._pos] = 1.0
        return obs

    def reset(self) -> EnvState:
        self._pos = 0
        self._steps = 0
        self._needs_reset = False
        return EnvState(self._obs())

    def step(self, action: int) -> tuple[EnvState, float, bool]:
        if self._needs_reset:
            raise EnvUsageError("episode finished; call reset() before step()")
        if action not in (0, 1):
            raise ConfigError(f"action must be 0 or 1, got {action}")
        self._steps += 1
        self._pos = min(self.n - 1, self._pos + 1) if action == 1 else max(0, self._pos - 1)
        reward = self.step_penalty
        done = False
        if self._pos == self.n - 1:
            reward += self.goal_reward
            done = True
        elif self._steps >= self.max_steps:
            done = True
        self._needs_reset = done
        return EnvState(self._obs(), terminal=done), reward, done

    def transition_histogram(self, transitions) -> dict[str, int]:
        counts = {f"state_{i}": 0 for i in range(self.n)}
        for tr in transitions:
            counts[f"state_{int(np.argmax(tr.observation))}"] += 1
        return counts


# -- synthetic imbalanced dataset -------------------------------------------


def _default_counts() -> tuple[int, ...]:
    # Geometric ramp from 80 to 827 examples across ten classes.
    return tuple(round(80.0 * (827.0 / 80.0) ** (c / 9.0)) for c in range(10))


@dataclass
class DatasetSpec:
    """Recipe for a Gaussian-cluster classification problem.

    `class_separation` fixes the smallest distance between any two cluster
    means; with `noise_sigma` of comparable size the clusters overlap and the
    classes become disparately difficult, which is the regime the loss
    comparisons care about.
    """

    num_classes: int = 10
    class_counts: tuple[int, ...] = field(default_factory=_default_counts)
    feature_dim: int = 16
    class_separation: float = 2.0
    noise_sigma: float = 1.5
    seed: int = 7

    def __post_init__(self):
        self.class_counts = tuple(int(c) for c in self.class_counts)
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        if len(self.class_counts) != self.num_classes:
            raise ConfigError(
                f"class_counts has {len(self.class_counts)} entries for "
                f"{self.num_classes} classes"
            )
        if any(c < 1 for c in self.class_counts):
            raise ConfigError("every class needs at least one example")
        if self.feature_dim < 1:
            raise ConfigError(f"feature_dim must be positive, got {self.feature_dim}")
        if self.class_separation <= 0.0:
            raise ConfigError(f"class_separation must be positive, got {self.class_separation}")
        if self.noise_sigma <= 0.0:
            raise ConfigError(f"noise_sigma must be positive, got {self.noise_sigma}")
        # Crude placement-capacity check: a d-dimensional box only fits so
        # many pairwise-separated means.
        if self.num_classes > 4**self.feature_dim:
            raise ConfigError(
                f"feature_dim {self.feature_dim} is too small to place "
                f"{self.num_classes} separated class means"
            )


@dataclass
class Dataset:
    spec: DatasetSpec
    class_means: np.ndarray
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    @property
    def feature_dim(self) -> int:
        return self.spec.feature_dim

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Sample the dataset and split it 70/15/15, stratified by class.

    Means come from a standard-normal cloud rescaled so the closest pair sits
    exactly `class_separation` apart. Everything is driven by `spec.seed`, so
    equal specs produce bit-identical datasets.
    """
    rng = np.random.default_rng(spec.seed)
    c, d = spec.num_classes, spec.feature_dim
    raw = rng.standard_normal((c, d))
    diffs = raw[:, None, :] - raw[None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=2))
    min_dist = float(dists[np.triu_indices(c, k=1)].min())
    if min_dist == 0.0:
        raise ConfigError("degenerate mean placement (coincident draws)")
    means = raw * (spec.class_separation / min_dist)

    xs_train, ys_train, xs_val, ys_val, xs_test, ys_test = [], [], [], [], [], []
    for label, count in enumerate(spec.class_counts):
        x = means[label] + spec.noise_sigma * rng.standard_normal((count, d))
        n_val = int(count * 0.15)
        n_test = int(count * 0.15)
        n_train = count - n_val - n_test
        xs_train.append(x[:n_train])
        xs_val.append(x[n_train : n_train + n_val])
        xs_test.append(x[n_train + n_val :])
        ys_train.append(np.full(n_train, label, dtype=np.int64))
        ys_val.append(np.full(n_val, label, dtype=np.int64))
        ys_test.append(np.full(n_test, label, dtype=np.int64))
    return Dataset(
        spec=spec,
        class_means=means,
        x_train=np.concatenate(xs_train),
        y_train=np.concatenate(ys_train),
        x_val=np.concatenate(xs_val),
        y_val=np.concatenate(ys_val),
        x_test=np.concatenate(xs_test),
        y_test=np.concatenate(ys_test),
    )


def export_dataset_csv(features: np.ndarray, labels: np.ndarray, path) -> None:
    """Write features and labels as CSV with header f0..f{d-1},label."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ShapeError(f"features {features.shape} do not match labels {labels.shape}")
    d = features.shape[1]
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(d)] + ["label"])
        for row, label in zip(features, labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


class ClassificationMdp:
    """A dataset reframed as a one-step episodic decision problem.

    Each reset deals the next training example (seeded shuffle, reshuffled
    every epoch); the action is a class guess and the reward is 1 for the
    correct label, 0 otherwise. The action space is discrete, the reward
    function is known, and every state is terminal after one choice.
    """

    def __init__(self, dataset: Dataset, seed: int = 0):
        self.dataset = dataset
        self.n_actions = dataset.num_classes
        self.obs_dim = dataset.feature_dim
        self._rng = np.random.default_rng(seed)
        self._order = self._rng.permutation(len(dataset.y_train))
        self._cursor = 0
        self._current = -1
        self._needs_reset = True

    @property
    def current_label(self) -> int:
        """Label of the example currently on the table (diagnostic)."""
        if self._current < 0:
            raise EnvUsageError("no current example; call reset() first")
        return int(self.dataset.y_train[self._current])

    def reset(self) -> EnvState:
        if self._cursor >= len(self._order):
            self._order = self._rng.permutation(len(self._order))
            self._cursor = 0
        self._current = int(self._order[self._cursor])
        self._cursor += 1
        self._needs_reset = False
        return EnvState(self.dataset.x_train[self._current].copy())

    def step(self, action: int) -> tuple[EnvState, float, bool]:
        if self._needs_reset:
            raise EnvUsageError("episode finished; call reset() before step()")
        if not 0 <= action < self.n_actions:
            raise ConfigError(f"action {action} out of range for {self.n_actions} classes")
        self._needs_reset = True
        reward = 1.0 if action == self.current_label else 0.0
        return EnvState(np.zeros(self.obs_dim), terminal=True), reward, True

    def transition_histogram(self, transitions) -> dict[str, int]:
        counts = {f"action_{a}": 0 for a in range(self.n_actions)}
        for tr in transitions:
            counts[f"action_{tr.action}"] += 1
        return counts


def make_binary_maze(reward_cat: float = 0.5, reward_dog: float = 1.0) -> BinaryMaze:
    return BinaryMaze(reward_cat, reward_dog)


def make_sparse_chain(
    n: int = 10,
    step_penalty: float = -0.01,
    goal_reward: float = 1.0,
    max_steps: int = 50,
) -> SparseChain:
    return SparseChain(n, step_penalty, goal_reward, max_steps)


def buffer_class_histogram(transitions, env) -> dict[str, int]:
    """Per-outcome counts of a transition buffer, keyed by the environment."""
    return env.transition_histogram(transitions)

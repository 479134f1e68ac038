"""Environment contracts, dataset generation, and buffer histograms."""

import numpy as np
import pytest

from scope_lab.envs import (
    BinaryMaze,
    ClassificationMdp,
    DatasetSpec,
    SparseChain,
    Transition,
    buffer_class_histogram,
    export_dataset_csv,
    generate_dataset,
    make_binary_maze,
    make_sparse_chain,
)
from scope_lab.exceptions import ConfigError, EnvUsageError, ShapeError


def _transition(observation, action, reward=0.0, done=True):
    return Transition(
        observation=np.asarray(observation, dtype=np.float64),
        action=action,
        reward=reward,
        done=done,
        behavior_prob=0.5,
        value_estimate=0.0,
    )


# -- binary maze -------------------------------------------------------------


def test_maze_episode_contract():
    env = make_binary_maze()
    state = env.reset()
    assert state.observation.shape == (1,)
    assert state.observation[0] == 1.0
    assert not state.terminal

    nxt, reward, done = env.step(1)
    assert done and nxt.terminal
    assert reward == env.reward_dog
    with pytest.raises(EnvUsageError):
        env.step(0)

    env.reset()
    _, reward, done = env.step(0)
    assert done and reward == env.reward_cat


def test_maze_rejects_bad_config_and_action():
    with pytest.raises(ConfigError):
        BinaryMaze(reward_cat=1.0, reward_dog=1.0)
    with pytest.raises(ConfigError):
        BinaryMaze(reward_cat=2.0, reward_dog=1.0)
    env = make_binary_maze()
    env.reset()
    with pytest.raises(ConfigError):
        env.step(2)


def test_maze_requires_reset_before_first_step():
    env = make_binary_maze()
    with pytest.raises(EnvUsageError):
        env.step(1)


def test_maze_histogram_alternating_and_constant():
    env = make_binary_maze()
    alternating = [_transition([1.0], a % 2) for a in range(10)]
    assert buffer_class_histogram(alternating, env) == {"cat": 5, "dog": 5}

    all_dog = [_transition([1.0], 1) for _ in range(10)]
    assert buffer_class_histogram(all_dog, env) == {"cat": 0, "dog": 10}

    # Only completed episodes count as outcomes.
    unfinished = [_transition([1.0], 1, done=False)]
    assert buffer_class_histogram(unfinished, env) == {"cat": 0, "dog": 0}


def test_maze_uniform_policy_is_balanced():
    env = make_binary_maze()
    rng = np.random.default_rng(11)
    episodes = 2000
    dogs = 0
    for _ in range(episodes):
        env.reset()
        action = int(rng.integers(2))
        env.step(action)
        dogs += action
    # Fair coin: stay within 3 binomial sigmas of one half.
    sigma = 0.5 / np.sqrt(episodes)
    assert abs(dogs / episodes - 0.5) <= 3.0 * sigma


# -- sparse chain ------------------------------------------------------------


def test_chain_always_right_reaches_goal():
    env = make_sparse_chain(n=5, step_penalty=-0.01, goal_reward=1.0, max_steps=20)
    state = env.reset()
    assert state.observation.tolist() == [1.0, 0.0, 0.0, 0.0, 0.0]

    total = 0.0
    for step in range(1, 5):
        state, reward, done = env.step(1)
        total += reward
        assert done == (step == 4)
    assert state.observation.tolist() == [0.0, 0.0, 0.0, 0.0, 1.0]
    assert state.terminal
    assert total == pytest.approx(4 * -0.01 + 1.0, rel=1e-15)


def test_chain_always_left_truncates():
    env = make_sparse_chain(n=5, step_penalty=-0.01, goal_reward=1.0, max_steps=20)
    env.reset()
    total = 0.0
    steps = 0
    done = False
    while not done:
        state, reward, done = env.step(0)
        total += reward
        steps += 1
    assert steps == 20
    assert state.terminal
    # Never left the wall, never saw the goal bonus.
    assert state.observation[0] == 1.0
    assert total == pytest.approx(20 * -0.01, rel=1e-15)
    with pytest.raises(EnvUsageError):
        env.step(0)


def test_chain_goal_on_final_allowed_step_still_pays():
    env = make_sparse_chain(n=3, step_penalty=-0.01, goal_reward=1.0, max_steps=2)
    env.reset()
    _, _, done = env.step(1)
    assert not done
    state, reward, done = env.step(1)
    assert done and state.terminal
    assert reward == pytest.approx(-0.01 + 1.0, rel=1e-15)


def test_chain_validation():
    with pytest.raises(ConfigError):
        make_sparse_chain(n=2)
    with pytest.raises(ConfigError):
        make_sparse_chain(step_penalty=0.1)
    with pytest.raises(ConfigError):
        make_sparse_chain(goal_reward=0.0)
    with pytest.raises(ConfigError):
        make_sparse_chain(max_steps=0)
    env = make_sparse_chain()
    env.reset()
    with pytest.raises(ConfigError):
        env.step(-1)


def test_chain_histogram_counts_visited_states():
    env = make_sparse_chain(n=4)
    obs = np.eye(4)
    transitions = [
        _transition(obs[0], 1, done=False),
        _transition(obs[1], 1, done=False),
        _transition(obs[1], 0, done=False),
        _transition(obs[2], 1, done=True),
    ]
    assert buffer_class_histogram(transitions, env) == {
        "state_0": 1,
        "state_1": 2,
        "state_2": 1,
        "state_3": 0,
    }


def test_chain_random_walk_hit_rate_matches_markov_oracle():
    # Independent oracle: exact absorption probability from the transition
    # matrix of the uniform random walk (wall at 0, absorbing goal at n-1).
    n, max_steps = 5, 20
    m = np.zeros((n, n))
    m[0, 0] = 0.5
    m[0, 1] = 0.5
    for i in range(1, n - 1):
        m[i, i - 1] = 0.5
        m[i, i + 1] = 0.5
    m[n - 1, n - 1] = 1.0
    dist = np.zeros(n)
    dist[0] = 1.0
    for _ in range(max_steps):
        dist = dist @ m
    exact = float(dist[n - 1])

    env = make_sparse_chain(n=n, step_penalty=-0.01, goal_reward=1.0, max_steps=max_steps)
    rng = np.random.default_rng(2024)
    episodes = 20_000
    hits = 0
    for _ in range(episodes):
        state = env.reset()
        done = False
        while not done:
            state, _, done = env.step(int(rng.integers(2)))
        hits += int(state.observation[n - 1] == 1.0)
    assert abs(hits / episodes - exact) < 0.02


# -- dataset -----------------------------------------------------------------


def test_default_spec_counts_are_geometric():
    spec = DatasetSpec()
    assert spec.class_counts == (80, 104, 134, 174, 226, 293, 380, 492, 638, 827)
    assert sum(spec.class_counts) == 3348


def test_dataset_spec_validation():
    with pytest.raises(ConfigError):
        DatasetSpec(num_classes=1, class_counts=(10,))
    with pytest.raises(ConfigError):
        DatasetSpec(num_classes=3, class_counts=(10, 10))
    with pytest.raises(ConfigError):
        DatasetSpec(num_classes=2, class_counts=(10, 0))
    with pytest.raises(ConfigError):
        DatasetSpec(feature_dim=0)
    with pytest.raises(ConfigError):
        DatasetSpec(class_separation=0.0)
    with pytest.raises(ConfigError):
        DatasetSpec(noise_sigma=-1.0)
    with pytest.raises(ConfigError, match="too small"):
        DatasetSpec(num_classes=5, class_counts=(5,) * 5, feature_dim=1)


def test_generate_dataset_counts_and_split():
    spec = DatasetSpec(num_classes=2, class_counts=(80, 827), feature_dim=4, seed=3)
    data = generate_dataset(spec)
    total = len(data.y_train) + len(data.y_val) + len(data.y_test)
    assert total == 907

    labels = np.concatenate([data.y_train, data.y_val, data.y_test])
    assert int((labels == 1).sum()) == 827
    assert int((labels == 0).sum()) == 80

    # 70/15/15 per class, fractional parts folded into the training split.
    assert int((data.y_val == 0).sum()) == int(80 * 0.15)
    assert int((data.y_test == 0).sum()) == int(80 * 0.15)
    assert int((data.y_train == 0).sum()) == 80 - 2 * int(80 * 0.15)
    assert int((data.y_val == 1).sum()) == int(827 * 0.15)
    assert int((data.y_train == 1).sum()) == 827 - 2 * int(827 * 0.15)


def test_generate_dataset_is_deterministic():
    spec_a = DatasetSpec(seed=19)
    spec_b = DatasetSpec(seed=19)
    a, b = generate_dataset(spec_a), generate_dataset(spec_b)
    assert np.array_equal(a.x_train, b.x_train)
    assert np.array_equal(a.y_train, b.y_train)
    assert np.array_equal(a.x_test, b.x_test)
    assert np.array_equal(a.class_means, b.class_means)

    different = generate_dataset(DatasetSpec(seed=20))
    assert not np.array_equal(a.x_train, different.x_train)


def test_generate_dataset_mean_separation():
    spec = DatasetSpec(class_separation=2.0, seed=7)
    data = generate_dataset(spec)
    diffs = data.class_means[:, None, :] - data.class_means[None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=2))
    min_dist = dists[np.triu_indices(spec.num_classes, k=1)].min()
    assert min_dist == pytest.approx(2.0, rel=1e-12)


def test_nearest_centroid_is_perfect_in_the_low_noise_limit():
    spec = DatasetSpec(
        num_classes=4,
        class_counts=(30, 30, 30, 30),
        feature_dim=6,
        noise_sigma=1e-9,
        seed=5,
    )
    data = generate_dataset(spec)
    diffs = data.x_test[:, None, :] - data.class_means[None, :, :]
    preds = np.argmin((diffs**2).sum(axis=2), axis=1)
    assert np.array_equal(preds, data.y_test)


def test_export_dataset_csv_roundtrip(tmp_path):
    features = np.array([[0.1, -2.5], [1.0 / 3.0, 7.0]])
    labels = np.array([0, 1])
    path = tmp_path / "data.csv"
    export_dataset_csv(features, labels, path)

    lines = path.read_text().splitlines()
    assert lines[0] == "f0,f1,label"
    assert len(lines) == 3
    cells = lines[2].split(",")
    assert float(cells[0]) == 1.0 / 3.0
    assert cells[2] == "1"


def test_export_dataset_csv_rejects_mismatched_shapes(tmp_path):
    with pytest.raises(ShapeError):
        export_dataset_csv(np.zeros((3, 2)), np.zeros(2), tmp_path / "bad.csv")
    with pytest.raises(ShapeError):
        export_dataset_csv(np.zeros(3), np.zeros(3), tmp_path / "bad.csv")


# -- classification as a one-step decision problem ---------------------------


def _small_dataset(num_classes=2, per_class=25, seed=13):
    counts = (per_class,) * num_classes
    spec = DatasetSpec(
        num_classes=num_classes,
        class_counts=counts,
        feature_dim=3,
        class_separation=3.0,
        noise_sigma=0.1,
        seed=seed,
    )
    return generate_dataset(spec)


def test_mdp_reward_is_the_correctness_indicator_exhaustively():
    data = _small_dataset(num_classes=2, per_class=25)
    env = ClassificationMdp(data, seed=1)
    n_train = len(data.y_train)

    # Over num_classes epochs every example comes up once per epoch; cycling
    # an action counter per example identity covers every (example, action)
    # pair exactly once.
    tried: dict[bytes, int] = {}
    for _ in range(env.n_actions * n_train):
        state = env.reset()
        key = state.observation.tobytes()
        action = tried.get(key, 0)
        tried[key] = action + 1
        label = env.current_label
        _, reward, done = env.step(action)
        assert done
        assert reward == (1.0 if action == label else 0.0)
    assert len(tried) == n_train
    assert all(v == env.n_actions for v in tried.values())


def test_mdp_episode_contract_and_validation():
    data = _small_dataset()
    env = ClassificationMdp(data, seed=0)
    with pytest.raises(EnvUsageError):
        env.current_label
    with pytest.raises(EnvUsageError):
        env.step(0)

    state = env.reset()
    assert state.observation.shape == (data.feature_dim,)
    with pytest.raises(ConfigError):
        env.step(env.n_actions)
    _, _, done = env.step(0)
    assert done
    with pytest.raises(EnvUsageError):
        env.step(0)


def test_mdp_visits_every_example_each_epoch_in_fresh_order():
    data = _small_dataset(num_classes=2, per_class=20)
    env = ClassificationMdp(data, seed=4)
    n_train = len(data.y_train)

    def one_epoch():
        order = []
        for _ in range(n_train):
            state = env.reset()
            order.append(state.observation.tobytes())
            env.step(0)
        return order

    first, second = one_epoch(), one_epoch()
    assert sorted(first) == sorted(second)
    assert len(set(first)) == n_train
    assert first != second


def test_mdp_histogram_counts_actions():
    data = _small_dataset()
    env = ClassificationMdp(data, seed=0)
    transitions = [_transition(np.zeros(3), a) for a in (0, 1, 1)]
    assert buffer_class_histogram(transitions, env) == {"action_0": 1, "action_1": 2}


def test_mdp_same_seed_same_order():
    data = _small_dataset()
    a = ClassificationMdp(data, seed=9)
    b = ClassificationMdp(data, seed=9)
    for _ in range(30):
        sa, sb = a.reset(), b.reset()
        assert np.array_equal(sa.observation, sb.observation)
        a.step(0)
        b.step(0)

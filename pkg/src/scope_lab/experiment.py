"""Experiment harness: seeded loss-comparison trials, CSVs, and summaries.

An experiment is a grid of (loss_kind, seed) trials over one environment or
dataset. Each trial writes its own metrics CSV (and, for classification, an
evaluation CSV); the summary step then recomputes every aggregate from those
files, so summary numbers are reproducible from the artifacts alone. All
float cells are written with repr, making runs byte-identical.
"""

from __future__ import annotations

import csv
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .autodiff import softmax_values
from .envs import (
    BinaryMaze,
    DatasetSpec,
    SparseChain,
    export_dataset_csv,
    generate_dataset,
)
from .exceptions import ConfigError
from .losses import LossConfig
from .metrics import precision_report
from .nets import forward_values
from .training import (
    RL_LOSS_KINDS,
    SUPERVISED_LOSS_KINDS,
    MetricsRow,
    TrainConfig,
    evaluate_classifier,
    policy_entropy_metric,
    save_checkpoint,
    train_a2c,
    train_ppo,
    train_supervised,
)
from .verification import CheckResult, run_all_checks

EXPERIMENTS = ("maze_imbalance", "sparse_chain", "classification", "identity_suite")

METRICS_HEADER = (
    "step",
    "loss_kind",
    "seed",
    "episode_return_mean",
    "policy_entropy",
    "loss_value",
    "dog_fraction",
    "val_accuracy",
)


@dataclass
class ExperimentConfig:
    """A (loss_kind x seed) trial grid plus the knobs the trials share.

    The environment fields only matter for the experiment that uses them;
    `train` is the per-trial template, copied with the trial's loss_kind and
    seed filled in.
    """

    experiment: str
    losses: tuple[str, ...]
    seeds: tuple[int, ...]
    train: TrainConfig
    output_dir: str = "results"
    reward_cat: float = 0.5
    reward_dog: float = 1.0
    chain_length: int = 10
    step_penalty: float = -0.01
    goal_reward: float = 1.0
    max_steps: int = 50
    eval_episodes: int = 16
    dataset: DatasetSpec = field(default_factory=DatasetSpec)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        self.losses = tuple(self.losses)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.losses:
            raise ConfigError("losses must be nonempty")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        allowed = {
            "maze_imbalance": RL_LOSS_KINDS,
            "sparse_chain": RL_LOSS_KINDS,
            "classification": SUPERVISED_LOSS_KINDS,
            "identity_suite": RL_LOSS_KINDS + SUPERVISED_LOSS_KINDS,
        }[self.experiment]
        for kind in self.losses:
            if kind not in allowed:
                raise ConfigError(
                    f"loss_kind {kind!r} cannot run under {self.experiment}; allowed: {allowed}"
                )
        if self.eval_episodes < 1:
            raise ConfigError(f"eval_episodes must be at least 1, got {self.eval_episodes}")


def default_config(experiment: str) -> ExperimentConfig:
    """Tuned desk-scale defaults per experiment."""
    if experiment == "maze_imbalance":
        return ExperimentConfig(
            experiment=experiment,
            losses=("policy", "policy_entropy", "scope"),
            seeds=(0, 1, 2, 3, 4),
            train=TrainConfig(
                algo="a2c",
                loss=LossConfig(alpha_scope=2.0, alpha_entropy=1.0),
                lr=0.005,
                rollout_length=40,
                batch_size=40,
                total_steps=2000,
                hidden_sizes=(64, 64),
            ),
            output_dir="results/maze_imbalance",
        )
    if experiment == "sparse_chain":
        return ExperimentConfig(
            experiment=experiment,
            losses=("policy", "scope"),
            seeds=(0, 1, 2, 3, 4),
            train=TrainConfig(
                algo="ppo",
                loss=LossConfig(alpha_scope=0.01, alpha_entropy=0.01),
                lr=3e-3,
                rollout_length=256,
                batch_size=64,
                total_steps=50_000,
                epochs_per_update=4,
                hidden_sizes=(32,),
            ),
            output_dir="results/sparse_chain",
        )
    if experiment == "classification":
        return ExperimentConfig(
            experiment=experiment,
            losses=("cross_entropy", "focal", "policy_entropy", "scope"),
            seeds=(0, 1, 2, 3, 4),
            train=TrainConfig(
                algo="supervised",
                loss=LossConfig(alpha_scope=1.0, alpha_entropy=0.3, gamma_focal=2.0),
                lr=1e-3,
                lr_schedule="cosine_decay_to_zero",
                batch_size=64,
                epochs=60,
                hidden_sizes=(16,),
            ),
            output_dir="results/classification",
        )
    if experiment == "identity_suite":
        return ExperimentConfig(
            experiment=experiment,
            losses=RL_LOSS_KINDS + ("cross_entropy",),
            seeds=(0,),
            train=TrainConfig(),
            output_dir="results/identity_suite",
        )
    raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")


# -- config files ------------------------------------------------------------

_TOP_FIELDS = {
    "output_dir": str,
    "reward_cat": float,
    "reward_dog": float,
    "chain_length": int,
    "step_penalty": float,
    "goal_reward": float,
    "max_steps": int,
    "eval_episodes": int,
}
_TRAIN_FIELDS = {
    "lr": float,
    "optimizer": str,
    "lr_schedule": str,
    "gamma_discount": float,
    "lambda_gae": float,
    "rollout_length": int,
    "batch_size": int,
    "total_steps": int,
    "epochs_per_update": int,
    "epochs": int,
    "activation": str,
    "grad_clip": float,
}
_LOSS_FIELDS = {
    "alpha_scope": float,
    "alpha_entropy": float,
    "alpha_focal": float,
    "gamma_focal": float,
    "alpha_value": float,
    "epsilon_clip": float,
}
_DATASET_FIELDS = {
    "num_classes": int,
    "feature_dim": int,
    "class_separation": float,
    "noise_sigma": float,
    "dataset_seed": int,
}


def _parse_scalar(key: str, raw: str, kind):
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def _parse_int_list(key: str, raw: str) -> tuple[int, ...]:
    return tuple(_parse_scalar(key, part.strip(), int) for part in raw.split(","))


def parse_config_file(path) -> ExperimentConfig:
    """Flat `key = value` text config; `#` comments; lists comma-separated.

    The `experiment` key selects the defaults; every other key overrides one
    field of the resulting config. Unknown keys are errors, not warnings.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = value

    if "experiment" not in entries:
        raise ConfigError(f"{path}: missing required key 'experiment'")
    config = default_config(entries.pop("experiment"))

    top: dict = {}
    train: dict = {}
    loss: dict = {}
    dataset: dict = {}
    for key, raw in entries.items():
        if key == "losses":
            top["losses"] = tuple(part.strip() for part in raw.split(","))
        elif key == "seeds":
            top["seeds"] = _parse_int_list(key, raw)
        elif key == "hidden_sizes":
            train["hidden_sizes"] = _parse_int_list(key, raw)
        elif key == "class_counts":
            dataset["class_counts"] = _parse_int_list(key, raw)
        elif key in _TOP_FIELDS:
            top[key] = _parse_scalar(key, raw, _TOP_FIELDS[key])
        elif key in _TRAIN_FIELDS:
            train[key] = _parse_scalar(key, raw, _TRAIN_FIELDS[key])
        elif key in _LOSS_FIELDS:
            loss[key] = _parse_scalar(key, raw, _LOSS_FIELDS[key])
        elif key in _DATASET_FIELDS:
            value = _parse_scalar(key, raw, _DATASET_FIELDS[key])
            dataset["seed" if key == "dataset_seed" else key] = value
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")

    new_loss = replace(config.train.loss, **loss)
    new_train = replace(config.train, loss=new_loss, **train)
    new_dataset = replace(config.dataset, **dataset)
    return replace(config, train=new_train, dataset=new_dataset, **top)


# -- CSV plumbing ------------------------------------------------------------


def _cell(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _dog_fraction(row: MetricsRow) -> float | None:
    h = row.outcome_histogram
    if not h or "dog" not in h or "cat" not in h:
        return None
    total = h["dog"] + h["cat"]
    return h["dog"] / total if total else None


def _metrics_cells(row: MetricsRow, loss_kind: str, seed: int) -> list:
    return [
        row.step,
        loss_kind,
        seed,
        row.episode_return_mean,
        row.policy_entropy,
        row.loss_value,
        _dog_fraction(row),
        row.val_accuracy,
    ]


def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _floats(rows, column) -> list[float]:
    return [float(r[column]) for r in rows if r[column] != ""]


# -- trials ------------------------------------------------------------------


def _trial_path(out: Path, loss_kind: str, seed: int) -> Path:
    return out / f"trial_{loss_kind}_{seed}.csv"


def _run_maze_trial(config: ExperimentConfig, loss_kind: str, seed: int) -> None:
    env = BinaryMaze(config.reward_cat, config.reward_dog)
    cfg = replace(config.train, loss_kind=loss_kind, seed=seed)
    result = train_a2c(cfg, env)
    out = Path(config.output_dir)
    cells = [_metrics_cells(r, loss_kind, seed) for r in result.rows]
    # Final evaluation row: the exact policy at the junction, no sampling.
    logits, _ = forward_values(result.params, np.ones(1))
    p = softmax_values(logits)
    p_dog = float(p[env.dog_action])
    expected_return = p_dog * env.reward_dog + (1.0 - p_dog) * env.reward_cat
    cells.append(
        [
            cfg.total_steps,
            loss_kind,
            seed,
            expected_return,
            policy_entropy_metric([p]),
            None,
            p_dog,
            None,
        ]
    )
    _write_csv(_trial_path(out, loss_kind, seed), METRICS_HEADER, cells)
    save_checkpoint(out / f"checkpoint_{loss_kind}_{seed}.json", result.params, cfg)


def _run_chain_trial(config: ExperimentConfig, loss_kind: str, seed: int) -> None:
    env = SparseChain(config.chain_length, config.step_penalty, config.goal_reward, config.max_steps)
    cfg = replace(config.train, loss_kind=loss_kind, seed=seed)
    result = train_ppo(cfg, env)
    out = Path(config.output_dir)
    cells = [_metrics_cells(r, loss_kind, seed) for r in result.rows]

    # Final evaluation row: fresh episodes sampled from the trained policy.
    eval_env = SparseChain(
        config.chain_length, config.step_penalty, config.goal_reward, config.max_steps
    )
    rng = np.random.default_rng([seed, 9247])
    returns = []
    prob_rows = []
    for _ in range(config.eval_episodes):
        obs = eval_env.reset().observation
        done = False
        ep_return = 0.0
        while not done:
            logits, _ = forward_values(result.params, obs)
            p = softmax_values(logits)
            prob_rows.append(p)
            action = int(min(np.searchsorted(np.cumsum(p), rng.random(), side="right"), p.size - 1))
            state, reward, done = eval_env.step(action)
            ep_return += reward
            obs = state.observation
        returns.append(ep_return)
    cells.append(
        [
            cfg.total_steps,
            loss_kind,
            seed,
            float(np.mean(returns)),
            policy_entropy_metric(prob_rows),
            None,
            None,
            None,
        ]
    )
    _write_csv(_trial_path(out, loss_kind, seed), METRICS_HEADER, cells)
    save_checkpoint(out / f"checkpoint_{loss_kind}_{seed}.json", result.params, cfg)


def _run_classification_trial(config: ExperimentConfig, loss_kind: str, seed: int) -> None:
    dataset = generate_dataset(config.dataset)
    cfg = replace(config.train, loss_kind=loss_kind, seed=seed)
    result = train_supervised(cfg, dataset)
    out = Path(config.output_dir)
    cells = [_metrics_cells(r, loss_kind, seed) for r in result.rows]
    _write_csv(_trial_path(out, loss_kind, seed), METRICS_HEADER, cells)

    accuracy, _, preds = evaluate_classifier(result.best_params, dataset.x_test, dataset.y_test)
    report = precision_report(dataset.y_test, preds, dataset.num_classes)
    eval_rows = [
        ("test_accuracy", accuracy),
        ("mean_precision", report.mean_precision),
        ("std_precision", report.std_precision),
        ("best_val_accuracy", result.best_val_accuracy),
        ("best_epoch", result.best_epoch),
    ]
    eval_rows += [(f"precision_class_{c}", report.per_class[c]) for c in range(dataset.num_classes)]
    _write_csv(out / f"eval_{loss_kind}_{seed}.csv", ("key", "value"), eval_rows)
    save_checkpoint(out / f"checkpoint_{loss_kind}_{seed}.json", result.best_params, cfg)


_TRIAL_RUNNERS = {
    "maze_imbalance": _run_maze_trial,
    "sparse_chain": _run_chain_trial,
    "classification": _run_classification_trial,
}


def _run_trial(args) -> None:
    config, loss_kind, seed = args
    _TRIAL_RUNNERS[config.experiment](config, loss_kind, seed)


# -- summaries (recomputed from the trial files) ------------------------------


def _is_eval(row: dict[str, str]) -> bool:
    return row["loss_value"] == ""


def _summarize_maze(config: ExperimentConfig, out: Path) -> list[list]:
    rows = []
    for loss_kind in config.losses:
        for seed in config.seeds:
            trial = _read_csv(_trial_path(out, loss_kind, seed))
            train_rows = [r for r in trial if not _is_eval(r)]
            eval_rows = [r for r in trial if _is_eval(r)]
            early = train_rows[: math.ceil(0.25 * len(train_rows))]
            rows.append(
                [
                    loss_kind,
                    seed,
                    float(eval_rows[-1]["dog_fraction"]),
                    float(np.mean(_floats(train_rows, "dog_fraction"))),
                    float(np.mean(_floats(early, "policy_entropy"))),
                ]
            )
    return rows


def _summarize_chain(config: ExperimentConfig, out: Path) -> list[list]:
    # A failed episode always runs the full max_steps, so its return is
    # exactly max_steps * step_penalty; any rollout mean above that (plus
    # float slack) proves at least one goal episode in the rollout.
    fail_return = config.max_steps * config.step_penalty
    rows = []
    finals: dict[str, list[float]] = {k: [] for k in config.losses}
    for loss_kind in config.losses:
        for seed in config.seeds:
            trial = _read_csv(_trial_path(out, loss_kind, seed))
            train_rows = [r for r in trial if not _is_eval(r)]
            eval_rows = [r for r in trial if _is_eval(r)]
            final_return = float(eval_rows[-1]["episode_return_mean"])
            returns = _floats(train_rows, "episode_return_mean")
            best = max(returns) if returns else None
            goal = int(best is not None and best > fail_return + 1e-9)
            finals[loss_kind].append(final_return)
            rows.append([loss_kind, seed, final_return, best, goal])
    for loss_kind in config.losses:
        rows.append([loss_kind, "median", statistics.median(finals[loss_kind]), None, None])
    return rows


def _summarize_classification(config: ExperimentConfig, out: Path) -> list[list]:
    rows = []
    agg: dict[str, dict[str, list[float]]] = {
        k: {"mean_precision": [], "std_precision": [], "test_accuracy": []} for k in config.losses
    }
    for loss_kind in config.losses:
        for seed in config.seeds:
            kv = {r["key"]: r["value"] for r in _read_csv(out / f"eval_{loss_kind}_{seed}.csv")}
            row = [loss_kind, seed]
            for col in ("mean_precision", "std_precision", "test_accuracy"):
                value = float(kv[col])
                agg[loss_kind][col].append(value)
                row.append(value)
            rows.append(row)
    for loss_kind in config.losses:
        rows.append(
            [loss_kind, "median"]
            + [statistics.median(agg[loss_kind][c]) for c in ("mean_precision", "std_precision", "test_accuracy")]
        )
    return rows


_SUMMARY_HEADERS = {
    "maze_imbalance": ("loss_kind", "seed", "final_dog_prob", "buffer_dog_fraction", "early_entropy_mean"),
    "sparse_chain": ("loss_kind", "seed", "final_return", "best_return_mean", "goal_reached"),
    "classification": ("loss_kind", "seed", "mean_precision", "std_precision", "test_accuracy"),
}
_SUMMARIZERS = {
    "maze_imbalance": _summarize_maze,
    "sparse_chain": _summarize_chain,
    "classification": _summarize_classification,
}


@dataclass
class RunResult:
    output_dir: Path
    summary_path: Path | None = None
    checks: list[CheckResult] | None = None

    @property
    def checks_passed(self) -> bool | None:
        if self.checks is None:
            return None
        return all(c.passed for c in self.checks)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> RunResult:
    """Run the trial grid and write per-trial files plus summary.csv.

    With jobs > 1, trials run in separate processes; each trial writes only
    its own files, so partial results survive individual failures. Results
    are independent of `jobs`.
    """
    if jobs < 1:
        raise ConfigError(f"jobs must be at least 1, got {jobs}")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    if config.experiment == "identity_suite":
        checks = run_all_checks(seed=config.seeds[0])
        _write_csv(
            out / "checks.csv",
            ("name", "passed", "detail"),
            [[c.name, str(c.passed).lower(), c.detail] for c in checks],
        )
        return RunResult(output_dir=out, summary_path=out / "checks.csv", checks=checks)

    if config.experiment == "classification":
        dataset = generate_dataset(config.dataset)
        features = np.concatenate([dataset.x_train, dataset.x_val, dataset.x_test])
        labels = np.concatenate([dataset.y_train, dataset.y_val, dataset.y_test])
        export_dataset_csv(features, labels, out / "dataset.csv")

    tasks = [(config, loss_kind, seed) for loss_kind in config.losses for seed in config.seeds]
    if jobs == 1:
        for task in tasks:
            _run_trial(task)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            # list() propagates the first failure after all trials finish.
            list(pool.map(_run_trial, tasks))

    summary = out / "summary.csv"
    _write_csv(
        summary,
        _SUMMARY_HEADERS[config.experiment],
        _SUMMARIZERS[config.experiment](config, out),
    )
    return RunResult(output_dir=out, summary_path=summary)

"""Per-product random search over the fixed hyperparameter grid."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from .nn import ModelConfig, TrainingDivergedError

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 20
TUNING_HEADER = (
    "trial_id", "seed", "lstm_units", "n_dense_layers", "dense_units", "dropout_flags",
    "dropout_rate", "learning_rate", "val_mmape", "best_epoch",
)


class SearchFailedError(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    lstm_units: tuple[int, ...] = tuple(range(10, 101, 10))
    n_dense_layers: tuple[int, ...] = (1, 2, 3)
    dense_units: tuple[int, ...] = tuple(range(10, 101, 10))
    dropout_enabled: tuple[bool, ...] = (False, True)
    dropout_rate: tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 10))
    learning_rate: tuple[float, ...] = (1e-2, 1e-3, 1e-4)

    def contains(self, config: ModelConfig) -> bool:
        return (
            config.lstm_units in self.lstm_units
            and config.n_dense_layers in self.n_dense_layers
            and all(u in self.dense_units for u in config.dense_units)
            and all(d in self.dropout_enabled for d in config.dropout_enabled)
            and config.dropout_rate in self.dropout_rate
            and config.learning_rate in self.learning_rate
            and config.batch_size == 32
            and config.max_epochs == 70
            and config.patience == 5
            and config.input_window == 36
            and config.horizon == 6
        )


GRID = SearchSpace()


def trial_seed(master_seed: int, trial_index: int) -> int:
    return int(np.random.SeedSequence([master_seed, trial_index]).generate_state(1)[0])


def sample_trial(space: SearchSpace, rng: np.random.Generator, seed: int = 0) -> ModelConfig:
    """Draw each grid dimension uniformly and independently; fixed settings keep their defaults.

    Per-layer units and dropout flags are drawn for the deepest option and
    truncated, so one generator call covers the whole trial.
    """
    deepest = max(space.n_dense_layers)
    bounds = np.array(
        [len(space.lstm_units), len(space.n_dense_layers), len(space.dropout_rate), len(space.learning_rate)]
        + [len(space.dense_units)] * deepest + [len(space.dropout_enabled)] * deepest
    )
    idx = rng.integers(0, bounds).tolist()
    n_layers = space.n_dense_layers[idx[1]]
    units = idx[4 : 4 + deepest]
    flags = idx[4 + deepest :]
    return ModelConfig(
        lstm_units=space.lstm_units[idx[0]],
        dense_units=tuple(space.dense_units[i] for i in units[:n_layers]),
        dropout_enabled=tuple(space.dropout_enabled[i] for i in flags[:n_layers]),
        dropout_rate=space.dropout_rate[idx[2]],
        learning_rate=space.learning_rate[idx[3]],
        rng_seed=seed,
    )


@dataclass
class Trial:
    trial_id: int
    seed: int
    config: ModelConfig
    validation_score: float = float("nan")
    best_epoch: int = 0
    diverged: bool = False
    rank: Optional[int] = None


# scorer(config) -> (validation mean mMAPE, best_epoch)
Scorer = Callable[[ModelConfig], tuple[float, int]]


def run_trial(trial: Trial, scorer: Scorer) -> Trial:
    try:
        score, best_epoch = scorer(trial.config)
    except TrainingDivergedError as exc:
        log.warning("trial %d diverged: %s", trial.trial_id, exc)
        return replace(trial, diverged=True)
    if not np.isfinite(score):
        return replace(trial, diverged=True)
    return replace(trial, validation_score=float(score), best_epoch=best_epoch)


def plan_trials(n_trials: int, master_seed: int, space: SearchSpace = GRID) -> list[Trial]:
    trials = []
    for i in range(n_trials):
        seed = trial_seed(master_seed, i)
        config = sample_trial(space, np.random.default_rng(seed), seed)
        trials.append(Trial(i, seed, config))
    return trials


def rank_trials(trials: Sequence[Trial]) -> list[Trial]:
    ok = [t for t in trials if not t.diverged]
    if not ok:
        raise SearchFailedError("every trial diverged")
    ok.sort(key=lambda t: (t.validation_score, t.trial_id))
    return [replace(t, rank=r) for r, t in enumerate(ok, start=1)]


def random_search(scorer: Scorer, n_trials: int = DEFAULT_TRIALS, master_seed: int = 0,
                  space: SearchSpace = GRID, map_fn=map) -> tuple[list[Trial], list[Trial]]:
    """Evaluate ``n_trials`` sampled configs; returns (all trials, ranked non-diverged trials).

    Each trial's config and training seed derive from (master_seed, index), so
    the outcome does not depend on ``map_fn``'s execution order.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    trials = plan_trials(n_trials, master_seed, space)
    done = list(map_fn(partial(run_trial, scorer=scorer), trials))
    return done, rank_trials(done)


def write_tuning_csv(path, trials: Sequence[Trial], header_comment: Optional[str] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TUNING_HEADER)
        for t in trials:
            c = t.config
            w.writerow([
                t.trial_id, t.seed, c.lstm_units, c.n_dense_layers,
                ";".join(str(u) for u in c.dense_units),
                ";".join(str(int(d)) for d in c.dropout_enabled),
                repr(c.dropout_rate), repr(c.learning_rate),
                "diverged" if t.diverged else repr(t.validation_score), t.best_epoch,
            ])

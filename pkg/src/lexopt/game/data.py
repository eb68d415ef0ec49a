"""Referential game instances over the kinship graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..info import Distribution
from ..kinship import EGO_IDENTITIES, EGO_INDEX

__all__ = ["GameInstance", "GameDataset", "generate_dataset"]

N_TARGETS = 32  # non-ego family members, node ids 0..31
TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class GameInstance:
    """One game turn: sampled ego identity, target node, five distractors."""

    ego: str
    target: int
    distractors: tuple

    def __post_init__(self):
        if self.ego not in EGO_IDENTITIES:
            raise ValueError(f"unknown ego {self.ego!r}")
        pool = {self.target, *self.distractors}
        if len(pool) != 1 + len(self.distractors) or EGO_INDEX in pool:
            raise ValueError("candidates must be distinct non-ego nodes")

    @property
    def candidates(self) -> tuple:
        return (self.target, *self.distractors)


@dataclass(frozen=True)
class GameDataset:
    instances: tuple
    n_train: int

    @property
    def train(self) -> tuple:
        return self.instances[: self.n_train]

    @property
    def validation(self) -> tuple:
        return self.instances[self.n_train :]


def generate_dataset(cfg, seed: int, need: Distribution | None = None) -> GameDataset:
    """Sample ``cfg.dataset_size`` instances, split 80/20 train/validation.

    Ego identity is uniform over Bob/Alice; the target follows
    ``cfg.target_sampling`` ("uniform", or "need-weighted" with ``need``
    over the 32 members); distractors are uniform without replacement from
    the remaining non-ego nodes.
    """
    if cfg.target_sampling not in ("uniform", "need-weighted"):
        raise ValueError(f"unknown target sampling {cfg.target_sampling!r}")
    if cfg.target_sampling == "need-weighted":
        if need is None:
            raise ValueError("need-weighted sampling requires a need distribution")
        if need.support_size != N_TARGETS:
            raise ValueError("need distribution must cover the 32 members")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    instances = []
    others = np.arange(N_TARGETS)
    for _ in range(cfg.dataset_size):
        ego = EGO_IDENTITIES[int(rng.integers(2))]
        if cfg.target_sampling == "uniform":
            target = int(rng.integers(N_TARGETS))
        else:
            target = int(rng.choice(N_TARGETS, p=need.probs))
        pool = others[others != target]
        distractors = tuple(int(x) for x in rng.choice(pool, size=cfg.n_distractors, replace=False))
        instances.append(GameInstance(ego=ego, target=target, distractors=distractors))
    n_train = int(round(TRAIN_FRACTION * len(instances)))
    return GameDataset(instances=tuple(instances), n_train=n_train)

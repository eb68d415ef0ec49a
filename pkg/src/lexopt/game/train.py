"""Training loop, strict evaluation, and checkpoint selection for the game."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..info import (
    ConditionalDistribution,
    Distribution,
    NamingSystem,
    TradeoffPoint,
    evaluate_system,
)
from ..kinship import EGO_IDENTITIES, EGO_INDEX, MEMBERS
from .data import GameDataset, generate_dataset
from .model import (
    AgentParams,
    Batch,
    GameDims,
    backward,
    game_graphs,
    init_params,
    rgcn_forward,
    sample_gumbel,
)
from .optim import adam_step, init_adam

__all__ = [
    "TrainConfig",
    "TrainConfigError",
    "EvalResult",
    "TrajectoryRecord",
    "TrainResult",
    "TRAJECTORY_CSV_FIELDS",
    "train",
    "evaluate",
    "select_checkpoint",
    "trajectory_rows",
]

RECORD_EVERY = 10
N_TARGETS = 32


class TrainConfigError(ValueError):
    """One or more configuration fields are invalid; lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class TrainConfig:
    d: int = 80
    d_h: int = 20
    vocab_size: int = 128
    pruning: bool = True
    layers: int = 3
    lr: float = 1e-3
    batch: int = 50
    epochs: int = 500
    gumbel_temperature: float = 1.5
    n_distractors: int = 5
    target_sampling: str = "uniform"
    seed: int = 0
    dataset_size: int = 10000

    def validate(self) -> None:
        problems = []
        for name in ("d", "d_h", "layers", "batch", "epochs", "dataset_size"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive, got {getattr(self, name)}")
        if not 16 <= self.vocab_size <= 256:
            problems.append(f"vocab_size must be in [16, 256], got {self.vocab_size}")
        if self.lr <= 0:
            problems.append(f"lr must be positive, got {self.lr}")
        if self.gumbel_temperature <= 0:
            problems.append(f"gumbel_temperature must be positive, got {self.gumbel_temperature}")
        if not 1 <= self.n_distractors <= 30:
            problems.append(f"n_distractors must be in [1, 30], got {self.n_distractors}")
        if self.target_sampling not in ("uniform", "need-weighted"):
            problems.append(f"target_sampling must be uniform or need-weighted, got {self.target_sampling!r}")
        if problems:
            raise TrainConfigError(problems)

    def dims(self) -> GameDims:
        return GameDims(d=self.d, d_h=self.d_h, vocab_size=self.vocab_size, n_layers=self.layers)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise TrainConfigError([f"unknown config field {name!r}" for name in unknown])
        cfg = cls(**payload)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise TrainConfigError([f"config is not valid JSON: {exc}"]) from None
        if not isinstance(payload, dict):
            raise TrainConfigError(["config JSON must be an object"])
        return cls.from_dict(payload)


@dataclass(frozen=True)
class EvalResult:
    """Strict 32-candidate evaluation of frozen parameters.

    ``points`` holds the per-ego trade-off of the deterministic argmax
    speaker paired with the softmax listener; ``strict_accuracy`` is the
    fraction of the 64 (ego, target) evaluation points whose top-scoring
    node is the target.
    """

    points: dict
    mean_point: TradeoffPoint
    systems: dict
    strict_accuracy: dict
    mean_strict_accuracy: float


@dataclass(frozen=True)
class TrajectoryRecord:
    epoch: int
    eval: EvalResult
    train_loss: float


@dataclass
class TrainResult:
    config: TrainConfig
    params: AgentParams
    trajectory: list
    checkpoint_paths: dict = field(default_factory=dict)


def _mean_point(points) -> TradeoffPoint:
    fields = (
        "entropy_nats",
        "complexity_nats",
        "adjusted_complexity_nats",
        "info_loss_nats",
        "distance_nats",
        "accuracy",
    )
    values = {f: float(np.mean([getattr(p, f) for p in points])) for f in fields}
    return TradeoffPoint(**values)


def evaluate(params: AgentParams, graphs: dict, need: Distribution | None = None) -> EvalResult:
    """Evaluate the frozen agents over all 2 x 32 (ego, target) pairs.

    The speaker deterministically emits its highest-scoring token for every
    member; the listener decodes each vocabulary token as a softmax over
    the 32 non-ego nodes.  The resulting encoder/decoder pair is scored
    under ``need`` (uniform when omitted).
    """
    if need is None:
        need = Distribution.uniform(N_TARGETS)
    if need.support_size != N_TARGETS:
        raise ValueError("need distribution must cover the 32 members")
    vocab = params.dims.vocab_size
    token_labels = tuple(f"tok{t}" for t in range(vocab))

    points, systems, strict = {}, {}, {}
    for ego in EGO_IDENTITIES:
        g = graphs[ego]
        h = rgcn_forward(params, g, "speaker")
        z = np.concatenate(
            [np.broadcast_to(h[EGO_INDEX], (N_TARGETS, params.dims.d)), h[:N_TARGETS]],
            axis=1,
        )
        token_scores = (z @ params["speaker.hidden"].T) @ params["speaker.lexicon"].T
        tokens = np.argmax(token_scores, axis=1)
        encoder_rows = np.zeros((N_TARGETS, vocab))
        encoder_rows[np.arange(N_TARGETS), tokens] = 1.0

        v = rgcn_forward(params, g, "listener")
        all_scores = (params["listener.token_emb"] @ params["listener.bilinear"]) @ v.T
        member_scores = all_scores[:, :N_TARGETS]  # ego excluded from candidates
        shifted = member_scores - member_scores.max(axis=1, keepdims=True)
        decoder_rows = np.exp(shifted)
        decoder_rows /= decoder_rows.sum(axis=1, keepdims=True)

        system = NamingSystem(
            object_labels=MEMBERS,
            word_labels=token_labels,
            need=need,
            encoder=ConditionalDistribution(encoder_rows),
            decoder=ConditionalDistribution(decoder_rows),
        )
        points[ego] = evaluate_system(system)
        systems[ego] = system
        predictions = np.argmax(member_scores[tokens], axis=1)
        strict[ego] = float(np.mean(predictions == np.arange(N_TARGETS)))

    return EvalResult(
        points=points,
        mean_point=_mean_point([points[e] for e in EGO_IDENTITIES]),
        systems=systems,
        strict_accuracy=strict,
        mean_strict_accuracy=float(np.mean([strict[e] for e in EGO_IDENTITIES])),
    )


def _make_batch(instances, noise_rng, vocab: int) -> Batch:
    ego_ids = np.array([EGO_IDENTITIES.index(inst.ego) for inst in instances])
    targets = np.array([inst.target for inst in instances])
    candidates = np.array([inst.candidates for inst in instances])
    return Batch(
        ego_ids=ego_ids,
        targets=targets,
        candidates=candidates,
        noise=sample_gumbel(noise_rng, (len(instances), vocab)),
    )


def train(
    cfg: TrainConfig,
    train_need: Distribution | None = None,
    eval_need: Distribution | None = None,
    checkpoint_dir=None,
    dataset: GameDataset | None = None,
) -> TrainResult:
    """Seeded mini-batch training with trade-off records every 10 epochs.

    Records (and checkpoints, when ``checkpoint_dir`` is given) happen at
    epoch 0 before any update, after every 10th epoch, and after the final
    epoch.  Fully deterministic for fixed (cfg, needs).
    """
    cfg.validate()
    dims = cfg.dims()
    graphs = game_graphs(cfg.pruning)
    graphs_list = [graphs[e] for e in EGO_IDENTITIES]
    if dataset is None:
        dataset = generate_dataset(cfg, cfg.seed, need=train_need)
    params = init_params(dims, cfg.seed)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(2,)))
    noise_rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(3,)))
    state = init_adam(params)

    result = TrainResult(config=cfg, params=params, trajectory=[])

    def record(epoch: int, train_loss: float) -> None:
        snapshot = evaluate(params, graphs, eval_need)
        result.trajectory.append(TrajectoryRecord(epoch=epoch, eval=snapshot, train_loss=train_loss))
        if checkpoint_dir is not None:
            from .checkpoint import save_checkpoint

            path = Path(checkpoint_dir) / f"checkpoint_epoch{epoch:05d}.bin"
            save_checkpoint(path, params, {"config": cfg.to_dict(), "epoch": epoch})
            result.checkpoint_paths[epoch] = path

    record(0, math.nan)
    train_set = dataset.train
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(train_set), cfg.batch):
            chunk = [train_set[i] for i in order[start : start + cfg.batch]]
            batch = _make_batch(chunk, noise_rng, dims.vocab_size)
            loss, grads = backward(params, graphs_list, batch, cfg.gumbel_temperature)
            adam_step(params, state, grads, lr=cfg.lr)
            losses.append(loss)
        if epoch % RECORD_EVERY == 0 or epoch == cfg.epochs:
            record(epoch, float(np.mean(losses)))
    return result


def select_checkpoint(trajectory, target_accuracy: float) -> int:
    """Epoch whose mean accuracy is closest to the target; ties pick earliest."""
    if not trajectory:
        raise ValueError("trajectory is empty")
    best_epoch, best_gap = None, math.inf
    for rec in trajectory:
        gap = abs(rec.eval.mean_point.accuracy - target_accuracy)
        if gap < best_gap:
            best_epoch, best_gap = rec.epoch, gap
    return best_epoch


TRAJECTORY_CSV_FIELDS = (
    "run_id",
    "seed",
    "epoch",
    "ego",
    "entropy_nats",
    "complexity_nats",
    "adjusted_complexity_nats",
    "info_loss_nats",
    "distance_nats",
    "accuracy",
    "train_loss",
)


def trajectory_rows(run_id: str, seed: int, trajectory) -> list:
    """Per-ego and averaged CSV rows for every trajectory record."""
    rows = []
    for rec in trajectory:
        labeled = [(*EGO_IDENTITIES, "mean")[i] for i in range(3)]
        pts = [rec.eval.points[e] for e in EGO_IDENTITIES] + [rec.eval.mean_point]
        for ego, point in zip(labeled, pts):
            rows.append(
                {
                    "run_id": run_id,
                    "seed": seed,
                    "epoch": rec.epoch,
                    "ego": ego,
                    **point.as_dict(),
                    "train_loss": rec.train_loss,
                }
            )
    return rows

"""Emergent referential game: models, data, optimization, training."""

from .checkpoint import CheckpointFormatError, load_checkpoint, save_checkpoint  # noqa: F401
from .data import GameDataset, GameInstance, generate_dataset  # noqa: F401
from .model import (  # noqa: F401
    AgentParams,
    Batch,
    GameDims,
    backward,
    game_graphs,
    game_loss,
    graph_tensors,
    init_params,
    listener_forward,
    rgcn_forward,
    sample_gumbel,
    speaker_forward,
)
from .optim import AdamState, adam_step, init_adam  # noqa: F401
from .train import (  # noqa: F401
    EvalResult,
    TrainConfig,
    TrainConfigError,
    TrainResult,
    TrajectoryRecord,
    evaluate,
    select_checkpoint,
    train,
    trajectory_rows,
)

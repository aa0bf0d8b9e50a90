"""Two-stage experiment pipeline: simulator stage, real stage, evaluation and CLI."""
from .checkpoint import Agent, CheckpointError, build_agent, load_checkpoint, save_checkpoint
from .config import TASKS, ConfigError, ExperimentConfig
from .metrics import METRIC_COLUMNS, MetricsWriter, read_metrics
from .rollout import Episodes, run_episodes
from .streams import STREAM_NAMES, stream
from .tasks import Task, make_task, tracking_error
from .train import TrainingDiverged, evaluate, init_transfer, speder_train, steady_transfer

__all__ = [
    "Agent", "CheckpointError", "ConfigError", "Episodes", "ExperimentConfig", "METRIC_COLUMNS",
    "MetricsWriter", "STREAM_NAMES", "TASKS", "Task", "TrainingDiverged", "build_agent",
    "evaluate", "init_transfer", "load_checkpoint", "make_task", "read_metrics", "run_episodes",
    "save_checkpoint", "speder_train", "steady_transfer", "stream", "tracking_error",
]

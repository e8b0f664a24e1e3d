"""Learning from demonstrations on the FSA-augmented MDP."""

from .agent import DDPGAgent, DivergenceError, behavior_cloning
from .config import ARMS, TrainConfig
from .demos import (
    QAppendedDemo,
    construct_q_appended_batch,
    generate_scripted_demos,
    load_demos,
    q_labels,
    save_demos,
    visit_order,
)
from .replay import PrioritizedReplayBuffer, ReplayBuffer, SumTree
from .train import (
    CURVE_COLUMNS,
    TaskSetup,
    TrainResult,
    demo_transitions,
    evaluate,
    parse_arm,
    read_curve,
    rlfd_train,
    steps_to_solve,
    write_curve,
)

__all__ = [
    "ARMS",
    "CURVE_COLUMNS",
    "DDPGAgent",
    "DivergenceError",
    "PrioritizedReplayBuffer",
    "QAppendedDemo",
    "ReplayBuffer",
    "SumTree",
    "TaskSetup",
    "TrainConfig",
    "TrainResult",
    "behavior_cloning",
    "construct_q_appended_batch",
    "demo_transitions",
    "evaluate",
    "generate_scripted_demos",
    "load_demos",
    "parse_arm",
    "q_labels",
    "read_curve",
    "rlfd_train",
    "save_demos",
    "steps_to_solve",
    "visit_order",
    "write_curve",
]

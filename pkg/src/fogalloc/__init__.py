"""Discrete-event simulation of joint radio/compute allocation in a fog cell."""

from .agent import AgentConfig, ExperienceMemory, OraAgent
from .allocators import (
    FixedGrantAllocator,
    RandomAllocator,
    brute_force_static,
    fixed_share,
    make_allocator,
)
from .engine import (
    Allocator,
    EpisodeReport,
    JointAction,
    ObsState,
    ResourceLedger,
    Transition,
    build_state,
    reward_of,
    run_episode,
)
from .fog_model import (
    DelayBreakdown,
    LinkBudget,
    ResourceGrants,
    SystemCapacity,
    TaskSpec,
    computing_delay,
    objective_value,
    qos_feasible,
    spectral_efficiency,
    task_delay,
    transmission_delay,
)
from .nets import Adam, DenseNet, GradientTape, softmax_probs
from .scenario import (
    Scenario,
    ScenarioConfig,
    capacity_from_table,
    default_capacity,
    generate,
    load_scenario,
    path_loss_db,
    save_scenario,
)

__version__ = "0.1.0"

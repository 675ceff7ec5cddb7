"""Free-energy solver for decision trees with per-node inverse temperatures."""

from .free_energy import (
    Distribution,
    UtilityVector,
    equilibrium_distribution,
    extremum_value,
    free_energy_value,
    temperature_change_utility,
    trajectory_free_energy,
    transform_rewards,
    transform_tree,
    utilities_from_rewards,
)
from .solver import SolveResult, equilibrium_trajectory_distribution, solve, value_curve
from .tree import (
    NEG_INF,
    POS_INF,
    ZERO,
    DecisionTree,
    Edge,
    InverseTemperature,
    Node,
    SchemaError,
    Trajectory,
    TreeError,
    build_tree,
    enumerate_trajectories,
)

__version__ = "0.1.0"

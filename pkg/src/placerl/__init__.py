"""Reinforcement-learning placement of graph nodes onto capacity-limited locations."""

from .core import UNASSIGNED, ConstraintMode, RewardSpec, Shaping, StepState
from .env_device import CostBreakdown, DeviceEnv, DeviceSpec, build_device_env
from .env_grid import GridCost, GridEnv, GridSpec, build_grid_env
from .graph import (Edge, Family, GenParams, Graph, GraphKind, Node, generate_synthetic, load_graph,
                    neighbors, save_graph, topological_order, validate_graph)
from .oracle import (enumerate_placements, enumerate_trajectories, exact_expected_reward, exact_gradient,
                     finite_diff_gradient)
from .policy import (Encoder, PolicyHyper, PolicyParams, Trajectory, action_distribution, encode,
                     init_params, load_params, node_features, sample_rollout, save_params, trajectory_grad)
from .trainer import (TrainerConfig, baseline_update, episode_return, evaluate, reinforce_update, train,
                      write_history_csv)

__version__ = "0.1.0"

"""
Services package for the simulation pipeline.

Action sequences and their masks, the kinematic oracle world, bundled
tasks, scripted policies and training-tuple generation. Services provide
a Python API over the robot and render layers.
"""

from .actions import (
    CartesianAction, JointAction, ActionSequence, JointTrajectory,
    actions_to_joint_states, masks_from_actions, hold_step, save_actions, load_actions,
)
from .world import SimState, Prediction, WorldModel
from .simulator import OracleWorld, oracle_predict
from .tasks import TASKS, Task, TaskInstance, Waypoint, expand_waypoints, get_task
from .policies import PolicySpec, ScriptedPolicy, load_policies
from .dataset import (
    DatasetConfig, TrainingTuple, generate_dataset, generate_tuple, load_dataset,
    read_manifest,
)

__all__ = [
    'CartesianAction', 'JointAction', 'ActionSequence', 'JointTrajectory',
    'actions_to_joint_states', 'masks_from_actions', 'hold_step', 'save_actions', 'load_actions',
    'SimState', 'Prediction', 'WorldModel', 'OracleWorld', 'oracle_predict',
    'TASKS', 'Task', 'TaskInstance', 'Waypoint', 'expand_waypoints', 'get_task',
    'PolicySpec', 'ScriptedPolicy', 'load_policies',
    'DatasetConfig', 'TrainingTuple', 'generate_dataset', 'generate_tuple', 'load_dataset',
    'read_manifest',
]

"""
Goal-image planning and policy evaluation on top of world models.
"""

from .cem import (
    PlanConfig, CemState, CemKnobs, GoalImage, PlanResult, strategy_knobs, refit, check_refit,
    score_candidate, deltas_to_actions, cem_plan, plan_with_strategy, plan_with_knobs, read_plan,
)
from .mpc import MpcResult, RerankResult, mpc_loop, propose_and_rerank, switch_threshold
from .policy_eval import EvalRollout, policy_eval_rollout, evaluate_policy_family, noise_family

__all__ = [
    'PlanConfig', 'CemState', 'CemKnobs', 'GoalImage', 'PlanResult', 'strategy_knobs', 'refit', 'check_refit',
    'score_candidate', 'deltas_to_actions', 'cem_plan', 'plan_with_strategy', 'plan_with_knobs', 'read_plan',
    'MpcResult', 'RerankResult', 'mpc_loop', 'propose_and_rerank', 'switch_threshold',
    'EvalRollout', 'policy_eval_rollout', 'evaluate_policy_family', 'noise_family',
]

"""Contextuality as gluing: embedding tests, gluing phases, holonomy and bookkeeping cost."""
from .scenario import (
    Behavior, Context, Observable, Scenario, ScenarioError, check_no_disturbance, load_scenario,
    marginal, validate_behavior, validate_scenario,
)
from .embedding import check_boolean_embedding, deterministic_hull_membership
from .projection import BranchData, GluingPhase, extract_phase, glued_projection, ltp_predict
from .intervention import InterventionModel, InterventionOp, SharedState, order_effect, sequential_stats
from .holonomy import Atlas, LogicWorld, TransitionMap, flatness_check, gluing_phase, loop_holonomy
from .bookkeeping import entropy, min_bookkeeping, mutual_information
from .nonlocality import BipartiteBehavior, chsh_value, check_no_signalling, local_decomposition
from .tradeoff import TradeoffConfig, run_tradeoff

__version__ = "0.1.0"

"""unimix: desk-scale expectimax agents over universal program mixtures."""

__version__ = "0.1.0"

from .core import (
    Alphabet,
    EMPTY_HISTORY,
    FixedHorizon,
    GeometricDiscount,
    History,
    MovingHorizon,
    Percept,
    ProportionalHorizon,
    append_cycle,
    decode_history,
    discounted_reward,
    encode_history,
    horizon_end,
)
from .models import (
    ChronologicalModel,
    MixtureModel,
    TabularModel,
    build_mixture,
    check_chronological,
    cond_prob,
    joint_prob,
    posterior,
    sq_distance_sum,
)
from .planner import (
    ValueQuery,
    best_action,
    planning_policy,
    policy_value_functional,
    policy_value_iterative,
    run_interaction,
    value_given_action,
    value_opt,
)
from .vm import Program, RunBudget, decode, enumerate_programs, kraft_sum

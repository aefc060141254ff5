"""Lexicographic bi-objective solvers for Markov decision processes.

Two solver pipelines over one shared model core: maximize reachability
probability then minimize conditional expected steps to target, and
maximize safety probability then maximize conditional mean payoff.
Ships with a slippery-gridworld benchmark generator and a brute-force
verification oracle.
"""

__version__ = "0.1.0"

from .errors import (
    EnumerationCapError,
    LexMdpError,
    ModelFormatError,
    ModelValidationError,
    PreconditionError,
)
from .model import (
    FinitePath,
    MarkovChain,
    Mdp,
    MemorylessStrategy,
    build_mdp,
    finite_path_probability,
    induced_chain,
    uniform_strategy,
    validate_mdp,
)
from .numeric import EXACT, FLOAT
from .reach import (
    OptSet,
    PrunedModel,
    ReachLexResult,
    ValueVector,
    conditional_expected_length,
    max_reach_values,
    min_expected_length,
    opt_action_set,
    positive_value_states,
    prune_reach,
    solve_reach_length,
)

__all__ = [name for name in dir() if not name.startswith("_")]

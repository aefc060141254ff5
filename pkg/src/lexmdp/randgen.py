"""Seeded random instances for cross-checking solvers against the oracle.

Small MDPs with bounded-denominator rational rows, a designated sink
target (or bad sink), and optionally integer rewards. Generation
retries until the initial state can actually attain a positive value,
which is what the solvers' conditional stage requires.
"""

from __future__ import annotations

import random
from fractions import Fraction

from . import graphs
from .model import Mdp, MemorylessStrategy
from .numeric import EXACT
from .reach import OptSet

_ACTION_NAMES = ("a", "b", "c", "d")


def _random_row(rng: random.Random, n_states: int, max_support: int,
                max_denominator: int) -> tuple[tuple[int, Fraction], ...]:
    support_size = rng.randint(1, min(max_support, n_states))
    support = rng.sample(range(n_states), support_size)
    if support_size == 1:
        return ((support[0], Fraction(1)),)
    denom = rng.randint(support_size, max_denominator)
    cuts = sorted(rng.sample(range(1, denom), support_size - 1))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [denom])]
    return tuple(sorted((s, Fraction(w, denom)) for s, w in zip(support, parts)))


def _random_mdp(rng: random.Random, max_states: int, max_actions: int,
                max_denominator: int, sink_labels: tuple[str, ...],
                reward_range: tuple[int, int] | None) -> Mdp:
    n_sinks = len(sink_labels)
    n_states = rng.randint(n_sinks + 1, max(max_states, n_sinks + 1))
    action_names = _ACTION_NAMES[:max_actions]
    sinks = list(range(n_states - n_sinks, n_states))
    rows: dict[tuple[int, int], tuple] = {}
    for s in range(n_states):
        if s in sinks:
            rows[(s, 0)] = ((s, Fraction(1)),)
            continue
        k = rng.randint(1, max_actions)
        acts = sorted(rng.sample(range(max_actions), k))
        for a in acts:
            rows[(s, a)] = _random_row(rng, n_states, 3, max_denominator)
    rewards = None
    if reward_range is not None:
        lo, hi = reward_range
        rewards = {key: Fraction(rng.randint(lo, hi)) for key in rows}
    label_sets: dict[str, frozenset[int]] = {"target": frozenset(), "bad": frozenset()}
    for label, state in zip(sink_labels, sinks):
        label_sets[label] = label_sets[label] | {state}
    return Mdp(
        state_names=tuple(f"s{i}" for i in range(n_states)),
        action_names=action_names,
        rows=rows,
        initial_state=0,
        target_set=label_sets["target"],
        bad_set=label_sets["bad"],
        rewards=rewards,
        mode=EXACT,
    )


def random_reach_instance(rng: random.Random, max_states: int = 5,
                          max_actions: int = 3, max_denominator: int = 8) -> Mdp:
    """Random MDP with a reachable sink target (possibly plus a trap sink)."""
    while True:
        sink_labels = ("target",) if rng.random() < 0.5 else ("target", "bad")
        model = _random_mdp(rng, max_states, max_actions, max_denominator,
                            sink_labels, None)
        if model.initial_state in graphs.states_reaching(model, model.target_set):
            return model


def random_safety_instance(rng: random.Random, max_states: int = 5,
                           max_actions: int = 3, max_denominator: int = 8,
                           reward_range: tuple[int, int] = (-2, 3)) -> Mdp:
    """Random rewarded MDP where staying safe is possible from the start.

    The positive-safety condition is graph-checkable: the start must
    reach the region that can avoid the bad sink forever.
    """
    while True:
        model = _random_mdp(rng, max_states, max_actions, max_denominator,
                            ("bad",), reward_range)
        good = graphs.avoid_forever(model, set(model.bad_set))
        if not good:
            continue
        if model.initial_state in graphs.states_reaching(model, good):
            return model


def random_opt_strategy(rng: random.Random, model: Mdp, opt: OptSet) -> MemorylessStrategy:
    """Randomized strategy supported on the locally optimal actions.

    Weights are small random rationals, so exact-mode identities stay
    exact under it.
    """
    choice = {}
    for s in range(model.n_states):
        acts = opt[s]
        size = rng.randint(1, len(acts))
        support = sorted(rng.sample(list(acts), size))
        weights = [rng.randint(1, 4) for _ in support]
        total = sum(weights)
        choice[s] = tuple((a, Fraction(w, total)) for a, w in zip(support, weights))
    return MemorylessStrategy(choice)

"""Stage one and two for the safety objective.

Safety values come from the complement of minimal reach probabilities
into the bad set, after the universal-predecessor fixpoint settles the
qualitative part. Stage two maximizes the expected mean payoff on the
value-renormalized pruned model with multichain policy iteration on
exact gain/bias solves.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from . import graphs, linalg
from .errors import PreconditionError
from .model import MemorylessStrategy, Mdp, induced_chain, require_valid
from .numeric import DEFAULT_EPS, DEFAULT_ETA, EXACT, FLOAT, Value, one, zero
from .reach import (
    OptSet,
    PrunedModel,
    ValueVector,
    _MAX_ROUNDS,
    _FLOAT_STRICT,
    _one_step,
    _optimal_reach_values,
    opt_action_set,
    prune_reach,
)


@dataclass(frozen=True)
class SafetyPartition:
    """Universal-predecessor levels of the bad set and the induced split.

    `good` holds the states of safety value exactly one, `v` the
    uncertain middle, and the bad set completes the partition.
    """

    upre_levels: tuple[frozenset[int], ...]
    good: frozenset[int]
    v: frozenset[int]


@dataclass(frozen=True)
class SafetyMpResult:
    """Output of the two-stage safety / mean-payoff solve."""

    strategy: MemorylessStrategy
    safety_probability: Value
    conditional_mean_payoff: Value
    diagnostics: dict


def upre_partition(model: Mdp, bad: frozenset[int] | set[int]) -> SafetyPartition:
    """Iterate universal predecessors of the bad set to a fixpoint.

    A state joins the next level when every legal action has a
    positive-probability edge into the current level. Purely graph
    based; stabilizes within |S| rounds.
    """
    bad = frozenset(bad)
    levels = [bad]
    current = set(bad)
    while True:
        nxt = set()
        for s in range(model.n_states):
            if all(
                any(t in current for t in model.support(s, a))
                for a in model.legal_actions(s)
            ):
                nxt.add(s)
        if nxt == current:
            break
        levels.append(frozenset(nxt))
        current = nxt
    good = frozenset(set(range(model.n_states)) - current)
    v = frozenset(set(range(model.n_states)) - good - bad)
    return SafetyPartition(upre_levels=tuple(levels), good=good, v=v)


def max_safety_values(model: Mdp, bad: frozenset[int] | set[int],
                      *, eps: float = DEFAULT_EPS) -> ValueVector:
    """Optimal probability of never entering `bad`, per state.

    Computed as one minus the minimal reach probability into the bad
    set, which shares the certified reach machinery; consistent with
    the partition (exactly one on good states, zero on bad).
    """
    bad = set(bad)
    partition = upre_partition(model, bad)
    min_reach, _info = _optimal_reach_values(
        model, maximize=False,
        boundary_zero=set(partition.good), boundary_one=bad, eps=eps,
    )
    values = [one(model.mode) - v for v in min_reach]
    for s in partition.good:
        if model.mode == EXACT and values[s] != 1:
            raise RuntimeError("good state without safety value one")
    return ValueVector(tuple(values), model.mode)


def opt_action_set_safety(model: Mdp, values: ValueVector,
                          *, eta: float = DEFAULT_ETA) -> OptSet:
    """Same defining equality as the reachability case; shared implementation."""
    return opt_action_set(model, values, eta=eta)


def prune_safety(model: Mdp, values: ValueVector, opt: OptSet) -> PrunedModel:
    """Value-renormalized restriction, keeping the reward table.

    Identical construction to the reachability pruning; rewards carry
    over unchanged on the surviving (state, action) pairs.
    """
    return prune_reach(model, values, opt)


# ---------------------------------------------------------------------------
# mean payoff on a fixed chain: gains and biases
# ---------------------------------------------------------------------------


def _chain_gain_bias(rows, rewards, mode):
    """Gain and bias vectors of a finite reward chain.

    Each recurrent class gets its stationary distribution by an exact
    linear solve (never power iteration, so periodic classes are fine);
    transient states pick up absorption-weighted gains.
    """
    n = len(rows)
    succ = [[t for t, _ in row] for row in rows]
    bottoms = graphs.bottom_sccs(succ)
    z = zero(mode)
    g: list[Value | None] = [None] * n
    h: list[Value | None] = [None] * n
    for comp in bottoms:
        k = len(comp)
        index = {s: i for i, s in enumerate(comp)}
        matrix = [[z] * k for _ in range(k)]
        rhs = [z] * k
        # stationarity rows for all but the last member, then normalization
        for s in comp:
            for t, p in rows[s]:
                j = index[t]
                if j < k - 1:
                    matrix[j][index[s]] += p
        for i in range(k - 1):
            matrix[i][i] -= 1
        for i in range(k):
            matrix[k - 1][i] = one(mode)
        rhs[k - 1] = one(mode)
        stationary = linalg.solve(matrix, [rhs], mode)[0]
        gain = sum((stationary[index[s]] * rewards[s] for s in comp), z)
        for s in comp:
            g[s] = gain
        anchor = comp[0]
        h[anchor] = z
        others = comp[1:]
        if others:
            oidx = {s: i for i, s in enumerate(others)}
            k2 = len(others)
            m2 = [[z] * k2 for _ in range(k2)]
            r2 = [z] * k2
            for s in others:
                i = oidx[s]
                m2[i][i] += 1
                r2[i] = rewards[s] - gain
                for t, p in rows[s]:
                    if t in oidx:
                        m2[i][oidx[t]] -= p
            sol = linalg.solve(m2, [r2], mode)[0]
            for s in others:
                h[s] = sol[oidx[s]]
    transient = [s for s in range(n) if g[s] is None]
    if transient:
        index = {s: i for i, s in enumerate(transient)}
        k = len(transient)
        matrix = [[z] * k for _ in range(k)]
        rhs_g = [z] * k
        for s in transient:
            i = index[s]
            matrix[i][i] += 1
            for t, p in rows[s]:
                if t in index:
                    matrix[i][index[t]] -= p
                else:
                    rhs_g[i] += p * g[t]
        sol_g = linalg.solve(matrix, [rhs_g], mode)[0]
        for s in transient:
            g[s] = sol_g[index[s]]
        rhs_h = [z] * k
        for s in transient:
            i = index[s]
            rhs_h[i] = rewards[s] - g[s]
            for t, p in rows[s]:
                if t not in index:
                    rhs_h[i] += p * h[t]
        sol_h = linalg.solve(matrix, [rhs_h], mode)[0]
        for s in transient:
            h[s] = sol_h[index[s]]
    return g, h


def _mean_payoff_policy_iteration(model: Mdp):
    """Multichain policy iteration maximizing the long-run average reward.

    Gain improvement first; on gain plateaus a bias improvement step
    among the gain-conserving actions keeps the iteration moving.
    Exact mode terminates with both optimality equations holding
    exactly.
    """
    mode = model.mode
    strict = _FLOAT_STRICT if mode == FLOAT else 0
    to_num = float if mode == FLOAT else (lambda v: v)
    policy = {s: model.legal_actions(s)[0] for s in range(model.n_states)}
    rounds = 0
    while True:
        rounds += 1
        if rounds > _MAX_ROUNDS:
            raise RuntimeError("mean-payoff policy iteration failed to converge")
        rows = [model.row(s, policy[s]) for s in range(model.n_states)]
        rewards = [to_num(model.reward(s, policy[s])) for s in range(model.n_states)]
        g, h = _chain_gain_bias(rows, rewards, mode)
        switched = False
        for s in range(model.n_states):
            best = g[s]
            best_a = None
            for a in model.legal_actions(s):
                q = _one_step(model, s, a, g, to_num)
                if q > best + strict:
                    best = q
                    best_a = a
            if best_a is not None and best_a != policy[s]:
                policy[s] = best_a
                switched = True
        if switched:
            continue
        for s in range(model.n_states):
            current = g[s] + h[s]
            best = current
            best_a = None
            for a in model.legal_actions(s):
                q = _one_step(model, s, a, g, to_num)
                conserving = abs(q - g[s]) <= strict if mode == FLOAT else q == g[s]
                if not conserving:
                    continue
                e = to_num(model.reward(s, a)) + _one_step(model, s, a, h, to_num)
                if e > best + strict:
                    best = e
                    best_a = a
            if best_a is not None and best_a != policy[s]:
                policy[s] = best_a
                switched = True
        if not switched:
            return policy, g, h, rounds


def max_mean_payoff(pruned: PrunedModel) -> tuple[MemorylessStrategy, Value]:
    """Deterministic strategy maximizing expected mean payoff in the pruned model.

    Returns the optimal gain at the pruned model's initial state.
    """
    model = pruned.model
    if model.rewards is None:
        raise PreconditionError("mean payoff requires a reward table")
    policy, g, h, _rounds = _mean_payoff_policy_iteration(model)
    strategy = _canonical_mp_strategy(model, g, h)
    return strategy, g[model.initial_state]


def _canonical_mp_strategy(model: Mdp, g, h) -> MemorylessStrategy:
    """Lowest-index action conserving first the gain, then the bias equation."""
    mode = model.mode
    strict = _FLOAT_STRICT if mode == FLOAT else 0
    to_num = float if mode == FLOAT else (lambda v: v)
    assignment = {}
    for s in range(model.n_states):
        best_gain = None
        for a in model.legal_actions(s):
            q = _one_step(model, s, a, g, to_num)
            if best_gain is None or q > best_gain + strict:
                best_gain = q
        if mode == EXACT and best_gain != g[s]:
            raise RuntimeError("gain optimality certificate failed")
        conserving = [
            a for a in model.legal_actions(s)
            if (abs(_one_step(model, s, a, g, to_num) - best_gain) <= strict
                if mode == FLOAT
                else _one_step(model, s, a, g, to_num) == best_gain)
        ]
        best_bias = None
        best_a = None
        for a in conserving:
            e = to_num(model.reward(s, a)) + _one_step(model, s, a, h, to_num)
            if best_bias is None or e > best_bias + strict:
                best_bias = e
                best_a = a
        if mode == EXACT and best_bias != g[s] + h[s]:
            raise RuntimeError("bias optimality certificate failed")
        assignment[s] = best_a
    return MemorylessStrategy.pure(assignment, mode)


def solve_safety_mp(model: Mdp, s0: int | None = None,
                    bad: frozenset[int] | set[int] | None = None,
                    *, eps: float = DEFAULT_EPS, eta: float = DEFAULT_ETA
                    ) -> SafetyMpResult:
    """Two-stage solve: best safety probability, then best mean payoff.

    Raises PreconditionError when no strategy stays safe with positive
    probability from s0 (the conditional mean payoff is undefined).
    """
    require_valid(model)
    if model.rewards is None:
        raise PreconditionError("model carries no rewards")
    if s0 is None:
        s0 = model.initial_state
    bad = frozenset(model.bad_set if bad is None else bad)
    work = model if s0 == model.initial_state else dataclasses.replace(model, initial_state=s0)
    partition = upre_partition(work, bad)
    values = max_safety_values(work, bad, eps=eps)
    if values[s0] == 0:
        raise PreconditionError("safety unachievable: conditioning event null")
    opt = opt_action_set_safety(work, values, eta=eta)
    pruned = prune_safety(work, values, opt)
    policy, g, h, rounds = _mean_payoff_policy_iteration(pruned.model)
    del policy
    strategy_pruned = _canonical_mp_strategy(pruned.model, g, h)
    to_pruned = {orig: i for i, orig in enumerate(pruned.state_map)}
    assignment = {}
    for s in range(model.n_states):
        p = to_pruned.get(s)
        if p is not None:
            assignment[s] = strategy_pruned.action_at(p)
        else:
            assignment[s] = model.legal_actions(s)[0]
    strategy = MemorylessStrategy.pure(assignment, model.mode)
    diagnostics = {
        "mode": model.mode,
        "n_states": model.n_states,
        "n_pruned": pruned.model.n_states,
        "mp_rounds": rounds,
        "partition_sizes": {
            "good": len(partition.good),
            "v": len(partition.v),
            "bad": len(bad),
        },
        "eps": eps,
        "eta": eta,
    }
    return SafetyMpResult(
        strategy=strategy,
        safety_probability=values[s0],
        conditional_mean_payoff=g[to_pruned[s0]],
        diagnostics=diagnostics,
    )


def conditional_mean_payoff(model: Mdp, strategy: MemorylessStrategy,
                            s0: int, bad: frozenset[int] | set[int],
                            *, eps: float = DEFAULT_EPS, eta: float = DEFAULT_ETA
                            ) -> Value:
    """Mean payoff of the strategy conditioned on staying safe forever.

    Evaluated as the plain mean payoff of the strategy's chain in the
    pruned model, which requires the strategy to only play locally
    optimal actions.
    """
    if model.rewards is None:
        raise PreconditionError("model carries no rewards")
    bad = frozenset(bad)
    values = max_safety_values(model, bad, eps=eps)
    if values[s0] == 0:
        raise PreconditionError("safety unachievable: conditioning event null")
    opt = opt_action_set_safety(model, values, eta=eta)
    for s in range(model.n_states):
        if values[s] <= 0:
            continue
        for a in strategy.support(s):
            if not opt.contains(s, a):
                raise PreconditionError(
                    f"strategy plays a non-optimal action at state "
                    f"{model.state_names[s]}; conditional evaluation undefined"
                )
    pruned = prune_safety(model, values, opt)
    to_pruned = {orig: i for i, orig in enumerate(pruned.state_map)}
    choice = {
        to_pruned[s]: strategy.distribution(s)
        for s in range(model.n_states)
        if s in to_pruned
    }
    chain = induced_chain(pruned.model, MemorylessStrategy(choice))
    to_num = float if model.mode == FLOAT else (lambda v: v)
    rewards = [to_num(r) for r in chain.rewards]
    g, _h = _chain_gain_bias(chain.rows, rewards, model.mode)
    return g[to_pruned[s0]]


def expected_conditional_finite_reward(model: Mdp, strategy: MemorylessStrategy,
                                       s0: int, bad: frozenset[int] | set[int],
                                       n: int) -> Value:
    """Expected reward over the first n steps, conditioned on staying safe.

    Dynamic programming over (state, remaining steps): each trajectory
    is weighted by the probability of staying safe forever after it.
    (1/n) times this quantity converges to the conditional mean payoff.
    """
    if n < 1:
        raise ValueError("horizon must be at least 1")
    if model.rewards is None:
        raise PreconditionError("model carries no rewards")
    bad = frozenset(bad)
    chain = induced_chain(model, strategy)
    stay_safe = _chain_safety_probs(chain, bad, model.mode)
    if stay_safe[s0] == 0:
        raise PreconditionError("conditioning event null: strategy never stays safe")
    z = zero(model.mode)
    u = [z] * model.n_states
    for _ in range(n):
        nxt = [z] * model.n_states
        for s in range(model.n_states):
            acc = z
            for a, w in strategy.distribution(s):
                reward = model.reward(s, a)
                for succ, p in model.row(s, a):
                    acc += w * p * (reward * stay_safe[succ] + u[succ])
            nxt[s] = acc
        u = nxt
    return u[s0] / stay_safe[s0]


def _chain_safety_probs(chain, bad: frozenset[int], mode: str) -> list[Value]:
    """Per-state probability that the chain never enters `bad`."""
    n = chain.n_states
    pred: list[list[int]] = [[] for _ in range(n)]
    for s in range(n):
        for succ, _ in chain.rows[s]:
            pred[succ].append(s)
    can_hit = graphs.reachable_from(pred, bad)
    reach: list[Value] = [zero(mode)] * n
    for b in bad:
        reach[b] = one(mode)
    transient = sorted(can_hit - bad)
    if transient:
        index = {s: i for i, s in enumerate(transient)}
        k = len(transient)
        z = zero(mode)
        matrix = [[z] * k for _ in range(k)]
        rhs = [z] * k
        for s in transient:
            i = index[s]
            matrix[i][i] += 1
            for succ, p in chain.rows[s]:
                if succ in index:
                    matrix[i][index[succ]] -= p
                elif succ in bad:
                    rhs[i] += p
        sol = linalg.solve(matrix, [rhs], mode)[0]
        for s in transient:
            reach[s] = sol[index[s]]
    return [one(mode) - r for r in reach]

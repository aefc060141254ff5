"""Ground-truth machinery: exhaustive enumeration and direct chain analysis.

Everything here recomputes quantities from first principles (its own
component decomposition, its own linear systems) so the solvers can be
checked against an implementation that shares as little code with them
as possible. Also hosts the Monte-Carlo smoke-test simulator.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import product
from typing import Iterator

from . import linalg
from .errors import EnumerationCapError, PreconditionError
from .model import MarkovChain, Mdp, MemorylessStrategy, induced_chain
from .numeric import EXACT, FLOAT, Value, one, zero

DEFAULT_ENUMERATION_CAP = 10 ** 6


def count_md_strategies(model: Mdp) -> int:
    return math.prod(len(model.legal_actions(s)) for s in range(model.n_states))


def enumerate_md_strategies(model: Mdp,
                            cap: int = DEFAULT_ENUMERATION_CAP
                            ) -> Iterator[MemorylessStrategy]:
    """Every memoryless deterministic strategy, in lexicographic order.

    Ordered by state index, then action index; the count is the product
    of the per-state action counts and must stay under `cap`.
    """
    count = count_md_strategies(model)
    if count > cap:
        raise EnumerationCapError(count, cap)
    per_state = [model.legal_actions(s) for s in range(model.n_states)]
    for combo in product(*per_state):
        yield MemorylessStrategy.pure(dict(enumerate(combo)), model.mode)


# ---------------------------------------------------------------------------
# chain analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainAnalysis:
    """Per-state answers for a fixed chain; fields are None when not computed.

    `absorption[s][i]` is the probability of ending up in recurrent
    class i from state s; the classes are `bottom_components` and they
    absorb total probability one from everywhere.
    """

    reach_probability: tuple[Value, ...] | None = None
    conditional_expected_length: tuple[Value | None, ...] | None = None
    bottom_components: tuple[tuple[int, ...], ...] | None = None
    stationary: tuple[tuple[Value, ...] | None, ...] | None = None
    gain: tuple[Value | None, ...] | None = None
    absorption: tuple[tuple[Value, ...], ...] | None = None
    safety_probability: tuple[Value, ...] | None = None
    conditional_mean_payoff: tuple[Value | None, ...] | None = None


def _kosaraju_components(succ: list[list[int]]) -> list[list[int]]:
    """Strongly connected components by forward/backward sweeps."""
    n = len(succ)
    order: list[int] = []
    seen = [False] * n
    for root in range(n):
        if seen[root]:
            continue
        stack = [(root, iter(succ[root]))]
        seen[root] = True
        while stack:
            node, it = stack[-1]
            advanced = False
            for child in it:
                if not seen[child]:
                    seen[child] = True
                    stack.append((child, iter(succ[child])))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
    rev: list[list[int]] = [[] for _ in range(n)]
    for u in range(n):
        for v in succ[u]:
            rev[v].append(u)
    comp = [-1] * n
    comps: list[list[int]] = []
    for root in reversed(order):
        if comp[root] != -1:
            continue
        cid = len(comps)
        members = [root]
        comp[root] = cid
        stack = [root]
        while stack:
            u = stack.pop()
            for v in rev[u]:
                if comp[v] == -1:
                    comp[v] = cid
                    members.append(v)
                    stack.append(v)
        comps.append(sorted(members))
    return comps


def _bottom_components(chain: MarkovChain) -> list[list[int]]:
    succ = [[t for t, _ in row] for row in chain.rows]
    bottoms = []
    for members in _kosaraju_components(succ):
        inside = set(members)
        if all(t in inside for s in members for t in succ[s]):
            bottoms.append(members)
    bottoms.sort(key=min)
    return bottoms


def _transient_solve(chain: MarkovChain, transient: list[int],
                     rhs_columns: list[list[Value]], mode: str) -> list[list[Value]]:
    """Solve (I - Q) x = rhs for the transient block of the chain."""
    index = {s: i for i, s in enumerate(transient)}
    k = len(transient)
    z = zero(mode)
    matrix = [[z] * k for _ in range(k)]
    for s in transient:
        i = index[s]
        matrix[i][i] += 1
        for t, p in chain.rows[s]:
            if t in index:
                matrix[i][index[t]] -= p
    return linalg.solve(matrix, rhs_columns, mode)


def exact_chain_reach_analysis(chain: MarkovChain,
                               targets: frozenset[int] | set[int]) -> ChainAnalysis:
    """Reach probability and conditional expected steps for every state.

    Straight absorbing-chain linear algebra; states whose conditioning
    event is null get None as their conditional length.
    """
    targets = set(targets)
    n = chain.n_states
    mode = chain.mode
    pred: list[list[int]] = [[] for _ in range(n)]
    for s in range(n):
        for t, _ in chain.rows[s]:
            pred[t].append(s)
    reaching = set(targets)
    stack = list(targets)
    while stack:
        u = stack.pop()
        for v in pred[u]:
            if v not in reaching:
                reaching.add(v)
                stack.append(v)
    p: list[Value] = [zero(mode)] * n
    for t in targets:
        p[t] = one(mode)
    transient = sorted(reaching - targets)
    if transient:
        rhs = [zero(mode)] * len(transient)
        for i, s in enumerate(transient):
            for t, q in chain.rows[s]:
                if t in targets:
                    rhs[i] += q
        sol = _transient_solve(chain, transient, [rhs], mode)[0]
        for i, s in enumerate(transient):
            p[s] = sol[i]
    w: list[Value] = [zero(mode)] * n
    if transient:
        rhs_w = [p[s] for s in transient]
        sol_w = _transient_solve(chain, transient, [rhs_w], mode)[0]
        for i, s in enumerate(transient):
            w[s] = sol_w[i]
    cond: list[Value | None] = []
    for s in range(n):
        cond.append(w[s] / p[s] if p[s] > 0 else None)
    return ChainAnalysis(
        reach_probability=tuple(p),
        conditional_expected_length=tuple(cond),
    )


def exact_chain_mp_analysis(chain: MarkovChain,
                            bad: frozenset[int] | set[int]) -> ChainAnalysis:
    """Recurrent-class decomposition with gains, absorption and safety.

    Stationary distributions come from exact stationarity equations
    (periodic classes would defeat power iteration). The safety
    probability of a state is the mass absorbed outside the bad set;
    its conditional mean payoff reweights the safe class gains.
    """
    bad = set(bad)
    mode = chain.mode
    n = chain.n_states
    bottoms = _bottom_components(chain)
    in_bottom: dict[int, int] = {}
    for ci, members in enumerate(bottoms):
        for s in members:
            in_bottom[s] = ci
    stationary: list[tuple[Value, ...] | None] = []
    gains: list[Value | None] = []
    for members in bottoms:
        if any(s in bad for s in members):
            stationary.append(None)
            gains.append(None)
            continue
        k = len(members)
        index = {s: i for i, s in enumerate(members)}
        z = zero(mode)
        matrix = [[z] * k for _ in range(k)]
        rhs = [z] * k
        # normalization first, stationarity for every member but the first
        for i in range(k):
            matrix[0][i] = one(mode)
        rhs[0] = one(mode)
        for s in members:
            for t, q in chain.rows[s]:
                j = index[t]
                if j > 0:
                    matrix[j][index[s]] += q
        for j in range(1, k):
            matrix[j][j] -= 1
        dist = linalg.solve(matrix, [rhs], mode)[0]
        stationary.append(tuple(dist))
        if chain.rewards is not None:
            gains.append(sum((dist[index[s]] * chain.rewards[s] for s in members),
                             zero(mode)))
        else:
            gains.append(None)
    transient = sorted(s for s in range(n) if s not in in_bottom)
    absorption: list[list[Value]] = [[zero(mode)] * len(bottoms) for _ in range(n)]
    for s, ci in in_bottom.items():
        absorption[s][ci] = one(mode)
    if transient:
        columns = []
        for ci, members in enumerate(bottoms):
            member_set = set(members)
            col = [zero(mode)] * len(transient)
            for i, s in enumerate(transient):
                for t, q in chain.rows[s]:
                    if t in member_set:
                        col[i] += q
                    elif t in in_bottom:
                        pass
                    # transient successors handled by the system matrix
            columns.append(col)
        sols = _transient_solve(chain, transient, columns, mode)
        for ci in range(len(bottoms)):
            for i, s in enumerate(transient):
                absorption[s][ci] = sols[ci][i]
    is_bad_comp = [any(s in bad for s in members) for members in bottoms]
    safety: list[Value] = []
    cond_mp: list[Value | None] = []
    for s in range(n):
        safe_mass = sum(
            (absorption[s][ci] for ci in range(len(bottoms)) if not is_bad_comp[ci]),
            zero(mode),
        )
        safety.append(safe_mass)
        if safe_mass > 0 and chain.rewards is not None:
            weighted = sum(
                (absorption[s][ci] * gains[ci] for ci in range(len(bottoms))
                 if not is_bad_comp[ci]),
                zero(mode),
            )
            cond_mp.append(weighted / safe_mass)
        else:
            cond_mp.append(None)
    return ChainAnalysis(
        bottom_components=tuple(tuple(m) for m in bottoms),
        stationary=tuple(stationary),
        gain=tuple(gains),
        absorption=tuple(tuple(row) for row in absorption),
        safety_probability=tuple(safety),
        conditional_mean_payoff=tuple(cond_mp),
    )


# ---------------------------------------------------------------------------
# brute-force lexicographic optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BruteForceResult:
    """All lexicographically optimal deterministic strategies and their value pair."""

    strategies: tuple[MemorylessStrategy, ...]
    primary: Value
    secondary: Value | None


def _lex_better_reach(candidate, incumbent) -> bool:
    p_new, len_new = candidate
    p_old, len_old = incumbent
    if p_new != p_old:
        return p_new > p_old
    if len_old is None or len_new is None:
        return False
    return len_new < len_old


def _lex_better_safety(candidate, incumbent) -> bool:
    s_new, mp_new = candidate
    s_old, mp_old = incumbent
    if s_new != s_old:
        return s_new > s_old
    if mp_old is None or mp_new is None:
        return False
    return mp_new > mp_old


def lexicographic_brute_force(model: Mdp, s0: int, objective: str,
                              targets: frozenset[int] | set[int] | None = None,
                              bad: frozenset[int] | set[int] | None = None,
                              cap: int = DEFAULT_ENUMERATION_CAP) -> BruteForceResult:
    """Exhaustive lexicographic optimum over deterministic strategies.

    `objective` is "reach-length" (max probability, then min conditional
    steps) or "safety-mp" (max probability, then max conditional mean
    payoff). Ties are all reported, never broken.
    """
    if objective not in ("reach-length", "safety-mp"):
        raise ValueError(f"unknown objective {objective!r}")
    if objective == "reach-length":
        goal = set(model.target_set if targets is None else targets)
    else:
        goal = set(model.bad_set if bad is None else bad)
    best_key = None
    best: list[MemorylessStrategy] = []
    for strategy in enumerate_md_strategies(model, cap=cap):
        chain = induced_chain(model, strategy)
        if objective == "reach-length":
            analysis = exact_chain_reach_analysis(chain, goal)
            key = (analysis.reach_probability[s0],
                   analysis.conditional_expected_length[s0])
            better = _lex_better_reach
        else:
            analysis = exact_chain_mp_analysis(chain, goal)
            key = (analysis.safety_probability[s0],
                   analysis.conditional_mean_payoff[s0])
            better = _lex_better_safety
        if best_key is None or better(key, best_key):
            best_key = key
            best = [strategy]
        elif key == best_key:
            best.append(strategy)
    return BruteForceResult(
        strategies=tuple(best), primary=best_key[0], secondary=best_key[1]
    )


# ---------------------------------------------------------------------------
# seeded simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationStats:
    episodes: int
    horizon: int
    seed: int
    reach_count: int
    reach_frequency: float
    conditional_mean_length: float | None
    conditional_length_se: float | None
    safety_frequency: float
    safety_se: float
    mean_running_average_reward: float | None


def simulate(model: Mdp, strategy: MemorylessStrategy, s0: int,
             episodes: int, horizon: int, seed: int) -> SimulationStats:
    """Seeded rollouts; episodes that miss the target within the horizon
    count as non-reaching, so the conditional length estimate carries a
    (documented) truncation bias controlled by the horizon.
    """
    if episodes < 1 or horizon < 1:
        raise ValueError("episodes and horizon must be at least 1")
    rng = random.Random(seed)
    targets = model.target_set
    bad = model.bad_set
    action_dists = {
        s: ([a for a, _ in strategy.distribution(s)],
            [float(wt) for _, wt in strategy.distribution(s)])
        for s in range(model.n_states)
    }
    row_dists = {
        key: ([t for t, _ in row], [float(p) for _, p in row])
        for key, row in model.rows.items()
    }
    sinks = {
        s for s in range(model.n_states)
        if len(model.legal_actions(s)) == 1
        and model.rows[(s, model.legal_actions(s)[0])] == ((s, one(model.mode)),)
    }
    has_rewards = model.rewards is not None
    lengths: list[int] = []
    safe_episodes = 0
    total_running_avg = 0.0
    for _ in range(episodes):
        state = s0
        hit_target_at = None
        hit_bad = False
        reward_acc = 0.0
        for step in range(horizon):
            if hit_target_at is None and state in targets:
                hit_target_at = step
            if state in bad:
                hit_bad = True
            if state in sinks:
                if has_rewards:
                    a = model.legal_actions(state)[0]
                    reward_acc += float(model.reward(state, a)) * (horizon - step)
                break
            acts, weights = action_dists[state]
            a = acts[0] if len(acts) == 1 else rng.choices(acts, weights)[0]
            if has_rewards:
                reward_acc += float(model.reward(state, a))
            succs, probs = row_dists[(state, a)]
            state = succs[0] if len(succs) == 1 else rng.choices(succs, probs)[0]
        else:
            if hit_target_at is None and state in targets:
                hit_target_at = horizon
            if state in bad:
                hit_bad = True
        if hit_target_at is not None:
            lengths.append(hit_target_at)
        if not hit_bad:
            safe_episodes += 1
        total_running_avg += reward_acc / horizon
    reach_count = len(lengths)
    reach_freq = reach_count / episodes
    if reach_count:
        mean_len = sum(lengths) / reach_count
        if reach_count > 1:
            var = sum((x - mean_len) ** 2 for x in lengths) / (reach_count - 1)
            se = math.sqrt(var / reach_count)
        else:
            se = 0.0
    else:
        mean_len = None
        se = None
    safety_freq = safe_episodes / episodes
    safety_se = math.sqrt(safety_freq * (1.0 - safety_freq) / episodes)
    return SimulationStats(
        episodes=episodes,
        horizon=horizon,
        seed=seed,
        reach_count=reach_count,
        reach_frequency=reach_freq,
        conditional_mean_length=mean_len,
        conditional_length_se=se,
        safety_frequency=safety_freq,
        safety_se=safety_se,
        mean_running_average_reward=(total_running_avg / episodes) if has_rewards else None,
    )

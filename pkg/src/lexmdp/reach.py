"""Stage one and two for the reachability objective.

Pipeline: optimal reachability values, the per-state set of locally
optimal actions, the value-renormalized pruned MDP, and expected-length
minimization on the pruned model. Exact mode certifies optimality via
Bellman equalities after policy iteration with exact linear solves;
float mode uses interval iteration with end-component quotienting.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import graphs, linalg
from .errors import PreconditionError
from .model import MemorylessStrategy, Mdp, induced_chain, require_valid
from .numeric import DEFAULT_EPS, DEFAULT_ETA, EXACT, FLOAT, Value, one, zero


@dataclass(frozen=True)
class ValueVector:
    """Per-state optimal value of the first objective, in [0, 1]."""

    values: tuple[Value, ...]
    mode: str

    def __getitem__(self, state: int) -> Value:
        return self.values[state]

    def __len__(self) -> int:
        return len(self.values)

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.values)


@dataclass(frozen=True)
class OptSet:
    """For each state, the actions whose one-step expectation meets the value."""

    actions: tuple[tuple[int, ...], ...]

    def __getitem__(self, state: int) -> tuple[int, ...]:
        return self.actions[state]

    def contains(self, state: int, action: int) -> bool:
        return action in self.actions[state]


@dataclass(frozen=True)
class PrunedModel:
    """Restriction to positive-value states and locally optimal actions.

    Transition rows are renormalized by value ratios so every row is
    stochastic again; `state_map[i]` is the original index of pruned
    state i.
    """

    model: Mdp
    origin_values: ValueVector
    state_map: tuple[int, ...]

    def to_original(self, pruned_state: int) -> int:
        return self.state_map[pruned_state]

    def from_original(self, original_state: int) -> int | None:
        try:
            return self.state_map.index(original_state)
        except ValueError:
            return None


@dataclass(frozen=True)
class ReachLexResult:
    """Output of the two-stage reachability solve."""

    strategy: MemorylessStrategy
    reach_probability: Value
    conditional_expected_length: Value
    diagnostics: dict


# ---------------------------------------------------------------------------
# policy iteration and interval iteration cores
# ---------------------------------------------------------------------------

_MAX_ROUNDS = 10_000
_FLOAT_STRICT = 1e-12
#: exact solves get a float warm start above this many unknown states
_SEED_THRESHOLD = 25


def _one_step(model: Mdp, s: int, a: int, values: Sequence, to_num) -> Value:
    acc = None
    for succ, p in model.row(s, a):
        term = to_num(p) * values[succ]
        acc = term if acc is None else acc + term
    return acc


def _evaluate_policy(model, policy, unknown, boundary_one, numeric, values):
    """True reach probability of `policy`'s chain, written into `values`.

    Unknown states that cannot even graph-reach the 1-boundary in the
    chain get exactly zero; the rest solve a nonsingular linear system.
    """
    to_num = float if numeric == FLOAT else (lambda v: v)
    direct = set()
    chain_pred: dict[int, list[int]] = {s: [] for s in unknown}
    for s in unknown:
        for succ, _ in model.row(s, policy[s]):
            if succ in boundary_one:
                direct.add(s)
            elif succ in chain_pred:
                chain_pred[succ].append(s)
    positive = set(direct)
    stack = list(direct)
    while stack:
        u = stack.pop()
        for v in chain_pred[u]:
            if v not in positive:
                positive.add(v)
                stack.append(v)
    for s in unknown:
        values[s] = 0.0 if numeric == FLOAT else Fraction(0)
    if not positive:
        return
    sys_states = sorted(positive)
    index = {s: i for i, s in enumerate(sys_states)}
    n = len(sys_states)
    zero_num = 0.0 if numeric == FLOAT else Fraction(0)
    one_num = 1.0 if numeric == FLOAT else Fraction(1)
    matrix = [[zero_num] * n for _ in range(n)]
    rhs = [zero_num] * n
    for s in sys_states:
        i = index[s]
        matrix[i][i] = one_num
        for succ, p in model.row(s, policy[s]):
            if succ in index:
                matrix[i][index[succ]] -= to_num(p)
            elif succ in boundary_one:
                rhs[i] += to_num(p)
    solution = linalg.solve(matrix, [rhs], EXACT if numeric == EXACT else FLOAT)[0]
    for s in sys_states:
        values[s] = solution[index[s]]


def _policy_iteration_reach(model, unknown, boundary_one, maximize, numeric,
                            seed_policy, values):
    """Optimize reach probability on `unknown`; mutates `values`, returns rounds."""
    policy = dict(seed_policy)
    strict = _FLOAT_STRICT if numeric == FLOAT else 0
    rounds = 0
    while True:
        rounds += 1
        if rounds > _MAX_ROUNDS:
            raise RuntimeError("policy iteration failed to converge")
        _evaluate_policy(model, policy, unknown, boundary_one, numeric, values)
        switched = False
        for s in unknown:
            current = values[s]
            best = current
            best_action = None
            for a in model.legal_actions(s):
                q = _one_step(model, s, a, values,
                              float if numeric == FLOAT else (lambda v: v))
                better = q > best + strict if maximize else q < best - strict
                if better:
                    best = q
                    best_action = a
            if best_action is not None and best_action != policy[s]:
                policy[s] = best_action
                switched = True
        if not switched:
            return policy, rounds


def _bfs_seed_policy(model, unknown, toward):
    """Lowest-index action making one-step progress toward `toward`."""
    dist = graphs.bfs_layers_to(model, toward)
    policy = {}
    for s in unknown:
        chosen = model.legal_actions(s)[0]
        here = dist.get(s)
        if here is not None:
            for a in model.legal_actions(s):
                if any(dist.get(succ, here + 1) < here for succ in model.support(s, a)):
                    chosen = a
                    break
        policy[s] = chosen
    return policy


def _certify_bellman(model, values, maximize, state_set=None):
    """Exact-mode check that values solve the optimality equation."""
    pick = max if maximize else min
    states = range(model.n_states) if state_set is None else state_set
    for s in states:
        best = pick(
            _one_step(model, s, a, values, lambda v: v) for a in model.legal_actions(s)
        )
        if best != values[s]:
            raise RuntimeError(
                f"optimality certificate failed at state {model.state_names[s]}: "
                f"{best} != {values[s]}"
            )


def _optimal_reach_values(model, *, maximize, boundary_zero, boundary_one,
                          eps=DEFAULT_EPS):
    """Shared exact/float engine for optimal reach probabilities.

    `boundary_one`/`boundary_zero` are the qualitatively decided states
    (value exactly 1 / exactly 0); the rest is solved numerically.
    Returns (full value list, diagnostics dict).
    """
    n = model.n_states
    unknown = sorted(set(range(n)) - boundary_zero - boundary_one)
    if model.mode == EXACT:
        values: list[Value] = [Fraction(0)] * n
        for s in boundary_one:
            values[s] = Fraction(1)
        seed = _bfs_seed_policy(model, unknown, boundary_one)
        rounds = 0
        if len(unknown) >= _SEED_THRESHOLD:
            float_values = [0.0] * n
            for s in boundary_one:
                float_values[s] = 1.0
            seed, rounds = _policy_iteration_reach(
                model, unknown, boundary_one, maximize, FLOAT, seed, float_values
            )
        _, exact_rounds = _policy_iteration_reach(
            model, unknown, boundary_one, maximize, EXACT, seed, values
        )
        _certify_bellman(model, values, maximize)
        return values, {"rounds": rounds + exact_rounds, "method": "policy-iteration"}
    values_f, iters = _interval_iteration(
        model, unknown, boundary_zero, boundary_one, maximize, eps
    )
    return values_f, {"rounds": iters, "method": "interval-iteration", "eps": eps}


def _interval_iteration(model, unknown, boundary_zero, boundary_one, maximize, eps):
    """Sound float values: lower/upper iteration until the gap closes.

    For maximization, end components inside the unknown region are
    collapsed first; otherwise the upper iteration would stall on them.
    """
    n = model.n_states
    group_of = {s: ("u", s) for s in unknown}
    if maximize:
        for comp, _stay in graphs.mec_decomposition(model, unknown):
            rep = min(comp)
            for s in comp:
                group_of[s] = ("m", rep)
    groups = sorted(set(group_of.values()))
    gidx = {g: i for i, g in enumerate(groups)}
    members: dict[int, list[int]] = {i: [] for i in range(len(groups))}
    for s in unknown:
        members[gidx[group_of[s]]].append(s)
    # each quotient node's actions: (mass into groups, mass into the 1-boundary)
    node_actions: list[list[tuple[dict[int, float], float]]] = [[] for _ in groups]
    for gi, mem in members.items():
        mem_set = set(mem)
        collapsed = group_of[mem[0]][0] == "m"
        for s in mem:
            for a in model.legal_actions(s):
                supp = model.support(s, a)
                if collapsed and all(t in mem_set for t in supp):
                    continue  # internal to a collapsed component
                mass: dict[int, float] = {}
                to_one = 0.0
                for succ, p in model.row(s, a):
                    fp = float(p)
                    if succ in boundary_one:
                        to_one += fp
                    elif succ in boundary_zero:
                        pass
                    else:
                        j = gidx[group_of[succ]]
                        mass[j] = mass.get(j, 0.0) + fp
                node_actions[gi].append((mass, to_one))
    for gi, acts in enumerate(node_actions):
        if not acts:
            raise RuntimeError("unknown region contains a node with no external action")
    m = len(groups)
    lower = [0.0] * m
    upper = [1.0] * m
    pick = max if maximize else min
    iters = 0
    while True:
        iters += 1
        if iters > 2_000_000:
            raise RuntimeError("interval iteration failed to converge")
        new_lower = [0.0] * m
        new_upper = [0.0] * m
        gap = 0.0
        for gi in range(m):
            lo = pick(
                sum(p * lower[j] for j, p in mass.items()) + to_one
                for mass, to_one in node_actions[gi]
            )
            hi = pick(
                sum(p * upper[j] for j, p in mass.items()) + to_one
                for mass, to_one in node_actions[gi]
            )
            new_lower[gi] = max(lo, lower[gi])
            new_upper[gi] = min(hi, upper[gi])
            gap = max(gap, new_upper[gi] - new_lower[gi])
        lower, upper = new_lower, new_upper
        if gap <= eps:
            break
    values = [0.0] * n
    for s in boundary_one:
        values[s] = 1.0
    for s in unknown:
        gi = gidx[group_of[s]]
        values[s] = min(1.0, max(0.0, (lower[gi] + upper[gi]) / 2.0))
    return values, iters


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def positive_value_states(model: Mdp, targets: frozenset[int] | set[int]) -> set[int]:
    """States with positive optimal reach probability: a pure graph search."""
    if not targets:
        raise PreconditionError("target set is empty")
    return graphs.states_reaching(model, targets)


def _max_reach_with_info(model: Mdp, targets: set[int], eps: float):
    positive = positive_value_states(model, targets)
    boundary_zero = set(range(model.n_states)) - positive
    boundary_one = graphs.almost_sure_reach(model, targets)
    values, info = _optimal_reach_values(
        model, maximize=True,
        boundary_zero=boundary_zero, boundary_one=boundary_one, eps=eps,
    )
    return ValueVector(tuple(values), model.mode), info


def max_reach_values(model: Mdp, targets: frozenset[int] | set[int],
                     *, eps: float = DEFAULT_EPS) -> ValueVector:
    """Optimal probability of eventually reaching `targets`, per state."""
    values, _info = _max_reach_with_info(model, set(targets), eps)
    return values


def opt_action_set(model: Mdp, values: ValueVector, *, eta: float = DEFAULT_ETA) -> OptSet:
    """Actions whose one-step expected value equals the state value.

    Exact mode tests the equality exactly; float mode accepts a slack
    of `eta` and is documented as approximate near ties.
    """
    per_state: list[tuple[int, ...]] = []
    for s in range(model.n_states):
        acts = []
        for a in model.legal_actions(s):
            expected = _one_step(model, s, a, values.values, lambda v: v)
            if model.mode == EXACT:
                if expected == values[s]:
                    acts.append(a)
            elif abs(expected - values[s]) <= eta:
                acts.append(a)
        per_state.append(tuple(acts))
    return OptSet(tuple(per_state))


def prune_reach(model: Mdp, values: ValueVector, opt: OptSet) -> PrunedModel:
    """Keep positive-value states and locally optimal actions, renormalized.

    New probabilities are P(s,a,s') * v(s') / v(s); successors with
    value zero disappear and every row sums to one again.
    """
    keep = [s for s in range(model.n_states) if values[s] > 0]
    inv = {s: i for i, s in enumerate(keep)}
    rows = {}
    rewards = {} if model.rewards is not None else None
    for s in keep:
        if not opt[s]:
            raise RuntimeError(
                f"state {model.state_names[s]} has positive value but no "
                "locally optimal action"
            )
        for a in opt[s]:
            entries = []
            for succ, p in model.row(s, a):
                if succ in inv:
                    entries.append((inv[succ], p * values[succ] / values[s]))
            total = sum(v for _, v in entries)
            if model.mode == EXACT:
                if total != 1:
                    raise RuntimeError(
                        f"pruned row at ({model.state_names[s]},"
                        f"{model.action_names[a]}) sums to {total}"
                    )
            else:
                if abs(total - 1.0) > 1e-9:
                    raise RuntimeError(
                        f"pruned row at ({model.state_names[s]},"
                        f"{model.action_names[a]}) sums to {total!r}"
                    )
                entries = [(succ, p / total) for succ, p in entries]
            rows[(inv[s], a)] = tuple(sorted(entries))
            if rewards is not None:
                rewards[(inv[s], a)] = model.reward(s, a)
    pruned = Mdp(
        state_names=tuple(model.state_names[s] for s in keep),
        action_names=model.action_names,
        rows=rows,
        initial_state=inv.get(model.initial_state, 0),
        target_set=frozenset(inv[s] for s in model.target_set if s in inv),
        bad_set=frozenset(inv[s] for s in model.bad_set if s in inv),
        rewards=rewards,
        mode=model.mode,
    )
    return PrunedModel(model=pruned, origin_values=values, state_map=tuple(keep))


def _ssp_evaluate(model, policy, unknown, numeric, lengths):
    to_num = float if numeric == FLOAT else (lambda v: v)
    sys_states = sorted(unknown)
    index = {s: i for i, s in enumerate(sys_states)}
    n = len(sys_states)
    zero_num = 0.0 if numeric == FLOAT else Fraction(0)
    one_num = 1.0 if numeric == FLOAT else Fraction(1)
    matrix = [[zero_num] * n for _ in range(n)]
    rhs = [one_num] * n
    for s in sys_states:
        i = index[s]
        matrix[i][i] = one_num
        for succ, p in model.row(s, policy[s]):
            if succ in index:
                matrix[i][index[succ]] -= to_num(p)
    solution = linalg.solve(matrix, [rhs], EXACT if numeric == EXACT else FLOAT)[0]
    for s in sys_states:
        lengths[s] = solution[index[s]]


def _make_proper(model, policy, unknown, target):
    """Repair a policy so its chain reaches `target` from every state.

    States whose chain cannot reach the target get their breadth-first
    greedy action back; needed because a float warm start may hand the
    exact stage a policy with a stray loop.
    """
    greedy = _bfs_seed_policy(model, unknown, target)
    policy = dict(policy)
    while True:
        pred: dict[int, list[int]] = {s: [] for s in unknown}
        direct = set()
        for s in unknown:
            for succ, _ in model.row(s, policy[s]):
                if succ in target:
                    direct.add(s)
                elif succ in pred:
                    pred[succ].append(s)
        reaching = set(direct)
        stack = list(direct)
        while stack:
            u = stack.pop()
            for v in pred[u]:
                if v not in reaching:
                    reaching.add(v)
                    stack.append(v)
        stranded = [s for s in unknown if s not in reaching]
        if not stranded:
            return policy
        for s in stranded:
            policy[s] = greedy[s]


def _ssp_policy_iteration(model, unknown, numeric, seed_policy, lengths):
    target = set(range(model.n_states)) - set(unknown)
    policy = _make_proper(model, seed_policy, unknown, target)
    strict = _FLOAT_STRICT if numeric == FLOAT else 0
    rounds = 0
    while True:
        rounds += 1
        if rounds > _MAX_ROUNDS:
            raise RuntimeError("expected-length policy iteration failed to converge")
        _ssp_evaluate(model, policy, unknown, numeric, lengths)
        to_num = float if numeric == FLOAT else (lambda v: v)
        switched = False
        for s in unknown:
            current = lengths[s]
            best = current
            best_action = None
            for a in model.legal_actions(s):
                q = 1 + _one_step(model, s, a, lengths, to_num)
                if q < best - strict:
                    best = q
                    best_action = a
            if best_action is not None and best_action != policy[s]:
                policy[s] = best_action
                switched = True
        if not switched:
            return policy, rounds


def _min_expected_length_with_info(pruned: PrunedModel,
                                   targets: frozenset[int] | set[int] | None):
    model = pruned.model
    target = set(model.target_set if targets is None else targets)
    if not target:
        raise PreconditionError("pruned model has no target states")
    reaching = graphs.states_reaching(model, target)
    if set(range(model.n_states)) - reaching:
        raise RuntimeError("pruned model has states that cannot reach the target")
    unknown = sorted(set(range(model.n_states)) - target)
    lengths: list[Value] = [zero(model.mode)] * model.n_states
    seed = _bfs_seed_policy(model, unknown, target)
    rounds = 0
    if model.mode == EXACT and len(unknown) >= _SEED_THRESHOLD:
        try:
            float_lengths = [0.0] * model.n_states
            seed, rounds = _ssp_policy_iteration(
                model, unknown, FLOAT, seed, float_lengths
            )
        except (linalg.SingularMatrixError, RuntimeError):
            seed = _bfs_seed_policy(model, unknown, target)
    _, main_rounds = _ssp_policy_iteration(model, unknown, model.mode, seed, lengths)
    rounds += main_rounds
    # canonical strategy: lowest-index greedy action on the final lengths
    assignment = {}
    strict = _FLOAT_STRICT if model.mode == FLOAT else 0
    for s in range(model.n_states):
        if s in target:
            assignment[s] = model.legal_actions(s)[0]
            continue
        best = None
        best_a = None
        for a in model.legal_actions(s):
            q = 1 + _one_step(model, s, a, lengths,
                              float if model.mode == FLOAT else (lambda v: v))
            if best is None or q < best - strict:
                best = q
                best_a = a
        if model.mode == EXACT and best != lengths[s]:
            raise RuntimeError("expected-length certificate failed")
        assignment[s] = best_a
    strategy = MemorylessStrategy.pure(assignment, model.mode)
    value = lengths[model.initial_state]
    return strategy, value, {"ssp_rounds": rounds}


def min_expected_length(pruned: PrunedModel,
                        targets: frozenset[int] | set[int] | None = None
                        ) -> tuple[MemorylessStrategy, Value]:
    """Deterministic strategy minimizing expected steps to target.

    Unit step cost with absorption at the targets; a proper policy
    always exists in the pruned model, so policy iteration from a
    breadth-first greedy seed converges to the optimum. Returns the
    optimal expected length from the pruned model's initial state.
    """
    strategy, value, _info = _min_expected_length_with_info(pruned, targets)
    return strategy, value


def conditional_expected_length(model: Mdp, strategy: MemorylessStrategy,
                                s0: int, targets: frozenset[int] | set[int]) -> Value:
    """Expected steps to target given the target is reached, from s0.

    Evaluated directly on the strategy's chain in the original model:
    solve the per-state reach probability p, then the weighted system
    w(s) = sum_s' P(s,s') (p(s') + w(s')), and return w(s0)/p(s0).
    """
    targets = set(targets)
    chain = induced_chain(model, strategy)
    n = chain.n_states
    pred: list[list[int]] = [[] for _ in range(n)]
    for s in range(n):
        for succ, _ in chain.rows[s]:
            pred[succ].append(s)
    reach_set = graphs.reachable_from(pred, targets)
    p: list[Value] = [zero(model.mode)] * n
    for t in targets:
        p[t] = one(model.mode)
    transient = sorted(reach_set - targets)
    if transient:
        index = {s: i for i, s in enumerate(transient)}
        k = len(transient)
        z = zero(model.mode)
        matrix = [[z] * k for _ in range(k)]
        rhs = [z] * k
        for s in transient:
            i = index[s]
            matrix[i][i] = matrix[i][i] + 1
            for succ, q in chain.rows[s]:
                if succ in index:
                    matrix[i][index[succ]] -= q
                elif succ in targets:
                    rhs[i] += q
        sol = linalg.solve(matrix, [rhs], model.mode)[0]
        for s in transient:
            p[s] = sol[index[s]]
    if p[s0] == 0:
        raise PreconditionError("conditioning event null: target unreachable under strategy")
    w_states = [s for s in transient if p[s] > 0]
    w: list[Value] = [zero(model.mode)] * n
    if w_states:
        index = {s: i for i, s in enumerate(w_states)}
        k = len(w_states)
        z = zero(model.mode)
        matrix = [[z] * k for _ in range(k)]
        rhs = [z] * k
        for s in w_states:
            i = index[s]
            matrix[i][i] = matrix[i][i] + 1
            rhs[i] = p[s]
            for succ, q in chain.rows[s]:
                if succ in index:
                    matrix[i][index[succ]] -= q
        sol = linalg.solve(matrix, [rhs], model.mode)[0]
        for s in w_states:
            w[s] = sol[index[s]]
    return w[s0] / p[s0]


def solve_reach_length(model: Mdp, s0: int | None = None,
                       targets: frozenset[int] | set[int] | None = None,
                       *, eps: float = DEFAULT_EPS, eta: float = DEFAULT_ETA
                       ) -> ReachLexResult:
    """Two-stage solve: best reach probability, then shortest expected length.

    Raises PreconditionError when the target is unreachable from s0
    (the conditional expectation is undefined there).
    """
    require_valid(model)
    if s0 is None:
        s0 = model.initial_state
    targets = frozenset(model.target_set if targets is None else targets)
    if not targets:
        raise PreconditionError("target set is empty")
    work = model if s0 == model.initial_state else dataclasses.replace(model, initial_state=s0)
    values, value_info = _max_reach_with_info(work, set(targets), eps)
    if values[s0] == 0:
        raise PreconditionError("target unreachable: conditional expectation undefined")
    opt = opt_action_set(work, values, eta=eta)
    pruned = prune_reach(work, values, opt)
    to_pruned = {orig: i for i, orig in enumerate(pruned.state_map)}
    pruned_targets = {to_pruned[t] for t in targets}
    strategy_pruned, length, ssp_info = _min_expected_length_with_info(
        pruned, pruned_targets
    )
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
        "value_rounds": value_info.get("rounds"),
        "ssp_rounds": ssp_info.get("ssp_rounds"),
        "eps": eps,
        "eta": eta,
    }
    return ReachLexResult(
        strategy=strategy,
        reach_probability=values[s0],
        conditional_expected_length=length,
        diagnostics=diagnostics,
    )

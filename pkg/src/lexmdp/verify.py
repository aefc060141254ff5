"""Cross-check battery: solvers vs oracle, pruning identities, exhaustive scans.

Each check pits a solver-side quantity against an independently
computed one (path enumeration, direct chain analysis, brute force) on
seeded random instances. Exact mode demands exact equality throughout.
The `verify` CLI command runs this battery; the test suite runs larger
configurations of the same checks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .errors import PreconditionError
from .model import (
    FinitePath,
    Mdp,
    MemorylessStrategy,
    finite_path_probability,
    induced_chain,
)
from .numeric import EXACT
from .oracle import (
    exact_chain_mp_analysis,
    exact_chain_reach_analysis,
    enumerate_md_strategies,
    lexicographic_brute_force,
)
from .randgen import random_opt_strategy, random_reach_instance, random_safety_instance
from .reach import (
    OptSet,
    PrunedModel,
    ValueVector,
    conditional_expected_length,
    max_reach_values,
    opt_action_set,
    prune_reach,
    solve_reach_length,
)
from .safety import (
    conditional_mean_payoff,
    max_safety_values,
    opt_action_set_safety,
    prune_safety,
    solve_safety_mp,
    upre_partition,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    instance: int
    passed: bool
    detail: str = ""


def iter_positive_paths(model: Mdp, strategy: MemorylessStrategy, s0: int,
                        max_len: int):
    """All strategy-positive finite paths from s0 with at most max_len steps."""
    frontier = [FinitePath((s0,), ())]
    yield frontier[0]
    for _ in range(max_len):
        nxt = []
        for path in frontier:
            last = path.last
            for a, w in strategy.distribution(last):
                if w == 0:
                    continue
                for succ, p in model.row(last, a):
                    if p == 0:
                        continue
                    extended = FinitePath(path.states + (succ,), path.actions + (a,))
                    yield extended
                    nxt.append(extended)
        frontier = nxt


def map_strategy_to_pruned(strategy: MemorylessStrategy, pruned: PrunedModel
                           ) -> MemorylessStrategy:
    to_pruned = {orig: i for i, orig in enumerate(pruned.state_map)}
    return MemorylessStrategy({
        to_pruned[s]: strategy.distribution(s)
        for s in to_pruned
    })


# ---------------------------------------------------------------------------
# identity checks (exact mode)
# ---------------------------------------------------------------------------


def check_one_step_upper_bound(model: Mdp, values: ValueVector) -> bool:
    """Value of a state dominates every action's one-step expectation."""
    for s in range(model.n_states):
        for a in model.legal_actions(s):
            expected = sum(
                (p * values[succ] for succ, p in model.row(s, a)), Fraction(0)
            )
            if expected > values[s]:
                return False
    return True


def check_target_cylinder_ratio(model: Mdp, s0: int, targets: set[int],
                                values: ValueVector, pruned: PrunedModel,
                                sigma: MemorylessStrategy, max_len: int = 4) -> bool:
    """Pruned cylinder measure of target-hitting paths = original / Val(s0).

    Enumerates every sigma-positive path of the pruned model that stays
    outside the target until its last state.
    """
    sigma_pruned = map_strategy_to_pruned(sigma, pruned)
    pm = pruned.model
    s0p = pruned.from_original(s0)
    for path in iter_positive_paths(pm, sigma_pruned, s0p, max_len):
        if len(path) == 0:
            continue
        orig_states = tuple(pruned.to_original(s) for s in path.states)
        if orig_states[-1] not in targets:
            continue
        if any(s in targets for s in orig_states[:-1]):
            continue
        lhs = finite_path_probability(pm, sigma_pruned, path)
        orig_path = FinitePath(orig_states, path.actions)
        rhs = finite_path_probability(model, sigma, orig_path) / values[s0]
        if lhs != rhs:
            return False
    return True


def check_reach_probability_ratio(model: Mdp, s0: int, targets: set[int],
                                  values: ValueVector, pruned: PrunedModel,
                                  sigma: MemorylessStrategy) -> bool:
    """Pruned reach probability is the original one rescaled by Val(s0),
    and it hits one exactly for the strategies optimal in the original."""
    sigma_pruned = map_strategy_to_pruned(sigma, pruned)
    chain_orig = induced_chain(model, sigma)
    chain_pruned = induced_chain(pruned.model, sigma_pruned)
    p_orig = exact_chain_reach_analysis(chain_orig, targets).reach_probability[s0]
    s0p = pruned.from_original(s0)
    pruned_targets = {
        pruned.from_original(t) for t in targets if pruned.from_original(t) is not None
    }
    p_pruned = exact_chain_reach_analysis(
        chain_pruned, pruned_targets
    ).reach_probability[s0p]
    if p_pruned != p_orig / values[s0]:
        return False
    return (p_pruned == 1) == (p_orig == values[s0])


def check_conditional_length_transfer(model: Mdp, s0: int, targets: set[int],
                                      values: ValueVector, pruned: PrunedModel,
                                      sigma: MemorylessStrategy) -> bool | None:
    """Expected length in the pruned model = conditional length in the original.

    Only meaningful for strategies attaining the optimal reach
    probability; returns None when sigma is not one of them.
    """
    sigma_pruned = map_strategy_to_pruned(sigma, pruned)
    chain_orig = induced_chain(model, sigma)
    if exact_chain_reach_analysis(chain_orig, targets).reach_probability[s0] != values[s0]:
        return None
    chain_pruned = induced_chain(pruned.model, sigma_pruned)
    s0p = pruned.from_original(s0)
    pruned_targets = {
        pruned.from_original(t) for t in targets if pruned.from_original(t) is not None
    }
    analysis = exact_chain_reach_analysis(chain_pruned, pruned_targets)
    if analysis.reach_probability[s0p] != 1:
        return False
    plain_expected = analysis.conditional_expected_length[s0p]
    conditional = conditional_expected_length(model, sigma, s0, targets)
    return plain_expected == conditional


def check_safety_cylinder_ratio(model: Mdp, s0: int, bad: set[int],
                                values: ValueVector, pruned: PrunedModel,
                                sigma: MemorylessStrategy, max_len: int = 4) -> bool:
    """Pruned cylinder measure = original measure times Val(last)/Val(s0)."""
    sigma_pruned = map_strategy_to_pruned(sigma, pruned)
    pm = pruned.model
    s0p = pruned.from_original(s0)
    for path in iter_positive_paths(pm, sigma_pruned, s0p, max_len):
        lhs = finite_path_probability(pm, sigma_pruned, path)
        orig_states = tuple(pruned.to_original(s) for s in path.states)
        orig_path = FinitePath(orig_states, path.actions)
        pp = finite_path_probability(model, sigma, orig_path)
        rhs = pp * values[orig_states[-1]] / values[s0]
        if lhs != rhs:
            return False
    return True


def check_value_unfolding(model: Mdp, bad: set[int], values: ValueVector,
                          good: frozenset[int], sigma: MemorylessStrategy,
                          horizon: int) -> bool:
    """Per-state value decomposes over the first `horizon` steps.

    Explicit enumeration of sigma-positive paths: mass still undecided
    after `horizon` steps weighted by the value where it sits, plus the
    mass that settled in the sure-safe region earlier.
    """
    for s in range(model.n_states):
        total = Fraction(0)
        stack = [(s, 0, Fraction(1))]
        while stack:
            state, depth, mass = stack.pop()
            if state in good:
                total += mass  # settled safely within the horizon
                continue
            if state in bad:
                continue
            if depth == horizon:
                total += mass * values[state]
                continue
            for a, w in sigma.distribution(state):
                for succ, p in model.row(state, a):
                    stack.append((succ, depth + 1, mass * w * p))
        if total != values[s]:
            return False
    return True


def check_conditional_mp_transfer(model: Mdp, s0: int, bad: set[int],
                                  sigma: MemorylessStrategy) -> bool:
    """Pruned-model mean payoff of sigma = direct conditional mean payoff.

    The right-hand side never touches the pruning: recurrent-class
    analysis of sigma's chain in the original model.
    """
    lhs = conditional_mean_payoff(model, sigma, s0, bad)
    chain = induced_chain(model, sigma)
    rhs = exact_chain_mp_analysis(chain, bad).conditional_mean_payoff[s0]
    return lhs == rhs


def check_opt_supported_safety(model: Mdp, bad: set[int], values: ValueVector,
                               opt: OptSet, cap: int = 100_000) -> bool:
    """Every deterministic strategy over the locally optimal actions is
    safety-optimal from every state (exhaustive scan)."""
    import itertools

    per_state = [opt[s] for s in range(model.n_states)]
    count = 1
    for acts in per_state:
        count *= len(acts)
        if count > cap:
            raise PreconditionError(f"opt-strategy scan too large ({count}+)")
    for combo in itertools.product(*per_state):
        strategy = MemorylessStrategy.pure(dict(enumerate(combo)), model.mode)
        chain = induced_chain(model, strategy)
        safety = exact_chain_mp_analysis(chain, bad).safety_probability
        for s in range(model.n_states):
            if safety[s] != values[s]:
                return False
    return True


# ---------------------------------------------------------------------------
# the battery
# ---------------------------------------------------------------------------


def run_verification(instances: int = 25, max_states: int = 5, seed: int = 0,
                     strategies_per_instance: int = 4) -> list[CheckResult]:
    """Seeded battery over random instances; every row must pass."""
    rng = random.Random(seed)
    results: list[CheckResult] = []

    def record(name: str, instance: int, passed: bool, detail: str = ""):
        results.append(CheckResult(name, instance, bool(passed), detail))

    for i in range(instances):
        model = random_reach_instance(rng, max_states=max_states)
        s0 = model.initial_state
        targets = set(model.target_set)
        result = solve_reach_length(model)
        oracle = lexicographic_brute_force(model, s0, "reach-length")
        record(
            "reach-lexicographic-agreement", i,
            result.reach_probability == oracle.primary
            and result.conditional_expected_length == oracle.secondary,
            f"solver=({result.reach_probability},{result.conditional_expected_length}) "
            f"oracle=({oracle.primary},{oracle.secondary})",
        )
        values = max_reach_values(model, targets)
        record("reach-one-step-bound", i, check_one_step_upper_bound(model, values))
        opt = opt_action_set(model, values)
        pruned = prune_reach(model, values, opt)
        for _ in range(strategies_per_instance):
            sigma = random_opt_strategy(rng, model, opt)
            record("reach-cylinder-ratio", i,
                   check_target_cylinder_ratio(model, s0, targets, values, pruned, sigma))
            record("reach-probability-ratio", i,
                   check_reach_probability_ratio(model, s0, targets, values, pruned, sigma))
            transfer = check_conditional_length_transfer(
                model, s0, targets, values, pruned, sigma
            )
            if transfer is not None:
                record("conditional-length-transfer", i, transfer)

    for i in range(instances):
        model = random_safety_instance(rng, max_states=max_states)
        s0 = model.initial_state
        bad = set(model.bad_set)
        result = solve_safety_mp(model)
        oracle = lexicographic_brute_force(model, s0, "safety-mp")
        record(
            "safety-lexicographic-agreement", i,
            result.safety_probability == oracle.primary
            and result.conditional_mean_payoff == oracle.secondary,
            f"solver=({result.safety_probability},{result.conditional_mean_payoff}) "
            f"oracle=({oracle.primary},{oracle.secondary})",
        )
        values = max_safety_values(model, bad)
        partition = upre_partition(model, bad)
        record("safety-one-step-bound", i, check_one_step_upper_bound(model, values))
        opt = opt_action_set_safety(model, values)
        record("safety-opt-support-optimal", i,
               check_opt_supported_safety(model, bad, values, opt))
        pruned = prune_safety(model, values, opt)
        for _ in range(strategies_per_instance):
            sigma = random_opt_strategy(rng, model, opt)
            record("safety-cylinder-ratio", i,
                   check_safety_cylinder_ratio(model, s0, bad, values, pruned, sigma))
            for horizon in (1, 2, 3):
                record(f"value-unfolding-n{horizon}", i,
                       check_value_unfolding(model, bad, values, partition.good,
                                             sigma, horizon))
            record("conditional-mp-transfer", i,
                   check_conditional_mp_transfer(model, s0, bad, sigma))
    return results


def verification_document(results: list[CheckResult], *, seed: int,
                          instances: int, max_states: int) -> dict:
    from . import __version__

    by_name: dict[str, dict] = {}
    for r in results:
        entry = by_name.setdefault(r.name, {"passed": 0, "failed": 0})
        entry["passed" if r.passed else "failed"] += 1
    return {
        "header": {
            "tool": "lexmdp",
            "version": __version__,
            "seed": seed,
            "mode": EXACT,
            "instances": instances,
            "max_states": max_states,
            "tolerances": {"eps": None, "eta": None},
        },
        "checks": {name: by_name[name] for name in sorted(by_name)},
        "failures": [
            {"name": r.name, "instance": r.instance, "detail": r.detail}
            for r in results if not r.passed
        ],
        "all_passed": all(r.passed for r in results),
    }


def verification_table(results: list[CheckResult]) -> str:
    by_name: dict[str, list[CheckResult]] = {}
    for r in results:
        by_name.setdefault(r.name, []).append(r)
    width = max(len(name) for name in by_name) + 2
    lines = []
    for name in sorted(by_name):
        rows = by_name[name]
        passed = sum(1 for r in rows if r.passed)
        status = "PASS" if passed == len(rows) else "FAIL"
        lines.append(f"{name.ljust(width)} {passed:>4}/{len(rows):<4} {status}")
    overall = "PASS" if all(r.passed for r in results) else "FAIL"
    lines.append(f"{'overall'.ljust(width)} {'':>9} {overall}")
    return "\n".join(lines)

"""Core data model: MDPs, Markov chains, strategies and finite paths.

All types are immutable after construction and safe to share across
workers. Probabilities live in one numeric mode per model (exact
rationals by default, floats on request) and never mix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import ModelValidationError
from .numeric import (
    EXACT,
    FLOAT,
    ROW_SUM_TOL,
    Value,
    check_mode,
    one,
    parse_value,
    zero,
)

Row = tuple[tuple[int, Value], ...]


@dataclass(frozen=True)
class Mdp:
    """Finite MDP with sparse per-(state, action) transition rows.

    `rows` maps (state, action) index pairs to sorted successor lists;
    a pair that is absent means the action is illegal in that state.
    `target_set` and `bad_set` members must be sinks (one self-loop
    action with probability one).
    """

    state_names: tuple[str, ...]
    action_names: tuple[str, ...]
    rows: Mapping[tuple[int, int], Row]
    initial_state: int = 0
    target_set: frozenset[int] = frozenset()
    bad_set: frozenset[int] = frozenset()
    rewards: Mapping[tuple[int, int], Value] | None = None
    mode: str = EXACT
    _actions_of: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        check_mode(self.mode)
        per_state: list[list[int]] = [[] for _ in self.state_names]
        for (s, a) in self.rows:
            per_state[s].append(a)
        object.__setattr__(
            self, "_actions_of", tuple(tuple(sorted(acts)) for acts in per_state)
        )

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    def legal_actions(self, state: int) -> tuple[int, ...]:
        """Actions with a defined transition row at `state`."""
        if not 0 <= state < self.n_states:
            raise ValueError(f"unknown state index {state}")
        return self._actions_of[state]

    def row(self, state: int, action: int) -> Row:
        try:
            return self.rows[(state, action)]
        except KeyError:
            raise ValueError(
                f"action {self.action_names[action]!r} is not legal in state "
                f"{self.state_names[state]!r}"
            ) from None

    def support(self, state: int, action: int) -> tuple[int, ...]:
        return tuple(succ for succ, _ in self.row(state, action))

    def probability(self, state: int, action: int, successor: int) -> Value:
        for succ, p in self.row(state, action):
            if succ == successor:
                return p
        return zero(self.mode)

    def reward(self, state: int, action: int) -> Value:
        if self.rewards is None:
            return zero(self.mode)
        return self.rewards.get((state, action), zero(self.mode))

    def state_index(self, name: str) -> int:
        try:
            return self.state_names.index(name)
        except ValueError:
            raise ValueError(f"unknown state {name!r}") from None

    def action_index(self, name: str) -> int:
        try:
            return self.action_names.index(name)
        except ValueError:
            raise ValueError(f"unknown action {name!r}") from None


@dataclass(frozen=True)
class MarkovChain:
    """Finite Markov chain, optionally with a per-state reward."""

    state_names: tuple[str, ...]
    rows: tuple[Row, ...]
    rewards: tuple[Value, ...] | None = None
    mode: str = EXACT

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    def successors(self, state: int) -> tuple[int, ...]:
        return tuple(succ for succ, _ in self.rows[state])

    def probability(self, state: int, successor: int) -> Value:
        for succ, p in self.rows[state]:
            if succ == successor:
                return p
        return zero(self.mode)


@dataclass(frozen=True)
class MemorylessStrategy:
    """Per-state distribution over actions; deterministic as a special case."""

    choice: Mapping[int, Row]

    @classmethod
    def pure(cls, assignment: Mapping[int, int], mode: str = EXACT) -> "MemorylessStrategy":
        unit = one(mode)
        return cls({s: ((a, unit),) for s, a in assignment.items()})

    @property
    def is_deterministic(self) -> bool:
        return all(len(row) == 1 for row in self.choice.values())

    def distribution(self, state: int) -> Row:
        try:
            return self.choice[state]
        except KeyError:
            raise ValueError(f"strategy has no choice at state {state}") from None

    def probability(self, state: int, action: int) -> Value:
        for a, p in self.distribution(state):
            if a == action:
                return p
        return 0

    def action_at(self, state: int) -> int:
        row = self.distribution(state)
        if len(row) != 1:
            raise ValueError(f"strategy is randomized at state {state}")
        return row[0][0]

    def support(self, state: int) -> tuple[int, ...]:
        return tuple(a for a, _ in self.distribution(state))


@dataclass(frozen=True)
class FinitePath:
    """Alternating state/action sequence s0 a0 s1 ... sn."""

    states: tuple[int, ...]
    actions: tuple[int, ...]

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1 or not self.states:
            raise ValueError("path needs n+1 states for n actions")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def first(self) -> int:
        return self.states[0]

    @property
    def last(self) -> int:
        return self.states[-1]

    def steps(self) -> Iterable[tuple[int, int, int]]:
        for i, a in enumerate(self.actions):
            yield self.states[i], a, self.states[i + 1]


def build_mdp(
    *,
    states: Iterable[str],
    actions: Iterable[str],
    transitions: Mapping[tuple[str, str], Mapping[str, object]],
    initial: str,
    target: Iterable[str] = (),
    bad: Iterable[str] = (),
    rewards: Mapping[tuple[str, str], object] | None = None,
    mode: str = EXACT,
) -> Mdp:
    """Assemble an Mdp from name-keyed tables, parsing values per mode.

    Target/bad states without an explicit row get a self-loop on the
    first action, so fixtures only have to spell out the real dynamics.
    """
    state_names = tuple(states)
    action_names = tuple(actions)
    sidx = {name: i for i, name in enumerate(state_names)}
    aidx = {name: i for i, name in enumerate(action_names)}
    rows: dict[tuple[int, int], Row] = {}
    for (sname, aname), dist in transitions.items():
        entries = tuple(
            sorted((sidx[succ], parse_value(p, mode)) for succ, p in dist.items())
        )
        rows[(sidx[sname], aidx[aname])] = entries
    unit = one(mode)
    for sink in tuple(target) + tuple(bad):
        s = sidx[sink]
        if not any(key[0] == s for key in rows):
            rows[(s, 0)] = ((s, unit),)
    reward_map = None
    if rewards is not None:
        reward_map = {
            (sidx[sname], aidx[aname]): parse_value(v, mode)
            for (sname, aname), v in rewards.items()
        }
    return Mdp(
        state_names=state_names,
        action_names=action_names,
        rows=rows,
        initial_state=sidx[initial],
        target_set=frozenset(sidx[t] for t in target),
        bad_set=frozenset(sidx[b] for b in bad),
        rewards=reward_map,
        mode=mode,
    )


def _is_value_for_mode(value: object, mode: str) -> bool:
    if mode == EXACT:
        return isinstance(value, Fraction)
    return isinstance(value, float)


def validate_mdp(model: Mdp) -> list[str]:
    """Check every structural invariant; returns a list of violations.

    An empty report means the model is well formed. Each violation
    names the state/action involved and the rule it breaks.
    """
    report: list[str] = []
    names = model.state_names
    nstates = model.n_states
    if nstates == 0:
        return ["model has no states"]
    if not 0 <= model.initial_state < nstates:
        report.append(f"initial state index {model.initial_state} out of range")
    for (s, a), row in model.rows.items():
        label = f"({names[s]},{model.action_names[a]})"
        if not row:
            report.append(f"empty transition row at {label}")
            continue
        seen = set()
        total = zero(model.mode)
        for succ, p in row:
            if not 0 <= succ < nstates:
                report.append(f"successor index {succ} out of range at {label}")
                continue
            if succ in seen:
                report.append(f"duplicate successor {names[succ]} at {label}")
            seen.add(succ)
            if not _is_value_for_mode(p, model.mode):
                report.append(f"probability at {label} does not match mode {model.mode}")
            if p <= 0:
                report.append(f"non-positive probability at {label}")
            total += p
        if model.mode == EXACT:
            if total != 1:
                report.append(f"row not stochastic at {label}: sums to {total}")
        elif abs(total - 1.0) > ROW_SUM_TOL:
            report.append(f"row not stochastic at {label}: sums to {total!r}")
    for s in range(nstates):
        if not model.legal_actions(s):
            report.append(f"state {names[s]} has no legal action")
    for kind, members in (("target", model.target_set), ("bad", model.bad_set)):
        for s in members:
            acts = model.legal_actions(s)
            if len(acts) != 1:
                report.append(f"{kind} state {names[s]} not a sink: {len(acts)} actions")
                continue
            row = model.rows.get((s, acts[0]), ())
            if row != ((s, one(model.mode)),):
                report.append(f"{kind} state {names[s]} not a sink: no unit self-loop")
    overlap = model.target_set & model.bad_set
    for s in sorted(overlap):
        report.append(f"state {names[s]} is both target and bad")
    if model.rewards is not None:
        for (s, a), value in model.rewards.items():
            if (s, a) not in model.rows:
                report.append(
                    f"reward on illegal pair ({names[s]},{model.action_names[a]})"
                )
            if not _is_value_for_mode(value, model.mode):
                report.append(
                    f"reward at ({names[s]},{model.action_names[a]}) does not match "
                    f"mode {model.mode}"
                )
    return report


def require_valid(model: Mdp) -> Mdp:
    violations = validate_mdp(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def validate_strategy(model: Mdp, strategy: MemorylessStrategy) -> None:
    """Raise if the strategy is not well formed for the model."""
    for s, row in strategy.choice.items():
        if not 0 <= s < model.n_states:
            raise ValueError(f"strategy mentions unknown state index {s}")
        legal = set(model.legal_actions(s))
        total = zero(model.mode)
        for a, p in row:
            if a not in legal:
                raise ValueError(
                    f"strategy plays illegal action {model.action_names[a]!r} "
                    f"at state {model.state_names[s]!r}"
                )
            if p <= 0:
                raise ValueError(f"non-positive strategy weight at state {s}")
            total += p
        if model.mode == EXACT:
            if total != 1:
                raise ValueError(f"strategy distribution at state {s} sums to {total}")
        elif abs(total - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"strategy distribution at state {s} sums to {total!r}")


def induced_chain(model: Mdp, strategy: MemorylessStrategy) -> MarkovChain:
    """Fix a memoryless strategy, yielding the chain over the same states.

    Row s is the strategy-weighted mix of the state's action rows; the
    chain reward (when the model carries rewards) mixes the same way.
    """
    validate_strategy(model, strategy)
    rows: list[Row] = []
    rewards: list[Value] | None = [] if model.rewards is not None else None
    for s in range(model.n_states):
        dist = strategy.distribution(s)
        mixed: dict[int, Value] = {}
        for a, w in dist:
            for succ, p in model.row(s, a):
                mixed[succ] = mixed.get(succ, zero(model.mode)) + w * p
        rows.append(tuple(sorted(mixed.items())))
        if rewards is not None:
            rewards.append(
                sum((w * model.reward(s, a) for a, w in dist), zero(model.mode))
            )
    return MarkovChain(
        state_names=model.state_names,
        rows=tuple(rows),
        rewards=tuple(rewards) if rewards is not None else None,
        mode=model.mode,
    )


def finite_path_probability(
    model: Mdp, strategy: MemorylessStrategy, path: FinitePath
) -> Value:
    """Measure of the path's cylinder under the strategy.

    Product over steps of (strategy weight) times (transition
    probability); the empty path has measure one.
    """
    if not 0 <= path.first < model.n_states:
        raise ValueError(f"path starts at unknown state index {path.first}")
    acc = one(model.mode)
    for s, a, succ in path.steps():
        if a not in model.legal_actions(s):
            raise ValueError(
                f"path uses illegal action {model.action_names[a]!r} at "
                f"{model.state_names[s]!r}"
            )
        p = model.probability(s, a, succ)
        if p == 0:
            raise ValueError(
                f"path steps outside the support at "
                f"({model.state_names[s]},{model.action_names[a]},{model.state_names[succ]})"
            )
        acc *= strategy.probability(s, a) * p
    return acc


def convert_mode(model: Mdp, mode: str) -> Mdp:
    """Copy of the model in the other numeric mode.

    Exact to float truncates to doubles; float to exact rationalizes
    each probability through its shortest decimal representation.
    """
    check_mode(mode)
    if mode == model.mode:
        return model
    from .numeric import convert_value

    rows = {
        key: tuple((succ, convert_value(p, mode)) for succ, p in row)
        for key, row in model.rows.items()
    }
    rewards = None
    if model.rewards is not None:
        rewards = {
            key: convert_value(v, mode) for key, v in model.rewards.items()
        }
    return Mdp(
        state_names=model.state_names,
        action_names=model.action_names,
        rows=rows,
        initial_state=model.initial_state,
        target_set=model.target_set,
        bad_set=model.bad_set,
        rewards=rewards,
        mode=mode,
    )


def uniform_strategy(model: Mdp) -> MemorylessStrategy:
    """Uniform randomization over the legal actions of every state."""
    choice = {}
    for s in range(model.n_states):
        acts = model.legal_actions(s)
        if model.mode == EXACT:
            w = Fraction(1, len(acts))
        else:
            w = 1.0 / len(acts)
        choice[s] = tuple((a, w) for a in acts)
    return MemorylessStrategy(choice)

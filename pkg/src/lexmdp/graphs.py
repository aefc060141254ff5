"""Graph routines backing the qualitative (numerics-free) analyses.

The MDP-level fixpoints only look at which transitions have positive
probability, so everything here works on supports. Functions taking a
`model` only use `n_states`, `legal_actions` and `support`.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence


def reachable_from(succ: Sequence[Sequence[int]], sources: Iterable[int]) -> set[int]:
    seen = set(sources)
    stack = list(seen)
    while stack:
        u = stack.pop()
        for v in succ[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def tarjan_sccs(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Strongly connected components in reverse topological order.

    Iterative Tarjan; safe on graphs deeper than the recursion limit.
    """
    n = len(succ)
    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            node, edge_pos = work[-1]
            if edge_pos == 0:
                index[node] = lowlink[node] = counter
                counter += 1
                stack.append(node)
                on_stack[node] = True
            advanced = False
            for i in range(edge_pos, len(succ[node])):
                child = succ[node][i]
                if index[child] == -1:
                    work[-1] = (node, i + 1)
                    work.append((child, 0))
                    advanced = True
                    break
                if on_stack[child]:
                    lowlink[node] = min(lowlink[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(sorted(comp))
    return sccs


def bottom_sccs(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """SCCs with no edge leaving them (the recurrent classes of a chain)."""
    bottoms = []
    for comp in tarjan_sccs(succ):
        members = set(comp)
        if all(v in members for u in comp for v in succ[u]):
            bottoms.append(comp)
    return bottoms


def chain_successors(rows) -> list[list[int]]:
    return [[succ for succ, _ in row] for row in rows]


def mdp_successors(model) -> list[list[int]]:
    """Positive-probability successor graph over all legal actions."""
    succ: list[list[int]] = []
    for s in range(model.n_states):
        out: set[int] = set()
        for a in model.legal_actions(s):
            out.update(model.support(s, a))
        succ.append(sorted(out))
    return succ


def mdp_predecessors(model) -> list[list[int]]:
    pred: list[set[int]] = [set() for _ in range(model.n_states)]
    for s in range(model.n_states):
        for a in model.legal_actions(s):
            for t in model.support(s, a):
                pred[t].add(s)
    return [sorted(p) for p in pred]


def states_reaching(model, targets: Iterable[int]) -> set[int]:
    """States with some positive-probability path into `targets`."""
    pred = mdp_predecessors(model)
    return reachable_from(pred, targets)


def almost_sure_reach(model, targets: set[int]) -> set[int]:
    """States from which some strategy reaches `targets` with probability 1.

    Nested fixpoint: shrink a candidate set U, each round keeping only
    states that can reach the targets through actions whose whole
    support stays inside U.
    """
    n = model.n_states
    universe = set(range(n))
    u = set(universe)
    while True:
        reach = set(targets)
        frontier = True
        while frontier:
            frontier = False
            for s in universe - reach:
                for a in model.legal_actions(s):
                    supp = model.support(s, a)
                    if all(t in u for t in supp) and any(t in reach for t in supp):
                        reach.add(s)
                        frontier = True
                        break
        if reach == u:
            return u
        u = reach


def avoid_forever(model, bad: set[int]) -> set[int]:
    """States from which some strategy never enters `bad` (greatest fixpoint)."""
    safe = set(range(model.n_states)) - set(bad)
    while True:
        keep = set()
        for s in safe:
            for a in model.legal_actions(s):
                if all(t in safe for t in model.support(s, a)):
                    keep.add(s)
                    break
        if keep == safe:
            return safe
        safe = keep


def bfs_layers_to(model, targets: Iterable[int]) -> dict[int, int]:
    """Shortest positive-probability path length from each state to `targets`."""
    pred = mdp_predecessors(model)
    dist = {t: 0 for t in targets}
    queue = deque(dist)
    while queue:
        u = queue.popleft()
        for v in pred[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def mec_decomposition(model, states: Iterable[int] | None = None) -> list[tuple[frozenset[int], dict[int, tuple[int, ...]]]]:
    """Maximal end components intersecting `states` (default: all states).

    Returns (component, staying actions per state) pairs. Standard
    refinement: restrict to actions whose support stays inside the
    candidate, split by SCC, repeat until stable.
    """
    if states is None:
        candidates = [set(range(model.n_states))]
    else:
        candidates = [set(states)]
    result = []
    while candidates:
        cand = candidates.pop()
        if not cand:
            continue
        stay = {}
        for s in cand:
            acts = tuple(a for a in model.legal_actions(s)
                         if all(t in cand for t in model.support(s, a)))
            if acts:
                stay[s] = acts
        if len(stay) != len(cand):
            candidates.append(set(stay))
            continue
        order = sorted(cand)
        local = {s: i for i, s in enumerate(order)}
        succ = [[] for _ in order]
        for s in order:
            out = set()
            for a in stay[s]:
                out.update(model.support(s, a))
            succ[local[s]] = sorted(local[t] for t in out)
        sccs = tarjan_sccs(succ)
        if len(sccs) == 1:
            result.append((frozenset(cand), stay))
        else:
            for comp in sccs:
                candidates.append({order[i] for i in comp})
    result.sort(key=lambda item: min(item[0]))
    return result

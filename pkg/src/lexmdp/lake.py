"""Slippery gridworld benchmark: layouts, slip dynamics, baselines, batches.

A layout is a bordered grid of walls, holes, one start and one target.
Moving is stochastic: the intended neighbour gets the heavy weight and
each open perpendicular neighbour a light one (never the reverse), with
the weights normalized exactly. Trying to move into a wall is illegal
rather than a no-op.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ModelFormatError
from .model import Mdp, MemorylessStrategy
from .numeric import DEFAULT_EPS, DEFAULT_ETA, EXACT, Value, format_value
from .reach import (
    OptSet,
    ValueVector,
    _max_reach_with_info,
    _min_expected_length_with_info,
    conditional_expected_length,
    max_reach_values,
    opt_action_set,
    prune_reach,
)
from .rng import ALGORITHM, SplitMix64, stream_seed

WALL = "#"
FREE = "."
HOLE = "O"
START = "S"
TARGET = "T"
_CELL_CHARS = {WALL, FREE, HOLE, START, TARGET}

#: direction order fixes action indices: N, E, S, W
DIRECTIONS = ("N", "E", "S", "W")
_DELTAS = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
_REVERSE = {"N": "S", "E": "W", "S": "N", "W": "E"}


@dataclass(frozen=True)
class SlipParams:
    """Weights of the slip distribution; 10:1 by default.

    `figure_style()` gives the 8:1 variant whose open-cell distribution
    is 0.8 ahead and 0.1 to each side.
    """

    intended_weight: int = 10
    side_weight: int = 1

    def __post_init__(self):
        if self.intended_weight <= 0:
            raise ValueError("intended weight must be positive")
        if self.side_weight < 0:
            raise ValueError("side weight must be non-negative")

    @classmethod
    def figure_style(cls) -> "SlipParams":
        return cls(intended_weight=8, side_weight=1)


@dataclass(frozen=True)
class GridLayout:
    """Grid cells as row strings, plus the seed and knobs that produced it."""

    width: int
    height: int
    rows: tuple[str, ...]
    seed: int
    wall_prob: float
    hole_prob: float

    def cell(self, r: int, c: int) -> str:
        return self.rows[r][c]

    def positions(self, kind: str):
        for r in range(self.height):
            for c in range(self.width):
                if self.rows[r][c] == kind:
                    yield (r, c)

    @property
    def start(self) -> tuple[int, int]:
        return next(self.positions(START))

    @property
    def target(self) -> tuple[int, int]:
        return next(self.positions(TARGET))


def _check_layout(layout: GridLayout) -> None:
    if layout.width < 3 or layout.height < 3:
        raise ModelFormatError("layout must be at least 3x3")
    if len(layout.rows) != layout.height or any(
        len(row) != layout.width for row in layout.rows
    ):
        raise ModelFormatError("layout rows do not match the declared size")
    for r, row in enumerate(layout.rows):
        for c, ch in enumerate(row):
            if ch not in _CELL_CHARS:
                raise ModelFormatError(f"unknown cell character {ch!r} at {(r, c)}")
            on_border = r in (0, layout.height - 1) or c in (0, layout.width - 1)
            if on_border and ch != WALL:
                raise ModelFormatError(f"border cell {(r, c)} is not a wall")
    if len(list(layout.positions(START))) != 1:
        raise ModelFormatError("layout needs exactly one start cell")
    if len(list(layout.positions(TARGET))) != 1:
        raise ModelFormatError("layout needs exactly one target cell")


def render_layout(layout: GridLayout) -> str:
    """Character-art form, one row per line, no trailing newline."""
    return "\n".join(layout.rows)


def parse_layout(text: str) -> GridLayout:
    """Inverse of render_layout; validates the grid invariants."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise ModelFormatError("empty layout")
    widths = {len(line) for line in lines}
    if len(widths) != 1:
        raise ModelFormatError("ragged layout rows")
    layout = GridLayout(
        width=widths.pop(),
        height=len(lines),
        rows=tuple(lines),
        seed=0,
        wall_prob=0.0,
        hole_prob=0.0,
    )
    _check_layout(layout)
    return layout


def generate_layout(seed: int, width: int = 10, height: int = 10,
                    wall_prob: float = 0.1, hole_prob: float = 0.1) -> GridLayout:
    """Deterministic random layout for a seed; one PRNG stream per layout.

    Draw order is fixed: interior walls row-major, holes row-major over
    the remaining cells, then target and start uniformly among what is
    left. Degenerate draws (fewer than two free cells) retry with
    seed+1; the returned layout records the seed that succeeded.
    """
    if width < 3 or height < 3:
        raise ValueError("grid dimensions must be at least 3x3")
    if not (0.0 <= wall_prob <= 1.0 and 0.0 <= hole_prob <= 1.0):
        raise ValueError("cell probabilities must lie in [0, 1]")
    attempt = seed
    while True:
        stream = SplitMix64(attempt)
        grid = [
            [
                WALL
                if r in (0, height - 1) or c in (0, width - 1)
                else FREE
                for c in range(width)
            ]
            for r in range(height)
        ]
        for r in range(1, height - 1):
            for c in range(1, width - 1):
                if stream.bernoulli(wall_prob):
                    grid[r][c] = WALL
        for r in range(1, height - 1):
            for c in range(1, width - 1):
                if grid[r][c] == FREE and stream.bernoulli(hole_prob):
                    grid[r][c] = HOLE
        free = [
            (r, c)
            for r in range(1, height - 1)
            for c in range(1, width - 1)
            if grid[r][c] == FREE
        ]
        if len(free) >= 2:
            tr, tc = free.pop(stream.choice_index(len(free)))
            grid[tr][tc] = TARGET
            sr, sc = free.pop(stream.choice_index(len(free)))
            grid[sr][sc] = START
            return GridLayout(
                width=width,
                height=height,
                rows=tuple("".join(row) for row in grid),
                seed=attempt,
                wall_prob=wall_prob,
                hole_prob=hole_prob,
            )
        attempt += 1


def layout_to_mdp(layout: GridLayout, slip: SlipParams | None = None,
                  mode: str = EXACT) -> Mdp:
    """Encode the slip dynamics over the non-wall cells.

    An action is legal only when the intended neighbour is not a wall;
    its row puts `intended_weight` ahead and `side_weight` on each open
    perpendicular neighbour, normalized exactly. Holes and the target
    are sinks.
    """
    _check_layout(layout)
    slip = slip or SlipParams()
    cells = [
        (r, c)
        for r in range(layout.height)
        for c in range(layout.width)
        if layout.cell(r, c) != WALL
    ]
    index = {pos: i for i, pos in enumerate(cells)}
    names = tuple(f"r{r}c{c}" for r, c in cells)
    rows: dict[tuple[int, int], tuple[tuple[int, Value], ...]] = {}
    target_set = set()
    bad_set = set()
    unit = Fraction(1) if mode == EXACT else 1.0
    for pos in cells:
        r, c = pos
        s = index[pos]
        kind = layout.cell(r, c)
        if kind in (HOLE, TARGET):
            rows[(s, 0)] = ((s, unit),)
            (target_set if kind == TARGET else bad_set).add(s)
            continue
        if all(
            layout.cell(r + dr, c + dc) == WALL for dr, dc in _DELTAS.values()
        ):
            # fully walled-in cell: the robot can never move again
            rows[(s, 0)] = ((s, unit),)
            continue
        for ai, d in enumerate(DIRECTIONS):
            dr, dc = _DELTAS[d]
            ahead = (r + dr, c + dc)
            if layout.cell(*ahead) == WALL:
                continue
            weights: dict[tuple[int, int], int] = {ahead: slip.intended_weight}
            if slip.side_weight > 0:
                for side in DIRECTIONS:
                    if side in (d, _REVERSE[d]):
                        continue
                    sr2, sc2 = _DELTAS[side]
                    neighbour = (r + sr2, c + sc2)
                    if layout.cell(*neighbour) != WALL:
                        weights[neighbour] = slip.side_weight
            total = sum(weights.values())
            entries = tuple(
                sorted(
                    (index[npos], Fraction(w, total) if mode == EXACT else w / total)
                    for npos, w in weights.items()
                )
            )
            rows[(s, ai)] = entries
    return Mdp(
        state_names=names,
        action_names=DIRECTIONS,
        rows=rows,
        initial_state=index[layout.start],
        target_set=frozenset(target_set),
        bad_set=frozenset(bad_set),
        rewards=None,
        mode=mode,
    )


def graph_shortest_distance(layout: GridLayout) -> int | float:
    """Steps from start to target over non-wall, non-hole cells; inf if cut off."""
    _check_layout(layout)
    start = layout.start
    target = layout.target
    frontier = [start]
    dist = {start: 0}
    while frontier:
        nxt = []
        for (r, c) in frontier:
            for dr, dc in _DELTAS.values():
                npos = (r + dr, c + dc)
                if npos in dist:
                    continue
                ch = layout.cell(*npos)
                if ch == WALL or ch == HOLE:
                    continue
                dist[npos] = dist[(r, c)] + 1
                if npos == target:
                    return dist[npos]
                nxt.append(npos)
        frontier = nxt
    return math.inf if target not in dist else dist[target]


BASELINE_RULES = ("first", "last", "random")


def baseline_reach_strategy(model: Mdp, targets: frozenset[int] | set[int],
                            rule: str, seed: int = 0,
                            *, values: ValueVector | None = None,
                            opt: OptSet | None = None,
                            eta: float = DEFAULT_ETA) -> MemorylessStrategy:
    """A reachability-optimal strategy picked without length optimization.

    Emulates taking whatever a model checker outputs: per state, choose
    among the locally optimal actions by `rule` (first index, last
    index, or seeded-random). A repair pass then swaps choices that
    would strand probability mass in value-preserving loops, so the
    result is genuinely optimal for the reach probability, merely
    careless about time.
    """
    import random as _random

    if rule not in BASELINE_RULES:
        raise ValueError(f"unknown baseline rule {rule!r}")
    targets = set(targets)
    if values is None:
        values = max_reach_values(model, targets)
    if opt is None:
        opt = opt_action_set(model, values, eta=eta)
    rng = _random.Random(seed)

    def choose(options):
        if rule == "first":
            return options[0]
        if rule == "last":
            return options[-1]
        return options[rng.randrange(len(options))]

    positive = [s for s in range(model.n_states) if values[s] > 0]
    positive_set = set(positive)
    pick = {}
    for s in positive:
        pick[s] = choose(list(opt[s]))
    covered = set(t for t in targets if t in positive_set)
    while True:
        changed = True
        while changed:
            changed = False
            for s in positive:
                if s in covered:
                    continue
                if any(
                    succ in covered for succ in model.support(s, pick[s])
                ):
                    covered.add(s)
                    changed = True
        rest = [s for s in positive if s not in covered]
        if not rest:
            break
        adjusted = False
        for s in rest:
            eligible = [
                a for a in opt[s]
                if any(succ in covered for succ in model.support(s, a))
            ]
            if eligible:
                pick[s] = choose(eligible)
                adjusted = True
        if not adjusted:
            raise RuntimeError("baseline repair failed to make progress")
    assignment = {}
    for s in range(model.n_states):
        assignment[s] = pick.get(s, model.legal_actions(s)[0])
    return MemorylessStrategy.pure(assignment, model.mode)


@dataclass(frozen=True)
class LayoutRecord:
    """One benchmark row; length fields are None when the target is unreachable."""

    index: int
    seed_requested: int
    seed: int
    regenerations: int
    val: Value
    shortest_distance: int | float
    v_distopt: Value | None
    v_baseline_first: Value | None
    v_baseline_last: Value | None
    v_baseline_rand: Value | None
    ratio: Value | None


@dataclass(frozen=True)
class BenchmarkReport:
    header: dict
    records: tuple[LayoutRecord, ...]
    aggregates: dict


def _ratio_fractions(ratios) -> dict:
    counts = {"ge_2": 0, "ge_10": 0, "ge_1000": 0, "gt_1": 0}
    for r in ratios:
        if r > 1:
            counts["gt_1"] += 1
        if r >= 2:
            counts["ge_2"] += 1
        if r >= 10:
            counts["ge_10"] += 1
        if r >= 1000:
            counts["ge_1000"] += 1
    total = len(ratios)
    out = {"count": total}
    for key, c in counts.items():
        out[f"fraction_{key}"] = (c / total) if total else None
        out[f"count_{key}"] = c
    return out


def run_benchmark(count: int, seed: int, width: int = 10, height: int = 10,
                  wall_prob: float = 0.1, hole_prob: float = 0.1,
                  slip: SlipParams | None = None, mode: str = EXACT,
                  *, eps: float = DEFAULT_EPS, eta: float = DEFAULT_ETA
                  ) -> BenchmarkReport:
    """Generate layouts, solve each, and compare against careless baselines.

    Each layout is solved once for the length-optimal strategy and once
    per baseline tie-break rule; all strategies are then re-evaluated
    by the conditional expected length in the original model (which
    also cross-checks the pruned-model expected length). Layouts whose
    target is unreachable from the start are reported with value zero
    and excluded from the ratio aggregates.
    """
    from . import __version__

    slip = slip or SlipParams()
    records: list[LayoutRecord] = []
    for i in range(count):
        layout_seed = stream_seed(seed, i)
        layout = generate_layout(layout_seed, width, height, wall_prob, hole_prob)
        model = layout_to_mdp(layout, slip, mode)
        shortest = graph_shortest_distance(layout)
        s0 = model.initial_state
        targets = set(model.target_set)
        values, _info = _max_reach_with_info(model, targets, eps)
        if values[s0] == 0:
            records.append(LayoutRecord(
                index=i, seed_requested=layout_seed, seed=layout.seed,
                regenerations=layout.seed - layout_seed, val=values[s0],
                shortest_distance=shortest, v_distopt=None,
                v_baseline_first=None, v_baseline_last=None,
                v_baseline_rand=None, ratio=None,
            ))
            continue
        opt = opt_action_set(model, values, eta=eta)
        pruned = prune_reach(model, values, opt)
        to_pruned = {orig: j for j, orig in enumerate(pruned.state_map)}
        strategy_pruned, ssp_length, _ssp = _min_expected_length_with_info(
            pruned, {to_pruned[t] for t in targets}
        )
        assignment = {}
        for s in range(model.n_states):
            p = to_pruned.get(s)
            assignment[s] = (
                strategy_pruned.action_at(p) if p is not None
                else model.legal_actions(s)[0]
            )
        distopt = MemorylessStrategy.pure(assignment, mode)
        v_distopt = conditional_expected_length(model, distopt, s0, targets)
        if mode == EXACT and v_distopt != ssp_length:
            raise RuntimeError(
                f"pruned expected length {ssp_length} disagrees with the "
                f"direct conditional evaluation {v_distopt} (seed {layout.seed})"
            )
        baseline_vals = {}
        for rule in BASELINE_RULES:
            strat = baseline_reach_strategy(
                model, targets, rule, seed=layout.seed, values=values, opt=opt
            )
            v = conditional_expected_length(model, strat, s0, targets)
            if mode == EXACT and v < v_distopt:
                raise RuntimeError(
                    f"baseline {rule} beat the length-optimal strategy "
                    f"(seed {layout.seed})"
                )
            baseline_vals[rule] = v
        records.append(LayoutRecord(
            index=i, seed_requested=layout_seed, seed=layout.seed,
            regenerations=layout.seed - layout_seed, val=values[s0],
            shortest_distance=shortest, v_distopt=v_distopt,
            v_baseline_first=baseline_vals["first"],
            v_baseline_last=baseline_vals["last"],
            v_baseline_rand=baseline_vals["random"],
            ratio=baseline_vals["random"] / v_distopt,
        ))
    aggregates = {
        "layouts": count,
        "solved": sum(1 for r in records if r.ratio is not None),
        "unreachable": sum(1 for r in records if r.ratio is None),
        "ratio_rule": "random",
        "ratios": _ratio_fractions([r.ratio for r in records if r.ratio is not None]),
        "per_rule": {
            rule: _ratio_fractions([
                getattr(r, f"v_baseline_{short}") / r.v_distopt
                for r in records if r.v_distopt is not None
            ])
            for rule, short in (("first", "first"), ("last", "last"), ("random", "rand"))
        },
    }
    header = {
        "tool": "lexmdp",
        "version": __version__,
        "seed": seed,
        "count": count,
        "dims": f"{width}x{height}",
        "wall_prob": wall_prob,
        "hole_prob": hole_prob,
        "slip": {"intended": slip.intended_weight, "side": slip.side_weight},
        "prng": ALGORITHM,
        "mode": mode,
        "tolerances": {"eps": eps, "eta": eta},
    }
    return BenchmarkReport(header=header, records=tuple(records), aggregates=aggregates)


_CSV_COLUMNS = (
    "seed", "val", "val_float", "shortest",
    "v_distopt", "v_distopt_float",
    "v_baseline_first", "v_baseline_first_float",
    "v_baseline_last", "v_baseline_last_float",
    "v_baseline_rand", "v_baseline_rand_float",
    "ratio", "ratio_float",
)


def benchmark_csv(report: BenchmarkReport) -> str:
    """Delimited rows, exact values as p/q with float companions."""

    def pair(v):
        if v is None:
            return ["", ""]
        return [format_value(v), repr(float(v))]

    lines = [",".join(_CSV_COLUMNS)]
    for r in report.records:
        cells = [str(r.seed)]
        cells += pair(r.val)
        cells.append("inf" if r.shortest_distance == math.inf else str(r.shortest_distance))
        cells += pair(r.v_distopt)
        cells += pair(r.v_baseline_first)
        cells += pair(r.v_baseline_last)
        cells += pair(r.v_baseline_rand)
        cells += pair(r.ratio)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def benchmark_json(report: BenchmarkReport) -> dict:
    def val(v):
        if v is None:
            return None
        return {"exact": format_value(v), "float": float(v)}

    rows = []
    for r in report.records:
        rows.append({
            "index": r.index,
            "seed_requested": r.seed_requested,
            "seed": r.seed,
            "regenerations": r.regenerations,
            "val": val(r.val),
            "shortest_distance": (
                "inf" if r.shortest_distance == math.inf else r.shortest_distance
            ),
            "v_distopt": val(r.v_distopt),
            "v_baseline_first": val(r.v_baseline_first),
            "v_baseline_last": val(r.v_baseline_last),
            "v_baseline_rand": val(r.v_baseline_rand),
            "ratio": val(r.ratio),
        })
    return {
        "header": report.header,
        "records": rows,
        "aggregates": report.aggregates,
    }

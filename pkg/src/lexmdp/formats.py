"""On-disk formats: model documents, strategy files, result records.

Models are JSON with explicit transition triples; probabilities are
"p/q" strings (or decimal literals, converted exactly in exact mode).
Every emitted document carries a reproducibility header with the tool
version, seed, numeric mode and tolerances.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ModelFormatError, ModelValidationError
from .model import Mdp, MemorylessStrategy, require_valid, validate_strategy
from .numeric import EXACT, Value, check_mode, format_value, parse_value

MODEL_FORMAT = "lexmdp-model"
STRATEGY_FORMAT = "lexmdp-strategy"
FORMAT_VERSION = 1


def build_header(*, mode: str, seed: int | None = None,
                 eps: float | None = None, eta: float | None = None) -> dict:
    from . import __version__

    return {
        "tool": "lexmdp",
        "version": __version__,
        "seed": seed,
        "mode": mode,
        "tolerances": {"eps": eps, "eta": eta},
    }


def value_document(value: Value | None, mode: str) -> dict | None:
    """Lossless rendering: exact values keep a p/q string next to a float."""
    if value is None:
        return None
    if mode == EXACT:
        return {"exact": format_value(value), "float": float(value)}
    return {"float": float(value)}


# ---------------------------------------------------------------------------
# model documents
# ---------------------------------------------------------------------------


def model_to_document(model: Mdp) -> dict:
    transitions = []
    for (s, a) in sorted(model.rows):
        for succ, p in model.rows[(s, a)]:
            transitions.append({
                "from": model.state_names[s],
                "action": model.action_names[a],
                "to": model.state_names[succ],
                "prob": format_value(p) if model.mode == EXACT else float(p),
            })
    document = {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "mode": model.mode,
        "states": list(model.state_names),
        "actions": list(model.action_names),
        "initial": model.state_names[model.initial_state],
        "transitions": transitions,
        "labels": {
            "target": [model.state_names[s] for s in sorted(model.target_set)],
            "bad": [model.state_names[s] for s in sorted(model.bad_set)],
        },
    }
    if model.rewards is not None:
        document["rewards"] = [
            {
                "from": model.state_names[s],
                "action": model.action_names[a],
                "value": (
                    format_value(model.rewards[(s, a)])
                    if model.mode == EXACT
                    else float(model.rewards[(s, a)])
                ),
            }
            for (s, a) in sorted(model.rewards)
        ]
    return document


def document_to_model(document: dict) -> Mdp:
    """Build and validate a model from its JSON document."""
    if not isinstance(document, dict):
        raise ModelFormatError("model document must be a JSON object")
    if document.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a model document: format={document.get('format')!r}")
    if document.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {document.get('version')!r}")
    try:
        mode = check_mode(document.get("mode", EXACT))
        state_names = tuple(document["states"])
        action_names = tuple(document["actions"])
        sidx = {name: i for i, name in enumerate(state_names)}
        aidx = {name: i for i, name in enumerate(action_names)}
        rows: dict[tuple[int, int], list[tuple[int, Value]]] = {}
        for triple in document["transitions"]:
            key = (sidx[triple["from"]], aidx[triple["action"]])
            rows.setdefault(key, []).append(
                (sidx[triple["to"]], parse_value(triple["prob"], mode))
            )
        rewards = None
        if "rewards" in document:
            rewards = {
                (sidx[item["from"]], aidx[item["action"]]):
                    parse_value(item["value"], mode)
                for item in document["rewards"]
            }
        labels = document.get("labels", {})
        model = Mdp(
            state_names=state_names,
            action_names=action_names,
            rows={key: tuple(sorted(entries)) for key, entries in rows.items()},
            initial_state=sidx[document["initial"]],
            target_set=frozenset(sidx[s] for s in labels.get("target", ())),
            bad_set=frozenset(sidx[s] for s in labels.get("bad", ())),
            rewards=rewards,
            mode=mode,
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc
    return require_valid(model)


def load_model(path: str | Path) -> Mdp:
    """Read, parse and validate a model file; JSON errors carry the position."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        # keep float literals as strings so exact mode converts them exactly
        document = json.loads(text, parse_float=str)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return document_to_model(document)


def save_model(model: Mdp, path: str | Path) -> None:
    Path(path).write_text(dump_json(model_to_document(model)), encoding="utf-8")


def dump_json(document: dict) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# strategy files
# ---------------------------------------------------------------------------


def strategy_to_document(model: Mdp, strategy: MemorylessStrategy,
                         header: dict | None = None) -> dict:
    if not strategy.is_deterministic:
        raise ValueError("only deterministic strategies are written to files")
    return {
        "format": STRATEGY_FORMAT,
        "version": FORMAT_VERSION,
        "mode": model.mode,
        "header": header or build_header(mode=model.mode),
        "choices": [
            {
                "state": model.state_names[s],
                "action": model.action_names[strategy.action_at(s)],
            }
            for s in sorted(strategy.choice)
        ],
    }


def document_to_strategy(document: dict, model: Mdp) -> MemorylessStrategy:
    if not isinstance(document, dict) or document.get("format") != STRATEGY_FORMAT:
        raise ModelFormatError("not a strategy document")
    if document.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {document.get('version')!r}")
    try:
        assignment = {
            model.state_index(item["state"]): model.action_index(item["action"])
            for item in document["choices"]
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed strategy document: {exc}") from exc
    missing = set(range(model.n_states)) - set(assignment)
    if missing:
        names = ", ".join(model.state_names[s] for s in sorted(missing))
        raise ModelFormatError(f"strategy file misses choices for: {names}")
    strategy = MemorylessStrategy.pure(assignment, model.mode)
    try:
        validate_strategy(model, strategy)
    except ValueError as exc:
        raise ModelValidationError([str(exc)]) from exc
    return strategy


def load_strategy(path: str | Path, model: Mdp) -> MemorylessStrategy:
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return document_to_strategy(document, model)


def save_strategy(model: Mdp, strategy: MemorylessStrategy, path: str | Path,
                  header: dict | None = None) -> None:
    Path(path).write_text(
        dump_json(strategy_to_document(model, strategy, header)), encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------


def reach_result_document(result, model: Mdp, header: dict) -> dict:
    return {
        "header": header,
        "objective": "reach-length",
        "reach_probability": value_document(result.reach_probability, model.mode),
        "conditional_expected_length": value_document(
            result.conditional_expected_length, model.mode
        ),
        "diagnostics": result.diagnostics,
    }


def safety_result_document(result, model: Mdp, header: dict) -> dict:
    return {
        "header": header,
        "objective": "safety-mp",
        "safety_probability": value_document(result.safety_probability, model.mode),
        "conditional_mean_payoff": value_document(
            result.conditional_mean_payoff, model.mode
        ),
        "diagnostics": result.diagnostics,
    }


def simulation_document(stats, header: dict) -> dict:
    return {
        "header": header,
        "episodes": stats.episodes,
        "horizon": stats.horizon,
        "seed": stats.seed,
        "reach_frequency": stats.reach_frequency,
        "reach_count": stats.reach_count,
        "conditional_mean_length": stats.conditional_mean_length,
        "conditional_length_se": stats.conditional_length_se,
        "safety_frequency": stats.safety_frequency,
        "safety_se": stats.safety_se,
        "mean_running_average_reward": stats.mean_running_average_reward,
    }

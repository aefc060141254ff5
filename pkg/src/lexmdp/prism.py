"""Export models in the PRISM modelling language (export only).

One command per (state, action) over a single integer-valued variable,
plus labels for the target/bad sets and an optional rewards block.
Meant for cross-checking against external probabilistic model checkers.
"""

from __future__ import annotations

import re

from .model import Mdp
from .numeric import format_value

_IDENT = re.compile(r"[^A-Za-z0-9_]")


def _action_label(name: str) -> str:
    label = _IDENT.sub("_", name)
    if not label or not (label[0].isalpha() or label[0] == "_"):
        label = f"act_{label}"
    return label


def export_prism(model: Mdp, module_name: str = "model") -> str:
    """Render the model as PRISM source text.

    The command count equals the number of legal (state, action)
    pairs; label lines follow the module, one per non-empty label set.
    """
    n = model.n_states
    lines = ["mdp", "", f"module {module_name}"]
    lines.append(f"  s : [0..{n - 1}] init {model.initial_state};")
    for s in range(n):
        for a in model.legal_actions(s):
            terms = " + ".join(
                f"{format_value(p)}:(s'={succ})" for succ, p in model.row(s, a)
            )
            lines.append(f"  [{_action_label(model.action_names[a])}] s={s} -> {terms};")
    lines.append("endmodule")
    for name, members in (("target", model.target_set), ("bad", model.bad_set)):
        if members:
            guard = "|".join(f"s={t}" for t in sorted(members))
            lines.append(f'label "{name}" = {guard};')
    if model.rewards is not None:
        lines.append("rewards")
        for (s, a) in sorted(model.rewards):
            value = model.rewards[(s, a)]
            lines.append(
                f"  [{_action_label(model.action_names[a])}] s={s} : {format_value(value)};"
            )
        lines.append("endrewards")
    return "\n".join(lines) + "\n"

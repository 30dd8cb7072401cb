"""JSON serialization for plans and super-plans.

Super-plan files round-trip: reading one back reconstructs an equal
:class:`SuperPlan`. Output is deterministic (sorted keys, fixed layout) so
golden files diff cleanly. ``docs/superplan-schema.md`` documents the schema.
"""

from __future__ import annotations

import json

from .model import (
    EvidentialInterval,
    GroundStep,
    KnowledgeAcquisitionOperator,
    Plan,
    Proposition,
    SuperPlan,
    SuperPlanAlternative,
    SuperPlanNode,
)

FORMAT = "uplan-superplan/1"


def proposition_to_dict(p: Proposition) -> dict:
    return {"predicate": p.predicate, "args": list(p.args), "polarity": p.polarity}


def proposition_from_dict(d: dict) -> Proposition:
    return Proposition(d["predicate"], tuple(d["args"]), d["polarity"])


def step_to_dict(step: GroundStep) -> dict:
    return {"action": step.operator, "bindings": {k: v for k, v in step.bindings}}


def step_from_dict(d: dict) -> GroundStep:
    return GroundStep(d["action"], tuple(sorted(d["bindings"].items())))


def _interval_to_list(interval: EvidentialInterval) -> list:
    return [interval.support, interval.plausibility]


def _node_to_dict(node: SuperPlanNode | None):
    if node is None:
        return None
    if node.is_branch:
        branch = {
            "alternatives": [
                {
                    "worlds": sorted(alt.worlds),
                    "weight": None if alt.weight is None else _interval_to_list(alt.weight),
                    "subtree": _node_to_dict(alt.subtree),
                }
                for alt in node.alternatives
            ],
        }
        if node.ka is not None:
            branch["ka"] = {
                "observe": [
                    {"level": level, "proposition": proposition_to_dict(prop)}
                    for level, prop in node.ka.observe
                ],
                "maps": {outcome: index for outcome, index in node.ka.maps},
            }
        else:
            branch["ka"] = None
        return {"branch": branch}
    return {"action": step_to_dict(node.step), "next": _node_to_dict(node.next)}


def _node_from_dict(d):
    if d is None:
        return None
    if "branch" in d:
        branch = d["branch"]
        ka = None
        if branch.get("ka") is not None:
            raw = branch["ka"]
            ka = KnowledgeAcquisitionOperator(
                observe=tuple(
                    (entry["level"], proposition_from_dict(entry["proposition"]))
                    for entry in raw["observe"]
                ),
                maps=tuple(sorted((k, v) for k, v in raw["maps"].items())),
            )
        alternatives = tuple(
            SuperPlanAlternative(
                subtree=_node_from_dict(alt["subtree"]),
                worlds=frozenset(alt["worlds"]),
                weight=None if alt["weight"] is None
                else EvidentialInterval(*alt["weight"]),
            )
            for alt in branch["alternatives"]
        )
        return SuperPlanNode(ka=ka, alternatives=alternatives)
    return SuperPlanNode(step=step_from_dict(d["action"]),
                         next=_node_from_dict(d["next"]))


def superplan_to_dict(sp: SuperPlan) -> dict:
    return {
        "format": FORMAT,
        "worlds": {wid: _interval_to_list(interval) for wid, interval in sp.worlds},
        "root": _node_to_dict(sp.root),
    }


def superplan_from_dict(d: dict) -> SuperPlan:
    if d.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} document")
    worlds = tuple(sorted(
        ((wid, EvidentialInterval(*pair)) for wid, pair in d["worlds"].items()),
        key=lambda pair: pair[0],
    ))
    return SuperPlan(root=_node_from_dict(d["root"]), worlds=worlds)


def dumps_superplan(sp: SuperPlan) -> str:
    return json.dumps(superplan_to_dict(sp), indent=2, sort_keys=True) + "\n"


def loads_superplan(text: str) -> SuperPlan:
    return superplan_from_dict(json.loads(text))


def plan_to_dict(plan: Plan) -> dict:
    """One-way dump of a single-world plan (values and execution order)."""
    return {
        "format": "uplan-plan/1",
        "worlds": sorted(plan.worlds),
        "root_operator": plan.root.operator.name,
        "root_values": {
            "fulfilment": plan.root.current.fulfilment,
            "probability": plan.root.current.probability,
            "ef": plan.root.ef,
        },
        "execution_sequence": [step_to_dict(s) for s in plan.execution_sequence],
    }


def dumps_plan(plan: Plan) -> str:
    return json.dumps(plan_to_dict(plan), indent=2, sort_keys=True) + "\n"

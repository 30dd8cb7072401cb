"""Core domain types: propositions, layered world states, operators, plan trees.

World states (:class:`PState`) are immutable; editing returns a new value so
plan nodes can keep snapshots of the state they were planned against. Plan
trees (:class:`PlanNode`) are the one mutable structure here: a tree is owned
by a single search and never shared between concurrent searches.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import CompatibilityViolation, LevelRangeError

log = logging.getLogger(__name__)

# Planfail directives understood by the search.
PLANFAIL_BACKTRACK = "backtrack"
PLANFAIL_REJECT_BRANCH = "reject-branch"

# Plot modes.
CHOOSE_ONE = "choose-one"
DO_ALL = "do-all-in-order"


def is_variable(token: str) -> bool:
    """Pattern variables are identifiers starting with '?'."""
    return isinstance(token, str) and token.startswith("?")


@dataclass(frozen=True, order=True)
class Proposition:
    """A ground or pattern literal: predicate, arguments, polarity.

    Inside a P-state every proposition is ground. Patterns (with ?variables)
    appear only in operator slots, causal rules and compatibility relations.
    """

    predicate: str
    args: tuple = ()
    polarity: bool = True

    def __post_init__(self):
        if not self.predicate:
            raise ValueError("proposition predicate must be non-empty")

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)

    def positive(self) -> "Proposition":
        return self if self.polarity else Proposition(self.predicate, self.args, True)

    def negated(self) -> "Proposition":
        return Proposition(self.predicate, self.args, not self.polarity)

    def substitute(self, bindings: dict) -> "Proposition":
        if not bindings or self.is_ground:
            return self
        new_args = tuple(bindings.get(a, a) if is_variable(a) else a for a in self.args)
        return Proposition(self.predicate, new_args, self.polarity)

    def __str__(self):
        inner = " ".join([self.predicate] + [str(a) for a in self.args])
        return f"({inner})" if self.polarity else f"(not ({inner}))"


def match(pattern: Proposition, fact: Proposition, bindings: dict | None = None) -> dict | None:
    """Unify a pattern against a ground fact; returns extended bindings or None."""
    if pattern.predicate != fact.predicate or pattern.polarity != fact.polarity:
        return None
    if len(pattern.args) != len(fact.args):
        return None
    out = dict(bindings) if bindings else {}
    for p_arg, f_arg in zip(pattern.args, fact.args):
        if is_variable(p_arg):
            bound = out.get(p_arg)
            if bound is None:
                out[p_arg] = f_arg
            elif bound != f_arg:
                return None
        elif p_arg != f_arg:
            return None
    return out


@dataclass(frozen=True)
class AbstractionLevel:
    """One layer of a P-state. Index 1 is the most abstract description."""

    index: int
    propositions: frozenset = frozenset()

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("abstraction level indices start at 1")
        for p in self.propositions:
            if not p.is_ground:
                raise ValueError(f"non-ground proposition {p} in abstraction level")


@dataclass(frozen=True)
class EvidentialInterval:
    """A (support, plausibility) pair bounding belief in a P-state."""

    support: float
    plausibility: float

    def __post_init__(self):
        if not (0.0 <= self.support <= self.plausibility <= 1.0):
            raise ValueError(
                f"invalid evidential interval [{self.support}, {self.plausibility}]"
            )


VACUOUS_INTERVAL = EvidentialInterval(0.0, 1.0)
CERTAIN_INTERVAL = EvidentialInterval(1.0, 1.0)


@dataclass(frozen=True)
class PState:
    """A complete possible world described at n abstraction levels."""

    id: str
    levels: tuple
    interval: EvidentialInterval = VACUOUS_INTERVAL

    def __post_init__(self):
        for i, level in enumerate(self.levels, start=1):
            if level.index != i:
                raise ValueError("P-state levels must be indexed 1..n in order")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level(self, index: int) -> AbstractionLevel:
        if not 1 <= index <= len(self.levels):
            raise LevelRangeError(
                f"level {index} out of range 1..{len(self.levels)} for P-state {self.id!r}"
            )
        return self.levels[index - 1]

    def facts(self, index: int):
        """Ground propositions at a level, in sorted order for determinism."""
        return sorted(self.level(index).propositions)


def make_pstate(id: str, n_levels: int, interval: EvidentialInterval = VACUOUS_INTERVAL,
                contents: dict | None = None) -> PState:
    """Build a P-state from {level index: iterable of propositions}."""
    contents = contents or {}
    levels = tuple(
        AbstractionLevel(i, frozenset(contents.get(i, ())))
        for i in range(1, n_levels + 1)
    )
    return PState(id, levels, interval)


def holds(ps: PState, level: int, p: Proposition) -> bool:
    """Closed-world truth of a ground proposition at one level.

    A positive proposition holds iff it is present; a negative one holds iff
    its positive form is absent. Absence of a positive proposition means false
    at that level, each level being a complete description on its own.
    """
    present = p.positive() in ps.level(level).propositions
    return present if p.polarity else not present


def apply_edits(ps: PState, edits) -> PState:
    """Apply (op, proposition, level) edits in order; returns a new P-state.

    Asserting a proposition removes its complement so a level never carries
    both p and (not p). Retracting an absent proposition is a logged no-op.
    """
    level_sets = [set(level.propositions) for level in ps.levels]
    for op, prop, level_index in edits:
        if not 1 <= level_index <= len(level_sets):
            raise LevelRangeError(
                f"edit level {level_index} out of range 1..{len(level_sets)}"
            )
        if not prop.is_ground:
            raise ValueError(f"edit proposition {prop} is not ground")
        bucket = level_sets[level_index - 1]
        if op == "assert":
            bucket.discard(prop.negated())
            bucket.add(prop)
        elif op == "retract":
            if prop in bucket:
                bucket.discard(prop)
            else:
                log.debug("retract of absent %s at level %d ignored", prop, level_index)
        else:
            raise ValueError(f"unknown edit op {op!r}")
    levels = tuple(
        AbstractionLevel(i + 1, frozenset(bucket)) for i, bucket in enumerate(level_sets)
    )
    return PState(ps.id, levels, ps.interval)


@dataclass(frozen=True)
class CompatibilityRelation:
    """A directional cross-level implication used to keep levels consistent."""

    if_at_level: int
    if_pattern: Proposition
    then_at_level: int
    then_pattern: Proposition

    def __str__(self):
        return (f"{self.if_pattern}@{self.if_at_level} => "
                f"{self.then_pattern}@{self.then_at_level}")


def enforce_compatibility(ps: PState, rels) -> PState:
    """Propagate compatibility relations to fixpoint by assertion.

    Whenever a relation's antecedent matches at its level and the bound
    consequent does not hold, the consequent is asserted. If the consequent's
    negation is explicitly present the relation cannot be repaired by
    assertion alone and a :class:`CompatibilityViolation` is raised.
    Idempotent: re-running on the result changes nothing.
    """
    current = ps
    changed = True
    while changed:
        changed = False
        for rel in rels:
            if not (1 <= rel.if_at_level <= current.n_levels
                    and 1 <= rel.then_at_level <= current.n_levels):
                raise LevelRangeError(f"compatibility relation {rel} out of level range")
            for fact in current.facts(rel.if_at_level):
                bindings = match(rel.if_pattern, fact)
                if bindings is None:
                    continue
                consequent = rel.then_pattern.substitute(bindings)
                if not consequent.is_ground:
                    raise ValueError(
                        f"compatibility relation {rel} leaves variables unbound"
                    )
                if holds(current, rel.then_at_level, consequent):
                    continue
                if consequent.negated() in current.level(rel.then_at_level).propositions:
                    raise CompatibilityViolation(
                        f"relation {rel} demands {consequent} at level "
                        f"{rel.then_at_level} but its negation is asserted",
                        relation=rel, level=rel.then_at_level,
                    )
                current = apply_edits(
                    current, [("assert", consequent, rel.then_at_level)]
                )
                changed = True
    return current


@dataclass(frozen=True)
class PlotEntry:
    """One step of an operator's plot: a subgoal or a batch of state edits."""

    kind: str  # "subgoal" | "state-edit"
    subgoal_name: str | None = None
    fulfilment: float | None = None
    edits: tuple = ()

    def __post_init__(self):
        if self.kind == "subgoal":
            if not self.subgoal_name or self.fulfilment is None or self.fulfilment < 0:
                raise ValueError("subgoal plot entries need a name and a fulfilment >= 0")
        elif self.kind == "state-edit":
            if not self.edits:
                raise ValueError("state-edit plot entries need at least one edit")
        else:
            raise ValueError(f"unknown plot entry kind {self.kind!r}")


def subgoal(name: str, fulfilment: float) -> PlotEntry:
    return PlotEntry("subgoal", subgoal_name=name, fulfilment=fulfilment)


def state_edit(*edits) -> PlotEntry:
    return PlotEntry("state-edit", edits=tuple(edits))


@dataclass(frozen=True)
class ProbabilityRule:
    """One conditional clause of an operator's probability table.

    ``conditions`` is a conjunction of (pattern, level) pairs; an empty
    conjunction is the unconditioned default that must close every table.
    """

    conditions: tuple
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"probability {self.value} outside [0, 1]")


@dataclass(frozen=True)
class ReductionOperator:
    """A goal-reduction action schema.

    Abstract operators reduce a goal to subgoals (their plot names child
    operators); lowest-level operators edit the P-state directly. Necessary
    preconditions are observed, never planned for; satisfiable ones may be
    achieved by helper operators of equal or lower abstraction.
    """

    name: str
    abstraction_level: int
    necessary: tuple = ()      # (pattern, level) pairs
    satisfiable: tuple = ()    # (pattern, level) pairs
    plot_mode: str = DO_ALL
    plot: tuple = ()
    probability_rules: tuple = (ProbabilityRule((), 1.0),)
    postconditions: tuple = () # (pattern, level) pairs
    planfail: str = PLANFAIL_BACKTRACK

    def __post_init__(self):
        if self.plot_mode not in (CHOOSE_ONE, DO_ALL):
            raise ValueError(f"unknown plot mode {self.plot_mode!r}")
        if not self.probability_rules or self.probability_rules[-1].conditions:
            raise ValueError(f"operator {self.name}: probability table must end "
                             "with an unconditioned default")

    @property
    def is_leaf(self) -> bool:
        return all(e.kind == "state-edit" for e in self.plot)

    def subgoal_entries(self):
        return [e for e in self.plot if e.kind == "subgoal"]


@dataclass(frozen=True)
class CausalRule:
    """A trigger-fired deduction: when a matching change happens and the
    condition holds, apply the effects.

    The trigger carries no level; it matches a change at any level and the
    condition conjunction is evaluated at the level the change occurred,
    unless a condition names its own level explicitly.
    """

    trigger: Proposition
    conditions: tuple = ()  # (pattern, level | None) pairs; None = trigger's level
    effects: tuple = ()     # (op, proposition-pattern, level) triples
    name: str = ""

    def __post_init__(self):
        if not self.effects:
            raise ValueError("causal rules need at least one effect")


# --- plan trees -----------------------------------------------------------

EXPANSION_AND = "AND"
EXPANSION_OR = "OR"
EXPANSION_LEAF = "leaf"
EXPANSION_UNEXPANDED = "unexpanded"

STATUS_NEW = "new"
STATUS_EXPANDED = "expanded"
STATUS_COMPLETE = "complete"
STATUS_FAILED = "failed"
STATUS_REDUNDANT = "redundant"


@dataclass
class Values:
    """A {fulfilment, probability} pair attached to a plan node."""

    fulfilment: float
    probability: float

    def copy(self) -> "Values":
        return Values(self.fulfilment, self.probability)

    @property
    def ef(self) -> float:
        return self.fulfilment * self.probability


@dataclass(eq=False)
class PlanNode:
    """One node of the strategy hierarchy.

    ``base`` holds the values assigned at instantiation (plot fulfilment and
    the probability read from the P-state); ``current`` is revised by the
    update rules as the subtree grows. ``ef`` always equals
    current.fulfilment * current.probability after an update pass.
    Nodes compare by identity: a tree belongs to exactly one search.
    """

    operator: ReductionOperator
    bindings: dict = field(default_factory=dict)
    base: Values = field(default_factory=lambda: Values(0.0, 1.0))
    current: Values = field(default_factory=lambda: Values(0.0, 1.0))
    children: list = field(default_factory=list)
    expansion: str = EXPANSION_UNEXPANDED
    pstate_before: PState | None = None
    pstate_after: PState | None = None
    pstate_after_helpers: PState | None = None
    side_effects: list = field(default_factory=list)
    helpers: list = field(default_factory=list)
    parent: "PlanNode | None" = None
    status: str = STATUS_NEW
    selected_index: int | None = None
    node_id: int = -1
    plot_index: int = 0
    recovery_attempted: bool = False

    @property
    def ef(self) -> float:
        return self.current.ef

    @property
    def name(self) -> str:
        return self.operator.name

    def applicable_children(self):
        return [c for c in self.children if c.status != STATUS_FAILED]

    @property
    def selected_child(self) -> "PlanNode | None":
        if self.selected_index is None:
            return None
        return self.children[self.selected_index]

    def select(self, child: "PlanNode"):
        self.selected_index = self.children.index(child)

    def walk(self):
        """Pre-order traversal of the whole tree (helpers excluded)."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


@dataclass(frozen=True)
class GroundStep:
    """One executable action: a lowest-level operator with its bindings."""

    operator: str
    bindings: tuple = ()  # sorted (variable, value) pairs

    def __str__(self):
        if not self.bindings:
            return self.operator
        args = " ".join(f"{k}={v}" for k, v in self.bindings)
        return f"{self.operator}[{args}]"


@dataclass
class Plan:
    """A finished plan for one or more possible worlds."""

    root: PlanNode
    worlds: set = field(default_factory=set)
    execution_sequence: tuple = ()

    @property
    def root_ef(self) -> float:
        return self.root.ef


# --- super-plans ----------------------------------------------------------

@dataclass(frozen=True)
class KnowledgeAcquisitionOperator:
    """An observation step that picks a branch of the super-plan at run time.

    ``observe`` is an ordered tuple of (level, proposition) to test; ``maps``
    sends each truth-value outcome string (e.g. "TF") to an alternative index.
    """

    observe: tuple
    maps: tuple  # sorted (outcome string, alternative index) pairs

    def outcome_for(self, ps: PState) -> str:
        return "".join("T" if holds(ps, lvl, p) else "F" for lvl, p in self.observe)

    def alternative_for(self, ps: PState) -> int | None:
        outcome = self.outcome_for(ps)
        return dict(self.maps).get(outcome)


@dataclass(frozen=True)
class SuperPlanAlternative:
    subtree: "SuperPlanNode | None"   # None = this alternative ends here
    worlds: frozenset
    weight: EvidentialInterval | None = None


@dataclass(frozen=True)
class SuperPlanNode:
    """Either a linear action step or a branch point.

    Action nodes carry a step and a single continuation. Branch points carry
    either a knowledge-acquisition operator or per-alternative evidence
    weights, never neither.
    """

    step: GroundStep | None = None
    next: "SuperPlanNode | None" = None
    ka: KnowledgeAcquisitionOperator | None = None
    alternatives: tuple = ()

    @property
    def is_branch(self) -> bool:
        return bool(self.alternatives)


@dataclass(frozen=True)
class SuperPlan:
    root: SuperPlanNode | None
    worlds: tuple  # sorted (world id, EvidentialInterval) pairs

    def branch_points(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node is None:
                continue
            if node.is_branch:
                out.append(node)
                stack.extend(alt.subtree for alt in node.alternatives)
            else:
                stack.append(node.next)
        return out

    def paths(self):
        """All root-to-leaf action sequences (one per alternative combination)."""
        results = []

        def descend(node, prefix):
            if node is None:
                results.append(tuple(prefix))
                return
            if node.is_branch:
                for alt in node.alternatives:
                    descend(alt.subtree, prefix)
                return
            prefix.append(node.step)
            descend(node.next, prefix)
            prefix.pop()

        descend(self.root, [])
        return results

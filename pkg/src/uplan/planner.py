"""Best-first construction of the strategy hierarchy for one possible world.

The search grows an AND/OR tree of plan nodes. Expansion always happens at
the leftmost incomplete point of the *active* subtree: OR nodes contribute
their selected child, AND nodes their children strictly in plot order so that
the P-state threading through state-editing leaves stays well defined.
Expected fulfilment (fulfilment x probability) ranks OR alternatives; after
every expansion the new values are propagated root-ward and earlier OR
selections are reviewed against their siblings, switching only when a sibling
clears the selected branch's value plus an offset that grows with the
abstraction-level gap. Switched-away branches are suspended, never deleted,
so a later review can resume them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import BudgetExceededError, CompatibilityViolation, PlanFailure, UplanError
from .model import (
    CHOOSE_ONE,
    EXPANSION_AND,
    EXPANSION_LEAF,
    EXPANSION_OR,
    PLANFAIL_BACKTRACK,
    PLANFAIL_REJECT_BRANCH,
    STATUS_COMPLETE,
    STATUS_EXPANDED,
    STATUS_FAILED,
    STATUS_NEW,
    STATUS_REDUNDANT,
    GroundStep,
    Plan,
    PlanNode,
    PState,
    Proposition,
    ReductionOperator,
    Values,
    apply_edits,
    enforce_compatibility,
    holds,
    match,
)

DEFAULT_NODE_BUDGET = 100_000
DEFAULT_HELPER_DEPTH = 3


@dataclass(frozen=True)
class ReviewPolicy:
    """Offset policy for reviewing earlier operator selections.

    A non-selected sibling takes over only when its EF exceeds the selected
    branch's updated EF by more than offset_fraction x level-gap x sibling EF.
    Zero recovers pure best-first behaviour; infinity freezes every selection.
    """

    offset_fraction: float = 0.1
    mode: str = "per-level-linear"

    def __post_init__(self):
        if math.isnan(self.offset_fraction) or self.offset_fraction < 0:
            raise ValueError("offset fraction must be >= 0")
        if self.mode != "per-level-linear":
            raise ValueError(f"unknown review mode {self.mode!r}")


@dataclass(frozen=True)
class SearchNode:
    """A frontier record: the node picked for expansion and its priority."""

    node: PlanNode
    priority: float
    level: int


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: str  # expand select update review-switch planfail satisfy-precondition
    node_id: int
    operator: str
    level: int
    before: tuple | None = None  # (fulfilment, probability, ef)
    after: tuple | None = None
    detail: str = ""

    def to_line(self) -> str:
        def triple(t):
            return "-" if t is None else f"{t[0]!r}/{t[1]!r}/{t[2]!r}"

        parts = [f"{self.seq:05d}", self.kind, f"node={self.node_id}",
                 f"op={self.operator}", f"level={self.level}",
                 f"before={triple(self.before)}", f"after={triple(self.after)}"]
        if self.detail:
            parts.append(f"detail={self.detail}")
        return " ".join(parts)


class PlanTrace:
    """Ordered event log of one search; replaying it reproduces the values."""

    def __init__(self):
        self.events: list = []

    def record(self, kind, node, before=None, after=None, detail=""):
        self.events.append(TraceEvent(
            seq=len(self.events), kind=kind, node_id=node.node_id,
            operator=node.operator.name, level=node.operator.abstraction_level,
            before=before, after=after, detail=detail,
        ))

    def to_lines(self) -> list:
        return [e.to_line() for e in self.events]

    def replay_values(self) -> dict:
        """Final (fulfilment, probability, ef) per node id, from the log alone."""
        values = {}
        for event in self.events:
            if event.after is not None:
                values[event.node_id] = event.after
        return values

    def __iter__(self):
        return iter(self.events)


def _triple(node: PlanNode) -> tuple:
    return (node.current.fulfilment, node.current.probability, node.ef)


# --- value calculus ---------------------------------------------------------

def expected_fulfilment(fulfilment: float, probability: float) -> float:
    """The ranking measure: how much of the goal this action is expected to buy."""
    return fulfilment * probability


def match_conjunction(ps: PState, pairs, bindings: dict | None = None):
    """First consistent binding satisfying every (pattern, level) pair, or None.

    Positive patterns match propositions present at their level (facts are
    tried in sorted order, so the result is deterministic); negative patterns
    succeed when no positive instance exists.
    """

    pairs = list(pairs)

    def descend(i, current):
        if i == len(pairs):
            return current
        pattern, level = pairs[i]
        p = pattern.substitute(current)
        if p.polarity:
            for fact in ps.facts(level):
                extended = match(p, fact, current)
                if extended is not None:
                    result = descend(i + 1, extended)
                    if result is not None:
                        return result
            return None
        positive = p.positive()
        for fact in ps.facts(level):
            if match(positive, fact) is not None:
                return None
        return descend(i + 1, current)

    return descend(0, dict(bindings) if bindings else {})


def operator_probability(op: ReductionOperator, ps: PState) -> float:
    """First probability rule whose condition holds in the P-state fires."""
    for rule in op.probability_rules:
        if match_conjunction(ps, rule.conditions) is not None:
            return rule.value
    raise UplanError(f"operator {op.name} has no default probability rule")


def rank_candidates(parent: PlanNode, ps: PState, spec) -> list:
    """Order a choose-one plot's subgoals by EF, ties kept in plot order.

    Returns (plot index, entry, operator, probability, ef) tuples.
    """
    candidates = []
    for index, entry in enumerate(parent.operator.plot):
        if entry.kind != "subgoal":
            continue
        op = spec.operator(entry.subgoal_name)
        probability = operator_probability(op, ps)
        candidates.append(
            (index, entry, op, probability,
             expected_fulfilment(entry.fulfilment, probability))
        )
    candidates.sort(key=lambda c: (-c[4], c[0]))
    return candidates


def update_or_node(parent: PlanNode) -> PlanNode:
    """OR update rules: copy the max-EF applicable child and mark it selected."""
    applicable = parent.applicable_children()
    if not applicable:
        raise UplanError(f"{parent.name}: all children inapplicable")
    best = applicable[0]
    for child in applicable[1:]:
        if child.ef > best.ef:
            best = child
    parent.current = best.current.copy()
    parent.select(best)
    return parent


def update_and_node(parent: PlanNode) -> PlanNode:
    """AND update rules: probability is the product over the children,
    fulfilment the minimum — one weak link caps the whole conjunction."""
    probability = 1.0
    fulfilment = math.inf
    for child in parent.children:
        probability *= child.current.probability
        fulfilment = min(fulfilment, child.current.fulfilment)
    if not parent.children:
        return parent
    parent.current = Values(fulfilment, probability)
    return parent


def _refresh_node(node: PlanNode):
    """Recompute one node from its children, honouring the standing OR selection."""
    if node.expansion == EXPANSION_AND:
        update_and_node(node)
    elif node.expansion == EXPANSION_OR:
        selected = node.selected_child
        if selected is not None and selected.status != STATUS_FAILED:
            node.current = selected.current.copy()


def propagate_updates(node: PlanNode, trace: PlanTrace | None = None) -> list:
    """Recompute ancestors bottom-up until the root or an unchanged one."""
    touched = []
    current = node.parent
    while current is not None:
        before = _triple(current)
        _refresh_node(current)
        after = _triple(current)
        if before == after:
            break
        if trace is not None:
            trace.record("update", current, before=before, after=after)
        touched.append(current)
        current = current.parent
    return touched


def recompute_values(root: PlanNode):
    """Full bottom-up recomputation of a tree (the propagation oracle)."""
    for node in reversed(list(root.walk())):
        if node.children:
            _refresh_node(node)
    return root


def _deepest_known_level(node: PlanNode) -> int:
    deepest = node.operator.abstraction_level
    for n in node.walk():
        if n.operator.abstraction_level > deepest:
            deepest = n.operator.abstraction_level
    return deepest


def review_offset(policy: ReviewPolicy, level_gap: int, candidate_ef: float) -> float:
    """Slack a sibling must clear before it may take over a reviewed branch."""
    if math.isinf(policy.offset_fraction):
        return math.inf
    return policy.offset_fraction * max(1, level_gap) * candidate_ef


def review_decisions(node: PlanNode, policy: ReviewPolicy,
                     trace: PlanTrace | None = None,
                     pinned=frozenset()) -> list:
    """Review the OR ancestors of a freshly expanded node.

    At each OR ancestor the non-selected siblings are compared against the
    selected branch's updated EF plus the offset; the best sibling clearing it
    becomes the active branch and the old one is suspended in place.
    Returns the OR nodes whose selection switched.
    """
    switched = []
    current = node if node.expansion == EXPANSION_OR else node.parent
    while current is not None:
        if current.expansion == EXPANSION_OR and id(current) not in pinned:
            selected = current.selected_child
            if selected is not None and selected.status != STATUS_FAILED:
                deepest = _deepest_known_level(selected)
                best, best_ef = None, selected.ef
                for sibling in current.applicable_children():
                    if sibling is selected:
                        continue
                    gap = deepest - sibling.operator.abstraction_level
                    offset = review_offset(policy, gap, sibling.ef)
                    if sibling.ef > selected.ef + offset and sibling.ef > best_ef:
                        best, best_ef = sibling, sibling.ef
                if best is not None:
                    before = _triple(current)
                    current.select(best)
                    current.current = best.current.copy()
                    if trace is not None:
                        trace.record(
                            "review-switch", current, before=before,
                            after=_triple(current),
                            detail=f"{selected.name}->{best.name}",
                        )
                    propagate_updates(current, trace)
                    switched.append(current)
        current = current.parent
    return switched


# --- deduction --------------------------------------------------------------

_DEDUCTION_CAP = 10_000


def deduce_effects(ps: PState, rules, changed) -> tuple:
    """Fire triggered causal rules to fixpoint; returns (new state, effect log).

    ``changed`` is the list of (op, proposition, level) edits that were just
    applied. Asserts produce positive change literals, retracts negative ones;
    a rule fires when its trigger matches a change and its condition holds
    (conditions without an explicit level are read at the change's level).
    Effects are changes themselves and may trigger later strata. The rule set
    is assumed stratified, so this terminates; a hard cap guards against
    unvetted rule sets.
    """
    state = ps
    log = []
    queue = [
        (prop if op == "assert" else prop.negated(), level)
        for op, prop, level in changed
    ]
    fired = 0
    while queue:
        literal, level = queue.pop(0)
        for rule in rules:
            bindings = match(rule.trigger, literal)
            if bindings is None:
                continue
            pairs = [
                (cond, level if cond_level is None else cond_level)
                for cond, cond_level in rule.conditions
            ]
            bound = match_conjunction(state, pairs, bindings)
            if bound is None:
                continue
            for op, prop, effect_level in rule.effects:
                ground = prop.substitute(bound)
                if not ground.is_ground:
                    raise UplanError(
                        f"causal rule effect {prop} has unbound variables"
                    )
                if op == "assert" and holds(state, effect_level, ground):
                    continue
                if op == "retract" and ground not in state.level(effect_level).propositions:
                    continue
                state = apply_edits(state, [(op, ground, effect_level)])
                log.append((op, ground, effect_level, rule.name or str(rule.trigger)))
                queue.append(
                    (ground if op == "assert" else ground.negated(), effect_level)
                )
                fired += 1
                if fired > _DEDUCTION_CAP:
                    raise UplanError("causal deduction did not reach a fixpoint")
    return state, log


# --- the search -------------------------------------------------------------

@dataclass
class PreconditionResult:
    accepted: bool
    bindings: dict = field(default_factory=dict)
    state: PState | None = None
    helpers: list = field(default_factory=list)
    reason: str = ""


class Search:
    """One planning run over a single P-state.

    ``script`` maps tree paths (tuples of child indices from the root) to a
    forced OR choice, which is how plan reapplication replays a donor plan:
    scripted ORs are pinned against review until their choice fails. With
    ``halt_on_failure`` the search raises :class:`ReplayHalt` at the first
    planfail inside the scripted region instead of recovering.
    """

    def __init__(self, ps: PState, spec, policy: ReviewPolicy | None = None,
                 budget: int = DEFAULT_NODE_BUDGET, trace: PlanTrace | None = None,
                 script: dict | None = None, replay_paths=None,
                 halt_on_failure: bool = False,
                 helper_depth: int = DEFAULT_HELPER_DEPTH):
        self.initial = ps
        self.spec = spec
        self.policy = policy or spec.review
        self.budget = budget
        self.trace = trace
        self.script = script or {}
        self.replay_paths = replay_paths or set()
        self.halt_on_failure = halt_on_failure
        self.helper_depth = helper_depth
        self.expansions = 0
        self.executed_steps = 0
        self._next_id = 0
        self._pinned: set = set()
        self.root: PlanNode | None = None

    # -- node bookkeeping --

    def _instantiate(self, op: ReductionOperator, fulfilment: float,
                     state: PState, parent: PlanNode | None) -> PlanNode:
        probability = operator_probability(op, state)
        node = PlanNode(
            operator=op,
            base=Values(fulfilment, probability),
            current=Values(fulfilment, probability),
            pstate_before=state,
            parent=parent,
            node_id=self._next_id,
        )
        self._next_id += 1
        return node

    def _path(self, node: PlanNode) -> tuple:
        out = []
        while node.parent is not None:
            out.append(node.plot_index)
            node = node.parent
        return tuple(reversed(out))

    # -- driver --

    def run(self) -> Plan:
        goal_op = self.spec.operator(self.spec.goal)
        self.root = self._instantiate(
            goal_op, self.spec.goal_fulfilment, self.initial, None
        )
        while True:
            point = self._next_point()
            if point is None:
                break
            self._expand(point.node)
        steps = tuple(self._collect_steps(self.root))
        return Plan(root=self.root, worlds={self.initial.id}, execution_sequence=steps)

    def _next_point(self) -> SearchNode | None:
        """Leftmost incomplete node of the active subtree, finalizing on the way."""
        while True:
            node = self.root
            if node.status == STATUS_FAILED:
                raise PlanFailure(f"goal {node.name!r} cannot be reduced to a plan")
            restart = False
            while True:
                if node.status == STATUS_NEW:
                    return SearchNode(node, node.ef, node.operator.abstraction_level)
                if node.status in (STATUS_COMPLETE, STATUS_REDUNDANT):
                    return None  # only reachable for the root
                if node.status == STATUS_FAILED:
                    raise PlanFailure(f"goal {self.root.name!r} cannot be reduced to a plan")
                if node.expansion == EXPANSION_AND:
                    pending = next(
                        (c for c in node.children
                         if c.status not in (STATUS_COMPLETE, STATUS_REDUNDANT)),
                        None,
                    )
                    if pending is None:
                        self._finalize(node)
                        restart = True
                        break
                    if pending.status == STATUS_FAILED:
                        self._planfail(node, f"child {pending.name} failed")
                        restart = True
                        break
                    node = pending
                    continue
                selected = node.selected_child
                if selected is None:
                    raise UplanError(f"OR node {node.name} has no selection")
                if selected.status == STATUS_FAILED:
                    self._reselect(node)
                    restart = True
                    break
                if selected.status in (STATUS_COMPLETE, STATUS_REDUNDANT):
                    self._finalize(node)
                    restart = True
                    break
                node = selected
            if restart:
                continue

    # -- expansion --

    def _expand(self, node: PlanNode):
        self.expansions += 1
        if self.expansions > self.budget:
            raise BudgetExceededError(
                f"node budget of {self.budget} exhausted after {self.expansions - 1} expansions"
            )
        state = self._thread_state(node)
        node.pstate_before = state

        if self._in_script(node) and self._redundant(node, state):
            return

        before = _triple(node)
        probability = operator_probability(node.operator, state)
        if probability != node.current.probability:
            node.current.probability = probability
        if self.trace is not None:
            self.trace.record("expand", node, before=before, after=_triple(node))

        result = self._check_and_satisfy(node, state)
        if not result.accepted:
            self._planfail(node, result.reason)
            return
        node.bindings = result.bindings
        node.helpers = result.helpers
        state = result.state
        node.pstate_after_helpers = state

        if node.operator.plot_mode == CHOOSE_ONE and not node.operator.plot:
            self._planfail(node, "choose-one plot is empty")
        elif node.operator.is_leaf:
            self._apply_leaf(node, state)
        else:
            self._apply_reduction(node, state)
        if node.status == STATUS_FAILED:
            return
        propagate_updates(node, self.trace)
        review_decisions(node, self.policy, self.trace, pinned=self._pinned)

    def _redundant(self, node: PlanNode, state: PState) -> bool:
        """During replay, an operator whose postconditions already hold is skipped."""
        post = node.operator.postconditions
        if not post or match_conjunction(state, post) is None:
            return False
        node.status = STATUS_REDUNDANT
        node.pstate_after = state
        if self.trace is not None:
            self.trace.record("expand", node, before=_triple(node),
                              after=_triple(node), detail="redundant")
        return True

    def _thread_state(self, node: PlanNode) -> PState:
        parent = node.parent
        if parent is None:
            return self.initial
        if parent.expansion == EXPANSION_AND:
            index = parent.children.index(node)
            if index > 0:
                return parent.children[index - 1].pstate_after
        return parent.pstate_after_helpers or parent.pstate_before

    def _check_and_satisfy(self, node: PlanNode, state: PState) -> PreconditionResult:
        op = node.operator
        bindings = match_conjunction(state, op.necessary)
        if bindings is None:
            return PreconditionResult(
                False, reason="necessary preconditions do not hold"
            )
        helpers = []
        for pattern, level in op.satisfiable:
            extended = match_conjunction(state, [(pattern, level)], bindings)
            if extended is not None:
                bindings = extended
                continue
            achieved = self._satisfy(node, pattern, level, bindings, state,
                                     self.helper_depth)
            if achieved is None:
                return PreconditionResult(
                    False,
                    reason=f"satisfiable precondition {pattern}@{level} unachievable",
                )
            helper_node, state = achieved
            helpers.append(helper_node)
            extended = match_conjunction(state, [(pattern, level)], bindings)
            if extended is None:
                return PreconditionResult(
                    False,
                    reason=f"helper left {pattern}@{level} unsatisfied",
                )
            bindings = extended
            if self.trace is not None:
                self.trace.record("satisfy-precondition", node,
                                  detail=f"{pattern}@{level} via {helper_node.name}")
        return PreconditionResult(True, bindings, state, helpers)

    def _satisfy(self, node: PlanNode, pattern: Proposition, level: int,
                 bindings: dict, state: PState, depth: int):
        """Bounded sub-search for a helper achieving one satisfiable precondition."""
        if depth <= 0:
            return None
        target = pattern.substitute(bindings)
        candidates = []
        for op in self.spec.operators:
            if op.abstraction_level < node.operator.abstraction_level:
                continue  # helpers come from equal or lower abstraction
            if any(_asserts(post, post_level, target, level)
                   for post, post_level in op.postconditions):
                probability = operator_probability(op, state)
                ef = expected_fulfilment(node.base.fulfilment, probability)
                candidates.append((-ef, op.name, op))
        candidates.sort()
        for _, _, op in candidates:
            helper = self._instantiate(op, node.base.fulfilment, state, None)
            outcome = self._expand_to_completion(helper, state, depth - 1)
            if outcome is None:
                continue
            if match_conjunction(outcome, [(target, level)]) is not None:
                return helper, outcome
        return None

    def _expand_to_completion(self, helper: PlanNode, state: PState,
                              depth: int) -> PState | None:
        """Greedy depth-first completion of a helper subplan, no review."""
        self.expansions += 1
        if self.expansions > self.budget:
            raise BudgetExceededError(f"node budget of {self.budget} exhausted")
        op = helper.operator
        bindings = match_conjunction(state, op.necessary)
        if bindings is None:
            return None
        for pattern, level in op.satisfiable:
            extended = match_conjunction(state, [(pattern, level)], bindings)
            if extended is not None:
                bindings = extended
                continue
            achieved = self._satisfy(helper, pattern, level, bindings, state, depth)
            if achieved is None:
                return None
            nested, state = achieved
            helper.helpers.append(nested)
            extended = match_conjunction(state, [(pattern, level)], bindings)
            if extended is None:
                return None
            bindings = extended
        helper.bindings = bindings
        helper.pstate_before = state
        if op.plot_mode == CHOOSE_ONE and not op.plot:
            return None
        if op.is_leaf:
            after = self._leaf_effects(helper, state)
            if after is None:
                return None
            helper.pstate_after = after
            helper.expansion = EXPANSION_LEAF
            helper.status = STATUS_COMPLETE
            self.executed_steps += 1
            return after
        if depth <= 0:
            return None
        if op.plot_mode == CHOOSE_ONE:
            for _, entry, child_op, probability, _ef in rank_candidates(helper, state, self.spec):
                child = self._instantiate(child_op, entry.fulfilment, state, helper)
                helper.children = [child]
                helper.expansion = EXPANSION_OR
                helper.selected_index = 0
                outcome = self._expand_to_completion(child, state, depth - 1)
                if outcome is None:
                    continue
                if match_conjunction(outcome, op.postconditions, helper.bindings) is None:
                    continue
                helper.status = STATUS_COMPLETE
                helper.pstate_after = outcome
                return outcome
            return None
        current = state
        helper.expansion = EXPANSION_AND
        for entry in op.plot:
            child = self._instantiate(self.spec.operator(entry.subgoal_name),
                                      entry.fulfilment, current, helper)
            child.plot_index = len(helper.children)
            helper.children.append(child)
            outcome = self._expand_to_completion(child, current, depth - 1)
            if outcome is None:
                return None
            current = outcome
        if match_conjunction(current, op.postconditions, helper.bindings) is None:
            return None
        helper.status = STATUS_COMPLETE
        helper.pstate_after = current
        return current

    def _leaf_effects(self, node: PlanNode, state: PState) -> PState | None:
        """Apply a leaf's edits, deduce side effects, re-enforce compatibility."""
        edits = []
        for entry in node.operator.plot:
            for op, prop, level in entry.edits:
                ground = prop.substitute(node.bindings)
                if not ground.is_ground:
                    raise UplanError(
                        f"{node.name}: edit {prop} has unbound variables"
                    )
                edits.append((op, ground, level))
        after = apply_edits(state, edits)
        after, side_effects = deduce_effects(after, self.spec.causal_rules, edits)
        node.side_effects = side_effects
        try:
            after = enforce_compatibility(after, self.spec.compat)
        except CompatibilityViolation:
            return None
        if match_conjunction(after, node.operator.postconditions, node.bindings) is None:
            return None
        return after

    def _apply_leaf(self, node: PlanNode, state: PState):
        after = self._leaf_effects(node, state)
        if after is None:
            self._planfail(node, "effects violate compatibility or postconditions")
            return
        node.expansion = EXPANSION_LEAF
        node.pstate_after = after
        node.status = STATUS_COMPLETE
        self.executed_steps += 1

    def _apply_reduction(self, node: PlanNode, state: PState):
        op = node.operator
        entries = op.subgoal_entries()
        if op.plot_mode == CHOOSE_ONE:
            if not entries:
                self._planfail(node, "choose-one plot is empty")
                return
            ranked = rank_candidates(node, state, self.spec)
            by_index = {}
            for index, entry, child_op, probability, _ef in ranked:
                child = self._instantiate(child_op, entry.fulfilment, state, node)
                by_index[index] = child
            node.children = [by_index[i] for i in sorted(by_index)]
            for child in node.children:
                child.plot_index = node.children.index(child)
            node.expansion = EXPANSION_OR
            node.status = STATUS_EXPANDED
            path = self._path(node)
            forced = self.script.get(path)
            if forced is not None and 0 <= forced < len(node.children):
                node.selected_index = forced
                node.current = node.children[forced].current.copy()
                self._pinned.add(id(node))
            else:
                update_or_node(node)
            if self.trace is not None:
                self.trace.record("select", node, after=_triple(node),
                                  detail=node.selected_child.name)
        else:
            for entry in entries:
                child = self._instantiate(self.spec.operator(entry.subgoal_name),
                                          entry.fulfilment, state, node)
                child.plot_index = len(node.children)
                node.children.append(child)
            node.expansion = EXPANSION_AND
            node.status = STATUS_EXPANDED
            before = _triple(node)
            update_and_node(node)
            if self.trace is not None:
                self.trace.record("update", node, before=before, after=_triple(node))

    # -- completion and failure --

    def _finalize(self, node: PlanNode):
        if node.expansion == EXPANSION_AND:
            node.pstate_after = node.children[-1].pstate_after
        else:
            node.pstate_after = node.selected_child.pstate_after
        if match_conjunction(node.pstate_after, node.operator.postconditions,
                             node.bindings) is None:
            self._planfail(node, "postconditions do not hold after reduction")
            return
        node.status = STATUS_COMPLETE

    def _reselect(self, or_node: PlanNode):
        applicable = or_node.applicable_children()
        if not applicable:
            self._planfail(or_node, "all children inapplicable")
            return
        before = _triple(or_node)
        update_or_node(or_node)
        self._pinned.discard(id(or_node))
        if self.trace is not None:
            self.trace.record("select", or_node, before=before, after=_triple(or_node),
                              detail=or_node.selected_child.name)
        propagate_updates(or_node, self.trace)

    def _planfail(self, node: PlanNode, reason: str):
        if self.trace is not None:
            self.trace.record("planfail", node, before=_triple(node), detail=reason)
        if self.halt_on_failure and self._in_script(node):
            raise ReplayHalt(node, reason)
        directive = node.operator.planfail
        if directive not in (PLANFAIL_BACKTRACK, PLANFAIL_REJECT_BRANCH):
            if not getattr(node, "recovery_attempted", False):
                self._recover(node, directive)
                return
            directive = PLANFAIL_BACKTRACK
        node.status = STATUS_FAILED
        target = node
        if directive == PLANFAIL_REJECT_BRANCH:
            # Kill the whole alternative under the nearest OR ancestor.
            target = node
            while (target.parent is not None
                   and target.parent.expansion != EXPANSION_OR):
                target = target.parent
            target.status = STATUS_FAILED
        parent = target.parent
        if parent is None:
            raise PlanFailure(
                f"goal {self.root.name!r} cannot be reduced to a plan: {reason}"
            )
        if parent.expansion == EXPANSION_OR:
            self._reselect(parent)
        else:
            self._planfail(parent, f"child {target.name} failed")

    def _recover(self, node: PlanNode, recovery_name: str):
        """Swap the failed node for its named recovery operator, tried once."""
        recovery_op = self.spec.operator(recovery_name)
        state = node.pstate_before or self.initial
        replacement = self._instantiate(recovery_op, node.base.fulfilment,
                                        state, node.parent)
        replacement.recovery_attempted = True
        replacement.plot_index = node.plot_index
        parent = node.parent
        if parent is None:
            self.root = replacement
        else:
            index = parent.children.index(node)
            parent.children[index] = replacement
            if parent.expansion == EXPANSION_OR and parent.selected_index == index:
                parent.current = replacement.current.copy()
        if self.trace is not None:
            self.trace.record("select", replacement, after=_triple(replacement),
                              detail=f"recovery for {node.name}")
        if parent is not None:
            propagate_updates(replacement, self.trace)

    def _in_script(self, node: PlanNode) -> bool:
        return bool(self.replay_paths) and self._path(node) in self.replay_paths

    # -- plan extraction --

    def _collect_steps(self, node: PlanNode):
        for helper in node.helpers:
            yield from self._collect_steps(helper)
        if node.status == STATUS_REDUNDANT:
            return
        if node.expansion == EXPANSION_LEAF:
            yield GroundStep(node.operator.name,
                             tuple(sorted(node.bindings.items())))
        elif node.expansion == EXPANSION_AND:
            for child in node.children:
                yield from self._collect_steps(child)
        elif node.expansion == EXPANSION_OR:
            yield from self._collect_steps(node.selected_child)


def _asserts(post: Proposition, post_level: int, target: Proposition, level: int) -> bool:
    """Could this postcondition make the target pattern true?"""
    if post_level != level or post.polarity != target.polarity:
        return False
    if post.predicate != target.predicate or len(post.args) != len(target.args):
        return False
    from .model import is_variable
    return all(
        is_variable(a) or is_variable(b) or a == b
        for a, b in zip(post.args, target.args)
    )


class ReplayHalt(UplanError):
    """Raised in assess mode when a scripted replay hits its first failure."""

    def __init__(self, node: PlanNode, reason: str):
        super().__init__(f"replay halted at {node.name}: {reason}")
        self.node = node
        self.reason = reason


def plan_for_pstate(ps: PState, spec, policy: ReviewPolicy | None = None,
                    budget: int = DEFAULT_NODE_BUDGET,
                    trace: PlanTrace | None = None) -> Plan:
    """Construct a plan for one possible world.

    Raises :class:`PlanFailure` when the goal cannot be reduced and
    :class:`BudgetExceededError` when the node budget runs out.
    """
    return Search(ps, spec, policy=policy, budget=budget, trace=trace).run()

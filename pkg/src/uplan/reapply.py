"""Plan reuse across possible worlds and merging into a single super-plan.

Reapplication replays a donor plan's operator choices against a new initial
world: every choice is scripted and pinned, so the replay succeeds exactly
when each non-redundant operator's preconditions hold and the postconditions
still come out. A failed replay reports the longest executed prefix; planning
can then continue from the failure point with the donor's surviving choices
kept. Once every world has a plan, the execution sequences are merged into a
trie that branches where the plans differ, and each branch point gets either
a knowledge-acquisition operator or evidence weights.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CoverageError, PlanFailure
from .model import (
    EXPANSION_AND,
    EXPANSION_OR,
    EvidentialInterval,
    KnowledgeAcquisitionOperator,
    Plan,
    PlanNode,
    PState,
    SuperPlan,
    SuperPlanAlternative,
    SuperPlanNode,
    holds,
)
from .planner import ReplayHalt, Search


@dataclass
class ReapplyResult:
    """Outcome of replaying one donor plan against one world."""

    kind: str                    # "full" | "partial" | "none"
    donor: Plan
    plan: Plan | None = None     # rebuilt plan (full replays only)
    prefix_length: int = 0       # executed steps before the failure
    resume: PlanNode | None = None
    order: int = 0               # donor's position in the plan library


def donor_script(plan: Plan) -> tuple:
    """Extract (or-choice script, replayable node paths) from a donor plan."""
    script = {}
    paths = set()

    def walk(node: PlanNode, path: tuple):
        paths.add(path)
        if node.expansion == EXPANSION_OR:
            selected = node.selected_child
            script[path] = node.selected_index
            walk(selected, path + (selected.plot_index,))
        elif node.expansion == EXPANSION_AND:
            for child in node.children:
                walk(child, path + (child.plot_index,))

    walk(plan.root, ())
    return script, paths


def reapply_plan(plan: Plan, ps: PState, spec, order: int = 0,
                 budget: int = 100_000) -> ReapplyResult:
    """Assess whether a donor plan works, wholly or in part, for a new world."""
    script, paths = donor_script(plan)
    search = Search(ps, spec, script=script, replay_paths=paths,
                    halt_on_failure=True, budget=budget)
    try:
        rebuilt = search.run()
    except ReplayHalt as halt:
        if halt.node is search.root:
            return ReapplyResult("none", plan, order=order)
        return ReapplyResult("partial", plan, prefix_length=search.executed_steps,
                             resume=halt.node, order=order)
    except PlanFailure:
        return ReapplyResult("none", plan, order=order)
    return ReapplyResult("full", plan, plan=rebuilt,
                         prefix_length=len(rebuilt.execution_sequence), order=order)


def continue_from(result: ReapplyResult, ps: PState, spec,
                  budget: int = 100_000, trace=None) -> Plan:
    """Resume planning for a world whose donor replay failed part-way.

    The donor's choices stay scripted; when one fails, its planfail directive
    applies and the search continues freely from there.
    """
    script, paths = donor_script(result.donor)
    search = Search(ps, spec, script=script, replay_paths=paths,
                    halt_on_failure=False, budget=budget, trace=trace)
    return search.run()


def select_best_partial(candidates) -> ReapplyResult:
    """Longest reusable prefix wins; ties go to the donor with the higher
    root EF, then to the earlier donor."""
    if not candidates:
        raise ValueError("no reapplication candidates to choose from")
    return sorted(
        candidates,
        key=lambda r: (-r.prefix_length, -r.donor.root_ef, r.order),
    )[0]


# --- merging ----------------------------------------------------------------

_END = object()


def merge_plans(plans, worlds, threshold=(0.0, 0.0)) -> SuperPlan:
    """Merge per-world plans into one super-plan trie.

    ``plans`` is a list of (Plan, world-id set) pairs; ``worlds`` the P-states
    the plans were built for. Every world at or above the coverage threshold
    must be covered by some plan. Identical execution sequences collapse into
    one path; divergence points become branch points whose alternatives carry
    the union of contributing worlds.
    """
    min_support, min_plausibility = threshold
    covered = set()
    for _plan, world_ids in plans:
        covered |= set(world_ids)
    for world in worlds:
        above = (world.interval.support >= min_support
                 and world.interval.plausibility >= min_plausibility)
        if above and world.id not in covered:
            raise CoverageError(
                f"world {world.id!r} is above the coverage threshold but has no plan",
                world_id=world.id,
            )

    # Group identical sequences, keeping first-seen order for determinism.
    grouped: dict = {}
    for index, (plan, world_ids) in enumerate(plans):
        seq = tuple(plan.execution_sequence)
        if seq in grouped:
            grouped[seq][0] |= set(world_ids)
        else:
            grouped[seq] = [set(world_ids), index]
    entries = sorted(
        ((seq, frozenset(ids), order) for seq, (ids, order) in grouped.items()),
        key=lambda e: e[2],
    )

    def build(entries, depth):
        alive = [(seq, ids, order) for seq, ids, order in entries]
        if not alive:
            return None
        heads = {seq[depth] if depth < len(seq) else _END for seq, _, _ in alive}
        if len(heads) == 1:
            head = next(iter(heads))
            if head is _END:
                return None
            return SuperPlanNode(step=head, next=build(alive, depth + 1))
        # Divergence: one alternative per distinct head, in first-seen order.
        buckets: dict = {}
        for seq, ids, order in alive:
            head = seq[depth] if depth < len(seq) else _END
            buckets.setdefault(head, []).append((seq, ids, order))
        ordered = sorted(buckets.values(), key=lambda group: min(g[2] for g in group))
        alternatives = []
        for group in ordered:
            worlds_union = frozenset().union(*(ids for _, ids, _ in group))
            head = group[0][0][depth] if depth < len(group[0][0]) else _END
            if head is _END:
                subtree = None
            else:
                subtree = SuperPlanNode(step=head, next=build(group, depth + 1))
            alternatives.append(SuperPlanAlternative(subtree, worlds_union))
        return SuperPlanNode(alternatives=tuple(alternatives))

    root = build(entries, 0)
    world_index = tuple(sorted(((w.id, w.interval) for w in worlds),
                               key=lambda pair: pair[0]))
    return SuperPlan(root=root, worlds=world_index)


def _combined_interval(world_ids, by_id) -> EvidentialInterval:
    """Pooled weight of a set of worlds: capped sums of supports and
    plausibilities. A ranking weight, not an exact disjunctive belief."""
    support = min(1.0, sum(by_id[w].interval.support for w in world_ids))
    plausibility = min(1.0, sum(by_id[w].interval.plausibility for w in world_ids))
    return EvidentialInterval(support, max(support, plausibility))


def _discriminator(world_sets, by_id) -> KnowledgeAcquisitionOperator | None:
    """Greedy set cover: observations whose truth values tell the world sets
    of every pair of alternatives apart, or None when none exists."""
    pairs = []
    for i in range(len(world_sets)):
        for j in range(i + 1, len(world_sets)):
            for w1 in sorted(world_sets[i]):
                for w2 in sorted(world_sets[j]):
                    pairs.append((w1, w2))
    if not pairs:
        return None
    involved = sorted({w for ws in world_sets for w in ws})
    candidates = []
    seen = set()
    for wid in involved:
        world = by_id[wid]
        for level_index in range(1, world.n_levels + 1):
            for prop in world.facts(level_index):
                key = (level_index, prop)
                if key not in seen:
                    seen.add(key)
                    candidates.append(key)
    candidates.sort(key=lambda c: (c[0], c[1]))

    def separates(candidate, pair):
        level, prop = candidate
        w1, w2 = pair
        return holds(by_id[w1], level, prop) != holds(by_id[w2], level, prop)

    chosen = []
    uncovered = list(pairs)
    while uncovered:
        best, best_covered = None, []
        for candidate in candidates:
            if candidate in chosen:
                continue
            covered = [p for p in uncovered if separates(candidate, p)]
            if len(covered) > len(best_covered):
                best, best_covered = candidate, covered
        if best is None:
            return None  # some pair is observationally indistinguishable
        chosen.append(best)
        uncovered = [p for p in uncovered if p not in best_covered]

    maps = {}
    for index, ws in enumerate(world_sets):
        for wid in sorted(ws):
            outcome = "".join(
                "T" if holds(by_id[wid], lvl, prop) else "F" for lvl, prop in chosen
            )
            existing = maps.get(outcome)
            if existing is not None and existing != index:
                return None  # cover missed a collision; treat as indistinguishable
            maps[outcome] = index
    return KnowledgeAcquisitionOperator(
        observe=tuple(chosen), maps=tuple(sorted(maps.items())),
    )


def insert_ka_operators(sp: SuperPlan, worlds) -> SuperPlan:
    """Attach a knowledge-acquisition operator to every branch point that can
    be discriminated by observation; weight the alternatives by evidence
    otherwise."""
    by_id = {w.id: w for w in worlds}

    def rebuild(node):
        if node is None:
            return None
        if not node.is_branch:
            return SuperPlanNode(step=node.step, next=rebuild(node.next))
        alternatives = tuple(
            SuperPlanAlternative(rebuild(alt.subtree), alt.worlds, None)
            for alt in node.alternatives
        )
        ka = _discriminator([alt.worlds for alt in alternatives], by_id)
        if ka is not None:
            return SuperPlanNode(ka=ka, alternatives=alternatives)
        weighted = tuple(
            SuperPlanAlternative(alt.subtree, alt.worlds,
                                 _combined_interval(alt.worlds, by_id))
            for alt in alternatives
        )
        return SuperPlanNode(alternatives=weighted)

    return SuperPlan(root=rebuild(sp.root), worlds=sp.worlds)

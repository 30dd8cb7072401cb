"""Reusing plans across worlds and merging them into one super-plan.

A finished plan is first reapplied to each remaining world: if every
non-redundant operator's preconditions still hold it is reused outright;
if it fails part-way the surviving prefix seeds a resumed search. When every
world has a plan, the execution sequences merge into a trie that branches
where they differ, and each branch point gets a knowledge-acquisition
operator (observe, then pick the branch) or evidence weights when no
observation can tell the worlds apart.
"""

from importlib import resources

from uplan import (
    ReviewPolicy,
    continue_from,
    generate_pstates,
    insert_ka_operators,
    merge_plans,
    parse_domain,
    parse_evidence,
    plan_for_pstate,
    rank_pstates,
    reapply_plan,
)
from uplan.serialize import dumps_superplan

spec = parse_domain(
    (resources.files("uplan") / "fixtures/air_combat.domain").read_text()
)
evidence = parse_evidence(
    (resources.files("uplan") / "fixtures/air_combat.evidence").read_text()
)
worlds = rank_pstates(generate_pstates(evidence, spec.compat, spec.n_levels))
fighter, bomber = worlds

print("planning the most plausible world first:", fighter.id)
donor = plan_for_pstate(fighter, spec, policy=ReviewPolicy(0.0))
print("  steps:", ", ".join(str(s) for s in donor.execution_sequence))

print(f"\nreapplying that plan to {bomber.id}:")
result = reapply_plan(donor, bomber, spec)
print(f"  outcome: {result.kind}, reusable prefix of {result.prefix_length} "
      f"step(s), fails at {result.resume.operator.name}")
print("  (the beyond-visual-range attack needs a positively identified"
      " fighter, which this world cannot supply)")

bomber_plan = continue_from(result, bomber, spec)
print("  resumed plan:", ", ".join(str(s) for s in bomber_plan.execution_sequence))

print("\nmerging into a super-plan:")
superplan = merge_plans(
    [(donor, donor.worlds), (bomber_plan, bomber_plan.worlds)],
    worlds, spec.coverage_threshold,
)
superplan = insert_ka_operators(superplan, worlds)

for point in superplan.branch_points():
    observations = ", ".join(f"{p}@{lvl}" for lvl, p in point.ka.observe)
    print(f"  branch point: observe {observations}")
    for outcome, index in point.ka.maps:
        alt_worlds = ", ".join(sorted(point.alternatives[index].worlds))
        print(f"    outcome {outcome} -> alternative {index} ({alt_worlds})")

print("\nfull super-plan document:\n")
print(dumps_superplan(superplan))

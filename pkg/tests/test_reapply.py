import pytest

from uplan.errors import CoverageError
from uplan.model import (
    EvidentialInterval,
    GroundStep,
    Plan,
    PlanNode,
    Values,
    make_pstate,
    state_edit,
    subgoal,
)
from uplan.planner import ReviewPolicy, plan_for_pstate
from uplan.reapply import (
    ReapplyResult,
    continue_from,
    insert_ka_operators,
    merge_plans,
    reapply_plan,
    select_best_partial,
)

from conftest import prop
from test_planner import op, spec_of


def fake_plan(steps, worlds, root_ef=100.0):
    root = PlanNode(operator=op("fake"), current=Values(root_ef, 1.0),
                    base=Values(root_ef, 1.0))
    return Plan(root=root,
                worlds=set(worlds),
                execution_sequence=tuple(GroundStep(s) for s in steps))


def chain_spec(n=5):
    """A root that applies five leaves in order; leaf k needs (pk)."""
    leaves = [
        op(f"L{k}", level=1, necessary=[(prop(f"(p{k})"), 1)],
           plot=[state_edit(("assert", prop(f"(done{k})"), 1))])
        for k in range(1, n + 1)
    ]
    root = op("Root", level=1, plot=[subgoal(f"L{k}", 100) for k in range(1, n + 1)])
    return spec_of("Root", [root] + leaves, n_levels=1)


def full_state(n=5, missing=None):
    props = [prop(f"(p{k})") for k in range(1, n + 1) if k != missing]
    return make_pstate(f"w-missing-{missing}", 1, contents={1: props})


def test_self_reapplication_is_full(air_combat_spec, air_combat_worlds):
    for world in air_combat_worlds:
        plan = plan_for_pstate(world, air_combat_spec, policy=ReviewPolicy(0.0))
        result = reapply_plan(plan, world, air_combat_spec)
        assert result.kind == "full"
        assert result.plan.execution_sequence == plan.execution_sequence


def test_partial_prefix_three_of_five():
    spec = chain_spec()
    origin = full_state()
    plan = plan_for_pstate(origin, spec)
    assert len(plan.execution_sequence) == 5
    result = reapply_plan(plan, full_state(missing=4), spec)
    assert result.kind == "partial"
    assert result.prefix_length == 3
    assert result.resume.operator.name == "L4"


def test_root_necessary_violation_means_none():
    spec = chain_spec()
    plan = plan_for_pstate(full_state(), spec)
    hostile = make_pstate("w", 1)  # nothing holds, not even L1's needs... but
    # the root itself carries no preconditions; give it one by rebuilding:
    ops = list(spec.operators)
    ops[0] = op("Root", level=1, necessary=[(prop("(rooted)"), 1)],
                plot=[subgoal(f"L{k}", 100) for k in range(1, 6)])
    guarded = spec_of("Root", ops, n_levels=1)
    origin = make_pstate("origin", 1, contents={
        1: [prop("(rooted)")] + [prop(f"(p{k})") for k in range(1, 6)],
    })
    plan = plan_for_pstate(origin, guarded)
    result = reapply_plan(plan, hostile, guarded)
    assert result.kind == "none"


def test_redundant_operator_skipped_without_failing():
    spec = chain_spec()
    origin = full_state()
    plan = plan_for_pstate(origin, spec)
    # (done3) already holds in the new world: L3's postconditions are met,
    # so it is skipped and everything else replays.
    ready = make_pstate("w", 1, contents={
        1: [prop(f"(p{k})") for k in range(1, 6)] + [prop("(done3)")],
    })
    # L3 has no postconditions in chain_spec; rebuild with postconditions.
    ops = [spec.operators[0]] + [
        op(f"L{k}", level=1, necessary=[(prop(f"(p{k})"), 1)],
           plot=[state_edit(("assert", prop(f"(done{k})"), 1))],
           post=[(prop(f"(done{k})"), 1)])
        for k in range(1, 6)
    ]
    spec2 = spec_of("Root", ops, n_levels=1)
    plan2 = plan_for_pstate(origin, spec2)
    result = reapply_plan(plan2, ready, spec2)
    assert result.kind == "full"
    assert [s.operator for s in result.plan.execution_sequence] == \
        ["L1", "L2", "L4", "L5"]


def test_continue_from_failure_point():
    spec = chain_spec()
    origin = full_state()
    donor = plan_for_pstate(origin, spec)
    # In the new world L4's necessary proposition is absent and L4 has no
    # alternative, so continuation must fail the same way fresh planning does.
    result = reapply_plan(donor, full_state(missing=4), spec)
    with pytest.raises(Exception):
        continue_from(result, full_state(missing=4), spec)


def test_continue_resumes_with_donor_strategy(air_combat_spec, air_combat_worlds):
    fighter, bomber = air_combat_worlds
    donor = plan_for_pstate(fighter, air_combat_spec, policy=ReviewPolicy(0.0))
    result = reapply_plan(donor, bomber, air_combat_spec)
    assert result.kind == "partial"
    assert result.resume.operator.name == "BVR_Attack"
    resumed = continue_from(result, bomber, air_combat_spec)
    fresh = plan_for_pstate(bomber, air_combat_spec, policy=ReviewPolicy(0.0))
    assert resumed.execution_sequence == fresh.execution_sequence


def test_select_best_partial_ordering():
    donor_low = fake_plan(["a"], {"w1"}, root_ef=700.0)
    donor_high = fake_plan(["a"], {"w2"}, root_ef=810.0)
    five = ReapplyResult("partial", donor_low, prefix_length=5, order=0)
    two = ReapplyResult("partial", donor_high, prefix_length=2, order=1)
    assert select_best_partial([two, five]) is five

    equal_low = ReapplyResult("partial", donor_low, prefix_length=2, order=0)
    equal_high = ReapplyResult("partial", donor_high, prefix_length=2, order=1)
    assert select_best_partial([equal_low, equal_high]) is equal_high

    assert select_best_partial([five]) is five
    # Final tiebreak: earlier donor wins.
    twin_a = ReapplyResult("partial", fake_plan(["a"], {"w"}, 100.0),
                           prefix_length=1, order=0)
    twin_b = ReapplyResult("partial", fake_plan(["b"], {"w"}, 100.0),
                           prefix_length=1, order=1)
    assert select_best_partial([twin_b, twin_a]) is twin_a


def world(id, s=0.5, p=0.5, contents=None):
    return make_pstate(id, 1, EvidentialInterval(s, p), contents or {})


def test_merge_identical_plans_no_branches():
    plans = [(fake_plan(["a", "b"], {f"w{i}"}), {f"w{i}"}) for i in range(4)]
    worlds = [world(f"w{i}") for i in range(4)]
    sp = merge_plans(plans, worlds)
    assert sp.branch_points() == []
    assert sp.paths() == [(GroundStep("a"), GroundStep("b"))]


def test_merge_final_step_differs():
    plans = [
        (fake_plan(["a", "b", "x"], {"w1"}), {"w1"}),
        (fake_plan(["a", "b", "y"], {"w2"}), {"w2"}),
    ]
    sp = merge_plans(plans, [world("w1"), world("w2")])
    points = sp.branch_points()
    assert len(points) == 1
    # The branch sits after the shared a, b prefix.
    assert sp.root.step == GroundStep("a")
    assert sp.root.next.step == GroundStep("b")
    assert sp.root.next.next.is_branch


def test_merge_three_way_divergence_at_step_two():
    plans = [
        (fake_plan(["a", "x"], {"w1"}), {"w1"}),
        (fake_plan(["a", "y"], {"w2"}), {"w2"}),
        (fake_plan(["a", "z"], {"w3"}), {"w3"}),
    ]
    sp = merge_plans(plans, [world(w) for w in ("w1", "w2", "w3")])
    points = sp.branch_points()
    assert len(points) == 1
    assert len(points[0].alternatives) == 3


def test_merge_prefix_plan_gets_end_alternative():
    plans = [
        (fake_plan(["a"], {"w1"}), {"w1"}),
        (fake_plan(["a", "b"], {"w2"}), {"w2"}),
    ]
    sp = merge_plans(plans, [world("w1"), world("w2")])
    assert sorted(sp.paths(), key=len) == [
        (GroundStep("a"),), (GroundStep("a"), GroundStep("b")),
    ]


def test_merge_coverage_error():
    plans = [(fake_plan(["a"], {"w1"}), {"w1"})]
    uncovered = world("w2", s=0.9, p=1.0)
    with pytest.raises(CoverageError) as info:
        merge_plans(plans, [world("w1"), uncovered], threshold=(0.5, 0.5))
    assert info.value.world_id == "w2"
    # Below the threshold the same world may stay unplanned.
    sp = merge_plans(plans, [world("w1"), world("w2", s=0.1, p=0.2)],
                     threshold=(0.5, 0.5))
    assert sp.branch_points() == []


def test_ka_single_forced_discriminator():
    w1 = world("w1", contents={1: [prop("(marker)")]})
    w2 = world("w2")
    plans = [
        (fake_plan(["a", "x"], {"w1"}), {"w1"}),
        (fake_plan(["a", "y"], {"w2"}), {"w2"}),
    ]
    sp = insert_ka_operators(merge_plans(plans, [w1, w2]), [w1, w2])
    point = sp.branch_points()[0]
    assert point.ka is not None
    assert point.ka.observe == ((1, prop("(marker)")),)
    assert point.ka.alternative_for(w1) == 0
    assert point.ka.alternative_for(w2) == 1


def test_ka_indistinguishable_worlds_get_evidence_weights():
    w1 = world("w1", s=0.6, p=1.0, contents={1: [prop("(same)")]})
    w2 = world("w2", s=0.0, p=0.4, contents={1: [prop("(same)")]})
    plans = [
        (fake_plan(["x"], {"w1"}), {"w1"}),
        (fake_plan(["y"], {"w2"}), {"w2"}),
    ]
    sp = insert_ka_operators(merge_plans(plans, [w1, w2]), [w1, w2])
    point = sp.branch_points()[0]
    assert point.ka is None
    weights = [alt.weight for alt in point.alternatives]
    assert weights[0] == EvidentialInterval(0.6, 1.0)
    assert weights[1] == EvidentialInterval(0.0, 0.4)


def test_ka_joint_pair_cover():
    # Alternatives separable only by observing p and q together.
    w1 = world("w1", contents={1: [prop("(p)"), prop("(q)")]})
    w2 = world("w2", contents={1: []})
    w3 = world("w3", contents={1: [prop("(p)")]})
    w4 = world("w4", contents={1: [prop("(q)")]})
    plans = [
        (fake_plan(["left"], {"w1", "w2"}), {"w1", "w2"}),
        (fake_plan(["right"], {"w3", "w4"}), {"w3", "w4"}),
    ]
    worlds = [w1, w2, w3, w4]
    sp = insert_ka_operators(merge_plans(plans, worlds), worlds)
    point = sp.branch_points()[0]
    assert point.ka is not None
    assert point.ka.observe == ((1, prop("(p)")), (1, prop("(q)")))
    for w, expected in ((w1, 0), (w2, 0), (w3, 1), (w4, 1)):
        assert point.ka.alternative_for(w) == expected


def test_flattened_paths_reproduce_inputs(air_combat_spec, air_combat_worlds):
    plans = []
    for w in air_combat_worlds:
        plan = plan_for_pstate(w, air_combat_spec, policy=ReviewPolicy(0.0))
        plans.append((plan, plan.worlds))
    sp = merge_plans(plans, air_combat_worlds)
    paths = {tuple(p) for p in sp.paths()}
    assert paths == {tuple(p.execution_sequence) for p, _ in plans}

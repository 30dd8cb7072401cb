"""Command-line entry point: validate domains, plan to a super-plan, emit
sensitivity data.

Exit codes: 0 success, 1 domain/planning errors, 2 unreadable input or bad
usage, 3 search budget exhausted. Identical inputs produce byte-identical
outputs; the UPLAN_WORKERS environment variable bounds how many donor-plan
reapplications are assessed in parallel (the reuse decisions themselves stay
in rank order).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .dsl import lint_domain, parse_domain, parse_evidence
from .errors import (
    BudgetExceededError,
    CoverageError,
    NoPossibleWorldError,
    ParseFailure,
    PlanFailure,
)
from .evidence import generate_pstates, rank_pstates
from .planner import DEFAULT_NODE_BUDGET, PlanTrace, ReviewPolicy, plan_for_pstate
from .reapply import (
    continue_from,
    insert_ka_operators,
    merge_plans,
    reapply_plan,
    select_best_partial,
)
from .sensitivity import (
    ErrorBoundedEF,
    contour_csv,
    contour_rows,
    distinguishable,
    grid_csv,
    sensitivity_grid,
)
from .serialize import dumps_plan, dumps_superplan


@dataclass
class RunConfig:
    """Everything one `uplan plan` invocation needs."""

    domain_path: str
    evidence_path: str
    out_path: str | None = None
    trace: bool = False
    rho: float | None = None
    budget: int = DEFAULT_NODE_BUDGET
    threshold: tuple | None = None
    per_world: bool = False
    workers: int = 1


def _read(path: str) -> str | None:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return None


def _workers_from_env() -> int:
    raw = os.environ.get("UPLAN_WORKERS", "")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            print(f"warning: ignoring UPLAN_WORKERS={raw!r}", file=sys.stderr)
    return os.cpu_count() or 1


def cmd_validate(domain_path: str) -> int:
    text = _read(domain_path)
    if text is None:
        return 2
    try:
        spec = parse_domain(text, filename=domain_path)
    except ParseFailure as failure:
        for error in failure.errors:
            print(str(error), file=sys.stderr)
        return 1
    diagnostics = lint_domain(spec)
    for diag in diagnostics:
        print(f"{domain_path}: {diag}", file=sys.stderr)
    if any(d.severity == "error" for d in diagnostics):
        return 1
    print(f"{domain_path}: ok ({len(spec.operators)} operators, "
          f"{spec.n_levels} levels)")
    return 0


def cmd_plan(config: RunConfig) -> int:
    domain_text = _read(config.domain_path)
    evidence_text = _read(config.evidence_path)
    if domain_text is None or evidence_text is None:
        return 2
    try:
        spec = parse_domain(domain_text, filename=config.domain_path)
        evidence = parse_evidence(evidence_text, filename=config.evidence_path)
    except ParseFailure as failure:
        for error in failure.errors:
            print(str(error), file=sys.stderr)
        return 1
    diagnostics = lint_domain(spec)
    for diag in diagnostics:
        print(f"{config.domain_path}: {diag}", file=sys.stderr)
    if any(d.severity == "error" for d in diagnostics):
        return 1

    policy = None if config.rho is None else ReviewPolicy(offset_fraction=config.rho)
    threshold = config.threshold or spec.coverage_threshold

    try:
        worlds = rank_pstates(generate_pstates(evidence, spec.compat, spec.n_levels))
    except NoPossibleWorldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    library: list = []  # finished plans, in creation order
    try:
        for world in worlds:
            if config.workers > 1 and len(library) > 1:
                with ThreadPoolExecutor(max_workers=config.workers) as pool:
                    results = list(pool.map(
                        lambda item: reapply_plan(item[1], world, spec,
                                                  order=item[0],
                                                  budget=config.budget),
                        enumerate(library),
                    ))
            else:
                results = [reapply_plan(plan, world, spec, order=i,
                                        budget=config.budget)
                           for i, plan in enumerate(library)]
            fulls = [r for r in results if r.kind == "full"]
            partials = [r for r in results if r.kind == "partial"]
            if fulls:
                best = select_best_partial(fulls)
                best.donor.worlds.add(world.id)
                if config.trace:
                    print(f"; world {world.id}: reusing existing plan in full",
                          file=sys.stderr)
                continue
            trace = PlanTrace() if config.trace else None
            if partials:
                best = select_best_partial(partials)
                plan = continue_from(best, world, spec, budget=config.budget,
                                     trace=trace)
                if config.trace:
                    print(f"; world {world.id}: resumed after a reusable prefix "
                          f"of {best.prefix_length} step(s)", file=sys.stderr)
            else:
                plan = plan_for_pstate(world, spec, policy=policy,
                                       budget=config.budget, trace=trace)
            library.append(plan)
            if trace is not None:
                for line in trace.to_lines():
                    print(f"; {world.id} {line}", file=sys.stderr)
    except PlanFailure as exc:
        print(f"error: world {world.id}: {exc}", file=sys.stderr)
        return 1
    except BudgetExceededError as exc:
        print(f"error: world {world.id}: {exc}", file=sys.stderr)
        return 3

    try:
        superplan = merge_plans([(p, p.worlds) for p in library], worlds, threshold)
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    superplan = insert_ka_operators(superplan, worlds)
    payload = dumps_superplan(superplan)
    if config.out_path:
        with open(config.out_path, "w", encoding="utf-8") as handle:
            handle.write(payload)
    else:
        sys.stdout.write(payload)
    if config.per_world:
        base = config.out_path or "superplan.json"
        stem = base[:-5] if base.endswith(".json") else base
        for plan in library:
            for world_id in sorted(plan.worlds):
                path = f"{stem}-{world_id}.json"
                with open(path, "w", encoding="utf-8") as handle:
                    handle.write(dumps_plan(plan))
    return 0


def _parse_range(raw: str) -> tuple:
    lo, _, hi = raw.partition(":")
    return float(lo), float(hi)


def cmd_sensitivity(args) -> int:
    if args.check is not None:
        values = args.check
        a = ErrorBoundedEF(probability=values[0], fulfilment=values[1],
                           probability_error=values[2], fulfilment_error=values[3])
        b = ErrorBoundedEF(probability=values[4], fulfilment=values[5],
                           probability_error=values[6], fulfilment_error=values[7])
        verdict, margin = distinguishable(a, b)
        word = "distinguishable" if verdict else "indistinguishable"
        print(f"{word}, margin {margin:g}")
        return 0
    try:
        gamma_range = _parse_range(args.gamma_range)
        delta_range = _parse_range(args.delta_range)
        grid = sensitivity_grid(gamma_range, delta_range, args.step)
        contours = contour_rows(gamma_range, delta_range, args.step)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    with open(args.grid_out, "w", encoding="utf-8") as handle:
        handle.write(grid_csv(grid))
    with open(args.contour_out, "w", encoding="utf-8") as handle:
        handle.write(contour_csv(contours))
    print(f"wrote {len(grid)} grid rows to {args.grid_out} and "
          f"{len(contours)} contour rows to {args.contour_out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uplan",
        description="Hierarchical planning under uncertain world descriptions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="parse and lint a domain file")
    validate.add_argument("domain")

    plan = sub.add_parser("plan", help="plan all possible worlds to a super-plan")
    plan.add_argument("domain")
    plan.add_argument("evidence")
    plan.add_argument("--out", default=None, help="super-plan output path "
                                                  "(default: stdout)")
    plan.add_argument("--trace", action="store_true",
                      help="emit search traces on stderr")
    plan.add_argument("--rho", type=float, default=None,
                      help="review offset fraction override")
    plan.add_argument("--budget", type=int, default=DEFAULT_NODE_BUDGET,
                      help="search node budget per world")
    plan.add_argument("--threshold", default=None, metavar="S,P",
                      help="coverage threshold override `support,plausibility`")
    plan.add_argument("--per-world", action="store_true",
                      help="also dump each world's individual plan")

    sens = sub.add_parser("sensitivity", help="EF error-bound tables")
    sens.add_argument("--check", type=float, nargs=8, default=None,
                      metavar=("P_A", "F_A", "A_ERR_P", "A_ERR_F",
                               "P_B", "F_B", "B_ERR_P", "B_ERR_F"),
                      help="report whether two error-bounded EFs are "
                           "reliably ordered")
    sens.add_argument("--gamma-range", default="0:1")
    sens.add_argument("--delta-range", default="0:1")
    sens.add_argument("--step", type=float, default=0.05)
    sens.add_argument("--grid-out", default="grid.csv")
    sens.add_argument("--contour-out", default="contours.csv")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if args.command == "validate":
        return cmd_validate(args.domain)
    if args.command == "plan":
        threshold = None
        if args.threshold is not None:
            try:
                s, _, p = args.threshold.partition(",")
                threshold = (float(s), float(p))
            except ValueError:
                print(f"error: bad --threshold {args.threshold!r}", file=sys.stderr)
                return 2
        config = RunConfig(
            domain_path=args.domain,
            evidence_path=args.evidence,
            out_path=args.out,
            trace=args.trace,
            rho=args.rho,
            budget=args.budget,
            threshold=threshold,
            per_world=args.per_world,
            workers=_workers_from_env(),
        )
        return cmd_plan(config)
    return cmd_sensitivity(args)


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()

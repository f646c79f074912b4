#!/usr/bin/env python3
"""Build a testing tree, print it, and score the suite against the mutant catalog.

    python3 scripts/generate_mbt_suite.py rcv_addr --tactics "dnf,setext(as),setext(asm)"
"""

import argparse
import sys

from mwref.mbt import DEFAULT_SCHEDULES, MUTANTS, TRANSITIONS, adapter_for, parse_schedule
from mwref.mbt.suite import dumps, format_schedule, suite_to_dict
from mwref.mbt.ttf import build_tree, generate_cases, prune, run_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("transition", choices=sorted(TRANSITIONS))
    ap.add_argument("--tactics", help="schedule (default: the shipped one)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("-o", "--output", help="also write the suite JSON here")
    a = ap.parse_args()

    t = TRANSITIONS[a.transition]
    schedule = parse_schedule(a.tactics) if a.tactics else list(DEFAULT_SCHEDULES[t.name])
    tree = prune(build_tree(t, schedule), jobs=a.jobs)

    print(f"{t.name}: {format_schedule(schedule)}")
    for node in tree.nodes():
        indent = "  " * node.depth
        if tree.children.get(node.id):
            print(f"{indent}{node.id}  [{node.tactic}] {node.characteristic}")
        else:
            w = tree.witnesses[node.id]
            mark = "pruned" if w is None else "case"
            print(f"{indent}{node.id}  [{node.tactic}] {node.characteristic}  -> {mark}")

    cases = generate_cases(tree)
    print(f"\n{len(tree.leaves())} leaves, {len(cases)} abstract test cases")
    if a.output:
        with open(a.output, "w") as fh:
            fh.write(dumps(suite_to_dict(t, schedule, cases, a.seed, "transparent")))

    model = run_suite(t, cases, adapter_for(t.name, seed=a.seed))
    print(f"model: {len(model.results) - len(model.failed)}/{len(model.results)} passed")
    killed = 0
    for m in MUTANTS[t.name]:
        r = run_suite(t, cases, adapter_for(t.name, m, a.seed), m)
        killed += not r.passed
        first = r.failed[0].case if r.failed else "-"
        print(f"  {m:22s} {'killed' if r.failed else 'SURVIVED'}  ({len(r.failed)} failing, first {first})")
    print(f"mutation score {killed}/{len(MUTANTS[t.name])}")
    return 0 if model.passed else 1


if __name__ == "__main__":
    sys.exit(main())

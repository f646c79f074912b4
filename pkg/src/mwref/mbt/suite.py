"""Tactic-schedule syntax and the suite/report JSON files.

A schedule is a comma-separated list of tactics::

    dnf, setext(as), bound(out_value), mem(a1,as), mem(sig_ok,{true})

``mem`` takes an element and a set; each side is a declared variable name or a
literal (``true``/``false``, integers, bare words, ``{a|b}`` sets).
"""

from __future__ import annotations

import json
import re
from typing import Any, Sequence

from .ttf import (
    DEFAULT_BUDGET, DNF, AbstractTestCase, MembershipSplit, NumericBoundary, SetExtension, Tactic, TransitionSpec,
    build_tree, generate_cases, prune,
)

SUITE_FORMAT = "mwref-mbt-suite/1"

_TACTIC = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


class ScheduleError(ValueError):
    pass


def _split_top(text: str, sep: str = ",") -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
            if depth < 0:
                raise ScheduleError(f"unbalanced brackets in {text!r}")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise ScheduleError(f"unbalanced brackets in {text!r}")
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def _literal(tok: str) -> Any:
    tok = tok.strip()
    if tok.startswith("{") and tok.endswith("}"):
        inner = tok[1:-1].strip()
        return frozenset(_literal(t) for t in inner.split("|")) if inner else frozenset()
    if tok in ("true", "false"):
        return tok == "true"
    if re.fullmatch(r"-?\d+", tok):
        return int(tok)
    return tok


def parse_tactic(text: str) -> Tactic:
    m = _TACTIC.match(text)
    if not m:
        raise ScheduleError(f"cannot parse tactic {text!r}")
    name, args = m.group(1), m.group(2)
    argv = _split_top(args) if args else []
    if name == "dnf" and not argv:
        return DNF()
    if name == "setext" and len(argv) == 1:
        return SetExtension(argv[0])
    if name == "bound" and len(argv) == 1:
        return NumericBoundary(argv[0])
    if name == "mem" and len(argv) == 2:
        return MembershipSplit(_literal(argv[0]), _literal(argv[1]))
    raise ScheduleError(f"unknown tactic or wrong arity: {text!r}")


def parse_schedule(text: str) -> list[Tactic]:
    return [parse_tactic(t) for t in _split_top(text)]


def format_schedule(schedule: Sequence[Tactic]) -> str:
    return ",".join(t.label for t in schedule)


def check_schedule(t: TransitionSpec, schedule: Sequence[Tactic]) -> None:
    """Reject tactics naming undeclared variables before any tree is built."""
    for tac in schedule:
        for attr in ("var",):
            name = getattr(tac, attr, None)
            if name is not None and name not in t.names:
                raise ScheduleError(f"{tac.label}: {t.name} declares no variable {name!r}")


def generate_suite(t: TransitionSpec, schedule: Sequence[Tactic], budget: int = DEFAULT_BUDGET,
                   jobs: int = 1) -> list[AbstractTestCase]:
    check_schedule(t, schedule)
    return generate_cases(prune(build_tree(t, schedule), budget, jobs))


# --------------------------------------------------------------------------
# JSON files
# --------------------------------------------------------------------------


def suite_to_dict(t: TransitionSpec, schedule: Sequence[Tactic], cases: Sequence[AbstractTestCase],
                  seed: int, backend: str) -> dict:
    return {
        "format": SUITE_FORMAT,
        "transition": t.name,
        "tactics": format_schedule(schedule),
        "seed": seed,
        "backend": backend,
        "cases": [
            {"id": c.id, "leaf": c.leaf, "binding": {v.name: v.encode(c.binding[v.name]) for v in t.variables}}
            for c in cases
        ],
    }


def suite_from_dict(d: dict, transitions: dict[str, TransitionSpec]) -> tuple[TransitionSpec, list[AbstractTestCase], dict]:
    if not isinstance(d, dict) or d.get("format") != SUITE_FORMAT:
        raise ValueError(f"not a suite file (expected format {SUITE_FORMAT})")
    try:
        t = transitions[d["transition"]]
    except KeyError:
        raise ValueError(f"unknown transition {d.get('transition')!r}") from None
    cases = []
    for raw in d["cases"]:
        binding = raw["binding"]
        if set(binding) != set(t.names):
            raise ValueError(f"case {raw.get('id')} must bind exactly {list(t.names)}")
        cases.append(AbstractTestCase(raw["id"], raw["leaf"], {v.name: v.decode(binding[v.name]) for v in t.variables}))
    meta = {"seed": int(d.get("seed", 0)), "backend": d.get("backend", "transparent"), "tactics": d.get("tactics", "")}
    return t, cases, meta


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"

"""Model-based testing: the Test Template Framework engine and shipped models."""

from .models import DEFAULT_SCHEDULES, MUTANTS, TRANSITIONS, adapter_for
from .predicate import Expr
from .suite import parse_schedule
from .ttf import (
    DNF, AbstractTestCase, BudgetExceeded, MembershipSplit, NumericBoundary, SetExtension, Tactic, TacticMismatch,
    TestingTree, TestSpec, TransitionSpec, VerdictReport, apply_tactic, build_tree, generate_cases, prune, run_suite,
    vis,
)

"""Test Template Framework: VIS, tactics, testing trees, pruning and the MBT loop.

A transition is described by finitely-typed input and state variables, a
precondition and a postcondition over those plus the post-state/output
variables produced by abstraction. Tactics split a test specification into
children whose characteristic predicates are conjoined with the ancestors'.
Satisfiability is decided by bounded-exhaustive enumeration in declared
variable order, so the first witness found is the lexicographically smallest.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol, Sequence

from .predicate import Card, Const, Eq, Expr, Gt, Guard, IsEmpty, Lt, Member, Not, Var, conj, disj, dnf_terms

Binding = dict[str, Any]

DEFAULT_BUDGET = 1_000_000


class TacticMismatch(TypeError):
    """The tactic does not apply to the variable's type."""


class BudgetExceeded(RuntimeError):
    def __init__(self, leaf: str, size: int, budget: int):
        super().__init__(f"leaf {leaf}: domain product {size} exceeds budget {budget}")
        self.leaf = leaf
        self.size = size
        self.budget = budget


class UnprunedTree(ValueError):
    """generate_cases needs every leaf decided by prune first."""


# --------------------------------------------------------------------------
# variables and transitions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: str  # "set" | "int" | "enum" | "bool"
    domain: tuple
    role: str = "input"  # "input" | "state"
    universe: tuple = ()
    lo: int | None = None
    hi: int | None = None

    def encode(self, value: Any) -> Any:
        if self.kind == "set":
            return sorted(value)
        return value

    def decode(self, raw: Any) -> Any:
        value = frozenset(raw) if self.kind == "set" else raw
        if value not in self.domain:
            raise ValueError(f"{raw!r} is not in the domain of {self.name}")
        return value


def set_var(name: str, universe: Sequence, role: str = "input") -> VarDecl:
    """Powerset domain, ordered by size then by sorted elements."""
    u = tuple(sorted(universe))
    subsets = [frozenset(c) for k in range(len(u) + 1) for c in itertools.combinations(u, k)]
    return VarDecl(name, "set", tuple(subsets), role, universe=u)


def int_var(name: str, lo: int, hi: int, role: str = "input") -> VarDecl:
    if hi < lo:
        raise ValueError("empty integer domain")
    return VarDecl(name, "int", tuple(range(lo, hi + 1)), role, lo=lo, hi=hi)


def enum_var(name: str, values: Sequence, role: str = "input") -> VarDecl:
    return VarDecl(name, "enum", tuple(values), role)


def bool_var(name: str, role: str = "input") -> VarDecl:
    return VarDecl(name, "bool", (False, True), role)


class SUTAdapter(Protocol):
    def refine(self, binding: Mapping[str, Any]) -> Any: ...

    def execute(self, concrete: Any) -> Any: ...

    def abstract(self, concrete: Any, result: Any) -> Mapping[str, Any]: ...


@dataclass(frozen=True)
class TransitionSpec:
    """``A(i, s, s', o) == Pre(i, s) => Post(i, s, s', o)`` over finite domains."""

    name: str
    variables: tuple[VarDecl, ...]
    pre: Expr
    post: Expr
    post_vars: tuple[str, ...] = ()
    model: Callable[[], SUTAdapter] | None = field(default=None, compare=False)

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable declaration")
        free = self.pre.free_vars() - set(names)
        if free:
            raise ValueError(f"undeclared variables in pre: {sorted(free)}")
        free = self.post.free_vars() - set(names) - set(self.post_vars)
        if free:
            raise ValueError(f"undeclared variables in post: {sorted(free)}")

    def var(self, name: str) -> VarDecl:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(f"{self.name} declares no variable {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def bindings(self) -> itertools.product:
        return itertools.product(*(v.domain for v in self.variables))

    @property
    def space(self) -> int:
        return math.prod(len(v.domain) for v in self.variables)


# --------------------------------------------------------------------------
# test specifications and tactics
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TestSpec:
    id: str
    characteristic: Expr
    tactic: str = "VIS"
    parent: "TestSpec | None" = field(default=None, repr=False)

    __test__ = False  # not a pytest class

    def path(self) -> list["TestSpec"]:
        node, out = self, []
        while node is not None:
            out.append(node)
            node = node.parent
        return out[::-1]

    def effective(self) -> Expr:
        return conj(*(n.characteristic for n in self.path()))

    @property
    def depth(self) -> int:
        return len(self.path()) - 1


def vis(t: TransitionSpec) -> TestSpec:
    """Valid input space: the root specification, characterised by the precondition."""
    return TestSpec("VIS", t.pre)


class Tactic:
    label: str

    def predicates(self, spec: TestSpec, t: TransitionSpec) -> list[Expr]:
        raise NotImplementedError


@dataclass(frozen=True)
class SetExtension(Tactic):
    var: str

    @property
    def label(self) -> str:
        return f"setext({self.var})"

    def predicates(self, spec, t):
        if t.var(self.var).kind != "set":
            raise TacticMismatch(f"set extension needs a set variable, {self.var} is {t.var(self.var).kind}")
        x = Var(self.var)
        return [IsEmpty(x), Eq(Card(x), Const(1)), Gt(Card(x), Const(1))]


@dataclass(frozen=True)
class NumericBoundary(Tactic):
    var: str

    @property
    def label(self) -> str:
        return f"bound({self.var})"

    def predicates(self, spec, t):
        d = t.var(self.var)
        if d.kind != "int":
            raise TacticMismatch(f"numeric boundary needs an integer variable, {self.var} is {d.kind}")
        if d.hi <= d.lo:
            raise TacticMismatch(f"numeric boundary needs hi > lo for {self.var}")
        v = Var(self.var)
        return [Eq(v, Const(d.lo)), conj(Lt(Const(d.lo), v), Lt(v, Const(d.hi))), Eq(v, Const(d.hi))]


@dataclass(frozen=True)
class DNF(Tactic):
    """One child per disjunct of the parent's effective predicate.

    Child i is ``D_i and not (D_1 or ... or D_{i-1})`` so that the children
    stay pairwise disjoint when disjuncts overlap. The exclusion is a Guard, so
    a DNF further down sees it as a single literal.
    """

    label = "dnf"

    def predicates(self, spec, t):
        terms = [conj(*lits) for lits in dnf_terms(spec.effective())]
        return [conj(d, Guard(disj(*terms[:i]))) if i else d for i, d in enumerate(terms)]


@dataclass(frozen=True)
class MembershipSplit(Tactic):
    elem: Any
    set: Any

    @property
    def label(self) -> str:
        return f"mem({_show(self.elem)},{_show(self.set)})"

    def predicates(self, spec, t):
        s = self._term(self.set, t)
        if isinstance(s, Var) and t.var(s.name).kind != "set":
            raise TacticMismatch(f"membership split needs a set, {s.name} is {t.var(s.name).kind}")
        if isinstance(s, Const) and not isinstance(s.value, frozenset):
            raise TacticMismatch("membership split needs a set")
        x = self._term(self.elem, t)
        return [Member(x, s), Not(Member(x, s))]

    @staticmethod
    def _term(x: Any, t: TransitionSpec) -> Expr:
        if isinstance(x, Expr):
            return x
        if isinstance(x, str) and x in t.names:
            return Var(x)
        return Const(x)


def _show(x: Any) -> str:
    if isinstance(x, frozenset):
        return "{" + "|".join(sorted(_show(e) for e in x)) + "}"
    if isinstance(x, bool):
        return "true" if x else "false"
    return str(x)


def apply_tactic(spec: TestSpec, tactic: Tactic, t: TransitionSpec) -> list[TestSpec]:
    preds = tactic.predicates(spec, t)
    return [TestSpec(f"{spec.id}.{i}", p, tactic.label, spec) for i, p in enumerate(preds, start=1)]


# --------------------------------------------------------------------------
# testing trees
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TestingTree:
    transition: TransitionSpec
    root: TestSpec
    children: Mapping[str, tuple[TestSpec, ...]] = field(default_factory=dict)
    witnesses: Mapping[str, Binding | None] | None = None  # None until pruned

    __test__ = False

    def nodes(self) -> list[TestSpec]:
        out, stack = [], [self.root]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(self.children.get(n.id, ())))
        return out

    def leaves(self) -> list[TestSpec]:
        """Leaves of the unpruned structure, in depth-first order."""
        return [n for n in self.nodes() if not self.children.get(n.id)]

    def surviving(self) -> list[TestSpec]:
        if self.witnesses is None:
            raise UnprunedTree("tree has not been pruned")
        return [n for n in self.leaves() if self.witnesses.get(n.id) is not None]

    def expand(self, tactic: Tactic, where: Callable[[TestSpec], bool] | None = None) -> "TestingTree":
        """Apply ``tactic`` to every current leaf (or those selected by ``where``)."""
        children = dict(self.children)
        for leaf in self.leaves():
            if where is None or where(leaf):
                children[leaf.id] = tuple(apply_tactic(leaf, tactic, self.transition))
        return TestingTree(self.transition, self.root, children)


def build_tree(t: TransitionSpec, schedule: Sequence[Tactic]) -> TestingTree:
    tree = TestingTree(t, vis(t))
    for tactic in schedule:
        tree = tree.expand(tactic)
    return tree


def find_witness(t: TransitionSpec, pred: Expr, budget: int = DEFAULT_BUDGET, leaf: str = "?") -> Binding | None:
    """Smallest satisfying binding under the declared variable order, or None."""
    if t.space > budget:
        raise BudgetExceeded(leaf, t.space, budget)
    names = t.names
    for values in t.bindings():
        env = dict(zip(names, values))
        if pred.evaluate(env):
            return env
    return None


def prune(tree: TestingTree, budget: int = DEFAULT_BUDGET, jobs: int = 1) -> TestingTree:
    """Annotate each leaf with a witness, or None when it is unsatisfiable."""
    t = tree.transition
    leaves = tree.leaves()

    def decide(leaf: TestSpec) -> Binding | None:
        return find_witness(t, leaf.effective(), budget, leaf.id)

    if jobs > 1 and len(leaves) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            found = list(pool.map(decide, leaves))
    else:
        found = [decide(leaf) for leaf in leaves]
    return TestingTree(t, tree.root, tree.children, {leaf.id: w for leaf, w in zip(leaves, found)})


# --------------------------------------------------------------------------
# cases and the verdict loop
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AbstractTestCase:
    id: str
    leaf: str
    binding: Mapping[str, Any]

    __test__ = False


def generate_cases(tree: TestingTree) -> list[AbstractTestCase]:
    return [
        AbstractTestCase(f"{tree.transition.name}-{i}", leaf.id, dict(tree.witnesses[leaf.id]))
        for i, leaf in enumerate(tree.surviving(), start=1)
    ]


@dataclass(frozen=True)
class CaseResult:
    case: str
    leaf: str
    passed: bool
    diagnostic: str = ""
    observed: Mapping[str, Any] | None = None

    def to_dict(self) -> dict:
        return {"case": self.case, "leaf": self.leaf, "passed": self.passed, "diagnostic": self.diagnostic}


@dataclass(frozen=True)
class VerdictReport:
    transition: str
    results: tuple[CaseResult, ...]
    sut: str = "model"

    @property
    def failed(self) -> list[CaseResult]:
        return [r for r in self.results if not r.passed]

    @property
    def passed(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        return {
            "transition": self.transition,
            "sut": self.sut,
            "total": len(self.results),
            "failed": len(self.failed),
            "results": [r.to_dict() for r in self.results],
        }


def run_suite(t: TransitionSpec, cases: Sequence[AbstractTestCase], sut: SUTAdapter, sut_name: str = "model") -> VerdictReport:
    """refine -> run -> abstract -> check the postcondition, one case at a time."""
    results = []
    for case in cases:
        try:
            concrete = sut.refine(case.binding)
            raw = sut.execute(concrete)
            observed = dict(sut.abstract(concrete, raw))
        except Exception as exc:  # a crashing SUT is a failing case, not a crashing suite
            results.append(CaseResult(case.id, case.leaf, False, f"SUT raised {type(exc).__name__}: {exc}"))
            continue
        env = {**case.binding, **observed}
        missing = set(t.post_vars) - set(observed)
        if missing:
            results.append(CaseResult(case.id, case.leaf, False, f"abstraction lacks {sorted(missing)}", observed))
            continue
        try:
            ok = bool(t.post.evaluate(env))
        except Exception as exc:
            results.append(CaseResult(case.id, case.leaf, False, f"post raised {type(exc).__name__}: {exc}", observed))
            continue
        diag = "" if ok else f"post fails: {t.post} with observed {_render(observed)}"
        results.append(CaseResult(case.id, case.leaf, ok, diag, observed))
    return VerdictReport(t.name, tuple(results), sut_name)


def _render(env: Mapping[str, Any]) -> str:
    return "{" + ", ".join(f"{k}={_show(v)}" for k, v in sorted(env.items())) + "}"


"""A small predicate language over finitely-typed variables.

Terms evaluate to Python values (ints, strings, bools, frozensets, tuples);
predicates evaluate to ``bool``. Everything is immutable and hashable so that
test specifications can be shared between trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

Env = Mapping[str, Any]


class Expr:
    def evaluate(self, env: Env) -> Any:
        raise NotImplementedError

    def free_vars(self) -> frozenset[str]:
        raise NotImplementedError


def _fmt(v: Any) -> str:
    if isinstance(v, frozenset):
        return "{" + ", ".join(sorted(map(_fmt, v))) + "}"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def evaluate(self, env: Env) -> Any:
        return env[self.name]

    def free_vars(self) -> frozenset[str]:
        return frozenset({self.name})

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const(Expr):
    value: Any

    def evaluate(self, env: Env) -> Any:
        return self.value

    def free_vars(self) -> frozenset[str]:
        return frozenset()

    def __str__(self) -> str:
        return _fmt(self.value)


TRUE = Const(True)
FALSE = Const(False)


def lift(x: Any) -> Expr:
    return x if isinstance(x, Expr) else Const(x)


@dataclass(frozen=True)
class _Unary(Expr):
    arg: Expr

    def free_vars(self) -> frozenset[str]:
        return self.arg.free_vars()


@dataclass(frozen=True)
class _Binary(Expr):
    left: Expr
    right: Expr

    symbol = "?"

    def free_vars(self) -> frozenset[str]:
        return self.left.free_vars() | self.right.free_vars()

    def __str__(self) -> str:
        return f"{self.left} {self.symbol} {self.right}"


class Card(_Unary):
    def evaluate(self, env: Env) -> int:
        return len(self.arg.evaluate(env))

    def __str__(self) -> str:
        return f"#{self.arg}"


class Union(_Binary):
    symbol = "∪"

    def evaluate(self, env: Env) -> frozenset:
        return frozenset(self.left.evaluate(env)) | frozenset(self.right.evaluate(env))

    def __str__(self) -> str:
        return f"({self.left} ∪ {self.right})"


class Diff(_Binary):
    symbol = "∖"

    def evaluate(self, env: Env) -> frozenset:
        return frozenset(self.left.evaluate(env)) - frozenset(self.right.evaluate(env))

    def __str__(self) -> str:
        return f"({self.left} ∖ {self.right})"


@dataclass(frozen=True)
class Call(Expr):
    """Escape hatch for pure library operations (e.g. building expected packet sets)."""

    name: str
    fn: Callable[..., Any]
    args: tuple[Expr, ...]

    def evaluate(self, env: Env) -> Any:
        return self.fn(*(a.evaluate(env) for a in self.args))

    def free_vars(self) -> frozenset[str]:
        return frozenset().union(*(a.free_vars() for a in self.args))

    def __str__(self) -> str:
        return f"{self.name}({', '.join(map(str, self.args))})"


# -- predicates ---------------------------------------------------------------


class Eq(_Binary):
    symbol = "="

    def evaluate(self, env: Env) -> bool:
        return self.left.evaluate(env) == self.right.evaluate(env)


class Ne(_Binary):
    symbol = "≠"

    def evaluate(self, env: Env) -> bool:
        return self.left.evaluate(env) != self.right.evaluate(env)


class Lt(_Binary):
    symbol = "<"

    def evaluate(self, env: Env) -> bool:
        return self.left.evaluate(env) < self.right.evaluate(env)


class Le(_Binary):
    symbol = "≤"

    def evaluate(self, env: Env) -> bool:
        return self.left.evaluate(env) <= self.right.evaluate(env)


class Gt(_Binary):
    symbol = ">"

    def evaluate(self, env: Env) -> bool:
        return self.left.evaluate(env) > self.right.evaluate(env)


class Ge(_Binary):
    symbol = "≥"

    def evaluate(self, env: Env) -> bool:
        return self.left.evaluate(env) >= self.right.evaluate(env)


class Member(_Binary):
    symbol = "∈"

    def evaluate(self, env: Env) -> bool:
        return self.left.evaluate(env) in self.right.evaluate(env)


class Subset(_Binary):
    symbol = "⊆"

    def evaluate(self, env: Env) -> bool:
        return frozenset(self.left.evaluate(env)) <= frozenset(self.right.evaluate(env))


class IsEmpty(_Unary):
    def evaluate(self, env: Env) -> bool:
        return len(self.arg.evaluate(env)) == 0

    def __str__(self) -> str:
        return f"{self.arg} = ∅"


class Not(_Unary):
    def evaluate(self, env: Env) -> bool:
        return not self.arg.evaluate(env)

    def __str__(self) -> str:
        return f"¬({self.arg})"


class Guard(Not):
    """A negation that normal forms keep as one literal.

    The DNF tactic excludes earlier disjuncts with a guard; expanding it again
    under a later DNF would multiply the term count at every level.
    """


@dataclass(frozen=True)
class And(Expr):
    items: tuple[Expr, ...]

    def evaluate(self, env: Env) -> bool:
        return all(p.evaluate(env) for p in self.items)

    def free_vars(self) -> frozenset[str]:
        return frozenset().union(*(p.free_vars() for p in self.items))

    def __str__(self) -> str:
        return " ∧ ".join(f"({p})" if isinstance(p, (Or, Implies)) else str(p) for p in self.items) or "true"


@dataclass(frozen=True)
class Or(Expr):
    items: tuple[Expr, ...]

    def evaluate(self, env: Env) -> bool:
        return any(p.evaluate(env) for p in self.items)

    def free_vars(self) -> frozenset[str]:
        return frozenset().union(*(p.free_vars() for p in self.items))

    def __str__(self) -> str:
        return " ∨ ".join(f"({p})" if isinstance(p, (And, Implies)) else str(p) for p in self.items) or "false"


class Implies(_Binary):
    symbol = "⇒"

    def evaluate(self, env: Env) -> bool:
        return (not self.left.evaluate(env)) or bool(self.right.evaluate(env))

    def __str__(self) -> str:
        return f"({self.left}) ⇒ ({self.right})"


def conj(*ps: Expr) -> Expr:
    """Flattened conjunction; drops literal ``true``."""
    items: list[Expr] = []
    for p in ps:
        if isinstance(p, And):
            items.extend(p.items)
        elif p != TRUE:
            items.append(p)
    if not items:
        return TRUE
    return items[0] if len(items) == 1 else And(tuple(items))


def disj(*ps: Expr) -> Expr:
    items: list[Expr] = []
    for p in ps:
        if isinstance(p, Or):
            items.extend(p.items)
        elif p != FALSE:
            items.append(p)
    if not items:
        return FALSE
    return items[0] if len(items) == 1 else Or(tuple(items))


# -- normal forms ---------------------------------------------------------------


def nnf(p: Expr, negate: bool = False) -> Expr:
    """Push negations down to atoms."""
    if isinstance(p, Guard):
        return Not(p) if negate else p
    if isinstance(p, Not):
        return nnf(p.arg, not negate)
    if isinstance(p, And):
        parts = [nnf(q, negate) for q in p.items]
        return disj(*parts) if negate else conj(*parts)
    if isinstance(p, Or):
        parts = [nnf(q, negate) for q in p.items]
        return conj(*parts) if negate else disj(*parts)
    if isinstance(p, Implies):
        return nnf(Or((Not(p.left), p.right)), negate)
    if p == TRUE:
        return FALSE if negate else TRUE
    if p == FALSE:
        return TRUE if negate else FALSE
    return Not(p) if negate else p


def dnf_terms(p: Expr) -> list[tuple[Expr, ...]]:
    """Disjunctive normal form as a list of conjunctions (tuples of literals)."""
    p = nnf(p)

    def go(q: Expr) -> list[tuple[Expr, ...]]:
        if q == TRUE:
            return [()]
        if q == FALSE:
            return []
        if isinstance(q, Or):
            out = []
            for item in q.items:
                out.extend(go(item))
            return out
        if isinstance(q, And):
            acc: list[tuple[Expr, ...]] = [()]
            for item in q.items:
                acc = [a + b for a in acc for b in go(item)]
            return acc
        return [(q,)]

    terms, seen = [], set()
    for t in go(p):
        lits = set(t)
        if any(isinstance(lit, Not) and lit.arg in lits for lit in t):
            continue  # contains a literal and its negation
        if t not in seen:
            seen.add(t)
            terms.append(t)
    return terms

"""Scenario builders shared by the ledger, property and acceptance tests."""

from __future__ import annotations

import random

from mwref.ledger import Block, Chain, aggregate, make_genesis
from mwref.tx import Opening, Transaction, build_transaction

N_BITS = 4
HI = (1 << N_BITS) - 1


def coins(group, rng: random.Random, k: int) -> list[Opening]:
    return [Opening(rng.randrange(1, group.q), rng.randint(1, HI)) for _ in range(k)]


def spend(group, rng: random.Random, spends: list[Opening], n_out: int | None = None) -> Transaction:
    total = sum(o.v for o in spends)
    n_out = n_out or rng.randint(1, 2)
    values = []
    left = total
    for i in range(n_out - 1):
        v = rng.randint(max(0, left - HI * (n_out - 1 - i)), min(HI, left))
        values.append(v)
        left -= v
    if left > HI:
        raise ValueError("cannot split")
    values.append(left)
    return build_transaction(group, spends, [(v, rng.randrange(1, group.q)) for v in values], n_bits=N_BITS)


def random_txs(group, rng: random.Random, k: int) -> tuple[list[Transaction], list[Opening]]:
    """k independent valid transactions over fresh coins (inputs never overlap)."""
    txs, used, seen = [], [], set()

    def fresh() -> Opening:
        while True:
            o = coins(group, rng, 1)[0]
            c = o.commitment(group)
            if c not in seen:
                seen.add(c)
                return o

    for _ in range(k):
        n_in = rng.randint(1, 2)
        ins = [fresh() for _ in range(n_in)]
        used.extend(ins)
        tx = spend(group, rng, ins, 2 if sum(o.v for o in ins) > HI else None)
        seen.update(tx.outputs)  # outputs must not collide with later inputs either
        txs.append(tx)
    return txs, used


def chain_of(group, rng: random.Random, blocks: int, coin_count: int = 6):
    """A valid chain: genesis plus ``blocks`` blocks each spending one or two unspent outputs."""
    unspent = coins(group, rng, coin_count)
    chain = Chain((make_genesis(group, unspent, N_BITS),))
    for _ in range(blocks):
        rng.shuffle(unspent)
        k = min(len(unspent), rng.randint(1, 2))
        ins, unspent = unspent[:k], unspent[k:]
        if sum(o.v for o in ins) > HI:
            ins, unspent = ins[:1], ins[1:] + unspent
        tx = spend(group, rng, ins)
        unspent.extend(tx.output_openings)
        chain = chain.append(aggregate([tx], offset=rng.randrange(group.q)))
    return chain, unspent


def block_with_pairs(group, rng: random.Random, pairs: int) -> Block:
    """A valid block of chained transactions: each later one spends an output of an earlier one."""
    ins = coins(group, rng, 1)
    tx = spend(group, rng, ins, 1)
    txs = [tx]
    for _ in range(pairs):
        prev = txs[-1].output_openings[0]
        txs.append(spend(group, rng, [prev], 1))
    extra, _ = random_txs(group, rng, rng.randint(0, 2))
    return aggregate(txs + extra, offset=rng.randrange(group.q))


# --------------------------------------------------------------------------
# random small testing trees
# --------------------------------------------------------------------------


def random_transition(rng: random.Random):
    from mwref.mbt import predicate as P
    from mwref.mbt.ttf import TransitionSpec, bool_var, int_var, set_var

    decls = [set_var("S", ("x", "y", "z")[: rng.randint(1, 3)]), int_var("n", 0, rng.randint(1, 4)), bool_var("b")]
    if rng.random() < 0.5:
        decls.append(set_var("T", ("x", "y")))
    names = [d.name for d in decls]
    atoms = [
        P.Member(P.Const("x"), P.Var("S")),
        P.Le(P.Card(P.Var("S")), P.Var("n")),
        P.Eq(P.Var("b"), P.Const(True)),
        P.Gt(P.Var("n"), P.Const(rng.randint(0, 3))),
        P.IsEmpty(P.Var("S")),
    ]
    if "T" in names:
        atoms += [P.Subset(P.Var("T"), P.Var("S")), P.Ne(P.Var("T"), P.Var("S"))]

    def rand_pred(depth: int):
        if depth == 0 or rng.random() < 0.3:
            a = rng.choice(atoms)
            return P.Not(a) if rng.random() < 0.3 else a
        op = rng.choice(("and", "or", "implies", "not"))
        if op == "not":
            return P.Not(rand_pred(depth - 1))
        if op == "implies":
            return P.Implies(rand_pred(depth - 1), rand_pred(depth - 1))
        parts = tuple(rand_pred(depth - 1) for _ in range(rng.randint(2, 3)))
        return P.And(parts) if op == "and" else P.Or(parts)

    pre = P.TRUE if rng.random() < 0.2 else rand_pred(2)
    return TransitionSpec("random", tuple(decls), pre, P.TRUE)


def random_tactic(rng: random.Random, t):
    from mwref.mbt.ttf import DNF, MembershipSplit, NumericBoundary, SetExtension

    sets = [d.name for d in t.variables if d.kind == "set"]
    choice = rng.choice(("setext", "bound", "dnf", "mem", "mem"))
    if choice == "setext":
        return SetExtension(rng.choice(sets))
    if choice == "bound":
        return NumericBoundary("n")
    if choice == "dnf":
        return DNF()
    if rng.random() < 0.5:
        return MembershipSplit(rng.choice(("x", "y", "z")), rng.choice(sets))
    return MembershipSplit("b", frozenset({rng.choice((True, False))}))


def random_tree(rng: random.Random, max_levels: int = 4):
    from mwref.mbt.ttf import build_tree

    t = random_transition(rng)
    schedule = []
    for _ in range(rng.randint(1, max_levels)):
        tac = random_tactic(rng, t)
        if getattr(tac, "var", None) == "n" and t.var("n").hi <= t.var("n").lo:
            continue
        schedule.append(tac)
    return build_tree(t, schedule)


def partition_ok(t, spec, tactic) -> bool:
    """Children are pairwise disjoint, cover the parent, and stay inside it."""
    from mwref.mbt.ttf import apply_tactic

    from .oracles import compile_pred

    parent = compile_pred(spec.effective())
    kids = [compile_pred(k.effective()) for k in apply_tactic(spec, tactic, t)]
    for vals in t.bindings():
        env = dict(zip(t.names, vals))
        hits = sum(f(env) for f in kids)
        if hits != (1 if parent(env) else 0):
            return False
    return True


def shipped_tactics(t):
    """Every shipped tactic, on every variable it applies to."""
    from mwref.mbt.ttf import DNF, MembershipSplit, NumericBoundary, SetExtension

    out = [DNF()]
    for d in t.variables:
        if d.kind == "set":
            out.append(SetExtension(d.name))
            out += [MembershipSplit(u, d.name) for u in d.universe]
        elif d.kind == "int":
            out.append(NumericBoundary(d.name))
        else:
            out += [MembershipSplit(d.name, frozenset({v})) for v in d.domain]
    return out

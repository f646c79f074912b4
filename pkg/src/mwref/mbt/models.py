"""Shipped transition specifications, their SUT adapters and seeded mutants.

``rcv_addr`` is the consensus transition on address gossip; abstract
packets are ``(origin, dest, kind, payload)`` tuples. ``validate_transaction``
is abstracted to a labelled pool of three coins worth 1, 2 and 3, one output
amount, and three tamper switches; its post-state is the verdict string.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Mapping

from .. import crypto
from ..consensus import CONNECT, AddrMsg, LocState, NotEnabled, Packet, initial_state, rcv_addr
from ..crypto import KernelSignature
from ..group import Group, get_group
from ..ledger import make_genesis
from ..tx import Opening, Transaction, TxKernel, excess_of, sum_points, validate_transaction
from ..verdict import Reason, Verdict
from .predicate import TRUE, Call, Const, Eq, Union, Var, conj
from .ttf import (
    DNF, MembershipSplit, NumericBoundary, SetExtension, Tactic, TransitionSpec, bool_var, enum_var, int_var,
    set_var,
)

THIS = "this"
SENDER = "a0"
PEERS = ("a1", "a2", "a3")

# --------------------------------------------------------------------------
# rcv_addr
# --------------------------------------------------------------------------


def expected_addr_out(as_: frozenset, asm: frozenset) -> frozenset:
    new_as = as_ | asm
    out = {(THIS, a, "ConnectMsg", None) for a in asm - as_}
    out |= {(THIS, a, "AddrMsg", new_as) for a in as_}
    return frozenset(out)


RCV_ADDR = TransitionSpec(
    name="rcv_addr",
    variables=(
        set_var("as", PEERS, role="state"),
        set_var("asm", PEERS),
        enum_var("dest", (THIS, "a1")),
        enum_var("kind", ("AddrMsg", "ConnectMsg")),
    ),
    pre=conj(Eq(Var("dest"), Const(THIS)), Eq(Var("kind"), Const("AddrMsg"))),
    post=conj(
        Eq(Var("as'"), Union(Var("as"), Var("asm"))),
        Eq(Var("bf_same"), Const(True)),
        Eq(Var("tp_same"), Const(True)),
        Eq(Var("out"), Call("addrOut", expected_addr_out, (Var("as"), Var("asm")))),
    ),
    post_vars=("as'", "bf_same", "tp_same", "out"),
)


@lru_cache(maxsize=None)
def _base_state(backend: str) -> LocState:
    g = get_group(backend)
    return initial_state(make_genesis(g, [Opening(1, 1)], n_bits=1))


def abstract_packets(ps) -> frozenset:
    return frozenset(
        (p.origin, p.dest, p.msg.kind, p.msg.addrs if isinstance(p.msg, AddrMsg) else None) for p in ps
    )


@dataclass
class RcvAddrAdapter:
    fn: Callable = rcv_addr
    backend: str = "transparent"

    def refine(self, b: Mapping[str, Any]):
        st = _base_state(self.backend).replace(as_=frozenset(b["as"]))
        msg = AddrMsg(b["asm"]) if b["kind"] == "AddrMsg" else CONNECT
        return st, Packet(SENDER, b["dest"], msg)

    def execute(self, concrete):
        st, p = concrete
        return self.fn(THIS, st, p)

    def abstract(self, concrete, result) -> dict:
        st, _ = concrete
        st2, out = result
        return {
            "as'": st2.as_,
            "bf_same": st2.bf.keys() == st.bf.keys(),
            "tp_same": st2.tp == st.tp,
            "out": abstract_packets(out),
        }


def _mutant_addr(connect_to: str = "new", relay_to: str = "old", relay_set: str = "new", keep: str = "union"):
    def fn(me, st: LocState, p: Packet):
        if p.dest != me or not isinstance(p.msg, AddrMsg):
            raise NotEnabled("rcv_addr guard")
        asm = p.msg.addrs
        new_as = asm if keep == "replace" else st.as_ | asm
        targets = asm if connect_to == "all" else asm - st.as_
        out = {Packet(me, a, CONNECT) for a in targets}
        payload = AddrMsg(new_as if relay_set == "new" else st.as_)
        relay = {"old": st.as_, "new": new_as, "none": frozenset()}[relay_to]
        out |= {Packet(me, a, payload) for a in relay}
        return st.replace(as_=new_as), frozenset(out)

    return fn


RCV_ADDR_MUTANTS: dict[str, Callable] = {
    "drop_relay": _mutant_addr(relay_to="none"),
    "relay_to_new_peers": _mutant_addr(relay_to="new"),
    "replace_peers": _mutant_addr(keep="replace"),
    "connect_all": _mutant_addr(connect_to="all"),
    "stale_relay_payload": _mutant_addr(relay_set="old"),
}


# --------------------------------------------------------------------------
# validate_transaction
# --------------------------------------------------------------------------

COINS = {"c1": 1, "c2": 2, "c3": 3}
TX_BITS = 3
TX_MAX_OUT = 1 << TX_BITS  # one past the provable range


def expected_verdict(ins: frozenset, out_value: int, sig_ok: bool, proof_ok: bool, dup: bool) -> str:
    if dup and ins:
        return Reason.DUPLICATE_INPUT.value
    if out_value >= TX_MAX_OUT or not proof_ok:
        return Reason.RANGE_PROOF.value
    if not sig_ok:
        return Reason.KERNEL_SIGNATURE.value
    if sum(COINS[c] for c in ins) != out_value:
        return Reason.UNBALANCED.value
    return "Valid"


VALIDATE_TX = TransitionSpec(
    name="validate_transaction",
    variables=(
        set_var("ins", tuple(COINS)),
        int_var("out_value", 0, TX_MAX_OUT),
        bool_var("sig_ok"),
        bool_var("proof_ok"),
        bool_var("dup"),
    ),
    pre=TRUE,
    post=Eq(
        Var("verdict"),
        Call("expectedVerdict", expected_verdict,
             (Var("ins"), Var("out_value"), Var("sig_ok"), Var("proof_ok"), Var("dup"))),
    ),
    post_vars=("verdict",),
)


def verdict_label(v: Verdict) -> str:
    return "Valid" if v.ok else v.reason.value


@dataclass
class ValidateTxAdapter:
    """Builds a concrete transaction realising an abstract binding.

    Blinding factors come from ``seed``; the output blinding is always known,
    so the kernel secret is ``r_out - sum(r_in)`` and a signature under it is
    honest whenever ``sig_ok`` holds.
    """

    fn: Callable = validate_transaction
    seed: int = 0
    backend: str = "transparent"
    _blind: dict = field(init=False, repr=False)

    def __post_init__(self):
        g = self.group
        rng = random.Random(f"mbt:{self.seed}")
        self._blind = {c: rng.randrange(1, g.q) for c in (*COINS, "out")}

    @property
    def group(self) -> Group:
        return get_group(self.backend)

    def refine(self, b: Mapping[str, Any]) -> Transaction:
        g = self.group
        q = g.q
        labels = sorted(b["ins"])
        if b["dup"] and labels:
            labels.append(labels[0])
        spends = [Opening(self._blind[c], COINS[c]) for c in labels]
        r_out, v = self._blind["out"], b["out_value"]
        out = Opening(r_out, v)

        if v >= TX_MAX_OUT:
            proof = crypto.prove_range(g, r_out, 0, TX_BITS)  # nothing honest exists
        elif b["proof_ok"]:
            proof = crypto.prove_range(g, r_out, v, TX_BITS)
        else:
            proof = crypto.prove_range(g, r_out, (v + 1) % TX_MAX_OUT, TX_BITS)

        sk = (r_out - sum(o.r for o in spends)) % q
        sig = crypto.sign(g, sk)
        if not b["sig_ok"]:
            sig = KernelSignature(sig.R, (sig.s + 1) % q)
        kernel = TxKernel(g.scalar_mul(sk, g.G), sig, (proof,))
        return Transaction(g, tuple(o.commitment(g) for o in spends), (out.commitment(g),), (kernel,),
                           kernel_secrets=(sk,), output_openings=(out,))

    def execute(self, tx: Transaction) -> Verdict:
        return self.fn(tx)

    def abstract(self, tx, result: Verdict) -> dict:
        return {"verdict": verdict_label(result)}


def _mutant_validate(skip: str) -> Callable[[Transaction], Verdict]:
    def fn(tx: Transaction, msg: bytes = crypto.EMPTY_MSG) -> Verdict:
        if skip != "duplicate":
            dup = [c for c, n in Counter(tx.inputs).items() if n > 1]
            if dup:
                return Verdict.invalid(Reason.DUPLICATE_INPUT, tx.inputs.index(dup[0]))
        if skip != "range":
            proofs = tx.range_proofs
            for j, out in enumerate(tx.outputs):
                if j >= len(proofs) or not crypto.verify_range(out, proofs[j]):
                    return Verdict.invalid(Reason.RANGE_PROOF, j)
        if skip != "signature":
            for k, kernel in enumerate(tx.kernels):
                if not crypto.verify(kernel.excess, msg, kernel.signature):
                    return Verdict.invalid(Reason.KERNEL_SIGNATURE, k)
        if skip != "balance":
            if excess_of(tx) != sum_points(tx.group, (k.excess for k in tx.kernels)):
                return Verdict.invalid(Reason.UNBALANCED)
        return Verdict.valid()

    return fn


VALIDATE_TX_MUTANTS: dict[str, Callable] = {
    f"skip_{name}": _mutant_validate(name) for name in ("duplicate", "range", "signature", "balance")
}


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

TRANSITIONS: dict[str, TransitionSpec] = {t.name: t for t in (RCV_ADDR, VALIDATE_TX)}

DEFAULT_SCHEDULES: dict[str, tuple[Tactic, ...]] = {
    "rcv_addr": (DNF(), SetExtension("as"), SetExtension("asm")),
    "validate_transaction": (
        SetExtension("ins"),
        NumericBoundary("out_value"),
        MembershipSplit("sig_ok", frozenset({True})),
        MembershipSplit("proof_ok", frozenset({True})),
        MembershipSplit("dup", frozenset({True})),
    ),
}

MUTANTS: dict[str, dict[str, Callable]] = {
    "rcv_addr": RCV_ADDR_MUTANTS,
    "validate_transaction": VALIDATE_TX_MUTANTS,
}


def adapter_for(transition: str, mutant: str | None = None, seed: int = 0, backend: str = "transparent"):
    if transition not in TRANSITIONS:
        raise KeyError(f"unknown transition {transition!r}; known: {sorted(TRANSITIONS)}")
    fn = None
    if mutant is not None:
        try:
            fn = MUTANTS[transition][mutant]
        except KeyError:
            raise KeyError(f"unknown mutant {mutant!r} of {transition}; known: {sorted(MUTANTS[transition])}") from None
    if transition == "rcv_addr":
        return RcvAddrAdapter(fn or rcv_addr, backend)
    return ValidateTxAdapter(fn or validate_transaction, seed, backend)

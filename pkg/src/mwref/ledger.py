"""Blocks, chains, cut-through and UTXO bookkeeping.

A block is valid when

    sum(outputs) - sum(inputs) == offset*G + sum(kernel excesses) + supply*H

and all its range proofs and kernel signatures verify. ``supply`` is the
public amount minted by the genesis block and must be zero everywhere else.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

from . import crypto
from .crypto import EMPTY_MSG
from .group import DecodeError, Group, GroupElement
from .tx import Opening, Transaction, TxKernel, canonical_json, sum_points, validate_transaction
from .verdict import Reason, Verdict

UtxoSet = Counter  # multiset of output commitments


class ConflictError(ValueError):
    """Two transactions spend the same commitment."""


class InvalidTransaction(ValueError):
    def __init__(self, index: int, verdict: Verdict):
        super().__init__(f"transaction {index} is {verdict}")
        self.index = index
        self.verdict = verdict


class InconsistencyError(RuntimeError):
    """A block spends something that is not in the running UTXO set."""


def _key(c: GroupElement) -> bytes:
    return c.to_bytes()


@dataclass(frozen=True, eq=False)
class Block:
    group: Group = field(repr=False)
    inputs: tuple[GroupElement, ...] = ()
    outputs: tuple[GroupElement, ...] = ()
    offset: int = 0
    kernels: tuple[TxKernel, ...] = ()
    genesis: bool = False
    supply: int = 0

    def to_dict(self) -> dict:
        return {
            "genesis": self.genesis,
            "inputs": [c.hex() for c in self.inputs],
            "outputs": [c.hex() for c in self.outputs],
            "offset": self.group.scalar_hex(self.offset),
            "supply": self.supply,
            "kernels": [k.to_dict() for k in self.kernels],
        }

    @classmethod
    def from_dict(cls, d: dict, group: Group) -> "Block":
        try:
            supply = int(d.get("supply", 0))
            return cls(
                group,
                tuple(group.element_from_hex(h) for h in d["inputs"]),
                tuple(group.element_from_hex(h) for h in d["outputs"]),
                group.scalar_from_hex(d["offset"]),
                tuple(TxKernel.from_dict(k, group) for k in d["kernels"]),
                bool(d.get("genesis", False)),
                supply,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DecodeError):
                raise
            raise DecodeError(f"bad block object: {exc}") from exc

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(self.group.name.encode() + b"|" + canonical_json(self.to_dict())).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Block):
            return NotImplemented
        return self.digest == other.digest

    def __hash__(self) -> int:
        return hash(self.digest)

    def replace(self, **changes) -> "Block":
        fields = dict(group=self.group, inputs=self.inputs, outputs=self.outputs, offset=self.offset,
                      kernels=self.kernels, genesis=self.genesis, supply=self.supply)
        fields.update(changes)
        return Block(**fields)


@dataclass(frozen=True)
class Chain:
    blocks: tuple[Block, ...]

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("a chain is a non-empty list of blocks")
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def group(self) -> Group:
        return self.blocks[0].group

    def append(self, b: Block) -> "Chain":
        return Chain(self.blocks + (b,))

    def __len__(self) -> int:
        return len(self.blocks)

    def to_list(self) -> list[dict]:
        return [b.to_dict() for b in self.blocks]

    @classmethod
    def from_list(cls, items: list, group: Group) -> "Chain":
        if not isinstance(items, list):
            raise DecodeError("chain file must hold a JSON array of blocks")
        return cls(tuple(Block.from_dict(d, group) for d in items))


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------


def make_genesis(group: Group, openings: Sequence[Opening], n_bits: int = 8, offset: int = 0,
                 msg: bytes = EMPTY_MSG) -> Block:
    """Genesis block minting ``sum(v)`` publicly into the given coinbase openings."""
    q = group.q
    sk = (sum(o.r for o in openings) - offset) % q
    proofs = tuple(crypto.prove_range(group, o.r, o.v, n_bits) for o in openings)
    kernel = TxKernel(group.scalar_mul(sk, group.G), crypto.sign(group, sk, msg), proofs)
    outputs = tuple(sorted((o.commitment(group) for o in openings), key=_key))
    return Block(group, (), outputs, offset % q, (kernel,), genesis=True, supply=sum(o.v for o in openings))


def aggregate(txs: Sequence[Transaction], offset: int = 0, group: Group | None = None,
              msg: bytes = EMPTY_MSG) -> Block:
    """CoinJoin ``txs`` into one block with kernel offset ``offset``.

    A non-zero offset is absorbed by re-blinding the first kernel whose secret
    is known to the builder: its excess becomes ``(sk - offset)*G``.
    """
    if group is None:
        if not txs:
            raise ValueError("group required to aggregate an empty list")
        group = txs[0].group
    q = group.q
    offset %= q
    seen: set[GroupElement] = set()
    for i, tx in enumerate(txs):
        verdict = validate_transaction(tx, msg)
        if not verdict:
            raise InvalidTransaction(i, verdict)
        clash = seen.intersection(tx.inputs)
        if clash:
            raise ConflictError(f"transaction {i} re-spends {next(iter(clash)).hex()}")
        seen.update(tx.inputs)

    kernels = [k for tx in txs for k in tx.kernels]
    if offset:
        pos = 0
        for tx in txs:
            if tx.kernels and tx.kernel_secrets:
                sk = (tx.kernel_secrets[0] - offset) % q
                old = kernels[pos]
                kernels[pos] = TxKernel(group.scalar_mul(sk, group.G), crypto.sign(group, sk, msg), old.range_proofs)
                break
            pos += len(tx.kernels)
        else:
            raise ValueError("a non-zero offset needs a kernel whose secret is known")

    return Block(
        group,
        tuple(sorted((c for tx in txs for c in tx.inputs), key=_key)),
        tuple(sorted((c for tx in txs for c in tx.outputs), key=_key)),
        offset,
        tuple(sorted(kernels, key=lambda k: (k.excess.to_bytes(), k.signature.R.to_bytes()))),
    )


def cut_through(b: Block) -> Block:
    """Drop every commitment that is both created and spent inside ``b`` (one-for-one)."""
    common = Counter(b.inputs) & Counter(b.outputs)
    if not common:
        return b

    def strip(items: tuple[GroupElement, ...]) -> tuple[GroupElement, ...]:
        budget = Counter(common)
        kept = []
        for c in items:
            if budget[c]:
                budget[c] -= 1
            else:
                kept.append(c)
        return tuple(kept)

    return b.replace(inputs=strip(b.inputs), outputs=strip(b.outputs))


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def validate_block(b: Block, msg: bytes = EMPTY_MSG) -> Verdict:
    return _validate_block_cached(b, msg)


@lru_cache(maxsize=8192)
def _validate_block_cached(b: Block, msg: bytes) -> Verdict:
    g = b.group
    if b.genesis and b.inputs:
        return Verdict.invalid(Reason.GENESIS_INPUTS)
    if b.supply < 0 or (b.supply and not b.genesis):
        return Verdict.invalid(Reason.UNEXPECTED_SUPPLY, detail=f"supply={b.supply}")
    dup = [c for c, n in Counter(b.inputs).items() if n > 1]
    if dup:
        return Verdict.invalid(Reason.DUPLICATE_INPUT, b.inputs.index(dup[0]))

    lhs = sum_points(g, b.outputs) - sum_points(g, b.inputs)
    rhs = (g.scalar_mul(b.offset, g.G) + sum_points(g, (k.excess for k in b.kernels))
           + g.scalar_mul(b.supply, g.H))
    if lhs != rhs:
        return Verdict.invalid(Reason.BALANCE_EQUATION)

    covered: set[GroupElement] = set()
    flat = 0
    for kernel in b.kernels:
        for proof in kernel.range_proofs:
            target = proof.proven_commitment()
            if target is None or not crypto.verify_range(target, proof):
                return Verdict.invalid(Reason.RANGE_PROOF, flat, detail="proof does not verify")
            covered.add(target)
            flat += 1
    for j, out in enumerate(b.outputs):
        if out not in covered:
            return Verdict.invalid(Reason.RANGE_PROOF, None, detail=f"output {j} has no range proof")

    for k, kernel in enumerate(b.kernels):
        if not crypto.verify(kernel.excess, msg, kernel.signature):
            return Verdict.invalid(Reason.KERNEL_SIGNATURE, k)
    return Verdict.valid()


@dataclass
class LedgerState:
    """Running UTXO multiset plus every commitment ever spent (for double-spend reporting)."""

    utxo: Counter = field(default_factory=Counter)
    spent: set = field(default_factory=set)

    def copy(self) -> "LedgerState":
        return LedgerState(Counter(self.utxo), set(self.spent))

    def check_inputs(self, b: Block) -> Verdict:
        for i, c in enumerate(b.inputs):
            if self.utxo[c] <= 0:
                reason = Reason.DOUBLE_SPEND if c in self.spent else Reason.UNKNOWN_INPUT
                return Verdict.invalid(reason, i)
        return Verdict.valid()

    def apply(self, b: Block) -> None:
        for c in b.inputs:
            if self.utxo[c] <= 0:
                raise InconsistencyError(f"input {c.hex()} is not unspent")
            self.utxo[c] -= 1
            if not self.utxo[c]:
                del self.utxo[c]
            self.spent.add(c)
        self.utxo.update(b.outputs)


def ledger_state(c: Chain) -> LedgerState:
    state = LedgerState()
    for b in c.blocks:
        state.apply(b)
    return state


def utxo(c: Chain) -> UtxoSet:
    """Fold outputs-added / inputs-removed over the chain, oldest block first."""
    return ledger_state(c).utxo


def validates(c: Chain | LedgerState, b: Block, msg: bytes = EMPTY_MSG) -> Verdict:
    """May ``b`` be appended to ``c``? Accepts a precomputed ``LedgerState`` too."""
    if b.genesis:
        return Verdict.invalid(Reason.MISPLACED_GENESIS)
    verdict = validate_block(b, msg)
    if not verdict:
        return verdict
    state = c if isinstance(c, LedgerState) else ledger_state(c)
    return state.check_inputs(b)


def valid_chain(c: Chain, msg: bytes = EMPTY_MSG) -> Verdict:
    b0 = c.blocks[0]
    if not b0.genesis:
        return Verdict.invalid(Reason.NOT_GENESIS, block=0)
    verdict = validate_block(b0, msg)
    if not verdict:
        return verdict.at_block(0)
    state = LedgerState()
    state.apply(b0)
    for i, b in enumerate(c.blocks[1:], start=1):
        verdict = validates(state, b, msg)
        if not verdict:
            return verdict.at_block(i)
        state.apply(b)
    return Verdict.valid()

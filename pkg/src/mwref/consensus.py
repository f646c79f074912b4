"""Node-local state machine of a block-forest consensus protocol.

A node keeps its known peers (``as_``), a block forest ``bf`` mapping hashes to
blocks, and a transaction pool ``tp``. Receiving transitions consume one
packet and emit a set of packets; ``mint_block`` is the only internal one.
Transitions raise ``NotEnabled`` when their guard does not hold.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Mapping, Union

from .group import DecodeError, Group
from .ledger import Block, Chain, LedgerState, aggregate, valid_chain, validate_block, validates
from .tx import Transaction, canonical_json, validate_transaction

Addr = str
Hash = str
ProofObj = str

ZERO_HASH: Hash = "00" * 32
EXTERNAL: Addr = "ext"


class NotEnabled(Exception):
    """The transition's guard is false for this input; nothing happens."""


# --------------------------------------------------------------------------
# messages and packets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConnectMsg:
    kind = "ConnectMsg"

    def to_dict(self) -> dict:
        return {"type": self.kind}

    def key(self) -> str:
        return ""


@dataclass(frozen=True)
class AddrMsg:
    addrs: frozenset[Addr]
    kind = "AddrMsg"

    def __post_init__(self):
        object.__setattr__(self, "addrs", frozenset(self.addrs))

    def to_dict(self) -> dict:
        return {"type": self.kind, "addrs": sorted(self.addrs)}

    def key(self) -> str:
        return ",".join(sorted(self.addrs))


@dataclass(frozen=True)
class TxMsg:
    tx: Transaction
    kind = "TxMsg"

    def to_dict(self) -> dict:
        return {"type": self.kind, "tx": self.tx.to_dict()}

    def key(self) -> str:
        return self.tx.digest


@dataclass(frozen=True, eq=False)
class NodeBlock:
    prev: Hash
    block: Block
    pf: ProofObj

    def to_dict(self) -> dict:
        return {"prev": self.prev, "pf": self.pf, "block": self.block.to_dict()}

    @classmethod
    def from_dict(cls, d: dict, group: Group) -> "NodeBlock":
        try:
            return cls(str(d["prev"]), Block.from_dict(d["block"], group), str(d["pf"]))
        except (KeyError, TypeError) as exc:
            raise DecodeError(f"bad node block: {exc}") from exc

    @cached_property
    def hash(self) -> Hash:
        body = self.block.group.name.encode() + b"|" + canonical_json(self.to_dict())
        return hashlib.sha256(body).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NodeBlock):
            return NotImplemented
        return self.hash == other.hash

    def __hash__(self) -> int:
        return hash(self.hash)


@dataclass(frozen=True)
class BlockMsg:
    block: NodeBlock
    kind = "BlockMsg"

    def to_dict(self) -> dict:
        return {"type": self.kind, "block": self.block.to_dict()}

    def key(self) -> str:
        return self.block.hash


Msg = Union[ConnectMsg, AddrMsg, TxMsg, BlockMsg]
CONNECT = ConnectMsg()


def msg_from_dict(d: dict, group: Group) -> Msg:
    if not isinstance(d, dict):
        raise DecodeError("message must be an object")
    kind = d.get("type")
    if kind == "ConnectMsg":
        return CONNECT
    if kind == "AddrMsg":
        addrs = d.get("addrs")
        if not isinstance(addrs, list) or not all(isinstance(a, str) for a in addrs):
            raise DecodeError("AddrMsg.addrs must be a list of strings")
        return AddrMsg(frozenset(addrs))
    if kind == "TxMsg":
        return TxMsg(Transaction.from_dict(d["tx"], group))
    if kind == "BlockMsg":
        return BlockMsg(NodeBlock.from_dict(d["block"], group))
    raise DecodeError(f"unknown message type {kind!r}")


@dataclass(frozen=True)
class Packet:
    origin: Addr
    dest: Addr
    msg: Msg

    @cached_property
    def key(self) -> tuple[str, str, str, str]:
        return (self.origin, self.dest, self.msg.kind, self.msg.key())

    def __lt__(self, other: "Packet") -> bool:
        return self.key < other.key

    def to_dict(self) -> dict:
        return {"origin": self.origin, "dest": self.dest, "msg": self.msg.to_dict()}

    @classmethod
    def from_dict(cls, d: dict, group: Group) -> "Packet":
        if not isinstance(d, dict):
            raise DecodeError("packet must be an object")
        try:
            origin, dest = d["origin"], d["dest"]
        except KeyError as exc:
            raise DecodeError(f"packet missing {exc}") from exc
        if not isinstance(origin, str) or not isinstance(dest, str):
            raise DecodeError("packet addresses must be strings")
        return cls(origin, dest, msg_from_dict(d.get("msg"), group))


# --------------------------------------------------------------------------
# local state and fork choice
# --------------------------------------------------------------------------


def accept_any_proof(nb: NodeBlock) -> bool:
    return True


# Pluggable proof-object check; the model has no proof-of-work.
proof_valid: Callable[[NodeBlock], bool] = accept_any_proof


@dataclass(frozen=True)
class PathInfo:
    height: int
    state: LedgerState = field(repr=False)
    kernels: frozenset = field(repr=False)


_INVALID = object()
# hash -> PathInfo | _INVALID; sound because a hash commits to the whole ancestry.
_path_cache: dict[Hash, object] = {}


def kernel_key(k) -> tuple[bytes, bytes, int]:
    return (k.excess.to_bytes(), k.signature.R.to_bytes(), k.signature.s)


def path_info(bf: Mapping[Hash, NodeBlock], h: Hash) -> PathInfo | None:
    """Ledger state after the path genesis..h, or None if invalid or not connected in ``bf``."""
    stack: list[NodeBlock] = []
    cur = h
    while cur != ZERO_HASH:
        nb = bf.get(cur)
        if nb is None:
            return None
        stack.append(nb)
        cur = nb.prev

    info: PathInfo | None = None
    start = len(stack)
    for i, nb in enumerate(stack):
        cached = _path_cache.get(nb.hash)
        if cached is _INVALID:
            _mark_invalid(stack[:i])
            return None
        if cached is not None:
            info, start = cached, i
            break

    for i in range(start - 1, -1, -1):
        nb = stack[i]
        if info is None:
            ok = nb.block.genesis and proof_valid(nb) and bool(validate_block(nb.block))
        else:
            ok = proof_valid(nb) and bool(validates(info.state, nb.block))
        if not ok:
            _mark_invalid(stack[: i + 1])
            return None
        st = info.state.copy() if info is not None else LedgerState()
        st.apply(nb.block)
        keys = frozenset(kernel_key(k) for k in nb.block.kernels)
        info = PathInfo(0, st, keys) if info is None else PathInfo(info.height + 1, st, info.kernels | keys)
        _path_cache[nb.hash] = info
    return info


def _mark_invalid(nbs) -> None:
    for nb in nbs:
        _path_cache[nb.hash] = _INVALID


@lru_cache(maxsize=16384)
def tx_valid(tx: Transaction) -> bool:
    return bool(validate_transaction(tx)) and bool(tx.kernels)


def is_confirmed(tx: Transaction, info: PathInfo) -> bool:
    return bool(tx.kernels) and all(kernel_key(k) in info.kernels for k in tx.kernels)


def spendable(tx: Transaction, info: PathInfo) -> bool:
    return all(info.state.utxo[c] > 0 for c in tx.inputs)


@dataclass(frozen=True, eq=False)
class LocState:
    as_: frozenset[Addr] = frozenset()
    bf: Mapping[Hash, NodeBlock] = field(default_factory=dict)
    tp: frozenset[Transaction] = frozenset()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LocState):
            return NotImplemented
        return self.as_ == other.as_ and self.bf.keys() == other.bf.keys() and self.tp == other.tp

    def replace(self, **changes) -> "LocState":
        fields = dict(as_=self.as_, bf=self.bf, tp=self.tp)
        fields.update(changes)
        return LocState(**fields)

    @cached_property
    def best_tip(self) -> Hash:
        best = None
        for h in self.bf:
            info = path_info(self.bf, h)
            if info is None:
                continue
            cand = (-info.height, h)
            if best is None or cand < best:
                best = cand
        if best is None:
            raise ValueError("block forest holds no valid genesis")
        return best[1]

    @property
    def best_info(self) -> PathInfo:
        return path_info(self.bf, self.best_tip)

    def summary(self) -> dict:
        return {
            "as": sorted(self.as_),
            "bf": sorted(self.bf),
            "tp": sorted(tx.digest for tx in self.tp),
            "tip": self.best_tip,
        }


def genesis_node_block(genesis: Block) -> NodeBlock:
    return NodeBlock(ZERO_HASH, genesis, "genesis")


def initial_state(genesis: Block, peers=()) -> LocState:
    nb = genesis_node_block(genesis)
    return LocState(frozenset(peers), {nb.hash: nb}, frozenset())


def best_chain(st: LocState) -> Chain:
    """Longest valid path from genesis; ties go to the smallest tip hash."""
    blocks = []
    h = st.best_tip
    while h != ZERO_HASH:
        nb = st.bf[h]
        blocks.append(nb.block)
        h = nb.prev
    return Chain(tuple(reversed(blocks)))


def chain_is_valid(st: LocState) -> bool:
    return bool(valid_chain(best_chain(st)))


# --------------------------------------------------------------------------
# transitions
# --------------------------------------------------------------------------

Result = tuple[LocState, frozenset[Packet]]


def _guard(me: Addr, p: Packet, kind: type) -> None:
    if p.dest != me:
        raise NotEnabled(f"packet for {p.dest}, this node is {me}")
    if not isinstance(p.msg, kind):
        raise NotEnabled(f"expected {kind.kind}, got {p.msg.kind}")


def rcv_addr(me: Addr, st: LocState, p: Packet) -> Result:
    """Learn ``asm``: connect to the new peers, tell the old ones about ``as'``."""
    _guard(me, p, AddrMsg)
    asm = p.msg.addrs
    new_as = st.as_ | asm
    out = {Packet(me, a, CONNECT) for a in asm - st.as_}
    out |= {Packet(me, a, AddrMsg(new_as)) for a in st.as_}
    return st.replace(as_=new_as), frozenset(out)


def rcv_connect(me: Addr, st: LocState, p: Packet) -> Result:
    _guard(me, p, ConnectMsg)
    new_as = st.as_ | {p.origin}
    return st.replace(as_=new_as), frozenset({Packet(me, p.origin, AddrMsg(new_as))})


def rcv_tx(me: Addr, st: LocState, p: Packet) -> Result:
    """Pool and relay a fresh valid transaction whose inputs are unspent on the best chain."""
    _guard(me, p, TxMsg)
    tx = p.msg.tx
    if tx in st.tp or not tx_valid(tx):
        return st, frozenset()
    info = st.best_info
    if is_confirmed(tx, info) or not spendable(tx, info):
        return st, frozenset()
    out = frozenset(Packet(me, a, TxMsg(tx)) for a in st.as_)
    return st.replace(tp=st.tp | {tx}), out


def _prune_pool(tp: frozenset[Transaction], info: PathInfo) -> frozenset[Transaction]:
    return frozenset(tx for tx in tp if not is_confirmed(tx, info))


def rcv_block(me: Addr, st: LocState, p: Packet) -> Result:
    """Adopt and relay a block that validates on top of its parent; hold orphans."""
    _guard(me, p, BlockMsg)
    nb = p.msg.block
    h = nb.hash
    if h in st.bf or nb.prev == ZERO_HASH:
        # the genesis is fixed at start-up; a second root is never adopted
        return st, frozenset()
    bf = dict(st.bf)
    bf[h] = nb
    if nb.prev not in st.bf:
        return st.replace(bf=bf), frozenset()
    if path_info(bf, h) is None:
        return st, frozenset()

    adopted = [nb]
    # orphans waiting on this block (transitively) become connected now
    frontier = [h]
    while frontier:
        parent = frontier.pop()
        for oh, ob in sorted(st.bf.items()):
            if ob.prev == parent and oh not in (a.hash for a in adopted):
                if path_info(bf, oh) is not None:
                    adopted.append(ob)
                    frontier.append(oh)
                else:
                    del bf[oh]
    new = st.replace(bf=bf)
    new = new.replace(tp=_prune_pool(st.tp, new.best_info))
    out = frozenset(Packet(me, a, BlockMsg(b)) for a in st.as_ for b in adopted)
    return new, out


def mint_candidates(st: LocState) -> list[Transaction]:
    """Maximal conflict-free pool subset, greedily in digest order."""
    info = st.best_info
    picked, used = [], set()
    for tx in sorted(st.tp, key=lambda t: t.digest):
        if is_confirmed(tx, info) or not spendable(tx, info):
            continue
        if used.intersection(tx.inputs):
            continue
        picked.append(tx)
        used.update(tx.inputs)
    return picked


def mint_enabled(st: LocState) -> bool:
    return bool(st.tp) and bool(mint_candidates(st))


def mint_block(me: Addr, st: LocState) -> Result:
    picked = mint_candidates(st) if st.tp else []
    if not picked:
        raise NotEnabled("no pool transaction can extend the best chain")
    tip = st.best_tip
    block = aggregate(picked, 0, group=picked[0].group)
    nb = NodeBlock(tip, block, f"pf:{me}")
    bf = dict(st.bf)
    bf[nb.hash] = nb
    new = st.replace(bf=bf)
    new = new.replace(tp=_prune_pool(st.tp, new.best_info))
    return new, frozenset(Packet(me, a, BlockMsg(nb)) for a in st.as_)


RECEIVERS = {
    "AddrMsg": ("rcvAddr", rcv_addr),
    "ConnectMsg": ("rcvConnect", rcv_connect),
    "TxMsg": ("rcvTx", rcv_tx),
    "BlockMsg": ("rcvBlock", rcv_block),
}


def receive(me: Addr, st: LocState, p: Packet) -> tuple[str, LocState, frozenset[Packet]]:
    name, fn = RECEIVERS[p.msg.kind]
    new, out = fn(me, st, p)
    return name, new, out

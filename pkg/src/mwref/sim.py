"""Deterministic discrete-event simulation of a network of consensus nodes.

Each global step either delivers one in-flight packet to its destination or
fires one enabled ``mint_block``; the choice is made by a ``random.Random``
seeded from the config. Packets form a set, so re-sent duplicates coalesce.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from typing import Iterator, Mapping

from .consensus import (
    EXTERNAL, AddrMsg, Addr, LocState, NotEnabled, Packet, TxMsg, best_chain, initial_state,
    mint_block, mint_enabled, receive,
)
from .group import Group, get_group
from .ledger import Block, make_genesis
from .tx import Opening, Transaction, build_transaction

TOPOLOGIES = ("full", "ring", "star", "none")


@dataclass
class SimConfig:
    nodes: int = 5
    topology: str = "full"
    seed: int = 0
    steps: int = 1000
    loss: float = 0.0
    dup: float = 0.0
    backend: str = "transparent"
    n_bits: int = 4
    coins: int = 8
    txs: int = 6
    conflicts: int = 1
    addr_gossip: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 1 <= self.nodes <= 64:
            raise ValueError("nodes must be in [1, 64]")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        for name in ("loss", "dup"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if not 1 <= self.n_bits <= 16:
            raise ValueError("n_bits must be in [1, 16]")
        if self.coins < 0 or self.txs < 0 or self.conflicts < 0:
            raise ValueError("coins, txs and conflicts must be >= 0")
        get_group(self.backend)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def group(self) -> Group:
        return get_group(self.backend)


@dataclass(frozen=True)
class Conf:
    delta: Mapping[Addr, LocState]
    packets: frozenset[Packet] = frozenset()
    quiescent: bool = False

    def with_node(self, a: Addr, st: LocState, packets: frozenset[Packet]) -> "Conf":
        delta = dict(self.delta)
        delta[a] = st
        return Conf(delta, packets)

    def summary(self) -> dict:
        return {
            "nodes": {a: self.delta[a].summary() for a in sorted(self.delta)},
            "packets": [list(p.key) for p in sorted(self.packets)],
        }


@dataclass
class Wallet:
    """Openings the simulation harness knows; used to build scenarios and faults."""

    group: Group
    openings: dict = field(default_factory=dict)

    def add(self, o: Opening) -> None:
        self.openings[o.commitment(self.group)] = o


def node_names(n: int) -> list[Addr]:
    return [f"n{i}" for i in range(n)]


def _peers(cfg: SimConfig, names: list[Addr]) -> dict[Addr, frozenset[Addr]]:
    n = len(names)
    if cfg.topology == "full":
        return {a: frozenset(b for b in names if b != a) for a in names}
    if cfg.topology == "ring":
        return {a: frozenset({names[(i - 1) % n], names[(i + 1) % n]} - {a}) for i, a in enumerate(names)}
    if cfg.topology == "star":
        hub = names[0]
        return {a: (frozenset(names[1:]) if a == hub else frozenset({hub})) for a in names}
    return {a: frozenset() for a in names}


def setup(cfg: SimConfig) -> tuple[Conf, Wallet, Block]:
    """Genesis, a batch of client transactions (some double-spending each other) and the initial packets."""
    group = cfg.group
    rng = random.Random(f"setup:{cfg.seed}")
    wallet = Wallet(group)
    hi = (1 << cfg.n_bits) - 1
    coins = [Opening(rng.randrange(1, group.q), rng.randint(1, hi)) for _ in range(cfg.coins)]
    for o in coins:
        wallet.add(o)
    genesis = make_genesis(group, coins, cfg.n_bits)

    txs: list[Transaction] = []
    unused = list(coins)
    used: list[Opening] = []
    for _ in range(cfg.txs):
        if not unused:
            break
        k = min(len(unused), rng.choice((1, 2)))
        spends = [unused.pop(rng.randrange(len(unused))) for _ in range(k)]
        used.extend(spends)
        txs.append(_spend(group, rng, spends, cfg.n_bits, wallet))
    for _ in range(cfg.conflicts):
        if not used:
            break
        txs.append(_spend(group, rng, [rng.choice(used)], cfg.n_bits, wallet))

    names = node_names(cfg.nodes)
    peers = _peers(cfg, names)
    delta = {a: initial_state(genesis, peers[a]) for a in names}
    packets = {Packet(EXTERNAL, rng.choice(names), TxMsg(tx)) for tx in txs}
    if cfg.addr_gossip:
        for a in names:
            known = frozenset(b for b in names if rng.random() < 0.5)
            packets.add(Packet(EXTERNAL, a, AddrMsg(known)))
    return Conf(delta, frozenset(packets)), wallet, genesis


def _spend(group: Group, rng: random.Random, spends: list[Opening], n_bits: int, wallet: Wallet) -> Transaction:
    total = sum(o.v for o in spends)
    hi = (1 << n_bits) - 1
    if total > hi:
        values = [hi] * (total // hi) + ([total % hi] if total % hi else [])
    elif total >= 2 and rng.random() < 0.5:
        a = rng.randint(1, total - 1)
        values = [a, total - a]
    else:
        values = [total]
    outs = [(v, rng.randrange(1, group.q)) for v in values]
    tx = build_transaction(group, spends, outs, n_bits=n_bits)
    for o in tx.output_openings:
        wallet.add(o)
    return tx


# --------------------------------------------------------------------------
# stepping
# --------------------------------------------------------------------------


def enabled_events(conf: Conf) -> list[tuple[str, object]]:
    events: list[tuple[str, object]] = [("deliver", p) for p in sorted(conf.packets)]
    events += [("mint", a) for a in sorted(conf.delta) if mint_enabled(conf.delta[a])]
    return events


def step(conf: Conf, rng: random.Random, cfg: SimConfig | None = None, n: int = 0) -> tuple[Conf, dict | None]:
    """One global transition. Returns the new conf and its trace event (None when quiescent)."""
    loss = cfg.loss if cfg else 0.0
    dup = cfg.dup if cfg else 0.0
    events = enabled_events(conf)
    if not events:
        return Conf(conf.delta, conf.packets, quiescent=True), None
    kind, what = events[rng.randrange(len(events))]

    if kind == "mint":
        a = what
        st, out = mint_block(a, conf.delta[a])
        return conf.with_node(a, st, conf.packets | out), _event(n, a, "mintBlock", None, out)

    p: Packet = what
    if loss and rng.random() < loss:
        return Conf(conf.delta, conf.packets - {p}), _event(n, p.dest, "lose", p, frozenset())
    keep = bool(dup) and rng.random() < dup
    remaining = conf.packets if keep else conf.packets - {p}
    if p.dest not in conf.delta:
        return Conf(conf.delta, remaining), _event(n, p.dest, "undeliverable", p, frozenset(), keep)
    try:
        name, st, out = receive(p.dest, conf.delta[p.dest], p)
    except NotEnabled:  # pragma: no cover - dispatch is by message kind and dest
        return Conf(conf.delta, remaining), _event(n, p.dest, "undeliverable", p, frozenset(), keep)
    return conf.with_node(p.dest, st, remaining | out), _event(n, p.dest, name, p, out, keep)


def _event(n: int, node: Addr, transition: str, p: Packet | None, out: frozenset[Packet], keep: bool = False) -> dict:
    ev = {
        "step": n,
        "node": node,
        "transition": transition,
        "in": None if p is None else p.to_dict(),
        "out": [q.to_dict() for q in sorted(out)],
    }
    if keep:
        ev["dup"] = True
    return ev


def run(cfg: SimConfig, conf: Conf | None = None) -> tuple[Conf, list[dict]]:
    """Run up to ``cfg.steps`` steps; stops early at quiescence."""
    if conf is None:
        conf, _, _ = setup(cfg)
    rng = random.Random(cfg.seed)
    trace = []
    for n in range(cfg.steps):
        conf, ev = step(conf, rng, cfg, n)
        if ev is None:
            break
        trace.append(ev)
    else:
        if not enabled_events(conf):
            conf = Conf(conf.delta, conf.packets, quiescent=True)
    return conf, trace


def iter_jsonl(trace: list[dict]) -> Iterator[str]:
    for ev in trace:
        yield json.dumps(ev, separators=(",", ":"))


def write_trace(trace: list[dict], fh) -> None:
    for line in iter_jsonl(trace):
        fh.write(line + "\n")


def agreed_tip(conf: Conf) -> str | None:
    """The common best tip of all nodes, or None if they disagree."""
    tips = {st.best_tip for st in conf.delta.values()}
    return tips.pop() if len(tips) == 1 else None


def best_chains(conf: Conf):
    return {a: best_chain(st) for a, st in conf.delta.items()}

"""Online monitor: replay an implementation's inputs on the reference model.

For each observed event the monitor abstracts the raw input into a model
packet (identity on this repo's wire format), fires the matching reference
transition on a shadow configuration and compares what the model would emit
with what the implementation emitted. An alarm is raised when the model
transition is not enabled, when outputs diverge, or when the node's best
chain stops being valid. After an alarm the shadow keeps its last good state.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Protocol

from . import crypto
from .consensus import (
    EXTERNAL, RECEIVERS, BlockMsg, NodeBlock, NotEnabled, Packet, best_chain, mint_block, receive,
)
from .group import DecodeError, Group
from .ledger import Block, valid_chain
from .sim import Conf, SimConfig, Wallet, setup
from .tx import Opening, Transaction, TxKernel, build_transaction, canonical_json


class Action(str, Enum):
    STOP = "stop"
    SUSPEND = "suspend"
    OBSERVE = "observe"


@dataclass(frozen=True)
class MonitorEvent:
    seq: int
    node: str
    transition: str
    raw: dict = field(repr=False)
    packet: Packet | None = None
    observed_out: frozenset | None = field(default=None, repr=False)
    dup: bool = False


@dataclass(frozen=True)
class Alarm:
    seq: int | None
    kind: str  # "divergence" | "parse"
    reason: str
    expected: str
    severity: str
    action: Action

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "reason": self.reason, "expected": self.expected,
                "severity": self.severity, "action": self.action.value}


class ParseError(ValueError):
    pass


class Abstraction(Protocol):
    def __call__(self, raw: dict, group: Group) -> MonitorEvent: ...


def abstract_event(raw: dict, group: Group) -> MonitorEvent:
    """Identity abstraction on the simulator's own JSON Lines format."""
    if not isinstance(raw, dict):
        raise ParseError("event must be a JSON object")
    try:
        seq, node, transition = raw["step"], raw["node"], raw["transition"]
    except KeyError as exc:
        raise ParseError(f"event missing field {exc}") from exc
    if not isinstance(seq, int) or isinstance(seq, bool) or not isinstance(node, str) or not isinstance(transition, str):
        raise ParseError("bad field types")
    try:
        packet = None if raw.get("in") is None else Packet.from_dict(raw["in"], group)
        out = raw.get("out", [])
        if not isinstance(out, list):
            raise ParseError("out must be a list")
        observed = frozenset(Packet.from_dict(d, group) for d in out)
    except DecodeError as exc:
        raise ParseError(str(exc)) from exc
    if transition != "mintBlock" and packet is None:
        raise ParseError(f"{transition} needs an input packet")
    return MonitorEvent(seq, node, transition, raw, packet, observed, bool(raw.get("dup", False)))


def conf_hash(conf: Conf) -> str:
    return hashlib.sha256(canonical_json(conf.summary())).hexdigest()


def _out_keys(ps: Iterable[Packet]) -> list:
    return sorted(p.key for p in ps)


class Monitor:
    def __init__(self, shadow: Conf, group: Group, abstraction: Abstraction = abstract_event):
        self.shadow = shadow
        self.group = group
        self.abstraction = abstraction
        self.last_seq: int | None = None
        self.events = 0
        self.alarms: list[Alarm] = []
        self.timings: list[float] = []

    def _parse_alarm(self, seq, reason: str) -> Alarm:
        return Alarm(seq, "parse", reason, "well-formed event with increasing sequence number", "low", Action.OBSERVE)

    def ingest_raw(self, raw) -> Alarm | None:
        started = time.perf_counter()
        try:
            try:
                if isinstance(raw, (str, bytes)):
                    raw = json.loads(raw)
                ev = self.abstraction(raw, self.group)
            except (ParseError, json.JSONDecodeError) as exc:
                seq = raw.get("step") if isinstance(raw, dict) else None
                return self._record(self._parse_alarm(seq, f"malformed event: {exc}"))
            return self.ingest(ev)
        finally:
            self.timings.append(time.perf_counter() - started)

    def _record(self, alarm: Alarm | None) -> Alarm | None:
        self.events += 1
        if alarm is not None:
            self.alarms.append(alarm)
        return alarm

    def ingest(self, ev: MonitorEvent) -> Alarm | None:
        if self.last_seq is not None and ev.seq <= self.last_seq:
            return self._record(self._parse_alarm(ev.seq, f"sequence {ev.seq} after {self.last_seq}"))
        self.last_seq = ev.seq
        self.shadow, alarm = ingest(ev, self.shadow)
        return self._record(alarm)


def ingest(ev: MonitorEvent, shadow: Conf) -> tuple[Conf, Alarm | None]:
    """Apply the reference transition for ``ev``; on any surprise return the old shadow and an alarm."""

    def alarm(reason: str, expected: str, critical: bool = True) -> tuple[Conf, Alarm]:
        return shadow, Alarm(ev.seq, "divergence", reason, expected, "high" if critical else "medium",
                             Action.STOP if critical else Action.SUSPEND)

    p = ev.packet
    if ev.transition in ("lose", "undeliverable"):
        if p is not None and p.origin in shadow.delta and p not in shadow.packets:
            return alarm("lost packet was never in flight", "packet in flight", critical=False)
        if ev.transition == "undeliverable" and p is not None and p.dest in shadow.delta:
            return alarm("packet to a live node reported undeliverable", f"delivery to {p.dest}")
        remaining = shadow.packets if ev.dup else shadow.packets - {p}
        return Conf(shadow.delta, remaining), None

    if ev.node not in shadow.delta:
        return alarm(f"unknown node {ev.node}", "a node of the configuration")
    st = shadow.delta[ev.node]

    if ev.transition == "mintBlock":
        try:
            new_st, out = mint_block(ev.node, st)
        except NotEnabled as exc:
            return alarm(f"mintBlock not enabled: {exc}", "no mint")
        remaining = shadow.packets
    else:
        expected_name = RECEIVERS.get(p.msg.kind, ("?",))[0]
        if ev.transition != expected_name:
            return alarm(f"{ev.transition} on a {p.msg.kind} packet", expected_name)
        if p.dest != ev.node:
            return alarm(f"{ev.transition} not enabled: packet addressed to {p.dest}", f"dest={ev.node}")
        if p.origin in shadow.delta and p not in shadow.packets:
            return alarm("packet from a known node that was never sent", "packet in flight")
        try:
            _, new_st, out = receive(ev.node, st, p)
        except NotEnabled as exc:
            return alarm(f"{ev.transition} not enabled: {exc}", "enabled transition")
        remaining = shadow.packets if ev.dup else shadow.packets - {p}

    if ev.observed_out is not None and _out_keys(out) != _out_keys(ev.observed_out):
        if not out and ev.observed_out:
            reason = f"{ev.transition}: model rejects the input the implementation accepted"
        else:
            reason = f"{ev.transition}: implementation output differs from model output"
        return alarm(reason, f"{len(out)} packets {_out_keys(out)[:3]}")
    if not valid_chain(best_chain(new_st)):
        return alarm("best chain no longer valid", "valid chain")
    return Conf({**shadow.delta, ev.node: new_st}, remaining | out), None


@dataclass
class MonitorSummary:
    events: int
    alarms: int
    divergence_alarms: int
    parse_alarms: int
    alarm_seqs: list
    end_state: str
    mean_event_seconds: float
    max_event_seconds: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_monitor(source: Iterable, sink: Callable[[Alarm], None] | None, monitor: Monitor) -> MonitorSummary:
    """Feed every event of ``source`` (JSON lines or dicts) through ``monitor``."""
    for raw in source:
        if isinstance(raw, str) and not raw.strip():
            continue
        alarm = monitor.ingest_raw(raw)
        if alarm is not None and sink is not None:
            sink(alarm)
    t = monitor.timings
    return MonitorSummary(
        events=monitor.events,
        alarms=len(monitor.alarms),
        divergence_alarms=sum(a.kind == "divergence" for a in monitor.alarms),
        parse_alarms=sum(a.kind == "parse" for a in monitor.alarms),
        alarm_seqs=[a.seq for a in monitor.alarms],
        end_state=conf_hash(monitor.shadow),
        mean_event_seconds=(sum(t) / len(t)) if t else 0.0,
        max_event_seconds=max(t) if t else 0.0,
    )


def monitor_for(cfg: SimConfig) -> Monitor:
    conf, _, _ = setup(cfg)
    return Monitor(conf, cfg.group)


# --------------------------------------------------------------------------
# fault injection
# --------------------------------------------------------------------------

FAULTS = ("double_spend", "unbalanced", "forged_range_proof", "bad_signature", "unknown_input")


class InjectionError(ValueError):
    pass


def _replay(cfg: SimConfig, trace: list[dict], upto: int) -> Conf:
    mon = monitor_for(cfg)
    for raw in trace[:upto]:
        if mon.ingest_raw(raw) is not None:
            raise InjectionError("clean trace raised an alarm during replay")
    return mon.shadow


def _offending_tx(kind: str, group: Group, wallet: Wallet, utxo, spent, n_bits: int, salt: int) -> Transaction:
    hi = (1 << n_bits) - 1
    q = group.q

    def pick(pool):
        pool = sorted((c for c in pool if c in wallet.openings), key=lambda c: c.to_bytes())
        if not pool:
            raise InjectionError(f"no known commitment available for {kind}")
        return wallet.openings[pool[salt % len(pool)]]

    if kind == "double_spend":
        o = pick(spent)
        return build_transaction(group, [o], [(o.v, (o.r + 101 + salt) % q)], n_bits=n_bits)
    if kind == "unknown_input":
        o = Opening((977 + 31 * salt) % q, 3)
        return build_transaction(group, [o], [(3, (o.r + 5) % q)], n_bits=n_bits)

    o = pick(utxo)
    if kind == "unbalanced":
        v_out = o.v + 1 if o.v < hi else o.v - 1
        r_out = (o.r + 17 + salt) % q
        sk = (r_out - o.r) % q
        proof = crypto.prove_range(group, r_out, v_out, n_bits)
        kernel = TxKernel(group.scalar_mul(sk, group.G), crypto.sign(group, sk), (proof,))
        return Transaction(group, (o.commitment(group),), (crypto.commit(group, r_out, v_out),), (kernel,))
    tx = build_transaction(group, [o], [(o.v, (o.r + 23 + salt) % q)], n_bits=n_bits)
    k = tx.kernels[0]
    if kind == "forged_range_proof":
        r_out = tx.output_openings[0].r
        other = (o.v + 1) % (hi + 1)
        bad = crypto.prove_range(group, r_out, other, n_bits)
        k = TxKernel(k.excess, k.signature, (bad,))
    elif kind == "bad_signature":
        k = TxKernel(k.excess, crypto.KernelSignature(k.signature.R, (k.signature.s + 1) % q), k.range_proofs)
    else:
        raise ValueError(f"unknown fault {kind!r}")
    return tx.replace(kernels=(k,))


def inject_fault(cfg: SimConfig, trace: list[dict], kind: str, index: int, salt: int = 0) -> list[dict]:
    """Insert at ``index`` an ``rcvBlock`` that an implementation wrongly accepted.

    The block comes from an external peer and extends the receiving node's best
    tip; the event reports it as relayed to all peers. Sequence numbers of the
    following events shift by one.
    """
    if kind not in FAULTS:
        raise ValueError(f"unknown fault {kind!r}; expected one of {FAULTS}")
    if not 0 <= index <= len(trace):
        raise InjectionError("index outside trace")
    shadow = _replay(cfg, trace, index)
    _, wallet, _ = setup(cfg)
    group = cfg.group
    for node in sorted(shadow.delta):
        st = shadow.delta[node]
        info = st.best_info
        try:
            tx = _offending_tx(kind, group, wallet, info.state.utxo, info.state.spent, cfg.n_bits, salt)
        except InjectionError:
            continue
        break
    else:
        raise InjectionError(f"no node state admits a {kind} fault at index {index}")
    block = _unchecked_block(tx)
    nb = NodeBlock(st.best_tip, block, "pf:ext")
    p = Packet(EXTERNAL, node, BlockMsg(nb))
    relays = sorted(Packet(node, a, BlockMsg(nb)) for a in st.as_)
    seq = trace[index]["step"] if index < len(trace) else (trace[-1]["step"] + 1 if trace else 0)
    ev = {"step": seq, "node": node, "transition": "rcvBlock", "in": p.to_dict(),
          "out": [r.to_dict() for r in relays]}
    shifted = [dict(e, step=e["step"] + 1) for e in trace[index:]]
    return trace[:index] + [ev] + shifted


def _unchecked_block(tx: Transaction):
    """Wrap one transaction as a block without the validity gate of ``aggregate``."""
    key = lambda c: c.to_bytes()  # noqa: E731
    return Block(tx.group, tuple(sorted(tx.inputs, key=key)), tuple(sorted(tx.outputs, key=key)), 0, tx.kernels)

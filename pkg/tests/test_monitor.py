import json

import pytest

from mwref.monitor import (
    FAULTS, Action, InjectionError, Monitor, abstract_event, inject_fault, monitor_for, run_monitor,
)
from mwref.sim import SimConfig, iter_jsonl, run


def trace_for(cfg):
    return run(cfg)[1]


@pytest.fixture(scope="module")
def gossip():
    cfg = SimConfig(seed=42, steps=1000, addr_gossip=True)
    return cfg, trace_for(cfg)


def test_self_monitoring_silent(gossip):
    cfg, trace = gossip
    alarms = []
    summary = run_monitor(iter_jsonl(trace), alarms.append, monitor_for(cfg))
    assert summary.events == 1000 and summary.alarms == 0 and alarms == []
    assert summary.mean_event_seconds > 0 and summary.max_event_seconds >= summary.mean_event_seconds


def test_clean_lossy_trace_silent():
    cfg = SimConfig(seed=8, steps=800, loss=0.1, dup=0.1, topology="ring")
    summary = run_monitor(trace_for(cfg), None, monitor_for(cfg))
    assert summary.alarms == 0


@pytest.mark.parametrize("backend", ["transparent", "toycurve"])
@pytest.mark.parametrize("fault", FAULTS)
def test_single_fault_single_alarm(backend, fault):
    cfg = SimConfig(seed=5, steps=300, backend=backend)
    trace = trace_for(cfg)
    index = 150
    faulty = inject_fault(cfg, trace, fault, index)
    alarms = []
    summary = run_monitor(faulty, alarms.append, monitor_for(cfg))
    assert summary.divergence_alarms == 1 and summary.parse_alarms == 0
    assert alarms[0].seq == faulty[index]["step"]
    assert alarms[0].action is Action.STOP


def test_shadow_keeps_last_good_state():
    cfg = SimConfig(seed=5, steps=300)
    trace = trace_for(cfg)
    faulty = inject_fault(cfg, trace, "double_spend", 150)
    a = run_monitor(faulty, None, monitor_for(cfg))
    b = run_monitor(trace, None, monitor_for(cfg))
    assert a.end_state == b.end_state


def test_injection_validates_arguments():
    cfg = SimConfig(seed=5, steps=50)
    trace = trace_for(cfg)
    with pytest.raises(ValueError):
        inject_fault(cfg, trace, "gremlin", 3)
    with pytest.raises(InjectionError):
        inject_fault(cfg, trace, "unbalanced", len(trace) + 1)


def test_out_of_order_sequence_is_parse_alarm(gossip):
    cfg, trace = gossip
    events = trace[:20]
    swapped = events[:5] + [events[6], events[5]] + events[7:]
    summary = run_monitor(swapped, None, mon := monitor_for(cfg))
    assert summary.parse_alarms >= 1
    assert mon.alarms[0].kind == "parse" and mon.alarms[0].seq == events[5]["step"]


def test_malformed_events_are_parse_alarms(gossip):
    cfg, trace = gossip
    lines = ["{not json", json.dumps({"node": "n0"}), json.dumps([1, 2]),
             json.dumps(dict(trace[0], out="oops"))]
    mon = monitor_for(cfg)
    summary = run_monitor(lines, None, mon)
    assert summary.parse_alarms == 4 and summary.divergence_alarms == 0
    assert {a.action for a in mon.alarms} == {Action.OBSERVE}


def test_empty_trace():
    cfg = SimConfig(seed=1)
    summary = run_monitor([], None, monitor_for(cfg))
    assert summary.events == 0 and summary.alarms == 0
    assert summary.mean_event_seconds == 0.0
    assert run_monitor(["", "  "], None, monitor_for(cfg)).events == 0


def test_forged_output_diverges(gossip):
    cfg, trace = gossip
    i = next(k for k, e in enumerate(trace) if e["out"])
    bad = [dict(e) for e in trace[: i + 1]]
    bad[i]["out"] = bad[i]["out"][1:] if len(bad[i]["out"]) > 1 else []
    mon = monitor_for(cfg)
    summary = run_monitor(bad, None, mon)
    assert summary.divergence_alarms == 1 and mon.alarms[0].seq == trace[i]["step"]


def test_abstraction_is_identity_on_wire_format(gossip):
    cfg, trace = gossip
    ev = abstract_event(trace[3], cfg.group)
    assert ev.seq == trace[3]["step"] and ev.node == trace[3]["node"]
    assert sorted(p.to_dict()["dest"] for p in ev.observed_out) == sorted(o["dest"] for o in trace[3]["out"])


def test_alarm_serialises(gossip):
    cfg, trace = gossip
    mon = Monitor(monitor_for(cfg).shadow, cfg.group)
    mon.ingest_raw("{")
    d = mon.alarms[0].to_dict()
    assert d["kind"] == "parse" and json.loads(json.dumps(d)) == d

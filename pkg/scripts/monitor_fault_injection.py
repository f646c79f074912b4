#!/usr/bin/env python3
"""Simulate a clean trace, inject each fault kind in turn, and report what the monitor sees.

    python3 scripts/monitor_fault_injection.py --seed 5 --steps 500 --index 250
"""

import argparse
import sys

from mwref.monitor import FAULTS, inject_fault, monitor_for, run_monitor
from mwref.sim import SimConfig, run


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--index", type=int, default=250)
    ap.add_argument("--backend", default="transparent")
    a = ap.parse_args()

    cfg = SimConfig(seed=a.seed, steps=a.steps, backend=a.backend, addr_gossip=True)
    _, trace = run(cfg)
    clean = run_monitor(trace, None, monitor_for(cfg))
    print(f"clean trace: {clean.events} events, {clean.alarms} alarms, "
          f"mean {clean.mean_event_seconds * 1e3:.3f} ms/event")

    ok = clean.alarms == 0
    for fault in FAULTS:
        faulty = inject_fault(cfg, trace, fault, a.index)
        mon = monitor_for(cfg)
        s = run_monitor(faulty, None, mon)
        at = faulty[a.index]["step"]
        hit = s.alarms == 1 and mon.alarms[0].seq == at
        ok &= hit
        reason = mon.alarms[0].reason if mon.alarms else "no alarm"
        print(f"  {fault:20s} alarms={s.alarms} at {s.alarm_seqs} (injected at {at})  {reason}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

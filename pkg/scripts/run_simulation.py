#!/usr/bin/env python3
"""Run one seeded network simulation and print a short report.

    python3 scripts/run_simulation.py --seed 42 --nodes 5 --steps 2000 --trace trace.jsonl
"""

import argparse
import collections
import sys

from mwref.consensus import best_chain
from mwref.sim import TOPOLOGIES, SimConfig, agreed_tip, run, write_trace


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--nodes", type=int, default=5)
    ap.add_argument("--topology", choices=TOPOLOGIES, default="full")
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--loss", type=float, default=0.0)
    ap.add_argument("--dup", type=float, default=0.0)
    ap.add_argument("--backend", default="transparent")
    ap.add_argument("--addr-gossip", action="store_true")
    ap.add_argument("--trace", help="write the JSON Lines trace here")
    a = ap.parse_args()

    cfg = SimConfig(nodes=a.nodes, topology=a.topology, seed=a.seed, steps=a.steps, loss=a.loss, dup=a.dup,
                    backend=a.backend, addr_gossip=a.addr_gossip)
    conf, trace = run(cfg)
    if a.trace:
        with open(a.trace, "w") as fh:
            write_trace(trace, fh)

    counts = collections.Counter(ev["transition"] for ev in trace)
    print(f"events      {len(trace)}  ({', '.join(f'{k}={v}' for k, v in sorted(counts.items()))})")
    print(f"quiescent   {conf.quiescent}")
    for node, st in sorted(conf.delta.items()):
        print(f"  {node}: best chain {len(best_chain(st))} blocks, pool {len(st.tp)}, peers {len(st.as_)}")
    tip = agreed_tip(conf)
    print(f"agreed tip  {tip or 'none (nodes disagree)'}")
    return 0 if tip or not conf.quiescent else 1


if __name__ == "__main__":
    sys.exit(main())

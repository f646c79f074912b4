"""Command-line front end.

Exit codes: 0 success / Valid, 1 Invalid / alarm / failing suite, 2 usage
error (bad flags, unreadable or malformed input files).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import ledger
from .group import BACKENDS, DecodeError, Group, get_group
from .ledger import Block, Chain, ConflictError, InconsistencyError, InvalidTransaction
from .mbt import suite as mbt_suite
from .mbt.models import DEFAULT_SCHEDULES, MUTANTS, TRANSITIONS, adapter_for
from .mbt.ttf import DEFAULT_BUDGET, BudgetExceeded, TacticMismatch, run_suite
from .monitor import FAULTS, InjectionError, inject_fault, monitor_for, run_monitor
from .sim import TOPOLOGIES, SimConfig, agreed_tip, run, write_trace
from .tx import ImbalanceError, Opening, Transaction, build_transaction, validate_transaction

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Config:
    backend: str = "transparent"
    n_bits: int = 4
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    jobs: int = 1
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise UsageError(f"backend must be one of {BACKENDS}")
        if not 1 <= self.n_bits <= 16:
            raise UsageError("--n-bits must be in [1, 16]")
        if self.budget < 1:
            raise UsageError("--budget must be positive")
        if self.jobs < 1:
            raise UsageError("--jobs must be positive")

    @property
    def group(self) -> Group:
        return get_group(self.backend)

    @classmethod
    def from_args(cls, a: argparse.Namespace) -> "Config":
        sim_fields: dict[str, Any] = {}
        if getattr(a, "config", None):
            raw = _load_json(a.config)
            if not isinstance(raw, dict):
                raise UsageError(f"{a.config}: config must be a JSON object")
            sim_fields.update(raw)
        for name in ("nodes", "topology", "steps", "loss", "dup", "coins", "txs", "conflicts"):
            value = getattr(a, name, None)
            if value is not None:
                sim_fields[name] = value
        if getattr(a, "addr_gossip", False):
            sim_fields["addr_gossip"] = True
        # explicit global flags win over the config file
        for name, flag in (("seed", "seed"), ("backend", "backend"), ("n_bits", "n_bits")):
            if getattr(a, flag, None) is not None:
                sim_fields[name] = getattr(a, flag)
        try:
            sim = SimConfig.from_dict(sim_fields)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad simulation config: {exc}") from exc
        return cls(
            backend=sim.backend,
            n_bits=sim.n_bits,
            seed=sim.seed,
            budget=a.budget if getattr(a, "budget", None) is not None else DEFAULT_BUDGET,
            jobs=a.jobs if getattr(a, "jobs", None) is not None else 1,
            sim=sim,
        )


# --------------------------------------------------------------------------
# I/O helpers
# --------------------------------------------------------------------------


def _load_json(path: str) -> Any:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
        return json.loads(text)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not JSON ({exc})") from exc


def _dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_tx(path: str, group: Group) -> Transaction:
    d = _load_json(path)
    try:
        tx = Transaction.from_dict(d, group)
    except DecodeError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    private = d.get("private")
    secrets = private.get("kernel_secrets") if isinstance(private, dict) else None
    if secrets:
        try:
            ks = tuple(int(s) % group.q for s in secrets)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{path}: bad kernel_secrets") from exc
        tx = Transaction(tx.group, tx.inputs, tx.outputs, tx.kernels, kernel_secrets=ks)
    return tx


def _load_block(path: str, group: Group) -> Block:
    try:
        return Block.from_dict(_load_json(path), group)
    except DecodeError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _load_chain(path: str, group: Group) -> Chain:
    try:
        return Chain.from_list(_load_json(path), group)
    except (DecodeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _opening(text: str, what: str) -> tuple[int, int | None]:
    """``V`` or ``V:R`` -> (value, blinding or None)."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return int(parts[0]), None
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise UsageError(f"{what} must look like VALUE or VALUE:BLINDING, got {text!r}")


def _verdict_exit(verdict) -> int:
    print(_dumps(verdict.to_dict()), end="")
    return EXIT_OK if verdict else EXIT_INVALID


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_tx_build(cfg: Config, a) -> int:
    g = cfg.group
    rng = random.Random(f"tx:{cfg.seed}")
    spends = []
    for s in a.spend:
        v, r = _opening(s, "--spend")
        if r is None:
            raise UsageError("--spend needs VALUE:BLINDING")
        spends.append(Opening(r % g.q, v))
    outs = []
    for s in a.out:
        v, r = _opening(s, "--out")
        outs.append((v, r if r is not None else rng.randrange(1, g.q)))
    try:
        tx = build_transaction(g, spends, outs, n_bits=cfg.n_bits)
    except (ImbalanceError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    d = tx.to_dict()
    if not a.public_only:
        d["private"] = {
            "kernel_secrets": list(tx.kernel_secrets),
            "output_openings": [{"v": o.v, "r": o.r} for o in tx.output_openings],
        }
    _emit(_dumps(d), a.output)
    return EXIT_OK


def cmd_tx_validate(cfg: Config, a) -> int:
    return _verdict_exit(validate_transaction(_load_tx(a.file, cfg.group)))


def cmd_block_aggregate(cfg: Config, a) -> int:
    g = cfg.group
    txs = [_load_tx(p, g) for p in a.tx_files]
    try:
        b = ledger.aggregate(txs, offset=a.offset, group=g)
    except (InvalidTransaction, ConflictError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(_dumps(b.to_dict()), a.output)
    return EXIT_OK


def cmd_block_cutthrough(cfg: Config, a) -> int:
    b = ledger.cut_through(_load_block(a.file, cfg.group))
    _emit(_dumps(b.to_dict()), a.output)
    return EXIT_OK


def cmd_block_validate(cfg: Config, a) -> int:
    g = cfg.group
    b = _load_block(a.file, g)
    if a.chain:
        return _verdict_exit(ledger.validates(_load_chain(a.chain, g), b))
    return _verdict_exit(ledger.validate_block(b))


def cmd_chain_genesis(cfg: Config, a) -> int:
    g = cfg.group
    rng = random.Random(f"genesis:{cfg.seed}")
    coins = []
    for s in a.coin:
        v, r = _opening(s, "--coin")
        coins.append(Opening((r if r is not None else rng.randrange(1, g.q)) % g.q, v))
    try:
        b = ledger.make_genesis(g, coins, cfg.n_bits)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(_dumps(Chain((b,)).to_list()), a.output)
    return EXIT_OK


def cmd_chain_append(cfg: Config, a) -> int:
    g = cfg.group
    c = _load_chain(a.chain, g)
    b = _load_block(a.block, g)
    verdict = ledger.validates(c, b)
    if not verdict and not a.force:
        return _verdict_exit(verdict)
    _emit(_dumps(c.append(b).to_list()), a.output)
    return EXIT_OK


def cmd_chain_validate(cfg: Config, a) -> int:
    return _verdict_exit(ledger.valid_chain(_load_chain(a.file, cfg.group)))


def cmd_chain_utxo(cfg: Config, a) -> int:
    c = _load_chain(a.file, cfg.group)
    try:
        u = ledger.utxo(c)
    except InconsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    items = sorted((k.hex(), n) for k, n in u.items())
    print(_dumps([{"commitment": h, "count": n} for h, n in items]), end="")
    return EXIT_OK


def cmd_sim_run(cfg: Config, a) -> int:
    conf, trace = run(cfg.sim)
    if a.output and a.output != "-":
        with open(a.output, "w") as fh:
            write_trace(trace, fh)
    else:
        write_trace(trace, sys.stdout)
    tip = agreed_tip(conf)
    summary = {"events": len(trace), "quiescent": conf.quiescent, "agreed_tip": tip}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _schedule(cfg: Config, a):
    t = TRANSITIONS.get(a.transition)
    if t is None:
        raise UsageError(f"unknown transition {a.transition!r}; known: {sorted(TRANSITIONS)}")
    try:
        schedule = mbt_suite.parse_schedule(a.tactics) if a.tactics else list(DEFAULT_SCHEDULES[t.name])
        mbt_suite.check_schedule(t, schedule)
    except mbt_suite.ScheduleError as exc:
        raise UsageError(str(exc)) from exc
    return t, schedule


def cmd_mbt_gen(cfg: Config, a) -> int:
    t, schedule = _schedule(cfg, a)
    try:
        cases = mbt_suite.generate_suite(t, schedule, cfg.budget, cfg.jobs)
    except (TacticMismatch, BudgetExceeded) as exc:
        raise UsageError(str(exc)) from exc
    _emit(mbt_suite.dumps(mbt_suite.suite_to_dict(t, schedule, cases, cfg.seed, cfg.backend)), a.output)
    print(f"{len(cases)} abstract test cases for {t.name}", file=sys.stderr)
    return EXIT_OK


def cmd_mbt_run(cfg: Config, a) -> int:
    try:
        t, cases, meta = mbt_suite.suite_from_dict(_load_json(a.suite), TRANSITIONS)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{a.suite}: {exc}") from exc
    mutants = list(MUTANTS[t.name]) if a.mutant == ["all"] else (a.mutant or [None])
    reports = []
    for m in mutants:
        try:
            sut = adapter_for(t.name, m, meta["seed"], meta["backend"])
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from exc
        reports.append(run_suite(t, cases, sut, m or "model"))
    out = reports[0].to_dict() if len(reports) == 1 else {"reports": [r.to_dict() for r in reports]}
    _emit(_dumps(out), a.output)
    for r in reports:
        print(f"{r.sut}: {len(r.results) - len(r.failed)}/{len(r.results)} passed", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_INVALID


def _trace_lines(path: str) -> list[str]:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    return text.splitlines()


def cmd_monitor_run(cfg: Config, a) -> int:
    mon = monitor_for(cfg.sim)
    sink_fh = open(a.alarms, "w") if a.alarms and a.alarms != "-" else sys.stdout
    try:
        summary = run_monitor(_trace_lines(a.trace),
                              lambda al: sink_fh.write(json.dumps(al.to_dict(), sort_keys=True) + "\n"), mon)
    finally:
        if sink_fh is not sys.stdout:
            sink_fh.close()
    print(json.dumps(summary.to_dict(), sort_keys=True), file=sys.stderr)
    first = mon.alarms[0] if mon.alarms else None
    if first is not None and first.kind == "divergence" and first.seq == 0:
        print("mwref: hint: the shadow starts from the simulation flags; pass the ones given to `sim run`",
              file=sys.stderr)
    return EXIT_INVALID if summary.divergence_alarms else EXIT_OK


def cmd_monitor_inject(cfg: Config, a) -> int:
    trace = []
    for n, line in enumerate(_trace_lines(a.trace), start=1):
        if line.strip():
            try:
                trace.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise UsageError(f"{a.trace}:{n}: {exc}") from exc
    try:
        faulty = inject_fault(cfg.sim, trace, a.fault, a.index, a.salt)
    except InjectionError as exc:
        raise UsageError(str(exc)) from exc
    text = "".join(json.dumps(ev, separators=(",", ":")) + "\n" for ev in faulty)
    _emit(text, a.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    """Global flags, accepted before or after the subcommand."""
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--backend", choices=BACKENDS, default=d, help="group backend (default transparent)")
    p.add_argument("--n-bits", type=int, default=d, dest="n_bits", help="range-proof bit width (default 4)")
    p.add_argument("--seed", type=int, default=d, help="the only source of randomness (default 0)")
    return p


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with simulation parameters")
    p.add_argument("--nodes", type=int)
    p.add_argument("--topology", choices=TOPOLOGIES)
    p.add_argument("--steps", type=int)
    p.add_argument("--loss", type=float)
    p.add_argument("--dup", type=float)
    p.add_argument("--coins", type=int)
    p.add_argument("--txs", type=int)
    p.add_argument("--conflicts", type=int)
    p.add_argument("--addr-gossip", action="store_true", dest="addr_gossip")


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="mwref", parents=[_global_flags(suppress=False)],
                                     description="MimbleWimble reference model toolkit")
    groups = parser.add_subparsers(dest="group", metavar="{tx,block,chain,sim,mbt,monitor}", required=True)

    def sub(group_parser, name, fn, help_):
        p = group_parser.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    tx = groups.add_parser("tx", help="build or validate a transaction").add_subparsers(dest="cmd", required=True)
    p = sub(tx, "build", cmd_tx_build, "build a transaction from openings")
    p.add_argument("--spend", action="append", default=[], metavar="V:R", help="input opening (repeatable)")
    p.add_argument("--out", action="append", default=[], metavar="V[:R]", help="output value (repeatable)")
    p.add_argument("--public-only", action="store_true", help="omit the builder-private section")
    p.add_argument("-o", "--output")
    p = sub(tx, "validate", cmd_tx_validate, "validate a transaction file")
    p.add_argument("file")

    blk = groups.add_parser("block", help="aggregate, cut through or validate blocks").add_subparsers(dest="cmd", required=True)
    p = sub(blk, "aggregate", cmd_block_aggregate, "CoinJoin transaction files into a block")
    p.add_argument("tx_files", nargs="+", metavar="TX")
    p.add_argument("--offset", type=int, default=0, help="kernel offset (needs builder-private secrets)")
    p.add_argument("-o", "--output")
    p = sub(blk, "cutthrough", cmd_block_cutthrough, "remove outputs spent within the block")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p = sub(blk, "validate", cmd_block_validate, "validate a block, optionally against a chain")
    p.add_argument("file")
    p.add_argument("--chain", help="also check inputs against this chain's UTXO set")

    ch = groups.add_parser("chain", help="chain construction and validation").add_subparsers(dest="cmd", required=True)
    p = sub(ch, "genesis", cmd_chain_genesis, "write a one-block chain minting the given coins")
    p.add_argument("--coin", action="append", default=[], metavar="V[:R]")
    p.add_argument("-o", "--output")
    p = sub(ch, "append", cmd_chain_append, "append a block if it validates")
    p.add_argument("chain")
    p.add_argument("block")
    p.add_argument("--force", action="store_true", help="append even if invalid (for building bad fixtures)")
    p.add_argument("-o", "--output")
    p = sub(ch, "validate", cmd_chain_validate, "validate a chain file")
    p.add_argument("file")
    p = sub(ch, "utxo", cmd_chain_utxo, "print the UTXO multiset of a chain")
    p.add_argument("file")

    sm = groups.add_parser("sim", help="network simulation").add_subparsers(dest="cmd", required=True)
    p = sub(sm, "run", cmd_sim_run, "run the simulator and write a JSON Lines trace")
    _sim_flags(p)
    p.add_argument("-o", "--output")

    mb = groups.add_parser("mbt", help="model-based testing").add_subparsers(dest="cmd", required=True)
    p = sub(mb, "gen", cmd_mbt_gen, "generate an abstract test suite")
    p.add_argument("--transition", required=True, choices=sorted(TRANSITIONS))
    p.add_argument("--tactics", help="schedule, e.g. 'setext(as),setext(asm)'")
    p.add_argument("--budget", type=int, help=f"max bindings enumerated per leaf (default {DEFAULT_BUDGET})")
    p.add_argument("--jobs", type=int, help="parallel pruning workers")
    p.add_argument("-o", "--output")
    p = sub(mb, "run", cmd_mbt_run, "run a suite against the model or a mutant")
    p.add_argument("suite")
    p.add_argument("--mutant", action="append", help="mutant name, repeatable; 'all' for the whole catalog")
    p.add_argument("-o", "--output")

    mo = groups.add_parser("monitor", help="runtime monitoring").add_subparsers(dest="cmd", required=True)
    p = sub(mo, "run", cmd_monitor_run, "monitor a trace against a shadow model")
    p.add_argument("trace")
    _sim_flags(p)
    p.add_argument("--alarms", help="alarm JSON Lines sink (default stdout)")
    p = sub(mo, "inject", cmd_monitor_inject, "insert one faulty rcvBlock event into a trace")
    p.add_argument("trace")
    _sim_flags(p)
    p.add_argument("--fault", required=True, choices=FAULTS)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--salt", type=int, default=0)
    p.add_argument("-o", "--output")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = Config.from_args(a)
        return a.fn(cfg, a)
    except UsageError as exc:
        print(f"mwref: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

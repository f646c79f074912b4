import json
import os
import subprocess
import sys

import pytest

from mwref import ledger
from mwref.cli import main
from mwref.group import get_group
from mwref.mbt import DEFAULT_SCHEDULES, TRANSITIONS
from mwref.mbt.suite import generate_suite
from mwref.sim import SimConfig, iter_jsonl, run
from mwref.tx import Opening, build_transaction


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def chain_file(tmp_path, capsys):
    path = tmp_path / "chain.json"
    code, _, _ = cli(capsys, "chain", "genesis", "--coin", "5:11", "--coin", "7:13", "-o", path)
    assert code == 0
    return path


def build_tx(capsys, tmp_path, name, *args):
    path = tmp_path / name
    code, _, err = cli(capsys, "tx", "build", *args, "-o", path)
    assert code == 0, err
    return path


def test_genesis_only_chain_is_valid(capsys, chain_file):
    code, out, _ = cli(capsys, "chain", "validate", chain_file)
    assert code == 0 and json.loads(out)["valid"] is True
    code, out, _ = cli(capsys, "chain", "utxo", chain_file)
    assert code == 0 and len(json.loads(out)) == 2


def test_tx_round_trip_and_exit_codes(capsys, tmp_path):
    path = build_tx(capsys, tmp_path, "tx.json", "--spend", "5:11", "--out", "3", "--out", "2")
    assert cli(capsys, "tx", "validate", path)[0] == 0
    d = json.loads(path.read_text())
    sig = d["kernels"][0]["sig"]
    sig["s"] = format((int(sig["s"], 16) + 1) % get_group("transparent").q, "04x")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    code, out, _ = cli(capsys, "tx", "validate", bad)
    assert code == 1 and json.loads(out)["reason"] == "KernelSignature"
    assert cli(capsys, "tx", "validate", tmp_path / "missing.json")[0] == 2
    bad.write_text("{}")
    assert cli(capsys, "tx", "validate", bad)[0] == 2
    assert cli(capsys, "tx", "build", "--spend", "5:11", "--out", "4")[0] == 2  # unbalanced request
    assert cli(capsys, "tx", "frobnicate")[0] == 2


def test_aggregate_append_and_double_spend(capsys, tmp_path, chain_file):
    t1 = build_tx(capsys, tmp_path, "t1.json", "--spend", "5:11", "--out", "5")
    t2 = build_tx(capsys, tmp_path, "t2.json", "--spend", "7:13", "--out", "3", "--out", "4")
    blk = tmp_path / "b.json"
    assert cli(capsys, "block", "aggregate", t1, t2, "--offset", "99", "-o", blk)[0] == 0
    assert cli(capsys, "block", "validate", blk)[0] == 0
    assert cli(capsys, "block", "validate", blk, "--chain", chain_file)[0] == 0
    c2 = tmp_path / "c2.json"
    assert cli(capsys, "chain", "append", chain_file, blk, "-o", c2)[0] == 0
    assert cli(capsys, "chain", "validate", c2)[0] == 0

    t3 = build_tx(capsys, tmp_path, "t3.json", "--seed", "4", "--spend", "5:11", "--out", "5")
    assert cli(capsys, "block", "aggregate", t1, t3)[0] == 1  # shared input

    again = tmp_path / "again.json"
    assert cli(capsys, "block", "aggregate", t3, "-o", again)[0] == 0
    assert cli(capsys, "chain", "append", c2, again)[0] == 1
    c3 = tmp_path / "c3.json"
    assert cli(capsys, "chain", "append", c2, again, "--force", "-o", c3)[0] == 0
    code, out, _ = cli(capsys, "chain", "validate", c3)
    assert code == 1 and json.loads(out)["reason"] == "DoubleSpend"


def test_public_only_cannot_take_offset(capsys, tmp_path):
    t = build_tx(capsys, tmp_path, "t.json", "--spend", "5:11", "--out", "5", "--public-only")
    assert "private" not in json.loads(t.read_text())
    assert cli(capsys, "block", "aggregate", t)[0] == 0
    assert cli(capsys, "block", "aggregate", t, "--offset", "3")[0] == 2


def test_cutthrough_byte_identical(capsys, tmp_path):
    t1 = build_tx(capsys, tmp_path, "t1.json", "--spend", "5:11", "--out", "5:21")
    t2 = build_tx(capsys, tmp_path, "t2.json", "--spend", "5:21", "--out", "2", "--out", "3")
    blk = tmp_path / "b.json"
    assert cli(capsys, "block", "aggregate", t1, t2, "-o", blk)[0] == 0
    code, once, _ = cli(capsys, "block", "cutthrough", blk)
    assert code == 0
    again = tmp_path / "once.json"
    again.write_text(once)
    _, twice, _ = cli(capsys, "block", "cutthrough", again)
    assert once == twice
    assert len(json.loads(once)["inputs"]) == 1


def test_cli_matches_library(capsys, tmp_path):
    g = get_group("transparent")
    t = build_tx(capsys, tmp_path, "t.json", "--spend", "5:11", "--out", "5:21")
    lib = build_transaction(g, [Opening(11, 5)], [(5, 21)], n_bits=4)
    d = json.loads(t.read_text())
    d.pop("private")
    assert d == lib.to_dict()

    code, out, _ = cli(capsys, "sim", "run", "--seed", "42", "--steps", "300")
    _, trace = run(SimConfig(seed=42, steps=300))
    assert out == "".join(line + "\n" for line in iter_jsonl(trace))

    code, out, _ = cli(capsys, "mbt", "gen", "--transition", "rcv_addr")
    cases = generate_suite(TRANSITIONS["rcv_addr"], DEFAULT_SCHEDULES["rcv_addr"])
    assert [c["binding"]["as"] for c in json.loads(out)["cases"]] == [sorted(c.binding["as"]) for c in cases]

    code, out, _ = cli(capsys, "chain", "genesis", "--coin", "5:11")
    assert json.loads(out) == ledger.Chain((ledger.make_genesis(g, [Opening(11, 5)], 4),)).to_list()


def test_sim_deterministic_in_process(capsys):
    a = cli(capsys, "sim", "run", "--seed", "42", "--steps", "1000", "--addr-gossip")
    b = cli(capsys, "--seed", "42", "sim", "run", "--steps", "1000", "--addr-gossip")
    assert a == b and a[0] == 0 and a[1].count("\n") == 1000


def test_sim_deterministic_across_processes(tmp_path):
    outs = []
    for hashseed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        res = subprocess.run([sys.executable, "-m", "mwref", "sim", "run", "--seed", "42", "--steps", "1000"],
                             capture_output=True, env=env, check=True)
        outs.append(res.stdout)
    assert outs[0] == outs[1] and outs[0]


def test_sim_config_file(capsys, tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"nodes": 3, "topology": "ring", "steps": 200}))
    code, out, err = cli(capsys, "sim", "run", "--config", cfg, "--seed", "2")
    assert code == 0 and json.loads(err)["events"] == len(out.splitlines())
    cfg.write_text(json.dumps({"colour": "red"}))
    assert cli(capsys, "sim", "run", "--config", cfg)[0] == 2
    assert cli(capsys, "sim", "run", "--loss", "2")[0] == 2


def test_mbt_gen_and_run(capsys, tmp_path):
    suite = tmp_path / "suite.json"
    code, _, err = cli(capsys, "mbt", "gen", "--transition", "rcv_addr", "--tactics", "setext(as),setext(asm)",
                       "-o", suite, "--jobs", "2")
    assert code == 0 and "abstract test cases" in err
    code, out, _ = cli(capsys, "mbt", "run", suite)
    assert code == 0 and json.loads(out)["failed"] == 0
    code, out, _ = cli(capsys, "mbt", "run", suite, "--mutant", "drop_relay")
    assert code == 1 and json.loads(out)["failed"] > 0
    code, out, _ = cli(capsys, "mbt", "run", suite, "--mutant", "all")
    assert code == 1 and all(r["failed"] for r in json.loads(out)["reports"])
    assert cli(capsys, "mbt", "run", suite, "--mutant", "nope")[0] == 2
    assert cli(capsys, "mbt", "gen", "--transition", "rcv_addr", "--tactics", "bound(as)")[0] == 2
    assert cli(capsys, "mbt", "gen", "--transition", "rcv_addr", "--tactics", "setext(zz)")[0] == 2
    code, _, err = cli(capsys, "mbt", "gen", "--transition", "validate_transaction", "--budget", "10")
    assert code == 2 and "VIS" in err


def test_monitor_run_and_inject(capsys, tmp_path):
    trace = tmp_path / "trace.jsonl"
    assert cli(capsys, "sim", "run", "--seed", "5", "--steps", "300", "-o", trace)[0] == 0
    code, out, err = cli(capsys, "monitor", "run", trace, "--seed", "5")
    assert code == 0 and out == "" and json.loads(err)["alarms"] == 0

    bad = tmp_path / "bad.jsonl"
    code, _, _ = cli(capsys, "monitor", "inject", trace, "--seed", "5", "--fault", "double_spend",
                     "--index", "150", "-o", bad)
    assert code == 0
    alarms = tmp_path / "alarms.jsonl"
    code, _, err = cli(capsys, "monitor", "run", bad, "--seed", "5", "--alarms", alarms)
    assert code == 1
    lines = alarms.read_text().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["seq"] == json.loads(bad.read_text().splitlines()[150])["step"]

    junk = tmp_path / "junk.jsonl"
    junk.write_text("{oops\n")
    code, out, _ = cli(capsys, "monitor", "run", junk)
    assert code == 0 and json.loads(out)["kind"] == "parse"
    assert cli(capsys, "monitor", "inject", trace, "--fault", "double_spend", "--index", "9999")[0] == 2


def test_monitor_hints_at_mismatched_flags(capsys, tmp_path):
    trace = tmp_path / "trace.jsonl"
    cli(capsys, "sim", "run", "--seed", "42", "--steps", "200", "-o", trace)
    code, _, err = cli(capsys, "monitor", "run", trace, "--seed", "0")
    assert code == 1 and "hint" in err
    code, _, err = cli(capsys, "monitor", "run", trace, "--seed", "42")
    assert code == 0 and "hint" not in err

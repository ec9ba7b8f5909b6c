import json
import os
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

from chronocache import crypto_core, sim
from chronocache.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_for(port, timeout=10.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        try:
            socket.create_connection(("127.0.0.1", port), timeout=0.2).close()
            return
        except OSError:
            time.sleep(0.05)
    raise TimeoutError(port)


def test_keygen_writes_31_keys(tmp_path):
    out = tmp_path / "keys.json"
    assert main(["keygen", "--m", "4", "--out", str(out), "--seed", "1"]) == 0
    obj = json.loads(out.read_text())
    assert obj["m"] == 4 and len(obj["keys"]) == 31
    assert crypto_core.load_mac_key(tmp_path / "keys.mac.json")
    first = out.read_text()
    main(["keygen", "--m", "4", "--out", str(out), "--seed", "1"])
    assert out.read_text() == first


def test_catalog_gen(tmp_path):
    out = tmp_path / "cat.json"
    assert main(["catalog-gen", "--n", "3", "--size", "10", "--seed", "2", "--out", str(out)]) == 0
    entries = json.loads(out.read_text())
    assert [e["c_name"] for e in entries] == ["c000000", "c000001", "c000002"]
    assert all(len(crypto_core.b64url_decode(e["content_b64"])) == 10 for e in entries)


def test_fetch_revoked_exits_3_without_servers(capsys):
    # nothing listens on port 1; a network call would produce exit code 5
    code = main(["fetch", "--m", "3", "--name", "ep2", "--t-user", "1", "--t-curr", "2",
                 "--sp", "127.0.0.1:1", "--cs", "127.0.0.1:1"])
    assert code == 3
    assert "REVOKED" in capsys.readouterr().err


def test_fetch_validation_exit_code():
    assert main(["fetch", "--name", "x", "--t-curr", "1"]) == 2
    assert main(["fetch", "--m", "3", "--name", "x", "--t-user", "9", "--t-curr", "1"]) == 2


def test_fetch_upstream_exit_code():
    assert main(["fetch", "--m", "3", "--name", "x", "--t-user", "3", "--t-curr", "1",
                 "--sp", "127.0.0.1:1", "--cs", "127.0.0.1:1"]) == 5


def test_simulate_small(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"m": 2, "n_users": 8, "n_contents": 16,
                               "requests_per_user_per_period": 4, "capacities": [2, 4]}))
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
    rows = sim.read_csv(out.read_text())
    assert len(rows) == 8
    assert "seed=5" in capsys.readouterr().err
    again = tmp_path / "again.csv"
    main(["simulate", "--config", str(cfg), "--seed", "5", "--out", str(again),
          "--engine", "kernel"])
    assert again.read_text() == out.read_text()


def test_simulate_paper_config_shape(tmp_path):
    out = tmp_path / "paper.csv"
    assert main(["simulate", "--config", str(CONFIGS / "paper.json"), "--engine", "kernel",
                 "--out", str(out)]) == 0
    assert len(sim.read_csv(out.read_text())) == 16 * 3


def test_daemons_and_fetch(tmp_path):
    keys, catalog = tmp_path / "keys.json", tmp_path / "cat.json"
    main(["keygen", "--m", "3", "--out", str(keys), "--seed", "4"])
    catalog.write_text(json.dumps([
        {"c_name": "ep1", "content_b64": crypto_core.b64url_encode(b"first episode")},
        {"c_name": "ep2", "size_bytes": 64},
    ]))
    sp_port, cs_port = free_port(), free_port()
    sp_cfg = tmp_path / "sp.json"
    sp_cfg.write_text(json.dumps({"m": 3, "nonce_bits": 128, "listen": f"127.0.0.1:{sp_port}",
                                  "key_file": str(keys), "catalog_file": str(catalog)}))
    cs_cfg = tmp_path / "cs.json"
    cs_cfg.write_text(json.dumps({"capacity_entries": 4, "upstream": f"127.0.0.1:{sp_port}",
                                  "listen": f"127.0.0.1:{cs_port}"}))
    env = {**os.environ, "CHRONOCACHE_LOG": "WARNING"}
    procs = [subprocess.Popen([sys.executable, "-m", "chronocache", "run-sp",
                               "--config", str(sp_cfg)], env=env),
             subprocess.Popen([sys.executable, "-m", "chronocache", "run-cs",
                               "--config", str(cs_cfg)], env=env)]
    try:
        wait_for(sp_port)
        wait_for(cs_port)
        base = [sys.executable, "-m", "chronocache", "fetch", "--m", "3",
                "--sp", f"127.0.0.1:{sp_port}", "--cs", f"127.0.0.1:{cs_port}"]
        ok = subprocess.run(base + ["--name", "ep1", "--t-user", "5", "--t-curr", "1"],
                            capture_output=True, env=env)
        assert ok.returncode == 0 and ok.stdout == b"first episode"
        missing = subprocess.run(base + ["--name", "nope", "--t-user", "5", "--t-curr", "1"],
                                 capture_output=True, env=env)
        assert missing.returncode == 4 and b"NOT_FOUND" in missing.stderr
        out = tmp_path / "ep2.bin"
        synth = subprocess.run(base + ["--name", "ep2", "--t-user", "2", "--t-curr", "1",
                                       "--out", str(out)], env=env)
        assert synth.returncode == 0 and len(out.read_bytes()) == 64
    finally:
        for p in procs:
            p.terminate()
        for p in procs:
            p.wait(timeout=10)

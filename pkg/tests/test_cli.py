import csv
import io
import os
import socket
import subprocess
import sys

import pytest

from mdmp.cli import main
from mdmp.metrics import RESULT_HEADER, STREAM_HEADER


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_pingpong_rows(capsys):
    code, out, _ = run_cli(capsys, "pingpong", "--elements", "8", "--iters", "3", "--repeats", "2")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert out.splitlines()[0] == RESULT_HEADER
    assert [r["repeat"] for r in rows] == ["0", "1"]
    assert rows[0]["msgs_per_iter"] == "8" and rows[0]["bytes_per_iter"] == "32"
    assert rows[0]["mode"] == "managed" and rows[0]["transport"] == "inproc"


def test_sweep_is_cartesian(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--benchmark", "selective-delay", "--elements", "16",
                           "--iters", "2", "--delay", "0,4", "--selected", "2,16",
                           "--modes", "bulk,managed")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 8
    assert {(r["delay_elems"], r["selected"], r["mode"]) for r in rows} == {
        (d, s, m) for d in ("0", "4") for s in ("2", "16") for m in ("passthrough", "managed")}


def test_jacobi_and_stream(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "jacobi", "--rows", "4", "--cols", "4", "--maxiter", "2")
    assert code == 0
    assert [r["mode"] for r in csv.DictReader(io.StringIO(out))] == ["bulk", "hand", "managed"]
    target = tmp_path / "stream.csv"
    code, _, _ = run_cli(capsys, "stream", "--elements", "500", "--repeats", "1",
                         "--kernels", "Db Copy,Db Add", "-o", str(target))
    assert code == 0
    lines = target.read_text().splitlines()
    assert lines[0] == STREAM_HEADER and len(lines) == 1 + 2 * 5


@pytest.mark.parametrize("argv", [
    ["pingpong", "--elements", "4", "--selected", "5"],
    ["pingpong", "--chunk", "0"],
    ["pingpong", "--elements", "many"],
    ["jacobi", "--rows", "5", "--ranks", "2"],
    ["sweep", "--delay", "1,x"],
    ["stream", "--kernels", "Nope"],
    ["pingpong", "--transport", "socket"],
    ["pingpong", "--transport", "socket", "--rank", "0", "--peers", "bad"],
    ["frobnicate"],
])
def test_config_errors_exit_2(capsys, argv):
    assert run_cli(capsys, *argv)[0] == 2


def test_runtime_failure_exits_1(capsys, monkeypatch):
    import mdmp.cli as cli

    def broken(cfg, ep=None):
        raise RuntimeError("link exploded")

    monkeypatch.setitem(cli.RUNNERS, "pingpong", broken)
    code, _, err = run_cli(capsys, "pingpong", "--elements", "2", "--iters", "1")
    assert code == 1 and "link exploded" in err


def test_same_invocation_same_log(capsys, tmp_path):
    logs = []
    for k in range(2):
        path = tmp_path / f"log{k}.csv"
        run_cli(capsys, "selective", "--elements", "12", "--selected", "5", "--iters", "3",
                "--seed", "4", "--log-csv", str(path))
        logs.append(path.read_text())
    assert logs[0] == logs[1] and len(logs[0].splitlines()) > 1


def _free_ports(n):
    socks = [socket.socket() for _ in range(n)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def test_socket_transport_two_processes():
    peers = ",".join(f"127.0.0.1:{p}" for p in _free_ports(2))
    base = [sys.executable, "-m", "mdmp", "pingpong", "--elements", "16", "--iters", "4",
            "--transport", "socket", "--peers", peers, "--timeout", "30"]
    env = dict(os.environ)
    procs = [subprocess.Popen(base + ["--rank", str(r)], stdout=subprocess.PIPE,
                              stderr=subprocess.PIPE, text=True, env=env) for r in (1, 0)]
    outs = [p.communicate(timeout=60) for p in procs]
    assert [p.returncode for p in procs] == [0, 0], outs
    rank1_out, rank0_out = outs[1 - 1][0], outs[1][0]
    assert rank1_out == ""
    rows = list(csv.DictReader(io.StringIO(rank0_out)))
    assert rows[0]["transport"] == "socket" and rows[0]["msgs_per_iter"] == "16"

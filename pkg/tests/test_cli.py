import json

import pytest

from p2psim import cli
from p2psim import wire_gnutella as gw

SPEC = """
name = "cli-test"
seed = 4
t_end = 2000

[topology]
kind = "decentralized"
n = 20
degree = 4

[protocol]
protocol = "{protocol}"
ttl = 3
{extra}

[workload]
n_queries = 5
"""


def _spec(tmp_path, name="s.toml", protocol="gnutella", extra="", text=None):
    path = tmp_path / name
    path.write_text(text if text is not None else SPEC.format(protocol=protocol, extra=extra))
    return str(path)


def test_simulate_clean(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["simulate", "--spec", _spec(tmp_path), "--out", str(out)]) == cli.EXIT_OK
    assert (out / "metrics.csv").read_text().startswith("metric,value\n")
    assert (out / "trace.jsonl").exists()
    assert "violations: 0" in (out / "report.txt").read_text()
    assert "cli-test" in capsys.readouterr().out


def test_simulate_unknown_protocol(tmp_path, capsys):
    assert cli.main(["simulate", "--spec", _spec(tmp_path, protocol="fasttrack-real"), "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert "fasttrack-real" in capsys.readouterr().err


def test_simulate_mutation(tmp_path):
    spec = _spec(tmp_path, extra='fault = "rule5"')
    assert cli.main(["simulate", "--spec", spec, "--out", str(tmp_path / "o")]) == cli.EXIT_VIOLATION
    assert "rule5" in (tmp_path / "o" / "report.txt").read_text()


def test_simulate_bad_toml(tmp_path):
    assert cli.main(["simulate", "--spec", _spec(tmp_path, text="name = "), "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_simulate_missing_seed(tmp_path):
    text = SPEC.format(protocol="gnutella", extra="").replace("seed = 4\n", "")
    assert cli.main(["simulate", "--spec", _spec(tmp_path, text=text), "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_seed_env_override(tmp_path, monkeypatch):
    spec = _spec(tmp_path)
    monkeypatch.setenv("SEED", "99")
    cli.main(["simulate", "--spec", spec, "--out", str(tmp_path / "a")])
    monkeypatch.delenv("SEED")
    cli.main(["simulate", "--spec", spec, "--out", str(tmp_path / "b")])
    a, b = (tmp_path / "a" / "trace.jsonl").read_text(), (tmp_path / "b" / "trace.jsonl").read_text()
    assert a != b
    assert json.loads(a.splitlines()[0])["seed"] == 99


def test_bad_seed_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SEED", "many")
    assert cli.main(["simulate", "--spec", _spec(tmp_path), "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_usage_errors():
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["explode"]) == cli.EXIT_USAGE


def test_compare_rejects_different_workloads(tmp_path):
    a = _spec(tmp_path, "a.toml")
    b = _spec(tmp_path, "b.toml", text=SPEC.format(protocol="gnutella", extra="").replace("n_queries = 5", "n_queries = 6"))
    assert cli.main(["compare", "--specs", f"{a},{b}", "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_compare_needs_two(tmp_path):
    assert cli.main(["compare", "--specs", _spec(tmp_path), "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_compare_table(tmp_path):
    star = SPEC.format(protocol="napster", extra="").replace('kind = "decentralized"\nn = 20\ndegree = 4', 'kind = "centralized"\nn = 20')
    a, b = _spec(tmp_path, "a.toml"), _spec(tmp_path, "b.toml", text=star)
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--specs", f"{a},{b}", "--out", str(out)]) == cli.EXIT_OK
    lines = (out / "compare.csv").read_text().splitlines()
    assert len(lines) == 3
    header = lines[0].split(",")
    for col in ("completeness", "success_after_failure", "nodes_reached", "msg_Query"):
        assert col in header
    napster = dict(zip(header, lines[2].split(",")))
    assert float(napster["success_after_failure"]) == 0.0


# --- codec ---------------------------------------------------------------------------------


PING_HEX = "00" * 16 + "00070000000000"


def test_decode_gnutella(capsys):
    assert cli.main(["codec", "--protocol", "gnutella", "--decode", PING_HEX]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "PING" in out and "ttl            7" in out


def test_encode_then_decode_gnutella(capsys):
    req = {"kind": "pong", "id": "ab" * 16, "ttl": 3, "port": 6346, "ip": "10.0.0.1", "files_shared": 5, "kilobytes_shared": 100}
    assert cli.main(["codec", "--protocol", "gnutella", "--encode", json.dumps(req)]) == cli.EXIT_OK
    hex_out = capsys.readouterr().out.strip()
    assert hex_out.endswith("ca180a0000010500000064000000")
    desc = gw.decode(bytes.fromhex(hex_out))
    assert desc.payload == gw.PongPayload(6346, "10.0.0.1", 5, 100)


@pytest.mark.parametrize(
    "protocol, request_",
    [
        ("gnutella", {"kind": "queryhit", "ttl": 2, "port": 1, "ip": "1.2.3.4", "speed": 56,
                      "results": [{"file_index": 1, "file_size": 9, "file_name": "a.mp3"}], "servent_id": "11" * 16}),
        ("napster", {"function": "login", "fields": ["alice", "secret", 6699, "nap v0.8", 8]}),
        ("napster", {"function": 0x7777, "fields": ["whatever"]}),
        ("openft", {"kind": "child", "payload": {"target_ip": "10.0.0.5", "target_port": 1216}}),
        ("openft", {"kind": "search", "flags": 1, "payload": {
            "search_id": "00" * 16, "ttl": 2, "hops": 0, "ip": "1.1.1.1", "port": 1, "speed": 1,
            "node_id": "22" * 16, "hits": [{"file_index": 0, "file_size": 4, "file_name": "x"}]}}),
    ],
)
def test_codec_round_trip(capsys, protocol, request_):
    assert cli.main(["codec", "--protocol", protocol, "--encode", json.dumps(request_)]) == cli.EXIT_OK
    hex_out = capsys.readouterr().out.strip()
    assert cli.main(["codec", "--protocol", protocol, "--decode", hex_out]) == cli.EXIT_OK
    assert capsys.readouterr().out.strip()


def test_napster_login_hex(capsys):
    cli.main(["codec", "--protocol", "napster", "--encode", json.dumps({"function": 2, "fields": ["alice", "secret", 6699, "nap v0.8", 8]})])
    raw = bytes.fromhex(capsys.readouterr().out.strip())
    assert raw[4:] == b'alice secret 6699 "nap v0.8" 8'


@pytest.mark.parametrize(
    "args",
    [
        ["--protocol", "gnutella", "--decode", "zz"],
        ["--protocol", "gnutella", "--decode", "abc"],
        ["--protocol", "gnutella", "--decode", "00" * 10],
        ["--protocol", "openft", "--decode", "0000ff0f"],
        ["--protocol", "napster", "--encode", "{not json"],
        ["--protocol", "gnutella", "--encode", '{"kind": "ping", "bogus": 1}'],
        ["--protocol", "gnutella"],
        ["--protocol", "smtp", "--decode", "00"],
    ],
)
def test_codec_errors(args):
    assert cli.main(["codec", *args]) == cli.EXIT_USAGE

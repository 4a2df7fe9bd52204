import asyncio
import base64
import hashlib
import json
import os
import queue
import socket
import threading

import pytest

from merza.affect import MODES
from merza.assemble import build_suggestion
from merza.mininotation import flatten_events, parse
from merza.qlearn import TrainConfig, train
from merza.service import (
    ServeConfig,
    Service,
    SessionState,
    build_state,
    handle,
    merza_home,
)


def fresh_state(table, **kw):
    return SessionState(table=table, progress=1.0, **kw)


def test_set_affect_clamps(quick_table):
    st = fresh_state(quick_table)
    resp = handle({"type": "set_affect", "valence": 7, "arousal": -3}, st)
    assert resp == {"type": "set_affect", "ok": True, "valence": 1.0, "arousal": -1.0}
    assert (st.coords.valence, st.coords.arousal) == (1.0, -1.0)


def test_set_affect_rejects_bad_payload(quick_table):
    st = fresh_state(quick_table)
    for payload in (
        {"type": "set_affect"},
        {"type": "set_affect", "valence": "high", "arousal": 0},
        {"type": "set_affect", "valence": 0.2, "arousal": float("nan")},
        {"type": "set_affect", "valence": True, "arousal": 0.5},
    ):
        resp = handle(payload, st)
        assert resp["type"] == "error"
        assert resp["ok"] is False


def test_suggest_returns_full_payload(quick_table):
    st = fresh_state(quick_table)
    handle({"type": "set_affect", "valence": 0.8, "arousal": 0.65}, st)
    resp = handle({"type": "suggest"}, st)
    assert resp["type"] == "suggest" and resp["ok"] is True
    s = resp["suggestion"]
    assert set(s) == {"id", "code", "valence", "arousal", "seed", "loudness_db", "pitch_register", "mode"}
    assert (s["valence"], s["arousal"]) == (0.8, 0.65)
    assert s["mode"] == "lydian"
    assert s["id"] in st.pending
    # melody line degrees stay inside the mode
    degrees = parse(s["code"].split('"')[1])
    indices = {int(e.name) for e in flatten_events(degrees)}
    assert indices <= set(MODES["lydian"])


def test_suggest_seed_replay(quick_table):
    st = fresh_state(quick_table, seed_base=500)
    handle({"type": "set_affect", "valence": 0.8, "arousal": 0.65}, st)
    resp = handle({"type": "suggest"}, st)
    s = resp["suggestion"]
    again, _, _ = build_suggestion(quick_table, st.coords, s["seed"])
    assert again.code == s["code"]
    assert again.id == s["id"]


def test_suggest_ids_distinct(quick_table):
    st = fresh_state(quick_table)
    ids = set()
    for _ in range(25):
        ids.add(handle({"type": "suggest"}, st)["suggestion"]["id"])
    assert len(ids) == 25


def test_accept_and_reject_move_to_history(quick_table):
    st = fresh_state(quick_table)
    sid = handle({"type": "suggest"}, st)["suggestion"]["id"]
    resp = handle({"type": "accept", "id": sid}, st)
    assert resp == {"type": "accept", "ok": True, "id": sid}
    assert sid not in st.pending
    assert st.history[-1]["event"] == "accept"

    sid2 = handle({"type": "suggest"}, st)["suggestion"]["id"]
    resp = handle({"type": "reject", "id": sid2}, st)
    assert resp == {"type": "reject", "ok": True, "id": sid2}
    assert sid2 not in st.pending


def test_accept_unknown_id_keeps_state(quick_table):
    st = fresh_state(quick_table)
    handle({"type": "suggest"}, st)
    before = dict(st.pending)
    resp = handle({"type": "accept", "id": "nope"}, st)
    assert resp["type"] == "error"
    assert st.pending == before


def test_suggest_while_training_reports_progress():
    st = SessionState(table=None, progress=0.25)
    resp = handle({"type": "suggest"}, st)
    assert resp == {"type": "train_status", "ok": True, "progress": 0.25}
    resp = handle({"type": "train_status"}, st)
    assert resp["progress"] == 0.25


def test_unknown_and_malformed_messages(quick_table):
    st = fresh_state(quick_table)
    assert handle({"type": "dance"}, st)["type"] == "error"
    assert handle(["set_affect"], st)["type"] == "error"
    assert handle({"kind": "suggest"}, st)["type"] == "error"


def test_history_is_monotone_and_logged(tmp_path, quick_table):
    st = fresh_state(quick_table, log_path=tmp_path / "log" / "session.jsonl")
    handle({"type": "set_affect", "valence": 0.1, "arousal": 0.2}, st)
    handle({"type": "suggest"}, st)
    handle({"type": "accept", "id": st.history[-1]["id"]}, st)
    st.close_log()
    stamps = [e["ts"] for e in st.history]
    assert stamps == sorted(stamps)
    lines = [json.loads(l) for l in (tmp_path / "log" / "session.jsonl").read_text().splitlines()]
    assert [e["event"] for e in lines] == ["set_affect", "suggest", "accept"]
    # the log alone is enough to regenerate the accepted code
    sug = lines[1]
    again, _, _ = build_suggestion(quick_table, st.coords, sug["seed"])
    assert again.code == sug["code"]


def test_build_state_policy_sources(tmp_path, monkeypatch, quick_table):
    monkeypatch.setenv("MERZA_HOME", str(tmp_path / "home"))
    assert merza_home() == tmp_path / "home"

    with pytest.raises(RuntimeError):
        build_state(ServeConfig(log_file=str(tmp_path / "a.jsonl")))

    policy = tmp_path / "p.bin"
    quick_table.save(policy)
    st = build_state(ServeConfig(policy_file=str(policy), log_file=str(tmp_path / "b.jsonl")))
    assert st.progress == 1.0
    assert st.table is not None

    home_policy = tmp_path / "home" / "policy.bin"
    home_policy.parent.mkdir(parents=True)
    quick_table.save(home_policy)
    st = build_state(ServeConfig(log_file=str(tmp_path / "c.jsonl")))
    assert st.table is not None


def test_build_state_train_on_start(tmp_path):
    cfg = ServeConfig(
        train_on_start=True,
        train_config=TrainConfig(episodes=40, seed=2),
        log_file=str(tmp_path / "t.jsonl"),
    )
    st = build_state(cfg)
    assert st.progress == 1.0
    assert st.table.visits.sum() == 40 * 50
    events = [e["event"] for e in st.history]
    assert events[:2] == ["train_start", "train_done"]

    resp = handle({"type": "train_status"}, st)
    assert resp["progress"] == 1.0
    lines = resp["trace"].rstrip("\n").split("\n")
    assert lines[0] == "episode,cumulative_reward"
    assert len(lines) == 41
    episode, reward = lines[-1].split(",")
    assert episode == "39"
    assert float(reward) == st.trace.rewards[39]


def test_build_state_soundbank_config(tmp_path, quick_table):
    banks = tmp_path / "banks.json"
    banks.write_text(json.dumps([
        {"name": "tri", "chromatic": True, "size": 25},
        {"name": "clap", "size": 4},
    ]))
    policy = tmp_path / "p.bin"
    quick_table.save(policy)
    st = build_state(ServeConfig(
        policy_file=str(policy),
        soundbank_config=str(banks),
        log_file=str(tmp_path / "s.jsonl"),
    ))
    assert st.melody_bank.name == "tri"
    assert st.assemble_cfg.bank == "tri"
    assert [b.name for b in st.rhythm_banks] == ["clap"]


class Client:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10)
        self.fh = self.sock.makefile("rwb")

    def call(self, obj):
        self.fh.write(json.dumps(obj).encode() + b"\n")
        self.fh.flush()
        return json.loads(self.fh.readline())

    def send_raw(self, data: bytes):
        self.fh.write(data)
        self.fh.flush()
        return json.loads(self.fh.readline())

    def close(self):
        self.sock.close()


@pytest.fixture
def running_service(tmp_path, quick_table):
    st = fresh_state(quick_table, log_path=tmp_path / "session.jsonl")
    cfg = ServeConfig(port=0, ws_port=0)
    svc = Service(st, cfg)
    ports = queue.Queue()
    thread = threading.Thread(
        target=lambda: asyncio.run(svc.run(ready=lambda s: ports.put((s.tcp_port, s.ws_port)))),
        daemon=True,
    )
    thread.start()
    tcp_port, ws_port = ports.get(timeout=10)
    yield st, tcp_port, ws_port
    svc.request_stop()
    thread.join(timeout=10)


def test_scripted_tcp_session(running_service):
    st, port, _ = running_service
    c = Client(port)
    resp = c.call({"type": "set_affect", "valence": 0.8, "arousal": 0.65})
    assert resp == {"type": "set_affect", "ok": True, "valence": 0.8, "arousal": 0.65}
    resp = c.call({"type": "suggest"})
    assert resp["type"] == "suggest"
    sid = resp["suggestion"]["id"]
    assert c.call({"type": "accept", "id": sid}) == {"type": "accept", "ok": True, "id": sid}
    resp = c.call({"type": "reject", "id": "missing"})
    assert resp["type"] == "error"
    resp = c.call({"type": "wiggle"})
    assert resp["type"] == "error"
    resp = c.send_raw(b"this is not json\n")
    assert resp["type"] == "error"
    c.close()

    # session state survives reconnects
    c2 = Client(port)
    resp = c2.call({"type": "suggest"})
    assert resp["suggestion"]["valence"] == 0.8
    c2.close()


def test_two_clients_get_distinct_ids(running_service):
    _, port, _ = running_service
    a, b = Client(port), Client(port)
    ra = a.call({"type": "suggest"})
    rb = b.call({"type": "suggest"})
    assert ra["suggestion"]["id"] != rb["suggestion"]["id"]
    a.close()
    b.close()


def ws_handshake(sock):
    key = base64.b64encode(os.urandom(16)).decode()
    sock.sendall(
        (
            "GET / HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\n"
            "Connection: Upgrade\r\nSec-WebSocket-Version: 13\r\n"
            f"Sec-WebSocket-Key: {key}\r\n\r\n"
        ).encode()
    )
    buf = b""
    while b"\r\n\r\n" not in buf:
        buf += sock.recv(4096)
    head = buf.split(b"\r\n\r\n")[0]
    expect = base64.b64encode(
        hashlib.sha1((key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11").encode()).digest()
    )
    assert b"101" in head.split(b"\r\n")[0]
    assert expect in head
    return buf.split(b"\r\n\r\n", 1)[1]


def ws_send_text(sock, payload: bytes):
    mask = os.urandom(4)
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    n = len(payload)
    if n < 126:
        head = bytes([0x81, 0x80 | n])
    else:
        head = bytes([0x81, 0x80 | 126]) + n.to_bytes(2, "big")
    sock.sendall(head + mask + masked)


def ws_read_text(sock, leftover=b""):
    buf = leftover
    while len(buf) < 2:
        buf += sock.recv(4096)
    length = buf[1] & 0x7F
    offset = 2
    if length == 126:
        while len(buf) < 4:
            buf += sock.recv(4096)
        length = int.from_bytes(buf[2:4], "big")
        offset = 4
    while len(buf) < offset + length:
        buf += sock.recv(4096)
    return buf[offset:offset + length], buf[offset + length:]


def test_websocket_bridge(running_service):
    _, _, ws_port = running_service
    sock = socket.create_connection(("127.0.0.1", ws_port), timeout=10)
    leftover = ws_handshake(sock)
    ws_send_text(sock, json.dumps({"type": "set_affect", "valence": 0.2, "arousal": -0.4}).encode())
    payload, leftover = ws_read_text(sock, leftover)
    resp = json.loads(payload)
    assert resp == {"type": "set_affect", "ok": True, "valence": 0.2, "arousal": -0.4}
    ws_send_text(sock, json.dumps({"type": "suggest"}).encode())
    payload, leftover = ws_read_text(sock, leftover)
    resp = json.loads(payload)
    assert resp["type"] == "suggest"
    assert resp["suggestion"]["code"]
    sock.close()


def test_service_shutdown_flushes_log(tmp_path, quick_table):
    st = fresh_state(quick_table, log_path=tmp_path / "s.jsonl")
    cfg = ServeConfig(port=0, ws_port=0)
    svc = Service(st, cfg)
    ports = queue.Queue()
    thread = threading.Thread(
        target=lambda: asyncio.run(svc.run(ready=lambda s: ports.put(s.tcp_port))),
        daemon=True,
    )
    thread.start()
    port = ports.get(timeout=10)
    c = Client(port)
    c.call({"type": "set_affect", "valence": 0.5, "arousal": 0.5})
    c.call({"type": "suggest"})
    c.close()
    svc.request_stop()
    thread.join(timeout=10)
    events = [json.loads(l)["event"] for l in (tmp_path / "s.jsonl").read_text().splitlines()]
    assert events == ["set_affect", "suggest", "shutdown"]

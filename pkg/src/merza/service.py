"""The live session listener.

Holds one trained policy plus the performer's current coordinates, and
serves the suggestion loop over two transports: newline-delimited JSON
on a local TCP socket, and the same messages in text frames on a
WebSocket endpoint for browser clients. All mutable session state lives
here; connections only read and write messages.

Message types (one JSON object per line/frame, every request gets
exactly one response):
    set_affect   {"type": "set_affect", "valence": v, "arousal": a}
    suggest      {"type": "suggest"}
    accept       {"type": "accept", "id": "..."}
    reject       {"type": "reject", "id": "..."}
    train_status {"type": "train_status"}
Unknown types and malformed payloads get {"type": "error", ...} and the
connection stays open. train_status responses carry a "trace" field
(recent reward rows, same CSV schema the trainer writes) when the
session trained its own policy, so clients can plot a sparkline.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import math
import os
import signal
import time
from dataclasses import dataclass, field
from pathlib import Path

from .affect import AffectCoordinate, ContourParams, LoudnessParams
from .assemble import AssembleConfig, Suggestion, build_suggestion
from .mininotation import (
    DEFAULT_MELODY_BANK,
    DEFAULT_RHYTHM_BANKS,
    RhythmGenConfig,
    load_soundbanks,
)
from .qlearn import QTable, TrainConfig, train

WS_ACCEPT_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


def merza_home() -> Path:
    """Data directory: $MERZA_HOME, or ~/.merza when unset."""
    return Path(os.environ.get("MERZA_HOME", "~/.merza")).expanduser()


def default_policy_path() -> Path:
    return merza_home() / "policy.bin"


@dataclass
class SessionState:
    """Everything one live session knows."""

    table: QTable | None = None
    coords: AffectCoordinate = AffectCoordinate(0.5, 0.5)
    params: LoudnessParams = field(default_factory=LoudnessParams)
    gen_cfg: RhythmGenConfig = field(default_factory=RhythmGenConfig)
    assemble_cfg: AssembleConfig = field(default_factory=AssembleConfig)
    contour: ContourParams = field(default_factory=ContourParams)
    melody_bank: object = DEFAULT_MELODY_BANK
    rhythm_banks: object = DEFAULT_RHYTHM_BANKS
    per_slot_samples: bool = False
    seed_base: int = 0
    progress: float = 0.0
    trace: object = None
    pending: dict[str, Suggestion] = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)
    log_path: Path | None = None

    _counter: int = 0
    _log_fh: object = None

    def next_seed(self) -> int:
        seed = self.seed_base + self._counter
        self._counter += 1
        return seed

    def record(self, event: str, **details) -> dict:
        entry = {"ts": time.time(), "event": event, **details}
        self.history.append(entry)
        if self.log_path is not None:
            if self._log_fh is None:
                self.log_path.parent.mkdir(parents=True, exist_ok=True)
                self._log_fh = open(self.log_path, "a")
            self._log_fh.write(json.dumps(entry, sort_keys=True) + "\n")
            self._log_fh.flush()
        return entry

    def close_log(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None


def _error(message: str, st: SessionState) -> dict:
    st.record("error", message=message)
    return {"type": "error", "ok": False, "message": message}


def _number(payload, key):
    x = payload.get(key)
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        return None
    return float(x)


def handle(msg, st: SessionState) -> dict:
    """Process one inbound message against the session, returning
    exactly one response object."""
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        return _error("message must be an object with a string 'type'", st)
    kind = msg["type"]

    if kind == "set_affect":
        v = _number(msg, "valence")
        a = _number(msg, "arousal")
        if v is None or a is None:
            return _error("set_affect needs numeric valence and arousal", st)
        st.coords = AffectCoordinate(v, a)
        st.record("set_affect", valence=st.coords.valence, arousal=st.coords.arousal)
        return {
            "type": "set_affect",
            "ok": True,
            "valence": st.coords.valence,
            "arousal": st.coords.arousal,
        }

    if kind == "suggest":
        if st.table is None:
            st.record("train_status", progress=st.progress)
            return {"type": "train_status", "ok": True, "progress": st.progress}
        seed = st.next_seed()
        suggestion, melody, rhythm = build_suggestion(
            st.table,
            st.coords,
            seed,
            params=st.params,
            gen_cfg=st.gen_cfg,
            assemble_cfg=st.assemble_cfg,
            contour=st.contour,
            melody_bank=st.melody_bank,
            rhythm_banks=st.rhythm_banks,
            per_slot_samples=st.per_slot_samples,
        )
        st.pending[suggestion.id] = suggestion
        st.record(
            "suggest",
            id=suggestion.id,
            seed=seed,
            valence=suggestion.coords.valence,
            arousal=suggestion.coords.arousal,
            code=suggestion.code,
            melody=melody,
            rhythm=rhythm,
        )
        return {
            "type": "suggest",
            "ok": True,
            "suggestion": {
                "id": suggestion.id,
                "code": suggestion.code,
                "valence": suggestion.coords.valence,
                "arousal": suggestion.coords.arousal,
                "seed": suggestion.seed,
                "loudness_db": suggestion.loudness_db,
                "pitch_register": suggestion.pitch_register,
                "mode": suggestion.mode,
            },
        }

    if kind in ("accept", "reject"):
        sid = msg.get("id")
        if not isinstance(sid, str) or sid not in st.pending:
            return _error(f"unknown suggestion id {sid!r}", st)
        st.pending.pop(sid)
        st.record(kind, id=sid)
        return {"type": kind, "ok": True, "id": sid}

    if kind == "train_status":
        st.record("train_status", progress=st.progress)
        resp = {"type": "train_status", "ok": True, "progress": st.progress}
        tail = _trace_tail(st)
        if tail is not None:
            resp["trace"] = tail
        return resp

    return _error(f"unknown message type {kind!r}", st)


def _trace_tail(st: SessionState, limit: int = 200) -> str | None:
    """Last `limit` trace rows in the same CSV schema the trainer writes,
    for clients that plot a reward sparkline. None when the policy came
    from a file rather than an in-process training run."""
    if st.trace is None or not st.trace.rewards:
        return None
    start = max(0, len(st.trace.rewards) - limit)
    lines = ["episode,cumulative_reward"]
    for i in range(start, len(st.trace.rewards)):
        lines.append(f"{i},{st.trace.rewards[i]!r}")
    return "\n".join(lines) + "\n"


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 9191
    ws_port: int | None = None  # defaults to port + 1
    policy_file: str | None = None
    train_on_start: bool = False
    train_config: TrainConfig = field(default_factory=TrainConfig)
    params: LoudnessParams = field(default_factory=LoudnessParams)
    soundbank_config: str | None = None
    seed_base: int = 0
    log_file: str | None = None


def build_state(cfg: ServeConfig) -> SessionState:
    """Resolve the policy (file, train-on-start, or the default file
    under MERZA_HOME) and assemble the session."""
    st = SessionState(params=cfg.params, seed_base=cfg.seed_base)
    if cfg.log_file is not None:
        st.log_path = Path(cfg.log_file)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        st.log_path = merza_home() / "sessions" / f"session-{stamp}.jsonl"
    if cfg.soundbank_config is not None:
        banks = load_soundbanks(cfg.soundbank_config)
        melodic = [b for b in banks if b.chromatic and b.size >= 13]
        rhythmic = [b for b in banks if not b.chromatic]
        if melodic:
            st.melody_bank = melodic[0]
            st.assemble_cfg = AssembleConfig(
                bank=melodic[0].name,
                melody_connection=st.assemble_cfg.melody_connection,
                rhythm_connection=st.assemble_cfg.rhythm_connection,
            )
        if rhythmic:
            st.rhythm_banks = rhythmic

    if cfg.policy_file is not None:
        st.table, _ = QTable.load(cfg.policy_file)
        st.progress = 1.0
    elif cfg.train_on_start:
        def update(done, total):
            st.progress = done / total if total else 1.0
        st.record("train_start", episodes=cfg.train_config.episodes)
        st.table, st.trace = train(cfg.train_config, cfg.params, progress=update)
        st.progress = 1.0
        st.record("train_done", episodes=cfg.train_config.episodes)
    elif default_policy_path().exists():
        st.table, _ = QTable.load(default_policy_path())
        st.progress = 1.0
    else:
        raise RuntimeError(
            f"no policy: pass a policy file, enable train-on-start, "
            f"or place one at {default_policy_path()}"
        )
    return st


class Service:
    """Owns the listener sockets around one SessionState. Message
    handling is serialized through one lock, so concurrent connections
    see a consistent session."""

    def __init__(self, st: SessionState, cfg: ServeConfig):
        self.st = st
        self.cfg = cfg
        self.tcp_port = None
        self.ws_port = None
        self._stop = None
        self._loop = None
        self._lock = None

    async def _respond(self, msg) -> dict:
        async with self._lock:
            return handle(msg, self.st)

    async def _tcp_client(self, reader, writer):
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                text = line.strip()
                if not text:
                    continue
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError as exc:
                    async with self._lock:
                        resp = _error(f"bad JSON: {exc.msg}", self.st)
                else:
                    resp = await self._respond(msg)
                writer.write((json.dumps(resp, sort_keys=True) + "\n").encode())
                await writer.drain()
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            writer.close()

    async def _ws_client(self, reader, writer):
        try:
            key = await _ws_handshake(reader, writer)
            if key is None:
                return
            while True:
                frame = await _ws_read_message(reader)
                if frame is None:
                    break
                opcode, payload = frame
                if opcode == 8:  # close
                    writer.write(_ws_frame(8, payload[:125]))
                    await writer.drain()
                    break
                if opcode == 9:  # ping
                    writer.write(_ws_frame(10, payload))
                    await writer.drain()
                    continue
                if opcode != 1:
                    continue
                try:
                    msg = json.loads(payload.decode())
                except (json.JSONDecodeError, UnicodeDecodeError):
                    async with self._lock:
                        resp = _error("bad JSON", self.st)
                else:
                    resp = await self._respond(msg)
                writer.write(_ws_frame(1, json.dumps(resp, sort_keys=True).encode()))
                await writer.drain()
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            writer.close()

    async def run(self, ready=None):
        self._loop = asyncio.get_running_loop()
        self._stop = asyncio.Event()
        self._lock = asyncio.Lock()
        ws_port = self.cfg.ws_port
        if ws_port is None:
            ws_port = self.cfg.port + 1 if self.cfg.port else 0
        tcp = await asyncio.start_server(self._tcp_client, self.cfg.host, self.cfg.port)
        ws = await asyncio.start_server(self._ws_client, self.cfg.host, ws_port)
        self.tcp_port = tcp.sockets[0].getsockname()[1]
        self.ws_port = ws.sockets[0].getsockname()[1]
        if ready is not None:
            ready(self)
        try:
            await self._stop.wait()
        finally:
            tcp.close()
            ws.close()
            await tcp.wait_closed()
            await ws.wait_closed()
            self.st.record("shutdown")
            self.st.close_log()

    def request_stop(self):
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set)


async def _ws_handshake(reader, writer):
    """Minimal server side of the RFC 6455 opening handshake."""
    request = await reader.readuntil(b"\r\n\r\n")
    headers = {}
    for raw in request.split(b"\r\n")[1:]:
        if b":" in raw:
            name, _, value = raw.partition(b":")
            headers[name.strip().lower()] = value.strip()
    key = headers.get(b"sec-websocket-key")
    if key is None:
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        writer.close()
        return None
    accept = base64.b64encode(
        hashlib.sha1(key + WS_ACCEPT_GUID.encode()).digest()
    )
    writer.write(
        b"HTTP/1.1 101 Switching Protocols\r\n"
        b"Upgrade: websocket\r\n"
        b"Connection: Upgrade\r\n"
        b"Sec-WebSocket-Accept: " + accept + b"\r\n\r\n"
    )
    await writer.drain()
    return key


async def _ws_read_frame(reader):
    head = await reader.readexactly(2)
    fin = bool(head[0] & 0x80)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        length = int.from_bytes(await reader.readexactly(2), "big")
    elif length == 127:
        length = int.from_bytes(await reader.readexactly(8), "big")
    mask = await reader.readexactly(4) if masked else None
    payload = await reader.readexactly(length)
    if mask:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return fin, opcode, payload


async def _ws_read_message(reader):
    """One complete message, reassembling continuation frames. None at
    end of stream."""
    try:
        fin, opcode, payload = await _ws_read_frame(reader)
    except (asyncio.IncompleteReadError, ConnectionResetError):
        return None
    parts = [payload]
    while not fin:
        try:
            fin, cont, chunk = await _ws_read_frame(reader)
        except (asyncio.IncompleteReadError, ConnectionResetError):
            return None
        if cont not in (0,):
            # control frames may interleave; answer only to data here
            if cont == 8:
                return 8, chunk
            continue
        parts.append(chunk)
    return opcode, b"".join(parts)


def _ws_frame(opcode: int, payload: bytes) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + n.to_bytes(2, "big")
    else:
        head += bytes([127]) + n.to_bytes(8, "big")
    return head + payload


def serve(cfg: ServeConfig) -> None:
    """Build the session (possibly training first), listen until a
    termination signal, then flush the session log."""
    st = build_state(cfg)
    svc = Service(st, cfg)

    async def main():
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, svc.request_stop)
            except NotImplementedError:
                pass
        await svc.run(ready=lambda s: print(
            f"ready: tcp {cfg.host}:{s.tcp_port}, websocket {cfg.host}:{s.ws_port}, "
            f"log {st.log_path}", flush=True
        ))

    asyncio.run(main())

"""Telemetry and command server for live cockpit sessions.

The simulation loop stays single-threaded and deterministic; this
module moves bytes. One frame per control interval goes out to every
connected client, and inbound command messages are queued and folded
into a manual-override snapshot that the loop polls at each interval
boundary. Wire format in both directions: a 4-byte big-endian length
prefix followed by one UTF-8 JSON object.

Outbound frame: every flight-log field plus a "particles" array of
[x, y, z] rows (ground anchor first) for rendering the tether. Clients
that fall behind lose the oldest queued frames first; the running drop
total is reported to the affected client in a status frame.

Inbound command: {"mode": "auto"} clears all manual control;
{"mode": "manual", "steering": s, "depower": d, "winch_set": v} takes
over exactly the channels present, each an absolute value. A malformed
payload earns an error frame and the session continues; a broken
length prefix closes that client alone.
"""

import json
import socket
import struct
import threading
from collections import deque
from dataclasses import asdict

import numpy as np

from .controller import ManualOverride
from .cyclelog import LogRecord
from .errors import ConfigError

_HEADER = struct.Struct(">I")

#: Upper bound on an inbound payload; beyond this the framing is junk.
MAX_COMMAND_BYTES = 65536

#: Frames queued per client before the oldest is dropped.
SEND_QUEUE_DEPTH = 64

_COMMAND_KEYS = {"mode", "steering", "depower", "winch_set"}
_RANGES = {"steering": (-1.0, 1.0), "depower": (0.0, 1.0),
           "winch_set": (-12.0, 12.0)}


def encode_frame(payload: dict) -> bytes:
    """Serialize one frame with its length prefix."""
    body = json.dumps(payload, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(len(body)) + body


def telemetry_frame(record: LogRecord, particles: np.ndarray) -> dict:
    """Build the outbound frame for one interval."""
    frame = asdict(record)
    frame["particles"] = np.asarray(particles, dtype=float).round(4) \
        .tolist()
    return frame


def parse_command(payload: bytes) -> ManualOverride | None:
    """Validate one inbound command payload.

    Returns:
        The override snapshot for manual mode, or None for auto mode.

    Raises:
        ConfigError: The payload is not a valid command object.
    """
    try:
        data = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("command is not valid JSON",
                          detail=str(exc)) from exc
    if not isinstance(data, dict):
        raise ConfigError("command must be a JSON object",
                          got=type(data).__name__)
    unknown = set(data) - _COMMAND_KEYS
    if unknown:
        raise ConfigError("unknown command key", key=sorted(unknown)[0])
    mode = data.get("mode")
    if mode not in ("auto", "manual"):
        raise ConfigError("command mode must be 'auto' or 'manual'",
                          mode=mode)
    if mode == "auto":
        return None
    values = {}
    for key, (lo, hi) in _RANGES.items():
        if key not in data:
            values[key] = None
            continue
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("command channel must be a number",
                              key=key, got=type(value).__name__)
        if not lo <= float(value) <= hi:
            raise ConfigError("command channel out of range", key=key,
                              value=float(value), lo=lo, hi=hi)
        values[key] = float(value)
    return ManualOverride(steering=values["steering"],
                          depower=values["depower"],
                          winch=values["winch_set"])


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    """Read exactly n bytes, or None on a closed connection."""
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


class _Client:
    """One connected cockpit: its socket, send queue and drop count."""

    def __init__(self, sock: socket.socket, peer: str):
        self.sock = sock
        self.peer = peer
        self.queue: deque[bytes] = deque()
        self.cond = threading.Condition()
        self.drops = 0
        self.reported_drops = 0
        self.closed = False

    def enqueue(self, data: bytes):
        with self.cond:
            if self.closed:
                return
            if len(self.queue) >= SEND_QUEUE_DEPTH:
                self.queue.popleft()
                self.drops += 1
            self.queue.append(data)
            self.cond.notify()

    def close(self):
        with self.cond:
            if self.closed:
                return
            self.closed = True
            self.cond.notify()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class TelemetryServer:
    """Threaded frame publisher and command receiver.

    The simulation thread calls :meth:`publish` once per interval and
    :meth:`poll_override` at interval boundaries; all socket work runs
    on daemon threads so a stalled or vanished client never blocks the
    loop.
    """

    def __init__(self, port: int, host: str = "127.0.0.1"):
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(4)
        self.port = self._listener.getsockname()[1]
        self._clients: list[_Client] = []
        self._lock = threading.Lock()
        self._override: ManualOverride | None = None
        self._closing = False
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)
        self._accept_thread.start()

    # -- simulation-thread API -----------------------------------------

    def publish(self, record: LogRecord, particles: np.ndarray):
        """Queue one telemetry frame to every connected client."""
        data = encode_frame(telemetry_frame(record, particles))
        with self._lock:
            clients = list(self._clients)
        for client in clients:
            client.enqueue(data)
            if client.drops != client.reported_drops:
                client.reported_drops = client.drops
                client.enqueue(encode_frame({"drops": client.drops}))

    def poll_override(self) -> ManualOverride | None:
        """Manual override in force, from the newest accepted command."""
        with self._lock:
            return self._override

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)

    @property
    def total_drops(self) -> int:
        with self._lock:
            return sum(c.drops for c in self._clients)

    def close(self):
        """Stop accepting, drop every client, release the port."""
        self._closing = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            clients = list(self._clients)
            self._clients.clear()
        for client in clients:
            client.close()

    # -- socket threads --------------------------------------------------

    def _accept_loop(self):
        while not self._closing:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            client = _Client(sock, f"{addr[0]}:{addr[1]}")
            with self._lock:
                self._clients.append(client)
            threading.Thread(target=self._writer_loop, args=(client,),
                             daemon=True).start()
            threading.Thread(target=self._reader_loop, args=(client,),
                             daemon=True).start()

    def _drop_client(self, client: _Client):
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)
        client.close()

    def _writer_loop(self, client: _Client):
        while True:
            with client.cond:
                while not client.queue and not client.closed:
                    client.cond.wait()
                if client.closed:
                    return
                data = client.queue.popleft()
            try:
                client.sock.sendall(data)
            except OSError:
                self._drop_client(client)
                return

    def _reader_loop(self, client: _Client):
        sock = client.sock
        while True:
            try:
                header = _recv_exact(sock, _HEADER.size)
                if header is None:
                    self._drop_client(client)
                    return
                (length,) = _HEADER.unpack(header)
                if length > MAX_COMMAND_BYTES:
                    # Framing is beyond recovery; cut this client loose.
                    client.enqueue(encode_frame(
                        {"error": "oversized command frame"}))
                    self._drop_client(client)
                    return
                payload = _recv_exact(sock, length)
                if payload is None:
                    self._drop_client(client)
                    return
            except OSError:
                self._drop_client(client)
                return
            try:
                override = parse_command(payload)
            except ConfigError as exc:
                client.enqueue(encode_frame({"error": str(exc)}))
                continue
            with self._lock:
                self._override = override

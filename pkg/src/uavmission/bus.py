"""Deterministic in-process message bus.

Requests are queued and dispatched by :meth:`Bus.pump`; the requester gets a
:class:`Pending` handle (and an optional callback) instead of blocking.
Timeouts are counted in simulation ticks.  Every envelope that crosses the
bus is passed to the ``log`` hook, so a run's traffic can be rebuilt from its
mission log.
"""
from __future__ import annotations

import json
import socket
import struct
from collections import defaultdict, deque
from dataclasses import asdict, dataclass
from typing import Any, Callable

DEFAULT_TIMEOUT = 200

REQUEST, RESPONSE, EVENT = "request", "response", "event"


class BusError(RuntimeError):
    pass


class DuplicateServiceError(BusError):
    pass


class NoSuchServiceError(BusError):
    pass


class RequestTimeout(BusError):
    def __init__(self, service: str, elapsed: int):
        super().__init__(f"request to {service!r} timed out after {elapsed} ticks")
        self.service = service
        self.elapsed = elapsed


class HandlerFault(BusError):
    def __init__(self, service: str, diagnostic: str):
        super().__init__(f"handler for {service!r} failed: {diagnostic}")
        self.service = service
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class Envelope:
    msg_id: int
    correlation_id: int | None
    kind: str
    service: str
    sender: str
    payload: Any
    tick: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Envelope":
        return cls(int(d["msg_id"]), d["correlation_id"], d["kind"], d["service"], d["sender"],
                   d["payload"], int(d["tick"]))

    @property
    def error(self) -> dict | None:
        if self.kind == RESPONSE and isinstance(self.payload, dict):
            return self.payload.get("error")
        return None


def response_result(env: Envelope):
    """Payload of a successful response; raises the matching bus error otherwise."""
    err = env.error
    if err is None:
        return env.payload
    code = err.get("code")
    if code == "timeout":
        raise RequestTimeout(env.service, int(err.get("elapsed", 0)))
    if code == "no-such-service":
        raise NoSuchServiceError(f"no service named {env.service!r}")
    raise HandlerFault(env.service, str(err.get("diagnostic", "")))


@dataclass(frozen=True)
class Deferred:
    """Handler return value: deliver ``payload`` ``latency`` ticks from now."""

    payload: Any
    latency: int = 1


@dataclass
class Pending:
    request: Envelope
    deadline: int
    callback: Callable[[Envelope], None] | None = None
    response: Envelope | None = None

    @property
    def done(self) -> bool:
        return self.response is not None

    def result(self):
        if self.response is None:
            raise BusError("response not delivered yet")
        return response_result(self.response)


@dataclass
class BusStats:
    published: int = 0
    delivered: int = 0
    dropped_no_subscriber: int = 0
    requests: int = 0
    responses: int = 0
    timeouts: int = 0
    faults: int = 0


@dataclass(frozen=True)
class Registration:
    service: str
    handler: Callable


class Bus:
    def __init__(self, log: Callable[[Envelope], None] | None = None):
        self.tick = 0
        self.stats = BusStats()
        self._log = log
        self._next_id = 1
        self._services: dict[str, Registration] = {}
        self._subs: dict[str, list[Callable]] = defaultdict(list)
        self._queue: deque[tuple[str, Envelope]] = deque()
        self._scheduled: list[tuple[int, int, Pending, Any]] = []
        self._pending: dict[int, Pending] = {}

    # registration -----------------------------------------------------------
    def register(self, service: str, handler: Callable[[Envelope], Any]) -> Registration:
        if service in self._services:
            raise DuplicateServiceError(f"service {service!r} is already registered")
        reg = Registration(service, handler)
        self._services[service] = reg
        return reg

    def unregister(self, service: str | Registration) -> None:
        name = service.service if isinstance(service, Registration) else service
        self._services.pop(name, None)

    def subscribe(self, topic: str, callback: Callable[[Envelope], None]) -> Callable[[], None]:
        self._subs[topic].append(callback)
        return lambda: self._subs[topic].remove(callback)

    # traffic ----------------------------------------------------------------
    def _envelope(self, kind, service, sender, payload, correlation=None) -> Envelope:
        env = Envelope(self._next_id, correlation, kind, service, sender, payload, self.tick)
        self._next_id += 1
        if self._log is not None:
            self._log(env)
        return env

    def publish(self, topic: str, payload: Any, sender: str = "") -> Envelope:
        env = self._envelope(EVENT, topic, sender, payload)
        self.stats.published += 1
        self._queue.append(("event", env))
        return env

    def request(self, service: str, payload: Any, sender: str = "", timeout: int = DEFAULT_TIMEOUT,
                callback: Callable[[Envelope], None] | None = None) -> Pending:
        if timeout < 0:
            raise ValueError("timeout must be non-negative")
        env = self._envelope(REQUEST, service, sender, payload)
        self.stats.requests += 1
        pending = Pending(env, self.tick + timeout, callback)
        self._pending[env.msg_id] = pending
        self._queue.append(("request", env))
        return pending

    def outstanding(self) -> list[Pending]:
        return list(self._pending.values())

    def _respond(self, pending: Pending, payload: Any) -> None:
        if pending.request.msg_id not in self._pending:
            return  # already answered, e.g. by a timeout
        del self._pending[pending.request.msg_id]
        env = self._envelope(RESPONSE, pending.request.service, pending.request.service, payload,
                             pending.request.msg_id)
        self.stats.responses += 1
        pending.response = env
        if pending.callback is not None:
            pending.callback(env)

    def _dispatch(self, kind: str, env: Envelope) -> None:
        if kind == "event":
            subs = list(self._subs.get(env.service, ()))
            if not subs:
                self.stats.dropped_no_subscriber += 1
            else:
                self.stats.delivered += 1
            for cb in subs:
                cb(env)
            return
        pending = self._pending.get(env.msg_id)
        if pending is None:
            return
        reg = self._services.get(env.service)
        if reg is None:
            self._respond(pending, {"error": {"code": "no-such-service", "service": env.service}})
            return
        try:
            out = reg.handler(env)
        except Exception as exc:  # a handler fault becomes a response, never a crash
            self.stats.faults += 1
            self._respond(pending, {"error": {"code": "fault", "diagnostic": f"{type(exc).__name__}: {exc}"}})
            return
        if isinstance(out, Deferred):
            self._scheduled.append((self.tick + max(0, out.latency), env.msg_id, pending, out.payload))
        else:
            self._respond(pending, out)

    def pump(self) -> int:
        """Deliver everything due at the current tick, then expire overdue requests.

        Returns the number of messages handled.
        """
        n = 0
        while True:
            n += self._drain()
            if not self._expire() and not self._queue:
                return n

    def _drain(self) -> int:
        n = 0
        while True:
            due = sorted((s for s in self._scheduled if s[0] <= self.tick), key=lambda s: (s[0], s[1]))
            if due:
                self._scheduled = [s for s in self._scheduled if s[0] > self.tick]
                for _, _, pending, payload in due:
                    self._respond(pending, payload)
                    n += 1
            elif not self._queue:
                return n
            while self._queue:
                kind, env = self._queue.popleft()
                self._dispatch(kind, env)
                n += 1

    def _expire(self) -> int:
        expired = 0
        for mid in sorted(self._pending):
            p = self._pending.get(mid)
            if p is None or self.tick < p.deadline:
                continue
            self._scheduled = [s for s in self._scheduled if s[1] != mid]
            self.stats.timeouts += 1
            expired += 1
            self._respond(p, {"error": {"code": "timeout", "elapsed": self.tick - p.request.tick}})
        return expired

    def advance(self, tick: int | None = None) -> int:
        """Move the bus clock forward (to ``tick`` or by one) and pump."""
        new = self.tick + 1 if tick is None else tick
        if new < self.tick:
            raise ValueError("bus clock cannot run backwards")
        self.tick = new
        return self.pump()


# wire form for an optional socket transport --------------------------------

def encode(env: Envelope) -> bytes:
    body = json.dumps(env.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def decode(data: bytes) -> tuple[Envelope, bytes]:
    """Decode one frame; returns the envelope and any trailing bytes."""
    if len(data) < 4:
        raise BusError("truncated frame header")
    (n,) = struct.unpack(">I", data[:4])
    if len(data) < 4 + n:
        raise BusError("truncated frame body")
    return Envelope.from_dict(json.loads(data[4:4 + n].decode("utf-8"))), data[4 + n:]


def send_envelope(sock: socket.socket, env: Envelope) -> None:
    sock.sendall(encode(env))


def recv_envelope(sock: socket.socket) -> Envelope:
    def read(k: int) -> bytes:
        buf = b""
        while len(buf) < k:
            chunk = sock.recv(k - len(buf))
            if not chunk:
                raise BusError("connection closed mid-frame")
            buf += chunk
        return buf

    head = read(4)
    (n,) = struct.unpack(">I", head)
    return decode(head + read(n))[0]

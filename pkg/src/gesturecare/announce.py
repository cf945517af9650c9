"""Wire protocol and daemons that carry need announcements to a remote receiver.

One announcement is one ASCII line:

    ANNOUNCE v1 seq=<n> ts=<iso8601> patient=<token> gesture=<id> conf=<d.ddd> msg="<escaped>"

The receiver answers ``ACK <seq>`` or ``ERR 0 BADMSG``. The client sends
at-least-once (retry with backoff, then an on-disk spool); the receiver
deduplicates on (patient, seq); together that yields an exactly-once
announcement effect.
"""

from __future__ import annotations

import errno
import logging
import os
import re
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone

log = logging.getLogger(__name__)

DEFAULT_PORT = 7460

_TS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")
_PREFIX_RE = re.compile(
    r"^ANNOUNCE v1 seq=(\d+) ts=(\S+) patient=(\S+) gesture=(\d+) conf=(\d\.\d{3}) msg="
)


class InvalidField(ValueError):
    """Announcement field violates the wire contract."""


class Malformed(ValueError):
    """Received line does not parse; the receiver answers ERR."""


class PortInUse(OSError):
    pass


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Announcement:
    seq: int
    ts: str  # ISO-8601 UTC with seconds, e.g. 2012-12-07T10:00:00Z
    patient: str
    gesture: int
    conf: float
    msg: str

    def __post_init__(self):
        if self.seq < 0 or self.seq >= 2**64:
            raise InvalidField(f"seq {self.seq} out of 64-bit range")
        if not _TS_RE.match(self.ts):
            raise InvalidField(f"ts {self.ts!r} is not ISO-8601 seconds UTC")
        if not self.patient or len(self.patient) > 64:
            raise InvalidField("patient token must be 1..64 chars")
        if any(c.isspace() for c in self.patient):
            raise InvalidField(f"patient {self.patient!r} contains whitespace")
        if self.gesture < 0:
            raise InvalidField("gesture id must be >= 0")
        # conf travels with exactly 3 decimals; quantize here so that
        # decode(encode(a)) == a over the whole valid space
        q = float(f"{self.conf:.3f}")
        if not (0.0 <= q <= 1.0):
            raise InvalidField(f"conf {self.conf} outside [0, 1]")
        object.__setattr__(self, "conf", q)


def _escape_msg(msg: str) -> str:
    return msg.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def encode_announcement(a: Announcement) -> bytes:
    """One newline-terminated line; the only raw newline is the terminator."""
    line = (
        f"ANNOUNCE v1 seq={a.seq} ts={a.ts} patient={a.patient} "
        f'gesture={a.gesture} conf={a.conf:.3f} msg="{_escape_msg(a.msg)}"\n'
    )
    return line.encode("utf-8")


def decode_announcement(line: bytes) -> Announcement:
    """Strict inverse of encode: fixed field order, no trailing bytes."""
    try:
        text = line.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise Malformed(f"not utf-8: {exc}") from None
    if text.endswith("\n"):
        text = text[:-1]
    if "\n" in text:
        raise Malformed("embedded raw newline")
    m = _PREFIX_RE.match(text)
    if not m:
        raise Malformed("header fields missing or out of order")
    rest = text[m.end() :]
    if not rest.startswith('"'):
        raise Malformed("msg value must be quoted")
    out = []
    i = 1
    closed = False
    while i < len(rest):
        ch = rest[i]
        if ch == "\\":
            nxt = rest[i + 1 : i + 2]
            if nxt == "\\":
                out.append("\\")
            elif nxt == '"':
                out.append('"')
            elif nxt == "n":
                out.append("\n")
            else:
                raise Malformed(f"bad escape \\{nxt}")
            i += 2
        elif ch == '"':
            closed = True
            i += 1
            break
        else:
            out.append(ch)
            i += 1
    if not closed:
        raise Malformed("unterminated msg quote")
    if rest[i:]:
        raise Malformed(f"trailing bytes after msg: {rest[i:]!r}")
    try:
        return Announcement(
            seq=int(m.group(1)),
            ts=m.group(2),
            patient=m.group(3),
            gesture=int(m.group(4)),
            conf=float(m.group(5)),
            msg="".join(out),
        )
    except InvalidField as exc:
        raise Malformed(str(exc)) from None


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoffs: tuple[float, ...] = (0.5, 1.0, 2.0)
    timeout: float = 2.0


DEFAULT_RETRY_POLICY = RetryPolicy()


@dataclass(frozen=True)
class Delivered:
    ack_seq: int


@dataclass(frozen=True)
class Failed:
    cause: str  # "connect" | "timeout" | "protocol"
    spooled_to: str | None = None


def _recv_line(sock: socket.socket) -> bytes:
    buf = bytearray()
    while not buf.endswith(b"\n"):
        chunk = sock.recv(4096)
        if not chunk:
            break
        buf.extend(chunk)
    return bytes(buf)


def _attempt(dest: tuple[str, int], line: bytes, timeout: float) -> tuple[bool, str, bytes]:
    try:
        with socket.create_connection(dest, timeout=timeout) as sock:
            sock.settimeout(timeout)
            sock.sendall(line)
            resp = _recv_line(sock)
            return True, "", resp
    except socket.timeout:
        return False, "timeout", b""
    except OSError:
        return False, "connect", b""


def send_with_retry(
    dest: tuple[str, int],
    a: Announcement,
    policy: RetryPolicy = DEFAULT_RETRY_POLICY,
    spool_path=None,
) -> Delivered | Failed:
    """Deliver one announcement, retrying with backoff.

    A response is only accepted as ``ACK <seq>`` with the matching sequence
    number. After the final failed attempt the encoded line is appended to
    the spool file (when one is configured) so the event survives restarts.
    """
    line = encode_announcement(a)
    cause = "connect"
    for attempt in range(policy.attempts):
        ok, cause, resp = _attempt(dest, line, policy.timeout)
        if ok:
            text = resp.decode("ascii", "replace").strip()
            if text == f"ACK {a.seq}":
                return Delivered(ack_seq=a.seq)
            cause = "protocol"
            log.warning("announce seq=%d got %r, retrying", a.seq, text)
        if attempt < policy.attempts - 1:
            time.sleep(policy.backoffs[min(attempt, len(policy.backoffs) - 1)])
    if spool_path is not None:
        with open(spool_path, "ab") as f:
            f.write(line)
        log.error("announce seq=%d failed (%s); spooled to %s", a.seq, cause, spool_path)
        return Failed(cause=cause, spooled_to=str(spool_path))
    log.error("announce seq=%d failed (%s); no spool configured", a.seq, cause)
    return Failed(cause=cause)


def replay_spool(
    dest: tuple[str, int], spool_path, policy: RetryPolicy = DEFAULT_RETRY_POLICY
) -> tuple[int, int]:
    """Resend every spooled line; still-failing lines are spooled again.

    Returns (delivered, failed) counts. Receiver-side dedup keeps replays
    harmless even if an earlier send actually got through.
    """
    if not os.path.exists(spool_path):
        return (0, 0)
    with open(spool_path, "rb") as f:
        lines = [ln for ln in f.read().split(b"\n") if ln]
    with open(spool_path, "wb"):
        pass
    delivered = failed = 0
    for raw in lines:
        try:
            a = decode_announcement(raw + b"\n")
        except Malformed as exc:
            log.error("dropping malformed spool line: %s", exc)
            continue
        result = send_with_retry(dest, a, policy, spool_path=spool_path)
        if isinstance(result, Delivered):
            delivered += 1
        else:
            failed += 1
    return delivered, failed


@dataclass(frozen=True)
class ReceiverRecord:
    announcement: Announcement
    received_at: str
    duplicate: bool


def format_receiver_log_line(record: ReceiverRecord, original_line: str) -> str:
    tag = "DUP" if record.duplicate else "NEW"
    return f"{record.received_at} {tag} {original_line}\n"


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: AnnouncementReceiver = self.server.owner  # type: ignore[attr-defined]
        try:
            for raw in self.rfile:
                reply = server.handle_line(raw)
                self.wfile.write(reply)
                self.wfile.flush()
        except OSError:
            pass  # a dying connection must not take the daemon down


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class AnnouncementReceiver:
    """Accepts announcement lines, logs them, and prints each new one.

    Duplicates (same patient and seq as an already-logged line) are ACKed
    and logged with DUP but announced only once. Log appends and the
    duplicate set are serialized through one lock.
    """

    def __init__(self, port: int, log_path, host: str = "127.0.0.1", announce_fn=None):
        self.log_path = log_path
        self.announce_fn = announce_fn if announce_fn is not None else self._default_announce
        self._seen: set[tuple[str, int]] = set()
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None
        try:
            self._server = _Server((host, port), _Handler)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {port} is already in use") from None
            raise
        self._server.owner = self

    @staticmethod
    def _default_announce(msg: str) -> None:
        print(msg, flush=True)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def handle_line(self, raw: bytes) -> bytes:
        try:
            a = decode_announcement(raw)
        except Malformed as exc:
            log.info("malformed line rejected: %s", exc)
            return b"ERR 0 BADMSG\n"
        key = (a.patient, a.seq)
        with self._lock:
            duplicate = key in self._seen
            self._seen.add(key)
            record = ReceiverRecord(a, utc_now_iso(), duplicate)
            with open(self.log_path, "a", encoding="utf-8") as f:
                f.write(format_receiver_log_line(record, raw.decode("utf-8").rstrip("\n")))
            if not duplicate:
                self.announce_fn(a.msg)
        return f"ACK {a.seq}\n".encode("ascii")

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def serve(port: int, log_path, host: str = "127.0.0.1") -> None:
    """Run the receiver until interrupted."""
    receiver = AnnouncementReceiver(port, log_path, host=host)
    log.info("receiver listening on %s:%d, log %s", host, receiver.port, log_path)
    try:
        receiver.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        receiver._server.server_close()

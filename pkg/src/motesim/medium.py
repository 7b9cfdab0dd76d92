"""Unit-disk radio medium, link framing, duty cycling, and transport services.

Two transports ride on the raw frame layer: a connection-oriented reliable
stream (stop-and-wait with retransmission) and a fire-and-forget datagram
service. Every frame burns sender TX airtime and listener RX airtime whether
or not it is delivered.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .energy import CpuState, Domain, EnergestLedger, RadioState
from .engine import RTIMER_HZ, Engine, TickTime, seconds_to_ticks

# CC2420-class radio bit rate.
RADIO_RATE_BPS = 250_000

BROADCAST = "*"


class FrameTooLarge(ValueError):
    pass


class StreamStateError(RuntimeError):
    pass


def airtime_ticks(length_bytes: int) -> int:
    """On-air duration of a frame in ticks at 250 kbps, rounded up; 0 bytes -> 0."""
    if length_bytes < 0:
        raise ValueError("length_bytes must be non-negative")
    return -(-(length_bytes * 8 * RTIMER_HZ) // RADIO_RATE_BPS)


@dataclass(frozen=True)
class Overheads:
    """Per-frame byte overheads; sizes matter relatively, not absolutely."""

    link_bytes: int = 9
    datagram_bytes: int = 21
    stream_bytes: int = 41
    mtu_bytes: int = 127


@dataclass(frozen=True)
class DutyCycleConfig:
    """Periodic radio wake-ups: check_rate_hz listen windows per second."""

    enabled: bool = True
    check_rate_hz: int = 8
    check_duration_ticks: int = 32


@dataclass(frozen=True)
class CpuCostModel:
    """CPU-active ticks charged per frame processed, on send and on receive."""

    ticks_per_message: int = 30
    ticks_per_byte: int = 2

    def frame_cost(self, frame: "RadioFrame", link_overhead_bytes: int) -> int:
        pdu = frame.length_bytes - link_overhead_bytes
        return self.ticks_per_message + self.ticks_per_byte * pdu


@dataclass
class LinkModel:
    """Unit disk graph: delivery is possible only within range_m."""

    range_m: float = 50.0
    tx_success: float = 1.0
    rx_success: float = 1.0
    positions: dict[str, tuple[float, float]] = field(default_factory=dict)

    def distance(self, a: str, b: str) -> float:
        ax, ay = self.positions[a]
        bx, by = self.positions[b]
        return math.hypot(ax - bx, ay - by)

    def in_range(self, a: str, b: str) -> bool:
        return self.distance(a, b) <= self.range_m

    # Probability 1.0 (or 0.0) short-circuits without consuming a random draw,
    # so loss-free runs are reproducible independently of the RNG stream.
    def tx_passes(self, rng) -> bool:
        if self.tx_success >= 1.0:
            return True
        if self.tx_success <= 0.0:
            return False
        return rng.random() < self.tx_success

    def rx_passes(self, rng) -> bool:
        if self.rx_success >= 1.0:
            return True
        if self.rx_success <= 0.0:
            return False
        return rng.random() < self.rx_success


@dataclass(frozen=True)
class RadioFrame:
    """One on-air frame; length_bytes includes the link-layer overhead."""

    src: str
    dst: str
    length_bytes: int
    payload: object


@dataclass(frozen=True)
class Datagram:
    data: bytes


@dataclass
class StreamSegment:
    """Stream transport unit: control (syn/synack/ack/fin) or data."""

    kind: str
    conn_id: int
    seq: int = 0
    data: bytes = b""


HANDSHAKE_ACK = -1


@dataclass
class StreamConn:
    """Stop-and-wait connection endpoint state."""

    conn_id: int
    local: str
    peer: str
    initiator: bool
    state: str = "CLOSED"  # CLOSED, SYN_SENT, ESTABLISHED, CLOSING
    send_seq: int = 0
    recv_next: int = 0
    inflight: Optional[StreamSegment] = None
    retries_left: int = 0
    rto_event: int = 0
    sendq: deque = field(default_factory=deque)


class RadioMedium:
    """Node registry plus the broadcast propagation rule."""

    def __init__(self, engine: Engine, link: LinkModel, overheads: Overheads = Overheads()):
        self.engine = engine
        self.link = link
        self.overheads = overheads
        self.nodes: dict[str, "Node"] = {}
        self.conn_ids = itertools.count(1)

    def add_node(self, node: "Node") -> None:
        if node.node_id not in self.link.positions:
            raise ValueError(f"no position for node {node.node_id!r}")
        self.nodes[node.node_id] = node

    def broadcast(self, frame: RadioFrame, now: TickTime) -> list[str]:
        """Propagate a frame already on air; returns ids of receiving nodes.

        Every in-range listener accrues RX for the airtime span; the frame is
        delivered only to its addressee (or everyone, for broadcast) and only
        when the success draws pass. Loss burns energy on both sides.
        """
        air = airtime_ticks(frame.length_bytes)
        tx_ok = self.link.tx_passes(self.engine.rng)
        delivered = []
        for node_id, node in self.nodes.items():
            if node_id == frame.src:
                continue
            if not self.link.in_range(frame.src, node_id):
                continue
            if not node.hear(now, air):
                continue
            if frame.dst not in (node_id, BROADCAST):
                continue
            if not tx_ok or not self.link.rx_passes(self.engine.rng):
                continue
            delivered.append(node_id)
            self.engine.call_at(now + air, node.deliver, frame)
        return delivered


class Node:
    """A radio endpoint: energy ledger, duty cycling, send pipeline, transports.

    Outbound frames are serialized: each one first occupies the CPU for its
    processing cost, then the radio for its airtime. Inbound frames charge the
    same CPU cost at delivery before the payload reaches a transport.
    """

    def __init__(
        self,
        node_id: str,
        engine: Engine,
        medium: RadioMedium,
        duty: DutyCycleConfig = DutyCycleConfig(),
        cpu_cost: CpuCostModel = CpuCostModel(),
        stream_rto_s: float = 0.5,
        stream_max_retries: int = 3,
    ):
        self.node_id = node_id
        self.engine = engine
        self.medium = medium
        self.duty = duty
        self.cpu_cost = cpu_cost
        self.ledger = EnergestLedger()
        self.ledger.transition(Domain.CPU, CpuState.LPM, engine.now)
        self.sent_frames: list[RadioFrame] = []
        self.streams = StreamTransport(self, stream_rto_s, stream_max_retries)
        self.datagrams = DatagramTransport(self)
        self._outbox: deque[RadioFrame] = deque()
        self._pipeline_busy = False
        self._cpu_busy_until: TickTime = 0
        self._tx_until: TickTime = 0
        self._check_until: TickTime = 0
        self._rx_hold_until: TickTime = 0
        medium.add_node(self)
        if duty.enabled:
            if duty.check_rate_hz <= 0 or RTIMER_HZ % duty.check_rate_hz != 0:
                raise ValueError("check_rate_hz must evenly divide the tick rate")
            self._check_period = RTIMER_HZ // duty.check_rate_hz
            engine.call_at(engine.now, self._run_check)
        else:
            self.ledger.transition(Domain.RADIO, RadioState.RX, engine.now)

    # -- outbound pipeline ------------------------------------------------

    def send_frame(self, frame: RadioFrame) -> None:
        if frame.length_bytes > self.medium.overheads.mtu_bytes:
            raise FrameTooLarge(
                f"frame of {frame.length_bytes} B exceeds MTU "
                f"{self.medium.overheads.mtu_bytes} B"
            )
        self._outbox.append(frame)
        self._pump()

    def _pump(self) -> None:
        if self._pipeline_busy or not self._outbox:
            return
        self._pipeline_busy = True
        frame = self._outbox.popleft()
        cost = self.cpu_cost.frame_cost(frame, self.medium.overheads.link_bytes)
        end = self.charge_cpu(cost)
        self.engine.call_at(end, self._start_tx, frame)

    def _start_tx(self, frame: RadioFrame) -> None:
        now = self.engine.now
        if self._rx_hold_until > now:
            # an inbound frame is mid-air; transmit after it completes
            self.engine.call_at(self._rx_hold_until, self._start_tx, frame)
            return
        air = airtime_ticks(frame.length_bytes)
        self._check_until = min(self._check_until, now)  # abort any idle check
        self.ledger.transition(Domain.RADIO, RadioState.TX, now)
        self._tx_until = now + air
        self.sent_frames.append(frame)
        self.medium.broadcast(frame, now)
        self.engine.call_at(self._tx_until, self._end_tx)

    def _end_tx(self) -> None:
        now = self.engine.now
        if not self.duty.enabled:
            next_state = RadioState.RX
        elif self._rx_hold_until > now or self._check_until > now:
            next_state = RadioState.RX
        else:
            next_state = RadioState.OFF
        self.ledger.transition(Domain.RADIO, next_state, now)
        self._pipeline_busy = False
        self._pump()

    # -- inbound path ------------------------------------------------------

    def hear(self, now: TickTime, air: int) -> bool:
        """Accrue RX for a frame spanning [now, now + air); False if deaf (mid-TX)."""
        if self._tx_until > now:
            return False
        if self.ledger.radio_state is not RadioState.RX:
            self.ledger.transition(Domain.RADIO, RadioState.RX, now)
        end = now + air
        if end > self._rx_hold_until:
            self._rx_hold_until = end
            self.engine.call_at(end, self._maybe_radio_off)
        return True

    def deliver(self, frame: RadioFrame) -> None:
        """Frame fully received: charge CPU, then hand the payload up."""
        cost = self.cpu_cost.frame_cost(frame, self.medium.overheads.link_bytes)
        end = self.charge_cpu(cost)
        self.engine.call_at(end, self._dispatch_frame, frame)

    def _dispatch_frame(self, frame: RadioFrame) -> None:
        payload = frame.payload
        if isinstance(payload, StreamSegment):
            self.streams.on_segment(frame.src, payload)
        elif isinstance(payload, Datagram):
            self.datagrams.on_frame(frame.src, payload.data)

    # -- duty cycling ------------------------------------------------------

    def _run_check(self) -> None:
        now = self.engine.now
        self.engine.call_at(now + self._check_period, self._run_check)
        if self._outbox or self._pipeline_busy or self._tx_until > now:
            return  # pending outbound traffic preempts the check
        if self.ledger.radio_state is not RadioState.OFF:
            return  # already listening
        self.ledger.transition(Domain.RADIO, RadioState.RX, now)
        self._check_until = now + self.duty.check_duration_ticks
        self.engine.call_at(self._check_until, self._maybe_radio_off)

    def _maybe_radio_off(self) -> None:
        now = self.engine.now
        if not self.duty.enabled:
            return
        if self.ledger.radio_state is not RadioState.RX:
            return
        if self._check_until > now or self._rx_hold_until > now:
            return
        self.ledger.transition(Domain.RADIO, RadioState.OFF, now)

    # -- CPU accounting ----------------------------------------------------

    def charge_cpu(self, ticks: int) -> TickTime:
        """Occupy the CPU for `ticks`, queued behind any current busy window.

        Returns the tick at which this charge completes. Windows coalesce:
        the CPU stays ACTIVE from the first charge until the queue drains.
        """
        now = self.engine.now
        start = max(now, self._cpu_busy_until)
        if start == now and self.ledger.cpu_state is CpuState.LPM:
            self.ledger.transition(Domain.CPU, CpuState.ACTIVE, now)
        end = start + ticks
        self._cpu_busy_until = end
        self.engine.call_at(end, self._cpu_window_end)
        return end

    def _cpu_window_end(self) -> None:
        now = self.engine.now
        if now >= self._cpu_busy_until and self.ledger.cpu_state is CpuState.ACTIVE:
            self.ledger.transition(Domain.CPU, CpuState.LPM, now)


class DatagramTransport:
    """Connectionless send/receive; no acknowledgment, no retransmission."""

    def __init__(self, node: Node):
        self.node = node
        self.on_datagram: Optional[Callable[[str, bytes], None]] = None

    def send(self, dst: str, payload: bytes) -> None:
        over = self.node.medium.overheads
        length = len(payload) + over.datagram_bytes + over.link_bytes
        frame = RadioFrame(self.node.node_id, dst, length, Datagram(payload))
        self.node.send_frame(frame)

    def on_frame(self, src: str, data: bytes) -> None:
        if self.on_datagram is not None:
            self.on_datagram(src, data)


class StreamTransport:
    """Reliable in-order byte stream: 3-segment handshake, stop-and-wait data
    with per-segment ACKs, fixed retransmission timeout, FIN/ACK close."""

    def __init__(self, node: Node, rto_s: float = 0.5, max_retries: int = 3):
        self.node = node
        self.rto_ticks = seconds_to_ticks(rto_s)
        self.max_retries = max_retries
        self.conns: dict[int, StreamConn] = {}
        self.accepting = True
        self.on_established: Optional[Callable[[StreamConn], None]] = None
        self.on_data: Optional[Callable[[StreamConn, bytes], None]] = None
        self.on_closed: Optional[Callable[[StreamConn], None]] = None
        self.on_failed: Optional[Callable[[StreamConn, str], None]] = None

    # -- application surface ------------------------------------------------

    def connect(self, dst: str) -> StreamConn:
        conn = StreamConn(
            conn_id=next(self.node.medium.conn_ids),
            local=self.node.node_id,
            peer=dst,
            initiator=True,
            state="SYN_SENT",
        )
        self.conns[conn.conn_id] = conn
        syn = StreamSegment("syn", conn.conn_id)
        conn.sendq.append(syn)
        self._try_send(conn)
        return conn

    def send(self, conn: StreamConn, payload: bytes) -> None:
        if conn.state != "ESTABLISHED":
            raise StreamStateError(f"send on {conn.state} connection")
        over = self.node.medium.overheads
        mss = over.mtu_bytes - over.link_bytes - over.stream_bytes
        for start in range(0, len(payload), mss):
            seg = StreamSegment(
                "data", conn.conn_id, conn.send_seq, payload[start : start + mss]
            )
            conn.send_seq += 1
            conn.sendq.append(seg)
        self._try_send(conn)

    def close(self, conn: StreamConn) -> None:
        if conn.state not in ("ESTABLISHED", "SYN_SENT"):
            return
        conn.state = "CLOSING"
        fin = StreamSegment("fin", conn.conn_id, conn.send_seq)
        conn.send_seq += 1
        conn.sendq.append(fin)
        self._try_send(conn)

    # -- reliable machinery --------------------------------------------------

    def _try_send(self, conn: StreamConn) -> None:
        if conn.inflight is not None or not conn.sendq:
            return
        seg = conn.sendq.popleft()
        conn.inflight = seg
        conn.retries_left = self.max_retries
        self._transmit(conn, seg)

    def _transmit(self, conn: StreamConn, seg: StreamSegment) -> None:
        self._put_on_air(conn, seg)
        conn.rto_event = self.node.engine.call_in(self.rto_ticks, self._on_rto, conn, seg)

    def _put_on_air(self, conn: StreamConn, seg: StreamSegment) -> None:
        over = self.node.medium.overheads
        length = len(seg.data) + over.stream_bytes + over.link_bytes
        self.node.send_frame(RadioFrame(self.node.node_id, conn.peer, length, seg))

    def _on_rto(self, conn: StreamConn, seg: StreamSegment) -> None:
        if conn.inflight is not seg:
            return
        if conn.retries_left <= 0:
            conn.inflight = None
            conn.state = "CLOSED"
            if self.on_failed is not None:
                self.on_failed(conn, "retry-exhausted")
            return
        conn.retries_left -= 1
        self._transmit(conn, seg)

    def _ack_inflight(self, conn: StreamConn) -> Optional[StreamSegment]:
        seg = conn.inflight
        if seg is None:
            return None
        self.node.engine.cancel(conn.rto_event)
        conn.inflight = None
        return seg

    def _send_ctrl(self, conn: StreamConn, kind: str, seq: int = 0) -> None:
        self._put_on_air(conn, StreamSegment(kind, conn.conn_id, seq))

    # -- inbound segments ------------------------------------------------------

    def on_segment(self, src: str, seg: StreamSegment) -> None:
        conn = self.conns.get(seg.conn_id)
        if seg.kind == "syn":
            if conn is None:
                if not self.accepting:
                    return
                conn = StreamConn(
                    conn_id=seg.conn_id,
                    local=self.node.node_id,
                    peer=src,
                    initiator=False,
                    state="SYN_SENT",
                )
                self.conns[conn.conn_id] = conn
            self._send_ctrl(conn, "synack")
            return
        if conn is None:
            return  # stale segment for a forgotten connection
        if seg.kind == "synack":
            if conn.state == "SYN_SENT" and conn.initiator:
                self._ack_inflight(conn)
                conn.state = "ESTABLISHED"
                self._send_ctrl(conn, "ack", HANDSHAKE_ACK)
                if self.on_established is not None:
                    self.on_established(conn)
                self._try_send(conn)
            elif conn.initiator:
                self._send_ctrl(conn, "ack", HANDSHAKE_ACK)  # duplicate synack
            return
        if seg.kind == "ack":
            self._handle_ack(conn, seg)
            return
        if seg.kind in ("data", "fin"):
            self._handle_data(conn, seg)

    def _handle_ack(self, conn: StreamConn, seg: StreamSegment) -> None:
        if seg.seq == HANDSHAKE_ACK:
            if conn.state == "SYN_SENT" and not conn.initiator:
                conn.state = "ESTABLISHED"
                if self.on_established is not None:
                    self.on_established(conn)
                self._try_send(conn)
            return
        inflight = conn.inflight
        if inflight is None or inflight.kind not in ("data", "fin"):
            return
        if inflight.seq != seg.seq:
            return
        acked = self._ack_inflight(conn)
        if acked is not None and acked.kind == "fin":
            conn.state = "CLOSED"
            if self.on_closed is not None:
                self.on_closed(conn)
        else:
            self._try_send(conn)

    def _handle_data(self, conn: StreamConn, seg: StreamSegment) -> None:
        if conn.state == "SYN_SENT" and not conn.initiator:
            # handshake ack was lost; data implies the peer is established
            conn.state = "ESTABLISHED"
            if self.on_established is not None:
                self.on_established(conn)
        if conn.state not in ("ESTABLISHED", "CLOSING"):
            return
        if seg.seq == conn.recv_next:
            conn.recv_next += 1
            self._send_ctrl(conn, "ack", seg.seq)
            if seg.kind == "data":
                if self.on_data is not None:
                    self.on_data(conn, seg.data)
            else:
                conn.state = "CLOSED"
                if self.on_closed is not None:
                    self.on_closed(conn)
        elif seg.seq < conn.recv_next:
            self._send_ctrl(conn, "ack", seg.seq)  # duplicate; re-ack only


def datagram_send(node: Node, dst: str, payload: bytes) -> None:
    node.datagrams.send(dst, payload)


def stream_connect(node: Node, dst: str) -> StreamConn:
    return node.streams.connect(dst)


def stream_send(node: Node, conn: StreamConn, payload: bytes) -> None:
    node.streams.send(conn, payload)


def stream_close(node: Node, conn: StreamConn) -> None:
    node.streams.close(conn)

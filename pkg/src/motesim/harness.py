"""Scenario configuration, run orchestration, CSV emission, and comparison."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .energy import CurrentProfile, PowerSample
from .engine import RTIMER_HZ, Engine, seconds_to_ticks
from .medium import (
    CpuCostModel,
    DutyCycleConfig,
    LinkModel,
    Node,
    Overheads,
    RadioMedium,
    StreamConn,
)
from .powertrace import TraceRow, summarize, take_sample
from .protocols import actions as act
from .protocols import messages as wire
from .protocols.coap import (
    CoapClientConfig,
    CoapClientState,
    CoapServerState,
    coap_exchange,
    coap_server_handle,
)
from .protocols.http import (
    HttpClientConfig,
    HttpClientState,
    HttpServerState,
    http_server_handle,
    http_step,
)
from .protocols.mqtt import (
    BrokerState,
    MqttClientConfig,
    MqttClientState,
    broker_handle,
    mqtt_client_step,
)
from .protocols.mqttsn import (
    GatewayState,
    SnClientConfig,
    SnClientState,
    gateway_handle,
    mqttsn_client_step,
)

PROTOCOLS = ("mqtt", "mqtt-sn", "coap", "http")

CSV_HEADER = "time_s,cpu_mw,lpm_mw,tx_mw,rx_mw,total_mw"


class ScenarioError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Everything one run needs; defaults model a single telemetry client."""

    protocol: str = "mqtt"
    duration_s: float = 100.0
    interval_s: float = 10.0
    seed: int = 42
    clients: int = 1
    payload_bytes: int = 30
    publish_period_s: float = 5.0
    publish_offset_s: float = 1.0
    qos: int = 1
    topic: str = "temperature"
    http_path: str = "/temperature"
    host: str = "server"
    client_id: str = "z1-client"
    profile: CurrentProfile = field(default_factory=CurrentProfile)
    range_m: float = 50.0
    tx_success: float = 1.0
    rx_success: float = 1.0
    client_pos: tuple[float, float] = (0.0, 0.0)
    server_pos: tuple[float, float] = (10.0, 0.0)
    duty: DutyCycleConfig = field(default_factory=DutyCycleConfig)
    overheads: Overheads = field(default_factory=Overheads)
    cpu_cost: CpuCostModel = field(default_factory=CpuCostModel)
    report_node: str = ""

    def validate(self) -> "ScenarioConfig":
        if self.protocol not in PROTOCOLS:
            raise ScenarioError(
                f"unknown protocol {self.protocol!r} (choose from {', '.join(PROTOCOLS)})"
            )
        if self.interval_s <= 0 or self.duration_s <= 0:
            raise ScenarioError("duration_s and interval_s must be positive")
        if self.interval_s > self.duration_s:
            raise ScenarioError("interval_s must not exceed duration_s")
        intervals = self.duration_s / self.interval_s
        if abs(intervals - round(intervals)) > 1e-9:
            raise ScenarioError(
                f"duration_s ({self.duration_s:g}) must be a whole multiple of "
                f"interval_s ({self.interval_s:g})"
            )
        if self.clients < 1:
            raise ScenarioError("clients must be >= 1")
        if self.qos not in (0, 1):
            raise ScenarioError("qos must be 0 or 1")
        if not 0.0 <= self.tx_success <= 1.0 or not 0.0 <= self.rx_success <= 1.0:
            raise ScenarioError("success probabilities must lie in [0, 1]")
        return self

    def client_ids(self) -> list[str]:
        if self.clients == 1:
            return ["client"]
        return [f"client-{i + 1}" for i in range(self.clients)]


def _parse_option(parser, section: str, key: str, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise ScenarioError(f"{section}.{key}: cannot parse {raw!r}") from None


def _cast_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _cast_pos(raw: str) -> tuple[float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ValueError(raw)
    return float(parts[0]), float(parts[1])


def load_scenario(path) -> ScenarioConfig:
    """Parse a key-value scenario file; unspecified keys take the defaults."""
    file_path = Path(path)
    if not file_path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(file_path)
    except configparser.Error as err:
        raise ScenarioError(f"{path}: {err}") from None

    base = ScenarioConfig()
    config = ScenarioConfig(
        protocol=_parse_option(parser, "scenario", "protocol", str, base.protocol),
        duration_s=_parse_option(parser, "scenario", "duration_s", float, base.duration_s),
        interval_s=_parse_option(parser, "scenario", "interval_s", float, base.interval_s),
        seed=_parse_option(parser, "scenario", "seed", int, base.seed),
        clients=_parse_option(parser, "scenario", "clients", int, base.clients),
        payload_bytes=_parse_option(parser, "scenario", "payload_bytes", int, base.payload_bytes),
        publish_period_s=_parse_option(parser, "scenario", "publish_period_s", float, base.publish_period_s),
        publish_offset_s=_parse_option(parser, "scenario", "publish_offset_s", float, base.publish_offset_s),
        qos=_parse_option(parser, "scenario", "qos", int, base.qos),
        topic=_parse_option(parser, "scenario", "topic", str, base.topic),
        http_path=_parse_option(parser, "scenario", "http_path", str, base.http_path),
        host=_parse_option(parser, "scenario", "host", str, base.host),
        client_id=_parse_option(parser, "scenario", "client_id", str, base.client_id),
        range_m=_parse_option(parser, "radio", "range_m", float, base.range_m),
        tx_success=_parse_option(parser, "radio", "tx_success", float, base.tx_success),
        rx_success=_parse_option(parser, "radio", "rx_success", float, base.rx_success),
        client_pos=_parse_option(parser, "radio", "client_pos", _cast_pos, base.client_pos),
        server_pos=_parse_option(parser, "radio", "server_pos", _cast_pos, base.server_pos),
        report_node=_parse_option(parser, "scenario", "report_node", str, base.report_node),
    )
    try:
        config.profile = CurrentProfile(
            cpu_active_ma=_parse_option(parser, "currents", "cpu_active_ma", float, base.profile.cpu_active_ma),
            lpm_ma=_parse_option(parser, "currents", "lpm_ma", float, base.profile.lpm_ma),
            tx_ma=_parse_option(parser, "currents", "tx_ma", float, base.profile.tx_ma),
            rx_ma=_parse_option(parser, "currents", "rx_ma", float, base.profile.rx_ma),
            voltage_v=_parse_option(parser, "currents", "voltage_v", float, base.profile.voltage_v),
            rtimer_hz=_parse_option(parser, "currents", "rtimer_hz", int, base.profile.rtimer_hz),
        )
    except ValueError as err:
        raise ScenarioError(f"currents: {err}") from None
    config.duty = DutyCycleConfig(
        enabled=_parse_option(parser, "duty", "enabled", _cast_bool, base.duty.enabled),
        check_rate_hz=_parse_option(parser, "duty", "check_rate_hz", int, base.duty.check_rate_hz),
        check_duration_ticks=_parse_option(parser, "duty", "check_duration_ticks", int, base.duty.check_duration_ticks),
    )
    config.overheads = Overheads(
        link_bytes=_parse_option(parser, "overheads", "link_bytes", int, base.overheads.link_bytes),
        datagram_bytes=_parse_option(parser, "overheads", "datagram_bytes", int, base.overheads.datagram_bytes),
        stream_bytes=_parse_option(parser, "overheads", "stream_bytes", int, base.overheads.stream_bytes),
        mtu_bytes=_parse_option(parser, "overheads", "mtu_bytes", int, base.overheads.mtu_bytes),
    )
    config.cpu_cost = CpuCostModel(
        ticks_per_message=_parse_option(parser, "cpu", "ticks_per_message", int, base.cpu_cost.ticks_per_message),
        ticks_per_byte=_parse_option(parser, "cpu", "ticks_per_byte", int, base.cpu_cost.ticks_per_byte),
    )
    return config.validate()


# ---------------------------------------------------------------------------
# Runtime: binds a pure state machine to a node and executes its actions

@dataclass
class Trace:
    protocol: str
    node_id: str
    rows: list[TraceRow]
    avg: PowerSample


@dataclass
class SimRun:
    config: ScenarioConfig
    engine: Engine
    medium: RadioMedium
    nodes: dict[str, Node]
    runtimes: dict[str, "ProtocolRuntime"]
    traces: dict[str, Trace]
    events: list[tuple[float, str, str, str]]


class ProtocolRuntime:
    """Executes a state machine's actions against a node's transports."""

    def __init__(self, node: Node, step: Callable, state, transport: str,
                 decode_kind: str, sim: SimRun):
        self.node = node
        self.engine = node.engine
        self.step = step
        self.state = state
        self.transport = transport
        self.decode_kind = decode_kind
        self.sim = sim
        self.timers: dict[str, int] = {}
        self.conn_by_peer: dict[str, StreamConn] = {}
        self.buffers: dict[int, bytearray] = {}
        if transport == "stream":
            node.streams.on_established = self._on_established
            node.streams.on_data = self._on_stream_data
            node.streams.on_closed = self._on_closed
            node.streams.on_failed = self._on_failed
        else:
            node.datagrams.on_datagram = self._on_datagram

    def start(self) -> None:
        self.feed(act.Started(self._now_s()))

    def feed(self, event) -> None:
        self.state, actions = self.step(self.state, event)
        self._execute(actions)

    # -- action execution ---------------------------------------------------

    def _now_s(self) -> float:
        return self.engine.now / RTIMER_HZ

    def _execute(self, actions) -> None:
        for action in actions:
            if isinstance(action, act.SendMsg):
                self._send(action.msg, action.dst)
            elif isinstance(action, act.StartTimer):
                self._start_timer(action)
            elif isinstance(action, act.StopTimer):
                event_id = self.timers.pop(action.key, None)
                if event_id is not None:
                    self.engine.cancel(event_id)
            elif isinstance(action, act.OpenStream):
                conn = self.node.streams.connect(action.dst)
                self.conn_by_peer[action.dst] = conn
            elif isinstance(action, act.CloseStream):
                conn = self.conn_by_peer.get(action.dst)
                if conn is not None:
                    self.node.streams.close(conn)
            elif isinstance(action, act.Notify):
                self._note(action.kind, action.detail)

    def _note(self, kind: str, detail: str) -> None:
        self.sim.events.append((self._now_s(), self.node.node_id, kind, detail))

    def _send(self, msg, dst: str) -> None:
        data = wire.encode(msg)
        if self.transport == "stream":
            conn = self.conn_by_peer.get(dst)
            if conn is None or conn.state != "ESTABLISHED":
                self._note("send-dropped", f"no established stream to {dst}")
                return
            self.node.streams.send(conn, data)
        else:
            self.node.datagrams.send(dst, data)

    def _start_timer(self, action: act.StartTimer) -> None:
        old = self.timers.pop(action.key, None)
        if old is not None:
            self.engine.cancel(old)
        if action.at_s is not None:
            fire_at = seconds_to_ticks(action.at_s)
        else:
            fire_at = self.engine.now + seconds_to_ticks(action.delay_s)
        fire_at = max(fire_at, self.engine.now)
        self.timers[action.key] = self.engine.call_at(fire_at, self._timer_fired, action.key)

    def _timer_fired(self, key: str) -> None:
        self.timers.pop(key, None)
        self.feed(act.TimerFired(key, self._now_s()))

    # -- transport callbacks --------------------------------------------------

    def _on_established(self, conn: StreamConn) -> None:
        self.conn_by_peer[conn.peer] = conn
        self.buffers.setdefault(conn.conn_id, bytearray())
        self.feed(act.StreamUp(conn.peer, self._now_s()))

    def _on_stream_data(self, conn: StreamConn, chunk: bytes) -> None:
        buffer = self.buffers.setdefault(conn.conn_id, bytearray())
        buffer += chunk
        while True:
            try:
                if self.decode_kind == "mqtt":
                    result = wire.mqtt_decode_prefix(bytes(buffer))
                elif self.decode_kind == "http-request":
                    result = wire.http_decode_prefix(bytes(buffer), "request")
                else:
                    result = wire.http_decode_prefix(bytes(buffer), "response")
            except wire.ParseError as err:
                self._note("parse-error", str(err))
                buffer.clear()
                return
            if result is None:
                return
            msg, consumed = result
            del buffer[:consumed]
            self.feed(act.MsgIn(msg, conn.peer, self._now_s()))

    def _on_closed(self, conn: StreamConn) -> None:
        self._drop_conn(conn)
        self.feed(act.StreamDown(conn.peer, "closed", self._now_s()))

    def _on_failed(self, conn: StreamConn, reason: str) -> None:
        self._drop_conn(conn)
        self._note("stream-failed", f"{conn.peer}: {reason}")
        self.feed(act.StreamDown(conn.peer, "failed", self._now_s()))

    def _drop_conn(self, conn: StreamConn) -> None:
        self.buffers.pop(conn.conn_id, None)
        if self.conn_by_peer.get(conn.peer) is conn:
            del self.conn_by_peer[conn.peer]

    def _on_datagram(self, src: str, data: bytes) -> None:
        try:
            msg = wire.decode(data, self.decode_kind)
        except wire.ParseError as err:
            self._note("parse-error", str(err))
            return
        self.feed(act.MsgIn(msg, src, self._now_s()))


def _server_step(handler: Callable) -> Callable:
    def step(state, event):
        if isinstance(event, act.MsgIn):
            return handler(state, event.msg, event.src)
        return state, []

    return step


def _client_machine(config: ScenarioConfig, node_id: str):
    """Returns (step, state, transport, decode_kind) for the client role."""
    if config.clients == 1:
        wire_id = config.client_id
    else:
        wire_id = f"{config.client_id}-{node_id.rsplit('-', 1)[-1]}"
    if config.protocol == "mqtt":
        cfg = MqttClientConfig(
            broker="server", client_id=wire_id, topic=config.topic,
            qos=config.qos, payload_bytes=config.payload_bytes,
            publish_offset_s=config.publish_offset_s,
            publish_period_s=config.publish_period_s,
        )
        return mqtt_client_step, MqttClientState(cfg), "stream", "mqtt"
    if config.protocol == "mqtt-sn":
        cfg = SnClientConfig(
            gateway="server", client_id=wire_id, topic=config.topic,
            qos=config.qos, payload_bytes=config.payload_bytes,
            publish_offset_s=config.publish_offset_s,
            publish_period_s=config.publish_period_s,
        )
        return mqttsn_client_step, SnClientState(cfg), "datagram", "mqtt-sn"
    if config.protocol == "coap":
        cfg = CoapClientConfig(
            server="server", uri_path=config.topic, confirmable=config.qos > 0,
            request_offset_s=config.publish_offset_s,
            request_period_s=config.publish_period_s,
        )
        return coap_exchange, CoapClientState(cfg), "datagram", "coap"
    cfg = HttpClientConfig(
        server="server", host=config.host, path=config.http_path,
        request_offset_s=config.publish_offset_s,
        request_period_s=config.publish_period_s,
    )
    return http_step, HttpClientState(cfg), "stream", "http-response"


def _server_machine(config: ScenarioConfig):
    resource = bytes(config.payload_bytes)
    if config.protocol == "mqtt":
        return _server_step(broker_handle), BrokerState(), "stream", "mqtt"
    if config.protocol == "mqtt-sn":
        return _server_step(gateway_handle), GatewayState(), "datagram", "mqtt-sn"
    if config.protocol == "coap":
        state = CoapServerState(resources={config.topic: resource})
        return _server_step(coap_server_handle), state, "datagram", "coap"
    state = HttpServerState(resources={config.http_path: resource})
    return _server_step(http_server_handle), state, "stream", "http-request"


def simulate(config: ScenarioConfig) -> SimRun:
    """Build the topology, run the full scenario, and collect per-node traces."""
    config.validate()
    engine = Engine(config.seed)
    client_ids = config.client_ids()
    positions = {}
    for index, client_id in enumerate(client_ids):
        positions[client_id] = (config.client_pos[0], config.client_pos[1] + index)
    positions["server"] = config.server_pos
    link = LinkModel(config.range_m, config.tx_success, config.rx_success, positions)
    medium = RadioMedium(engine, link, config.overheads)
    sim = SimRun(config=config, engine=engine, medium=medium, nodes={},
                 runtimes={}, traces={}, events=[])

    for client_id in client_ids:
        sim.nodes[client_id] = Node(client_id, engine, medium, config.duty,
                                    config.cpu_cost)
    sim.nodes["server"] = Node("server", engine, medium, config.duty,
                               config.cpu_cost)

    step, state, transport, kind = _server_machine(config)
    sim.runtimes["server"] = ProtocolRuntime(sim.nodes["server"], step, state,
                                             transport, kind, sim)
    for client_id in client_ids:
        step, state, transport, kind = _client_machine(config, client_id)
        sim.runtimes[client_id] = ProtocolRuntime(sim.nodes[client_id], step,
                                                  state, transport, kind, sim)

    interval_ticks = seconds_to_ticks(config.interval_s)
    intervals = round(config.duration_s / config.interval_s)
    rows: dict[str, list[TraceRow]] = {node_id: [] for node_id in sim.nodes}
    previous = {}

    def sample() -> None:
        now = engine.now
        for node_id, node in sim.nodes.items():
            node.ledger.settle(now)
            snap = node.ledger.snapshot()
            rows[node_id].append(
                take_sample(previous[node_id], snap, config.profile, config.interval_s)
            )
            previous[node_id] = snap

    for k in range(1, intervals + 1):
        engine.call_at(k * interval_ticks, sample)

    for node_id, node in sim.nodes.items():
        previous[node_id] = node.ledger.snapshot()

    sim.runtimes["server"].start()
    for client_id in client_ids:
        sim.runtimes[client_id].start()

    engine.run(seconds_to_ticks(config.duration_s))

    for node_id in sim.nodes:
        node_rows = rows[node_id]
        avg = summarize([row.sample for row in node_rows])
        sim.traces[node_id] = Trace(config.protocol, node_id, node_rows, avg)
    return sim


def run_scenario(config: ScenarioConfig) -> Trace:
    """Run one scenario and return the trace of the reported node (the client)."""
    sim = simulate(config)
    report_node = config.report_node or config.client_ids()[0]
    if report_node not in sim.traces:
        raise ScenarioError(f"unknown report node {report_node!r}")
    return sim.traces[report_node]


# ---------------------------------------------------------------------------
# CSV trace I/O

def _format_row(time_label: str, sample: PowerSample) -> str:
    return (
        f"{time_label},{sample.cpu_mw:.9f},{sample.lpm_mw:.9f},"
        f"{sample.tx_mw:.9f},{sample.rx_mw:.9f},{sample.total_mw:.9f}"
    )


def write_csv(trace: Trace, path) -> None:
    """Emit one row per interval plus a final row labeled `avg`."""
    if not trace.rows:
        raise ValueError("refusing to write an empty trace")
    lines = [CSV_HEADER]
    for row in trace.rows:
        lines.append(_format_row(f"{row.interval_end_s:g}", row.sample))
    lines.append(_format_row("avg", trace.avg))
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def parse_trace_csv(path) -> tuple[list[PowerSample], Optional[PowerSample]]:
    """Read a trace CSV back into samples; returns (rows, avg_or_None)."""
    rows: list[PowerSample] = []
    average: Optional[PowerSample] = None
    with open(path, "r", newline="") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unrecognized trace header in {path}")
    for line in lines[1:]:
        fields = line.split(",")
        if len(fields) != 6:
            raise ValueError(f"malformed trace row: {line!r}")
        values = [float(v) for v in fields[1:]]
        if fields[0] == "avg":
            average = PowerSample(0.0, *values)
        else:
            rows.append(PowerSample(float(fields[0]), *values))
    return rows, average


# ---------------------------------------------------------------------------
# Cross-protocol comparison

@dataclass(frozen=True)
class ComparisonReport:
    averages: dict[str, PowerSample]
    ranking: list[str]
    deltas: dict[tuple[str, str], dict[str, float]]


_DELTA_COLUMNS = ("cpu_mw", "lpm_mw", "tx_mw", "rx_mw", "total_mw")


def compare(averages: dict[str, PowerSample]) -> ComparisonReport:
    """Rank protocols by average total power and compute pairwise deltas.

    Deltas are fractional: (a - b) / b per state column and total. Ties in
    the ranking break alphabetically.
    """
    if len(averages) < 2:
        raise ValueError("compare needs at least two protocols")
    ranking = sorted(averages, key=lambda name: (averages[name].total_mw, name))
    deltas: dict[tuple[str, str], dict[str, float]] = {}
    for a in averages:
        for b in averages:
            if a == b:
                continue
            pair = {}
            for column in _DELTA_COLUMNS:
                a_value = getattr(averages[a], column)
                b_value = getattr(averages[b], column)
                if b_value == 0.0:
                    pair[column] = math.inf if a_value > 0 else 0.0
                else:
                    pair[column] = (a_value - b_value) / b_value
            deltas[(a, b)] = pair
    return ComparisonReport(averages, ranking, deltas)


def write_report_csv(report: ComparisonReport, path) -> None:
    """Ranked averages table; percentage deltas are relative to the best."""
    best = report.ranking[0]
    lines = ["protocol,rank,cpu_mw,lpm_mw,tx_mw,rx_mw,total_mw,total_vs_best_pct"]
    for rank, name in enumerate(report.ranking, start=1):
        sample = report.averages[name]
        if name == best:
            delta_pct = 0.0
        else:
            delta_pct = report.deltas[(name, best)]["total_mw"] * 100.0
        lines.append(
            f"{name},{rank},{sample.cpu_mw:.9f},{sample.lpm_mw:.9f},"
            f"{sample.tx_mw:.9f},{sample.rx_mw:.9f},{sample.total_mw:.9f},"
            f"{delta_pct:.1f}"
        )
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def emit_plot_data(report: ComparisonReport, path) -> None:
    """Grouped-bar data: one whitespace-separated line per protocol."""
    lines = ["# protocol cpu_mw lpm_mw tx_mw rx_mw total_mw"]
    for name in report.ranking:
        sample = report.averages[name]
        lines.append(
            f"{name} {sample.cpu_mw:.9f} {sample.lpm_mw:.9f} {sample.tx_mw:.9f} "
            f"{sample.rx_mw:.9f} {sample.total_mw:.9f}"
        )
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")

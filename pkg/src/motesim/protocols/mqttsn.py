"""MQTT-SN client and gateway state machines over the datagram transport.

The gateway embeds a broker core: inbound MQTT-SN messages are translated to
MQTT, handled by the broker logic, and the resulting MQTT replies are
translated back to MQTT-SN before they leave the gateway.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .actions import (
    AppPublish,
    MsgIn,
    Notify,
    SendMsg,
    Started,
    StartTimer,
    StopTimer,
    TimerFired,
    next_grid_time,
)
from .messages import (
    MQTT_PUBACK,
    MQTT_PUBLISH,
    MqttMsg,
    MqttSnMsg,
    SN_CONNACK,
    SN_CONNECT,
    SN_PUBACK,
    SN_PUBLISH,
    SN_REGACK,
    SN_REGISTER,
)
from .mqtt import BrokerState, broker_handle


class TranslationError(KeyError):
    pass


@dataclass
class TopicRegistry:
    """Bidirectional topic name <-> 16-bit id map owned by the gateway."""

    by_name: dict[str, int] = field(default_factory=dict)
    by_id: dict[int, str] = field(default_factory=dict)
    next_id: int = 1

    def get_or_assign(self, topic: str) -> int:
        if topic in self.by_name:
            return self.by_name[topic]
        topic_id = self.next_id
        if topic_id > 0xFFFF:
            raise ValueError("topic id space exhausted")
        self.next_id += 1
        self.by_name[topic] = topic_id
        self.by_id[topic_id] = topic
        return topic_id

    def name_of(self, topic_id: int) -> str:
        if topic_id not in self.by_id:
            raise TranslationError(f"unknown topic id {topic_id}")
        return self.by_id[topic_id]

    def id_of(self, topic: str) -> int:
        if topic not in self.by_name:
            raise TranslationError(f"unregistered topic {topic!r}")
        return self.by_name[topic]


def gateway_translate(msg, registry: TopicRegistry):
    """Translate MQTT-SN <-> MQTT; the direction follows the input type."""
    if isinstance(msg, MqttSnMsg):
        if msg.type == SN_PUBLISH:
            return MqttMsg(MQTT_PUBLISH, topic=registry.name_of(msg.topic_id),
                           qos=msg.qos, msg_id=msg.msg_id, payload=msg.payload,
                           dup=msg.dup)
        if msg.type == SN_PUBACK:
            return MqttMsg(MQTT_PUBACK, msg_id=msg.msg_id)
        raise TranslationError(f"no MQTT equivalent for MQTT-SN {msg.type}")
    if isinstance(msg, MqttMsg):
        if msg.type == MQTT_PUBLISH:
            return MqttSnMsg(SN_PUBLISH, topic_id=registry.id_of(msg.topic),
                             qos=msg.qos, msg_id=msg.msg_id, payload=msg.payload,
                             dup=msg.dup)
        if msg.type == MQTT_PUBACK:
            return MqttSnMsg(SN_PUBACK, topic_id=0, msg_id=msg.msg_id, rc=0)
        raise TranslationError(f"no MQTT-SN equivalent for MQTT {msg.type}")
    raise TranslationError(f"untranslatable message: {msg!r}")


# ---------------------------------------------------------------------------
# Client

@dataclass(frozen=True)
class SnClientConfig:
    gateway: str = "server"
    client_id: str = "z1-client"
    topic: str = "temperature"
    qos: int = 1
    payload_bytes: int = 30
    publish_offset_s: float = 1.0
    publish_period_s: float = 5.0
    keepalive_s: float = 30.0
    connack_timeout_s: float = 5.0
    ack_timeout_s: float = 1.0
    max_retries: int = 3


@dataclass
class SnClientState:
    config: SnClientConfig = field(default_factory=SnClientConfig)
    phase: str = "idle"  # idle, connecting, registering, up
    topic_id: int = 0
    next_msg_id: int = 1
    register_tries: int = 0
    register_msg_id: int = 0
    inflight: dict[int, tuple[MqttSnMsg, int]] = field(default_factory=dict)
    pending: deque = field(default_factory=deque)
    publishes_sent: int = 0


def _next_id(state: SnClientState) -> int:
    msg_id = state.next_msg_id
    state.next_msg_id = msg_id % 0xFFFF + 1
    return msg_id


def _emit_publish(state: SnClientState, payload: bytes) -> list:
    cfg = state.config
    msg_id = _next_id(state) if cfg.qos > 0 else 0
    msg = MqttSnMsg(SN_PUBLISH, topic_id=state.topic_id, msg_id=msg_id,
                    payload=payload, qos=cfg.qos)
    state.publishes_sent += 1
    actions = [SendMsg(msg, cfg.gateway)]
    if cfg.qos > 0:
        state.inflight[msg_id] = (msg, 0)
        actions.append(StartTimer(f"puback:{msg_id}", delay_s=cfg.ack_timeout_s))
    return actions


def _schedule_publish(state: SnClientState, now_s: float) -> list:
    cfg = state.config
    if cfg.publish_period_s <= 0:
        return []
    at = next_grid_time(now_s, cfg.publish_offset_s, cfg.publish_period_s)
    return [StartTimer("publish", at_s=at)]


def _send_register(state: SnClientState) -> list:
    cfg = state.config
    state.register_msg_id = _next_id(state)
    register = MqttSnMsg(SN_REGISTER, topic_id=0, msg_id=state.register_msg_id,
                         topic=cfg.topic)
    return [SendMsg(register, cfg.gateway),
            StartTimer("regack", delay_s=cfg.ack_timeout_s)]


def mqttsn_client_step(state: SnClientState, event) -> tuple[SnClientState, list]:
    cfg = state.config
    if isinstance(event, Started):
        state.phase = "connecting"
        connect = MqttSnMsg(SN_CONNECT, client_id=cfg.client_id,
                            duration_s=int(cfg.keepalive_s))
        return state, [SendMsg(connect, cfg.gateway),
                       StartTimer("connack", delay_s=cfg.connack_timeout_s)]

    if isinstance(event, AppPublish):
        if state.phase != "up":
            state.pending.append(event.payload)
            return state, []
        return state, _emit_publish(state, event.payload)

    if isinstance(event, MsgIn):
        msg = event.msg
        if msg.type == SN_CONNACK and state.phase == "connecting":
            state.phase = "registering"
            return state, [StopTimer("connack")] + _send_register(state)
        if msg.type == SN_REGACK and state.phase == "registering":
            if msg.msg_id != state.register_msg_id:
                return state, []
            state.phase = "up"
            state.topic_id = msg.topic_id
            actions = [StopTimer("regack")]
            while state.pending:
                actions += _emit_publish(state, state.pending.popleft())
            actions += _schedule_publish(state, event.now_s)
            return state, actions
        if msg.type == SN_PUBACK:
            if msg.msg_id in state.inflight:
                del state.inflight[msg.msg_id]
                return state, [StopTimer(f"puback:{msg.msg_id}")]
            return state, []
        return state, []

    if isinstance(event, TimerFired):
        if event.key == "publish":
            payload = bytes(cfg.payload_bytes)
            return state, _emit_publish(state, payload) + _schedule_publish(
                state, event.now_s)
        if event.key == "connack":
            state.phase = "idle"
            return state, [Notify("connection-failed", "no CONNACK")]
        if event.key == "regack":
            if state.register_tries >= cfg.max_retries:
                state.phase = "idle"
                return state, [Notify("register-failed", cfg.topic)]
            state.register_tries += 1
            return state, _send_register(state)
        if event.key.startswith("puback:"):
            msg_id = int(event.key.split(":", 1)[1])
            entry = state.inflight.get(msg_id)
            if entry is None:
                return state, []
            msg, tries = entry
            if tries >= cfg.max_retries:
                del state.inflight[msg_id]
                return state, [Notify("publish-failed", f"msg_id {msg_id}")]
            dup = MqttSnMsg(SN_PUBLISH, topic_id=msg.topic_id, msg_id=msg.msg_id,
                            payload=msg.payload, qos=msg.qos, dup=True)
            state.inflight[msg_id] = (msg, tries + 1)
            return state, [SendMsg(dup, cfg.gateway),
                           StartTimer(event.key, delay_s=cfg.ack_timeout_s)]
        return state, []

    return state, []


# ---------------------------------------------------------------------------
# Gateway

@dataclass
class GatewayState:
    registry: TopicRegistry = field(default_factory=TopicRegistry)
    broker: BrokerState = field(default_factory=BrokerState)
    sessions: dict[str, str] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)


def gateway_handle(state: GatewayState, msg: MqttSnMsg, sender: str) -> tuple[GatewayState, list]:
    if msg.type == SN_CONNECT:
        state.sessions[sender] = msg.client_id
        state.broker.sessions[sender] = msg.client_id
        return state, [SendMsg(MqttSnMsg(SN_CONNACK, rc=0), sender)]

    if sender not in state.sessions:
        state.diagnostics.append(f"drop {msg.type} from unknown session {sender}")
        return state, [Notify("dropped", f"unknown session {sender}")]

    if msg.type == SN_REGISTER:
        topic_id = state.registry.get_or_assign(msg.topic)
        regack = MqttSnMsg(SN_REGACK, topic_id=topic_id, msg_id=msg.msg_id, rc=0)
        return state, [SendMsg(regack, sender)]

    if msg.type == SN_PUBLISH:
        try:
            translated = gateway_translate(msg, state.registry)
        except TranslationError as err:
            state.diagnostics.append(str(err))
            return state, [Notify("translation-error", str(err))]
        state.broker, broker_actions = broker_handle(state.broker, translated, sender)
        actions = []
        for action in broker_actions:
            if isinstance(action, SendMsg):
                reply = gateway_translate(action.msg, state.registry)
                if isinstance(reply, MqttSnMsg) and reply.type == SN_PUBACK:
                    reply = MqttSnMsg(SN_PUBACK, topic_id=msg.topic_id,
                                      msg_id=reply.msg_id, rc=0)
                actions.append(SendMsg(reply, action.dst))
            else:
                actions.append(action)
        return state, actions

    if msg.type == SN_PUBACK:
        return state, []

    return state, []

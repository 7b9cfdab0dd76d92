"""MQTT client and broker state machines over the reliable stream transport."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .actions import (
    AppPublish,
    AppSubscribe,
    CloseStream,
    MsgIn,
    Notify,
    OpenStream,
    SendMsg,
    Started,
    StartTimer,
    StopTimer,
    StreamDown,
    StreamUp,
    TimerFired,
    next_grid_time,
)
from .messages import (
    MQTT_CONNACK,
    MQTT_CONNECT,
    MQTT_PINGREQ,
    MQTT_PINGRESP,
    MQTT_PUBACK,
    MQTT_PUBLISH,
    MQTT_SUBACK,
    MQTT_SUBSCRIBE,
    MqttMsg,
)


@dataclass(frozen=True)
class MqttClientConfig:
    broker: str = "server"
    client_id: str = "z1-client"
    topic: str = "temperature"
    qos: int = 1
    payload_bytes: int = 30
    publish_offset_s: float = 1.0
    publish_period_s: float = 5.0
    keepalive_s: float = 30.0
    connack_timeout_s: float = 5.0
    puback_timeout_s: float = 1.0
    max_retries: int = 3


@dataclass
class MqttClientState:
    config: MqttClientConfig = field(default_factory=MqttClientConfig)
    phase: str = "idle"  # idle, connecting, handshaking, up
    next_msg_id: int = 1
    inflight: dict[int, tuple[MqttMsg, int]] = field(default_factory=dict)
    pending: deque = field(default_factory=deque)
    received: list[MqttMsg] = field(default_factory=list)
    publishes_sent: int = 0


def _next_id(state: MqttClientState) -> int:
    msg_id = state.next_msg_id
    state.next_msg_id = msg_id % 0xFFFF + 1  # 16-bit counter, wraps to 1
    return msg_id


def _emit_publish(state: MqttClientState, payload: bytes) -> list:
    cfg = state.config
    msg_id = _next_id(state) if cfg.qos > 0 else 0
    msg = MqttMsg(MQTT_PUBLISH, topic=cfg.topic, qos=cfg.qos,
                  msg_id=msg_id, payload=payload)
    state.publishes_sent += 1
    actions = [SendMsg(msg, cfg.broker)]
    if cfg.qos > 0:
        state.inflight[msg_id] = (msg, 0)
        actions.append(StartTimer(f"puback:{msg_id}", delay_s=cfg.puback_timeout_s))
    return actions


def _rearm_ping(state: MqttClientState) -> list:
    return [StartTimer("ping", delay_s=state.config.keepalive_s)]


def _schedule_publish(state: MqttClientState, now_s: float) -> list:
    cfg = state.config
    if cfg.publish_period_s <= 0:
        return []
    at = next_grid_time(now_s, cfg.publish_offset_s, cfg.publish_period_s)
    return [StartTimer("publish", at_s=at)]


def mqtt_client_step(state: MqttClientState, event) -> tuple[MqttClientState, list]:
    cfg = state.config
    if isinstance(event, Started):
        state.phase = "connecting"
        return state, [OpenStream(cfg.broker)]

    if isinstance(event, StreamUp):
        state.phase = "handshaking"
        connect = MqttMsg(MQTT_CONNECT, client_id=cfg.client_id,
                          keepalive_s=int(cfg.keepalive_s))
        return state, [SendMsg(connect, cfg.broker),
                       StartTimer("connack", delay_s=cfg.connack_timeout_s),
                       *_rearm_ping(state)]

    if isinstance(event, StreamDown):
        state.phase = "idle"
        actions = [Notify("connection-lost", event.reason), StopTimer("ping")]
        for msg_id, (msg, _) in sorted(state.inflight.items()):
            actions.append(StopTimer(f"puback:{msg_id}"))
            state.pending.append(msg.payload)
        state.inflight.clear()
        return state, actions

    if isinstance(event, AppPublish):
        if state.phase != "up":
            state.pending.append(event.payload)
            if state.phase == "idle":
                state.phase = "connecting"
                return state, [OpenStream(cfg.broker)]
            return state, []
        return state, _emit_publish(state, event.payload) + _rearm_ping(state)

    if isinstance(event, AppSubscribe):
        msg_id = _next_id(state)
        msg = MqttMsg(MQTT_SUBSCRIBE, topic=event.topic, qos=cfg.qos, msg_id=msg_id)
        return state, [SendMsg(msg, cfg.broker)] + _rearm_ping(state)

    if isinstance(event, MsgIn):
        msg = event.msg
        if msg.type == MQTT_CONNACK and state.phase == "handshaking":
            state.phase = "up"
            actions = [StopTimer("connack")]
            while state.pending:
                actions += _emit_publish(state, state.pending.popleft())
            actions += _schedule_publish(state, event.now_s)
            if actions[1:]:
                actions += _rearm_ping(state)
            return state, actions
        if msg.type == MQTT_PUBACK:
            if msg.msg_id in state.inflight:
                del state.inflight[msg.msg_id]
                return state, [StopTimer(f"puback:{msg.msg_id}")]
            return state, []
        if msg.type == MQTT_PUBLISH:
            state.received.append(msg)
            if msg.qos > 0:
                puback = MqttMsg(MQTT_PUBACK, msg_id=msg.msg_id)
                return state, [SendMsg(puback, cfg.broker)] + _rearm_ping(state)
            return state, []
        if msg.type in (MQTT_SUBACK, MQTT_PINGRESP):
            return state, []
        return state, []

    if isinstance(event, TimerFired):
        if event.key == "publish":
            payload = bytes(cfg.payload_bytes)
            actions = _schedule_publish(state, event.now_s)
            if state.phase != "up":
                # link is down; queue and let the reconnect flush the backlog
                state.pending.append(payload)
                if state.phase == "idle":
                    state.phase = "connecting"
                    actions.append(OpenStream(cfg.broker))
                return state, actions
            return state, _emit_publish(state, payload) + actions + _rearm_ping(state)
        if event.key == "connack":
            state.phase = "idle"
            return state, [Notify("connection-failed", "no CONNACK"),
                           CloseStream(cfg.broker)]
        if event.key == "ping":
            ping = MqttMsg(MQTT_PINGREQ)
            return state, [SendMsg(ping, cfg.broker)] + _rearm_ping(state)
        if event.key.startswith("puback:"):
            msg_id = int(event.key.split(":", 1)[1])
            entry = state.inflight.get(msg_id)
            if entry is None:
                return state, []
            msg, tries = entry
            if tries >= cfg.max_retries:
                del state.inflight[msg_id]
                return state, [Notify("publish-failed", f"msg_id {msg_id}")]
            dup = MqttMsg(MQTT_PUBLISH, topic=msg.topic, qos=msg.qos,
                          msg_id=msg.msg_id, payload=msg.payload, dup=True)
            state.inflight[msg_id] = (msg, tries + 1)
            return state, [SendMsg(dup, cfg.broker),
                           StartTimer(event.key, delay_s=cfg.puback_timeout_s)]
        return state, []

    return state, []


# ---------------------------------------------------------------------------
# Broker

@dataclass
class BrokerState:
    sessions: dict[str, str] = field(default_factory=dict)  # peer -> client_id
    subscriptions: dict[str, list[str]] = field(default_factory=dict)
    received: list[tuple[str, MqttMsg]] = field(default_factory=list)
    acked_ids: dict[str, int] = field(default_factory=dict)  # dedup per publisher
    next_msg_id: int = 1
    diagnostics: list[str] = field(default_factory=list)


def broker_handle(state: BrokerState, msg: MqttMsg, sender: str) -> tuple[BrokerState, list]:
    if msg.type == MQTT_CONNECT:
        state.sessions[sender] = msg.client_id
        return state, [SendMsg(MqttMsg(MQTT_CONNACK, rc=0), sender)]

    if sender not in state.sessions:
        state.diagnostics.append(f"drop {msg.type} from unknown session {sender}")
        return state, [Notify("dropped", f"unknown session {sender}")]

    if msg.type == MQTT_SUBSCRIBE:
        subscribers = state.subscriptions.setdefault(msg.topic, [])
        if sender not in subscribers:
            subscribers.append(sender)
        suback = MqttMsg(MQTT_SUBACK, msg_id=msg.msg_id, rc=msg.qos)
        return state, [SendMsg(suback, sender)]

    if msg.type == MQTT_PUBLISH:
        actions = []
        is_dup = msg.qos > 0 and state.acked_ids.get(sender, 0) >= msg.msg_id
        if not is_dup:
            state.received.append((sender, msg))
            for subscriber in state.subscriptions.get(msg.topic, []):
                forward_id = 0
                if msg.qos > 0:
                    forward_id = state.next_msg_id
                    state.next_msg_id = forward_id % 0xFFFF + 1
                forward = MqttMsg(MQTT_PUBLISH, topic=msg.topic, qos=msg.qos,
                                  msg_id=forward_id, payload=msg.payload)
                actions.append(SendMsg(forward, subscriber))
        if msg.qos > 0:
            state.acked_ids[sender] = max(state.acked_ids.get(sender, 0), msg.msg_id)
            actions.append(SendMsg(MqttMsg(MQTT_PUBACK, msg_id=msg.msg_id), sender))
        return state, actions

    if msg.type == MQTT_PINGREQ:
        return state, [SendMsg(MqttMsg(MQTT_PINGRESP), sender)]

    return state, []

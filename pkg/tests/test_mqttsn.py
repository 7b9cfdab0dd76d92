"""MQTT-SN client machine, topic registry, and the translating gateway."""

import pytest

from motesim.protocols import messages as wire
from motesim.protocols.actions import (
    AppPublish,
    MsgIn,
    Notify,
    SendMsg,
    StartTimer,
    StopTimer,
    Started,
    TimerFired,
)
from motesim.protocols.mqttsn import (
    GatewayState,
    SnClientState,
    TopicRegistry,
    TranslationError,
    gateway_handle,
    gateway_translate,
    mqttsn_client_step,
)


def only(actions, kind):
    return [a for a in actions if isinstance(a, kind)]


def sent(actions):
    return [a.msg for a in only(actions, SendMsg)]


# ---------------------------------------------------------------------------
# Topic registry

def test_registry_assigns_sequential_ids_idempotently():
    registry = TopicRegistry()
    first = registry.get_or_assign("temperature")
    second = registry.get_or_assign("humidity")
    assert (first, second) == (1, 2)
    assert registry.get_or_assign("temperature") == 1
    assert registry.name_of(1) == "temperature"
    assert registry.id_of("humidity") == 2


def test_registry_unknown_lookups_raise():
    registry = TopicRegistry()
    with pytest.raises(TranslationError):
        registry.name_of(99)
    with pytest.raises(TranslationError):
        registry.id_of("nope")


# ---------------------------------------------------------------------------
# Translation

def test_translate_publish_both_directions():
    registry = TopicRegistry()
    topic_id = registry.get_or_assign("temperature")
    sn = wire.MqttSnMsg(wire.SN_PUBLISH, topic_id=topic_id, msg_id=7, qos=1,
                        payload=b"22C")
    mqtt = gateway_translate(sn, registry)
    assert isinstance(mqtt, wire.MqttMsg)
    assert mqtt.type == wire.MQTT_PUBLISH
    assert (mqtt.topic, mqtt.msg_id, mqtt.qos, mqtt.payload) == ("temperature", 7, 1, b"22C")

    back = gateway_translate(mqtt, registry)
    assert isinstance(back, wire.MqttSnMsg)
    assert (back.topic_id, back.msg_id, back.payload) == (topic_id, 7, b"22C")


def test_translate_puback_both_directions():
    registry = TopicRegistry()
    registry.get_or_assign("temperature")
    sn_ack = wire.MqttSnMsg(wire.SN_PUBACK, topic_id=1, msg_id=4, rc=0)
    mqtt_ack = gateway_translate(sn_ack, registry)
    assert mqtt_ack.type == wire.MQTT_PUBACK and mqtt_ack.msg_id == 4
    again = gateway_translate(mqtt_ack, registry)
    assert again.type == wire.SN_PUBACK and again.msg_id == 4


def test_translate_rejects_unknown_topic_and_untranslatable_types():
    registry = TopicRegistry()
    with pytest.raises(TranslationError):
        gateway_translate(wire.MqttSnMsg(wire.SN_PUBLISH, topic_id=42, msg_id=1,
                                         payload=b"x"), registry)
    with pytest.raises(TranslationError):
        gateway_translate(wire.MqttMsg(wire.MQTT_PUBLISH, topic="unknown",
                                       qos=1, msg_id=1, payload=b"x"), registry)
    with pytest.raises(TranslationError):
        gateway_translate(wire.MqttSnMsg(wire.SN_CONNECT, client_id="c"), registry)


# ---------------------------------------------------------------------------
# Client

def test_client_startup_sequence_connect_register_publish():
    state = SnClientState()
    state, actions = mqttsn_client_step(state, Started(0.0))
    connect = sent(actions)[0]
    assert connect.type == wire.SN_CONNECT
    assert connect.client_id == "z1-client"

    connack = wire.MqttSnMsg(wire.SN_CONNACK, rc=0)
    state, actions = mqttsn_client_step(state, MsgIn(connack, "server", 0.05))
    register = sent(actions)[0]
    assert register.type == wire.SN_REGISTER
    assert register.topic == "temperature"
    assert state.phase == "registering"

    regack = wire.MqttSnMsg(wire.SN_REGACK, topic_id=9, msg_id=register.msg_id, rc=0)
    state, actions = mqttsn_client_step(state, MsgIn(regack, "server", 0.08))
    assert state.phase == "up"
    assert state.topic_id == 9
    timers = only(actions, StartTimer)
    assert any(t.key == "publish" and t.at_s == 1.0 for t in timers)


def _client_up(topic_id=9):
    state = SnClientState()
    state, _ = mqttsn_client_step(state, Started(0.0))
    state, _ = mqttsn_client_step(
        state, MsgIn(wire.MqttSnMsg(wire.SN_CONNACK, rc=0), "server", 0.05))
    regack = wire.MqttSnMsg(wire.SN_REGACK, topic_id=topic_id,
                            msg_id=state.register_msg_id, rc=0)
    state, _ = mqttsn_client_step(state, MsgIn(regack, "server", 0.08))
    return state


def test_regack_with_wrong_msg_id_is_ignored():
    state = SnClientState()
    state, _ = mqttsn_client_step(state, Started(0.0))
    state, _ = mqttsn_client_step(
        state, MsgIn(wire.MqttSnMsg(wire.SN_CONNACK, rc=0), "server", 0.05))
    bogus = wire.MqttSnMsg(wire.SN_REGACK, topic_id=9, msg_id=999, rc=0)
    state, actions = mqttsn_client_step(state, MsgIn(bogus, "server", 0.06))
    assert state.phase == "registering"
    assert actions == []


def test_publish_uses_registered_topic_id():
    state = _client_up(topic_id=9)
    state, actions = mqttsn_client_step(state, TimerFired("publish", 1.0))
    publish = sent(actions)[0]
    assert publish.type == wire.SN_PUBLISH
    assert publish.topic_id == 9
    assert publish.payload == bytes(30)
    assert publish.qos == 1
    assert any(t.key == f"puback:{publish.msg_id}" for t in only(actions, StartTimer))


def test_puback_timeout_retransmits_then_gives_up():
    state = _client_up()
    state, actions = mqttsn_client_step(state, TimerFired("publish", 1.0))
    msg_id = sent(actions)[0].msg_id
    key = f"puback:{msg_id}"
    for _ in range(state.config.max_retries):
        state, actions = mqttsn_client_step(state, TimerFired(key, 2.0))
        dup = sent(actions)[0]
        assert dup.dup is True and dup.msg_id == msg_id
    state, actions = mqttsn_client_step(state, TimerFired(key, 9.0))
    assert sent(actions) == []
    assert only(actions, Notify)[0].kind == "publish-failed"


def test_puback_clears_inflight():
    state = _client_up()
    state, actions = mqttsn_client_step(state, TimerFired("publish", 1.0))
    msg_id = sent(actions)[0].msg_id
    ack = wire.MqttSnMsg(wire.SN_PUBACK, topic_id=9, msg_id=msg_id, rc=0)
    state, actions = mqttsn_client_step(state, MsgIn(ack, "server", 1.2))
    assert state.inflight == {}
    assert StopTimer(f"puback:{msg_id}") in actions


def test_register_timeout_retries_then_fails():
    state = SnClientState()
    state, _ = mqttsn_client_step(state, Started(0.0))
    state, _ = mqttsn_client_step(
        state, MsgIn(wire.MqttSnMsg(wire.SN_CONNACK, rc=0), "server", 0.05))
    for _ in range(state.config.max_retries):
        state, actions = mqttsn_client_step(state, TimerFired("regack", 1.0))
        assert sent(actions)[0].type == wire.SN_REGISTER
    state, actions = mqttsn_client_step(state, TimerFired("regack", 9.0))
    assert only(actions, Notify)[0].kind == "register-failed"
    assert state.phase == "idle"


def test_early_publishes_flushed_after_registration():
    state = SnClientState()
    state, _ = mqttsn_client_step(state, Started(0.0))
    state, actions = mqttsn_client_step(state, AppPublish(b"early", 0.01))
    assert sent(actions) == []
    state, _ = mqttsn_client_step(
        state, MsgIn(wire.MqttSnMsg(wire.SN_CONNACK, rc=0), "server", 0.05))
    regack = wire.MqttSnMsg(wire.SN_REGACK, topic_id=3,
                            msg_id=state.register_msg_id, rc=0)
    state, actions = mqttsn_client_step(state, MsgIn(regack, "server", 0.08))
    flushed = [m for m in sent(actions) if m.type == wire.SN_PUBLISH]
    assert [m.payload for m in flushed] == [b"early"]


# ---------------------------------------------------------------------------
# Gateway

def test_gateway_connect_creates_sessions_both_sides():
    state = GatewayState()
    connect = wire.MqttSnMsg(wire.SN_CONNECT, client_id="node-1", duration_s=30)
    state, actions = gateway_handle(state, connect, "client")
    assert sent(actions)[0].type == wire.SN_CONNACK
    assert state.sessions == {"client": "node-1"}
    assert state.broker.sessions == {"client": "node-1"}


def test_gateway_register_assigns_topic_id():
    state = GatewayState()
    state, _ = gateway_handle(
        state, wire.MqttSnMsg(wire.SN_CONNECT, client_id="n", duration_s=30), "client")
    register = wire.MqttSnMsg(wire.SN_REGISTER, msg_id=2, topic="temperature")
    state, actions = gateway_handle(state, register, "client")
    regack = sent(actions)[0]
    assert regack.type == wire.SN_REGACK
    assert regack.topic_id == 1 and regack.msg_id == 2
    assert state.registry.id_of("temperature") == 1


def test_gateway_publish_reaches_broker_and_acks_in_sn():
    state = GatewayState()
    state, _ = gateway_handle(
        state, wire.MqttSnMsg(wire.SN_CONNECT, client_id="n", duration_s=30), "client")
    state, _ = gateway_handle(
        state, wire.MqttSnMsg(wire.SN_REGISTER, msg_id=1, topic="t"), "client")
    publish = wire.MqttSnMsg(wire.SN_PUBLISH, topic_id=1, msg_id=5, qos=1,
                             payload=b"v")
    state, actions = gateway_handle(state, publish, "client")
    ack = sent(actions)[0]
    assert ack.type == wire.SN_PUBACK
    assert ack.msg_id == 5 and ack.topic_id == 1
    assert state.broker.received[0][1].topic == "t"
    assert state.broker.received[0][1].payload == b"v"


def test_gateway_fans_out_to_mqtt_subscribers_in_sn_form():
    state = GatewayState()
    state, _ = gateway_handle(
        state, wire.MqttSnMsg(wire.SN_CONNECT, client_id="n", duration_s=30), "client")
    state, _ = gateway_handle(
        state, wire.MqttSnMsg(wire.SN_REGISTER, msg_id=1, topic="t"), "client")
    # a broker-side subscriber, as if attached through the stream side
    state.broker.sessions["watcher"] = "watcher"
    state.broker.subscriptions["t"] = ["watcher"]
    publish = wire.MqttSnMsg(wire.SN_PUBLISH, topic_id=1, msg_id=5, qos=1,
                             payload=b"v")
    state, actions = gateway_handle(state, publish, "client")
    to_watcher = [a for a in only(actions, SendMsg) if a.dst == "watcher"]
    assert len(to_watcher) == 1
    forwarded = to_watcher[0].msg
    assert isinstance(forwarded, wire.MqttSnMsg)
    assert forwarded.type == wire.SN_PUBLISH
    assert forwarded.topic_id == 1 and forwarded.payload == b"v"


def test_gateway_drops_unknown_sessions_and_unknown_topics():
    state = GatewayState()
    publish = wire.MqttSnMsg(wire.SN_PUBLISH, topic_id=1, msg_id=5, payload=b"v")
    state, actions = gateway_handle(state, publish, "stranger")
    assert only(actions, Notify)[0].kind == "dropped"

    state, _ = gateway_handle(
        state, wire.MqttSnMsg(wire.SN_CONNECT, client_id="n", duration_s=30), "client")
    bad = wire.MqttSnMsg(wire.SN_PUBLISH, topic_id=77, msg_id=6, payload=b"v")
    state, actions = gateway_handle(state, bad, "client")
    assert only(actions, Notify)[0].kind == "translation-error"
    assert state.broker.received == []

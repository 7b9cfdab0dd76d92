"""CoAP client and resource-server state machines over the datagram transport.

Confirmable requests retransmit with exponential backoff until acknowledged;
non-confirmable requests are fire-and-forget. Responses piggyback on ACKs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import (
    MsgIn,
    Notify,
    SendMsg,
    Started,
    StartTimer,
    StopTimer,
    TimerFired,
    next_grid_time,
)
from .messages import COAP_ACK, COAP_CON, COAP_NON, COAP_RST, CoapMsg


@dataclass(frozen=True)
class CoapClientConfig:
    server: str = "server"
    uri_path: str = "temperature"
    confirmable: bool = True
    token_bytes: int = 8
    request_offset_s: float = 1.0
    request_period_s: float = 5.0
    base_timeout_s: float = 2.0
    backoff_factor: float = 2.0
    max_retransmits: int = 4


@dataclass
class CoapClientState:
    config: CoapClientConfig = field(default_factory=CoapClientConfig)
    next_msg_id: int = 1
    exchanges: dict[int, tuple[CoapMsg, int, float]] = field(default_factory=dict)
    responses: list[CoapMsg] = field(default_factory=list)
    requests_sent: int = 0


def _token_for(msg_id: int, token_bytes: int) -> bytes:
    if token_bytes == 0:
        return b""
    return msg_id.to_bytes(2, "big").rjust(token_bytes, b"\x00")[-token_bytes:]


def _emit_request(state: CoapClientState) -> list:
    cfg = state.config
    msg_id = state.next_msg_id
    state.next_msg_id = msg_id % 0xFFFF + 1
    mtype = COAP_CON if cfg.confirmable else COAP_NON
    request = CoapMsg(mtype, "GET", msg_id, _token_for(msg_id, cfg.token_bytes),
                      cfg.uri_path)
    state.requests_sent += 1
    actions = [SendMsg(request, cfg.server)]
    if cfg.confirmable:
        state.exchanges[msg_id] = (request, 0, cfg.base_timeout_s)
        actions.append(StartTimer(f"retx:{msg_id}", delay_s=cfg.base_timeout_s))
    return actions


def _schedule_request(state: CoapClientState, now_s: float) -> list:
    cfg = state.config
    if cfg.request_period_s <= 0:
        return []
    at = next_grid_time(now_s, cfg.request_offset_s, cfg.request_period_s)
    return [StartTimer("request", at_s=at)]


def coap_exchange(state: CoapClientState, event) -> tuple[CoapClientState, list]:
    cfg = state.config
    if isinstance(event, Started):
        return state, _schedule_request(state, event.now_s)

    if isinstance(event, TimerFired):
        if event.key == "request":
            return state, _emit_request(state) + _schedule_request(state, event.now_s)
        if event.key.startswith("retx:"):
            msg_id = int(event.key.split(":", 1)[1])
            entry = state.exchanges.get(msg_id)
            if entry is None:
                return state, []
            request, count, timeout = entry
            if count >= cfg.max_retransmits:
                del state.exchanges[msg_id]
                return state, [Notify("exchange-failed", f"msg_id {msg_id}")]
            timeout *= cfg.backoff_factor
            state.exchanges[msg_id] = (request, count + 1, timeout)
            return state, [SendMsg(request, cfg.server),
                           StartTimer(event.key, delay_s=timeout)]
        return state, []

    if isinstance(event, MsgIn):
        msg = event.msg
        if msg.mtype in (COAP_ACK, COAP_NON) and msg.msg_id in state.exchanges:
            del state.exchanges[msg.msg_id]
            state.responses.append(msg)
            return state, [StopTimer(f"retx:{msg.msg_id}")]
        if msg.mtype == COAP_NON:
            state.responses.append(msg)  # response to a non-confirmable request
            return state, []
        if msg.mtype == COAP_RST and msg.msg_id in state.exchanges:
            del state.exchanges[msg.msg_id]
            return state, [StopTimer(f"retx:{msg.msg_id}"),
                           Notify("exchange-reset", f"msg_id {msg.msg_id}")]
        return state, []

    return state, []


# ---------------------------------------------------------------------------
# Server

@dataclass
class CoapServerState:
    resources: dict[str, bytes] = field(default_factory=dict)
    seen: dict[tuple[str, int], CoapMsg] = field(default_factory=dict)
    requests_handled: int = 0


def coap_server_handle(state: CoapServerState, msg: CoapMsg, sender: str) -> tuple[CoapServerState, list]:
    if msg.mtype not in (COAP_CON, COAP_NON):
        return state, []
    key = (sender, msg.msg_id)
    if key in state.seen:
        # duplicate request: repeat the cached response, do not re-process
        return state, [SendMsg(state.seen[key], sender)]
    reply_type = COAP_ACK if msg.mtype == COAP_CON else COAP_NON
    if msg.code == "GET":
        if msg.uri_path in state.resources:
            response = CoapMsg(reply_type, "2.05", msg.msg_id, msg.token,
                               payload=state.resources[msg.uri_path])
        else:
            response = CoapMsg(reply_type, "4.04", msg.msg_id, msg.token)
    elif msg.code == "POST":
        state.resources[msg.uri_path] = msg.payload
        response = CoapMsg(reply_type, "2.04", msg.msg_id, msg.token)
    else:
        response = CoapMsg(reply_type, "4.04", msg.msg_id, msg.token)
    state.requests_handled += 1
    state.seen[key] = response
    return state, [SendMsg(response, sender)]

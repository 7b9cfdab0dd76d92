"""HTTP client and origin-server state machines over the stream transport.

One connection per request: connect, send the request, read the response,
close. No keep-alive, so every request pays the full handshake and teardown.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import (
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
from .messages import HttpRequest, HttpResponse


@dataclass(frozen=True)
class HttpClientConfig:
    server: str = "server"
    host: str = "server"
    path: str = "/temperature"
    request_offset_s: float = 1.0
    request_period_s: float = 5.0
    response_timeout_s: float = 5.0


@dataclass
class HttpClientState:
    config: HttpClientConfig = field(default_factory=HttpClientConfig)
    phase: str = "idle"  # idle, connecting, awaiting, closing
    responses: list[HttpResponse] = field(default_factory=list)
    requests_sent: int = 0


def _schedule_request(state: HttpClientState, now_s: float) -> list:
    cfg = state.config
    if cfg.request_period_s <= 0:
        return []
    at = next_grid_time(now_s, cfg.request_offset_s, cfg.request_period_s)
    return [StartTimer("request", at_s=at)]


def http_step(state: HttpClientState, event) -> tuple[HttpClientState, list]:
    cfg = state.config
    if isinstance(event, Started):
        return state, _schedule_request(state, event.now_s)

    if isinstance(event, TimerFired):
        if event.key == "request":
            actions = _schedule_request(state, event.now_s)
            if state.phase == "idle":
                state.phase = "connecting"
                actions.append(OpenStream(cfg.server))
            return state, actions
        if event.key == "response":
            state.phase = "closing"
            return state, [Notify("request-failed", "response timeout"),
                           CloseStream(cfg.server)]
        return state, []

    if isinstance(event, StreamUp):
        state.phase = "awaiting"
        state.requests_sent += 1
        request = HttpRequest("GET", cfg.path, cfg.host)
        return state, [SendMsg(request, cfg.server),
                       StartTimer("response", delay_s=cfg.response_timeout_s)]

    if isinstance(event, MsgIn):
        if isinstance(event.msg, HttpResponse) and state.phase == "awaiting":
            state.responses.append(event.msg)
            state.phase = "closing"
            return state, [StopTimer("response"), CloseStream(cfg.server)]
        return state, []

    if isinstance(event, StreamDown):
        state.phase = "idle"
        if event.reason == "failed":
            return state, [Notify("request-failed", "connection failed"),
                           StopTimer("response")]
        return state, []

    return state, []


# ---------------------------------------------------------------------------
# Server

@dataclass
class HttpServerState:
    resources: dict[str, bytes] = field(default_factory=dict)
    requests_handled: int = 0


def http_server_handle(state: HttpServerState, msg: HttpRequest, sender: str) -> tuple[HttpServerState, list]:
    state.requests_handled += 1
    if msg.method == "GET" and msg.path in state.resources:
        response = HttpResponse(200, state.resources[msg.path])
    else:
        response = HttpResponse(404)
    return state, [SendMsg(response, sender)]

"""WebSocket wire layer over the control service.

One protocol for the operator console, the CLI and the tests: the client
sends JSON request frames ``{"id", "kind", "payload"}`` and receives one
matching response frame per request, plus ``{"kind": "event", ...}`` push
frames for subscribed sessions. The schema is documented in
docs/protocol.md.
"""

from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from . import __version__
from .errors import (
    IllegalTransitionError,
    InvalidConfigError,
    LikertRangeError,
    RetryRejectedError,
    SessionClosedError,
    StartLabError,
    UnknownSessionError,
)
from .service import ControlService

PROTOCOL_VERSION = 1

_ERROR_KINDS = {
    InvalidConfigError: "invalid_config",
    IllegalTransitionError: "illegal_transition",
    SessionClosedError: "session_closed",
    UnknownSessionError: "unknown_session",
    RetryRejectedError: "retry_rejected",
    LikertRangeError: "likert_range",
}


def _error_kind(exc: Exception) -> str:
    for klass, kind in _ERROR_KINDS.items():
        if isinstance(exc, klass):
            return kind
    return "error"


class _Subscription:
    def __init__(self, session_id: str, next_seq: int) -> None:
        self.session_id = session_id
        self.next_seq = next_seq


def create_app(
    service: Optional[ControlService] = None,
    console_dir: Optional[str | Path] = None,
) -> FastAPI:
    app = FastAPI(title="startlab control service", version=__version__)
    app.state.service = service or ControlService()

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True, "protocol": PROTOCOL_VERSION, "version": __version__}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        svc: ControlService = app.state.service
        subscriptions: dict[str, _Subscription] = {}
        send_lock = asyncio.Lock()
        stop = asyncio.Event()

        async def send(frame: dict) -> None:
            async with send_lock:
                await ws.send_json(frame)

        async def pump() -> None:
            # cursor-based tail: every subscriber replays the same gapless
            # sequence regardless of connect time
            try:
                while not stop.is_set():
                    sent_any = False
                    for sub in list(subscriptions.values()):
                        try:
                            events = svc.events_since(sub.session_id, sub.next_seq)
                        except UnknownSessionError:
                            continue
                        for event in events:
                            await send(
                                {"kind": "event", "session_id": sub.session_id, "event": event}
                            )
                            sub.next_seq = event["seq"] + 1
                            sent_any = True
                    if not sent_any:
                        await asyncio.sleep(0.02)
            except asyncio.CancelledError:
                raise
            except Exception:
                return  # socket went away mid-send; the endpoint is closing

        async def fire_later(session_id: str, delay_ms: int) -> None:
            await asyncio.sleep(delay_ms / 1000.0)
            try:
                svc.fire_armed_start(session_id)
            except StartLabError:
                pass  # recalled or reset while armed

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                try:
                    request = await ws.receive_json()
                except WebSocketDisconnect:
                    break
                request_id = request.get("id")
                kind = request.get("kind")
                payload = request.get("payload") or {}
                try:
                    if kind == "create_session":
                        session_id = svc.create_session(payload.get("config") or {})
                        result = {"session_id": session_id}
                    elif kind == "command":
                        result = svc.issue_command(
                            payload["session_id"], payload["command"]
                        )
                        if result.get("armed"):
                            asyncio.create_task(
                                fire_later(payload["session_id"], result["foreperiod_ms"])
                            )
                    elif kind == "mark_retry":
                        result = svc.mark_retry(
                            payload["session_id"], payload.get("record_seq")
                        )
                    elif kind == "submit_likert":
                        result = svc.submit_likert(
                            payload["session_id"],
                            payload["participant_id"],
                            payload["block_index"],
                            payload["answers"],
                        )
                    elif kind == "get_summary":
                        result = svc.get_summary(payload["session_id"])
                    elif kind == "subscribe":
                        session_id = payload["session_id"]
                        from_seq = int(payload.get("from_seq", 0))
                        svc.events_since(session_id, 0)  # existence check
                        subscriptions[session_id] = _Subscription(
                            session_id, max(1, from_seq)
                        )
                        result = {"subscribed": session_id, "from_seq": from_seq}
                    else:
                        raise StartLabError(f"unknown request kind {kind!r}")
                except StartLabError as exc:
                    await send(
                        {
                            "id": request_id,
                            "ok": False,
                            "error": {"kind": _error_kind(exc), "message": str(exc)},
                        }
                    )
                    continue
                except KeyError as exc:
                    await send(
                        {
                            "id": request_id,
                            "ok": False,
                            "error": {
                                "kind": "bad_request",
                                "message": f"missing field {exc}",
                            },
                        }
                    )
                    continue
                await send({"id": request_id, "ok": True, "result": result})
        except WebSocketDisconnect:
            pass
        finally:
            stop.set()
            pump_task.cancel()
            try:
                await asyncio.wait_for(
                    asyncio.gather(pump_task, return_exceptions=True), timeout=2.0
                )
            except (asyncio.TimeoutError, asyncio.CancelledError):
                pass

    if console_dir is not None and Path(console_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(console_dir), html=True), name="console")
    return app


def serve(
    bind: str = "127.0.0.1:8787",
    service: Optional[ControlService] = None,
    console_dir: Optional[str | Path] = None,
) -> None:
    """Run the control service until interrupted."""
    import uvicorn

    host, _, port = bind.partition(":")
    app = create_app(service=service, console_dir=console_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8787), log_level="info")

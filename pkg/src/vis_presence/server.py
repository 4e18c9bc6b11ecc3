"""WebSocket relay server.

Accepts connections at ``/ws/{room}``, runs the join handshake, and relays
state updates through the session store. Frames are relayed verbatim (the
bytes received are the bytes broadcast), so no re-serialization drift can
occur between clients.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
import time
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from . import protocol
from .protocol import MessageKind, ProtocolError
from .session import ApplyResult, RoomFull, SessionError, SessionStore

log = logging.getLogger("vis_presence.server")

WS_POLICY_VIOLATION = 1008
WS_UNSUPPORTED_DATA = 1003
WS_GOING_AWAY = 1001


@dataclass(frozen=True)
class ServerConfig:
    bind_address: str = "127.0.0.1:9870"
    max_users_per_room: int = 32
    idle_timeout_s: float = 30.0
    ping_interval_s: float = 10.0

    def __post_init__(self):
        if self.max_users_per_room <= 0:
            raise ValueError("max_users_per_room must be positive")
        if not (0 < self.ping_interval_s < self.idle_timeout_s):
            raise ValueError("need 0 < ping_interval_s < idle_timeout_s")

    @property
    def host_port(self) -> Tuple[str, int]:
        host, _, port = self.bind_address.rpartition(":")
        return host or "127.0.0.1", int(port)


class RelayState:
    """Live connections plus the room/session bookkeeping behind them."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.session = SessionStore(max_users_per_room=config.max_users_per_room)
        # (room_id, user_id) -> websocket
        self.sockets: Dict[Tuple[str, str], WebSocket] = {}
        self.lock = asyncio.Lock()

    async def broadcast(
        self, room_id: str, text: str, exclude: Optional[str] = None
    ) -> None:
        room = self.session.rooms.get(room_id)
        if room is None:
            return
        for uid in sorted(room.users):
            if uid == exclude:
                continue
            ws = self.sockets.get((room_id, uid))
            if ws is None:
                continue
            try:
                await ws.send_text(text)
            except Exception:  # a dying peer must not break the broadcast
                pass

    async def drop_user(
        self, room_id: str, user_id: str, close_code: Optional[int] = None
    ) -> None:
        ws = self.sockets.pop((room_id, user_id), None)
        try:
            self.session.leave(room_id, user_id)
        except SessionError:
            return
        if ws is not None and close_code is not None:
            with contextlib.suppress(Exception):
                await ws.close(code=close_code)
        left = protocol.encode(protocol.user_left(room_id, user_id)).decode()
        await self.broadcast(room_id, left)

    async def expire_loop(self) -> None:
        while True:
            await asyncio.sleep(self.config.ping_interval_s)
            async with self.lock:
                now = time.monotonic()
                for room_id in list(self.session.rooms):
                    evicted = self.session.expire_idle(
                        room_id, now, self.config.idle_timeout_s
                    )
                    for uid in evicted:
                        ws = self.sockets.pop((room_id, uid), None)
                        if ws is not None:
                            with contextlib.suppress(Exception):
                                await ws.close(code=WS_GOING_AWAY)
                        left = protocol.encode(
                            protocol.user_left(room_id, uid)
                        ).decode()
                        await self.broadcast(room_id, left)


def create_app(config: Optional[ServerConfig] = None) -> FastAPI:
    config = config or ServerConfig()
    state = RelayState(config)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        expire_task = asyncio.create_task(state.expire_loop())
        try:
            yield
        finally:
            expire_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await expire_task
            async with state.lock:
                for ws in list(state.sockets.values()):
                    with contextlib.suppress(Exception):
                        await ws.close(code=WS_GOING_AWAY)
                state.sockets.clear()

    app = FastAPI(lifespan=lifespan)
    app.state.relay = state

    @app.get("/healthz", response_class=PlainTextResponse)
    async def healthz() -> str:
        return "ok"

    @app.websocket("/ws/{room}")
    async def ws_endpoint(websocket: WebSocket, room: str):
        await websocket.accept()
        user_id: Optional[str] = None
        try:
            # Handshake: the first frame must be a Join for this room.
            raw = await websocket.receive_text()
            try:
                msg = protocol.decode(raw)
            except ProtocolError:
                await websocket.close(code=WS_POLICY_VIOLATION)
                return
            if msg.kind is not MessageKind.JOIN or msg.room != room:
                await websocket.close(code=WS_POLICY_VIOLATION)
                return
            async with state.lock:
                try:
                    presence, _ = state.session.join(
                        room, msg.name, now=time.monotonic()
                    )
                except (RoomFull, SessionError):
                    await websocket.close(code=WS_POLICY_VIOLATION)
                    return
                user_id = presence.user_id
                state.sockets[(room, user_id)] = websocket
                await websocket.send_text(
                    protocol.encode(
                        protocol.welcome(room, user_id, presence.color)
                    ).decode()
                )
                entries = [
                    u.roster_entry() for u in state.session.roster(room)
                ]
                roster_text = protocol.encode(
                    protocol.roster(room, entries)
                ).decode()
                await state.broadcast(room, roster_text)

            while True:
                raw = await websocket.receive_text()
                try:
                    msg = protocol.decode(raw)
                except ProtocolError:
                    async with state.lock:
                        await state.drop_user(room, user_id)
                    await websocket.close(code=WS_UNSUPPORTED_DATA)
                    return
                async with state.lock:
                    now = time.monotonic()
                    if msg.kind is MessageKind.PING and msg.room == room:
                        state.session.touch(room, user_id, now)
                        await websocket.send_text(
                            protocol.encode(protocol.pong(room)).decode()
                        )
                    elif (
                        msg.kind is MessageKind.STATE_UPDATE
                        and msg.room == room
                        and msg.user_id == user_id
                    ):
                        result = state.session.apply_update(
                            room, user_id, msg.seq, msg.state, now=now
                        )
                        if result is ApplyResult.APPLIED:
                            # Relay the exact bytes we received; never echo.
                            await state.broadcast(room, raw, exclude=user_id)
                    else:
                        await state.drop_user(room, user_id)
                        await websocket.close(code=WS_POLICY_VIOLATION)
                        return
        except WebSocketDisconnect:
            pass
        finally:
            if user_id is not None:
                async with state.lock:
                    await state.drop_user(room, user_id)

    return app


def serve(config: ServerConfig) -> None:
    """Run the relay until interrupted."""
    import uvicorn

    host, port = config.host_port
    uvicorn.run(create_app(config), host=host, port=port, log_level="info")

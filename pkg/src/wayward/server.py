"""HTTP + WebSocket surface over the session service.

Control endpoints are plain request/response; steering happens over a
WebSocket carrying the JSON frame protocol. Each session has one clock task
(skipped entirely in manual mode, ``tick_interval_ms == 0``, where tests and
scripted clients drive ticks through POST /advance for exact determinism).
"""

from __future__ import annotations

import asyncio
import io
import uuid
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from . import gateway
from .engine import InvalidScenario
from .irl import IrlConfig
from .service import NoHumanData, PhaseError, SessionService, UnknownSession

#: how often websocket senders look for queued frames (seconds)
_SEND_POLL_SECONDS = 0.02


class CreateSessionRequest(BaseModel):
    scenario_path: str
    tick_interval_ms: int = 200


class CycleRequest(BaseModel):
    sparsity_weight: float = 1.0
    reward_bound: float = 1.0


def create_app(
    service: Optional[SessionService] = None,
    initial_clock: Optional[tuple[str, int]] = None,
) -> FastAPI:
    """App over a service; ``initial_clock`` drives a pre-created session."""
    service = service or SessionService()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if initial_clock is not None:
            _start_clock(*initial_clock)
        yield
        for task in app.state.clock_tasks.values():
            task.cancel()

    app = FastAPI(title="wayward session service", lifespan=lifespan)
    app.state.service = service
    app.state.clock_tasks = {}

    def _session_or_404(session_id: str):
        try:
            return service.session(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    async def _clock_loop(session_id: str, interval_ms: int):
        try:
            while True:
                await asyncio.sleep(interval_ms / 1000.0)
                await asyncio.to_thread(service.advance, session_id)
        except asyncio.CancelledError:
            pass

    def _start_clock(session_id: str, interval_ms: int):
        if interval_ms > 0:
            app.state.clock_tasks[session_id] = asyncio.create_task(
                _clock_loop(session_id, interval_ms)
            )

    @app.post("/sessions")
    async def create_session(req: CreateSessionRequest):
        try:
            scenario = await asyncio.to_thread(gateway.load_scenario, req.scenario_path)
            session_id = service.create_session(scenario, req.tick_interval_ms)
        except (gateway.GatewayError, InvalidScenario) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        _start_clock(session_id, req.tick_interval_ms)
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}/status")
    async def status(session_id: str):
        _session_or_404(session_id)
        return service.status(session_id)

    @app.post("/sessions/{session_id}/advance")
    async def advance(session_id: str):
        session = _session_or_404(session_id)
        if session.tick_interval_ms > 0:
            raise HTTPException(
                status_code=409, detail="session is clock-driven; advance is manual-mode only"
            )
        snapshot = await asyncio.to_thread(service.advance, session_id)
        return {"snapshot": snapshot}

    @app.post("/sessions/{session_id}/cycle")
    async def cycle(session_id: str, req: CycleRequest):
        _session_or_404(session_id)
        config = IrlConfig(
            sparsity_weight=req.sparsity_weight, reward_bound=req.reward_bound
        )
        try:
            result = await asyncio.to_thread(
                service.run_participatory_cycle, session_id, config
            )
        except NoHumanData as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except PhaseError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return result

    @app.get("/sessions/{session_id}/log", response_class=PlainTextResponse)
    async def download_log(session_id: str):
        session = _session_or_404(session_id)
        with session.lock:
            buffer = io.StringIO()
            buffer.write(
                f"{gateway.LOG_HEADER_PREFIX} generator={session.world.log.generator} "
                f"seed={session.world.log.seed}\n"
            )
            for e in session.world.log:
                buffer.write(f"{e.tick} {e.agent_id} {e.source} {e.state} {e.action}\n")
            return buffer.getvalue()

    @app.websocket("/sessions/{session_id}/ws")
    async def websocket_endpoint(ws: WebSocket, session_id: str):
        try:
            service.session(session_id)
        except UnknownSession:
            await ws.close(code=4004)
            return
        await ws.accept()
        connection_id = str(uuid.uuid4())
        service.register_connection(session_id, connection_id)

        async def sender():
            while True:
                frames = service.poll(session_id, connection_id)
                for frame in frames:
                    await ws.send_json(frame)
                await asyncio.sleep(_SEND_POLL_SECONDS)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                msg = await ws.receive_json()
                replies = await asyncio.to_thread(
                    service.handle_message, session_id, connection_id, msg
                )
                for frame in replies:
                    await ws.send_json(frame)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            service.drop_connection(session_id, connection_id)

    return app

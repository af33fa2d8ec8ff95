"""Live transport: WebSocket frames and HTTP management around session cores.

Each session is wrapped in a host that serializes every command (join, chat,
round start, clock tick) through one asyncio lock, satisfying the engine's
single-executor contract, then fans the resulting event records out as
per-recipient frames. Frames are journaled per participant so a reconnecting
client can resume from its last seen frame seq.

Frame kinds sent to clients: joined, round_started, timer, chat, agent,
snapshot, round_result, error. Clients send: hello, chat.
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path

from aiohttp import WSMsgType, web

from .analyzer import HttpAnalyzer, MockAnalyzer
from .domain import question_from_fixture, validate_question
from .events import EventRecord
from .session import (
    InvalidConfig,
    SessionConfig,
    SessionEngine,
    SessionError,
    STATE_ENDED,
    STATE_ROUND,
)

logger = logging.getLogger("confab.server")

STATE_KEY = web.AppKey("state", object)

TICK_PERIOD_S = 0.2


def _now_ms(loop: asyncio.AbstractEventLoop) -> int:
    return int(loop.time() * 1000)


class SessionHost:
    """One live session: engine + connections + frame journal + ticker."""

    def __init__(
        self,
        session_id: str,
        config: SessionConfig,
        analyzer=None,
        log_dir: Path | None = None,
    ) -> None:
        self.session_id = session_id
        loop = asyncio.get_running_loop()
        self._loop = loop
        self.engine = SessionEngine(
            config, analyzer=analyzer, session_id=session_id, now_ms=_now_ms(loop)
        )
        self._lock = asyncio.Lock()
        self._queues: dict[str, asyncio.Queue] = {}
        self._journal: dict[str, list[dict]] = {}
        self._log_path = log_dir / f"{session_id}.jsonl" if log_dir else None
        self._written = 0
        self._flush_log()
        self._last_timer_s: int | None = None
        self._ticker = loop.create_task(self._tick_loop())

    async def close(self) -> None:
        self._ticker.cancel()
        async with self._lock:
            if self.engine.state not in (STATE_ROUND, STATE_ENDED):
                mark = self.engine.next_event_seq
                self.engine.end_session(_now_ms(self._loop))
                self._after_command(mark)

    async def command(self, fn):
        """Run one engine command under the session lock and fan out its events."""
        async with self._lock:
            mark = self.engine.next_event_seq
            result = fn(_now_ms(self._loop))
            self._after_command(mark)
            return result

    def _after_command(self, mark: int) -> None:
        new = self.engine.events_since(mark)
        for rec in new:
            self._fan_out(rec)
        self._flush_log()

    def _flush_log(self) -> None:
        if self._log_path is None:
            return
        records = self.engine.export_events()
        if len(records) <= self._written:
            return
        with open(self._log_path, "a", encoding="utf-8", newline="\n") as fh:
            for rec in records[self._written :]:
                fh.write(rec.to_json_line() + "\n")
        self._written = len(records)

    # -- frame routing -------------------------------------------------------

    def _members(self, subgroup_id: str) -> list[str]:
        for tt in self.engine.subgroups:
            if tt.id == subgroup_id:
                return tt.member_ids
        return []

    def _everyone(self) -> list[str]:
        return list(self.engine.participants)

    def _fan_out(self, rec: EventRecord) -> None:
        kind, p = rec.kind, rec.payload
        if kind == "participant_joined":
            self._send(
                p["participant_id"],
                {
                    "kind": "joined",
                    "participant_id": p["participant_id"],
                    "display_name": p["display_name"],
                    "subgroup": None,
                },
            )
        elif kind == "partition_assigned":
            for g in p["subgroups"]:
                for pid in g["member_ids"]:
                    self._send(
                        pid,
                        {
                            "kind": "joined",
                            "participant_id": pid,
                            "display_name": self.engine.participants[pid].display_name,
                            "subgroup": g["id"],
                        },
                    )
        elif kind == "round_started":
            frame = {
                "kind": "round_started",
                "round_index": p["round_index"],
                "question": p["question"],
                "options": p["options"],
                "duration_s": p["duration_s"],
                "prompt": p["prompt"],
            }
            for pid in self._everyone():
                self._send(pid, frame)
        elif kind == "chat":
            frame = {
                "kind": "chat",
                "author": p["author"],
                "text": p["text"],
                "subgroup": p["subgroup_id"],
                "chat_seq": p["seq"],
            }
            for pid in self._members(p["subgroup_id"]):
                self._send(pid, frame)
        elif kind == "agent_message":
            frame = {
                "kind": "agent",
                "author": p["author"],
                "text": p["text"],
                "subgroup": p["subgroup_id"],
                "insight_id": p["insight_id"],
            }
            for pid in self._members(p["subgroup_id"]):
                self._send(pid, frame)
        elif kind == "snapshot" and p["broadcast"]:
            frame = {
                "kind": "snapshot",
                "scope": p["scope"],
                "profile": p["profile"],
                "mean": p["mean"],
            }
            targets = (
                self._everyone()
                if p["subgroup_id"] is None
                else self._members(p["subgroup_id"])
            )
            for pid in targets:
                self._send(pid, frame)
        elif kind == "round_finalized":
            f = p["forecast"]
            frame = {
                "kind": "round_result",
                "round_index": p["round_index"],
                "wcf": f["wcf"],
                "pick": f["pick"],
                "risk": f["risk_points"],
                "tossup": f["is_tossup"],
            }
            for pid in self._everyone():
                self._send(pid, frame)

    def _send(self, pid: str, frame: dict) -> None:
        journal = self._journal.setdefault(pid, [])
        stamped = dict(frame, frame_seq=len(journal))
        journal.append(stamped)
        queue = self._queues.get(pid)
        if queue is not None:
            queue.put_nowait(stamped)

    def _broadcast_transient(self, frame: dict) -> None:
        # Timer frames are ephemeral: not journaled, never part of resume.
        for queue in self._queues.values():
            queue.put_nowait(dict(frame, frame_seq=None))

    # -- connections -----------------------------------------------------------

    def attach(self, pid: str, resume_from: int | None) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self._queues[pid] = queue
        for frame in self._journal.get(pid, []):
            if resume_from is None or frame["frame_seq"] > resume_from:
                queue.put_nowait(frame)
        return queue

    def detach(self, pid: str, queue: asyncio.Queue) -> None:
        if self._queues.get(pid) is queue:
            del self._queues[pid]

    # -- clock ------------------------------------------------------------------

    async def _tick_loop(self) -> None:
        while True:
            await asyncio.sleep(TICK_PERIOD_S)
            try:
                async with self._lock:
                    now = _now_ms(self._loop)
                    mark = self.engine.next_event_seq
                    self.engine.tick(now)
                    self._after_command(mark)
                    if self.engine.state == STATE_ROUND:
                        remaining_s = self.engine.remaining_ms(now) // 1000
                        if remaining_s != self._last_timer_s:
                            self._last_timer_s = remaining_s
                            self._broadcast_transient(
                                {"kind": "timer", "remaining_s": remaining_s}
                            )
                    else:
                        self._last_timer_s = None
            except asyncio.CancelledError:
                raise
            except Exception:
                logger.exception("tick failed for session %s", self.session_id)


def _error_payload(exc: Exception) -> dict:
    return {"error": type(exc).__name__, "detail": str(exc)}


class AppState:
    def __init__(self, analyzer_mode: str, log_dir: Path | None, seed: int | None):
        self.hosts: dict[str, SessionHost] = {}
        self.analyzer_mode = analyzer_mode
        self.log_dir = log_dir
        self.seed = seed
        self._counter = 0

    def make_analyzer(self):
        if self.analyzer_mode == "http":
            return HttpAnalyzer.from_env()
        return MockAnalyzer()

    def next_session_id(self) -> str:
        self._counter += 1
        return f"s{self._counter:04d}"


def build_app(
    analyzer: str = "mock",
    log_dir: str | Path | None = None,
    seed: int | None = None,
    static_dir: str | Path | None = None,
) -> web.Application:
    state = AppState(analyzer, Path(log_dir) if log_dir else None, seed)
    if state.log_dir:
        state.log_dir.mkdir(parents=True, exist_ok=True)
    app = web.Application()
    app[STATE_KEY] = state

    async def create_session(request: web.Request) -> web.Response:
        doc = await request.json()
        try:
            config = SessionConfig.from_payload(doc)
            if state.seed is not None:
                config.seed = state.seed
            host = SessionHost(
                state.next_session_id(),
                config,
                analyzer=state.make_analyzer(),
                log_dir=state.log_dir,
            )
        except (InvalidConfig, KeyError, ValueError) as exc:
            return web.json_response(_error_payload(exc), status=400)
        state.hosts[host.session_id] = host
        return web.json_response({"session_id": host.session_id})

    def _host_or_none(request: web.Request) -> SessionHost | None:
        return state.hosts.get(request.match_info["sid"])

    async def add_question(request: web.Request) -> web.Response:
        host = _host_or_none(request)
        if host is None:
            return web.json_response({"error": "NoSuchSession"}, status=404)
        doc = await request.json()
        try:
            q = question_from_fixture(doc)
            violations = validate_question(q)
            if violations:
                raise InvalidConfig("; ".join(violations))
            async with host._lock:
                if any(existing.id == q.id for existing in host.engine.config.questions):
                    raise InvalidConfig(f"duplicate question id {q.id!r}")
                host.engine.config.questions.append(q)
        except (SessionError, KeyError, ValueError) as exc:
            return web.json_response(_error_payload(exc), status=400)
        return web.json_response({"ok": True, "n_questions": len(host.engine.config.questions)})

    async def start_round(request: web.Request) -> web.Response:
        host = _host_or_none(request)
        if host is None:
            return web.json_response({"error": "NoSuchSession"}, status=404)
        index = int(request.match_info["index"])
        try:
            q = await host.command(
                lambda now: host.engine.start_round(index, now_ms=now)
            )
        except SessionError as exc:
            return web.json_response(_error_payload(exc), status=409)
        except Exception as exc:  # partition errors etc.
            return web.json_response(_error_payload(exc), status=400)
        return web.json_response({"ok": True, "question_id": q.id})

    async def session_status(request: web.Request) -> web.Response:
        host = _host_or_none(request)
        if host is None:
            return web.json_response({"error": "NoSuchSession"}, status=404)
        engine = host.engine
        return web.json_response(
            {
                "session_id": host.session_id,
                "state": engine.state,
                "n_participants": len(engine.participants),
                "n_questions": len(engine.config.questions),
                "rounds_played": len(engine.forecasts),
                "forecasts": [f.to_payload() for f in engine.forecasts],
                "subgroups": [
                    {"id": tt.id, "members": len(tt.member_ids)}
                    for tt in engine.subgroups
                ],
            }
        )

    async def export_log(request: web.Request) -> web.Response:
        host = _host_or_none(request)
        if host is None:
            return web.json_response({"error": "NoSuchSession"}, status=404)
        return web.Response(text=host.engine.export_jsonl(), content_type="text/plain")

    async def ws_handler(request: web.Request) -> web.WebSocketResponse:
        host = _host_or_none(request)
        ws = web.WebSocketResponse(heartbeat=30)
        await ws.prepare(request)
        if host is None:
            await ws.send_json({"kind": "error", "code": "NoSuchSession"})
            await ws.close()
            return ws

        pid: str | None = None
        queue: asyncio.Queue | None = None
        writer: asyncio.Task | None = None
        try:
            async for msg in ws:
                if msg.type != WSMsgType.TEXT:
                    break
                try:
                    frame = json.loads(msg.data)
                except ValueError:
                    await ws.send_json({"kind": "error", "code": "BadFrame"})
                    continue
                kind = frame.get("kind")

                if kind == "hello" and pid is None:
                    requested = frame.get("participant_id") or f"p{len(host.engine.participants) + 1:03d}"
                    resume_from = frame.get("resume_from")
                    if requested not in host.engine.participants:
                        try:
                            await host.command(
                                lambda now: host.engine.join(requested, now_ms=now)
                            )
                        except SessionError as exc:
                            await ws.send_json(
                                {"kind": "error", "code": type(exc).__name__}
                            )
                            continue
                    pid = requested
                    queue = host.attach(pid, resume_from)

                    async def pump(q: asyncio.Queue) -> None:
                        while True:
                            await ws.send_json(await q.get())

                    writer = asyncio.get_running_loop().create_task(pump(queue))
                elif kind == "chat" and pid is not None:
                    text = frame.get("text", "")
                    try:
                        await host.command(
                            lambda now: host.engine.ingest_chat(pid, text, now_ms=now)
                        )
                    except SessionError as exc:
                        await ws.send_json({"kind": "error", "code": type(exc).__name__})
                else:
                    await ws.send_json({"kind": "error", "code": "BadFrame"})
        finally:
            if writer is not None:
                writer.cancel()
            if pid is not None and queue is not None:
                host.detach(pid, queue)
        return ws

    app.router.add_post("/api/sessions", create_session)
    app.router.add_post("/api/sessions/{sid}/questions", add_question)
    app.router.add_post("/api/sessions/{sid}/rounds/{index}/start", start_round)
    app.router.add_get("/api/sessions/{sid}", session_status)
    app.router.add_get("/api/sessions/{sid}/log", export_log)
    app.router.add_get("/ws/{sid}", ws_handler)

    static = Path(static_dir) if static_dir else None
    if static and static.is_dir():
        async def index(_request: web.Request) -> web.FileResponse:
            return web.FileResponse(static / "index.html")

        app.router.add_get("/", index)
        app.router.add_static("/app", static)
        logger.info("serving web client from %s", static)
    else:
        logger.info("no web client bundle found; API and WebSocket only")

    async def close_hosts(app: web.Application) -> None:
        for host in app[STATE_KEY].hosts.values():
            await host.close()

    app.on_shutdown.append(close_hosts)
    return app


def serve(
    port: int,
    config_path: str | None = None,
    log_dir: str | None = None,
    analyzer: str = "mock",
    seed: int | None = None,
    static_dir: str | None = None,
) -> None:
    """Blocking entry point for the CLI."""
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")

    async def main() -> None:
        app = build_app(analyzer=analyzer, log_dir=log_dir, seed=seed, static_dir=static_dir)
        if config_path:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
            if isinstance(doc, list):
                doc = {"questions": doc}
            state: AppState = app[STATE_KEY]
            config = SessionConfig.from_payload(doc)
            if seed is not None:
                config.seed = seed
            host = SessionHost(
                state.next_session_id(),
                config,
                analyzer=state.make_analyzer(),
                log_dir=state.log_dir,
            )
            state.hosts[host.session_id] = host
            logger.info("created session %s from %s", host.session_id, config_path)
        runner = web.AppRunner(app)
        await runner.setup()
        site = web.TCPSite(runner, "0.0.0.0", port)
        await site.start()
        logger.info("listening on :%d", port)
        await asyncio.Event().wait()

    asyncio.run(main())

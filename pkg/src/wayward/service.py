"""Live participation sessions: the two-phase loop with human steering.

A session wraps one world. It starts in the ``deductive`` phase (rule-based
agents only), moves to ``participatory`` when the first human joins, and on
request runs the refinement cycle: estimate the observed policy from the
merged logs, recover a reward under which it is optimal, validate it, and
re-deploy the virtual agents on the forward-optimal policy of the recovered
reward (``refining`` while solving, ``refined`` after). Phases only move
forward.

All mutation for a session happens under its lock (single-writer world);
snapshots are plain dicts, safe to fan out to any number of readers. Tick
snapshots conflate per subscriber: a slow consumer sees the latest snapshot
plus a count of the ones it skipped, never an unbounded backlog.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import engine, irl
from .engine import Scenario, World
from .gateway import network_to_doc
from .logs import SOURCE_HUMAN
from .network import MdpCompilation, compile_mdp

PHASES = ("deductive", "participatory", "refining", "refined")


class ServiceError(Exception):
    pass


class UnknownSession(ServiceError):
    pass


class NoHumanData(ServiceError):
    pass


class PhaseError(ServiceError):
    pass


@dataclass
class Connection:
    id: str
    agent_id: Optional[int] = None
    pending_snapshot: Optional[dict] = None
    skipped: int = 0
    outbox: list = field(default_factory=list)


@dataclass
class Session:
    id: str
    scenario: Scenario
    world: World
    compilation: MdpCompilation
    tick_interval_ms: int
    phase: str = "deductive"
    connections: dict = field(default_factory=dict)
    free_slots: list = field(default_factory=list)
    lock: threading.RLock = field(default_factory=threading.RLock)
    refined_policy: Optional[np.ndarray] = None
    last_report: Optional[dict] = None

    def snapshot(self, events=()) -> dict:
        return {
            "tick": self.world.tick,
            "phase": self.phase,
            "agents": [
                {
                    "agent_id": a.id,
                    "source": a.source,
                    "node_id": a.state.node_id,
                    "active": a.active,
                }
                for a in self.world.agents
            ],
            "events": [
                {"kind": e.kind, "agent_id": e.agent_id, "node": e.node}
                for e in events
            ],
        }


class SessionService:
    """Owns every live session; all public methods are thread-safe."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = 0

    # -- lifecycle -----------------------------------------------------------

    def create_session(self, scenario: Scenario, tick_interval_ms: int = 200) -> str:
        world = engine.init_world(scenario)
        compilation = compile_mdp(
            scenario.network, scenario.slip_probability, scenario.discount
        )
        with self._lock:
            self._counter += 1
            session_id = f"session-{self._counter}"
            human_ids = [
                a.id for a in world.agents if a.source == SOURCE_HUMAN
            ]
            self._sessions[session_id] = Session(
                id=session_id,
                scenario=scenario,
                world=world,
                compilation=compilation,
                tick_interval_ms=tick_interval_ms,
                free_slots=human_ids,
            )
        return session_id

    def session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def session_ids(self) -> list[str]:
        with self._lock:
            return list(self._sessions)

    def status(self, session_id: str) -> dict:
        s = self.session(session_id)
        with s.lock:
            return {
                "session_id": s.id,
                "phase": s.phase,
                "tick": s.world.tick,
                "agents": len(s.world.agents),
                "active": s.world.active_count(),
                "free_slots": len(s.free_slots),
                "tick_interval_ms": s.tick_interval_ms,
                "log_entries": len(s.world.log),
            }

    # -- clock ----------------------------------------------------------------

    def advance(self, session_id: str) -> Optional[dict]:
        """One world step; returns the snapshot (None while refining)."""
        s = self.session(session_id)
        with s.lock:
            if s.phase == "refining":
                return None
            events = engine.step(s.world, s.compilation)
            snapshot = s.snapshot(events)
            for conn in s.connections.values():
                if conn.pending_snapshot is not None:
                    conn.skipped += 1
                conn.pending_snapshot = snapshot
            return snapshot

    # -- client protocol --------------------------------------------------------

    def register_connection(self, session_id: str, connection_id: str) -> Connection:
        s = self.session(session_id)
        with s.lock:
            conn = s.connections.get(connection_id)
            if conn is None:
                conn = Connection(id=connection_id)
                s.connections[connection_id] = conn
            return conn

    def drop_connection(self, session_id: str, connection_id: str) -> None:
        s = self.session(session_id)
        with s.lock:
            conn = s.connections.pop(connection_id, None)
            if conn and conn.agent_id is not None:
                engine.deactivate_agent(s.world, conn.agent_id)

    def handle_message(self, session_id: str, connection_id: str, msg) -> list[dict]:
        """Apply one client frame; returns the reply frames for that client.

        Broadcast frames (phase changes, refinement results) go to every
        connection's outbox and are delivered with its next poll.
        """
        s = self.session(session_id)
        with s.lock:
            conn = s.connections.get(connection_id)
            if conn is None:
                conn = Connection(id=connection_id)
                s.connections[connection_id] = conn
            if not isinstance(msg, dict) or "type" not in msg:
                return [{"type": "rejected", "reason": "MalformedMessage"}]
            kind = msg["type"]

            if kind == "join":
                if conn.agent_id is not None:
                    return [{"type": "rejected", "reason": "AlreadyJoined"}]
                if not s.free_slots:
                    return [{"type": "rejected", "reason": "NoFreeSlot"}]
                agent_id = s.free_slots.pop(0)
                engine.activate_human(s.world, agent_id)
                conn.agent_id = agent_id
                if s.phase == "deductive":
                    self._set_phase(s, "participatory")
                return [
                    {
                        "type": "joined",
                        "agent_id": agent_id,
                        "node_id": s.world.agents[agent_id].state.node_id,
                        "network": network_to_doc(s.scenario.network),
                        "compilation": s.compilation.to_doc(),
                    }
                ]

            if kind == "act":
                if conn.agent_id is None:
                    return [{"type": "rejected", "reason": "NotJoined"}]
                action = msg.get("action")
                if not isinstance(action, int):
                    return [{"type": "rejected", "reason": "MalformedMessage"}]
                try:
                    engine.inject_human_action(
                        s.world, conn.agent_id, action, s.compilation
                    )
                except engine.InvalidAction:
                    return [{"type": "rejected", "reason": "InvalidAction"}]
                except engine.EngineError as exc:
                    return [{"type": "rejected", "reason": type(exc).__name__}]
                return [{"type": "ack"}]

            if kind == "leave":
                if conn.agent_id is not None:
                    engine.deactivate_agent(s.world, conn.agent_id)
                    conn.agent_id = None  # agent record persists in the log
                return [{"type": "ack"}]

            return [{"type": "rejected", "reason": "MalformedMessage"}]

    def poll(self, session_id: str, connection_id: str) -> list[dict]:
        """Frames queued for one connection: broadcasts, then the latest tick."""
        s = self.session(session_id)
        with s.lock:
            conn = s.connections.get(connection_id)
            if conn is None:
                return []
            frames = list(conn.outbox)
            conn.outbox.clear()
            if conn.pending_snapshot is not None:
                frames.append(
                    {
                        "type": "tick",
                        "snapshot": conn.pending_snapshot,
                        "skipped": conn.skipped,
                    }
                )
                conn.pending_snapshot = None
                conn.skipped = 0
            return frames

    # -- refinement --------------------------------------------------------------

    def _set_phase(self, s: Session, phase: str) -> None:
        if PHASES.index(phase) < PHASES.index(s.phase):
            raise PhaseError(f"cannot move backward from {s.phase} to {phase}")
        s.phase = phase
        for conn in s.connections.values():
            conn.outbox.append({"type": "phase", "phase": phase})

    def run_participatory_cycle(
        self, session_id: str, config: irl.IrlConfig = irl.IrlConfig()
    ) -> dict:
        """Estimate, recover, validate, re-deploy; returns the three artifacts."""
        s = self.session(session_id)
        with s.lock:
            if s.phase not in ("participatory", "deductive"):
                raise PhaseError(f"cycle already ran (phase {s.phase})")
            if s.world.log.count_source(SOURCE_HUMAN) == 0:
                raise NoHumanData("no human trajectories recorded yet")
            self._set_phase(s, "refining")
            log = s.world.log
            compilation = s.compilation

        # solve outside the lock: the world is paused (refining), and
        # status/poll stay responsive while the LP runs
        observed = irl.estimate_policy(
            log, compilation.n_states, compilation.n_actions
        )
        estimate = irl.recover_reward(compilation.dynamics, observed, config)
        report = irl.validate_recovery(compilation.dynamics, estimate, observed)
        refined_policy = irl.optimal_policy_for(compilation.dynamics, estimate.values)

        with s.lock:
            s.world.policy_override = refined_policy
            s.refined_policy = refined_policy
            result = {
                "reward_estimate": estimate.to_doc(),
                "validation_report": report.to_doc(),
                "refined_policy": [int(a) for a in refined_policy],
            }
            s.last_report = result
            self._set_phase(s, "refined")
            for conn in s.connections.values():
                conn.outbox.append({"type": "refined", "report": result})
            return result

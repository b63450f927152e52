"""Trajectory logs: append-only (tick, agent, source, state, action) records.

Logs are the demonstration corpus for reward recovery and the authoritative
record of a simulation run, so they are kept compact (columnar ``array``
storage, millions of entries without blowing up memory) and carry the
generator name and seed needed to reproduce the run that wrote them.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .rng import GENERATOR_NAME

SOURCE_VIRTUAL = 0
SOURCE_HUMAN = 1
SOURCE_GPS = 2

SOURCE_NAMES = {SOURCE_VIRTUAL: "virtual", SOURCE_HUMAN: "human", SOURCE_GPS: "gps"}


class LogEntry(NamedTuple):
    tick: int
    agent_id: int
    source: int
    state: int
    action: int


class TrajectoryLog:
    """Columnar log of simulation steps, ordered by (tick, agent_id)."""

    __slots__ = ("generator", "seed", "_tick", "_agent", "_source", "_state", "_action")

    def __init__(self, generator: str = GENERATOR_NAME, seed: int = 0):
        self.generator = generator
        self.seed = seed
        self._tick = array("q")
        self._agent = array("q")
        self._source = array("b")
        self._state = array("q")
        self._action = array("q")

    def append(self, tick: int, agent_id: int, source: int, state: int, action: int) -> None:
        self._tick.append(tick)
        self._agent.append(agent_id)
        self._source.append(source)
        self._state.append(state)
        self._action.append(action)

    def extend(self, entries: Iterable[LogEntry]) -> None:
        for e in entries:
            self.append(*e)

    def __len__(self) -> int:
        return len(self._tick)

    def __getitem__(self, i: int) -> LogEntry:
        return LogEntry(
            self._tick[i], self._agent[i], self._source[i], self._state[i], self._action[i]
        )

    def __iter__(self) -> Iterator[LogEntry]:
        return map(
            LogEntry, self._tick, self._agent, self._source, self._state, self._action
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrajectoryLog):
            return NotImplemented
        return (
            self.generator == other.generator
            and self.seed == other.seed
            and self._tick == other._tick
            and self._agent == other._agent
            and self._source == other._source
            and self._state == other._state
            and self._action == other._action
        )

    def columns(self) -> dict[str, np.ndarray]:
        """Read-only numpy views over the stored columns."""
        return {
            "tick": np.frombuffer(self._tick, dtype=np.int64),
            "agent_id": np.frombuffer(self._agent, dtype=np.int64),
            "source": np.frombuffer(self._source, dtype=np.int8),
            "state": np.frombuffer(self._state, dtype=np.int64),
            "action": np.frombuffer(self._action, dtype=np.int64),
        }

    def sort(self) -> None:
        """Restore (tick, agent_id) ordering after out-of-order extends."""
        if not len(self):
            return
        cols = self.columns()
        order = np.lexsort((cols["agent_id"], cols["tick"]))
        if np.array_equal(order, np.arange(len(order))):
            return
        self._tick = array("q", cols["tick"][order].tolist())
        self._agent = array("q", cols["agent_id"][order].tolist())
        self._source = array("b", cols["source"][order].tolist())
        self._state = array("q", cols["state"][order].tolist())
        self._action = array("q", cols["action"][order].tolist())

    def is_sorted(self) -> bool:
        cols = self.columns()
        keys = cols["tick"] * (cols["agent_id"].max() + 1 if len(self) else 1) + cols["agent_id"]
        return bool(np.all(np.diff(keys) >= 0))

    def count_source(self, source: int) -> int:
        return int((self.columns()["source"] == source).sum()) if len(self) else 0


@dataclass(frozen=True)
class Trajectory:
    """One agent's visited states plus the action taken at each but the last."""

    source: int
    states: tuple[int, ...]
    actions: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.actions) not in (len(self.states) - 1, len(self.states)):
            raise ValueError(
                f"{len(self.actions)} actions do not fit {len(self.states)} states"
            )

    def append_to(self, log: TrajectoryLog, agent_id: int, start_tick: int = 0) -> None:
        """Write the (state, action) pairs; the trailing action-less state is dropped."""
        for i, action in enumerate(self.actions):
            log.append(start_tick + i, agent_id, self.source, self.states[i], action)

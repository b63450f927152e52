"""Deterministic discrete-time multiagent simulation with trajectory logging.

One world step advances every active agent in ascending id order: virtual
agents follow their rule-based behavior (or, after refinement, a fixed
policy), human agents apply whatever action their controller queued since
the previous tick (depth-1 queue, latest wins) or stay put. Every applied
(state, action) pair lands in the log, so a scenario, its seed, and the
logged human actions replay a session exactly.

Virtual agents never consume randomness on account of humans (there is no
collision or congestion coupling), which is what makes live sessions
replayable offline: the virtual side is a pure function of scenario + seed.
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .agents import AgentProfile, AgentState, streets_policy_step
from .logs import SOURCE_HUMAN, SOURCE_VIRTUAL, TrajectoryLog
from .network import MdpCompilation, Router, StreetNetwork, validate_network
from .rng import GENERATOR_NAME, SplitMix64, derive_seed

#: substream ids for seeds derived from the scenario seed
_STREAM_WORLD = 0
_STREAM_HUMAN_START = 1

#: effectively unlimited clock for steered (human) agents
_HUMAN_TIME = 2**31 - 1

#: sampled schedules never exceed this many targets
MAX_SAMPLED_TARGETS = 200


class EngineError(Exception):
    pass


class InvalidScenario(EngineError):
    pass


class UnknownAgent(EngineError):
    pass


class NotHumanAgent(EngineError):
    pass


class InvalidAction(EngineError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce a run: world shape plus the seed."""

    network: StreetNetwork
    profiles: tuple[tuple[AgentProfile, int], ...]
    human_slots: int
    exit_node: int
    ticks: int
    seed: int
    slip_probability: float = 0.05
    discount: float = 0.95


@dataclass
class Agent:
    id: int
    source: int
    profile: AgentProfile
    state: AgentState
    active: bool


@dataclass(frozen=True)
class Event:
    kind: str  # Arrived | Deviated | Deactivated
    tick: int
    agent_id: int
    node: Optional[int] = None
    detail: str = ""


@dataclass
class World:
    tick: int
    agents: list[Agent]
    rng: SplitMix64
    log: TrajectoryLog
    scenario: Scenario
    router: Router
    policy_override: Optional[np.ndarray] = None
    pending_actions: dict[int, int] = field(default_factory=dict)

    def agent(self, agent_id: int) -> Agent:
        if 0 <= agent_id < len(self.agents):
            return self.agents[agent_id]
        raise UnknownAgent(f"no agent {agent_id}")

    def active_count(self) -> int:
        return sum(1 for a in self.agents if a.active)


def _sample_schedule(
    template: AgentProfile,
    net: StreetNetwork,
    rng: SplitMix64,
    router: Router,
    start: int,
    mean_edge_length: float,
) -> tuple[int, ...]:
    """Targets drawn among building nodes, weighted by demographic appeal.

    Draws until the estimated itinerary (shortest-path meters converted to
    hops at the network's mean edge length) fills the agent's time budget,
    so agents stay occupied for roughly their whole stay.
    """
    candidates = net.building_nodes
    cumulative = None
    if candidates:
        key = template.demographic_key
        weights = [net.node_by_id[b].building.appeal_for(key) for b in candidates]
        if not any(w > 0 for w in weights):
            weights = [1.0] * len(candidates)
        cumulative = list(itertools.accumulate(weights))
    else:
        candidates = tuple(n.id for n in net.nodes)

    targets: list[int] = []
    prev = start
    estimated_ticks = 0.0
    while len(targets) < MAX_SAMPLED_TARGETS and (
        estimated_ticks < template.total_time or len(targets) < 3
    ):
        if cumulative is None:
            target = candidates[rng.randrange(len(candidates))]
        else:
            u = rng.random() * cumulative[-1]
            target = candidates[min(bisect.bisect_right(cumulative, u), len(candidates) - 1)]
        targets.append(target)
        hops = router.distance(prev, target) / mean_edge_length
        estimated_ticks += max(hops / template.speed, 1.0)
        prev = target
    return tuple(targets)


def human_start_node(scenario: Scenario, slot: int) -> int:
    """Seeded start node for a human slot; independent of the virtual stream."""
    rng = SplitMix64(derive_seed(scenario.seed, _STREAM_HUMAN_START) + slot)
    node_ids = tuple(n.id for n in scenario.network.nodes)
    return node_ids[rng.randrange(len(node_ids))]


def init_world(scenario: Scenario) -> World:
    check = validate_network(scenario.network)
    if not check.ok:
        raise InvalidScenario("; ".join(str(v) for v in check.violations))
    if scenario.human_slots < 0:
        raise InvalidScenario("human_slots must be nonnegative")
    if any(count < 0 for _, count in scenario.profiles):
        raise InvalidScenario("profile counts must be nonnegative")
    if scenario.exit_node not in scenario.network.node_by_id:
        raise InvalidScenario(f"exit_node {scenario.exit_node} not in network")
    if not 0.0 <= scenario.slip_probability < 0.5:
        raise InvalidScenario("slip_probability must be in [0, 0.5)")
    if not 0.0 <= scenario.discount < 1.0:
        raise InvalidScenario("discount must be in [0, 1)")
    if scenario.ticks < 0:
        raise InvalidScenario("ticks must be nonnegative")

    net = scenario.network
    rng = SplitMix64(derive_seed(scenario.seed, _STREAM_WORLD))
    node_ids = tuple(n.id for n in net.nodes)
    router = Router(net)
    mean_edge_length = (
        sum(e.length for e in net.edges) / len(net.edges) if net.edges else 1.0
    )
    agents: list[Agent] = []
    for template, count in scenario.profiles:
        for _ in range(count):
            start = node_ids[rng.randrange(len(node_ids))]
            schedule = template.schedule or _sample_schedule(
                template, net, rng, router, start, mean_edge_length
            )
            profile = replace(template, schedule=tuple(schedule))
            agents.append(
                Agent(
                    id=len(agents),
                    source=SOURCE_VIRTUAL,
                    profile=profile,
                    state=AgentState(
                        node_id=start, remaining_time=profile.total_time
                    ),
                    active=True,
                )
            )
    for slot in range(scenario.human_slots):
        start = human_start_node(scenario, slot)
        profile = AgentProfile(
            income_band="mid",
            gender="other",
            speed=1,
            visual_range=0,
            fixation=1.0,
            schedule=(scenario.exit_node,),
            total_time=_HUMAN_TIME,
        )
        agents.append(
            Agent(
                id=len(agents),
                source=SOURCE_HUMAN,
                profile=profile,
                state=AgentState(node_id=start, remaining_time=_HUMAN_TIME),
                active=False,
            )
        )
    return World(
        tick=0,
        agents=agents,
        rng=rng,
        log=TrajectoryLog(generator=GENERATOR_NAME, seed=scenario.seed),
        scenario=scenario,
        router=router,
    )


def activate_human(world: World, agent_id: int) -> None:
    agent = world.agent(agent_id)
    if agent.source != SOURCE_HUMAN:
        raise NotHumanAgent(f"agent {agent_id} is not a human slot")
    agent.active = True
    agent.state.remaining_time = _HUMAN_TIME


def deactivate_agent(world: World, agent_id: int) -> None:
    world.agent(agent_id).active = False
    world.pending_actions.pop(agent_id, None)


def inject_human_action(
    world: World, agent_id: int, action_index: int, compilation: MdpCompilation
) -> None:
    """Queue an action for the next step. Depth-1 queue, latest injection wins."""
    agent = world.agent(agent_id)
    if agent.source != SOURCE_HUMAN:
        raise NotHumanAgent(f"agent {agent_id} is not a human agent")
    if not agent.active:
        raise UnknownAgent(f"human agent {agent_id} is not active")
    state = compilation.state_of_node[agent.state.node_id]
    if not compilation.is_valid_input(state, action_index):
        raise InvalidAction(
            f"action {action_index} is not a move or stay at node {agent.state.node_id}"
        )
    world.pending_actions[agent_id] = action_index


def step(world: World, compilation: MdpCompilation) -> list[Event]:
    """Advance the world one tick; see the module docstring for ordering."""
    events: list[Event] = []
    tick = world.tick
    log = world.log
    state_of_node = compilation.state_of_node
    override = world.policy_override
    exit_node = world.scenario.exit_node

    for agent in world.agents:
        if not agent.active:
            continue
        state_rec = agent.state

        if agent.source == SOURCE_HUMAN:
            s = state_of_node[state_rec.node_id]
            action = world.pending_actions.pop(agent.id, compilation.stay_action(s))
            log.append(tick, agent.id, SOURCE_HUMAN, s, action)
            state_rec.node_id = compilation.target_of_action(s, action)
        elif override is not None:
            for _ in range(agent.profile.speed):
                s = state_of_node[state_rec.node_id]
                action = int(override[s])
                log.append(tick, agent.id, SOURCE_VIRTUAL, s, action)
                state_rec.node_id = compilation.target_of_action(s, action)
        else:
            for hop in range(agent.profile.speed):
                outcome = streets_policy_step(
                    state_rec,
                    agent.profile,
                    world.scenario.network,
                    world.rng,
                    router=world.router,
                    exit_node=exit_node,
                    allow_deviation=(hop == 0),
                )
                if outcome.arrived_at is not None:
                    events.append(
                        Event("Arrived", tick, agent.id, outcome.arrived_at)
                    )
                if outcome.deviated_to is not None:
                    events.append(
                        Event("Deviated", tick, agent.id, outcome.deviated_to)
                    )
                if outcome.exited:
                    agent.active = False
                    events.append(
                        Event("Deactivated", tick, agent.id, state_rec.node_id, "exit")
                    )
                    break
                s = state_of_node[state_rec.node_id]
                action = compilation.action_for_move(s, outcome.next_node)
                log.append(tick, agent.id, SOURCE_VIRTUAL, s, action)
                state_rec.node_id = outcome.next_node

        if agent.active:
            state_rec.remaining_time -= 1
            if state_rec.remaining_time <= 0:
                agent.active = False
                events.append(
                    Event("Deactivated", tick, agent.id, state_rec.node_id, "time")
                )

    world.tick += 1
    return events


def run(world: World, compilation: MdpCompilation, ticks: int) -> TrajectoryLog:
    """Step repeatedly; stops early once every agent is inactive."""
    if ticks < 0:
        raise ValueError("ticks must be nonnegative")
    for _ in range(ticks):
        if world.active_count() == 0:
            break
        step(world, compilation)
    return world.log


def replay_human_actions(
    scenario: Scenario, log: TrajectoryLog, compilation: MdpCompilation, ticks: int
) -> World:
    """Rebuild a session offline: scenario + seed + logged human actions.

    Human agents are activated at the tick of their first logged entry and
    fed their logged actions; virtual agents re-derive identically from the
    seed. Returns the world after ``ticks`` steps.
    """
    world = init_world(scenario)
    human_entries: dict[int, dict[int, int]] = {}
    first_seen: dict[int, int] = {}
    last_seen: dict[int, int] = {}
    for entry in log:
        if entry.source == SOURCE_HUMAN:
            human_entries.setdefault(entry.tick, {})[entry.agent_id] = entry.action
            first_seen.setdefault(entry.agent_id, entry.tick)
            last_seen[entry.agent_id] = entry.tick
    for _ in range(ticks):
        for agent_id, start_tick in first_seen.items():
            if start_tick == world.tick:
                activate_human(world, agent_id)
            elif last_seen[agent_id] < world.tick and world.agents[agent_id].active:
                deactivate_agent(world, agent_id)  # the participant left
        for agent_id, action in human_entries.get(world.tick, {}).items():
            inject_human_action(world, agent_id, action, compilation)
        step(world, compilation)
    return world

"""Rule-based pedestrian behavior: schedules, sightseeing, deviations.

Agents walk shortest paths between scheduled targets but may be lured off
route by buildings they can see. The pull of a building combines four
factors multiplicatively, so any single zero (wrong building type for the
current activity, unattractive to this demographic, perfectly consistent
personality, or no time left) kills the deviation outright:

    pull = activity/building match
         * attractiveness for the agent's demographic
         * (1 - fixation)
         * remaining share of the agent's time budget

One uniform draw per tick decides; buildings are scanned in ascending node
id and the first whose pull exceeds the draw wins, so a recorded generator
stream replays a run exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .network import Building, Router, StreetNetwork
from .rng import SplitMix64

INCOME_BANDS = ("low", "mid", "high")
GENDERS = ("female", "male", "other")
ACTIVITIES = ("shopping", "working", "leisure")

#: ordinal encoding of how building types suit activities; scenario authors
#: can rescale per-building attractiveness if they need other gradings
ACTIVITY_MATCH = {
    ("shopping", "shop"): 1.0,
    ("shopping", "public"): 0.3,
    ("shopping", "office"): 0.1,
    ("working", "office"): 1.0,
    ("working", "shop"): 0.1,
    ("working", "public"): 0.1,
    ("leisure", "public"): 1.0,
    ("leisure", "shop"): 0.5,
    ("leisure", "office"): 0.1,
}

#: the activity an agent is engaged in while heading to a building of a kind
ACTIVITY_FOR_KIND = {"shop": "shopping", "office": "working", "public": "leisure"}


@dataclass(frozen=True)
class AgentProfile:
    """Who the agent is and how it behaves.

    ``speed`` is whole edges per tick, ``visual_range`` a hop radius, and
    ``fixation`` in [0, 1] measures resistance to leaving the schedule.
    An empty schedule on a scenario template means "sample targets at spawn";
    instantiated agents always carry a concrete schedule.
    """

    income_band: str
    gender: str
    speed: int
    visual_range: int
    fixation: float
    schedule: tuple[int, ...]
    total_time: int

    def __post_init__(self):
        if self.income_band not in INCOME_BANDS:
            raise ValueError(f"unknown income band {self.income_band!r}")
        if self.gender not in GENDERS:
            raise ValueError(f"unknown gender {self.gender!r}")
        if self.speed not in (1, 2):
            raise ValueError("speed must be 1 or 2 edges per tick")
        if self.visual_range < 0:
            raise ValueError("visual_range must be nonnegative")
        if not 0.0 <= self.fixation <= 1.0:
            raise ValueError("fixation must be in [0, 1]")
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        object.__setattr__(self, "schedule", tuple(self.schedule))

    @property
    def demographic_key(self) -> str:
        return f"{self.income_band}:{self.gender}"


@dataclass
class AgentState:
    """Live position, progress through the schedule, and the internal clock."""

    node_id: int
    schedule_index: int = 0
    remaining_time: int = 0
    deviating_to: Optional[int] = None


@dataclass(frozen=True)
class StepResult:
    """Outcome of one routing decision: where to go and what happened."""

    next_node: int
    arrived_at: Optional[int] = None
    deviated_to: Optional[int] = None
    exited: bool = False


def deviation_probability(
    profile: AgentProfile,
    building: Building,
    activity_kind: str,
    remaining_fraction: float,
) -> float:
    """Chance this building pulls the agent off schedule this tick."""
    if activity_kind not in ACTIVITIES:
        raise ValueError(f"unknown activity {activity_kind!r}")
    if not 0.0 <= remaining_fraction <= 1.0:
        raise ValueError("remaining_fraction must be in [0, 1]")
    match = ACTIVITY_MATCH.get((activity_kind, building.kind), 0.0)
    pull = (
        match
        * building.appeal_for(profile.demographic_key)
        * (1.0 - profile.fixation)
        * remaining_fraction
    )
    return min(max(pull, 0.0), 1.0)


def current_activity(profile: AgentProfile, net: StreetNetwork, target: Optional[int]) -> str:
    """Activity implied by the building at the current target (default leisure)."""
    if target is not None:
        node = net.node_by_id.get(target)
        if node is not None and node.building is not None:
            return ACTIVITY_FOR_KIND[node.building.kind]
    return "leisure"


def streets_policy_step(
    agent: AgentState,
    profile: AgentProfile,
    net: StreetNetwork,
    rng: SplitMix64,
    router: Optional[Router] = None,
    exit_node: Optional[int] = None,
    allow_deviation: bool = True,
) -> StepResult:
    """Pick the next node for one edge move; mutates only schedule bookkeeping.

    Ongoing deviations run to their building first. Completed targets advance
    the schedule; an exhausted schedule routes to ``exit_node`` and reports
    ``exited`` once standing there. Otherwise buildings within sight get one
    chance (a single draw per tick, pass ``allow_deviation=False`` for the
    extra moves of fast agents) to start a deviation. The caller applies the
    move and decrements the clock.
    """
    if router is None:
        router = Router(net)
    here = agent.node_id
    arrived = None
    deviated = None

    if agent.deviating_to is not None and agent.deviating_to == here:
        arrived = here
        agent.deviating_to = None

    schedule = profile.schedule
    while agent.schedule_index < len(schedule) and schedule[agent.schedule_index] == here:
        arrived = here
        agent.schedule_index += 1

    if agent.deviating_to is not None:
        target = agent.deviating_to
    elif agent.schedule_index < len(schedule):
        target = schedule[agent.schedule_index]
    elif exit_node is not None:
        if here == exit_node:
            return StepResult(next_node=here, arrived_at=arrived, exited=True)
        target = exit_node
    else:
        return StepResult(next_node=here, arrived_at=arrived)

    if (
        allow_deviation
        and agent.deviating_to is None
        and profile.visual_range > 0
    ):
        in_sight = router.buildings_within(here, profile.visual_range)
        if in_sight:
            activity = current_activity(profile, net, target)
            fraction = min(max(agent.remaining_time / profile.total_time, 0.0), 1.0)
            draw = rng.random()
            # hot loop: same arithmetic as deviation_probability, unchecked
            node_by_id = net.node_by_id
            demo_key = profile.demographic_key
            consistency = 1.0 - profile.fixation
            for node_id in in_sight:
                building = node_by_id[node_id].building
                pull = (
                    ACTIVITY_MATCH.get((activity, building.kind), 0.0)
                    * float(building.attractiveness.get(demo_key, 0.0))
                    * consistency
                    * fraction
                )
                if draw < pull:
                    agent.deviating_to = node_id
                    deviated = node_id
                    target = node_id
                    break

    if target == here:
        return StepResult(next_node=here, arrived_at=arrived, deviated_to=deviated)
    return StepResult(
        next_node=router.next_hop(here, target),
        arrived_at=arrived,
        deviated_to=deviated,
    )

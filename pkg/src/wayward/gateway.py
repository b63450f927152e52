"""File formats and trace ingestion.

Networks and scenarios are versioned JSON documents; trajectory logs are
line-delimited text with a header (human-inspectable, streams well at
millions of records); GPS traces are plain ``timestamp,x,y`` CSV in the
network's planar frame. Every load/save pair round-trips structurally.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

from .agents import AgentProfile
from .engine import Scenario
from .logs import SOURCE_GPS, Trajectory, TrajectoryLog
from .network import Building, Edge, MdpCompilation, Node, Router, StreetNetwork, validate_network

NETWORK_SCHEMA_VERSION = 1
SCENARIO_SCHEMA_VERSION = 1
LOG_HEADER_PREFIX = "wayward-log v1"

DEFAULT_SLIP = 0.05
DEFAULT_DISCOUNT = 0.95


class GatewayError(Exception):
    pass


class ParseError(GatewayError):
    def __init__(self, message, line=None, offset=None):
        self.line = line
        self.offset = offset
        where = ""
        if line is not None:
            where += f" at line {line}"
        if offset is not None:
            where += f" (byte {offset})"
        super().__init__(f"{message}{where}")


class SchemaVersionMismatch(GatewayError):
    pass


class IoFailure(GatewayError):
    pass


class EmptyTrace(GatewayError):
    pass


@dataclass(frozen=True)
class GpsTrace:
    """Timestamped planar positions; timestamps strictly increase."""

    points: tuple[tuple[float, float, float], ...]  # (timestamp, x, y)

    def __post_init__(self):
        stamps = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise ValueError("timestamps must be strictly increasing")


def _read_text(path) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _parse_json(text: str, path) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno, offset=exc.pos) from exc


# -- street networks ---------------------------------------------------------


def network_to_doc(net: StreetNetwork) -> dict:
    nodes = []
    for n in net.nodes:
        building = None
        if n.building is not None:
            building = {
                "id": n.building.id,
                "kind": n.building.kind,
                "attractiveness": dict(n.building.attractiveness),
            }
        nodes.append({"id": n.id, "x": n.x, "y": n.y, "building": building})
    edges = [{"from": e.a, "to": e.b, "length": e.length} for e in net.edges]
    return {"version": NETWORK_SCHEMA_VERSION, "nodes": nodes, "edges": edges}


def network_from_doc(doc: dict, source="<doc>") -> StreetNetwork:
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: network document must be an object")
    version = doc.get("version")
    if version != NETWORK_SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"{source}: network schema version {version!r}, expected {NETWORK_SCHEMA_VERSION}"
        )
    try:
        nodes = []
        for nd in doc["nodes"]:
            building = None
            if nd.get("building") is not None:
                bd = nd["building"]
                building = Building(
                    id=int(bd["id"]),
                    kind=str(bd["kind"]),
                    attractiveness={str(k): float(v) for k, v in bd.get("attractiveness", {}).items()},
                )
            nodes.append(
                Node(id=int(nd["id"]), x=float(nd["x"]), y=float(nd["y"]), building=building)
            )
        edges = [
            Edge(int(ed["from"]), int(ed["to"]), float(ed["length"]))
            for ed in doc["edges"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: malformed network field ({exc})") from exc
    return StreetNetwork(nodes, edges)


def save_network(net: StreetNetwork, path) -> None:
    _write_text(path, json.dumps(network_to_doc(net), indent=2, sort_keys=True) + "\n")


def load_network(path) -> StreetNetwork:
    return network_from_doc(_parse_json(_read_text(path), path), source=str(path))


# -- scenarios ----------------------------------------------------------------


def profile_to_doc(profile: AgentProfile) -> dict:
    return {
        "income_band": profile.income_band,
        "gender": profile.gender,
        "speed": profile.speed,
        "visual_range": profile.visual_range,
        "fixation": profile.fixation,
        "schedule": list(profile.schedule),
        "total_time": profile.total_time,
    }


def profile_from_doc(doc: dict) -> AgentProfile:
    return AgentProfile(
        income_band=str(doc["income_band"]),
        gender=str(doc["gender"]),
        speed=int(doc["speed"]),
        visual_range=int(doc["visual_range"]),
        fixation=float(doc["fixation"]),
        schedule=tuple(int(t) for t in doc.get("schedule", [])),
        total_time=int(doc["total_time"]),
    )


def scenario_to_doc(scenario: Scenario, network_path: str) -> dict:
    return {
        "version": SCENARIO_SCHEMA_VERSION,
        "network": network_path,
        "profiles": [
            {"profile": profile_to_doc(p), "count": count}
            for p, count in scenario.profiles
        ],
        "human_slots": scenario.human_slots,
        "exit_node": scenario.exit_node,
        "ticks": scenario.ticks,
        "seed": scenario.seed,
        "slip_probability": scenario.slip_probability,
        "discount": scenario.discount,
    }


def save_scenario(scenario: Scenario, path, network_path: str) -> None:
    """Scenario JSON referencing the network file (path kept as written)."""
    doc = scenario_to_doc(scenario, network_path)
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_scenario(path) -> Scenario:
    """Load and fully validate a scenario, resolving its network reference."""
    from .engine import InvalidScenario

    doc = _parse_json(_read_text(path), path)
    version = doc.get("version")
    if version != SCENARIO_SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: scenario schema version {version!r}, expected {SCENARIO_SCHEMA_VERSION}"
        )
    if "seed" not in doc:
        raise InvalidScenario("seed required (runs must be reproducible)")
    network_ref = doc.get("network")
    if not isinstance(network_ref, str):
        raise InvalidScenario("scenario must reference a network file")
    network_path = network_ref
    if not os.path.isabs(network_path):
        network_path = os.path.join(os.path.dirname(os.path.abspath(path)), network_ref)
    net = load_network(network_path)

    try:
        profiles = tuple(
            (profile_from_doc(item["profile"]), int(item["count"]))
            for item in doc.get("profiles", [])
        )
        scenario = Scenario(
            network=net,
            profiles=profiles,
            human_slots=int(doc.get("human_slots", 0)),
            exit_node=int(doc["exit_node"]),
            ticks=int(doc["ticks"]),
            seed=int(doc["seed"]),
            slip_probability=float(doc.get("slip_probability", DEFAULT_SLIP)),
            discount=float(doc.get("discount", DEFAULT_DISCOUNT)),
        )
    except InvalidScenario:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"{path}: {exc}") from exc
    if any(count < 0 for _, count in scenario.profiles):
        raise InvalidScenario("profile counts must be nonnegative")
    check = validate_network(net)
    if not check.ok:
        raise InvalidScenario("; ".join(str(v) for v in check.violations))
    if scenario.exit_node not in net.node_by_id:
        raise InvalidScenario(f"exit_node {scenario.exit_node} not in network")
    return scenario


# -- trajectory logs ----------------------------------------------------------


def write_log(log: TrajectoryLog, path) -> None:
    lines = [f"{LOG_HEADER_PREFIX} generator={log.generator} seed={log.seed}"]
    for e in log:
        lines.append(f"{e.tick} {e.agent_id} {e.source} {e.state} {e.action}")
    _write_text(path, "\n".join(lines) + "\n")


def read_log(path) -> TrajectoryLog:
    text = _read_text(path)
    lines = text.splitlines()
    if not lines:
        raise ParseError(f"{path}: missing header line", line=1)
    header = lines[0]
    if not header.startswith(LOG_HEADER_PREFIX):
        raise ParseError(f"{path}: bad log header {header!r}", line=1)
    fields = dict(
        part.split("=", 1) for part in header[len(LOG_HEADER_PREFIX) :].split() if "=" in part
    )
    try:
        log = TrajectoryLog(generator=fields["generator"], seed=int(fields["seed"]))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: header missing generator/seed ({exc})", line=1) from exc
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(
                f"{path}: expected 5 fields, got {len(parts)}", line=line_no
            )
        try:
            log.append(*(int(p) for p in parts))
        except ValueError as exc:
            raise ParseError(f"{path}: non-integer field ({exc})", line=line_no) from exc
    return log


# -- GPS ingestion -------------------------------------------------------------


def read_gps_csv(path) -> GpsTrace:
    text = _read_text(path)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty trace file", line=1)
    header = [h.strip().lower() for h in lines[0].split(",")]
    if header != ["timestamp", "x", "y"]:
        raise ParseError(f"{path}: expected header 'timestamp,x,y'", line=1)
    points = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"{path}: expected 3 fields", line=line_no)
        try:
            points.append((float(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ParseError(f"{path}: non-numeric field ({exc})", line=line_no) from exc
    try:
        return GpsTrace(points=tuple(points))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def snap_to_node(net: StreetNetwork, x: float, y: float) -> int:
    """Euclidean-nearest node; exact ties go to the lowest node id."""
    best_id, best_d2 = None, math.inf
    for node in net.nodes:  # nodes sorted by id, so ties keep the lowest
        d2 = (node.x - x) ** 2 + (node.y - y) ** 2
        if d2 < best_d2:
            best_id, best_d2 = node.id, d2
    return best_id


def ingest_gps(
    trace: GpsTrace, net: StreetNetwork, compilation: MdpCompilation, router: Router | None = None
) -> Trajectory:
    """Snap, collapse duplicates, bridge gaps, and emit a gps trajectory.

    Consecutive points snapping to the same node collapse; consecutive
    non-adjacent nodes are joined by the canonical shortest path, so the
    output is always a walk the network permits.
    """
    if not trace.points:
        raise EmptyTrace("trace has no points")
    if router is None:
        router = Router(net)
    snapped = [snap_to_node(net, x, y) for _, x, y in trace.points]
    nodes = [snapped[0]]
    for node_id in snapped[1:]:
        if node_id == nodes[-1]:
            continue
        if node_id in set(net.neighbors(nodes[-1])):
            nodes.append(node_id)
        else:
            nodes.extend(router.path(nodes[-1], node_id)[1:])
    states = tuple(compilation.state_of_node[n] for n in nodes)
    actions = tuple(
        compilation.action_for_move(states[i], nodes[i + 1])
        for i in range(len(nodes) - 1)
    )
    return Trajectory(source=SOURCE_GPS, states=states, actions=actions)


def append_trajectory(log: TrajectoryLog, trajectory: Trajectory) -> int:
    """Add a trajectory under a fresh agent id; restores log ordering."""
    next_id = max((e.agent_id for e in log), default=-1) + 1
    trajectory.append_to(log, agent_id=next_id, start_tick=0)
    log.sort()
    return next_id

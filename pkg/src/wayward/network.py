"""Street networks: validation, routing, compilation to dynamics, reduction.

A network is a connected undirected planar graph. Nodes are intersections or
entrances (optionally hosting one building); edges carry lengths in meters.
Compilation turns the graph into finite dynamics where each state is a node
and each action is "move to the k-th neighbor in ascending node-id order",
padded with an explicit stay action, so demonstration logs and recovered
rewards live on a common index space.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .mdp import MdpDynamics, validate_mdp
from .validation import ValidationResult, Violation

BUILDING_KINDS = ("shop", "office", "public")


class NetworkError(Exception):
    pass


class NoPathToTarget(NetworkError):
    """Defensive: validated networks are connected, so this should not occur."""


@dataclass(frozen=True)
class Building:
    id: int
    kind: str
    attractiveness: Mapping[str, float] = field(default_factory=dict)

    def appeal_for(self, demographic_key: str) -> float:
        """Attractiveness for one demographic; unknown demographics see 0."""
        return float(self.attractiveness.get(demographic_key, 0.0))


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    building: Optional[Building] = None


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    length: float


class StreetNetwork:
    """Immutable graph with adjacency precomputed for routing."""

    def __init__(self, nodes: Sequence[Node], edges: Sequence[Edge]):
        self.nodes = tuple(sorted(nodes, key=lambda n: n.id))
        self.edges = tuple(edges)
        self.node_by_id = {n.id: n for n in self.nodes}
        self.adjacency: dict[int, list[tuple[int, float]]] = {
            n.id: [] for n in self.nodes
        }
        for e in self.edges:
            if e.a in self.adjacency and e.b in self.adjacency:
                self.adjacency[e.a].append((e.b, e.length))
                self.adjacency[e.b].append((e.a, e.length))
        for bucket in self.adjacency.values():
            bucket.sort()
        self.building_nodes = tuple(
            n.id for n in self.nodes if n.building is not None
        )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def degree(self, node_id: int) -> int:
        return len(self.adjacency[node_id])

    def neighbors(self, node_id: int) -> list[int]:
        return [v for v, _ in self.adjacency[node_id]]

    def __eq__(self, other) -> bool:
        if not isinstance(other, StreetNetwork):
            return NotImplemented
        return self.nodes == other.nodes and sorted(
            (min(e.a, e.b), max(e.a, e.b), e.length) for e in self.edges
        ) == sorted((min(e.a, e.b), max(e.a, e.b), e.length) for e in other.edges)


def validate_network(net: StreetNetwork) -> ValidationResult:
    violations = []
    ids = set(net.node_by_id)
    seen_pairs = set()
    for e in net.edges:
        if e.a not in ids or e.b not in ids:
            violations.append(Violation("DanglingEdge", (e.a, e.b)))
            continue
        if e.a == e.b:
            violations.append(Violation("SelfEdge", (e.a,)))
            continue
        pair = (min(e.a, e.b), max(e.a, e.b))
        if pair in seen_pairs:
            violations.append(Violation("DuplicateEdge", pair))
        seen_pairs.add(pair)
        if e.length <= 0 or not np.isfinite(e.length):
            violations.append(Violation("BadEdgeLength", pair, f"length {e.length!r}"))

    building_ids = set()
    for n in net.nodes:
        if n.building is None:
            continue
        if n.building.id in building_ids:
            violations.append(Violation("DuplicateBuildingId", (n.building.id,)))
        building_ids.add(n.building.id)
        if n.building.kind not in BUILDING_KINDS:
            violations.append(
                Violation("UnknownBuildingKind", (n.id,), n.building.kind)
            )
        for key, value in n.building.attractiveness.items():
            if not 0.0 <= value <= 1.0:
                violations.append(
                    Violation(
                        "AttractivenessOutOfRange", (n.building.id, key), f"{value!r}"
                    )
                )

    if net.nodes and not violations:
        # connectivity only judged on structurally sound graphs
        seen = {net.nodes[0].id}
        stack = [net.nodes[0].id]
        while stack:
            u = stack.pop()
            for v, _ in net.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != net.n_nodes:
            missing = sorted(ids - seen)[:5]
            violations.append(
                Violation("Disconnected", tuple(missing), f"{net.n_nodes - len(seen)} unreachable nodes")
            )
    return ValidationResult(tuple(violations))


class Router:
    """Shortest-path answers over one network, memoized per destination.

    Paths minimize total edge length; among equal-length paths the
    lexicographically smallest node-id sequence wins, which makes every
    routing decision reproducible.
    """

    def __init__(self, net: StreetNetwork):
        self.net = net
        self._toward: dict[int, dict[int, int]] = {}
        self._dist: dict[int, dict[int, float]] = {}
        self._sight: dict[tuple[int, int], tuple[int, ...]] = {}

    def _ensure(self, dest: int) -> None:
        if dest in self._toward:
            return
        dist = {node.id: float("inf") for node in self.net.nodes}
        dist[dest] = 0.0
        heap = [(0.0, dest)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, length in self.net.adjacency[u]:
                nd = d + length
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        toward = {}
        for u, d in dist.items():
            if u == dest:
                toward[u] = u
            elif d < float("inf"):
                # smallest-id neighbor still on a shortest path: yields the
                # lexicographically smallest shortest node sequence
                toward[u] = next(
                    v
                    for v, length in self.net.adjacency[u]
                    if dist[v] + length == d
                )
        self._toward[dest] = toward
        self._dist[dest] = dist

    def distance(self, src: int, dest: int) -> float:
        self._ensure(dest)
        return self._dist[dest][src]

    def next_hop(self, src: int, dest: int) -> int:
        """First node after ``src`` on the canonical shortest path to ``dest``."""
        self._ensure(dest)
        hop = self._toward[dest].get(src)
        if hop is None:
            raise NoPathToTarget(f"no path from {src} to {dest}")
        return hop

    def path(self, src: int, dest: int) -> list[int]:
        nodes = [src]
        guard = self.net.n_nodes + 1
        while nodes[-1] != dest:
            nodes.append(self.next_hop(nodes[-1], dest))
            if len(nodes) > guard:
                raise NoPathToTarget(f"routing loop from {src} to {dest}")
        return nodes

    def buildings_within(self, node_id: int, hops: int) -> tuple[int, ...]:
        """Building nodes within a hop radius, ascending id, excluding here."""
        key = (node_id, hops)
        cached = self._sight.get(key)
        if cached is not None:
            return cached
        seen = {node_id}
        frontier = [node_id]
        for _ in range(hops):
            nxt = []
            for u in frontier:
                for v, _ in self.net.adjacency[u]:
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            frontier = nxt
        found = tuple(
            sorted(
                v
                for v in seen
                if v != node_id and self.net.node_by_id[v].building is not None
            )
        )
        self._sight[key] = found
        return found


@dataclass(frozen=True)
class MdpCompilation:
    """Bridge between a network and its finite dynamics.

    ``action_table[state]`` lists neighbor node ids ascending; action index
    ``degree`` is the canonical stay action and higher indices are padding
    aliases of stay.
    """

    dynamics: MdpDynamics
    state_of_node: dict[int, int]
    node_of_state: tuple[int, ...]
    action_table: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "_action_index",
            tuple(
                {nbr: a for a, nbr in enumerate(row)} for row in self.action_table
            ),
        )

    @property
    def n_states(self) -> int:
        return len(self.node_of_state)

    @property
    def n_actions(self) -> int:
        return self.dynamics.n_actions

    def stay_action(self, state: int) -> int:
        return len(self.action_table[state])

    def action_for_move(self, state: int, target_node: int) -> int:
        """Action index that heads to ``target_node`` (or stays in place)."""
        action = self._action_index[state].get(target_node)
        if action is not None:
            return action
        if target_node == self.node_of_state[state]:
            return self.stay_action(state)
        raise NetworkError(f"node {target_node} is not adjacent to state {state}")

    def target_of_action(self, state: int, action: int) -> int:
        """Node the action intends to reach; padding indices mean stay."""
        row = self.action_table[state]
        if 0 <= action < len(row):
            return row[action]
        return self.node_of_state[state]

    def is_valid_input(self, state: int, action: int) -> bool:
        """Moves plus the single canonical stay index; padding is rejected."""
        return 0 <= action <= self.stay_action(state)

    def to_doc(self) -> dict:
        return {
            "node_of_state": list(self.node_of_state),
            "action_table": [list(row) for row in self.action_table],
        }


def compile_mdp(
    net: StreetNetwork, slip_probability: float, discount: float
) -> MdpCompilation:
    """One state per node; moves slip back to the origin with fixed probability."""
    if not 0.0 <= slip_probability < 0.5:
        raise ValueError("slip_probability must be in [0, 0.5)")
    result = validate_network(net)
    if not result.ok:
        result.raise_if_invalid()

    node_of_state = tuple(n.id for n in net.nodes)
    state_of_node = {node_id: i for i, node_id in enumerate(node_of_state)}
    action_table = tuple(tuple(net.neighbors(node_id)) for node_id in node_of_state)
    max_degree = max((len(row) for row in action_table), default=0)
    n_actions = max_degree + 1
    n_states = len(node_of_state)

    transitions = np.zeros((n_actions, n_states, n_states))
    for s, row in enumerate(action_table):
        for a in range(n_actions):
            if a < len(row):
                transitions[a, s, state_of_node[row[a]]] += 1.0 - slip_probability
                transitions[a, s, s] += slip_probability
            else:
                transitions[a, s, s] = 1.0

    compilation = MdpCompilation(
        dynamics=MdpDynamics(transitions, discount),
        state_of_node=state_of_node,
        node_of_state=node_of_state,
        action_table=action_table,
    )
    check = validate_mdp(compilation.dynamics)
    if not check.ok:
        check.raise_if_invalid()
    return compilation


def reduce_network(net: StreetNetwork) -> tuple[StreetNetwork, dict[int, tuple[int, int]]]:
    """Contract building-free degree-2 nodes, preserving retained distances.

    Chains of contractible nodes between anchors collapse to single edges
    whose length is the chain total. A contraction that would create a
    duplicate or self edge (parallel chains, cycles) instead keeps the
    lowest-id interior node as an extra anchor and splits there; a network
    that is entirely one building-free cycle keeps its lowest-id node as the
    anchor. Returns the reduced network and a map from each removed node to
    the (a, b) endpoints of the replacement edge containing it.
    """
    check = validate_network(net)
    if not check.ok:
        check.raise_if_invalid()

    contractible = {
        n.id
        for n in net.nodes
        if n.building is None and net.degree(n.id) == 2
    }
    anchors = [n.id for n in net.nodes if n.id not in contractible]
    if not anchors and net.nodes:
        anchors = [net.nodes[0].id]  # whole network is one building-free cycle
        contractible.discard(anchors[0])

    kept: set[int] = set(anchors)
    new_edges: dict[tuple[int, int], float] = {}
    mapping: dict[int, tuple[int, int]] = {}

    def edge_key(u: int, v: int) -> tuple[int, int]:
        return (u, v) if u <= v else (v, u)

    def place_chain(path: list[int], lengths: list[float]) -> None:
        u, v = path[0], path[-1]
        interior = path[1:-1]
        key = edge_key(u, v)
        if not interior:
            if u == v or key in new_edges:
                raise NetworkError(f"duplicate edge {key} during reduction")
            new_edges[key] = lengths[0]
            return
        if u != v and key not in new_edges:
            new_edges[key] = float(sum(lengths))
            for w in interior:
                mapping[w] = key
            return
        # splitting here keeps the graph simple (no parallel or self edges)
        pivot = min(interior)
        kept.add(pivot)
        i = path.index(pivot)
        place_chain(path[: i + 1], lengths[:i])
        place_chain(path[i:], lengths[i:])

    chains: list[tuple[list[int], list[float]]] = []
    visited_directed: set[tuple[int, int]] = set()
    for start in sorted(anchors):
        for nbr, length in net.adjacency[start]:
            if (start, nbr) in visited_directed:
                continue
            path = [start, nbr]
            lengths = [length]
            prev = start
            while path[-1] in contractible:
                here = path[-1]
                onward = [(v, l) for v, l in net.adjacency[here] if v != prev]
                prev = here
                nxt, l = onward[0]
                path.append(nxt)
                lengths.append(l)
            visited_directed.add((start, nbr))
            visited_directed.add((path[-1], path[-2]))
            chains.append((path, lengths))

    # anchor-to-anchor edges are immutable, so they claim their keys before
    # any parallel chain tries to contract onto the same pair
    chains.sort(key=lambda c: (len(c[0]) > 2, c[0]))
    for path, lengths in chains:
        place_chain(path, lengths)

    reduced = StreetNetwork(
        nodes=[net.node_by_id[i] for i in sorted(kept)],
        edges=[Edge(a, b, length) for (a, b), length in sorted(new_edges.items())],
    )
    return reduced, mapping

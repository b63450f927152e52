"""Seeded synthetic worlds: random planar street networks and scenarios.

Networks come from a Delaunay triangulation of integer-coordinate points, so
they are connected and planar by construction. Edge lengths are rounded to
whole meters, which keeps sums of lengths exact in floating point (graph
reduction can then preserve shortest-path distances bit for bit). Optional
edge subdivision inserts building-free degree-2 nodes, the shape real street
polylines have and the reduction pass exists to remove.
"""

from __future__ import annotations

import math

from scipy.spatial import Delaunay

from .agents import AgentProfile, GENDERS, INCOME_BANDS
from .engine import Scenario
from .network import BUILDING_KINDS, Building, Edge, Node, StreetNetwork
from .rng import SplitMix64, derive_seed

_STREAM_POINTS = 11
_STREAM_BUILDINGS = 12

DEMOGRAPHIC_KEYS = tuple(
    f"{income}:{gender}" for income in INCOME_BANDS for gender in GENDERS
)


def generate_network(
    n_nodes: int, n_buildings: int, seed: int, subdivide: int = 0
) -> StreetNetwork:
    """Random connected planar network, deterministic per seed."""
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    if not 0 <= n_buildings <= n_nodes:
        raise ValueError("n_buildings must be in [0, n_nodes]")
    if subdivide < 0:
        raise ValueError("subdivide must be nonnegative")

    rng = SplitMix64(derive_seed(seed, _STREAM_POINTS))
    side = max(10, int(30.0 * math.sqrt(n_nodes)))
    points: list[tuple[int, int]] = []
    taken = set()
    while len(points) < n_nodes:
        p = (rng.randrange(side), rng.randrange(side))
        if p not in taken:
            taken.add(p)
            points.append(p)

    if n_nodes == 2:
        pairs = {(0, 1)}
    else:
        triangulation = Delaunay([(float(x), float(y)) for x, y in points], qhull_options="QJ")
        pairs = set()
        for simplex in triangulation.simplices:
            for i in range(3):
                a, b = int(simplex[i]), int(simplex[(i + 1) % 3])
                pairs.add((min(a, b), max(a, b)))

    brng = SplitMix64(derive_seed(seed, _STREAM_BUILDINGS))
    building_at: dict[int, Building] = {}
    node_ids = list(range(n_nodes))
    for b in range(n_buildings):
        node = node_ids.pop(brng.randrange(len(node_ids)))
        appeal = {
            key: round(brng.random(), 3) for key in DEMOGRAPHIC_KEYS
        }
        building_at[node] = Building(
            id=b, kind=BUILDING_KINDS[b % len(BUILDING_KINDS)], attractiveness=appeal
        )

    nodes = [
        Node(id=i, x=float(points[i][0]), y=float(points[i][1]), building=building_at.get(i))
        for i in range(n_nodes)
    ]
    edges = []
    next_id = n_nodes
    for a, b in sorted(pairs):
        length = max(
            1.0,
            float(round(math.hypot(points[a][0] - points[b][0], points[a][1] - points[b][1]))),
        )
        pieces = min(subdivide + 1, int(length)) if subdivide else 1
        if pieces <= 1:
            edges.append(Edge(a, b, length))
            continue
        base, rem = divmod(int(length), pieces)
        prev = a
        for k in range(pieces - 1):
            t = (k + 1) / pieces
            nodes.append(
                Node(
                    id=next_id,
                    x=points[a][0] + t * (points[b][0] - points[a][0]),
                    y=points[a][1] + t * (points[b][1] - points[a][1]),
                )
            )
            edges.append(Edge(prev, next_id, float(base + (1 if k < rem else 0))))
            prev = next_id
            next_id += 1
        edges.append(Edge(prev, b, float(base + (1 if pieces - 1 < rem else 0))))
    return StreetNetwork(nodes, edges)


def default_scenario(
    net: StreetNetwork,
    seed: int,
    n_agents: int = 100,
    human_slots: int = 0,
    ticks: int = 200,
    total_time: int = 200,
    slip_probability: float = 0.05,
    discount: float = 0.95,
) -> Scenario:
    """Scenario with two sampled-schedule pedestrian templates."""
    shopper = AgentProfile(
        income_band="low",
        gender="female",
        speed=1,
        visual_range=2,
        fixation=0.3,
        schedule=(),
        total_time=total_time,
    )
    worker = AgentProfile(
        income_band="high",
        gender="male",
        speed=2,
        visual_range=1,
        fixation=0.8,
        schedule=(),
        total_time=total_time,
    )
    half = n_agents // 2
    return Scenario(
        network=net,
        profiles=((shopper, n_agents - half), (worker, half)),
        human_slots=human_slots,
        exit_node=net.nodes[0].id,
        ticks=ticks,
        seed=seed,
        slip_probability=slip_probability,
        discount=discount,
    )

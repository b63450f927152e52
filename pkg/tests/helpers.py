"""Shared oracles and instance generators for the test suite.

Everything here is deliberately independent of the library's solution paths:
the LP oracle enumerates polytope vertices by brute force, and planted
instances are built with numpy's own RNG and checked with the exact solver.
"""

import itertools

import numpy as np

from wayward.agents import AgentProfile
from wayward.engine import Scenario
from wayward.irl import ObservedPolicy, broadcast_reward
from wayward.mdp import MdpDynamics, greedy_policy, value_iteration
from wayward.network import Building, Edge, Node, StreetNetwork


def planted_instance(seed, n_states=None, n_actions=None, discount=0.9, min_gap=1e-3):
    """Random dynamics plus a per-state reward whose optimal policy is unique.

    Returns (mdp, state_reward, optimal_policy). Instances whose best action
    is not strictly best at every state (Q gap below ``min_gap``) are
    regenerated from the same stream.
    """
    rng = np.random.default_rng(seed)
    ns = int(rng.integers(5, 13)) if n_states is None else n_states
    na = int(rng.integers(2, 5)) if n_actions is None else n_actions
    for _ in range(500):
        transitions = rng.dirichlet(np.ones(ns), size=(na, ns))
        state_reward = rng.uniform(0.0, 1.0, ns)
        mdp = MdpDynamics(transitions, discount)
        reward = broadcast_reward(state_reward, na)
        values, _ = value_iteration(mdp, reward, tolerance=1e-10)
        q = reward + discount * (mdp.transitions @ values).T
        ordered = np.sort(q, axis=1)
        if (ordered[:, -1] - ordered[:, -2]).min() >= min_gap:
            return mdp, state_reward, greedy_policy(mdp, reward, values)
    raise RuntimeError(f"no unique-optimum instance found for seed {seed}")


def fully_covered(policy, n_actions):
    """ObservedPolicy wrapper for a known policy with total coverage."""
    pi = np.asarray(policy, dtype=int)
    counts = np.zeros((pi.size, n_actions), dtype=np.int64)
    counts[np.arange(pi.size), pi] = 1
    return ObservedPolicy(
        action_for=pi.copy(), covered=np.ones(pi.size, dtype=bool), visit_counts=counts
    )


def lp_vertex_minimum(c, a_ub, b_ub, bounds, tol=1e-9):
    """Exhaustive-vertex linear programming oracle (minimization).

    Enumerates every basic point (each choice of n linearly independent
    active constraints among inequalities and finite bounds), keeps the
    feasible ones, and returns the smallest objective. Exponential and
    proudly so; only for tiny instances.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    rows = [np.asarray(r, dtype=float) for r in a_ub]
    rhs = list(np.asarray(b_ub, dtype=float))
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None:
            row = np.zeros(n)
            row[i] = -1.0
            rows.append(row)
            rhs.append(-lo)
        if hi is not None:
            row = np.zeros(n)
            row[i] = 1.0
            rows.append(row)
            rhs.append(hi)
    rows = np.asarray(rows)
    rhs = np.asarray(rhs)

    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        a = rows[list(combo)]
        b = rhs[list(combo)]
        try:
            x = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        if np.all(rows @ x <= rhs + tol):
            value = float(c @ x)
            if best is None or value < best:
                best = value
    return best


TOY_SHOP_NODE = 2
TOY_EXIT_NODE = 7


def toy_block_scenario(human_slots=1, virtual_agents=2, seed=2024):
    """Eight-node block with one shop (node 2) and the exit at node 7.

        0 - 1 - 2*        * shop
        |   |   |
        3 - 4 - 5
            |   |
            6 - 7  (exit)
    """
    appeal = {
        f"{income}:{gender}": 0.9
        for income in ("low", "mid", "high")
        for gender in ("female", "male", "other")
    }
    nodes = [
        Node(0, 0.0, 2.0),
        Node(1, 1.0, 2.0),
        Node(2, 2.0, 2.0, Building(id=0, kind="shop", attractiveness=appeal)),
        Node(3, 0.0, 1.0),
        Node(4, 1.0, 1.0),
        Node(5, 2.0, 1.0),
        Node(6, 1.0, 0.0),
        Node(7, 2.0, 0.0),
    ]
    edges = [
        Edge(0, 1, 1.0),
        Edge(1, 2, 1.0),
        Edge(0, 3, 1.0),
        Edge(1, 4, 1.0),
        Edge(2, 5, 1.0),
        Edge(3, 4, 1.0),
        Edge(4, 5, 1.0),
        Edge(4, 6, 1.0),
        Edge(5, 7, 1.0),
        Edge(6, 7, 1.0),
    ]
    net = StreetNetwork(nodes, edges)
    visitor = AgentProfile(
        income_band="low",
        gender="female",
        speed=1,
        visual_range=0,
        fixation=1.0,
        schedule=(TOY_SHOP_NODE, 0, TOY_SHOP_NODE, 6, TOY_SHOP_NODE, 3) * 20,
        total_time=5_000,
    )
    return Scenario(
        network=net,
        profiles=((visitor, virtual_agents),),
        human_slots=human_slots,
        exit_node=TOY_EXIT_NODE,
        ticks=200,
        seed=seed,
        slip_probability=0.05,
        discount=0.9,
    )


def recovery_lp_pieces(mdp, observed, config):
    """Phase-1 LP of the recovery problem, rebuilt from the formulation.

    Returns (c, a_ub, b_ub, bounds) in minimization form, for handing to
    the vertex oracle.
    """
    n, k = mdp.n_states, mdp.n_actions
    p_pi = np.eye(n)
    for s in range(n):
        if observed.covered[s]:
            p_pi[s, :] = mdp.transitions[observed.action_for[s], s, :]
    occupancy = np.linalg.inv(np.eye(n) - mdp.discount * p_pi)
    covered = [s for s in range(n) if observed.covered[s]]
    pos = {s: j for j, s in enumerate(covered)}
    m = len(covered) if k > 1 else 0

    n_vars = n + m + n
    c = np.zeros(n_vars)
    c[n : n + m] = -1.0
    c[n + m :] = config.sparsity_weight

    rows, rhs = [], []
    for s in covered:
        for a in range(k):
            if a == observed.action_for[s]:
                continue
            f_row = (p_pi[s] - mdp.transitions[a, s]) @ occupancy
            row = np.zeros(n_vars)
            row[:n] = -f_row
            row[n + pos[s]] = 1.0
            rows.append(row)
            rhs.append(0.0)
            row = np.zeros(n_vars)
            row[:n] = -f_row
            rows.append(row)
            rhs.append(0.0)
    for s in range(n):
        row = np.zeros(n_vars)
        row[s] = 1.0
        row[n + m + s] = -1.0
        rows.append(row)
        rhs.append(0.0)
        row = np.zeros(n_vars)
        row[s] = -1.0
        row[n + m + s] = -1.0
        rows.append(row)
        rhs.append(0.0)
    r_max = config.reward_bound
    bounds = [(-r_max, r_max)] * n + [(0.0, None)] * m + [(0.0, r_max)] * n
    return c, np.asarray(rows), np.asarray(rhs), bounds

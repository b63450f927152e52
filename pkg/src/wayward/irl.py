"""Recover a reward function under which observed behavior is optimal.

Given finite dynamics and a deterministic policy read off demonstration logs,
the recovery step solves a linear program over per-state rewards R:

    maximize   sum over covered states s of
                   min over a != pi(s) of  (P_pi(s) - P_a(s)) (I - g P_pi)^-1 R
               - lambda * sum_s |R(s)|
    subject to (P_pi(s) - P_a(s)) (I - g P_pi)^-1 R >= 0
                   for every covered s and every a != pi(s)
               |R(s)| <= R_max for every s

The constraints say the demonstrated action is at least as good as any
alternative; the min-terms (optimality margins) push the solution away from
the degenerate R = 0, which satisfies every constraint on every input; the
absolute-magnitude penalty prefers simple rewards. Min and |.| are linearized
with auxiliary variables and the LP is handed to a standard solver.

States never visited in the demonstrations contribute no constraints and no
margin terms; their dynamics row under the observed policy is completed with
a self-loop so the matrix inverse stays well defined without inventing data.

The margin sum can be optimal while an individual state's margin sits at
exactly zero, leaving the demonstrated action tied with an alternative and
the tie at the mercy of solver vertex choice. The solve is therefore
lexicographic: optimize the objective above, then among (near-)optimal
solutions maximize the smallest margin, then among those minimize total
reward magnitude. Every state that can be strictly rationalized is, and
fully symmetric instances still come back with symmetric (zero) rewards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import mdp as mdpmod
from .logs import TrajectoryLog
from .mdp import MdpDynamics
from .rng import SplitMix64

#: relative objective budget the margin-lifting phases may spend; min margins
#: lift to roughly this scale, far above forward-solver noise, while the final
#: objective stays well within 1e-4 of the unrefined optimum
OBJECTIVE_SLACK = 2e-5


class IrlError(Exception):
    pass


class EmptyLog(IrlError):
    pass


class IndexOutOfRange(IrlError):
    pass


class NoCoverage(IrlError):
    pass


class Infeasible(IrlError):
    """Defensive: R = 0 always satisfies the constraints, so this should not occur."""


class SolverStalled(IrlError):
    def __init__(self, iterations):
        self.iterations = iterations
        super().__init__(f"LP solver hit its iteration limit ({iterations})")


@dataclass(frozen=True)
class IrlConfig:
    """Solver knobs: absolute-magnitude penalty weight and reward box bound."""

    sparsity_weight: float = 1.0
    reward_bound: float = 1.0

    def __post_init__(self):
        if self.sparsity_weight < 0:
            raise ValueError("sparsity_weight must be nonnegative")
        if self.reward_bound <= 0:
            raise ValueError("reward_bound must be positive")


@dataclass
class ObservedPolicy:
    """Majority action per visited state; -1 marks states never seen."""

    action_for: np.ndarray
    covered: np.ndarray
    visit_counts: np.ndarray

    @property
    def n_states(self) -> int:
        return self.visit_counts.shape[0]

    @property
    def n_actions(self) -> int:
        return self.visit_counts.shape[1]


@dataclass
class RewardEstimate:
    values: np.ndarray
    objective: float
    margins: np.ndarray

    def to_doc(self) -> dict:
        return {
            "values": [float(v) for v in self.values],
            "objective": float(self.objective),
            "margins": [float(m) for m in self.margins],
        }


@dataclass
class ValidationReport:
    agreement: float
    mismatched_states: list[int]

    def to_doc(self) -> dict:
        return {
            "agreement": float(self.agreement),
            "mismatched_states": [int(s) for s in self.mismatched_states],
        }


def _check_solver(result):
    if result.status == 1:
        raise SolverStalled(result.nit)
    if result.status == 2:
        raise Infeasible(result.message)
    if not result.success:
        raise IrlError(f"LP solver failed: {result.message}")
    return result


def estimate_policy(log: TrajectoryLog, n_states: int, n_actions: int) -> ObservedPolicy:
    """Majority-vote policy over the log; ties go to the lowest action index."""
    if len(log) == 0:
        raise EmptyLog("no demonstration entries")
    cols = log.columns()
    states, actions = cols["state"], cols["action"]
    if states.min() < 0 or states.max() >= n_states:
        bad = int(states[(states < 0) | (states >= n_states)][0])
        raise IndexOutOfRange(f"state {bad} outside [0, {n_states})")
    if actions.min() < 0 or actions.max() >= n_actions:
        bad = int(actions[(actions < 0) | (actions >= n_actions)][0])
        raise IndexOutOfRange(f"action {bad} outside [0, {n_actions})")
    counts = np.zeros((n_states, n_actions), dtype=np.int64)
    np.add.at(counts, (states, actions), 1)
    covered = counts.sum(axis=1) > 0
    action_for = np.where(covered, counts.argmax(axis=1), -1)
    return ObservedPolicy(action_for=action_for, covered=covered, visit_counts=counts)


def _policy_transition_rows(mdp: MdpDynamics, observed: ObservedPolicy) -> np.ndarray:
    """Rows of the observed-policy chain; uncovered states self-loop."""
    p_pi = np.eye(mdp.n_states)
    covered_idx = np.nonzero(observed.covered)[0]
    p_pi[covered_idx, :] = mdp.transitions[
        observed.action_for[covered_idx], covered_idx, :
    ]
    return p_pi


def optimality_rows(mdp: MdpDynamics, observed: ObservedPolicy) -> np.ndarray:
    """F[a, s, :] such that F[a, s] . R is the advantage of pi(s) over a at s."""
    p_pi = _policy_transition_rows(mdp, observed)
    occupancy = np.linalg.inv(np.eye(mdp.n_states) - mdp.discount * p_pi)
    diffs = p_pi[np.newaxis, :, :] - mdp.transitions
    return diffs @ occupancy


def recover_reward(
    mdp: MdpDynamics, observed: ObservedPolicy, config: IrlConfig = IrlConfig()
) -> RewardEstimate:
    """Solve the recovery LP; see the module docstring for the formulation."""
    validate = mdpmod.validate_mdp(mdp)
    if not validate.ok:
        validate.raise_if_invalid()
    if not observed.covered.any():
        raise NoCoverage("no state is covered by the demonstrations")

    n = mdp.n_states
    k = mdp.n_actions
    lam = config.sparsity_weight
    r_max = config.reward_bound
    f = optimality_rows(mdp, observed)

    covered_idx = [s for s in range(n) if observed.covered[s]]
    # one margin variable per covered state that actually has alternatives
    margin_states = covered_idx if k > 1 else []
    m = len(margin_states)
    margin_pos = {s: j for j, s in enumerate(margin_states)}

    n_vars = n + m + n  # rewards, margins, |reward| helpers
    c = np.zeros(n_vars)
    c[n : n + m] = -1.0  # maximize margins
    c[n + m :] = lam  # penalize magnitude

    rows: list[np.ndarray] = []
    for s in covered_idx:
        pi_a = observed.action_for[s]
        for a in range(k):
            if a == pi_a:
                continue
            # t_s <= F[a, s] . R   and   F[a, s] . R >= 0
            row = np.zeros(n_vars)
            row[:n] = -f[a, s]
            row[n + margin_pos[s]] = 1.0
            rows.append(row)
            row = np.zeros(n_vars)
            row[:n] = -f[a, s]
            rows.append(row)
    for s in range(n):
        # |R(s)| <= u_s
        row = np.zeros(n_vars)
        row[s] = 1.0
        row[n + m + s] = -1.0
        rows.append(row)
        row = np.zeros(n_vars)
        row[s] = -1.0
        row[n + m + s] = -1.0
        rows.append(row)

    # margins sit at min_a F.R >= 0 when maximized, so a zero floor cuts
    # nothing off and keeps the feasible set pointed
    bounds = (
        [(-r_max, r_max)] * n + [(0.0, None)] * m + [(0.0, r_max)] * n
    )

    # phase 1: the recovery objective itself; the extra column is the
    # min-margin variable d used by the later phases (inactive here)
    rows = [np.append(row, 0.0) for row in rows]
    for s in margin_states:
        row = np.zeros(n_vars + 1)
        row[n + margin_pos[s]] = -1.0
        row[-1] = 1.0
        rows.append(row)  # d <= t_s
    a_ub = np.vstack(rows)
    b_ub = np.zeros(len(rows))
    bounds = bounds + [(0.0, None)]
    c1 = np.append(c, 0.0)
    result = _check_solver(linprog(c1, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs"))

    if m > 0:
        slack = OBJECTIVE_SLACK * (1.0 + abs(result.fun))
        budget_row = np.append(c, 0.0)  # phase-1 objective may not degrade
        a_ub = np.vstack([a_ub, budget_row])
        b_ub = np.append(b_ub, result.fun + slack)

        # phase 2: maximize the smallest margin among near-optimal solutions
        c2 = np.zeros(n_vars + 1)
        c2[-1] = -1.0
        result = _check_solver(linprog(c2, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs"))
        best_min_margin = result.x[-1]

        # phase 3: smallest reward magnitude among those, so symmetric or
        # unconstrained instances come back with exact zeros
        floor = best_min_margin - 1e-9 * (1.0 + abs(best_min_margin))
        bounds3 = bounds[:-1] + [(max(floor, 0.0), None)]
        c3 = np.zeros(n_vars + 1)
        c3[n + m : n_vars] = 1.0
        result = _check_solver(linprog(c3, A_ub=a_ub, b_ub=b_ub, bounds=bounds3, method="highs"))

    values = result.x[:n].copy()
    # clip solver noise so the box invariant holds exactly
    np.clip(values, -r_max, r_max, out=values)
    advantages = f @ values  # (k, n)
    margins = np.zeros(n)
    for s in covered_idx:
        alt = [a for a in range(k) if a != observed.action_for[s]]
        if alt:
            margins[s] = advantages[alt, s].min()
    objective = float(margins[covered_idx].sum() - lam * np.abs(values).sum())
    return RewardEstimate(values=values, objective=objective, margins=margins)


def broadcast_reward(values: np.ndarray, n_actions: int) -> np.ndarray:
    """State reward to state-action form: R(s, a) := R(s) for every a."""
    return np.repeat(np.asarray(values, dtype=float)[:, np.newaxis], n_actions, axis=1)


def optimal_policy_for(mdp: MdpDynamics, state_values: np.ndarray) -> np.ndarray:
    """Forward-optimal deterministic policy under a per-state reward.

    Solved tighter than the default so value noise stays far below the
    smallest margins the recovery produces; otherwise argmax comparisons
    against observed actions would wobble on near-ties.
    """
    reward = broadcast_reward(state_values, mdp.n_actions)
    v, _ = mdpmod.value_iteration(mdp, reward, tolerance=1e-12, max_iterations=100_000)
    return mdpmod.greedy_policy(mdp, reward, v)


def validate_recovery(
    mdp: MdpDynamics, estimate: RewardEstimate, observed: ObservedPolicy
) -> ValidationReport:
    """Fraction of covered states where the forward solve reproduces the data."""
    if estimate.values.shape != (mdp.n_states,):
        raise ValueError(
            f"estimate has {estimate.values.shape} values, dynamics have "
            f"{mdp.n_states} states"
        )
    if not observed.covered.any():
        raise NoCoverage("no state is covered by the demonstrations")
    pi = optimal_policy_for(mdp, estimate.values)
    covered_idx = np.nonzero(observed.covered)[0]
    mismatched = [int(s) for s in covered_idx if pi[s] != observed.action_for[s]]
    agreement = 1.0 - len(mismatched) / len(covered_idx)
    return ValidationReport(agreement=agreement, mismatched_states=mismatched)


def generate_noisy_demos(
    mdp: MdpDynamics,
    policy: np.ndarray,
    deviation_rate: float,
    n_trajectories: int,
    horizon: int,
    seed: int,
) -> TrajectoryLog:
    """Roll out a policy with per-step lapses into uniformly random actions.

    Each step: with probability ``deviation_rate`` draw a uniformly random
    action, otherwise follow the policy. Start states are uniform. The draw
    order per step (lapse test, lapse action, successor) is fixed, so a seed
    reproduces the log byte for byte.
    """
    if not 0.0 <= deviation_rate <= 1.0:
        raise ValueError("deviation_rate must be in [0, 1]")
    if n_trajectories < 1 or horizon < 1:
        raise ValueError("n_trajectories and horizon must be positive")
    pi = np.asarray(policy, dtype=int)
    n, k = mdp.n_states, mdp.n_actions
    cumulative = np.cumsum(mdp.transitions, axis=2)
    rng = SplitMix64(seed)
    log = TrajectoryLog(seed=seed)
    for agent_id in range(n_trajectories):
        state = rng.randrange(n)
        for step in range(horizon):
            if rng.random() < deviation_rate:
                action = rng.randrange(k)
            else:
                action = int(pi[state])
            log.append(step, agent_id, 0, state, action)
            u = rng.random()
            state = int(np.searchsorted(cumulative[action, state], u, side="right"))
            state = min(state, n - 1)
    # trajectories are generated one at a time; restore (tick, agent) ordering
    log.sort()
    return log

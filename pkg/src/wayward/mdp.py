"""Finite decision-process dynamics and forward solvers.

Conventions used across the package:

- dynamics hold a dense transition tensor ``transitions[a, s, s']`` and a
  discount strictly below 1
- a reward is a float array of shape ``(n_states, n_actions)``
- a value function is a float vector of shape ``(n_states,)``
- a deterministic policy is an int vector of shape ``(n_states,)``

Ties (argmax over actions, equal-value policies) always resolve to the lowest
index so results are reproducible everywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .validation import ValidationResult, Violation

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 10_000

#: brute-force enumeration refuses above this many deterministic policies
BRUTE_FORCE_LIMIT = 10_000

_ROW_SUM_TOL = 1e-9


class MdpError(Exception):
    """Base class for solver failures."""


class NotConverged(MdpError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"value iteration stopped at residual {residual:.3g} "
            f"after {iterations} iterations"
        )


class SizeLimitExceeded(MdpError):
    pass


class SingularSystem(MdpError):
    """Defensive: cannot occur for discount < 1, reported if it somehow does."""


@dataclass(frozen=True)
class MdpDynamics:
    """Transition tensor ``[action, from_state, to_state]`` plus discount."""

    transitions: np.ndarray
    discount: float

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=float)
        if t.ndim != 3 or t.shape[1] != t.shape[2]:
            raise ValueError(
                f"transitions must have shape (n_actions, n_states, n_states), got {t.shape}"
            )
        object.__setattr__(self, "transitions", t)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]


def validate_mdp(mdp: MdpDynamics) -> ValidationResult:
    """Check stochasticity row by row; never raises, reports every violation."""
    violations = []
    t = mdp.transitions
    if not (0.0 <= mdp.discount < 1.0):
        violations.append(
            Violation("DiscountOutOfRange", (), f"discount {mdp.discount!r} not in [0, 1)")
        )
    bad = ~np.isfinite(t)
    for a, s, s2 in zip(*np.nonzero(bad)):
        violations.append(
            Violation("NonFiniteEntry", (int(a), int(s), int(s2)), f"value {t[a, s, s2]!r}")
        )
    finite = np.where(np.isfinite(t), t, 0.0)
    row_sums = finite.sum(axis=2)
    out_of_range = (finite < 0.0) | (finite > 1.0)
    bad_rows = (np.abs(row_sums - 1.0) > _ROW_SUM_TOL) | out_of_range.any(axis=2)
    for a, s in zip(*np.nonzero(bad_rows)):
        violations.append(
            Violation(
                "TransitionNotStochastic",
                (int(a), int(s)),
                f"row sums to {row_sums[a, s]!r}",
            )
        )
    return ValidationResult(tuple(violations))


def _check_reward(mdp: MdpDynamics, reward: np.ndarray) -> np.ndarray:
    r = np.asarray(reward, dtype=float)
    if r.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(
            f"reward shape {r.shape} does not match (n_states, n_actions) "
            f"({mdp.n_states}, {mdp.n_actions})"
        )
    if not np.isfinite(r).all():
        raise ValueError("reward contains non-finite entries")
    return r


def bellman_backup(mdp: MdpDynamics, reward: np.ndarray, values: np.ndarray) -> np.ndarray:
    """One application of the optimality operator: max_a Q(s, a)."""
    q = reward + mdp.discount * (mdp.transitions @ values).T
    return q.max(axis=1)


def value_iteration(
    mdp: MdpDynamics,
    reward: np.ndarray,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> tuple[np.ndarray, int]:
    """Iterate the optimality operator until the sup-norm residual is small.

    Returns ``(values, iterations_used)``. Raises :class:`NotConverged` when
    the budget runs out first.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if max_iterations < 1:
        raise ValueError("max_iterations must be positive")
    r = _check_reward(mdp, reward)
    v = np.zeros(mdp.n_states)
    residual = np.inf
    for iteration in range(1, max_iterations + 1):
        v_next = bellman_backup(mdp, r, v)
        residual = float(np.max(np.abs(v_next - v))) if v.size else 0.0
        v = v_next
        if residual <= tolerance:
            return v, iteration
    raise NotConverged(residual, max_iterations)


def greedy_policy(mdp: MdpDynamics, reward: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Argmax action per state under one-step lookahead; ties take the lowest index."""
    v = np.asarray(values, dtype=float)
    if not np.isfinite(v).all():
        raise ValueError("values contain non-finite entries")
    r = _check_reward(mdp, reward)
    q = r + mdp.discount * (mdp.transitions @ v).T
    return q.argmax(axis=1)


def policy_evaluation(mdp: MdpDynamics, reward: np.ndarray, policy: np.ndarray) -> np.ndarray:
    """Exact value of a fixed policy via the direct linear solve."""
    r = _check_reward(mdp, reward)
    pi = np.asarray(policy, dtype=int)
    if pi.shape != (mdp.n_states,):
        raise ValueError(f"policy shape {pi.shape} does not match n_states {mdp.n_states}")
    if pi.size and (pi.min() < 0 or pi.max() >= mdp.n_actions):
        raise ValueError("policy contains out-of-range action indices")
    states = np.arange(mdp.n_states)
    p_pi = mdp.transitions[pi, states, :]
    r_pi = r[states, pi]
    system = np.eye(mdp.n_states) - mdp.discount * p_pi
    try:
        return np.linalg.solve(system, r_pi)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def brute_force_optimal(mdp: MdpDynamics, reward: np.ndarray) -> np.ndarray:
    """Testing oracle: enumerate every deterministic policy, keep the best.

    Policies are compared by the sum of their exact state values; ties keep
    the lexicographically smallest action vector. Refuses instances with more
    than ``BRUTE_FORCE_LIMIT`` policies.
    """
    n_policies = mdp.n_actions ** mdp.n_states
    if n_policies > BRUTE_FORCE_LIMIT:
        raise SizeLimitExceeded(
            f"{mdp.n_actions}^{mdp.n_states} = {n_policies} policies exceeds "
            f"limit {BRUTE_FORCE_LIMIT}"
        )
    best_policy = None
    best_total = -np.inf
    for actions in itertools.product(range(mdp.n_actions), repeat=mdp.n_states):
        pi = np.array(actions, dtype=int)
        total = float(policy_evaluation(mdp, reward, pi).sum())
        if total > best_total:
            best_total = total
            best_policy = pi
    return best_policy

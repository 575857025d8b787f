"""Two-variable SMO solver for simplex-constrained box QPs.

Both one-class duals reduce to

    minimize    0.5 * a' Q a + p' a
    subject to  sum(a) = 1,  0 <= a_i <= upper

(nu-OC-SVM: Q = K, p = 0, upper = 1/(nu*l); SVDD: Q = 2K, p = -diag(K),
upper = C, which makes the minimized objective the negated SVDD dual).

The solver picks the maximal violating pair under the single equality
constraint: the steepest-ascent index among variables free to grow and the
steepest-descent index among variables free to shrink. Steps are solved in
closed form and clipped to the box; a non-positive curvature along the pair
direction (possible with indefinite sigmoid kernels) takes the full clipped
step, which still strictly decreases the objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SolverError(RuntimeError):
    """Training failed (non-convergence); carries the final KKT gap."""

    def __init__(self, message: str, kkt_gap: float | None = None):
        super().__init__(message)
        self.kkt_gap = kkt_gap


class InfeasibleError(SolverError):
    """The constraint set is empty (upper * l < 1)."""


@dataclass
class SolveResult:
    alpha: np.ndarray
    iterations: int
    kkt_gap: float
    objective: float
    objective_trace: list[float] | None


def initial_point(l: int, upper: float) -> np.ndarray:
    """Deterministic feasible start: fill coordinates to the box in order
    until the unit mass is exhausted."""
    alpha = np.zeros(l)
    remaining = 1.0
    for i in range(l):
        take = min(upper, remaining)
        alpha[i] = take
        remaining -= take
        if remaining <= 0.0:
            break
    return alpha


def solve_simplex_box_qp(Q: np.ndarray,
                         p: np.ndarray,
                         upper: float,
                         tol: float = 1e-3,
                         max_iter: int = 10_000_000,
                         trace_objective: bool = False) -> SolveResult:
    """Minimize 0.5*a'Qa + p'a over the box-bounded simplex slice.

    Returns the solution with the gradient-based KKT gap at exit. Raises
    :class:`InfeasibleError` when upper*l < 1 and :class:`SolverError` when
    the gap is still above ``tol`` after ``max_iter`` pair updates.
    """
    l = len(p)
    if l == 0:
        raise ValueError("empty problem")
    if upper <= 0.0:
        raise InfeasibleError("upper bound must be positive")
    if upper * l < 1.0 - 1e-9:
        raise InfeasibleError(
            f"sum(alpha)=1 unreachable with upper={upper} and l={l}")

    alpha = initial_point(l, upper)
    g = Q @ alpha + p
    objective = float(0.5 * alpha @ (g + p))
    trace = [objective] if trace_objective else None

    iterations = 0
    gap = np.inf
    while iterations < max_iter:
        g_up = np.where(alpha < upper, g, np.inf)
        g_down = np.where(alpha > 0.0, g, -np.inf)
        i = int(np.argmin(g_up))
        j = int(np.argmax(g_down))
        gap = float(g_down[j] - g_up[i])
        if gap <= tol:
            break
        eta = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
        if eta > 1e-12:
            t = gap / eta
        else:
            t = np.inf  # concave direction: run to the box
        t_i = upper - alpha[i]
        t_j = alpha[j]
        t = min(t, t_i, t_j)
        alpha[i] += t
        alpha[j] -= t
        # snap exactly onto the active bound so later set membership is exact
        if t == t_i:
            alpha[i] = upper
        if t == t_j:
            alpha[j] = 0.0
        g += t * (Q[:, i] - Q[:, j])
        if trace is not None:
            objective += t * (g_up[i] - g_down[j]) + 0.5 * t * t * eta
            trace.append(objective)
        iterations += 1
    else:
        raise SolverError(
            f"SMO did not converge in {max_iter} iterations "
            f"(KKT gap {gap:.3e} > tol {tol:.3e})", kkt_gap=gap)

    objective = float(0.5 * alpha @ (Q @ alpha) + p @ alpha)
    return SolveResult(alpha=alpha, iterations=iterations,
                       kkt_gap=max(gap, 0.0), objective=objective,
                       objective_trace=trace)


def normalize_solution(alpha: np.ndarray, upper: float) -> np.ndarray:
    """Rescale to an exact unit sum and re-clip to the box."""
    out = alpha / alpha.sum()
    np.clip(out, 0.0, upper, out=out)
    return out


BOUND_REL_EPS = 1e-8


def bound_masks(alpha: np.ndarray, upper: float
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Classify multipliers as (at_zero, at_upper, unbounded).

    Renormalization shifts bound-snapped values by an ulp, so membership is
    decided within a small band relative to the box size; both one-class
    trainers must use the same rule for their thresholds to stay consistent.
    """
    eps = upper * BOUND_REL_EPS
    at_zero = alpha <= eps
    at_upper = alpha >= upper - eps
    return at_zero, at_upper, ~at_zero & ~at_upper


def threshold_interval(stat: np.ndarray, at_zero: np.ndarray,
                       at_upper: np.ndarray,
                       at_upper_is_lower_bound: bool) -> float:
    """KKT fallback threshold when no strictly-interior multiplier exists.

    ``stat`` holds the per-point statistic that equals the threshold for
    unbounded support vectors. Points pinned at one bound give lower bounds
    for the threshold, points at the other give upper bounds; the midpoint
    of the tightest interval is returned (or the single finite side).
    """
    upper_stats = stat[at_upper]
    zero_stats = stat[at_zero]
    if at_upper_is_lower_bound:
        lo = float(upper_stats.max()) if upper_stats.size else None
        hi = float(zero_stats.min()) if zero_stats.size else None
    else:
        lo = float(zero_stats.max()) if zero_stats.size else None
        hi = float(upper_stats.min()) if upper_stats.size else None
    if lo is not None and hi is not None:
        return 0.5 * (lo + hi)
    if lo is not None:
        return lo
    if hi is not None:
        return hi
    raise SolverError("no support vectors to estimate the threshold from")

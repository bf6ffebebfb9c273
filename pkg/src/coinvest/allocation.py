"""Optimal capacity sizing and per-slot capacity shares for a coalition.

A coalition buys capacity ``C`` once and splits it among its SPs anew
every slot.  The planning problem maximises expected coalition profit

    sum_t sum_i beta_i * lbar_i^t * (1 - exp(-xi * h_i^t)) - (d + d'I) * C
    s.t.  sum_i h_i^t <= C,   h_i^t >= 0,   C >= 0

over the expected loads ``lbar``.  Without the infrastructure provider
no capacity can be bought, and without SPs nothing earns revenue; both
cases yield the idle plan (zero capacity, zero value).

Two solvers are provided.  ``optimal_plan_closed_form`` evaluates the
interior-optimum formula, valid when every participating SP has
positive expected load at every slot and the resulting shares stay
nonnegative.  ``optimal_plan_numeric`` performs per-slot water-filling
(bisection on the slot multiplier, then an exact active-set polish)
inside an outer bisection that balances the summed multipliers against
the unit capacity cost.  The numeric path is the source of truth;
``optimal_plan`` dispatches to the closed form first and falls back
whenever the formula reports itself inapplicable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .economics import EconomicParams
from .players import PlayerSet

INNER_ITERATIONS = 80
OUTER_ITERATIONS = 200
OUTER_RESIDUAL_TOL = 1e-10
OUTER_INTERVAL_TOL = 1e-12


class AllocationError(RuntimeError):
    """The numeric solver failed to converge; indicates broken inputs."""


@dataclass(frozen=True, eq=False)
class AllocationPlan:
    """Capacity and shares a coalition commits to before demand is known.

    ``shares`` has one row per scenario SP (not per coalition member);
    rows of SPs outside the coalition are identically zero.
    """

    coalition: PlayerSet
    capacity: float
    shares: np.ndarray
    objective: float
    method: str

    @property
    def horizon(self) -> int:
        return self.shares.shape[1]


def _check_inputs(coalition: PlayerSet, loads: np.ndarray, params: EconomicParams) -> np.ndarray:
    loads = np.asarray(loads, dtype=float)
    if loads.ndim != 2:
        raise ValueError("expected_loads must be (n_sp, horizon)")
    if loads.shape[0] != params.n_sp:
        raise ValueError("expected_loads rows must match the number of SP benefits")
    if coalition.n_players != params.n_sp + 1:
        raise ValueError("coalition player count must be n_sp + 1")
    if (loads < 0.0).any():
        raise ValueError("expected loads must be nonnegative")
    return loads


def _idle_plan(coalition: PlayerSet, loads: np.ndarray, method: str) -> AllocationPlan:
    return AllocationPlan(coalition, 0.0, np.zeros_like(loads), 0.0, method)


def optimal_plan_closed_form(coalition, expected_loads, params):
    """Interior-optimum formula; ``None`` when it does not apply.

    Applicable when every coalition SP either has positive load at all
    slots (it participates) or zero load at all slots (it is idle), the
    implied capacity is positive, and no implied share is negative.
    ``None`` is a dispatch signal, not an error: the caller should use
    the numeric solver.
    """
    loads = _check_inputs(coalition, expected_loads, params)
    rows = coalition.sp_rows
    if not coalition.includes_inp or rows.size == 0:
        return _idle_plan(coalition, loads, "closed-form")
    sub = loads[rows]
    positive = sub > 0.0
    everywhere = positive.all(axis=1)
    nowhere = ~positive.any(axis=1)
    if not np.all(everywhere | nowhere):
        return None
    active = rows[everywhere]
    k = active.size
    if k == 0:
        return _idle_plan(coalition, loads, "closed-form")

    xi = params.saturation
    price = params.unit_capacity_cost
    beta = np.asarray(params.benefits)[active, None]
    log_bl = np.log(beta * loads[active])
    log_w = math.log(xi) + log_bl
    slot_geomean = np.exp(log_w.mean(axis=0))
    total = slot_geomean.sum()
    capacity = (k / xi) * math.log(total / price)
    if capacity <= 0.0:
        return None
    shares_active = capacity / k + (log_bl - log_bl.mean(axis=0)) / xi
    if (shares_active < 0.0).any():
        return None

    shares = np.zeros_like(loads)
    shares[active] = shares_active
    revenue = (beta * loads[active] * -np.expm1(-xi * shares_active)).sum()
    return AllocationPlan(coalition, capacity, shares, revenue - price * capacity, "closed-form")


def _water_levels(log_w: np.ndarray, xi: float, capacity: float) -> np.ndarray:
    """Per-slot multipliers: solve sum_i max(0, (log_w_i - log_lam)/xi) = C.

    ``log_w`` is ``log(xi * beta_i * load_i^t)`` with ``-inf`` marking
    zero-load entries; all slots passed here have at least one finite
    entry.  Bisection runs in log space, then the multiplier is recomputed
    exactly from the identified active set so the shares sum to the
    capacity to machine precision.
    """
    hi = log_w.max(axis=0)
    lo = hi - xi * capacity
    for _ in range(INNER_ITERATIONS):
        mid = 0.5 * (lo + hi)
        filled = np.clip(log_w - mid, 0.0, None).sum(axis=0) / xi
        over = filled > capacity
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    level = 0.5 * (lo + hi)
    active = log_w > level
    n_active = active.sum(axis=0)
    log_sum = np.where(active, log_w, 0.0).sum(axis=0)
    return (log_sum - xi * capacity) / n_active


def optimal_plan_numeric(coalition, expected_loads, params):
    """Water-filling solver; optimal for any nonnegative load pattern."""
    loads = _check_inputs(coalition, expected_loads, params)
    rows = coalition.sp_rows
    if not coalition.includes_inp or rows.size == 0:
        return _idle_plan(coalition, loads, "numeric")

    xi = params.saturation
    price = params.unit_capacity_cost
    beta = np.asarray(params.benefits)[rows, None]
    bl = beta * loads[rows]
    with np.errstate(divide="ignore"):
        log_w = np.where(bl > 0.0, np.log(xi) + np.log(bl), -np.inf)
    slot_best = log_w.max(axis=0)
    live = np.isfinite(slot_best)
    if not live.any():
        return _idle_plan(coalition, loads, "numeric")
    log_w_live = log_w[:, live]

    # Marginal revenue of the first core equals sum_t max_i xi*beta*load;
    # below the unit capacity cost the optimum is to buy nothing.
    if np.exp(slot_best[live]).sum() <= price:
        return _idle_plan(coalition, loads, "numeric")

    def residual(capacity: float) -> float:
        levels = _water_levels(log_w_live, xi, capacity)
        return np.exp(levels).sum() - price

    c_lo, c_hi = 0.0, 1.0
    for _ in range(OUTER_ITERATIONS):
        if residual(c_hi) < 0.0:
            break
        c_lo, c_hi = c_hi, 2.0 * c_hi
    else:
        raise AllocationError("capacity bracket search did not terminate")
    for _ in range(OUTER_ITERATIONS):
        if c_hi - c_lo <= OUTER_INTERVAL_TOL * max(1.0, c_hi):
            break
        mid = 0.5 * (c_lo + c_hi)
        r = residual(mid)
        if abs(r) <= OUTER_RESIDUAL_TOL:
            c_lo = c_hi = mid
            break
        if r > 0.0:
            c_lo = mid
        else:
            c_hi = mid
    capacity = 0.5 * (c_lo + c_hi)

    levels = _water_levels(log_w_live, xi, capacity)
    shares_live = np.clip((log_w_live - levels) / xi, 0.0, None)
    shares_sub = np.zeros_like(bl)
    shares_sub[:, live] = shares_live
    shares = np.zeros_like(loads)
    shares[rows] = shares_sub
    revenue = (bl * -np.expm1(-xi * shares_sub)).sum()
    return AllocationPlan(coalition, capacity, shares, revenue - price * capacity, "numeric")


def optimal_plan(coalition, expected_loads, params):
    """Closed form when valid, numeric water-filling otherwise."""
    plan = optimal_plan_closed_form(coalition, expected_loads, params)
    if plan is None:
        plan = optimal_plan_numeric(coalition, expected_loads, params)
    return plan

"""Worked screening environments: bundling, regulation, labor, competition.

Each generator builds an exact finite instance from a small parameter set, so
the generic solvers and the verification engine can run on problems whose
answers are known or checkable by an independent route.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (AssumptionFailed, OutOfRange, RatioMonotonicityFailed,
                     SizeGuardExceeded, StructuralError)
from .model import (FEAS_TOL, CostlySpec, JointDistribution, ProductiveSpec,
                    ScreeningInstance)
from .solver import SolveResult, productive_marginal, solve_full_1d
from .stochastics import DiscreteDistribution, check_dominance


# ---------------------------------------------------------------------------
# bundling with quality discrimination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BundleInstance:
    """Multi-good monopoly with probabilistic bundling and quality choice.

    Bundles are bitmasks over `n_goods` goods; `values[k, b]` is type k's
    value for the top-quality version of bundle b, with the empty bundle
    worth zero and larger bundles worth weakly more. Quality costs are
    sampled on a shared grid and must be convex and nondecreasing from
    C(0) = 0; qualities and bundle probabilities live on that same grid
    because they enter the consumer's utility identically.
    """

    n_goods: int
    values: np.ndarray        # (n_types, 2**n_goods), bitmask column order
    prob: np.ndarray
    quality_grid: np.ndarray  # ascending, starts at 0, ends at 1
    cost_samples: np.ndarray  # C on quality_grid

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        prob = np.asarray(self.prob, dtype=float)
        grid = np.asarray(self.quality_grid, dtype=float)
        cost = np.asarray(self.cost_samples, dtype=float)
        n_bundles = 2 ** int(self.n_goods)
        if self.n_goods < 1:
            raise StructuralError("need at least one good")
        if values.shape[1] != n_bundles:
            raise StructuralError(f"values must have {n_bundles} bundle columns")
        if prob.shape != (values.shape[0],) or (prob <= 0).any():
            raise StructuralError("prob must be positive per type")
        if abs(prob.sum() - 1.0) > 1e-9:
            raise StructuralError("prob must sum to one")
        if np.abs(values[:, 0]).max() > 0:
            raise StructuralError("the empty bundle must be worth zero")
        for b in range(n_bundles):
            for c in range(n_bundles):
                if b & c == b and b != c:  # b is a subset of c
                    if (values[:, b] > values[:, c] + FEAS_TOL).any():
                        raise StructuralError(
                            f"bundle {b} worth more than superset {c}")
        if grid.ndim != 1 or grid.size < 2:
            raise StructuralError("quality grid needs at least two points")
        if abs(grid[0]) > 0 or abs(grid[-1] - 1.0) > 1e-12:
            raise StructuralError("quality grid must run from 0 to 1")
        if (np.diff(grid) <= 0).any():
            raise StructuralError("quality grid must be strictly increasing")
        if cost.shape != grid.shape:
            raise StructuralError("cost samples must align with the grid")
        if abs(cost[0]) > 0:
            raise StructuralError("cost at zero quality must be zero")
        if (np.diff(cost) < -FEAS_TOL).any():
            raise StructuralError("cost must be nondecreasing")
        slopes = np.diff(cost) / np.diff(grid)
        if (np.diff(slopes) < -FEAS_TOL).any():
            raise StructuralError("cost must be convex on the grid")
        for name, arr in (("values", values), ("prob", prob),
                          ("quality_grid", grid), ("cost_samples", cost)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n_goods", int(self.n_goods))

    @property
    def n_types(self) -> int:
        return self.values.shape[0]

    @property
    def grand(self) -> int:
        return 2 ** self.n_goods - 1

    @property
    def grand_values(self) -> np.ndarray:
        return self.values[:, self.grand]


def _check_ratio_monotonicity(b: BundleInstance) -> None:
    """Substitute-bundle value ratios must rise stochastically with the
    grand-bundle value."""
    vstar = b.grand_values
    tau = b.values[:, :b.grand] / vstar[:, None]
    levels = np.unique(vstar)
    dists = []
    for lv in levels:
        mask = np.isclose(vstar, lv)
        rows = tau[mask]
        w = b.prob[mask]
        uniq: dict = {}
        for row, pr in zip(rows, w):
            key = tuple(row)
            uniq[key] = uniq.get(key, 0.0) + float(pr)
        pts = list(uniq)
        total = sum(uniq.values())
        dists.append(DiscreteDistribution(
            np.array(pts), [uniq[p] / total for p in pts]))
    for k in range(len(levels) - 1):
        if not check_dominance(dists[k], dists[k + 1]):
            raise RatioMonotonicityFailed(
                f"bundle value ratios fall between grand-bundle values "
                f"{levels[k]:.6g} and {levels[k + 1]:.6g}")


def _substochastic_vectors(grid: np.ndarray, n: int):
    """All vectors over the grid with coordinates summing to at most one."""
    out = []
    for combo in itertools.product(range(grid.size), repeat=n):
        vec = grid[list(combo)]
        if vec.sum() <= 1.0 + 1e-12:
            out.append(vec)
    return np.array(out)


def bundling_reduce(b: BundleInstance, guard: int = 10 ** 6) -> ScreeningInstance:
    """Recast bundling as screening with the grand bundle as the product.

    The scalar type is the grand-bundle value; assigning a proper bundle
    instead of the grand one becomes an instrument whose utility weight is
    the (nonpositive) value difference. Ratios must rise stochastically with
    the grand value or the recast problem loses its ordering.
    """
    _check_ratio_monotonicity(b)
    vstar = b.grand_values
    if (vstar <= 0).any():
        raise StructuralError("grand-bundle values must be positive")
    theta_rows = b.values[:, :b.grand] - vstar[:, None]
    levels = np.unique(vstar)
    level_of = {float(lv): k for k, lv in enumerate(levels)}
    uniq_rows: list = []
    row_of: dict = {}
    for row in theta_rows:
        key = tuple(row)
        if key not in row_of:
            row_of[key] = len(uniq_rows)
            uniq_rows.append(row)
    theta_b = np.array(uniq_rows)
    weight: dict = {}
    for k in range(b.n_types):
        pair = (level_of[float(vstar[k])], row_of[tuple(theta_rows[k])])
        weight[pair] = weight.get(pair, 0.0) + float(b.prob[k])
    support = tuple(sorted(weight))
    dist = JointDistribution(support, tuple(weight[p] for p in support))

    n_sub = b.grand  # proper bundles, empty included
    if b.quality_grid.size ** n_sub > guard:
        raise SizeGuardExceeded("instrument enumeration too large",
                                b.quality_grid.size ** n_sub, guard)
    y_vectors = _substochastic_vectors(b.quality_grid, n_sub)
    zero = int(np.argmin(np.abs(y_vectors).sum(axis=1)))
    if np.abs(y_vectors[zero]).sum() > 0:
        raise StructuralError("instrument set lost the zero vector")
    u_a = np.outer(b.quality_grid, levels)
    v_a = np.tile(-b.cost_samples[:, None], (1, levels.size))
    u_b = y_vectors @ theta_b.T
    v_b = np.zeros_like(u_b)
    return ScreeningInstance(
        ProductiveSpec(levels, b.quality_grid, u_a, v_a),
        CostlySpec(theta_b, np.arange(y_vectors.shape[0], dtype=float),
                   zero, u_b, v_b),
        dist)


@dataclass(frozen=True)
class BundlingSolution:
    """Quality menu for the grand bundle plus solver artifacts."""

    value: float
    menu: tuple                  # ((quality, price), ...) qualities ascending
    onedim: SolveResult
    reduced: ScreeningInstance


def solve_bundling(b: BundleInstance) -> BundlingSolution:
    """Optimal mechanism as a menu of grand-bundle qualities and prices.

    Under ratio monotonicity no substitute bundle is ever assigned, so the
    problem collapses to scalar quality screening against the grand-bundle
    value. Zero-quality rows are exclusions and stay out of the menu.
    """
    reduced = bundling_reduce(b)
    onedim = solve_full_1d(productive_marginal(reduced))
    grid = b.quality_grid
    seen = set()
    menu = []
    for xi, t in zip(onedim.x_idx, onedim.t):
        q = float(grid[xi])
        if q <= 0.0:
            continue
        key = (q, round(t, 12))
        if key not in seen:
            seen.add(key)
            menu.append((q, float(t)))
    menu.sort()
    return BundlingSolution(onedim.value, tuple(menu), onedim, reduced)


def _bundle_options(b: BundleInstance):
    """Every probabilistic-bundling option on the shared grid.

    An option fixes a bundle distribution alpha (grid-valued, summing to
    exactly one) and a quality for each bundle it uses. Returns agent values
    per type, principal cost, and the (alpha, q) descriptors.
    """
    grid = b.quality_grid
    steps = grid.size - 1
    n_bundles = 2 ** b.n_goods
    agent_rows = []
    cost_col = []
    descr = []
    # compositions of the grid steps across bundles give all alpha patterns
    for cuts in itertools.combinations(range(steps + n_bundles - 1), n_bundles - 1):
        parts = []
        prev = -1
        for c in cuts + (steps + n_bundles - 1,):
            parts.append(c - prev - 1)
            prev = c
        alpha = np.array(parts) / steps
        used = [i for i in range(n_bundles) if parts[i] > 0]
        for qs in itertools.product(range(grid.size), repeat=len(used)):
            q = np.zeros(n_bundles)
            for slot, bundle in zip(qs, used):
                q[bundle] = grid[slot]
            weights = alpha * q
            agent_rows.append(b.values @ weights)
            cost_col.append(float(alpha[used] @ b.cost_samples[list(qs)]))
            descr.append((tuple(alpha), tuple(q)))
    U = np.array(agent_rows).T          # (n_types, n_options)
    P = -np.array(cost_col)             # principal utility before transfers
    return U, P, descr


@dataclass(frozen=True)
class BundlingCertificate:
    brute_force_value: float
    menu_value: float
    options: int
    best_descriptor: tuple

    @property
    def menu_is_optimal(self) -> bool:
        return self.menu_value >= self.brute_force_value - FEAS_TOL


def certify_bundling(b: BundleInstance) -> BundlingCertificate:
    """Exhaustive check that the quality menu beats probabilistic bundling.

    Enumerates every grid-valued bundling mechanism with maximal feasible
    transfers and compares against the quality-menu value. Costs are
    piecewise linear between samples, so the scalar solver already attains
    the continuum optimum at a grid point and the comparison is exact up to
    float tolerance. Supports one or two consumer types.
    """
    if b.n_types > 2:
        raise SizeGuardExceeded("certificate supports at most two types",
                                b.n_types, 2)
    menu_value = solve_bundling(b).value
    U, P, descr = _bundle_options(b)
    n_o = U.shape[1]
    if b.n_types == 1:
        vals = P + U[0]
        best = int(np.argmax(vals))
        return BundlingCertificate(float(vals[best]), float(menu_value),
                                   n_o, (descr[best],))
    mu = b.prob
    best_val = -np.inf
    best_pair = (0, 0)
    chunk = max(1, (1 << 22) // n_o)
    for start in range(0, n_o, chunk):
        rows = slice(start, min(start + chunk, n_o))
        u1_i = U[0, rows][:, None]
        u2_i = U[1, rows][:, None]
        u1_j = U[0][None, :]
        u2_j = U[1][None, :]
        w21 = u1_i - u1_j            # deviation edge: 2's bundle to 1
        w12 = u2_j - u2_i
        d1 = np.minimum(u1_i, u2_j + w21)
        d2 = np.minimum(u2_j, u1_i + w12)
        d1 = np.minimum(d1, d2 + w21)
        d2 = np.minimum(d2, d1 + w12)
        vals = (mu[0] * (P[rows][:, None] + d1)
                + mu[1] * (P[None, :] + d2))
        vals[w12 + w21 < -1e-12] = -np.inf
        flat = int(np.argmax(vals))
        top = float(vals.flat[flat])
        if top > best_val:
            best_val = top
            best_pair = (start + flat // n_o, flat % n_o)
    return BundlingCertificate(float(best_val), float(menu_value), n_o,
                               (descr[best_pair[0]], descr[best_pair[1]]))


# ---------------------------------------------------------------------------
# application instance generators
# ---------------------------------------------------------------------------


def _regulation_instance(params: dict) -> ScreeningInstance:
    lam = float(params.get("lam", 1.0))
    c0 = float(params.get("c0", 0.8))
    c1 = float(params.get("c1", 1.0))
    theta_a = np.asarray(params.get("theta_a", (0.2, 0.4, 0.6)), dtype=float)
    levels = int(params.get("certificate_levels", 2))
    effort_cost = float(params.get("effort_cost", 0.3))
    x_grid = np.asarray(params.get("x_grid", np.linspace(0.0, 1.0, 4)),
                        dtype=float)
    if lam <= 0:
        raise OutOfRange("lam must be positive")
    if c1 <= 0:
        raise OutOfRange("c1 must be positive for efficiency to matter")
    if c0 - c1 * theta_a.max() <= 0:
        raise OutOfRange("marginal production cost must stay positive: "
                         "need c0 > c1 * max(theta_a)")
    if effort_cost <= 0:
        raise OutOfRange("effort_cost must be positive")
    if levels < 1:
        raise OutOfRange("need at least one certificate level above baseline")

    def psi(x, th):
        return (c0 - c1 * th) * x

    revenue = (1.0 - x_grid) * x_grid
    surplus = 0.5 * x_grid ** 2  # integral of the linear demand wedge
    u_a = revenue[:, None] - psi(x_grid[:, None], theta_a[None, :])
    v_a = (surplus[:, None] + u_a) / lam
    y_set = np.arange(levels + 1, dtype=float)
    theta_b = np.arange(levels + 1, dtype=float).reshape(-1, 1)
    u_b = -effort_cost * np.maximum(y_set[:, None] - theta_b[:, 0][None, :], 0.0)
    v_b = np.zeros_like(u_b)
    support = params.get("support")
    prob = params.get("prob")
    if support is None:
        m = min(theta_a.size, theta_b.shape[0])
        support = tuple((k, k) for k in range(m))
        prob = tuple(1.0 / m for _ in range(m))
    dist = JointDistribution(tuple(tuple(p) for p in support), tuple(prob))
    return ScreeningInstance(
        ProductiveSpec(theta_a, x_grid, u_a, v_a),
        CostlySpec(theta_b, y_set, 0, u_b, v_b), dist)


def _labor_instance(params: dict) -> ScreeningInstance:
    c0 = float(params.get("c0", 1.5))
    theta_0 = np.asarray(params.get("theta_0", (0.5, 1.0)), dtype=float)
    x_grid = np.asarray(params.get("x_grid", (0.0, 0.5, 1.0)), dtype=float)
    activity_costs = tuple(params.get("activity_costs", (0.4,)))
    activity_levels = tuple(tuple(l) for l in
                            params.get("activity_levels", ((0.0, 0.5, 1.0),)))
    theta_b_rows = params.get("theta_b_rows", ((0.0,), (0.5,)))
    if c0 <= theta_0.max():
        raise OutOfRange("work cost must stay positive: need c0 > max(theta_0)")
    if len(activity_costs) != len(activity_levels):
        raise OutOfRange("one cost coefficient per activity is required")
    if any(c <= 0 for c in activity_costs):
        raise OutOfRange("activity costs must be positive")
    u_a = -(c0 - theta_0[None, :]) * (x_grid[:, None] ** 2)
    v_a = x_grid[:, None] * theta_0[None, :]
    combos = list(itertools.product(*[range(len(l)) for l in activity_levels]))
    y_vectors = np.array([[activity_levels[i][c[i]] for i in range(len(c))]
                          for c in combos])
    theta_b = np.atleast_2d(np.asarray(theta_b_rows, dtype=float))
    u_b = np.zeros((y_vectors.shape[0], theta_b.shape[0]))
    for i, coef in enumerate(activity_costs):
        u_b -= coef * np.maximum(
            y_vectors[:, i][:, None] - theta_b[:, i][None, :], 0.0)
    v_b = np.zeros_like(u_b)
    support = params.get("support")
    prob = params.get("prob")
    if support is None:
        prob_a = params.get("prob_a", tuple(1.0 / theta_0.size
                                            for _ in range(theta_0.size)))
        prob_b = params.get("prob_b", tuple(1.0 / theta_b.shape[0]
                                            for _ in range(theta_b.shape[0])))
        support = tuple((ia, ib) for ia in range(theta_0.size)
                        for ib in range(theta_b.shape[0]))
        prob = tuple(prob_a[ia] * prob_b[ib] for ia, ib in support)
    dist = JointDistribution(tuple(tuple(p) for p in support), tuple(prob))
    return ScreeningInstance(
        ProductiveSpec(theta_0, x_grid, u_a, v_a),
        CostlySpec(theta_b, np.arange(y_vectors.shape[0], dtype=float),
                   0, u_b, v_b), dist)


def _costly_production_instance(params: dict) -> ScreeningInstance:
    # two linear-utility consumers with opposed tastes; the second item
    # costs more to make than anyone values it
    item_cost = float(params.get("item_cost", 2.0))
    theta_a = np.array([1.0, 2.0])
    theta_b = np.array([[1.0], [2.0]])
    x_grid = np.array([0.0, 1.0])
    y_set = np.array([0.0, 1.0])
    u_a = np.outer(x_grid, theta_a)
    v_a = np.zeros_like(u_a)
    u_b = np.outer(y_set, theta_b[:, 0])
    v_b = np.outer(-item_cost * y_set, np.ones(2))
    dist = JointDistribution(((0, 1), (1, 0)), (0.5, 0.5))
    return ScreeningInstance(
        ProductiveSpec(theta_a, x_grid, u_a, v_a),
        CostlySpec(theta_b, y_set, 0, u_b, v_b), dist)


_APPLICATION_KINDS = {
    "regulation": _regulation_instance,
    "labor": _labor_instance,
    "costly_production": _costly_production_instance,
}


def make_application_instance(kind: str,
                              params: Optional[dict] = None) -> ScreeningInstance:
    """Build a named application environment as a screening instance.

    regulation: taxed monopoly with manipulable inspection certificates;
    labor: monopsony wage setting with costly application activities;
    costly_production: two linear-taste consumers and a loss-making second
    item, whose optimal menu nevertheless sells it.
    """
    if kind not in _APPLICATION_KINDS:
        raise OutOfRange(f"unknown application kind {kind!r}; expected one of "
                         f"{sorted(_APPLICATION_KINDS)}")
    return _APPLICATION_KINDS[kind](dict(params or {}))


# ---------------------------------------------------------------------------
# competitive screening
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompetitiveParams:
    """Two-type competitive labor market with one costly activity.

    Work cost for type i is a_i x^2; activity costs are b_l y for the low
    type and b_h y^2 for the high type, so a marginal unit of the activity
    is free for the high type and expensive for the low type.
    """

    theta_l: float = 0.5
    theta_h: float = 1.0
    a_l: float = 1.0
    a_h: float = 0.75
    b_l: float = 3.0
    b_h: float = 1.0

    def __post_init__(self):
        if not self.theta_h > self.theta_l >= 0:
            raise AssumptionFailed("types_ordered",
                                   "need theta_h > theta_l >= 0")
        if not self.a_l > self.a_h > 0:
            raise AssumptionFailed("marginal_cost_order",
                                   "need a_l > a_h > 0 so the high type "
                                   "works more cheaply")
        if not 0 < self.efficient_low < 1:
            raise AssumptionFailed("efficient_interior",
                                   f"x^e_L = {self.efficient_low:.6g} must "
                                   f"be interior to (0, 1)")
        if not 0 < self.efficient_high < 1:
            raise AssumptionFailed("efficient_interior",
                                   f"x^e_H = {self.efficient_high:.6g} must "
                                   f"be interior to (0, 1)")
        low = self.low_type_utility
        imit = (self.theta_h * self.efficient_high
                - self.psi_l(self.efficient_high))
        if not low < imit - 1e-12:
            raise AssumptionFailed("adverse_selection",
                                   f"low type must covet the efficient high "
                                   f"offer: {low:.6g} >= {imit:.6g}")
        if self.theta_h - self.a_l > low + 1e-12:
            raise AssumptionFailed("separation_at_one",
                                   "work allocations alone cannot separate "
                                   "within [0, 1]")
        if not self.b_l > 2 * self.a_l:
            raise AssumptionFailed("instrument_bite",
                                   "need b_l > 2 a_l so the activity deters "
                                   "the low type")
        if self.b_h < 0:
            raise AssumptionFailed("instrument_smooth",
                                   "high-type activity cost must be "
                                   "nonnegative")

    def psi_l(self, x):
        return self.a_l * x ** 2

    def psi_h(self, x):
        return self.a_h * x ** 2

    def c_l(self, y):
        return self.b_l * y

    def c_h(self, y):
        return self.b_h * y ** 2

    @property
    def efficient_low(self) -> float:
        return self.theta_l / (2 * self.a_l)

    @property
    def efficient_high(self) -> float:
        return self.theta_h / (2 * self.a_h)

    @property
    def low_type_utility(self) -> float:
        x = self.efficient_low
        return self.theta_l * x - self.psi_l(x)


@dataclass(frozen=True)
class SeparatingSet:
    """Zero-profit offer pair; each type weakly prefers its own offer."""

    offer_l: tuple               # (x, y, wage)
    offer_h: tuple
    value_high: float            # high type's payoff at its offer
    value_high_no_instrument: float
    checked_points: int

    @property
    def gain(self) -> float:
        """What the costly activity buys the high type."""
        return self.value_high - self.value_high_no_instrument


def _constrained_max(p: CompetitiveParams, xs: np.ndarray, ys: np.ndarray):
    """Best (x, y) for the high type keeping the low type out.

    Scans ys-by-xs in row-major order, so exact ties resolve to the smallest
    activity level and then the smallest allocation; with a free activity for
    the high type this lands on the boundary where the low type's IC binds.
    """
    cap = p.low_type_utility + 1e-12
    imitate = (p.theta_h * xs[None, :] - p.psi_l(xs[None, :])
               - p.c_l(ys[:, None]))
    objective = (p.theta_h * xs[None, :] - p.psi_h(xs[None, :])
                 - p.c_h(ys[:, None]))
    feasible = imitate <= cap
    if not feasible.any():
        raise StructuralError("no feasible separating offer on the grid")
    masked = np.where(feasible, objective, -np.inf)
    flat = int(np.argmax(masked))
    iy, ix = divmod(flat, xs.size)
    return float(xs[ix]), float(ys[iy]), float(masked.flat[flat])


def _window(center: float, radius: float, step: float) -> np.ndarray:
    lo = max(0.0, center - radius)
    hi = min(1.0, center + radius)
    n = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(n)


def competitive_separating(p: CompetitiveParams,
                           coarse_step: float = 1e-3,
                           fine_step: float = 1e-5) -> SeparatingSet:
    """Pareto-optimal separating offers via the constrained grid program.

    The low type gets its efficient allocation at the competitive wage. The
    high type's offer maximizes its surplus subject to the low type weakly
    preferring its own offer, searched on a coarse grid and refined once
    around the maximizer. Unlike the monopoly solutions, the activity level
    comes out strictly positive: competition hands all surplus to the worker,
    so the binding constraint points upward and a cheap-for-the-high-type
    activity relaxes it.
    """
    n_coarse = int(round(1.0 / coarse_step)) + 1
    grid = coarse_step * np.arange(n_coarse)
    x1, y1, _ = _constrained_max(p, grid, grid)
    xs = _window(x1, coarse_step, fine_step)
    ys = _window(y1, coarse_step, fine_step)
    x_star, y_star, v_star = _constrained_max(p, xs, ys)

    x0_1, _, _ = _constrained_max(p, grid, np.zeros(1))
    xs0 = _window(x0_1, coarse_step, fine_step)
    _, _, v_no = _constrained_max(p, xs0, np.zeros(1))

    offer_l = (p.efficient_low, 0.0, p.theta_l * p.efficient_low)
    offer_h = (x_star, y_star, p.theta_h * x_star)
    if y_star <= 0:
        raise StructuralError("optimal separating offer uses no costly "
                              "activity; contradicts the competitive result")
    if v_star <= v_no:
        raise StructuralError("costly activity failed to improve on "
                              "work-only separation")
    # self-selection, both directions
    low_at_h = p.theta_h * x_star - p.psi_l(x_star) - p.c_l(y_star)
    if low_at_h > p.low_type_utility + 1e-9:
        raise StructuralError("low type prefers the high offer")
    high_at_l = (p.theta_l * p.efficient_low - p.psi_h(p.efficient_low))
    if v_star < high_at_l - 1e-9:
        raise StructuralError("high type prefers the low offer")
    checked = n_coarse * n_coarse + xs.size * ys.size + n_coarse + xs0.size
    return SeparatingSet(offer_l, offer_h, float(v_star), float(v_no),
                         checked)

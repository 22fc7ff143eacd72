"""Finite screening model: type spaces, utilities, mechanisms, menus.

An agent has a two-part type (theta_a, theta_b). The productive component
theta_a is a scalar ordering over a finite grid of allocations x. The costly
component theta_b is a point in R^N ordered componentwise; its allocations y
come from a finite set with a distinguished baseline y0 that is normalized to
zero utility on both sides.

Table conventions (row-major, allocation rows):

- ``u_a``, ``v_a`` have shape (len(x_grid), len(theta_a))
- ``u_b``, ``v_b`` have shape (len(y_set), len(theta_b))

A mechanism assigns one (x index, y index, transfer) triple to each support
point of the joint type distribution. The agent's outside option pays both
sides exactly zero; evaluators append it implicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import StructuralError

# Equality / feasibility comparisons.
FEAS_TOL = 1e-9
# Comparisons between solver values.
VALUE_TOL = 1e-6
# Probability bookkeeping.
PROB_TOL = 1e-12

#: Sentinel used in menu assignments for the outside option.
OUTSIDE = -1


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _strictly_increasing(a: np.ndarray) -> bool:
    return bool(np.all(np.diff(a) > 0))


# ---------------------------------------------------------------------------
# core data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProductiveSpec:
    """Scalar-type component: allocation grid and utility tables."""

    theta_a: np.ndarray  # (n_a,) strictly increasing
    x_grid: np.ndarray   # (n_x,) strictly increasing
    u_a: np.ndarray      # (n_x, n_a) agent utility
    v_a: np.ndarray      # (n_x, n_a) principal utility

    def __post_init__(self):
        object.__setattr__(self, "theta_a", _frozen_array(self.theta_a))
        object.__setattr__(self, "x_grid", _frozen_array(self.x_grid))
        object.__setattr__(self, "u_a", _frozen_array(self.u_a))
        object.__setattr__(self, "v_a", _frozen_array(self.v_a))
        if self.theta_a.ndim != 1 or self.theta_a.size == 0:
            raise StructuralError("theta_a must be a nonempty 1-D array")
        if self.x_grid.ndim != 1 or self.x_grid.size == 0:
            raise StructuralError("x_grid must be a nonempty 1-D array")
        if not _strictly_increasing(self.theta_a):
            raise StructuralError("theta_a must be strictly increasing")
        if not _strictly_increasing(self.x_grid):
            raise StructuralError("x_grid must be strictly increasing")
        shape = (self.x_grid.size, self.theta_a.size)
        for name, tab in (("u_a", self.u_a), ("v_a", self.v_a)):
            if tab.shape != shape:
                raise StructuralError(f"{name} must have shape {shape}, got {tab.shape}")
            if not np.all(np.isfinite(tab)):
                raise StructuralError(f"{name} contains non-finite entries")

    @property
    def n_types(self) -> int:
        return self.theta_a.size

    @property
    def n_alloc(self) -> int:
        return self.x_grid.size


@dataclass(frozen=True, eq=False)
class CostlySpec:
    """Multidimensional-type component: finite instrument set with a baseline."""

    theta_b: np.ndarray   # (n_b, N) points in R^N, distinct
    y_set: np.ndarray     # (n_y,) instrument labels
    y0_index: int         # baseline instrument
    u_b: np.ndarray       # (n_y, n_b) agent utility
    v_b: np.ndarray       # (n_y, n_b) principal utility

    def __post_init__(self):
        theta_b = np.asarray(self.theta_b, dtype=float)
        if theta_b.ndim == 1:
            theta_b = theta_b.reshape(-1, 1)
        object.__setattr__(self, "theta_b", _frozen_array(theta_b))
        object.__setattr__(self, "y_set", _frozen_array(self.y_set))
        object.__setattr__(self, "u_b", _frozen_array(self.u_b))
        object.__setattr__(self, "v_b", _frozen_array(self.v_b))
        object.__setattr__(self, "y0_index", int(self.y0_index))
        if self.theta_b.ndim != 2 or self.theta_b.size == 0:
            raise StructuralError("theta_b must be a nonempty (n_b, N) array")
        if self.y_set.ndim != 1 or self.y_set.size == 0:
            raise StructuralError("y_set must be a nonempty 1-D array")
        if not 0 <= self.y0_index < self.y_set.size:
            raise StructuralError("y0_index out of range")
        pts = {tuple(row) for row in self.theta_b}
        if len(pts) != self.theta_b.shape[0]:
            raise StructuralError("theta_b points must be distinct")
        shape = (self.y_set.size, self.theta_b.shape[0])
        for name, tab in (("u_b", self.u_b), ("v_b", self.v_b)):
            if tab.shape != shape:
                raise StructuralError(f"{name} must have shape {shape}, got {tab.shape}")
            if not np.all(np.isfinite(tab)):
                raise StructuralError(f"{name} contains non-finite entries")

    @property
    def n_types(self) -> int:
        return self.theta_b.shape[0]

    @property
    def dim(self) -> int:
        return self.theta_b.shape[1]

    @property
    def n_alloc(self) -> int:
        return self.y_set.size

    @property
    def surplus(self) -> np.ndarray:
        """Instrument surplus u_b + v_b; nonpositive in a valid instance."""
        return self.u_b + self.v_b

    @property
    def strictly_costly(self) -> bool:
        """True when every non-baseline instrument burns surplus for every type."""
        s = self.surplus
        mask = np.ones(self.n_alloc, dtype=bool)
        mask[self.y0_index] = False
        if not mask.any():
            return False
        return bool(np.all(s[mask] < -FEAS_TOL))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Finitely supported joint law over (theta_a index, theta_b index) pairs."""

    support: tuple  # ((ia, ib), ...)
    prob: np.ndarray

    def __post_init__(self):
        support = tuple((int(a), int(b)) for a, b in self.support)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "prob", _frozen_array(self.prob))
        if len(support) == 0:
            raise StructuralError("support must be nonempty")
        if len(set(support)) != len(support):
            raise StructuralError("support pairs must be distinct")
        if self.prob.shape != (len(support),):
            raise StructuralError("prob must align with support")
        if not np.all(self.prob > 0):
            raise StructuralError("support weights must be strictly positive")
        if abs(float(self.prob.sum()) - 1.0) > PROB_TOL:
            raise StructuralError("support weights must sum to 1")

    def __len__(self) -> int:
        return len(self.support)


@dataclass(frozen=True, eq=False)
class ScreeningInstance:
    """A complete finite screening problem."""

    productive: ProductiveSpec
    costly: CostlySpec
    dist: JointDistribution

    def __post_init__(self):
        n_a, n_b = self.productive.n_types, self.costly.n_types
        for ia, ib in self.dist.support:
            if not (0 <= ia < n_a and 0 <= ib < n_b):
                raise StructuralError(f"support pair ({ia}, {ib}) out of range")

    @property
    def n_support(self) -> int:
        return len(self.dist)

    def type_vector(self, p: int) -> np.ndarray:
        """Full type of support point p as a vector (theta_a, theta_b...)."""
        ia, ib = self.dist.support[p]
        return np.concatenate(([self.productive.theta_a[ia]], self.costly.theta_b[ib]))


@dataclass(frozen=True, eq=False)
class Mechanism:
    """Direct mechanism: one (x index, y index, transfer) per support point."""

    x: tuple  # allocation indices into x_grid
    y: tuple  # instrument indices into y_set
    t: tuple  # transfers paid by the agent

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(int(i) for i in self.x))
        object.__setattr__(self, "y", tuple(int(i) for i in self.y))
        object.__setattr__(self, "t", tuple(float(v) for v in self.t))
        if not (len(self.x) == len(self.y) == len(self.t)):
            raise StructuralError("mechanism columns must have equal length")

    def __len__(self) -> int:
        return len(self.x)

    def option(self, p: int) -> tuple:
        return (self.x[p], self.y[p], self.t[p])


@dataclass(frozen=True, eq=False)
class Menu:
    """Indirect mechanism: options any type may pick; outside option implicit."""

    options: tuple  # ((ix, iy, t), ...)

    def __post_init__(self):
        opts = tuple((int(ix), int(iy), float(t)) for ix, iy, t in self.options)
        object.__setattr__(self, "options", opts)
        if len(set(opts)) != len(opts):
            raise StructuralError("menu options must be distinct")

    def __len__(self) -> int:
        return len(self.options)


class ICViolation(NamedTuple):
    deviator: int  # support index of the true type
    target: int    # support index whose bundle it grabs
    gain: float


class IRViolation(NamedTuple):
    point: int
    payoff: float


# ---------------------------------------------------------------------------
# payoffs
# ---------------------------------------------------------------------------


def agent_payoff(inst: ScreeningInstance, p: int, option) -> float:
    """Agent payoff of support point p taking `option` = (ix, iy, t) or OUTSIDE."""
    if option is None or option == OUTSIDE:
        return 0.0
    ia, ib = inst.dist.support[p]
    ix, iy, t = option
    return float(inst.productive.u_a[ix, ia] + inst.costly.u_b[iy, ib] - t)


def principal_payoff(inst: ScreeningInstance, p: int, option) -> float:
    """Principal payoff from support point p taking `option`."""
    if option is None or option == OUTSIDE:
        return 0.0
    ia, ib = inst.dist.support[p]
    ix, iy, t = option
    return float(inst.productive.v_a[ix, ia] + inst.costly.v_b[iy, ib] + t)


def mechanism_value(inst: ScreeningInstance, mech: Mechanism) -> float:
    """Expected principal payoff under truthful play."""
    if len(mech) != inst.n_support:
        raise StructuralError("mechanism length must match support size")
    return float(sum(
        inst.dist.prob[p] * principal_payoff(inst, p, mech.option(p))
        for p in range(inst.n_support)
    ))


# ---------------------------------------------------------------------------
# menus
# ---------------------------------------------------------------------------


def menu_best_response(inst: ScreeningInstance, menu: Menu):
    """Assign every support point its chosen option and value the menu.

    Each type takes an agent-payoff-maximizing option; agent ties (within
    FEAS_TOL) break toward the principal, principal ties toward the lowest
    option index, with the outside option losing all ties. Returns
    (assignment, value) where assignment[p] is an option index or OUTSIDE
    and value is exactly the probability-weighted sum of principal payoffs
    over the assignment.
    """
    options = menu.options if isinstance(menu, Menu) else tuple(menu)
    assignment = []
    value = 0.0
    for p in range(inst.n_support):
        agent_vals = [agent_payoff(inst, p, o) for o in options]
        best_agent = max(agent_vals, default=0.0)
        best_agent = max(best_agent, 0.0)  # outside option
        cand = [k for k, a in enumerate(agent_vals) if a >= best_agent - FEAS_TOL]
        outside_ok = 0.0 >= best_agent - FEAS_TOL
        if cand:
            pvals = [principal_payoff(inst, p, options[k]) for k in cand]
            best_p = max(pvals)
            if outside_ok:
                best_p = max(best_p, 0.0)
            chosen = next((k for k, pv in zip(cand, pvals) if pv >= best_p - FEAS_TOL), None)
            if chosen is None:  # only the outside option attains best_p
                chosen = OUTSIDE
        else:
            chosen = OUTSIDE
        assignment.append(chosen)
        picked = None if chosen == OUTSIDE else options[chosen]
        value += float(inst.dist.prob[p]) * principal_payoff(inst, p, picked)
    return assignment, value


# ---------------------------------------------------------------------------
# incentive checks
# ---------------------------------------------------------------------------


def _type_leq(inst: ScreeningInstance, p: int, q: int) -> bool:
    """Componentwise order on full type vectors: type(p) <= type(q)."""
    return bool(np.all(inst.type_vector(p) <= inst.type_vector(q) + 0.0))


def check_ic(inst: ScreeningInstance, mech: Mechanism, direction: str = "all"):
    """List IC violations of `mech` in the given deviation direction.

    direction="downward" restricts to deviations where the imitated type lies
    componentwise below the deviator, "upward" to componentwise above; "all"
    checks every ordered pair. A violation is a strict gain above FEAS_TOL.
    """
    if direction not in ("downward", "upward", "all"):
        raise ValueError(f"unknown direction {direction!r}")
    if len(mech) != inst.n_support:
        raise StructuralError("mechanism length must match support size")
    out = []
    for p in range(inst.n_support):
        truthful = agent_payoff(inst, p, mech.option(p))
        for q in range(inst.n_support):
            if q == p:
                continue
            if direction == "downward" and not _type_leq(inst, q, p):
                continue
            if direction == "upward" and not _type_leq(inst, p, q):
                continue
            gain = agent_payoff(inst, p, mech.option(q)) - truthful
            if gain > FEAS_TOL:
                out.append(ICViolation(p, q, float(gain)))
    return out


def check_ir(inst: ScreeningInstance, mech: Mechanism):
    """List support points whose truthful payoff falls below the outside option."""
    if len(mech) != inst.n_support:
        raise StructuralError("mechanism length must match support size")
    out = []
    for p in range(inst.n_support):
        payoff = agent_payoff(inst, p, mech.option(p))
        if payoff < -FEAS_TOL:
            out.append(IRViolation(p, float(payoff)))
    return out


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


class CheckResult(NamedTuple):
    passed: bool
    witness: tuple | None = None
    note: str = ""


#: Checks that gate the no-costly-screening theorem.
ASSUMPTION_CHECKS = (
    "productive_monotone",
    "productive_increasing_differences",
    "surplus_single_crossing",
    "costly_monotone",
    "stochastic_monotone",
    "costly_sign",
    "baseline_normalized",
)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of every model assumption check, with witnesses for failures."""

    checks: dict

    def passed(self, name: str) -> bool:
        return self.checks[name].passed

    def witness(self, name: str):
        return self.checks[name].witness

    @property
    def assumptions_hold(self) -> bool:
        return all(self.checks[name].passed for name in ASSUMPTION_CHECKS)

    @property
    def failures(self) -> list:
        return [name for name, c in self.checks.items()
                if name != "costly_sign_strict" and not c.passed]

    def __str__(self) -> str:
        lines = []
        for name, c in self.checks.items():
            status = "ok" if c.passed else f"FAIL witness={c.witness}"
            lines.append(f"{name}: {status}")
        return "\n".join(lines)


def _check_productive_monotone(spec: ProductiveSpec) -> CheckResult:
    # u_a nondecreasing in theta_a at every allocation
    for i in range(spec.n_alloc):
        row = spec.u_a[i]
        for j in range(spec.n_types - 1):
            if row[j + 1] < row[j] - FEAS_TOL:
                return CheckResult(False, (float(spec.x_grid[i]),
                                           float(spec.theta_a[j]),
                                           float(spec.theta_a[j + 1])))
    return CheckResult(True)


def _check_increasing_differences(spec: ProductiveSpec) -> CheckResult:
    # strict increasing differences of u_a; adjacent steps suffice since
    # differences telescope over both the allocation and the type grid
    u = spec.u_a
    for i in range(spec.n_alloc - 1):
        for j in range(spec.n_types - 1):
            delta = (u[i + 1, j + 1] - u[i, j + 1]) - (u[i + 1, j] - u[i, j])
            if not delta > FEAS_TOL:
                return CheckResult(False, (float(spec.x_grid[i]),
                                           float(spec.x_grid[i + 1]),
                                           float(spec.theta_a[j]),
                                           float(spec.theta_a[j + 1])))
    return CheckResult(True)


def _check_single_crossing(spec: ProductiveSpec) -> CheckResult:
    # weak single crossing of the productive surplus: once an upgrade gains
    # (weakly/strictly), it keeps gaining for higher types; implication
    # checked on adjacent type pairs, every allocation pair
    s = spec.u_a + spec.v_a
    for i in range(spec.n_alloc - 1):
        for k in range(i + 1, spec.n_alloc):
            d = s[k] - s[i]
            for j in range(spec.n_types - 1):
                if d[j] > FEAS_TOL and not d[j + 1] > FEAS_TOL:
                    return CheckResult(False, (float(spec.x_grid[i]), float(spec.x_grid[k]),
                                               float(spec.theta_a[j]), float(spec.theta_a[j + 1])),
                                       "strict gain reversed")
                if d[j] >= -FEAS_TOL and d[j + 1] < -FEAS_TOL:
                    return CheckResult(False, (float(spec.x_grid[i]), float(spec.x_grid[k]),
                                               float(spec.theta_a[j]), float(spec.theta_a[j + 1])),
                                       "weak gain reversed")
    return CheckResult(True)


def _check_costly_monotone(spec: CostlySpec) -> CheckResult:
    # u_b nondecreasing along the componentwise order of theta_b
    n = spec.n_types
    for b in range(n):
        for c in range(n):
            if b == c or not np.all(spec.theta_b[b] <= spec.theta_b[c]):
                continue
            for y in range(spec.n_alloc):
                if spec.u_b[y, b] > spec.u_b[y, c] + FEAS_TOL:
                    return CheckResult(False, (int(y), tuple(spec.theta_b[b]),
                                               tuple(spec.theta_b[c])))
    return CheckResult(True)


def _check_costly_sign(spec: CostlySpec) -> CheckResult:
    s = spec.surplus
    for y in range(spec.n_alloc):
        for b in range(spec.n_types):
            if s[y, b] > FEAS_TOL:
                return CheckResult(False, (int(y), int(b), float(s[y, b])))
    return CheckResult(True)


def _check_baseline(spec: CostlySpec) -> CheckResult:
    y0 = spec.y0_index
    for name, tab in (("u_b", spec.u_b), ("v_b", spec.v_b)):
        for b in range(spec.n_types):
            if tab[y0, b] != 0.0:
                return CheckResult(False, (name, int(b), float(tab[y0, b])))
    return CheckResult(True)


def validate_instance(inst: ScreeningInstance) -> ValidationReport:
    """Run every model assumption check and return a full report.

    Structural defects raise StructuralError at construction; everything here
    is reported, never raised, so diagnostic runs on violating instances
    (including the strictness of the instrument-surplus sign) stay possible.
    """
    from .stochastics import check_stochastic_monotonicity  # local to avoid a cycle

    checks: dict[str, CheckResult] = {}
    checks["productive_monotone"] = _check_productive_monotone(inst.productive)
    checks["productive_increasing_differences"] = _check_increasing_differences(inst.productive)
    checks["surplus_single_crossing"] = _check_single_crossing(inst.productive)
    checks["costly_monotone"] = _check_costly_monotone(inst.costly)
    ok, witness = check_stochastic_monotonicity(inst)
    checks["stochastic_monotone"] = CheckResult(ok, witness)
    checks["costly_sign"] = _check_costly_sign(inst.costly)
    checks["costly_sign_strict"] = CheckResult(inst.costly.strictly_costly, None,
                                               "informational flag")
    checks["baseline_normalized"] = _check_baseline(inst.costly)
    return ValidationReport(checks)

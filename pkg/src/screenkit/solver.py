"""Exact solvers: downward relaxation, full IC, and the joint problem.

Everything here is a certificate, not an estimate: solvers enumerate or use
exact dynamic programming, and refuse (SizeGuardExceeded) rather than sample
when a problem is too large. Ties break deterministically toward the
lexicographically smallest allocation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import SizeGuardExceeded, StructuralError
from .model import (FEAS_TOL, JointDistribution, Mechanism, ScreeningInstance)
from .transfers import (OneDimInstance, closed_form_downward_transfers,
                        graph_optimal_transfers, onedim_value)

#: Default ceiling on exact enumeration size.
DEFAULT_GUARD = 10 ** 7


@dataclass(frozen=True)
class SolveResult:
    """Solution of a scalar-type problem."""

    mode: str
    value: float
    x_idx: tuple
    t: tuple
    certificate: dict


@dataclass(frozen=True)
class JointSolveResult:
    """Solution of the joint problem over all instruments."""

    value: float
    mechanism: Mechanism
    some_optimum_baseline: bool  # an optimum keeps every instrument at y0
    all_optima_baseline: bool    # every optimum does
    certificate: dict


def productive_marginal(inst: ScreeningInstance) -> OneDimInstance:
    """Scalar-type problem induced by ignoring the costly instruments."""
    levels = sorted({ia for ia, _ in inst.dist.support})
    weight = {ia: 0.0 for ia in levels}
    for (ia, _), pr in zip(inst.dist.support, inst.dist.prob):
        weight[ia] += float(pr)
    mu = np.array([weight[ia] for ia in levels])
    return OneDimInstance(
        inst.productive.theta_a[levels], mu, inst.productive.x_grid,
        inst.productive.u_a[:, levels], inst.productive.v_a[:, levels])


# ---------------------------------------------------------------------------
# scalar-type solvers
# ---------------------------------------------------------------------------


def solve_downward_1d(inst: OneDimInstance, guard: int = DEFAULT_GUARD) -> SolveResult:
    """Maximize expected payoff subject to downward IC and participation only.

    Enumerates every allocation (size-guarded), prices each by the closed
    form, and keeps the lexicographically smallest maximizer. Optimal
    allocations here may be non-monotone.
    """
    n, n_alloc = inst.n, inst.n_alloc
    total = n_alloc ** n
    if total > guard:
        raise SizeGuardExceeded("downward enumeration too large", total, guard)
    u_rows = inst.u.tolist()
    v_rows = inst.v.tolist()
    mu = inst.mu.tolist()
    best = -float("inf")
    best_x = None
    best_t = None
    for combo in itertools.product(range(n_alloc), repeat=n):
        t = closed_form_downward_transfers(inst, combo, _u_rows=u_rows)
        value = 0.0
        for i in range(n):
            value += mu[i] * (v_rows[combo[i]][i] + t[i])
        if value > best:
            best, best_x, best_t = value, combo, t
    return SolveResult("downward1d", float(best), tuple(best_x),
                       tuple(float(v) for v in best_t),
                       {"method": "enumeration", "enumerated": total})


def solve_full_1d(inst: OneDimInstance) -> SolveResult:
    """Maximize expected payoff subject to all IC and participation.

    Under the model assumptions the optimum uses a nondecreasing allocation
    with every local downward constraint binding, so each type contributes
    its weighted virtual surplus and an exact dynamic program over monotone
    allocations finds the optimum; no ironing step is needed. Transfers come
    from the constraint-graph maximum over the full IC set.
    """
    n, n_alloc = inst.n, inst.n_alloc
    u, v, mu = inst.u, inst.v, inst.mu
    tail = np.concatenate([np.cumsum(mu[::-1])[::-1][1:], [0.0]])  # tail[j] = sum_{i>j} mu_i
    contrib = np.empty((n, n_alloc))
    for j in range(n):
        base = mu[j] * (u[:, j] + v[:, j])
        if j < n - 1:
            base = base - (u[:, j + 1] - u[:, j]) * tail[j]
        contrib[j] = base
    # M[j][c] = contrib + best continuation; G[j][c] = max over allocations >= c
    G_next = np.zeros(n_alloc)
    stage_m = []
    for j in range(n - 1, -1, -1):
        M = contrib[j] + G_next
        G = np.maximum.accumulate(M[::-1])[::-1]
        stage_m.append(M)
        G_next = G
    stage_m.reverse()
    x_idx = []
    floor = 0
    for j in range(n):
        M = stage_m[j]
        suffix = np.maximum.accumulate(M[::-1])[::-1]
        c = floor
        while M[c] != suffix[floor]:
            c += 1
        x_idx.append(c)
        floor = c
    t = graph_optimal_transfers(inst, x_idx, "all")
    value = onedim_value(inst, x_idx, t)
    dp_value = float(G_next[0])
    if abs(value - dp_value) > FEAS_TOL:
        raise StructuralError(
            f"full-IC transfers disagree with the dynamic program "
            f"({value:.12g} vs {dp_value:.12g}); instance likely violates "
            f"increasing differences")
    return SolveResult("full1d", float(value), tuple(int(i) for i in x_idx),
                       tuple(float(x) for x in t),
                       {"method": "monotone_dp", "stages": n})


# ---------------------------------------------------------------------------
# joint solver
# ---------------------------------------------------------------------------


def _decode(ids: np.ndarray, m: int, n_opts: int) -> np.ndarray:
    digits = np.empty((ids.size, m), dtype=np.int64)
    rem = ids.copy()
    for p in range(m - 1, -1, -1):
        digits[:, p] = rem % n_opts
        rem //= n_opts
    return digits


def _batch_transfers(U: np.ndarray, allocs: np.ndarray):
    """Maximal feasible transfers per allocation row; -inf rows are infeasible.

    U is the (support point, option) utility table. Runs Bellman-Ford on all
    rows at once: distances start at the participation caps and relax through
    every deviation edge until stable.
    """
    C, m = allocs.shape
    idx = np.arange(m)
    Ualloc = U[idx[None, :], allocs]                      # (C, m)
    T = U[idx[None, :, None], allocs[:, None, :]]         # (C, m, m): U_p(a_q)
    W = Ualloc[:, :, None] - T                            # edge weight q -> p
    D = Ualloc.copy()
    for _ in range(m):
        cand = (D[:, None, :] + W).min(axis=2)
        newD = np.minimum(D, cand)
        if np.array_equal(newD, D):
            break
        D = newD
    cand = (D[:, None, :] + W).min(axis=2)
    infeasible = (cand < D - 1e-12).any(axis=1)
    return D, infeasible


def solve_joint(inst: ScreeningInstance, guard: int = DEFAULT_GUARD,
                chunk: int = 1 << 14) -> JointSolveResult:
    """Exact optimum of the joint problem by allocation enumeration.

    Every support point independently receives one (x, y) option; transfers
    are the componentwise-maximal feasible point of the full IC + IR system
    for that assignment. Assignments whose total surplus cannot reach the
    running optimum are pruned (sound: transfers never exceed willingness to
    pay), with ties kept so the optimal set is classified exactly.
    """
    prod, cost, dist = inst.productive, inst.costly, inst.dist
    m = inst.n_support
    options = [(ix, iy) for ix in range(prod.n_alloc) for iy in range(cost.n_alloc)]
    A = len(options)
    total = A ** m
    if total > guard:
        raise SizeGuardExceeded("joint enumeration too large", total, guard)
    prob = np.asarray(dist.prob)
    ia = np.array([a for a, _ in dist.support])
    ib = np.array([b for _, b in dist.support])
    opt_x = np.array([o[0] for o in options])
    opt_y = np.array([o[1] for o in options])
    U = prod.u_a[opt_x][:, ia].T + cost.u_b[opt_y][:, ib].T   # (m, A)
    VG = prod.v_a[opt_x][:, ia].T + cost.v_b[opt_y][:, ib].T  # gross principal
    surplus = prob[:, None] * (U + VG)

    def evaluate(ids: np.ndarray):
        allocs = _decode(ids, m, A)
        D, infeasible = _batch_transfers(U, allocs)
        idx = np.arange(m)
        values = (prob[None, :] * (VG[idx[None, :], allocs] + D)).sum(axis=1)
        values[infeasible] = -np.inf
        return allocs, D, values

    # seed the prune bound with the baseline-only assignments
    y0_opts = np.array([k for k, (_, iy) in enumerate(options) if iy == cost.y0_index])
    best = -np.inf
    n_evaluated = 0
    base_total = y0_opts.size ** m
    for start in range(0, base_total, chunk):
        ids = np.arange(start, min(start + chunk, base_total), dtype=np.int64)
        digits = _decode(ids, m, y0_opts.size)
        allocs = y0_opts[digits]
        D, infeasible = _batch_transfers(U, allocs)
        idx = np.arange(m)
        values = (prob[None, :] * (VG[idx[None, :], allocs] + D)).sum(axis=1)
        values[infeasible] = -np.inf
        n_evaluated += ids.size
        if values.size:
            best = max(best, float(values.max()))

    # full sweep with surplus-bound pruning; optimum ties kept
    cand_ids = []
    cand_vals = []
    best_id = None
    best_val = -np.inf
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        allocs = _decode(ids, m, A)
        idx = np.arange(m)
        bound = surplus[idx[None, :], allocs].sum(axis=1)
        keep = bound >= best - FEAS_TOL
        if not keep.any():
            continue
        ids = ids[keep]
        allocs, D, values = evaluate(ids)
        n_evaluated += ids.size
        top = float(values.max())
        if top > best_val:
            best_val = top
            best_id = int(ids[int(np.argmax(values))])
        best = max(best, top)
        near = values >= best - FEAS_TOL
        cand_ids.append(ids[near])
        cand_vals.append(values[near])

    if best_id is None:
        raise StructuralError("joint enumeration found no feasible assignment")
    all_ids = np.concatenate(cand_ids)
    all_vals = np.concatenate(cand_vals)
    optima = all_ids[all_vals >= best_val - FEAS_TOL]
    y_digits = opt_y[_decode(optima, m, A)]
    baseline_mask = (y_digits == cost.y0_index).all(axis=1)
    some_baseline = bool(baseline_mask.any())
    all_baseline = bool(baseline_mask.all())

    alloc, D, values = evaluate(np.array([best_id], dtype=np.int64))
    mech = Mechanism(tuple(opt_x[alloc[0]]), tuple(opt_y[alloc[0]]),
                     tuple(float(t) for t in D[0]))
    return JointSolveResult(
        float(best_val), mech, some_baseline, all_baseline,
        {"method": "enumeration", "enumerated": total, "evaluated": n_evaluated,
         "optima": int(optima.size)})


# ---------------------------------------------------------------------------
# grid convergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceFamily:
    """Continuous-type family sampled onto left-endpoint grids."""

    u: Callable      # u(x, theta)
    v: Callable      # v(x, theta)
    x_grid: np.ndarray
    cdf: Callable = staticmethod(lambda q: q)  # type distribution on [0, 1]
    name: str = "family"


def default_convergence_family() -> ConvergenceFamily:
    return ConvergenceFamily(
        u=lambda x, th: th * x,
        v=lambda x, th: -0.5 * x,
        x_grid=np.linspace(0.0, 1.0, 6),
        name="linear-costly-supply")


@dataclass(frozen=True)
class ConvergenceStudy:
    levels: tuple
    values: tuple

    @property
    def gaps(self) -> tuple:
        return tuple(abs(self.values[i + 1] - self.values[i])
                     for i in range(len(self.values) - 1))


def discretize_family(family: ConvergenceFamily, n: int) -> OneDimInstance:
    """Left-endpoint discretization with interval masses."""
    theta = np.arange(n) / n
    edges = np.arange(n + 1) / n
    mu = np.array([family.cdf(edges[i + 1]) - family.cdf(edges[i]) for i in range(n)])
    x_grid = np.asarray(family.x_grid, dtype=float)
    u = np.array([[family.u(x, th) for th in theta] for x in x_grid])
    v = np.array([[family.v(x, th) for th in theta] for x in x_grid])
    return OneDimInstance(theta, mu, x_grid, u, v)


def grid_convergence_study(family: ConvergenceFamily,
                           levels: Sequence = (8, 16, 32, 64)) -> ConvergenceStudy:
    """Solve the full-IC problem on successively finer type grids."""
    values = []
    for n in levels:
        inst = discretize_family(family, int(n))
        values.append(solve_full_1d(inst).value)
    return ConvergenceStudy(tuple(int(n) for n in levels), tuple(values))

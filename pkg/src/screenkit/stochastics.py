"""Stochastic order machinery for the costly component.

Dominance between finitely supported laws on R^N is decided by an exact
max-flow on the componentwise admissibility graph (capacities are
probabilities scaled to integers at 1e-12 resolution, so there is no flow
tolerance to tune). Exhaustive upper-set enumeration is kept alongside as an
independent oracle. Monotone couplings feed the path decomposition: every
stochastically monotone joint law is a finite mixture of nondecreasing paths.
"""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import NotDominated, NotMonotone, SizeGuardExceeded, StructuralError
from .model import (FEAS_TOL, PROB_TOL, CostlySpec, JointDistribution,
                    ProductiveSpec, ScreeningInstance)

# Probabilities are scaled by this before max-flow; one unit is 1e-12 mass.
_FLOW_SCALE = 10 ** 12
# Flow shortfall accepted as "dominated within tolerance" (1e-9 of mass).
_FLOW_SLACK = 10 ** 3


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finitely supported law on R^N."""

    points: np.ndarray  # (k, N)
    prob: np.ndarray    # (k,) strictly positive, sums to 1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        pr = np.asarray(self.prob, dtype=float)
        pr.setflags(write=False)
        object.__setattr__(self, "prob", pr)
        if self.points.ndim != 2 or self.points.size == 0:
            raise StructuralError("points must be a nonempty (k, N) array")
        if self.prob.shape != (self.points.shape[0],):
            raise StructuralError("prob must align with points")
        if not np.all(self.prob > 0):
            raise StructuralError("probabilities must be strictly positive")
        if abs(float(self.prob.sum()) - 1.0) > 1e-9:
            raise StructuralError("probabilities must sum to 1")
        seen = {tuple(row) for row in self.points}
        if len(seen) != self.points.shape[0]:
            raise StructuralError("points must be distinct")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint law on pairs (p point, q point) supported on comparable pairs."""

    p: DiscreteDistribution
    q: DiscreteDistribution
    mass: np.ndarray  # (len(p), len(q))

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    def marginal_error(self) -> float:
        row = np.abs(self.mass.sum(axis=1) - self.p.prob).max()
        col = np.abs(self.mass.sum(axis=0) - self.q.prob).max()
        return float(max(row, col))


@dataclass(frozen=True)
class TypePath:
    """One nondecreasing trajectory of the costly type along the scalar type."""

    weight: float
    b_indices: tuple  # theta_b index per scalar-type level


@dataclass(frozen=True, eq=False)
class PathMixture:
    """Weighted mixture of monotone paths reproducing a joint distribution."""

    a_indices: tuple     # theta_a indices present in the support, ascending
    a_probs: np.ndarray  # scalar-type marginal over a_indices
    paths: tuple         # TypePath entries

    def __post_init__(self):
        pr = np.asarray(self.a_probs, dtype=float)
        pr.setflags(write=False)
        object.__setattr__(self, "a_probs", pr)
        object.__setattr__(self, "a_indices", tuple(int(i) for i in self.a_indices))
        object.__setattr__(self, "paths", tuple(self.paths))

    def joint(self) -> dict:
        """Reconstructed joint law as {(ia, ib): probability}."""
        out: dict = {}
        for path in self.paths:
            for k, ia in enumerate(self.a_indices):
                key = (ia, path.b_indices[k])
                out[key] = out.get(key, 0.0) + path.weight * float(self.a_probs[k])
        return out


# ---------------------------------------------------------------------------
# dominance
# ---------------------------------------------------------------------------


def _integer_weights(prob: np.ndarray) -> list:
    """Scale probabilities to integers summing exactly to the flow scale."""
    w = [round(float(p) * _FLOW_SCALE) for p in prob]
    w[int(np.argmax(prob))] += _FLOW_SCALE - sum(w)
    return w


def _admissible(p_pts: np.ndarray, q_pts: np.ndarray) -> np.ndarray:
    """Boolean matrix: p point i componentwise <= q point j."""
    return np.all(p_pts[:, None, :] <= q_pts[None, :, :], axis=2)


def _flow_between(p: DiscreteDistribution, q: DiscreteDistribution):
    """Max flow through the admissibility graph, integer units."""
    wp, wq = _integer_weights(p.prob), _integer_weights(q.prob)
    adm = _admissible(p.points, q.points)
    g = nx.DiGraph()
    for i, w in enumerate(wp):
        if w > 0:
            g.add_edge("s", ("p", i), capacity=w)
    for j, w in enumerate(wq):
        if w > 0:
            g.add_edge(("q", j), "t", capacity=w)
    for i in range(len(p)):
        for j in range(len(q)):
            if adm[i, j]:
                g.add_edge(("p", i), ("q", j), capacity=_FLOW_SCALE)
    if "s" not in g or "t" not in g:
        return 0, {}
    value, flow = nx.maximum_flow(g, "s", "t")
    return value, flow


def _cdf_dominates(p: DiscreteDistribution, q: DiscreteDistribution, tol: float) -> bool:
    # scalar case: p below q iff F_p >= F_q everywhere
    grid = np.unique(np.concatenate([p.points[:, 0], q.points[:, 0]]))
    for v in grid:
        fp = float(p.prob[p.points[:, 0] <= v + 0.0].sum())
        fq = float(q.prob[q.points[:, 0] <= v + 0.0].sum())
        if fp < fq - tol:
            return False
    return True


def check_dominance(p: DiscreteDistribution, q: DiscreteDistribution,
                    tol: float = FEAS_TOL) -> bool:
    """Decide whether p is stochastically below q (usual stochastic order)."""
    if p.dim != q.dim:
        raise StructuralError("distributions must share a dimension")
    if p.dim == 1:
        return _cdf_dominates(p, q, tol)
    value, _ = _flow_between(p, q)
    return _FLOW_SCALE - value <= _FLOW_SLACK


def dominance_by_upper_sets(p: DiscreteDistribution, q: DiscreteDistribution,
                            tol: float = FEAS_TOL, guard: int = 2 ** 20) -> bool:
    """Oracle route: compare masses of every upper set of the joint support.

    Exponential in support size; guarded. Kept deliberately independent of the
    flow construction so the two can certify each other in tests.
    """
    if p.dim != q.dim:
        raise StructuralError("distributions must share a dimension")
    pts = {tuple(row) for row in p.points} | {tuple(row) for row in q.points}
    order = sorted(pts)
    k = len(order)
    if 2 ** k > guard:
        raise SizeGuardExceeded("upper-set enumeration too large", 2 ** k, guard)
    arr = np.array(order, dtype=float)
    up_mask = []
    for i in range(k):
        m = 0
        for j in range(k):
            if np.all(arr[i] <= arr[j]):
                m |= 1 << j
        up_mask.append(m)
    mass_p = np.zeros(k)
    mass_q = np.zeros(k)
    index = {pt: i for i, pt in enumerate(order)}
    for row, pr in zip(p.points, p.prob):
        mass_p[index[tuple(row)]] += pr
    for row, pr in zip(q.points, q.prob):
        mass_q[index[tuple(row)]] += pr
    for subset in range(1, 2 ** k):
        closed = True
        s = subset
        while s:
            i = (s & -s).bit_length() - 1
            if up_mask[i] & ~subset:
                closed = False
                break
            s &= s - 1
        if not closed:
            continue
        total_p = total_q = 0.0
        s = subset
        while s:
            i = (s & -s).bit_length() - 1
            total_p += mass_p[i]
            total_q += mass_q[i]
            s &= s - 1
        if total_p > total_q + tol:
            return False
    return True


def strassen_coupling(p: DiscreteDistribution, q: DiscreteDistribution) -> Coupling:
    """Monotone coupling of p below q; raises NotDominated if none exists.

    The coupling lives on componentwise-comparable pairs and matches both
    marginals to within 1e-9.
    """
    if p.dim != q.dim:
        raise StructuralError("distributions must share a dimension")
    value, flow = _flow_between(p, q)
    if _FLOW_SCALE - value > _FLOW_SLACK:
        raise NotDominated("no monotone coupling: distributions are not ordered")
    mass = np.zeros((len(p), len(q)))
    for node, edges in flow.items():
        if isinstance(node, tuple) and node[0] == "p":
            i = node[1]
            for target, units in edges.items():
                if isinstance(target, tuple) and target[0] == "q" and units:
                    mass[i, target[1]] = units / _FLOW_SCALE
    return Coupling(p, q, mass)


# ---------------------------------------------------------------------------
# conditionals and monotonicity of a joint law
# ---------------------------------------------------------------------------


def scalar_levels(inst: ScreeningInstance):
    """Scalar-type indices in the support, their marginal, and conditionals.

    Returns (a_indices, a_probs, conditionals) where each conditional is a
    list of (theta_b index, conditional probability) sorted by index.
    """
    by_level: dict = {}
    for (ia, ib), pr in zip(inst.dist.support, inst.dist.prob):
        by_level.setdefault(ia, {})
        by_level[ia][ib] = by_level[ia].get(ib, 0.0) + float(pr)
    a_indices = sorted(by_level)
    a_probs = np.array([sum(by_level[ia].values()) for ia in a_indices])
    conds = []
    for ia, total in zip(a_indices, a_probs):
        items = sorted(by_level[ia].items())
        conds.append([(ib, w / total) for ib, w in items])
    return tuple(a_indices), a_probs, conds


def _conditional_distribution(inst: ScreeningInstance, cond) -> DiscreteDistribution:
    idx = [ib for ib, _ in cond]
    return DiscreteDistribution(inst.costly.theta_b[idx], [w for _, w in cond])


def check_stochastic_monotonicity(inst: ScreeningInstance):
    """Check that the costly type rises stochastically with the scalar type.

    Returns (ok, witness); the witness is the offending pair of scalar-type
    values. Adjacent support levels suffice since the order is transitive.
    """
    a_indices, _, conds = scalar_levels(inst)
    for k in range(len(a_indices) - 1):
        lo = _conditional_distribution(inst, conds[k])
        hi = _conditional_distribution(inst, conds[k + 1])
        if not check_dominance(lo, hi):
            return False, (float(inst.productive.theta_a[a_indices[k]]),
                           float(inst.productive.theta_a[a_indices[k + 1]]))
    return True, None


# ---------------------------------------------------------------------------
# path decomposition
# ---------------------------------------------------------------------------


def _quantile_paths(inst: ScreeningInstance, a_indices, conds):
    # scalar costly type: common-quantile coupling across levels
    cdfs = []
    for cond in conds:
        vals = sorted(cond, key=lambda item: inst.costly.theta_b[item[0], 0])
        cum = []
        acc = 0.0
        for ib, w in vals:
            acc += w
            cum.append((acc, ib))
        cum[-1] = (1.0, cum[-1][1])
        cdfs.append(cum)
    cuts = {1.0}
    for cum in cdfs:
        for acc, _ in cum[:-1]:
            cuts.add(acc)
    levels = sorted(cuts)
    merged = [levels[0]]
    for u in levels[1:]:
        if u - merged[-1] > PROB_TOL:
            merged.append(u)
        else:
            merged[-1] = u  # collapse near-equal cuts, keep the top one
    paths = []
    lo = 0.0
    for hi in merged:
        mid = 0.5 * (lo + hi)
        b_idx = []
        for cum in cdfs:
            for acc, ib in cum:
                if acc >= mid:
                    b_idx.append(ib)
                    break
        paths.append(TypePath(hi - lo, tuple(b_idx)))
        lo = hi
    return paths


def _peeled_paths(inst: ScreeningInstance, a_indices, conds):
    # chain exact integer couplings level to level, then peel bottleneck paths
    levels = len(a_indices)
    if levels == 1:
        return [TypePath(w, (ib,)) for ib, w in conds[0]]
    dists = [_conditional_distribution(inst, cond) for cond in conds]
    edge_units = []
    for k in range(levels - 1):
        coupling = strassen_coupling(dists[k], dists[k + 1])
        units = np.rint(coupling.mass * _FLOW_SCALE).astype(np.int64)
        edge_units.append(units)
    paths = []
    first = edge_units[0]
    while True:
        rows = first.sum(axis=1)
        start = next((i for i in range(len(rows)) if rows[i] > 0), None)
        if start is None:
            break
        chain = [start]
        bottleneck = None
        node = start
        ok = True
        for k in range(levels - 1):
            row = edge_units[k][node]
            nxt = next((j for j in range(row.size) if row[j] > 0), None)
            if nxt is None:
                ok = False
                break
            units = int(row[nxt])
            bottleneck = units if bottleneck is None else min(bottleneck, units)
            chain.append(nxt)
            node = nxt
        if not ok:
            raise NotMonotone("coupling chain lost mass; cannot peel a full path")
        for k in range(levels - 1):
            edge_units[k][chain[k], chain[k + 1]] -= bottleneck
        b_idx = tuple(conds[k][chain[k]][0] for k in range(levels))
        paths.append(TypePath(bottleneck / _FLOW_SCALE, b_idx))
    return paths


def path_decomposition(inst: ScreeningInstance) -> PathMixture:
    """Write the joint type law as a weighted mixture of monotone paths.

    Requires stochastic monotonicity (NotMonotone otherwise). The scalar
    costly case uses the common-quantile coupling; higher dimensions chain
    exact monotone couplings between adjacent levels and repeatedly peel the
    bottleneck trajectory. The mixture reproduces the joint law to 1e-9 and
    every path is componentwise nondecreasing.
    """
    ok, witness = check_stochastic_monotonicity(inst)
    if not ok:
        raise NotMonotone(f"costly type not stochastically monotone at levels {witness}")
    a_indices, a_probs, conds = scalar_levels(inst)
    if inst.costly.dim == 1:
        paths = _quantile_paths(inst, a_indices, conds)
    else:
        paths = _peeled_paths(inst, a_indices, conds)
    mixture = PathMixture(a_indices, a_probs, tuple(paths))
    _assert_reproduces(inst, mixture)
    return mixture


def _assert_reproduces(inst: ScreeningInstance, mixture: PathMixture):
    got = mixture.joint()
    want = {pair: float(pr) for pair, pr in zip(inst.dist.support, inst.dist.prob)}
    keys = set(got) | set(want)
    worst = max(abs(got.get(k, 0.0) - want.get(k, 0.0)) for k in keys)
    if worst > 1e-9:
        raise NotMonotone(f"path mixture fails to reproduce the joint law (err {worst:g})")
    theta = inst.costly.theta_b
    for path in mixture.paths:
        for k in range(len(path.b_indices) - 1):
            lo, hi = path.b_indices[k], path.b_indices[k + 1]
            if not np.all(theta[lo] <= theta[hi] + 1e-12):
                raise NotMonotone("peeled path is not monotone")


# ---------------------------------------------------------------------------
# seeded instance generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorKnobs:
    """Size and shape controls for random positively correlated instances."""

    n_a: int = 3
    n_b: int = 2
    n_x: int = 3
    n_y: int = 2
    dim: int = 1
    strict_costly: bool = True
    max_paths: int = 2


def instance_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; (seed, stream) fully determines the draws."""
    mask = (1 << 64) - 1
    key = np.array([seed & mask, stream & mask], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def random_positive_instance(seed: int, knobs: GeneratorKnobs = GeneratorKnobs(),
                             stream: int = 0) -> ScreeningInstance:
    """Draw an instance satisfying every model assumption by construction.

    The productive utility is a product of increasing terms, the instrument
    utility scales a nonincreasing positive type weight, and the joint law is
    a mixture of nondecreasing paths through a componentwise chain, so the
    assumption checks (including stochastic monotonicity) always pass.
    """
    rng = instance_rng(seed, stream)
    k = knobs

    theta_a = np.round(rng.uniform(0.1, 0.6) + np.concatenate(
        [[0.0], np.cumsum(rng.uniform(0.2, 0.8, k.n_a - 1))]), 6)
    x_grid = np.round(rng.uniform(0.0, 0.4) + np.concatenate(
        [[0.0], np.cumsum(rng.uniform(0.2, 0.7, k.n_x - 1))]), 6)
    a_vals = rng.uniform(0.2, 0.6) + np.concatenate(
        [[0.0], np.cumsum(rng.uniform(0.1, 0.5, k.n_a - 1))])
    b_vals = rng.uniform(0.0, 0.3) + np.concatenate(
        [[0.0], np.cumsum(rng.uniform(0.15, 0.5, k.n_x - 1))])
    u_a = np.outer(b_vals, a_vals)
    v_a = np.tile(rng.uniform(-0.6, 0.6, k.n_x)[:, None], (1, k.n_a))

    start = rng.uniform(-0.5, 0.5, k.dim)
    steps = rng.uniform(0.15, 0.7, (max(k.n_b - 1, 0), k.dim))
    theta_b = np.round(np.vstack([start, start + np.cumsum(steps, axis=0)])[:k.n_b], 6)
    beta = rng.uniform(0.2, 1.0, k.dim)
    w = np.exp(-((theta_b - theta_b[0]) @ beta))  # 1 at the bottom, nonincreasing
    c = np.zeros(k.n_y)
    if k.n_y > 1:
        c[1:] = rng.uniform(0.15, 1.0, k.n_y - 1)
    rho = np.zeros(k.n_y)
    for y in range(1, k.n_y):
        if k.strict_costly:
            rho[y] = rng.uniform(0.0, 0.85)
        else:
            rho[y] = 1.0 if rng.random() < 0.5 else rng.uniform(0.0, 0.85)
    u_b = -np.outer(c, w)
    v_b = np.outer(rho * c, w)
    u_b[0] = 0.0
    v_b[0] = 0.0

    mu_a = rng.uniform(0.25, 1.0, k.n_a)
    mu_a /= mu_a.sum()
    n_paths = int(rng.integers(1, k.max_paths + 1))
    weights = rng.uniform(0.25, 1.0, n_paths)
    weights /= weights.sum()
    joint: dict = {}
    for w_k in weights:
        path = np.sort(rng.integers(0, k.n_b, k.n_a))
        for i in range(k.n_a):
            key = (i, int(path[i]))
            joint[key] = joint.get(key, 0.0) + float(mu_a[i]) * float(w_k)
    support = sorted(joint)
    prob = np.array([joint[key] for key in support])
    prob /= prob.sum()

    return ScreeningInstance(
        ProductiveSpec(theta_a, x_grid, u_a, v_a),
        CostlySpec(theta_b, np.arange(k.n_y, dtype=float), 0, u_b, v_b),
        JointDistribution(tuple(support), prob),
    )


def random_negative_instance(seed: int, stream: int = 0) -> ScreeningInstance:
    """Draw an instance whose components are negatively dependent.

    Both components are binary with mass exactly half on each productive
    level, and the instrument-taste conditionals fall as the productive type
    rises, with the high-low corner kept strictly above a quarter. Payoff
    tables are simple linear fillers: consumers of this generator build
    their own payoffs and only need the type geometry and the grids.
    """
    rng = instance_rng(seed, stream)

    theta_a = np.round(np.sort(rng.uniform(0.2, 2.0, 2)), 6)
    while theta_a[1] - theta_a[0] < 0.1:
        theta_a = np.round(np.sort(rng.uniform(0.2, 2.0, 2)), 6)
    b_lo, b_hi = np.round(np.sort(rng.uniform(-1.0, 1.0, 2)), 6)
    while b_hi - b_lo < 0.1:
        b_lo, b_hi = np.round(np.sort(rng.uniform(-1.0, 1.0, 2)), 6)
    theta_b = np.array([[b_lo], [b_hi]])

    n_x = int(rng.integers(2, 4))
    x_grid = np.round(np.concatenate(
        [[0.0], np.cumsum(rng.uniform(0.2, 0.8, n_x - 1))]), 6)
    y_set = np.array([0.0, 1.0])

    # both marginals exactly half-half (0.5 - p is exact for p in [1/4, 1/2],
    # so the medians land precisely); the high-low corner carries 1/4 + delta
    delta = 10.0 ** rng.uniform(-4.0, np.log10(0.2))
    p_hi_lo = 0.25 + delta
    p_lo_lo = 0.5 - p_hi_lo
    cells = {(0, 0): p_lo_lo, (0, 1): p_hi_lo,
             (1, 0): p_hi_lo, (1, 1): p_lo_lo}
    support = tuple(k for k in sorted(cells) if cells[k] > PROB_TOL)
    prob = tuple(cells[k] for k in support)

    u_a = np.outer(x_grid, theta_a)
    v_a = np.zeros_like(u_a)
    u_b = np.outer(y_set, theta_b[:, 0] - b_hi)  # nonpositive, zero baseline
    v_b = np.zeros_like(u_b)
    return ScreeningInstance(
        ProductiveSpec(theta_a, x_grid, u_a, v_a),
        CostlySpec(theta_b, y_set, 0, u_b, v_b),
        JointDistribution(support, prob),
    )

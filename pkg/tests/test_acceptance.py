"""End-to-end acceptance suite.

One test per numbered criterion. Each prints a single [PASS]/[FAIL] line
(visible with pytest -s); tolerances and runtime caps are asserted inline.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from screenkit import (CompetitiveParams, DiscreteDistribution, FEAS_TOL,
                       GeneratorKnobs, AssumptionFailed, Mechanism,
                       agent_payoff, binding_report, bundling_default,
                       certify_bundling, check_dominance, check_ic, check_ir,
                       closed_form_downward_transfers, competitive_separating,
                       converse_construct, default_convergence_family,
                       dominance_by_upper_sets, example1_instance,
                       example2_instance, example3_instance, example3_menu,
                       graph_optimal_transfers, grid_convergence_study,
                       instance_rng, menu_best_response, onedim_ic_violations,
                       path_decomposition, productive_marginal,
                       random_negative_instance, random_onedim_instance,
                       random_positive_instance, shift_mechanism,
                       solve_bundling, solve_downward_1d, solve_full_1d,
                       solve_joint, strassen_coupling, validate_instance,
                       verify_theorem1)
from screenkit.applications import BundleInstance
from screenkit.solver import _batch_transfers
from screenkit.theorems import _line_instance


@contextmanager
def crit(num, label):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {num}: {label}")
        raise
    print(f"[PASS] criterion {num}: {label}")


def best_of(fn, reps=50):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def test_criterion_01_example1_downward_regression():
    with crit(1, "example 1 downward solve, exact menu, gap to full IC"):
        line = productive_marginal(example1_instance())
        res = solve_downward_1d(line)
        assert tuple(res.x_idx) == (1, 0)
        assert abs(res.t[0] - 0.0) == 0 and abs(res.t[1] - (-1.0)) == 0
        assert abs(res.value - 0.125) <= 1e-9
        viols = onedim_ic_violations(line, res.x_idx, res.t, "all")
        assert any(dev == 0 and tgt == 1 for dev, tgt, _ in viols)
        assert abs(solve_full_1d(line).value) <= 1e-9
        assert best_of(lambda: solve_downward_1d(line)) < 1e-3


def test_criterion_02_example2_joint_regression():
    with crit(2, "example 2 joint value >= 1/8, productive-only ~ 0, "
                 "single-crossing flagged"):
        inst = example2_instance()
        t0 = time.perf_counter()
        joint = solve_joint(inst)
        productive = solve_full_1d(productive_marginal(inst))
        report = validate_instance(inst)
        elapsed = time.perf_counter() - t0
        assert joint.value >= 0.125 - 1e-9
        assert any(y != inst.costly.y0_index for y in joint.mechanism.y)
        assert abs(productive.value) <= 1e-9
        assert "surplus_single_crossing" in report.failures
        assert elapsed < 1.0


def test_criterion_03_example3_menu_regression():
    with crit(3, "example 3 menu value 1.5 exactly, item-A-only 1.0 exactly"):
        inst = example3_instance()
        menu = example3_menu()
        _, value = menu_best_response(inst, menu)
        assert value == 1.5
        line = productive_marginal(inst)
        assert solve_full_1d(line).value == 1.0
        assert best_of(lambda: menu_best_response(inst, menu)) < 1e-3
        assert best_of(lambda: solve_full_1d(line)) < 1e-3


_THEOREM_KNOBS = (
    GeneratorKnobs(),
    GeneratorKnobs(n_a=4, n_b=3, n_x=3, n_y=2),
    GeneratorKnobs(n_a=2, n_b=2, n_x=2, n_y=2, strict_costly=False),
    GeneratorKnobs(n_a=4, n_b=3, n_x=2, n_y=2, dim=2),
    GeneratorKnobs(n_a=3, n_b=3, n_x=3, n_y=2, dim=2, strict_costly=False),
)


def test_criterion_04_theorem_suite_positive_instances():
    with crit(4, "200 positively correlated instances: joint == productive, "
                 "strictly costly keeps y at baseline"):
        t0 = time.perf_counter()
        for seed in range(200):
            inst = random_positive_instance(
                seed, _THEOREM_KNOBS[seed % len(_THEOREM_KNOBS)], stream=501)
            rep = verify_theorem1(inst)
            assert rep.applicable, seed
            assert abs(rep.gap) <= 1e-6, (seed, rep.gap)
            if rep.strictly_costly:
                assert rep.y0_almost_surely, seed
            assert rep.passed, seed
        assert time.perf_counter() - t0 < 300.0


def test_criterion_05_transfer_oracle_equivalence():
    with crit(5, "1000 (instance, allocation) pairs: closed-form transfers "
                 "match graph route, binding structure verified"):
        t0 = time.perf_counter()
        for seed in range(1000):
            inst = random_onedim_instance(seed, n=2 + seed % 4,
                                          n_x=2 + seed % 3, stream=502)
            rng = instance_rng(seed, stream=512)
            x_idx = rng.integers(0, inst.n_alloc, inst.n)
            closed = closed_form_downward_transfers(inst, x_idx)
            graph = graph_optimal_transfers(inst, x_idx, "downward")
            assert np.max(np.abs(closed - graph)) <= 1e-9, seed
            assert binding_report(inst, x_idx, closed).passes, seed
        assert time.perf_counter() - t0 < 10.0


def test_criterion_06_downward_sufficiency():
    with crit(6, "500 single-crossing instances: downward optimum monotone "
                 "and equal to full IC"):
        for seed in range(500):
            inst = random_onedim_instance(seed, n=3 + seed % 3,
                                          n_x=2 + seed % 3,
                                          surplus_single_crossing=True,
                                          stream=503)
            down = solve_downward_1d(inst)
            full = solve_full_1d(inst)
            xs = inst.x_grid[list(down.x_idx)]
            assert (np.diff(xs) >= 0).all(), seed
            assert abs(down.value - full.value) <= 1e-9, seed


def _gain_matrix(inst, x_idx, t):
    n = inst.n
    V = np.empty((n, n))
    for a in range(n):
        truthful = inst.u[x_idx[a], a] - t[a]
        for b in range(n):
            V[a, b] = (inst.u[x_idx[b], a] - t[b]) - truthful
    return V


def test_criterion_07_ic_chain_lemmas():
    with crit(7, "local-to-global / global-to-local / local-binding lemmas "
                 "on all triples of 500 downward-feasible mechanisms"):
        log_checked = gol_checked = 0
        for seed in range(500):
            inst = random_onedim_instance(seed, n=3 + seed % 3,
                                          n_x=2 + seed % 3, stream=504)
            rng = instance_rng(seed, stream=514)
            x_idx = rng.integers(0, inst.n_alloc, inst.n)
            t = graph_optimal_transfers(inst, x_idx, "downward")
            V = _gain_matrix(inst, x_idx, t)
            xv = inst.x_grid[list(x_idx)]
            n = inst.n
            for i in range(2, n):
                for j in range(1, i):
                    for k in range(j):
                        # local to global
                        if (V[i, j] <= 1e-9 and V[j, k] <= 1e-9
                                and xv[j] >= xv[k]):
                            assert V[i, k] <= 1e-9, (seed, i, j, k)
                            log_checked += 1
                        # global to local, needs both constraints binding
                        if (abs(V[i, k]) <= 1e-9 and abs(V[j, k]) <= 1e-9
                                and xv[j] <= xv[k]):
                            assert V[i, j] <= 1e-9, (seed, i, j, k)
                            gol_checked += 1
            # monotone allocation with binding local downward constraints
            # satisfies every IC constraint, upward ones included
            xs = np.sort(x_idx)
            ts = closed_form_downward_transfers(inst, xs)
            Vs = _gain_matrix(inst, xs, ts)
            for i in range(1, n):
                assert abs(Vs[i, i - 1]) <= 1e-9, (seed, i)
            assert onedim_ic_violations(inst, xs, ts, "all") == [], seed
        assert log_checked > 0 and gol_checked > 0


def _grid_dist(rng, max_pts=4):
    grid = [(float(a), float(b)) for a in range(3) for b in range(3)]
    k = int(rng.integers(1, max_pts + 1))
    idx = rng.choice(len(grid), size=k, replace=False)
    w = rng.uniform(0.2, 1.0, k)
    pts = np.array([grid[i] for i in idx])
    return DiscreteDistribution(pts, w / w.sum())


def _shift_up(rng, p):
    shift = rng.integers(0, 2, p.points.shape)
    q_pts = np.minimum(p.points + shift, 2.0)
    agg = {}
    for row, w in zip(q_pts, p.prob):
        agg[tuple(row)] = agg.get(tuple(row), 0.0) + float(w)
    items = sorted(agg.items())
    return DiscreteDistribution(np.array([k for k, _ in items]),
                                np.array([w for _, w in items]))


def test_criterion_08_strassen_equivalence():
    with crit(8, "200 grid draws: flow feasibility agrees with upper-set "
                 "dominance; couplings exact and monotone"):
        for seed in range(200):
            rng = instance_rng(seed, stream=505)
            p, q = _grid_dist(rng), _grid_dist(rng)
            assert check_dominance(p, q) == dominance_by_upper_sets(p, q), seed
            q_up = _shift_up(rng, p)
            coupling = strassen_coupling(p, q_up)
            assert np.max(np.abs(coupling.mass.sum(1) - p.prob)) <= 1e-9
            assert np.max(np.abs(coupling.mass.sum(0) - q_up.prob)) <= 1e-9
            for pi, qi in zip(*np.nonzero(coupling.mass > 1e-15)):
                assert (p.points[pi] <= q_up.points[qi] + 1e-12).all()


def test_criterion_09_path_decomposition():
    with crit(9, "200 monotone joints: path mixture reproduces the law, "
                 "every path monotone"):
        for seed in range(200):
            knobs = GeneratorKnobs() if seed % 2 else \
                GeneratorKnobs(n_a=4, n_b=3, dim=2)
            inst = random_positive_instance(seed, knobs, stream=506)
            mixture = path_decomposition(inst)
            joint = mixture.joint()
            want = dict(zip(inst.dist.support, inst.dist.prob))
            assert set(joint) == set(want), seed
            for key, w in joint.items():
                assert abs(w - want[key]) <= 1e-9, (seed, key)
            rows = inst.costly.theta_b
            for path in mixture.paths:
                seq = rows[list(path.b_indices)]
                assert (np.diff(seq, axis=0) >= -1e-12).all(), seed


def test_criterion_10_converse_negative_correlation():
    with crit(10, "100 negatively correlated instances: constructed menu "
                  "beats productive-only by > 1e-6"):
        for seed in range(100):
            inst = random_negative_instance(seed)
            art = converse_construct(inst, coord=0)
            assert art.margin > 1e-6, (seed, art.margin)
            # certify by evaluation on the built instance, not via r/q bounds
            _, evaluated = menu_best_response(art.instance, art.menu)
            assert abs(evaluated - art.menu_value) <= 1e-12, seed
            productive = solve_full_1d(productive_marginal(art.instance)).value
            assert abs(productive - art.productive_value) <= 1e-9, seed


def _draw_competitive(rng):
    for _ in range(400):
        theta_l = rng.uniform(0.4, 0.7)
        theta_h = theta_l + rng.uniform(0.15, 0.6)
        a_l = rng.uniform(0.9, 1.3)
        a_h = rng.uniform(theta_h / 2, a_l)
        b_l = 2 * a_l + rng.uniform(0.05, 2.0)
        b_h = rng.uniform(0.0, 2.0)
        try:
            return CompetitiveParams(theta_l, theta_h, a_l, a_h, b_l, b_h)
        except AssumptionFailed:
            continue
    raise RuntimeError("rejection sampling exhausted")


def test_criterion_11_competitive_separating_sets():
    with crit(11, "50 validated competitive draws: activity level positive, "
                  "high type strictly gains"):
        for seed in range(50):
            params = _draw_competitive(instance_rng(seed, stream=507))
            sep = competitive_separating(params, fine_step=1e-5)
            assert sep.offer_h[1] > 0, seed
            assert sep.gain > 1e-6, (seed, sep.gain)


def _random_bundle(seed):
    rng = instance_rng(seed, stream=501)
    vstar = np.sort(rng.uniform(3.0, 9.0, 2))
    if vstar[1] - vstar[0] < 0.3:
        vstar[1] = vstar[0] + 0.3
    tau_lo = rng.uniform(0.2, 0.7, 2)
    tau_hi = np.minimum(tau_lo + rng.uniform(0.0, 0.25, 2), 0.95)
    values = np.zeros((2, 4))
    values[0, 3], values[1, 3] = vstar
    values[0, 1:3] = tau_lo * vstar[0]
    values[1, 1:3] = tau_hi * vstar[1]
    mu = rng.uniform(0.3, 0.7)
    steps = np.sort(rng.uniform(0.05, 0.8, 4))
    cost = np.concatenate([[0.0], np.cumsum(steps)])
    return BundleInstance(2, values, np.array([mu, 1.0 - mu]),
                          np.linspace(0, 1, 5), cost)


def test_criterion_12_bundling_certificates():
    with crit(12, "certificate-sized bundling: quality menu beats every "
                  "enumerated mechanism; zero cost collapses to one price"):
        for b in [bundling_default()] + [_random_bundle(s) for s in range(8)]:
            cert = certify_bundling(b)
            assert cert.menu_is_optimal
            assert cert.menu_value >= cert.brute_force_value - FEAS_TOL
        zero = bundling_default(zero_cost=True)
        sol = solve_bundling(zero)
        assert len(sol.menu) == 1
        assert sol.menu[0][0] == 1.0
        assert certify_bundling(zero).menu_is_optimal


def test_criterion_13_grid_convergence():
    with crit(13, "default family: refinement gaps nonincreasing over "
                  "{8,16,32,64}, final gap < 1e-2"):
        study = grid_convergence_study(default_convergence_family())
        gaps = study.gaps
        assert all(gaps[i + 1] <= gaps[i] + 1e-12 for i in range(len(gaps) - 1))
        assert gaps[-1] < 1e-2


def _mechanism_on_line(line, rng):
    m = line.n_support
    n_x, n_y = line.productive.n_alloc, line.costly.n_alloc
    options = [(ix, iy) for ix in range(n_x) for iy in range(n_y)]
    U = np.array([[agent_payoff(line, p, (ix, iy, 0.0)) for ix, iy in options]
                  for p in range(m)])
    for _ in range(60):
        x = np.sort(rng.integers(0, n_x, m))
        y = rng.integers(0, n_y, m)
        if n_y > 1 and not (y != line.costly.y0_index).any():
            continue
        alloc = np.array([[options.index((int(xi), int(yi)))
                           for xi, yi in zip(x, y)]])
        D, infeasible = _batch_transfers(U, alloc)
        if infeasible[0]:
            continue
        return Mechanism(tuple(int(i) for i in x), tuple(int(i) for i in y),
                         tuple(float(v) for v in D[0]))
    return None


def test_criterion_14_shift_operations():
    with crit(14, "200 IC+IR path mechanisms: shift keeps truthful payoffs "
                  "and downward IC, weakly improves, strictly when costly"):
        found = 0
        seed = 0
        while found < 200:
            assert seed < 600, "mechanism generator starved"
            knobs = GeneratorKnobs() if seed % 2 else \
                GeneratorKnobs(n_a=4, n_b=3, dim=2)
            inst = random_positive_instance(seed, knobs, stream=601)
            path = path_decomposition(inst).paths[0]
            line = _line_instance(inst, path)
            mech = _mechanism_on_line(line, instance_rng(seed, stream=602))
            seed += 1
            if mech is None:
                continue
            found += 1
            result = shift_mechanism(inst, path, mech)
            shifted = result.mechanism
            for k in range(len(mech)):
                before = agent_payoff(line, k, mech.option(k))
                after = agent_payoff(line, k, shifted.option(k))
                assert abs(after - before) <= 1e-12, (seed, k)
            assert check_ic(line, shifted, "downward") == [], seed
            assert check_ir(line, shifted) == [], seed
            assert result.improvement >= -FEAS_TOL, seed
            uses = any(y != line.costly.y0_index and pr > 0
                       for y, pr in zip(mech.y, line.dist.prob))
            if line.costly.strictly_costly and uses:
                assert result.strictly_improved, seed
                assert result.improvement > 0, seed

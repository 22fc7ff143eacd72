import numpy as np
import pytest

from screenkit import (FEAS_TOL, GeneratorKnobs, InputNotIC, Mechanism,
                       MultiplicativeInstance, MultiplicativeMechanism,
                       PreconditionFailed, agent_payoff, check_ic, check_ir,
                       converse_construct, example2_instance,
                       example2_mechanism, example3_instance,
                       menu_best_response, path_decomposition,
                       random_negative_instance, random_positive_instance,
                       shift_mechanism, shift_multiplicative, solve_full_1d,
                       productive_marginal, verify_theorem1)
from screenkit.solver import _batch_transfers
from screenkit.stochastics import instance_rng
from screenkit.theorems import _line_instance


# ---------------------------------------------------------------------------
# reduction theorem
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(15))
def test_reduction_holds_on_generated_instances(seed):
    report = verify_theorem1(random_positive_instance(seed))
    assert report.applicable
    assert report.passed, (report.gap, report.y0_almost_surely)
    assert abs(report.gap) <= 1e-6


def test_example2_report_is_diagnostic():
    report = verify_theorem1(example2_instance())
    assert not report.applicable
    assert report.assumption_status.failures == ["surplus_single_crossing"]
    assert report.gap == pytest.approx(0.125, abs=1e-9)
    assert not report.passed


@pytest.mark.parametrize("seed", range(8))
def test_strictly_costly_optima_rest_at_baseline(seed):
    knobs = GeneratorKnobs(strict_costly=True)
    report = verify_theorem1(random_positive_instance(seed, knobs))
    assert report.strictly_costly
    assert report.y0_almost_surely


# ---------------------------------------------------------------------------
# additive shift along a path
# ---------------------------------------------------------------------------


def _line_and_path(seed, knobs=None):
    inst = random_positive_instance(seed, knobs or GeneratorKnobs())
    path = path_decomposition(inst).paths[0]
    return inst, path, _line_instance(inst, path)


def _ic_mechanism_on_line(line, rng, want_instrument=True):
    """Random feasible mechanism: monotone x, random y, maximal transfers."""
    m = line.n_support
    n_x, n_y = line.productive.n_alloc, line.costly.n_alloc
    options = [(ix, iy) for ix in range(n_x) for iy in range(n_y)]
    U = np.array([[agent_payoff(line, p, (ix, iy, 0.0)) for ix, iy in options]
                  for p in range(m)])
    for _ in range(60):
        x = np.sort(rng.integers(0, n_x, m))
        y = rng.integers(0, n_y, m)
        if want_instrument and n_y > 1 and not (y != line.costly.y0_index).any():
            continue
        alloc = np.array([[options.index((int(xi), int(yi)))
                           for xi, yi in zip(x, y)]])
        D, infeasible = _batch_transfers(U, alloc)
        if infeasible[0]:
            continue
        return Mechanism(tuple(int(i) for i in x), tuple(int(i) for i in y),
                         tuple(float(v) for v in D[0]))
    return None


def test_example2_shift_frozen_values():
    inst = example2_instance()
    path = path_decomposition(inst).paths[0]
    assert path.b_indices == (0, 1)
    result = shift_mechanism(inst, path, example2_mechanism())
    assert result.mechanism.t == (0.0, -1.0)
    assert result.mechanism.y == (0, 0)
    assert result.shifted_value == pytest.approx(0.125, abs=1e-12)
    assert result.improvement == pytest.approx(0.0, abs=1e-12)
    # the rewrite invites the low type to grab the high bundle (gain 1)
    assert len(result.upward_violations) == 1
    assert result.upward_violations[0].gain == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_shift_preserves_payoffs_and_downward_ic(seed):
    inst, path, line = _line_and_path(seed)
    rng = instance_rng(seed, stream=401)
    mech = _ic_mechanism_on_line(line, rng)
    if mech is None:
        pytest.skip("no feasible instrument-using mechanism drawn")
    result = shift_mechanism(inst, path, mech)
    shifted = result.mechanism
    for k in range(len(mech)):
        before = agent_payoff(line, k, mech.option(k))
        after = agent_payoff(line, k, shifted.option(k))
        assert after == pytest.approx(before, abs=1e-12)
    assert check_ic(line, shifted, "downward") == []
    assert check_ir(line, shifted) == []
    assert result.improvement >= -FEAS_TOL
    uses = any(y != line.costly.y0_index and pr > 0 for y, pr in
               zip(mech.y, line.dist.prob))
    if line.costly.strictly_costly and uses:
        assert result.strictly_improved
        assert result.improvement > 0


def test_shift_rejects_non_ic_input():
    inst = example2_instance()
    path = path_decomposition(inst).paths[0]
    greedy = Mechanism((1, 0), (0, 1), (5.0, -1.0))  # IR fails for the low type
    with pytest.raises(InputNotIC):
        shift_mechanism(inst, path, greedy)


# ---------------------------------------------------------------------------
# multiplicative shift
# ---------------------------------------------------------------------------


def _mult_instance(cost=None):
    return MultiplicativeInstance(
        theta_a=np.array([1.0, 2.0]),
        theta_b=np.array([[-0.5], [-0.25]]),
        mu=np.array([0.5, 0.5]),
        u=lambda x: x,
        c=np.array([[0.0], [1.0]]),
        y0_index=0,
        cost=cost if cost is not None else (lambda x: 0.0))


def test_multiplicative_shift_trades_instrument_for_allocation():
    minst = _mult_instance()
    mech = MultiplicativeMechanism((0.4, 0.8), (0, 1), (0.1, 0.3))
    result = shift_multiplicative(minst, mech)
    shifted = result.mechanism
    assert shifted.y == (0, 0)
    assert shifted.t == mech.t
    assert shifted.x[0] == pytest.approx(0.4, abs=1e-9)
    assert shifted.x[1] == pytest.approx(0.675, abs=1e-9)  # 0.8 - 0.25/2
    assert result.improvement == pytest.approx(0.0, abs=1e-9)


def test_multiplicative_shift_strictly_helps_with_production_costs():
    minst = _mult_instance(cost=lambda x: 0.5 * x)
    mech = MultiplicativeMechanism((0.4, 0.8), (0, 1), (0.1, 0.3))
    result = shift_multiplicative(minst, mech)
    # the high type's allocation shrinks by 1/8, saving cost at rate 1/2
    assert result.improvement == pytest.approx(0.5 * 0.5 * 0.125, abs=1e-9)
    assert result.strictly_improved


def test_multiplicative_shift_requires_monotone_ratios():
    minst = MultiplicativeInstance(
        theta_a=np.array([1.0, 2.0]),
        theta_b=np.array([[-0.1], [-1.9]]),  # ratios fall: -0.1 then -0.95
        mu=np.array([0.5, 0.5]),
        u=lambda x: x,
        c=np.array([[0.0], [1.0]]),
        y0_index=0)
    mech = MultiplicativeMechanism((0.2, 0.9), (0, 0), (0.0, 0.0))
    with pytest.raises(PreconditionFailed):
        shift_multiplicative(minst, mech)


def test_multiplicative_shift_requires_nonnegative_transfers():
    minst = _mult_instance()
    mech = MultiplicativeMechanism((0.4, 0.8), (0, 1), (-0.2, 0.3))
    with pytest.raises(PreconditionFailed):
        shift_multiplicative(minst, mech)


def test_multiplicative_shift_rejects_non_ic_input():
    minst = _mult_instance()
    # the low type would rather take the high bundle
    mech = MultiplicativeMechanism((0.4, 0.8), (0, 0), (0.4, 0.0))
    with pytest.raises(InputNotIC):
        shift_multiplicative(minst, mech)


# ---------------------------------------------------------------------------
# converse construction
# ---------------------------------------------------------------------------


def test_converse_on_anticomonotone_example():
    art = converse_construct(example3_instance())
    assert art.productive_value == pytest.approx(1.0, abs=1e-9)
    assert art.menu_value > 1.0 + 0.4
    assert art.r_val > art.q_val
    assert len(art.menu.options) == 3
    # re-evaluating the menu on the constructed instance reproduces the value
    _, value = menu_best_response(art.instance, art.menu)
    assert value == pytest.approx(art.menu_value, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_converse_certifies_on_negative_instances(seed):
    art = converse_construct(random_negative_instance(seed))
    assert art.margin > 1e-6
    assert art.r_val > art.q_val
    assert art.menu_value >= art.r_val - FEAS_TOL


def test_converse_rejects_positively_correlated_inputs():
    with pytest.raises(PreconditionFailed):
        converse_construct(random_positive_instance(0, GeneratorKnobs(n_a=2)))


def test_converse_needs_a_clean_median():
    inst = random_positive_instance(1, GeneratorKnobs(n_a=3))
    with pytest.raises(PreconditionFailed):
        converse_construct(inst)


def test_converse_productive_value_matches_solver():
    art = converse_construct(example3_instance())
    line = productive_marginal(art.instance)
    assert solve_full_1d(line).value == pytest.approx(
        art.productive_value, abs=1e-9)

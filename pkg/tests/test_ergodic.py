import math

import numpy as np
import pytest

from conftest import (
    make_definite_problem,
    make_drift_control_problem,
    make_noise_control_problem,
)
from ergolq import (
    ClassifyOptions,
    ConfigError,
    CostWeights,
    Diverging,
    LinearSystem,
    NotPositiveDefinite,
    classify,
    default_schedule,
    ergodic_cost,
    shifted_weights,
    solve_positive_definite,
    solve_regularized,
    value_by_regularization,
)


def test_shifted_weights_only_touch_r():
    _, w = make_noise_control_problem()
    ws = shifted_weights(w, 0.25)
    assert ws.R[0, 0] == pytest.approx(w.R[0, 0] + 0.25)
    assert np.array_equal(ws.Q, w.Q)
    assert np.array_equal(ws.S, w.S)
    assert np.array_equal(ws.q, w.q)
    assert np.array_equal(ws.rho, w.rho)


def test_default_schedule_shape():
    sched = default_schedule()
    assert len(sched) == 12
    assert sched[0] == pytest.approx(1e-2)
    for a, b in zip(sched, sched[1:]):
        assert b == pytest.approx(a / 4.0)


def test_solve_positive_definite_scalar():
    system, weights = make_definite_problem()
    strat, value = solve_positive_definite(system, weights)
    root = math.sqrt(2.0) - 1.0
    assert value == pytest.approx(root, abs=1e-12)
    assert strat.Theta[0, 0] == pytest.approx(-root, abs=1e-12)
    assert np.allclose(strat.v, 0.0)
    assert ergodic_cost(system, weights, strat) == pytest.approx(value, abs=1e-10)


def test_solve_positive_definite_with_drift_constant():
    system, weights = make_definite_problem(b=1.0)
    strat, value = solve_positive_definite(system, weights)
    assert value == pytest.approx(math.sqrt(2.0) - 0.5, abs=1e-10)
    assert ergodic_cost(system, weights, strat) == pytest.approx(value, abs=1e-10)


def test_solve_positive_definite_requires_definite_block():
    system, weights = make_drift_control_problem()
    with pytest.raises(NotPositiveDefinite):
        solve_positive_definite(system, weights)


def test_solve_regularized_validates_delta():
    system, weights = make_drift_control_problem()
    with pytest.raises(ConfigError):
        solve_regularized(system, weights, delta=0.0)
    with pytest.raises(ConfigError):
        solve_regularized(system, weights, delta=-1e-3)


def test_solve_regularized_drift_problem():
    system, weights = make_drift_control_problem()
    sol = solve_regularized(system, weights, delta=1e-2)
    assert sol.delta == 1e-2
    assert sol.value == pytest.approx(-1.0, abs=1e-9)
    assert sol.are_residual <= 1e-10 * (1.0 + abs(sol.P[0, 0]))
    # penalized problem is uniformly convex, so the strategy is stationary-checkable
    ws = shifted_weights(weights, 1e-2)
    from ergolq import Strategy

    direct = ergodic_cost(system, ws, Strategy(Theta=sol.Theta, v=sol.v))
    assert direct == pytest.approx(sol.value, abs=1e-8)


def test_schedule_validation():
    system, weights = make_drift_control_problem()
    with pytest.raises(ConfigError):
        value_by_regularization(system, weights, schedule=())
    with pytest.raises(ConfigError):
        value_by_regularization(system, weights, schedule=(1e-2, 1e-2))
    with pytest.raises(ConfigError):
        value_by_regularization(system, weights, schedule=(1e-3, 1e-2))
    with pytest.raises(ConfigError):
        value_by_regularization(system, weights, schedule=(1e-2, -1e-3))


def test_regularization_drift_problem_flat_values():
    system, weights = make_drift_control_problem()
    trace = value_by_regularization(system, weights)
    assert trace.converged
    assert trace.limit_estimate == pytest.approx(-1.0, abs=1e-6)
    # every level already sits at the limiting value
    for e in trace.entries:
        assert e.value == pytest.approx(-1.0, abs=1e-5)
    # the gain escapes like delta^(-1/2): norm doubles each quarter step
    norms = [abs(e.Theta[0, 0]) for e in trace.entries]
    for a, b in zip(norms[-4:], norms[-3:]):
        assert 1.8 <= b / a <= 2.2
    assert trace.strategy_convergent is False


def test_regularization_definite_problem_converges_to_solver_value():
    system, weights = make_definite_problem()
    trace = value_by_regularization(system, weights)
    assert trace.converged
    assert trace.monotone
    assert trace.strategy_convergent is True
    root = math.sqrt(2.0) - 1.0
    assert trace.limit_estimate == pytest.approx(root, abs=1e-8)
    assert trace.extrapolated == pytest.approx(root, abs=1e-6)
    # values decrease toward the unpenalized value from above
    vals = trace.values
    assert all(v >= root - 1e-12 for v in vals)


def test_regularization_divergence_detected_early():
    system, weights = make_drift_control_problem(Q=-3.0)
    with pytest.raises(Diverging) as exc_info:
        value_by_regularization(system, weights)
    trace = exc_info.value.trace
    assert len(trace.entries) == 4
    expected = (-103.0, -403.0, -1603.0, -6403.0)
    for e, want in zip(trace.entries, expected):
        assert e.value == pytest.approx(want, rel=1e-9)
    # the regularized gain stays put; only the offset escapes
    for e in trace.entries:
        assert e.Theta[0, 0] == pytest.approx(-3.0, abs=1e-8)


def test_classify_drift_problem_solvable():
    system, weights = make_drift_control_problem()
    report = classify(system, weights)
    assert report.status == "solvable_with_strategy"
    assert report.value == pytest.approx(-1.0, abs=1e-9)
    assert report.lower_bound == pytest.approx(-1.0, abs=1e-9)
    assert report.strategy is not None
    attained = ergodic_cost(system, weights, report.strategy)
    assert attained == pytest.approx(report.value, abs=1e-8)
    assert report.scalar_verdict is not None


def test_classify_noise_problem_solvable():
    system, weights = make_noise_control_problem()
    report = classify(system, weights)
    assert report.status == "solvable_with_strategy"
    assert report.value == pytest.approx(-7.0 / 4.0, abs=1e-9)
    assert report.solvability is not None and report.solvability.ok
    attained = ergodic_cost(system, weights, report.strategy)
    assert attained == pytest.approx(report.value, abs=1e-8)


def test_classify_definite_problem():
    system, weights = make_definite_problem()
    report = classify(system, weights)
    assert report.status == "solvable_with_strategy"
    assert report.value == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-9)


def test_classify_reports_divergence():
    system, weights = make_drift_control_problem(Q=-3.0)
    report = classify(system, weights)
    assert report.status == "regularization_diverged"
    assert report.value is None
    assert report.trace is not None
    assert len(report.trace.entries) >= 3
    assert report.notes  # divergence is explained, not asserted as a proof


def test_classify_solvable_with_negative_drift_constant():
    system, weights = make_drift_control_problem(Q=-3.0, b=-1.0)
    report = classify(system, weights)
    assert report.status == "solvable_with_strategy"
    assert report.value == pytest.approx(1.0, abs=1e-9)
    attained = ergodic_cost(system, weights, report.strategy)
    assert attained == pytest.approx(1.0, abs=1e-8)


def test_classify_inconclusive_case():
    system, weights = make_drift_control_problem(Q=-4.0)
    report = classify(system, weights)
    assert report.status == "inconclusive"
    assert report.value is None
    assert report.notes


def test_classify_user_candidate_matches_scan(tmp_path):
    system, weights = make_drift_control_problem()
    opts = ClassifyOptions(P0=np.array([[1.0]]), free=np.array([[-3.0]]), scan=False)
    report = classify(system, weights, options=opts)
    assert report.status == "solvable_with_strategy"
    assert report.value == pytest.approx(-1.0, abs=1e-9)


def test_classify_two_state_definite():
    system = LinearSystem(
        A=[[-1.0, 0.5], [0.0, -2.0]],
        B=[[1.0], [0.5]],
        C=([[0.1, 0.0], [0.0, 0.1]],),
        D=([[0.2], [0.0]],),
        b=[1.0, 0.0],
        sigma=([0.5, 0.3],),
    )
    weights = CostWeights(
        Q=[[2.0, 0.2], [0.2, 1.0]], S=[[0.1, 0.0]], R=[[1.0]], q=[0.1, 0.0], rho=[0.0]
    )
    report = classify(system, weights)
    assert report.status == "solvable_with_strategy"
    strat, value = solve_positive_definite(system, weights)
    assert report.value == pytest.approx(value, abs=1e-9)

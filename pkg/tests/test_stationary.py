import numpy as np
import pytest

from conftest import (
    make_definite_problem,
    make_drift_control_problem,
    random_instance,
    random_stabilizer,
)
from ergolq import (
    LinearSystem,
    NotStabilizing,
    StabilizerNotFound,
    Strategy,
    adjoint_offset,
    cost_representation,
    cost_term_matrices,
    ergodic_cost,
    stationary_moments,
)


def test_moments_drift_problem_zero_offset():
    system, _ = make_drift_control_problem()
    mom = stationary_moments(system, Strategy(Theta=[[-3.0]]))
    assert mom.m1[0] == pytest.approx(0.5, abs=1e-14)
    assert mom.m2[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_moments_drift_problem_with_offset():
    system, _ = make_drift_control_problem()
    mom = stationary_moments(system, Strategy(Theta=[[-3.0]], v=[-3.0]))
    assert mom.m1[0] == pytest.approx(-1.0, abs=1e-14)
    assert mom.m2[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_moments_ou_oracle():
    # dX = (-X + 1) dt + dW: stationary N(1, 1/2), so m2 = 1 + 1/2
    system = LinearSystem(
        A=[[-1.0]], B=[[0.0]], C=([[0.0]],), D=([[0.0]],), b=[1.0], sigma=([1.0],)
    )
    mom = stationary_moments(system, Strategy(Theta=[[0.0]]))
    assert mom.m1[0] == pytest.approx(1.0, abs=1e-14)
    assert mom.m2[0, 0] == pytest.approx(1.5, abs=1e-14)


def test_moments_need_stabilizer():
    system, _ = make_drift_control_problem()
    with pytest.raises(NotStabilizing):
        stationary_moments(system, Strategy(Theta=[[-1.0]]))


def test_cost_term_matrices_oracle():
    _, weights = make_drift_control_problem()
    Qg, cg, kg = cost_term_matrices(weights, Strategy(Theta=[[-3.0]], v=[-3.0]))
    assert Qg[0, 0] == pytest.approx(5.0)
    assert cg[0] == pytest.approx(3.0)  # (S + R Theta)^T v = (-1)(-3)
    assert kg == 0.0


def test_ergodic_cost_oracles():
    system, weights = make_drift_control_problem()
    assert ergodic_cost(system, weights, Strategy(Theta=[[-3.0]])) == pytest.approx(5.0)
    assert ergodic_cost(system, weights, Strategy(Theta=[[-3.0]], v=[-3.0])) == pytest.approx(-1.0)


def test_covariance_psd_random():
    rng = np.random.default_rng(314)
    done = 0
    while done < 20:
        system, _ = random_instance(rng)
        try:
            theta = random_stabilizer(system, rng)
        except StabilizerNotFound:
            continue
        strat = Strategy(Theta=theta, v=rng.normal(size=system.m))
        mom = stationary_moments(system, strat)
        cov = mom.m2 - np.outer(mom.m1, mom.m1)
        eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        assert eigs.min() > -1e-9 * (1.0 + eigs.max())
        done += 1


def test_adjoint_offset_solves_its_equation():
    rng = np.random.default_rng(99)
    for _ in range(10):
        system, weights = random_instance(rng, n=3, m=2, d=2)
        theta = rng.normal(size=(2, 3))
        Ph = rng.normal(size=(3, 3))
        P = 0.5 * (Ph + Ph.T)
        try:
            eta = adjoint_offset(system, weights, theta, P)
        except Exception:
            continue  # A + B Theta can be singular for arbitrary gains
        lhs = (system.A + system.B @ theta).T @ eta + P @ system.b
        lhs = lhs + weights.q + theta.T @ weights.rho
        for c, dk, s in zip(system.C, system.D, system.sigma):
            lhs = lhs + (c + dk @ theta).T @ (P @ s)
        assert np.linalg.norm(lhs) < 1e-9 * (1.0 + np.linalg.norm(eta))


def test_representation_matches_cost_scalar_oracle():
    system, weights = make_drift_control_problem()
    strat = Strategy(Theta=[[-3.0]])
    assert cost_representation(system, weights, strat, [[1.0]]) == pytest.approx(5.0)
    # and with the offset strategy, still the ergodic cost
    strat2 = Strategy(Theta=[[-3.0]], v=[-3.0])
    assert cost_representation(system, weights, strat2, [[1.0]]) == pytest.approx(-1.0)


def test_representation_invariant_random():
    # the representation must not depend on the symmetric matrix plugged in
    rng = np.random.default_rng(2718)
    done = 0
    while done < 15:
        system, weights = random_instance(rng)
        try:
            theta = random_stabilizer(system, rng)
        except StabilizerNotFound:
            continue
        strat = Strategy(Theta=theta, v=rng.normal(size=system.m))
        base = ergodic_cost(system, weights, strat)
        for _ in range(4):
            Ph = rng.normal(size=(system.n, system.n))
            rep = cost_representation(system, weights, strat, 0.5 * (Ph + Ph.T))
            assert abs(rep - base) <= 1e-8 * (1.0 + abs(base))
        done += 1


def test_cost_blows_up_toward_stability_boundary():
    # definite weights: cost grows without bound as the margin degenerates
    system, weights = make_definite_problem()
    vals = []
    for theta in (0.5, 0.9, 0.99, 0.999):  # stabilizers are theta < 1 here
        vals.append(ergodic_cost(system, weights, Strategy(Theta=[[theta]])))
    assert vals[0] < vals[1] < vals[2] < vals[3]
    assert vals[-1] > 100.0

"""Shared fixtures: canonical scalar test systems and a random instance factory."""

import numpy as np
import pytest

from ergolq import CostWeights, LinearSystem, Strategy, find_stabilizer


def make_drift_control_problem(Q=-1.0, b=1.0, sigma=1.0):
    """Scalar system with control in the drift only: dX = (X + u + b) dt + (X + sigma) dW."""
    system = LinearSystem(
        A=[[1.0]], B=[[1.0]], C=([[1.0]],), D=([[0.0]],),
        b=[b], sigma=([sigma],),
    )
    weights = CostWeights(Q=[[Q]], S=[[-1.0]], R=[[0.0]])
    return system, weights


def make_noise_control_problem():
    """Scalar system with control in drift and noise, indefinite weights."""
    system = LinearSystem(
        A=[[1.0]], B=[[1.0]], C=([[1.0]],), D=([[1.0]],),
        b=[1.0], sigma=([1.0],),
    )
    weights = CostWeights(Q=[[-1.0]], S=[[-2.5]], R=[[-1.0]])
    return system, weights


def make_definite_problem(b=0.0):
    """Scalar mean-reverting system with positive definite weights."""
    system = LinearSystem(
        A=[[-1.0]], B=[[1.0]], C=([[0.0]],), D=([[0.0]],),
        b=[b], sigma=([1.0],),
    )
    weights = CostWeights(Q=[[1.0]], S=[[0.0]], R=[[1.0]])
    return system, weights


def random_instance(rng, n=None, m=None, d=None, noise_scale=0.3):
    """Draw a random instance that find_stabilizer can handle.

    The open-loop drift is biased toward stability and the state/control noise
    loadings are kept small so mean-square stabilizability holds with room to
    spare.  Weights are indefinite on purpose.
    """
    n = int(rng.integers(1, 5)) if n is None else n
    m = int(rng.integers(1, 4)) if m is None else m
    d = int(rng.integers(1, 3)) if d is None else d
    A = rng.normal(size=(n, n)) - (1.0 + n) * np.eye(n)
    B = rng.normal(size=(n, m))
    C = tuple(noise_scale * rng.normal(size=(n, n)) for _ in range(d))
    D = tuple(noise_scale * rng.normal(size=(n, m)) for _ in range(d))
    b = rng.normal(size=n)
    sigma = tuple(rng.normal(size=n) for _ in range(d))
    system = LinearSystem(A=A, B=B, C=C, D=D, b=b, sigma=sigma)

    Qh = rng.normal(size=(n, n))
    Q = 0.5 * (Qh + Qh.T)
    S = rng.normal(size=(m, n))
    Rh = rng.normal(size=(m, m))
    R = 0.5 * (Rh + Rh.T)
    q = rng.normal(size=n)
    rho = rng.normal(size=m)
    weights = CostWeights(Q=Q, S=S, R=R, q=q, rho=rho)
    return system, weights


def random_stabilizer(system, rng):
    return find_stabilizer(system, seed=int(rng.integers(2**31)))


@pytest.fixture
def drift_problem():
    return make_drift_control_problem()


@pytest.fixture
def noise_problem():
    return make_noise_control_problem()


@pytest.fixture
def definite_problem():
    return make_definite_problem()


@pytest.fixture
def drift_strategy():
    return Strategy(Theta=[[-3.0]], v=[0.0])

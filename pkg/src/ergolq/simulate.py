"""Euler-Maruyama simulation and long-run cost estimators.

Paths are stepped with the explicit Euler scheme; each path owns a
counter-based Philox stream keyed by (seed, path index), so results are
bit-reproducible and independent of evaluation order.  One pass produces
time-average (Cesaro) and exponentially discounted (Abel) cost estimates
plus empirical stationary moments; standard errors are across paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NotStabilizing, NumericalBlowup
from .model import (
    CostWeights,
    LinearSystem,
    Strategy,
    check_compatible,
    closed_loop,
    is_stabilizer,
)
from .stationary import cost_term_matrices

_BLOWUP = 1e12
_CHUNK = 8192
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    The step size additionally has to satisfy
    dt <= 1e-2 * min(1, 1/||A_cl||), checked once the closed loop is known.
    """

    dt: float = 1e-3
    horizon_t: float = 2000.0
    n_paths: int = 64
    burn_in_t: float = 100.0
    seed: int = 20240
    abel_lambda: float = 1e-3

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if not (0.0 <= self.burn_in_t < self.horizon_t):
            raise ConfigError("need 0 <= burn_in_t < horizon_t")
        if self.n_paths < 2:
            raise ConfigError("need at least two paths for standard errors")
        if self.abel_lambda <= 0.0:
            raise ConfigError("abel_lambda must be positive")
        if not (0 <= int(self.seed) <= _SEED_MASK):
            raise ConfigError("seed must fit in 64 bits")


@dataclass(frozen=True)
class PathStats:
    """Cross-path summary of one simulation run."""

    cesaro_mean: float
    cesaro_stderr: float
    abel_mean: float
    abel_stderr: float
    emp_m1: np.ndarray
    emp_m1_stderr: np.ndarray
    emp_m2: np.ndarray
    emp_m2_stderr: np.ndarray
    n_paths: int


def _path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & _SEED_MASK).jumped(index))


def _check_dt(cfg: SimConfig, Acl: np.ndarray) -> None:
    bound = 1e-2 * min(1.0, 1.0 / max(np.linalg.norm(Acl, 2), 1e-300))
    if cfg.dt > bound * (1.0 + 1e-12):
        raise ConfigError(
            f"dt={cfg.dt:g} too large for this closed loop; need dt <= {bound:g}"
        )


def _initial_states(x0, n: int, n_paths: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        x0 = np.full(n, float(x0))
    if x0.shape != (n,):
        raise ConfigError(f"x0 must be scalar or length {n}")
    return np.tile(x0, (n_paths, 1))


def _guard(X: np.ndarray) -> None:
    if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > _BLOWUP:
        raise NumericalBlowup("simulated state exceeded the overflow guard")


def path_stats(
    system: LinearSystem,
    weights: CostWeights,
    strategy: Strategy,
    x0,
    cfg: SimConfig,
) -> PathStats:
    """Simulate the closed loop and estimate all long-run quantities.

    Cesaro averages start after the burn-in; the Abel average discounts
    from time zero.  Left-endpoint Riemann sums match the order of the
    Euler scheme.
    """
    check_compatible(system, weights)
    if not is_stabilizer(system, strategy.Theta):
        raise NotStabilizing("simulation needs a mean-square stabilizing gain")
    cl = closed_loop(system, strategy)
    _check_dt(cfg, cl.A)

    n, d, P = system.n, system.d, cfg.n_paths
    dt = cfg.dt
    steps = int(round(cfg.horizon_t / dt))
    burn = int(round(cfg.burn_in_t / dt))
    lam = cfg.abel_lambda

    Qg, cg, kg = cost_term_matrices(weights, strategy)
    G = np.eye(n) + dt * cl.A.T          # X <- X @ G + dt * drift_const
    dk_drift = dt * cl.drift_const
    CkT = [c.T for c in cl.C]
    sqrt_dt = np.sqrt(dt)

    gens = [_path_rng(cfg.seed, p) for p in range(P)]
    X = _initial_states(x0, n, P)

    ces = np.zeros(P)
    abel = np.zeros(P)
    sx = np.zeros((P, n))
    sxx = np.zeros((P, n, n))
    buf = np.empty((_CHUNK, P, n))
    noise = np.empty((_CHUNK, P, d))

    done = 0
    while done < steps:
        L = min(_CHUNK, steps - done)
        for p in range(P):
            noise[:L, p, :] = gens[p].standard_normal((L, d))
        nz = noise[:L] * sqrt_dt
        for t in range(L):
            buf[t] = X
            Xn = X @ G + dk_drift
            for k in range(d):
                Xn += (X @ CkT[k] + cl.noise_const[k]) * nz[t, :, k, None]
            X = Xn
        _guard(X)

        seg = buf[:L]
        gvals = np.einsum("tpi,ij,tpj->tp", seg, Qg, seg)
        gvals += seg @ (2.0 * cg) + kg
        t_idx = done + np.arange(L)
        abel += (gvals * (np.exp(-lam * t_idx * dt) * dt)[:, None]).sum(axis=0)
        post = t_idx >= burn
        if post.any():
            gp = gvals[post]
            sp = seg[post]
            ces += gp.sum(axis=0) * dt
            sx += sp.sum(axis=0) * dt
            sxx += np.einsum("tpi,tpj->pij", sp, sp) * dt
        done += L

    t_eff = (steps - burn) * dt
    ces_p = ces / t_eff
    abel_p = lam * abel
    m1_p = sx / t_eff
    m2_p = sxx / t_eff
    root = np.sqrt(P)
    return PathStats(
        cesaro_mean=float(ces_p.mean()),
        cesaro_stderr=float(ces_p.std(ddof=1) / root),
        abel_mean=float(abel_p.mean()),
        abel_stderr=float(abel_p.std(ddof=1) / root),
        emp_m1=m1_p.mean(axis=0),
        emp_m1_stderr=m1_p.std(axis=0, ddof=1) / root,
        emp_m2=m2_p.mean(axis=0),
        emp_m2_stderr=m2_p.std(axis=0, ddof=1) / root,
        n_paths=P,
    )


def cesaro_cost(
    system: LinearSystem,
    weights: CostWeights,
    strategy: Strategy,
    x0,
    cfg: SimConfig,
) -> PathStats:
    """Time-average cost estimate (the full statistics object)."""
    return path_stats(system, weights, strategy, x0, cfg)


def abel_cost(
    system: LinearSystem,
    weights: CostWeights,
    strategy: Strategy,
    x0,
    cfg: SimConfig,
) -> float:
    """Discounted long-run cost estimate lambda * int_0^T e^(-lambda t) g dt.

    Requires abel_lambda * horizon_t >= 20 so the truncated tail carries
    weight below 1e-8.
    """
    if cfg.abel_lambda * cfg.horizon_t < 20.0:
        raise ConfigError(
            "horizon too short for the requested discount rate: need "
            "abel_lambda * horizon_t >= 20"
        )
    return path_stats(system, weights, strategy, x0, cfg).abel_mean


def simulate_closed_loop(
    system: LinearSystem,
    strategy: Strategy,
    x0,
    cfg: SimConfig,
    stride: int = 1,
):
    """Generator of (t, states) snapshots every `stride` steps.

    states has shape (n_paths, n); the first snapshot is the initial
    condition at t = 0.  Uses the same per-path streams as path_stats.
    """
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    if not is_stabilizer(system, strategy.Theta):
        raise NotStabilizing("simulation needs a mean-square stabilizing gain")
    cl = closed_loop(system, strategy)
    _check_dt(cfg, cl.A)
    n, d, P = system.n, system.d, cfg.n_paths
    dt = cfg.dt
    steps = int(round(cfg.horizon_t / dt))
    G = np.eye(n) + dt * cl.A.T
    CkT = [c.T for c in cl.C]
    sqrt_dt = np.sqrt(dt)
    gens = [_path_rng(cfg.seed, p) for p in range(P)]
    X = _initial_states(x0, n, P)
    yield 0.0, X.copy()
    done = 0
    while done < steps:
        L = min(_CHUNK, steps - done)
        noise = np.empty((L, P, d))
        for p in range(P):
            noise[:, p, :] = gens[p].standard_normal((L, d))
        noise *= sqrt_dt
        for t in range(L):
            Xn = X @ G + dt * cl.drift_const
            for k in range(d):
                Xn += (X @ CkT[k] + cl.noise_const[k]) * noise[t, :, k, None]
            X = Xn
            step = done + t + 1
            if step % stride == 0 or step == steps:
                _guard(X)
                yield step * dt, X.copy()
        done += L


def trace_rows(
    system: LinearSystem,
    weights: CostWeights,
    strategy: Strategy,
    x0,
    cfg: SimConfig,
    stride: int,
):
    """Generator of (t, state, running average cost) rows for path 0."""
    check_compatible(system, weights)
    if not is_stabilizer(system, strategy.Theta):
        raise NotStabilizing("simulation needs a mean-square stabilizing gain")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    cl = closed_loop(system, strategy)
    _check_dt(cfg, cl.A)
    n, d = system.n, system.d
    dt = cfg.dt
    steps = int(round(cfg.horizon_t / dt))
    Qg, cg, kg = cost_term_matrices(weights, strategy)
    G = np.eye(n) + dt * cl.A.T
    CkT = [c.T for c in cl.C]
    sqrt_dt = np.sqrt(dt)
    rng = _path_rng(cfg.seed, 0)
    x = _initial_states(x0, n, 1)[0]
    acc = 0.0
    yield 0.0, x.copy(), 0.0
    done = 0
    while done < steps:
        L = min(_CHUNK, steps - done)
        noise = rng.standard_normal((L, d)) * sqrt_dt
        for t in range(L):
            acc += (x @ Qg @ x + 2.0 * (cg @ x) + kg) * dt
            xn = x @ G + dt * cl.drift_const
            for k in range(d):
                xn = xn + (x @ CkT[k] + cl.noise_const[k]) * noise[t, k]
            x = xn
            step = done + t + 1
            if step % stride == 0 or step == steps:
                if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _BLOWUP:
                    raise NumericalBlowup("simulated state exceeded the overflow guard")
                yield step * dt, x.copy(), acc / (step * dt)
        done += L


@dataclass(frozen=True)
class PiecewiseControl:
    """Piecewise-constant open-loop control, zero outside its knot span."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or values.ndim != 2 or len(knots) != len(values) + 1:
            raise ConfigError("need K+1 knots for K control values")
        if np.any(np.diff(knots) <= 0.0):
            raise ConfigError("knots must increase")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    def at_times(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.knots, t, side="right") - 1
        out = np.zeros((len(t), self.values.shape[1]))
        mask = (idx >= 0) & (idx < len(self.values)) & (t < self.knots[-1])
        out[mask] = self.values[idx[mask]]
        return out


def random_piecewise_controls(
    m: int,
    count: int,
    seed: int = 0,
    t_max: float = 10.0,
    pieces: int = 8,
    scale: float = 1.0,
) -> list:
    """Sample square-integrable probe controls with compact support."""
    rng = np.random.default_rng(seed)
    knots = np.linspace(0.0, t_max, pieces + 1)
    return [
        PiecewiseControl(knots=knots, values=rng.normal(scale=scale, size=(pieces, m)))
        for _ in range(count)
    ]


@dataclass(frozen=True)
class ProbeResult:
    """Finite-horizon cost estimates of the stabilized homogeneous problem
    under each probe control."""

    costs: np.ndarray
    stderrs: np.ndarray

    @property
    def min_cost(self) -> float:
        return float(self.costs.min())

    @property
    def min_stderr(self) -> float:
        return float(self.stderrs[int(self.costs.argmin())])


def homogeneous_cost_check(
    system: LinearSystem,
    weights: CostWeights,
    Theta: np.ndarray,
    controls,
    cfg: SimConfig,
) -> ProbeResult:
    """Falsification probe for boundedness from below.

    Runs the stabilized homogeneous system (no affine terms, started at
    x = 0) under each open-loop control and integrates the stabilized
    quadratic cost over the horizon.  If the average-cost problem is
    bounded below, every estimate must be nonnegative up to Monte Carlo
    error; a clearly negative estimate falsifies that.
    """
    check_compatible(system, weights)
    Theta = np.asarray(Theta, dtype=float)
    if not is_stabilizer(system, Theta):
        raise NotStabilizing("probe needs a mean-square stabilizing gain")
    Acl = system.A + system.B @ Theta
    _check_dt(cfg, Acl)
    Ccl = [c + dk @ Theta for c, dk in zip(system.C, system.D)]
    Qt = weights.Q + weights.S.T @ Theta + Theta.T @ weights.S + Theta.T @ weights.R @ Theta
    Qt = 0.5 * (Qt + Qt.T)
    St = weights.S + weights.R @ Theta

    n, d, P = system.n, system.d, cfg.n_paths
    dt = cfg.dt
    steps = int(round(cfg.horizon_t / dt))
    G = np.eye(n) + dt * Acl.T
    CkT = [c.T for c in Ccl]
    sqrt_dt = np.sqrt(dt)
    times = np.arange(steps) * dt

    costs = np.zeros(len(controls))
    stderrs = np.zeros(len(controls))
    for ci, ctrl in enumerate(controls):
        v_seq = ctrl.at_times(times)            # (steps, m)
        bv = v_seq @ system.B.T * dt            # drift increments
        dv = [v_seq @ dk.T for dk in system.D]  # noise shifts
        gens = [_path_rng(cfg.seed, ci * P + p) for p in range(P)]
        X = np.zeros((P, n))
        acc = np.zeros(P)
        done = 0
        while done < steps:
            L = min(_CHUNK, steps - done)
            noise = np.empty((L, P, d))
            for p in range(P):
                noise[:, p, :] = gens[p].standard_normal((L, d))
            noise *= sqrt_dt
            for t in range(L):
                i = done + t
                v = v_seq[i]
                acc += (
                    np.einsum("pi,ij,pj->p", X, Qt, X)
                    + 2.0 * (X @ St.T) @ v
                    + float(v @ weights.R @ v)
                ) * dt
                Xn = X @ G + bv[i]
                for k in range(d):
                    Xn += (X @ CkT[k] + dv[k][i]) * noise[t, :, k, None]
                X = Xn
            _guard(X)
            done += L
        costs[ci] = acc.mean()
        stderrs[ci] = acc.std(ddof=1) / np.sqrt(P)
    return ProbeResult(costs=costs, stderrs=stderrs)

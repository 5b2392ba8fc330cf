"""Closed forms for two scalar problem families.

These serve as independent oracles for the matrix machinery and as fast
classification paths for one-dimensional problems.

DriftControlFamily: n = m = d = 1, B = 1, D = 0, R = 0, q = rho = 0.  The
control acts on the drift only and is not penalized, so everything is
driven by the interplay of Q, S and the noise.  Whether the average cost
is bounded below splits into three cases on s1 = S (2A + C^2) versus Q.

NoiseControlFamily: n = m = d = 1, D != 0.  The control enters the noise;
after completing the square in the Riccati quantity the data collapses to
three invariants (alpha, beta, gamma) whose signs classify the problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, ErgolqError, StabilizerNotFound

_REL_TOL = 1e-9


@dataclass(frozen=True)
class Verdict1D:
    """Classification outcome for a scalar family.

    finite / solvable use None for "not decided by the classified cases".
    details carries the raw quantities the decision was keyed on.
    """

    case_label: str
    finite: bool | None
    solvable: bool | None
    value: float | None
    description: str
    details: dict


@dataclass(frozen=True)
class RegularizedClosedForm:
    """Closed-form solution of the control-penalized problem at level delta."""

    delta: float
    P: float
    Theta: float
    eta: float
    v: float
    value: float


@dataclass(frozen=True)
class DriftControlFamily:
    A: float
    C: float
    b: float
    sigma: float
    Q: float
    S: float

    @property
    def gain_boundary(self) -> float:
        """Gains below -(2A + C^2)/2 are exactly the stabilizers."""
        return -(2.0 * self.A + self.C**2) / 2.0

    def is_admissible(self, theta: float) -> bool:
        return 2.0 * (self.A + theta) + self.C**2 < 0.0

    def moments(self, theta: float, v: float) -> tuple[float, float]:
        """Stationary mean and raw second moment of the closed loop."""
        if not self.is_admissible(theta):
            raise ConfigError(f"gain {theta} is not admissible")
        a = self.A + theta
        c = self.b + v
        m1 = -c / a
        m2 = (2.0 * c * (c + self.C * self.sigma) / a - self.sigma**2) / (
            2.0 * a + self.C**2
        )
        return m1, m2

    def cost(self, theta: float, v: float) -> float:
        """Long-run average cost of the strategy (theta, v)."""
        m1, m2 = self.moments(theta, v)
        return (self.Q + 2.0 * self.S * theta) * m2 + 2.0 * self.S * v * m1

    def _s1(self) -> float:
        return self.S * (2.0 * self.A + self.C**2)

    def _s2(self) -> float:
        return self.C * self.S * self.b + (self.Q - 2.0 * self.A * self.S) * self.sigma

    def optimal_v(self, theta: float) -> float:
        """Offset minimizing the average cost at a fixed admissible gain.

        Defined when Q > S (2A + C^2), where the cost is strictly convex
        in v.
        """
        if not self.is_admissible(theta):
            raise ConfigError(f"gain {theta} is not admissible")
        lead = self.Q - self._s1()
        if lead <= 0.0:
            raise ErgolqError("offset minimizer undefined: cost not strictly convex in v")
        w = 2.0 * (self.A + theta) + self.C**2
        inner = self.S * self.b + (self.Q + 2.0 * self.S * theta) * self.C * self.sigma / w
        return -self.b - (w / (2.0 * lead)) * inner

    def optimal_v_shifted(self, theta: float) -> float:
        """b + optimal_v(theta); the minimizer is sometimes quoted in this
        shifted form, kept here for cross-checking."""
        return self.b + self.optimal_v(theta)

    def min_cost(self, theta: float) -> float:
        """Average cost at the optimal offset; independent of the gain."""
        return self.cost(theta, self.optimal_v(theta))

    def cost_infimum(self) -> float:
        """Infimum of the average cost over all admissible strategies, for
        the cases where it is finite."""
        lead = self.Q - self._s1()
        if lead > 0.0:
            num = self.S**2 * (self.b + self.C * self.sigma) ** 2
            return -num / lead - self.S * self.sigma**2
        s2 = self._s2()
        if abs(lead) <= _REL_TOL * (1.0 + abs(self.Q) + abs(self._s1())) and abs(
            s2
        ) <= _REL_TOL * (1.0 + abs(self.C * self.S * self.b) + abs(self.Q * self.sigma)):
            return -self.S * self.sigma**2
        raise ErgolqError("average cost is unbounded below for this data")

    def classify(self) -> Verdict1D:
        s1 = self._s1()
        s2 = self._s2()
        tol1 = _REL_TOL * (1.0 + abs(self.Q) + abs(s1))
        tol2 = _REL_TOL * (
            1.0 + abs(self.C * self.S * self.b) + abs((self.Q - 2 * self.A * self.S) * self.sigma)
        )
        details = {
            "s1": s1,
            "s2": s2,
            "gain_boundary": self.gain_boundary,
            "b_plus_C_sigma": self.b + self.C * self.sigma,
        }
        if self.Q - s1 > tol1:
            if abs(s2) <= tol2:
                return Verdict1D(
                    case_label="I",
                    finite=True,
                    solvable=True,
                    value=self.cost_infimum(),
                    description=(
                        "bounded below and attained: any admissible gain "
                        "paired with its optimal offset is optimal"
                    ),
                    details=details,
                )
            return Verdict1D(
                case_label="I",
                finite=True,
                solvable=False,
                value=self.cost_infimum(),
                description=(
                    "bounded below but the infimum is only approached as the "
                    "gain runs off to -infinity"
                ),
                details=details,
            )
        if abs(self.Q - s1) <= tol1:
            if abs(s2) <= tol2:
                return Verdict1D(
                    case_label="II",
                    finite=True,
                    solvable=True,
                    value=-self.S * self.sigma**2,
                    description="constant average cost: every admissible strategy is optimal",
                    details=details,
                )
            return Verdict1D(
                case_label="II",
                finite=False,
                solvable=False,
                value=None,
                description="unbounded below (offset direction)",
                details=details,
            )
        return Verdict1D(
            case_label="III",
            finite=False,
            solvable=False,
            value=None,
            description="unbounded below (gain direction)",
            details=details,
        )

    def regularized(self, delta: float) -> RegularizedClosedForm:
        """Closed-form solution after adding delta u^2 to the running cost.

        Requires alpha_bar = Q - S (2A + C^2) >= 0; the value converges at
        rate sqrt(delta) when alpha_bar > 0 and the strategy inflates like
        1/sqrt(delta) whenever the unpenalized infimum is not attained.
        """
        if delta <= 0.0:
            raise ConfigError("delta must be positive")
        alpha_bar = self.Q - self._s1()
        if alpha_bar < 0.0:
            raise ErgolqError(
                "regularized closed form needs Q - S(2A + C^2) >= 0"
            )
        beta_bar = (2.0 * self.A + self.C**2) / 2.0
        root = math.sqrt(alpha_bar / delta + beta_bar**2)
        P = -self.S + delta * beta_bar + math.sqrt(delta * alpha_bar + delta**2 * beta_bar**2)
        Theta = -beta_bar - root
        denom = self.A - beta_bar - root
        eta = -P * (self.b + self.C * self.sigma) / denom
        v = -eta / delta
        value = P * self.sigma**2 + 2.0 * self.b * eta - delta * v**2
        return RegularizedClosedForm(delta=delta, P=P, Theta=Theta, eta=eta, v=v, value=value)


@dataclass(frozen=True)
class NoiseControlFamily:
    A: float
    B: float
    C: float
    D: float
    Q: float
    S: float
    R: float
    b: float = 0.0
    sigma: float = 0.0
    q: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.D == 0.0:
            raise ConfigError("this family needs D != 0")

    def invariants(self) -> tuple[float, float, float]:
        """(alpha, beta, gamma): stabilizability margin, effective state
        weight, and squared effective coupling."""
        D2 = self.D**2
        bc = self.B + self.C * self.D
        g0 = self.S - self.R * bc / D2
        alpha = bc**2 / D2 - (2.0 * self.A + self.C**2)
        beta = self.Q - (2.0 * self.A + self.C**2) * self.R / D2 - 2.0 * g0 * bc / D2
        gamma = g0**2
        return alpha, beta, gamma

    def is_admissible(self, theta: float) -> bool:
        alpha, _, _ = self.invariants()
        if alpha <= 0.0:
            return False
        return abs(self.D**2 * theta + self.B + self.C * self.D) < math.sqrt(alpha) * abs(
            self.D
        )

    def boundary_gain(self) -> tuple[float, bool]:
        """Endpoint of the admissible interval toward which the cost of the
        gain direction degenerates.

        Returns (gain, tie) where tie flags the sign convention sgn(0) = +1
        having been exercised.
        """
        alpha, _, _ = self.invariants()
        if alpha <= 0.0:
            raise StabilizerNotFound("no admissible gains: alpha <= 0")
        g0 = self.S - self.R * (self.B + self.C * self.D) / self.D**2
        sign = 1.0 if g0 >= 0.0 else -1.0
        theta = (-(self.B + self.C * self.D) - sign * math.sqrt(alpha) * abs(self.D)) / self.D**2
        return theta, g0 == 0.0

    def classify(self) -> Verdict1D:
        alpha, beta, gamma = self.invariants()
        if alpha <= 0.0:
            raise StabilizerNotFound("no admissible gains: alpha <= 0")
        margin = beta - 2.0 * math.sqrt(alpha * gamma)
        tol = _REL_TOL * (1.0 + abs(beta) + math.sqrt(alpha * gamma))
        details = {"alpha": alpha, "beta": beta, "gamma": gamma, "margin": margin}
        if margin > tol:
            return Verdict1D(
                case_label="I",
                finite=True,
                solvable=True,
                value=None,
                description=(
                    "solvable: the Riccati equation has a solution with "
                    "positive control curvature"
                ),
                details=details,
            )
        if abs(beta) <= tol and math.sqrt(gamma) <= tol:
            eta0, consistent = self._row2_offset()
            details = dict(details, offset=eta0)
            if consistent:
                return Verdict1D(
                    case_label="II",
                    finite=True,
                    solvable=True,
                    value=None,
                    description="solvable via the degenerate-curvature branch",
                    details=details,
                )
            return Verdict1D(
                case_label="II",
                finite=None,
                solvable=None,
                value=None,
                description=(
                    "degenerate-curvature branch without a consistent offset; "
                    "not decided by the classified cases"
                ),
                details=details,
            )
        if math.sqrt(gamma) > tol and abs(margin) <= tol:
            theta_star, tie = self.boundary_gain()
            w = self.q + theta_star * self.rho
            w += (self.b + (self.C + self.D * theta_star) * self.sigma) * (
                math.sqrt(gamma / alpha) - self.R / self.D**2
            )
            closed = self.A + self.B * theta_star
            in_range = abs(closed) > tol or abs(w) <= tol
            details = dict(details, boundary_gain=theta_star, sign_tie=tie, range_vector=w)
            if in_range:
                return Verdict1D(
                    case_label="III",
                    finite=True,
                    solvable=None,
                    value=None,
                    description="bounded below on the margin boundary; attainment not decided",
                    details=details,
                )
        return Verdict1D(
            case_label="outside",
            finite=None,
            solvable=None,
            value=None,
            description="not decided by the classified cases",
            details=details,
        )

    def _row2_offset(self) -> tuple[float | None, bool]:
        """Solve B eta = R sigma / D - rho and A eta = R (b + C sigma)/D^2 - q
        jointly; returns (eta or None, consistency flag)."""
        t1 = self.R * self.sigma / self.D - self.rho
        t2 = self.R * (self.b + self.C * self.sigma) / self.D**2 - self.q
        tol = _REL_TOL * (1.0 + abs(t1) + abs(t2))
        if self.B != 0.0:
            eta = t1 / self.B
            return (eta, abs(self.A * eta - t2) <= tol)
        if self.A != 0.0:
            eta = t2 / self.A
            return (eta, abs(t1) <= tol)
        return (0.0, abs(t1) <= tol and abs(t2) <= tol)

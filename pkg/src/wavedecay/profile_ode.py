"""Profile equation along characteristic rays.

Along the ray x = (t + sigma) omega the profile V(t) obeys

    dV/dt = -(1/2t) F^{c,red}(omega, V),

which becomes autonomous in s = log t.  Integration is classical RK4 with a
uniform step in s, so the output times are geometric in t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .conditions import PreconditionError, WeightMatrix
from .nonlinearity import CubicTensor, Direction, _grad_from_coefficients, reduced_cubic_coefficients

STEPS_PER_DECADE = 256
OVERFLOW = 1e12


class ProfileOverflow(ArithmeticError):
    """The integrated state left the finite range.

    ``t_last`` is the last good time; ``states`` (from ``rk4``) or ``partial``
    (a RayTrajectory, from the integrators) hold the samples up to it.
    """

    def __init__(self, message, t_last, states=None):
        super().__init__(message)
        self.t_last = t_last
        self.states = states
        self.partial = None


@dataclass(frozen=True)
class RayCoordinate:
    sigma: float
    omega: Direction

    @property
    def t_start(self) -> float:
        return max(2.0, -2.0 * self.sigma)

    def point(self, t: float) -> np.ndarray:
        return (t + self.sigma) * self.omega.omega


@dataclass
class RayTrajectory:
    times: np.ndarray
    values: np.ndarray  # (n, N)
    variational: np.ndarray | None = None  # (n, N, N)
    theta: float = 0.0

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def s(self) -> np.ndarray:
        return np.log(self.times)


def n_steps_for(t0: float, t1: float, steps_per_decade: int = STEPS_PER_DECADE) -> int:
    return max(1, math.ceil(steps_per_decade * math.log10(t1 / t0) - 1e-9))


def rk4(f, y0: np.ndarray, s0: float, s1: float, n_steps: int, guard: float = OVERFLOW):
    """Fixed-step RK4 for the autonomous system dy/ds = f(y), from s0 to s1.

    Returns the array of states, shape ``(n_steps + 1,) + y0.shape``.  The step
    may be negative (s1 < s0).
    """
    hs = (s1 - s0) / n_steps
    out = np.empty((n_steps + 1,) + np.shape(y0))
    y = np.array(y0, dtype=float)
    out[0] = y
    for i in range(n_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * hs * k1)
        k3 = f(y + 0.5 * hs * k2)
        k4 = f(y + hs * k3)
        y = y + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > guard:
            raise ProfileOverflow(
                f"state overflow after step {i + 1}", math.exp(s0 + i * hs), out[: i + 1].copy()
            )
        out[i + 1] = y
    return out


def _times(s0, s1, n_steps, t0, t1):
    times = np.exp(np.linspace(s0, s1, n_steps + 1))
    times[0], times[-1] = t0, t1
    return times


def _check_interval(t0, t1, n_steps):
    if t0 < 2:
        raise ValueError(f"t0 must be >= 2, got {t0}")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if n_steps < 1:
        raise ValueError("n_steps must be positive")


def integrate_profile(
    C: CubicTensor, omega: Direction, V0, t0: float, t1: float, n_steps: int | None = None
) -> RayTrajectory:
    """Integrate dV/ds = -F^{c,red}(omega, V)/2 on [log t0, log t1]."""
    if n_steps is None:
        n_steps = n_steps_for(t0, t1)
    _check_interval(t0, t1, n_steps)
    T = reduced_cubic_coefficients(C, omega.theta)

    def rhs(V):
        return -0.5 * np.einsum("jklm,k,l,m->j", T, V, V, V)

    s0, s1 = math.log(t0), math.log(t1)
    times = _times(s0, s1, n_steps, t0, t1)
    try:
        values = rk4(rhs, np.asarray(V0, dtype=float), s0, s1, n_steps)
    except ProfileOverflow as exc:
        k = len(exc.states)
        exc.partial = RayTrajectory(times[:k], exc.states, theta=omega.theta)
        raise
    return RayTrajectory(times, values, theta=omega.theta)


def integrate_variational(
    C: CubicTensor,
    omega: Direction,
    V0,
    W0,
    t0: float,
    t1: float,
    n_steps: int | None = None,
) -> RayTrajectory:
    """Integrate V together with W = dV(t)/dV0, dW/ds = -J(V) W / 2."""
    if n_steps is None:
        n_steps = n_steps_for(t0, t1)
    _check_interval(t0, t1, n_steps)
    V0 = np.asarray(V0, dtype=float)
    n = len(V0)
    W0 = np.asarray(W0, dtype=float).reshape(n, n)
    T = reduced_cubic_coefficients(C, omega.theta)

    def rhs(y):
        V, W = y[:n], y[n:].reshape(n, n)
        dV = -0.5 * np.einsum("jklm,k,l,m->j", T, V, V, V)
        dW = -0.5 * _grad_from_coefficients(T, V) @ W
        return np.concatenate([dV, dW.ravel()])

    s0, s1 = math.log(t0), math.log(t1)
    times = _times(s0, s1, n_steps, t0, t1)
    try:
        y = rk4(rhs, np.concatenate([V0, W0.ravel()]), s0, s1, n_steps)
    except ProfileOverflow as exc:
        k = len(exc.states)
        y = exc.states
        exc.partial = RayTrajectory(times[:k], y[:, :n], y[:, n:].reshape(-1, n, n), theta=omega.theta)
        raise
    return RayTrajectory(times, y[:, :n], y[:, n:].reshape(-1, n, n), theta=omega.theta)


def lyapunov_track(A: WeightMatrix, traj: RayTrajectory) -> np.ndarray:
    """Phi(t) = V(t) . A(omega) V(t) at every sample."""
    M = A(traj.theta)
    if M.shape[0] != traj.values.shape[1]:
        raise ValueError("weight and trajectory dimensions differ")
    return np.einsum("ij,jk,ik->i", traj.values, M, traj.values)


@dataclass(frozen=True)
class MatsBound:
    """Constants of the logarithmic decay bound for dPhi/dt <= -C0|Phi|^p/t + C1/t^q."""

    c0: float
    c1: float
    p: float
    q: float
    t0: float
    phi0: float

    def __post_init__(self):
        if not self.c0 > 0:
            raise PreconditionError("c0 must be positive")
        if self.c1 < 0:
            raise ValueError("c1 must be nonnegative")
        if not (self.p > 1 and self.q > 1):
            raise ValueError("p and q must exceed 1")
        if self.t0 < 2:
            raise ValueError("t0 must be >= 2")

    @property
    def p_star(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def tail_integral(self) -> float:
        """int_2^inf (log tau)^{p*} / tau^q dtau."""
        if self.c1 == 0:
            return 0.0
        ps, q = self.p_star, self.q
        # substitute tau = e^x; the integrand becomes x^{p*} e^{(1-q)x}
        val, _ = integrate.quad(
            lambda x: x**ps * math.exp((1.0 - q) * x),
            math.log(2.0),
            math.inf,
            epsabs=0.0,
            epsrel=1e-10,
            limit=200,
        )
        return val

    @property
    def c2(self) -> float:
        ps = self.p_star
        first = (math.log(self.t0) ** ps * self.phi0 + self.c1 * self.tail_integral) / math.log(2.0)
        return first + (ps / (self.c0 * self.p)) ** (ps - 1.0)

    def __call__(self, t):
        """The bound C2 / (log t)^{p*-1}."""
        return self.c2 / np.log(t) ** (self.p_star - 1.0)


def mats_bound(b: MatsBound):
    """Return (C2, bound function)."""
    return b.c2, b


@dataclass
class MatsReport:
    c2: float
    max_ratio: float
    ratios: np.ndarray
    phi: np.ndarray
    holds: bool

    def to_json(self) -> dict:
        return {"C2": self.c2, "max_ratio": self.max_ratio, "holds": self.holds}


def verify_mats(
    traj: RayTrajectory, A: WeightMatrix, C0: float, q: float = 2.0, tol: float = 1e-9
) -> MatsReport:
    """Compare Phi along a homogeneous trajectory with the logarithmic decay bound (p = 2, C1 = 0)."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    if not C0 > 0:
        raise PreconditionError("C0 must be positive")
    phi = lyapunov_track(A, traj)
    b = MatsBound(C0, 0.0, 2.0, q, float(traj.times[0]), float(phi[0]))
    c2 = b.c2
    ratios = phi * np.log(traj.times) ** (b.p_star - 1.0) / c2
    mx = float(np.max(ratios))
    return MatsReport(c2, mx, ratios, phi, mx <= 1.0 + tol)

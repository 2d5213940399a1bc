"""Ghost-weight bookkeeping and decay reports over solver output.

The ghost weight is e^eta with eta(t, x) = int_{-inf}^{|x|-t} <z>^{-rho} dz.
For a solution of box u = F the weighted energy obeys

    d/dt int e^eta |du|^2 + int e^eta |Zu|^2 <t - |x|>^{-rho} = 2 int e^eta F . d_t u,

with Z_k = (x_k/|x|) d_t + d_k.  ``verify_ghost_identity`` measures how well
the recorded series satisfy it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nonlinearity import SystemSpec
from .wave_solver import FieldState, GhostTable, GridConfig, RunOutput, _free, observe

SERIES_COLUMNS = (
    "t",
    "energy",
    "max_du",
    "weighted_norm",
    "support_radius",
    "ghost_energy",
    "z_flux",
    "source",
)


class GhostWeight(GhostTable):
    """eta as a function of (t, |x|), with its a priori bounds."""

    def eta(self, t, r) -> np.ndarray:
        return self(np.asarray(r, dtype=float) - t)

    def weight(self, t, r) -> np.ndarray:
        return np.exp(self.eta(t, r))

    @property
    def upper_bound(self) -> float:
        """exp(int_R <z>^{-rho} dz)."""
        return math.exp(self.total)

    def check_bounds(self, t: float, r) -> bool:
        """1 <= e^eta <= exp(total) at every given radius (exact comparison)."""
        w = self.weight(t, r)
        return bool(np.all(w >= 1.0) and np.all(w <= self.upper_bound))


def _ghost_terms(state: FieldState, rho: float, config: GridConfig, spec: SystemSpec | None):
    if not rho > 1:
        raise ValueError("rho must exceed 1")
    spec = spec or _free(state.u.shape[0])
    return observe(state, spec, config, ghost=GhostWeight(rho))


def ghost_energy(state: FieldState, rho: float, config: GridConfig, spec: SystemSpec | None = None) -> float:
    """int e^eta |du|^2 at the half level, summed over components."""
    return _ghost_terms(state, rho, config, spec).ghost_energy


def z_flux(state: FieldState, rho: float, config: GridConfig, spec: SystemSpec | None = None) -> float:
    """int e^eta |Zu|^2 <t - |x|>^{-rho}; the node at the origin is skipped."""
    return _ghost_terms(state, rho, config, spec).z_flux


@dataclass
class RunSeries:
    """Observer columns of one run, as recorded in memory or read back from CSV."""

    t: np.ndarray
    energy: np.ndarray
    max_du: np.ndarray
    weighted_norm: np.ndarray
    support_radius: np.ndarray
    ghost_energy: np.ndarray | None = None
    z_flux: np.ndarray | None = None
    source: np.ndarray | None = None
    status: str = "completed"
    blowup_time: float | None = None

    def __post_init__(self):
        n = len(self.t)
        for name in SERIES_COLUMNS[1:]:
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise ValueError(f"series {name!r} has {len(col)} samples, expected {n}")

    @classmethod
    def from_run(cls, run: RunOutput) -> "RunSeries":
        cols = {name: run.series(name) for name in SERIES_COLUMNS}
        for name in ("ghost_energy", "z_flux", "source"):
            if np.all(np.isnan(cols[name])):
                cols[name] = None
        return cls(**cols, status=run.status, blowup_time=run.blowup_time)

    @property
    def has_ghost(self) -> bool:
        return self.ghost_energy is not None and self.z_flux is not None and self.source is not None


def _as_series(run) -> RunSeries:
    return RunSeries.from_run(run) if isinstance(run, RunOutput) else run


@dataclass
class GhostIdentityReport:
    times: np.ndarray
    residual: np.ndarray
    max_residual: float
    source_nonpositive: bool

    def to_json(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "n_samples": int(len(self.times)),
            "source_nonpositive": self.source_nonpositive,
        }


def verify_ghost_identity(run, rho: float = 2.0) -> GhostIdentityReport:
    """Residual dG/dt + zflux - source at interior output samples.

    dG/dt is the centred difference on the output grid.  ``rho`` must match
    the weight the run was observed with; it is only validated here.
    """
    if not rho > 1:
        raise ValueError("rho must exceed 1")
    s = _as_series(run)
    if not s.has_ghost:
        raise ValueError("run carries no ghost-weight series")
    if len(s.t) < 3:
        raise ValueError("need at least 3 aligned samples")
    t, g = s.t, s.ghost_energy
    dg = (g[2:] - g[:-2]) / (t[2:] - t[:-2])
    res = dg + s.z_flux[1:-1] - s.source[1:-1]
    return GhostIdentityReport(
        t[1:-1], res, float(np.max(np.abs(res))), bool(np.all(s.source <= 0.0))
    )


def refinement_factor(coarse: GhostIdentityReport, fine: GhostIdentityReport) -> tuple[float, float]:
    """(factor, order) of the max residual decrease for one halving of h."""
    factor = coarse.max_residual / fine.max_residual
    return factor, math.log2(factor)


def ghost_inequality(run, rho: float = 2.0) -> tuple[bool, np.ndarray, np.ndarray]:
    """Check G(t) + int_0^t zflux <= e^total [G(0) + 2 int_0^t |source|].

    Time integrals use the trapezoid rule on the output grid.
    Returns (holds, lhs, rhs).
    """
    s = _as_series(run)
    if not s.has_ghost:
        raise ValueError("run carries no ghost-weight series")
    bound = GhostWeight(rho).upper_bound

    def cumtrapz(y):
        return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(s.t))])

    lhs = s.ghost_energy + cumtrapz(s.z_flux)
    rhs = bound * (s.ghost_energy[0] + 2.0 * cumtrapz(np.abs(s.source)))
    return bool(np.all(lhs <= rhs)), lhs, rhs


# ----------------------------------------------------------------------------
# decay report

VERDICT_BLOWUP = "blow-up"
VERDICT_CONSERVATIVE = "conservative"
VERDICT_DISSIPATIVE = "dissipative"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass
class DecayReport:
    verdict: str
    eps: float
    delta: float
    mu: float
    t: np.ndarray
    energy: np.ndarray
    max_du: np.ndarray
    r: np.ndarray
    q: np.ndarray
    ghost_residual: np.ndarray | None
    summary: dict = field(default_factory=dict)

    def series(self) -> dict[str, np.ndarray]:
        out = {"energy": self.energy, "max_du": self.max_du, "r": self.r, "q": self.q}
        if self.ghost_residual is not None:
            out["ghost_residual"] = self.ghost_residual
        return out

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "eps": self.eps,
            "delta": self.delta,
            "mu": self.mu,
            **self.summary,
        }


def _value_at(t: np.ndarray, y: np.ndarray, t0: float) -> float:
    return float(np.interp(t0, t, y))


def decay_report(
    run,
    eps: float,
    delta: float = 0.01,
    mu: float = 0.05,
    r_headroom: float = 1.05,
    q_headroom: float = 2.0,
    drift_tol: float = 1e-3,
    step_tol: float = 1e-10,
) -> DecayReport:
    """Assemble r(t) = ||u||_E (1 + eps^2 log(t+2))^{1/4-delta} / eps and
    q(t) = max|du| t^{1/2} (log t)^{1/2} with boundedness verdicts.

    r is bounded when sup_{t>=2} r <= r_headroom * r(2); q likewise with
    q_headroom.  The verdict is ``conservative`` when the relative energy
    drift stays within ``drift_tol``, ``dissipative`` when the energy is
    nonincreasing step to step (within ``step_tol``) and ends lower.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not eps >= 0:
        raise ValueError("eps must be nonnegative")
    s = _as_series(run)
    t = s.t
    with np.errstate(invalid="ignore", divide="ignore"):
        weight = (1.0 + eps**2 * np.log(t + 2.0)) ** (0.25 - delta)
        r = s.energy * weight / eps if eps > 0 else np.full(len(t), np.nan)
        q = np.where(t > 1.0, s.max_du * np.sqrt(t) * np.sqrt(np.log(np.maximum(t, 1.0))), np.nan)
    residual = None
    if s.has_ghost and len(t) >= 3:
        residual = np.concatenate([[np.nan], verify_ghost_identity(s).residual, [np.nan]])

    summary: dict = {"r_headroom": r_headroom, "q_headroom": q_headroom, "status": s.status}
    if s.status == VERDICT_BLOWUP:
        summary["blowup_time"] = s.blowup_time
        return DecayReport(VERDICT_BLOWUP, eps, delta, mu, t, s.energy, s.max_du, r, q, residual, summary)

    e = s.energy
    steps = np.diff(e)
    monotone = bool(np.all(steps <= step_tol))
    drift = float(np.max(np.abs(e - e[0])) / e[0]) if e[0] > 0 else 0.0
    late = t >= 2.0
    summary.update(
        energy_initial=float(e[0]),
        energy_final=float(e[-1]),
        energy_drift=drift,
        energy_monotone=monotone,
        max_energy_step=float(np.max(steps)) if len(steps) else 0.0,
    )
    if np.any(late):
        r2, q2 = _value_at(t, r, 2.0), _value_at(t, q, 2.0)
        r_sup, q_sup = float(np.max(r[late])), float(np.max(q[late]))
        summary.update(
            r_at_2=r2,
            r_sup=r_sup,
            r_bounded=bool(np.isfinite(r_sup) and r_sup <= r_headroom * r2),
            q_at_2=q2,
            q_sup=q_sup,
            q_bounded=bool(np.isfinite(q_sup) and q_sup <= q_headroom * q2),
        )
    if residual is not None:
        summary["ghost_max_residual"] = float(np.nanmax(np.abs(residual)))

    if drift <= drift_tol:
        verdict = VERDICT_CONSERVATIVE
    elif monotone and e[-1] < e[0]:
        verdict = VERDICT_DISSIPATIVE
    else:
        verdict = VERDICT_INCONCLUSIVE
    return DecayReport(verdict, eps, delta, mu, t, s.energy, s.max_du, r, q, residual, summary)

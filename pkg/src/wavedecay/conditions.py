"""Structural conditions on the nonlinearity.

Identity checks (quadratic and cubic null conditions) are exact: the
reduced coefficients are trigonometric polynomials in theta of known degree,
so sampling at 2d+1 equally spaced angles determines them completely.
Inequality checks (the weighted Agemi condition and its strict form) are
grid sweeps over theta and the unit sphere in Y; by homogeneity in Y the
unit sphere is enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Mapping, Sequence

import numpy as np
from scipy import stats
from scipy.stats import qmc

from .nonlinearity import (
    CubicTensor,
    QuadraticTensor,
    SpecError,
    reduced_cubic_coefficients,
    reduced_quadratic_coefficients,
)

HOLDS = "holds"
FAILS = "fails"
HOLDS_STRICTLY = "holds_strictly"
INCONCLUSIVE = "inconclusive"

EXACT = "exact-identity"
GRID = "grid"


@dataclass(frozen=True)
class Tolerances:
    identity: float = 1e-12
    inequality: float = 1e-9
    strict_margin: float = 1e-6
    positive_definite: float = 1e-10

    @classmethod
    def from_json(cls, obj: Mapping | None) -> "Tolerances":
        obj = dict(obj or {})
        unknown = set(obj) - {"identity", "inequality", "strict_margin", "positive_definite"}
        if unknown:
            raise SpecError(f"tolerances: unknown keys {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in obj.items()})


DEFAULT_TOL = Tolerances()


class PreconditionError(ValueError):
    pass


@dataclass
class ConditionReport:
    verdict: str
    margin: float
    method: str
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict == FAILS and self.witness is None:
            raise ValueError("a failing report needs a witness")

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "margin": self.margin,
            "method": self.method,
            "witness": self.witness,
            "details": self.details,
        }


# --------------------------------------------------------------------------
# weight matrices


def _canonical_trig(terms) -> tuple[tuple[int, float, float], ...]:
    merged: dict[int, list[float]] = {}
    for term in terms:
        n, c, s = term
        n = int(n)
        c, s = float(c), float(s)
        if n < 0:
            n, s = -n, -s
        if n == 0:
            s = 0.0
        acc = merged.setdefault(n, [0.0, 0.0])
        acc[0] += c
        acc[1] += s
    return tuple(
        (n, c, s) for n, (c, s) in sorted(merged.items()) if c != 0.0 or s != 0.0
    )


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric N x N matrix A(theta) of finite trigonometric polynomials.

    ``entries[j][k]`` is a tuple of ``(n, cos_coef, sin_coef)`` meaning
    ``sum cos_coef*cos(n theta) + sin_coef*sin(n theta)``.
    """

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(_canonical_trig(e) for e in row) for row in self.entries)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise SpecError("weight: entries must form a square N x N array")
        for j in range(n):
            for k in range(j + 1, n):
                if rows[j][k] != rows[k][j]:
                    raise SpecError(f"weight: not symmetric at ({j + 1}, {k + 1})")
        object.__setattr__(self, "entries", rows)

    @property
    def n_components(self) -> int:
        return len(self.entries)

    @property
    def max_degree(self) -> int:
        return max((t[0] for row in self.entries for e in row for t in e), default=0)

    @classmethod
    def identity(cls, n: int) -> "WeightMatrix":
        return cls.constant(np.eye(n))

    @classmethod
    def constant(cls, matrix) -> "WeightMatrix":
        m = np.asarray(matrix, dtype=float)
        return cls(tuple(tuple(((0, float(v), 0.0),) for v in row) for row in m))

    @classmethod
    def from_json(cls, obj) -> "WeightMatrix":
        if isinstance(obj, Mapping):
            if "identity" in obj:
                return cls.identity(int(obj["identity"]))
            if "constant" in obj:
                return cls.constant(obj["constant"])
            obj = obj.get("entries")
        if obj is None:
            raise SpecError("weight: expected 'entries', 'identity' or 'constant'")
        try:
            return cls(tuple(tuple(tuple(tuple(t) for t in e) for e in row) for row in obj))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"weight: malformed entries ({exc})") from exc

    def to_json(self) -> dict:
        return {
            "entries": [[[list(t) for t in e] for e in row] for row in self.entries]
        }

    def __call__(self, thetas) -> np.ndarray:
        """Evaluate A at angle(s); shape ``thetas.shape + (N, N)``."""
        th = np.asarray(thetas, dtype=float)
        n = self.n_components
        out = np.zeros(th.shape + (n, n))
        for j, row in enumerate(self.entries):
            for k, terms in enumerate(row):
                val = np.zeros(th.shape)
                for deg, c, s in terms:
                    if c:
                        val = val + c * np.cos(deg * th)
                    if s:
                        val = val + s * np.sin(deg * th)
                out[..., j, k] = val
        return out


# --------------------------------------------------------------------------
# grids


def theta_grid(n_theta: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_theta) / n_theta


def unit_sphere_grid(n: int, n_y: int) -> np.ndarray:
    """Deterministic points on the unit sphere of R^n, shape (m, n).

    N=1 uses the two points +-1 (exact by homogeneity), N=2 uses n_y equally
    spaced angles, larger N uses the coordinate axes plus a Halton sequence
    pushed through the normal inverse CDF.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        phi = 2.0 * np.pi * np.arange(n_y) / n_y
        return np.stack([np.cos(phi), np.sin(phi)], axis=1)
    axes = np.concatenate([np.eye(n), -np.eye(n)])
    m = max(n_y - len(axes), 1)
    pts = qmc.Halton(d=n, scramble=False).random(m + 1)[1:]
    pts = stats.norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return np.concatenate([axes, pts])


def _symmetrize(T: np.ndarray, n_sym: int) -> np.ndarray:
    """Average over permutations of the last ``n_sym`` axes."""
    lead = T.ndim - n_sym
    perms = list(permutations(range(lead, T.ndim)))
    acc = np.zeros_like(T)
    for p in perms:
        acc = acc + np.transpose(T, tuple(range(lead)) + p)
    return acc / len(perms)


# --------------------------------------------------------------------------
# null conditions


def _interpolated_coefficients(values: np.ndarray) -> np.ndarray:
    # values sampled at 2d+1 equally spaced angles along axis 0
    return np.fft.rfft(values, axis=0) / values.shape[0]


def check_null_quadratic(B: QuadraticTensor, tol: Tolerances = DEFAULT_TOL) -> ConditionReport:
    n_samples = 5
    thetas = theta_grid(n_samples)
    S = _symmetrize(reduced_quadratic_coefficients(B, thetas), 2)
    coeffs = _interpolated_coefficients(S)
    scale = B.magnitude
    worst = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    details = {"samples": n_samples, "max_fourier_coefficient": worst}
    if scale == 0.0 or worst <= tol.identity * scale:
        return ConditionReport(HOLDS, 0.0, EXACT, details=details)

    # witness: largest |eigenvalue| of S_j(theta_i) over the sample grid
    eigvals, eigvecs = np.linalg.eigh(S)  # (n_theta, N, N), (n_theta, N, N, N)
    mags = np.max(np.abs(eigvals), axis=-1)  # (n_theta, N)
    i, j = np.unravel_index(int(np.argmax(mags)), mags.shape)
    col = int(np.argmax(np.abs(eigvals[i, j])))
    Y = _canonical_sign(eigvecs[i, j][:, col])
    value = np.einsum("jkl,k,l->j", S[i], Y, Y)
    details["witness_value"] = value.tolist()
    return ConditionReport(
        FAILS,
        -float(np.max(np.abs(value))),
        EXACT,
        witness={"theta": float(thetas[i]), "Y": Y.tolist(), "component": int(j) + 1},
        details=details,
    )


def check_null_cubic(
    C: CubicTensor, tol: Tolerances = DEFAULT_TOL, n_y: int = 256
) -> ConditionReport:
    n_samples = 7
    thetas = theta_grid(n_samples)
    S = _symmetrize(reduced_cubic_coefficients(C, thetas), 3)
    coeffs = _interpolated_coefficients(S)
    scale = C.magnitude
    worst = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    details = {"samples": n_samples, "max_fourier_coefficient": worst}
    if scale == 0.0 or worst <= tol.identity * scale:
        return ConditionReport(HOLDS, 0.0, EXACT, details=details)

    Ys = unit_sphere_grid(C.n_components, n_y)
    F = np.einsum("tjklm,yk,yl,ym->tyj", S, Ys, Ys, Ys)
    mags = np.max(np.abs(F), axis=-1)
    i, y = np.unravel_index(int(np.argmax(mags)), mags.shape)
    value = F[i, y]
    details["witness_value"] = value.tolist()
    return ConditionReport(
        FAILS,
        -float(np.max(np.abs(value))),
        EXACT,
        witness={"theta": float(thetas[i]), "Y": Ys[y].tolist()},
        details=details,
    )


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v


# --------------------------------------------------------------------------
# null-form decomposition


@dataclass
class NullFormDecomposition:
    """F^q_j = sum_{k<=l} q0[j,k,l] Q0(u_k,u_l) + sum_{a<b, k<l} qab[j,a,b,k,l] Q_ab(u_k,u_l).

    Indices are 0-based.  ``success`` is False when no such representation
    exists, in which case ``residual`` is the least-squares misfit.
    """

    success: bool
    residual: float
    q0: np.ndarray
    qab: np.ndarray


_MINKOWSKI = np.diag([1.0, -1.0, -1.0])


def _polynomial_form(dense: np.ndarray) -> np.ndarray:
    """Canonical symmetric representative of the bilinear polynomial, [j,k,a,l,b]."""
    T = np.transpose(dense, (0, 1, 3, 2, 4))  # j, k, a, l, b
    return 0.5 * (T + np.transpose(T, (0, 3, 4, 1, 2)))


def decompose_null_forms(B: QuadraticTensor, tol: float = 1e-10) -> NullFormDecomposition:
    n = B.n_components
    columns = []
    labels = []
    for k in range(n):
        for l in range(k, n):
            D = np.zeros((1, n, n, 3, 3))
            D[0, k, l] = _MINKOWSKI
            columns.append(_polynomial_form(D)[0].ravel())
            labels.append(("q0", k, l))
    for a in range(3):
        for b in range(a + 1, 3):
            for k in range(n):
                for l in range(k + 1, n):
                    D = np.zeros((1, n, n, 3, 3))
                    D[0, k, l, a, b] = 1.0
                    D[0, k, l, b, a] = -1.0
                    columns.append(_polynomial_form(D)[0].ravel())
                    labels.append(("qab", a, b, k, l))
    M = np.stack(columns, axis=1)
    target = _polynomial_form(np.asarray(B.dense))
    q0 = np.zeros((n, n, n))
    qab = np.zeros((n, 3, 3, n, n))
    residual = 0.0
    for j in range(n):
        rhs = target[j].ravel()
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        residual = max(residual, float(np.linalg.norm(M @ sol - rhs)))
        for lab, c in zip(labels, sol):
            if lab[0] == "q0":
                q0[j, lab[1], lab[2]] = c
            else:
                qab[(j,) + lab[1:]] = c
    ok = residual <= tol * max(1.0, B.magnitude)
    return NullFormDecomposition(ok, residual, q0, qab)


# --------------------------------------------------------------------------
# weighted Agemi condition


def check_positive_definite(
    A: WeightMatrix, n_theta: int = 512, tol: Tolerances = DEFAULT_TOL
) -> ConditionReport:
    if n_theta < 8:
        raise ValueError("n_theta must be at least 8")
    thetas = theta_grid(n_theta)
    lam = np.linalg.eigvalsh(A(thetas))
    lo, hi = lam[:, 0], lam[:, -1]
    i = int(np.argmin(lo))
    lam_min, lam_max = float(lo[i]), float(np.max(hi))
    holds = lam_min >= tol.positive_definite
    details = {
        "n_theta": n_theta,
        "lambda_min": lam_min,
        "lambda_max": lam_max,
        "M0": max(lam_max, 1.0 / lam_min) if holds else math.inf,
    }
    return ConditionReport(
        HOLDS if holds else FAILS,
        lam_min,
        GRID,
        witness={"theta": float(thetas[i])},
        details=details,
    )


def agemi_form(
    C: CubicTensor, A: WeightMatrix, thetas: np.ndarray, Ys: np.ndarray
) -> np.ndarray:
    """g[t, y] = Y . A(theta) F^{c,red}(theta, Y) on a grid."""
    n = C.n_components
    T = reduced_cubic_coefficients(C, thetas).reshape(len(thetas), n, n**3)
    cube = np.einsum("yk,yl,ym->klmy", Ys, Ys, Ys).reshape(n**3, len(Ys))
    F = T @ cube  # (t, j, y)
    AF = A(thetas) @ F
    return np.einsum("yj,tjy->ty", Ys, AF)


def _sweep(C, A, n_theta, n_y, tol):
    if n_theta < 8:
        raise ValueError("n_theta must be at least 8")
    if n_y < 64:
        raise ValueError("n_y must be at least 64")
    if A.n_components != C.n_components:
        raise ValueError("weight and tensor dimensions differ")
    pd = check_positive_definite(A, n_theta, tol)
    if pd.verdict != HOLDS:
        raise PreconditionError(
            f"weight is not positive definite (min eigenvalue {pd.margin:.3e})"
        )
    thetas = theta_grid(n_theta)
    Ys = unit_sphere_grid(C.n_components, n_y)
    g = agemi_form(C, A, thetas, Ys)
    return thetas, Ys, g, pd


def _grid_min(thetas, Ys, g):
    flat = int(np.argmin(g))  # row-major: smallest theta index, then Y index
    i, y = np.unravel_index(flat, g.shape)
    return float(g[i, y]), {"theta": float(thetas[i]), "Y": Ys[y].tolist()}


def check_agemi(
    C: CubicTensor,
    A: WeightMatrix,
    n_theta: int = 512,
    n_y: int = 512,
    tol: Tolerances = DEFAULT_TOL,
) -> ConditionReport:
    thetas, Ys, g, pd = _sweep(C, A, n_theta, n_y, tol)
    details = {"n_theta": n_theta, "n_y": len(Ys), "M0": pd.details["M0"]}
    if check_null_cubic(C, tol).verdict == HOLDS:
        return ConditionReport(HOLDS, 0.0, EXACT, details=details)
    if not np.all(np.isfinite(g)):
        return ConditionReport(INCONCLUSIVE, math.nan, GRID, details=details)
    gmin, witness = _grid_min(thetas, Ys, g)
    if gmin < -tol.inequality:
        verdict = FAILS
    elif gmin >= tol.strict_margin:
        verdict = HOLDS_STRICTLY
    else:
        verdict = HOLDS
    return ConditionReport(verdict, gmin, GRID, witness=witness, details=details)


def check_strict(
    C: CubicTensor,
    A: WeightMatrix,
    n_theta: int = 512,
    n_y: int = 512,
    tol: Tolerances = DEFAULT_TOL,
) -> ConditionReport:
    thetas, Ys, g, _ = _sweep(C, A, n_theta, n_y, tol)
    gmin, witness = _grid_min(thetas, Ys, g)
    verdict = HOLDS if gmin >= tol.strict_margin else FAILS
    return ConditionReport(
        verdict, gmin, GRID, witness=witness, details={"n_theta": n_theta, "n_y": len(Ys)}
    )


def estimate_C0(
    C: CubicTensor,
    A: WeightMatrix,
    n_theta: int = 512,
    n_y: int = 512,
    tol: Tolerances = DEFAULT_TOL,
) -> float:
    """Largest C0 (on the grid) with Y.A F^{c,red} >= C0 (Y.A Y)^2."""
    thetas, Ys, g, _ = _sweep(C, A, n_theta, n_y, tol)
    if float(np.min(g)) < tol.strict_margin:
        raise PreconditionError("the strict condition does not hold; C0 is undefined")
    quad = np.einsum("yj,tjk,yk->ty", Ys, A(thetas), Ys)
    return float(np.min(g / quad**2))


def check_all(
    system,
    A: WeightMatrix,
    n_theta: int = 512,
    n_y: int = 512,
    tol: Tolerances = DEFAULT_TOL,
) -> dict:
    """Every condition at once, as plain JSON-ready data."""
    out = {
        "null_quadratic": check_null_quadratic(system.quadratic, tol).to_json(),
        "null_cubic": check_null_cubic(system.cubic, tol).to_json(),
        "positive_definite": check_positive_definite(A, n_theta, tol).to_json(),
    }
    dec = decompose_null_forms(system.quadratic)
    out["null_form_decomposition"] = {"success": dec.success, "residual": dec.residual}
    if out["positive_definite"]["verdict"] != HOLDS:
        out["agemi"] = out["strict"] = None
        out["C0"] = None
        return out
    out["agemi"] = check_agemi(system.cubic, A, n_theta, n_y, tol).to_json()
    strict = check_strict(system.cubic, A, n_theta, n_y, tol)
    out["strict"] = strict.to_json()
    out["C0"] = (
        estimate_C0(system.cubic, A, n_theta, n_y, tol) if strict.verdict == HOLDS else None
    )
    return out

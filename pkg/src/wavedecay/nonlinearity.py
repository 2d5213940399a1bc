"""Coefficient tensors of the nonlinearity F(du) = F^q(du) + F^c(du).

Component indices are 1-based (j, k, l, m in 1..N) and derivative indices
are 0-based (a, b, c in 0..2, with 0 the time derivative), both in the
public entry format and in JSON.  Internally every tensor is also held as
a dense 0-based numpy array, which is what all evaluation routines use.

A gradient vector ``p`` is an array of shape ``(3, N)`` with
``p[a, j] = d_a u_j``; trailing grid axes ``(3, N, ...)`` are accepted by
the full (non-reduced) evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

N_DERIV = 3


class SpecError(ValueError):
    """Malformed nonlinearity specification."""


_COMPONENT_KEYS = "jklm"
_DERIV_KEYS = "abc"


class _CoefficientTensor:
    degree: int = 0

    n_components: int
    entries: tuple

    def _canonicalize(self, raw_entries):
        n = self.n_components
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
            raise SpecError(f"n_components must be a positive integer, got {n!r}")
        width = 2 * self.degree + 1
        merged: dict[tuple[int, ...], float] = {}
        for ordinal, entry in enumerate(raw_entries, start=1):
            idx, value = _parse_entry(entry, self.degree, ordinal)
            comps, derivs = idx[: self.degree + 1], idx[self.degree + 1 :]
            if any(not 1 <= c <= n for c in comps):
                raise SpecError(
                    f"entry #{ordinal}: component index out of range 1..{n}: {comps}"
                )
            if any(not 0 <= d < N_DERIV for d in derivs):
                raise SpecError(
                    f"entry #{ordinal}: derivative index out of range 0..2: {derivs}"
                )
            if not math.isfinite(value):
                raise SpecError(f"entry #{ordinal}: non-finite coefficient {value!r}")
            assert len(idx) == width
            merged[idx] = merged.get(idx, 0.0) + value
        return tuple(sorted((k, v) for k, v in merged.items() if v != 0.0))

    @cached_property
    def dense(self) -> np.ndarray:
        """Dense array indexed [j, k, l, (m,) a, b, (c)] with 0-based indices."""
        n = self.n_components
        shape = (n,) * (self.degree + 1) + (N_DERIV,) * self.degree
        out = np.zeros(shape)
        for idx, value in self.entries:
            comps = tuple(c - 1 for c in idx[: self.degree + 1])
            out[comps + idx[self.degree + 1 :]] += value
        out.flags.writeable = False
        return out

    @property
    def magnitude(self) -> float:
        return max((abs(v) for _, v in self.entries), default=0.0)

    def is_zero(self) -> bool:
        return not self.entries

    def to_json(self) -> list[dict]:
        keys = _COMPONENT_KEYS[: self.degree + 1] + _DERIV_KEYS[: self.degree]
        out = []
        for idx, value in self.entries:
            row = dict(zip(keys, idx))
            row["value"] = value
            out.append(row)
        return out


def _parse_entry(entry, degree: int, ordinal: int) -> tuple[tuple[int, ...], float]:
    keys = _COMPONENT_KEYS[: degree + 1] + _DERIV_KEYS[:degree]
    try:
        if isinstance(entry, Mapping):
            idx = tuple(entry[k] for k in keys)
            value = entry["value"]
        elif len(entry) == 2 and isinstance(entry[0], (tuple, list)):
            idx, value = tuple(entry[0]), entry[1]
            if len(idx) != len(keys):
                raise SpecError(
                    f"entry #{ordinal}: expected {len(keys)} indices, got {len(idx)}"
                )
        else:
            *idx, value = entry
            idx = tuple(idx)
            if len(idx) != len(keys):
                raise SpecError(
                    f"entry #{ordinal}: expected {len(keys)} indices, got {len(idx)}"
                )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"entry #{ordinal}: cannot parse {entry!r}") from exc
    if any(isinstance(i, bool) or not isinstance(i, (int, np.integer)) for i in idx):
        raise SpecError(f"entry #{ordinal}: indices must be integers, got {idx}")
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"entry #{ordinal}: bad coefficient {value!r}") from exc
    return tuple(int(i) for i in idx), value


@dataclass(frozen=True, eq=True)
class QuadraticTensor(_CoefficientTensor):
    """Coefficients B_{jkl}^{ab} of F^q_j = sum B (d_a u_k)(d_b u_l).

    Entries are ``((j, k, l, a, b), value)``; duplicates are summed and
    zero coefficients dropped on construction.
    """

    n_components: int
    entries: tuple = field(default=())
    degree = 2

    def __post_init__(self):
        object.__setattr__(self, "entries", self._canonicalize(self.entries))


@dataclass(frozen=True, eq=True)
class CubicTensor(_CoefficientTensor):
    """Coefficients C_{jklm}^{abc} of F^c_j = sum C (d_a u_k)(d_b u_l)(d_c u_m)."""

    n_components: int
    entries: tuple = field(default=())
    degree = 3

    def __post_init__(self):
        object.__setattr__(self, "entries", self._canonicalize(self.entries))


@dataclass(frozen=True)
class SystemSpec:
    """The nonlinearity of the system; the quartic remainder is fixed to zero."""

    n_components: int
    quadratic: QuadraticTensor
    cubic: CubicTensor

    def __post_init__(self):
        for name in ("quadratic", "cubic"):
            t = getattr(self, name)
            if t.n_components != self.n_components:
                raise SpecError(
                    f"{name} tensor has N={t.n_components}, system has N={self.n_components}"
                )

    @classmethod
    def from_json(cls, obj: Mapping) -> "SystemSpec":
        try:
            n = obj["n_components"]
        except (KeyError, TypeError) as exc:
            raise SpecError("system: missing 'n_components'") from exc
        quad = obj.get("quadratic", [])
        cub = obj.get("cubic", [])
        try:
            q = QuadraticTensor(n, tuple(quad))
        except SpecError as exc:
            raise SpecError(f"system.quadratic: {exc}") from None
        try:
            c = CubicTensor(n, tuple(cub))
        except SpecError as exc:
            raise SpecError(f"system.cubic: {exc}") from None
        return cls(n, q, c)

    def to_json(self) -> dict:
        return {
            "n_components": self.n_components,
            "quadratic": self.quadratic.to_json(),
            "cubic": self.cubic.to_json(),
        }

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return eval_quadratic(self.quadratic, p) + eval_cubic(self.cubic, p)


@dataclass(frozen=True)
class Direction:
    """A point omega = (cos theta, sin theta) on the unit circle."""

    theta: float

    @property
    def omega(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def omega_hat(self) -> np.ndarray:
        """Extended vector (-1, omega_1, omega_2)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([-1.0, c, s])


def omega_hat(thetas) -> np.ndarray:
    """Extended vectors for an array of angles, shape ``thetas.shape + (3,)``."""
    thetas = np.asarray(thetas, dtype=float)
    return np.stack([-np.ones_like(thetas), np.cos(thetas), np.sin(thetas)], axis=-1)


def _check_gradient(p: np.ndarray, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[:2] != (N_DERIV, n):
        raise ValueError(f"gradient must have leading shape (3, {n}), got {p.shape}")
    return p


def eval_quadratic(B: QuadraticTensor, p) -> np.ndarray:
    p = _check_gradient(p, B.n_components)
    if B.is_zero():
        return np.zeros(p.shape[1:])
    return np.einsum("jklab,ak...,bl...->j...", B.dense, p, p)


def eval_cubic(C: CubicTensor, p) -> np.ndarray:
    p = _check_gradient(p, C.n_components)
    if C.is_zero():
        return np.zeros(p.shape[1:])
    return np.einsum("jklmabc,ak...,bl...,cm...->j...", C.dense, p, p, p)


def reduced_quadratic_coefficients(B: QuadraticTensor, thetas) -> np.ndarray:
    """sum_ab B_{jkl}^{ab} w_a w_b for each angle; shape ``thetas.shape + (N, N, N)``."""
    w = omega_hat(thetas)
    return np.einsum("jklab,...a,...b->...jkl", B.dense, w, w)


def reduced_cubic_coefficients(C: CubicTensor, thetas) -> np.ndarray:
    """sum_abc C_{jklm}^{abc} w_a w_b w_c; shape ``thetas.shape + (N, N, N, N)``."""
    w = omega_hat(thetas)
    return np.einsum("jklmabc,...a,...b,...c->...jklm", C.dense, w, w, w)


def _direction_theta(omega) -> float:
    return omega.theta if isinstance(omega, Direction) else float(omega)


def eval_reduced_quadratic(B: QuadraticTensor, omega, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    T = reduced_quadratic_coefficients(B, _direction_theta(omega))
    return np.einsum("jkl,k,l->j", T, Y, Y)


def eval_reduced_cubic(C: CubicTensor, omega, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    T = reduced_cubic_coefficients(C, _direction_theta(omega))
    return np.einsum("jklm,k,l,m->j", T, Y, Y, Y)


def grad_reduced_cubic(C: CubicTensor, omega, Y) -> np.ndarray:
    """Jacobian d F^{c,red}_j / d Y_k, by exact differentiation of the contraction."""
    Y = np.asarray(Y, dtype=float)
    T = reduced_cubic_coefficients(C, _direction_theta(omega))
    return _grad_from_coefficients(T, Y)


def _grad_from_coefficients(T: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return (
        np.einsum("jnlm,l,m->jn", T, Y, Y)
        + np.einsum("jknm,k,m->jn", T, Y, Y)
        + np.einsum("jkln,k,l->jn", T, Y, Y)
    )


def gradient_from_reduced(omega, Y: Sequence[float]) -> np.ndarray:
    """The gradient p[a, j] = w_a Y_j that reproduces the reduced nonlinearity."""
    w = Direction(_direction_theta(omega)).omega_hat
    return np.outer(w, np.asarray(Y, dtype=float))


def tensor_from_terms(n: int, terms: Iterable, cubic: bool = False):
    """Build a tensor from ``(indices..., value)`` rows."""
    cls = CubicTensor if cubic else QuadraticTensor
    return cls(n, tuple(terms))

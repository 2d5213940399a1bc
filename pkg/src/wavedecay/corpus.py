"""Builders for the standard example nonlinearities and their weights.

Every builder returns plain objects; ``write_corpus`` serializes them into
the JSON files shipped under ``wavedecay/data``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .conditions import WeightMatrix
from .nonlinearity import CubicTensor, QuadraticTensor, SystemSpec


def system(n, quadratic=(), cubic=()) -> SystemSpec:
    return SystemSpec(n, QuadraticTensor(n, tuple(quadratic)), CubicTensor(n, tuple(cubic)))


def q0_terms(j, k, l, coef=1.0):
    """Rows for coef * Q0(u_k, u_l) in component j."""
    return [(j, k, l, 0, 0, coef), (j, k, l, 1, 1, -coef), (j, k, l, 2, 2, -coef)]


def qab_terms(j, k, l, a, b, coef=1.0):
    """Rows for coef * Q_ab(u_k, u_l) in component j."""
    return [(j, k, l, a, b, coef), (j, k, l, b, a, -coef)]


def cubic_null_terms(j, m, c, k, l, coef=1.0):
    """Rows for coef * (d_c u_m) Q0(u_k, u_l) in component j."""
    return [
        (j, m, k, l, c, 0, 0, coef),
        (j, m, k, l, c, 1, 1, -coef),
        (j, m, k, l, c, 2, 2, -coef),
    ]


def dissipator() -> SystemSpec:
    """N=1, F = -(d_t u)^3."""
    return system(1, cubic=[(1, 1, 1, 1, 0, 0, 0, -1.0)])


def cubic_violator() -> SystemSpec:
    """N=1, F = +(d_t u)^3 (sign-flipped dissipator)."""
    return system(1, cubic=[(1, 1, 1, 1, 0, 0, 0, 1.0)])


def quadratic_violator() -> SystemSpec:
    """N=1, F = (d_t u)^2."""
    return system(1, quadratic=[(1, 1, 1, 0, 0, 1.0)])


def q0_scalar() -> SystemSpec:
    """N=1, F = Q0(u, u)."""
    return system(1, quadratic=q0_terms(1, 1, 1))


def free() -> SystemSpec:
    return system(1)


def null_form_system() -> SystemSpec:
    """N=2 quadratic terms built only from null forms, plus a cubic null term."""
    quad = (
        q0_terms(1, 1, 2, 1.0)
        + qab_terms(1, 2, 1, 0, 1, -0.5)
        + q0_terms(2, 1, 1, 2.0)
        + qab_terms(2, 1, 2, 1, 2, 0.75)
    )
    cub = cubic_null_terms(1, 2, 0, 1, 1, 1.0) + cubic_null_terms(2, 1, 2, 2, 1, -1.5)
    return system(2, quadratic=quad, cubic=cub)


def example_two_component(a: float, b: float) -> SystemSpec:
    """F1 = -a (d_t u1)^3 + b (d_t u1)(d_t u2)^2, F2 = -(d_t u2)^3."""
    return system(
        2,
        cubic=[
            (1, 1, 1, 1, 0, 0, 0, -a),
            (1, 1, 2, 2, 0, 0, 0, b),
            (2, 2, 2, 2, 0, 0, 0, -1.0),
        ],
    )


def example_two_component_weight(a: float, b: float) -> WeightMatrix:
    if a > 0:
        return WeightMatrix.constant([[1.0, 0.0], [0.0, 1.0 + b * b / (2.0 * a)]])
    return WeightMatrix.identity(2)


def example_rotating() -> SystemSpec:
    """Two-component cubic system whose weight depends on omega."""
    h = 0.5
    return system(
        2,
        cubic=[
            # F1 = -(d_t u1)^3 - (d_t u2)^3 - 1/2((d_1 u1)^2 - (d_1 u2)^2)(d_2 u1 - d_2 u2)
            (1, 1, 1, 1, 0, 0, 0, -1.0),
            (1, 2, 2, 2, 0, 0, 0, -1.0),
            (1, 1, 1, 1, 1, 1, 2, -h),
            (1, 1, 1, 2, 1, 1, 2, h),
            (1, 2, 2, 1, 1, 1, 2, h),
            (1, 2, 2, 2, 1, 1, 2, -h),
            # F2 = (d_t u1)^3 - 3 (d_t u1)^2 d_t u2
            #      + 1/2((d_1 u1)(d_2 u1) - (d_1 u2)(d_2 u2))(d_1 u1 - d_1 u2)
            (2, 1, 1, 1, 0, 0, 0, 1.0),
            (2, 1, 1, 2, 0, 0, 0, -3.0),
            (2, 1, 1, 1, 1, 2, 1, h),
            (2, 1, 1, 2, 1, 2, 1, -h),
            (2, 2, 2, 1, 1, 2, 1, -h),
            (2, 2, 2, 2, 1, 2, 1, h),
        ],
    )


def example_rotating_weight() -> WeightMatrix:
    # w1^2 w2 = (sin t + sin 3t) / 4
    diag = ((0, 8.0, 0.0), (1, 0.0, -1.0), (3, 0.0, -1.0))
    off = ((0, 4.0, 0.0), (1, 0.0, -1.0), (3, 0.0, -1.0))
    return WeightMatrix(((diag, off), (off, diag)))


def corpus() -> dict[str, tuple[SystemSpec, WeightMatrix]]:
    """Named (system, weight) pairs covering every standard example."""
    out = {
        "free": (free(), WeightMatrix.identity(1)),
        "dissipator": (dissipator(), WeightMatrix.identity(1)),
        "cubic_violator": (cubic_violator(), WeightMatrix.identity(1)),
        "quadratic_violator": (quadratic_violator(), WeightMatrix.identity(1)),
        "q0_scalar": (q0_scalar(), WeightMatrix.identity(1)),
        "null_forms": (null_form_system(), WeightMatrix.identity(2)),
        "rotating_weight": (example_rotating(), example_rotating_weight()),
    }
    for a, b in [(0.0, 0.0), (0.0, -1.0), (0.0, -3.0), (1.0, -3.0), (1.0, 0.0), (1.0, 3.0)]:
        name = f"two_component_a{a:g}_b{b:g}"
        out[name] = (example_two_component(a, b), example_two_component_weight(a, b))
    return out


def load(name: str) -> tuple[SystemSpec, WeightMatrix]:
    """Load a bundled corpus file by name."""
    text = resources.files("wavedecay.data").joinpath(f"{name}.json").read_text()
    obj = json.loads(text)
    return SystemSpec.from_json(obj["system"]), WeightMatrix.from_json(obj["weight"])


def write_corpus(directory: Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, (spec, weight) in corpus().items():
        path = directory / f"{name}.json"
        obj = {"system": spec.to_json(), "weight": weight.to_json()}
        path.write_text(json.dumps(obj, indent=2) + "\n")
        paths.append(path)
    return paths

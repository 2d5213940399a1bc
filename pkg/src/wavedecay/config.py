"""Experiment configuration: one JSON document per run.

Layout::

    {
      "task": "check" | "profile" | "simulate" | "report",   (optional)
      "seed": 0,
      "system": {...} | {"file": "spec.json"} | {"corpus": "dissipator"},
      "weight": {...} | {"file": ...} | {"corpus": ...},      (default identity)
      "check":    {"n_theta", "n_y", "tolerances"},
      "profile":  {"rays": [{"theta", "sigma", "V0"}], "random_rays", "sigma_range",
                   "v0_max", "t1", "steps_per_decade", "variational", "q"},
      "simulate": {"grid": {...}, "data": {...}, "output_every", "mu", "rho",
                   "rays": [[sigma, theta]], "ray_every", "snapshot_steps", "ghost"},
      "report":   {"inputs": [dir, ...], "eps", "delta", "mu", "rho",
                   "r_headroom", "q_headroom"}
    }

Relative file paths resolve against the directory of the config file.  A
``{"file": ...}`` or ``{"corpus": ...}`` source may also hold both the system
and the weight (as the bundled corpus files do).  Serializing inlines every
source, so parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

from . import corpus
from .conditions import Tolerances, WeightMatrix
from .io_formats import InputError
from .nonlinearity import SpecError, SystemSpec
from .wave_solver import ConfigError, GridConfig, InitialData

TASKS = ("check", "profile", "simulate", "report")


def _keys(obj, path: str, allowed: set[str]) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return dict(obj)


def _num(obj: dict, key: str, path: str, default, kind=float, lo=None, hi=None):
    if key not in obj:
        return default
    try:
        val = kind(obj[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}") from None
    if kind is float and not math.isfinite(val):
        raise ConfigError(f"{path}.{key}: must be finite")
    if (lo is not None and val < lo) or (hi is not None and val > hi):
        raise ConfigError(f"{path}.{key}: {val} outside [{lo}, {hi}]")
    return val


def _bool(obj: dict, key: str, path: str, default: bool) -> bool:
    if key not in obj:
        return default
    if not isinstance(obj[key], bool):
        raise ConfigError(f"{path}.{key}: expected true or false")
    return obj[key]


@dataclass(frozen=True)
class CheckParams:
    n_theta: int = 512
    n_y: int = 512
    tolerances: Tolerances = Tolerances()

    @classmethod
    def from_json(cls, obj) -> "CheckParams":
        obj = _keys(obj, "check", {"n_theta", "n_y", "tolerances"})
        try:
            tol = Tolerances.from_json(obj.get("tolerances"))
        except (SpecError, TypeError, ValueError) as exc:
            raise ConfigError(f"check.{exc}") from None
        return cls(
            _num(obj, "n_theta", "check", 512, int, lo=8),
            _num(obj, "n_y", "check", 512, int, lo=64),
            tol,
        )

    def to_json(self) -> dict:
        return {"n_theta": self.n_theta, "n_y": self.n_y, "tolerances": asdict(self.tolerances)}


@dataclass(frozen=True)
class RaySpec:
    theta: float
    sigma: float
    V0: tuple

    def to_json(self) -> dict:
        return {"theta": self.theta, "sigma": self.sigma, "V0": list(self.V0)}


@dataclass(frozen=True)
class ProfileParams:
    rays: tuple = ()
    random_rays: int = 0
    sigma_range: tuple = (-5.0, 1.0)
    v0_max: float = 1.0
    t1: float = 1e6
    steps_per_decade: int = 256
    variational: bool = False
    q: float = 2.0

    @classmethod
    def from_json(cls, obj, n: int) -> "ProfileParams":
        path = "profile"
        obj = _keys(
            obj,
            path,
            {"rays", "random_rays", "sigma_range", "v0_max", "t1", "steps_per_decade", "variational", "q"},
        )
        rays = []
        for i, r in enumerate(obj.get("rays", [])):
            rp = f"{path}.rays[{i}]"
            r = _keys(r, rp, {"theta", "sigma", "V0"})
            V0 = r.get("V0")
            if not isinstance(V0, list) or len(V0) != n:
                raise ConfigError(f"{rp}.V0: expected a list of {n} numbers")
            try:
                V0 = tuple(float(v) for v in V0)
            except (TypeError, ValueError):
                raise ConfigError(f"{rp}.V0: expected numbers") from None
            rays.append(RaySpec(_num(r, "theta", rp, 0.0), _num(r, "sigma", rp, 0.0), V0))
        sr = obj.get("sigma_range", [-5.0, 1.0])
        if not (isinstance(sr, list) and len(sr) == 2 and sr[0] <= sr[1]):
            raise ConfigError(f"{path}.sigma_range: expected [lo, hi] with lo <= hi")
        return cls(
            tuple(rays),
            _num(obj, "random_rays", path, 0, int, lo=0),
            (float(sr[0]), float(sr[1])),
            _num(obj, "v0_max", path, 1.0, lo=0.0),
            _num(obj, "t1", path, 1e6, lo=2.0),
            _num(obj, "steps_per_decade", path, 256, int, lo=1),
            _bool(obj, "variational", path, False),
            _num(obj, "q", path, 2.0),
        )

    def to_json(self) -> dict:
        return {
            "rays": [r.to_json() for r in self.rays],
            "random_rays": self.random_rays,
            "sigma_range": list(self.sigma_range),
            "v0_max": self.v0_max,
            "t1": self.t1,
            "steps_per_decade": self.steps_per_decade,
            "variational": self.variational,
            "q": self.q,
        }


@dataclass(frozen=True)
class SimulateParams:
    grid: GridConfig
    data: InitialData
    output_every: int = 1
    mu: float = 0.05
    rho: float = 2.0
    rays: tuple = ()
    ray_every: int = 1
    snapshot_steps: tuple = ()
    ghost: bool = True

    @classmethod
    def from_json(cls, obj, n: int) -> "SimulateParams":
        path = "simulate"
        obj = _keys(
            obj,
            path,
            {"grid", "data", "output_every", "mu", "rho", "rays", "ray_every", "snapshot_steps", "ghost"},
        )
        if "grid" not in obj:
            raise ConfigError(f"{path}.grid: missing")
        try:
            data = InitialData.from_json(_keys(obj.get("data", {}), f"{path}.data", set(InitialData.__dataclass_fields__)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{exc}" if isinstance(exc, SpecError) else f"{path}.data: {exc}") from None
        if data.kind == "samples":
            raise ConfigError(f"{path}.data.kind: sampled data cannot come from JSON")
        if len(data.f_scale) != n or len(data.g_scale) != n:
            if "f_scale" not in obj.get("data", {}) and "g_scale" not in obj.get("data", {}):
                data = InitialData(**{**data.to_json(), "f_scale": (1.0,) * n, "g_scale": (0.0,) * n})
            else:
                raise ConfigError(f"{path}.data: f_scale and g_scale need {n} entries")
        g = dict(_keys(obj["grid"], f"{path}.grid", set(GridConfig.__dataclass_fields__) | {"dt_ratio", "radius"}))
        if "half_width" not in g and "radius" not in g:
            g["radius"] = data.radius
        try:
            grid = GridConfig.from_json(g)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{exc}") from None
        try:
            grid.validate(data.radius)
        except ConfigError as exc:
            raise ConfigError(f"{path}.grid: {exc}") from None
        rays = []
        for i, r in enumerate(obj.get("rays", [])):
            if not (isinstance(r, list) and len(r) == 2):
                raise ConfigError(f"{path}.rays[{i}]: expected [sigma, theta]")
            rays.append((float(r[0]), float(r[1])))
        snaps = obj.get("snapshot_steps", [])
        if not (isinstance(snaps, list) and all(isinstance(s, int) and s >= 0 for s in snaps)):
            raise ConfigError(f"{path}.snapshot_steps: expected nonnegative integers")
        return cls(
            grid,
            data,
            _num(obj, "output_every", path, 1, int, lo=1),
            _num(obj, "mu", path, 0.05, lo=0.0, hi=0.1),
            _num(obj, "rho", path, 2.0, lo=1.0),
            tuple(rays),
            _num(obj, "ray_every", path, 1, int, lo=1),
            tuple(snaps),
            _bool(obj, "ghost", path, True),
        )

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "data": self.data.to_json(),
            "output_every": self.output_every,
            "mu": self.mu,
            "rho": self.rho,
            "rays": [list(r) for r in self.rays],
            "ray_every": self.ray_every,
            "snapshot_steps": list(self.snapshot_steps),
            "ghost": self.ghost,
        }


@dataclass(frozen=True)
class ReportParams:
    inputs: tuple = ()
    eps: float | None = None
    delta: float = 0.01
    mu: float = 0.05
    rho: float = 2.0
    r_headroom: float = 1.05
    q_headroom: float = 2.0

    @classmethod
    def from_json(cls, obj, base: Path) -> "ReportParams":
        path = "report"
        obj = _keys(obj, path, {"inputs", "eps", "delta", "mu", "rho", "r_headroom", "q_headroom"})
        inputs = obj.get("inputs", [])
        if isinstance(inputs, str):
            inputs = [inputs]
        if not (isinstance(inputs, list) and all(isinstance(p, str) for p in inputs)):
            raise ConfigError(f"{path}.inputs: expected a list of directories")
        eps = obj.get("eps")
        return cls(
            tuple(str((base / p).resolve()) if not Path(p).is_absolute() else p for p in inputs),
            None if eps is None else _num(obj, "eps", path, None),
            _num(obj, "delta", path, 0.01),
            _num(obj, "mu", path, 0.05),
            _num(obj, "rho", path, 2.0),
            _num(obj, "r_headroom", path, 1.05),
            _num(obj, "q_headroom", path, 2.0),
        )

    def to_json(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "eps": self.eps,
            "delta": self.delta,
            "mu": self.mu,
            "rho": self.rho,
            "r_headroom": self.r_headroom,
            "q_headroom": self.q_headroom,
        }


def _source(obj, path: str, base: Path, key: str):
    """Resolve an inline / file / corpus source into its JSON document."""
    if isinstance(obj, Mapping) and set(obj) == {"file"}:
        p = Path(obj["file"])
        p = p if p.is_absolute() else base / p
        if not p.is_file():
            raise InputError(f"{path}.file: {p} does not exist")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}.file: malformed JSON in {p} ({exc})") from None
        return doc.get(key, doc) if isinstance(doc, Mapping) else doc
    if isinstance(obj, Mapping) and set(obj) == {"corpus"}:
        name = obj["corpus"]
        table = corpus.corpus()
        if name not in table:
            raise ConfigError(f"{path}.corpus: unknown entry {name!r}")
        spec, weight = table[name]
        return spec.to_json() if key == "system" else weight.to_json()
    return obj


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemSpec
    weight: WeightMatrix
    task: str | None = None
    seed: int = 0
    check: CheckParams = CheckParams()
    profile: ProfileParams = ProfileParams()
    simulate: SimulateParams | None = None
    report: ReportParams = ReportParams()

    @classmethod
    def from_json(cls, obj, base: Path | str = ".") -> "ExperimentConfig":
        base = Path(base)
        obj = _keys(
            obj, "config", {"task", "seed", "system", "weight", "check", "profile", "simulate", "report"}
        )
        task = obj.get("task")
        if task is not None and task not in TASKS:
            raise ConfigError(f"config.task: expected one of {TASKS}, got {task!r}")
        if "system" not in obj:
            if task == "report":
                obj["system"] = {"n_components": 1}
            else:
                raise ConfigError("config.system: missing")
        try:
            system = SystemSpec.from_json(_source(obj["system"], "system", base, "system"))
        except SpecError as exc:
            raise ConfigError(str(exc) if str(exc).startswith("system") else f"system: {exc}") from None
        n = system.n_components
        if "weight" in obj:
            try:
                weight = WeightMatrix.from_json(_source(obj["weight"], "weight", base, "weight"))
            except SpecError as exc:
                raise ConfigError(str(exc) if str(exc).startswith("weight") else f"weight: {exc}") from None
            if weight.n_components != n:
                raise ConfigError(f"weight: {weight.n_components} components, system has {n}")
        else:
            weight = WeightMatrix.identity(n)
        sim = obj.get("simulate")
        return cls(
            system,
            weight,
            task,
            _num(obj, "seed", "config", 0, int),
            CheckParams.from_json(obj.get("check")),
            ProfileParams.from_json(obj.get("profile"), n),
            None if sim is None else SimulateParams.from_json(sim, n),
            ReportParams.from_json(obj.get("report"), base),
        )

    @classmethod
    def load(cls, path: Path | str) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file {path} does not exist")
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_json(obj, path.parent)

    def to_json(self) -> dict:
        out = {
            "task": self.task,
            "seed": self.seed,
            "system": self.system.to_json(),
            "weight": self.weight.to_json(),
            "check": self.check.to_json(),
            "profile": self.profile.to_json(),
            "report": self.report.to_json(),
        }
        if self.simulate is not None:
            out["simulate"] = self.simulate.to_json()
        if self.task is None:
            del out["task"]
        return out

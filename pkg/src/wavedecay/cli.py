"""Command-line front end.

    wavedecay check|profile|simulate|report --config FILE --out DIR [--seed N]

Exit codes: 0 completed (blow-up included), 2 configuration error,
3 missing or misaligned input files.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import conditions as cond
from .config import ExperimentConfig
from .diagnostics import (
    RunSeries,
    decay_report,
    ghost_inequality,
    verify_ghost_identity,
)
from .io_formats import InputError, read_csv, read_json, write_columns, write_csv, write_json, write_snapshot
from .nonlinearity import Direction, SpecError
from .profile_ode import (
    MatsBound,
    ProfileOverflow,
    integrate_profile,
    integrate_variational,
    lyapunov_track,
    n_steps_for,
)
from .wave_solver import ConfigError, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3

OBSERVABLE_COLUMNS = ("t", "energy", "max_du", "weighted_norm", "support_radius")
GHOST_COLUMNS = ("t", "ghost_energy", "z_flux", "source")


def cmd_check(cfg: ExperimentConfig, out: Path) -> int:
    p = cfg.check
    report = cond.check_all(cfg.system, cfg.weight, p.n_theta, p.n_y, p.tolerances)
    report["n_components"] = cfg.system.n_components
    write_json(out / "check.json", report)
    return EXIT_OK


def _strict_constants(cfg: ExperimentConfig):
    """(strict verdict, C0 or None) for the configured weight."""
    p = cfg.check
    pd = cond.check_positive_definite(cfg.weight, p.n_theta, p.tolerances)
    if pd.verdict != cond.HOLDS:
        return None, None
    strict = cond.check_strict(cfg.system.cubic, cfg.weight, p.n_theta, p.n_y, p.tolerances)
    if strict.verdict != cond.HOLDS:
        return strict.verdict, None
    return strict.verdict, cond.estimate_C0(cfg.system.cubic, cfg.weight, p.n_theta, p.n_y, p.tolerances)


def _random_rays(cfg: ExperimentConfig):
    p, n = cfg.profile, cfg.system.n_components
    rng = np.random.default_rng(cfg.seed)
    rays = []
    for _ in range(p.random_rays):
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
        sigma = float(rng.uniform(*p.sigma_range))
        v = rng.standard_normal(n)
        v *= p.v0_max * rng.uniform() ** (1.0 / n) / np.linalg.norm(v)
        rays.append((theta, sigma, tuple(float(x) for x in v)))
    return rays


def cmd_profile(cfg: ExperimentConfig, out: Path) -> int:
    p, n = cfg.profile, cfg.system.n_components
    strict, C0 = _strict_constants(cfg)
    rays = [(r.theta, r.sigma, r.V0) for r in p.rays] + _random_rays(cfg)
    summary = {"seed": cfg.seed, "strict": strict, "C0": C0, "rays": []}
    for i, (theta, sigma, V0) in enumerate(rays):
        t0 = max(2.0, -2.0 * sigma)
        entry = {"index": i, "theta": theta, "sigma": sigma, "V0": list(V0), "t0": t0, "t1": p.t1}
        summary["rays"].append(entry)
        if not p.t1 > t0:
            entry.update(status="skipped", reason="t1 <= t0")
            continue
        omega = Direction(theta)
        n_steps = n_steps_for(t0, p.t1, p.steps_per_decade)
        try:
            if p.variational:
                traj = integrate_variational(cfg.system.cubic, omega, V0, np.eye(n), t0, p.t1, n_steps)
            else:
                traj = integrate_profile(cfg.system.cubic, omega, V0, t0, p.t1, n_steps)
            entry["status"] = "completed"
        except ProfileOverflow as exc:
            entry.update(status="overflow", t_last=exc.t_last)
            traj = exc.partial
        phi = lyapunov_track(cfg.weight, traj)
        if C0 is not None:
            b = MatsBound(C0, 0.0, 2.0, p.q, t0, float(phi[0]))
            with np.errstate(divide="ignore"):
                bound = b(traj.times)
            ratio = phi * np.log(traj.times) / b.c2
            entry["mats"] = {"C2": b.c2, "max_ratio": float(np.max(ratio)), "holds": bool(np.max(ratio) <= 1 + 1e-9)}
        else:
            bound = np.full(len(traj.times), np.nan)
            entry["mats"] = None
        entry["phi_nonincreasing"] = bool(np.all(np.diff(phi) <= 1e-9))
        cols = {"t": traj.times, "s": traj.s}
        for j in range(n):
            cols[f"V_{j + 1}"] = traj.values[:, j]
        if traj.variational is not None:
            for j in range(n):
                for k in range(n):
                    cols[f"W_{j + 1}{k + 1}"] = traj.variational[:, j, k]
        cols["Phi"] = phi
        cols["bound"] = bound
        name = f"ray_{i:03d}.csv"
        write_columns(out / name, cols)
        entry.update(file=name, n_samples=len(traj.times))
    write_json(out / "profile_summary.json", summary)
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    p = cfg.simulate
    if p is None:
        raise ConfigError("simulate: missing block")
    res = run(
        cfg.system,
        p.grid,
        p.data,
        output_every=p.output_every,
        mu=p.mu,
        rho=p.rho,
        rays=p.rays,
        ray_every=p.ray_every,
        snapshot_steps=p.snapshot_steps,
        ghost=p.ghost,
    )
    obs = res.observations
    write_csv(out / "observables.csv", OBSERVABLE_COLUMNS, [[getattr(o, c) for c in OBSERVABLE_COLUMNS] for o in obs])
    if p.ghost:
        write_csv(out / "ghost.csv", GHOST_COLUMNS, [[getattr(o, c) for c in GHOST_COLUMNS] for o in obs])
    n = cfg.system.n_components
    ray_files = []
    for i, ((sigma, theta), (ts, vs)) in enumerate(res.rays.items()):
        name = f"ray_{i:03d}.csv"
        cols = {"t": ts, **{f"U_{j + 1}": vs[:, j] for j in range(n)}}
        write_columns(out / name, cols)
        ray_files.append({"sigma": sigma, "theta": theta, "file": name, "n_samples": len(ts)})
    snap_files = []
    for st in res.snapshots:
        name = f"snapshot_{st.step_index:06d}.bin"
        meta = {"t": st.t, "step": st.step_index, "h": p.grid.h, "dt": p.grid.dt, "n_half": p.grid.n_half}
        write_snapshot(out / name, {"u": st.u, "u_prev": st.u_prev}, meta)
        snap_files.append(name)
    summary = {
        "status": res.status,
        "verdict": res.status,
        "blowup_time": res.blowup_time,
        "t_final": res.t_final,
        "n_outputs": len(obs),
        "eps": p.data.eps,
        "rho": p.rho,
        "mu": p.mu,
        "seed": cfg.seed,
        "rays": ray_files,
        "snapshots": snap_files,
        "config": cfg.to_json(),
    }
    write_json(out / "summary.json", summary)
    return EXIT_OK


def load_series(directory: Path) -> tuple[RunSeries, dict]:
    """Read a simulate output directory back into a RunSeries."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"input directory {directory} does not exist")
    summary = read_json(directory / "summary.json")
    obs = read_csv(directory / "observables.csv")
    missing = [c for c in OBSERVABLE_COLUMNS if c not in obs]
    if missing:
        raise InputError(f"{directory}/observables.csv: missing columns {missing}")
    cols = {c: obs[c] for c in OBSERVABLE_COLUMNS}
    if (directory / "ghost.csv").exists():
        gh = read_csv(directory / "ghost.csv")
        missing = [c for c in GHOST_COLUMNS if c not in gh]
        if missing:
            raise InputError(f"{directory}/ghost.csv: missing columns {missing}")
        if len(gh["t"]) != len(obs["t"]) or np.any(gh["t"] != obs["t"]):
            raise InputError(f"{directory}: ghost.csv and observables.csv are misaligned")
        cols.update({c: gh[c] for c in GHOST_COLUMNS[1:]})
    if len(cols["t"]) == 0:
        raise InputError(f"{directory}: no samples")
    if np.any(np.diff(cols["t"]) <= 0):
        raise InputError(f"{directory}: time column not increasing")
    status = summary.get("status", "completed")
    return RunSeries(**cols, status=status, blowup_time=summary.get("blowup_time")), summary


def cmd_report(cfg: ExperimentConfig, out: Path) -> int:
    p = cfg.report
    if not p.inputs:
        raise InputError("report: no input directories given")
    combined = {}
    used = set()
    for src in p.inputs:
        series, summary = load_series(Path(src))
        name = Path(src).name or "run"
        while name in used:
            name += "_"
        used.add(name)
        eps = p.eps if p.eps is not None else float(summary.get("eps", 1.0))
        rep = decay_report(series, eps, p.delta, p.mu, p.r_headroom, p.q_headroom)
        doc = rep.to_json()
        doc["input"] = str(src)
        if series.has_ghost and len(series.t) >= 3:
            gi = verify_ghost_identity(series, p.rho)
            doc["ghost_identity"] = gi.to_json()
            holds, _, _ = ghost_inequality(series, p.rho)
            doc["ghost_inequality_holds"] = holds
        sub = out / name
        sub.mkdir(parents=True, exist_ok=True)
        write_json(sub / "report.json", doc)
        write_columns(sub / "series.csv", {"t": rep.t, **rep.series()})
        for key, values in rep.series().items():
            write_columns(sub / f"{key}.csv", {"t": rep.t, key: values})
        combined[name] = {"verdict": rep.verdict, "input": str(src)}
    write_json(out / "report.json", combined)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "profile": cmd_profile,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavedecay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", required=True, type=Path)
        sp.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if cfg.task is not None and cfg.task != args.command:
            raise ConfigError(f"config.task is {cfg.task!r} but the command is {args.command!r}")
        if args.seed is not None:
            cfg = ExperimentConfig(**{**cfg.__dict__, "seed": args.seed})
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SpecError, cond.PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

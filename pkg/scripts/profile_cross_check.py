"""Ray profile extracted from the PDE against the profile ODE seeded at t = 2.

Runs the dissipative problem and, as a reference, the free problem with the
same data, and tabulates U along sigma = 0 for two directions.  For the free
problem the ODE predicts a constant, so any variation there is either the
approach to the asymptotic regime or grid dispersion.

    python3 scripts/profile_cross_check.py [--h 0.03125] [--t-end 50]
"""

import argparse

import numpy as np

from wavedecay import corpus
from wavedecay.nonlinearity import Direction
from wavedecay.profile_ode import integrate_profile
from wavedecay.wave_solver import GridConfig, InitialData, run

SAMPLE_TIMES = (2, 5, 10, 15, 20, 25, 30, 35, 40)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=1 / 32)
    ap.add_argument("--t-end", type=float, default=50.0)
    ap.add_argument("--eps", type=float, default=0.3)
    args = ap.parse_args()
    cfg = GridConfig.for_run(args.h, args.t_end, 1.0)
    data = InitialData(eps=args.eps, f_scale=(0.0,), g_scale=(6.0,))
    rays = [(0.0, 0.0), (0.0, np.pi / 4)]
    print("t:".ljust(22) + "".join(f"{t:>10d}" for t in SAMPLE_TIMES))
    for label, spec in (("dissipator", corpus.dissipator()), ("free", corpus.free())):
        res = run(spec, cfg, data, output_every=10**9, rays=rays, ray_every=4, ghost=False)
        for sigma, theta in rays:
            ts, vs = res.rays[(sigma, theta)]
            U = vs[:, 0]
            print(f"{label} theta={theta:.3f}".ljust(22) + "".join(f"{np.interp(t, ts, U):10.5f}" for t in SAMPLE_TIMES))
            if label == "free":
                continue
            traj = integrate_profile(spec.cubic, Direction(theta), [U[0]], float(ts[0]), args.t_end)
            pred = np.interp(ts, traj.times, traj.values[:, 0])
            print(f"  ode seeded t={ts[0]:.3f}".ljust(22) + "".join(f"{np.interp(t, ts, pred):10.5f}" for t in SAMPLE_TIMES))
            window = (ts >= 10) & (ts <= 40)
            rel = np.abs(U[window] - pred[window]) / np.abs(pred[window])
            print(f"  max relative gap on [10, 40]: {rel.max():.4f}")


if __name__ == "__main__":
    main()

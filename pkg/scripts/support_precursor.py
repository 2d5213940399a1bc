"""Extent of the discrete solution ahead of the light cone.

For the free problem, reports max over t of support_radius - (t + R + 2h) at
the default threshold 1e-12, and the largest |u| found beyond t + R + 2h, for
a sequence of grid spacings.

    python3 scripts/support_precursor.py [--t-end 5]
"""

import argparse

import numpy as np

from wavedecay import corpus
from wavedecay.wave_solver import GridConfig, InitialData, Solver

SPACINGS = (1 / 16, 1 / 32, 1 / 64)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=5.0)
    args = ap.parse_args()
    data = InitialData(eps=0.3, f_scale=(0.0,), g_scale=(6.0,))
    print(f"{'h':>10s}{'max excess':>14s}{'max |u| beyond':>18s}")
    for h in SPACINGS:
        cfg = GridConfig.for_run(h, args.t_end, 1.0, window_pad=None)
        solver = Solver(corpus.free(), cfg, data)
        st = solver.initialize()
        x = cfg.coords
        r = np.hypot(*np.meshgrid(x, x, indexing="ij"))
        excess, beyond = -np.inf, 0.0
        for _ in range(cfg.n_steps):
            st = solver.advance(st)
            live = np.abs(st.u[0]) > 1e-12
            edge = st.t + 1.0 + 2 * h
            excess = max(excess, float(r[live].max()) - edge)
            beyond = max(beyond, float(np.abs(st.u[0][r > edge]).max(initial=0.0)))
        print(f"{h:10.5f}{excess:14.4f}{beyond:18.3e}")


if __name__ == "__main__":
    main()

"""Spatial convergence order of the free solver against a Richardson reference.

For each base spacing h the solution at t = 2 is computed at h, h/2, h/4 with
dt = h/2; the reference is u_{h/4} + (u_{h/4} - u_{h/2})/3 and the order is
log2(err(h) / err(h/2)) in the max norm on the base nodes.

    python3 scripts/convergence_study.py [--bases 0.0625 0.03125 0.015625]
"""

import argparse
import math

import numpy as np

from wavedecay import corpus
from wavedecay.wave_solver import GridConfig, InitialData, Solver


def solve(h, data, t_end=2.0):
    cfg = GridConfig.for_run(h, t_end, 1.0, dt_ratio=0.5)
    solver = Solver(corpus.free(), cfg, data)
    st = solver.initialize()
    for _ in range(cfg.n_steps):
        st = solver.advance(st)
    return cfg, st.u[0]


def order_at(h, data):
    sols = {}
    for hh in (h, h / 2, h / 4):
        cfg, u = solve(hh, data)
        stride, mid, k = int(round(h / hh)), cfg.n_half, int(round(3.0 / h))
        nodes = slice(mid - k * stride, mid + k * stride + 1, stride)
        sols[hh] = u[nodes, nodes]
    ref = sols[h / 4] + (sols[h / 4] - sols[h / 2]) / 3.0
    e0, e1 = (np.max(np.abs(sols[x] - ref)) for x in (h, h / 2))
    return e0, e1, math.log2(e0 / e1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bases", type=float, nargs="+", default=[1 / 16, 1 / 32, 1 / 64])
    args = ap.parse_args()
    families = {
        "velocity bump": InitialData(eps=0.3, f_scale=(0.0,), g_scale=(6.0,)),
        "position bump": InitialData(eps=1.0, f_scale=(1.0,), g_scale=(0.0,)),
    }
    for label, data in families.items():
        for h in args.bases:
            e0, e1, p = order_at(h, data)
            print(f"{label:14s} h={h:.6f}  err {e0:.3e} -> {e1:.3e}  order {p:.3f}")


if __name__ == "__main__":
    main()

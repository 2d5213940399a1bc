"""Acceptance suite: one test per criterion, each run at its stated tolerance.

Every test records a PASS/FAIL line (printed in the terminal summary) before
asserting, so the full list is visible even when some criteria fail.
"""

import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from wavedecay import conditions as cond
from wavedecay import corpus
from wavedecay.conditions import WeightMatrix
from wavedecay.diagnostics import GhostWeight, RunSeries, decay_report, refinement_factor, verify_ghost_identity
from wavedecay.nonlinearity import Direction
from wavedecay.profile_ode import (
    MatsBound,
    integrate_profile,
    integrate_variational,
    lyapunov_track,
    mats_bound,
    n_steps_for,
    verify_mats,
)
from wavedecay.wave_solver import GridConfig, InitialData, Solver, run

# radial bump R = 1 driven through the initial velocity; shared by the PDE criteria
RADIUS = 1.0
DATA = InitialData(eps=0.3, radius=RADIUS, f_scale=(0.0,), g_scale=(6.0,))
H = 1 / 32
T_END = 50.0
EVERY = 4


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


# ----------------------------------------------------------------------------
# condition corpus


def _null_form_tensors():
    n = 2
    idx = range(1, n + 1)
    out = []
    for j, k, l in itertools.product(idx, idx, idx):
        out.append(corpus.system(n, quadratic=corpus.q0_terms(j, k, l)).quadratic)
        for a, b in ((0, 1), (0, 2), (1, 2)):
            out.append(corpus.system(n, quadratic=corpus.qab_terms(j, k, l, a, b)).quadratic)
    rng = np.random.default_rng(0)
    rows = []
    for j, k, l in itertools.product(idx, idx, idx):
        rows += corpus.q0_terms(j, k, l, float(rng.normal()))
        for a, b in ((0, 1), (0, 2), (1, 2)):
            rows += corpus.qab_terms(j, k, l, a, b, float(rng.normal()))
    out.append(corpus.system(n, quadratic=rows).quadratic)
    return out


def _condition_verdicts(n_grid):
    v = {}
    for i, B in enumerate(_null_form_tensors()):
        v[f"null_{i}"] = cond.check_null_quadratic(B).verdict
    v["b00"] = cond.check_null_quadratic(corpus.quadratic_violator().quadratic).verdict
    for b in (0.0, -1.0, -3.0):
        C = corpus.example_two_component(0.0, b).cubic
        v[f"a0_b{b:g}"] = cond.check_agemi(C, WeightMatrix.identity(2), n_grid, n_grid).verdict
    for b in (-3.0, 0.0, 3.0):
        C = corpus.example_two_component(1.0, b).cubic
        A = corpus.example_two_component_weight(1.0, b)
        v[f"a1_b{b:g}"] = cond.check_agemi(C, A, n_grid, n_grid).verdict
    v["rotating"] = cond.check_agemi(
        corpus.example_rotating().cubic, corpus.example_rotating_weight(), n_grid, n_grid
    ).verdict
    return v


def test_condition_corpus(record):
    t0 = time.perf_counter()
    coarse = _condition_verdicts(512)
    fine = _condition_verdicts(1024)
    elapsed = time.perf_counter() - t0
    null_ok = all(coarse[k] == cond.HOLDS for k in coarse if k.startswith("null_"))
    expected = {
        "b00": cond.FAILS,
        **{f"a0_b{b:g}": cond.HOLDS for b in (0.0, -1.0, -3.0)},
        **{f"a1_b{b:g}": cond.HOLDS_STRICTLY for b in (-3.0, 0.0, 3.0)},
        "rotating": cond.HOLDS_STRICTLY,
    }
    regimes_ok = all(coarse[k] == v for k, v in expected.items())
    stable = coarse == fine
    ok = null_ok and regimes_ok and stable and elapsed < 10.0
    record(1, ok, f"null forms {null_ok}, regimes {regimes_ok}, 1024 grid stable {stable}, {elapsed:.1f}s")
    assert ok, (coarse, fine, elapsed)


# ----------------------------------------------------------------------------
# logarithmic decay bound


def test_log_decay_bound_closed_form(record):
    c2, bound = mats_bound(MatsBound(c0=1.0, c1=0.0, p=2.0, q=2.0, t0=2.0, phi0=1.0))
    c2_err = abs(c2 - (1.0 + math.log(2.0)))
    t = np.geomspace(2.0, 1e6, 100_001)
    phi = 1.0 / (1.0 + np.log(t / 2.0))
    ineq = bool(np.all(phi <= c2 / np.log(t)))
    ok = c2_err <= 1e-12 and ineq
    record(2, ok, f"|C2 - (1 + log 2)| = {c2_err:.1e}, Phi <= C2/log t on 1e5 samples: {ineq}")
    assert ok


# ----------------------------------------------------------------------------
# profile ODE


def test_profile_ode_oracle(record):
    C = corpus.dissipator().cubic
    om = Direction(0.0)
    t0 = time.perf_counter()
    traj = integrate_profile(C, om, [1.0], 2.0, 1e6, n_steps_for(2.0, 1e6, 256))
    exact = 1.0 / np.sqrt(1.0 + np.log(traj.times / 2.0))
    rel = float(np.max(np.abs(traj.values[:, 0] / exact - 1.0)))
    # order on a short interval where the error is well above round-off
    errs = []
    for n in (64, 128, 256):
        tr = integrate_profile(C, om, [1.0], 2.0, 2.0 * math.e**2, n)
        errs.append(abs(tr.values[-1, 0] - 1.0 / math.sqrt(3.0)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    var = integrate_variational(C, om, [1.0], [[1.0]], 2.0, 1e6, n_steps_for(2.0, 1e6, 256))
    wexact = (1.0 + np.log(var.times / 2.0)) ** -1.5
    wrel = float(np.max(np.abs(var.variational[:, 0, 0] / wexact - 1.0)))
    elapsed = time.perf_counter() - t0
    orders_ok = bool(np.all((orders >= 3.5) & (orders <= 4.5)))
    ok = rel <= 1e-8 and orders_ok and wrel <= 1e-6 and elapsed < 1.0
    record(3, ok, f"rel {rel:.1e}, orders {np.round(orders, 2).tolist()}, W rel {wrel:.1e}, {elapsed:.2f}s")
    assert ok


# ----------------------------------------------------------------------------
# Lyapunov monotonicity


def _random_rays(n, count, rng):
    for _ in range(count):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        sigma = rng.uniform(-5.0, 1.0)
        v = rng.standard_normal(n)
        v *= rng.uniform() ** (1.0 / n) / np.linalg.norm(v)
        yield theta, sigma, v


def test_lyapunov_monotonicity(record):
    rng = np.random.default_rng(2024)
    checked, strict, worst_step, worst_ratio = 0, 0, -math.inf, 0.0
    failures = []
    for name, (spec, A) in corpus.corpus().items():
        if cond.check_agemi(spec.cubic, A).verdict not in (cond.HOLDS, cond.HOLDS_STRICTLY):
            continue
        checked += 1
        C0 = None
        if cond.check_strict(spec.cubic, A).verdict == cond.HOLDS:
            strict += 1
            C0 = cond.estimate_C0(spec.cubic, A)
        for theta, sigma, V0 in _random_rays(spec.n_components, 64, rng):
            t0 = max(2.0, -2.0 * sigma)
            traj = integrate_profile(spec.cubic, Direction(theta), V0, t0, 1e6, n_steps_for(t0, 1e6, 256))
            phi = lyapunov_track(A, traj)
            step = float(np.max(np.diff(phi)))
            worst_step = max(worst_step, step)
            if step > 1e-9:
                failures.append((name, theta, sigma, step))
            if C0 is not None and np.any(V0):
                rep = verify_mats(traj, A, C0)
                worst_ratio = max(worst_ratio, rep.max_ratio)
                if not rep.holds:
                    failures.append((name, theta, sigma, rep.max_ratio))
    ok = not failures and checked > 0
    record(
        4,
        ok,
        f"{checked} specs ({strict} strict) x 64 rays, max dPhi {worst_step:.1e}, "
        f"max Phi log t / C2 {worst_ratio:.3f}",
    )
    assert ok, failures[:5]


# ----------------------------------------------------------------------------
# free field


def _solve(spec, cfg, data):
    solver = Solver(spec, cfg, data)
    state = solver.initialize()
    for _ in range(cfg.n_steps):
        state = solver.advance(state)
    return state


def test_free_field(record):
    t0 = time.perf_counter()
    free = corpus.free()
    h = 1 / 64
    cfg = GridConfig.for_run(h, 10.0, RADIUS)
    res = run(free, cfg, DATA, output_every=EVERY, ghost=False)
    e = res.series("energy")
    drift = float(np.max(np.abs(e - e[0])) / e[0])
    t_level = res.series("t") + cfg.dt / 2
    excess = float(np.max(res.series("support_radius") - (t_level + RADIUS + 2 * h)))

    # Richardson study at t = 2, refining from h = 1/64 with dt/h fixed so 2/dt is an integer
    sols = {}
    for hh in (h, h / 2, h / 4):
        c = GridConfig.for_run(hh, 2.0, RADIUS, dt_ratio=0.5)
        st = _solve(free, c, DATA)
        stride, mid, k = int(round(h / hh)), c.n_half, int(round(3.0 / h))
        nodes = slice(mid - k * stride, mid + k * stride + 1, stride)
        sols[hh] = st.u[0, nodes, nodes]
    ref = sols[h / 4] + (sols[h / 4] - sols[h / 2]) / 3.0
    e_coarse = np.max(np.abs(sols[h] - ref))
    e_fine = np.max(np.abs(sols[h / 2] - ref))
    order = math.log2(e_coarse / e_fine)
    elapsed = time.perf_counter() - t0
    ok = drift <= 1e-3 and order >= 1.9 and excess <= 0.0 and elapsed < 120.0
    record(
        5,
        ok,
        f"drift {drift:.1e}, order {order:.2f}, max support - (t + R + 2h) = {excess:.3f}, {elapsed:.0f}s",
    )
    assert ok


# ----------------------------------------------------------------------------
# dissipative run shared by three criteria


@pytest.fixture(scope="module")
def dissipative_run():
    cfg = GridConfig.for_run(H, T_END, RADIUS)
    res, elapsed = _timed(
        run, corpus.dissipator(), cfg, DATA, output_every=EVERY, rays=[(0.0, 0.0)], ray_every=EVERY, ghost=False
    )
    return res, elapsed


def test_dissipation(record, dissipative_run):
    res, elapsed = dissipative_run
    e = res.series("energy")
    max_step = float(np.max(np.diff(e)))
    ratio = float(e[-1] / e[0])
    ok = res.status == "completed" and max_step <= 1e-10 and ratio < 0.95 and elapsed < 300.0
    record(6, ok, f"max energy step {max_step:.1e}, E(50)/E(0) {ratio:.4f}, {elapsed:.0f}s")
    assert ok


def test_ghost_identity(record):
    reps = []
    for h in (1 / 16, 1 / 32):
        cfg = GridConfig.for_run(h, 10.0, RADIUS)
        # cadence fixed in steps: the centred difference refines with h
        res = run(corpus.dissipator(), cfg, DATA, output_every=EVERY, rho=2.0)
        reps.append(verify_ghost_identity(res, 2.0))
    factor, order = refinement_factor(*reps)
    w = GhostWeight(2.0)
    bounds = True
    for h in (1 / 16, 1 / 32):
        cfg = GridConfig.for_run(h, 10.0, RADIUS)
        x = cfg.coords
        r = np.hypot(*np.meshgrid(x, x, indexing="ij"))
        for t in np.arange(0.0, 10.0 + 1e-9, 0.25):
            bounds &= w.check_bounds(t, r)
    ok = factor >= 2.8 and order >= 1.5 and bounds and w.upper_bound == math.exp(math.pi)
    record(7, ok, f"residual {reps[0].max_residual:.2e} -> {reps[1].max_residual:.2e}, factor {factor:.2f}, "
                  f"order {order:.2f}, weight bounds {bounds}")
    assert ok


def test_blowup_contrast(record):
    cfg = GridConfig.for_run(H, T_END, RADIUS)
    data = replace(DATA, eps=0.5)
    bad = run(corpus.quadratic_violator(), cfg, data, output_every=EVERY, ghost=False)
    good = run(corpus.q0_scalar(), cfg, data, output_every=EVERY, ghost=False)
    du = good.series("max_du")
    bounded = good.status == "completed" and bool(np.all(np.isfinite(du))) and float(du.max()) <= 2.0 * du[0]
    blew = bad.status == "blow-up" and bad.blowup_time < T_END
    ok = blew and bounded
    record(
        8,
        ok,
        f"violator {bad.status} at t = {bad.blowup_time}, Q0 {good.status} with "
        f"max|du| {du.max():.3f} (initial {du[0]:.3f})",
    )
    assert ok


def test_profile_cross_check(record, dissipative_run):
    res, _ = dissipative_run
    ts, vs = res.rays[(0.0, 0.0)]
    U = vs[:, 0]
    # seed at the first extracted sample, the half level nearest t = 2 from above
    t_seed, U_seed = float(ts[0]), float(U[0])
    traj = integrate_profile(corpus.dissipator().cubic, Direction(0.0), [U_seed], t_seed, T_END)
    window = (ts >= 10.0) & (ts <= 40.0)
    pred = np.interp(ts[window], traj.times, traj.values[:, 0])
    rel = np.abs(U[window] - pred) / np.abs(pred)
    worst = float(rel.max())
    ok = worst <= 0.10
    record(9, ok, f"seed t = {t_seed:.4f}, max relative gap over [10, 40] {worst:.4f} at t = {ts[window][rel.argmax()]:.1f}")
    assert ok


def test_norm_ratio_bounded(record, dissipative_run):
    res, _ = dissipative_run
    rep = decay_report(res, DATA.eps, delta=0.01, r_headroom=1.05)
    late = rep.t >= 2.0
    r2 = float(np.interp(2.0, rep.t, rep.r))
    worst = float(np.max(rep.r[late]) / r2)
    ok = rep.summary["r_bounded"] and worst <= 1.05 and rep.t[-1] >= T_END - H
    # boundedness surrogate only: log t barely moves at this scale, so no rate is fitted
    record(10, ok, f"sup r / r(2) over [2, 50] = {worst:.4f} (bound 1.05)")
    assert ok

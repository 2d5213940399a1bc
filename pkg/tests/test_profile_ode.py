import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from wavedecay import conditions as cond
from wavedecay import corpus
from wavedecay.conditions import WeightMatrix
from wavedecay.nonlinearity import Direction
from wavedecay.profile_ode import (
    MatsBound,
    ProfileOverflow,
    RayCoordinate,
    RayTrajectory,
    integrate_profile,
    integrate_variational,
    lyapunov_track,
    n_steps_for,
    rk4,
    verify_mats,
)

DISSIPATOR = corpus.dissipator().cubic


def closed_form(t, t0=2.0, v0=1.0):
    # dV/ds = -V^3/2  =>  V^-2 = V0^-2 + log(t/t0)
    return 1.0 / np.sqrt(v0**-2 + np.log(t / t0))


def test_dissipator_matches_closed_form():
    traj = integrate_profile(DISSIPATOR, Direction(0.0), [1.0], 2.0, 1e6)
    np.testing.assert_allclose(traj.values[:, 0], closed_form(traj.times), rtol=1e-10)


@given(st.floats(-2, 2).filter(lambda v: abs(v) > 1e-3), st.floats(0, 2 * math.pi))
def test_closed_form_any_direction_and_seed(v0, theta):
    traj = integrate_profile(DISSIPATOR, Direction(theta), [v0], 2.0, 1e4, n_steps=512)
    expect = np.sign(v0) * closed_form(traj.times, v0=abs(v0))
    np.testing.assert_allclose(traj.values[:, 0], expect, rtol=1e-8)


def test_variational_closed_form():
    traj = integrate_variational(DISSIPATOR, Direction(0.0), [1.0], [[1.0]], 2.0, 1e6)
    expect = (1 + np.log(traj.times / 2.0)) ** -1.5
    np.testing.assert_allclose(traj.variational[:, 0, 0], expect, rtol=1e-9)


def test_variational_matches_finite_difference():
    spec, _ = corpus.corpus()["rotating_weight"]
    om, V0 = Direction(0.7), np.array([0.4, -0.3])
    traj = integrate_variational(spec.cubic, om, V0, np.eye(2), 2.0, 200.0, n_steps=400)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        plus = integrate_profile(spec.cubic, om, V0 + e, 2.0, 200.0, n_steps=400).values[-1]
        minus = integrate_profile(spec.cubic, om, V0 - e, 2.0, 200.0, n_steps=400).values[-1]
        np.testing.assert_allclose(traj.variational[-1][:, k], (plus - minus) / (2 * h), atol=1e-7)


def test_rk4_fourth_order():
    errs = []
    for n in (64, 128, 256):
        traj = integrate_profile(DISSIPATOR, Direction(0.0), [1.0], 2.0, 2 * math.e**2, n_steps=n)
        errs.append(abs(traj.values[-1, 0] - closed_form(traj.times[-1])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 3.5) & (orders < 4.5))


def test_time_reversal():
    f = lambda y: -0.5 * y**3
    fwd = rk4(f, np.array([0.8]), 0.0, 3.0, 300)
    back = rk4(f, fwd[-1], 3.0, 0.0, 300)
    assert back[-1, 0] == pytest.approx(0.8, abs=1e-9)


def test_null_cubic_gives_constant_rays():
    C = corpus.null_form_system().cubic
    traj = integrate_profile(C, Direction(1.1), [0.3, -0.2], 2.0, 1e3)
    np.testing.assert_allclose(traj.values, np.tile([0.3, -0.2], (len(traj.times), 1)), atol=1e-14)


def test_zero_seed_stays_zero():
    traj = integrate_profile(DISSIPATOR, Direction(0.0), [0.0], 2.0, 1e3)
    assert np.all(traj.values == 0.0)


def test_violator_overflows_with_partial_trajectory():
    C = corpus.cubic_violator().cubic
    with pytest.raises(ProfileOverflow) as info:
        integrate_profile(C, Direction(0.0), [1.0], 2.0, 1e6)
    # blow-up at log(t/2) = 1
    assert info.value.t_last == pytest.approx(2 * math.e, rel=0.05)
    part = info.value.partial
    assert part.times[-1] <= info.value.t_last + 1e-9
    assert np.all(np.isfinite(part.values))


@pytest.mark.parametrize(
    "sigma, t0", [(0.0, 2.0), (-0.5, 2.0), (-1.0, 2.0), (-3.0, 6.0), (1.0, 2.0)]
)
def test_ray_start(sigma, t0):
    ray = RayCoordinate(sigma, Direction(0.3))
    assert ray.t_start == t0
    np.testing.assert_allclose(np.linalg.norm(ray.point(5.0)), abs(5.0 + sigma))


def test_steps_per_decade():
    assert n_steps_for(2.0, 2e6) == 6 * 256
    assert n_steps_for(2.0, 2.0001) == 1


def test_trajectory_validation():
    with pytest.raises(ValueError):
        RayTrajectory(np.array([2.0, 2.0]), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        integrate_profile(DISSIPATOR, Direction(0.0), [1.0], 1.0, 10.0)


def test_mats_closed_form_constant():
    b = MatsBound(c0=1.0, c1=0.0, p=2.0, q=2.0, t0=2.0, phi0=1.0)
    assert b.c2 == pytest.approx(1 + math.log(2), abs=1e-12)


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_mats_tail_integral(q):
    # int_log2^inf x^2 e^{(1-q)x} dx = Gamma(3, (q-1) log 2) / (q-1)^3
    b = MatsBound(1.0, 1.0, 2.0, q, 2.0, 1.0)
    k = q - 1
    expect = special.gammaincc(3, k * math.log(2)) * special.gamma(3) / k**3
    assert b.tail_integral == pytest.approx(expect, rel=1e-9)


def test_mats_preconditions():
    with pytest.raises(cond.PreconditionError):
        MatsBound(0.0, 0.0, 2.0, 2.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        MatsBound(1.0, 0.0, 1.0, 2.0, 2.0, 1.0)


@given(st.floats(-1, 1), st.floats(0, 2 * math.pi), st.floats(-5, 1))
def test_lyapunov_decreases_for_dissipative_pair(v, theta, sigma):
    spec = corpus.example_two_component(1.0, 3.0)
    A = corpus.example_two_component_weight(1.0, 3.0)
    t0 = max(2.0, -2.0 * sigma)
    V0 = [v, 0.5 * v]
    traj = integrate_profile(spec.cubic, Direction(theta), V0, t0, 1e4, n_steps=256)
    phi = lyapunov_track(A, traj)
    assert np.all(np.diff(phi) <= 1e-9)
    C0 = cond.estimate_C0(spec.cubic, A, 128, 128)
    assert verify_mats(traj, A, C0).holds


def test_verify_mats_dissipator():
    traj = integrate_profile(DISSIPATOR, Direction(0.0), [1.0], 2.0, 1e6)
    rep = verify_mats(traj, WeightMatrix.identity(1), 1.0)
    assert rep.holds and rep.max_ratio <= 1.0

import numpy as np
import pytest

from machlimit.euler import (
    EulerBoussinesqState,
    euler_boussinesq_run,
    euler_step,
    initial_state,
    pressure,
)
from machlimit.fields import Grid, helmholtz_split, spectral_calculus


def taylor_green(g):
    x, y = g.coords
    return np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])


def test_taylor_green_is_stationary():
    g = Grid(2, 32)
    v0 = taylor_green(g)
    out = euler_boussinesq_run(g, v0, g.zeros(), 0.5, 0.01)
    assert np.max(np.abs(out[-1].v - v0)) < 1e-12
    x, y = g.coords
    assert np.allclose(out[-1].Pi, (np.cos(2 * x) + np.cos(2 * y)) / 4, atol=1e-12)


def test_shear_flow_is_steady():
    g = Grid(2, 32)
    x, y = g.coords
    v0 = np.stack([np.sin(y), g.zeros()])
    out = euler_boussinesq_run(g, v0, g.zeros(), 1.0, 0.01)
    assert np.max(np.abs(out[-1].v - v0)) < 1e-10


def _random_flow(g, seed):
    x, y = g.coords
    rng = np.random.default_rng(seed)
    psi = sum(rng.standard_normal() * np.cos(kx * x + ky * y + rng.uniform(0, 2 * np.pi))
              for kx in range(-3, 4) for ky in range(-3, 4) if kx or ky)
    d = spectral_calculus(g, psi / 10, "grad")
    return np.stack([d[1], -d[0]])


def test_invariants_of_inviscid_flow():
    g = Grid(2, 128)
    s = initial_state(g, _random_flow(g, 0), g.zeros())
    energy0 = g.integrate(np.sum(s.v ** 2, axis=0))
    w0 = spectral_calculus(g, s.v[1], "grad")[0] - spectral_calculus(g, s.v[0], "grad")[1]
    ens0 = g.integrate(w0 ** 2)
    for _ in range(100):
        s = euler_step(g, s, 1e-3)
        assert np.max(np.abs(spectral_calculus(g, s.v, "div"))) < 1e-10
    w = spectral_calculus(g, s.v[1], "grad")[0] - spectral_calculus(g, s.v[0], "grad")[1]
    assert abs(g.integrate(np.sum(s.v ** 2, axis=0)) - energy0) / energy0 < 1e-6
    assert abs(g.integrate(w ** 2) - ens0) / ens0 < 1e-6


def test_zero_temperature_stays_zero():
    g = Grid(2, 32)
    out = euler_boussinesq_run(g, _random_flow(g, 1), g.zeros(), 0.2, 0.01)
    assert np.all(out[-1].T == 0)


def test_temperature_moments_conserved():
    g = Grid(2, 64)
    x, y = g.coords
    T0 = np.exp(np.sin(x) * np.cos(y))
    out = euler_boussinesq_run(g, _random_flow(g, 2), T0, 0.2, 0.01)
    T = out[-1].T
    assert abs(g.integrate(T) - g.integrate(T0)) < 1e-4 * g.integrate(T0)
    assert abs(g.integrate(T ** 2) - g.integrate(T0 ** 2)) < 1e-4 * g.integrate(T0 ** 2)


def test_initial_velocity_is_projected():
    g = Grid(2, 32)
    x, y = g.coords
    v0 = np.stack([np.sin(x), np.sin(y)]) + taylor_green(g)
    s = initial_state(g, v0, g.zeros())
    assert np.allclose(s.v, taylor_green(g), atol=1e-12)
    assert np.allclose(s.v, helmholtz_split(g, v0)[0])


def test_pressure_of_rest_is_zero():
    g = Grid(2, 16)
    assert np.all(pressure(g, g.zeros(vector=True)) == 0)


def test_sampling_and_guards():
    g = Grid(2, 32)
    out = euler_boussinesq_run(g, taylor_green(g), g.zeros(), 0.1, 0.01, sample_times=[0.0, 0.05, 0.1])
    assert [round(s.t, 12) for s in out] == [0.0, 0.05, 0.1]
    with pytest.raises(ValueError):
        euler_boussinesq_run(g, taylor_green(g), g.zeros(), 0.105, 0.01)
    s = EulerBoussinesqState(taylor_green(g), g.zeros(), g.zeros())
    with pytest.raises(ValueError):
        euler_step(g, s, 10.0)

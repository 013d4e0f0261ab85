import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from machlimit.fields import Grid
from machlimit.nsf import (
    NsfModel,
    NsfState,
    ScalingParams,
    StateCorruptionError,
    dissipation_balance,
    entropy_production,
    make_ill_prepared_data,
    nsf_rhs,
    nsf_step_imex,
)
from machlimit.thermo import GasModel, ThermoDomainError, eval_eos

GAS = GasModel(mu0=0.1, kappa0=0.1)


def model(n=32, eps=0.5, gas=GAS, dim=2, L=2 * np.pi, dissipative=True, a=1.0, b=1.0):
    return NsfModel.build(Grid(dim, n, L), gas, ScalingParams(eps, a, b), dissipative=dissipative)


def state(mod, rho, theta, u):
    e = eval_eos(mod.gas, rho, theta).e
    E = 0.5 * rho * np.sum(u ** 2, axis=0) + rho * e / mod.eps ** 2
    return NsfState(rho, rho * u, E, 0.0, mod, theta)


def smooth_state(mod, amp=0.1):
    x, y = mod.grid.coords
    rho = 1 + amp * np.sin(x) * np.cos(y)
    theta = 1 + amp * np.cos(x + y)
    u = np.stack([amp * np.sin(y), amp * np.cos(x)])
    return state(mod, rho, theta, u)


def test_rest_state_is_steady():
    mod = model()
    g = mod.grid
    s = state(mod, np.ones(g.shape), np.ones(g.shape), g.zeros(vector=True))
    dr, dm, dE = nsf_rhs(s)
    assert np.max(np.abs(dr)) < 1e-12 and np.max(np.abs(dm)) < 1e-10 and np.max(np.abs(dE)) < 1e-10
    for _ in range(5):
        s = nsf_step_imex(s, 0.01)
    assert np.max(np.abs(s.rho - 1)) < 1e-13
    assert np.max(np.abs(s.m)) < 1e-12
    assert np.max(np.abs(s.theta - 1)) < 1e-12


def test_tendencies_have_zero_mean():
    s = smooth_state(model())
    dr, dm, dE = nsf_rhs(s)
    g = s.grid
    assert abs(g.integrate(dr)) < 1e-12
    assert np.max(np.abs(g.integrate(dm))) < 1e-11
    assert abs(g.integrate(dE)) < 1e-10


def _exact_rhs(eps, amp, gas, a_exp, b_exp):
    x, y = sp.symbols("x y", real=True)
    X = (x, y)
    rho = 1 + amp * sp.sin(x) * sp.cos(y)
    theta = 1 + amp * sp.cos(x + y)
    u = [amp * sp.sin(y), amp * sp.cos(x)]
    Z = rho / theta ** sp.Rational(3, 2)
    z23 = Z ** sp.Rational(2, 3)
    P = gas.p_infty * Z * z23 + Z - Z * z23 * sp.log(1 + 1 / z23)
    p = theta ** sp.Rational(5, 2) * P + gas.a_rad / 3 * theta ** 4
    e = sp.Rational(3, 2) * theta ** sp.Rational(5, 2) * P / rho + gas.a_rad * theta ** 4 / rho
    mu = gas.mu0 * (1 + theta)
    kappa = gas.kappa0 * (1 + theta ** 3)
    divu = sum(sp.diff(u[i], X[i]) for i in range(2))
    S = [[mu * (sp.diff(u[i], X[j]) + sp.diff(u[j], X[i]) - sp.Rational(2, 3) * divu * (i == j))
          for j in range(2)] for i in range(2)]
    m = [rho * ui for ui in u]
    E = rho * (u[0] ** 2 + u[1] ** 2) / 2 + rho * e / eps ** 2
    q = [-kappa * sp.diff(theta, X[i]) for i in range(2)]
    drho = -sum(sp.diff(m[i], X[i]) for i in range(2))
    dm = [-sum(sp.diff(m[i] * u[j] - eps ** a_exp * S[i][j], X[j]) for j in range(2))
          - sp.diff(p, X[i]) / eps ** 2 for i in range(2)]
    flux = [(E + p / eps ** 2) * u[j] - eps ** a_exp * sum(S[j][i] * u[i] for i in range(2))
            + eps ** (b_exp - 2) * q[j] for j in range(2)]
    dE = -sum(sp.diff(flux[j], X[j]) for j in range(2))
    return sp.lambdify((x, y), [drho, dm[0], dm[1], dE], "numpy")


def test_manufactured_tendencies_converge_spectrally():
    eps, amp = 0.5, 0.1
    f = _exact_rhs(eps, amp, GAS, 1.0, 1.0)
    errs = []
    for n in (8, 16, 32):
        mod = model(n=n, eps=eps)
        s = smooth_state(mod, amp)
        dr, dm, dE = nsf_rhs(s)
        ex = [np.broadcast_to(v, s.grid.shape) for v in f(*s.grid.coords)]
        errs.append(max(np.max(np.abs(dr - ex[0])), np.max(np.abs(dm[0] - ex[1])),
                        np.max(np.abs(dm[1] - ex[2])), np.max(np.abs(dE - ex[3])) * eps ** 2))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-12
    # far faster than any fixed algebraic order
    assert errs[0] / errs[1] > 2 ** 12


def _run(s, dt, t):
    for _ in range(int(round(t / dt))):
        s = nsf_step_imex(s, dt)
    return s


def test_temporal_order():
    mod = model(n=32, eps=0.3)
    s0 = smooth_state(mod, 0.2)
    sols = [_run(s0, dt, 0.2) for dt in (0.02, 0.01, 0.005)]
    e1 = np.max(np.abs(sols[0].m - sols[1].m))
    e2 = np.max(np.abs(sols[1].m - sols[2].m))
    assert np.log2(e1 / e2) >= 1.8


def test_conservation_of_mass_momentum_energy():
    mod = model(n=32, eps=0.2)
    s = smooth_state(mod, 0.2)
    m0, p0, E0 = s.mass(), s.momentum(), s.energy()
    s = _run(s, 0.01, 0.2)
    assert abs(s.mass() - m0) / m0 < 1e-13
    assert np.max(np.abs(s.momentum() - p0)) < 1e-12
    assert abs(s.energy() - E0) / E0 < 1e-12


def test_entropy_production_for_shear():
    eps, gamma = 0.3, 0.7
    mod = model(eps=eps)
    g = mod.grid
    x, y = g.coords
    s = state(mod, np.ones(g.shape), np.ones(g.shape), np.stack([gamma * np.sin(y), g.zeros()]))
    mu = GAS.mu0 * 2.0
    expected = eps ** 3 * mu * (gamma * np.cos(y)) ** 2
    assert np.allclose(entropy_production(s), expected, atol=1e-13)


def test_entropy_production_for_temperature_gradient():
    eps = 0.3
    mod = model(eps=eps, b=1.5)
    g = mod.grid
    x, _ = g.coords
    theta = 1 + 0.2 * np.sin(x)
    s = state(mod, np.ones(g.shape), theta, g.zeros(vector=True))
    kappa = GAS.kappa0 * (1 + theta ** 3)
    expected = eps ** 1.5 * kappa * (0.2 * np.cos(x)) ** 2 / theta ** 2
    assert np.allclose(entropy_production(s), expected, rtol=1e-9, atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_entropy_production_nonnegative(seed):
    rng = np.random.default_rng(seed)
    mod = model(n=16, eps=float(rng.uniform(0.05, 1)))
    g = mod.grid
    x, y = g.coords
    c = rng.uniform(-0.3, 0.3, 6)
    rho = 1 + c[0] * np.sin(x + c[1])
    theta = 1 + c[2] * np.cos(y - c[3])
    u = np.stack([c[4] * np.cos(x + 2 * y), c[5] * np.sin(3 * x)])
    assert np.min(entropy_production(state(mod, rho, theta, u))) >= -1e-14


def test_inviscid_model_has_no_production():
    mod = model(dissipative=False)
    assert np.all(entropy_production(smooth_state(mod)) == 0)


def test_dissipation_balance_closes():
    gaps = []
    for dt in (0.01, 0.005):
        mod = model(n=32, eps=0.3)
        s = smooth_state(mod, 0.2)
        hist = [s]
        for _ in range(int(round(0.2 / dt))):
            s = nsf_step_imex(s, dt)
            hist.append(s)
        rep = dissipation_balance(hist)
        gaps.append(np.max(np.abs(rep.gap)) / rep.rhs)
    assert gaps[1] < 1e-5
    assert gaps[1] < gaps[0]


def test_ill_prepared_data():
    eps = 0.1
    mod = model(eps=eps)
    g = mod.grid
    s = make_ill_prepared_data(mod, g.zeros(), g.zeros(), g.zeros(vector=True))
    assert s.energy() == pytest.approx(mod.block.e_bar * g.volume / eps ** 2, rel=1e-14)
    x, y = g.coords
    s = make_ill_prepared_data(mod, np.cos(x), np.sin(y), np.stack([np.sin(y), g.zeros()]))
    assert np.allclose(s.rho, 1 + eps * np.cos(x))
    assert np.allclose(s.theta, 1 + eps * np.sin(y), atol=1e-12)
    assert np.allclose(s.u[0], np.sin(y))
    with pytest.raises(ThermoDomainError):
        make_ill_prepared_data(mod, -20 * np.ones(g.shape), g.zeros(), g.zeros(vector=True))
    with pytest.raises(ThermoDomainError):
        make_ill_prepared_data(mod, g.zeros(), -20 * np.ones(g.shape), g.zeros(vector=True))


def test_scaling_validation():
    with pytest.raises(ValueError):
        ScalingParams(0.1, a_exp=4.0)
    with pytest.raises(ValueError):
        ScalingParams(0.1, b_exp=0.0)
    with pytest.raises(ValueError):
        ScalingParams(0.0)
    with pytest.raises(ValueError):
        ScalingParams(0.1, eta=0.0)


def test_step_size_guard():
    s = smooth_state(model(n=32), 0.2)
    with pytest.raises(ValueError):
        nsf_step_imex(s, 10.0)


def test_corrupt_state_is_reported():
    mod = model(n=16)
    g = mod.grid
    s = NsfState(-np.ones(g.shape), g.zeros(vector=True), np.ones(g.shape), 0.0, mod)
    with pytest.raises(StateCorruptionError):
        s.theta

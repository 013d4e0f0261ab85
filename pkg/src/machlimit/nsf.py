"""Scaled Navier-Stokes-Fourier system on the periodic box.

Conservative variables ``(rho, m, E)`` with ``E = |m|^2/(2 rho) + rho e / eps^2``::

    d_t rho + div m = 0
    d_t m + div(m (x) u) + grad p / eps^2 = eps^a div S
    d_t E + div((E + p/eps^2) u) = eps^a div(S u) - eps^(b-2) div q

``S = mu(theta) (grad u + grad u^T - 2/3 div u I)`` and ``q = -kappa(theta) grad theta``.

Time stepping is a Strang splitting: the acoustic block linearized about
the reference state is propagated exactly per Fourier mode, the remainder
with Heun's method. All tendencies are spectral divergences, so the mean
density, momentum and energy are preserved to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fields import Grid
from .thermo import (
    GasModel,
    ReferenceState,
    ThermoDomainError,
    eos_derivatives,
    eval_eos,
    linearization_coefficients,
    relative_entropy_integrand,
    temperature_from_energy,
    transport_coefficients,
)

__all__ = [
    "ScalingParams",
    "NsfModel",
    "NsfState",
    "StateCorruptionError",
    "make_ill_prepared_data",
    "nsf_rhs",
    "nsf_step_imex",
    "entropy_production",
    "dissipation_integrand",
    "v4_energy",
    "DissipationTracker",
    "BalanceReport",
    "dissipation_balance",
]


class StateCorruptionError(RuntimeError):
    """Density or temperature left the admissible range during a run."""


@dataclass(frozen=True)
class ScalingParams:
    eps: float
    a_exp: float = 1.0
    b_exp: float = 1.0
    eta: float = 0.05

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.b_exp > 0:
            raise ValueError(f"b_exp must be positive, got {self.b_exp}")
        if not 0 < self.a_exp < 10.0 / 3.0:
            raise ValueError(f"a_exp must lie in (0, 10/3), got {self.a_exp}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")


@dataclass(frozen=True)
class AcousticBlock:
    """Coefficients of the acoustic system linearized about the reference state."""

    c1: float
    c2: float
    h_bar: float
    cs: float
    e_bar: float
    p_bar: float

    @classmethod
    def build(cls, gas: GasModel, ref: ReferenceState):
        p, e, _ = eval_eos(gas, ref.rho_bar, ref.theta_bar)
        d = eos_derivatives(gas, ref.rho_bar, ref.theta_bar)
        rb = ref.rho_bar
        c2 = float(d.p_theta / (rb * d.e_theta))
        c1 = float(d.p_rho - d.p_theta * (e + rb * d.e_rho) / (rb * d.e_theta))
        h = float(e + p / rb)
        return cls(c1, c2, h, float(np.sqrt(c1 + c2 * h)), float(e), float(p))


@dataclass(frozen=True)
class NsfModel:
    grid: Grid
    gas: GasModel
    scaling: ScalingParams
    ref: ReferenceState
    dissipative: bool = True

    @classmethod
    def build(cls, grid, gas, scaling, rho_bar=1.0, theta_bar=1.0, dissipative=True):
        return cls(grid, gas, scaling, linearization_coefficients(gas, rho_bar, theta_bar), dissipative)

    @property
    def eps(self):
        return self.scaling.eps

    @property
    def block(self) -> AcousticBlock:
        b = self.__dict__.get("_block")
        if b is None:
            b = AcousticBlock.build(self.gas, self.ref)
            object.__setattr__(self, "_block", b)
        return b


@dataclass(frozen=True)
class NsfState:
    rho: np.ndarray
    m: np.ndarray
    E: np.ndarray
    t: float
    model: NsfModel
    theta_hint: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def grid(self):
        return self.model.grid

    @property
    def u(self):
        return self.m / self.rho

    def internal_energy(self):
        eps2 = self.model.eps ** 2
        kin = 0.5 * np.sum(self.m ** 2, axis=0) / self.rho
        return eps2 * (self.E - kin) / self.rho

    @property
    def theta(self):
        th = self.__dict__.get("_theta")
        if th is None:
            th = recover_temperature(self)
            object.__setattr__(self, "_theta", th)
        return th

    def mass(self):
        return float(self.grid.integrate(self.rho))

    def energy(self):
        return float(self.grid.integrate(self.E))

    def momentum(self):
        return self.grid.integrate(self.m)


def recover_temperature(state: NsfState):
    if np.any(state.rho <= 0) or not np.all(np.isfinite(state.rho)):
        raise StateCorruptionError(f"nonpositive density at t={state.t:.6g}")
    e = state.internal_energy()
    try:
        return temperature_from_energy(state.model.gas, state.rho, e,
                                       theta_guess=state.theta_hint,
                                       theta_bar=state.model.ref.theta_bar)
    except ThermoDomainError as exc:
        raise StateCorruptionError(f"temperature recovery failed at t={state.t:.6g}: {exc}") from exc


def make_ill_prepared_data(model: NsfModel, rho1, theta1, u0) -> NsfState:
    """``rho = rho_bar + eps rho1``, ``theta = theta_bar + eps theta1``, ``u = u0``."""
    g, ref, eps = model.grid, model.ref, model.eps
    rho = ref.rho_bar + eps * g.check_scalar(rho1, "rho1")
    theta = ref.theta_bar + eps * g.check_scalar(theta1, "theta1")
    u0 = g.check_vector(u0, "u0")
    if np.any(rho <= 0):
        raise ThermoDomainError("initial density has vacuum; reduce eps or rho1")
    if np.any(theta <= 0):
        raise ThermoDomainError("initial temperature is nonpositive; reduce eps or theta1")
    e = eval_eos(model.gas, rho, theta).e
    m = rho * u0
    E = 0.5 * rho * np.sum(u0 ** 2, axis=0) + rho * e / eps ** 2
    return NsfState(rho, m, E, 0.0, model, theta)


# -- spectral helpers ---------------------------------------------------------

def _ddx(g: Grid, f, i, mask=True):
    fh = g.fft(f) * (1j * g.k_odd[i])
    if mask:
        fh = fh * g.dealias
    return g.ifft(fh)


def _grad(g, f, mask=True):
    fh = g.fft(f)
    if mask:
        fh = fh * g.dealias
    return np.stack([g.ifft(1j * ki * fh) for ki in g.k_odd])


def _div(g, F, mask=True):
    Fh = g.fft(F)
    s = sum(1j * ki * Fh[i] for i, ki in enumerate(g.k_odd))
    if mask:
        s = s * g.dealias
    return g.ifft(s)


def velocity_gradient(g: Grid, u):
    """``G[i, j] = d u_i / d x_j``."""
    return np.stack([_grad(g, u[i], mask=False) for i in range(g.dim)])


def viscous_stress(gas, theta, G):
    d = G.shape[0]
    mu, _ = transport_coefficients(gas, theta)
    divu = sum(G[i, i] for i in range(d))
    S = G + np.swapaxes(G, 0, 1)
    for i in range(d):
        S[i, i] -= 2.0 / 3.0 * divu
    return mu * S


def stress_power(gas, theta, G):
    """``S : grad u`` written as a sum of squares."""
    d = G.shape[0]
    mu, _ = transport_coefficients(gas, theta)
    sym = 0.5 * (G + np.swapaxes(G, 0, 1))
    tr = sum(sym[i, i] for i in range(d))
    dev = sym.copy()
    for i in range(d):
        dev[i, i] -= tr / d
    return mu * (2.0 * np.sum(dev ** 2, axis=(0, 1)) + (2.0 / d - 2.0 / 3.0) * tr ** 2)


def _fluxes(state: NsfState):
    """Shared pieces of the tendencies."""
    model = state.model
    g, gas = model.grid, model.gas
    theta = state.theta
    u = state.u
    p = eval_eos(gas, state.rho, theta).p
    out = {"theta": theta, "u": u, "p": p}
    if model.dissipative:
        G = velocity_gradient(g, u)
        out["S"] = viscous_stress(gas, theta, G)
        _, kappa = transport_coefficients(gas, theta)
        out["q"] = -kappa * _grad(g, theta, mask=False)
    return out


def _remainder(state: NsfState, fl=None):
    """Tendencies left after removing the linear acoustic block."""
    model = state.model
    g, eps = model.grid, model.eps
    blk, ref = model.block, model.ref
    sc = model.scaling
    fl = fl or _fluxes(state)
    u, p = fl["u"], fl["p"]
    m, rho, E = state.m, state.rho, state.E
    d = g.dim
    eps2 = eps * eps
    rho_p = rho - ref.rho_bar
    cE = eps2 * E - ref.rho_bar * blk.e_bar
    p_nl = p - blk.p_bar - blk.c1 * rho_p - blk.c2 * cE
    mom_flux = m[:, None] * u[None, :]
    if model.dissipative:
        mom_flux = mom_flux - eps ** sc.a_exp * fl["S"]
    dm = np.stack([-_div(g, mom_flux[i]) for i in range(d)]) - _grad(g, p_nl) / eps2
    e_flux = (eps2 * E + p - blk.h_bar * rho) * u / eps2
    if model.dissipative:
        Su = np.einsum("ij...,j...->i...", fl["S"], u)
        e_flux = e_flux - eps ** sc.a_exp * Su + eps ** (sc.b_exp - 2) * fl["q"]
    dE = -_div(g, e_flux)
    return np.zeros_like(rho), dm, dE


def _linear_rhs(state: NsfState):
    model = state.model
    g, eps, blk, ref = model.grid, model.eps, model.block, model.ref
    q = blk.c1 * (state.rho - ref.rho_bar) + blk.c2 * (eps * eps * state.E - ref.rho_bar * blk.e_bar)
    divm = _div(g, state.m, mask=False)
    return -divm, -_grad(g, q, mask=False) / eps ** 2, -blk.h_bar * divm / eps ** 2


def nsf_rhs(state: NsfState):
    """Full tendencies ``(drho, dm, dE)``; nonlinear fluxes are 2/3-dealiased."""
    lr, lm, lE = _linear_rhs(state)
    nr, nm, nE = _remainder(state)
    return lr + nr, lm + nm, lE + nE


def _linear_propagate(state: NsfState, dt):
    """Exact solution of the linear acoustic block over ``dt``."""
    model = state.model
    g, eps, blk, ref = model.grid, model.eps, model.block, model.ref
    kk = g.k_odd
    kmag = g.kmag_odd
    zero = kmag == 0
    ks = np.where(zero, 1.0, kmag)
    khat = [ki / ks for ki in kk]

    rh = g.fft(state.rho - ref.rho_bar)
    Eh = g.fft(eps * eps * state.E - ref.rho_bar * blk.e_bar)
    mh = g.fft(state.m)
    qh = blk.c1 * rh + blk.c2 * Eh
    muh = sum(khat[i] * mh[i] for i in range(g.dim))

    cs = blk.cs
    lam = cs * kmag / eps
    cos, sin = np.cos(lam * dt), np.sin(lam * dt)
    lam_s = np.where(zero, 1.0, lam)
    mu_new = muh * cos - 1j * qh / (eps * cs) * sin
    int_mu = np.where(zero, muh * dt, muh * sin / lam_s - 1j * qh / (eps * cs) * (1 - cos) / lam_s)
    rh_new = rh - 1j * kmag * int_mu
    Eh_new = Eh - blk.h_bar * 1j * kmag * int_mu
    dmu = np.where(zero, 0.0, mu_new - muh)
    mh_new = np.stack([mh[i] + khat[i] * dmu for i in range(g.dim)])

    rho = ref.rho_bar + g.ifft(rh_new)
    E = (g.ifft(Eh_new) + ref.rho_bar * blk.e_bar) / eps ** 2
    return NsfState(rho, g.ifft(mh_new), E, state.t, model, state.theta_hint)


def _with(state, rho, m, E, t):
    return NsfState(rho, m, E, t, state.model, state.theta)


def advective_dt(state: NsfState, cfl=1.0):
    umax = np.max(np.abs(state.u))
    return np.inf if umax == 0 else cfl * state.grid.dx / umax


def nsf_step_imex(state: NsfState, dt: float, cfl=1.0) -> NsfState:
    """One Strang step: half linear, Heun remainder, half linear."""
    lim = advective_dt(state, cfl)
    if dt > lim:
        raise ValueError(f"dt={dt:.3g} exceeds the advective limit {lim:.3g}")
    s = _linear_propagate(state, 0.5 * dt)
    r0, m0, E0 = s.rho, s.m, s.E
    _, dm1, dE1 = _remainder(s)
    s1 = _with(s, r0, m0 + dt * dm1, E0 + dt * dE1, s.t)
    _, dm2, dE2 = _remainder(s1)
    s2 = NsfState(r0, m0 + 0.5 * dt * (dm1 + dm2), E0 + 0.5 * dt * (dE1 + dE2),
                  state.t, state.model, s1.theta)
    out = _linear_propagate(s2, 0.5 * dt)
    return NsfState(out.rho, out.m, out.E, state.t + dt, state.model, s1.theta)


# -- entropy and dissipation --------------------------------------------------

def dissipation_integrand(state: NsfState, weight=None):
    """``(eps^a S:grad u - eps^(b-2) q.grad theta/theta) / theta``, times ``weight`` if given.

    This is ``eps^-2`` times the entropy production rate.
    """
    model = state.model
    g, gas, sc, eps = model.grid, model.gas, model.scaling, model.eps
    if not model.dissipative:
        return np.zeros(g.shape)
    theta = state.theta
    G = velocity_gradient(g, state.u)
    sp = stress_power(gas, theta, G)
    _, kappa = transport_coefficients(gas, theta)
    gt = _grad(g, theta, mask=False)
    heat = kappa * np.sum(gt ** 2, axis=0) / theta
    val = (eps ** sc.a_exp * sp + eps ** (sc.b_exp - 2) * heat) / theta
    return val if weight is None else weight * val


def entropy_production(state: NsfState):
    """``(eps^(2+a) S:grad u - eps^b q.grad theta / theta) / theta``; pointwise nonnegative."""
    return state.model.eps ** 2 * dissipation_integrand(state)


def v4_energy(state: NsfState):
    """Kinetic energy plus ``eps^-2`` times the free-energy distance to the reference state."""
    model = state.model
    g, ref = model.grid, model.ref
    kin = 0.5 * np.sum(state.m ** 2, axis=0) / state.rho
    H = relative_entropy_integrand(model.gas, state.rho, state.theta, ref.rho_bar, ref.theta_bar)
    return float(g.integrate(kin + H / model.eps ** 2))


class DissipationTracker:
    """Running time integral of the reference-weighted dissipation, trapezoid rule."""

    def __init__(self, state: NsfState):
        self.e0 = v4_energy(state)
        self.last_t = state.t
        self.last_rate = self._rate(state)
        self.integral = 0.0

    @staticmethod
    def _rate(state):
        w = state.model.ref.theta_bar
        return float(state.grid.integrate(dissipation_integrand(state, w)))

    def update(self, state: NsfState) -> float:
        """Feed the next state and return the current gap ``LHS - RHS``."""
        rate = self._rate(state)
        self.integral += 0.5 * (rate + self.last_rate) * (state.t - self.last_t)
        self.last_t, self.last_rate = state.t, rate
        return v4_energy(state) + self.integral - self.e0


@dataclass
class BalanceReport:
    t: np.ndarray
    lhs: np.ndarray
    rhs: float
    gap: np.ndarray

    @property
    def max_relative_gap(self) -> float:
        return float(np.max(self.gap) / abs(self.rhs)) if self.rhs else float(np.max(np.abs(self.gap)))


def dissipation_balance(history) -> BalanceReport:
    """Total dissipation balance along a uniformly sampled trajectory."""
    if not history:
        raise ValueError("empty history")
    tr = DissipationTracker(history[0])
    lhs = [tr.e0]
    for s in history[1:]:
        lhs.append(tr.update(s) + tr.e0)
    lhs = np.array(lhs)
    return BalanceReport(np.array([s.t for s in history]), lhs, tr.e0, lhs - tr.e0)

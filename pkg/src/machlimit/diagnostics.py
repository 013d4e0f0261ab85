"""Relative entropy, uniform bounds and convergence metrics for NSF runs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acoustic import AcousticState, recombine_RT
from .euler import EulerBoussinesqState, advection_term
from .fields import Grid, spectral_calculus
from .nsf import (
    NsfState,
    ScalingParams,
    dissipation_integrand,
    stress_power,
    velocity_gradient,
    viscous_stress,
)
from .thermo import (
    ReferenceState,
    eos_derivatives,
    eval_eos,
    relative_entropy_integrand,
    transport_coefficients,
)

__all__ = [
    "DiagnosticsReport",
    "TestFunctionError",
    "relative_entropy",
    "ess_res_split",
    "uniform_bounds_report",
    "convergence_metrics",
    "disk_mask",
    "TestTrio",
    "build_test_trio",
    "R1Tracker",
    "r1_residual",
]


class TestFunctionError(ValueError):
    """Test density or temperature is not positive."""


@dataclass
class DiagnosticsReport:
    t: float
    rel_entropy: float
    ess_res_masks: tuple
    bounds: dict = field(default_factory=dict)
    conv: dict = field(default_factory=dict)
    r1_residual: float = 0.0


def _integrand(nsf: NsfState, r, Theta, U):
    eps = nsf.model.eps
    kin = 0.5 * nsf.rho * np.sum((nsf.u - U) ** 2, axis=0)
    H = relative_entropy_integrand(nsf.model.gas, nsf.rho, nsf.theta, r, Theta)
    return kin + H / eps ** 2


def relative_entropy(nsf: NsfState, r, Theta, U) -> float:
    """Kinetic distance plus ``eps^-2`` times the free-energy distance, integrated."""
    g = nsf.grid
    r = np.broadcast_to(r, g.shape)
    Theta = np.broadcast_to(Theta, g.shape)
    U = np.broadcast_to(U, (g.dim,) + g.shape)
    return float(g.integrate(_integrand(nsf, r, Theta, U)))


def ess_res_split(nsf: NsfState, ref: ReferenceState):
    rb, tb = ref.rho_bar, ref.theta_bar
    theta = nsf.theta
    ess = (nsf.rho > rb / 2) & (nsf.rho < 2 * rb) & (theta > tb / 2) & (theta < 2 * tb)
    return ess, ~ess


def disk_mask(grid: Grid, radius: float, center=None):
    c = np.full(grid.dim, grid.L / 2) if center is None else np.asarray(center, dtype=float)
    r2 = sum((x - ci) ** 2 for x, ci in zip(grid.coords, c))
    return r2 <= radius ** 2


def _lq(grid, f, q, mask=None):
    f = np.abs(f) ** q
    if mask is not None:
        f = np.where(mask, f, 0.0)
    return float(grid.integrate(f)) ** (1.0 / q)


def _snapshot_bounds(nsf: NsfState, ref: ReferenceState):
    g, eps = nsf.grid, nsf.model.eps
    ess, res = ess_res_split(nsf, ref)
    theta = nsf.theta
    out = {
        "b3_sqrt_rho_u": g.l2_norm(np.sqrt(nsf.rho) * nsf.u),
        "b4_rho_ess": g.l2_norm(np.where(ess, (nsf.rho - ref.rho_bar) / eps, 0.0)),
        "b4_theta_ess": g.l2_norm(np.where(ess, (theta - ref.theta_bar) / eps, 0.0)),
        "b5_res": float(g.integrate(np.where(res, nsf.rho ** (5.0 / 3.0) + theta ** 4 + 1.0, 0.0))),
    }
    return out


def _h1_sq(g, f):
    grad = spectral_calculus(g, f, "grad")
    return float(g.integrate(f ** 2) + g.integrate(np.sum(grad ** 2, axis=0)))


def _dissipative_rates(nsf: NsfState, scaling: ScalingParams, ref: ReferenceState):
    g, eps = nsf.grid, scaling.eps
    u = nsf.u
    b6 = eps ** scaling.a_exp * sum(_h1_sq(g, u[i]) for i in range(g.dim))
    w = eps ** (scaling.b_exp - 2)
    th = nsf.theta
    b7t = w * _h1_sq(g, th - ref.theta_bar)
    b7l = w * _h1_sq(g, np.log(th) - np.log(ref.theta_bar))
    return b6, b7t, b7l


def uniform_bounds_report(history, scaling: ScalingParams, ref: ReferenceState | None = None) -> dict:
    """Norms that stay bounded independently of ``eps``.

    Sup-in-time quantities are maxima over the samples; the time-integrated
    ``W^{1,2}`` norms use the trapezoid rule over the sample times. The
    residual-set integral is reported raw and divided by ``eps^2``.
    """
    if not history:
        raise ValueError("empty history")
    ref = ref or history[0].model.ref
    sup = {}
    rates = []
    for s in history:
        for k, v in _snapshot_bounds(s, ref).items():
            sup[k] = max(sup.get(k, 0.0), v)
        rates.append(_dissipative_rates(s, scaling, ref))
    out = dict(sup)
    out["b4"] = sup["b4_rho_ess"] + sup["b4_theta_ess"]
    out["b5_res_over_eps2"] = sup["b5_res"] / scaling.eps ** 2
    t = np.array([s.t for s in history])
    rates = np.array(rates)
    if len(t) > 1:
        ints = np.trapezoid(rates, t, axis=0)
    else:
        ints = np.zeros(3)
    out["b6"] = float(np.sqrt(ints[0]))
    out["b7_theta"] = float(np.sqrt(ints[1]))
    out["b7_log_theta"] = float(np.sqrt(ints[2]))
    out["b7"] = out["b7_theta"] + out["b7_log_theta"]
    return out


def convergence_metrics(nsf: NsfState, euler: EulerBoussinesqState, ref: ReferenceState,
                        scaling: ScalingParams, K) -> dict:
    """Distances between the NSF state and the incompressible limit.

    ``m3`` is measured on the whole box through the essential/residual
    split; ``m4`` and ``m5`` on the subdomain mask ``K``.
    """
    g = nsf.grid
    if abs(nsf.t - euler.t) > 1e-9 * max(1.0, abs(nsf.t)):
        raise ValueError(f"time mismatch: nsf t={nsf.t}, limit t={euler.t}")
    if euler.v.shape != nsf.m.shape:
        raise ValueError("grid mismatch between NSF and limit states")
    K = np.broadcast_to(np.asarray(K, dtype=bool), g.shape)
    eps = scaling.eps
    ess, res = ess_res_split(nsf, ref)
    d = nsf.rho - ref.rho_bar
    m3 = _lq(g, np.where(ess, d, 0.0), 2) + _lq(g, np.where(res, d, 0.0), 5.0 / 3.0)
    diff = np.sqrt(nsf.rho) * nsf.u - np.sqrt(ref.rho_bar) * euler.v
    m4 = _lq(g, np.sqrt(np.sum(diff ** 2, axis=0)), 2, K)
    dT = (nsf.theta - ref.theta_bar) / eps - euler.T
    return {
        "m3": m3,
        "m3_over_eps": m3 / eps,
        "m4": m4,
        "m5_q1": _lq(g, dT, 1, K),
        "m5_q15": _lq(g, dT, 1.5, K),
    }


# -- relative entropy inequality ----------------------------------------------

@dataclass
class TestTrio:
    """Test functions and their time derivatives at one instant."""

    r: np.ndarray
    Theta: np.ndarray
    U: np.ndarray
    dr_dt: np.ndarray
    dTheta_dt: np.ndarray
    dU_dt: np.ndarray


def build_test_trio(grid: Grid, acoustic: AcousticState, W, euler: EulerBoussinesqState) -> TestTrio:
    """``r = rho_bar + eps R``, ``Theta = theta_bar + eps T``, ``U = v + grad Phi``.

    Time derivatives follow from the equations each component solves.
    """
    ref, eps = acoustic.ref, acoustic.eps
    R, T = recombine_RT(acoustic.Z, W, ref)
    r = ref.rho_bar + eps * R
    Theta = ref.theta_bar + eps * T
    if np.any(r <= 0) or np.any(Theta <= 0):
        raise TestFunctionError("test density/temperature not positive; reduce eps or amplitude")
    gphi = acoustic.grad_phi()
    U = euler.v + gphi
    dZ = -ref.omega * acoustic.lap_phi() / eps
    dW = -spectral_calculus(grid, W * U, "div")
    dR, dT = recombine_RT(dZ, dW, ref)
    dv = -advection_term(grid, euler.v) - spectral_calculus(grid, euler.Pi, "grad")
    dU = dv - spectral_calculus(grid, acoustic.Z, "grad") / eps
    return TestTrio(r, Theta, U, eps * dR, eps * dT, dU)


def _r1_terms(nsf: NsfState, trio: TestTrio):
    """Spatial integrals of the four right-hand-side groups and the LHS dissipation."""
    model = nsf.model
    g, gas, sc, eps = model.grid, model.gas, model.scaling, model.eps
    rho, theta, u = nsf.rho, nsf.theta, nsf.u
    r, Th, U = trio.r, trio.Theta, trio.U
    eps2 = eps * eps

    gradU = velocity_gradient(g, U)  # gradU[i, j] = d_j U_i
    conv = np.einsum("j...,ij...->i...", u, gradU)
    i1 = rho * np.sum((trio.dU_dt + conv) * (U - u), axis=0)
    if model.dissipative:
        S = viscous_stress(gas, theta, velocity_gradient(g, u))
        i1 = i1 + eps ** sc.a_exp * np.sum(S * gradU, axis=(0, 1))

    p_rT = eval_eos(gas, r, Th).p
    p = eval_eos(gas, rho, theta).p
    grad_p_rT = spectral_calculus(g, p_rT, "grad")
    divU = sum(gradU[i, i] for i in range(g.dim))
    i2 = ((p_rT - p) * divU + rho / r * np.sum((U - u) * grad_p_rT, axis=0)) / eps2

    s = eval_eos(gas, rho, theta).s
    s_rT = eval_eos(gas, r, Th).s
    grad_Th = spectral_calculus(g, Th, "grad")
    i3 = rho * (s - s_rT) * (trio.dTheta_dt + np.sum(u * grad_Th, axis=0))
    if model.dissipative:
        _, kappa = transport_coefficients(gas, theta)
        q = -kappa * spectral_calculus(g, theta, "grad")
        i3 = i3 + eps ** sc.b_exp * np.sum(q * grad_Th, axis=0) / theta
    i3 = -i3 / eps2

    d = eos_derivatives(gas, r, Th)
    dp_dt = d.p_rho * trio.dr_dt + d.p_theta * trio.dTheta_dt
    i4 = (r - rho) / r * (dp_dt + np.sum(U * grad_p_rT, axis=0)) / eps2

    terms = np.array([g.integrate(i1), g.integrate(i2), g.integrate(i3), g.integrate(i4)], dtype=float)
    diss = float(g.integrate(dissipation_integrand(nsf, Th)))
    return terms, diss


class R1Tracker:
    """Running signed gap ``RHS - LHS`` of the relative entropy inequality.

    Feed one sample per call, in time order; time integrals use the
    trapezoid rule between consecutive samples.
    """

    def __init__(self):
        self.t = []
        self.gap = []
        self.scale = []
        self._last = None
        self._rhs = 0.0
        self._diss = 0.0
        self._scale = 0.0
        self._E0 = None

    def update(self, nsf: NsfState, acoustic: AcousticState, W, euler: EulerBoussinesqState) -> float:
        trio = build_test_trio(nsf.grid, acoustic, W, euler)
        terms, diss = _r1_terms(nsf, trio)
        E = relative_entropy(nsf, trio.r, trio.Theta, trio.U)
        if self._last is None:
            self._E0 = E
        else:
            t0, terms0, diss0 = self._last
            h = nsf.t - t0
            self._rhs += 0.5 * h * float(np.sum(terms + terms0))
            self._diss += 0.5 * h * (diss + diss0)
            self._scale += 0.5 * h * float(np.sum(np.abs(terms) + np.abs(terms0)))
        self._last = (nsf.t, terms, diss)
        g = self._rhs - (E - self._E0 + self._diss)
        self.t.append(nsf.t)
        self.gap.append(g)
        self.scale.append(self._scale)
        self.rel_entropy = E
        return g

    def normalized(self):
        """Gap divided by the accumulated RHS scale (0 where the scale is 0)."""
        g = np.array(self.gap)
        s = np.array(self.scale)
        return np.where(s > 0, g / np.where(s > 0, s, 1.0), 0.0)


def r1_residual(history, acoustic_hist, transport_hist, euler_hist, tau=None) -> float:
    """Signed gap at ``tau`` (default: last sample) from aligned trajectories.

    ``transport_hist`` items may be arrays or objects with a ``W`` attribute.
    """
    n = len(history)
    if not (len(acoustic_hist) == len(transport_hist) == len(euler_hist) == n):
        raise ValueError("trajectories must share sample times")
    tr = R1Tracker()
    g = 0.0
    for s, a, w, e in zip(history, acoustic_hist, transport_hist, euler_hist):
        if tau is not None and s.t > tau + 1e-12:
            break
        if abs(s.t - a.t) > 1e-9 or abs(s.t - e.t) > 1e-9:
            raise ValueError(f"sample time mismatch at t={s.t}")
        g = tr.update(s, a, getattr(w, "W", w), e)
    return g

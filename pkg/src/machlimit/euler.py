"""Incompressible Euler flow with a passively transported temperature.

    d_t v + v . grad v + grad Pi = 0,   div v = 0,   d_t T + v . grad T = 0

Velocity: classical RK4 with the Leray projection applied to each stage
tendency; the quadratic term is 2/3-dealiased. Temperature: semi-Lagrangian
with the step-midpoint velocity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Grid, helmholtz_split, inverse_laplacian_hat, spectral_calculus
from .transport import limit_temperature_step

__all__ = ["EulerBoussinesqState", "euler_step", "euler_boussinesq_run", "advection_term", "pressure"]


@dataclass(frozen=True)
class EulerBoussinesqState:
    v: np.ndarray
    T: np.ndarray
    Pi: np.ndarray
    t: float = 0.0


def advection_term(grid: Grid, v):
    """``(v . grad) v``, dealiased."""
    vh = grid.fft(v)
    d = grid.dim
    out = []
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc = acc + v[j] * grid.ifft(1j * grid.k_odd[j] * vh[i])
        out.append(grid.ifft(grid.fft(acc) * grid.dealias))
    return np.stack(out)


def pressure(grid: Grid, v, adv=None):
    """Solve ``Lap Pi = -div(v . grad v)`` with zero mean."""
    adv = advection_term(grid, v) if adv is None else adv
    divh = grid.fft(-spectral_calculus(grid, adv, "div"))
    return grid.ifft(inverse_laplacian_hat(grid, divh))


def _tendency(grid, v):
    return -helmholtz_split(grid, advection_term(grid, v))[0]


def _check_cfl(grid, v, dt, cfl):
    vmax = np.max(np.abs(v))
    if vmax * dt / grid.dx > cfl:
        raise ValueError(f"dt={dt:.3g} violates the CFL limit (|v|max={vmax:.3g})")


def euler_step(grid: Grid, state: EulerBoussinesqState, dt: float, cfl=1.0) -> EulerBoussinesqState:
    v = state.v
    _check_cfl(grid, v, dt, cfl)
    k1 = _tendency(grid, v)
    k2 = _tendency(grid, v + 0.5 * dt * k1)
    k3 = _tendency(grid, v + 0.5 * dt * k2)
    k4 = _tendency(grid, v + dt * k3)
    v_new = helmholtz_split(grid, v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))[0]
    if np.any(state.T):
        T_new = limit_temperature_step(grid, state.T, 0.5 * (v + v_new), dt, cfl_max=cfl)
    else:
        T_new = state.T
    return EulerBoussinesqState(v_new, T_new, pressure(grid, v_new), state.t + dt)


def initial_state(grid: Grid, v0, T0):
    """Project ``v0`` onto solenoidal fields and attach the pressure."""
    v = helmholtz_split(grid, grid.check_vector(v0, "v0"))[0]
    return EulerBoussinesqState(v, grid.check_scalar(T0, "T0").copy(), pressure(grid, v), 0.0)


def euler_boussinesq_run(grid: Grid, v0, T0, t_final: float, dt: float, sample_times=None):
    """Trajectory sampled at ``sample_times`` (default: start and end)."""
    state = initial_state(grid, v0, T0)
    steps = int(round(t_final / dt))
    if abs(steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError("t_final must be a multiple of dt")
    want = sorted(set([0.0, float(t_final)] if sample_times is None else map(float, sample_times)))
    out = []
    tol = 0.5 * dt
    for k in range(steps + 1):
        while want and abs(want[0] - state.t) <= tol:
            out.append(state)
            want.pop(0)
        if k < steps:
            state = euler_step(grid, state, dt)
    return out

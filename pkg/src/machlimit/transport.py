"""Transport of ``W = delta T - beta R`` and of the limit temperature.

    dW/dt + U . grad W + W div U = 0

Both equations are advanced with a semi-Lagrangian scheme: departure
points from a two-pass midpoint rule, cubic B-spline interpolation on the
periodic grid, and the stretching factor ``exp(-dt div U)`` sampled at the
characteristic midpoint.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .fields import Grid, spectral_calculus
from .thermo import ReferenceState

__all__ = [
    "TransportState",
    "StepSizeError",
    "transport_step",
    "l2_balance_residual",
    "adjusted_initial_temperature",
    "limit_temperature_step",
    "courant_number",
    "write_transport_csv",
]


class StepSizeError(ValueError):
    """Time step exceeds the advective stability/accuracy limit."""


@dataclass(frozen=True)
class TransportState:
    W: np.ndarray
    t: float = 0.0


def courant_number(grid: Grid, U, dt) -> float:
    speed = np.max(np.abs(U)) if np.size(U) else 0.0
    return float(speed * dt / grid.dx)


def _interp(grid: Grid, f, idx):
    """Cubic periodic interpolation of ``f`` at fractional index coordinates."""
    return map_coordinates(f, idx, order=3, mode="grid-wrap")


def _index_coords(grid: Grid):
    return np.stack(np.meshgrid(*([np.arange(grid.n, dtype=float)] * grid.dim), indexing="ij"))


def _characteristics(grid: Grid, U, dt, iterations=2):
    """Index coordinates of the departure point and the path midpoint."""
    base = _index_coords(grid)
    disp = U * (dt / grid.dx)  # displacement in index units
    mid = base - 0.5 * disp
    for _ in range(iterations):
        Um = np.stack([_interp(grid, disp[i], mid) for i in range(grid.dim)])
        mid = base - 0.5 * Um
    return base - Um, mid


def _advect(grid, f, U, dt, divU=None, cfl_max=1.0):
    cn = courant_number(grid, U, dt)
    if cn > cfl_max:
        raise StepSizeError(f"Courant number {cn:.3g} exceeds {cfl_max}")
    if not np.any(U):
        if divU is None or not np.any(divU):
            return f.copy()
    foot, mid = _characteristics(grid, U, dt)
    out = _interp(grid, f, foot)
    if divU is not None:
        out = out * np.exp(-dt * _interp(grid, divU, mid))
    return out


def transport_step(grid: Grid, state: TransportState, U, divU, dt, cfl_max=1.0) -> TransportState:
    """Advance ``W`` by ``dt``.

    ``U`` and ``divU`` should be the fields at the half step ``t + dt/2``;
    the update is then second order in time.
    """
    U = grid.check_vector(U, "U")
    divU = grid.check_scalar(divU, "divU")
    W = _advect(grid, state.W, U, dt, divU, cfl_max)
    return TransportState(W, state.t + dt)


def l2_balance_residual(grid: Grid, history, lap_phi_history) -> float:
    """Mismatch in ``[int W^2]_0^tau = -int int Lap(Phi) W^2``, relative to ``|W0|^2``.

    ``history`` is a list of TransportState at uniform times and
    ``lap_phi_history`` the matching ``Lap(Phi)`` (= div U) fields.
    """
    if len(history) < 3:
        raise ValueError("need at least 3 samples")
    if len(lap_phi_history) != len(history):
        raise ValueError("history lengths differ")
    t = np.array([s.t for s in history])
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-8, atol=1e-14):
        raise ValueError("samples must be uniform in time")
    norm0 = float(grid.integrate(history[0].W ** 2))
    normT = float(grid.integrate(history[-1].W ** 2))
    if norm0 == 0 and normT == 0:
        return 0.0
    integrand = np.array([grid.integrate(lp * s.W ** 2) for s, lp in zip(history, lap_phi_history)])
    rhs = -np.trapezoid(integrand, t)
    return abs((normT - norm0) - rhs) / norm0


def adjusted_initial_temperature(rho1, theta1, ref: ReferenceState):
    """``delta theta1 - beta rho1``: the temperature datum that survives the acoustic filtering."""
    return ref.delta * np.asarray(theta1) - ref.beta * np.asarray(rho1)


def limit_temperature_step(grid: Grid, T, v, dt, div_tol=1e-8, cfl_max=1.0):
    """Advect ``T`` by a solenoidal velocity ``v`` (half-step value for 2nd order)."""
    v = grid.check_vector(v, "v")
    T = grid.check_scalar(T, "T")
    div = spectral_calculus(grid, v, "div")
    scale = np.max(np.abs(v)) * np.max(grid.kmag) + 1e-300
    if np.max(np.abs(div)) > div_tol * scale:
        raise ValueError(f"velocity is not solenoidal: max|div v| = {np.max(np.abs(div)):.3g}")
    return _advect(grid, T, v, dt, None, cfl_max)


def write_transport_csv(path, rows):
    """Rows of ``(t, l2_W, linf_W, a3_residual)``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "l2_W", "linf_W", "a3_residual"])
        w.writerows(rows)

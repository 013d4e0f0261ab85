"""Constitutive relations for a monatomic gas with radiation.

Pressure, internal energy and entropy are generated by a single structural
function ``P`` of the variable ``Z = rho / theta**1.5``::

    p(rho, theta) = theta**2.5 * P(Z) + a/3 * theta**4
    e(rho, theta) = 1.5 * theta**2.5 * P(Z) / rho + a * theta**4 / rho
    s(rho, theta) = S(Z) + 4a/3 * theta**3 / rho

with ``S'(Z) = -1.5 * (5/3 P(Z) - P'(Z) Z) / Z**2`` and ``S(inf) = 0``.

The default ``FN_DEGENERATE`` family integrates the choice
``5/3 P - P' Z = (2/3) Z / (1 + Z**(2/3))`` in closed form, so every
derivative used downstream is analytic.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "ThermoDomainError",
    "ThermodynamicInstabilityError",
    "GasVariant",
    "GasModel",
    "ReferenceState",
    "Structural",
    "EosValues",
    "EosDerivatives",
    "HypothesisCheck",
    "HypothesisReport",
    "eval_structural",
    "eval_eos",
    "eos_derivatives",
    "ballistic_free_energy",
    "relative_entropy_integrand",
    "relative_entropy_hessian",
    "linearization_coefficients",
    "transport_coefficients",
    "temperature_from_energy",
    "verify_hypotheses",
    "coercivity_constant",
]


class ThermoDomainError(ValueError):
    """Raised when a thermodynamic function is evaluated outside its domain."""


class ThermodynamicInstabilityError(ValueError):
    """Raised when the reference state has nonpositive specific heat."""


class GasVariant(str, enum.Enum):
    FN_DEGENERATE = "fn_degenerate"
    CUSTOM = "custom"


@dataclass(frozen=True)
class GasModel:
    """Immutable gas description.

    Parameters
    ----------
    p_infty : float
        Limit of ``P(Z) / Z**(5/3)`` as ``Z -> inf``.
    a_rad : float
        Radiation constant ``a``; zero switches radiation off.
    mu0, kappa0 : float
        Prefactors of the default transport laws ``mu0 (1 + theta)`` and
        ``kappa0 (1 + theta**3)``.
    variant : GasVariant
        ``CUSTOM`` requires the callables ``P``, ``dP`` and ``S``.
    mu, kappa : callable, optional
        Replace the default transport laws (used to build counterexamples).
    """

    p_infty: float = 1.0
    a_rad: float = 0.1
    mu0: float = 1.0
    kappa0: float = 1.0
    variant: GasVariant = GasVariant.FN_DEGENERATE
    P: Callable | None = field(default=None, compare=False, repr=False)
    dP: Callable | None = field(default=None, compare=False, repr=False)
    S: Callable | None = field(default=None, compare=False, repr=False)
    mu: Callable | None = field(default=None, compare=False, repr=False)
    kappa: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variant", GasVariant(self.variant))
        if self.p_infty <= 0:
            raise ValueError("p_infty must be positive")
        if self.a_rad < 0:
            raise ValueError("a_rad must be nonnegative")
        if self.mu0 < 0 or self.kappa0 < 0:
            raise ValueError("transport prefactors must be nonnegative")
        if self.variant is GasVariant.CUSTOM and None in (self.P, self.dP, self.S):
            raise ValueError("custom gas needs P, dP and S callables")

    @classmethod
    def custom(cls, P, dP, S, p_infty=1.0, **kw) -> "GasModel":
        return cls(p_infty=p_infty, variant=GasVariant.CUSTOM, P=P, dP=dP, S=S, **kw)

    def to_config(self) -> dict[str, str]:
        if self.variant is GasVariant.CUSTOM:
            raise ValueError("custom gas models cannot be serialized")
        return {
            "gas.p_infty": repr(float(self.p_infty)),
            "gas.a_rad": repr(float(self.a_rad)),
            "gas.mu0": repr(float(self.mu0)),
            "gas.kappa0": repr(float(self.kappa0)),
            "gas.variant": self.variant.value,
        }

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "GasModel":
        variant = GasVariant(cfg.get("gas.variant", GasVariant.FN_DEGENERATE.value))
        if variant is GasVariant.CUSTOM:
            raise ValueError("custom gas models cannot be read from a config file")
        return cls(
            p_infty=float(cfg.get("gas.p_infty", 1.0)),
            a_rad=float(cfg.get("gas.a_rad", 0.1)),
            mu0=float(cfg.get("gas.mu0", 1.0)),
            kappa0=float(cfg.get("gas.kappa0", 1.0)),
            variant=variant,
        )


@dataclass(frozen=True)
class ReferenceState:
    rho_bar: float
    theta_bar: float
    alpha: float
    beta: float
    delta: float
    omega: float

    @property
    def sound_speed(self) -> float:
        return float(np.sqrt(self.omega))

    @property
    def det(self) -> float:
        """``beta**2 + alpha*delta``, the determinant of the (Z, W) change of variables."""
        return self.beta ** 2 + self.alpha * self.delta


class Structural(NamedTuple):
    P: np.ndarray
    Pprime: np.ndarray
    S: np.ndarray


class EosValues(NamedTuple):
    p: np.ndarray
    e: np.ndarray
    s: np.ndarray


class EosDerivatives(NamedTuple):
    p_rho: np.ndarray
    p_theta: np.ndarray
    e_rho: np.ndarray
    e_theta: np.ndarray
    s_rho: np.ndarray
    s_theta: np.ndarray


# -- structural function ------------------------------------------------------

def _fn_parts(gas: GasModel, Z):
    """P, P', h = 5/3 P - P' Z and S for the closed-form family (Z > 0)."""
    z23 = Z ** (2.0 / 3.0)
    z53 = Z * z23
    lg = np.log1p(1.0 / z23)
    P = gas.p_infty * z53 + Z - z53 * lg
    dP = 5.0 / 3.0 * gas.p_infty * z23 + 1.0 - 5.0 / 3.0 * z23 * lg + 2.0 / 3.0 * z23 / (1.0 + z23)
    h = 2.0 / 3.0 * Z / (1.0 + z23)
    S = 1.5 * lg
    return P, dP, h, S


def _parts(gas: GasModel, Z):
    if gas.variant is GasVariant.FN_DEGENERATE:
        return _fn_parts(gas, Z)
    P = np.asarray(gas.P(Z), dtype=float)
    dP = np.asarray(gas.dP(Z), dtype=float)
    return P, dP, 5.0 / 3.0 * P - dP * Z, np.asarray(gas.S(Z), dtype=float)


def eval_structural(gas: GasModel, Z) -> Structural:
    """Evaluate ``P``, ``P'`` and ``S`` at ``Z >= 0``.

    At ``Z = 0`` the entropy has a pole (as for an ideal gas at vacuum); it
    is returned as ``+inf`` while ``P = 0`` and ``P' = 1``.
    """
    Z = np.asarray(Z, dtype=float)
    if np.any(Z < 0) or not np.all(np.isfinite(Z)):
        raise ThermoDomainError("structural function needs finite Z >= 0")
    zero = Z == 0
    Zs = np.where(zero, 1.0, Z)
    with np.errstate(divide="ignore", invalid="ignore"):
        P, dP, _, S = _parts(gas, Zs)
    if gas.variant is GasVariant.FN_DEGENERATE:
        P = np.where(zero, 0.0, P)
        dP = np.where(zero, 1.0, dP)
    elif np.any(zero):
        with np.errstate(divide="ignore", invalid="ignore"):
            P0 = np.asarray(gas.P(Z), dtype=float)
            dP0 = np.asarray(gas.dP(Z), dtype=float)
        P = np.where(zero, P0, P)
        dP = np.where(zero, dP0, dP)
    S = np.where(zero, np.inf, S)
    return Structural(P[()], dP[()], S[()])


def _check_state(rho, theta):
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if not (np.all(rho > 0) and np.all(theta > 0)):
        raise ThermoDomainError("density and temperature must be positive")
    return rho, theta


# -- equation of state --------------------------------------------------------

def eval_eos(gas: GasModel, rho, theta) -> EosValues:
    """Pressure, specific internal energy and specific entropy."""
    rho, theta = _check_state(rho, theta)
    a = gas.a_rad
    t32 = theta ** 1.5
    Z = rho / t32
    P, _, _, S = _parts(gas, Z)
    t4 = theta ** 4
    p = theta * t32 * P + a / 3.0 * t4
    e = 1.5 * theta * t32 * P / rho + a * t4 / rho
    s = S + 4.0 * a / 3.0 * theta ** 3 / rho
    return EosValues(p, e, s)


def eos_derivatives(gas: GasModel, rho, theta) -> EosDerivatives:
    """Analytic first derivatives of ``p``, ``e`` and ``s``."""
    rho, theta = _check_state(rho, theta)
    a = gas.a_rad
    t32 = theta ** 1.5
    Z = rho / t32
    P, dP, h, _ = _parts(gas, Z)
    dS = -1.5 * h / Z ** 2
    t3 = theta ** 3
    p_rho = theta * dP
    p_theta = 1.5 * t32 * h + 4.0 * a / 3.0 * t3
    e_rho = -1.5 * theta * t32 * (P - dP * Z) / rho ** 2 - a * theta * t3 / rho ** 2
    e_theta = 2.25 * h / Z + 4.0 * a * t3 / rho
    s_rho = dS / t32 - 4.0 * a / 3.0 * t3 / rho ** 2
    s_theta = -1.5 * dS * Z / theta + 4.0 * a * theta ** 2 / rho
    return EosDerivatives(p_rho, p_theta, e_rho, e_theta, s_rho, s_theta)


def ballistic_free_energy(gas: GasModel, rho, theta, Theta):
    """``rho * (e - Theta * s)``."""
    if np.any(np.asarray(Theta) <= 0):
        raise ThermoDomainError("Theta must be positive")
    _, e, s = eval_eos(gas, rho, theta)
    return np.asarray(rho) * (e - Theta * s)


def _dH_drho(gas, r, Theta):
    # d/drho [rho (e - Theta s)] at theta = Theta
    _, e, s = eval_eos(gas, r, Theta)
    d = eos_derivatives(gas, r, Theta)
    return e + r * d.e_rho - Theta * (s + r * d.s_rho)


def relative_entropy_integrand(gas: GasModel, rho, theta, r, Theta):
    """Bregman-type distance of the ballistic free energy from ``(r, Theta)``.

    ``H_Theta(rho, theta) - dH_Theta/drho(r, Theta) (rho - r) - H_Theta(r, Theta)``,
    nonnegative for a thermodynamically stable gas.
    """
    rho, theta = _check_state(rho, theta)
    r, Theta = _check_state(r, Theta)
    H = ballistic_free_energy(gas, rho, theta, Theta)
    H_ref = ballistic_free_energy(gas, r, Theta, Theta)
    return H - _dH_drho(gas, r, Theta) * (rho - r) - H_ref


def relative_entropy_hessian(gas: GasModel, r, Theta) -> np.ndarray:
    """Hessian of the integrand in ``(rho, theta)`` at the coincidence point."""
    d = eos_derivatives(gas, r, Theta)
    return np.array([[d.p_rho / r, 0.0], [0.0, r * d.s_theta]], dtype=float)


def linearization_coefficients(gas: GasModel, rho_bar: float = 1.0, theta_bar: float = 1.0) -> ReferenceState:
    """Coefficients of the acoustic/transport linearization about ``(rho_bar, theta_bar)``."""
    rho_bar = float(rho_bar)
    theta_bar = float(theta_bar)
    d = eos_derivatives(gas, rho_bar, theta_bar)
    alpha = float(d.p_rho) / rho_bar
    beta = float(d.p_theta) / rho_bar
    delta = rho_bar * float(d.s_theta)
    if not delta > 0:
        raise ThermodynamicInstabilityError(f"ds/dtheta <= 0 at ({rho_bar}, {theta_bar})")
    if not alpha > 0:
        raise ThermodynamicInstabilityError(f"dp/drho <= 0 at ({rho_bar}, {theta_bar})")
    omega = rho_bar * (alpha + beta ** 2 / delta)
    return ReferenceState(rho_bar, theta_bar, alpha, beta, delta, omega)


def transport_coefficients(gas: GasModel, theta):
    """Viscosity and heat conductivity ``(mu, kappa)`` at temperature ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ThermoDomainError("temperature must be nonnegative")
    mu = gas.mu(theta) if gas.mu is not None else gas.mu0 * (1.0 + theta)
    kappa = gas.kappa(theta) if gas.kappa is not None else gas.kappa0 * (1.0 + theta ** 3)
    return mu, kappa


def temperature_from_energy(gas: GasModel, rho, e, theta_guess=None, theta_bar=1.0,
                            rtol=1e-14, maxiter=100):
    """Invert ``e(rho, theta) = e`` for ``theta``.

    Newton iteration safeguarded by bisection inside a bracket that starts
    at ``[theta_bar/10, 10 theta_bar]`` and is widened until it encloses the
    root. ``e`` is strictly increasing in ``theta`` so the root is unique.
    """
    rho = np.asarray(rho, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(rho <= 0):
        raise ThermoDomainError("density must be positive")
    lo = np.full(np.broadcast(rho, e).shape, theta_bar / 10.0)
    hi = np.full_like(lo, theta_bar * 10.0)
    for _ in range(30):
        f_lo = eval_eos(gas, rho, lo).e - e
        bad = f_lo > 0
        if not np.any(bad):
            break
        lo = np.where(bad, lo / 10.0, lo)
    else:
        # e(rho, theta) tends to the degenerate ground-state energy as theta -> 0
        raise ThermoDomainError("energy below the attainable range; no temperature root")
    for _ in range(30):
        f_hi = eval_eos(gas, rho, hi).e - e
        bad = f_hi < 0
        if not np.any(bad):
            break
        hi = np.where(bad, hi * 10.0, hi)
    else:
        raise ThermoDomainError("energy too large; temperature root not bracketed")

    if theta_guess is None:
        theta = np.sqrt(lo * hi)
    else:
        theta = np.clip(np.broadcast_to(theta_guess, lo.shape), lo, hi).astype(float)
    for _ in range(maxiter):
        f = eval_eos(gas, rho, theta).e - e
        lo = np.where(f < 0, theta, lo)
        hi = np.where(f > 0, theta, hi)
        step = f / eos_derivatives(gas, rho, theta).e_theta
        new = theta - step
        outside = (new <= lo) | (new >= hi) | ~np.isfinite(new)
        new = np.where(outside, 0.5 * (lo + hi), new)
        done = np.abs(new - theta) <= rtol * np.abs(theta)
        theta = new
        if np.all(done):
            return theta
    raise ThermoDomainError("temperature recovery did not converge")


# -- hypothesis checks --------------------------------------------------------

@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass
class HypothesisReport:
    checks: dict[str, HypothesisCheck]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} {c.detail}".rstrip()
                for c in self.checks.values()]


def verify_hypotheses(gas: GasModel, scaling=None, n_z: int = 512, n_theta: int = 512) -> HypothesisReport:
    """Check the structural and transport hypotheses on sampled grids.

    ``Z`` is sampled on 512 log-spaced points in ``[1e-6, 1e6]`` and the
    temperature on ``[1e-3, 1e3]``. When ``scaling`` is given, the exponent
    constraint ``b > 0, 0 < a < 10/3`` is checked as well.
    """
    Z = np.logspace(-6, 6, n_z)
    theta = np.logspace(-3, 3, n_theta)
    checks: dict[str, HypothesisCheck] = {}

    def add(name, passed, value, detail=""):
        checks[name] = HypothesisCheck(name, bool(passed), float(value), detail)

    P0 = eval_structural(gas, 0.0).P
    add("P(0)=0", abs(P0) < 1e-14, abs(P0))

    with np.errstate(all="ignore"):
        P, dP, h, S = _parts(gas, Z)
    finite = np.all(np.isfinite(P)) and np.all(np.isfinite(dP)) and np.all(np.isfinite(S))
    add("finite", finite, float(np.sum(~np.isfinite(P))), "nonfinite samples")

    add("P'>0", np.all(dP > 0) and eval_structural(gas, 0.0).Pprime > 0, np.min(dP), "min P'")

    ratio = P[-1] / Z[-1] ** (5.0 / 3.0)
    rel = abs(ratio - gas.p_infty) / gas.p_infty
    add("P/Z^(5/3)->P_inf", rel < 1e-2, rel, "relative gap at Z=1e6")

    cv = h / Z
    add("specific heat bounds", np.all(cv > 0) and np.all(np.isfinite(cv)), np.max(cv),
        f"sup observed, min {np.min(cv):.3g}")

    # S' = -1.5 h / Z^2 via a centred log-difference
    dz = 1e-5
    Sp = (_parts(gas, Z * np.exp(dz))[3] - _parts(gas, Z * np.exp(-dz))[3]) / (2 * dz * Z)
    target = -1.5 * h / Z ** 2
    ode = np.max(np.abs(Sp - target) / np.maximum(np.abs(target), 1e-300))
    add("S' ODE", ode < 1e-4, ode, "max relative mismatch")

    tail = max(abs(S[-1]), abs(S[-1] - S[-20]))
    add("S(inf)=0", tail < 1e-3, tail, "|S(1e6)| or tail increment")

    mu, kappa = transport_coefficients(gas, theta)
    lip = np.max(np.abs(np.diff(mu) / np.diff(theta)))
    mu_low = np.min(mu / (1.0 + theta))
    add("mu law", mu_low > 0 and np.isfinite(lip), mu_low, f"lower constant, Lipschitz {lip:.3g}")
    k_ratio = kappa / (1.0 + theta ** 3)
    add("kappa law", np.min(k_ratio) > 0 and np.isfinite(np.max(k_ratio)), np.min(k_ratio),
        f"lower constant, upper {np.max(k_ratio):.3g}")

    if scaling is not None:
        ok = scaling.b_exp > 0 and 0 < scaling.a_exp < 10.0 / 3.0
        add("exponents b>0, 0<a<10/3", ok, scaling.a_exp, f"b={scaling.b_exp}")
    return HypothesisReport(checks)


def coercivity_constant(gas: GasModel, K, Theta_ref: float, r_ref: float, samples: int = 81) -> float:
    """Sampled lower bound of integrand / (|rho - r|^2 + |theta - Theta|^2) over ``K``.

    ``K = ((rho_lo, rho_hi), (theta_lo, theta_hi))``.
    """
    (r0, r1), (t0, t1) = K
    if min(r0, t0) <= 0:
        raise ThermoDomainError("K must stay away from rho = 0 and theta = 0")
    if not (r0 <= r_ref <= r1 and t0 <= Theta_ref <= t1):
        raise ThermoDomainError("reference point must lie in K")
    rho, th = np.meshgrid(np.linspace(r0, r1, samples), np.linspace(t0, t1, samples), indexing="ij")
    quad = (rho - r_ref) ** 2 + (th - Theta_ref) ** 2
    keep = quad > 1e-14 * max(r_ref, Theta_ref) ** 2
    val = relative_entropy_integrand(gas, rho[keep], th[keep], r_ref, Theta_ref)
    return float(np.min(val / quad[keep]))

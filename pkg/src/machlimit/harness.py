"""Experiment configuration, single runs, eps-sweeps and rate fitting."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import acoustic as ac
from .diagnostics import R1Tracker, convergence_metrics, disk_mask, uniform_bounds_report
from .euler import euler_step, initial_state
from .fields import Field, Grid, spectral_calculus, write_snapshot
from .nsf import (
    DissipationTracker,
    NsfModel,
    ScalingParams,
    entropy_production,
    make_ill_prepared_data,
    nsf_step_imex,
)
from .thermo import GasModel, linearization_coefficients
from .transport import TransportState, adjusted_initial_temperature, limit_temperature_step, transport_step

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "DataSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "initial_fields",
    "run_single",
    "run_sweep",
    "fit_rate",
    "eta_table",
    "run_acoustic_decay",
    "read_table",
    "write_table",
    "SWEEP_COLUMNS",
]

SWEEP_COLUMNS = ["eps", "sup_rel_entropy", "m3_over_eps", "m4", "m5_q1", "m5_q15",
                 "m5_naive_q1", "r1_gap_min", "r1_gap_min_rel", "status"]
TS_COLUMNS = ["t", "mass", "energy", "min_rho", "min_theta", "entropy_prod_min", "v4_gap"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataSpec:
    """Gaussian bumps about the box center (offsets per axis)."""

    rho_amp: float = 1.0
    rho_width: float = 1.0
    rho_offset: tuple = (1.0, 0.0)
    theta_amp: float = 1.0
    theta_width: float = 1.0
    theta_offset: tuple = (-1.0, 0.0)
    vortex_amp: float = 1.0
    vortex_width: float = 1.0
    grad_amp: float = 0.5
    grad_width: float = 1.0
    noise: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    grid: Grid = Grid(2, 128, 32.0)
    gas: GasModel = GasModel(mu0=0.1, kappa0=0.1)
    rho_bar: float = 1.0
    theta_bar: float = 1.0
    eps: tuple = (0.2, 0.1, 0.05)
    a_exp: float = 1.0
    b_exp: float = 1.0
    eta: float = 0.05
    eta_list: tuple = (0.1, 0.05, 0.025)
    data: DataSpec = DataSpec()
    dt: float = 1e-3
    t_final: float = 0.5
    sample_stride: int = 50
    k_radius: float = 2.5
    output_dir: str = "out"
    decay_width: float = 5.0
    decay_t0: float = 1.0
    decay_t1: float = 20.0
    decay_samples: int = 40

    def __post_init__(self):
        if len(set(self.eps)) != len(self.eps):
            raise ConfigError(f"duplicate eps values: {self.eps}")
        for e in self.eps:
            self.scaling(e)  # parameter constraints
        if self.dt <= 0 or self.t_final < 0:
            raise ConfigError("dt must be positive and t_final nonnegative")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-6:
            raise ConfigError("t_final must be a multiple of dt")
        if self.sample_stride < 1:
            raise ConfigError("sample_stride must be at least 1")

    def scaling(self, eps, eta=None) -> ScalingParams:
        try:
            return ScalingParams(float(eps), self.a_exp, self.b_exp, self.eta if eta is None else eta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def to_dict(self) -> dict[str, str]:
        d = self.data
        out = {}
        out.update(self.grid.to_config())
        out.update(self.gas.to_config())
        out.update({
            "ref.rho_bar": repr(self.rho_bar),
            "ref.theta_bar": repr(self.theta_bar),
            "scaling.eps": ",".join(repr(float(e)) for e in self.eps),
            "scaling.a_exp": repr(self.a_exp),
            "scaling.b_exp": repr(self.b_exp),
            "scaling.eta": repr(self.eta),
            "scaling.eta_list": ",".join(repr(float(e)) for e in self.eta_list),
            "data.rho_amp": repr(d.rho_amp),
            "data.rho_width": repr(d.rho_width),
            "data.rho_offset": ",".join(repr(float(v)) for v in d.rho_offset),
            "data.theta_amp": repr(d.theta_amp),
            "data.theta_width": repr(d.theta_width),
            "data.theta_offset": ",".join(repr(float(v)) for v in d.theta_offset),
            "data.vortex_amp": repr(d.vortex_amp),
            "data.vortex_width": repr(d.vortex_width),
            "data.grad_amp": repr(d.grad_amp),
            "data.grad_width": repr(d.grad_width),
            "data.noise": repr(d.noise),
            "data.seed": str(d.seed),
            "time.dt": repr(self.dt),
            "time.t_final": repr(self.t_final),
            "time.sample_stride": str(self.sample_stride),
            "diag.k_radius": repr(self.k_radius),
            "output.dir": self.output_dir,
            "decay.width": repr(self.decay_width),
            "decay.t0": repr(self.decay_t0),
            "decay.t1": repr(self.decay_t1),
            "decay.samples": str(self.decay_samples),
        })
        return out

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_dict().items())


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


_DATA_KEYS = {
    "rho_amp": float, "rho_width": float, "rho_offset": _floats,
    "theta_amp": float, "theta_width": float, "theta_offset": _floats,
    "vortex_amp": float, "vortex_width": float, "grad_amp": float, "grad_width": float,
    "noise": float, "seed": int,
}

_TOP_KEYS = {
    "ref.rho_bar": ("rho_bar", float),
    "ref.theta_bar": ("theta_bar", float),
    "scaling.eps": ("eps", _floats),
    "scaling.a_exp": ("a_exp", float),
    "scaling.b_exp": ("b_exp", float),
    "scaling.eta": ("eta", float),
    "scaling.eta_list": ("eta_list", _floats),
    "time.dt": ("dt", float),
    "time.t_final": ("t_final", float),
    "time.sample_stride": ("sample_stride", int),
    "diag.k_radius": ("k_radius", float),
    "output.dir": ("output_dir", str),
    "decay.width": ("decay_width", float),
    "decay.t0": ("decay_t0", float),
    "decay.t1": ("decay_t1", float),
    "decay.samples": ("decay_samples", int),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in raw:
            raise ConfigError(f"line {lineno}: duplicate key {k}")
        raw[k] = v
    kw = {}
    try:
        base = ExperimentConfig()
        dflt = base.grid
        kw["grid"] = Grid(int(raw.pop("grid.dim", dflt.dim)), int(raw.pop("grid.n", dflt.n)),
                          float(raw.pop("grid.L", dflt.L)))
        gas_keys = base.gas.to_config()
        gas_keys.update({k: raw.pop(k) for k in list(raw) if k.startswith("gas.")})
        kw["gas"] = GasModel.from_config(gas_keys)
        data = {}
        for k in list(raw):
            if k.startswith("data."):
                name = k[5:]
                if name not in _DATA_KEYS:
                    raise ConfigError(f"unknown key {k}")
                data[name] = _DATA_KEYS[name](raw.pop(k))
        kw["data"] = DataSpec(**data)
        for k in list(raw):
            if k not in _TOP_KEYS:
                raise ConfigError(f"unknown key {k}")
            name, conv = _TOP_KEYS[k]
            kw[name] = conv(raw.pop(k))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# -- data ---------------------------------------------------------------------

def _offset(grid, off):
    off = tuple(off) + (0.0,) * grid.dim
    return np.full(grid.dim, grid.L / 2) + np.array(off[: grid.dim])


def initial_fields(cfg: ExperimentConfig):
    """``(rho1, theta1, u0)`` from the data spec."""
    g, d = cfg.grid, cfg.data
    rho1 = ac.gaussian_bump(g, d.rho_width, d.rho_amp, _offset(g, d.rho_offset))
    theta1 = ac.gaussian_bump(g, d.theta_width, d.theta_amp, _offset(g, d.theta_offset))
    u0 = g.zeros(vector=True)
    if d.vortex_amp and g.dim >= 2:
        psi = ac.gaussian_bump(g, d.vortex_width, d.vortex_amp)
        gp = spectral_calculus(g, psi, "grad")
        u0[0] -= gp[1]
        u0[1] += gp[0]
    if d.grad_amp:
        u0 += spectral_calculus(g, ac.gaussian_bump(g, d.grad_width, d.grad_amp), "grad")
    if d.noise:
        rng = np.random.default_rng(d.seed)
        env = ac.gaussian_bump(g, 2 * max(d.rho_width, d.theta_width))
        low = g.kmag <= 4 * 2 * np.pi / g.L * max(1.0, g.L / (2 * np.pi))
        for f in (rho1, theta1):
            coef = (rng.standard_normal(g.k2.shape) + 1j * rng.standard_normal(g.k2.shape)) * low
            n = g.ifft(coef)
            f += d.noise * env * n / max(np.max(np.abs(n)), 1e-300)
    return rho1, theta1, u0


def limit_temperature_seed(W0, ref):
    """Temperature of the incompressible limit once acoustic waves have left."""
    return ac.recombine_RT(np.zeros_like(W0), W0, ref)[1]


def data_radius(cfg: ExperimentConfig) -> float:
    d = cfg.data
    rs = []
    for w, off in ((d.rho_width, d.rho_offset), (d.theta_width, d.theta_offset), (d.grad_width, ())):
        rs.append(ac.support_radius(w) + float(np.linalg.norm(np.array(off, dtype=float)[: cfg.grid.dim])))
    return max(rs)


def check_wrap(cfg: ExperimentConfig, eps: float):
    """Acoustic images must not re-enter the measurement disk before ``t_final``."""
    ref = linearization_coefficients(cfg.gas, cfg.rho_bar, cfg.theta_bar)
    reach = np.sqrt(ref.omega) * cfg.t_final / eps
    room = cfg.grid.L - data_radius(cfg) - cfg.k_radius
    if reach >= room:
        raise ConfigError(f"acoustic waves travel {reach:.3g} by t_final but the box allows {room:.3g}")


# -- single run ---------------------------------------------------------------

@dataclass
class RunResult:
    eps: float
    times: list = field(default_factory=list)
    rel_entropy: list = field(default_factory=list)
    m3: list = field(default_factory=list)
    m4: list = field(default_factory=list)
    m5_q1: list = field(default_factory=list)
    m5_q15: list = field(default_factory=list)
    m5_naive_q1: list = field(default_factory=list)
    m5_naive_q15: list = field(default_factory=list)
    r1_gap: list = field(default_factory=list)
    r1_scale: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    timeseries: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "eps": self.eps,
            "t": self.times,
            "rel_entropy": self.rel_entropy,
            "m3": self.m3,
            "m4": self.m4,
            "m5": {"q1": self.m5_q1, "q1.5": self.m5_q15},
            "m5_naive": {"q1": self.m5_naive_q1, "q1.5": self.m5_naive_q15},
            "r1_gap": self.r1_gap,
            "r1_scale": self.r1_scale,
            "bounds": self.bounds,
            "info": self.info,
        }

    def summary(self) -> dict:
        rel = [g / s if s > 0 else 0.0 for g, s in zip(self.r1_gap, self.r1_scale)]
        return {
            "eps": self.eps,
            "sup_rel_entropy": max(self.rel_entropy),
            "m3_over_eps": self.m3[-1] / self.eps,
            "m4": self.m4[-1],
            "m5_q1": self.m5_q1[-1],
            "m5_q15": self.m5_q15[-1],
            "m5_naive_q1": self.m5_naive_q1[-1],
            "r1_gap_min": min(self.r1_gap),
            "r1_gap_min_rel": min(rel),
            "status": "ok",
        }


def run_single(cfg: ExperimentConfig, eps: float, out_dir=None, eta=None, write=True,
               check_box=True) -> RunResult:
    """Run NSF against the limit system and the acoustic/transport correctors.

    Every step feeds the dissipation and relative-entropy trackers; metrics
    and CSV rows are produced every ``sample_stride`` steps and at the end.
    """
    eps = float(eps)
    sc = cfg.scaling(eps, eta)
    if check_box:
        check_wrap(cfg, eps)
    g = cfg.grid
    model = NsfModel.build(g, cfg.gas, sc, cfg.rho_bar, cfg.theta_bar)
    ref = model.ref
    rho1, theta1, u0 = initial_fields(cfg)

    nsf = make_ill_prepared_data(model, rho1, theta1, u0)
    aco, W0 = ac.acoustic_init(g, rho1, theta1, u0, sc.eta, ref, eps)
    W = TransportState(W0, 0.0)
    T_adj = limit_temperature_seed(adjusted_initial_temperature(rho1, theta1, ref), ref)
    T_naive = limit_temperature_seed(ref.delta * theta1, ref)
    lim = initial_state(g, u0, T_adj)
    K = disk_mask(g, cfg.k_radius)

    res = RunResult(eps)
    res.info = {
        "grid": {"dim": g.dim, "n": g.n, "L": g.L},
        "eta": sc.eta, "a_exp": sc.a_exp, "b_exp": sc.b_exp, "dt": cfg.dt,
        "alpha": ref.alpha, "beta": ref.beta, "delta": ref.delta, "omega": ref.omega,
        "data_norm_D": float(g.l2_norm(rho1) + g.l2_norm(theta1) + g.l2_norm(u0)),
        "mollifier": "gaussian, symbol exp(-|k|^2 eta^2/2)",
        "cutoff": "radial C2 ramp, radii 1/(2 eta), 1/eta clipped to the box",
        "k_radius": cfg.k_radius,
    }
    v4 = DissipationTracker(nsf)
    r1 = R1Tracker()
    hist = []
    M0, E0 = nsf.mass(), nsf.energy()

    def sample(nsf, lim, T_naive, aco, W, v4_gap):
        ep = entropy_production(nsf)
        res.timeseries.append((nsf.t, nsf.mass(), nsf.energy(), float(nsf.rho.min()),
                               float(nsf.theta.min()), float(ep.min()), v4_gap))
        m = convergence_metrics(nsf, lim, ref, sc, K)
        naive = convergence_metrics(nsf, replace(lim, T=T_naive), ref, sc, K)
        res.times.append(nsf.t)
        res.rel_entropy.append(r1.rel_entropy)
        res.m3.append(m["m3"])
        res.m4.append(m["m4"])
        res.m5_q1.append(m["m5_q1"])
        res.m5_q15.append(m["m5_q15"])
        res.m5_naive_q1.append(naive["m5_q1"])
        res.m5_naive_q15.append(naive["m5_q15"])
        res.r1_gap.append(r1.gap[-1])
        res.r1_scale.append(r1.scale[-1])
        hist.append(nsf)

    r1.update(nsf, aco, W.W, lim)
    sample(nsf, lim, T_naive, aco, W, 0.0)
    t_start = time.time()
    dt = cfg.dt
    for k in range(1, cfg.steps + 1):
        t_old = nsf.t
        nsf = nsf_step_imex(nsf, dt)
        lim_new = euler_step(g, lim, dt)
        v_mid = 0.5 * (lim.v + lim_new.v)
        if np.any(T_naive):
            T_naive = limit_temperature_step(g, T_naive, v_mid, dt)
        a_mid = ac.acoustic_propagate(aco, t_old + 0.5 * dt)
        U_mid = v_mid + a_mid.grad_phi()
        W = transport_step(g, W, U_mid, a_mid.lap_phi(), dt)
        aco = ac.acoustic_propagate(aco, t_old + dt)
        lim = lim_new
        gap = v4.update(nsf)
        r1.update(nsf, aco, W.W, lim)
        if k % cfg.sample_stride == 0 or k == cfg.steps:
            sample(nsf, lim, T_naive, aco, W, gap)
            log.info("eps=%g t=%.4f rel_entropy=%.4g r1_gap=%.3g", eps, nsf.t, r1.rel_entropy, r1.gap[-1])
    res.bounds = uniform_bounds_report(hist, sc, ref)
    res.info["wall_seconds"] = time.time() - t_start
    res.info["mass_drift"] = abs(nsf.mass() - M0) / M0
    res.info["energy_drift"] = abs(nsf.energy() - E0) / abs(E0)

    if write:
        out = Path(out_dir or cfg.output_dir) / f"eps_{eps:g}"
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out}: {exc}") from exc
        with open(out / "timeseries.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(TS_COLUMNS)
            w.writerows(res.timeseries)
        (out / "report.json").write_text(json.dumps(res.report(), indent=1), encoding="utf-8")
        t = nsf.t
        write_snapshot(out / "rho.bin", Field(g, nsf.rho, "rho", t))
        write_snapshot(out / "theta.bin", Field(g, nsf.theta, "theta", t))
        write_snapshot(out / "u.bin", Field(g, nsf.u, "u", t))
        write_snapshot(out / "v.bin", Field(g, lim.v, "v", t))
        write_snapshot(out / "T.bin", Field(g, lim.T, "T", t))
        write_snapshot(out / "W.bin", Field(g, W.W, "W", t))
    return res


# -- sweeps -------------------------------------------------------------------

def run_sweep(cfg: ExperimentConfig, out_dir=None, write=True):
    """One row per eps (in config order); failures are recorded, not raised."""
    if len(cfg.eps) < 3:
        raise ConfigError("a sweep needs at least 3 eps values")
    if list(cfg.eps) != sorted(cfg.eps, reverse=True):
        raise ConfigError("eps values must be decreasing")
    rows, results = [], {}
    for eps in cfg.eps:
        try:
            r = run_single(cfg, eps, out_dir, write=write)
            results[eps] = r
            rows.append(r.summary())
        except Exception as exc:  # partial table with a failure marker
            log.error("eps=%g failed: %s", eps, exc)
            row = {c: float("nan") for c in SWEEP_COLUMNS}
            row.update(eps=eps, status=f"failed: {type(exc).__name__}: {exc}")
            rows.append(row)
    if write:
        write_table(Path(out_dir or cfg.output_dir) / "sweep.csv", rows)
    return rows, results


def eta_table(cfg: ExperimentConfig, eps: float, out_dir=None, write=True):
    """Second-level table: fixed eps, regularization width from ``eta_list``."""
    rows = []
    for eta in cfg.eta_list:
        r = run_single(cfg, eps, out_dir, eta=eta, write=False)
        row = r.summary()
        row["eta"] = eta
        rows.append(row)
    if write:
        write_table(Path(out_dir or cfg.output_dir) / f"eta_eps_{eps:g}.csv", rows,
                    ["eta"] + SWEEP_COLUMNS)
    return rows


def write_table(path, rows, columns=SWEEP_COLUMNS):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def fit_rate(table, column: str, x_column: str = "eps"):
    """Least-squares slope of ``log(column)`` against ``log(eps)`` and its R^2."""
    x = np.array([float(r[x_column]) for r in table])
    y = np.array([float(r[column]) for r in table])
    if len(y) < 3:
        raise ValueError("need at least 3 rows")
    if np.any(~np.isfinite(y)) or np.any(y <= 0) or np.any(x <= 0):
        raise ValueError(f"column {column!r} needs positive finite entries")
    lx, ly = np.log(x), np.log(y)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if ss == 0 else 1.0 - np.sum(resid ** 2) / ss
    return float(slope), float(r2)


# -- acoustic decay -----------------------------------------------------------

def run_acoustic_decay(cfg: ExperimentConfig, eps=None, out_dir=None, write=True):
    """Sup-norm decay of a Gaussian pulse; returns ``(sigma, rows)``."""
    g = cfg.grid
    eps = float(cfg.eps[0] if eps is None else eps)
    ref = linearization_coefficients(cfg.gas, cfg.rho_bar, cfg.theta_bar)
    Z0 = ac.gaussian_bump(g, cfg.decay_width)
    state = ac.AcousticState(g, Z0, np.zeros(g.shape), eps, ref)
    t_wrap = ac.wrap_time(g, ref, eps, ac.support_radius(cfg.decay_width))
    times = np.linspace(cfg.decay_t0, cfg.decay_t1, cfg.decay_samples)
    if times[-1] > t_wrap:
        raise ac.WindowError(f"decay window ends at {times[-1]:.4g}, after wrap time {t_wrap:.4g}")
    rows = ac.decay_series(state, times)
    sigma = ac.decay_exponent_fit([(r[0], r[2]) for r in rows], eps, t_wrap)
    if write:
        out = Path(out_dir or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        ac.write_decay_csv(out / "acoustic_decay.csv", rows)
    return sigma, rows

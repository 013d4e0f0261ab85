"""Periodic pseudospectral grids, operators and regularization.

Scalar fields are ndarrays of shape ``(n,)*dim``; vector fields carry a
leading component axis, shape ``(dim,) + (n,)*dim``. Spectral coefficients
use the real-to-complex layout of ``scipy.fft.rfftn`` (last axis halved).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft as sfft

__all__ = [
    "Grid",
    "Field",
    "RegularizationError",
    "spectral_calculus",
    "helmholtz_split",
    "mollify_regularize",
    "mollifier_symbol",
    "cutoff_profile",
    "write_snapshot",
    "read_snapshot",
]


class RegularizationError(ValueError):
    """Cut-off radius leaves nothing of the domain."""


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two, at least 8")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def volume(self) -> float:
        return self.L ** self.dim

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * self.dx
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavenumber arrays in rfft layout."""
        full = 2 * np.pi / self.L * sfft.fftfreq(self.n, 1.0 / self.n)
        half = 2 * np.pi / self.L * sfft.rfftfreq(self.n, 1.0 / self.n)
        axes = [full] * (self.dim - 1) + [half]
        out = []
        for i, ax in enumerate(axes):
            s = [1] * self.dim
            s[i] = ax.size
            out.append(ax.reshape(s))
        return tuple(out)

    @cached_property
    def k_odd(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers with the Nyquist entry zeroed (for odd derivatives)."""
        nyq = np.pi * self.n / self.L
        return tuple(np.where(np.abs(np.abs(ki) - nyq) < 1e-9 * nyq, 0.0, ki) for ki in self.k)

    @cached_property
    def kmag_odd(self) -> np.ndarray:
        """|k| built from the Nyquist-free wavenumbers, consistent with grad and div."""
        return np.sqrt(sum(ki ** 2 for ki in self.k_odd))

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(ki ** 2 for ki in self.k)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias(self) -> np.ndarray:
        kmax = np.pi * self.n / self.L
        mask = np.ones(self.k2.shape, dtype=bool)
        for ki in self.k:
            mask &= np.abs(ki) < (2.0 / 3.0) * kmax
        return mask

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full spectrum."""
        w = np.full(self.k2.shape[-1], 2.0)
        w[0] = 1.0
        if self.n % 2 == 0:
            w[-1] = 1.0
        return np.broadcast_to(w, self.k2.shape)

    def fft(self, f):
        return sfft.rfftn(f, axes=tuple(range(-self.dim, 0)))

    def ifft(self, fh):
        return sfft.irfftn(fh, s=self.shape, axes=tuple(range(-self.dim, 0)))

    def integrate(self, f):
        return np.sum(f, axis=tuple(range(-self.dim, 0))) * self.cell_volume

    def l2_norm(self, f) -> float:
        return float(np.sqrt(np.sum(self.integrate(np.asarray(f) ** 2))))

    def parseval_l2(self, f) -> float:
        """L² norm from spectral coefficients."""
        fh = self.fft(f)
        s = np.sum(self.rfft_weights * np.abs(fh) ** 2)
        return float(np.sqrt(s * self.volume / self.n ** (2 * self.dim)))

    def distance_to_center(self) -> np.ndarray:
        c = self.L / 2
        return np.sqrt(sum((x - c) ** 2 for x in self.coords))

    def zeros(self, vector=False):
        return np.zeros(((self.dim,) if vector else ()) + self.shape)

    def check_scalar(self, f, name="field"):
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ValueError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def check_vector(self, U, name="field"):
        U = np.asarray(U, dtype=float)
        if U.shape != (self.dim,) + self.shape:
            raise ValueError(f"{name} has shape {U.shape}, grid expects {(self.dim,) + self.shape}")
        return U

    def to_config(self) -> dict[str, str]:
        return {"grid.dim": str(self.dim), "grid.n": str(self.n), "grid.L": repr(float(self.L))}


@dataclass
class Field:
    """Named field on a grid, used for snapshots."""

    grid: Grid
    data: np.ndarray
    name: str = "f"
    t: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def components(self) -> int:
        return 1 if self.data.ndim == self.grid.dim else self.data.shape[0]


def spectral_calculus(grid: Grid, f, which: str):
    """Exact derivative of the trigonometric interpolant of ``f``.

    ``grad`` takes a scalar and returns a vector, ``div`` the reverse,
    ``laplacian`` accepts either.
    """
    f = np.asarray(f, dtype=float)
    is_vec = f.ndim == grid.dim + 1
    if not is_vec and f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not fit grid {grid.shape}")
    if is_vec and f.shape != (grid.dim,) + grid.shape:
        raise ValueError(f"vector shape {f.shape} does not fit grid {grid.shape}")
    if which == "grad":
        if is_vec:
            raise ValueError("grad needs a scalar field")
        fh = grid.fft(f)
        return np.stack([grid.ifft(1j * ki * fh) for ki in grid.k_odd])
    if which == "div":
        if not is_vec:
            raise ValueError("div needs a vector field")
        fh = grid.fft(f)
        return grid.ifft(sum(1j * ki * fh[i] for i, ki in enumerate(grid.k_odd)))
    if which == "laplacian":
        return grid.ifft(-grid.k2 * grid.fft(f))
    raise ValueError(f"unknown operator {which!r}")


def inverse_laplacian_hat(grid: Grid, fh):
    """Δ⁻¹ in spectral space, mean mode set to zero."""
    k2 = np.where(grid.k2 == 0, 1.0, grid.k2)
    return np.where(grid.k2 == 0, 0.0, -fh / k2)


def helmholtz_split(grid: Grid, U):
    """Split ``U`` into solenoidal and gradient parts.

    The k = 0 mode goes to the solenoidal part. The per-mode projector is
    ``I - k k^T / |k|^2`` with the Nyquist-free wavenumbers, so the
    solenoidal output has exactly zero spectral divergence.
    """
    U = grid.check_vector(U, "U")
    Uh = grid.fft(U)
    k = grid.k_odd
    k2 = sum(ki ** 2 for ki in k)
    safe = np.where(k2 == 0, 1.0, k2)
    kdotU = sum(k[i] * Uh[i] for i in range(grid.dim)) / safe
    gh = np.stack([np.where(k2 == 0, 0.0, k[i] * kdotU) for i in range(grid.dim)])
    grad = grid.ifft(gh)
    return U - grad, grad


def gradient_potential(grid: Grid, U):
    """Δ⁻¹ div U, the potential of the gradient part."""
    U = grid.check_vector(U, "U")
    Uh = grid.fft(U)
    divh = sum(1j * ki * Uh[i] for i, ki in enumerate(grid.k_odd))
    return grid.ifft(inverse_laplacian_hat(grid, divh))


def mollifier_symbol(grid: Grid, eta: float):
    """Fourier symbol of the unit-mass Gaussian kernel of width ``eta``."""
    return np.exp(-0.5 * grid.k2 * eta ** 2)


def _ramp(s):
    # C² monotone ramp 0 -> 1 on [0, 1]
    s = np.clip(s, 0.0, 1.0)
    return s - np.sin(2 * np.pi * s) / (2 * np.pi)


def cutoff_radii(grid: Grid, eta: float, length_unit: float = 1.0):
    """Inner and outer radii of the radial cut-off, clipped to the box."""
    r_in = length_unit ** 2 / (2 * eta)
    r_out = 2 * r_in
    if r_in >= np.sqrt(grid.dim) * grid.L / 2:
        return np.inf, np.inf
    if r_out > grid.L / 2:
        r_in, r_out = grid.L / 4, grid.L / 2
    return r_in, r_out


def cutoff_profile(grid: Grid, eta: float, length_unit: float = 1.0):
    """Radial cut-off about the box center: 1 inside ``r_in``, 0 beyond ``r_out``."""
    r_in, r_out = cutoff_radii(grid, eta, length_unit)
    if not np.isfinite(r_in):
        return np.ones(grid.shape)
    if r_out < grid.dx:
        # only the center node would survive
        raise RegularizationError(f"cut-off radius {r_out:.3g} below the grid spacing for eta={eta}")
    r = grid.distance_to_center()
    return 1.0 - _ramp((r - r_in) / (r_out - r_in))


def mollify_regularize(grid: Grid, h, eta: float, length_unit: float = 1.0):
    """``chi_eta * (psi_eta h)`` for a scalar or vector field."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    h = np.asarray(h, dtype=float)
    psi = cutoff_profile(grid, eta, length_unit)
    return grid.ifft(mollifier_symbol(grid, eta) * grid.fft(psi * h))


# -- snapshots ----------------------------------------------------------------

def write_snapshot(path, fld: Field):
    """Text header, blank line, then little-endian float64 samples (C order)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = fld.grid
    header = [
        f"dim={g.dim}",
        f"n={g.n}",
        f"L={float(g.L)!r}",
        f"name={fld.name}",
        f"time={float(fld.t)!r}",
        f"components={fld.components}",
        "dtype=<f8",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n\n").encode("ascii"))
        fh.write(np.ascontiguousarray(fld.data, dtype="<f8").tobytes())


def read_snapshot(path) -> Field:
    raw = Path(path).read_bytes()
    head, sep, body = raw.partition(b"\n\n")
    if not sep:
        raise ValueError(f"{path}: missing header terminator")
    meta = dict(line.split("=", 1) for line in head.decode("ascii").splitlines())
    grid = Grid(int(meta["dim"]), int(meta["n"]), float(meta["L"]))
    comps = int(meta["components"])
    data = np.frombuffer(body, dtype=meta.get("dtype", "<f8")).astype(float)
    shape = grid.shape if comps == 1 else (comps,) + grid.shape
    return Field(grid, data.reshape(shape), meta["name"], float(meta["time"]))

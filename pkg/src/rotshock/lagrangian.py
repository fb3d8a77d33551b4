"""Mass-flux (Lagrangian) coordinates for the nozzle flow.

The vertical coordinate is replaced by the scaled stream function
y2 = (m_bar/m) * int_0^x2 rho*u1 dx2', which maps the physical nozzle
(curved upper wall at x2 = 1 + sigma*g(x1)) onto the fixed rectangle
[0, L] x [0, m_bar].  Here

    m_bar = int_0^1 rho_minus*u_minus dx2          (background mass flux)
    m     = int_0^1 (rho_minus*u_minus + sigma*rho_en*u1_en) dx2

with rho_en the density of the perturbed inflow state.  All PDE solves
happen on the rectangle; the physical vertical position is recovered a
posteriori from x2 = (m/m_bar) int_0^y2 1/(rho*u1) ds.

Cumulative integrals of solution fields use the trapezoid rule on grid
nodes (with a partial-interval correction for off-node queries), which
preserves the discrete telescoping used in conservation checks; the smooth
background maps use composite Simpson quadrature on the background grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .errors import ConfigError, InvalidStateError
from .profiles import Profile
from .thermo import GasModel, rho_P

__all__ = [
    "Geometry",
    "LagrangianGrid",
    "Field",
    "CharSpeeds",
    "mass_fluxes",
    "x2_of_y",
    "hatted_background",
    "HattedProfiles",
    "characteristic_speeds",
    "inlet_maps",
]


@dataclass(frozen=True)
class Geometry:
    """Nozzle of length L with upper wall x2 = 1 + sigma*g(x1)."""

    L: float
    g: Profile
    sigma: float = 0.0

    def __post_init__(self):
        if self.L <= 0.0:
            raise ConfigError(f"nozzle length must be positive, got {self.L}")
        if self.sigma < 0.0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")
        vals = [abs(float(self.g(0.0)))] + [
            abs(float(self.g.deriv(k)(0.0))) for k in (1, 2, 3)
        ]
        scale = max(1.0, max(abs(float(self.g(x))) for x in (0.5 * self.L, self.L)))
        if max(vals) > 1e-10 * scale:
            raise ConfigError(
                "wall shape g must vanish with its first three derivatives at "
                f"x1=0 (got {vals})"
            )


@dataclass(frozen=True)
class LagrangianGrid:
    """Uniform tensor grid on [y1a, y1b] x [0, m_bar]."""

    n1: int
    n2: int
    y1a: float
    y1b: float
    m: float
    m_bar: float

    def __post_init__(self):
        if self.n1 < 3 or self.n2 < 3:
            raise ConfigError(f"grid needs at least 3 nodes per direction ({self.n1}x{self.n2})")
        if not (self.m > 0.0 and self.m_bar > 0.0):
            raise InvalidStateError(f"mass fluxes must be positive: m={self.m}, m_bar={self.m_bar}")

    @property
    def y1(self):
        return np.linspace(self.y1a, self.y1b, self.n1)

    @property
    def y2(self):
        return np.linspace(0.0, self.m_bar, self.n2)

    @property
    def h1(self):
        return (self.y1b - self.y1a) / (self.n1 - 1)

    @property
    def h2(self):
        return self.m_bar / (self.n2 - 1)


@dataclass
class Field:
    """Named nodal components on a LagrangianGrid (axis 0 = y1, axis 1 = y2)."""

    grid: LagrangianGrid
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.grid.n1, self.grid.n2)
        for name, arr in self.data.items():
            if arr.shape != shape:
                raise InvalidStateError(
                    f"component {name!r} has shape {arr.shape}, expected {shape}"
                )

    def __getitem__(self, name):
        return self.data[name]

    def __setitem__(self, name, arr):
        self.data[name] = np.asarray(arr, dtype=float)

    def copy(self):
        return Field(self.grid, {k: v.copy() for k, v in self.data.items()})

    def write_csv(self, path, extra_columns=None):
        """Dump as CSV with columns y1, y2, <components...>[, extras]."""
        g = self.grid
        Y1, Y2 = np.meshgrid(g.y1, g.y2, indexing="ij")
        names = list(self.data)
        cols = [Y1.ravel(), Y2.ravel()] + [self.data[k].ravel() for k in names]
        header = ["y1", "y2"] + names
        if extra_columns:
            for k, v in extra_columns.items():
                header.append(k)
                cols.append(np.asarray(v).ravel())
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in zip(*cols):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def mass_fluxes(bg, pert):
    """Total mass fluxes (m, m_bar) through the nozzle entrance.

    ``pert`` needs attributes sigma and the inflow profiles u1_en, u2_en,
    S_en, B_en on [0,1].  rho_en is the density of the perturbed inflow
    state recovered from its characteristic variables.
    """
    x2 = bg.x2
    flux0 = bg.mass_flux
    m_bar = float(cumulative_simpson(flux0, x=x2, initial=0.0)[-1])
    sigma = pert.sigma
    if sigma == 0.0:
        return m_bar, m_bar
    u1 = bg.u_m + sigma * pert.u1_en(x2)
    u2 = sigma * pert.u2_en(x2)
    S = bg.S_m + sigma * pert.S_en(x2)
    B = bg.B_m + sigma * pert.B_en(x2)
    rho_en, _ = rho_P(S, B, u1, u2, bg.gas)
    integrand = flux0 + sigma * rho_en * pert.u1_en(x2)
    if np.any(integrand <= 0.0):
        raise InvalidStateError(
            f"inflow mass-flux density not positive (min {integrand.min():.3e})"
        )
    m = float(cumulative_simpson(integrand, x=x2, initial=0.0)[-1])
    return m, m_bar


def _cumtrap(vals, x):
    out = np.empty_like(vals)
    out[0] = 0.0
    np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(x), out=out[1:])
    return out


def x2_of_y(rho_u1, grid: LagrangianGrid, y1, y2, m=None, m_bar=None):
    """Physical height x2 at Lagrangian point(s) (y1, y2).

    ``rho_u1`` is the nodal mass-flux density on ``grid``.  The integrand
    1/(rho*u1) is interpolated in y1 (cubic) at the query abscissa and
    integrated in y2 by the trapezoid rule with a partial-interval
    correction at the endpoint.
    """
    m = grid.m if m is None else m
    m_bar = grid.m_bar if m_bar is None else m_bar
    rho_u1 = np.asarray(rho_u1, dtype=float)
    if np.any(rho_u1 <= 0.0):
        raise InvalidStateError(
            f"rho*u1 must stay positive for an invertible map (min {rho_u1.min():.3e})"
        )
    gy1, gy2 = grid.y1, grid.y2
    if grid.n1 >= 4:
        col = CubicSpline(gy1, 1.0 / rho_u1, axis=0)(float(y1))
    else:
        w = np.clip((float(y1) - grid.y1a) / (grid.y1b - grid.y1a), 0.0, 1.0)
        col = (1.0 - w) / rho_u1[0] + w / rho_u1[-1]
    cum = _cumtrap(col, gy2)
    y2q = np.atleast_1d(np.asarray(y2, dtype=float))
    j = np.clip(np.searchsorted(gy2, y2q, side="right") - 1, 0, grid.n2 - 2)
    frac = y2q - gy2[j]
    fj = col[j]
    fq = fj + (col[j + 1] - fj) * (frac / grid.h2)
    out = (m / m_bar) * (cum[j] + 0.5 * (fj + fq) * frac)
    return out if np.ndim(y2) else float(out[0])


@dataclass
class HattedProfiles:
    """Background profiles re-parametrised by the mass coordinate y2.

    For each side s in {"m", "p"} (upstream/downstream) the dict ``vals[s]``
    holds nodal arrays on ``y2`` for u, rho, P, S, B, c2 (sound speed
    squared), Msq, and exact-chain derivatives du, dS, dB (d/dy2).  ``x2``
    is the inverse Lagrangian map X2(y2); the mass flux rho*u agrees on the
    two sides by construction.
    """

    y2: np.ndarray
    m_bar: float
    x2: np.ndarray
    vals: dict
    gas: GasModel
    x2_spline: CubicSpline = None

    def __getitem__(self, key):
        side, name = key
        return self.vals[side][name]

    @property
    def pressure_jump(self):
        return self.vals["p"]["P"] - self.vals["m"]["P"]


def inlet_maps(bg, pert=None, sigma=0.0):
    """Maps between entrance height x2 and mass coordinate y2.

    Returns (m, m_bar, x2_of_y2, y2_of_x2) where the maps use the perturbed
    inflow flux when sigma > 0 and the background flux otherwise.
    """
    x2 = bg.x2
    flux0 = bg.mass_flux
    cum0 = cumulative_simpson(flux0, x=x2, initial=0.0)
    m_bar = float(cum0[-1])
    if pert is None or sigma == 0.0:
        m = m_bar
        cum = cum0
    else:
        u1 = bg.u_m + sigma * pert.u1_en(x2)
        u2 = sigma * pert.u2_en(x2)
        S = bg.S_m + sigma * pert.S_en(x2)
        B = bg.B_m + sigma * pert.B_en(x2)
        rho_en, _ = rho_P(S, B, u1, u2, bg.gas)
        integrand = flux0 + sigma * rho_en * pert.u1_en(x2)
        if np.any(integrand <= 0.0):
            raise InvalidStateError("perturbed inflow reverses: mass-flux density <= 0")
        cum = cumulative_simpson(integrand, x=x2, initial=0.0)
        m = float(cum[-1])
    # y2 = (m_bar/m) * cum(x2); strictly increasing
    y2_nodes = (m_bar / m) * cum
    y2_nodes[-1] = m_bar  # exact upper end
    x2_of_y2 = CubicSpline(y2_nodes, x2)
    y2_of_x2 = CubicSpline(x2, y2_nodes)
    return m, m_bar, x2_of_y2, y2_of_x2


def hatted_background(bg, m_bar=None, n2=129) -> HattedProfiles:
    """Sample the background in Lagrangian coordinates on n2 nodes of [0, m_bar]."""
    m, mb, x2_of_y2, _ = inlet_maps(bg)
    if m_bar is not None and abs(m_bar - mb) > 1e-12 * mb:
        raise InvalidStateError(f"inconsistent m_bar: given {m_bar}, computed {mb}")
    y2 = np.linspace(0.0, mb, n2)
    x2q = np.clip(x2_of_y2(y2), 0.0, 1.0)
    g = bg.gas.gamma
    vals = {}
    for side in ("m", "p"):
        u = bg.spline("u_" + side)(x2q)
        rho = bg.spline("rho_" + side)(x2q)
        P = bg.spline("P_" + side)(x2q)
        S = bg.spline("S_" + side)(x2q)
        B = bg.spline("B_" + side)(x2q)
        c2 = g * P / rho
        # chain rule dq/dy2 = (dq/dx2) / (rho*u), with exact x-derivatives
        dudx = CubicSpline(bg.x2, bg.deriv["u_" + side])(x2q)
        dSdx = CubicSpline(bg.x2, bg.deriv["S_" + side])(x2q)
        dBdx = CubicSpline(bg.x2, bg.deriv["B_" + side])(x2q)
        flux = bg.spline("rho_m")(x2q) * bg.spline("u_m")(x2q)
        vals[side] = {
            "u": u, "rho": rho, "P": P, "S": S, "B": B, "c2": c2,
            "Msq": u * u / c2,
            "du": dudx / flux, "dS": dSdx / flux, "dB": dBdx / flux,
        }
    hp = HattedProfiles(y2=y2, m_bar=mb, x2=x2q, vals=vals, gas=bg.gas,
                        x2_spline=x2_of_y2)
    flux_m = vals["m"]["rho"] * vals["m"]["u"]
    flux_p = vals["p"]["rho"] * vals["p"]["u"]
    worst = np.abs(flux_m - flux_p).max() / np.abs(flux_m).max()
    if worst > 1e-10:
        raise InvalidStateError(f"hatted mass fluxes disagree by {worst:.3e}")
    return hp


@dataclass(frozen=True)
class CharSpeeds:
    """Characteristic slopes of the y1-marching system (complex when subsonic)."""

    lam_plus: complex
    lam_minus: complex
    real: bool


def characteristic_speeds(u1, u2, c, rho, m, m_bar) -> CharSpeeds:
    """Roots lambda+- = (m/m_bar)(-u2 +- u1*sqrt(M1^2+M2^2-1)) / (rho |u|^2).

    Real pair iff M1^2 + M2^2 >= 1; complex-conjugate pair (elliptic regime)
    otherwise.
    """
    speed_sq = u1 * u1 + u2 * u2
    if speed_sq == 0.0:
        raise InvalidStateError("characteristic speeds undefined at |u| = 0")
    disc = (speed_sq) / (c * c) - 1.0
    pref = m / (m_bar * rho * speed_sq)
    if disc >= 0.0:
        root = u1 * np.sqrt(disc)
        return CharSpeeds(pref * (-u2 + root), pref * (-u2 - root), True)
    root = u1 * np.sqrt(-disc) * 1j
    return CharSpeeds(pref * (-u2 + root), pref * (-u2 - root), False)

"""Grids, field states, run configuration and radial quadrature.

Everything here is an immutable value object.  Arrays stored on
:class:`FieldState` are copied on construction and flagged read-only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

FAMILIES = ("gaussian", "smooth-bump", "polynomial-decay")

# Gaussian tail exp(-36) ~ 2e-16 is below double precision relative to the peak.
GAUSSIAN_SUPPORT_WIDTHS = 6.0
KAHAN_THRESHOLD = 100_000


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class ContractError(ValueError):
    """A precondition of an operation was violated by the caller."""


class BlowUpError(RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, t: float, message: str | None = None):
        self.t = t
        super().__init__(message or f"non-finite field values at t={t!r}")


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred mesh on [0, n*dr]; node j sits at (j + 1/2) dr."""

    dr: float
    n: int

    def __post_init__(self):
        if not (self.dr > 0 and math.isfinite(self.dr)):
            raise ConfigError(f"dr must be positive, got {self.dr!r}")
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n!r}")

    @property
    def nodes(self) -> np.ndarray:
        r = (np.arange(self.n, dtype=float) + 0.5) * self.dr
        r.flags.writeable = False
        return r

    @property
    def faces(self) -> np.ndarray:
        return np.arange(self.n + 1, dtype=float) * self.dr

    @property
    def R_max(self) -> float:
        return self.n * self.dr

    def refined(self, factor: int) -> "RadialGrid":
        return RadialGrid(self.dr / factor, self.n * factor)


@dataclass(frozen=True, eq=False)
class FieldState:
    t: float
    u: np.ndarray
    ut: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        ut = np.array(self.ut, dtype=float)
        if u.ndim != 1 or u.shape != ut.shape:
            raise ContractError("u and ut must be 1-D arrays of equal length")
        u.flags.writeable = False
        ut.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "ut", ut)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.u.size

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.ut).all())

    def time_reversed(self) -> "FieldState":
        """The state of the time-reversed solution: (t, u, ut) -> (-t, u, -ut)."""
        return FieldState(-self.t, self.u, -self.ut)


@dataclass(frozen=True)
class InitialDataSpec:
    """Radial initial data.

    gaussian          u0 = A exp(-r^2 / sigma^2)
    smooth-bump       u0 = A phi(r / sigma), phi = 1 on [0, 1], 0 beyond 2, C-infinity between
    polynomial-decay  u0 = A (1 + (r / sigma)^2)^(-beta / 2)

    ``ut_mode`` is ``"zero"`` or ``"specified"``; in the latter case
    ``ut_values`` holds one value per grid node.
    """

    family: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    beta: float = 2.0
    ut_mode: str = "zero"
    ut_values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown initial-data family {self.family!r}")
        if not self.width > 0:
            raise ConfigError("width must be positive")
        if self.family == "polynomial-decay" and not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.ut_mode not in ("zero", "specified"):
            raise ConfigError(f"unknown ut_mode {self.ut_mode!r}")
        if self.ut_mode == "specified":
            if self.ut_values is None:
                raise ConfigError("ut_mode 'specified' requires ut_values")
            object.__setattr__(self, "ut_values", tuple(float(x) for x in self.ut_values))

    def support_radius(self) -> float:
        """Radius beyond which the data vanish to double precision (inf if never)."""
        if self.ut_mode == "specified":
            return math.inf
        if self.family == "gaussian":
            return GAUSSIAN_SUPPORT_WIDTHS * self.width
        if self.family == "smooth-bump":
            return 2.0 * self.width
        return math.inf


def polynomial_kappa_threshold(beta: float, p: float) -> float:
    """Supremum of kappa with finite weighted energy for the polynomial family.

    |u_r|^2 ~ r^(-2 beta - 2) and |u|^(p+1) ~ r^(-beta (p+1)), so the weighted
    integrals converge iff kappa < 2 beta and kappa < beta (p + 1) - 2.
    """
    return min(2.0 * beta, beta * (p + 1.0) - 2.0)


@dataclass(frozen=True)
class SimConfig:
    p: float = 5.0
    dr: float = 0.05
    n: int = 4096
    cfl: float = 0.45
    t_final: float = 50.0
    direction: str = "forward"
    nonlinear: bool = True
    data: InitialDataSpec = field(default_factory=InitialDataSpec)
    output_every: int = 10
    kappa_list: tuple[float, ...] = (0.0, 0.5, 0.9)
    morawetz_R_list: tuple[tuple[float, float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kappa_list", tuple(float(k) for k in self.kappa_list))
        object.__setattr__(
            self,
            "morawetz_R_list",
            tuple(tuple(float(x) for x in item) for item in self.morawetz_R_list),
        )
        object.__setattr__(self, "nonlinear", _as_flag(self.nonlinear))
        self.validate()

    @property
    def R_max(self) -> float:
        return self.n * self.dr

    @property
    def dt_max(self) -> float:
        return self.cfl * self.dr

    def validate(self) -> None:
        if not self.p > 1:
            raise ConfigError(f"p must exceed 1, got {self.p!r}")
        if not (self.dr > 0 and math.isfinite(self.dr)):
            raise ConfigError("dr must be positive")
        if self.n < 16:
            raise ConfigError(f"n must be at least 16, got {self.n}")
        if not 0 < self.cfl < 1:
            raise ConfigError(f"cfl must lie in (0, 1), got {self.cfl!r}")
        if not (self.t_final >= 0 and math.isfinite(self.t_final)):
            raise ConfigError("t_final must be a finite nonnegative number")
        if self.direction not in ("forward", "backward"):
            raise ConfigError(f"direction must be forward or backward, got {self.direction!r}")
        if self.output_every < 1:
            raise ConfigError("output_every must be >= 1")
        if any(k < 0 for k in self.kappa_list):
            raise ConfigError("kappa values must be nonnegative")
        for item in self.morawetz_R_list:
            if len(item) != 4:
                raise ConfigError("morawetz_R_list entries are (R, r, mu1, mu2)")
            R, r, mu1, mu2 = item
            if not (R > 0 and r >= 0 and mu1 >= 0 and mu2 >= 0):
                raise ConfigError(f"invalid Morawetz parameters {item!r}")
        if self.data.ut_mode == "specified" and len(self.data.ut_values) != self.n:
            raise ConfigError("ut_values length must equal n")
        support = self.data.support_radius()
        if math.isfinite(support):
            needed = self.t_final + support + 8 * self.dr
            if self.R_max < needed:
                raise ConfigError(
                    f"causality margin violated: R_max={self.R_max:g} < "
                    f"t_final + support + 8 dr = {needed:g}"
                )

    def with_changes(self, **changes) -> "SimConfig":
        from dataclasses import replace

        return replace(self, **changes)


def _as_flag(value) -> bool:
    if isinstance(value, str):
        if value.lower() in ("on", "true", "yes"):
            return True
        if value.lower() in ("off", "false", "no"):
            return False
        raise ConfigError(f"expected on/off, got {value!r}")
    return bool(value)


def make_grid(config: SimConfig) -> RadialGrid:
    config.validate()
    return RadialGrid(config.dr, config.n)


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=float)

    def h(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    a = h(x)
    b = h(1.0 - x)
    return a / (a + b)


def cutoff(s: np.ndarray) -> np.ndarray:
    """Radial cut-off equal to 1 for s <= 1 and 0 for s >= 2."""
    return 1.0 - _smooth_step(np.asarray(s, dtype=float) - 1.0)


def initial_profile(spec: InitialDataSpec, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    s = r / spec.width
    if spec.family == "gaussian":
        return spec.amplitude * np.exp(-(s**2))
    if spec.family == "smooth-bump":
        return spec.amplitude * cutoff(s)
    if spec.family == "polynomial-decay":
        return spec.amplitude * (1.0 + s**2) ** (-spec.beta / 2.0)
    raise ConfigError(f"unknown initial-data family {spec.family!r}")


def sample_initial_data(spec: InitialDataSpec, grid: RadialGrid) -> FieldState:
    u = initial_profile(spec, grid.nodes)
    if spec.ut_mode == "zero":
        ut = np.zeros(grid.n)
    else:
        if len(spec.ut_values) != grid.n:
            raise ConfigError("ut_values length must equal the grid size")
        ut = np.asarray(spec.ut_values, dtype=float)
    return FieldState(0.0, u, ut)


Weight = Union[None, float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def ordered_sum(x: np.ndarray) -> float:
    """Deterministic sum: sequential left to right, exactly rounded for long inputs."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        return 0.0
    if x.size > KAHAN_THRESHOLD:
        return math.fsum(x.tolist())
    return float(np.cumsum(x)[-1])


def cell_areas(grid: RadialGrid, r_min: float = 0.0, r_max: float = math.inf) -> np.ndarray:
    """Area of each annular cell clipped to r_min <= |x| <= r_max.

    Unclipped cells get 2 pi r_j dr (the midpoint weight); cut cells get the
    exact area of their overlap so region boundaries need not align with faces.
    """
    lo = grid.faces[:-1]
    hi = grid.faces[1:]
    a = np.clip(lo, r_min, r_max)
    b = np.clip(hi, r_min, r_max)
    area = math.pi * (b * b - a * a)
    full = (lo >= r_min) & (hi <= r_max)
    area[full] = 2.0 * math.pi * grid.nodes[full] * grid.dr
    return np.maximum(area, 0.0)


def cell_lengths(grid: RadialGrid, r_min: float = 0.0, r_max: float = math.inf) -> np.ndarray:
    """1-D analogue of :func:`cell_areas` for integrals in dr."""
    a = np.clip(grid.faces[:-1], r_min, r_max)
    b = np.clip(grid.faces[1:], r_min, r_max)
    return np.maximum(b - a, 0.0)


def _weight_values(weight: Weight, grid: RadialGrid) -> np.ndarray | float:
    if weight is None:
        return 1.0
    if callable(weight):
        return np.asarray(weight(grid.nodes), dtype=float)
    return np.asarray(weight, dtype=float)


def radial_integral(
    values: Sequence[float] | np.ndarray,
    grid: RadialGrid,
    weight: Weight = None,
    r_min: float = 0.0,
    r_max: float = math.inf,
) -> float:
    """Integral over the plane of a radial function, restricted to r_min <= |x| <= r_max.

    Midpoint rule: sum_j weight(r_j) values_j 2 pi r_j dr.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ContractError(f"values has shape {values.shape}, grid has {grid.n} nodes")
    if r_min <= 0.0 and r_max >= grid.R_max:
        areas = 2.0 * math.pi * grid.nodes * grid.dr
    else:
        areas = cell_areas(grid, r_min, r_max)
    return ordered_sum(_weight_values(weight, grid) * values * areas)


def line_integral(
    values: np.ndarray, grid: RadialGrid, r_min: float = 0.0, r_max: float = math.inf
) -> float:
    """Integral of values(r) dr over [r_min, r_max] with the same cell clipping."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ContractError(f"values has shape {values.shape}, grid has {grid.n} nodes")
    return ordered_sum(values * cell_lengths(grid, r_min, r_max))


def radial_derivative(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Centred difference u_r at the nodes.

    Ghosts: u_{-1} = u_0 (even reflection through the origin) and
    u_n = -u_{n-1} (zero Dirichlet value on the outer face).
    """
    u = np.asarray(u, dtype=float)
    padded = np.empty(u.size + 2)
    padded[1:-1] = u
    padded[0] = u[0]
    padded[-1] = -u[-1]
    return (padded[2:] - padded[:-2]) / (2.0 * grid.dr)


def interpolate_radial(values: np.ndarray, grid: RadialGrid, r) -> np.ndarray | float:
    """Linear interpolation in r between nodes, clamped to the end nodes."""
    return np.interp(r, grid.nodes, values)


def effective_support(state: FieldState, grid: RadialGrid, rtol: float = 1e-13) -> float:
    """Largest radius at which |u| or |ut| exceeds rtol times its maximum."""
    scale = max(np.abs(state.u).max(initial=0.0), np.abs(state.ut).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    mask = (np.abs(state.u) > rtol * scale) | (np.abs(state.ut) > rtol * scale)
    idx = np.nonzero(mask)[0]
    return float(grid.nodes[idx[-1]] + 0.5 * grid.dr)

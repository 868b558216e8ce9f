"""Numerical checks of the function-space inequalities used by the theory.

Three checks:
  * the radial pointwise bound |u(r)| <= C r^(-2/(p+3)) |u|_H1^(2/(p+3)) |u|_Lp1^((p+1)/(p+3)),
  * a weighted Hardy inequality on an exterior region, whose constant is
    calibrated on a seeded synthetic family and frozen in HARDY_CONSTANTS,
  * finite speed of propagation for energy weighted by an increasing a(r).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    ContractError,
    FieldState,
    InitialDataSpec,
    RadialGrid,
    SimConfig,
    initial_profile,
    radial_derivative,
    radial_integral,
)
from .diagnostics import energy_density

DEFAULT_SEED = 20261015
FAMILY_SIZE = 50
HARDY_MARGIN = 1.1

# Frozen from calibrate_hardy(kappas=HARDY_KAPPAS) with DEFAULT_SEED, 50 members,
# R = sigma, R1 = R / 2, times HARDY_MARGIN and rounded up.
HARDY_KAPPAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
HARDY_CONSTANTS: dict[float, float] = {
    0.1: 17.6, 0.2: 8.4, 0.3: 5.41, 0.4: 3.89, 0.5: 2.95, 0.6: 2.3, 0.7: 1.81, 0.8: 1.56, 0.9: 1.36,
}


@dataclass(frozen=True)
class InequalityVerdict:
    name: str
    ratio: float
    constant_bound: float
    passed: bool
    witness: float
    seed: int | None = None

    def __post_init__(self):
        if self.passed != (self.ratio <= self.constant_bound):
            raise ContractError("verdict flag disagrees with ratio and bound")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _verdict(name, ratio, bound, witness, seed=None) -> InequalityVerdict:
    ratio = float(ratio)
    return InequalityVerdict(name, ratio, float(bound), bool(ratio <= bound), float(witness), seed)


def sobolev_norms(state: FieldState | np.ndarray, grid: RadialGrid, p: float) -> tuple[float, float]:
    """Return (homogeneous H1 norm, L^(p+1) norm) of a radial field."""
    u = state.u if isinstance(state, FieldState) else np.asarray(state, dtype=float)
    ur = radial_derivative(u, grid)
    h1 = math.sqrt(radial_integral(ur**2, grid))
    lp1 = radial_integral(np.abs(u) ** (p + 1), grid) ** (1.0 / (p + 1))
    return h1, lp1


def pointwise_constant(p: float) -> float:
    return (2.0 ** (p + 2) / math.pi) ** (1.0 / (p + 3))


def pointwise_estimate_check(state: FieldState | np.ndarray, grid: RadialGrid, p: float) -> InequalityVerdict:
    u = state.u if isinstance(state, FieldState) else np.asarray(state, dtype=float)
    bound = pointwise_constant(p)
    h1, lp1 = sobolev_norms(u, grid, p)
    if h1 == 0.0 or lp1 == 0.0:
        return _verdict("pointwise_estimate", 0.0, bound, 0.0)
    r = grid.nodes
    scale = r ** (-2.0 / (p + 3)) * h1 ** (2.0 / (p + 3)) * lp1 ** ((p + 1) / (p + 3))
    q = np.abs(u) / scale
    j = int(np.argmax(q))
    return _verdict("pointwise_estimate", q[j], bound, r[j])


def hardy_terms(v: np.ndarray, grid: RadialGrid, kappa: float, R: float, R1: float) -> tuple[float, float, np.ndarray]:
    """Return (lhs, rhs, lhs integrand) of the weighted Hardy inequality outside radius R."""
    r = grid.nodes
    vr = radial_derivative(v, grid)
    lhs_density = v**2 / r**2
    outside = r > R
    weight = np.zeros_like(r)
    ro = r[outside]
    weight[outside] = (R**-kappa - ro**-kappa) * (ro - R1) ** kappa
    lhs = radial_integral(lhs_density, grid, r_min=R)
    rhs = radial_integral(weight * vr**2, grid, r_min=R)
    return lhs, rhs, np.where(outside, lhs_density * r, 0.0)


def hardy_constant(kappa: float) -> float:
    """Frozen calibration constant; uses the nearest tabulated kappa at or below."""
    if not 0 < kappa < 1:
        raise ContractError("kappa must lie in (0, 1)")
    usable = [k for k in HARDY_KAPPAS if k <= kappa + 1e-12]
    if not usable:
        raise ContractError(f"no calibrated Hardy constant for kappa={kappa} < {HARDY_KAPPAS[0]}")
    return HARDY_CONSTANTS[usable[-1]]


def weighted_hardy_check(
    v: np.ndarray, grid: RadialGrid, kappa: float, R: float, R1: float,
    constant: float | None = None,
) -> InequalityVerdict:
    if not 0 < kappa < 1:
        raise ContractError("kappa must lie in (0, 1)")
    if not 0 <= R1 <= R:
        raise ContractError("need 0 <= R1 <= R")
    bound = hardy_constant(kappa) if constant is None else constant
    v = np.asarray(v, dtype=float)
    lhs, rhs, dens = hardy_terms(v, grid, kappa, R, R1)
    witness = float(grid.nodes[int(np.argmax(dens))])
    if lhs == 0.0:
        return _verdict("weighted_hardy", 0.0, bound, witness)
    if rhs == 0.0:
        return _verdict("weighted_hardy", math.inf, bound, witness)
    return _verdict("weighted_hardy", lhs / rhs, bound, witness)


# -- synthetic family ---------------------------------------------------------


def synthetic_family(seed: int = DEFAULT_SEED, size: int = FAMILY_SIZE) -> list[InitialDataSpec]:
    """Gaussians, bumps and polynomial-decay profiles with random (A, sigma, beta)."""
    rng = np.random.default_rng(seed)
    families = ("gaussian", "smooth-bump", "polynomial-decay")
    out = []
    for k in range(size):
        fam = families[k % 3]
        out.append(
            InitialDataSpec(
                family=fam,
                amplitude=float(rng.uniform(0.25, 2.0)),
                width=float(rng.uniform(0.5, 2.0)),
                beta=float(rng.uniform(1.0, 4.0)),
            )
        )
    return out


def member_grid(spec: InitialDataSpec, extent: float = 400.0, per_width: int = 50) -> RadialGrid:
    """Grid resolving a family member: per_width cells per width, out to extent widths."""
    dr = spec.width / per_width
    return RadialGrid(dr, int(round(extent * per_width)))


def hardy_family_ratios(kappa: float, seed: int = DEFAULT_SEED, size: int = FAMILY_SIZE) -> np.ndarray:
    """Hardy ratios of every family member with R = sigma and R1 = R / 2."""
    ratios = []
    for spec in synthetic_family(seed, size):
        grid = member_grid(spec)
        v = initial_profile(spec, grid.nodes)
        lhs, rhs, _ = hardy_terms(v, grid, kappa, spec.width, spec.width / 2)
        ratios.append(lhs / rhs)
    return np.array(ratios)


def calibrate_hardy(kappas=HARDY_KAPPAS, seed: int = DEFAULT_SEED, size: int = FAMILY_SIZE,
                    margin: float = HARDY_MARGIN) -> dict[float, float]:
    """Margin times the largest family ratio, rounded up to three significant digits."""
    table = {}
    for kappa in kappas:
        c = margin * float(hardy_family_ratios(kappa, seed, size).max())
        digits = 2 - int(math.floor(math.log10(c)))
        table[kappa] = math.ceil(c * 10**digits) / 10**digits
    return table


def hardy_family_verdicts(kappa: float, seed: int = DEFAULT_SEED, size: int = FAMILY_SIZE) -> list[InequalityVerdict]:
    out = []
    for spec in synthetic_family(seed, size):
        grid = member_grid(spec)
        v = initial_profile(spec, grid.nodes)
        verdict = weighted_hardy_check(v, grid, kappa, spec.width, spec.width / 2)
        out.append(InequalityVerdict(**{**asdict(verdict), "seed": seed}))
    return out


# -- weighted finite speed ----------------------------------------------------


@dataclass(frozen=True)
class WeightSpec:
    """Increasing weight a(s): "constant" (1), "power" (s^exponent) or "log" (log(e + s))."""

    kind: str = "power"
    exponent: float = 0.7

    def __post_init__(self):
        if self.kind not in ("constant", "power", "log"):
            raise ContractError(f"unknown weight kind {self.kind!r}")
        if self.kind == "power" and self.exponent < 0:
            raise ContractError("power weight needs a nonnegative exponent")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.ones_like(s)
        if self.kind == "power":
            return s**self.exponent
        return np.log(math.e + s)


FINITE_SPEED_SLACK = 1e-2
# Relative floor on the right-hand side: both sides of the check can be many
# orders of magnitude below rounding when the region holds no energy.
FINITE_SPEED_FLOOR = 1e-12


def finite_speed_weight_check(traj_fwd, a: WeightSpec, R: float, t_prime: float,
                              slack: float = FINITE_SPEED_SLACK,
                              r_outer: float = math.inf) -> InequalityVerdict:
    """Weighted exterior energy at t' against the shifted weighted energy of the data.

    With a finite ``r_outer`` the check runs on the annulus R < r < r_outer at t'
    against R - |t'| < r < r_outer + |t'| at time 0, which keeps data truncated
    at the outer boundary out of the comparison.
    """
    if abs(t_prime) > R:
        raise ContractError("need |t'| <= R")
    if not r_outer > R:
        raise ContractError("need r_outer > R")
    grid = traj_fwd.grid
    p = traj_fwd.config.p
    r = grid.nodes
    s = abs(t_prime)
    later = traj_fwd.state_at(t_prime)
    e_later = energy_density(later, grid, p)
    e0 = energy_density(traj_fwd.initial, grid, p)
    lhs = radial_integral(a(r) * e_later, grid, r_min=R, r_max=r_outer)
    rhs = radial_integral(a(r + s) * e0, grid, r_min=R - s, r_max=r_outer + s)
    if t_prime == 0:
        ratio = 1.0 if rhs > 0 or lhs == rhs else math.inf
    else:
        floor = FINITE_SPEED_FLOOR * radial_integral(a(r + s) * e0, grid)
        ratio = lhs / max(rhs, floor) if lhs > 0 else 0.0
    dens = np.where((r > R) & (r < r_outer), a(r) * e_later * r, 0.0)
    return _verdict("finite_speed_weight", ratio, 1.0 + slack, r[int(np.argmax(dens))])


def finite_speed_family_verdicts(
    seed: int = DEFAULT_SEED, size: int = FAMILY_SIZE, p: float = 5.0, a: WeightSpec = WeightSpec(),
    cells_per_width: int = 20,
) -> list[InequalityVerdict]:
    """Evolve every family member to t' = 1.5 sigma and check the weighted bound at R = 3 sigma.

    The annulus stops 10 sigma beyond R; the grid reaches far enough past it
    that the outer boundary cannot influence the compared regions.
    """
    from .solver import evolve

    out = []
    for spec in synthetic_family(seed, size):
        sigma = spec.width
        R, tp = 3.0 * sigma, 1.5 * sigma
        dr = sigma / cells_per_width
        r_outer = R + 10.0 * sigma
        n = int(math.ceil((r_outer + 2 * tp + 4.0 * sigma) / dr))
        cfg = SimConfig(p=p, dr=dr, n=n, t_final=tp, data=spec, output_every=1_000_000)
        verdict = finite_speed_weight_check(evolve(cfg), a, R, tp, r_outer=r_outer)
        out.append(InequalityVerdict(**{**asdict(verdict), "seed": seed}))
    return out

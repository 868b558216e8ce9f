"""Scalar diagnostics of radial solutions.

Spatial integrals are midpoint sums over the plane (see
:func:`radwave.core.radial_integral`); time integrals use the trapezoid rule
over the snapshot times of a trajectory, with Hermite-interpolated end states
when a window edge falls between snapshots.  For radial fields the angular
gradient vanishes identically, so every |angular gradient|^2 term is omitted.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (
    ContractError,
    FieldState,
    RadialGrid,
    interpolate_radial,
    ordered_sum,
    radial_derivative,
    radial_integral,
)
from .solver import Trajectory, two_sided

INWARD = "inward"
OUTWARD = "outward"


def energy_density(state: FieldState, grid: RadialGrid, p: float) -> np.ndarray:
    ur = radial_derivative(state.u, grid)
    return 0.5 * ur**2 + 0.5 * state.ut**2 + np.abs(state.u) ** (p + 1) / (p + 1)


def total_energy(state: FieldState, grid: RadialGrid, p: float) -> float:
    return radial_integral(energy_density(state, grid, p), grid)


def free_energy_norm_sq(state: FieldState, grid: RadialGrid) -> float:
    """||(u, ut)||^2 in H1-dot x L2: the integral of |u_r|^2 + |u_t|^2."""
    ur = radial_derivative(state.u, grid)
    return radial_integral(ur**2 + state.ut**2, grid)


def weighted_energy(state: FieldState, grid: RadialGrid, p: float, kappa: float) -> float:
    """Energy with weight |x|^kappa + 1."""
    if kappa < 0:
        raise ContractError("kappa must be nonnegative")
    return radial_integral(energy_density(state, grid, p), grid, lambda r: r**kappa + 1.0)


def interior_weighted_energy(state: FieldState, grid: RadialGrid, p: float) -> float:
    """Integral over |x| < |t| of ((|t| - |x|) / |t|) e(x, t)."""
    T = abs(state.t)
    if T <= grid.nodes[0]:
        return 0.0
    e = energy_density(state, grid, p)
    return radial_integral(e, grid, lambda r: np.clip((T - r) / T, 0.0, None), r_max=T)


def directional_energy(state: FieldState, grid: RadialGrid, p: float, sign: str) -> float:
    """Integral of |u_r +- u_t|^2 + |u|^(p+1); inward takes +u_t."""
    if sign not in (INWARD, OUTWARD):
        raise ContractError(f"sign must be {INWARD!r} or {OUTWARD!r}")
    ur = radial_derivative(state.u, grid)
    s = 1.0 if sign == INWARD else -1.0
    return radial_integral((ur + s * state.ut) ** 2 + np.abs(state.u) ** (p + 1), grid)


# -- time integration helpers -------------------------------------------------


def trapezoid(times: Sequence[float], values: Sequence[float]) -> float:
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 2:
        return 0.0
    return ordered_sum(0.5 * (v[1:] + v[:-1]) * np.diff(t))


def time_integral(
    traj: Trajectory, t1: float, t2: float, integrand: Callable[[FieldState], float]
) -> float:
    if t2 <= t1:
        return 0.0
    states = traj.window(t1, t2)
    return trapezoid([s.t for s in states], [integrand(s) for s in states])


def cumulative_integral(
    traj: Trajectory, t_start: float, integrand: Callable[[FieldState], float]
) -> tuple[np.ndarray, np.ndarray]:
    """Running trapezoid integral from t_start through every later snapshot."""
    times = traj.times
    later = [s for t, s in zip(times, traj.snapshots) if t > t_start + 1e-9]
    if times.size and times[0] > times[-1]:
        raise ContractError("cumulative integrals need an ascending trajectory")
    states = [traj.state_at(t_start)] + sorted(later, key=lambda s: s.t)
    ts = np.array([s.t for s in states])
    vals = np.array([integrand(s) for s in states])
    inc = 0.5 * (vals[1:] + vals[:-1]) * np.diff(ts)
    return ts, np.concatenate([[0.0], np.cumsum(inc)])


# -- Morawetz identity and its ledger of nonnegative terms ----------------------


@dataclass(frozen=True)
class MorawetzReport:
    R: float
    r: float
    mu1: float
    mu2: float
    lambda1: float
    lambda2: float
    interior_bulk: float
    circle_term: float
    exterior_bulk: float
    endpoint_interior: float
    endpoint_exterior: float
    identity_sum: float
    two_E: float
    residual: float
    M1: float
    M2: float
    M3: float
    M4: float
    M5: float
    M6: float
    rhs_data_term: float
    rhs_tail_terms: float
    slack: float
    # (1/2R) int_{-R}^{R} int_{|x|<R} (|u_r|^2 + |u_t|^2 + 2|u|^{p+1}/(p+1))
    core_interior: float = 0.0
    # core_interior + sum M_j - 2E - rhs_tail_terms; see ledger_defect_exact
    ledger_balance: float = 0.0
    # 3(p-1)/(2(p+1)) times the space-time integral of |u|^{p+1}/|x| over |x| > R
    ledger_defect_exact: float = 0.0

    @property
    def M(self) -> tuple[float, ...]:
        return (self.M1, self.M2, self.M3, self.M4, self.M5, self.M6)

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / self.two_E if self.two_E else 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _circle_value(state: FieldState, grid: RadialGrid, R: float) -> float:
    return float(interpolate_radial(state.u, grid, R)) ** 2


def morawetz_report(
    traj_fwd: Trajectory,
    traj_bwd: Trajectory,
    R: float,
    r: float,
    mu1: float,
    mu2: float,
) -> MorawetzReport:
    """All term groups of the Morawetz identity on [-R-r, R+r] and the M_j ledger."""
    cfg = traj_fwd.config
    p = cfg.p
    grid = traj_fwd.grid
    if R <= 0 or r < 0:
        raise ContractError("need R > 0 and r >= 0")
    if not (0 <= mu1 <= 2 * (p - 1) / (p + 1) + 1e-12 and 0 <= mu2 <= 1 / (p + 1) + 1e-12):
        raise ContractError(f"mu1={mu1}, mu2={mu2} outside the admissible range")
    T = R + r
    if not (traj_fwd.covers(T) and traj_bwd.covers(-T)):
        raise ContractError(f"trajectories must cover [-{T}, {T}]")
    if R >= grid.R_max:
        raise ContractError("R must lie inside the grid")
    full = two_sided(traj_fwd, traj_bwd)
    lam1 = 2 * (p - 1) / (p + 1) - mu1
    lam2 = 1 / (p + 1) - mu2
    q = p + 1
    rn = grid.nodes

    def parts(s: FieldState):
        ur = radial_derivative(s.u, grid)
        return ur, s.ut, s.u, np.abs(s.u) ** q

    def bulk_in(s, c_pot):
        ur, ut, u, up = parts(s)
        return radial_integral(ur**2 + ut**2 + c_pot * up, grid, r_max=R) / (2 * R)

    def ext_identity(s):
        _, _, u, up = parts(s)
        f = (p - 1) / (2 * q) * up / rn - 0.25 * u**2 / rn**3
        return radial_integral(f, grid, r_min=R)

    def ext_M4(s):
        _, _, u, up = parts(s)
        return radial_integral(mu1 * up / rn + u**2 / rn**3, grid, r_min=R)

    def ext_tail(s):
        _, _, u, up = parts(s)
        return radial_integral(1.25 * u**2 / rn**3 - lam1 * up / rn, grid, r_min=R)

    def ext_potential(s):
        return radial_integral(np.abs(s.u) ** q / rn, grid, r_min=R)

    def end_in(s, sgn):
        ur, ut, u, up = parts(s)
        f = (
            (R**2 - rn**2) / (2 * R**2) * ur**2
            + 0.5 * (rn / R * ur + u / (2 * R) + sgn * ut) ** 2
            + 3 * u**2 / (8 * R**2)
            + up / q
        )
        return radial_integral(f, grid, r_max=R)

    def end_out(s, sgn):
        ur, ut, u, up = parts(s)
        f = 0.5 * (ur + u / (2 * rn) + sgn * ut) ** 2 + up / q - u**2 / (8 * rn**2)
        return radial_integral(f, grid, r_min=R)

    def end_M6(s, sgn):
        ur, ut, u, up = parts(s)
        f = 0.5 * (ur + u / (2 * rn) + sgn * ut) ** 2 + mu2 * up + u**2 / rn**2
        return radial_integral(f, grid, r_min=R)

    def end_tail(s):
        _, _, u, up = parts(s)
        return radial_integral(9 * u**2 / (8 * rn**2) - lam2 * up, grid, r_min=R)

    states = full.window(-T, T)
    ts = [s.t for s in states]

    def integrate(fn):
        return trapezoid(ts, [fn(s) for s in states])

    interior_bulk = integrate(lambda s: bulk_in(s, (p - 3) / q))
    circle_term = math.pi / (2 * R) * integrate(lambda s: _circle_value(s, grid, R))
    exterior_bulk = integrate(ext_identity)
    s_lo, s_hi = states[0], states[-1]
    endpoint_interior = end_in(s_lo, -1.0) + end_in(s_hi, +1.0)
    endpoint_exterior = end_out(s_lo, -1.0) + end_out(s_hi, +1.0)
    identity_sum = interior_bulk + circle_term + exterior_bulk + endpoint_interior + endpoint_exterior

    s0 = traj_fwd.initial
    E = total_energy(s0, grid, p)
    two_E = 2 * E

    M1 = time_integral(full, -T, -R, lambda s: bulk_in(s, (p - 3) / q)) + time_integral(
        full, R, T, lambda s: bulk_in(s, (p - 3) / q)
    )
    inner_pot = time_integral(full, -R, R, lambda s: radial_integral(np.abs(s.u) ** q, grid, r_max=R))
    M2 = (p - 5) / (2 * q * R) * inner_pot
    M3 = circle_term
    M4 = integrate(ext_M4)
    M5 = endpoint_interior
    M6 = end_M6(s_lo, -1.0) + end_M6(s_hi, +1.0)

    ur0 = radial_derivative(s0.u, grid)
    data_density = ur0**2 + s0.ut**2 + 2 / q * np.abs(s0.u) ** q
    rhs_data = radial_integral(data_density, grid, lambda rr: np.minimum(rr / R, 1.0))
    rhs_tail = end_tail(s_lo) + end_tail(s_hi) + integrate(ext_tail)
    M_sum = M1 + M2 + M3 + M4 + M5 + M6
    core = time_integral(full, -R, R, lambda s: bulk_in(s, 2 / q))
    balance = core + M_sum - two_E - rhs_tail
    defect = 3 * (p - 1) / (2 * q) * integrate(ext_potential)

    return MorawetzReport(
        R=R, r=r, mu1=mu1, mu2=mu2, lambda1=lam1, lambda2=lam2,
        interior_bulk=interior_bulk,
        circle_term=circle_term,
        exterior_bulk=exterior_bulk,
        endpoint_interior=endpoint_interior,
        endpoint_exterior=endpoint_exterior,
        identity_sum=identity_sum,
        two_E=two_E,
        residual=identity_sum - two_E,
        M1=M1, M2=M2, M3=M3, M4=M4, M5=M5, M6=M6,
        rhs_data_term=rhs_data,
        rhs_tail_terms=rhs_tail,
        slack=rhs_data + rhs_tail - M_sum,
        core_interior=core,
        ledger_balance=balance,
        ledger_defect_exact=defect,
    )


# -- Q(t) and its recurrence ----------------------------------------------------


def _q_single(state: FieldState, grid: RadialGrid, p: float, T: float, sign: float,
              mu2: float, c1: float, c2: float) -> float:
    ur = radial_derivative(state.u, grid)
    pot = radial_integral(np.abs(state.u) ** (p + 1), grid)
    if T > grid.nodes[0]:
        inner = radial_integral(
            ur**2 + state.ut**2, grid, lambda r: np.clip((T - r) / T, 0.0, None), r_max=T
        )
    else:
        inner = 0.0
    directional = radial_integral((ur + sign * state.ut) ** 2, grid)
    return mu2 * pot + c1 * inner + c2 * directional


def q_of_t(
    traj_fwd: Trajectory, traj_bwd: Trajectory, t: float, mu2: float,
    c1: float = 1.0, c2: float = 1.0,
) -> float:
    """Q(t) built from the states at +t and -t (u_r + u_t at +t, u_r - u_t at -t)."""
    if t < 0:
        raise ContractError("q_of_t takes t >= 0")
    if not (traj_fwd.covers(t) and traj_bwd.covers(-t)):
        raise ContractError(f"no snapshots at +-{t}")
    grid = traj_fwd.grid
    p = traj_fwd.config.p
    plus = traj_fwd.state_at(t)
    minus = traj_bwd.state_at(-t)
    return _q_single(plus, grid, p, t, +1.0, mu2, c1, c2) + _q_single(
        minus, grid, p, t, -1.0, mu2, c1, c2
    )


def q_energy_bound_constant(p: float, mu2: float, c1: float = 1.0, c2: float = 1.0) -> float:
    """C with Q(t) <= C E.

    Pointwise at one time: mu2|u|^{p+1} <= mu2 (p+1) e_pot,
    c1(|u_r|^2 + |u_t|^2) <= 2 c1 e_kin and c2|u_r +- u_t|^2 <= 4 c2 e_kin;
    two times (+t, -t) each carry energy E.
    """
    return 2.0 * max(mu2 * (p + 1), 2 * c1 + 4 * c2)


@dataclass(frozen=True)
class QRecurrence:
    t: float
    q: float
    lam: float
    history_term: float
    data_term: float
    implied_constant: float


def q_recurrence(
    traj_fwd: Trajectory, traj_bwd: Trajectory, t: float, mu2: float,
    c1: float = 1.0, c2: float = 1.0,
) -> QRecurrence:
    """Evaluate both sides of Q(t) <= (lam/t) int_0^t Q + 2 int min(|x|/t, 1) e0 + C t^(-4/(p-1)).

    ``implied_constant`` is the smallest C making the inequality hold at t.
    """
    if t <= 0:
        raise ContractError("q_recurrence needs t > 0")
    p = traj_fwd.config.p
    grid = traj_fwd.grid
    lam = (5 - p) / (2 * (p + 1) * mu2)
    q_t = q_of_t(traj_fwd, traj_bwd, t, mu2, c1, c2)
    states = traj_fwd.window(0.0, t)
    qs = [q_of_t(traj_fwd, traj_bwd, s.t, mu2, c1, c2) for s in states]
    history = lam / t * trapezoid([s.t for s in states], qs)
    e0 = energy_density(traj_fwd.initial, grid, p)
    data = 2 * radial_integral(e0, grid, lambda r: np.minimum(r / t, 1.0))
    implied = (q_t - history - data) * t ** (4 / (p - 1))
    return QRecurrence(t, q_t, lam, history, data, implied)


# -- global space-time Morawetz estimate ----------------------------------------


# Frozen from the baseline Gaussian run (p = 5, n = 4096, T = 200), where
# I(200) / (E + E^(2/(p+1))) = 0.040; rounded up with a 25% margin.
NAKANISHI_CONSTANT = 0.05


@dataclass(frozen=True)
class NakanishiReport:
    T: float
    cumulative: float
    bound_value: float
    energy: float

    def to_dict(self) -> dict:
        return asdict(self)


def nakanishi_integrand(state: FieldState, grid: RadialGrid, p: float) -> float:
    t = state.t
    r = grid.nodes
    lam3 = (t * t + r * r) ** 1.5
    ur = radial_derivative(state.u, grid)
    f = ((r * state.ut + t * ur) ** 2 + (p - 1) / (p + 1) * t * t * np.abs(state.u) ** (p + 1)) / lam3
    return radial_integral(f, grid)


def nakanishi_series(traj_fwd: Trajectory, T: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Running I(t) for 1 <= t <= T at the snapshot times."""
    T = traj_fwd.t_max if T is None else T
    if T < 1:
        raise ContractError("the space-time estimate starts at t = 1")
    if not traj_fwd.covers(1.0) or not traj_fwd.covers(T):
        raise ContractError(f"trajectory must cover [1, {T}]")
    grid = traj_fwd.grid
    p = traj_fwd.config.p
    ts, cum = cumulative_integral(traj_fwd, 1.0, lambda s: nakanishi_integrand(s, grid, p))
    keep = ts <= T + 1e-9
    return ts[keep], cum[keep]


def nakanishi_cumulative(traj_fwd: Trajectory, T: float) -> NakanishiReport:
    if T < 1:
        raise ContractError("the space-time estimate starts at t = 1")
    grid = traj_fwd.grid
    p = traj_fwd.config.p
    value = time_integral(traj_fwd, 1.0, T, lambda s: nakanishi_integrand(s, grid, p))
    E = total_energy(traj_fwd.initial, grid, p)
    return NakanishiReport(T, value, E + E ** (2 / (p + 1)), E)


# -- energy flux through outgoing characteristics -------------------------------


def _flux_integrand(state: FieldState, grid: RadialGrid, p: float, eta: float) -> float:
    r = state.t - eta
    u = float(interpolate_radial(state.u, grid, r))
    return r * abs(u) ** (p + 1)


def characteristic_flux(traj_fwd: Trajectory, eta: float, t1: float, t2: float) -> float:
    """Integral over [t1, t2] of (t - eta) |u(t - eta, t)|^(p+1) dt."""
    grid = traj_fwd.grid
    if not t2 > t1 > eta + grid.nodes[0]:
        raise ContractError("need t2 > t1 > eta + first node")
    if t2 - eta > grid.nodes[-1]:
        raise ContractError("characteristic leaves the grid")
    p = traj_fwd.config.p
    return time_integral(traj_fwd, t1, t2, lambda s: _flux_integrand(s, grid, p, eta))


def flux_start(eta: float) -> float:
    """Start time used for running characteristic fluxes in the diagnostics stream."""
    return max(eta + 1.0, 0.0)


# -- diagnostics stream ---------------------------------------------------------


@dataclass
class DiagnosticRow:
    t: float
    E_total: float
    E_kappa: dict[float, float]
    interior_weighted: float
    e_in: float
    e_out: float
    Q: float
    nakanishi_cum: float
    char_flux: dict[float, float] = field(default_factory=dict)


def diagnostic_rows(
    traj_fwd: Trajectory,
    traj_bwd: Trajectory | None = None,
    kappa_list: Iterable[float] | None = None,
    mu2: float | None = None,
    char_etas: Iterable[float] = (),
) -> list[DiagnosticRow]:
    """One row per forward snapshot.  Q is NaN when no backward run is supplied."""
    cfg = traj_fwd.config
    grid = traj_fwd.grid
    p = cfg.p
    kappas = tuple(cfg.kappa_list if kappa_list is None else kappa_list)
    mu2 = 0.95 / (p + 1) if mu2 is None else mu2
    etas = tuple(char_etas)

    if traj_fwd.t_max >= 1.0:
        nts, ncum = cumulative_integral(traj_fwd, 1.0, lambda s: nakanishi_integrand(s, grid, p))
    else:
        nts, ncum = np.array([]), np.array([])
    flux_tables = {}
    for eta in etas:
        t1 = flux_start(eta)
        t_last = min(traj_fwd.t_max, grid.nodes[-1] + eta)
        if t_last > t1:
            later = [s for s in traj_fwd.snapshots if t1 < s.t <= t_last + 1e-9]
            states = [traj_fwd.state_at(t1)] + later
            ts = np.array([s.t for s in states])
            vals = np.array([_flux_integrand(s, grid, p, eta) for s in states])
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts))])
            flux_tables[eta] = (ts, cum)
        else:
            flux_tables[eta] = (np.array([]), np.array([]))

    def lookup(ts, cum, t):
        if ts.size == 0 or t < ts[0] - 1e-9:
            return 0.0
        k = int(np.argmin(np.abs(ts - t)))
        if abs(ts[k] - t) > 1e-9:
            return float(cum[-1]) if t > ts[-1] else 0.0
        return float(cum[k])

    rows = []
    for s in traj_fwd.snapshots:
        e = energy_density(s, grid, p)
        E_total = radial_integral(e, grid)
        E_kappa = {k: radial_integral(e, grid, lambda r, k=k: r**k + 1.0) for k in kappas}
        if traj_bwd is not None and traj_bwd.covers(-s.t):
            Q = q_of_t(traj_fwd, traj_bwd, s.t, mu2)
        else:
            Q = math.nan
        rows.append(
            DiagnosticRow(
                t=s.t,
                E_total=E_total,
                E_kappa=E_kappa,
                interior_weighted=interior_weighted_energy(s, grid, p),
                e_in=directional_energy(s, grid, p, INWARD),
                e_out=directional_energy(s, grid, p, OUTWARD),
                Q=Q,
                nakanishi_cum=lookup(nts, ncum, s.t),
                char_flux={eta: lookup(*flux_tables[eta], s.t) for eta in etas},
            )
        )
    return rows

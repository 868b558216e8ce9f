"""Outgoing characteristics, radiation profiles and scattering diagnostics.

With w = r^(1/2) u the radial equation becomes the 1-D problem
w_tt - w_rr = f,  f = r^(-3/2) u / 4 - r^(1/2) |u|^(p-1) u,
and v+- = w_t -+ w_r are transported by (d_t +- d_r) v+- = f.  Along
r = t - eta the value v+(t - eta, t) settles to g+(eta), and

    ||(u0, u1)||^2_{H1-dot x L2} = pi * integral |g+(eta)|^2 d eta

for free waves (the exterior energy density 2 pi r (u_r^2 + u_t^2) tends to
2 pi (g+/2)^2 * 2 = pi g+^2 along the outgoing cone).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ContractError,
    FieldState,
    RadialGrid,
    effective_support,
    line_integral,
    radial_derivative,
    radial_integral,
)
from .diagnostics import trapezoid
from .solver import Trajectory, _march


def w_transform(state: FieldState, grid: RadialGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (w, v_plus, v_minus) at the nodes."""
    sq = np.sqrt(grid.nodes)
    w = sq * state.u
    wt = sq * state.ut
    wr = np.gradient(w, grid.dr, edge_order=2)
    return w, wt - wr, wt + wr


def characteristic_source(state: FieldState, grid: RadialGrid, p: float) -> np.ndarray:
    r = grid.nodes
    u = state.u
    return 0.25 * r**-1.5 * u - np.sqrt(r) * np.abs(u) ** (p - 1) * u


def transport_residual(traj: Trajectory, t: float, r_lo: float, r_hi: float) -> float:
    """L2(r_lo, r_hi) norm of (d_t + d_r) v+ - f at time t.

    d_t uses the neighbouring snapshots (centred), d_r centred differences.
    """
    times = traj.times
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 or k == 0 or k == times.size - 1:
        raise ContractError("t must be an interior snapshot time")
    grid = traj.grid
    s_prev, s, s_next = traj.snapshots[k - 1], traj.snapshots[k], traj.snapshots[k + 1]
    _, vp_prev, _ = w_transform(s_prev, grid)
    _, vp, _ = w_transform(s, grid)
    _, vp_next, _ = w_transform(s_next, grid)
    dvdt = (vp_next - vp_prev) / (s_next.t - s_prev.t)
    dvdr = np.gradient(vp, grid.dr, edge_order=2)
    res = dvdt + dvdr - characteristic_source(s, grid, traj.config.p)
    return math.sqrt(line_integral(res**2, grid, r_lo, r_hi))


def _v_plus_on_characteristics(state: FieldState, grid: RadialGrid, eta: np.ndarray) -> np.ndarray:
    _, vp, _ = w_transform(state, grid)
    return np.interp(state.t - eta, grid.nodes, vp)


@dataclass
class RadiationProfile:
    eta_nodes: np.ndarray
    g_plus: np.ndarray
    extracted_at: list[float]
    cauchy_l2: dict[tuple[float, float], float] = field(default_factory=dict)

    @property
    def window_length(self) -> float:
        return float(self.eta_nodes[-1] - self.eta_nodes[0])

    def energy(self) -> float:
        """pi * integral of g+^2 over the window."""
        return math.pi * trapezoid(self.eta_nodes, self.g_plus**2)

    def __call__(self, eta) -> np.ndarray:
        return np.interp(eta, self.eta_nodes, self.g_plus, left=0.0, right=0.0)

    def to_dict(self) -> dict:
        return {
            "eta_nodes": self.eta_nodes.tolist(),
            "g_plus": self.g_plus.tolist(),
            "extracted_at": list(self.extracted_at),
            "cauchy_l2": [
                {"t_i": a, "t_j": b, "value": v} for (a, b), v in self.cauchy_l2.items()
            ],
        }


def extract_radiation(
    traj: Trajectory,
    eta_window: tuple[float, float],
    extraction_times,
    d_eta: float | None = None,
) -> RadiationProfile:
    """Sample v+ along r = t - eta at each extraction time; keep the latest as g+."""
    eta_min, eta_max = map(float, eta_window)
    if not eta_max > eta_min:
        raise ContractError("eta window must have positive length")
    times = sorted(float(t) for t in extraction_times)
    if not times:
        raise ContractError("need at least one extraction time")
    grid = traj.grid
    for t in times:
        if not t - eta_max > 1.0:
            raise ContractError(f"extraction time {t} too close to eta_max={eta_max}")
        if t - eta_min > grid.nodes[-1]:
            raise ContractError(f"window leaves the grid at t={t}")
        if not traj.covers(t):
            raise ContractError(f"trajectory does not reach t={t}")
    d_eta = grid.dr if d_eta is None else d_eta
    m = max(int(round((eta_max - eta_min) / d_eta)), 1)
    eta = np.linspace(eta_min, eta_max, m + 1)
    samples = [_v_plus_on_characteristics(traj.state_at(t), grid, eta) for t in times]
    cauchy = {}
    for (ta, va), (tb, vb) in zip(zip(times, samples), zip(times[1:], samples[1:])):
        cauchy[(ta, tb)] = trapezoid(eta, (va - vb) ** 2)
    return RadiationProfile(eta, samples[-1].copy(), times, cauchy)


def cauchy_transport(
    traj: Trajectory, eta_window: tuple[float, float], t1: float, t2: float, d_eta: float | None = None
) -> float:
    """Second route to the Cauchy difference of v+ between t1 and t2.

    Integrates the source f along each characteristic r = t - eta over the
    recorded snapshots in [t1, t2] instead of differencing two samples of v+.
    Phase errors of the scheme shift f only slightly, so this stays accurate
    long after direct differences are dominated by dispersion.
    """
    eta_min, eta_max = map(float, eta_window)
    if not (eta_max > eta_min and t2 > t1):
        raise ContractError("need a nonempty window and t1 < t2")
    if not t1 - eta_max > 1.0:
        raise ContractError("characteristics must start away from the origin")
    grid = traj.grid
    d_eta = grid.dr if d_eta is None else d_eta
    eta = np.linspace(eta_min, eta_max, max(int(round((eta_max - eta_min) / d_eta)), 1) + 1)
    states = traj.window(t1, t2)
    ts = np.array([s.t for s in states])
    fs = np.array(
        [np.interp(s.t - eta, grid.nodes, characteristic_source(s, grid, traj.config.p)) for s in states]
    )
    incr = np.trapezoid(fs, ts, axis=0)
    return trapezoid(eta, incr**2)


def exterior_error(state: FieldState, grid: RadialGrid, profile: RadiationProfile, eta: float) -> float:
    """Integral over r > t - eta of |r^(1/2) u_t - g(t-r)/2|^2 + |r^(1/2) u_r + g(t-r)/2|^2 dr."""
    r = grid.nodes
    g = profile(state.t - r)
    sq = np.sqrt(r)
    ur = radial_derivative(state.u, grid)
    f = (sq * state.ut - 0.5 * g) ** 2 + (sq * ur + 0.5 * g) ** 2
    return line_integral(f, grid, r_min=max(state.t - eta, 0.0))


def zero_profile(eta_window=(0.0, 1.0)) -> RadiationProfile:
    eta = np.array(eta_window, dtype=float)
    return RadiationProfile(eta, np.zeros(2), [])


def _nearest_snapshot(traj: Trajectory, t: float) -> FieldState:
    k = int(np.argmin(np.abs(traj.times - t)))
    return traj.snapshots[k]


def scattering_cauchy(traj: Trajectory, T1: float, T2: float) -> float:
    """Energy-norm distance between S_L(T2 - T1) u(T1) and u(T2).

    Both times snap to the nearest recorded snapshot and the free flow uses
    the trajectory's own step, so no time interpolation error enters the
    comparison.  Backward trajectories take negative times with
    0 > T1 > T2.
    """
    if T1 == T2:
        return 0.0
    if not (0 < T1 < T2 or 0 > T1 > T2):
        raise ContractError("need 0 < T1 < T2 (or 0 > T1 > T2 on a backward run)")
    grid = traj.grid
    if not (traj.covers(T1) and traj.covers(T2)):
        raise ContractError("both times must lie in the trajectory")
    start = _nearest_snapshot(traj, T1)
    end = _nearest_snapshot(traj, T2)
    span = end.t - start.t
    reach = effective_support(start, grid) + abs(span) + 8 * grid.dr
    if reach > grid.R_max:
        raise ContractError(f"linear continuation needs R_max >= {reach:g}")
    nsteps = max(int(round(abs(span) / abs(traj.dt))), 1)
    *_, free = _march(start, grid, span / nsteps, nsteps, 1.0, False)
    du = radial_derivative(free.u - end.u, grid)
    dut = free.ut - end.ut
    return math.sqrt(radial_integral(du**2 + dut**2, grid))

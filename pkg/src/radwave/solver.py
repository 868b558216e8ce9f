"""Leapfrog evolution of the radial defocusing wave equation.

    u_tt = u_rr + u_r / r - nonlinear * |u|^(p-1) u

The Laplacian is written in flux form (1/r)(r u_r)_r with fluxes on cell
faces.  The face at r = 0 carries zero flux (even reflection), the face at
R_max sees a ghost value -u_{n-1} (homogeneous Dirichlet).  Time stepping is
kick-drift-kick Stormer-Verlet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import (
    BlowUpError,
    ContractError,
    FieldState,
    RadialGrid,
    SimConfig,
    effective_support,
    make_grid,
    sample_initial_data,
)

DEFAULT_CFL = 0.45


def laplacian(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    dr = grid.dr
    faces = grid.faces
    flux = np.empty(grid.n + 1)
    flux[0] = 0.0
    flux[1:-1] = faces[1:-1] * (u[1:] - u[:-1]) / dr
    flux[-1] = faces[-1] * (-2.0 * u[-1]) / dr
    return (flux[1:] - flux[:-1]) / (grid.nodes * dr)


def acceleration(u: np.ndarray, grid: RadialGrid, p: float, nonlinear: bool) -> np.ndarray:
    a = laplacian(u, grid)
    if nonlinear:
        a -= np.abs(u) ** (p - 1.0) * u
    return a


def _check_finite(u: np.ndarray, ut: np.ndarray, t: float) -> None:
    if not (np.isfinite(u).all() and np.isfinite(ut).all()):
        raise BlowUpError(t)


def step(
    state: FieldState,
    grid: RadialGrid,
    dt: float,
    p: float,
    nonlinear: bool,
    cfl: float = DEFAULT_CFL,
) -> FieldState:
    """One kick-drift-kick update; negative dt steps backward in time."""
    if abs(dt) > cfl * grid.dr * (1 + 1e-12):
        raise ContractError(f"|dt|={abs(dt):g} exceeds cfl*dr={cfl * grid.dr:g}")
    if state.n != grid.n:
        raise ContractError("state does not live on this grid")
    u = state.u.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        v = state.ut + 0.5 * dt * acceleration(u, grid, p, nonlinear)
        u += dt * v
        v += 0.5 * dt * acceleration(u, grid, p, nonlinear)
    t = state.t + dt
    _check_finite(u, v, t)
    return FieldState(t, u, v)


def _march(
    state: FieldState, grid: RadialGrid, dt: float, nsteps: int, p: float, nonlinear: bool,
    every: int = 0,
) -> Iterator[FieldState]:
    """Advance nsteps steps, yielding every ``every``-th state and the last one."""
    u = state.u.copy()
    v = state.ut.copy()
    a = acceleration(u, grid, p, nonlinear)
    half = 0.5 * dt
    for k in range(1, nsteps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            v += half * a
            u += dt * v
            a = acceleration(u, grid, p, nonlinear)
            v += half * a
        if not np.isfinite(v).all():
            raise BlowUpError(state.t + k * dt)
        if (every and k % every == 0) or k == nsteps:
            yield FieldState(state.t + k * dt, u, v)


def step_count(span: float, dr: float, cfl: float) -> int:
    """Smallest step count whose uniform step |span|/N respects the CFL bound."""
    if span == 0:
        return 0
    return int(math.ceil(abs(span) / (cfl * dr) - 1e-9))


@dataclass(frozen=True, eq=False)
class Trajectory:
    config: SimConfig
    snapshots: tuple[FieldState, ...]
    dt: float
    steps: int = 0

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        times = np.array([s.t for s in self.snapshots])
        if times.size > 1:
            d = np.diff(times)
            if not ((d > 0).all() or (d < 0).all()):
                raise ContractError("snapshot times must be strictly monotone")
        object.__setattr__(self, "_times", times)

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.config.dr, self.config.n)

    @property
    def times(self) -> np.ndarray:
        return self._times.copy()

    @property
    def initial(self) -> FieldState:
        return self.snapshots[0]

    @property
    def final(self) -> FieldState:
        return self.snapshots[-1]

    @property
    def t_min(self) -> float:
        return float(self._times.min())

    @property
    def t_max(self) -> float:
        return float(self._times.max())

    def covers(self, t: float, tol: float = 1e-9) -> bool:
        return self.t_min - tol <= t <= self.t_max + tol

    def _ascending(self) -> tuple[np.ndarray, tuple[FieldState, ...]]:
        if self._times.size > 1 and self._times[1] < self._times[0]:
            return self._times[::-1], self.snapshots[::-1]
        return self._times, self.snapshots

    def state_at(self, t: float, tol: float = 1e-9) -> FieldState:
        """State at time t: an exact snapshot, or cubic Hermite interpolation.

        The interpolant uses (u, u_t, u_tt) at the two bracketing snapshots,
        u_tt coming from the equation itself.
        """
        if not self.covers(t, tol):
            raise ContractError(f"t={t!r} outside trajectory span [{self.t_min}, {self.t_max}]")
        times, snaps = self._ascending()
        k = int(np.searchsorted(times, t))
        for j in (k - 1, k):
            if 0 <= j < times.size and abs(times[j] - t) <= tol:
                return snaps[j]
        k = min(max(k, 1), times.size - 1)
        return hermite_state(snaps[k - 1], snaps[k], t, self.grid, self.config.p, self.config.nonlinear)

    def window(self, t1: float, t2: float, tol: float = 1e-9) -> list[FieldState]:
        """States at t1, every snapshot strictly inside (t1, t2), and t2 (ascending)."""
        if t2 < t1:
            raise ContractError("window requires t1 <= t2")
        times, snaps = self._ascending()
        inside = [s for tk, s in zip(times, snaps) if t1 + tol < tk < t2 - tol]
        if t2 - t1 <= tol:
            return [self.state_at(t1, tol)]
        return [self.state_at(t1, tol)] + inside + [self.state_at(t2, tol)]


def hermite_state(
    s0: FieldState, s1: FieldState, t: float, grid: RadialGrid, p: float, nonlinear: bool
) -> FieldState:
    h = s1.t - s0.t
    x = (t - s0.t) / h
    a0 = acceleration(s0.u, grid, p, nonlinear)
    a1 = acceleration(s1.u, grid, p, nonlinear)
    h00 = 2 * x**3 - 3 * x**2 + 1
    h10 = x**3 - 2 * x**2 + x
    h01 = -2 * x**3 + 3 * x**2
    h11 = x**3 - x**2
    u = h00 * s0.u + h10 * h * s0.ut + h01 * s1.u + h11 * h * s1.ut
    ut = h00 * s0.ut + h10 * h * a0 + h01 * s1.ut + h11 * h * a1
    return FieldState(t, u, ut)


def evolve(config: SimConfig, initial: FieldState | None = None) -> Trajectory:
    """Run the configured evolution and record snapshots every ``output_every`` steps.

    Backward runs evolve the conjugate data (u0, -u1) forward and map each
    state back with (t, u, ut) -> (-t, u, -ut); for the symmetric leapfrog
    this is identical to stepping with -dt.
    """
    grid = make_grid(config)
    state = initial if initial is not None else sample_initial_data(config.data, grid)
    backward = config.direction == "backward"
    if backward:
        state = state.time_reversed()
    nsteps = step_count(config.t_final, config.dr, config.cfl)
    dt = config.t_final / nsteps if nsteps else config.cfl * config.dr
    snaps = [state]
    snaps.extend(_march(state, grid, dt, nsteps, config.p, config.nonlinear, config.output_every))
    if backward:
        snaps = [s.time_reversed() for s in snaps]
        dt = -dt
    return Trajectory(config, tuple(snaps), dt, nsteps)


def linear_propagate(
    state: FieldState, span: float, grid: RadialGrid, cfl: float = DEFAULT_CFL,
    check_margin: bool = True,
) -> FieldState:
    """Free-wave flow S_L(span) applied to (u, ut) on the grid."""
    if span == 0:
        return state
    if check_margin:
        reach = effective_support(state, grid) + abs(span) + 8 * grid.dr
        if reach > grid.R_max:
            raise ContractError(
                f"linear propagation over {span:g} needs R_max >= {reach:g}, have {grid.R_max:g}"
            )
    nsteps = step_count(span, grid.dr, cfl)
    dt = span / nsteps
    *_, last = _march(state, grid, dt, nsteps, 1.0, False)
    return last


def two_sided(forward: Trajectory, backward: Trajectory) -> Trajectory:
    """Join a backward and a forward run of the same data into one ascending trajectory."""
    if backward.config.direction != "backward" or forward.config.direction != "forward":
        raise ContractError("two_sided expects (forward, backward) trajectories")
    f0, b0 = forward.initial, backward.initial
    if not (np.array_equal(f0.u, b0.u) and np.array_equal(f0.ut, b0.ut)):
        raise ContractError("forward and backward runs start from different data")
    snaps = list(reversed(backward.snapshots)) + list(forward.snapshots[1:])
    return Trajectory(forward.config, tuple(snaps), forward.dt, forward.steps + backward.steps)

"""Energy-conserving finite differences for omega(x) u_tt = u_xx.

Forward evolution uses the symmetric three-point leapfrog with mass
weights omega(x_i) on the interior nodes of a uniform grid of n cells.
The scheme conserves a staggered quadratic energy exactly (up to
round-off), and because it is linear with time-independent
coefficients, the same holds for every k-th time-difference sequence,
which is how the higher energies E_k are tracked.

The sidewise solver re-reads the same equation as an evolution in x
(u_xx = omega u_tt) and marches a time slice across the interval while
shrinking the transverse window one grid point per step - a superset
of the true domain-of-dependence shrink rate sqrt(omega^*) dx per unit
x at the default CFL number.

Boundary traces use third-order one-sided differences.  Rough
coefficients are sampled pointwise at the nodes; no smoothing is ever
applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Union

import numpy as np

from .coeff import Coefficient

__all__ = [
    "WaveTrajectory",
    "BoundaryForcing",
    "SidewiseSlice",
    "SidewiseResult",
    "solver_time_grid",
    "evolve",
    "evolve_inhomogeneous",
    "sidewise_evolve",
    "apply_D_omega",
    "trace_sobolev_norm",
]

_DEFAULT_CFL = 0.9


# --------------------------------------------------------------------------
# grids and energies
# --------------------------------------------------------------------------

def _space_grid(omega: Coefficient, resolution: int):
    if resolution < 8 or resolution & (resolution - 1):
        raise ValueError("resolution must be a power of two (>= 8)")
    L = omega.length
    x = np.linspace(0.0, L, resolution + 1)
    om = omega(x)
    if om.min() <= 0 or omega.omega_lower <= 0:
        raise ValueError("density violates the hyperbolicity lower bound")
    return x, om


def solver_time_grid(omega: Coefficient, T: float, resolution: int,
                     cfl: float = _DEFAULT_CFL):
    """The (dt, steps) the solver will use for this grid.

    dt = T/steps with steps the smallest count satisfying
    dt <= cfl * dx * sqrt(omega_*); cfl may not exceed 0.9.
    """
    if not (0 < cfl <= 0.9):
        raise ValueError("CFL number must lie in ]0, 0.9]")
    if T <= 0:
        raise ValueError("T must be positive")
    x, om = _space_grid(omega, resolution)
    dx = x[1] - x[0]
    dt_max = cfl * dx * math.sqrt(om.min())
    steps = max(1, int(math.ceil(T / dt_max - 1e-12)))
    return T / steps, steps


def _staggered_energy(om, u_new, u_old, dt, dx):
    # exactly conserved by the homogeneous leapfrog: kinetic part on the
    # nodes (trapezoid weights), potential part as the symmetric product
    # of consecutive gradients
    v = (u_new - u_old) / dt
    w = om * v * v
    kin = 0.5 * dx * (np.sum(w) - 0.5 * (w[0] + w[-1]))
    pot = 0.5 * np.dot(np.diff(u_new), np.diff(u_old)) / dx
    return kin + pot


def _diff_k(levels, k, dt):
    """k-th time difference of a window of k+1 consecutive levels."""
    acc = np.zeros_like(levels[0])
    for i in range(k + 1):
        acc += ((-1.0) ** (k - i)) * math.comb(k, i) * levels[i]
    return acc / dt ** k


def _trace_left(u, dx):
    return (-11.0 * u[0] + 18.0 * u[1] - 9.0 * u[2] + 2.0 * u[3]) / (6.0 * dx)


def _trace_right(u, dx):
    return (11.0 * u[-1] - 18.0 * u[-2] + 9.0 * u[-3] - 2.0 * u[-4]) / (6.0 * dx)


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WaveTrajectory:
    """One forward run: grid, traces, energy series, sparse snapshots.

    ``energies[k]`` tracks the conserved energy of the k-th
    time-difference sequence at the staggered times ``energy_times[k]``.
    ``levels`` holds the final two solution levels (u at T-dt and T),
    which restart the recurrence exactly: evolving from the swapped pair
    runs the dynamics backward (the scheme is time-symmetric).
    """

    x: np.ndarray
    omega_nodes: np.ndarray
    dt: float
    steps: int
    T: float
    cfl_number: float
    order: int
    times: np.ndarray
    trace_left: np.ndarray
    trace_right: np.ndarray
    energies: Mapping[int, np.ndarray]
    energy_times: Mapping[int, np.ndarray]
    snapshot_times: np.ndarray
    snapshots_u: tuple
    snapshots_ut: tuple
    levels: tuple
    homogeneous: bool
    flags: tuple = ()
    pz_ratios: Optional[Mapping[str, float]] = None
    slice_record: Optional["SidewiseSlice"] = None

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def energy_drift(self, k: int = 0) -> float:
        e = self.energies[k]
        ref = max(abs(e[0]), 1e-300)
        return float(np.max(np.abs(e - e[0])) / ref)

    def final_state(self):
        """(u, u_t) at t = T, the velocity by one-sided differencing."""
        u_prev, u_last = self.levels
        # second-order one-sided needs three levels; reconstruct the
        # missing one from the scheme itself (interior update reversed)
        ut = (u_last - u_prev) / self.dt
        return u_last.copy(), ut

    def to_summary(self) -> dict:
        return {
            "resolution": len(self.x) - 1,
            "dt": self.dt,
            "steps": self.steps,
            "T": self.T,
            "cfl": self.cfl_number,
            "order": self.order,
            "homogeneous": self.homogeneous,
            "energy_drift": {k: self.energy_drift(k) for k in self.energies},
            "flags": list(self.flags),
            "pz_ratios": dict(self.pz_ratios) if self.pz_ratios else None,
        }


@dataclass(frozen=True)
class BoundaryForcing:
    """Sampled Dirichlet data (f at x=0, g at x=1) on the solver grid."""

    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    smoothness: str = "unknown"

    def __post_init__(self):
        if not (len(self.times) == len(self.left) == len(self.right)):
            raise ValueError("forcing arrays must share one time grid")

    @property
    def compatible(self) -> bool:
        """True when f, g and their first derivatives vanish at t = 0,
        judged against the signals' own value and slope scales."""
        dt = self.times[1] - self.times[0]
        scale = max(float(np.max(np.abs(self.left))),
                    float(np.max(np.abs(self.right))))
        if scale == 0.0:
            return True
        slope = max(float(np.max(np.abs(np.diff(self.left)))),
                    float(np.max(np.abs(np.diff(self.right))))) / dt
        rate0 = max(abs(self.left[1] - self.left[0]),
                    abs(self.right[1] - self.right[0])) / dt
        return bool(
            abs(self.left[0]) <= 1e-9 * scale
            and abs(self.right[0]) <= 1e-9 * scale
            and rate0 <= 1e-4 * max(slope, scale))

    def sup_norms(self, k: int) -> float:
        """max over j <= k of sup |d^j/dt^j| of both signals combined.

        The j-th derivative is estimated by the j-th forward difference
        divided by dt^j (no edge stencils, so repeated differencing
        does not manufacture boundary artifacts)."""
        dt = self.times[1] - self.times[0]
        out = 0.0
        for sig in (self.left, self.right):
            g = np.asarray(sig, dtype=float)
            for j in range(k + 1):
                d = np.diff(g, n=j) if j else g
                if len(d):
                    out = max(out, float(np.max(np.abs(d))) / dt ** j)
        return out


def _first_level(u0, v0, om, dt, dx, inv_om=None):
    """Taylor start: u(dt) to fourth-order local accuracy."""
    if inv_om is None:
        inv_om = 1.0 / om
    lap0 = np.zeros_like(u0)
    lap0[1:-1] = (u0[2:] - 2 * u0[1:-1] + u0[:-2]) / dx ** 2
    lap1 = np.zeros_like(v0)
    lap1[1:-1] = (v0[2:] - 2 * v0[1:-1] + v0[:-2]) / dx ** 2
    u1 = (u0 + dt * v0 + 0.5 * dt ** 2 * inv_om * lap0
          + dt ** 3 / 6.0 * inv_om * lap1)
    u1[0] = 0.0
    u1[-1] = 0.0
    return u1


def _run_leapfrog(x, om, dt, steps, u_start, u_next, k_max,
                  boundary=None, snapshot_stride=None, slice_at=None,
                  energy_stride=1):
    """Advance the recurrence; return traces, energies, snapshots.

    ``boundary``: optional (left_values, right_values) arrays of length
    steps+1 imposed as Dirichlet values (index m = time level).  The
    inner loop is allocation-free: k_max+2 node buffers rotate, the
    update runs in place, and energies are evaluated every
    ``energy_stride``-th level.
    """
    n = len(x) - 1
    dx = x[1] - x[0]
    lam = dt ** 2 / dx ** 2 / om[1:-1]
    coef = 2.0 - 2.0 * lam
    nbuf = max(3, k_max + 2)    # >= 3 so the write target never aliases
    bufs = [np.array(u_start, dtype=float, copy=True)]
    bufs.append(np.array(u_next, dtype=float, copy=True))
    for _ in range(nbuf - 2):
        bufs.append(np.zeros_like(bufs[0]))
    order = [0, 1]          # buffer indices, oldest level first
    free = list(range(2, nbuf))
    scratch = np.empty(n - 1)

    trace_l = np.empty(steps + 1)
    trace_r = np.empty(steps + 1)
    trace_l[0], trace_r[0] = _trace_left(u_start, dx), _trace_right(u_start, dx)
    trace_l[1], trace_r[1] = _trace_left(u_next, dx), _trace_right(u_next, dx)

    energies = {k: [] for k in range(k_max + 1)}
    energy_t = {k: [] for k in range(k_max + 1)}

    def push_energies(m_new):
        held = [bufs[i] for i in order]
        for k in range(k_max + 1):
            if len(held) >= k + 2:
                d_old = _diff_k(held[-(k + 2):-1], k, dt)
                d_new = _diff_k(held[-(k + 1):], k, dt)
                energies[k].append(_staggered_energy(om, d_new, d_old, dt, dx))
                energy_t[k].append((m_new - (k + 1) / 2.0) * dt)

    push_energies(1)

    if snapshot_stride is None:
        snapshot_stride = max(1, steps // 128)
    snaps_t, snaps_u, snaps_ut = [0.0], [u_start.copy()], [None]

    slice_idx = None
    slice_u, slice_ux = None, None

    def slice_sample(u, m):
        slice_u[m] = u[slice_idx]
        slice_ux[m] = (u[slice_idx - 2] - 8 * u[slice_idx - 1]
                       + 8 * u[slice_idx + 1]
                       - u[slice_idx + 2]) / (12 * dx)

    if slice_at is not None:
        slice_idx = min(max(int(round(slice_at / dx)), 2), n - 2)
        slice_u = np.empty(steps + 1)
        slice_ux = np.empty(steps + 1)
        slice_sample(bufs[0], 0)
        slice_sample(bufs[1], 1)

    u_prev, u_cur = bufs[order[-2]], bufs[order[-1]]
    for m in range(1, steps):
        if free:
            tgt_idx = free.pop()
        else:
            tgt_idx = order.pop(0)
        target = bufs[tgt_idx]

        snap_now = (m % snapshot_stride == 0)
        if snap_now:
            snap_prev = u_prev.copy()
            snap_cur = u_cur.copy()

        # target <- (2 - 2 lam) u_cur - u_prev + lam (u_cur>> + u_cur<<),
        # in place, five memory passes
        tg = target[1:-1]
        np.multiply(u_cur[1:-1], coef, out=tg)
        tg -= u_prev[1:-1]
        np.add(u_cur[2:], u_cur[:-2], out=scratch)
        scratch *= lam
        tg += scratch
        if boundary is None:
            target[0] = 0.0
            target[-1] = 0.0
        else:
            target[0] = boundary[0][m + 1]
            target[-1] = boundary[1][m + 1]
        order.append(tgt_idx)

        trace_l[m + 1] = _trace_left(target, dx)
        trace_r[m + 1] = _trace_right(target, dx)

        if (m + 1) % energy_stride == 0 or (
                m + 1 == steps and steps % energy_stride != 0):
            push_energies(m + 1)

        if snap_now:
            snaps_t.append(m * dt)
            snaps_u.append(snap_cur)
            snaps_ut.append((target - snap_prev) / (2 * dt))
        if slice_idx is not None:
            slice_sample(target, m + 1)
        u_prev, u_cur = u_cur, target

    if steps >= 2:
        snaps_t.append(steps * dt)
        snaps_u.append(u_cur.copy())
        held = [bufs[i] for i in order]
        if len(held) >= 3:
            ut_T = (3 * held[-1] - 4 * held[-2] + held[-3]) / (2 * dt)
        else:
            ut_T = (held[-1] - held[-2]) / dt
        snaps_ut.append(ut_T)

    packed_energy = {k: np.asarray(v) for k, v in energies.items()}
    packed_times = {k: np.asarray(v) for k, v in energy_t.items()}
    slice_rec = None
    if slice_idx is not None:
        slice_rec = (slice_idx * dx, slice_u, slice_ux)
    return (trace_l, trace_r, packed_energy, packed_times,
            snaps_t, snaps_u, snaps_ut, (u_prev.copy(), u_cur.copy()),
            slice_rec)


def _as_samples(f: Union[Callable, np.ndarray, None], x: np.ndarray):
    if f is None:
        return np.zeros_like(x)
    if callable(f):
        return np.asarray(f(x), dtype=float)
    arr = np.asarray(f, dtype=float)
    if arr.shape != x.shape:
        raise ValueError("initial data array does not match the grid")
    return arr.copy()


def evolve(omega: Coefficient, u0, u1, T: float, resolution: int,
           k_max: int = 2, cfl: float = _DEFAULT_CFL,
           snapshot_stride: Optional[int] = None,
           record_slice_at: Optional[float] = None,
           start_levels: Optional[tuple] = None,
           energy_stride: int = 1) -> WaveTrajectory:
    """Evolve omega u_tt = u_xx with homogeneous Dirichlet conditions.

    ``u0``/``u1`` are callables on [0, L] or node arrays; both must
    vanish at the endpoints.  ``start_levels``, when given, bypasses the
    Taylor start and seeds the recurrence verbatim with two consecutive
    levels (u0/u1 must then be None) - this is how a finished run is
    continued or reversed exactly.

    ``record_slice_at`` captures (u, u_x) at the nearest interior node
    every step, packaged as a :class:`SidewiseSlice`.
    """
    x, om = _space_grid(omega, resolution)
    dx = x[1] - x[0]
    dt, steps = solver_time_grid(omega, T, resolution, cfl)

    if start_levels is not None:
        if u0 is not None or u1 is not None:
            raise ValueError("start_levels replaces u0/u1")
        a, b = start_levels
        ua, ub = np.asarray(a, dtype=float).copy(), np.asarray(b, dtype=float).copy()
        if ua.shape != x.shape or ub.shape != x.shape:
            raise ValueError("start levels do not match the grid")
    else:
        ua = _as_samples(u0, x)
        ub_v = _as_samples(u1, x)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(ua))))
        if abs(ua[0]) > tol or abs(ua[-1]) > tol:
            raise ValueError("u0 must vanish at the endpoints")
        ua[0] = ua[-1] = 0.0
        ub = _first_level(ua, ub_v, om, dt, dx)

    (tl, tr, en, ent, st, su, sut, last,
     srec) = _run_leapfrog(x, om, dt, steps, ua, ub, k_max,
                           snapshot_stride=snapshot_stride,
                           slice_at=record_slice_at,
                           energy_stride=energy_stride)
    if st is not None and sut[0] is None:
        sut[0] = (_as_samples(u1, x) if start_levels is None
                  else (ub - ua) / dt)
    slice_obj = None
    if srec is not None:
        x0, su_series, sux_series = srec
        slice_obj = SidewiseSlice(
            x0=x0, times=np.arange(steps + 1) * dt,
            u=su_series, u_x=sux_series)
    return WaveTrajectory(
        x=x, omega_nodes=om, dt=dt, steps=steps, T=T, cfl_number=cfl,
        order=2, times=np.arange(steps + 1) * dt,
        trace_left=tl, trace_right=tr,
        energies=en, energy_times=ent,
        snapshot_times=np.asarray(st), snapshots_u=tuple(su),
        snapshots_ut=tuple(sut), levels=last, homogeneous=True,
        slice_record=slice_obj)


def evolve_inhomogeneous(omega: Coefficient, forcing: BoundaryForcing,
                         T: float, resolution: int, k_max: int = 0,
                         cfl: float = _DEFAULT_CFL,
                         snapshot_stride: Optional[int] = None,
                         energy_stride: Optional[int] = None
                         ) -> WaveTrajectory:
    """Evolve from zero data with Dirichlet values u(t,0)=f, u(t,1)=g.

    The forcing must be sampled exactly on the solver time grid (use
    :func:`solver_time_grid`).  A forcing that does not vanish at t=0
    is flagged (first-step convention: the boundary node jumps to f(0)
    at the initial level, the interior starts at rest) but not
    rejected.

    The trajectory's ``pz_ratios`` reports
    ``interior`` = sup_t E(t) / (omega^* (||f||_{W2inf}^2 + ||g||_{W2inf}^2)),
    ``flux`` = int (|u_x(t,0)|^2 + |u_x(t,1)|^2) dt
               / (omega^* (||f||_{W3inf}^2 + ||g||_{W3inf}^2)),
    both computed with discrete norms.
    """
    x, om = _space_grid(omega, resolution)
    dx = x[1] - x[0]
    dt, steps = solver_time_grid(omega, T, resolution, cfl)
    if len(forcing.times) != steps + 1 or abs(
            forcing.times[1] - forcing.times[0] - dt) > 1e-12 * dt:
        raise ValueError(
            f"forcing must be sampled on the solver grid: steps={steps}, "
            f"dt={dt!r} (see solver_time_grid)")
    flags = []
    if not forcing.compatible:
        flags.append("forcing incompatible with zero initial data; "
                     "boundary jump applied at the first level")

    f, g = np.asarray(forcing.left, float), np.asarray(forcing.right, float)
    u_start = np.zeros_like(x)
    u_start[0], u_start[-1] = f[0], g[0]
    u_next = np.zeros_like(x)
    u_next[0], u_next[-1] = f[1], g[1]

    if energy_stride is None:
        energy_stride = max(1, steps // 4096)
    (tl, tr, en, ent, st, su, sut, last, _) = _run_leapfrog(
        x, om, dt, steps, u_start, u_next, k_max,
        boundary=(f, g), snapshot_stride=snapshot_stride,
        energy_stride=energy_stride)
    sut[0] = np.zeros_like(x)

    om_star = float(om.max())
    w2 = forcing.sup_norms(2)
    w3 = forcing.sup_norms(3)
    sup_energy = float(np.max(en[0])) if len(en[0]) else 0.0
    flux = float(np.trapezoid(tl ** 2 + tr ** 2, dx=dt))
    pz = {
        "interior": sup_energy / (om_star * w2 ** 2) if w2 > 0 else 0.0,
        "flux": flux / (om_star * w3 ** 2) if w3 > 0 else 0.0,
        "sup_energy": sup_energy,
        "flux_integral": flux,
        "forcing_w2": w2,
        "forcing_w3": w3,
    }
    return WaveTrajectory(
        x=x, omega_nodes=om, dt=dt, steps=steps, T=T, cfl_number=cfl,
        order=2, times=np.arange(steps + 1) * dt,
        trace_left=tl, trace_right=tr, energies=en, energy_times=ent,
        snapshot_times=np.asarray(st), snapshots_u=tuple(su),
        snapshots_ut=tuple(sut), levels=last,
        homogeneous=bool(np.max(np.abs(f)) == 0 and np.max(np.abs(g)) == 0),
        flags=tuple(flags), pz_ratios=pz)


# --------------------------------------------------------------------------
# sidewise evolution
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SidewiseSlice:
    """(u, u_x) along a vertical line x = x0, on a uniform time grid."""

    x0: float
    times: np.ndarray
    u: np.ndarray
    u_x: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.u) == len(self.u_x)):
            raise ValueError("slice arrays must share one time grid")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def u_t(self) -> np.ndarray:
        return np.gradient(self.u, self.dt)


@dataclass(frozen=True)
class SidewiseResult:
    """Fields of the x-marched evolution on a shrinking time window.

    ``levels[l]`` holds u(x_values[l], t) on times[trim[l] : N-trim[l]]
    (one grid point is trimmed per side per step, a conservative cover
    of the sqrt(omega^*)-speed domain of dependence).  ``F[k]`` are the
    sidewise energies, integrated over each level's own window.
    """

    x_values: np.ndarray
    dt: float
    dxs: float
    times: np.ndarray
    trim: np.ndarray
    levels: tuple
    F: Mapping[int, np.ndarray]
    omega_values: np.ndarray

    def field_at(self, x: float):
        """(x_used, t_window, u) at the level nearest to x."""
        idx = int(np.argmin(np.abs(self.x_values - x)))
        tr = int(self.trim[idx])
        sl = slice(tr, len(self.times) - tr)
        return float(self.x_values[idx]), self.times[sl], self.levels[idx]


def sidewise_evolve(omega: Coefficient, slc: SidewiseSlice, span: float,
                    direction: str = "right", k_max: int = 1,
                    cfl: float = _DEFAULT_CFL) -> SidewiseResult:
    """March u_xx = omega(x) u_tt in x from the slice at x0.

    ``direction`` 'right' advances toward larger x, 'left' toward
    smaller.  The time window shrinks by one point per side per x-step;
    the span is rejected when the remaining window would drop below
    eight points (the slice no longer determines the solution there).
    """
    if direction not in ("right", "left"):
        raise ValueError("direction must be 'right' or 'left'")
    if span <= 0:
        raise ValueError("span must be positive")
    sign = 1.0 if direction == "right" else -1.0
    x1 = slc.x0 + sign * span
    if not (-1e-12 <= x1 <= omega.length + 1e-12):
        raise ValueError("span leaves the domain")
    dt = slc.dt
    om_sup = omega.omega_upper
    dxs_max = cfl * dt / math.sqrt(om_sup)
    steps = max(1, int(math.ceil(span / dxs_max - 1e-12)))
    dxs = span / steps
    N = len(slc.times)
    if N - 2 * steps < 8:
        raise ValueError(
            "span exceeds the domain of dependence of the slice "
            f"(need {2 * steps + 8} time points, have {N})")

    xs = slc.x0 + sign * dxs * np.arange(steps + 1)
    om = omega(np.clip(xs, 0.0, omega.length))

    u0 = np.asarray(slc.u, dtype=float).copy()
    ux = sign * np.asarray(slc.u_x, dtype=float)
    # Taylor start in x: u_xx = omega u_tt, u_xxx = omega (u_x)_tt
    u0_tt = np.zeros_like(u0)
    u0_tt[1:-1] = (u0[2:] - 2 * u0[1:-1] + u0[:-2]) / dt ** 2
    ux_tt = np.zeros_like(ux)
    ux_tt[1:-1] = (ux[2:] - 2 * ux[1:-1] + ux[:-2]) / dt ** 2
    u1 = (u0 + dxs * ux + 0.5 * dxs ** 2 * om[0] * u0_tt
          + dxs ** 3 / 6.0 * om[0] * ux_tt)

    # level l lives on t-indices [l, N-1-l]: length N - 2l
    levels = [u0, u1[1:-1]]
    mu = dxs ** 2 / dt ** 2
    for l in range(1, steps):
        prev, cur = levels[l - 1], levels[l]
        nxt = (2 * cur[1:-1] - prev[2:-2]
               + mu * om[l] * (cur[2:] - 2 * cur[1:-1] + cur[:-2]))
        levels.append(nxt)

    trim = np.arange(steps + 1)
    F = {k: np.empty(steps + 1) for k in range(k_max + 1)}
    for l in range(steps + 1):
        arr = levels[l]
        if l == 0:
            uxl = np.asarray(slc.u_x, dtype=float)
        elif l < steps:
            # centered in x: neighbors trimmed to this level's window
            uxl = sign * (np.pad(levels[l + 1], 1, mode="edge")
                          - levels[l - 1][1:-1]) / (2 * dxs)
        else:
            uxl = sign * (arr - levels[l - 1][1:-1]) / dxs
        m = min(len(arr), len(uxl))
        arr_m, ux_m = arr[:m], uxl[:m]
        for k in range(k_max + 1):
            du = np.diff(arr_m, n=k + 1) / dt ** (k + 1)
            dux = np.diff(ux_m, n=k) / dt ** k
            mlen = min(len(du), len(dux))
            if mlen < 2:
                F[k][l] = math.nan
                continue
            F[k][l] = 0.5 * float(np.trapezoid(
                dux[:mlen] ** 2 + om[l] * du[:mlen] ** 2, dx=dt))
    return SidewiseResult(
        x_values=xs, dt=dt, dxs=sign * dxs, times=np.asarray(slc.times),
        trim=trim, levels=tuple(levels), F=F, omega_values=om)


# --------------------------------------------------------------------------
# the operator D_omega and trace norms
# --------------------------------------------------------------------------

def apply_D_omega(f: np.ndarray, omega: Coefficient, m: int,
                  snr_floor: float = 100.0) -> np.ndarray:
    """m-fold application of (1/omega) d^2/dx^2 (discrete), m >= 0.

    Endpoint values are treated as Dirichlet zeros.  Each application
    multiplies round-off noise by about 4/(dx^2 omega_*); the result is
    rejected when its magnitude falls below ``snr_floor`` times the
    accumulated noise estimate (resolution too low for this power).
    """
    if m < 0:
        raise ValueError("power m must be nonnegative")
    g = np.asarray(f, dtype=float).copy()
    if m == 0:
        return g
    n = len(g) - 1
    dx = omega.length / n
    x = np.linspace(0.0, omega.length, n + 1)
    om = omega(x)
    noise = np.finfo(float).eps * float(np.max(np.abs(g)))
    amp = 4.0 / (dx ** 2 * float(om.min()))
    for _ in range(m):
        out = np.zeros_like(g)
        out[1:-1] = (g[2:] - 2 * g[1:-1] + g[:-2]) / dx ** 2 / om[1:-1]
        noise = noise * amp + np.finfo(float).eps * float(
            np.max(np.abs(out)) if np.max(np.abs(out)) > 0 else 1.0)
        g = out
    scale = float(np.max(np.abs(g)))
    if scale < snr_floor * noise:
        raise ValueError(
            f"D_omega^{m} at this resolution is dominated by round-off "
            f"(signal {scale:.3e} vs noise floor {noise:.3e})")
    return g


def trace_sobolev_norm(trace: np.ndarray, beta: float, dt: float) -> float:
    """H^beta(0,T) norm of a boundary signal, by tapered FFT.

    The signal is multiplied by a fixed cosine taper (10% of the length
    on each side), zero-padded to at least four times the next power of
    two, and transformed; the norm is
    (sum (1+xi^2)^beta |F(xi)|^2 d_nu)^{1/2} with xi the angular
    frequency and F the transform approximated as dt * FFT.  At beta=0
    this is the L^2 norm of the tapered signal (Parseval).
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    s = np.asarray(trace, dtype=float)
    n = len(s)
    if n < 16:
        raise ValueError("trace too short")
    w = np.ones(n)
    edge = max(2, int(0.10 * n))
    ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(edge) / edge))
    w[:edge] = ramp
    w[-edge:] = ramp[::-1]
    tapered = s * w
    padded = 1 << (int(math.ceil(math.log2(n))) + 2)
    spec = np.fft.rfft(tapered, n=padded) * dt
    xi = 2.0 * math.pi * np.fft.rfftfreq(padded, dt)
    weight = (1.0 + xi ** 2) ** beta
    dnu = 1.0 / (padded * dt)
    mass = np.abs(spec) ** 2 * weight
    # one-sided spectrum: double the interior bins
    mass[1:-1] *= 2.0
    return float(math.sqrt(np.sum(mass) * dnu))

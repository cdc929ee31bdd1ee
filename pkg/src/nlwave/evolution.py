"""Delayed nonlocal Cauchy evolution on clamped grids.

The scheme is a first-order exponential integrator of the equation
shifted by the contraction constant eta0:

    u(t+dt) = exp(-eta0*dt) u(t) + (1 - exp(-eta0*dt))/eta0 * R(t),
    R = J*u + (eta0-1) u - d(u) + smoothed birth of u(t - tau).

Every term of R is nondecreasing in the state, so ordered histories
stay ordered and the band [0, u_plus] is invariant, step by step: the
discrete comparison principle holds by construction.  The delay is read
from a ring of past fields; tau must be an integer multiple of dt.
Outside the grid the field is extended by constant equilibrium clamps
along the front axis and by edge replication transversally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from .kernels import heat_lattice_weights, lattice_weights

MAX_GRID_NODES = 20_000_000


class MonotonicityError(RuntimeError):
    """A step left the invariant band: the time step is too large."""


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid on a product of symmetric intervals."""

    half_widths: tuple
    points: tuple

    def __post_init__(self):
        if len(self.half_widths) != len(self.points):
            raise ValueError("half_widths and points must have equal length")
        if len(self.points) not in (1, 2):
            raise ValueError("only 1-D and 2-D grids are supported")
        nodes = 1
        for n in self.points:
            nodes *= n + 1
        if nodes > MAX_GRID_NODES:
            raise ValueError(f"grid exceeds the memory budget ({nodes} nodes)")

    @property
    def dim(self):
        return len(self.points)

    @property
    def shape(self):
        return tuple(n + 1 for n in self.points)

    def axis(self, i):
        return np.linspace(-self.half_widths[i], self.half_widths[i], self.points[i] + 1)

    def spacing(self, i):
        return 2.0 * self.half_widths[i] / self.points[i]

    @property
    def dx(self):
        return self.spacing(0)


def make_grid(half_width, points):
    """Grid from scalars (1-D) or per-axis sequences (2-D)."""
    hw = tuple(float(v) for v in np.atleast_1d(np.asarray(half_width, dtype=float)))
    npts = tuple(int(v) for v in np.atleast_1d(points))
    return Grid(half_widths=hw, points=npts)


@dataclass(frozen=True)
class StepParams:
    dt: float
    eta0: float
    scheme: str = "etd1"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme != "etd1":
            raise ValueError(f"unknown scheme {self.scheme!r}")


def delay_slots(tau, dt):
    """Number of ring slots; tau must be an integer multiple of dt."""
    if tau == 0.0:
        return 0
    slots = int(round(tau / dt))
    if slots <= 0 or abs(slots * dt - tau) > 1e-9 * max(1.0, tau):
        raise ValueError(f"tau={tau} is not an integer multiple of dt={dt}")
    return slots


@dataclass
class FieldState:
    """Field now, its delay ring (oldest first), and far-field clamps."""

    grid: Grid
    now: np.ndarray
    history: tuple
    time: float
    clamps: tuple
    ring_dt: float = 0.0

    def delayed(self):
        return self.history[0] if self.history else self.now


def default_clamps(u_plus, dim):
    """Front-axis equilibrium clamps; edge replication transversally."""
    clamps = [(0.0, u_plus)]
    for _ in range(dim - 1):
        clamps.append(("edge", "edge"))
    return tuple(clamps)


def _pad_axis(arr, axis, k, clamp):
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (k, k)
    if clamp[0] == "edge" or clamp[1] == "edge":
        if clamp != ("edge", "edge"):
            raise ValueError("mixed edge/constant clamps on one axis are not supported")
        return np.pad(arr, pad, mode="edge")
    vals = [(0.0, 0.0)] * arr.ndim
    vals[axis] = (float(clamp[0]), float(clamp[1]))
    return np.pad(arr, pad, mode="constant", constant_values=tuple(vals))


class AxisConv:
    """Linear convolution along one axis with clamped padding.

    The FFT path caches the kernel transform per padded length; the
    direct path is a sliding-window dot product.  Both compute the same
    clamped linear convolution and agree to rounding.
    """

    def __init__(self, weights, axis):
        self.w = np.asarray(weights, dtype=float)
        self.kmax = (len(self.w) - 1) // 2
        self.axis = axis
        self._plan = {}

    def apply(self, arr, clamp, method="fft"):
        if self.kmax == 0:
            return arr * self.w[0]
        padded = _pad_axis(arr, self.axis, self.kmax, clamp)
        if method == "direct":
            win = np.lib.stride_tricks.sliding_window_view(
                padded, len(self.w), axis=self.axis
            )
            return win @ self.w[::-1]
        moved = np.moveaxis(padded, self.axis, -1)
        p = moved.shape[-1]
        if p not in self._plan:
            nfft = next_fast_len(p + len(self.w) - 1)
            self._plan[p] = (nfft, rfft(self.w, nfft))
        nfft, wf = self._plan[p]
        full = irfft(rfft(moved, nfft, axis=-1) * wf, nfft, axis=-1)
        out = full[..., 2 * self.kmax : 2 * self.kmax + arr.shape[self.axis]]
        return np.moveaxis(np.ascontiguousarray(out), -1, self.axis)


def convolve(arr, kernels, grid, clamps, method="fft"):
    """Dispersal convolution of one field snapshot.

    kernels: one Kernel per axis (a bare Kernel is accepted in 1-D).
    The field is extended by the per-axis clamps before convolving.
    """
    ks = kernels if isinstance(kernels, (tuple, list)) else (kernels,)
    if len(ks) != grid.dim:
        raise ValueError("need one kernel per grid axis")
    out = np.asarray(arr, dtype=float)
    for axis, k in enumerate(ks):
        if k.spec.quad_half_width > grid.half_widths[axis]:
            raise ValueError("grid too small for kernel")
        _, w = lattice_weights(k, grid.spacing(axis))
        out = AxisConv(w, axis).apply(out, clamps[axis], method=method)
    return out


class Stepper:
    """Precomputed operators for repeated ETD1 stepping."""

    def __init__(self, m, kernels, h, tau, grid, params, clamps, method="fft"):
        self.m = m
        self.tau = tau
        self.params = params
        self.grid = grid
        self.clamps = tuple(clamps)
        self.method = method
        self.slots = delay_slots(tau, params.dt)
        ks = kernels if isinstance(kernels, (tuple, list)) else (kernels,)
        if len(ks) != grid.dim:
            raise ValueError("need one kernel per grid axis")
        self.jconv = []
        for axis, k in enumerate(ks):
            if k.spec.quad_half_width > grid.half_widths[axis]:
                raise ValueError("grid too small for kernel")
            _, w = lattice_weights(k, grid.spacing(axis))
            self.jconv.append(AxisConv(w, axis))
        self.fconv = []
        if h.beta > 0:
            for axis in range(grid.dim):
                _, w = heat_lattice_weights(h, grid.spacing(axis))
                self.fconv.append(AxisConv(w, axis))
        self.decay = float(np.exp(-params.eta0 * params.dt))
        self.gain = (1.0 - self.decay) / params.eta0
        self.birth_clamps = [
            c if c[0] == "edge" else (float(m.b(c[0])), float(m.b(c[1])))
            for c in self.clamps
        ]

    def reaction(self, now, delayed):
        """R = J*u + (eta0-1)u - d(u) + smoothed delayed birth."""
        conv = now
        for op, clamp in zip(self.jconv, self.clamps):
            conv = op.apply(conv, clamp, method=self.method)
        birth = np.asarray(self.m.b(delayed), dtype=float)
        for op, clamp in zip(self.fconv, self.birth_clamps):
            birth = op.apply(birth, clamp, method=self.method)
        return (
            conv
            + (self.params.eta0 - 1.0) * now
            - np.asarray(self.m.d(now), dtype=float)
            + birth
        )

    def advance(self, now, delayed):
        return self.decay * now + self.gain * self.reaction(now, delayed)


def initial_state(grid, m, history_fn, tau, dt, clamps=None):
    """Prefill the delay ring from history_fn(s, *axes) for s in [-tau, 0]."""
    clamps = default_clamps(m.u_plus, grid.dim) if clamps is None else tuple(clamps)
    slots = delay_slots(tau, dt)
    axes = np.meshgrid(*[grid.axis(i) for i in range(grid.dim)], indexing="ij")
    ring = tuple(
        np.asarray(history_fn(-(slots - i) * dt, *axes), dtype=float)
        for i in range(slots)
    )
    now = np.asarray(history_fn(0.0, *axes), dtype=float)
    return FieldState(
        grid=grid, now=now, history=ring, time=0.0, clamps=clamps, ring_dt=dt
    )


def step(state, m, kernels, h, tau, params, stepper=None):
    """One ETD1 step; checks the invariant band to 1e-10 without clamping."""
    if stepper is None:
        stepper = Stepper(m, kernels, h, tau, state.grid, params, state.clamps)
    if stepper.slots != len(state.history):
        raise ValueError("history length does not match tau/dt")
    new = stepper.advance(state.now, state.delayed())
    lo, hi = float(np.min(new)), float(np.max(new))
    if lo < -1e-10 or hi > m.u_plus + 1e-10:
        raise MonotonicityError(
            f"scheme monotonicity broken (reduce dt): range [{lo:.3e}, {hi:.3e}]"
        )
    history = state.history[1:] + (state.now,) if stepper.slots else ()
    return FieldState(
        grid=state.grid,
        now=new,
        history=history,
        time=state.time + params.dt,
        clamps=state.clamps,
        ring_dt=params.dt,
    )


@dataclass
class Trajectory:
    times: np.ndarray
    fields: list
    grid: Grid
    stats: dict = field(default_factory=dict)


def evolve(state, m, kernels, h, tau, params, t_end, output_every=None):
    """March to t_end, recording snapshots every output_every time units.

    The loop mutates an internal ring for speed; recorded snapshots and
    the returned final state are copies.  Invariant margins accumulate
    in the trajectory stats.  Returns (trajectory, final_state).
    """
    dt = params.dt
    n_steps = int(round((t_end - state.time) / dt))
    if n_steps < 0 or abs(state.time + n_steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end - t0 must be a nonnegative multiple of dt")
    if output_every is None:
        stride = max(n_steps, 1)
    else:
        stride = int(round(output_every / dt))
        if stride <= 0 or abs(stride * dt - output_every) > 1e-9:
            raise ValueError("output_every must be a positive multiple of dt")

    stepper = Stepper(m, kernels, h, tau, state.grid, params, state.clamps)
    if stepper.slots != len(state.history):
        raise ValueError("history length does not match tau/dt")
    ring = [np.array(f, dtype=float) for f in state.history]
    now = np.array(state.now, dtype=float)
    t = state.time
    times = [t]
    fields = [now.copy()]
    lo_margin = float(np.min(now))
    hi_margin = float(m.u_plus - np.max(now))
    for i in range(1, n_steps + 1):
        delayed = ring[0] if ring else now
        new = stepper.advance(now, delayed)
        lo, hi = float(np.min(new)), float(np.max(new))
        lo_margin = min(lo_margin, lo)
        hi_margin = min(hi_margin, m.u_plus - hi)
        if lo < -1e-10 or hi > m.u_plus + 1e-10:
            raise MonotonicityError(
                f"scheme monotonicity broken (reduce dt) at t={t + dt:.6g}: "
                f"range [{lo:.3e}, {hi:.3e}]"
            )
        if ring:
            ring.pop(0)
            ring.append(now)
        now = new
        t = state.time + i * dt
        if i % stride == 0:
            times.append(t)
            fields.append(now.copy())
    final = FieldState(
        grid=state.grid,
        now=now.copy(),
        history=tuple(np.array(f) for f in ring),
        time=t,
        clamps=state.clamps,
        ring_dt=dt,
    )
    stats = {
        "steps": n_steps,
        "dt": dt,
        "min_value": lo_margin,
        "headroom_above": hi_margin,
    }
    return (
        Trajectory(times=np.asarray(times), fields=fields, grid=state.grid, stats=stats),
        final,
    )


def profile_on_grid(profile, grid, shift):
    """phi(x1 + shift) on the grid nodes, broadcast transversally.

    Constant extension beyond the profile window is allowed only when
    the profile ends are equilibrated to 1e-6 * u_plus.
    """
    x1 = grid.axis(0) + shift
    if x1[0] < profile.xi[0] or x1[-1] > profile.xi[-1]:
        end_gap = max(profile.values[0], profile.u_plus - profile.values[-1])
        if end_gap > 1e-6 * profile.u_plus:
            raise ValueError("profile window exceeded; enlarge L")
    vals = profile(x1)
    if grid.dim == 2:
        return np.broadcast_to(vals[:, None], grid.shape).copy()
    return vals


def squeeze_init(state, profile, c):
    """Pointwise min/max of the history band against the moving front."""
    slots = len(state.history)
    lower_ring, upper_ring = [], []
    for i, f in enumerate(state.history):
        s = -(slots - i) * state.ring_dt
        front = profile_on_grid(profile, state.grid, c * (state.time + s))
        lower_ring.append(np.minimum(front, f))
        upper_ring.append(np.maximum(front, f))
    front_now = profile_on_grid(profile, state.grid, c * state.time)
    lower = FieldState(
        grid=state.grid,
        now=np.minimum(front_now, state.now),
        history=tuple(lower_ring),
        time=state.time,
        clamps=state.clamps,
        ring_dt=state.ring_dt,
    )
    upper = FieldState(
        grid=state.grid,
        now=np.maximum(front_now, state.now),
        history=tuple(upper_ring),
        time=state.time,
        clamps=state.clamps,
        ring_dt=state.ring_dt,
    )
    return lower, upper


@dataclass(frozen=True)
class OrderingReport:
    max_violation: float
    passed: bool
    worst_time: float


def check_ordering(lower_traj, upper_traj, tol=1e-10):
    """Largest positive part of (lower - upper) across matched snapshots."""
    if len(lower_traj.fields) != len(upper_traj.fields):
        raise ValueError("trajectories must share output times")
    worst, worst_t = 0.0, float(lower_traj.times[0])
    for t, lo_f, hi_f in zip(lower_traj.times, lower_traj.fields, upper_traj.fields):
        v = float(np.max(lo_f - hi_f))
        if v > worst:
            worst, worst_t = v, float(t)
    worst = max(worst, 0.0)
    return OrderingReport(max_violation=worst, passed=worst < tol, worst_time=worst_t)


def moving_frame_error(traj, profile, c, split_at=None):
    """Sup distance to the moving front at each recorded time.

    With split_at = x_star the sup is also taken separately over the
    trailing region x1 <= x_star - c t and the leading region beyond.
    Returns an array with columns (t, sup[, sup_left, sup_right]).
    """
    x1 = traj.grid.axis(0)
    rows = []
    for t, f in zip(traj.times, traj.fields):
        front = profile_on_grid(profile, traj.grid, c * t)
        err = np.abs(f - front)
        if split_at is None:
            rows.append((float(t), float(np.max(err))))
        else:
            cut = split_at - c * t
            left = x1 <= cut
            if traj.grid.dim == 2:
                err_l = err[left, :] if np.any(left) else np.zeros(1)
                err_r = err[~left, :] if np.any(~left) else np.zeros(1)
            else:
                err_l = err[left] if np.any(left) else np.zeros(1)
                err_r = err[~left] if np.any(~left) else np.zeros(1)
            rows.append(
                (float(t), float(np.max(err)), float(np.max(err_l)), float(np.max(err_r)))
            )
    return np.asarray(rows)

"""Euler-Maruyama integration of the self-repelling polymer SDE

    dX_t = dB_t - gamma w(X_t) dt - gamma^2 (int_0^t grad V(X_t - X_s) ds) dt

with the occupation-drift grid field D(z) = gamma w(z) + gamma^2 int grad V(z - X_s) ds,
so each step is an O(1) bilinear lookup plus an O(1) footprint deposit.
The history integral uses the left-point rule with deposit-after-move
ordering (the increment over [t, t+dt] feels history strictly before t).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .envgen import TorusGrid
from .kernels import Mollifier
from .rng import substream


class TorusBiasError(RuntimeError):
    """Raised when a path wanders beyond L/4 from the origin."""


@dataclass(frozen=True)
class CouplingSchedule:
    """Coupling gamma as a function of scale.

    weak_epsilon: gamma = alpha / sqrt(log(1 + eps^-2))
    weak_lambda:  gamma = alpha / sqrt(log(1 + 1/lambda))
    strong:       fixed gamma
    """

    alpha: float
    mode: str
    scale: float  # eps, lambda, or gamma depending on mode

    @classmethod
    def weak_epsilon(cls, alpha, eps):
        if alpha <= 0 or eps <= 0:
            raise ValueError("alpha and eps must be positive")
        return cls(alpha=alpha, mode="weak_epsilon", scale=eps)

    @classmethod
    def weak_lambda(cls, alpha, lam):
        if alpha <= 0 or lam <= 0:
            raise ValueError("alpha and lambda must be positive")
        return cls(alpha=alpha, mode="weak_lambda", scale=lam)

    @classmethod
    def strong(cls, gamma):
        if gamma < 0:
            raise ValueError("gamma must be nonnegative")
        return cls(alpha=gamma, mode="strong", scale=gamma)

    @property
    def gamma(self):
        return gamma_of(self)


def gamma_of(schedule):
    """gamma per the schedule formulas; exact identities are
    gamma^2 log(1+eps^-2) = alpha^2 and gamma^2 log(1+1/lambda) = alpha^2."""
    if schedule.mode == "weak_epsilon":
        return schedule.alpha / math.sqrt(math.log1p(schedule.scale**-2))
    if schedule.mode == "weak_lambda":
        return schedule.alpha / math.sqrt(math.log1p(1.0 / schedule.scale))
    if schedule.mode == "strong":
        return schedule.scale
    raise ValueError(f"unknown schedule mode {schedule.mode!r}")


@njit(cache=True, inline="always")
def _bilinear(fieldv, n, h, L, x0, x1):
    xb0 = x0 % L
    xb1 = x1 % L
    i0 = int(xb0 / h)
    j0 = int(xb1 / h)
    f0 = xb0 / h - i0
    f1 = xb1 / h - j0
    i0 = i0 % n
    j0 = j0 % n
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n
    w00 = (1.0 - f0) * (1.0 - f1)
    w01 = (1.0 - f0) * f1
    w10 = f0 * (1.0 - f1)
    w11 = f0 * f1
    d0 = (w00 * fieldv[i0, j0, 0] + w01 * fieldv[i0, j1, 0]
          + w10 * fieldv[i1, j0, 0] + w11 * fieldv[i1, j1, 0])
    d1 = (w00 * fieldv[i0, j0, 1] + w01 * fieldv[i0, j1, 1]
          + w10 * fieldv[i1, j0, 1] + w11 * fieldv[i1, j1, 1])
    return d0, d1


@njit(cache=True)
def _deposit(fieldv, n, h, L, x0, x1, coef, s2, r2, m):
    """fieldv[z] += coef * (-(z-x)/s^2) * exp(-|z-x|^2/(2 s^2)) for grid
    nodes z within sqrt(r2) of x (coef = gamma^2 dt / (2 pi s^2))."""
    c0 = int(math.floor(x0 / h))
    c1 = int(math.floor(x1 / h))
    # separable Gaussian factors along each axis
    ex = np.empty(2 * m + 1)
    ey = np.empty(2 * m + 1)
    dxs = np.empty(2 * m + 1)
    dys = np.empty(2 * m + 1)
    for a in range(-m, m + 1):
        dx = (c0 + a) * h - x0
        dy = (c1 + a) * h - x1
        dxs[a + m] = dx
        dys[a + m] = dy
        ex[a + m] = math.exp(-dx * dx / (2.0 * s2))
        ey[a + m] = math.exp(-dy * dy / (2.0 * s2))
    for a in range(2 * m + 1):
        ia = (c0 + a - m) % n
        dx = dxs[a]
        gx = coef * ex[a]
        for b in range(2 * m + 1):
            dy = dys[b]
            if dx * dx + dy * dy <= r2:
                jb = (c1 + b - m) % n
                w = gx * ey[b]
                fieldv[ia, jb, 0] += -dx / s2 * w
                fieldv[ia, jb, 1] += -dy / s2 * w


@njit(cache=True)
def _integrate(fieldv, n, h, L, x, dW, dt, coef, s2, r2, m,
               record_steps, out_pos, out_off, step_off, guard):
    """Advance len(dW) steps from state x (unwrapped).  Records unwrapped
    positions at global step indices listed in record_steps (sorted).
    Returns (status, new_x0, new_x1, records_written); status 1 means the
    torus-bias guard tripped."""
    x0 = x[0]
    x1 = x[1]
    rec = out_off
    nrec = record_steps.shape[0]
    for k in range(dW.shape[0]):
        d0, d1 = _bilinear(fieldv, n, h, L, x0, x1)
        xo0 = x0
        xo1 = x1
        x0 = x0 + dW[k, 0] - d0 * dt
        x1 = x1 + dW[k, 1] - d1 * dt
        if coef != 0.0:
            _deposit(fieldv, n, h, L, xo0 % L, xo1 % L, coef, s2, r2, m)
        if abs(x0) > guard or abs(x1) > guard:
            return 1, x0, x1, rec
        gstep = step_off + k + 1
        while rec < nrec and record_steps[rec] == gstep:
            out_pos[rec, 0] = x0
            out_pos[rec, 1] = x1
            rec += 1
    return 0, x0, x1, rec


@dataclass
class OccupationDrift:
    """Grid drift field D(z) = gamma w(z) + gamma^2 int_0^t grad V(z-X_s) ds."""

    grid: TorusGrid
    field: np.ndarray  # (n, n, 2) float64
    gamma: float
    mollifier: Mollifier
    elapsed: float = 0.0

    @classmethod
    def from_environment(cls, env, gamma, mollifier=None, grid=None):
        """env may be None for the w = 0 dynamics (grid then required)."""
        if mollifier is None:
            mollifier = Mollifier()
        if env is None:
            if grid is None:
                raise ValueError("grid required when env is None")
            fieldv = np.zeros((grid.n, grid.n, 2))
        else:
            grid = env.grid
            fieldv = gamma * env.values.astype(np.float64)
        return cls(grid=grid, field=fieldv, gamma=gamma, mollifier=mollifier)

    def _deposit_params(self, dt):
        s = self.mollifier.s
        r = self.mollifier.footprint_radius
        coef = self.gamma**2 * dt / (2.0 * np.pi * s**2)
        m = int(math.ceil(r / self.grid.h))
        return coef, s * s, r * r, m

    def deposit(self, x, dt):
        """Add gamma^2 dt grad V(. - x) to the field (in place)."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        coef, s2, r2, m = self._deposit_params(dt)
        g = self.grid
        if coef != 0.0:
            _deposit(self.field, g.n, g.h, g.L,
                     float(x[0]) % g.L, float(x[1]) % g.L, coef, s2, r2, m)
        self.elapsed += dt
        return self

    def drift_at(self, x):
        """Bilinear interpolation of the field at (wrapped) x."""
        g = self.grid
        d0, d1 = _bilinear(self.field, g.n, g.h, g.L,
                           float(x[0]), float(x[1]))
        return np.array([d0, d1])

    def accumulated_integral(self):
        """Torus integral of the deposited part, divided by the deposited
        mass scale; the per-deposit integral of grad V vanishes."""
        return self.field.sum(axis=(0, 1)) * self.grid.h**2


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (len(times), 2), unwrapped
    seed: int
    increments: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.times[0] != 0.0 or np.any(self.positions[0] != 0.0):
            raise ValueError("trajectories start at (t, X) = (0, 0)")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must increase")


def default_dt(mollifier):
    """min(0.1 s^2, 1e-3): the mollifier scale sets the fastest drift scale."""
    return min(0.1 * mollifier.s**2, 1e-3)


def step(x, occ, dt, rng):
    """One Euler-Maruyama step; returns (new unwrapped x, occ).

    Drift is evaluated at the pre-move position and the deposit happens
    after the move, so the increment feels history strictly before t.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dW = rng.normal(0.0, math.sqrt(dt), 2)
    drift = occ.drift_at(x)
    x_new = np.asarray(x, dtype=float) + dW - drift * dt
    occ.deposit(x, dt)
    return x_new, occ


def brownian_increments(seed, n_steps, dt):
    """The exact increment stream run_path consumes for this seed."""
    return substream(seed, 1).normal(0.0, math.sqrt(dt), (n_steps, 2))


def run_path(schedule, env, t_end, dt, seed, mollifier=None, grid=None,
             record_times=None, checkpoint_times=(), on_checkpoint=None,
             step_cap=int(2e7), keep_increments=False):
    """Integrate one path to time t_end.

    record_times: times at which to store the (unwrapped) position;
    defaults to [0, t_end].  checkpoint_times + on_checkpoint(t, x, occ)
    allow streaming functionals of the co-evolved drift field without
    snapshotting it.  Returns (Trajectory, OccupationDrift).
    """
    if mollifier is None:
        mollifier = Mollifier()
    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    if n_steps * dt != t_end and abs(n_steps * dt - t_end) > 1e-9 * max(t_end, dt):
        raise ValueError("t_end must be a multiple of dt")
    if n_steps > step_cap:
        raise ValueError("t_end/dt exceeds the step cap")

    gamma = gamma_of(schedule)
    occ = OccupationDrift.from_environment(env, gamma, mollifier, grid=grid)
    g = occ.grid

    if record_times is None:
        record_times = [0.0, t_end] if t_end > 0 else [0.0]
    record_steps = np.unique(np.round(np.asarray(record_times, dtype=float)
                                      / dt).astype(np.int64)) if t_end > 0 \
        else np.array([0], dtype=np.int64)
    if record_steps[0] != 0:
        record_steps = np.concatenate([[0], record_steps])
    if record_steps[-1] > n_steps:
        raise ValueError("record time beyond t_end")

    dW = brownian_increments(seed, n_steps, dt)
    coef, s2, r2, m = occ._deposit_params(dt)
    guard = g.L / 4.0

    positions = np.zeros((len(record_steps), 2))
    x = np.zeros(2)
    rec = 1  # step 0 already recorded
    cps = sorted(checkpoint_times)
    seg_bounds = np.unique(np.round(np.asarray(cps, dtype=float) / dt)
                           .astype(np.int64)) if cps else np.empty(0, np.int64)
    seg_bounds = seg_bounds[(seg_bounds > 0) & (seg_bounds <= n_steps)]
    bounds = np.concatenate([[0], seg_bounds, [n_steps]])
    bounds = np.unique(bounds)

    for a, b in zip(bounds[:-1], bounds[1:]):
        status, x0, x1, rec = _integrate(
            occ.field, g.n, g.h, g.L, x, dW[a:b], dt, coef, s2, r2, m,
            record_steps[1:], positions[1:], rec - 1, int(a), guard)
        rec += 1
        x = np.array([x0, x1])
        occ.elapsed = b * dt
        if status != 0:
            raise TorusBiasError(
                f"displacement exceeded L/4 = {guard} (seed {seed})")
        if on_checkpoint is not None and b in seg_bounds:
            on_checkpoint(b * dt, x.copy(), occ)

    traj = Trajectory(times=record_steps * dt, positions=positions, seed=seed,
                      increments=dW if keep_increments else None)
    return traj, occ

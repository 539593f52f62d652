"""Time integration of the warped Berger Ricci flow.

In a fixed radial coordinate the flow reads

    b_t = -b Ric_11,   c_t = -c Ric_33,   (ln xi)_t = -Ric_ss,

which is the form returned by :func:`ricci_flow_rates`.  That system is not
integrated directly: with xi free to evolve the origin develops a growing
mode on any cell-centered grid.  Instead the flow is composed with the
radial diffeomorphism generated by w = b Ric_11 / b_x, which keeps b = x for
all time (areal gauge).  The evolved fields are then ln xi and u = c / x:

    (ln xi)_t = -Ric_ss + w_x + w (ln xi)_x
    u_t       = u (Ric_11 - Ric_33) + x Ric_11 u_x

Every geometric quantity (curvatures, arclength, residuals, mass) is
unchanged by the diffeomorphism.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernel
from . import _stencils as st
from . import diagnostics as dg
from . import geometry_core as gc

BERGER_TOL = gc.BERGER_TOL


class FlowAbort(RuntimeError):
    """Raised when the integrator cannot continue; carries the last state."""

    def __init__(self, message, state=None, index=None):
        super().__init__(message)
        self.state = state
        self.index = index


@dataclass(frozen=True, eq=False)
class FlowState:
    """Areal-gauge profile plus integrator bookkeeping.

    ``kappa`` holds the fixed outer-boundary offsets for (ln xi, u).
    """

    profile: gc.RadialProfile
    kappa: tuple
    step_count: int = 0

    @property
    def t(self):
        return self.profile.t


@dataclass(frozen=True)
class StepControls:
    t_end: float
    snapshot_every: float
    cfl: float = 0.25
    max_steps: int = 10**9

    def __post_init__(self):
        if not 0 < self.cfl <= 0.5:
            raise ValueError(f"cfl must lie in (0, 0.5], got {self.cfl}")
        if not (self.t_end > 0 and self.snapshot_every > 0 and self.max_steps > 0):
            raise ValueError("t_end, snapshot_every and max_steps must be positive")


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    series: list = field(default_factory=list)
    invariants: list = field(default_factory=list)
    failure: dict | None = None

    @property
    def final(self):
        return self.snapshots[-1]

    def column(self, name):
        return np.array([row[name] for row in self.series])


# ---------------------------------------------------------------------------
# gauge conversion and boundary data

def is_areal(profile):
    return bool(np.all(np.abs(profile.b - profile.x) <= 1e-13 * profile.x))


def to_areal(profile):
    """Re-express a profile in the coordinate x = b.

    Exact for profiles already in that gauge; otherwise uses cubic splines of
    the odd or even extensions, accurate to fourth order in the grid step.
    """
    if is_areal(profile):
        return profile
    d = gc.derived_fields(profile, order=4)
    if np.any(d.b_s <= 0):
        raise gc.GeometryError("areal gauge needs b_s > 0 everywhere")
    n, b = profile.n, profile.b
    h = b[-1] / (n - 0.5)
    X = (np.arange(n) + 0.5) * h

    def spline(f, parity):
        return CubicSpline(np.concatenate([-b[::-1], b]), np.concatenate([parity * f[::-1], f]))(X)

    return gc.RadialProfile(x=X, xi=1.0 / spline(d.b_s, 1.0), b=X.copy(), c=spline(profile.c, -1.0), t=profile.t)


def boundary_offsets(profile):
    """Offsets kappa = P4 - P2 of the first outer ghost of (ln xi, u).

    P2 and P4 are the quadratic and quartic extrapolations.  During the run
    the ghost is P2(current) + kappa, so data whose far field is at rest (a
    stationary solution in particular) sees a fourth-order boundary, while
    the stencil used for the evolving part stays the stable quadratic one.
    """
    out = []
    for f in (np.log(profile.xi), profile.c / profile.x):
        out.append(float(st.extrapolate(f, 1, 4)[0] - st.extrapolate(f, 1, 2)[0]))
    return tuple(out)


def regularize_origin(profile):
    """Replace the first cell by the regular fit used during stepping."""
    l, u = np.log(profile.xi), profile.c / profile.x
    _kernel.regularize(l, u)
    return profile.replace(xi=np.exp(l), c=profile.x * u)


def prepare(profile):
    """Initial FlowState: areal gauge, regular first cell, boundary offsets."""
    p = regularize_origin(to_areal(profile))
    return FlowState(profile=p, kappa=boundary_offsets(p))


def _fields(state):
    p = state.profile
    return np.log(p.xi), p.c / p.x


def _state_from(state, l, u, t, steps):
    p = state.profile
    prof = gc.RadialProfile(x=p.x, xi=np.exp(l), b=p.b, c=p.x * u, t=t)
    return FlowState(profile=prof, kappa=state.kappa, step_count=state.step_count + steps)


# ---------------------------------------------------------------------------
# right-hand sides

def areal_rates_reference(l, u, h, kappa):
    """Plain-numpy version of the compiled areal-gauge rates (for testing)."""
    n = l.size
    x = (np.arange(n) + 0.5) * h

    def padded(f, k):
        return np.concatenate([[f[0]], f, [3 * f[-1] - 3 * f[-2] + f[-3] + k]])

    le, ue = padded(l, kappa[0]), padded(u, kappa[1])
    lx, lxx = (le[2:] - le[:-2]) / (2 * h), (le[2:] - 2 * l + le[:-2]) / h**2
    ux, uxx = (ue[2:] - ue[:-2]) / (2 * h), (ue[2:] - 2 * u + ue[:-2]) / h**2
    e = np.exp(-2 * l)
    k01 = e * lx / x
    k12 = (4 - 3 * u * u - e) / x**2
    k13 = (u * u - e) / x**2 - e * ux / (x * u)
    k03 = -e * (uxx / u + 2 * ux / (x * u) - lx / x - lx * ux / u)
    ric11, ricss, ric33 = k01 + k12 + k13, 2 * k01 + k03, k03 + 2 * k13
    a = 4 - 2 * u * u - 2 * e
    w = x * ric11
    wx = e * (lxx - 2 * lx**2) + (-4 * u * ux + 4 * lx * e) / x - a / x**2 - e * (uxx / u - (ux / u) ** 2 - 2 * lx * ux / u)
    lt, ut = -ricss + wx + w * lx, u * (ric11 - ric33) + w * ux
    for r in (lt, ut):
        r[0] = np.dot(_kernel.ORIGIN_WEIGHTS, r[1:4])
    return lt, ut


def ricci_flow_rates(profile):
    """Fixed-coordinate rates (d ln xi, db, dc) from the frame Ricci tensor."""
    ric_ss, ric_11, ric_33 = gc.ricci_in_frame(gc.curvature_field(profile))
    return -ric_ss, -profile.b * ric_11, -profile.c * ric_33


def rhs(state):
    """Time derivatives of (ln xi, b, c) in the areal gauge; b stays fixed."""
    l, u = _fields(state)
    lt, ut = np.empty_like(l), np.empty_like(u)
    _kernel.rates(l, u, state.profile.dx, state.kappa[0], state.kappa[1], lt, ut)
    if not (np.all(np.isfinite(lt)) and np.all(np.isfinite(ut))):
        bad = int(np.flatnonzero(~(np.isfinite(lt) & np.isfinite(ut)))[0])
        raise FlowAbort(f"non-finite rate at index {bad}", state, bad)
    return lt, np.zeros_like(l), state.profile.x * ut


def stable_dt(state, cfl, t_limit=None):
    """cfl * min (xi dx)^2, clipped so as not to pass t_limit."""
    dt = float(_kernel.stable_dt(np.log(state.profile.xi), state.profile.dx, cfl))
    if dt < _kernel.DT_MIN:
        raise FlowAbort(f"time step underflow (dt = {dt:.3e})", state)
    if t_limit is not None:
        dt = min(dt, t_limit - state.t)
    return dt


def step_rk4(state, dt):
    """One RK4 step; on an invariant breach the step is halved, up to 5 times."""
    l, u = _fields(state)
    nl, nu, work = np.empty_like(l), np.empty_like(u), np.empty((10, l.size))
    u_max = 1.0 + BERGER_TOL
    for _ in range(_kernel.MAX_REJECTIONS):
        _kernel.rk4_step(l, u, state.profile.dx, state.kappa[0], state.kappa[1], dt, nl, nu, work)
        bad = _kernel.first_breach(nl, nu, u_max)
        if bad < 0:
            return _state_from(state, nl, nu, state.t + dt, 1)
        dt *= 0.5
    raise FlowAbort(f"step rejected {_kernel.MAX_REJECTIONS} times (breach at index {bad})", state, bad)


def advance_to(state, t_target, cfl=0.25, max_steps=10**9):
    """Compiled stepping loop from state.t to t_target."""
    l, u = _fields(state)
    l, u = l.copy(), u.copy()
    status, t, steps, _, bad = _kernel.advance(l, u, state.profile.dx, state.kappa[0], state.kappa[1],
                                               cfl, state.t, t_target, max_steps, 1.0 + BERGER_TOL)
    if status == _kernel.OK:
        return _state_from(state, l, u, t, steps), None
    messages = {
        _kernel.MAX_STEPS: "max_steps reached",
        _kernel.ABORT: f"step rejected {_kernel.MAX_REJECTIONS} times (breach at index {bad})",
        _kernel.UNDERFLOW: "time step underflow",
    }
    return _state_from(state, l, u, t, steps), dict(t=float(t), status=int(status), reason=messages[status], index=int(bad))


def evolve(state, controls, monitor=None, keep_profiles=True):
    """Integrate to controls.t_end, recording snapshots and series rows.

    Snapshot times are t0 + k * snapshot_every.  ``monitor`` maps a profile to
    (series row, InvariantReport); the default needs no reference mass.
    """
    if not isinstance(state, FlowState):
        state = prepare(state)
    if monitor is None:
        monitor = dg.SeriesMonitor(dg.make_baseline(state.profile), gc.arclength(state.profile)[-1] / 2.0)
    traj = Trajectory()

    def record(s):
        row, inv = monitor(s.profile)
        traj.series.append(row)
        traj.invariants.append(inv)
        if keep_profiles or len(traj.snapshots) < 2:
            traj.snapshots.append(s)
        else:
            traj.snapshots[-1] = s

    t0 = state.t
    record(state)
    k = 1
    steps_left = controls.max_steps
    while state.t < controls.t_end:
        target = min(t0 + k * controls.snapshot_every, controls.t_end)
        new, failure = advance_to(state, target, controls.cfl, steps_left)
        steps_left -= new.step_count - state.step_count
        state = new
        if failure is not None:
            traj.failure = failure
            if failure["status"] == _kernel.MAX_STEPS:
                record(state)
            break
        record(state)
        k += 1
    return traj

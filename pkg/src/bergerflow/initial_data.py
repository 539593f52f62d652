"""Initial-data families and the class validator.

Every family is defined by closed forms in arclength s.  Each constructor
can sample them in one of two smooth radial coordinates:

* ``"areal"`` (default): x = b, so xi = 1 / b_s.  This is the coordinate the
  flow is integrated in.
* ``"arclength"``: x = s, so xi = 1.

``taubnut_profile`` also accepts ``"nut"``, the classical chart in which
xi^2 = (1 + 2/(m x)) / 16.  That chart is exact but b ~ sqrt(x) at the
origin, so grid derivatives there are not accurate.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from . import geometry_core as gc

GAUGES = ("areal", "arclength")
FAMILIES = ("taubnut", "flat", "sec_nonneg", "gk", "af_zero_mass", "af_positive_mass")

DECAY_MIN = 2.2
PLATEAU_MAX_OSC = 0.2
K_SCAN = np.round(np.arange(0.0, 0.951, 0.05), 2)


class InitialDataError(ValueError):
    """Raised when parameters give an inadmissible profile."""


@dataclass(frozen=True)
class Grid:
    n: int
    x_max: float

    def __post_init__(self):
        if int(self.n) < 8 or not self.x_max > 0:
            raise InitialDataError(f"invalid grid N={self.n}, x_max={self.x_max}")

    @property
    def dx(self):
        return self.x_max / self.n

    @property
    def x(self):
        return (np.arange(self.n) + 0.5) * self.dx


def as_grid(grid):
    return grid if isinstance(grid, Grid) else Grid(int(grid[0]), float(grid[1]))


# ---------------------------------------------------------------------------
# closed forms in arclength: each returns (b, b_s, c, c_s) at s

def _taubnut_rho(s, m):
    """Invert s(rho) = (rho sqrt(rho^2 + a^2) + a^2 asinh(rho/a)) / 4, a^2 = 2/m."""
    a = np.sqrt(2.0 / m)
    s = np.asarray(s, dtype=float)
    # both starting values lie right of the root and s(rho) is convex
    rho = np.minimum(2.0 * s / a, 2.0 * np.sqrt(s) + a)
    for _ in range(100):
        r = np.sqrt(rho * rho + a * a)
        step = (0.25 * (rho * r + a * a * np.arcsinh(rho / a)) - s) / (0.5 * r)
        rho = rho - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(rho, 1e-300)):
            break
    return rho


def taubnut_closed_form(s, m):
    rho = _taubnut_rho(s, m)
    r2 = rho * rho + 2.0 / m
    b = 0.5 * rho * np.sqrt(r2)
    c = rho / (m * np.sqrt(r2))
    u = 2.0 / (m * r2)
    return b, 2.0 - u, c, u * u


def _gk_closed_form(s, k, m):
    alpha = k / (2.0 * (k + 1.0))
    q = 1.0 + s * s
    b = s * q ** (-alpha)
    b_s = q ** (-alpha - 1.0) * (1.0 + (1.0 - 2.0 * alpha) * s * s)
    c = np.tanh(m * s) / m
    c_s = 1.0 / np.cosh(m * s) ** 2
    return b, b_s, c, c_s


def _af_zero_closed_form(s, delta):
    e = np.exp(-s * s)
    b = s + delta * s**3 * e
    b_s = 1.0 + delta * (3.0 * s * s - 2.0 * s**4) * e
    return b, b_s, b.copy(), b_s.copy()


def _af_positive_closed_form(s, m, delta):
    b, b_s, c, c_s = taubnut_closed_form(s, m)
    e = np.exp(-s * s)
    f = 1.0 + delta * s * s * e
    f_s = 2.0 * delta * s * (1.0 - s * s) * e
    return b * f, b_s * f + b * f_s, c * f, c_s * f + c * f_s


def _invert_monotone(f, target):
    """Solve f(s) = target for increasing f by vectorized bisection."""
    lo = np.zeros_like(target)
    hi = np.maximum(target, 1.0)
    while np.any(f(hi) < target):
        hi = np.where(f(hi) < target, 2.0 * hi, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        below = f(mid) < target
        lo, hi = np.where(below, mid, lo), np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _sample(closed, grid, gauge, t=0.0):
    """Sample a closed form (function of s) in the requested gauge."""
    x = grid.x
    if gauge == "arclength":
        b, _, c, _ = closed(x)
        return gc.RadialProfile(x=x, xi=np.ones_like(x), b=b, c=c, t=t)
    if gauge != "areal":
        raise InitialDataError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")

    s = _invert_monotone(lambda v: closed(v)[0], x)
    _, b_s, c, _ = closed(s)
    return gc.RadialProfile(x=x, xi=1.0 / b_s, b=x.copy(), c=c, t=t)


# ---------------------------------------------------------------------------
# constructors

def taubnut_profile(m, grid, gauge="areal"):
    """Taub-NUT metric of mass m."""
    if not m > 0:
        raise InitialDataError(f"mass must be positive, got {m}")
    grid = as_grid(grid)
    x = grid.x
    if gauge == "nut":
        w = 1.0 + 2.0 / (m * x)
        return gc.RadialProfile(x=x, xi=0.25 * np.sqrt(w), b=0.5 * x * np.sqrt(w), c=1.0 / (m * np.sqrt(w)))
    if gauge == "areal":
        u = 2.0 / (1.0 + np.sqrt(1.0 + 4.0 * m * m * x * x))
        return gc.RadialProfile(x=x, xi=1.0 / (2.0 - u), b=x.copy(), c=x * u)
    return _sample(lambda s: taubnut_closed_form(s, m), grid, gauge)


def flat_profile(grid):
    """Euclidean R^4: xi = 1, b = c = x."""
    x = as_grid(grid).x
    return gc.RadialProfile(x=x, xi=np.ones_like(x), b=x.copy(), c=x.copy())


def sec_nonneg_profile(grid):
    """b = s, c = int_0^s dy / (1 + y^4); non-negative sectional curvature."""
    grid = as_grid(grid)
    fine = np.arange(4 * grid.n + 1) * (grid.dx / 4.0)
    c_fine = cumulative_simpson(1.0 / (1.0 + fine**4), dx=grid.dx / 4.0, initial=0.0)
    x = grid.x
    return gc.RadialProfile(x=x, xi=np.ones_like(x), b=x.copy(), c=c_fine[2::4][: grid.n])


def gk_profile(k, m, grid, gauge="areal"):
    """Member of the class opening faster than a paraboloid with exponent k."""
    if not 0.0 <= k < 1.0:
        raise InitialDataError(f"k must lie in [0, 1), got {k}")
    if not m > 0:
        raise InitialDataError(f"m must be positive, got {m}")
    grid = as_grid(grid)
    closed = lambda s: _gk_closed_form(s, k, m)  # noqa: E731
    _check_closed_form(closed, grid, k)
    return _sample(closed, grid, gauge)


def af_profile(mode, m, delta, grid, gauge="areal"):
    """Asymptotically flat data: rotationally symmetric bump or perturbed Taub-NUT."""
    if not 0.0 <= delta <= 0.2:
        raise InitialDataError(f"delta must lie in [0, 0.2], got {delta}")
    grid = as_grid(grid)
    if mode == "zero_mass":
        closed = lambda s: _af_zero_closed_form(s, delta)  # noqa: E731
    elif mode == "positive_mass":
        if not m > 0:
            raise InitialDataError(f"mass must be positive, got {m}")
        closed = lambda s: _af_positive_closed_form(s, m, delta)  # noqa: E731
    else:
        raise InitialDataError(f"unknown af mode {mode!r}")
    _check_closed_form(closed, grid, None)
    return _sample(closed, grid, gauge)


def _check_closed_form(closed, grid, k):
    """Reject parameters that break c <= b, monotonicity or the k-plateau."""
    s = np.linspace(grid.dx / 2.0, 2.0 * grid.x_max, 4 * grid.n)
    b, b_s, c, c_s = closed(s)
    for name, bad in (("c <= b", c > b * (1.0 + gc.BERGER_TOL)), ("b_s > 0", b_s <= 0.0), ("c_s > 0", c_s <= 0.0)):
        if np.any(bad):
            raise InitialDataError(f"check {name} fails first at s = {s[np.argmax(bad)]:.6g}")
    if k is not None:
        outer = s > s[-1] / 2.0
        osc = _oscillation(b_s[outer] * (c[outer] / b[outer]) ** (-k))
        if osc >= PLATEAU_MAX_OSC:
            raise InitialDataError(f"b_s u^-k does not plateau (oscillation {osc:.3f})")


def build(family, grid, m=1.0, k=0.0, delta=0.0, gauge="areal"):
    """Dispatch on family name; unused parameters are ignored."""
    if family == "taubnut":
        return taubnut_profile(m, grid, gauge)
    if family == "flat":
        return flat_profile(grid)
    if family == "sec_nonneg":
        return sec_nonneg_profile(grid)
    if family == "gk":
        return gk_profile(k, m, grid, gauge)
    if family == "af_zero_mass":
        return af_profile("zero_mass", m, delta, grid, gauge)
    if family == "af_positive_mass":
        return af_profile("positive_mass", m, delta, grid, gauge)
    raise InitialDataError(f"unknown family {family!r}; expected one of {FAMILIES}")


# ---------------------------------------------------------------------------
# validator

def _oscillation(v):
    return float((v.max() - v.min()) / np.median(np.abs(v)))


def _edge(profile):
    """Index slice of the outermost 5% of cells (at least two)."""
    return slice(profile.n - max(2, profile.n // 20), None)


def mass_from_profile(profile, derived=None):
    """Inverse limiting Hopf-fiber size, or None if c still grows.

    Averages over the outer 5% of cells.  The term b c_s / b_s adds the
    remaining integral of an inverse-square tail c_s ~ K / b^2, which removes
    the 1/(2 m b) bias of the raw edge value on Taub-NUT-like tails.
    """
    derived = derived if derived is not None else gc.derived_fields(profile)
    edge = _edge(profile)
    if np.mean(derived.c_s[edge]) > 0.5:
        return None
    c_inf = profile.c[edge] + profile.b[edge] * derived.c_s[edge] / derived.b_s[edge]
    return float(1.0 / np.mean(c_inf))


def fit_decay_exponent(s, mag, noise=1e-12):
    """Least-squares decay exponent of mag ~ s^-eps; inf if mag is negligible."""
    keep = mag > noise
    if keep.sum() < 3:
        return float("inf")
    slope = np.polyfit(np.log(s[keep]), np.log(mag[keep]), 1)[0]
    return float(-slope)


@dataclass
class ClassReport:
    monotone_ok: bool
    berger_ok: bool
    origin_ok: bool
    mass_estimate: float | None
    decay_exponent_estimate: float
    k_estimate: float
    plateau_oscillation: float
    verdict: str
    margins: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def label(self):
        return f"G_k({self.k_estimate:.2f})" if self.verdict == "G_k" else self.verdict


def validate_class(profile, tol=1e-6):
    """Classify a profile into the AF classes or the paraboloid-exponent class."""
    try:
        profile.check()
        d = gc.derived_fields(profile)
        cf = gc.curvature_field(profile)
    except gc.GeometryError as exc:
        return ClassReport(False, False, False, None, float("nan"), float("nan"), float("nan"),
                           "inadmissible", notes=[str(exc)])
    h2 = profile.dx**2
    s = d.s
    sq = s[:2] ** 2
    origin = {name: float((sq[1] * f[0] - sq[0] * f[1]) / (sq[1] - sq[0])) for name, f in (("b_s", d.b_s), ("c_s", d.c_s))}
    margins = {
        "min_b_s": float(d.b_s.min()),
        "min_c_s": float(d.c_s.min()),
        "max_u": float(d.u.max()),
        "origin_b_s_error": abs(origin["b_s"] - 1.0),
        "origin_c_s_error": abs(origin["c_s"] - 1.0),
    }
    monotone_ok = margins["min_b_s"] >= -tol and margins["min_c_s"] >= -tol
    berger_ok = margins["max_u"] <= 1.0 + tol
    origin_ok = max(margins["origin_b_s_error"], margins["origin_c_s_error"]) <= 10.0 * h2

    mass = mass_from_profile(profile, d)
    outer = s >= s[-1] / 2.0
    decay = fit_decay_exponent(s[outer], cf.mag[outer])
    with np.errstate(divide="ignore", over="ignore"):
        osc = [_oscillation(d.b_s[outer] * d.u[outer] ** (-kk)) for kk in K_SCAN]
    best = int(np.argmin(osc))
    edge = _edge(profile)
    bs_edge, cs_edge = float(np.mean(d.b_s[edge])), float(np.mean(d.c_s[edge]))
    margins.update(b_s_edge=bs_edge, c_s_edge=cs_edge)

    notes = []
    if not (monotone_ok and berger_ok and origin_ok):
        verdict = "inadmissible"
        failed = [name for name, ok in (("monotone", monotone_ok), ("berger", berger_ok), ("origin", origin_ok)) if not ok]
        notes.append("failed checks: " + ", ".join(failed))
    elif mass is None and abs(bs_edge - 1.0) < 0.1 and abs(cs_edge - 1.0) < 0.1 and decay > DECAY_MIN:
        verdict = "G_AF_zero_mass"
    elif mass is not None and abs(bs_edge - 2.0) < 0.15 and cs_edge < 0.1 and decay > DECAY_MIN:
        verdict = "G_AF_positive_mass"
    elif osc[best] < PLATEAU_MAX_OSC:
        verdict = "G_k"
        notes.append(f"plateau heuristic: oscillation {osc[best]:.3f} < {PLATEAU_MAX_OSC}")
    else:
        verdict = "inadmissible"
        notes.append("fits neither asymptotically flat nor paraboloid-exponent class")
    return ClassReport(monotone_ok, berger_ok, origin_ok, mass, decay, float(K_SCAN[best]), float(osc[best]),
                       verdict, margins, notes)

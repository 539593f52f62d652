"""Differential geometry of warped Berger profiles.

A profile is the metric

    g = xi(x)^2 dx^2 + b(x)^2 (sigma_1^2 + sigma_2^2) + c(x)^2 sigma_3^2

sampled on a uniform cell-centered grid x_i = (i + 1/2) dx.  Frame
derivatives use d/ds = xi^{-1} d/dx.  Smoothness at the origin means b and c
extend as odd functions of x and xi as an even one.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import _stencils as st

POSITIVITY_FLOOR = 1e-12
BERGER_TOL = 1e-6


class GeometryError(ValueError):
    """Raised for profiles that violate the representation invariants."""


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Discrete metric state (x, xi, b, c) at flow time t."""

    x: np.ndarray
    xi: np.ndarray
    b: np.ndarray
    c: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "xi", "b", "c"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "t", float(self.t))
        self.check()

    @property
    def n(self):
        return self.x.size

    @property
    def dx(self):
        return 2.0 * self.x[0]

    @property
    def u(self):
        return self.c / self.b

    def check(self, berger_tol=BERGER_TOL):
        """Raise GeometryError unless the profile invariants hold."""
        shapes = {a.shape for a in (self.x, self.xi, self.b, self.c)}
        if len(shapes) != 1 or self.x.ndim != 1 or self.x.size < 8:
            raise GeometryError("x, xi, b, c must be 1-d arrays of equal length >= 8")
        for name in ("x", "xi", "b", "c"):
            bad = np.flatnonzero(~np.isfinite(getattr(self, name)))
            if bad.size:
                raise GeometryError(f"non-finite {name} at index {bad[0]}")
        dx = self.dx
        expected = (np.arange(self.n) + 0.5) * dx
        off = np.flatnonzero(np.abs(self.x - expected) > 1e-9 * max(1.0, self.x[-1]))
        if dx <= 0 or off.size:
            raise GeometryError(f"grid is not uniform cell-centered (index {off[0] if off.size else 0})")
        for name in ("xi", "b", "c"):
            bad = np.flatnonzero(getattr(self, name) < POSITIVITY_FLOOR)
            if bad.size:
                raise GeometryError(f"{name} below positivity floor at index {bad[0]}")
        bad = np.flatnonzero(self.c > self.b * (1.0 + berger_tol))
        if bad.size:
            raise GeometryError(f"c > b at index {bad[0]}")

    def replace(self, **kw):
        fields = dict(x=self.x, xi=self.xi, b=self.b, c=self.c, t=self.t)
        fields.update(kw)
        return RadialProfile(**fields)


@dataclass(frozen=True, eq=False)
class DerivedFields:
    s: np.ndarray
    b_s: np.ndarray
    c_s: np.ndarray
    b_ss: np.ndarray
    c_ss: np.ndarray
    u: np.ndarray
    H: np.ndarray


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Distinct frame curvatures; k02 = k01 and k23 = k13 by symmetry."""

    k01: np.ndarray
    k03: np.ndarray
    k12: np.ndarray
    k13: np.ndarray
    rm0123: np.ndarray

    @property
    def k02(self):
        return self.k01

    @property
    def k23(self):
        return self.k13

    @property
    def R(self):
        return 2.0 * (self.k01 + self.k02 + self.k03 + self.k12 + self.k13 + self.k23)

    @property
    def mag(self):
        comps = (self.k01, self.k02, self.k03, self.k12, self.k13, self.k23, self.rm0123)
        return np.max(np.abs(np.stack(comps)), axis=0)

    @property
    def min_sectional(self):
        return np.minimum.reduce([self.k01, self.k03, self.k12, self.k13])


@dataclass(frozen=True, eq=False)
class HyperkahlerResiduals:
    J1: np.ndarray
    J2: np.ndarray


def arclength(profile):
    """s(x) = int_0^x xi, from a cubic spline of the even extension of xi."""
    x, xi = profile.x, profile.xi
    spline = CubicSpline(np.concatenate([-x[::-1], x]), np.concatenate([xi[::-1], xi]))
    anti = spline.antiderivative()
    return anti(x) - anti(0.0)


def derived_fields(profile, order=2):
    """Frame derivatives of b and c by central differences in x.

    ``order`` selects second- or fourth-order stencils.  Odd ghosts at the
    origin; one-sided stencils of the same order at the outer edge.
    """
    h, xi = profile.dx, profile.xi
    lnxi_x = st.d1(np.log(xi), h, st.EVEN, order)
    out = {}
    for name in ("b", "c"):
        f = getattr(profile, name)
        fx = st.d1(f, h, st.ODD, order)
        fxx = st.d2(f, h, st.ODD, order)
        out[name + "_s"] = fx / xi
        out[name + "_ss"] = (fxx - lnxi_x * fx) / xi**2
    u = profile.c / profile.b
    H = 2.0 * out["b_s"] / profile.b + out["c_s"] / profile.c
    return DerivedFields(s=arclength(profile), u=u, H=H, **out)


def pointwise_curvature(b, c, b_s, c_s, b_ss, c_ss):
    """Frame curvatures from point values of b, c and their s-derivatives."""
    b, c = np.asarray(b, float), np.asarray(c, float)
    if np.any(b < POSITIVITY_FLOOR) or np.any(c < POSITIVITY_FLOOR):
        raise GeometryError("b or c below positivity floor")
    u = c / b
    b2 = b * b
    return CurvatureField(
        k01=-b_ss / b,
        k03=-c_ss / c,
        k12=(4.0 - 3.0 * u * u - b_s * b_s) / b2,
        k13=(u * u - b_s * c_s / u) / b2,
        rm0123=(c_s - b_s * u) / b2,
    )


def curvature_field(profile, order=2):
    """Frame curvatures on the grid.

    Same closed forms as :func:`pointwise_curvature`, rewritten in the even
    variables beta = b/x, gamma = c/x and ln xi so that the 1/b^2 factors
    never amplify differencing error near the origin.
    """
    x, h = profile.x, profile.dx
    if np.any(profile.b < POSITIVITY_FLOOR) or np.any(profile.c < POSITIVITY_FLOOR):
        raise GeometryError("b or c below positivity floor")
    lnxi = np.log(profile.xi)
    beta, gamma = profile.b / x, profile.c / x
    lx = st.d1(lnxi, h, st.EVEN, order)
    bx, bxx = st.d1(beta, h, st.EVEN, order), st.d2(beta, h, st.EVEN, order)
    gx, gxx = st.d1(gamma, h, st.EVEN, order), st.d2(gamma, h, st.EVEN, order)
    q = 1.0 / profile.xi**2
    r = gamma / beta
    k12 = (4.0 - 3.0 * r * r - q * beta * beta) / (x * beta) ** 2 - q * (2.0 * bx / (x * beta) + (bx / beta) ** 2)
    k13 = ((r * r - q * beta * beta) / (x * beta) ** 2
           - q * (bx / beta + gx / gamma) / x - q * bx * gx / (beta * gamma))
    k01 = -q * (2.0 * bx / (x * beta) + bxx / beta - lx / x - lx * bx / beta)
    k03 = -q * (2.0 * gx / (x * gamma) + gxx / gamma - lx / x - lx * gx / gamma)
    rm = np.sqrt(q) * (gx - bx * r) / (x * beta * beta)
    return CurvatureField(k01=k01, k03=k03, k12=k12, k13=k13, rm0123=rm)


def ricci_in_frame(cf):
    """(Ric_ss, Ric_11, Ric_33) in the orthonormal frame; Ric_22 = Ric_11."""
    return 2.0 * cf.k01 + cf.k03, cf.k01 + cf.k12 + cf.k13, cf.k03 + 2.0 * cf.k13


def hyperkahler_residuals(derived):
    """J1 = c_s - u^2 and J2 = b_s + u - 2; both vanish on Taub-NUT."""
    return HyperkahlerResiduals(J1=derived.c_s - derived.u**2, J2=derived.b_s + derived.u - 2.0)


def resample_to_arclength(profile, s_grid, s=None):
    """Interpolate (b, c) onto arclength values ``s_grid``.

    Cubic splines of the odd extensions of b(s) and c(s).  ``s`` may be passed
    to reuse a precomputed arclength.
    """
    s = arclength(profile) if s is None else s
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size and (s_grid.min() < 0.0 or s_grid.max() > s[-1] * (1 + 1e-12)):
        raise GeometryError(f"requested s outside available range [0, {s[-1]:.6g}]")
    s_ext = np.concatenate([-s[::-1], s])
    out = []
    for f in (profile.b, profile.c):
        out.append(CubicSpline(s_ext, np.concatenate([-f[::-1], f]))(s_grid))
    return out[0], out[1]

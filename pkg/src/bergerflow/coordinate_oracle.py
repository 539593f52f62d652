"""Brute-force curvature of the 4D metric in Euler coordinates.

Independent of the closed-form frame formulas: the metric components are
assembled from the left-invariant coframe in coordinates (x, phi, psi, theta),
differentiated by central differences, and pushed through the textbook
Christoffel -> Riemann pipeline.  The result is projected on the orthonormal
frame {xi^-1 d_x, X1/b, X2/b, X3/c}.

The left-invariant frame used here satisfies [X1, X2] = 2 X3 cyclically:

    X1 = sin 2t d_phi - cos 2t / sin 2phi d_psi + cot 2phi cos 2t d_theta
    X2 = cos 2t d_phi + sin 2t / sin 2phi d_psi - cot 2phi sin 2t d_theta
    X3 = d_theta
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_interp_spline

from . import geometry_core as gc

REL_STEP = 1e-4
COND_MAX = 1e6
RICHARDSON_TOL = 1e-4
COMPONENTS = ("k01", "k03", "k12", "k13", "rm0123")


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class ChartPoint:
    x: float
    phi: float
    psi: float
    theta: float

    def __post_init__(self):
        if not self.x > 0 or not 0 < self.phi < np.pi / 2 or abs(np.sin(2 * self.phi)) < 0.1:
            raise OracleError(f"chart point too close to a degeneracy: {self}")


class SmoothProfile:
    """Quintic splines of xi (even), b and c (odd) through the grid values.

    Quintic rather than cubic so that second derivatives of the interpolant
    are themselves smooth enough for nested differencing.
    """

    def __init__(self, profile):
        x = profile.x
        xe = np.concatenate([-x[::-1], x])
        self.x_max = float(x[-1])
        self._xi = make_interp_spline(xe, np.concatenate([profile.xi[::-1], profile.xi]), k=5)
        self._b = make_interp_spline(xe, np.concatenate([-profile.b[::-1], profile.b]), k=5)
        self._c = make_interp_spline(xe, np.concatenate([-profile.c[::-1], profile.c]), k=5)

    def xi(self, x, nu=0):
        return self._xi(x, nu)

    def b(self, x, nu=0):
        return self._b(x, nu)

    def c(self, x, nu=0):
        return self._c(x, nu)


def _smooth(profile):
    return profile if isinstance(profile, SmoothProfile) else SmoothProfile(profile)


def frame_matrix(phi, theta):
    """Rows: components of X1, X2, X3 along (d_phi, d_psi, d_theta)."""
    s2t, c2t = np.sin(2 * theta), np.cos(2 * theta)
    s2p, cot2p = np.sin(2 * phi), 1.0 / np.tan(2 * phi)
    return np.array([
        [s2t, -c2t / s2p, cot2p * c2t],
        [c2t, s2t / s2p, -cot2p * s2t],
        [0.0, 0.0, 1.0],
    ])


def coframe_matrix(phi, theta):
    """Rows: sigma^1, sigma^2, sigma^3 along (d phi, d psi, d theta); the dual basis of the frame."""
    s2t, c2t = np.sin(2 * theta), np.cos(2 * theta)
    s2p, c2p = np.sin(2 * phi), np.cos(2 * phi)
    return np.array([
        [s2t, -c2t * s2p, 0.0],
        [c2t, s2t * s2p, 0.0],
        [0.0, c2p, 1.0],
    ])


def _metric(sp, y):
    x, phi, _, theta = y
    if np.linalg.cond(frame_matrix(phi, theta)) > COND_MAX:
        raise OracleError("frame matrix ill-conditioned")
    S = coframe_matrix(phi, theta)
    w = np.array([sp.b(x) ** 2, sp.b(x) ** 2, sp.c(x) ** 2])
    g = np.zeros((4, 4))
    g[0, 0] = sp.xi(x) ** 2
    g[1:, 1:] = S.T @ (w[:, None] * S)
    return g


def metric_at_chart_point(profile, p):
    """4x4 metric components in coordinates (x, phi, psi, theta)."""
    return _metric(_smooth(profile), np.array([p.x, p.phi, p.psi, p.theta]))


def _steps(y, h):
    return np.array([h * y[0], h, h, h])


def _christoffel(sp, y, h):
    steps = _steps(y, h)
    g = _metric(sp, y)
    dg = np.empty((4, 4, 4))  # dg[k, i, j] = d_k g_ij
    for k in range(4):
        e = np.zeros(4)
        e[k] = steps[k]
        dg[k] = (_metric(sp, y + e) - _metric(sp, y - e)) / (2 * steps[k])
    ginv = np.linalg.inv(g)
    # Gamma^l_{mn} = 1/2 g^{ls} (d_m g_sn + d_n g_sm - d_s g_mn)
    t = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg
    return 0.5 * np.einsum("ls,smn->lmn", ginv, t), g


def _riemann_lower(sp, y, h):
    """R_{rsmn} = <R(d_m, d_n) d_s, d_r> at step size h."""
    steps = _steps(y, h)
    gam, g = _christoffel(sp, y, h)
    dgam = np.empty((4, 4, 4, 4))  # dgam[k, l, m, n] = d_k Gamma^l_{mn}
    for k in range(4):
        e = np.zeros(4)
        e[k] = steps[k]
        dgam[k] = (_christoffel(sp, y + e, h)[0] - _christoffel(sp, y - e, h)[0]) / (2 * steps[k])
    # R^r_{smn} = d_m Gamma^r_{ns} - d_n Gamma^r_{ms} + Gamma^r_{ml} Gamma^l_{ns} - Gamma^r_{nl} Gamma^l_{ms}
    R = (np.einsum("mrns->rsmn", dgam) - np.einsum("nrms->rsmn", dgam)
         + np.einsum("rml,lns->rsmn", gam, gam) - np.einsum("rnl,lms->rsmn", gam, gam))
    return np.einsum("rq,qsmn->rsmn", g, R)


def _frame(sp, y):
    x, phi, _, theta = y
    E = frame_matrix(phi, theta)
    F = np.zeros((4, 4))
    F[0, 0] = 1.0 / sp.xi(x)
    F[1, 1:] = E[0] / sp.b(x)
    F[2, 1:] = E[1] / sp.b(x)
    F[3, 1:] = E[2] / sp.c(x)
    return F


def frame_riemann(profile, p, h=REL_STEP):
    """Rm[a, b, c, d] = <R(e_a, e_b) e_c, e_d> in the orthonormal frame.

    Richardson-extrapolated from steps 2h and h; h is the finest step, which
    keeps the roundoff of the nested differences at the eps / h^2 level.
    """
    sp = _smooth(profile)
    y = np.array([p.x, p.phi, p.psi, p.theta], dtype=float)
    F = _frame(sp, y)
    out = []
    for step in (2 * h, h):
        R = _riemann_lower(sp, y, step)
        out.append(np.einsum("dr,cs,am,bn,rsmn->abcd", F, F, F, F, R))
    coarse, fine = out
    best = (4 * fine - coarse) / 3
    # floor at the orbit curvature scale so that flat regions compare roundoff to 1/b^2, not to zero
    scale = max(np.abs(best).max(), 1.0 / float(sp.b(p.x)) ** 2)
    if np.abs(fine - best).max() > RICHARDSON_TOL * scale:
        raise OracleError("Richardson extrapolation disagreement; step size unsuitable")
    return best


def oracle_riemann(profile, p, h=REL_STEP):
    """Frame curvature components (k01, k03, k12, k13, rm0123) at p.

    Sectional curvatures are Rm(e_a, e_b, e_b, e_a); the mixed term is
    Rm(e_0, e_1, e_2, e_3).
    """
    Rm = frame_riemann(profile, p, h)
    return dict(k01=Rm[0, 1, 1, 0], k03=Rm[0, 3, 3, 0], k12=Rm[1, 2, 2, 1], k13=Rm[1, 3, 3, 1],
                rm0123=Rm[0, 1, 2, 3])


def bianchi_defect(profile, p, h=REL_STEP):
    """|R_0123 + R_0231 + R_0312| in the orthonormal frame."""
    Rm = frame_riemann(profile, p, h)
    return float(abs(Rm[0, 1, 2, 3] + Rm[0, 2, 3, 1] + Rm[0, 3, 1, 2]))


def formula_curvature(profile, x, formula=gc.pointwise_curvature):
    """Closed-form frame curvatures at x, fed with derivatives of the spline."""
    sp = _smooth(profile)
    xi, xi_x = sp.xi(x), sp.xi(x, 1)
    vals = {}
    for name in ("b", "c"):
        f = getattr(sp, name)
        f0, f1, f2 = f(x), f(x, 1), f(x, 2)
        vals[name] = f0
        vals[name + "_s"] = f1 / xi
        vals[name + "_ss"] = (f2 - xi_x / xi * f1) / xi**2
    cf = formula(**vals)
    return {k: float(np.asarray(getattr(cf, k))) for k in COMPONENTS}


@dataclass
class OracleReport:
    rows: list
    tol: float

    @property
    def max_rel(self):
        return max((r["rel"] for r in self.rows), default=0.0)

    @property
    def passed(self):
        return self.max_rel <= self.tol


def compare_oracle(profile, points, tol=1e-5, formula=gc.pointwise_curvature):
    """Per-point, per-component comparison of the closed forms with the oracle.

    Differences are relative to the largest oracle component at the point,
    so that components that vanish there are not divided by zero.
    """
    if len(points) < 3:
        raise OracleError("need at least 3 points")
    sp = _smooth(profile)
    rows = []
    for p in points:
        ref = oracle_riemann(sp, p)
        got = formula_curvature(sp, p.x, formula)
        scale = max(max(abs(v) for v in ref.values()), 1e-12)
        for name in COMPONENTS:
            rows.append(dict(x=p.x, component=name, oracle=float(ref[name]), formula=got[name],
                             rel=abs(got[name] - ref[name]) / scale))
    return OracleReport(rows=rows, tol=tol)


def seeded_points(n, x_lo, x_hi, seed=0):
    """Reproducible chart points away from the coordinate degeneracies."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        phi = rng.uniform(0.05, np.pi / 2 - 0.05)
        if abs(np.sin(2 * phi)) < 0.2:
            continue
        pts.append(ChartPoint(float(rng.uniform(x_lo, x_hi)), float(phi), float(rng.uniform(0, np.pi)),
                              float(rng.uniform(0, 2 * np.pi))))
    return pts

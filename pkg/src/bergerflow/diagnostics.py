"""Invariant monitors, mass, Taub-NUT deviation and singularity-type fits."""

from dataclasses import asdict, dataclass

import numpy as np

from . import geometry_core as gc
from . import initial_data as idt

SERIES_COLUMNS = ("t", "sup_mag", "t_sup_mag", "mass", "supJ1", "supJ2", "infJ2",
                  "min_bs", "min_cs", "max_u", "min_u", "tnut_dev")
TYPE_III_MAX = 0.2
TYPE_IIB_MIN = 0.5


@dataclass(frozen=True)
class Baseline:
    """Reference values fixed at t = 0 for the invariant monitors."""

    u0_min: float
    khat: float
    lam: float
    chi0_min: float


@dataclass
class InvariantReport:
    u_le_1: float
    u_ge_inf_u0: float
    monotone_b: float
    monotone_c: float
    one_minus_u_over_c: float
    bs2_minus_4_over_c: float
    c2_rm: float
    cs_uk: float
    chi_min: float
    bs_over_u_min: float
    min_sec: float

    def as_dict(self):
        return asdict(self)


@dataclass
class TypeReport:
    p: float
    verdict: str
    peak: float
    reason: str = ""


def default_khat(family, k=0.0):
    """(k + 1)/2 for the paraboloid-exponent families, 1.2 for AF data."""
    return 0.5 * (k + 1.0) if family in ("gk", "sec_nonneg") else 1.2


def _chi(profile, d, lam):
    return profile.b**lam * (d.b_s / d.u - np.log(profile.b))


def _window(profile, d):
    return d.s >= profile.dx


def make_baseline(profile, khat=1.2, lam=0.5):
    d = gc.derived_fields(profile)
    w = _window(profile, d)
    return Baseline(u0_min=float(d.u.min()), khat=float(khat), lam=float(lam),
                    chi0_min=float(_chi(profile, d, lam)[w].min()))


def monitor_invariants(profile, baseline, derived=None, curvature=None):
    """Worst-case margins of the invariant monitors; never raises."""
    d = derived if derived is not None else gc.derived_fields(profile)
    cf = curvature if curvature is not None else gc.curvature_field(profile)
    w = _window(profile, d)
    u, c, b_s, c_s = d.u[w], profile.c[w], d.b_s[w], d.c_s[w]
    with np.errstate(all="ignore"):
        return InvariantReport(
            u_le_1=float(1.0 - d.u.max()),
            u_ge_inf_u0=float(d.u.min() - baseline.u0_min),
            monotone_b=float(d.b_s.min()),
            monotone_c=float(d.c_s.min()),
            one_minus_u_over_c=float(np.max((1.0 - u) / c)),
            bs2_minus_4_over_c=float(np.max((b_s**2 - 4.0) / c)),
            c2_rm=float(np.max(c**2 * cf.mag[w])),
            cs_uk=float(np.max(c_s * u ** (-baseline.khat))),
            chi_min=float(_chi(profile, d, baseline.lam)[w].min()),
            bs_over_u_min=float(np.min(b_s / u)),
            min_sec=float(cf.min_sectional.min()),
        )


def estimate_mass(profile):
    """Mass 1/c(infinity), or None when the Hopf fiber is unbounded."""
    return idt.mass_from_profile(profile)


def taubnut_deviation(profile, m, S, n_points=2001):
    """sup over s in [0, S] of |b - b_ref| + |c - c_ref| against Taub-NUT(m)."""
    s = gc.arclength(profile)
    if not 0 < S <= s[-1]:
        raise ValueError(f"window S={S} outside available arclength (0, {s[-1]:.6g}]")
    grid = np.linspace(0.0, S, n_points)
    b, c = gc.resample_to_arclength(profile, grid, s=s)
    b_ref, _, c_ref, _ = idt.taubnut_closed_form(grid, m)
    return float(np.max(np.abs(b - b_ref) + np.abs(c - c_ref)))


def j_residual_norms(profile, S, order=4):
    """(sup|J1|, sup|J2|, inf J2) over s <= S.

    Fourth-order stencils by default so that the residuals resolve the state
    rather than the differencing error of the second-order ones.
    """
    d = gc.derived_fields(profile, order=order)
    j = gc.hyperkahler_residuals(d)
    w = d.s <= S
    return float(np.abs(j.J1[w]).max()), float(np.abs(j.J2[w]).max()), float(j.J2[w].min())


def classify_singularity_type(t, sup_mag, degenerate=1e-10):
    """Fit p in t * sup|Rm| ~ t^p over the final decade of logged times."""
    t = np.asarray(t, dtype=float)
    sup_mag = np.asarray(sup_mag, dtype=float)
    if t.size == 0:
        return TypeReport(float("nan"), "indeterminate", float("nan"), "empty series")
    t_end = t.max()
    w = (t >= t_end / 10.0) & (t > 0)
    peak = float(np.max(t * sup_mag))
    if np.max(sup_mag) <= degenerate:
        return TypeReport(0.0, "Type-III", peak, "degenerate: zero curvature")
    if t_end < 10.0 or w.sum() < 3 or t[t > 0].min() > t_end / 10.0:
        return TypeReport(float("nan"), "indeterminate", peak, "series spans less than one decade beyond t = 1")
    p = float(np.polyfit(np.log(t[w]), np.log(t[w] * sup_mag[w]), 1)[0])
    if p < TYPE_III_MAX:
        verdict = "Type-III"
    elif p > TYPE_IIB_MIN:
        verdict = "Type-II(b)"
    else:
        verdict = "indeterminate"
    return TypeReport(p, verdict, peak)


class SeriesMonitor:
    """Computes one series row and one invariant report per snapshot."""

    def __init__(self, baseline, s_report, mass_ref=None):
        self.baseline = baseline
        self.s_report = float(s_report)
        self.mass_ref = mass_ref

    def __call__(self, profile):
        d = gc.derived_fields(profile)
        cf = gc.curvature_field(profile)
        sup_mag = float(cf.mag.max())
        j1, j2, j2min = j_residual_norms(profile, self.s_report)
        mass = estimate_mass(profile)
        dev = float("nan")
        if self.mass_ref is not None:
            dev = taubnut_deviation(profile, self.mass_ref, min(self.s_report, gc.arclength(profile)[-1]))
        row = dict(t=profile.t, sup_mag=sup_mag, t_sup_mag=profile.t * sup_mag,
                   mass=float("nan") if mass is None else mass, supJ1=j1, supJ2=j2, infJ2=j2min,
                   min_bs=float(d.b_s.min()), min_cs=float(d.c_s.min()),
                   max_u=float(d.u.max()), min_u=float(d.u.min()), tnut_dev=dev)
        return row, monitor_invariants(profile, self.baseline, d, cf)

"""Configuration, simulation driver, snapshot files, CSV output and sweeps.

Config files are flat ``key = value`` text in sections::

    [initial_data]
    family = sec_nonneg        ; taubnut flat sec_nonneg gk af_zero_mass af_positive_mass
    m = 1.0
    k = 0.0
    delta = 0.0
    gauge = areal

    [grid]
    n = 2048
    x_max = 40

    [controls]
    t_end = 20
    snapshot_every = 0.5
    cfl = 0.25

    [diagnostics]
    s_report = auto           ; half the initial arclength extent
    lam = 0.5
    khat = auto

    [output]
    snapshots = all            ; all, final or none

    [sweep]
    k = 0, 0.25, 0.5

Every key is optional except ``family`` and ``t_end``; unknown sections or
keys are errors.  Exit codes: 0 success, 1 usage or config error, 2 numerical
abort, 3 verification failure.
"""

import argparse
import configparser
import csv
import itertools
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import coordinate_oracle as co
from . import diagnostics as dg
from . import flow_engine as fe
from . import geometry_core as gc
from . import initial_data as idt

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_VERIFY = 0, 1, 2, 3
SNAPSHOT_VERSION = 1
SNAPSHOT_MAGIC = "bergerflow-snapshot"
STATIONARY_TOL = 1e-4
SWEEP_AXES = ("family", "m", "k", "delta")


class ConfigError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class RunConfig:
    family: str
    t_end: float
    m: float = 1.0
    k: float = 0.0
    delta: float = 0.0
    gauge: str = "areal"
    n: int = 2048
    x_max: float = 40.0
    cfl: float = 0.25
    snapshot_every: float = 0.5
    max_steps: int = 10**9
    s_report: float | None = None
    lam: float = 0.5
    khat: float | None = None
    snapshots: str = "all"
    sweep: dict = field(default_factory=dict)

    @property
    def params(self):
        return dict(m=self.m, k=self.k, delta=self.delta, gauge=self.gauge)


_SCHEMA = {
    "initial_data": {"family": str, "m": float, "k": float, "delta": float, "gauge": str},
    "grid": {"n": int, "x_max": float},
    "controls": {"cfl": float, "t_end": float, "snapshot_every": float, "max_steps": int},
    "diagnostics": {"s_report": "auto", "lam": float, "khat": "auto"},
    "output": {"snapshots": str},
    "sweep": {name: "list" for name in SWEEP_AXES},
}


def _locate(lines, section, key):
    """1-based (line, column) of key inside section, for error messages."""
    current = None
    for no, raw in enumerate(lines, 1):
        text = raw.strip()
        if text.startswith("[") and text.endswith("]"):
            current = text[1:-1].strip()
        elif current == section and "=" in text and text.split("=", 1)[0].strip().lower() == key:
            return no, raw.index(text) + 1
    return 0, 0


def _convert(kind, text):
    if kind == "list":
        return [v.strip() for v in text.split(",") if v.strip()]
    if kind == "auto":
        return None if text.strip().lower() == "auto" else float(text)
    return kind(text)


def parse_config(text, source="<config>"):
    """Parse and validate config text into a RunConfig; raises ConfigError."""
    lines = text.splitlines()
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            no = next((i for i, raw in enumerate(lines, 1) if raw.strip() == f"[{section}]"), 0)
            raise ConfigError(f"{source}:{no}:1: unknown section [{section}]")
        for key, raw in parser.items(section):
            no, col = _locate(lines, section, key)
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{source}:{no}:{col}: unknown key '{key}' in [{section}]")
            try:
                value = _convert(_SCHEMA[section][key], raw)
            except ValueError:
                raise ConfigError(f"{source}:{no}:{col}: bad value {raw!r} for '{key}'") from None
            if section == "sweep":
                values.setdefault("sweep", {})[key] = value
            else:
                values[key] = value
    for required in ("family", "t_end"):
        if required not in values:
            raise ConfigError(f"{source}: missing required key '{required}'")
    cfg = RunConfig(**values)
    check_config(cfg, source)
    return cfg


def check_config(cfg, source="<config>"):
    problems = []
    if cfg.family not in idt.FAMILIES:
        problems.append(f"family must be one of {', '.join(idt.FAMILIES)}")
    if cfg.gauge not in idt.GAUGES:
        problems.append(f"gauge must be one of {', '.join(idt.GAUGES)}")
    if cfg.snapshots not in ("all", "final", "none"):
        problems.append("snapshots must be all, final or none")
    if cfg.n < 8 or cfg.x_max <= 0:
        problems.append("grid needs n >= 8 and x_max > 0")
    if not 0 < cfg.cfl <= 0.5:
        problems.append("cfl must lie in (0, 0.5]")
    if cfg.t_end <= 0 or cfg.snapshot_every <= 0 or cfg.max_steps <= 0:
        problems.append("t_end, snapshot_every and max_steps must be positive")
    if cfg.s_report is not None and cfg.s_report <= 0:
        problems.append("s_report must be positive")
    for axis, vals in cfg.sweep.items():
        if axis != "family":
            try:
                [float(v) for v in vals]
            except ValueError:
                problems.append(f"sweep axis '{axis}' must list numbers")
        elif any(v not in idt.FAMILIES for v in vals):
            problems.append("sweep axis 'family' lists an unknown family")
    if problems:
        raise ConfigError(f"{source}: " + "; ".join(problems))


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, source=str(path))


# ---------------------------------------------------------------------------
# snapshot files

def _fmt(v):
    return repr(float(v))


def snapshot_save(state, path, family="", params=None):
    """Write a FlowState as a commented header plus x, xi, b, c CSV rows."""
    p = state.profile
    params = params or {}
    lines = [
        f"# {SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}",
        f"# t = {_fmt(p.t)}",
        f"# family = {family}",
        "# params = " + " ".join(f"{k}={v}" for k, v in params.items()),
        "# kappa = " + " ".join(_fmt(v) for v in state.kappa),
        f"# step_count = {state.step_count}",
        "x,xi,b,c",
    ]
    lines += [",".join(_fmt(v) for v in row) for row in zip(p.x, p.xi, p.b, p.c)]
    Path(path).write_text("\n".join(lines) + "\n")


def snapshot_load(path):
    """Read a snapshot; returns (FlowState, metadata dict).

    Rejections name the offending file line.
    """
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot: {exc}") from None
    meta, body_start = {}, None
    for no, line in enumerate(lines, 1):
        if line.startswith("#"):
            text = line[1:].strip()
            if text.startswith(SNAPSHOT_MAGIC):
                meta["version"] = text[len(SNAPSHOT_MAGIC):].strip()
            elif "=" in text:
                key, val = text.split("=", 1)
                meta[key.strip()] = val.strip()
        else:
            body_start = no
            break
    if meta.get("version") != str(SNAPSHOT_VERSION):
        raise SnapshotError(f"unsupported snapshot version {meta.get('version')!r}; expected {SNAPSHOT_VERSION}")
    if body_start is None or lines[body_start - 1].strip() != "x,xi,b,c":
        raise SnapshotError("missing column header 'x,xi,b,c'")
    rows = []
    for no, line in enumerate(lines[body_start:], body_start + 1):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError:
            row = []
        if len(row) != 4 or not np.all(np.isfinite(row)):
            raise SnapshotError(f"line {no}: malformed row")
        x, xi, b, c = row
        if rows and x <= rows[-1][0]:
            raise SnapshotError(f"line {no}: x not increasing")
        if min(x, xi, b, c) <= 0:
            raise SnapshotError(f"line {no}: non-positive entry")
        if c > b * (1.0 + gc.BERGER_TOL):
            raise SnapshotError(f"line {no}: c > b")
        rows.append(row)
    if len(rows) < 8:
        raise SnapshotError("fewer than 8 grid rows")
    a = np.array(rows)
    try:
        t = float(meta.get("t", "0"))
        kappa = tuple(float(v) for v in meta.get("kappa", "").split())
        steps = int(meta.get("step_count", "0"))
    except ValueError:
        raise SnapshotError("malformed header value") from None
    profile = gc.RadialProfile(x=a[:, 0], xi=a[:, 1], b=a[:, 2], c=a[:, 3], t=t)
    try:
        profile.check()
    except gc.GeometryError as exc:
        raise SnapshotError(str(exc)) from None
    if len(kappa) != 2:
        state = fe.prepare(profile)
    else:
        state = fe.FlowState(profile=profile, kappa=kappa, step_count=steps)
    return state, meta


# ---------------------------------------------------------------------------
# simulate

def build_initial(cfg):
    try:
        return idt.build(cfg.family, (cfg.n, cfg.x_max), m=cfg.m, k=cfg.k, delta=cfg.delta, gauge=cfg.gauge)
    except (idt.InitialDataError, gc.GeometryError) as exc:
        raise ConfigError(f"initial data: {exc}") from None


def make_monitor(cfg, profile):
    khat = cfg.khat if cfg.khat is not None else dg.default_khat(cfg.family, cfg.k)
    s_max = gc.arclength(profile)[-1]
    window = s_max / 2 if cfg.s_report is None else min(cfg.s_report, s_max)
    return dg.SeriesMonitor(dg.make_baseline(profile, khat, cfg.lam), window,
                            mass_ref=dg.estimate_mass(profile))


def _csv_value(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


def write_rows(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_csv_value(row[c]) for c in columns])


def _trend_decreasing(values, frac=0.9):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 2:
        return False
    return bool(np.mean(np.diff(v) < 0) >= frac)


def summarize(cfg, initial, traj, class_report):
    """Summary lines and the headline numbers reused by sweeps."""
    t, sup = traj.column("t"), traj.column("sup_mag")
    tr = dg.classify_singularity_type(t, sup)
    final = traj.final.profile
    mass = traj.column("mass")
    dev = traj.column("tnut_dev")
    out = dict(type_verdict=tr.verdict, p=tr.p, final_mass=float(mass[-1]), final_tnut_dev=float(dev[-1]),
               tnut_dev_decreasing=_trend_decreasing(dev))
    lines = [
        f"family: {cfg.family} m={cfg.m} k={cfg.k} delta={cfg.delta}",
        f"grid: n={cfg.n} x_max={cfg.x_max} cfl={cfg.cfl}",
        f"class verdict (t=0): {class_report.label()}",
        f"type verdict: {tr.verdict}" + (f" (p = {tr.p:.3f})" if np.isfinite(tr.p) else "")
        + (f" [{tr.reason}]" if tr.reason else ""),
        f"final time: {final.t!r}",
        f"steps: {traj.final.step_count}",
        f"final sup mag: {sup[-1]:.6e}",
    ]
    if np.all(np.isnan(mass)):
        lines.append("mass: unbounded fiber (no mass)")
    else:
        m0 = mass[0]
        spread = float(np.nanmax(np.abs(mass / m0 - 1.0)))
        lines.append(f"mass: {mass[-1]:.6f} (initial {m0:.6f}, max relative change {spread:.2e})")
    if np.all(np.isnan(dev)):
        lines.append("tnut_dev: n/a")
    else:
        trend = "decreasing" if out["tnut_dev_decreasing"] else "not decreasing"
        lines.append(f"tnut_dev: initial {dev[0]:.6e} final {dev[-1]:.6e} ({trend})")
    lines.append(f"final supJ1 {traj.series[-1]['supJ1']:.3e} supJ2 {traj.series[-1]['supJ2']:.3e}")
    if cfg.family == "taubnut":
        ref = fe.prepare(initial).profile
        drift = max(float(np.max(np.abs(final.xi / ref.xi - 1.0))), float(np.max(np.abs(final.c / ref.c - 1.0))))
        ok = drift <= STATIONARY_TOL
        lines.append(f"stationary: max drift {drift:.3e} " + ("<= 1e-4" if ok else "> 1e-4 (not stationary)"))
        out["drift"] = drift
    if traj.failure:
        lines.append(f"ABORTED at t={traj.failure['t']!r}: {traj.failure['reason']}")
    return lines, out


def run_simulation(cfg, out_dir):
    """Run one configured simulation, writing artifacts under out_dir.

    Returns (exit code, summary numbers).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    initial = build_initial(cfg)
    class_report = idt.validate_class(initial)
    state = fe.prepare(initial)
    monitor = make_monitor(cfg, state.profile)
    controls = fe.StepControls(t_end=cfg.t_end, snapshot_every=cfg.snapshot_every, cfl=cfg.cfl,
                               max_steps=cfg.max_steps)
    traj = fe.evolve(state, controls, monitor, keep_profiles=cfg.snapshots == "all")
    write_rows(out / "series.csv", traj.series, dg.SERIES_COLUMNS)
    inv_cols = ["t"] + [f.name for f in fields(dg.InvariantReport)]
    write_rows(out / "invariants.csv",
               [dict(t=r["t"], **inv.as_dict()) for r, inv in zip(traj.series, traj.invariants)], inv_cols)
    if cfg.snapshots != "none":
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        chosen = traj.snapshots if cfg.snapshots == "all" else traj.snapshots[-1:]
        for i, s in enumerate(chosen):
            name = "final.csv" if cfg.snapshots == "final" else f"snap_{i:04d}.csv"
            snapshot_save(s, snap_dir / name, cfg.family, cfg.params)
    lines, numbers = summarize(cfg, initial, traj, class_report)
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    if traj.failure:
        f = traj.failure
        (out / "failure.txt").write_text("".join(f"{k}: {v}\n" for k, v in f.items()))
        if f["status"] != fe._kernel.MAX_STEPS:
            return EXIT_ABORT, numbers
    return EXIT_OK, numbers


# ---------------------------------------------------------------------------
# sweep

def sweep_cells(cfg):
    """Cartesian product over the configured axes; no axes means no cells."""
    if not cfg.sweep or any(len(v) == 0 for v in cfg.sweep.values()):
        return []
    axes = [a for a in SWEEP_AXES if a in cfg.sweep]
    cells = []
    for combo in itertools.product(*(cfg.sweep[a] for a in axes)):
        kw = {a: (v if a == "family" else float(v)) for a, v in zip(axes, combo)}
        cells.append(replace(cfg, sweep={}, **kw))
    return cells


def _run_cell(args):
    index, cfg, out_dir = args
    row = dict(cell=index, family=cfg.family, m=cfg.m, k=cfg.k, delta=cfg.delta)
    try:
        code, numbers = run_simulation(cfg, out_dir)
        row.update(status="ok" if code == EXIT_OK else "aborted", **numbers)
    except Exception as exc:  # isolate the cell
        row.update(status="error", reason=f"{type(exc).__name__}: {exc}")
    return row


SWEEP_COLUMNS = ("cell", "family", "m", "k", "delta", "status", "type_verdict", "p",
                 "final_mass", "final_tnut_dev", "tnut_dev_decreasing", "reason")


def run_sweep(cfg, out_dir, workers=1):
    """Independent simulations per cell; one aggregate CSV written by this process."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = sweep_cells(cfg)
    jobs = [(i, c, out / f"cell_{i:03d}") for i, c in enumerate(cells)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    full = [{c: r.get(c, "") for c in SWEEP_COLUMNS} for r in rows]
    write_rows(out / "sweep.csv", full, SWEEP_COLUMNS)
    return full


# ---------------------------------------------------------------------------
# verify

def _perturbed_formula(scale=1.01):
    def formula(**kw):
        cf = gc.pointwise_curvature(**kw)
        return replace(cf, k12=cf.k12 * scale)
    return formula


def run_verify(perturb=False, points=10, sizes=(512, 1024, 2048), stream=None):
    """Oracle comparison plus the Taub-NUT stationarity refinement study."""
    stream = stream or sys.stdout
    formula = _perturbed_formula() if perturb else gc.pointwise_curvature
    grid = (2048, 40.0)
    cases = [(f"taubnut m={m}", idt.taubnut_profile(m, grid)) for m in (0.5, 1.0, 2.0)]
    cases.append(("gk k=0.5", idt.gk_profile(0.5, 1.0, grid)))
    pts = co.seeded_points(points, 0.2, 5.0, seed=0)
    ok = True
    print(f"{'check':<34}{'value':>14}{'tol':>10}  result", file=stream)
    for name, prof in cases:
        rep = co.compare_oracle(prof, pts, tol=1e-5, formula=formula)
        ok &= rep.passed
        print(f"{'oracle ' + name:<34}{rep.max_rel:>14.3e}{1e-5:>10.0e}  {'pass' if rep.passed else 'FAIL'}", file=stream)
    defect = co.bianchi_defect(cases[1][1], pts[0])
    ok &= defect <= 1e-8
    print(f"{'bianchi identity':<34}{defect:>14.3e}{1e-8:>10.0e}  {'pass' if defect <= 1e-8 else 'FAIL'}", file=stream)
    drifts = []
    for n in sizes:
        p = idt.taubnut_profile(1.0, (n, 40.0))
        st = fe.prepare(p)
        new, failure = fe.advance_to(st, 1.0)
        drift = np.inf if failure else max(float(np.max(np.abs(new.profile.xi / st.profile.xi - 1))),
                                           float(np.max(np.abs(new.profile.c / st.profile.c - 1))))
        drifts.append(drift)
        print(f"{f'taubnut drift t=1 n={n}':<34}{drift:>14.3e}", file=stream)
    finest = drifts[-1] <= STATIONARY_TOL
    ok &= finest
    print(f"{'drift at finest grid':<34}{drifts[-1]:>14.3e}{STATIONARY_TOL:>10.0e}  {'pass' if finest else 'FAIL'}", file=stream)
    for a, b in zip(drifts, drifts[1:]):
        ratio = a / b
        good = 3.5 <= ratio <= 4.5
        ok &= good
        print(f"{'refinement ratio':<34}{ratio:>14.3f}{'[3.5,4.5]':>10}  {'pass' if good else 'FAIL'}", file=stream)
    return bool(ok)


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="python3 -m bergerflow", description="Warped Berger Ricci flow experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("simulate", help="run one configured simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p = sub.add_parser("verify", help="oracle and stationarity checks")
    p.add_argument("--perturb", action="store_true", help="inject a 1%% error into k12 (must fail)")
    p.add_argument("--points", type=int, default=10)
    p = sub.add_parser("sweep", help="parameter sweep over the [sweep] axes")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1))
    p = sub.add_parser("validate", help="classify a snapshot")
    p.add_argument("--snapshot", required=True)
    p = sub.add_parser("compare", help="deviation of a snapshot from Taub-NUT")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--window", type=float, required=True)
    return parser


def _cmd_simulate(args):
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    code, _ = run_simulation(cfg, args.out)
    print((Path(args.out) / "summary.txt").read_text() if (Path(args.out) / "summary.txt").exists() else "")
    print(f"wall time {time.perf_counter() - t0:.1f} s; exit {code}")
    return code


def _cmd_sweep(args):
    cfg = load_config(args.config)
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    rows = run_sweep(cfg, args.out, args.workers)
    for r in rows:
        print(", ".join(f"{k}={_csv_value(v)}" for k, v in r.items() if v != ""))
    print(f"{len(rows)} cells written to {Path(args.out) / 'sweep.csv'}")
    return EXIT_OK


def _cmd_validate(args):
    state, meta = snapshot_load(args.snapshot)
    rep = idt.validate_class(state.profile)
    print(f"snapshot t = {state.t!r} family = {meta.get('family', '')}")
    print(f"verdict: {rep.label()}")
    for name in ("monotone_ok", "berger_ok", "origin_ok", "mass_estimate", "decay_exponent_estimate",
                 "k_estimate", "plateau_oscillation"):
        print(f"  {name}: {getattr(rep, name)}")
    for note in rep.notes:
        print(f"  note: {note}")
    return EXIT_VERIFY if rep.verdict == "inadmissible" else EXIT_OK


def _cmd_compare(args):
    state, _ = snapshot_load(args.snapshot)
    try:
        dev = dg.taubnut_deviation(state.profile, args.mass, args.window)
        j1, j2, _ = dg.j_residual_norms(state.profile, args.window)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"taubnut_deviation(m={args.mass}, S={args.window}) = {dev:.6e}")
    print(f"sup|J1| = {j1:.6e}  sup|J2| = {j2:.6e}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = dict(simulate=_cmd_simulate, sweep=_cmd_sweep, validate=_cmd_validate, compare=_cmd_compare,
                    verify=lambda a: EXIT_OK if run_verify(a.perturb, a.points) else EXIT_VERIFY)
    try:
        return handlers[args.command](args)
    except (ConfigError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except fe.FlowAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT

import numpy as np
import pytest

from bergerflow import experiment_cli as cli
from bergerflow import flow_engine as fe
from bergerflow import initial_data as idt

SMALL = """
[initial_data]
family = {family}
[grid]
n = 128
x_max = 10
[controls]
t_end = 0.2
snapshot_every = 0.1
"""


def _write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_config_defaults_and_types():
    cfg = cli.parse_config(SMALL.format(family="sec_nonneg"))
    assert cfg.family == "sec_nonneg" and cfg.n == 128 and cfg.t_end == 0.2
    assert cfg.cfl == 0.25 and cfg.khat is None and cfg.sweep == {}


def test_unknown_key_reports_line_and_column(tmp_path):
    path = _write(tmp_path, "[initial_data]\nfamily = flat\ncolour = red\n[controls]\nt_end = 1\n")
    with pytest.raises(cli.ConfigError, match=r"run\.ini:3:1: unknown key 'colour'"):
        cli.load_config(path)


def test_unknown_section_and_bad_value():
    with pytest.raises(cli.ConfigError, match=r":2:1: unknown section \[extras\]"):
        cli.parse_config("\n[extras]\na = 1\n")


def test_bad_grid_value_line():
    text = "[initial_data]\nfamily = flat\n[grid]\nn = many\n[controls]\nt_end = 1\n"
    with pytest.raises(cli.ConfigError, match=r":4:1: bad value 'many' for 'n'"):
        cli.parse_config(text)


def test_missing_required_and_semantic_checks():
    with pytest.raises(cli.ConfigError, match="missing required key 't_end'"):
        cli.parse_config("[initial_data]\nfamily = flat\n")
    with pytest.raises(cli.ConfigError, match="family must be one of"):
        cli.parse_config(SMALL.format(family="torus"))
    with pytest.raises(cli.ConfigError, match="cfl"):
        cli.parse_config(SMALL.format(family="flat") + "cfl = 0.9\n")


def test_snapshot_round_trip_is_exact(tmp_path):
    st = fe.prepare(idt.taubnut_profile(1.0, (256, 20.0)))
    cli.snapshot_save(st, tmp_path / "s.csv", "taubnut", dict(m=1.0))
    back, meta = cli.snapshot_load(tmp_path / "s.csv")
    for name in ("x", "xi", "b", "c"):
        assert np.array_equal(getattr(back.profile, name), getattr(st.profile, name))
    assert back.kappa == st.kappa and back.t == st.t and meta["family"] == "taubnut"


def test_snapshot_rejects_c_above_b_naming_line(tmp_path):
    st = fe.prepare(idt.flat_profile((16, 4.0)))
    path = tmp_path / "s.csv"
    cli.snapshot_save(st, path)
    lines = path.read_text().splitlines()
    x, xi, b, c = lines[10].split(",")
    lines[10] = ",".join([x, xi, b, repr(1.5 * float(b))])
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(cli.SnapshotError, match="line 11: c > b"):
        cli.snapshot_load(path)


def test_snapshot_rejects_version_and_garbage(tmp_path):
    st = fe.prepare(idt.flat_profile((16, 4.0)))
    path = tmp_path / "s.csv"
    cli.snapshot_save(st, path)
    text = path.read_text()
    path.write_text(text.replace(f"{cli.SNAPSHOT_MAGIC} 1", f"{cli.SNAPSHOT_MAGIC} 99"))
    with pytest.raises(cli.SnapshotError, match="version"):
        cli.snapshot_load(path)
    path.write_text(text.replace("x,xi,b,c\n", "x,xi,b,c\n1,2,oops\n"))
    with pytest.raises(cli.SnapshotError, match="line 8: malformed row"):
        cli.snapshot_load(path)


def test_resume_matches_uninterrupted_run(tmp_path):
    st = fe.prepare(idt.sec_nonneg_profile((128, 10.0)))
    whole, f0 = fe.advance_to(st, 0.2)
    half, f1 = fe.advance_to(st, 0.1)
    cli.snapshot_save(half, tmp_path / "half.csv")
    loaded, _ = cli.snapshot_load(tmp_path / "half.csv")
    rest, f2 = fe.advance_to(loaded, 0.2)
    assert f0 is f1 is f2 is None
    for name in ("xi", "c"):
        a, b = getattr(whole.profile, name), getattr(rest.profile, name)
        assert np.max(np.abs(a - b)) <= 1e-12


def test_simulate_is_bitwise_deterministic(tmp_path):
    cfg = cli.parse_config(SMALL.format(family="gk").replace("family = gk", "family = gk\nk = 0.5"))
    code_a, _ = cli.run_simulation(cfg, tmp_path / "a")
    code_b, _ = cli.run_simulation(cfg, tmp_path / "b")
    assert code_a == code_b == cli.EXIT_OK
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()
    snaps = sorted((tmp_path / "a" / "snapshots").iterdir())
    assert [p.name for p in snaps] == ["snap_0000.csv", "snap_0001.csv", "snap_0002.csv"]
    summary = (tmp_path / "a" / "summary.txt").read_text()
    assert "class verdict (t=0): G_k(0.50)" in summary and "type verdict" in summary


def test_flat_simulation_summary(tmp_path):
    cfg = cli.parse_config(SMALL.format(family="flat"))
    code, numbers = cli.run_simulation(cfg, tmp_path)
    assert code == cli.EXIT_OK and numbers["type_verdict"] == "Type-III"
    assert "unbounded fiber" in (tmp_path / "summary.txt").read_text()
    header = (tmp_path / "series.csv").read_text().splitlines()[0]
    assert header.startswith("t,")


def test_sweep_empty_axes_gives_no_rows(tmp_path):
    cfg = cli.parse_config(SMALL.format(family="flat") + "[sweep]\nk =\n")
    assert cli.sweep_cells(cfg) == []
    rows = cli.run_sweep(cfg, tmp_path)
    assert rows == [] and (tmp_path / "sweep.csv").read_text().strip() == ",".join(cli.SWEEP_COLUMNS)


def test_sweep_isolates_failing_cell(tmp_path):
    cfg = cli.parse_config(SMALL.format(family="gk") + "[sweep]\nk = 0.5, 1.5\n")
    rows = cli.run_sweep(cfg, tmp_path)
    assert [r["status"] for r in rows] == ["ok", "error"]
    assert "initial data" in rows[1]["reason"]
    assert (tmp_path / "cell_000" / "series.csv").exists()


def test_main_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == cli.EXIT_USAGE
    bad = _write(tmp_path, "[initial_data]\nfamily = flat\ncolour = red\n")
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_USAGE
    assert "unknown key" in capsys.readouterr().err


def test_validate_and_compare_commands(tmp_path, capsys):
    st = fe.prepare(idt.taubnut_profile(1.0, (512, 40.0)))
    good = tmp_path / "tn.csv"
    cli.snapshot_save(st, good, "taubnut")
    assert cli.main(["validate", "--snapshot", str(good)]) == cli.EXIT_OK
    assert "G_AF_positive_mass" in capsys.readouterr().out
    assert cli.main(["compare", "--snapshot", str(good), "--mass", "1", "--window", "5"]) == cli.EXIT_OK
    assert "taubnut_deviation" in capsys.readouterr().out
    assert cli.main(["compare", "--snapshot", str(good), "--mass", "1", "--window", "1e4"]) == cli.EXIT_USAGE
    p = idt.flat_profile((256, 10.0))
    b = p.x + 0.3 * np.sin(4.0 * p.x) * (1.0 - np.exp(-p.x**2))
    broken = fe.FlowState(profile=p.replace(b=b, c=0.5 * b), kappa=(0.0, 0.0), step_count=0)
    cli.snapshot_save(broken, tmp_path / "bad.csv")
    assert cli.main(["validate", "--snapshot", str(tmp_path / "bad.csv")]) == cli.EXIT_VERIFY
    assert cli.main(["validate", "--snapshot", str(tmp_path / "missing.csv")]) == cli.EXIT_USAGE


def test_verify_perturbation_fails(capsys):
    assert cli.run_verify(perturb=True, points=3, sizes=(256, 512)) is False
    rows = [r for r in capsys.readouterr().out.splitlines() if r.startswith("oracle")]
    assert len(rows) == 4 and all(r.endswith("FAIL") for r in rows)


def test_verify_command_passes_on_pristine_build(capsys):
    assert cli.main(["verify"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("pass") == 8
    assert cli.main(["verify", "--perturb", "--points", "3"]) == cli.EXIT_VERIFY

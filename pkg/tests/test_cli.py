import json

import pytest

from dhasymp import cli, profiles
from dhasymp.io import read_csv, read_snapshot
from dhasymp.solver import BlowUpError, RunResult

SMALL = """
[grid]
n = 64
box_length = 32.0
[initial]
preset = offset_gaussian
mass = 0.1
width = 1.0
offset = 1.0, 0.0, 0.0
[solver]
dt = 0.05
t_end = 0.15
snapshot_times = 0.05, 0.1
"""


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    cfg = d / "run.ini"
    cfg.write_text(SMALL)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(d / "out")]) == 0
    return d


def test_constants(capsys, tmp_path):
    assert cli.main(["constants", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "3.0432707034e-05" in out
    assert "9.1298121103e-05" in out
    assert "7.5000000000e-01" in out
    (csv_path,) = tmp_path.glob("constants_*.csv")
    header, rows = read_csv(csv_path)
    table = {(r[0], r[2]): float(r[1]) for r in rows}
    assert table[("dimensionless_integral", "quadrature")] == pytest.approx(0.18117214741, abs=1e-8)
    ratio = table[("moment_coefficient_paper_over_oracle", "quadrature")]
    assert ratio == pytest.approx(0.5641895835, rel=1e-9)


def test_verify_fast_passes_and_writes_json(tmp_path):
    assert cli.main(["verify", "--profile", "fast", "--out", str(tmp_path)]) == 0
    (path,) = tmp_path.glob("verify_*.json")
    report = json.loads(path.read_text())
    assert report["passed"] and not report["failed"]
    assert all({"name", "target", "achieved", "tolerance", "passed"} <= set(c) for c in report["checks"])


def test_verify_detects_tampered_kappa(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(profiles, "KAPPA", profiles.KAPPA * 1.01)
    assert cli.main(["verify", "--out", str(tmp_path)]) == 1
    assert "kappa_vs_moment_quadrature" in capsys.readouterr().err
    (path,) = tmp_path.glob("verify_*.json")
    assert "kappa_vs_moment_quadrature" in json.loads(path.read_text())["failed"]


def test_usage_errors(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["simulate"]) == 2
    assert cli.main(["no-such-command"]) == 2
    assert cli.main(["compare", str(tmp_path)]) == 2  # no manifest
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nn = 48\n")
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text("[solver]\ndt = fast\n")
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_simulate_outputs(sim_dir):
    out = sim_dir / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["steps"] == 3
    assert manifest["version"] and len(manifest["config_hash"]) == 16
    assert len(manifest["snapshots"]) == 4
    s = read_snapshot(out / manifest["snapshots"][-1])
    assert s.time == pytest.approx(0.15)
    assert s.provenance == manifest["config_hash"]


def test_simulate_is_byte_identical(sim_dir):
    again = sim_dir / "again"
    assert cli.main(["simulate", "--config", str(sim_dir / "run.ini"), "--out", str(again)]) == 0
    for f in sorted((sim_dir / "out").glob("snap_*")) + [sim_dir / "out" / "manifest.json"]:
        assert (again / f.name).read_bytes() == f.read_bytes(), f.name


def test_simulate_blow_up_exit_code(sim_dir, monkeypatch, tmp_path):
    def explode(config, initial, provenance=""):
        raise BlowUpError("non-finite density at step 2", step_index=2,
                          partial=RunResult([initial], {"mass_trace": [1.0], "steps": 1, "dt": 0.05}))
    monkeypatch.setattr(cli, "run", explode)
    assert cli.main(["simulate", "--config", str(sim_dir / "run.ini"), "--out", str(tmp_path)]) == 3
    assert json.loads((tmp_path / "manifest.json").read_text())["complete"] is False


def test_compare_defaults_and_outputs(sim_dir, capsys):
    out = sim_dir / "out"
    assert cli.main(["compare", str(out), "--q", ""]) == 0
    text = capsys.readouterr().out
    assert "q=1" in text and "q=2" in text and "q=inf" in text
    assert "-2.00 (first claim)" in text and "-2.50 (second claim)" in text
    (js,) = out.glob("residuals_" + "?" * 16 + ".json")
    report = json.loads(js.read_text())
    assert all(c["passed"] for c in report["checks"])
    assert list(out.glob("residuals_*.gp"))
    (first,) = out.glob("residuals_" + "?" * 16 + ".csv")
    header, rows = read_csv(first)
    assert header == ["expansion", "t", "clock", "q", "residual"]


def test_compare_is_deterministic(sim_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["compare", str(sim_dir / "out"), "--q", "1,inf", "--window", "0:0.1", "--out", str(d)]) == 0
    for f in a.iterdir():
        assert (b / f.name).read_bytes() == f.read_bytes()


def test_compare_bad_flags(sim_dir):
    assert cli.main(["compare", str(sim_dir / "out"), "--window", "5"]) == 2
    assert cli.main(["compare", str(sim_dir / "out"), "--q", "0.5"]) == 2
    assert cli.main(["compare", str(sim_dir / "out"), "--expansions", "u0,second"]) == 2


def test_profile_table(tmp_path):
    args = ["profile-table", "--t", "1, 4, 64", "--x", "1 0 0  0 1 0  0 0 1  0 0 0", "--m0", "1", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    (path,) = tmp_path.glob("profiles_*.csv")
    header, rows = read_csv(path)
    col = {h: i for i, h in enumerate(header)}
    by_t = {}
    for r in rows:
        by_t.setdefault(float(r[0]), []).append(r)
    # log 1 = 0
    assert all(float(r[col["K2log"]]) == 0.0 for r in by_t[1.0])
    # radial: same value for the three unit vectors
    for rs in by_t.values():
        vals = {r[col["U1rad_oracle"]] for r in rs[:3]}
        assert len(vals) == 1
    # J - U1rad shrinks relative to U1rad as t grows
    rel = [abs(float(by_t[t][3][col["J_minus_U1rad"]]) / float(by_t[t][3][col["U1rad_oracle"]]))
           for t in (1.0, 4.0, 64.0)]
    assert rel[0] > rel[1] > rel[2]
    assert list(tmp_path.glob("profiles_*.gp"))


def test_profile_table_rejects_bad_input(tmp_path):
    assert cli.main(["profile-table", "--t", "0", "--out", str(tmp_path)]) == 2
    assert cli.main(["profile-table", "--x", "1 2", "--out", str(tmp_path)]) == 2

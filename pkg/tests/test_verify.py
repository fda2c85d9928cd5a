import runpy
from pathlib import Path

import pytest

from dhasymp import profiles
from dhasymp.verify import run_suite

DEMOS = Path(__file__).resolve().parents[1] / "demos"


def test_full_profile_passes():
    checks = run_suite("full")
    assert all(c["passed"] for c in checks), [c["name"] for c in checks if not c["passed"]]
    names = {c["name"] for c in checks}
    assert {"j_minus_u1rad_slope", "u1rad_scaling_qinf", "kappa_vs_moment_quadrature"} <= names


def test_suite_is_deterministic():
    assert run_suite("fast", seed=3) == run_suite("fast", seed=3)


def test_unknown_profile():
    with pytest.raises(ValueError):
        run_suite("medium")


def test_moment_constant_tamper_is_caught(monkeypatch):
    monkeypatch.setattr(profiles, "MOMENT_COEFFICIENT", profiles.MOMENT_COEFFICIENT * 0.99)
    failed = [c["name"] for c in run_suite("fast") if not c["passed"]]
    assert failed == ["moment_coefficient_oracle"]


@pytest.mark.parametrize("script", ["profiles_101.py", "constants_tour.py"])
def test_fast_demos_run(script, capsys):
    runpy.run_path(str(DEMOS / script), run_name="__main__")
    assert capsys.readouterr().out

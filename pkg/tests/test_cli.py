import csv
import json
import subprocess
import sys

import pytest

from dgp_dynamics.cli import main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_trajectory_collapse(tmp_path):
    assert run(tmp_path, "trajectory", "--kernel", "se", "--sigma2", "0.25", "--ell2", "1",
               "--m", "1", "--u0", "1", "--n", "300") == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert rows[0] == ["n", "u_n"]
    assert float(rows[-1][1]) <= 1e-10
    manifest = json.loads((tmp_path / "trajectory.json").read_text())
    assert manifest["command"] == "trajectory"
    assert manifest["config"]["sigma2"] == 0.25
    assert "version" in manifest and "wall_time_s" in manifest


def test_trajectory_zero(tmp_path):
    assert run(tmp_path, "trajectory", "--kernel", "rq", "--alpha", "2", "--u0", "0") == 0
    rows = read_csv(tmp_path / "trajectory.csv")[1:]
    assert all(float(r[1]) == 0.0 for r in rows)


def test_trajectory_from_pair(tmp_path):
    assert run(tmp_path, "trajectory", "--kernel", "se", "--pair", "0,1", "--n", "3") == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert float(rows[1][1]) == pytest.approx(0.7869386805747332, rel=1e-15)


def test_cos_width_rejected(tmp_path, capsys):
    assert run(tmp_path, "trajectory", "--kernel", "cos", "--m", "2", "--u0", "1") == 1
    assert "m = 1" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["trajectory", "--kernel", "nope", "--u0", "1"],
        ["trajectory", "--kernel", "se"],
        ["trajectory", "--kernel", "se", "--u0", "1", "--sigma2", "-1"],
        ["scan", "--mode", "contour", "--axis", "sigma2:1:2"],
        ["simulate", "--kernel", "se", "--depth", "2", "--inputs", "0,1"],
        ["bogus"],
    ],
)
def test_config_errors_exit_1(tmp_path, argv):
    assert run(tmp_path, *argv) == 1


def test_numerical_failure_exit_2(tmp_path, monkeypatch):
    from dgp_dynamics import cli
    from dgp_dynamics.errors import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("forced")

    monkeypatch.setattr(cli, "trajectory", boom)
    assert run(tmp_path, "trajectory", "--kernel", "se", "--u0", "1") == 2


def test_contour_scan_rows(tmp_path):
    assert run(tmp_path, "scan", "--kernel", "se", "--axis", "sigma2:0.1:5:50",
               "--axis", "inv_ell2:0.1:5:50", "--no-classify") == 0
    rows = read_csv(tmp_path / "scan.csv")
    assert rows[0] == ["p1", "p2", "u_final", "classification"]
    assert len(rows) == 2501


def test_sm_contour_positive(tmp_path):
    assert run(tmp_path, "scan", "--kernel", "sm", "--axis", "sigma2:0.25:2:8",
               "--axis", "mu:0.25:2:8", "--name", "sm") == 0
    rows = read_csv(tmp_path / "sm.csv")[1:]
    assert min(float(r[2]) for r in rows) > 0
    assert {r[3] for r in rows} == {"NON_PATHOLOGICAL"}


def test_logistic_bifurcation(tmp_path):
    assert run(tmp_path, "scan", "--mode", "bifurcation", "--family", "logistic",
               "--axis", "r:2.5:4:31") == 0
    rows = read_csv(tmp_path / "scan.csv")
    assert rows[0] == ["param", "iterate_index", "value"]
    per_r = {}
    for r, _, v in rows[1:]:
        per_r.setdefault(float(r), []).append(float(v))
    assert len(per_r[2.5]) == 1
    assert len(per_r[3.2]) == 2
    chaotic = min(per_r, key=lambda r: abs(r - 3.9))
    assert len(per_r[chaotic]) > 8
    # from u0 = 0.5 the r = 4 orbit lands exactly on the fixed point 0
    assert per_r[4.0] == [0.0]


def test_threshold_scan(tmp_path):
    assert run(tmp_path, "scan", "--mode", "threshold", "--axis", "m:1:3:3",
               "--axis", "ell2:2:2:1") == 0
    rows = read_csv(tmp_path / "scan.csv")[1:]
    assert [r[3] for r in rows] == ["PATHOLOGICAL", "MARGINAL", "NON_PATHOLOGICAL"]


def test_simulate_deterministic(tmp_path):
    argv = ["simulate", "--kernel", "se", "--sigma2", "1", "--ell2", "1", "--m", "1",
            "--depth", "10", "--inputs", "0,1", "--reps", "300", "--seed", "1"]
    assert main([*argv, "--out", str(tmp_path / "a")]) == 0
    assert main([*argv, "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    a = (tmp_path / "a" / "simulate.csv").read_text()
    assert a == (tmp_path / "b" / "simulate.csv").read_text()
    rows = read_csv(tmp_path / "a" / "simulate.csv")
    assert rows[0] == ["layer", "empirical_mean", "std_error", "predicted_u"]
    assert len(rows) == 11
    manifest = json.loads((tmp_path / "a" / "simulate.json").read_text())
    assert manifest["seed"] == 1
    assert manifest["config"]["sim_config"]["rng"].startswith("numpy PCG64")


def test_rmsd_command(tmp_path):
    assert run(tmp_path, "rmsd", "--ratio", "5", "--layers", "5", "--reps", "3",
               "--ndata", "10", "--seed", "2") == 0
    rows = read_csv(tmp_path / "rmsd.csv")
    assert rows[0] == ["layer", "replication", "rmsd"]
    assert len(rows) == 1 + 3 * 6


def test_classify_json(tmp_path, capsys):
    assert run(tmp_path, "classify", "--kernel", "se", "--sigma2", "2", "--ell2", "1") == 0
    data = json.loads((tmp_path / "classify.json").read_text())
    assert data["pathological"] == "NON_PATHOLOGICAL"
    assert (tmp_path / "classify.manifest.json").exists()
    capsys.readouterr()
    assert run(tmp_path, "classify", "--kernel", "se") == 0
    assert json.loads((tmp_path / "classify.json").read_text())["pathological"] == "MARGINAL"
    assert run(tmp_path, "classify", "--kernel", "se", "--sigma2", "0.25", "--c", "1") == 0
    fps = json.loads((tmp_path / "classify.json").read_text())["fixed_points"]
    assert len(fps) == 1 and fps[0]["stable"] and fps[0]["location"] > 1


def test_csv_full_precision_and_lf(tmp_path):
    run(tmp_path, "trajectory", "--kernel", "se", "--u0", "1", "--n", "2")
    raw = (tmp_path / "trajectory.csv").read_bytes()
    assert b"\r" not in raw
    text = raw.decode().splitlines()[2].split(",")[1]
    assert len(text.lstrip("0.")) == 17
    assert float(text) == pytest.approx(2.0 * (1.0 - 2**-0.5), rel=1e-15)


def test_manifest_argv_round_trip(tmp_path):
    argv = ["trajectory", "--kernel", "sm", "--sigma2", "0.7", "--u0", "0.3", "--n", "7",
            "--out", str(tmp_path / "first")]
    assert main(argv) == 0
    manifest = json.loads((tmp_path / "first" / "trajectory.json").read_text())
    replay = list(manifest["argv"])
    replay[replay.index("--out") + 1] = str(tmp_path / "second")
    assert main(replay) == 0
    assert ((tmp_path / "first" / "trajectory.csv").read_text()
            == (tmp_path / "second" / "trajectory.csv").read_text())


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DGP_DYNAMICS_THREADS", "zero")
    assert run(tmp_path, "trajectory", "--kernel", "se", "--u0", "1") == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dgp_dynamics", "classify", "--kernel", "sm",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "NON_PATHOLOGICAL" in proc.stdout

import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from nlsrelax import cli, output, scenarios
from nlsrelax.mesh import read_mesh

SMALL = ["--triangles", "300", "--dt", "0.05", "--tfinal", "0.5"]


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    if capsys is None:
        return code
    cap = capsys.readouterr()
    return code, cap.out, cap.err


# -- run ---------------------------------------------------------------------------

def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "bright"
    code, stdout, _ = run(["run", "--preset", "bright-neumann", *SMALL, "--out", out,
                           "--snapshot-times", 0, 0.25, "--vtk", "--cross-section-y", 0.0,
                           "--cross-section-samples", 51], capsys)
    assert code == 0
    assert "max relative drift" in stdout
    header, diag = output.read_csv(out / "diagnostics.csv")
    assert header == ["t", "mass", "energy"]
    assert diag[0, 0] == 0.0 and diag[-1, 0] == pytest.approx(0.5)
    assert np.max(np.abs(diag[:, 1] / diag[0, 1] - 1)) <= 1e-7
    for n in (0, 5):
        assert (out / f"snapshot_{n:06d}.csv").exists()
        assert (out / f"snapshot_{n:06d}.vtk").exists()
        assert output.load_state(out / f"state_{n:06d}.json").n == n
    final = output.load_state(out / "final_state.json")
    assert final.n == 10 and final.t == pytest.approx(0.5)
    header, section = output.read_csv(out / "cross_section.csv")
    assert header == ["x", "re", "im", "abs"] and len(section) == 51
    assert section[0, 0] == pytest.approx(-5.0) and section[-1, 0] == pytest.approx(5.0)


def test_dark_diagonal_desk_run_has_no_nan(tmp_path, capsys):
    out = tmp_path / "dark"
    code, _, _ = run(["run", "--preset", "dark-diagonal", "--triangles", "400", "--tfinal", 15,
                      "--out", out], capsys)
    assert code == 0
    _, diag = output.read_csv(out / "diagnostics.csv")
    assert diag[-1, 0] == pytest.approx(15.0)
    assert np.all(np.isfinite(diag))
    assert np.max(np.abs(diag[:, 1] / diag[0, 1] - 1)) <= 1e-8


def test_threads_flag_gives_identical_files(tmp_path, capsys):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run(["run", *SMALL, "--threads", 1, "--out", out], capsys)[0] == 0
    for name in ("diagnostics.csv", "final_state.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


@pytest.mark.parametrize("argv", [
    ["run", "--dt", "2", "--tfinal", "1"],
    ["run", "--dt", "-0.1"],
    ["run", "--preset", "no-such-preset"],
    ["run", "--degree", "3"],
    ["run", "--tol", "2"],
    ["run", "--mesh", "m.msh", "--triangles", "100"],
    ["run", "--cross-section-samples", "1"],
    ["eoc-time", "--ladder", "0.5", "8"],
    ["eoc-time", "--preset", "dark-diagonal", "--triangles", "100"],
])
def test_configuration_errors_exit_2(tmp_path, capsys, argv):
    code, _, err = run([*argv, "--out", tmp_path], capsys)
    assert code == cli.EXIT_CONFIG
    assert err.startswith("config error")


def test_bad_mesh_file_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.msh"
    bad.write_text("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
    code, _, err = run(["run", "--mesh", bad, "--out", tmp_path], capsys)
    assert code == cli.EXIT_MESH and "mesh error" in err


def test_solver_failure_exits_4(tmp_path, capsys):
    code, _, err = run(["run", *SMALL, "--tol", "1e-300", "--out", tmp_path], capsys)
    assert code == cli.EXIT_SOLVER and "solver error" in err


def test_solver_failure_mid_run_keeps_diagnostics(tmp_path, capsys, monkeypatch):
    from nlsrelax import linalg, stepper

    calls = []

    class Failing(linalg.Factorization):
        def solve(self, b, x0=None):
            calls.append(1)
            if len(calls) > 3:
                raise linalg.SolverError("forced failure", 1.0)
            return super().solve(b, x0)

    monkeypatch.setattr(stepper, "Factorization", Failing)
    code, _, err = run(["run", *SMALL, "--record-every", 1, "--out", tmp_path], capsys)
    assert code == cli.EXIT_SOLVER and "step 3 failed" in err
    _, diag = output.read_csv(tmp_path / "diagnostics.csv")
    assert len(diag) == 4 and diag[-1, 0] == pytest.approx(0.15)


def test_blowup_exits_5(tmp_path, capsys, monkeypatch):
    p = scenarios.preset("bright-neumann")
    bad = lambda x, y, t: np.where(t > 0.1, np.nan, 0.0) + 0 * x  # noqa: E731
    monkeypatch.setitem(scenarios.PRESETS, "bright-neumann", dataclasses.replace(p, forcing=bad))
    code, _, err = run(["run", *SMALL, "--record-every", 1, "--out", tmp_path], capsys)
    assert code == cli.EXIT_BLOWUP and "non-finite" in err
    _, diag = output.read_csv(tmp_path / "diagnostics.csv")
    assert len(diag) == 3 and np.all(np.isfinite(diag))


# -- config files ------------------------------------------------------------------

def test_config_file_with_override(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\npreset = bright-mixed\ndt = 0.05\ntfinal = 0.2\n"
                   "[mesh]\ntriangles = 200\n[output]\nsnapshot_times = 0.1\n")
    out = tmp_path / "o"
    code, stdout, _ = run(["run", "--config", ini, "--tfinal", 0.1, "--out", out], capsys)
    assert code == 0
    assert "bright-mixed" in stdout and "2 steps to T=0.1" in stdout
    assert (out / "snapshot_000002.csv").exists()


def test_config_file_unknown_key(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\ntimestep = 0.1\n")
    code, _, err = run(["run", "--config", ini, "--out", tmp_path], capsys)
    assert code == cli.EXIT_CONFIG and "timestep" in err


def test_read_config_values(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\ndegree = 1\nfull_scale = yes\n[solver]\nmethod = iterative\ntol = 1e-9\n"
                   "[output]\nsnapshot_times = 0 0.5 1\nvtk = true\n")
    assert cli.read_config(ini) == {"degree": 1, "full_scale": True, "solver": "iterative", "tol": 1e-9,
                                    "snapshot_times": (0.0, 0.5, 1.0), "vtk": True}


def test_run_config_desk_and_full_scale():
    desk = cli.RunConfig(preset="bright-neumann")
    desk.resolve()
    assert (desk.triangles, desk.k, desk.T_final, desk.degree) == (8000, 1e-2, 1.0, 2)
    full = cli.RunConfig(preset="bright-neumann", full_scale=True)
    full.resolve()
    assert (full.triangles, full.k, full.T_final) == (74496, 5e-3, 3.0)


# -- convergence tables ------------------------------------------------------------

def test_eoc_time_single_rung(tmp_path, capsys):
    code, stdout, _ = run(["eoc-time", "--triangles", 300, "--ladder", 0.5, "--out", tmp_path], capsys)
    assert code == 0 and "--" in stdout
    lines = (tmp_path / "eoc_time.csv").read_text().splitlines()
    assert lines[0] == "k,error,eoc" and len(lines) == 2
    assert lines[1].endswith(",") and float(lines[1].split(",")[1]) > 0


def test_eoc_time_control_is_second_order(tmp_path, capsys):
    code, _, _ = run(["eoc-time", "--control", "--triangles", 200, "--ladder", 0.5, 0.25, 0.125,
                      "--out", tmp_path], capsys)
    assert code == 0
    header, data = output.read_csv(tmp_path / "eoc_time.csv")
    assert header == ["k", "error", "eoc"]
    assert np.isnan(data[0, 2])
    np.testing.assert_allclose(data[1:, 2], 2.0, atol=0.1)


def test_eoc_space_control_uses_sentinel(tmp_path, capsys):
    code, stdout, _ = run(["eoc-space", "--control", "--ladder", 8, 32, "--degree", 1, "--out", tmp_path],
                          capsys)
    assert code == 0 and "n/a" in stdout and "least-squares" not in stdout
    header, data = output.read_csv(tmp_path / "eoc_space_p1.csv")
    assert header == ["N", "h", "error", "eoc"]
    assert np.all(data[:, 2] < 1e-10) and np.isnan(data[1, 3])


def test_eoc_space_small_ladder(tmp_path, capsys):
    code, stdout, _ = run(["eoc-space", "--ladder", 32, 128, 512, "--degree", 1, "--out", tmp_path], capsys)
    assert code == 0 and "least-squares rate" in stdout
    _, data = output.read_csv(tmp_path / "eoc_space_p1.csv")
    assert np.all(np.diff(data[:, 2]) < 0)
    assert data[-1, 3] > 1.5


# -- probe -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bright_states(tmp_path_factory):
    out = tmp_path_factory.mktemp("probe")
    assert cli.main(["run", "--triangles", "800", "--dt", "0.05", "--tfinal", "0.5", "--out", str(out),
                     "--snapshot-times", "0"]) == 0
    return out / "state_000000.json", out / "final_state.json"


def test_probe_initial_peak(bright_states, capsys):
    code, stdout, _ = run(["probe", bright_states[0], "--n", 201], capsys)
    assert code == 0
    rows = stdout.splitlines()
    assert rows[0] == "x,re,im,abs" and len(rows) == 202
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert data[:, 3].max() == pytest.approx(2.0, rel=1e-2)
    np.testing.assert_allclose(np.hypot(data[:, 1], data[:, 2]), data[:, 3], rtol=1e-12, atol=1e-15)


def test_probe_to_file_and_compare(bright_states, tmp_path, capsys):
    path = tmp_path / "p.csv"
    code, stdout, _ = run(["probe", bright_states[0], "--out", path, "--compare", bright_states[0]], capsys)
    assert code == 0 and float(stdout.split(":")[1]) == 0.0
    assert output.read_csv(path)[0] == ["x", "re", "im", "abs"]
    # the initial bright profile is even in x, so mirroring changes nothing up to sampling
    code, _, err = run(["probe", bright_states[0], "--compare", bright_states[0], "--mirror"], capsys)
    assert code == 0 and "(mirrored)" in err and float(err.split(":")[1]) < 1e-3
    code, _, err = run(["probe", bright_states[0], "--compare", bright_states[1]], capsys)
    assert float(err.split(":")[1]) > 1e-2


def test_probe_errors(bright_states, tmp_path, capsys):
    assert run(["probe", bright_states[0], "--y0", 5.0], capsys)[0] == cli.EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format": "nope"}))
    assert run(["probe", bad], capsys)[0] == cli.EXIT_CONFIG
    assert run(["probe", tmp_path / "missing.json"], capsys)[0] == cli.EXIT_CONFIG
    assert run(["probe", bright_states[0], "--n", 1], capsys)[0] == cli.EXIT_CONFIG


# -- mesh-gen ----------------------------------------------------------------------

def test_mesh_gen_structured(tmp_path, capsys):
    path = tmp_path / "s.msh"
    code, stdout, _ = run(["mesh-gen", "--structured", 4, 2, "--bbox", 0, 2, 0, 1, "--bc", "dirichlet",
                           "--out", path], capsys)
    assert code == 0 and "16 triangles" in stdout
    mesh = read_mesh(path)
    assert len(mesh.triangles) == 16 and set(mesh.boundary_tags) == {"D"}


def test_mesh_gen_polygon_and_preset(tmp_path, capsys):
    path = tmp_path / "p.msh"
    code, _, _ = run(["mesh-gen", "--polygon", 0, 0, 2, 0, 2, 1, 0, 1, "--target-h", 0.25, "--bc", "mixed",
                      "--out", path], capsys)
    assert code == 0
    mesh = read_mesh(path)
    assert mesh.area == pytest.approx(2.0)
    assert set(mesh.boundary_tags) == {"D", "N"}
    path = tmp_path / "d.msh"
    code, _, _ = run(["mesh-gen", "--preset", "dark-diagonal", "--triangles", 500, "--out", path], capsys)
    assert code == 0
    assert read_mesh(path).area == pytest.approx(31.0)
    code, _, _ = run(["run", "--preset", "dark-diagonal", "--mesh", path, "--dt", 0.1, "--tfinal", 0.2,
                      "--out", tmp_path / "o"], capsys)
    assert code == 0


@pytest.mark.parametrize("argv,code", [
    (["--polygon", 0, 0, 1, 0, 1, 1, 0, 1, 0.5, 0.5, "--target-h", 0.1], cli.EXIT_MESH),
    (["--polygon", 0, 0, 1, 0, 2, 0, "--target-h", 0.1], cli.EXIT_MESH),
    (["--polygon", 0, 0, 1, 0, 1, 1], cli.EXIT_CONFIG),
    (["--polygon", 0, 0, 1, 0], cli.EXIT_CONFIG),
    (["--preset", "nope"], cli.EXIT_CONFIG),
])
def test_mesh_gen_errors(tmp_path, capsys, argv, code):
    assert run(["mesh-gen", *argv, "--out", tmp_path / "x.msh"], capsys)[0] == code


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nlsrelax", "run", "--preset", "nope", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "unknown preset" in res.stderr

import json
import os
import subprocess

import pytest

CLI = os.environ.get("PGNE_CLI", "pgne")


def run(*args, cwd=None):
    return subprocess.run([CLI, *args], capture_output=True, text=True, cwd=cwd, timeout=300)


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def experiment(**overrides):
    cfg = {
        "schema": "pgne.experiment/1",
        "name": "cli",
        "family": "pfc",
        "game": {"kind": "zero_sum"},
        "compensators": {"x": {"type": "pfc_first_order", "a": 1.0}},
        "x0": [1.0, 0.0],
        "integrator": {"h": 1e-3, "horizon": 60.0, "record_stride": 100,
                       "stop_on": {"residual_threshold": 1e-5, "window": 100}},
    }
    cfg.update(overrides)
    return cfg


@pytest.fixture
def out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PGNE_OUTPUT_ROOT", str(tmp_path / "out"))
    return tmp_path


def test_residual_exit(out_env):
    r = run("run", write(out_env / "a.json", experiment(output_dir=str(out_env / "a"))))
    assert r.returncode == 0, r.stdout + r.stderr
    assert (out_env / "a" / "summary.json").exists()


def test_horizon_exit(out_env):
    cfg = experiment(family="gp", compensators={}, output_dir=str(out_env / "b"))
    cfg["integrator"]["horizon"] = 1.0
    assert run("run", write(out_env / "b.json", cfg)).returncode == 2


def test_gate_exit(out_env):
    cfg = experiment(family="ofc", output_dir=str(out_env / "c"))
    r = run("run", write(out_env / "c.json", cfg))
    assert r.returncode == 4
    assert not (out_env / "c" / "trajectory.csv").exists()


def test_config_exit(out_env):
    cfg = experiment(game={"kind": "unknown"})
    assert run("run", write(out_env / "d.json", cfg)).returncode == 1


def test_divergence_exit(out_env):
    cfg = experiment(family="gp", compensators={},
                     game={"kind": "quadratic", "action_dims": [1, 1],
                           "M": [[-1.0, 0.0], [0.0, -1.0]], "c": [0.0, 0.0]},
                     output_dir=str(out_env / "e"))
    cfg["integrator"]["horizon"] = 2000.0
    assert run("run", write(out_env / "e.json", cfg)).returncode == 3


def test_oracle_and_verify(out_env):
    r = run("oracle", write(out_env / "g.json", {"kind": "cournot", "seed": 42}))
    assert r.returncode == 0
    assert len(json.loads(r.stdout)["x_star"]) > 0
    r = run("verify-compensator",
            write(out_env / "h.json", {"block": {"type": "pfc_first_order", "a": 1.0}, "family": "ofc"}))
    assert r.returncode == 4
    assert json.loads(r.stdout)["gate"]["ok"] is False


def test_quick_bench(out_env):
    r = run("bench", "quick")
    assert r.returncode == 0, r.stdout
    assert (out_env / "out" / "quick" / "bench_summary.json").exists()

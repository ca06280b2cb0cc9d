import json

import ionflow as io
from ionflow.cli import main


def write_config(tmp_path, **over):
    blocks = {
        "run": {"t_end": 0.003, "sample_every": 2},
        "output": {"directory": str(tmp_path / "out"), "formats": ["ndjson"]},
    }
    for k, v in over.items():
        if isinstance(v, dict) and k in blocks:
            blocks[k].update(v)
        else:
            blocks[k] = v
    cfg = io.scenario_with("two_species_relaxation", **blocks)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.echo))
    return path


def test_simulate_success(tmp_path, capsys):
    path = write_config(tmp_path)
    code = main(["simulate", "--config", str(path)])
    assert code == 0
    out = capsys.readouterr().out
    assert json.loads(out)["exit_code"] == 0
    assert (tmp_path / "out" / "diagnostics.ndjson").exists()


def test_simulate_out_and_until_overrides(tmp_path):
    path = write_config(tmp_path)
    code = main(["simulate", "--config", str(path),
                 "--out", str(tmp_path / "elsewhere"), "--until", "0.001"])
    assert code == 0
    assert (tmp_path / "elsewhere" / "diagnostics.ndjson").exists()


def test_simulate_config_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"grid": {"dim": 2}}')
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_simulate_missing_file_exit_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_invariant_violation_exit_4(tmp_path, capsys):
    path = write_config(tmp_path, run={"dt": 1.0, "t_end": 2.0, "sample_every": 1})
    assert main(["simulate", "--config", str(path)]) == 4
    assert (tmp_path / "out" / "error.json").exists()
    assert (tmp_path / "out" / "abort.ckpt").exists()


def test_solver_failure_exit_3(tmp_path, monkeypatch, capsys):
    from ionflow.errors import SolverError
    import ionflow.cli as cli

    def boom(*args, **kwargs):
        raise SolverError("synthetic non-convergence", residual=1.0)

    monkeypatch.setattr(cli, "run_simulation", boom)
    path = write_config(tmp_path)
    assert main(["simulate", "--config", str(path)]) == 3
    assert "solver failure" in capsys.readouterr().err


def test_resume_cli(tmp_path):
    path = write_config(tmp_path, checkpoint={"every_n_steps": 5})
    assert main(["simulate", "--config", str(path)]) == 0
    ckpt = tmp_path / "out" / "checkpoint.ckpt"
    code = main(["resume", "--checkpoint", str(ckpt),
                 "--out", str(tmp_path / "resumed"), "--until", "0.004"])
    assert code == 0
    assert (tmp_path / "resumed" / "diagnostics.ndjson").exists()


def test_scenario_print_config(capsys):
    assert main(["scenario", "--name", "two_species_relaxation",
                 "--print-config"]) == 0
    tree = json.loads(capsys.readouterr().out)
    assert tree["grid"]["dim"] == 2


def test_scenario_unknown_exit_2(capsys):
    assert main(["scenario", "--name", "galaxy"]) == 2
    err = capsys.readouterr().err
    assert "two_species_relaxation" in err


def test_convergence_cli(capsys):
    assert main(["convergence", "--case", "poisson_robin"]) == 0
    out = capsys.readouterr().out
    assert "pass" in out


def test_convergence_unknown_case():
    assert main(["convergence", "--case", "warp"]) == 2


def test_verify_suite_cli(capsys):
    assert main(["verify", "--suite", "poisson"]) == 0
    out = capsys.readouterr().out
    assert "suite poisson: pass" in out
    # machine-readable records follow the text block
    recs = [json.loads(l) for l in out.splitlines() if l.startswith("{")]
    assert all("check" in r for r in recs)


def test_verify_unknown_suite():
    assert main(["verify", "--suite", "everything"]) == 2

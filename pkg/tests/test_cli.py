import json
from pathlib import Path

import pytest

from cuspdiv import cli


def run_cli(args):
    return cli.main(args)


def read(path):
    return Path(path).read_text()


def strip_manifest(outdir, subcommand):
    """Summary JSON without the volatile manifest pointer removed files."""
    payload = json.loads(read(Path(outdir) / f"{subcommand}_summary.json"))
    payload.pop("manifest", None)
    return payload


def test_whitney_run_and_artifacts(tmp_path):
    code = run_cli(["whitney", "--alpha", "0.5", "--kmax", "6",
                    "--outdir", str(tmp_path)])
    assert code == 0
    summary = json.loads(read(tmp_path / "whitney_summary.json"))
    assert summary["cubes"] > 0
    dec_file = tmp_path / summary["decomposition_file"]
    assert dec_file.exists()
    manifest = json.loads(read(tmp_path / "whitney_manifest.json"))
    assert manifest["config"]["params"]["alpha"] == 0.5
    assert "whitney_summary.json" in manifest["outputs"]
    assert "numpy" in manifest["versions"]


def test_repeated_runs_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["ap-check", "--alpha", "0.5", "--mu", "0.5", "--resolution", "256"]
    assert run_cli(args + ["--outdir", str(a)]) == 0
    assert run_cli(args + ["--outdir", str(b)]) == 0
    csv = "ap_alpha0.5_mu0.5_p2.csv"
    assert read(a / csv) == read(b / csv)
    assert strip_manifest(a, "ap-check") == strip_manifest(b, "ap-check")


def test_csv_has_manifest_header(tmp_path):
    assert run_cli(["ap-check", "--alpha", "0.5", "--mu", "0.5",
                    "--resolution", "256", "--outdir", str(tmp_path)]) == 0
    lines = read(tmp_path / "ap_alpha0.5_mu0.5_p2.csv").splitlines()
    assert lines[0] == "# manifest: ap-check_manifest.json"
    assert lines[1].split(",")[0] == "center_x"


def test_config_file_with_flag_override(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(
        "alpha = 0.5   # overridden on the command line\n"
        "kmax = 5\n"
        f"outdir = {tmp_path / 'cfg_out'}\n"
    )
    code = run_cli(["whitney", "--config", str(cfgfile), "--alpha", "0.75"])
    assert code == 0
    summary = json.loads(read(tmp_path / "cfg_out" / "whitney_summary.json"))
    assert summary["alpha"] == 0.75    # flag wins
    assert summary["kmax"] == 5        # config survives


def test_malformed_config_rejected(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("alpha 0.5\n")
    with pytest.raises(ValueError):
        run_cli(["whitney", "--config", str(bad)])


def test_missing_alpha_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run_cli(["whitney", "--outdir", str(tmp_path)])
    assert exc.value.code == 2


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run_cli(["frobnicate", "--alpha", "0.5"])
    assert exc.value.code == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    # stokes requires alpha > 1/2: domain is valid but the solve is not
    code = run_cli(["stokes", "--alpha", "0.4", "--outdir", str(tmp_path)])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_mset_check_summary(tmp_path):
    code = run_cli(["mset-check", "--alpha", "0.5", "--centers", "4",
                    "--outdir", str(tmp_path)])
    assert code == 0
    summary = json.loads(read(tmp_path / "mset-check_summary.json"))
    assert summary["ok"]
    assert abs(summary["m_fit"] - 1.0) < 0.2


def test_div_solve_fem_method(tmp_path):
    code = run_cli(["div-solve", "--alpha", "0.75", "--method", "fem",
                    "--h", "0.2", "--outdir", str(tmp_path)])
    assert code == 0
    summary = json.loads(read(tmp_path / "div-solve_summary.json"))
    assert summary["method"] == "fem"
    assert summary["constraint_residual"] < 1e-8
    assert summary["weighted_ratio"] > 0.0


def test_div_solve_unknown_method(tmp_path):
    code = run_cli(["div-solve", "--alpha", "0.75", "--method", "magic",
                    "--outdir", str(tmp_path)])
    assert code == 1

import json
import os
import subprocess
import sys

import pytest

from kirchnorm import cli, scalar
from kirchnorm.errors import (InvalidParams, MassMismatch, MissingConstant, NoRootFound,
                              RegimeError, Stalled, ZeroField)

S4 = scalar.sobolev_constant(4)
S5 = scalar.sobolev_constant(5)
B0_5, B1_5 = scalar._b_thresholds(5, 1.0, S5)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _json(out):
    return json.loads(out)


def test_constants_n4_b0_equals_b1(capsys):
    code, out, _ = run(capsys, "constants", "--N", "4", "--a", "1", "--format", "json")
    assert code == 0
    th = _json(out)["thresholds"]
    assert th["b0"] == th["b1"] == pytest.approx(S4**-2, rel=1e-15)


def test_constants_table_is_default(capsys):
    code, out, _ = run(capsys, "constants", "--N", "4", "--a", "1")
    assert code == 0
    rows = {line.split()[0]: line.split()[1] for line in out.splitlines()[3:] if line.strip()}
    assert float(rows["b0"]) == pytest.approx(S4**-2, rel=1e-11)
    assert rows["b0"] == rows["b1"]


def test_constants_relative_b(capsys):
    code, out, _ = run(capsys, "constants", "--N", "5", "--a", "1", "--b", "0.5b0",
                       "--format", "json")
    d = _json(out)
    th = d["thresholds"]
    assert code == 0
    assert d["run_config"]["params"]["b"] == pytest.approx(0.5 * B0_5, rel=1e-15)
    assert d["run_config"]["inputs"]["b"] == "0.5b0"
    for k in ("xi_minus", "xi_plus", "eta", "c_N_minus", "c_N_plus"):
        assert th[k] is not None
    assert th["xi_minus"] < th["xi_plus"]
    assert d["regime_tag"] == "Th2.1(i)"


def test_invalid_q_exit_2(capsys):
    code, out, err = run(capsys, "constants", "--N", "5", "--q", "4")
    assert code == cli.EXIT_INVALID == 2
    assert "2 < q < 2*" in err and out == ""


def test_unparseable_relative_value_exit_2(capsys):
    code, _, err = run(capsys, "constants", "--N", "5", "--b", "0.5zz")
    assert code == 2 and "cannot parse" in err


def test_fiber_two_roots(capsys):
    code, out, _ = run(capsys, "fiber", "--N", "5", "--mu", "0", "--b", "0.7b0",
                       "--source", "bubble")
    d = _json(out)
    assert code == 0
    assert d["classes"] == ["minus", "plus"]
    assert d["roots"][0]["psi"] > d["roots"][1]["psi"]


def test_fiber_without_roots_exit_code(capsys):
    code, _, err = run(capsys, "fiber", "--N", "5", "--b", "2b0")
    assert code == cli.EXIT_ROOTS
    assert "NoRootFound" in err


def test_sweep_csv_one_row_per_value(capsys):
    code, out, _ = run(capsys, "sweep", "--N", "5", "--axis", "b",
                       "--values=-b0,0.5b0,b0,2b0")
    lines = out.splitlines()
    assert code == 0
    assert lines[0].startswith("# run_config=")
    assert json.loads(lines[0][len("# run_config="):])["options"]["values"] == [
        "-b0", "0.5b0", "b0", "2b0"]
    assert lines[1].startswith("axis,value,regime_tag")
    assert len(lines) == 2 + 4
    assert [ln.split(",")[2] for ln in lines[2:]] == ["Th2.1(ii)", "Th2.1(i)", "inadmissible",
                                                      "Th2.1(iii)"]


def test_verify_th27_full_exit_0(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--regime", "th2.7", "--depth", "full",
                       "--out", str(tmp_path))
    assert code == 0
    d = _json(out)
    assert d["summary"]["ok"] and d["regime_tag"] == "Th2.7"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "OK" and man["exit_code"] == 0
    assert set(man["files"]) == {"report.json"}
    assert {"kirchnorm", "numpy", "scipy", "python"} <= set(man["versions"])
    assert "total" in man["timings_s"]


def test_verify_failing_check_exit_1(capsys, tmp_path):
    # at b = 0.7 S^-2 the eps = 0.2 probe field has |v|_4^4 < b |grad v|^4
    code, out, _ = run(capsys, "verify", "--N", "4", "--b", "0.7S^-2", "--out", str(tmp_path))
    assert code == cli.EXIT_CHECKS_FAILED
    d = _json(out)
    failed = {c["name"]: c for c in d["checks"] if c["status"] == "fail"}
    assert set(failed) == {"v_eps_quotient_decreasing", "v_eps_quotient_linear"}
    assert failed["v_eps_quotient_decreasing"]["values"]["Q"][0] < 0
    assert "R2" in failed["v_eps_quotient_linear"]["values"]
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "CHECKS_FAILED"


def test_verify_inadmissible_exit_3(capsys):
    code, _, err = run(capsys, "verify", "--N", "5", "--b", "b0")
    assert code == cli.EXIT_REGIME
    assert "b = b0" in err


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"params": {"N": 5, "b": "0.3b0", "c": 2.0},
                               "output": {"format": "json"}}))
    code, out, _ = run(capsys, "constants", "--config", str(cfg), "--b", "0.6b0")
    d = _json(out)
    assert code == 0
    assert d["run_config"]["inputs"] == {"N": 5, "b": "0.6b0", "c": 2.0}
    assert d["run_config"]["params"]["b"] == pytest.approx(0.6 * B0_5, rel=1e-15)
    assert d["run_config"]["params"]["c"] == 2.0


def test_config_unknown_key_rejected(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"params": {"N": 5, "bb": 1.0}}))
    code, _, err = run(capsys, "constants", "--config", str(cfg))
    assert code == 2 and "bb" in err


def test_missing_config_file_exit_io(capsys, tmp_path):
    code, _, _ = run(capsys, "constants", "--config", str(tmp_path / "none.json"))
    assert code == cli.EXIT_IO


def test_byte_identical_artifacts(capsys, tmp_path):
    args = ["mp", "--kind", "mu0", "--N", "5", "--b", "bmid", "--n-cells", "2000",
            "--out", str(tmp_path)]
    names = ("path.json", "path.csv")
    _, out1, _ = run(capsys, *args)
    first = {n: (tmp_path / n).read_bytes() for n in names}
    m1 = json.loads((tmp_path / "manifest.json").read_text())
    _, out2, _ = run(capsys, *args)
    m2 = json.loads((tmp_path / "manifest.json").read_text())
    assert out1 == out2
    for n in names:
        assert first[n] and (tmp_path / n).read_bytes() == first[n]
    assert m1["files"] == m2["files"] and m1["inputs_sha256"] == m2["inputs_sha256"]


def test_every_artifact_embeds_run_config(capsys, tmp_path):
    code, _, _ = run(capsys, "fiber", "--N", "5", "--b", "0.5b0", "--out", str(tmp_path))
    assert code == 0
    for name in ("fiber.json", "fiber_landscape.csv"):
        text = (tmp_path / name).read_text()
        assert '"command": "fiber"' in text


def test_failed_flow_flushes_partial_outputs(capsys, tmp_path):
    code, _, err = run(capsys, "flow", "--N", "4", "--b", "0.5S^-2", "--mu", "1",
                       "--c", "0.5c0", "--n-cells", "4000", "--max-iters", "3",
                       "--out", str(tmp_path))
    assert code == cli.EXIT_CONVERGENCE
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "FAILED" and man["exit_code"] == code
    assert "Stalled" in man["error"]
    partial = json.loads((tmp_path / "flow.json").read_text())
    assert partial["status"] == "max-iters"


def test_flow_then_fiber_from_file(capsys, tmp_path):
    common = ["--N", "4", "--b", "0.5S^-2", "--mu", "1", "--c", "0.5c0"]
    code, out, _ = run(capsys, "flow", *common, "--n-cells", "16000", "--out", str(tmp_path))
    assert code == 0
    d = _json(out)
    assert d["status"] == "converged" and d["energy"] < 0
    code, out, _ = run(capsys, "fiber", *common, "--source", "file",
                       "--field", str(tmp_path / "field.csv"))
    assert code == 0
    roots = _json(out)["roots"]
    # the minimizer sits on the Pohozaev set: a plus root at s ~ 0
    assert roots[0]["cls"] == "plus" and abs(roots[0]["s"]) < 1e-3


@pytest.mark.parametrize("exc,code", [
    (InvalidParams("x"), 2), (ValueError("x"), 2), (RegimeError("x"), 3),
    (NoRootFound("x"), 4), (ZeroField("x"), 4), (Stalled("x"), 5), (MassMismatch("x"), 6),
    (MissingConstant("x"), 7), (OSError("x"), 8), (RuntimeError("x"), 70),
])
def test_exit_code_map(exc, code):
    assert cli.exit_code_for(exc) == code


def test_console_script():
    r = subprocess.run(["kirchnorm", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("kirchnorm ")
    r = subprocess.run([sys.executable, "-m", "kirchnorm.cli", "constants", "--N", "4"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "b0" in r.stdout

import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from gradcert import cli
from gradcert.cli import UsageError, dispatch, main, parse_config

GOLDEN = Path(__file__).parent / "golden"
REFERENCE_RUNS = ["flow_quadratic", "descent_quadratic"]


def gradcert(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "gradcert", *args], capture_output=True,
                          text=True, cwd=cwd)


# -- configuration ---------------------------------------------------------

def test_descent_config_example():
    cfg = parse_config(["descent", "--problem", "quadratic:A=1,0;0,4", "--x0", "1,1",
                        "--schedule", "pow:a=1,beta=0.6", "--steps", "1000"])
    assert (cfg.command, cfg.steps, cfg.seed, cfg.horizon) == ("descent", 1000, 0, 10.0)


def test_missing_problem_is_named():
    with pytest.raises(UsageError, match="--problem"):
        parse_config(["descent"])


def test_schedule_only_config():
    cfg = parse_config(["schedule", "--schedule", "pow:a=1,beta=0.6", "--alpha", "0.5"])
    assert cfg.alpha == 0.5 and cfg.problem is None


def test_unknown_command_and_malformed_number():
    with pytest.raises(UsageError):
        parse_config(["wander"])
    with pytest.raises(UsageError):
        parse_config(["flow", "--problem", "rosenbrock", "--horizon", "1.2.3"])


def test_config_file_and_flag_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nproblem = rosenbrock\nhorizon = 3\nseed = 5\n")
    cfg = parse_config(["flow", "--config", str(path), "--horizon", "7"])
    assert (cfg.problem, cfg.horizon, cfg.seed) == ("rosenbrock", 7.0, 5)


def test_unknown_config_key_listed(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("problem = rosenbrock\nspeed = 3\n")
    with pytest.raises(UsageError, match="speed"):
        parse_config(["flow", "--config", str(path)])


def test_list_schedule_relative_to_config(tmp_path):
    (tmp_path / "steps.txt").write_text("0.1\n0.05\n0.02\n")
    (tmp_path / "run.cfg").write_text("schedule = list:@steps.txt\n")
    cfg = parse_config(["schedule", "--config", str(tmp_path / "run.cfg")])
    out = io.StringIO()
    assert dispatch(cfg, out) == 0
    assert json.loads(out.getvalue())["schedule"] == "list:0.1,0.05,0.02"


# -- exit-code contract ----------------------------------------------------

def test_exit_0_flow_writes_outputs(tmp_path):
    res = gradcert("flow", "--problem", "quadratic:A=1,0;0,1", "--x0", "1,0", "--horizon", "20",
                   "--out-trace", str(tmp_path / "t.csv"), "--out-cert", str(tmp_path / "c.json"))
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "t.csv").read_text().startswith("t,x_0,x_1,F,")
    cert = json.loads((tmp_path / "c.json").read_text())
    assert {c["verdict"] for c in cert["conclusions"]} == {"verified"}


def test_exit_1_violated_hypothesis_still_writes(tmp_path):
    res = gradcert("descent", "--problem", "quadratic:A=1,0;0,1", "--x0", "1,0",
                   "--schedule", "const:0.1", "--steps", "200", "--out-cert", str(tmp_path / "c.json"))
    assert res.returncode == 1, res.stderr
    cert = json.loads((tmp_path / "c.json").read_text())
    assert [h["verdict"] for h in cert["hypotheses"] if h["id"] == "limsup_gamma"] == ["violated"]

    res = gradcert("descent", "--problem", "quadratic:A=1,0;0,1", "--x0", "1,0",
                   "--schedule", "const:2.5", "--steps", "2000", "--out-cert", str(tmp_path / "d.json"))
    assert res.returncode == 1, res.stderr
    assert json.loads((tmp_path / "d.json").read_text())["run"]["stopped_reason"] == "overflow"


def test_exit_2_usage_errors():
    assert gradcert("wander").returncode == 2
    res = gradcert("descent")
    assert res.returncode == 2 and "--problem" in res.stderr
    assert gradcert("flow", "--problem", "quadratic:A=1,x;0,1").returncode == 2


def test_exit_3_numeric_and_filesystem_failures(tmp_path):
    res = gradcert("flow", "--problem", "quadratic:A=1e12,0;0,1", "--x0", "1,1", "--horizon", "100")
    assert res.returncode == 3 and "numeric failure" in res.stderr
    res = gradcert("flow", "--problem", "rosenbrock", "--horizon", "1",
                   "--out-cert", str(tmp_path / "missing" / "c.json"))
    assert res.returncode == 3 and res.stderr


# -- determinism -----------------------------------------------------------

@pytest.mark.parametrize("name", REFERENCE_RUNS)
def test_golden_outputs_are_byte_identical(name, tmp_path):
    command = name.split("_")[0]
    code = main([command, "--config", str(GOLDEN / f"{name}.cfg"),
                 "--out-trace", str(tmp_path / "trace.csv"), "--out-cert", str(tmp_path / "cert.json")])
    assert code == 0
    assert (tmp_path / "trace.csv").read_bytes() == (GOLDEN / f"{name}.csv").read_bytes()
    assert (tmp_path / "cert.json").read_bytes() == (GOLDEN / f"{name}.json").read_bytes()


def test_seed_drives_holder_sample(tmp_path):
    base = ["holder", "--problem", "rosenbrock", "--region", "box:-1,1", "--alpha", "1", "--pairs", "500"]
    runs = [gradcert(*base, "--seed", s).stdout for s in ("1", "1", "2")]
    assert runs[0] == runs[1] != runs[2]
    assert cli._sub_seed(1, cli.HOLDER_STREAM) != cli._sub_seed(1, 2)


def test_batch_runs_entries(tmp_path):
    batch = tmp_path / "batch.txt"
    batch.write_text(
        f"flow --problem rosenbrock --horizon 2 --out-cert {tmp_path / 'a.json'}\n"
        f"descent --problem quadratic --schedule const:0.1 --steps 50 --out-cert {tmp_path / 'b.json'}\n")
    assert main(["--batch", str(batch)]) == 1
    assert (tmp_path / "a.json").exists() and (tmp_path / "b.json").exists()
    batch.write_text(f"flow --problem rosenbrock --out-cert {tmp_path / 'a.json'}\n" * 2)
    assert main(["--batch", str(batch)]) == 2


def test_problems_listing_and_text_report():
    res = gradcert("problems")
    assert res.returncode == 0 and "rosenbrock\t2\t" in res.stdout
    res = gradcert("certify-flow", "--problem", "rosenbrock", "--horizon", "2", "--format", "text")
    assert res.returncode == 0 and "GF-2.1" in res.stdout

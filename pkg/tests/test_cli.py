import json
import math

import pytest
from click.testing import CliRunner

from wristim.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def csv_net_charge(path):
    lines = path.read_text().splitlines()[1:]
    times = [float(ln.split(",")[0]) for ln in lines]
    dt = times[1] - times[0]
    return math.fsum(float(ln.split(",")[1]) for ln in lines) * dt


def test_waveform_balanced(tmp_path, runner):
    result = runner.invoke(main, ["waveform", "--amp", "1.6",
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "waveform.svg").exists()
    assert abs(csv_net_charge(tmp_path / "waveform.csv")) < 1e-9


def test_waveform_monophasic(tmp_path, runner):
    result = runner.invoke(main, ["waveform", "--monophasic", "--amp", "1",
                                  "--width", "5", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert csv_net_charge(tmp_path / "waveform.csv") == pytest.approx(-5.0)


def test_waveform_rejects_overrange(tmp_path, runner):
    result = runner.invoke(main, ["waveform", "--amp", "9",
                                  "--out", str(tmp_path)])
    assert result.exit_code != 0
    assert not (tmp_path / "waveform.csv").exists()


def test_run_study1_counts(tmp_path, runner):
    result = runner.invoke(main, ["run", "study1", "--seed", "5",
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "study1.jsonl").read_text().splitlines()
    trials = [json.loads(ln) for ln in lines if '"kind":"trial"' in ln]
    assert len(trials) == 22
    footer = json.loads(lines[-1])
    assert footer["complete"] is True


def test_run_study2_counts(tmp_path, runner):
    result = runner.invoke(main, ["run", "study2", "--seed", "5",
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "study2.jsonl").read_text().splitlines()
    trials = [json.loads(ln) for ln in lines if '"kind":"trial"' in ln]
    assert len(trials) == 24


def test_run_byte_identical_under_seed(tmp_path, runner):
    for sub in ("a", "b"):
        result = runner.invoke(main, ["run", "study1", "--seed", "9",
                                      "--participants", "2",
                                      "--out", str(tmp_path / sub)])
        assert result.exit_code == 0, result.output
    assert ((tmp_path / "a" / "study1.jsonl").read_bytes()
            == (tmp_path / "b" / "study1.jsonl").read_bytes())
    result = runner.invoke(main, ["run", "study1", "--seed", "10",
                                  "--out", str(tmp_path / "c")])
    assert result.exit_code == 0
    assert ((tmp_path / "a" / "study1.jsonl").read_bytes()
            != (tmp_path / "c" / "study1.jsonl").read_bytes())


@pytest.fixture(scope="module")
def run_logs(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("logs")
    runner = CliRunner()
    for kind in ("study1", "study2"):
        result = runner.invoke(main, ["run", kind, "--seed", "31",
                                      "--participants", "3",
                                      "--out", str(outdir)])
        assert result.exit_code == 0, result.output
    return outdir


def test_analyze_study2_rate_rows(tmp_path, runner, run_logs):
    result = runner.invoke(main, ["analyze", str(run_logs / "study2.jsonl"),
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "rates.csv").read_text().splitlines()
    assert lines[0] == "finger,condition,mean_pct,sd_pct,n"
    # one row per visual condition per finger
    per_finger = {}
    for ln in lines[1:]:
        finger, condition = ln.split(",")[:2]
        per_finger.setdefault(finger, []).append(condition)
    assert len(per_finger["thumb"]) == 6
    assert len(per_finger["index"]) == 6
    assert (tmp_path / "anova_thumb.json").exists()
    assert (tmp_path / "anova_index.json").exists()


def test_analyze_both_logs_emits_ttests_and_heatmaps(tmp_path, runner, run_logs):
    result = runner.invoke(main, ["analyze", str(run_logs / "study1.jsonl"),
                                  str(run_logs / "study2.jsonl"),
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    ttests = (tmp_path / "ttests.csv").read_text().splitlines()
    assert len(ttests) == 1 + 12
    for finger in ("thumb", "index"):
        for label in ("none", "finger_full"):
            assert (tmp_path / f"heatmap_{finger}_{label}.csv").exists()
            assert (tmp_path / f"heatmap_{finger}_{label}.svg").exists()


def test_analyze_anova_payload_sane(tmp_path, runner, run_logs):
    result = runner.invoke(main, ["analyze", str(run_logs / "study2.jsonl"),
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "anova_thumb.json").read_text())
    assert set(payload["effects"]) == {"A", "B", "AxB"}
    for eff in payload["effects"].values():
        assert 0.0 <= eff["p"] <= 1.0
    assert payload["factor_a"] == ["fingertip", "finger", "fingertip_to_wrist"]
    assert len(payload["posthoc_bonferroni"]["A"]) == 3


def test_analyze_empty_log_fails(tmp_path, runner):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    result = runner.invoke(main, ["analyze", str(empty),
                                  "--out", str(tmp_path)])
    assert result.exit_code != 0
    assert "empty" in result.output


def test_analyze_reports_offending_line(tmp_path, runner, run_logs):
    mangled = tmp_path / "mangled.jsonl"
    lines = (run_logs / "study1.jsonl").read_text().splitlines()
    lines[3] = '{"kind":"trial","bogus":true}'
    mangled.write_text("\n".join(lines) + "\n")
    result = runner.invoke(main, ["analyze", str(mangled),
                                  "--out", str(tmp_path)])
    assert result.exit_code != 0
    assert "line 4" in result.output


def test_seed_env_var_override(tmp_path, runner):
    result = runner.invoke(main, ["run", "study1", "--out", str(tmp_path)],
                           env={"WRISTIM_SEED": "5"})
    assert result.exit_code == 0, result.output
    other = CliRunner().invoke(main, ["run", "study1", "--seed", "5",
                                      "--out", str(tmp_path / "flag")])
    assert other.exit_code == 0
    assert ((tmp_path / "study1.jsonl").read_bytes()
            == (tmp_path / "flag" / "study1.jsonl").read_bytes())


def test_run_aborted_session_writes_partial_log(tmp_path, runner, monkeypatch):
    from wristim import cli as cli_mod
    from wristim import sessions as ss_mod

    real_cohort = ss_mod.run_cohort

    def exploding_cohort(kind, seed, participants, policy, base):
        records = real_cohort(kind, seed, 1, policy, base)
        raise ss_mod.SessionAborted("device NAK: lockout", records[:5])

    monkeypatch.setattr(cli_mod.ss, "run_cohort", exploding_cohort)
    result = runner.invoke(main, ["run", "study1", "--seed", "3",
                                  "--out", str(tmp_path)])
    assert result.exit_code != 0
    assert "aborted" in result.output
    lines = (tmp_path / "study1.jsonl").read_text().splitlines()
    footer = json.loads(lines[-1])
    assert footer["complete"] is False
    assert footer["trials"] == 5


def test_replay_pose_stream(tmp_path, runner):
    from wristim import contact as ct

    poses = []
    t = 0.0
    for x in (60, 40, 10, 0, 10, 60, 60, 0, 60):
        poses.append(ct.HandPose(t, (120, 50, 0), (x, 0, 0), 80.0))
        t += 11.0
    pose_path = tmp_path / "poses.jsonl"
    ct.save_pose_stream(poses, pose_path)
    result = runner.invoke(main, ["replay", str(pose_path), "--seed", "4",
                                  "--visual-size", "finger",
                                  "--opacity", "half",
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    audit_lines = (tmp_path / "interaction_audit.jsonl").read_text().splitlines()
    entries = [json.loads(ln) for ln in audit_lines]
    assert len(entries) == 4  # two press/release cycles on the demo button
    for e in entries:
        assert e["stim_ms"] == e["visual_ms"]
        assert 0 <= e["stim_ms"] - e["trigger_ms"] <= 10

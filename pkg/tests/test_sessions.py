from collections import Counter

import pytest

from wristim import contact as ct
from wristim import effects as fx
from wristim import framing as fr
from wristim import sessions as ss
from wristim.perceiver import Perceiver, PerceiverConfig
from wristim.records import read_log, write_log
from wristim.simband import SimulatedWristband


def device_with_thresholds(**thresholds):
    cfg = PerceiverConfig()
    for ch, ma in thresholds.items():
        cfg.thresholds_ma[ch] = ma
    return SimulatedWristband(perceiver=Perceiver(cfg))


def test_calibration_step_arithmetic_thumb():
    # threshold 0.65 mA: steps 0.1..0.7, first step at/above threshold is 0.7
    dev = device_with_thresholds(ch5=0.65)
    result = ss.run_calibration(dev, "thumb")
    assert result.channel == 5
    assert result.intensity_ua == 700
    assert result.intensity_ma == 0.7
    assert result.steps == 7


def test_calibration_step_arithmetic_index():
    dev = device_with_thresholds(ch8=0.76)
    result = ss.run_calibration(dev, "index")
    assert result.intensity_ua == 800
    assert result.steps == 8


def test_calibration_study3_adds_a_step():
    dev = device_with_thresholds(ch5=0.65)
    result = ss.run_calibration(dev, "thumb", mode=ss.MODE_STUDY3)
    assert result.intensity_ua == 800
    dev = device_with_thresholds(ch8=0.76)
    result = ss.run_calibration(dev, "index", mode=ss.MODE_STUDY3)
    assert result.intensity_ua == 900


def test_calibration_fails_above_current_limit():
    dev = device_with_thresholds(ch5=4.5)
    with pytest.raises(ss.CalibrationError):
        ss.run_calibration(dev, "thumb")


def test_calibration_takes_at_most_forty_steps():
    dev = device_with_thresholds(ch5=4.0)
    result = ss.run_calibration(dev, "thumb")
    assert result.steps == 40
    assert result.intensity_ua == 4000


def test_calibration_channel_switch_restarts_stepping():
    dev = device_with_thresholds(ch5=3.0, ch6=0.3)

    def respond(channel, intensity_ua, report):
        if channel == 5 and intensity_ua >= 300:
            return ("switch", 6)
        return "felt" if report is not None else "not_felt"

    result = ss.run_calibration(dev, "thumb", respond=respond)
    assert result.channel == 6
    assert result.intensity_ua == 300
    assert result.steps == 6  # three probes on ch5, three on ch6


def test_calibration_abort():
    dev = device_with_thresholds(ch5=2.0)
    with pytest.raises(ss.CalibrationError):
        ss.run_calibration(dev, "thumb", respond=lambda *_: "abort")


def test_study1_covers_channels_twice():
    dev = SimulatedWristband()
    records = ss.run_study_protocol(dev, "study1", seed=11)
    assert len(records) == 22
    counts = Counter(r.channel for r in records)
    assert counts == {ch: 2 for ch in range(5, 16)}
    assert all(r.study == "study1" for r in records)
    assert dev.interlock.state.kind in ("disarmed", "armed")


def test_study2_covers_condition_grid_twice():
    dev = SimulatedWristband()
    records = ss.run_study_protocol(dev, "study2", seed=11)
    assert len(records) == 24
    counts = Counter((r.visual_size, r.visual_opacity, r.target_finger)
                     for r in records)
    expected = {(s, o, f): 2 for s in fx.SIZES for o in fx.OPACITIES
                for f in fx.FINGERS}
    assert counts == expected


def test_study2_uses_calibrated_channels():
    dev = SimulatedWristband()
    records = ss.run_study_protocol(dev, "study2", seed=3)
    channels = {r.target_finger: r.channel for r in records}
    assert channels == {"thumb": 5, "index": 8}
    intensities = {r.target_finger: r.intensity_ua for r in records}
    assert intensities == {"thumb": 700, "index": 800}


def test_same_seed_identical_trials():
    a = ss.run_study_protocol(SimulatedWristband(), "study1", seed=5)
    b = ss.run_study_protocol(SimulatedWristband(), "study1", seed=5)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    c = ss.run_study_protocol(SimulatedWristband(), "study1", seed=6)
    assert [r.channel for r in a] != [r.channel for r in c]


def test_trial_order_is_shuffled():
    records = ss.run_study_protocol(SimulatedWristband(), "study1", seed=1)
    assert [r.channel for r in records] != sorted(r.channel for r in records)


def test_timestamps_monotone_from_sim_clock():
    records = ss.run_study_protocol(SimulatedWristband(), "study2", seed=2)
    for r in records:
        assert r.t_start_ms <= r.t_stim_ms < r.t_report_ms
    starts = [r.t_start_ms for r in records]
    assert starts == sorted(starts)


def test_vibro_policy_uses_wrist_locus():
    dev = SimulatedWristband()
    records = ss.run_study_protocol(dev, "study2", seed=4,
                                    policy=ss.POLICY_VIBRO)
    assert all(r.channel == "wrist" for r in records)
    assert len(dev.actuator_events) == 24 * ss.TRAIN_COUNT


def test_log_round_trip(tmp_path):
    records = ss.run_study_protocol(SimulatedWristband(), "study1", seed=9)
    path = tmp_path / "s1.jsonl"
    write_log(path, records, {"seed": 9, "kind": "study1"})
    header, again, footer = read_log(path)
    assert header["config"]["seed"] == 9
    assert footer["complete"] is True
    assert [r.to_dict() for r in again] == [r.to_dict() for r in records]


def interaction_poses():
    # index finger dips into a button twice at a 90 Hz-ish pose cadence
    poses = []
    t = 0.0
    xs = [50, 40, 30, 8, 5, 8, 30, 50, 50, 8, 5, 40, 60]
    for x in xs:
        poses.append(ct.HandPose(t, (0, -30, 0), (x, 0, 0), 80.0))
        t += 11.0
    return poses


def calibrated():
    return {
        "thumb": ss.CalibrationResult("thumb", 5, 700, 7),
        "index": ss.CalibrationResult("index", 8, 800, 8),
    }


def test_interaction_pairs_and_synchrony():
    dev = SimulatedWristband()
    session = ss.InteractionSession(
        dev, [ct.UIElement("btn", ct.KIND_BUTTON, (0, 0, 0), (10, 10, 10))],
        calibrations=calibrated())
    for pose in interaction_poses():
        session.feed(pose)
    audit = session.finish()
    assert len(audit) == 4  # two contact/release cycles
    for entry in audit:
        assert entry["stim_ms"] == entry["visual_ms"]
        lag = entry["stim_ms"] - entry["trigger_ms"]
        assert 0 <= lag <= 10
    assert dev.interlock.state.kind == "disarmed"


def test_interaction_requires_calibration():
    dev = SimulatedWristband()
    session = ss.InteractionSession(
        dev, [ct.UIElement("btn", ct.KIND_BUTTON, (0, 0, 0), (10, 10, 10))])
    with pytest.raises(ss.CalibrationRequiredError):
        for pose in interaction_poses():
            session.feed(pose)


def test_interaction_vibro_policy():
    dev = SimulatedWristband()
    session = ss.InteractionSession(
        dev, [ct.UIElement("btn", ct.KIND_BUTTON, (0, 0, 0), (10, 10, 10))],
        policy=ss.POLICY_VIBRO)
    for pose in interaction_poses():
        session.feed(pose)
    audit = session.finish()
    assert len(dev.actuator_events) == len(audit) == 4


def test_pinch_event_targets_thumb():
    event = ct.ContactEvent(ct.EVENT_CONTACT, "cube", "pinch", 100.0)
    stim, visual = ss.on_event(event, ss.POLICY_ELECTRO, calibrated())
    assert stim.channel == 5
    assert visual.effect.target_finger == "thumb"
    assert stim.t_ms == visual.t_ms == 100.0


def test_detent_crossing_fires_one_stimulus():
    event = ct.ContactEvent(ct.EVENT_DETENT, "slider", "index", 103.0)
    stim, visual = ss.on_event(event, ss.POLICY_ELECTRO, calibrated())
    assert stim.channel == 8
    assert stim.t_ms == visual.t_ms == 105.0  # next 5 ms tick


def test_faulting_load_flags_study1_trials():
    from wristim.simband import SkinLoadModel

    # an open-circuit load faults every per-trial calibration; the session
    # continues with the trials flagged rather than aborting
    dev = SimulatedWristband(load=SkinLoadModel(default_resistance_kohm=600.0))
    records = ss.StudyRunner(dev, "study1", seed=13).run()
    assert len(records) == 22
    assert all(r.note == "calibration_failed" for r in records)
    assert all(r.report is None for r in records)


def test_faulting_load_aborts_study2_before_trials():
    from wristim.simband import SkinLoadModel

    dev = SimulatedWristband(load=SkinLoadModel(default_resistance_kohm=600.0))
    with pytest.raises(ss.SessionAborted) as excinfo:
        ss.StudyRunner(dev, "study2", seed=13).run()
    assert excinfo.value.records == []


def test_lockout_aborts_session_with_partial_records():
    dev = SimulatedWristband()
    dev.inject_measurement(72.0, 5.0)  # absorbing lockout before the run
    runner = ss.StudyRunner(dev, "study1", seed=13)
    with pytest.raises(ss.SessionAborted):
        runner.run()

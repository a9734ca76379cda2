"""Operator-console backend: session state over a line-delimited JSON
protocol.

One operator at a time drives calibration stepping, trial flow and sensation
reporting against the simulated device.  Requests are JSON objects with a
``type`` and optional ``msg_id``; every reply echoes ``ok``/``data`` plus a
fresh device status.  Mutating requests are idempotency-keyed: a repeated
``msg_id`` returns the stored reply without re-executing, so a double-clicked
"+0.1 mA" cannot double-step.  A second TCP connection is refused with
``busy``.
"""

from __future__ import annotations

import json
import socket
import threading
from pathlib import Path

from . import framing as fr
from . import handmap as hm
from . import records as rec
from . import sessions as ss
from .perceiver import (
    Perceiver,
    PerceiverConfig,
    SensationReport,
    participant_variant,
)
from .records import derive_seed
from .simband import SimulatedWristband

MODE_IDLE = "idle"
MODE_CALIBRATING = "calibrating"
MODE_STUDY = "study"
MODE_AWAITING_REPORT = "awaiting_report"


class ConsoleError(Exception):
    pass


class ConsoleBackend:
    def __init__(self, seed: int = 0, base_config: PerceiverConfig | None = None,
                 out_dir: Path | None = None, debug_hooks: bool = False):
        base = base_config or PerceiverConfig()
        participant_cfg = participant_variant(
            base, derive_seed(seed, "console-participant"))
        self.device = SimulatedWristband(perceiver=Perceiver(participant_cfg),
                                         seed=seed)
        self.link = ss.DeviceLink(self.device)
        self.seed = seed
        self.out_dir = Path(out_dir) if out_dir else Path(".")
        self.debug_hooks = debug_hooks

        self.mode = MODE_IDLE
        self.cal: dict | None = None
        self.calibrations: dict[str, ss.CalibrationResult] = {}
        self.runner: ss.StudyRunner | None = None
        self.ctx: ss.TrialContext | None = None
        self.draft: dict | None = None
        self.log_path: str | None = None
        self.completed_records: list = []
        self._replies: dict[str, dict] = {}

    # wire helpers

    def status_dict(self) -> dict:
        snap = self.device.interlock.status()
        return {
            "state": snap.state.kind,
            "fault_reason": snap.state.fault_reason,
            "resistance_kohm": snap.last_resistance_kohm,
            "intensity_ua": self.device.intensity_ua,
            "clock_ms": self.device.clock_ms,
            "mode": self.mode,
        }

    def snapshot(self) -> dict:
        handmap = self.device.perceiver.handmap
        study = None
        if self.runner is not None:
            study = {
                "kind": self.runner.kind,
                "participant": self.runner.participant,
                "trials_total": len(self.runner.plans),
                "trials_done": len(self.runner.records),
                "awaiting_report": self.mode == MODE_AWAITING_REPORT,
                "current": self._ctx_descriptor(),
                "log_path": self.log_path,
            }
        return {
            "status": self.status_dict(),
            "mode": self.mode,
            "calibration": self.cal,
            "calibrations": {
                finger: {"channel": c.channel, "intensity_ua": c.intensity_ua}
                for finger, c in self.calibrations.items()
            },
            "study": study,
            "draft": self.draft,
            "handmap": {
                "version": handmap.version,
                "scale_mm": handmap.scale_mm,
                "rows": ["".join(str(int(v)) for v in row)
                         for row in handmap.raster],
            },
        }

    def _ctx_descriptor(self) -> dict | None:
        if self.ctx is None:
            return None
        return {
            "trial_index": self.ctx.plan.trial_index,
            "channel": self.ctx.channel,
            "target_finger": self.ctx.plan.target_finger,
            "visual_size": self.ctx.plan.visual_size,
            "visual_opacity": self.ctx.plan.visual_opacity,
            "note": self.ctx.note,
        }

    # request dispatch

    def handle(self, msg: dict) -> dict:
        msg_id = msg.get("msg_id")
        if msg_id is not None and msg_id in self._replies:
            return self._replies[msg_id]
        try:
            handler = getattr(self, f"_on_{msg.get('type')}", None)
            if handler is None:
                raise ConsoleError(f"unknown message type {msg.get('type')!r}")
            data = handler(msg) or {}
            reply = {"ok": True, "type": msg.get("type"), "data": data,
                     "status": self.status_dict()}
        except (ConsoleError, ss.CalibrationError, ValueError) as e:
            reply = {"ok": False, "type": msg.get("type"), "error": str(e),
                     "status": self.status_dict()}
        if msg_id is not None:
            self._replies[msg_id] = reply
        return reply

    def shutdown(self):
        """Stop any stimulation and leave the relays open."""
        self.link.send(fr.Stop())
        self.mode = MODE_IDLE
        self.cal = None

    # verbs

    def _on_hello(self, msg):
        return self.snapshot()

    def _on_snapshot(self, msg):
        return self.snapshot()

    def _on_status(self, msg):
        return {}

    def _on_cal_start(self, msg):
        if self.mode == MODE_AWAITING_REPORT:
            raise ConsoleError("finish the current trial report first")
        finger = msg.get("finger")
        if finger not in ss.DEFAULT_CHANNEL:
            raise ConsoleError(f"unknown finger {finger!r}")
        mode = msg.get("mode", ss.MODE_STUDY1)
        if mode not in (ss.MODE_STUDY1, ss.MODE_STUDY3):
            raise ConsoleError(f"unknown calibration mode {mode!r}")
        self.cal = {"finger": finger, "mode": mode,
                    "channel": msg.get("channel", ss.DEFAULT_CHANNEL[finger]),
                    "intensity_ua": 0, "steps": 0, "felt": False}
        self.mode = MODE_CALIBRATING
        return dict(self.cal)

    def _require_cal(self) -> dict:
        if self.mode != MODE_CALIBRATING or self.cal is None:
            raise ConsoleError("no calibration in progress")
        return self.cal

    def _on_cal_step(self, msg):
        cal = self._require_cal()
        state = self.device.interlock.state.kind
        if state in ("fault", "lockout"):
            raise ConsoleError(f"stepping disabled in {state}")
        if cal["intensity_ua"] + ss.CAL_STEP_UA > ss.CAL_MAX_UA:
            raise ConsoleError("current limit reached: calibration failed")
        cal["intensity_ua"] += ss.CAL_STEP_UA
        cal["steps"] += 1
        try:
            self.link.send_checked(fr.SetChannel(cal["channel"]))
            self.link.send_checked(fr.SetIntensity(cal["intensity_ua"]))
            self.link.send_checked(fr.StimOnce())
        except ss.DeviceNak as e:
            raise ConsoleError(str(e))
        while self.device.playback_active:
            self.device.step(45)
        report = self.device.perceive(seed=derive_seed(
            self.seed, "console-cal", cal["channel"], cal["intensity_ua"]))
        cal["felt"] = report is not None
        return dict(cal)

    def _on_cal_switch(self, msg):
        cal = self._require_cal()
        channel = int(msg.get("channel", 0))
        if not 1 <= channel <= 15:
            raise ConsoleError(f"channel {channel} outside 1..15")
        cal["channel"] = channel
        cal["intensity_ua"] = 0
        cal["felt"] = False
        return dict(cal)

    def _on_cal_confirm(self, msg):
        cal = self._require_cal()
        if cal["intensity_ua"] <= 0:
            raise ConsoleError("no intensity stepped yet")
        bonus = ss.CAL_STEP_UA if cal["mode"] == ss.MODE_STUDY3 else 0
        final = cal["intensity_ua"] + bonus
        if final > ss.CAL_MAX_UA:
            raise ConsoleError("threshold too close to the current limit")
        result = ss.CalibrationResult(cal["finger"], cal["channel"], final,
                                      cal["steps"])
        self.calibrations[cal["finger"]] = result
        self.mode = MODE_IDLE
        self.cal = None
        return {"finger": result.finger, "channel": result.channel,
                "intensity_ua": result.intensity_ua, "steps": result.steps}

    def _on_cal_abort(self, msg):
        self._require_cal()
        self.link.send(fr.Stop())
        self.mode = MODE_IDLE
        self.cal = None
        return {}

    def _on_start_study(self, msg):
        if self.mode not in (MODE_IDLE,):
            raise ConsoleError(f"cannot start a study while {self.mode}")
        kind = msg.get("kind")
        if kind not in ("study1", "study2"):
            raise ConsoleError(f"unknown study kind {kind!r}")
        participant = msg.get("participant", "p01")
        runner_seed = derive_seed(self.seed, "console-study", kind, participant)
        self.runner = ss.StudyRunner(self.device, kind, participant,
                                     seed=runner_seed,
                                     calibrations=dict(self.calibrations))
        self.runner.ensure_calibrations()
        self.calibrations.update(self.runner.calibrations)
        self.log_path = str(self.out_dir / f"{kind}_{participant}.jsonl")
        self.mode = MODE_STUDY
        return {"kind": kind, "participant": participant,
                "trials_total": len(self.runner.plans)}

    def _on_next_trial(self, msg):
        if self.mode != MODE_STUDY or self.runner is None:
            raise ConsoleError("no study in progress")
        done = len(self.runner.records)
        if done >= len(self.runner.plans):
            raise ConsoleError("all trials already run")
        plan = self.runner.plans[done]
        try:
            self.ctx = self.runner.begin_trial(plan)
        except ss.DeviceNak as e:
            raise ConsoleError(f"stimulation failed: {e}")
        if msg.get("auto"):
            report = self.runner.auto_report(self.ctx)
            return self._finish_trial(report)
        self.mode = MODE_AWAITING_REPORT
        self.draft = None
        return {"awaiting_report": True, "current": self._ctx_descriptor()}

    def _on_update_draft(self, msg):
        if self.mode != MODE_AWAITING_REPORT:
            raise ConsoleError("no trial awaiting a report")
        self.draft = {
            "mask_rows": msg.get("mask_rows"),
            "strongest_point": msg.get("strongest_point"),
            "quality": msg.get("quality"),
        }
        return {}

    def _on_submit_report(self, msg):
        if self.mode != MODE_AWAITING_REPORT or self.ctx is None:
            raise ConsoleError("no trial awaiting a report")
        try:
            report = SensationReport.from_dict({
                "mask_rows": msg["mask_rows"],
                "strongest_point": msg["strongest_point"],
                "quality": msg["quality"],
            })
        except KeyError as e:
            raise ConsoleError(f"missing report field {e}")
        return self._finish_trial(report)

    def _finish_trial(self, report) -> dict:
        record = self.runner.finish_trial(self.ctx, report)
        self.runner.records.append(record)
        self.ctx = None
        self.draft = None  # erase the indication, move to the next trial
        self.mode = MODE_STUDY
        done = len(self.runner.records)
        total = len(self.runner.plans)
        data = {"trials_done": done, "trials_total": total,
                "complete": done >= total}
        if done >= total:
            self.link.send(fr.Stop())
            rec.write_log(self.log_path, self.runner.records, {
                "kind": self.runner.kind,
                "participant": self.runner.participant,
                "seed": self.runner.seed,
                "source": "console",
            })
            data["log_path"] = self.log_path
            self.completed_records = list(self.runner.records)
            self.mode = MODE_IDLE
            self.runner = None
        return data

    def _on_get_record(self, msg):
        records = (self.runner.records if self.runner is not None
                   else self.completed_records)
        if not records:
            raise ConsoleError("no trial records yet")
        index = int(msg.get("index", -1))
        try:
            record = records[index]
        except IndexError:
            raise ConsoleError(f"no record at index {index}")
        return {"record": record.to_dict(), "count": len(records)}

    def _on_reset_lockout(self, msg):
        self.link.send(fr.ResetLockout())
        return {}

    def _on_stop(self, msg):
        self.shutdown()
        return {}

    def _on_inject(self, msg):
        if not self.debug_hooks:
            raise ConsoleError("debug hooks disabled")
        state = self.device.inject_measurement(float(msg.get("voltage", 0.0)),
                                               float(msg.get("current", 0.0)))
        return {"state": state.kind}


class LineServer:
    """Single-operator TCP server speaking newline-delimited JSON."""

    def __init__(self, host: str, port: int, backend: ConsoleBackend):
        self.backend = backend
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(0.2)
        self.port = self._listener.getsockname()[1]
        self._stop = threading.Event()
        self._lock = threading.Lock()
        self._client_active = threading.Event()

    def serve_forever(self):
        try:
            while not self._stop.is_set():
                try:
                    conn, _ = self._listener.accept()
                except socket.timeout:
                    continue
                except OSError:
                    break
                if self._client_active.is_set():
                    self._refuse(conn)
                    continue
                self._client_active.set()
                threading.Thread(target=self._serve_client, args=(conn,),
                                 daemon=True).start()
        finally:
            self._listener.close()
            with self._lock:
                self.backend.shutdown()

    def stop(self):
        self._stop.set()

    def _refuse(self, conn):
        try:
            conn.sendall(json.dumps(
                {"ok": False, "error": "busy", "type": "hello"}
            ).encode() + b"\n")
        finally:
            conn.close()

    def _serve_client(self, conn):
        last_state = None
        try:
            f = conn.makefile("rwb")
            for raw in f:
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    reply = {"ok": False, "error": "not valid JSON"}
                else:
                    with self._lock:
                        reply = self.backend.handle(msg)
                state = reply.get("status", {}).get("state")
                lines = [json.dumps(reply)]
                if last_state is not None and state != last_state:
                    lines.insert(0, json.dumps(
                        {"push": "status", "status": reply.get("status")}))
                last_state = state
                f.write(("\n".join(lines) + "\n").encode())
                f.flush()
                if self._stop.is_set():
                    break
        except (ConnectionError, OSError, BrokenPipeError):
            pass
        finally:
            try:
                conn.close()
            finally:
                self._client_active.clear()

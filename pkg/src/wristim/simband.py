"""Deterministic simulated wristband.

Consumes wire-protocol frames, sequences relay frames (priming with rails
swapped, then stimulation, break-before-make in between), plays waveforms
into a per-channel skin load model, integrates charge exactly, and feeds the
safety interlock with load measurements at a fixed cadence (denser while
driving than while idle).

The current source is modelled as ideal (load-independent), so the voltage
reading is simply current times skin resistance.  The device runs on its own
integer-millisecond simulated clock; everything is reproducible from the seed
and the command stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import framing as fr
from . import interlock as il
from . import relays as rl
from . import waveform as wf
from .perceiver import Perceiver, SensationReport, channel_key

DRIVE_MEASUREMENT_INTERVAL_MS = 5
IDLE_MEASUREMENT_INTERVAL_MS = 100

VIBRO_FREQ_HZ = 80.0
VIBRO_DURATION_MS = 25.0


@dataclass
class SkinLoadModel:
    """Electrode-skin load per channel plus the accumulated-charge ledger."""

    resistance_kohm: dict = field(default_factory=dict)
    noise_sd_kohm: float = 0.0
    default_resistance_kohm: float = 72.3

    def resistance(self, channel: int, rng: np.random.Generator) -> float:
        base = self.resistance_kohm.get(channel, self.default_resistance_kohm)
        if self.noise_sd_kohm > 0:
            base = max(0.1, base + rng.normal(0.0, self.noise_sd_kohm))
        return base


@dataclass
class _Playback:
    spec: wf.PulseSpec
    samples: wf.WaveformSamples
    channel: int
    pulse_starts: list[float]
    pulse_idx: int = 0
    phase: str = "pending"  # pending | priming | stim


class SimulatedWristband:
    def __init__(self, perceiver: Perceiver | None = None,
                 limits: il.SafetyLimits | None = None,
                 load: SkinLoadModel | None = None,
                 seed: int = 0, sample_rate_hz: int = 10_000):
        self.perceiver = perceiver or Perceiver()
        self.interlock = il.SafetyInterlock(limits)
        self.load = load or SkinLoadModel()
        self.sample_rate_hz = sample_rate_hz
        self.clock_ms = 0
        self.rng = np.random.default_rng(seed)

        self.channel: int | None = None
        self.intensity_ua = 0
        self.routing = rl.RoutingState.idle()
        self.playback: _Playback | None = None
        self.last_stimulus: tuple[int, float] | None = None  # (channel, mA)

        self._charge_parts: dict[int, list[float]] = {}
        self._next_meas_ms = IDLE_MEASUREMENT_INTERVAL_MS

        self.outbox = bytearray()
        self.relay_log: list[tuple[int, rl.RelayFrame]] = []
        self.measurements: list[il.LoadMeasurement] = []
        self.actuator_events: list[dict] = []
        self._decoder = fr.StreamDecoder()

    # wire side

    def receive(self, data: bytes) -> None:
        for cmd in self._decoder.feed(data):
            self.handle(cmd)

    def drain_outbox(self) -> bytes:
        out = bytes(self.outbox)
        self.outbox.clear()
        return out

    def _reply(self, cmd: fr.Command) -> None:
        self.outbox.extend(fr.encode(cmd))

    def _nak(self, opcode: int, reason: int) -> None:
        self._reply(fr.Nak(opcode, reason))

    def handle(self, cmd: fr.Command) -> None:
        state = self.interlock.state.kind
        if isinstance(cmd, fr.SetChannel):
            if self.playback is not None:
                return self._nak(fr.OP_SET_CHANNEL, fr.NAK_BUSY)
            if state == il.LOCKOUT:
                return self._nak(fr.OP_SET_CHANNEL, fr.NAK_LOCKOUT)
            self.channel = cmd.channel
            self._auto_arm()
            return self._reply(fr.Ack(fr.OP_SET_CHANNEL))
        if isinstance(cmd, fr.SetIntensity):
            if self.playback is not None:
                return self._nak(fr.OP_SET_INTENSITY, fr.NAK_BUSY)
            if state == il.LOCKOUT:
                return self._nak(fr.OP_SET_INTENSITY, fr.NAK_LOCKOUT)
            if cmd.microamps > 0:
                verdict = il.check_command(cmd.microamps / 1000.0, self.interlock.limits)
                if not verdict:
                    return self._nak(fr.OP_SET_INTENSITY, fr.NAK_REJECTED)
            self.intensity_ua = cmd.microamps
            if self.intensity_ua == 0:
                self.interlock.disarm()
            else:
                self._auto_arm()
            return self._reply(fr.Ack(fr.OP_SET_INTENSITY))
        if isinstance(cmd, fr.StimOnce):
            return self._start_stim(fr.OP_STIM_ONCE, count=1, gap_ms=0)
        if isinstance(cmd, fr.StimTrain):
            return self._start_stim(fr.OP_STIM_TRAIN, count=cmd.count, gap_ms=cmd.gap_ms)
        if isinstance(cmd, fr.Stop):
            self._abort_playback()
            self.interlock.disarm()
            return self._reply(fr.Ack(fr.OP_STOP))
        if isinstance(cmd, fr.QueryStatus):
            return self._reply(self.status())
        if isinstance(cmd, fr.ResetLockout):
            self._abort_playback()
            self.interlock.reset_lockout()
            return self._reply(fr.Ack(fr.OP_RESET_LOCKOUT))
        raise fr.CodecError(f"device cannot handle {cmd!r}")

    def status(self) -> fr.Status:
        snap = self.interlock.status()
        r = snap.last_resistance_kohm
        resistance_dohm = 0 if r is None else int(round(r * 10_000))
        return fr.Status(
            fr.STATE_CODES[snap.state.kind],
            resistance_dohm,
            self.intensity_ua,
        )

    def _auto_arm(self) -> None:
        # No explicit ARM verb on the wire: a device with a routed channel and
        # a nonzero intensity is ready to stimulate.
        if (self.interlock.state.kind == il.DISARMED
                and self.channel is not None and self.intensity_ua > 0):
            self.interlock.arm()

    def _start_stim(self, opcode: int, count: int, gap_ms: int) -> None:
        state = self.interlock.state.kind
        if state == il.LOCKOUT:
            return self._nak(opcode, fr.NAK_LOCKOUT)
        if self.playback is not None:
            return self._nak(opcode, fr.NAK_BUSY)
        if self.channel is None or self.intensity_ua <= 0:
            return self._nak(opcode, fr.NAK_NOT_ARMED)
        amplitude_ma = self.intensity_ua / 1000.0
        verdict = self.interlock.permit(amplitude_ma)
        if not verdict:
            return self._nak(opcode, fr.NAK_NOT_ARMED)
        spec = wf.PulseSpec(amplitude_ma)
        self._begin_playback(spec, count, gap_ms)
        self._reply(fr.Ack(opcode))

    def _begin_playback(self, spec: wf.PulseSpec, count: int, gap_ms: float) -> None:
        samples = wf.synth_stimulus(spec, self.sample_rate_hz)
        period = spec.duration_ms + gap_ms
        starts = [self.clock_ms + k * period for k in range(count)]
        self.playback = _Playback(spec, samples, self.channel, starts)
        self.interlock.note_stim_started()
        self._next_meas_ms = self.clock_ms + DRIVE_MEASUREMENT_INTERVAL_MS

    def play_custom(self, spec: wf.PulseSpec, count: int = 1, gap_ms: float = 0.0) -> bool:
        """Bench entry point for arbitrary specs (e.g. monophasic demos)."""
        if self.playback is not None or self.channel is None:
            return False
        if not self.interlock.permit(spec.stim_amplitude_ma):
            return False
        self._begin_playback(spec, count, gap_ms)
        return True

    # clock side

    @property
    def playback_active(self) -> bool:
        return self.playback is not None

    def run_until(self, t_ms: int) -> None:
        """Advance the simulated clock, processing phase boundaries and
        measurements in deterministic order."""
        while self.clock_ms < t_ms:
            hop = min(t_ms, self._next_meas_ms)
            boundary = self._next_phase_boundary()
            if boundary is not None:
                hop = min(hop, boundary)
            self.clock_ms = int(hop) if hop == int(hop) else hop
            if boundary is not None and self.clock_ms >= boundary:
                self._process_phase_boundary()
            if self.clock_ms >= self._next_meas_ms:
                self._measure()

    def step(self, dt_ms: int = 1) -> None:
        if dt_ms <= 0:
            raise ValueError("dt must be positive")
        self.run_until(self.clock_ms + dt_ms)

    def _next_phase_boundary(self) -> float | None:
        pb = self.playback
        if pb is None:
            return None
        start = pb.pulse_starts[pb.pulse_idx]
        if pb.phase == "pending":
            return start
        if pb.phase == "priming":
            return start + pb.spec.priming_width_ms
        return start + pb.spec.duration_ms

    def _process_phase_boundary(self) -> None:
        pb = self.playback
        start = pb.pulse_starts[pb.pulse_idx]
        if pb.phase == "pending":
            if pb.spec.priming_width_ms > 0:
                pb.phase = "priming"
                self._apply_routing(rl.RoutingState(
                    rl.ElectrodeId.channel(pb.channel), rl.PHASE_PRIMING))
            else:
                pb.phase = "stim"
                self._apply_routing(rl.RoutingState(
                    rl.ElectrodeId.channel(pb.channel), rl.PHASE_STIM))
            # pulse drive begins: tighten the measurement cadence immediately
            self._next_meas_ms = min(
                self._next_meas_ms, self.clock_ms + DRIVE_MEASUREMENT_INTERVAL_MS)
        elif pb.phase == "priming":
            pb.phase = "stim"
            self._apply_routing(rl.RoutingState(
                rl.ElectrodeId.channel(pb.channel), rl.PHASE_STIM))
        else:  # stim phase ended: pulse complete
            self._commit_pulse_charge(pb)
            self._apply_routing(rl.RoutingState.idle())
            pb.pulse_idx += 1
            pb.phase = "pending"
            if pb.pulse_idx >= len(pb.pulse_starts):
                self.last_stimulus = (pb.channel, pb.spec.stim_amplitude_ma)
                self.playback = None
                self.interlock.note_stim_finished()

    def _commit_pulse_charge(self, pb: _Playback) -> None:
        self._charge_parts.setdefault(pb.channel, []).append(
            wf.net_charge_uc(pb.samples))

    def accumulated_charge_uc(self, channel: int) -> float:
        parts = list(self._charge_parts.get(channel, ()))
        pb = self.playback
        if pb is not None and pb.channel == channel and pb.phase != "pending":
            elapsed = self.clock_ms - pb.pulse_starts[pb.pulse_idx]
            cursor = int(elapsed * pb.samples.sample_rate_hz // 1000)
            cursor = min(cursor, len(pb.samples.samples))
            parts.append(math.fsum(pb.samples.samples[:cursor])
                         * 1000.0 / pb.samples.sample_rate_hz)
        return math.fsum(parts)

    def _apply_routing(self, target: rl.RoutingState) -> None:
        for frame in rl.transition(self.routing, target):
            result = rl.validate(frame)
            if result != rl.OK:
                raise rl.InvalidFrameError(f"unsafe frame during routing: {result}")
            self.relay_log.append((self.clock_ms, frame))
        self.routing = target

    def _current_now_ma(self) -> float:
        pb = self.playback
        if pb is None or pb.phase == "pending":
            return 0.0
        elapsed = self.clock_ms - pb.pulse_starts[pb.pulse_idx]
        if elapsed < 0:
            return 0.0
        idx = int(elapsed * pb.samples.sample_rate_hz // 1000)
        if idx >= len(pb.samples.samples):
            return 0.0
        return pb.samples.samples[idx]

    def _measure(self) -> None:
        current = abs(self._current_now_ma())
        if current > 0:
            r = self.load.resistance(self.playback.channel, self.rng)
            voltage = current * r
        else:
            voltage = 0.0
        m = il.LoadMeasurement(voltage, current, self.clock_ms)
        self.measurements.append(m)
        state = self.interlock.observe(m)
        if state.kind in (il.LOCKOUT, il.FAULT) and self.playback is not None:
            self._abort_playback()
        # dense cadence while current flows; throttled between pulses (the
        # next pulse start pulls the cadence back in)
        interval = (DRIVE_MEASUREMENT_INTERVAL_MS if current > 0
                    else IDLE_MEASUREMENT_INTERVAL_MS)
        self._next_meas_ms = self.clock_ms + interval

    def _abort_playback(self) -> None:
        if self.playback is not None:
            self.playback = None
            self.interlock.note_stim_finished()
        self._apply_routing(rl.RoutingState.idle())

    def inject_measurement(self, voltage_v: float, current_ma: float) -> il.SafetyState:
        """Test/debug hook: feed a fabricated reading to the interlock."""
        m = il.LoadMeasurement(voltage_v, current_ma, self.clock_ms)
        self.measurements.append(m)
        state = self.interlock.observe(m)
        if state.kind in (il.LOCKOUT, il.FAULT) and self.playback is not None:
            self._abort_playback()
        return state

    # perception side

    def perceive(self, visual=None, seed: int = 0) -> SensationReport | None:
        """Ask the synthetic perceiver about the last completed stimulus."""
        if self.last_stimulus is None:
            raise RuntimeError("no completed stimulus to perceive")
        channel, intensity_ma = self.last_stimulus
        return self.perceiver.perceive(channel, intensity_ma, visual, seed)

    def vibrotactile_baseline(self, duration_ms: float = VIBRO_DURATION_MS) -> dict | None:
        """Wrist-locus vibration burst (resonant 80 Hz actuator model)."""
        if duration_ms <= 0:
            return None
        event = {
            "t_ms": self.clock_ms,
            "kind": "vibration",
            "freq_hz": VIBRO_FREQ_HZ,
            "duration_ms": duration_ms,
            "locus": channel_key("wrist"),
        }
        self.actuator_events.append(event)
        self.last_stimulus = ("wrist", 1.0)
        return event

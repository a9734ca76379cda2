"""Host-side session engine: event-to-feedback mapping, threshold
calibration, and the randomized study protocols.

Everything runs on the device's simulated clock through the wire protocol
(commands are encoded to bytes and fed to the device, replies decoded back),
so a whole session is reproducible from its seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import contact as ct
from . import effects as fx
from . import framing as fr
from . import interlock as il
from .records import TrialRecord, derive_seed

POLICY_ELECTRO = "electro"
POLICY_VIBRO = "vibro"

MODE_STUDY1 = "study1"  # calibrated intensity = first felt step
MODE_STUDY3 = "study3"  # one step above the first felt step

CAL_STEP_UA = 100
CAL_MAX_UA = 4000

TICK_MS = 5              # scheduler tick for interaction mode
STIM_DURATION_MS = 45.0
VIBRO_DURATION_MS = 25.0

TRAIN_COUNT = 10
TRAIN_GAP_MS = 1000
REPORT_DELAY_MS = 500

STUDY1_CHANNELS = tuple(range(5, 16))
DEFAULT_CHANNEL = {"thumb": 5, "index": 8}


class CalibrationError(RuntimeError):
    pass


class CalibrationRequiredError(RuntimeError):
    """Raised when an event needs feedback on an uncalibrated finger."""


class SessionAborted(RuntimeError):
    def __init__(self, message: str, records: list[TrialRecord]):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class CalibrationResult:
    finger: str
    channel: int
    intensity_ua: int
    steps: int

    @property
    def intensity_ma(self) -> float:
        return self.intensity_ua / 1000.0


class DeviceLink:
    """Host end of the wire protocol (bytes in both directions)."""

    def __init__(self, device):
        self.device = device
        self._rx = fr.StreamDecoder()

    def send(self, cmd: fr.Command) -> list[fr.Command]:
        self.device.receive(fr.encode(cmd))
        return self._rx.feed(self.device.drain_outbox())

    def send_checked(self, cmd: fr.Command) -> list[fr.Command]:
        replies = self.send(cmd)
        for r in replies:
            if isinstance(r, fr.Nak):
                raise DeviceNak(r)
        return replies

    def query_status(self) -> fr.Status:
        for r in self.send(fr.QueryStatus()):
            if isinstance(r, fr.Status):
                return r
        raise RuntimeError("device did not answer status query")


class DeviceNak(RuntimeError):
    def __init__(self, nak: fr.Nak):
        reason = fr.NAK_REASONS.get(nak.reason, str(nak.reason))
        super().__init__(f"device NAK on opcode 0x{nak.opcode:02x}: {reason}")
        self.nak = nak


def default_responder(channel: int, intensity_ua: int, report) -> str:
    """Automated operator: 'felt it' exactly when the perceiver reported."""
    return "felt" if report is not None else "not_felt"


def run_calibration(device, target_finger: str, respond=None,
                    mode: str = MODE_STUDY1, start_channel: int | None = None,
                    seed: int = 0) -> CalibrationResult:
    """Step intensity from 0.1 mA in 0.1 mA increments until the operator
    confirms a clear sensation; the operator may switch candidate channels
    (stepping restarts).  Study-3 mode lands one step above the threshold."""
    if mode not in (MODE_STUDY1, MODE_STUDY3):
        raise ValueError(f"unknown calibration mode {mode!r}")
    respond = respond or default_responder
    link = device if isinstance(device, DeviceLink) else DeviceLink(device)
    channel = start_channel or DEFAULT_CHANNEL[target_finger]
    intensity = 0
    steps = 0
    threshold = None
    while threshold is None:
        intensity += CAL_STEP_UA
        if intensity > CAL_MAX_UA:
            raise CalibrationError(
                f"no sensation up to {CAL_MAX_UA} uA on channel {channel}")
        steps += 1
        try:
            link.send_checked(fr.SetChannel(channel))
            link.send_checked(fr.SetIntensity(intensity))
            link.send_checked(fr.StimOnce())
        except DeviceNak as e:
            if e.nak.reason == fr.NAK_LOCKOUT:
                raise  # lockout ends the whole session, not just this step
            raise CalibrationError(f"device refused calibration step: {e}") from e
        _run_playback_out(link.device)
        state = link.device.interlock.state.kind
        if state == il.LOCKOUT:
            raise DeviceNak(fr.Nak(fr.OP_STIM_ONCE, fr.NAK_LOCKOUT))
        if state == il.FAULT:
            raise CalibrationError(
                f"device fault ({link.device.interlock.state.fault_reason}) "
                "during calibration step")
        report = link.device.perceive(
            seed=derive_seed(seed, "cal", channel, intensity))
        resp = respond(channel, intensity, report)
        if resp == "felt":
            threshold = intensity
        elif resp == "not_felt":
            continue
        elif isinstance(resp, tuple) and resp[0] == "switch":
            channel = int(resp[1])
            intensity = 0
        elif resp == "abort":
            raise CalibrationError("calibration aborted by operator")
        else:
            raise ValueError(f"unknown calibration response {resp!r}")
    final = threshold + (CAL_STEP_UA if mode == MODE_STUDY3 else 0)
    if final > CAL_MAX_UA:
        raise CalibrationError("threshold too close to the current limit")
    return CalibrationResult(target_finger, channel, final, steps)


def _run_playback_out(device) -> None:
    while device.playback_active:
        device.step(STIM_DURATION_MS)


@dataclass(frozen=True)
class ScheduledStim:
    t_ms: float
    policy: str
    channel: int | None
    intensity_ua: int
    duration_ms: float


@dataclass(frozen=True)
class ScheduledVisual:
    t_ms: float
    effect: fx.VisualEffect


def event_target_finger(event: ct.ContactEvent) -> str:
    # buttons and sliders are index-finger touches; pinch grabs map to the
    # thumb channel (one stimulation channel drives at a time)
    return "thumb" if event.finger in ("pinch", "thumb") else "index"


def on_event(event: ct.ContactEvent, policy: str,
             calibrations: dict[str, CalibrationResult],
             visual_size: str = fx.SIZE_FINGER,
             visual_opacity: str = fx.OPACITY_FULL,
             tick_ms: float = TICK_MS) -> tuple[ScheduledStim, ScheduledVisual]:
    """Map one contact/release/detent event to a stimulus+visual pair with
    identical scheduled start times on the next scheduler tick."""
    finger = event_target_finger(event)
    t = math.ceil(event.timestamp_ms / tick_ms) * tick_ms
    if policy == POLICY_ELECTRO:
        cal = calibrations.get(finger)
        if cal is None:
            raise CalibrationRequiredError(
                f"finger {finger!r} has no calibration; run calibration first")
        stim = ScheduledStim(t, POLICY_ELECTRO, cal.channel, cal.intensity_ua,
                             STIM_DURATION_MS)
    elif policy == POLICY_VIBRO:
        stim = ScheduledStim(t, POLICY_VIBRO, None, 0, VIBRO_DURATION_MS)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    visual = ScheduledVisual(t, fx.VisualEffect(visual_size, visual_opacity, finger))
    return stim, visual


class InteractionSession:
    """Pose stream in, paired stimulus/visual commands out.

    Commands dispatch on the scheduler tick following their triggering pose
    sample; the audit trail keeps (trigger, stim, visual) times for every
    pair so synchrony can be checked end to end."""

    def __init__(self, device, elements: list[ct.UIElement],
                 calibrations: dict[str, CalibrationResult] | None = None,
                 policy: str = POLICY_ELECTRO,
                 visual_size: str = fx.SIZE_FINGER,
                 visual_opacity: str = fx.OPACITY_FULL,
                 tick_ms: float = TICK_MS):
        self.device = device
        self.link = DeviceLink(device)
        self.detector = ct.EventDetector(elements)
        self.calibrations = calibrations or {}
        self.policy = policy
        self.visual_size = visual_size
        self.visual_opacity = visual_opacity
        self.tick_ms = tick_ms
        self.pending: list[tuple[ct.ContactEvent, ScheduledStim, ScheduledVisual]] = []
        self.audit: list[dict] = []
        self.visual_log: list[dict] = []

    def feed(self, pose: ct.HandPose) -> None:
        self._dispatch_until(pose.timestamp_ms)
        if pose.timestamp_ms > self.device.clock_ms:
            self.device.run_until(pose.timestamp_ms)
        for event in self.detector.feed(pose):
            self.pending.append(
                (event,) + on_event(event, self.policy, self.calibrations,
                                    self.visual_size, self.visual_opacity,
                                    self.tick_ms))

    def finish(self) -> list[dict]:
        for event in self.detector.finish():
            self.pending.append(
                (event,) + on_event(event, self.policy, self.calibrations,
                                    self.visual_size, self.visual_opacity,
                                    self.tick_ms))
        if self.pending:
            self._dispatch_until(max(s.t_ms for _, s, _ in self.pending))
        _run_playback_out(self.device)
        self.link.send(fr.Stop())
        return self.audit

    def _dispatch_until(self, t_ms: float) -> None:
        while self.pending and self.pending[0][1].t_ms <= t_ms:
            event, stim, visual = self.pending.pop(0)
            if stim.t_ms > self.device.clock_ms:
                self.device.run_until(stim.t_ms)
            delivered = self._emit_stim(stim)
            self.visual_log.append({"t_ms": visual.t_ms,
                                    **fx.animation(visual.effect,
                                                   self.device.perceiver.handmap)})
            self.audit.append({
                "event": event.kind,
                "element": event.element_id,
                "finger": event_target_finger(event),
                "trigger_ms": event.timestamp_ms,
                "stim_ms": stim.t_ms,
                "visual_ms": visual.t_ms,
                "delivered": delivered,
            })

    def _emit_stim(self, stim: ScheduledStim) -> bool:
        if stim.policy == POLICY_VIBRO:
            return self.device.vibrotactile_baseline(stim.duration_ms) is not None
        try:
            self.link.send_checked(fr.SetChannel(stim.channel))
            self.link.send_checked(fr.SetIntensity(stim.intensity_ua))
            self.link.send_checked(fr.StimOnce())
            return True
        except DeviceNak:
            return False  # e.g. still stimulating from an overlapping event


@dataclass(frozen=True)
class TrialPlan:
    trial_index: int
    channel: int | None
    target_finger: str | None
    visual_size: str | None
    visual_opacity: str | None


@dataclass(frozen=True)
class TrialContext:
    """A stimulated trial awaiting its sensation report."""

    plan: TrialPlan
    visual: fx.VisualEffect | None
    trial_seed: int
    channel: int | str | None
    intensity_ua: int
    t_start_ms: int
    t_stim_ms: int
    note: str


def build_trial_plans(kind: str, seed: int, participant: str) -> list[TrialPlan]:
    """Randomized trial order for the declared condition grids."""
    rng = random.Random(derive_seed(seed, kind, participant, "order"))
    if kind == "study1":
        cells = [(ch,) for ch in STUDY1_CHANNELS for _ in range(2)]
        rng.shuffle(cells)
        return [TrialPlan(i, ch, None, None, None)
                for i, (ch,) in enumerate(cells)]
    if kind == "study2":
        cells = [(size, op, finger)
                 for size in fx.SIZES for op in fx.OPACITIES
                 for finger in fx.FINGERS for _ in range(2)]
        rng.shuffle(cells)
        return [TrialPlan(i, None, finger, size, op)
                for i, (size, op, finger) in enumerate(cells)]
    raise ValueError(f"unknown study kind {kind!r}")


class StudyRunner:
    """Runs one participant through a study protocol on a simulated device.

    Reports come from the device's perceiver by default; pass
    ``report_provider`` to collect them elsewhere (e.g. the operator
    console)."""

    def __init__(self, device, kind: str, participant: str = "p01",
                 seed: int = 0, policy: str = POLICY_ELECTRO,
                 wait_range_ms: tuple[int, int] = (1000, 3000),
                 calibrations: dict[str, CalibrationResult] | None = None,
                 report_provider=None):
        self.device = device
        self.link = DeviceLink(device)
        self.kind = kind
        self.participant = participant
        self.seed = seed
        self.policy = policy
        self.wait_range_ms = wait_range_ms
        self.calibrations = dict(calibrations or {})
        self.report_provider = report_provider
        self.rng = random.Random(derive_seed(seed, kind, participant, "waits"))
        self.plans = build_trial_plans(kind, seed, participant)
        self.records: list[TrialRecord] = []

    def ensure_calibrations(self) -> dict[str, CalibrationResult]:
        if self.kind == "study2" and self.policy == POLICY_ELECTRO:
            for finger in fx.FINGERS:
                if finger not in self.calibrations:
                    self.calibrations[finger] = run_calibration(
                        self.link, finger,
                        seed=derive_seed(self.seed, self.participant, finger))
        return self.calibrations

    def run(self) -> list[TrialRecord]:
        try:
            self.ensure_calibrations()
            for plan in self.plans:
                self.records.append(self.run_trial(plan))
        except (DeviceNak, CalibrationError) as e:
            # per-trial calibration trouble is flagged on the record instead;
            # landing here means the session itself cannot continue
            self.link.send(fr.Stop())
            raise SessionAborted(str(e), self.records) from e
        self.link.send(fr.Stop())
        return self.records

    def begin_trial(self, plan: TrialPlan) -> "TrialContext":
        """Random wait, calibration where the protocol asks for it, then the
        ten-pulse train; the trial is afterwards ready for its report."""
        dev = self.device
        t_start = dev.clock_ms
        dev.run_until(dev.clock_ms + self.rng.randint(*self.wait_range_ms))
        trial_seed = derive_seed(self.seed, self.participant, self.kind,
                                 plan.trial_index)
        visual = None
        if plan.visual_size is not None:
            visual = fx.VisualEffect(plan.visual_size, plan.visual_opacity,
                                     plan.target_finger)

        note = ""
        channel: int | str | None = plan.channel
        intensity_ua = 0
        if self.policy == POLICY_VIBRO:
            channel = "wrist"
            t_stim = dev.clock_ms
            for _ in range(TRAIN_COUNT):
                dev.vibrotactile_baseline(VIBRO_DURATION_MS)
                dev.run_until(dev.clock_ms + VIBRO_DURATION_MS + TRAIN_GAP_MS)
        else:
            try:
                if self.kind == "study1":
                    cal = run_calibration(
                        self.link, "thumb", start_channel=plan.channel,
                        seed=derive_seed(self.seed, self.participant,
                                         "trialcal", plan.trial_index))
                    channel, intensity_ua = cal.channel, cal.intensity_ua
                else:
                    cal = self.calibrations[plan.target_finger]
                    channel, intensity_ua = cal.channel, cal.intensity_ua
            except CalibrationError:
                note = "calibration_failed"
            t_stim = dev.clock_ms
            if not note:
                self.link.send_checked(fr.SetChannel(channel))
                self.link.send_checked(fr.SetIntensity(intensity_ua))
                self.link.send_checked(fr.StimTrain(TRAIN_COUNT, TRAIN_GAP_MS))
                _run_playback_out(dev)
        return TrialContext(plan, visual, trial_seed, channel, intensity_ua,
                            int(round(t_start)), int(round(t_stim)), note)

    def auto_report(self, ctx: "TrialContext"):
        if ctx.note:
            return None
        if self.report_provider is not None:
            return self.report_provider(ctx.plan, ctx.visual, ctx.trial_seed)
        return self.device.perceive(ctx.visual, seed=ctx.trial_seed)

    def finish_trial(self, ctx: "TrialContext", report) -> TrialRecord:
        dev = self.device
        dev.run_until(dev.clock_ms + REPORT_DELAY_MS)
        record = TrialRecord(
            participant=self.participant,
            study=self.kind,
            trial_index=ctx.plan.trial_index,
            channel=ctx.channel,
            target_finger=ctx.plan.target_finger,
            visual_size=ctx.plan.visual_size,
            visual_opacity=ctx.plan.visual_opacity,
            policy=self.policy,
            intensity_ua=ctx.intensity_ua,
            seed=ctx.trial_seed,
            t_start_ms=ctx.t_start_ms,
            t_stim_ms=ctx.t_stim_ms,
            t_report_ms=int(round(dev.clock_ms)),
            report=report,
            note=ctx.note,
        )
        return record

    def run_trial(self, plan: TrialPlan) -> TrialRecord:
        ctx = self.begin_trial(plan)
        return self.finish_trial(ctx, self.auto_report(ctx))


def run_study_protocol(device, kind: str, seed: int, participant: str = "p01",
                       policy: str = POLICY_ELECTRO, **kwargs) -> list[TrialRecord]:
    return StudyRunner(device, kind, participant, seed, policy, **kwargs).run()


def run_cohort(kind: str, seed: int, participants: int,
               policy: str = POLICY_ELECTRO, base_config=None,
               device_seed_offset: int = 0) -> list[TrialRecord]:
    """Run several simulated participants through a protocol, each with a
    jittered perceiver variant on a fresh device."""
    from .perceiver import Perceiver, PerceiverConfig, participant_variant
    from .simband import SimulatedWristband

    base = base_config or PerceiverConfig()
    records: list[TrialRecord] = []
    for i in range(1, participants + 1):
        pid = f"p{i:02d}"
        pseed = derive_seed(seed, "participant", i) + device_seed_offset
        device = SimulatedWristband(
            perceiver=Perceiver(participant_variant(base, pseed)), seed=pseed)
        runner = StudyRunner(device, kind, pid, seed=seed, policy=policy)
        try:
            records += runner.run()
        except SessionAborted as e:
            records += e.records
            raise SessionAborted(str(e), records) from e
    return records

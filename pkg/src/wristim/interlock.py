"""Safety interlock gating every stimulation command.

Three layers mirror the stimulator hardware: a software amplitude limit on
requests (4.0 mA), a hard cap modelling the current-limiting diode (4.5 mA,
any measurement above it locks the device out until an operator reset), and
live skin-resistance monitoring (out-of-band resistance raises a recoverable
fault: lift-off high, short low).

Fault auto-recovers on the next in-range driven measurement; Lockout is
absorbing and only ``reset`` leaves it.
"""

from __future__ import annotations

from dataclasses import dataclass

DISARMED = "disarmed"
ARMED = "armed"
STIMULATING = "stimulating"
FAULT = "fault"
LOCKOUT = "lockout"

FAULT_OPEN_CIRCUIT = "open_circuit"
FAULT_SHORT = "short"


class UndefinedLoadError(ValueError):
    """Resistance requested from a measurement with no current flowing."""


@dataclass(frozen=True)
class SafetyLimits:
    software_max_current_ma: float = 4.0
    hardware_cap_ma: float = 4.5
    resistance_fault_floor_kohm: float = 5.0
    resistance_fault_ceiling_kohm: float = 500.0
    supply_rail_v: float = 72.0

    def __post_init__(self):
        if self.software_max_current_ma >= self.hardware_cap_ma:
            raise ValueError("software limit must sit below the hardware cap")
        if self.resistance_fault_floor_kohm >= self.resistance_fault_ceiling_kohm:
            raise ValueError("resistance fault floor must sit below the ceiling")


@dataclass(frozen=True)
class SafetyState:
    kind: str
    fault_reason: str | None = None

    @classmethod
    def disarmed(cls):
        return cls(DISARMED)

    @classmethod
    def armed(cls):
        return cls(ARMED)

    @classmethod
    def stimulating(cls):
        return cls(STIMULATING)

    @classmethod
    def fault(cls, reason: str):
        return cls(FAULT, reason)

    @classmethod
    def lockout(cls):
        return cls(LOCKOUT)


@dataclass(frozen=True)
class LoadMeasurement:
    """Voltage-divider reading at the stimulation output.

    Not validated against the nominal supply rail: a 1 mA drive into the
    reference 72.3 kOhm skin load legitimately reads 72.3 V, just above the
    72 V nominal boost rail (converter regulation headroom).
    """

    voltage_v: float
    current_ma: float
    timestamp_ms: float


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


OK_VERDICT = Verdict(True)


def check_command(amplitude_ma: float, limits: SafetyLimits) -> Verdict:
    """Software-level gate on a requested stimulation amplitude."""
    if amplitude_ma <= 0:
        return Verdict(False, "non-positive amplitude")
    if amplitude_ma > limits.software_max_current_ma:
        return Verdict(
            False,
            f"amplitude {amplitude_ma} mA over software limit "
            f"{limits.software_max_current_ma} mA",
        )
    return OK_VERDICT


def estimate_resistance_kohm(m: LoadMeasurement) -> float:
    """Skin resistance from the voltage divider (V per mA is kOhm)."""
    if m.current_ma <= 0:
        raise UndefinedLoadError("resistance undefined without drive current")
    return m.voltage_v / m.current_ma


def monitor(state: SafetyState, m: LoadMeasurement, limits: SafetyLimits) -> SafetyState:
    """Fold one measurement into the safety state machine."""
    if state.kind == LOCKOUT:
        return state
    if m.current_ma > limits.hardware_cap_ma:
        return SafetyState.lockout()
    if m.current_ma > 0:
        r = estimate_resistance_kohm(m)
        if r > limits.resistance_fault_ceiling_kohm:
            return SafetyState.fault(FAULT_OPEN_CIRCUIT)
        if r < limits.resistance_fault_floor_kohm:
            return SafetyState.fault(FAULT_SHORT)
        if state.kind == FAULT:
            return SafetyState.armed()
    return state


def reset(state: SafetyState) -> SafetyState:
    """Operator reset: the only exit from Lockout. Always lands Disarmed."""
    return SafetyState.disarmed()


@dataclass(frozen=True)
class StatusSnapshot:
    state: SafetyState
    last_resistance_kohm: float | None
    last_current_ma: float | None


class SafetyInterlock:
    """Stateful wrapper owned by the device control loop.

    Measurements arrive through ``observe``; stimulation starts must pass
    ``permit`` (Armed state plus the software amplitude check).
    """

    def __init__(self, limits: SafetyLimits | None = None):
        self.limits = limits or SafetyLimits()
        self.state = SafetyState.disarmed()
        self._last_resistance: float | None = None
        self._last_current: float | None = None

    def arm(self) -> bool:
        if self.state.kind == DISARMED:
            self.state = SafetyState.armed()
        return self.state.kind == ARMED

    def disarm(self):
        if self.state.kind in (ARMED, STIMULATING):
            self.state = SafetyState.disarmed()

    def observe(self, m: LoadMeasurement) -> SafetyState:
        self.state = monitor(self.state, m, self.limits)
        self._last_current = m.current_ma
        if m.current_ma > 0:
            self._last_resistance = estimate_resistance_kohm(m)
        return self.state

    def permit(self, amplitude_ma: float) -> Verdict:
        if self.state.kind != ARMED:
            return Verdict(False, f"not armed (state: {self.state.kind})")
        return check_command(amplitude_ma, self.limits)

    def note_stim_started(self):
        if self.state.kind != ARMED:
            raise RuntimeError("stimulation start without Armed state")
        self.state = SafetyState.stimulating()

    def note_stim_finished(self):
        if self.state.kind == STIMULATING:
            self.state = SafetyState.armed()

    def reset_lockout(self):
        self.state = reset(self.state)

    def status(self) -> StatusSnapshot:
        return StatusSnapshot(self.state, self._last_resistance, self._last_current)

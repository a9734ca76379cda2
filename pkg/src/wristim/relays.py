"""Relay frames for the 16-channel bipolar switching matrix.

Eight daisy-chained 8-bit shift registers drive 32 photorelays that connect
each of 16 electrode nodes (the common base node plus channels ch1-ch15) to
either the high or the low supply rail.  Each relay is driven from two
register outputs, so a frame is 64 bits with every bit pair equal.  The
bit-exact layout lives in ``data/relay_layout_v1.json`` and is the contract
golden-file tests check against.

In the stimulation phase the active channel sits on the low rail (cathodic at
the channel electrode) and the base node on the high rail; the priming phase
swaps the rails.  Channels ch1-ch4 are representable but unused by default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

RAIL_HIGH = 0
RAIL_LOW = 1

PHASE_STIM = "stim"
PHASE_PRIMING = "priming"
PHASE_IDLE = "idle"

N_NODES = 16
N_BITS = 64
BASE_NODE = 0
UNUSED_DEFAULT_CHANNELS = (1, 2, 3, 4)

LAYOUT_VERSION = "relay-layout/1"


class InvalidFrameError(ValueError):
    """Frame violates the routing safety invariants."""


def load_layout() -> dict:
    """The shipped layout table (ground truth for golden tests)."""
    text = resources.files("wristim.data").joinpath("relay_layout_v1.json").read_text()
    layout = json.loads(text)
    if layout["version"] != LAYOUT_VERSION:
        raise ValueError(f"unexpected layout version {layout['version']!r}")
    return layout


@dataclass(frozen=True)
class ElectrodeId:
    kind: str  # "base" or "channel"
    index: int

    def __post_init__(self):
        if self.kind == "base":
            if not 1 <= self.index <= 4:
                raise ValueError(f"base electrode index {self.index} outside 1..4")
        elif self.kind == "channel":
            if not 1 <= self.index <= 15:
                raise ValueError(f"channel index {self.index} outside 1..15")
        else:
            raise ValueError(f"unknown electrode kind {self.kind!r}")

    @classmethod
    def channel(cls, index: int) -> "ElectrodeId":
        return cls("channel", index)

    @classmethod
    def base(cls, index: int) -> "ElectrodeId":
        return cls("base", index)

    @property
    def node(self) -> int:
        # All four base electrodes tie to the single switched base node.
        return BASE_NODE if self.kind == "base" else self.index


def relay_index(node: int, rail: int) -> int:
    return 2 * node + rail


def relay_bits(relay: int) -> tuple[int, int]:
    return 2 * relay, 2 * relay + 1


@dataclass(frozen=True)
class RelayFrame:
    """64 relay-drive bits packed little-endian (bit 0 = integer LSB)."""

    bits: int = 0

    def __post_init__(self):
        if not 0 <= self.bits < (1 << N_BITS):
            raise ValueError("frame must fit in 64 bits")

    def bit(self, i: int) -> bool:
        return bool((self.bits >> i) & 1)

    def relay_closed(self, relay: int) -> bool:
        b0, b1 = relay_bits(relay)
        return self.bit(b0) and self.bit(b1)

    def node_rails(self, node: int) -> tuple[bool, bool]:
        """(high closed, low closed) for one electrode node."""
        return (
            self.relay_closed(relay_index(node, RAIL_HIGH)),
            self.relay_closed(relay_index(node, RAIL_LOW)),
        )

    def to_hex(self) -> str:
        return f"{self.bits:016x}"

    @classmethod
    def from_hex(cls, s: str) -> "RelayFrame":
        return cls(int(s, 16))


def _frame_with_relays(relays: list[int]) -> RelayFrame:
    bits = 0
    for r in relays:
        b0, b1 = relay_bits(r)
        bits |= (1 << b0) | (1 << b1)
    return RelayFrame(bits)


def idle() -> RelayFrame:
    return RelayFrame(0)


def route(channel: ElectrodeId, phase: str) -> RelayFrame:
    """Frame connecting one channel against the base node, per phase polarity."""
    if channel.kind != "channel":
        raise ValueError(f"routing requires a channel electrode, got {channel.kind}")
    if phase == PHASE_STIM:
        chan_rail, base_rail = RAIL_LOW, RAIL_HIGH
    elif phase == PHASE_PRIMING:
        chan_rail, base_rail = RAIL_HIGH, RAIL_LOW
    else:
        raise ValueError(f"phase must be stim or priming, got {phase!r}")
    return _frame_with_relays(
        [relay_index(channel.node, chan_rail), relay_index(BASE_NODE, base_rail)]
    )


# Validation results
@dataclass(frozen=True)
class Ok:
    pass


@dataclass(frozen=True)
class ShortCircuit:
    node: int


@dataclass(frozen=True)
class Ambiguous:
    nodes: tuple[int, ...]


@dataclass(frozen=True)
class PairMismatch:
    relay: int


OK = Ok()


def validate(frame: RelayFrame):
    """Diagnose a frame; returns OK or the first violated invariant."""
    for r in range(2 * N_NODES):
        b0, b1 = relay_bits(r)
        if frame.bit(b0) != frame.bit(b1):
            return PairMismatch(r)
    connected_channels = []
    for node in range(N_NODES):
        high, low = frame.node_rails(node)
        if high and low:
            return ShortCircuit(node)
        if node != BASE_NODE and (high or low):
            connected_channels.append(node)
    if len(connected_channels) > 1:
        return Ambiguous(tuple(connected_channels))
    return OK


def to_bitstream(frame: RelayFrame) -> tuple[int, ...]:
    """Bits in clock order onto the chain: bit 63 is shifted first, bit 0 last."""
    result = validate(frame)
    if result != OK:
        raise InvalidFrameError(f"refusing to serialize invalid frame: {result}")
    return tuple((frame.bits >> i) & 1 for i in range(N_BITS - 1, -1, -1))


def from_bitstream(stream) -> RelayFrame:
    stream = tuple(stream)
    if len(stream) != N_BITS:
        raise ValueError(f"bitstream must be {N_BITS} bits, got {len(stream)}")
    bits = 0
    for i, b in enumerate(stream):
        if b not in (0, 1):
            raise ValueError("bitstream entries must be 0 or 1")
        bits |= b << (N_BITS - 1 - i)
    return RelayFrame(bits)


@dataclass(frozen=True)
class RoutingState:
    """Either idle (no channel) or one channel in one drive phase."""

    channel: ElectrodeId | None
    phase: str

    def __post_init__(self):
        if self.phase == PHASE_IDLE:
            if self.channel is not None:
                raise ValueError("idle state carries no channel")
        elif self.phase in (PHASE_STIM, PHASE_PRIMING):
            if self.channel is None or self.channel.kind != "channel":
                raise ValueError("drive states need a channel electrode")
        else:
            raise ValueError(f"unknown phase {self.phase!r}")

    @classmethod
    def idle(cls) -> "RoutingState":
        return cls(None, PHASE_IDLE)

    def frame(self) -> RelayFrame:
        if self.phase == PHASE_IDLE:
            return idle()
        return route(self.channel, self.phase)


def transition(from_state: RoutingState, to_state: RoutingState) -> list[RelayFrame]:
    """Frames to apply, break-before-make: any routing change opens all relays
    before the new pair closes."""
    if from_state == to_state:
        return []
    if to_state.phase == PHASE_IDLE:
        return [idle()]
    if from_state.phase == PHASE_IDLE:
        return [to_state.frame()]
    return [idle(), to_state.frame()]


def is_break_before_make(frames: list[RelayFrame]) -> bool:
    """True if no node changes rail between adjacent frames without opening."""
    for f1, f2 in zip(frames, frames[1:]):
        for node in range(N_NODES):
            h1, l1 = f1.node_rails(node)
            h2, l2 = f2.node_rails(node)
            if (h1 and l2) or (l1 and h2):
                return False
    return True

"""Host <-> device command framing.

Frame layout: ``AA | opcode | length | payload... | crc`` with CRC-8/SMBUS
(polynomial 0x07, init 0x00, no reflection) computed over opcode, length and
payload.  Intensities travel as integer microamps and resistances as integer
deci-ohms; there are no floats on the wire.

The stream decoder is prefix-safe (a byte stream split at any boundary yields
the same command sequence) and resynchronizes on 0xAA after garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

SOF = 0xAA
MAX_PAYLOAD = 64

OP_SET_CHANNEL = 0x01
OP_SET_INTENSITY = 0x02
OP_STIM_ONCE = 0x03
OP_STIM_TRAIN = 0x04
OP_STOP = 0x05
OP_QUERY_STATUS = 0x06
OP_RESET_LOCKOUT = 0x07
OP_STATUS = 0x10
OP_ACK = 0x11
OP_NAK = 0x12

# device state codes carried in STATUS frames
STATE_CODES = {
    "disarmed": 0,
    "armed": 1,
    "stimulating": 2,
    "fault": 3,
    "lockout": 4,
}
STATE_NAMES = {v: k for k, v in STATE_CODES.items()}

# NAK reason codes
NAK_BUSY = 1
NAK_REJECTED = 2
NAK_BAD_ARGUMENT = 3
NAK_NOT_ARMED = 4
NAK_LOCKOUT = 5

NAK_REASONS = {
    NAK_BUSY: "busy",
    NAK_REJECTED: "rejected",
    NAK_BAD_ARGUMENT: "bad argument",
    NAK_NOT_ARMED: "not armed",
    NAK_LOCKOUT: "lockout",
}


class CodecError(ValueError):
    pass


class ChecksumError(CodecError):
    pass


class UnknownOpcodeError(CodecError):
    pass


class LengthOverrunError(CodecError):
    pass


class PayloadError(CodecError):
    pass


def crc8(data: bytes) -> int:
    """CRC-8/SMBUS: poly 0x07, init 0x00, MSB first."""
    crc = 0
    for byte in data:
        crc ^= byte
        for _ in range(8):
            if crc & 0x80:
                crc = ((crc << 1) & 0xFF) ^ 0x07
            else:
                crc = (crc << 1) & 0xFF
    return crc


@dataclass(frozen=True)
class SetChannel:
    channel: int

    def __post_init__(self):
        if not 1 <= self.channel <= 15:
            raise PayloadError(f"channel {self.channel} outside 1..15")


@dataclass(frozen=True)
class SetIntensity:
    microamps: int

    def __post_init__(self):
        if not 0 <= self.microamps <= 4000:
            raise PayloadError(f"intensity {self.microamps} uA outside 0..4000")


@dataclass(frozen=True)
class StimOnce:
    pass


@dataclass(frozen=True)
class StimTrain:
    count: int
    gap_ms: int

    def __post_init__(self):
        if not 1 <= self.count <= 255:
            raise PayloadError(f"train count {self.count} outside 1..255")
        if not 0 <= self.gap_ms <= 0xFFFF:
            raise PayloadError(f"gap {self.gap_ms} ms outside 0..65535")


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class QueryStatus:
    pass


@dataclass(frozen=True)
class ResetLockout:
    pass


@dataclass(frozen=True)
class Status:
    state_code: int
    resistance_dohm: int
    intensity_ua: int

    def __post_init__(self):
        if self.state_code not in STATE_NAMES:
            raise PayloadError(f"unknown state code {self.state_code}")
        if not 0 <= self.resistance_dohm <= 0xFFFFFFFF:
            raise PayloadError("resistance outside u32 range")
        if not 0 <= self.intensity_ua <= 0xFFFF:
            raise PayloadError("intensity outside u16 range")


@dataclass(frozen=True)
class Ack:
    opcode: int


@dataclass(frozen=True)
class Nak:
    opcode: int
    reason: int


Command = (
    SetChannel | SetIntensity | StimOnce | StimTrain | Stop | QueryStatus
    | ResetLockout | Status | Ack | Nak
)


def _payload(cmd: Command) -> tuple[int, bytes]:
    if isinstance(cmd, SetChannel):
        return OP_SET_CHANNEL, bytes([cmd.channel])
    if isinstance(cmd, SetIntensity):
        return OP_SET_INTENSITY, cmd.microamps.to_bytes(2, "little")
    if isinstance(cmd, StimOnce):
        return OP_STIM_ONCE, b""
    if isinstance(cmd, StimTrain):
        return OP_STIM_TRAIN, bytes([cmd.count]) + cmd.gap_ms.to_bytes(2, "little")
    if isinstance(cmd, Stop):
        return OP_STOP, b""
    if isinstance(cmd, QueryStatus):
        return OP_QUERY_STATUS, b""
    if isinstance(cmd, ResetLockout):
        return OP_RESET_LOCKOUT, b""
    if isinstance(cmd, Status):
        return OP_STATUS, (
            bytes([cmd.state_code])
            + cmd.resistance_dohm.to_bytes(4, "little")
            + cmd.intensity_ua.to_bytes(2, "little")
        )
    if isinstance(cmd, Ack):
        return OP_ACK, bytes([cmd.opcode])
    if isinstance(cmd, Nak):
        return OP_NAK, bytes([cmd.opcode, cmd.reason])
    raise CodecError(f"not a command: {cmd!r}")


def encode(cmd: Command) -> bytes:
    opcode, payload = _payload(cmd)
    if len(payload) > MAX_PAYLOAD:
        raise LengthOverrunError(f"payload {len(payload)} exceeds {MAX_PAYLOAD}")
    body = bytes([opcode, len(payload)]) + payload
    return bytes([SOF]) + body + bytes([crc8(body)])


def _expect(payload: bytes, size: int, opcode: int) -> None:
    if len(payload) != size:
        raise PayloadError(
            f"opcode 0x{opcode:02x} expects {size} payload bytes, got {len(payload)}"
        )


def _parse(opcode: int, payload: bytes) -> Command:
    if opcode == OP_SET_CHANNEL:
        _expect(payload, 1, opcode)
        return SetChannel(payload[0])
    if opcode == OP_SET_INTENSITY:
        _expect(payload, 2, opcode)
        return SetIntensity(int.from_bytes(payload, "little"))
    if opcode == OP_STIM_ONCE:
        _expect(payload, 0, opcode)
        return StimOnce()
    if opcode == OP_STIM_TRAIN:
        _expect(payload, 3, opcode)
        return StimTrain(payload[0], int.from_bytes(payload[1:3], "little"))
    if opcode == OP_STOP:
        _expect(payload, 0, opcode)
        return Stop()
    if opcode == OP_QUERY_STATUS:
        _expect(payload, 0, opcode)
        return QueryStatus()
    if opcode == OP_RESET_LOCKOUT:
        _expect(payload, 0, opcode)
        return ResetLockout()
    if opcode == OP_STATUS:
        _expect(payload, 7, opcode)
        return Status(
            payload[0],
            int.from_bytes(payload[1:5], "little"),
            int.from_bytes(payload[5:7], "little"),
        )
    if opcode == OP_ACK:
        _expect(payload, 1, opcode)
        return Ack(payload[0])
    if opcode == OP_NAK:
        _expect(payload, 2, opcode)
        return Nak(payload[0], payload[1])
    raise UnknownOpcodeError(f"unknown opcode 0x{opcode:02x}")


def decode(frame: bytes) -> Command:
    """Decode exactly one complete frame (raises on any defect)."""
    if len(frame) < 4:
        raise CodecError("frame shorter than minimum 4 bytes")
    if frame[0] != SOF:
        raise CodecError(f"bad start byte 0x{frame[0]:02x}")
    length = frame[2]
    if length > MAX_PAYLOAD:
        raise LengthOverrunError(f"declared payload {length} exceeds {MAX_PAYLOAD}")
    if len(frame) != 4 + length:
        raise CodecError(f"frame size {len(frame)} does not match header")
    body = frame[1:3 + length]
    if crc8(body) != frame[3 + length]:
        raise ChecksumError("frame checksum mismatch")
    return _parse(frame[1], frame[1 + 2:3 + length])


class StreamDecoder:
    """Incremental decoder for a raw byte stream.

    Partial frames are retained until completed; garbage and corrupt frames
    are skipped byte-by-byte past the start marker so a later genuine frame
    is still found.  Defects are appended to ``errors`` rather than raised.
    """

    def __init__(self):
        self._buf = bytearray()
        self.errors: list[str] = []

    def feed(self, data: bytes) -> list[Command]:
        self._buf.extend(data)
        out = []
        while True:
            start = self._buf.find(bytes([SOF]))
            if start < 0:
                self._buf.clear()
                break
            if start > 0:
                del self._buf[:start]
            if len(self._buf) < 3:
                break  # header incomplete
            length = self._buf[2]
            if length > MAX_PAYLOAD:
                self.errors.append(f"length overrun ({length})")
                del self._buf[:1]
                continue
            total = 4 + length
            if len(self._buf) < total:
                break  # frame incomplete
            frame = bytes(self._buf[:total])
            body = frame[1:3 + length]
            if crc8(body) != frame[total - 1]:
                self.errors.append("checksum mismatch")
                del self._buf[:1]
                continue
            try:
                out.append(_parse(frame[1], frame[3:total - 1]))
            except CodecError as e:
                self.errors.append(str(e))
            del self._buf[:total]
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)


def dump_hex(commands, path) -> None:
    """Hex-dump replay file: one encoded frame per line."""
    with open(path, "w") as f:
        for cmd in commands:
            f.write(encode(cmd).hex() + "\n")


def load_hex(path) -> list[Command]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(decode(bytes.fromhex(line)))
    return out

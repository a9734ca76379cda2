"""Shared helpers for the test suite."""

from __future__ import annotations

import random

from wristim import framing as fr

# Independent CRC-8 oracle: table-driven, built once from the polynomial.
# The implementation under test is a bitwise loop; this one is a lookup.
_TABLE = []
for _byte in range(256):
    _r = _byte
    for _ in range(8):
        _r = ((_r << 1) ^ 0x07) & 0xFF if _r & 0x80 else (_r << 1) & 0xFF
    _TABLE.append(_r)


def crc8_oracle(data: bytes) -> int:
    crc = 0
    for b in data:
        crc = _TABLE[crc ^ b]
    return crc


def random_command(rng: random.Random) -> fr.Command:
    choice = rng.randrange(10)
    if choice == 0:
        return fr.SetChannel(rng.randint(1, 15))
    if choice == 1:
        return fr.SetIntensity(rng.randint(0, 4000))
    if choice == 2:
        return fr.StimOnce()
    if choice == 3:
        return fr.StimTrain(rng.randint(1, 255), rng.randint(0, 0xFFFF))
    if choice == 4:
        return fr.Stop()
    if choice == 5:
        return fr.QueryStatus()
    if choice == 6:
        return fr.ResetLockout()
    if choice == 7:
        return fr.Status(rng.randint(0, 4), rng.randint(0, 0xFFFFFFFF),
                         rng.randint(0, 0xFFFF))
    if choice == 8:
        return fr.Ack(rng.randint(0, 255))
    return fr.Nak(rng.randint(0, 255), rng.randint(0, 255))

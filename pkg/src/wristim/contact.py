"""Hand-pose streams, virtual UI elements, and contact/release detection.

Poses arrive as timestamped fingertip positions plus a pinch distance (the
stream stands in for headset hand tracking).  Buttons and sliders are probed
by the index fingertip; grabbables engage when the pinch closes inside the
element.  A small hysteresis margin prevents chatter at boundaries, and when
several elements could engage at once the nearest center wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

PINCH_THRESHOLD_MM = 15.0
HYSTERESIS_MM = 2.0

KIND_BUTTON = "button"
KIND_SLIDER = "slider"
KIND_GRABBABLE = "grabbable"

EVENT_CONTACT = "contact"
EVENT_RELEASE = "release"
EVENT_DETENT = "detent_crossing"


@dataclass(frozen=True)
class HandPose:
    timestamp_ms: float
    thumb_tip_mm: tuple[float, float, float]
    index_tip_mm: tuple[float, float, float]
    pinch_distance_mm: float


@dataclass
class UIElement:
    element_id: str
    kind: str
    center_mm: tuple[float, float, float]
    extent_mm: tuple[float, float, float]  # half extents per axis
    detent_count: int = 0
    travel_mm: float = 0.0
    state: str = "idle"

    def __post_init__(self):
        if self.kind not in (KIND_BUTTON, KIND_SLIDER, KIND_GRABBABLE):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if any(e <= 0 for e in self.extent_mm):
            raise ValueError("element extents must be positive")
        if self.kind == KIND_SLIDER:
            if self.detent_count < 2:
                raise ValueError("sliders need at least 2 detents")
            if self.travel_mm <= 0:
                raise ValueError("slider travel must be positive")

    def contains(self, p, margin: float = 0.0) -> bool:
        return all(abs(p[i] - self.center_mm[i]) <= self.extent_mm[i] + margin
                   for i in range(3))

    def center_distance(self, p) -> float:
        return sum((p[i] - self.center_mm[i]) ** 2 for i in range(3)) ** 0.5

    def knob_position(self, p) -> float:
        """Slider knob travel coordinate (clamped), along the x axis."""
        x0 = self.center_mm[0] - self.travel_mm / 2.0
        return min(max(p[0] - x0, 0.0), self.travel_mm)

    def detent_positions(self) -> list[float]:
        n = self.detent_count
        return [k * self.travel_mm / (n - 1) for k in range(n)]


@dataclass(frozen=True)
class ContactEvent:
    kind: str
    element_id: str
    finger: str  # thumb | index | pinch
    timestamp_ms: float


@dataclass
class _Engagement:
    element: UIElement
    knob_pos: float = 0.0


class EventDetector:
    """Streaming contact/release/detent detection over a pose sequence.

    Each probe (index fingertip for buttons and sliders, the pinch midpoint
    for grabbables) engages at most one element at a time; release requires
    leaving the hysteresis-expanded volume (or opening the pinch).
    """

    def __init__(self, elements: list[UIElement],
                 pinch_threshold_mm: float = PINCH_THRESHOLD_MM,
                 hysteresis_mm: float = HYSTERESIS_MM):
        ids = [e.element_id for e in elements]
        if len(set(ids)) != len(ids):
            raise ValueError("element ids must be unique")
        self.elements = list(elements)
        self.pinch_threshold_mm = pinch_threshold_mm
        self.hysteresis_mm = hysteresis_mm
        self._index_engaged: _Engagement | None = None
        self._pinch_engaged: _Engagement | None = None
        self._last_t: float | None = None

    def feed(self, pose: HandPose) -> list[ContactEvent]:
        if self._last_t is not None and pose.timestamp_ms < self._last_t:
            raise ValueError("pose timestamps must be monotone")
        self._last_t = pose.timestamp_ms
        events: list[ContactEvent] = []
        events += self._track_index(pose)
        events += self._track_pinch(pose)
        return events

    def finish(self) -> list[ContactEvent]:
        """Release anything still engaged (end of stream)."""
        t = self._last_t if self._last_t is not None else 0.0
        events = []
        for attr, finger in (("_index_engaged", "index"), ("_pinch_engaged", "pinch")):
            eng = getattr(self, attr)
            if eng is not None:
                eng.element.state = "idle"
                events.append(ContactEvent(EVENT_RELEASE, eng.element.element_id,
                                           finger, t))
                setattr(self, attr, None)
        return events

    def _track_index(self, pose: HandPose) -> list[ContactEvent]:
        p = pose.index_tip_mm
        t = pose.timestamp_ms
        events: list[ContactEvent] = []
        eng = self._index_engaged
        if eng is not None:
            if not eng.element.contains(p, margin=self.hysteresis_mm):
                eng.element.state = "idle"
                events.append(ContactEvent(EVENT_RELEASE, eng.element.element_id,
                                           "index", t))
                self._index_engaged = None
            else:
                events += self._detents(eng, p, t)
            return events
        candidates = [e for e in self.elements
                      if e.kind in (KIND_BUTTON, KIND_SLIDER) and e.contains(p)]
        if candidates:
            chosen = min(candidates, key=lambda e: e.center_distance(p))
            chosen.state = "contacted" if chosen.kind == KIND_BUTTON else "grabbed"
            eng = _Engagement(chosen)
            if chosen.kind == KIND_SLIDER:
                eng.knob_pos = chosen.knob_position(p)
            self._index_engaged = eng
            events.append(ContactEvent(EVENT_CONTACT, chosen.element_id, "index", t))
        return events

    def _detents(self, eng: _Engagement, p, t: float) -> list[ContactEvent]:
        if eng.element.kind != KIND_SLIDER:
            return []
        prev, cur = eng.knob_pos, eng.element.knob_position(p)
        eng.knob_pos = cur
        events = []
        for d in eng.element.detent_positions():
            if (prev < d <= cur) or (cur <= d < prev):
                events.append(ContactEvent(EVENT_DETENT, eng.element.element_id,
                                           "index", t))
        return events

    def _track_pinch(self, pose: HandPose) -> list[ContactEvent]:
        mid = tuple((a + b) / 2.0 for a, b in
                    zip(pose.thumb_tip_mm, pose.index_tip_mm))
        t = pose.timestamp_ms
        closed = pose.pinch_distance_mm < self.pinch_threshold_mm
        events: list[ContactEvent] = []
        eng = self._pinch_engaged
        if eng is not None:
            still_closed = pose.pinch_distance_mm <= (self.pinch_threshold_mm
                                                      + self.hysteresis_mm)
            if not still_closed or not eng.element.contains(mid, self.hysteresis_mm):
                eng.element.state = "idle"
                events.append(ContactEvent(EVENT_RELEASE, eng.element.element_id,
                                           "pinch", t))
                self._pinch_engaged = None
            return events
        if closed:
            candidates = [e for e in self.elements
                          if e.kind == KIND_GRABBABLE and e.contains(mid)]
            if candidates:
                chosen = min(candidates, key=lambda e: e.center_distance(mid))
                chosen.state = "grabbed"
                self._pinch_engaged = _Engagement(chosen)
                events.append(ContactEvent(EVENT_CONTACT, chosen.element_id,
                                           "pinch", t))
        return events


def detect_events(poses, elements, **kwargs) -> list[ContactEvent]:
    """One-shot detection over a whole pose stream."""
    detector = EventDetector(elements, **kwargs)
    events: list[ContactEvent] = []
    for pose in poses:
        events += detector.feed(pose)
    events += detector.finish()
    return events


def save_pose_stream(poses, path) -> None:
    with open(path, "w") as f:
        for p in poses:
            rec = {
                "t_ms": p.timestamp_ms,
                "thumb_mm": list(p.thumb_tip_mm),
                "index_mm": list(p.index_tip_mm),
                "pinch_mm": p.pinch_distance_mm,
            }
            f.write(json.dumps(rec) + "\n")


def load_pose_stream(path) -> list[HandPose]:
    poses = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            poses.append(HandPose(d["t_ms"], tuple(d["thumb_mm"]),
                                  tuple(d["index_mm"]), d["pinch_mm"]))
    return poses

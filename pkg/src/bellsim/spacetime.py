"""Flat 1+1D kinematics: intervals, signal reception, stage schedules.

Observers sit at fixed positions (no boosts), so lab-frame coordinates are
shared and only signal travel time reorders what each observer sees.  Units
default to c = 1 with positions in light-seconds and times in seconds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import InvalidScheduleError

TOL = 1e-12

#: Label of the shared prepared-state proposition.
PREPARED_SYMBOL = "ψ0"


def setting_symbol(observer: str) -> str:
    return "θ" + observer.lower()


def outcome_symbol(observer: str) -> str:
    return "±" + observer.lower()


class IntervalKind(Enum):
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"
    SPACELIKE = "spacelike"


# -- event payloads ----------------------------------------------------------


@dataclass(frozen=True)
class StatePreparation:
    label: str = PREPARED_SYMBOL

    def propositions(self):
        return ((self.label, self.label),)


@dataclass(frozen=True)
class SettingChoice:
    observer: str
    value: Any

    def propositions(self):
        return ((setting_symbol(self.observer), self.value),)


@dataclass(frozen=True)
class Detection:
    observer: str
    value: int

    def propositions(self):
        return ((outcome_symbol(self.observer), self.value),)


@dataclass(frozen=True)
class Message:
    sender: str
    recipient: str
    body: Any  # a SettingChoice or Detection being reported

    def propositions(self):
        return self.body.propositions()


_event_counter = itertools.count()


@dataclass(frozen=True)
class SpacetimeEvent:
    """A lab-frame event whose influence propagates at ``speed`` (<= c)."""

    t: float
    x: float
    payload: Any
    speed: float = 1.0
    index: int = field(default_factory=lambda: next(_event_counter))

    def __post_init__(self):
        if not self.speed > 0.0:
            raise ValueError("emission speed must be positive")


@dataclass(frozen=True)
class Worldline:
    """A stationary observer's trajectory: a fixed position."""

    observer: str
    x: float


def interval(e1: SpacetimeEvent, e2: SpacetimeEvent, c: float = 1.0) -> IntervalKind:
    """Classify the separation by the sign of ``(c dt)^2 - dx^2``."""
    dt2 = (c * (e2.t - e1.t)) ** 2
    dx2 = (e2.x - e1.x) ** 2
    s2 = dt2 - dx2
    scale = max(dt2, dx2, 1.0)
    if abs(s2) < TOL * scale:
        return IntervalKind.LIGHTLIKE
    return IntervalKind.TIMELIKE if s2 > 0.0 else IntervalKind.SPACELIKE


def reception_time(event: SpacetimeEvent, worldline: Worldline) -> float:
    """Earliest time the event's signal reaches the worldline.

    Events on the observer's own worldline are received at emission time.
    """
    return event.t + abs(event.x - worldline.x) / event.speed


def reception_order(worldline: Worldline, events) -> list:
    """Events sorted by reception time; ties broken by global event index."""
    return sorted(events, key=lambda e: (reception_time(e, worldline), e.index))


# -- the experiment's stage schedule ------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Validated timing and geometry for one run.

    ``t_communication`` is when the exchanged reports have *arrived*; the
    wing-to-wing messages are emitted early enough (at ``message_emit_time``)
    for their reception to complete exactly then.
    """

    worldline_a: Worldline
    worldline_b: Worldline
    t_prepare: float
    t_setting: float
    t_detection: float
    t_communication: float
    signal_speed: float = 1.0
    c: float = 1.0
    source_x: float = 0.0

    @property
    def distance(self) -> float:
        return abs(self.worldline_a.x - self.worldline_b.x)

    @property
    def message_emit_time(self) -> float:
        return self.t_communication - self.distance / self.signal_speed

    def worldline(self, observer: str) -> Worldline:
        if observer == self.worldline_a.observer:
            return self.worldline_a
        if observer == self.worldline_b.observer:
            return self.worldline_b
        raise KeyError(observer)

    def trial_events(self, theta_a, theta_b, outcome_a, outcome_b):
        """The nine concrete events of one trial, indexed in creation order."""
        a, b = self.worldline_a, self.worldline_b
        emit = self.message_emit_time
        plan = [
            (self.t_prepare, self.source_x, StatePreparation(), self.c),
            (self.t_setting, a.x, SettingChoice(a.observer, theta_a), self.c),
            (self.t_setting, b.x, SettingChoice(b.observer, theta_b), self.c),
            (self.t_detection, a.x, Detection(a.observer, outcome_a), self.c),
            (self.t_detection, b.x, Detection(b.observer, outcome_b), self.c),
            (emit, a.x, Message(a.observer, b.observer, SettingChoice(a.observer, theta_a)), self.signal_speed),
            (emit, a.x, Message(a.observer, b.observer, Detection(a.observer, outcome_a)), self.signal_speed),
            (emit, b.x, Message(b.observer, a.observer, SettingChoice(b.observer, theta_b)), self.signal_speed),
            (emit, b.x, Message(b.observer, a.observer, Detection(b.observer, outcome_b)), self.signal_speed),
        ]
        return tuple(
            SpacetimeEvent(t, x, payload, speed, index=i)
            for i, (t, x, payload, speed) in enumerate(plan)
        )

    def events_for(self, observer: str, events):
        """The events this observer actually receives, in reception order."""
        w = self.worldline(observer)
        mine = []
        for e in events:
            p = e.payload
            if isinstance(p, (SettingChoice, Detection)) and p.observer == observer:
                mine.append(e)
            elif isinstance(p, Message) and p.recipient == observer:
                mine.append(e)
        return reception_order(w, mine)

    def data_reception_times(self, observer: str) -> dict:
        """When each of the four data propositions becomes known locally."""
        own = observer
        other = self.worldline_b.observer if own == self.worldline_a.observer else self.worldline_a.observer
        arrive = self.message_emit_time + self.distance / self.signal_speed
        return {
            setting_symbol(own): self.t_setting,
            outcome_symbol(own): self.t_detection,
            setting_symbol(other): arrive,
            outcome_symbol(other): arrive,
        }


def build_schedule(
    *,
    position_a: float = -1.0,
    position_b: float = 1.0,
    source_x: float = 0.0,
    t_prepare: float = 0.0,
    t_setting: float = 0.1,
    t_detection: float = 0.2,
    t_communication: float = 2.3,
    signal_speed: float = 1.0,
    c: float = 1.0,
    observer_a: str = "A",
    observer_b: str = "B",
) -> Schedule:
    """Validate timing and geometry, or raise :class:`InvalidScheduleError`.

    Requires strictly increasing stage times, distinct worldlines, messages
    emittable no earlier than detection, and space-like separation between
    each wing's measurement process and the other wing's.
    """
    if position_a == position_b:
        raise InvalidScheduleError("observer worldlines must be distinct")
    if not (0.0 < signal_speed <= c):
        raise InvalidScheduleError(f"signal speed must lie in (0, c]; got {signal_speed}")
    times = (t_prepare, t_setting, t_detection, t_communication)
    if not (times[0] < times[1] < times[2] < times[3]):
        raise InvalidScheduleError(
            f"stage times must increase strictly; got {times}"
        )
    schedule = Schedule(
        Worldline(observer_a, position_a),
        Worldline(observer_b, position_b),
        t_prepare,
        t_setting,
        t_detection,
        t_communication,
        signal_speed,
        c,
        source_x,
    )
    if schedule.message_emit_time < t_detection - TOL:
        raise InvalidScheduleError(
            "communication completes too early: reports would have to be sent "
            f"at t={schedule.message_emit_time} before detection at t={t_detection}"
        )
    # both wings' choice and detection events must be space-like separated
    probes = {
        "setting A": SpacetimeEvent(t_setting, position_a, None, c, index=-1),
        "detection A": SpacetimeEvent(t_detection, position_a, None, c, index=-2),
        "setting B": SpacetimeEvent(t_setting, position_b, None, c, index=-3),
        "detection B": SpacetimeEvent(t_detection, position_b, None, c, index=-4),
    }
    for na, nb in (("setting A", "setting B"), ("setting A", "detection B"),
                   ("detection A", "setting B"), ("detection A", "detection B")):
        kind = interval(probes[na], probes[nb], c=c)
        if kind is not IntervalKind.SPACELIKE:
            raise InvalidScheduleError(
                f"{na} and {nb} are {kind.value}, not space-like separated"
            )
    return schedule

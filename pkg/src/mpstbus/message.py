"""Messages, read patterns and the selective-receive match rule."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

from .errors import ControlLabel, DataLabel, EmptyReceivers, NotSubset
from .roleset import RoleSet


class Label(enum.Enum):
    MSG = "MSG"
    BRANCH = "BRANCH"
    KEEP = "KEEP"
    KILL = "KILL"

    @property
    def is_control(self) -> bool:
        return self in (Label.KEEP, Label.KILL)


def is_control(label: Label) -> bool:
    return label.is_control


@dataclass(eq=False)
class Message:
    """One queued entry of a board.

    ``payload`` is ``bytes`` for MSG, ``str`` for BRANCH and a ``BoardRef``
    for KEEP/KILL. ``receivers`` doubles as the yet-to-read set for data
    messages. ``seq`` is per destination board; ``uid`` is runtime-global and
    orders writes by commit time. A KEEP's ``stop`` is the board holding the
    KILL installed by the same link.
    """

    label: Label
    sender: int | None
    receivers: RoleSet
    payload: Any
    seq: int = -1
    uid: int = -1
    stop: Any = None

    def render(self) -> str:
        if self.label.is_control:
            return f"[{self.label.value}] [:{self.receivers}] board#{self.payload.board.id}"
        body = self.payload.hex() if isinstance(self.payload, bytes) else self.payload
        return f"[{self.label.value}] [{self.sender}:{self.receivers}] {body}"

    __str__ = render


@dataclass(frozen=True)
class Pattern:
    label: Label
    sender: int
    receivers: RoleSet

    def __post_init__(self):
        if self.label.is_control:
            raise ControlLabel("patterns carry data labels only")
        if not self.receivers:
            raise EmptyReceivers("pattern receivers must be nonempty")


def matches(msg: Message, pat: Pattern) -> bool:
    if msg.label.is_control:
        raise ControlLabel("use matches_ctl for KEEP/KILL")
    return (msg.label is pat.label and msg.sender == pat.sender
            and pat.receivers <= msg.receivers)


def matches_ctl(msg: Message, pat: Pattern) -> bool:
    # label and sender of the pattern are ignored for control messages
    if not msg.label.is_control:
        raise DataLabel("use matches for MSG/BRANCH")
    return pat.receivers <= msg.receivers


def mark_read(msg: Message, read_roles: RoleSet) -> tuple[Message, bool]:
    """Remove ``read_roles`` from the receivers; report whether none remain."""
    if msg.label.is_control:
        raise ControlLabel("KEEP/KILL are not subject to mark-as-read")
    if not read_roles <= msg.receivers:
        raise NotSubset(f"{read_roles} not among receivers {msg.receivers}")
    msg.receivers = msg.receivers - read_roles
    return msg, not msg.receivers

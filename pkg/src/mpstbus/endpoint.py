"""Party-facing endpoints and the high-level session API."""
from __future__ import annotations

from . import events as ev
from .board import BoardRef, Runtime, default_runtime
from .errors import (AlreadyClosed, BadPartition, Closed, EmptyReceivers, NotPlayed,
                     RoleOutOfRange, SelfReceive, SelfSend)
from .message import Label, Pattern
from .roleset import RoleSet


class Endpoint:
    """A ``(full roles, played roles, board reference)`` capability.

    Single-owner: one thread uses an endpoint at a time, but it may be handed
    to another thread. The blocking receive operations accept ``block=False``
    to perform a single read pass and return ``None`` when nothing matches.
    """

    def __init__(self, full: RoleSet, played: RoleSet, ref: BoardRef, name: str | None = None):
        if not played or not played <= full:
            raise BadPartition(f"played {played} must be a nonempty subset of {full}")
        self.full = full
        self.played = played
        self.ref = ref
        self.name = name
        self.closed = False
        with ref.board.runtime.lock:
            ref.board.runtime.live_endpoints += 1

    @property
    def board(self):
        return self.ref.board

    @property
    def runtime(self) -> Runtime:
        return self.ref.board.runtime

    def __repr__(self) -> str:
        state = "closed" if self.closed else f"board#{self.ref.id}"
        return f"Endpoint({self.name or ''}{self.full}, {self.played}, {state})"

    def _open(self) -> None:
        if self.closed:
            raise Closed(f"{self!r} is closed")

    def _plays(self, role: int) -> None:
        if role not in self.played:
            raise NotPlayed(f"role {role} is not played by {self!r}")

    def _other(self, role: int) -> None:
        if role not in self.full:
            raise RoleOutOfRange(f"role {role} outside {self.full}")
        if role in self.played:
            raise SelfReceive(f"role {role} is played by this endpoint")

    def _who(self) -> str:
        return self.name or str(self.played)

    # -- point to point ------------------------------------------------------

    def send(self, from_: int, to: int, data: bytes) -> None:
        self._open()
        self._plays(from_)
        if to not in self.full:
            raise RoleOutOfRange(f"role {to} outside {self.full}")
        if to in self.played:
            raise SelfSend(f"{from_} -> {to} stays inside one endpoint")
        self.runtime.write(self.ref, Label.MSG, from_, RoleSet((to,)), bytes(data))

    def recv(self, from_: int, me: int, *, block: bool = True) -> bytes | None:
        self._open()
        self._plays(me)
        self._other(from_)
        return self._read(Pattern(Label.MSG, from_, RoleSet((me,))), block)

    # -- broadcast -------------------------------------------------------------

    def _broadcast(self, label: Label, from_: int, payload) -> None:
        self._open()
        self._plays(from_)
        receivers = self.full - self.played
        if not receivers:
            raise EmptyReceivers(f"{self!r} plays every role; nobody can receive")
        self.runtime.write(self.ref, label, from_, receivers, payload)

    def bsend(self, from_: int, data: bytes) -> None:
        self._broadcast(Label.MSG, from_, bytes(data))

    def brecv(self, from_: int, *, block: bool = True) -> bytes | None:
        self._open()
        self._other(from_)
        return self._read(Pattern(Label.MSG, from_, self.played), block)

    def choose(self, from_: int, tag: str) -> None:
        self._broadcast(Label.BRANCH, from_, str(tag))

    def offer(self, from_: int, *, block: bool = True) -> str | None:
        self._open()
        self._other(from_)
        return self._read(Pattern(Label.BRANCH, from_, self.played), block)

    def _read(self, pat: Pattern, block: bool):
        rt = self.runtime
        if block:
            return rt.read(self.ref, pat, who=self._who())
        return rt.try_read(self.ref, pat, who=self._who())

    # -- lifecycle -------------------------------------------------------------

    def close(self) -> None:
        if self.closed:
            raise AlreadyClosed(f"{self!r} already closed")
        rt = self.runtime
        with rt.lock:
            rt.emit(ev.CloseEv(self.ref.id, self.played))
            self._consume()

    def _consume(self) -> None:
        """Mark closed and drop the board reference (caller holds the lock)."""
        rt = self.runtime
        self.closed = True
        rt.live_endpoints -= 1
        rt.release(self.ref)


def session_new(full: RoleSet, parts: list[RoleSet], runtime: Runtime | None = None,
                names: list[str] | None = None) -> list[Endpoint]:
    """Allocate one board and hand out one endpoint per part of ``full``."""
    seen = RoleSet()
    for p in parts:
        if not p:
            raise BadPartition("empty part")
        if p & seen:
            raise BadPartition(f"part {p} overlaps {seen & p}")
        seen = seen | p
    if seen != full:
        raise BadPartition(f"parts cover {seen}, not {full}")
    rt = runtime or default_runtime()
    with rt.lock:
        ref = rt.board_new(full)
        eps = [Endpoint(full, p, ref.retain(), None if names is None else names[i])
               for i, p in enumerate(parts)]
        rt.emit(ev.SessionEv(ref.id, tuple(parts)))
        rt.release(ref)
    return eps

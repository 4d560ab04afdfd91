"""Structured runtime events.

The runtime appends one event per committed atomic section, under its lock,
so the event list is the commit linearization. ``line()`` renders the
tab-separated trace form.
"""
from __future__ import annotations

from dataclasses import dataclass

from .roleset import RoleSet


def _fmt(*fields: str) -> str:
    return "\t".join(fields)


@dataclass(frozen=True)
class BoardNewEv:
    board: int
    full: RoleSet

    def line(self) -> str:
        return _fmt("NEW", f"board={self.board}", f"full={self.full}")


@dataclass(frozen=True)
class WriteEv:
    home: int
    board: int
    seq: int
    uid: int
    label: str
    sender: int
    receivers: RoleSet
    payload: bytes | str
    redirects: int

    def line(self) -> str:
        return _fmt("WRITE", f"board={self.board}", f"seq={self.seq}", f"label={self.label}",
                    f"from={self.sender}", f"to={self.receivers}")


@dataclass(frozen=True)
class ReadEv:
    home: int
    board: int
    seq: int
    uid: int
    label: str
    sender: int
    by: RoleSet
    payload: bytes | str
    redirects: int
    keep_follows: int
    visited: int
    who: str | None = None

    def line(self) -> str:
        return _fmt("READ", f"board={self.board}", f"seq={self.seq}", f"by={self.by}",
                    f"redirects={self.redirects}")


@dataclass(frozen=True)
class LinkMsgEv:
    board: int
    kind: str
    receivers: RoleSet
    ref: int

    def line(self) -> str:
        return _fmt("LINKMSG", f"board={self.board}", f"kind={self.kind}",
                    f"to={self.receivers}", f"ref={self.ref}")


@dataclass(frozen=True)
class LinkEv:
    keep: int
    kill: int
    keep_played: RoleSet
    kill_played: RoleSet
    residual: RoleSet

    def line(self) -> str:
        return _fmt("LINK", f"keep={self.keep}", f"kill={self.kill}", f"residual={self.residual}")


@dataclass(frozen=True)
class FreeEv:
    board: int

    def line(self) -> str:
        return _fmt("FREE", f"board={self.board}")


@dataclass(frozen=True)
class SessionEv:
    board: int
    parts: tuple[RoleSet, ...]

    def line(self) -> str:
        return _fmt("SESSION", f"board={self.board}", "parts=" + "|".join(map(str, self.parts)))


@dataclass(frozen=True)
class CloseEv:
    board: int
    played: RoleSet

    def line(self) -> str:
        return _fmt("CLOSE", f"board={self.board}", f"played={self.played}")

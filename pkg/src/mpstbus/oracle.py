"""Flat-merge reference model.

Every cluster of linked boards is modelled as one plain queue with no
KEEP/KILL at all; a link simply concatenates the kill side's pending
messages after the keep side's. Replaying the runtime's commit log through
this model must reproduce every delivery the runtime made.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import events as ev
from .errors import IllTyped
from .message import Label, Message, Pattern, mark_read, matches
from .roleset import RoleSet


@dataclass
class FlatSession:
    full: RoleSet
    queue: list[Message] = field(default_factory=list)
    members: list[RoleSet] = field(default_factory=list)
    boards: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class Delivery:
    reader: str
    sender: int
    payload: bytes | str
    uid: int
    idx: int

    def line(self) -> str:
        body = self.payload.hex() if isinstance(self.payload, bytes) else self.payload
        return f"DELIVER reader={self.reader} from={self.sender} payload={body} idx={self.idx}"


class Oracle:
    def __init__(self):
        self.sessions: dict[int, FlatSession] = {}
        self.deliveries: list[Delivery] = []
        self.mismatches: list[str] = []
        self._counts: dict[tuple[str, int], int] = {}

    def _of(self, board: int) -> FlatSession:
        return self.sessions[board]

    def step(self, e) -> Delivery | None:
        """Apply one runtime event; return the delivery for reads."""
        if isinstance(e, ev.BoardNewEv):
            s = FlatSession(e.full, boards={e.board})
            self.sessions[e.board] = s
        elif isinstance(e, ev.SessionEv):
            s = self._of(e.board)
            s.members.extend(e.parts)
            self._check_partition(s, e)
        elif isinstance(e, ev.CloseEv):
            s = self._of(e.board)
            self._drop_member(s, e.played, e)
        elif isinstance(e, ev.WriteEv):
            msg = Message(Label(e.label), e.sender, e.receivers, e.payload, uid=e.uid)
            self._of(e.home).queue.append(msg)
        elif isinstance(e, ev.ReadEv):
            return self._read(e)
        elif isinstance(e, ev.LinkEv):
            self._link(e)
        return None

    def replay(self, events) -> list[Delivery]:
        for e in events:
            self.step(e)
        return self.deliveries

    def _read(self, e: ev.ReadEv) -> Delivery | None:
        s = self._of(e.home)
        pat = Pattern(Label(e.label), e.sender, e.by)
        for i, m in enumerate(s.queue):
            if matches(m, pat):
                _, empty = mark_read(m, pat.receivers)
                if empty:
                    del s.queue[i]
                if m.uid != e.uid:
                    self.mismatches.append(
                        f"read by {e.by} from {e.sender}: runtime delivered uid {e.uid}, "
                        f"oracle expects uid {m.uid}")
                reader = e.who or str(e.by)
                key = (reader, e.sender)
                idx = self._counts.get(key, 0)
                self._counts[key] = idx + 1
                d = Delivery(reader, e.sender, m.payload, m.uid, idx)
                self.deliveries.append(d)
                return d
        self.mismatches.append(f"read by {e.by} from {e.sender} (uid {e.uid}): "
                               "no matching message in the flat model")
        return None

    def _link(self, e: ev.LinkEv) -> None:
        keep, kill = self._of(e.keep), self._of(e.kill)
        senders_k = {m.sender for m in keep.queue}
        senders_d = {m.sender for m in kill.queue}
        if senders_k & senders_d:
            raise IllTyped(f"link {e.keep}<-{e.kill}: shared pending senders "
                           f"{sorted(senders_k & senders_d)}")
        self._drop_member(keep, e.keep_played, e)
        self._drop_member(kill, e.kill_played, e)
        keep.queue.extend(kill.queue)
        keep.members.extend(kill.members)
        keep.boards |= kill.boards
        for b in kill.boards:
            self.sessions[b] = keep
        if e.residual:
            keep.members.append(e.residual)
        self._check_partition(keep, e)

    def _drop_member(self, s: FlatSession, played: RoleSet, e) -> None:
        if played in s.members:
            s.members.remove(played)
        else:
            self.mismatches.append(f"{e.line()}: no live member plays {played}")

    def _check_partition(self, s: FlatSession, e) -> None:
        seen = RoleSet()
        for p in s.members:
            if p & seen:
                self.mismatches.append(f"{e.line()}: played sets overlap on {p & seen}")
            seen = seen | p

    def delivery_log(self) -> list[str]:
        return [d.line() for d in self.deliveries]


def oracle_step(oracle: Oracle, event) -> Delivery | None:
    return oracle.step(event)

"""The blackboard: an unbounded, order-preserving message queue.

All boards of one :class:`Runtime` share a single reentrant lock, so every
write (redirect walk plus append), every read pass (including recursion into
linked boards) and every link is one atomic section. Blocked readers wait on
the condition of their board's wake group; linking merges wake groups so a
write anywhere in a linked cluster wakes every reader of the cluster.
"""
from __future__ import annotations

import logging
import random
import threading
from dataclasses import dataclass, fields
from typing import Callable

from . import events as ev
from .errors import (Aborted, ArityTooSmall, BoardClosed, ControlLabel, EmptyReceivers,
                     InvariantViolation, MpstError, RoleOutOfRange, SelfReceive)
from .message import Label, Message, Pattern, mark_read, matches, matches_ctl
from .roleset import RoleSet

log = logging.getLogger(__name__)

# drain:  keep the board whose cluster still holds data when only one does,
#         otherwise the lower id
# lowest: always keep the lower id
# random: seeded coin flip
LINK_POLICIES = ("drain", "lowest", "random")


@dataclass
class Stats:
    boards_allocated: int = 0
    boards_freed: int = 0
    writes: int = 0
    reads: int = 0
    read_passes: int = 0
    write_redirects: int = 0
    read_redirects: int = 0
    keep_follows: int = 0
    keeps_deleted: int = 0
    guard_suppressed: int = 0
    max_pass_boards: int = 0
    links: int = 0
    live_ctl_refs: int = 0
    cluster_sweeps: int = 0

    @property
    def redirects(self) -> int:
        return self.write_redirects + self.read_redirects

    def as_dict(self) -> dict[str, int]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["redirects"] = self.redirects
        return d


class WakeGroup:
    """Union-find node; the root owns the condition and the cluster's boards."""

    def __init__(self, lock):
        self.cond = threading.Condition(lock)
        self.parent: WakeGroup | None = None
        self.boards: set[Board] = set()

    def root(self) -> WakeGroup:
        g = self
        while g.parent is not None:
            g = g.parent
        return g


class Board:
    def __init__(self, runtime: Runtime, board_id: int, full: RoleSet):
        self.runtime = runtime
        self.id = board_id
        self.full = full
        self.queue: list[Message] = []
        self.refcount = 0
        self.ext_refs = 0
        self.next_seq = 0
        self.freed = False
        self.wake = WakeGroup(runtime.lock)
        self.wake.boards.add(self)

    def cluster(self) -> set[Board]:
        return self.wake.root().boards

    def ends_with_kill(self) -> bool:
        return bool(self.queue) and self.queue[-1].label is Label.KILL

    def render(self) -> list[str]:
        return [m.render() for m in self.queue]

    def __repr__(self) -> str:
        return f"Board#{self.id}(refcount={self.refcount}, queue={self.render()})"


class BoardRef:
    """One counted reference to a board.

    ``external`` refs are held by endpoints; the others live in KEEP/KILL
    payloads. Releasing the last reference frees the board.
    """

    __slots__ = ("board", "external", "released")

    def __init__(self, board: Board, external: bool):
        self.board = board
        self.external = external
        self.released = False

    @property
    def id(self) -> int:
        return self.board.id

    @property
    def full(self) -> RoleSet:
        return self.board.full

    def retain(self, external: bool = True) -> BoardRef:
        return self.board.runtime.retain(self, external=external)

    def release(self) -> None:
        self.board.runtime.release(self)

    def __repr__(self) -> str:
        state = "released" if self.released else "live"
        return f"BoardRef(board#{self.board.id}, {state})"


class _Pass:
    __slots__ = ("visited", "redirects", "keep_follows")

    def __init__(self, home: Board):
        self.visited = {home.id}
        self.redirects = 0
        self.keep_follows = 0


class Runtime:
    """Owner of boards, the shared lock, stats and the event log.

    Set ``audit=True`` to walk every live board after each committed
    operation and raise :class:`InvariantViolation` on the first breach.
    """

    def __init__(self, *, audit: bool = False, link_policy: str = "drain",
                 seed: int | None = None, on_event: Callable[[object], None] | None = None):
        if link_policy not in LINK_POLICIES:
            raise ValueError(f"link_policy must be one of {LINK_POLICIES}")
        self.lock = threading.RLock()
        self.link_policy = link_policy
        self.rng = random.Random(seed)
        self.audit_enabled = audit
        self.on_event = on_event
        self.stats = Stats()
        self.events: list[object] = []
        self.live: dict[int, Board] = {}
        self.blocked = 0
        self.live_endpoints = 0
        self.audits_run = 0
        self._next_id = 1
        self._next_uid = 0
        self._aborted = False

    # -- bookkeeping -----------------------------------------------------------

    def emit(self, event) -> None:
        self.events.append(event)
        if self.on_event is not None:
            self.on_event(event)

    def trace(self) -> list[str]:
        with self.lock:
            return [e.line() for e in self.events]

    def _commit(self) -> None:
        if self.audit_enabled:
            self.audit()

    def abort(self) -> None:
        """Wake every blocked reader with :class:`Aborted`."""
        with self.lock:
            self._aborted = True
            for b in list(self.live.values()):
                b.wake.root().cond.notify_all()

    # -- allocation and reference counting -------------------------------------

    def board_new(self, full: RoleSet) -> BoardRef:
        if len(full) < 2:
            raise ArityTooSmall(f"a session needs at least two roles, got {full}")
        if full != RoleSet.full(len(full)):
            raise RoleOutOfRange(f"full role set must be contiguous from 0, got {full}")
        with self.lock:
            b = Board(self, self._next_id, full)
            self._next_id += 1
            self.live[b.id] = b
            self.stats.boards_allocated += 1
            ref = self._new_ref(b, external=True)
            self.emit(ev.BoardNewEv(b.id, full))
            self._commit()
            return ref

    def new_ref(self, b: Board) -> BoardRef:
        """A fresh endpoint-held reference to ``b``."""
        with self.lock:
            return self._new_ref(b, external=True)

    def _new_ref(self, b: Board, external: bool) -> BoardRef:
        if b.freed:
            raise BoardClosed(f"board#{b.id} already freed")
        b.refcount += 1
        if external:
            b.ext_refs += 1
        else:
            self.stats.live_ctl_refs += 1
        return BoardRef(b, external)

    def retain(self, ref: BoardRef, external: bool = True) -> BoardRef:
        with self.lock:
            if ref.released:
                raise MpstError("retain of a released reference")
            return self._new_ref(ref.board, external)

    def release(self, ref: BoardRef) -> None:
        with self.lock:
            self._release(ref)
            self._commit()

    def _release(self, ref: BoardRef) -> None:
        if ref.released:
            raise MpstError("double release of a board reference")
        ref.released = True
        b = ref.board
        b.refcount -= 1
        if ref.external:
            b.ext_refs -= 1
        else:
            self.stats.live_ctl_refs -= 1
        if b.refcount == 0:
            self._free([b])
        if ref.external and b.ext_refs == 0:
            self._sweep(b)

    def _sweep(self, b: Board) -> None:
        # KEEP and KILL of one link reference each other, so refcounts alone
        # never reach zero. A cluster whose boards are referenced only from
        # inside the cluster, and not by any endpoint, is unreachable.
        cluster = [x for x in b.cluster() if not x.freed]
        if not cluster or any(x.ext_refs for x in cluster):
            return
        members = set(cluster)
        internal: dict[Board, int] = {}
        for x in cluster:
            for m in x.queue:
                if m.label.is_control and m.payload.board in members:
                    internal[m.payload.board] = internal.get(m.payload.board, 0) + 1
        if all(x.refcount == internal.get(x, 0) for x in cluster):
            self.stats.cluster_sweeps += 1
            self._free(sorted(cluster, key=lambda x: x.id))

    def _free(self, boards: list[Board]) -> None:
        work = list(boards)
        while work:
            b = work.pop(0)
            if b.freed:
                continue
            b.freed = True
            self.stats.boards_freed += 1
            del self.live[b.id]
            b.wake.root().boards.discard(b)
            self.emit(ev.FreeEv(b.id))
            queue, b.queue = b.queue, []
            for m in queue:
                if m.label.is_control:
                    ref = m.payload
                    ref.released = True
                    ref.board.refcount -= 1
                    self.stats.live_ctl_refs -= 1
                    if ref.board.refcount == 0 and not ref.board.freed:
                        work.append(ref.board)
            b.wake.root().cond.notify_all()

    # -- write -------------------------------------------------------------------

    def resolve(self, b: Board) -> tuple[Board, list[Board]]:
        """Follow trailing KILLs from ``b``; return the destination and the path."""
        path = [b]
        while b.ends_with_kill():
            b = b.queue[-1].payload.board
            path.append(b)
        return b, path

    def write(self, ref: BoardRef, label: Label, sender: int, receivers: RoleSet, payload) -> None:
        if label.is_control:
            raise ControlLabel("write takes data labels; KEEP/KILL are installed by link")
        full = ref.full
        if sender not in full or not receivers <= full:
            raise RoleOutOfRange(f"sender {sender} / receivers {receivers} outside {full}")
        if not receivers:
            raise EmptyReceivers("a message needs at least one receiver")
        if sender in receivers:
            raise SelfReceive(f"sender {sender} among receivers {receivers}")
        with self.lock:
            if ref.released or ref.board.freed:
                raise BoardClosed(f"write through a dead reference to board#{ref.board.id}")
            dest, path = self.resolve(ref.board)
            msg = Message(label, sender, receivers, payload, seq=dest.next_seq, uid=self._next_uid)
            dest.next_seq += 1
            self._next_uid += 1
            dest.queue.append(msg)
            self.stats.writes += 1
            self.stats.write_redirects += len(path) - 1
            self.emit(ev.WriteEv(ref.board.id, dest.id, msg.seq, msg.uid, label.value, sender,
                                 receivers, payload, len(path) - 1))
            self._notify(path)
            self._commit()

    def _notify(self, boards) -> None:
        for g in {b.wake.root() for b in boards}:
            g.cond.notify_all()

    # -- read --------------------------------------------------------------------

    def try_read(self, home: BoardRef, pat: Pattern, who: str | None = None):
        """One traversal pass; the payload of the delivered message or ``None``."""
        self._check_pattern(home, pat)
        with self.lock:
            if home.released or home.board.freed:
                raise BoardClosed(f"read through a dead reference to board#{home.board.id}")
            msg = self._try_read(home.board, pat, who)
            self._commit()
            return None if msg is None else msg.payload

    def read(self, home: BoardRef, pat: Pattern, who: str | None = None):
        """Block until a pass succeeds; every wake rescans from the front of ``home``."""
        self._check_pattern(home, pat)
        with self.lock:
            while True:
                if home.released or home.board.freed:
                    raise BoardClosed(f"board#{home.board.id} freed while reading")
                if self._aborted:
                    raise Aborted("runtime aborted")
                msg = self._try_read(home.board, pat, who)
                self._commit()
                if msg is not None:
                    return msg.payload
                g = home.board.wake.root()
                self.blocked += 1
                try:
                    g.cond.wait()
                finally:
                    self.blocked -= 1

    @staticmethod
    def _check_pattern(home: BoardRef, pat: Pattern) -> None:
        full = home.full
        if not pat.receivers <= full or pat.sender not in full:
            raise RoleOutOfRange(f"pattern {pat} outside {full}")

    def _try_read(self, home: Board, pat: Pattern, who: str | None) -> Message | None:
        ctx = _Pass(home)
        self.stats.read_passes += 1
        found = self._scan(home, pat, ctx)
        self.stats.max_pass_boards = max(self.stats.max_pass_boards, len(ctx.visited))
        self.stats.keep_follows += ctx.keep_follows
        self.stats.read_redirects += ctx.redirects
        if found is None:
            return None
        msg, where = found
        self.stats.reads += 1
        self.emit(ev.ReadEv(home.id, where.id, msg.seq, msg.uid, msg.label.value, msg.sender,
                            pat.receivers, msg.payload, ctx.redirects, ctx.keep_follows,
                            len(ctx.visited), who))
        return msg

    def _scan(self, board: Board, pat: Pattern, ctx: _Pass):
        i = 0
        while True:
            q = board.queue
            if i >= len(q):
                return None
            m = q[i]
            if not m.label.is_control:
                if matches(m, pat):
                    _, empty = mark_read(m, pat.receivers)
                    if empty:
                        del q[i]
                    return m, board
                i += 1
            elif m.label is Label.KEEP:
                target = m.payload.board
                if self._drained(target, m.stop, set()):
                    self._delete_keep(board, m)
                    continue
                if not matches_ctl(m, pat):
                    i += 1
                    continue
                if target.id in ctx.visited:
                    self._suppressed(board, target, pat)
                    i += 1
                    continue
                ctx.visited.add(target.id)
                ctx.keep_follows += 1
                found = self._scan(target, pat, ctx)
                i = _index(board.queue, m)
                if self._drained(target, m.stop, set()):
                    self._delete_keep(board, m)
                else:
                    i += 1
                if found is not None:
                    return found
            else:
                target = m.payload.board
                if not matches_ctl(m, pat):
                    return None
                if target.id in ctx.visited:
                    self._suppressed(board, target, pat)
                    return None
                ctx.visited.add(target.id)
                ctx.redirects += 1
                board, i = target, 0

    def _suppressed(self, board: Board, target: Board, pat: Pattern) -> None:
        self.stats.guard_suppressed += 1
        log.warning("cycle guard: board#%d -> board#%d already visited for %s",
                    board.id, target.id, pat)

    def _drained(self, b: Board, stop: Board | None, seen: set[int]) -> bool:
        """True when every board from ``b`` along its KILLs up to ``stop`` holds
        nothing but its KILL, after pruning dead KEEPs inside them."""
        while True:
            if b.id in seen or not b.ends_with_kill():
                return False
            seen.add(b.id)
            q = b.queue
            j = 0
            while j < len(q) - 1:
                m = q[j]
                if m.label is not Label.KEEP:
                    return False
                if self._drained(m.payload.board, m.stop, seen):
                    self._delete_keep(b, m)
                else:
                    j += 1
            if len(q) != 1:
                return False
            if stop is None or b is stop:
                return True
            b = q[0].payload.board

    def _delete_keep(self, board: Board, keep: Message) -> None:
        del board.queue[_index(board.queue, keep)]
        self.stats.keeps_deleted += 1
        self._release(keep.payload)

    # -- linking support -------------------------------------------------------

    def append_control(self, board: Board, label: Label, receivers: RoleSet, target: Board,
                       stop: Board | None = None) -> None:
        """Append a KEEP/KILL carrying a fresh counted reference to ``target``."""
        if board.ends_with_kill():
            raise InvariantViolation(f"board#{board.id} already ends with KILL")
        ref = self._new_ref(target, external=False)
        board.queue.append(Message(label, None, receivers, ref, seq=board.next_seq, stop=stop))
        board.next_seq += 1
        self.emit(ev.LinkMsgEv(board.id, label.value, receivers, target.id))

    def merge_groups(self, a: Board, b: Board) -> None:
        with self.lock:
            ra, rb = a.wake.root(), b.wake.root()
            if ra is not rb:
                rb.parent = ra
                ra.boards |= rb.boards
                rb.boards = set()
            ra.cond.notify_all()
            rb.cond.notify_all()

    def pending_senders(self, b: Board) -> set[int]:
        """Sender roles of queued data messages anywhere in ``b``'s cluster."""
        return {m.sender for x in b.cluster() for m in x.queue if not m.label.is_control}

    # -- audit -------------------------------------------------------------------

    def audit(self) -> None:
        with self.lock:
            self.audits_run += 1
            incoming: dict[int, int] = {}
            for b in self.live.values():
                kills = [i for i, m in enumerate(b.queue) if m.label is Label.KILL]
                if len(kills) > 1 or (kills and kills[0] != len(b.queue) - 1):
                    raise InvariantViolation(f"KILL-last broken on {b!r}", self.trace())
                seqs = [m.seq for m in b.queue]
                if seqs != sorted(seqs):
                    raise InvariantViolation(f"queue order broken on {b!r}", self.trace())
                for m in b.queue:
                    if m.label.is_control:
                        t = m.payload.board
                        if m.payload.released or t.freed:
                            raise InvariantViolation(f"dangling control ref on {b!r}", self.trace())
                        incoming[t.id] = incoming.get(t.id, 0) + 1
                    elif not m.receivers or m.sender in m.receivers:
                        raise InvariantViolation(f"bad data message {m} on {b!r}", self.trace())
            for b in self.live.values():
                if b.refcount != b.ext_refs + incoming.get(b.id, 0) or b.refcount <= 0:
                    raise InvariantViolation(f"refcount mismatch on {b!r}", self.trace())


def _index(queue: list[Message], m: Message) -> int:
    for i, x in enumerate(queue):
        if x is m:
            return i
    raise InvariantViolation("control message vanished during traversal")


_default: Runtime | None = None


def default_runtime() -> Runtime:
    global _default
    if _default is None:
        _default = Runtime()
    return _default


def board_new(full: RoleSet, runtime: Runtime | None = None) -> BoardRef:
    return (runtime or default_runtime()).board_new(full)


def write(b: BoardRef, label: Label, sender: int, receivers: RoleSet, payload) -> None:
    b.board.runtime.write(b, label, sender, receivers, payload)


def try_read(home: BoardRef, pat: Pattern):
    return home.board.runtime.try_read(home, pat)


def read(home: BoardRef, pat: Pattern):
    return home.board.runtime.read(home, pat)


def retain(b: BoardRef) -> BoardRef:
    return b.retain()


def release(b: BoardRef) -> None:
    b.release()

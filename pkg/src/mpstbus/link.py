"""Two-way linking with residual, and three-way linking by composition.

A link drains one board (the *kill* board) into the other (the *keep*
board). The keep board gets a KEEP pointing at the kill board so that readers
still find the kill board's leftover messages; the kill board gets a final
KILL pointing at the keep board so that writes and the kill side's readers
move over. Both carry counted references.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import events as ev
from .board import Board, Runtime
from .endpoint import Endpoint
from .errors import (ArityMismatch, Closed, CoverageViolation, EmptyIntermediateResidual,
                     IllTyped, NotSubset, SameBoard)
from .message import Label
from .roleset import RoleSet, complement


@dataclass
class LinkOutcome:
    residual: Endpoint | None
    keep_board: int
    kill_boards: list[int] = field(default_factory=list)


def keep_receivers(full: RoleSet, keep_played: RoleSet, kill_played: RoleSet) -> RoleSet:
    """Roles outside the link on the keep side, plus the residual roles."""
    if not keep_played <= full or not kill_played <= full:
        raise NotSubset(f"{keep_played} / {kill_played} not within {full}")
    return (full - keep_played) | (keep_played & kill_played)


def kill_receivers(full: RoleSet, kill_played: RoleSet) -> RoleSet:
    return complement(full, kill_played)


def _check_operands(eps: tuple[Endpoint, ...]) -> tuple[Runtime, RoleSet]:
    for e in eps:
        if e.closed:
            raise Closed(f"{e!r} already consumed")
    full = eps[0].full
    for e in eps[1:]:
        if e.full != full:
            raise ArityMismatch(f"{e.full} != {full}")
    rts = {id(e.runtime) for e in eps}
    if len(rts) != 1:
        raise SameBoard("operands belong to different runtimes")
    return eps[0].runtime, full


def _select_keep(rt: Runtime, x: Board, y: Board) -> bool:
    """True when ``x``'s side becomes the keep side (``x``, ``y`` are chain ends)."""
    if rt.link_policy == "random":
        return rt.rng.random() < 0.5
    if rt.link_policy == "drain":
        x_busy, y_busy = bool(rt.pending_senders(x)), bool(rt.pending_senders(y))
        if x_busy != y_busy:
            return x_busy
    return x.id < y.id


def link2(a: Endpoint, b: Endpoint) -> LinkOutcome:
    """Merge the channels of ``a`` and ``b``; both endpoints are consumed.

    Returns the residual endpoint (playing ``a.played & b.played``) or
    ``None`` when the residual is empty.

    An operand's board may already be killed by an earlier link. Writes then
    land at the end of its KILL chain, so KEEP and KILL are appended there,
    but each points at the other operand's own board: that is where the
    messages the consumed endpoint had not yet read begin.
    """
    rt, full = _check_operands((a, b))
    with rt.lock:
        if a.ref.board is b.ref.board:
            raise SameBoard("both endpoints reference the same board")
        ea, _ = rt.resolve(a.board)
        eb, _ = rt.resolve(b.board)
        if ea is eb:
            raise SameBoard(f"both endpoints already lead to board#{ea.id}")
        if a.played | b.played != full:
            raise CoverageViolation(f"{a.played} | {b.played} does not cover {full}")
        shared = rt.pending_senders(ea) & rt.pending_senders(eb)
        if shared:
            raise IllTyped(f"pending messages from roles {sorted(shared)} on both sides")

        keep_ep, kill_ep = (a, b) if _select_keep(rt, ea, eb) else (b, a)
        keep_end, kill_end = (ea, eb) if keep_ep is a else (eb, ea)
        pk, pd = keep_ep.played, kill_ep.played
        residual = pk & pd

        rt.append_control(keep_end, Label.KEEP, keep_receivers(full, pk, pd), kill_ep.board,
                          stop=kill_end)
        rt.append_control(kill_end, Label.KILL, kill_receivers(full, pd), keep_ep.board)
        rt.merge_groups(keep_end, kill_end)
        rt.stats.links += 1
        rt.emit(ev.LinkEv(keep_end.id, kill_end.id, pk, pd, residual))

        res = Endpoint(full, residual, rt.new_ref(keep_ep.board)) if residual else None
        a._consume()
        b._consume()
        return LinkOutcome(res, keep_end.id, [kill_end.id])


def link3(a: Endpoint, b: Endpoint, c: Endpoint) -> LinkOutcome:
    """``link2(a, b)`` followed by linking its residual with ``c``, atomically."""
    rt, full = _check_operands((a, b, c))
    with rt.lock:
        boards = [rt.resolve(e.board)[0] for e in (a, b, c)]
        if len({x.id for x in boards}) != 3:
            raise SameBoard("three-way link needs three distinct channels")
        if a.played | b.played != full:
            raise CoverageViolation(f"{a.played} | {b.played} does not cover {full}")
        mid = a.played & b.played
        if not mid:
            raise EmptyIntermediateResidual(f"{a.played} & {b.played} is empty")
        if mid | c.played != full:
            raise CoverageViolation(f"{mid} | {c.played} does not cover {full}")
        first = link2(a, b)
        second = link2(first.residual, c)
        return LinkOutcome(second.residual, second.keep_board,
                           first.kill_boards + second.kill_boards)

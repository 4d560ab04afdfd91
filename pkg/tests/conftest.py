import pytest

from mpstbus import Label, Runtime, RoleSet, link2, session_new
from mpstbus.roleset import roles


@pytest.fixture
def rt():
    return Runtime(audit=True, link_policy="lowest")


def fig4(rt):
    """Two three-party sessions with pending messages on both boards.

    Board 1 holds two messages from role 0, board 2 one from role 2.
    Returns (p0, linker_a, linker_b, p2) where the linker endpoints play
    {1,2} on board 1 and {0,1} on board 2.
    """
    full = RoleSet.full(3)
    p0, la = session_new(full, [roles(0), roles(1, 2)], rt, names=["p0", "la"])
    lb, p2 = session_new(full, [roles(0, 1), roles(2)], rt, names=["lb", "p2"])
    p0.send(0, 1, b"to-1")
    p0.send(0, 2, b"to-2")
    p2.send(2, 0, b"from-2")
    return p0, la, lb, p2


def fig5(rt):
    p0, la, lb, p2 = fig4(rt)
    out = link2(la, lb)
    return p0, out, p2


def queue_of(board):
    """(label, receivers, target id or payload) triples for a board's queue."""
    out = []
    for m in board.queue:
        if m.label.is_control:
            out.append((m.label, m.receivers, m.payload.board.id))
        else:
            out.append((m.label, m.receivers, m.payload))
    return out


def controls(rt):
    return sum(1 for b in rt.live.values() for m in b.queue if m.label in (Label.KEEP, Label.KILL))

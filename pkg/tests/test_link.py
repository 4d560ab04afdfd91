import itertools

import pytest

from conftest import controls, fig4, fig5, queue_of
from mpstbus import (Label, Oracle, RoleSet, Runtime, keep_receivers, kill_receivers, link2, link3,
                     session_new)
from mpstbus.errors import (ArityMismatch, Closed, CoverageViolation, EmptyIntermediateResidual,
                            IllTyped, NotSubset, SameBoard)
from mpstbus.harness import builtin, run
from mpstbus.harness.fuzz import FuzzConfig, generate
from mpstbus.roleset import roles

F3 = RoleSet.full(3)


def test_fig5_link(rt):
    p0, out, p2 = fig5(rt)
    assert out.keep_board == p0.board.id and out.kill_boards == [p2.board.id]
    assert queue_of(p0.board)[-1] == (Label.KEEP, roles(0, 1), p2.board.id)
    assert queue_of(p2.board)[-1] == (Label.KILL, roles(2), p0.board.id)
    assert out.residual.played == roles(1)
    assert out.residual.board is p0.board


def test_fig1_binary(rt):
    left, a = session_new(RoleSet.full(2), [roles(0), roles(1)], rt)
    b, right = session_new(RoleSet.full(2), [roles(0), roles(1)], rt)
    out = link2(a, b)
    assert out.residual is None
    assert a.closed and b.closed
    left.send(0, 1, b"ping")
    assert right.recv(0, 1) == b"ping"
    right.send(1, 0, b"pong")
    assert left.recv(1, 0) == b"pong"


def test_coverage_violation(rt):
    _, a = session_new(F3, [roles(0), roles(1, 2)], rt)
    _, b = session_new(F3, [roles(0, 1), roles(2)], rt)
    with pytest.raises(CoverageViolation):
        link2(a, b)


def test_fig4_pending_messages(rt):
    p0, out, p2 = fig5(rt)
    r = out.residual
    got = [r.recv(0, 1), p2.recv(0, 2), p0.recv(2, 0)]
    assert got == [b"to-1", b"to-2", b"from-2"]
    oracle = Oracle()
    assert [d.payload for d in oracle.replay(rt.events)] == got
    assert oracle.mismatches == []


def test_link_errors(rt):
    a, b = session_new(F3, [roles(0), roles(1, 2)], rt)
    with pytest.raises(SameBoard):
        link2(a, b)
    _, c = session_new(RoleSet.full(2), [roles(0), roles(1)], rt)
    with pytest.raises(ArityMismatch):
        link2(b, c)
    x0, x = session_new(F3, [roles(0), roles(1, 2)], rt)
    y, y2 = session_new(F3, [roles(0, 1), roles(2)], rt)
    a.send(0, 2, b"pending from 0")
    y.send(0, 2, b"also from 0")
    with pytest.raises(IllTyped):
        link2(b, y)
    x.close()
    with pytest.raises(Closed):
        link2(x, y)


def test_link3_fig3(rt):
    s0, a = session_new(F3, [roles(0), roles(1, 2)], rt)
    s1, b = session_new(F3, [roles(1), roles(0, 2)], rt)
    s2, c = session_new(F3, [roles(2), roles(0, 1)], rt)
    before = controls(rt)
    out = link3(a, b, c)
    assert out.residual is None
    assert len(out.kill_boards) == 2
    assert controls(rt) - before == 4
    keeps = sum(m.label is Label.KEEP for b_ in rt.live.values() for m in b_.queue)
    assert keeps == 2
    s0.bsend(0, b"hi")
    assert s1.brecv(0) == b"hi" and s2.brecv(0) == b"hi"
    s2.send(2, 1, b"2>1")
    assert s1.recv(2, 1) == b"2>1"


def test_link3_needs_intermediate_residual(rt):
    _, a = session_new(F3, [roles(0, 2), roles(1)], rt)
    _, b = session_new(F3, [roles(1), roles(0, 2)], rt)
    _, c = session_new(F3, [roles(2), roles(0, 1)], rt)
    with pytest.raises(EmptyIntermediateResidual):
        link3(a, b, c)
    assert not a.closed and not b.closed and not c.closed


def test_link2_conservation(rt):
    p0, la, lb, p2 = fig4(rt)
    before = controls(rt)
    link2(la, lb)
    assert controls(rt) - before == 2


@pytest.mark.parametrize("full,pk,pd,keep,kill", [
    (F3, roles(1, 2), roles(0, 1), roles(0, 1), roles(2)),
    (RoleSet.full(2), roles(1), roles(0), roles(0), roles(1)),
    (F3, roles(2), roles(0, 1), roles(0, 1), roles(2)),
])
def test_receiver_examples(full, pk, pd, keep, kill):
    assert keep_receivers(full, pk, pd) == keep
    assert kill_receivers(full, pd) == kill


def test_receivers_reject_foreign_roles():
    with pytest.raises(NotSubset):
        keep_receivers(RoleSet.full(2), roles(2), roles(0))
    with pytest.raises(NotSubset):
        kill_receivers(RoleSet.full(2), roles(3))


def _nonempty_subsets(n):
    return [RoleSet(c) for k in range(1, n + 1) for c in itertools.combinations(range(n), k)]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_receiver_laws_exhaustive(n):
    full = RoleSet.full(n)
    checked = 0
    for pk in _nonempty_subsets(n):
        for pd in _nonempty_subsets(n):
            if pk | pd != full:
                continue
            rho = pk & pd
            kr, dr = keep_receivers(full, pk, pd), kill_receivers(full, pd)
            assert kr | (pk - pd) == full
            assert dr | pd == full
            # a reader sent over by the KILL never matches the KEEP unless residual
            assert kr & dr <= rho
            # cross-check against plain sets
            assert set(kr) == (set(range(n)) - set(pk)) | (set(pk) & set(pd))
            checked += 1
    assert checked > 0


def _killed_operand_setup(policy, seed=None):
    """The linking endpoint's board was already killed, with data left on it.

    Returns ``None`` when the keep choice left s0's board alive instead.
    """
    rt = Runtime(audit=True, link_policy=policy, seed=seed)
    s2 = session_new(F3, [roles(0, 2), roles(1)], rt, names=["s2.e0", "s2.e1"])
    s1 = session_new(F3, [roles(0, 1), roles(2)], rt, names=["s1.e0", "s1.e1"])
    s0 = session_new(F3, [roles(0), roles(1), roles(2)], rt, names=["s0.e0", "s0.e1", "s0.e2"])
    s1[1].send(2, 1, b"x from 2")
    s0[0].send(0, 1, b"x from 0")
    link2(s0[2], s1[0])
    if not s0[0].board.ends_with_kill():
        return None
    link2(s0[1], s2[0])
    return rt, s0, s1, s2


def _check_killed_operand(rt, s0, s1, s2):
    reader = s2[1]
    assert reader.recv(0, 1, block=False) == b"x from 0"
    assert reader.recv(2, 1, block=False) == b"x from 2"
    oracle = Oracle()
    oracle.replay(rt.events)
    assert oracle.mismatches == []
    for e in (s0[0], s1[1], reader):
        e.close()
    assert rt.stats.boards_allocated == rt.stats.boards_freed == 3
    assert rt.stats.live_ctl_refs == 0


@pytest.mark.parametrize("policy", ["drain", "lowest"])
def test_link_from_killed_board_keeps_its_messages(policy):
    setup = _killed_operand_setup(policy)
    assert setup is not None
    _check_killed_operand(*setup)


def test_link_from_killed_board_any_keep_choice():
    keep_sides = set()
    for seed in range(40):
        setup = _killed_operand_setup("random", seed)
        if setup is None:
            continue
        rt, s0, s1, s2 = setup
        keep_sides.add(s2[1].board.ends_with_kill())
        _check_killed_operand(*setup)
    assert keep_sides == {True, False}


@pytest.mark.parametrize("name", ["fig5", "game3", "fig3", "queue"])
def test_keep_choice_does_not_change_deliveries(name):
    def seqs(rep):
        out = {}
        for d in rep.deliveries:
            out.setdefault((d.reader, d.sender), []).append(d.payload)
        return out

    base = run(builtin(name), seed=0, link_policy="lowest")
    assert base.ok
    for seed in range(6):
        rep = run(builtin(name), seed=seed, link_policy="random")
        assert rep.ok, rep.summary()
        assert seqs(rep) == seqs(base)


def test_keep_choice_symmetry_on_generated_scenarios():
    import random
    for i in range(40):
        sc = generate(random.Random(f"sym:{i}"), FuzzConfig(arity=3))
        reps = [run(sc, seed=i, link_policy=p) for p in ("lowest", "random", "drain")]
        assert all(r.ok for r in reps), [r.summary() for r in reps]
        logs = [sorted(r.oracle_log) for r in reps]
        assert logs[0] == logs[1] == logs[2]

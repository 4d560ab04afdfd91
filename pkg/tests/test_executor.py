import pytest

from mpstbus.errors import Deadlock, ExpectationFailed, ScriptError
from mpstbus.harness import builtin, parse_scenario, run
from mpstbus.harness.scenarios import BUILTINS


@pytest.mark.parametrize("mode", ["lockstep", "threads"])
@pytest.mark.parametrize("name", sorted(BUILTINS) + ["queue"])
def test_builtins_pass(name, mode):
    for seed in range(3):
        rep = run(builtin(name), seed=seed, mode=mode)
        assert rep.ok, rep.summary()
        st = rep.stats
        assert st["boards_allocated"] == st["boards_freed"]
        assert st["guard_suppressed"] == 0
        assert st["max_pass_boards"] <= st["links"] + 1


def test_game3_counts():
    rep = run(builtin("game3"), seed=0)
    assert rep.stats["boards_freed"] == 2 and rep.stats["links"] == 1
    assert len(rep.deliveries) == 6


def test_queue_ten():
    rep = run(builtin("queue", 10), mode="threads")
    assert rep.ok
    assert [d.payload for d in rep.deliveries] == [b"v0", b"v1", b"v2"]
    assert rep.stats["boards_allocated"] == rep.stats["boards_freed"] == 11


def test_lockstep_is_deterministic():
    for name in ("fig5", "fig3", "queue"):
        a = run(builtin(name), seed=42)
        b = run(builtin(name), seed=42)
        assert a.trace == b.trace and a.oracle_log == b.oracle_log


DEADLOCK = """\
session s full=2 parts={0}|{1}
thread a:
    recv s.e0 1 0
    send s.e0 0 1 "x"
thread b:
    recv s.e1 0 1
    send s.e1 1 0 "y"
"""


def test_deadlock_lockstep():
    rep = run(parse_scenario(DEADLOCK), mode="lockstep")
    assert isinstance(rep.violations[0], Deadlock)
    assert rep.violations[0].trace


def test_deadlock_threads():
    rep = run(parse_scenario(DEADLOCK), mode="threads", timeout=0.3)
    assert isinstance(rep.violations[0], Deadlock)
    assert "blocked readers" in str(rep.violations[0])


def test_expectation_failure():
    sc = parse_scenario('session s full=2 parts={0}|{1}\nthread a:\n    send s.e0 0 1 "x"\n'
                        '    close s.e0\nthread b:\n    recv s.e1 0 1 "y"\n    close s.e1\n')
    for mode in ("lockstep", "threads"):
        rep = run(sc, mode=mode)
        assert any(isinstance(v, ExpectationFailed) for v in rep.violations)


def test_freed_expectation():
    sc = parse_scenario("session s full=2 parts={0}|{1}\nthread a:\n    close s.e0\n"
                        "thread b:\n    close s.e1\nexpect freed=2\n")
    rep = run(sc)
    assert not rep.ok and "boards freed" in str(rep.violations[0])


def test_precondition_error_reported():
    sc = parse_scenario('session s full=3 parts={0}|{1,2}\nthread a:\n    send s.e0 1 2 "x"\n')
    rep = run(sc)
    assert isinstance(rep.violations[0], ScriptError)
    assert "NotPlayed" in str(rep.violations[0])
    with pytest.raises(ScriptError):
        rep.raise_first()


def test_discarding_nonempty_residual_is_an_error():
    sc = parse_scenario("session a full=3 parts={0}|{1,2}\nsession b full=3 parts={0,1}|{2}\n"
                        "thread t:\n    link2 _ = a.e1 b.e0\n")
    rep = run(sc)
    assert isinstance(rep.violations[0], ScriptError)

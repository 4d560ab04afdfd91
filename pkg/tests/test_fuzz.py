import random

from mpstbus.harness import parse_scenario, run
from mpstbus.harness.dsl import validate
from mpstbus.harness.fuzz import FuzzConfig, fuzz, generate, shrink


def test_generation_is_deterministic_and_valid():
    for i in range(30):
        a = generate(random.Random(f"7:{i}"))
        b = generate(random.Random(f"7:{i}"))
        assert a.to_text() == b.to_text()
        validate(a)
        assert parse_scenario(a.to_text()).to_text() == a.to_text()


def test_bounds_respected():
    cfg = FuzzConfig()
    for i in range(200):
        sc = generate(random.Random(f"b:{i}"), cfg)
        assert 2 <= sc.sessions[0].arity <= cfg.max_arity
        assert len(sc.sessions) <= cfg.max_boards
        verbs = [op.verb for t in sc.threads for op in t.ops]
        assert sum(v in ("link2", "link3") for v in verbs) <= cfg.max_links
        assert sum(v in ("send", "bsend", "choose") for v in verbs) <= cfg.max_msgs


def test_small_campaign_clean(tmp_path):
    rep = fuzz(60, seed=5, out_dir=str(tmp_path))
    assert rep.ok, rep.failures[:3]
    assert rep.guard_suppressed == 0 and rep.max_pass_excess <= 0
    assert rep.counterexample is None and not list(tmp_path.iterdir())


def test_binary_runs_never_follow_keep():
    rep = fuzz(80, seed=2, cfg=FuzzConfig(arity=2), out_dir=None)
    assert rep.ok
    assert set(rep.runs_by_arity) == {2}
    assert rep.keep_follows_by_arity[2] == 0
    assert rep.links > 0


def test_replay_is_byte_identical():
    sc = generate(random.Random("3:11"), FuzzConfig(arity=4))
    a, b = run(sc, seed=99), run(sc, seed=99)
    assert "\n".join(a.trace) == "\n".join(b.trace)


def test_shrink_keeps_failure():
    sc = parse_scenario('session s full=2 parts={0}|{1}\n'
                        'thread a:\n    send s.e0 0 1 "x"\n    send s.e0 0 1 "y"\n    close s.e0\n'
                        'thread b:\n    recv s.e1 0 1 "x"\n    recv s.e1 0 1 "z"\n    close s.e1\n')

    def fails(c):
        return any("got" in str(v) for v in run(c).violations)

    assert fails(sc)
    small = shrink(sc, fails)
    assert fails(small)
    assert small.op_count() < sc.op_count()


def test_counterexample_written(tmp_path, monkeypatch):
    from mpstbus.harness import fuzz as fz

    real_run = fz.run

    def broken(sc, seed=0, mode="lockstep", **kw):
        rep = real_run(sc, seed=seed, mode=mode, **kw)
        from mpstbus.errors import OracleMismatch
        if rep.deliveries:
            rep.violations.append(OracleMismatch("injected"))
        return rep

    monkeypatch.setattr(fz, "run", broken)
    rep = fz.fuzz(5, seed=1, modes=("lockstep",), out_dir=str(tmp_path))
    assert not rep.ok and rep.counterexample
    text = open(rep.counterexample).read()
    assert text.startswith("# fuzz-1-")
    assert "--seed" in text
    parse_scenario(text)

import pytest

from mpstbus.errors import DSLSyntaxError
from mpstbus.harness import parse_scenario
from mpstbus.harness.scenarios import BUILTINS, builtin, queue_text
from mpstbus.roleset import roles


def test_session_line():
    sc = parse_scenario("session s full=3 parts={0}|{1,2}\n")
    (s,) = sc.sessions
    assert s.arity == 3 and s.parts == [roles(0), roles(1, 2)]
    assert s.endpoint_names() == ["s.e0", "s.e1"]


def test_link_binding():
    sc = parse_scenario(
        "session s1 full=3 parts={0}|{1,2}\n"
        "session s2 full=3 parts={0,1}|{2}\n"
        "thread t:\n"
        "    link2 r = s1.e1 s2.e0\n"
        "    recv r 0 1 \"x\"  # trailing comment\n"
        "    close r\n")
    ops = sc.threads[0].ops
    assert ops[0].verb == "link2" and ops[0].args == ("r", "=", "s1.e1", "s2.e0")
    assert ops[1].args == ("r", 0, 1) and ops[1].expect == "x"


def test_misspelled_verb_position():
    text = "session s full=2 parts={0}|{1}\nthread t:\n    sned s.e0 0 1 \"x\"\n"
    with pytest.raises(DSLSyntaxError) as info:
        parse_scenario(text)
    assert info.value.line == 3 and info.value.col == 5
    assert isinstance(info.value, SyntaxError)


@pytest.mark.parametrize("text,line", [
    ("session s full=1 parts={0}\n", 1),
    ("session s full=3 parts={0}|{0,1,2}\n", 1),
    ("session s full=2 parts={0}|{1}\nthread t:\n    send s.e0 0 x \"p\"\n", 3),
    ("session s full=2 parts={0}|{1}\nthread t:\n    send s.e0 0 1 p\n", 3),
    ("send a 0 1 \"x\"\n", 1),
    ("bogus\n", 1),
    ("expect freed=lots\n", 1),
    ("thread t\n", 1),
])
def test_syntax_errors(text, line):
    with pytest.raises(DSLSyntaxError) as info:
        parse_scenario(text)
    assert info.value.line == line


@pytest.mark.parametrize("body", [
    "thread t:\n    recv r 0 1\n",
    "thread t:\n    close s.e0\nthread u:\n    close s.e0\n",
    "thread t:\n    close s.e0\n    close s.e0\n",
    "thread t:\n    link2 r = s.e0 s.e1\n    link2 r = s.e0 s.e1\n",
])
def test_binding_discipline(body):
    with pytest.raises(DSLSyntaxError):
        parse_scenario("session s full=2 parts={0}|{1}\n" + body)


def test_hash_inside_string_is_payload():
    sc = parse_scenario("session s full=2 parts={0}|{1}\nthread t:\n    send s.e0 0 1 \"a#b\"\n")
    assert sc.threads[0].ops[0].args[3] == "a#b"


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_round_trip(name):
    sc = builtin(name)
    again = parse_scenario(sc.to_text(), name=name)
    assert again.to_text() == sc.to_text()
    assert again.op_count() == sc.op_count()


def test_queue_text():
    sc = builtin("queue", 3)
    assert len(sc.sessions) == 4 and sc.expect_freed == 4
    assert "cell3" in queue_text(3)
    with pytest.raises(ValueError):
        queue_text(-1)
    with pytest.raises(KeyError):
        builtin("nope")

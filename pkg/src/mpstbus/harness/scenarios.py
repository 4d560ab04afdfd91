"""Built-in scenarios, written in the scenario language."""
from __future__ import annotations

from .dsl import Scenario, parse_scenario

FIG1 = """\
# binary two-way link: the middle thread disappears
session a full=2 parts={0}|{1}
session b full=2 parts={0}|{1}
thread left:
    send a.e0 0 1 "ping"
    recv a.e0 1 0 "pong"
    close a.e0
thread middle:
    link2 _ = a.e1 b.e0
thread right:
    recv b.e1 0 1 "ping"
    send b.e1 1 0 "pong"
    close b.e1
expect freed=2
"""

FIG5 = """\
# pending messages on both boards, then a link with residual {1}
session b1 full=3 parts={0}|{1,2}
session b2 full=3 parts={0,1}|{2}
thread p0:
    send b1.e0 0 1 "to-1"
    send b1.e0 0 2 "to-2"
    choose b1.e0 0 "ready"
    recv b1.e0 2 0 "from-2"
    close b1.e0
thread p2:
    send b2.e1 2 0 "from-2"
    choose b2.e1 2 "ready"
    recv b2.e1 0 2 "to-2"
    close b2.e1
thread linker:
    offer b1.e1 0 "ready"
    offer b2.e0 2 "ready"
    link2 r = b1.e1 b2.e0
    recv r 0 1 "to-1"
    close r
expect freed=2
"""

GAME3 = """\
# player 1 starts a three-player game by linking with residual {1}
session s1 full=3 parts={0}|{1,2}
session s2 full=3 parts={0,1}|{2}
thread p0:
    bsend s1.e0 0 "hello from 0"
    brecv s1.e0 1 "hello from 1"
    brecv s1.e0 2 "hello from 2"
    close s1.e0
thread p1:
    link2 r = s1.e1 s2.e0
    bsend r 1 "hello from 1"
    brecv r 0 "hello from 0"
    brecv r 2 "hello from 2"
    close r
thread p2:
    bsend s2.e1 2 "hello from 2"
    brecv s2.e1 0 "hello from 0"
    brecv s2.e1 1 "hello from 1"
    close s2.e1
expect freed=2
"""

FIG3 = """\
# a game server joins three players with one three-way link
session a full=3 parts={0}|{1,2}
session b full=3 parts={1}|{0,2}
session c full=3 parts={2}|{0,1}
thread server:
    link3 r = a.e1 b.e1 c.e1
thread p0:
    choose a.e0 0 "start"
    bsend a.e0 0 "x0"
    send a.e0 0 1 "0->1"
    brecv a.e0 1 "x1"
    brecv a.e0 2 "x2"
    recv a.e0 2 0 "2->0"
    close a.e0
thread p1:
    offer b.e0 0 "start"
    bsend b.e0 1 "x1"
    send b.e0 1 2 "1->2"
    brecv b.e0 0 "x0"
    brecv b.e0 2 "x2"
    recv b.e0 0 1 "0->1"
    close b.e0
thread p2:
    offer c.e0 0 "start"
    bsend c.e0 2 "x2"
    send c.e0 2 0 "2->0"
    brecv c.e0 0 "x0"
    brecv c.e0 1 "x1"
    recv c.e0 1 2 "1->2"
    close c.e0
expect freed=3
"""


def queue_text(n: int, items: int = 3) -> str:
    """A chain of ``n`` cells between a consumer and a producer.

    Board ``q0`` joins the consumer to cell 1, board ``q<i>`` joins cell ``i``
    to cell ``i+1`` and board ``q<n>`` joins cell ``n`` to the producer. Every
    cell links its two endpoints and leaves, so the producer's values travel
    through ``n`` chained links.
    """
    if n < 0:
        raise ValueError("queue length must be non-negative")
    lines = [f"# queue of {n} forwarding cells"]
    lines += [f"session q{i} full=2 parts={{0}}|{{1}}" for i in range(n + 1)]
    lines.append("thread consumer:")
    lines += [f'    recv q0.e0 1 0 "v{k}"' for k in range(items)]
    lines.append("    close q0.e0")
    for i in range(1, n + 1):
        lines.append(f"thread cell{i}:")
        lines.append(f"    link2 _ = q{i - 1}.e1 q{i}.e0")
    lines.append("thread producer:")
    lines += [f'    send q{n}.e1 1 0 "v{k}"' for k in range(items)]
    lines.append(f"    close q{n}.e1")
    lines.append(f"expect freed={n + 1}")
    return "\n".join(lines) + "\n"


BUILTINS = {"fig1": FIG1, "fig5": FIG5, "game3": GAME3, "fig3": FIG3}


def builtin(name: str, n: int | None = None) -> Scenario:
    if name == "queue":
        n = 10 if n is None else n
        return parse_scenario(queue_text(n), name=f"queue{n}")
    if name not in BUILTINS:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(BUILTINS) + ['queue']}")
    return parse_scenario(BUILTINS[name], name=name)

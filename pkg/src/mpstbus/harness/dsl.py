"""Line-oriented scenario language.

::

    # three-player game
    session a full=3 parts={0}|{1,2}
    session b full=3 parts={0,1}|{2}
    thread p1:
        link2 r = a.e1 b.e0
        bsend r 1 "hello"
        close r
    expect freed=2

Endpoints of a session are named ``<session>.e<index>`` in part order. Link
verbs bind the residual endpoint to a name (``_`` discards an empty one).
Receive verbs take an optional trailing literal: the expected payload.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field

from ..errors import DSLSyntaxError
from ..roleset import MAX_ARITY, RoleSet

VERBS = {
    # verb: argument kinds; "ep" endpoint name, "role" int, "data" literal
    "send": ("ep", "role", "role", "data"),
    "recv": ("ep", "role", "role"),
    "bsend": ("ep", "role", "data"),
    "brecv": ("ep", "role"),
    "choose": ("ep", "role", "data"),
    "offer": ("ep", "role"),
    "link2": ("name", "=", "ep", "ep"),
    "link3": ("name", "=", "ep", "ep", "ep"),
    "close": ("ep",),
}
RECEIVES = {"recv", "brecv", "offer"}

_TOKEN = re.compile(r'"(?:[^"\\]|\\.)*"|\S+')
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_EPNAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.e\d+)?$")


@dataclass
class SessionDecl:
    name: str
    arity: int
    parts: list[RoleSet]
    line: int = 0

    @property
    def full(self) -> RoleSet:
        return RoleSet.full(self.arity)

    def endpoint_names(self) -> list[str]:
        return [f"{self.name}.e{i}" for i in range(len(self.parts))]


@dataclass
class Op:
    verb: str
    args: tuple
    expect: str | None = None
    line: int = 0

    def to_text(self) -> str:
        out = [self.verb]
        for kind, a in zip(VERBS[self.verb], self.args):
            out.append(_quote(a) if kind == "data" else str(a))
        if self.expect is not None:
            out.append(_quote(self.expect))
        return " ".join(out)


@dataclass
class ThreadScript:
    name: str
    ops: list[Op] = field(default_factory=list)
    line: int = 0


@dataclass
class Scenario:
    sessions: list[SessionDecl] = field(default_factory=list)
    threads: list[ThreadScript] = field(default_factory=list)
    expect_freed: int | None = None
    name: str = "scenario"

    def to_text(self) -> str:
        lines = []
        for s in self.sessions:
            lines.append(f"session {s.name} full={s.arity} parts=" + "|".join(map(str, s.parts)))
        for t in self.threads:
            lines.append(f"thread {t.name}:")
            lines.extend("    " + op.to_text() for op in t.ops)
        if self.expect_freed is not None:
            lines.append(f"expect freed={self.expect_freed}")
        return "\n".join(lines) + "\n"

    def op_count(self) -> int:
        return sum(len(t.ops) for t in self.threads)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _col(raw: str, tok: str) -> int:
    return raw.find(tok) + 1


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    sc = Scenario(name=name)
    current: ThreadScript | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = _strip_comment(raw)
        if not stripped.strip():
            continue
        toks = _TOKEN.findall(stripped)
        head = toks[0]
        indented = raw[:1].isspace()
        if head == "session" and not indented:
            sc.sessions.append(_parse_session(toks, raw, lineno))
            current = None
        elif head == "thread" and not indented:
            if len(toks) != 2 or not toks[1].endswith(":") or not _NAME.match(toks[1][:-1]):
                raise DSLSyntaxError("expected 'thread <name>:'", lineno, 1)
            current = ThreadScript(toks[1][:-1], line=lineno)
            sc.threads.append(current)
        elif head == "expect" and not indented:
            m = re.fullmatch(r"freed=(\d+)", " ".join(toks[1:]))
            if not m:
                raise DSLSyntaxError("expected 'expect freed=<n>'", lineno, _col(raw, head))
            sc.expect_freed = int(m.group(1))
            current = None
        elif indented and current is not None:
            current.ops.append(_parse_op(toks, raw, lineno))
        elif head in VERBS:
            raise DSLSyntaxError(f"verb '{head}' outside a thread block", lineno, _col(raw, head))
        else:
            raise DSLSyntaxError(f"unknown directive '{head}'", lineno, _col(raw, head))
    validate(sc)
    return sc


def _strip_comment(raw: str) -> str:
    out, in_str, esc = [], False, False
    for ch in raw:
        if in_str:
            esc = ch == "\\" and not esc
            if ch == '"' and not esc:
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def _parse_session(toks: list[str], raw: str, lineno: int) -> SessionDecl:
    if len(toks) != 4 or not _NAME.match(toks[1]):
        raise DSLSyntaxError("expected 'session <name> full=<n> parts=<RS>|<RS>...'", lineno, 1)
    m = re.fullmatch(r"full=(\d+)", toks[2])
    if not m:
        raise DSLSyntaxError("expected full=<n>", lineno, _col(raw, toks[2]))
    arity = int(m.group(1))
    if not 2 <= arity <= MAX_ARITY:
        raise DSLSyntaxError(f"arity must lie in 2..{MAX_ARITY}", lineno, _col(raw, toks[2]))
    if not toks[3].startswith("parts="):
        raise DSLSyntaxError("expected parts=<RS>|<RS>...", lineno, _col(raw, toks[3]))
    try:
        parts = [RoleSet.parse(p) for p in toks[3][len("parts="):].split("|")]
    except ValueError as e:
        raise DSLSyntaxError(str(e), lineno, _col(raw, toks[3])) from None
    return SessionDecl(toks[1], arity, parts, lineno)


def _parse_op(toks: list[str], raw: str, lineno: int) -> Op:
    verb = toks[0]
    if verb not in VERBS:
        raise DSLSyntaxError(f"unknown verb '{verb}'", lineno, _col(raw, verb))
    kinds = VERBS[verb]
    rest = toks[1:]
    expect = None
    if verb in RECEIVES and len(rest) == len(kinds) + 1:
        expect = _literal(rest.pop(), raw, lineno)
    if len(rest) != len(kinds):
        raise DSLSyntaxError(f"'{verb}' takes {len(kinds)} arguments", lineno, _col(raw, verb))
    args = []
    for kind, tok in zip(kinds, rest):
        col = _col(raw, tok)
        if kind == "role":
            if not tok.isdigit():
                raise DSLSyntaxError(f"expected a role number, got {tok!r}", lineno, col)
            args.append(int(tok))
        elif kind == "data":
            args.append(_literal(tok, raw, lineno))
        elif kind == "=":
            if tok != "=":
                raise DSLSyntaxError("expected '='", lineno, col)
            args.append("=")
        elif kind == "name":
            if not _NAME.match(tok):
                raise DSLSyntaxError(f"bad name {tok!r}", lineno, col)
            args.append(tok)
        else:
            if not _EPNAME.match(tok):
                raise DSLSyntaxError(f"bad endpoint name {tok!r}", lineno, col)
            args.append(tok)
    return Op(verb, tuple(args), expect, lineno)


def _literal(tok: str, raw: str, lineno: int) -> str:
    if not (len(tok) >= 2 and tok[0] == tok[-1] == '"'):
        raise DSLSyntaxError(f"expected a quoted string, got {tok!r}", lineno, _col(raw, tok))
    return ast.literal_eval(tok)


def endpoint_args(op: Op) -> list[str]:
    return [a for kind, a in zip(VERBS[op.verb], op.args) if kind == "ep"]


def validate(sc: Scenario) -> None:
    """Binding discipline: declared before use, one owning thread, consumed once."""
    names = set()
    declared: dict[str, SessionDecl] = {}
    for s in sc.sessions:
        if s.name in names:
            raise DSLSyntaxError(f"session {s.name} declared twice", s.line)
        names.add(s.name)
        seen = RoleSet()
        for p in s.parts:
            if not p or p & seen or not p <= s.full:
                raise DSLSyntaxError(f"parts of {s.name} do not partition {s.full}", s.line)
            seen = seen | p
        if seen != s.full:
            raise DSLSyntaxError(f"parts of {s.name} do not cover {s.full}", s.line)
        for n in s.endpoint_names():
            declared[n] = s
    owner: dict[str, str] = {}
    consumed: set[str] = set()
    thread_names = set()
    for t in sc.threads:
        if t.name in thread_names:
            raise DSLSyntaxError(f"thread {t.name} declared twice", t.line)
        thread_names.add(t.name)
        for op in t.ops:
            for ep in endpoint_args(op):
                if ep not in declared and owner.get(ep) != t.name:
                    raise DSLSyntaxError(f"endpoint {ep} used before it is bound", op.line)
                if owner.setdefault(ep, t.name) != t.name:
                    raise DSLSyntaxError(f"endpoint {ep} used by threads {owner[ep]} and {t.name}",
                                         op.line)
                if ep in consumed:
                    raise DSLSyntaxError(f"endpoint {ep} used after it was consumed", op.line)
            if op.verb in ("link2", "link3", "close"):
                eps = endpoint_args(op)
                if len(set(eps)) != len(eps):
                    raise DSLSyntaxError("the same endpoint appears twice in one link", op.line)
                consumed.update(eps)
            if op.verb in ("link2", "link3") and op.args[0] != "_":
                r = op.args[0]
                if r in declared or r in owner:
                    raise DSLSyntaxError(f"name {r} is already bound", op.line)
                owner[r] = t.name

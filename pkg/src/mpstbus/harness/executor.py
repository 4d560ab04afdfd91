"""Run scenarios in real threads or under a seeded lockstep interleaver.

After execution the runtime's commit log is replayed through the flat-merge
oracle, and the run is checked for per-sender FIFO, cycle-guard hits, pass
width, leaks and the scenario's own expectations.
"""
from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field

from .. import events as ev
from ..board import Runtime
from ..endpoint import Endpoint, session_new
from ..errors import (Aborted, Deadlock, ExpectationFailed, FifoInversion, InvariantViolation, Leak,
                      MpstError, OracleMismatch, ScriptError, Violation)
from ..link import link2, link3
from ..oracle import Delivery, Oracle
from .dsl import Op, Scenario

MODES = ("threads", "lockstep")
DEFAULT_TIMEOUT = 5.0


@dataclass
class Report:
    scenario: str
    mode: str
    seed: int
    trace: list[str] = field(default_factory=list)
    deliveries: list[Delivery] = field(default_factory=list)
    oracle_log: list[str] = field(default_factory=list)
    stats: dict[str, int] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)
    runtime: Runtime | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_first(self) -> None:
        if self.violations:
            raise self.violations[0]

    def summary(self) -> str:
        head = f"{self.scenario} [{self.mode}, seed={self.seed}]"
        if self.ok:
            return f"{head}: ok, {len(self.deliveries)} deliveries"
        return f"{head}: " + "; ".join(f"{type(v).__name__}: {v}" for v in self.violations)


class _Env:
    """Binding table plus the interpretation of one verb."""

    def __init__(self, sc: Scenario, rt: Runtime):
        self.rt = rt
        self.eps: dict[str, Endpoint | None] = {}
        for s in sc.sessions:
            names = s.endpoint_names()
            for n, e in zip(names, session_new(s.full, s.parts, rt, names=names)):
                self.eps[n] = e

    def endpoint(self, name: str) -> Endpoint:
        e = self.eps.get(name)
        if e is None:
            raise ScriptError(f"{name} is unbound (empty residual?)")
        return e

    def execute(self, op: Op, block: bool) -> bool:
        """Run ``op``; ``False`` means a non-blocking receive found nothing."""
        v, a = op.verb, op.args
        if v == "send":
            self.endpoint(a[0]).send(a[1], a[2], a[3].encode())
        elif v == "bsend":
            self.endpoint(a[0]).bsend(a[1], a[2].encode())
        elif v == "choose":
            self.endpoint(a[0]).choose(a[1], a[2])
        elif v in ("recv", "brecv", "offer"):
            e = self.endpoint(a[0])
            if v == "recv":
                got = e.recv(a[1], a[2], block=block)
            elif v == "brecv":
                got = e.brecv(a[1], block=block)
            else:
                got = e.offer(a[1], block=block)
            if got is None:
                return False
            text = got.decode("utf-8", "replace") if isinstance(got, bytes) else got
            if op.expect is not None and text != op.expect:
                raise ExpectationFailed(f"line {op.line}: {op.to_text()} got {text!r}")
        elif v in ("link2", "link3"):
            eps = [self.endpoint(n) for n in a[2:]]
            out = link2(*eps) if v == "link2" else link3(*eps)
            if a[0] == "_":
                if out.residual is not None:
                    raise ScriptError(f"line {op.line}: residual {out.residual.played} discarded")
            else:
                if out.residual is not None:
                    out.residual.name = a[0]
                self.eps[a[0]] = out.residual
        elif v == "close":
            self.endpoint(a[0]).close()
        return True


def _as_violation(exc: BaseException, op: Op | None, thread: str, rt: Runtime) -> Violation:
    if isinstance(exc, Violation):
        if not exc.trace:
            exc.trace = rt.trace()
        return exc
    where = f"thread {thread}" + (f", line {op.line} ({op.to_text()})" if op else "")
    return ScriptError(f"{where}: {type(exc).__name__}: {exc}", rt.trace())


def _run_lockstep(sc: Scenario, env: _Env, seed: int) -> list[Violation]:
    rng = random.Random(seed)
    rt = env.rt
    pcs = {t.name: 0 for t in sc.threads}
    scripts = {t.name: t.ops for t in sc.threads}
    blocked_at: dict[str, int] = {}
    while True:
        unfinished = [n for n in pcs if pcs[n] < len(scripts[n])]
        if not unfinished:
            return []
        version = len(rt.events)
        eligible = [n for n in unfinished if blocked_at.get(n) != version]
        if not eligible:
            waiting = ", ".join(f"{n}@{scripts[n][pcs[n]].to_text()}" for n in unfinished)
            return [Deadlock(f"every remaining thread is blocked: {waiting}", rt.trace())]
        name = rng.choice(eligible)
        op = scripts[name][pcs[name]]
        try:
            done = env.execute(op, block=False)
        except (MpstError, ValueError) as exc:
            return [_as_violation(exc, op, name, rt)]
        if done:
            pcs[name] += 1
            blocked_at.pop(name, None)
        else:
            blocked_at[name] = version


def _run_threads(sc: Scenario, env: _Env, timeout: float) -> list[Violation]:
    rt = env.rt
    failures: list[Violation] = []
    flock = threading.Lock()

    def worker(script):
        op = None
        try:
            for op in script.ops:
                env.execute(op, block=True)
        except Aborted:
            pass
        except (MpstError, ValueError) as exc:
            with flock:
                failures.append(_as_violation(exc, op, script.name, rt))
            rt.abort()

    threads = [threading.Thread(target=worker, args=(t,), name=t.name, daemon=True)
               for t in sc.threads]
    for t in threads:
        t.start()
    last_len, last_change = -1, time.monotonic()
    while any(t.is_alive() for t in threads):
        for t in threads:
            t.join(0.002)
        n = len(rt.events)
        if n != last_len:
            last_len, last_change = n, time.monotonic()
        elif time.monotonic() - last_change > timeout:
            with rt.lock:
                alive = [t.name for t in threads if t.is_alive()]
                census = f"{rt.blocked} blocked readers among {len(alive)} live threads {alive}"
                trace = rt.trace()
            failures.append(Deadlock(f"no progress for {timeout}s: {census}", trace))
            rt.abort()
            for t in threads:
                t.join(1.0)
            break
    return failures


def _post_checks(sc: Scenario, rt: Runtime, rep: Report) -> None:
    trace = rep.trace
    oracle = Oracle()
    try:
        oracle.replay(rt.events)
    except MpstError as exc:
        rep.violations.append(OracleMismatch(f"oracle rejected the log: {exc}", trace))
    for m in oracle.mismatches:
        rep.violations.append(OracleMismatch(m, trace))
    rep.oracle_log = oracle.delivery_log()

    reads = [e for e in rt.events if isinstance(e, ev.ReadEv)]
    counts: dict[tuple[str, int], int] = {}
    last_uid: dict[tuple, int] = {}
    for e in reads:
        reader = e.who or str(e.by)
        # receives select by label and receiver pattern, so order is per selector
        fifo = (reader, e.sender, e.label, e.by)
        if e.uid <= last_uid.get(fifo, -1):
            rep.violations.append(FifoInversion(
                f"FIFO inversion for reader {reader} from {e.sender} ({e.label} to {e.by}): "
                f"uid {e.uid} after {last_uid[fifo]}", trace))
        last_uid[fifo] = e.uid
        idx = counts.get((reader, e.sender), 0)
        counts[(reader, e.sender)] = idx + 1
        rep.deliveries.append(Delivery(reader, e.sender, e.payload, e.uid, idx))

    st = rt.stats
    if st.guard_suppressed:
        rep.violations.append(InvariantViolation(
            f"cycle guard suppressed {st.guard_suppressed} revisits", trace))
    if st.max_pass_boards > st.links + 1:
        rep.violations.append(InvariantViolation(
            f"a read pass visited {st.max_pass_boards} boards with only {st.links} links", trace))
    try:
        rt.audit()
    except InvariantViolation as exc:
        rep.violations.append(exc)
    if rt.live_endpoints == 0:
        if st.boards_allocated != st.boards_freed or st.live_ctl_refs:
            rep.violations.append(Leak(
                f"allocated {st.boards_allocated}, freed {st.boards_freed}, "
                f"live control refs {st.live_ctl_refs}", trace))
    if sc.expect_freed is not None and st.boards_freed != sc.expect_freed:
        rep.violations.append(ExpectationFailed(
            f"expected {sc.expect_freed} boards freed, got {st.boards_freed}", trace))


def run(sc: Scenario, seed: int = 0, mode: str = "lockstep", *, timeout: float = DEFAULT_TIMEOUT,
        link_policy: str = "drain", audit: bool = True) -> Report:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rt = Runtime(audit=audit, link_policy=link_policy, seed=seed)
    rep = Report(sc.name, mode, seed, runtime=rt)
    try:
        env = _Env(sc, rt)
    except MpstError as exc:
        rep.violations.append(_as_violation(exc, None, "<setup>", rt))
        return rep
    if mode == "lockstep":
        rep.violations.extend(_run_lockstep(sc, env, seed))
    else:
        rep.violations.extend(_run_threads(sc, env, timeout))
    rep.trace = rt.trace()
    _post_checks(sc, rt, rep)
    rep.stats = rt.stats.as_dict()
    return rep

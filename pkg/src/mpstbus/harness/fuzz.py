"""Random well-formed scenarios, checked in both execution modes.

Scenarios are generated by simulating a global sequential order against a
flat model: every receive is emitted only once a matching message is
pending, so each receive carries its expected payload. Two rules make those
expectations hold under every interleaving:

* endpoints that a link will consume never send, so the pending senders of
  two linked clusters are disjoint however the threads race;
* each role of a linked cluster is played by exactly one non-linking party,
  so each role's mark-as-read history is sequential.

Binary (arity 2) scenarios are forwarding chains with a single producer, the
only shape a binary session type admits around a link.
"""
from __future__ import annotations

import copy
import os
import random
import time
from dataclasses import dataclass, field

from ..errors import DSLSyntaxError
from ..message import Label, Message, Pattern, mark_read, matches
from ..roleset import RoleSet
from .dsl import Op, Scenario, SessionDecl, ThreadScript, validate
from .executor import MODES, Report, run


@dataclass
class FuzzConfig:
    max_arity: int = 4
    max_boards: int = 4
    max_links: int = 3
    max_msgs: int = 40
    arity: int | None = None

    def __post_init__(self):
        if not 2 <= self.max_arity or (self.arity is not None and self.arity < 2):
            raise ValueError("arity must be at least 2")
        if self.max_boards < 1 or self.max_links < 0 or self.max_msgs < 0:
            raise ValueError("bounds must be non-negative (and at least one board)")


def _partition(rng: random.Random, roles: RoleSet) -> list[RoleSet]:
    members = list(roles)
    k = rng.randint(1, len(members))
    buckets: list[list[int]] = [[] for _ in range(k)]
    for r in members:
        buckets[rng.randrange(k)].append(r)
    return [RoleSet(b) for b in buckets if b]


def _proper_subset(rng: random.Random, s: RoleSet, nonempty: bool) -> RoleSet:
    members = list(s)
    while True:
        sub = RoleSet(r for r in members if rng.random() < 0.5)
        if sub != s and (sub or not nonempty):
            return sub


@dataclass
class _Ep:
    name: str
    played: RoleSet
    thread: str
    cluster: int
    operand: bool = False
    state: str = "live"  # "planned" (residual not yet created) | "live" | "consumed"


@dataclass
class _LinkStep:
    verb: str
    residual: str
    operands: list[str]
    new_clusters: list[int] = field(default_factory=list)


class _Builder:
    def __init__(self, rng: random.Random, n: int):
        self.rng = rng
        self.full = RoleSet.full(n)
        self.sc = Scenario()
        self.eps: dict[str, _Ep] = {}
        self.threads: dict[str, ThreadScript] = {}
        self.queues: dict[int, list[Message]] = {}
        self.cluster_of: dict[int, int] = {}
        self.uid = 0

    def thread(self, name: str) -> ThreadScript:
        if name not in self.threads:
            self.threads[name] = ThreadScript(name)
            self.sc.threads.append(self.threads[name])
        return self.threads[name]

    def session(self, parts: list[RoleSet], owners: list[str | None]) -> list[_Ep]:
        idx = len(self.sc.sessions)
        decl = SessionDecl(f"s{idx}", len(self.full), parts)
        self.sc.sessions.append(decl)
        self.queues[idx] = []
        self.cluster_of[idx] = idx
        out = []
        for name, part, owner in zip(decl.endpoint_names(), parts, owners):
            owner = owner or f"t{len(self.threads)}"
            self.thread(owner)
            out.append(_Ep(name, part, owner, idx))
            self.eps[name] = out[-1]
        return out

    def root(self, c: int) -> int:
        while self.cluster_of[c] != c:
            c = self.cluster_of[c]
        return c

    def emit(self, ep: _Ep, op: Op) -> None:
        self.thread(ep.thread).ops.append(op)


def _multiparty(rng: random.Random, cfg: FuzzConfig, n: int) -> Scenario:
    b = _Builder(rng, n)
    full = b.full
    b.session(_partition_min2(rng, full), [None] * n)

    plan: list[_LinkStep] = []
    budget = rng.randint(0, min(cfg.max_links, cfg.max_boards - 1))
    boards = 1
    while (done := sum(len(s.new_clusters) for s in plan)) < budget:
        cands = [e for e in b.eps.values() if not e.operand and e.played != full]
        if not cands:
            break
        e = rng.choice(cands)
        p1 = e.played
        three = (budget - done >= 2 and boards + 2 <= cfg.max_boards and len(p1) >= 2
                 and rng.random() < 0.4)
        res_name = f"r{len(plan)}"
        if three:
            mid = _proper_subset(rng, p1, nonempty=True)
            p2 = (full - p1) | mid
            tail = _proper_subset(rng, mid, nonempty=False)
            p3 = (full - mid) | tail
            eb = b.session([p2] + _partition(rng, full - p2), [e.thread] + [None] * n)[0]
            ec = b.session([p3] + _partition(rng, full - p3), [e.thread] + [None] * n)[0]
            operands, residual = [e, eb, ec], tail
            boards += 2
        else:
            sub = _proper_subset(rng, p1, nonempty=False)
            p2 = (full - p1) | sub
            eb = b.session([p2] + _partition(rng, full - p2), [e.thread] + [None] * n)[0]
            operands, residual = [e, eb], sub
            boards += 1
        for o in operands:
            o.operand = True
        step = _LinkStep("link3" if three else "link2", res_name if residual else "_",
                         [o.name for o in operands], [o.cluster for o in operands[1:]])
        plan.append(step)
        if residual:
            b.eps[res_name] = _Ep(res_name, residual, e.thread, -1, state="planned")

    _simulate(b, plan, rng.randint(0, cfg.max_msgs))
    for t in b.sc.threads:
        for e in b.eps.values():
            if e.thread == t.name and e.state == "live":
                t.ops.append(Op("close", (e.name,)))
    b.sc.expect_freed = len(b.sc.sessions)
    return b.sc


def _partition_min2(rng: random.Random, full: RoleSet) -> list[RoleSet]:
    while True:
        parts = _partition(rng, full)
        if len(parts) >= 2:
            return parts


def _simulate(b: _Builder, plan: list[_LinkStep], budget: int) -> None:
    rng, full = b.rng, b.full
    sent, next_link, reading = 0, 0, True
    while True:
        live = [e for e in b.eps.values() if e.state == "live"]
        senders = [e for e in live if not e.operand] if sent < budget else []
        recvs = _receive_candidates(b, live) if reading else []
        can_link = next_link < len(plan)
        if not (senders or recvs or can_link):
            return
        if can_link and (rng.random() < 0.2 or not (senders or recvs)):
            _do_link(b, plan[next_link])
            next_link += 1
        elif senders and (not recvs or rng.random() < 0.5):
            _do_send(b, rng.choice(senders))
            sent += 1
        elif sent >= budget and rng.random() < 0.05:
            reading = False
        else:
            _do_recv(b, *rng.choice(recvs))


def _do_send(b: _Builder, e: _Ep) -> None:
    rng = b.rng
    s = rng.choice(list(e.played))
    others = list(b.full - e.played)
    kind = rng.random()
    uid = b.uid
    b.uid += 1
    if kind < 0.6:
        t = rng.choice(others)
        op = Op("send", (e.name, s, t, f"m{uid}"))
        msg = Message(Label.MSG, s, RoleSet((t,)), f"m{uid}", uid=uid)
    elif kind < 0.85:
        op = Op("bsend", (e.name, s, f"m{uid}"))
        msg = Message(Label.MSG, s, b.full - e.played, f"m{uid}", uid=uid)
    else:
        op = Op("choose", (e.name, s, f"t{uid}"))
        msg = Message(Label.BRANCH, s, b.full - e.played, f"t{uid}", uid=uid)
    b.emit(e, op)
    b.queues[b.root(e.cluster)].append(msg)


def _receive_candidates(b: _Builder, live: list[_Ep]) -> list[tuple]:
    out = set()
    for e in live:
        for m in b.queues[b.root(e.cluster)]:
            if m.sender in e.played:
                continue
            if m.label is Label.MSG:
                for r in e.played & m.receivers:
                    out.add((e.name, "recv", m.sender, r))
                if e.played <= m.receivers:
                    out.add((e.name, "brecv", m.sender, None))
            elif e.played <= m.receivers:
                out.add((e.name, "offer", m.sender, None))
    return sorted(out, key=str)


def _do_recv(b: _Builder, name: str, verb: str, sender: int, me: int | None) -> None:
    e = b.eps[name]
    if verb == "recv":
        pat = Pattern(Label.MSG, sender, RoleSet((me,)))
        args = (name, sender, me)
    else:
        pat = Pattern(Label.MSG if verb == "brecv" else Label.BRANCH, sender, e.played)
        args = (name, sender)
    q = b.queues[b.root(e.cluster)]
    for i, m in enumerate(q):
        if matches(m, pat):
            _, empty = mark_read(m, pat.receivers)
            if empty:
                del q[i]
            b.emit(e, Op(verb, args, expect=m.payload))
            return
    raise AssertionError("receive candidate without a matching message")


def _do_link(b: _Builder, step: _LinkStep) -> None:
    ops = [b.eps[n] for n in step.operands]
    linker = ops[0]
    clusters = {b.root(o.cluster) for o in ops}
    assert len(clusters) == len(ops), "link operands share a cluster"
    seen: set[int] = set()
    for c in clusters:
        senders = {m.sender for m in b.queues[c]}
        assert not senders & seen, "generated link with shared pending senders"
        seen |= senders
    target, *rest = sorted(clusters)
    for c in rest:
        b.queues[target].extend(b.queues.pop(c))
        b.cluster_of[c] = target
    b.emit(linker, Op(step.verb, (step.residual, "=", *step.operands)))
    for o in ops:
        o.state = "consumed"
    if step.residual != "_":
        r = b.eps[step.residual]
        r.state, r.cluster = "live", target


def _chain(rng: random.Random, cfg: FuzzConfig) -> Scenario:
    boards = rng.randint(1, min(cfg.max_boards, cfg.max_links + 1))
    sc = Scenario()
    for i in range(boards):
        sc.sessions.append(SessionDecl(f"q{i}", 2, [RoleSet((0,)), RoleSet((1,))]))
    if rng.random() < 0.5:
        prod, cons, p, c = f"q{boards - 1}.e1", "q0.e0", 1, 0
    else:
        prod, cons, p, c = "q0.e0", f"q{boards - 1}.e1", 0, 1
    producer, consumer = ThreadScript("producer"), ThreadScript("consumer")
    by_label: dict[str, list[str]] = {"send": [], "choose": []}
    for k in range(rng.randint(0, cfg.max_msgs)):
        if rng.random() < 0.75:
            producer.ops.append(Op("send", (prod, p, c, f"m{k}")))
            by_label["send"].append(f"m{k}")
        else:
            producer.ops.append(Op("choose", (prod, p, f"t{k}")))
            by_label["choose"].append(f"t{k}")
    # any merge that keeps per-label order is a valid reading order
    mq, bq = list(by_label["send"]), list(by_label["choose"])
    while mq or bq:
        if mq and (not bq or rng.random() < 0.5):
            consumer.ops.append(Op("recv", (cons, p, c), expect=mq.pop(0)))
        else:
            consumer.ops.append(Op("offer", (cons, p), expect=bq.pop(0)))
    producer.ops.append(Op("close", (prod,)))
    consumer.ops.append(Op("close", (cons,)))
    cells = [ThreadScript(f"cell{i}", [Op("link2", ("_", "=", f"q{i - 1}.e1", f"q{i}.e0"))])
             for i in range(1, boards)]
    rng.shuffle(cells)
    sc.threads = [consumer, *cells, producer]
    sc.expect_freed = boards
    return sc


def generate(rng: random.Random, cfg: FuzzConfig | None = None) -> Scenario:
    cfg = cfg or FuzzConfig()
    n = cfg.arity or rng.randint(2, cfg.max_arity)
    sc = _chain(rng, cfg) if n == 2 else _multiparty(rng, cfg, n)
    validate(sc)
    return sc


def shrink(sc: Scenario, still_fails) -> Scenario:
    """Greedily delete single operations while ``still_fails`` holds."""
    cur = sc
    progress = True
    while progress:
        progress = False
        for ti, t in enumerate(cur.threads):
            for oi in range(len(t.ops)):
                cand = copy.deepcopy(cur)
                del cand.threads[ti].ops[oi]
                try:
                    validate(cand)
                except DSLSyntaxError:
                    continue
                if still_fails(cand):
                    cur, progress = cand, True
                    break
            if progress:
                break
    cur.threads = [t for t in cur.threads if t.ops]
    return cur


@dataclass
class FuzzReport:
    iterations: int = 0
    runs: int = 0
    failures: list[str] = field(default_factory=list)
    counterexample: str | None = None
    keep_follows_by_arity: dict[int, int] = field(default_factory=dict)
    runs_by_arity: dict[int, int] = field(default_factory=dict)
    guard_suppressed: int = 0
    max_pass_excess: int = 0
    deliveries: int = 0
    links: int = 0
    audits: int = 0
    violation_counts: dict[str, int] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "ok" if self.ok else f"{len(self.failures)} failing runs"
        return (f"{self.iterations} scenarios, {self.runs} runs, {self.links} links, "
                f"{self.deliveries} deliveries in {self.elapsed:.1f}s: {status}")


def fuzz(iters: int = 1000, seed: int = 0, cfg: FuzzConfig | None = None,
         modes: tuple[str, ...] = MODES, out_dir: str | None = ".",
         timeout: float = 5.0, link_policy: str = "drain") -> FuzzReport:
    cfg = cfg or FuzzConfig()
    rep = FuzzReport()
    t0 = time.monotonic()
    for i in range(iters):
        rng = random.Random(f"{seed}:{i}")
        sc = generate(rng, cfg)
        sc.name = f"fuzz-{seed}-{i}"
        arity = sc.sessions[0].arity
        run_seed = rng.randrange(2**31)
        rep.iterations += 1
        for mode in modes:
            r = run(sc, seed=run_seed, mode=mode, timeout=timeout, link_policy=link_policy)
            rep.runs += 1
            rep.runs_by_arity[arity] = rep.runs_by_arity.get(arity, 0) + 1
            rep.keep_follows_by_arity[arity] = (rep.keep_follows_by_arity.get(arity, 0)
                                                + r.stats.get("keep_follows", 0))
            rep.guard_suppressed += r.stats.get("guard_suppressed", 0)
            rep.max_pass_excess = max(rep.max_pass_excess,
                                      r.stats.get("max_pass_boards", 0) - r.stats.get("links", 0) - 1)
            rep.deliveries += len(r.deliveries)
            rep.links += r.stats.get("links", 0)
            rep.audits += r.runtime.audits_run if r.runtime else 0
            for v in r.violations:
                name = type(v).__name__
                rep.violation_counts[name] = rep.violation_counts.get(name, 0) + 1
            if not r.ok:
                rep.failures.append(r.summary())
                if rep.counterexample is None and out_dir is not None:
                    rep.counterexample = _write_counterexample(sc, r, run_seed, out_dir,
                                                               link_policy)
    rep.elapsed = time.monotonic() - t0
    return rep


def _kind(v) -> tuple[str, bool]:
    # a wrong free count is a symptom of almost anything; keep it apart
    return type(v).__name__, "boards freed" in str(v)


def _write_counterexample(sc: Scenario, r: Report, run_seed: int, out_dir: str,
                          link_policy: str = "drain") -> str:
    kind = _kind(r.violations[0])

    def still_fails(cand: Scenario) -> bool:
        again = run(cand, seed=run_seed, mode="lockstep", timeout=1.0, link_policy=link_policy)
        return any(_kind(v) == kind for v in again.violations)

    small = shrink(sc, still_fails) if still_fails(sc) else sc
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"counterexample-{sc.name}.mpst")
    header = [f"# {sc.name}: {r.summary()}", f"# replay: mpstbus run {os.path.basename(path)} "
              f"--mode lockstep --seed {run_seed}"
              + (" --link-random" if link_policy == "random" else "")]
    with open(path, "w") as fh:
        fh.write("\n".join(h.replace("\n", " ") for h in header) + "\n" + small.to_text())
    return path

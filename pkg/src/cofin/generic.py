"""Fair deterministic scheduler over density tasks.

A task list prescribes finitely many dense sets to meet: domain and
range coverage, per-word coding depths, hit targets with repetition
counts, and constraint attachments.  The builder starts from the empty
condition, performs registrations first and then strict round-robin
over the remaining categories, and emits one replayable report per
step.  Replaying an identical task list reproduces the run bit for bit;
verification re-derives every claim from the final condition.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .coding import decode_bits
from .forcing import (
    CodingConflictError,
    Condition,
    EMPTY_CONDITION,
    HitTarget,
    PosetContext,
    add_constraint,
    extend_coding,
    extend_domain,
    extend_range,
    extend_word_value,
    hit_with_witness,
    pin_value,
    register_coding,
    register_word,
    subword_fixed_point_witness,
    validate,
)
from .perms import eval_word, fixed_points
from .words import Word, cyclic_core, parse, render


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def condition_digest(p: Condition) -> str:
    return hashlib.sha256(canonical_json(p.to_jsonable()).encode()).hexdigest()[:16]


# -- tasks ------------------------------------------------------------------------


@dataclass(frozen=True)
class HitTask:
    word: Word
    target: HitTarget
    target_spec: tuple
    threshold: int
    repetitions: int


@dataclass(frozen=True)
class ConstraintTask:
    """Attach an eligible family member to a word.

    Either ``m`` names the pairing value outright (the builder pins the
    matching graph point first when needed), or ``point`` names an input
    whose achieved value determines m at attachment time.
    """

    word: Word
    xi: int
    m: Optional[int] = None
    point: Optional[int] = None

    def __post_init__(self):
        if (self.m is None) == (self.point is None):
            raise ValueError("constraint task needs exactly one of m/point")


@dataclass(frozen=True)
class TaskList:
    domain_up_to: int = 0
    range_up_to: int = 0
    coding: tuple[tuple[Word, int], ...] = ()
    registrations: tuple[Word, ...] = ()
    hits: tuple[HitTask, ...] = ()
    constraints: tuple[ConstraintTask, ...] = ()

    @staticmethod
    def make(domain_up_to: int = 0, range_up_to: int = 0,
             coding: dict[Word, int] | None = None,
             registrations: Iterable[Word] = (),
             hits: Iterable[HitTask] = (),
             constraints: Iterable[ConstraintTask] = ()) -> "TaskList":
        def order(w: Word):
            return (len(w), render(w))

        return TaskList(
            domain_up_to=domain_up_to,
            range_up_to=range_up_to,
            coding=tuple(sorted((coding or {}).items(), key=lambda kv: order(kv[0]))),
            registrations=tuple(sorted(set(registrations), key=order)),
            hits=tuple(hits),
            constraints=tuple(constraints),
        )


@dataclass(frozen=True)
class TaskReport:
    task_id: int
    category: str
    op: str
    args: tuple
    size_before: int
    size_after: int
    witness: tuple
    digest: str

    def to_jsonable(self) -> dict:
        return {
            "task": self.task_id,
            "category": self.category,
            "op": self.op,
            "args": list(self.args),
            "before": self.size_before,
            "after": self.size_after,
            "witness": _thaw(self.witness),
            "digest": self.digest,
        }

    @staticmethod
    def from_jsonable(data: dict) -> "TaskReport":
        return TaskReport(
            task_id=data["task"],
            category=data["category"],
            op=data["op"],
            args=_freeze(data["args"]),
            size_before=data["before"],
            size_after=data["after"],
            witness=_freeze(data["witness"]),
            digest=data["digest"],
        )


def _freeze(x):
    return tuple(_freeze(v) for v in x) if isinstance(x, list) else x


def _thaw(x):
    return [_thaw(v) for v in x] if isinstance(x, tuple) else x


@dataclass(frozen=True)
class GenericApproximation:
    final: Condition
    log: tuple[TaskReport, ...]
    seed: int


class TaskFailure(RuntimeError):
    def __init__(self, task: str, cause: Exception):
        super().__init__(f"task {task} failed: {cause}")
        self.task = task
        self.cause = cause


# -- the builder -------------------------------------------------------------------


class _Run:
    """Mutable builder state; ``on_step`` observes each condition."""

    def __init__(self, ctx: PosetContext, seed: int, on_step=None):
        self.ctx = ctx
        self.seed = seed
        self.cond = EMPTY_CONDITION
        self.log: list[TaskReport] = []
        self.remaining_bits: dict[Word, int] = {}
        self.on_step = on_step

    def emit(self, category: str, op: str, args: tuple, before: Condition,
             witness: tuple) -> None:
        self.log.append(TaskReport(
            task_id=len(self.log),
            category=category,
            op=op,
            args=args,
            size_before=before.size(),
            size_after=self.cond.size(),
            witness=witness,
            digest=condition_digest(self.cond),
        ))
        if self.on_step is not None:
            self.on_step(self.cond)

    def deepen_coding(self, w: Word, category: str, note: Optional[str] = None) -> None:
        before = self.cond
        level = validate(before, self.ctx).level_map[w]
        self.cond = extend_coding(before, w, self.ctx)
        if self.remaining_bits.get(w, 0) > 0:
            self.remaining_bits[w] -= 1
        new_pairs = [list(p) for p in self.cond.s.new_pairs(before.s)]
        witness = (render(w), level + 1, tuple(_freeze(new_pairs)))
        if note:
            witness = witness + (note,)
        self.emit(category, "coding-extension", (render(w),), before, witness)


def _drive(run: _Run, tasks: TaskList) -> None:
    ctx = run.ctx

    for w in tasks.registrations:
        before = run.cond
        run.cond = register_word(before, w, ctx)
        core, _ = cyclic_core(w)
        run.emit("register", "fixed-point-registration", (render(w),), before,
                 (render(core),))

    for w, bits in tasks.coding:
        before = run.cond
        run.cond = register_coding(before, w, ctx)
        run.remaining_bits[w] = bits
        run.emit("register", "coding-registration", (render(w),), before,
                 (run.cond.anchor_map[w],))

    domain_queue = list(range(tasks.domain_up_to))
    range_queue = list(range(tasks.range_up_to))
    coding_queue = [
        w for bit in range(max((b for _, b in tasks.coding), default=0))
        for w, b in tasks.coding if bit < b
    ]
    hit_queue = [
        (i, task)
        for rep in range(max((t.repetitions for t in tasks.hits), default=0))
        for i, task in enumerate(tasks.hits) if rep < task.repetitions
    ]
    constraint_queue = list(tasks.constraints)
    hit_floor = {i: task.threshold for i, task in enumerate(tasks.hits)}

    def step_domain():
        n = domain_queue.pop(0)
        before = run.cond
        try:
            run.cond = extend_domain(before, n, ctx)
        except CodingConflictError as exc:
            run.deepen_coding(exc.word, "domain", note=f"unblocks domain {n}")
            before = run.cond
            if n not in run.cond.s.domain:
                run.cond = extend_domain(run.cond, n, ctx)
        run.emit("domain", "domain-extension", (n,), before,
                 (n, run.cond.s.apply(1, n)))

    def step_range():
        n = range_queue.pop(0)
        before = run.cond
        try:
            run.cond = extend_range(before, n, ctx)
        except CodingConflictError as exc:
            run.deepen_coding(exc.word, "range", note=f"unblocks range {n}")
            before = run.cond
            if n not in run.cond.s.image:
                run.cond = extend_range(run.cond, n, ctx)
        run.emit("range", "range-extension", (n,), before,
                 (run.cond.s.apply(-1, n), n))

    def step_coding():
        w = coding_queue.pop(0)
        if run.remaining_bits.get(w, 0) <= 0:
            return
        run.deepen_coding(w, "coding")

    def step_hit():
        i, task = hit_queue.pop(0)
        before = run.cond
        floor = hit_floor[i]
        run.cond, n = hit_with_witness(before, task.word, task.target, floor, ctx)
        hit_floor[i] = n + 1
        run.emit("hit", "hit-extension",
                 (render(task.word), task.target_spec, floor), before,
                 (n, task.target.forward(n)))

    def step_constraint():
        task = constraint_queue.pop(0)
        xi = task.xi
        label = f"constraint({render(task.word)},{task.m},{task.point},{xi})"
        try:
            if task.m is not None:
                m = task.m
                n, k = ctx.pairing.split(m)
                before = run.cond
                pinned = pin_value(before, task.word, n, k, ctx)
                if pinned is not before:
                    run.cond = pinned
                    run.emit("constraint", "pairing-realization",
                             (render(task.word), m), before, (n, k))
            else:
                n = task.point
                for _ in range(4):
                    before = run.cond
                    try:
                        extended = extend_word_value(before, task.word, n, ctx)
                    except CodingConflictError as exc:
                        run.deepen_coding(exc.word, "constraint",
                                          note=f"unblocks value at {n}")
                        continue
                    if extended is not before:
                        run.cond = extended
                        run.emit("constraint", "pairing-realization",
                                 (render(task.word), n), before,
                                 (n, eval_word(task.word, ctx.rep, run.cond.s, n, 1).value))
                    break
                value = eval_word(task.word, ctx.rep, run.cond.s, n, 1).value
                if value is None:
                    raise ValueError(f"could not realize a value at {n}")
                m = ctx.pairing.pair(n, value)
            before = run.cond
            run.cond = add_constraint(run.cond, task.word, m, xi, ctx)
            run.emit("constraint", "constraint-attachment",
                     (render(task.word), m, xi), before,
                     (run.cond.size(),))
        except (ValueError, CodingConflictError) as exc:
            raise TaskFailure(label, exc)

    steppers = (
        (domain_queue, step_domain),
        (range_queue, step_range),
        (coding_queue, step_coding),
        (hit_queue, step_hit),
        (constraint_queue, step_constraint),
    )
    while any(queue for queue, _ in steppers):
        for queue, step in steppers:
            if queue:
                step()


def run_builder(ctx: PosetContext, tasks: TaskList, seed: int = 0,
                on_step=None) -> GenericApproximation:
    """Meet every task from the empty condition; registrations first,
    then strict round-robin; all choices least-admissible."""
    run = _Run(ctx, seed, on_step=on_step)
    _drive(run, tasks)
    report = validate(run.cond, ctx)
    if not report.ok:
        raise TaskFailure("final-validation", RuntimeError(str(report.first)))
    return GenericApproximation(run.cond, tuple(run.log), seed)


# -- verification --------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    checks: tuple[Check, ...]

    def lines(self) -> list[str]:
        return [
            f"[{'pass' if c.ok else 'FAIL'}] {c.name}: {c.detail}"
            for c in self.checks
        ]


def verify_generic(approx: GenericApproximation, ctx: PosetContext,
                   tasks: TaskList) -> VerificationReport:
    """Re-derive every task's claim from the final condition, and check
    the log replays bit-exactly."""
    checks: list[Check] = []

    stage_conditions: list[Condition] = []
    replayed = run_builder(ctx, tasks, approx.seed,
                           on_step=stage_conditions.append)
    divergence = None
    for ours, theirs in zip(replayed.log, approx.log):
        if ours != theirs:
            divergence = ours.task_id
            break
    replay_ok = (
        divergence is None
        and len(replayed.log) == len(approx.log)
        and replayed.final == approx.final
    )
    checks.append(Check(
        "replay", replay_ok,
        "log and final condition reproduce bit-exactly" if replay_ok
        else f"divergence at report {divergence if divergence is not None else 'length/final'}",
    ))

    report = validate(approx.final, ctx)
    checks.append(Check(
        "validity", report.ok,
        "final condition satisfies all clauses" if report.ok else str(report.first),
    ))

    s_final = approx.final.s

    dom_ok = all(n in s_final.domain for n in range(tasks.domain_up_to))
    ran_ok = all(n in s_final.image for n in range(tasks.range_up_to))
    checks.append(Check(
        "injection-coverage", dom_ok and ran_ok,
        f"domain covers [0,{tasks.domain_up_to}), image covers [0,{tasks.range_up_to})"
        if dom_ok and ran_ok else "requested coverage missing",
    ))

    # fixed points of registered cores trace to their registration stage
    trace_ok, trace_detail = True, "no registrations"
    if replay_ok:
        for rep in approx.log:
            if rep.op != "fixed-point-registration":
                continue
            stage = stage_conditions[rep.task_id]
            core = parse(rep.witness[0])
            if not core.mentions_new:
                trace_detail = "all fixed points trace to registration stages"
                continue
            for m in sorted(fixed_points(core, ctx.rep, s_final)):
                path = eval_word(core, ctx.rep, s_final, m, 1).path
                if not subword_fixed_point_witness(core, path, ctx.rep, stage.s):
                    trace_ok = False
                    trace_detail = f"fixed point {m} of {render(core)} untraced"
                    break
            if not trace_ok:
                break
            trace_detail = "all fixed points trace to registration stages"
    checks.append(Check("fixed-point-trace", trace_ok, trace_detail))

    coding_ok, coding_detail = True, "no coding tasks"
    anchor_map = approx.final.anchor_map
    for w, bits in tasks.coding:
        want = ctx.target(w).prefix(bits)
        got = decode_bits(w, ctx.rep, s_final, anchor_map[w], limit=bits + 8)
        if got != want:
            coding_ok = False
            coding_detail = f"{render(w)} decodes {got}, wanted {want}"
            break
        coding_detail = "decoded bits equal requested targets exactly"
    checks.append(Check("coding-roundtrip", coding_ok, coding_detail))

    hits_ok, hits_detail = True, "no hit tasks"
    probe = max(s_final.coords, default=0) + 2
    for task in tasks.hits:
        agreements = [
            n for n in range(probe)
            if eval_word(task.word, ctx.rep, s_final, n, 1).value == task.target.forward(n)
        ]
        if len(agreements) < task.repetitions:
            hits_ok = False
            hits_detail = (
                f"target {task.target.name}: {len(agreements)} agreements,"
                f" wanted {task.repetitions}"
            )
            break
        hits_detail = "every hit target met its repetition count"
    checks.append(Check("hit-counts", hits_ok, hits_detail))

    guard_ok, guard_detail = True, "no constraints attached"
    if replay_ok:
        for rep in approx.log:
            if rep.op != "constraint-attachment":
                continue
            stage = stage_conditions[rep.task_id]
            _, m, xi = rep.args
            member = ctx.member((ctx.family.stage, m, xi))
            added = s_final.new_pairs(stage.s)
            meets = [p for p in added if member.contains_pair(*p)]
            if meets:
                guard_ok = False
                guard_detail = f"pairs {meets} meet attached graph (m={m}, xi={xi})"
                break
            guard_detail = "post-attachment pairs avoid every attached graph"
    checks.append(Check("constraint-avoidance", guard_ok, guard_detail))

    passed = all(c.ok for c in checks)
    return VerificationReport(passed, tuple(checks))


# -- log files -------------------------------------------------------------------------


def write_log(path, approx: GenericApproximation) -> None:
    with open(path, "w") as fh:
        for report in approx.log:
            fh.write(canonical_json(report.to_jsonable()) + "\n")


def read_log(path) -> tuple[TaskReport, ...]:
    """Parse a log file, insisting every line is in canonical form (any
    byte-level tampering either breaks parsing or the canonical echo)."""
    reports = []
    with open(path, "rb") as fh:
        for i, raw in enumerate(fh.read().splitlines()):
            text = raw.decode("utf-8")
            data = json.loads(text)
            report = TaskReport.from_jsonable(data)
            if canonical_json(report.to_jsonable()) != text:
                raise ValueError(f"log line {i} is not in canonical form")
            reports.append(report)
    return tuple(reports)

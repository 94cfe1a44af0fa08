import json
import random

import pytest

from cofin.coding import TargetBits, decode_bits
from cofin.families import ConstraintTable, build_family, cantor_pairing
from cofin.forcing import HitTarget, PosetContext, validate, leq, EMPTY_CONDITION
from cofin.generic import (
    ConstraintTask,
    HitTask,
    TaskFailure,
    TaskList,
    TaskReport,
    condition_digest,
    read_log,
    run_builder,
    verify_generic,
    write_log,
)
from cofin.perms import single_zshift
from cofin.words import parse

A = parse("a")
BA = parse("b.a")
REP = single_zshift()


def swap_target():
    return HitTarget("pair-swap", lambda n: n + 1 if n % 2 == 0 else n - 1)


def basic_ctx(bits_by_word=None, family=None, eligible=None):
    return PosetContext.make(
        REP, family=family, eligible=eligible,
        targets={
            parse(t): TargetBits.from_bits(b)
            for t, b in (bits_by_word or {}).items()
        },
    )


def test_domain_only_run_gives_total_injection_on_window():
    ctx = basic_ctx()
    tasks = TaskList.make(domain_up_to=5)
    approx = run_builder(ctx, tasks, seed=0)
    assert all(n in approx.final.s.domain for n in range(5))
    assert validate(approx.final, ctx).ok


def test_coding_run_decodes_requested_bits():
    rng = random.Random(0)
    bits = tuple(rng.randrange(2) for _ in range(8))
    ctx = basic_ctx({"a": bits})
    tasks = TaskList.make(coding={A: 8})
    approx = run_builder(ctx, tasks, seed=0)
    assert decode_bits(A, REP, approx.final.s, approx.final.anchor_map[A]) == bits


def test_identical_inputs_identical_logs():
    ctx = basic_ctx({"a": (1, 0, 1)})
    tasks = TaskList.make(domain_up_to=3, range_up_to=2, coding={A: 3})
    one = run_builder(ctx, tasks, seed=0)
    two = run_builder(ctx, tasks, seed=0)
    assert one.log == two.log
    assert one.final == two.final


def test_log_monotone_under_extension_order():
    ctx = basic_ctx({"a": (1, 0, 1, 1)})
    tasks = TaskList.make(
        domain_up_to=4, range_up_to=3, coding={A: 4},
        hits=[HitTask(A, swap_target(), ("swap",), 0, 3)],
    )
    conditions = []
    approx = run_builder(ctx, tasks, seed=0, on_step=conditions.append)
    chain = [EMPTY_CONDITION] + conditions
    for earlier, later in zip(chain, chain[1:]):
        assert leq(later, earlier, ctx)
    for earlier in chain:
        assert leq(approx.final, earlier, ctx)


def test_mixed_run_with_constraints_and_hits():
    psi = cantor_pairing()
    family = build_family(stage=0, m_count=1, xi_count=2, seed=3)
    ctx = PosetContext.make(
        REP, family=family,
        eligible=ConstraintTable.from_dict({}, default=[0, 1]),
        targets={A: TargetBits.from_bits((1, 0, 1, 1))},
    )
    tasks = TaskList.make(
        domain_up_to=4,
        range_up_to=2,
        coding={A: 4},
        hits=[HitTask(A, swap_target(), ("swap",), 0, 4)],
        constraints=[
            ConstraintTask(A, xi=0, m=psi.pair(0, 1)),
            ConstraintTask(A, xi=1, point=2),
        ],
    )
    approx = run_builder(ctx, tasks, seed=0)
    report = verify_generic(approx, ctx, tasks)
    assert report.passed, report.lines()


def test_verify_detects_mutation():
    ctx = basic_ctx({"a": (1, 0)})
    tasks = TaskList.make(domain_up_to=2, coding={A: 2})
    approx = run_builder(ctx, tasks, seed=0)
    # mutate one witness pair deep in the log
    target = None
    for i, rep in enumerate(approx.log):
        if rep.op == "domain-extension":
            target = i
            break
    tampered = list(approx.log)
    rep = tampered[target]
    tampered[target] = TaskReport(
        rep.task_id, rep.category, rep.op, rep.args,
        rep.size_before, rep.size_after,
        (rep.witness[0], (rep.witness[1] or 0) + 1), rep.digest,
    )
    from cofin.generic import GenericApproximation

    bad = GenericApproximation(approx.final, tuple(tampered), approx.seed)
    report = verify_generic(bad, ctx, tasks)
    assert not report.passed
    assert any(c.name == "replay" and not c.ok for c in report.checks)


def test_log_file_roundtrip_and_canonical_form(tmp_path):
    ctx = basic_ctx({"a": (1, 0)})
    tasks = TaskList.make(domain_up_to=2, coding={A: 2})
    approx = run_builder(ctx, tasks, seed=0)
    path = tmp_path / "run.jsonl"
    write_log(path, approx)
    assert read_log(path) == approx.log
    # a whitespace-only tweak parses as the same JSON but is not canonical
    lines = path.read_bytes().splitlines()
    lines[0] = lines[0].replace(b":", b": ", 1)
    path.write_bytes(b"\n".join(lines) + b"\n")
    with pytest.raises(ValueError):
        read_log(path)


def test_empty_tasklist_vacuous_run():
    ctx = basic_ctx()
    approx = run_builder(ctx, TaskList.make(), seed=0)
    assert approx.final == EMPTY_CONDITION
    report = verify_generic(approx, ctx, TaskList.make())
    assert report.passed


def test_constraint_realization_failure_is_structured():
    family = build_family(stage=0, m_count=1, xi_count=1, seed=0)
    ctx = PosetContext.make(
        REP, family=family,
        eligible=ConstraintTable.from_dict({}, default=[]),  # nothing eligible
        targets={A: TargetBits.from_bits((1,))},
    )
    tasks = TaskList.make(
        coding={A: 1},
        constraints=[ConstraintTask(A, xi=0, m=cantor_pairing().pair(5, 6))],
    )
    with pytest.raises(TaskFailure):
        run_builder(ctx, tasks, seed=0)


def test_condition_digest_stable():
    ctx = basic_ctx({"a": (1,)})
    tasks = TaskList.make(coding={A: 1})
    a1 = run_builder(ctx, tasks, seed=0)
    a2 = run_builder(ctx, tasks, seed=0)
    assert condition_digest(a1.final) == condition_digest(a2.final)

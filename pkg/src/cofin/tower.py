"""Staged growth of a cofinitary representation.

Each stage runs the single-step poset builder against the current ground
representation, then promotes the resulting finite injection to a total
bijection (least-available-value completion outside the built region)
and adjoins it as a new ground generator.  Stage bookkeeping mirrors the
iteration's index arithmetic at finite scale: generator slots advance by
a fixed block size, tracked coding words are enumerated by (length,
display-lex) with the bare new letter first, and each word's target bits
encode one stage set and one slot set through the 2^m / 3^m split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .coding import TargetBits, decode_bits
from .families import build_family, ConstraintTable
from .forcing import PosetContext
from .generic import (
    GenericApproximation,
    TaskList,
    canonical_json,
    condition_digest,
    run_builder,
)
from .perms import GroundPermutation, GroundRepresentation, PartialInjection
from .words import Word, parse, render

_ENCODE_CAP = 30


def build_zw(stage_set, slot_set) -> frozenset[int]:
    """The target set {2^m : m in stage_set} union {3^m : m in slot_set}.

    Note 2^0 = 3^0 = 1: membership of 1 means 0 lies in one of the two
    inputs, without saying which.  Callers that need exact decoding
    shift their sets first (see encode_sets / decode_sets).
    """
    for m in tuple(stage_set) + tuple(slot_set):
        if not 0 <= m <= _ENCODE_CAP:
            raise ValueError(f"set element {m} out of encodable range")
    return frozenset(2 ** m for m in stage_set) | frozenset(3 ** m for m in slot_set)


def encode_sets(stage_set, slot_set, offset: int = 1) -> frozenset[int]:
    """build_zw after shifting both inputs by ``offset`` (kills the
    2^0 = 3^0 collision for the default offset 1)."""
    return build_zw(
        frozenset(m + offset for m in stage_set),
        frozenset(m + offset for m in slot_set),
    )


def decode_sets(z, offset: int = 1) -> tuple[frozenset[int], frozenset[int]]:
    """Invert encode_sets; rejects elements that are not pure powers."""
    stage_set, slot_set = set(), set()
    for x in sorted(z):
        if x <= 0:
            raise ValueError(f"non-positive element {x}")
        if x == 1:
            raise ValueError("element 1 is ambiguous; encode with an offset")
        e2 = 0
        y = x
        while y % 2 == 0:
            y //= 2
            e2 += 1
        if y == 1:
            stage_set.add(e2 - offset)
            continue
        e3 = 0
        while y % 3 == 0:
            y //= 3
            e3 += 1
        if y == 1 and e2 == 0:
            slot_set.add(e3 - offset)
            continue
        raise ValueError(f"element {x} is neither a power of 2 nor of 3")
    if any(m < 0 for m in stage_set | slot_set):
        raise ValueError("decoded element below the declared offset")
    return frozenset(stage_set), frozenset(slot_set)


# -- promotion -------------------------------------------------------------------


class _Completion:
    """Least-available-value completion of a finite injection to a total
    bijection of the naturals, computed lazily and deterministically."""

    def __init__(self, pairs):
        self.fwd = dict(pairs)
        self.bwd = {v: k for k, v in self.fwd.items()}
        if len(self.bwd) != len(self.fwd):
            raise ValueError("not injective")
        self.filled_fwd: dict[int, int] = {}
        self.filled_bwd: dict[int, int] = {}
        self.next_input = 0
        self.cursor = 0

    def _advance_cursor(self):
        while self.cursor in self.bwd or self.cursor in self.filled_bwd:
            self.cursor += 1

    def _fill_one(self):
        n = self.next_input
        self.next_input += 1
        if n in self.fwd:
            return
        self._advance_cursor()
        self.filled_fwd[n] = self.cursor
        self.filled_bwd[self.cursor] = n
        self.cursor += 1

    def forward(self, n: int) -> int:
        if n in self.fwd:
            return self.fwd[n]
        while n >= self.next_input:
            self._fill_one()
        return self.filled_fwd[n]

    def backward(self, v: int) -> int:
        if v in self.bwd:
            return self.bwd[v]
        while v not in self.filled_bwd:
            # the fill cursor passes every unused value eventually
            self._fill_one()
        return self.filled_bwd[v]


def promote(name: str, s: PartialInjection, window: int) -> GroundPermutation:
    """Promote a finite injection to a total ground permutation.

    The completion is the least-available-value rule; everything outside
    the built region is uncertified, so the permutation carries the
    stage window as its certification bound.
    """
    completion = _Completion(s.pairs)
    return GroundPermutation(
        name=name,
        forward=completion.forward,
        backward=completion.backward,
        fix_bound=window,
    )


# -- stage state -----------------------------------------------------------------


@dataclass(frozen=True)
class StageState:
    stage: int
    rep: GroundRepresentation
    index_base: int
    block: int
    window: int
    tracked: tuple[Word, ...]
    word_index: tuple[tuple[str, int], ...]
    stage_set: frozenset[int]
    slot_sets: tuple[tuple[int, frozenset[int]], ...]
    seed: int

    @property
    def word_index_map(self) -> dict[str, int]:
        return dict(self.word_index)

    def slot_set(self, slot: int) -> frozenset[int]:
        for idx, members in self.slot_sets:
            if idx == slot:
                return members
        return frozenset()

    def manifest(self) -> dict:
        return {
            "stage": self.stage,
            "index_base": self.index_base,
            "block": self.block,
            "window": self.window,
            "generators": list(self.rep.ground_order),
            "word_index": {t: i for t, i in self.word_index},
            "stage_set": sorted(self.stage_set),
            "slot_sets": {str(i): sorted(m) for i, m in self.slot_sets},
            "zw_offset": 1,
            "seed": self.seed,
        }


def initial_stage(rep: GroundRepresentation, block: int, window: int,
                  stage_sets: list, slot_sets: dict[int, frozenset[int]],
                  tracked_words: list[Word], seed: int) -> StageState:
    return _stage_state(0, rep, block, window, stage_sets, slot_sets,
                        tracked_words, seed)


def _stage_state(stage, rep, block, window, stage_sets, slot_sets, tracked, seed):
    tracked = tuple(sorted(tracked, key=lambda w: (len(w), render(w))))
    index = {render(w): i for i, w in enumerate(tracked)}
    base = stage * block
    stage_set = frozenset(stage_sets[stage]) if stage < len(stage_sets) else frozenset()
    slots = tuple(sorted(
        (base + index[render(w)], frozenset(slot_sets.get(base + index[render(w)], ())))
        for w in tracked
    ))
    return StageState(
        stage=stage, rep=rep, index_base=base, block=block, window=window,
        tracked=tracked, word_index=tuple(sorted(index.items(), key=lambda kv: kv[1])),
        stage_set=stage_set, slot_sets=slots, seed=seed,
    )


def stage_targets(state: StageState) -> dict[Word, TargetBits]:
    targets = {}
    for w in state.tracked:
        slot = state.index_base + state.word_index_map[render(w)]
        z = encode_sets(state.stage_set, state.slot_set(slot))
        targets[w] = TargetBits.from_set(z)
    return targets


def stage_bit_depth(state: StageState, w: Word) -> int:
    slot = state.index_base + state.word_index_map[render(w)]
    z = encode_sets(state.stage_set, state.slot_set(slot))
    return max(z, default=0) + 1


@dataclass(frozen=True)
class StageOutcome:
    state: StageState
    next_state: StageState
    approx: GenericApproximation
    generator: str


def next_stage(state: StageState, stage_sets: list, slot_sets: dict,
               seed: int, extra_tasks: Optional[TaskList] = None,
               family_members: tuple[int, int] = (2, 2)) -> StageOutcome:
    """Run one poset step against the current representation, promote the
    generic, and advance the bookkeeping."""
    family = build_family(
        stage=state.stage, m_count=family_members[0],
        xi_count=family_members[1], seed=seed,
    )
    ctx = PosetContext.make(
        state.rep,
        family=family,
        eligible=ConstraintTable(()),
        targets=stage_targets(state),
    )
    coding = {w: stage_bit_depth(state, w) for w in state.tracked}
    base = extra_tasks or TaskList.make()
    tasks = TaskList.make(
        domain_up_to=max(state.window, base.domain_up_to),
        range_up_to=max(state.window, base.range_up_to),
        coding=coding,
        registrations=base.registrations,
        hits=base.hits,
        constraints=base.constraints,
    )
    approx = run_builder(ctx, tasks, seed=seed)

    name = f"g{state.stage}"
    promoted = promote(name, approx.final.s, state.window)
    new_rep = GroundRepresentation(
        perms=state.rep.perms + (promoted,),
        word_fix_bound=max(state.rep.word_fix_bound, state.window),
    )
    nxt = _stage_state(
        state.stage + 1, new_rep, state.block, state.window,
        stage_sets, slot_sets, list(state.tracked), seed,
    )
    return StageOutcome(state=state, next_state=nxt, approx=approx, generator=name)


def run_tower(rep: GroundRepresentation, stages: int, block: int, window: int,
              stage_sets: list, slot_sets: dict, tracked_words: list[Word],
              seed: int, family_members: tuple[int, int] = (2, 2)) -> list[StageOutcome]:
    state = initial_stage(rep, block, window, stage_sets, slot_sets,
                          tracked_words, seed)
    outcomes = []
    for _ in range(stages):
        outcome = next_stage(state, stage_sets, slot_sets, seed,
                             family_members=family_members)
        outcomes.append(outcome)
        state = outcome.next_state
    return outcomes


def stage_decode(outcome: StageOutcome) -> dict[str, tuple[list[int], list[int]]]:
    """Recover each tracked word's stage and slot sets from the built
    injection; exact when the run coded every target bit."""
    state = outcome.state
    rep = state.rep
    final = outcome.approx.final
    decoded = {}
    for w in state.tracked:
        bits = decode_bits(
            w, rep, final.s, final.anchor_map[w],
            limit=stage_bit_depth(state, w) + 4,
        )
        members = frozenset(k for k, b in enumerate(bits) if b)
        stage_set, slot_set = decode_sets(members)
        decoded[render(w)] = (sorted(stage_set), sorted(slot_set))
    return decoded


def write_tower(out_dir, outcomes: list[StageOutcome]) -> None:
    """Directory layout: one subdirectory per stage with the run log and
    final condition, plus a root manifest with the index tables."""
    from .generic import write_log
    import os

    os.makedirs(out_dir, exist_ok=True)
    manifest = {"stages": []}
    for outcome in outcomes:
        stage_dir = os.path.join(out_dir, f"stage{outcome.state.stage}")
        os.makedirs(stage_dir, exist_ok=True)
        write_log(os.path.join(stage_dir, "log.jsonl"), outcome.approx)
        with open(os.path.join(stage_dir, "final.json"), "w") as fh:
            fh.write(canonical_json(outcome.approx.final.to_jsonable()) + "\n")
        entry = outcome.state.manifest()
        entry["generator"] = outcome.generator
        entry["final_digest"] = condition_digest(outcome.approx.final)
        manifest["stages"].append(entry)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(canonical_json(manifest) + "\n")

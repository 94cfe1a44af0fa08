"""The forcing poset: conditions, the extension order, and one
deterministic algorithm per density argument.

A condition consists of a finite partial injection ``s``, a
subword-closed finite set of protected ``words``, coding ``anchors``
(word to start point, each exactly coding a prefix of that word's target
bits), and ``guards`` (words to attached family members whose graphs
later extensions must avoid).

Every extension operation resolves its nondeterministic choices to the
least admissible value, making whole runs replayable, and finishes with
a self check (validation plus the extension order against the input);
a failure there raises CodingInvariantError with a diagnostic rather
than returning a corrupt condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .coding import (
    RequiresCoreWordError,
    TargetBits,
    checkpoint_index,
    exact_level,
    lead_ground_count,
    walk_path,
)
from .families import ADPermFamily, ConstraintTable, Pairing, cantor_pairing
from .perms import (
    EMPTY_INJECTION,
    GroundRepresentation,
    PartialInjection,
    eval_word,
    fixed_points,
    pair_image,
)
from .words import (
    Letter,
    Word,
    cyclic_core,
    parse,
    render,
    shift_subword_closure,
    subwords,
)


class CodingConflictError(RuntimeError):
    """The requested point is the pending end of a coding path; the
    caller must extend that word's coding instead."""

    def __init__(self, word: Word, point: int):
        super().__init__(f"{point} ends the coding path of {render(word)}")
        self.word = word
        self.point = point


class ConstraintEligibilityError(ValueError):
    """The (m, xi) pair is not eligible for attachment at this word."""


class HitPreconditionError(RuntimeError):
    """A hit target failed its (windowed) preconditions or no admissible
    agreement point was found below the scan cap."""


class CodingInvariantError(RuntimeError):
    """An extension produced a state the density arguments rule out;
    carries a diagnostic for the offending operation."""


# -- conditions -----------------------------------------------------------------


def _word_order(w: Word) -> tuple:
    return (len(w), render(w))


@dataclass(frozen=True)
class Condition:
    s: PartialInjection
    words: frozenset[Word]
    anchors: tuple[tuple[Word, int], ...]
    guards: tuple[tuple[Word, tuple[tuple[int, int, int], ...]], ...]

    @staticmethod
    def make(s: PartialInjection = EMPTY_INJECTION,
             words: Iterable[Word] = (),
             anchors: dict[Word, int] | None = None,
             guards: dict[Word, Iterable[tuple[int, int, int]]] | None = None) -> "Condition":
        anchors = anchors or {}
        guards = guards or {}
        return Condition(
            s=s,
            words=frozenset(words),
            anchors=tuple(sorted(anchors.items(), key=lambda kv: _word_order(kv[0]))),
            guards=tuple(
                (w, tuple(sorted(keys)))
                for w, keys in sorted(guards.items(), key=lambda kv: _word_order(kv[0]))
                if keys
            ),
        )

    @property
    def anchor_map(self) -> dict[Word, int]:
        return dict(self.anchors)

    @property
    def guard_map(self) -> dict[Word, tuple[tuple[int, int, int], ...]]:
        return dict(self.guards)

    @property
    def guard_keys(self) -> frozenset[tuple[int, int, int]]:
        return frozenset(k for _, keys in self.guards for k in keys)

    def size(self) -> int:
        return len(self.s)

    def replace_s(self, s: PartialInjection) -> "Condition":
        return Condition(s, self.words, self.anchors, self.guards)

    def to_jsonable(self) -> dict:
        return {
            "s": [list(p) for p in self.s.pairs],
            "words": sorted(render(w) for w in self.words),
            "anchors": [[render(w), m] for w, m in self.anchors],
            "guards": [
                [render(w), [list(k) for k in keys]] for w, keys in self.guards
            ],
        }

    @staticmethod
    def from_jsonable(data: dict) -> "Condition":
        return Condition.make(
            s=PartialInjection(tuple((int(a), int(b)) for a, b in data["s"])),
            words=[parse(t) for t in data["words"]],
            anchors={parse(t): int(m) for t, m in data["anchors"]},
            guards={
                parse(t): [tuple(int(x) for x in k) for k in keys]
                for t, keys in data["guards"]
            },
        )


EMPTY_CONDITION = Condition.make()


@dataclass(frozen=True)
class PosetContext:
    """Everything a condition is validated and extended against."""

    rep: GroundRepresentation
    pairing: Pairing = field(default_factory=cantor_pairing)
    family: Optional[ADPermFamily] = None
    eligible: ConstraintTable = field(default_factory=lambda: ConstraintTable(()))
    targets: tuple[tuple[Word, TargetBits], ...] = ()

    @staticmethod
    def make(rep, family=None, eligible=None, targets: dict[Word, TargetBits] | None = None,
             pairing: Pairing | None = None) -> "PosetContext":
        return PosetContext(
            rep=rep,
            pairing=pairing or cantor_pairing(),
            family=family,
            eligible=eligible or ConstraintTable(()),
            targets=tuple(sorted((targets or {}).items(), key=lambda kv: _word_order(kv[0]))),
        )

    def target(self, w: Word) -> TargetBits:
        for word_, bits in self.targets:
            if word_ == w:
                return bits
        raise KeyError(f"no target bits declared for {render(w)}")

    def has_target(self, w: Word) -> bool:
        return any(word_ == w for word_, _ in self.targets)

    def member(self, key: tuple[int, int, int]):
        stage, m, xi = key
        if self.family is None or self.family.stage != stage:
            raise KeyError(f"no ambient family for stage {stage}")
        return self.family.member(m, xi)


# -- validation -----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    clause: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...]
    levels: tuple[tuple[Word, int], ...]

    @property
    def first(self) -> Optional[Violation]:
        return self.violations[0] if self.violations else None

    @property
    def level_map(self) -> dict[Word, int]:
        return dict(self.levels)


def validate(p: Condition, ctx: PosetContext) -> ValidationReport:
    """Check every condition clause; never raises, reports violations by
    clause name in clause order."""
    violations: list[Violation] = []

    # clause: injection (holds by construction of PartialInjection)
    seen_dom, seen_ran = set(), set()
    for n, n2 in p.s.pairs:
        if n in seen_dom or n2 in seen_ran:
            violations.append(Violation("injection", f"pair ({n},{n2}) repeats a coordinate"))
        seen_dom.add(n)
        seen_ran.add(n2)

    # clause: subword closure of the protected words
    for w in sorted(p.words, key=_word_order):
        if not w:
            violations.append(Violation("subword-closure", "empty word is protected"))
            continue
        missing = [u for u in subwords(w) if u not in p.words]
        if missing:
            violations.append(Violation(
                "subword-closure",
                f"{render(w)} lacks subword {render(missing[0])}",
            ))

    # clause: anchor domain
    for w, _ in p.anchors:
        if w not in p.words:
            violations.append(Violation("anchor-domain", f"{render(w)} not protected"))
        if not w.is_coding_word:
            violations.append(Violation("anchor-domain", f"{render(w)} is not a coding word"))

    # clause: guard eligibility
    for w, keys in p.guards:
        if w not in p.words or not w.is_coding_word:
            violations.append(Violation("guard-eligibility", f"{render(w)} not a protected coding word"))
            continue
        image = pair_image(w, ctx.rep, p.s, ctx.pairing)
        for key in keys:
            stage, m, xi = key
            try:
                ctx.member(key)
            except KeyError as exc:
                violations.append(Violation("guard-eligibility", str(exc)))
                continue
            if m not in image:
                violations.append(Violation(
                    "guard-eligibility",
                    f"{render(w)}: pairing value {m} not in the word's image",
                ))
            if xi not in ctx.eligible.eligible(w, m):
                violations.append(Violation(
                    "guard-eligibility",
                    f"{render(w)}: index {xi} not eligible at {m}",
                ))

    # clause: exact coding
    levels: list[tuple[Word, int]] = []
    for w, m in p.anchors:
        if not w.is_coding_word:
            continue
        try:
            bits = ctx.target(w)
        except KeyError:
            violations.append(Violation("exact-coding", f"{render(w)} has no target bits"))
            continue
        level = exact_level(w, ctx.rep, p.s, m, bits)
        if level is None:
            violations.append(Violation(
                "exact-coding",
                f"{render(w)} at {m} exactly codes no target prefix",
            ))
        else:
            levels.append((w, level))

    return ValidationReport(not violations, tuple(violations), tuple(levels))


# -- the extension order ----------------------------------------------------------


def subword_fixed_point_witness(w: Word, path_values: tuple[int, ...],
                                rep: GroundRepresentation,
                                s_base: PartialInjection) -> bool:
    """Whether some nonempty contiguous subword fixes the matching path
    value under the base injection (extension clause (B)'s witness)."""
    n = len(w.letters)
    for i in range(n):
        for j in range(i + 1, n + 1):
            u = Word(w.letters[i:j])
            point = path_values[i]
            if u.mentions_new:
                res = eval_word(u, rep, s_base, point, 1)
                if res.value == point:
                    return True
            elif rep.apply_word(u, point) == point:
                return True
    return False


def leq(q: Condition, p: Condition, ctx: PosetContext) -> bool:
    """The extension order: q extends p."""
    # (A) graphs and protected words extend
    if not q.s.extends(p.s) or not q.words >= p.words:
        return False
    # (D) anchors persist and agree (domain growth is forced by
    # transitivity: agreement on the bare common domain would let an
    # extension drop an anchor and the order would not compose)
    q_anchors = q.anchor_map
    for w, m in p.anchors:
        if q_anchors.get(w) != m:
            return False
    # (C) guards extend and new pairs avoid attached graphs
    q_guards = q.guard_map
    for w, keys in p.guards:
        if not set(q_guards.get(w, ())) >= set(keys):
            return False
    new_pairs = q.s.new_pairs(p.s)
    for key in sorted(p.guard_keys):
        f = ctx.member(key)
        if any(f.contains_pair(n, n2) for n, n2 in new_pairs):
            return False
    # (B) fixed points of protected words trace to old subword fixed points
    for w in sorted(p.words, key=_word_order):
        if not w.mentions_new:
            continue  # ground words never gain fixed points from s
        for m in sorted(fixed_points(w, ctx.rep, q.s)):
            path = eval_word(w, ctx.rep, q.s, m, 1).path
            if not subword_fixed_point_witness(w, path, ctx.rep, p.s):
                return False
    return True


# -- shared extension machinery ------------------------------------------------


def _closure_words(p: Condition) -> tuple[Word, ...]:
    return tuple(sorted(shift_subword_closure(p.words), key=_word_order))


def _apply_signed(u: Word, rep: GroundRepresentation, s: PartialInjection,
                  value: int, sign: int) -> Optional[int]:
    if not u.mentions_new:
        return rep.apply_word(u, value, sign=sign)
    target = u if sign == 1 else Word(tuple(l.inverse for l in reversed(u.letters)))
    return eval_word(target, rep, s, value, 1).value


@dataclass
class _Workspace:
    """Per-operation view of a condition: closures, guard members, and
    the anchor paths under the evolving injection."""

    p: Condition
    ctx: PosetContext
    closure: tuple[Word, ...] = ()
    grounds: tuple[Word, ...] = ()
    guards: tuple = ()

    def __post_init__(self):
        self.closure = _closure_words(self.p)
        self.grounds = tuple(w for w in self.closure if not w.mentions_new)
        self.guards = tuple(self.ctx.member(k) for k in sorted(self.p.guard_keys))

    def anchor_paths(self, s: PartialInjection):
        return {
            w: walk_path(w, self.ctx.rep, s, m)
            for w, m in self.p.anchors
        }

    def pending_end(self, s: PartialInjection, point: int, sign: int) -> Optional[Word]:
        """The anchor word whose coding path stalls at ``point`` awaiting
        a new-letter application of the given sign, if any."""
        for w, path in self.anchor_paths(s).items():
            if not path.cycled and path.awaiting == sign and path.terminus == point:
                return w
        return None

    def exclusion_base(self, s: PartialInjection, extra: Iterable[int] = ()) -> set[int]:
        base = set(s.domain) | set(s.image) | set(extra)
        base.update(m for _, m in self.p.anchors)
        for path in self.anchor_paths(s).values():
            base.update(path.values)
        return base

    def image_exclusions(self, s: PartialInjection, base: set[int]) -> set[int]:
        rep = self.ctx.rep
        first: set[int] = set(base)
        for e in sorted(base):
            for u in self.closure:
                for j in (1, -1):
                    v = _apply_signed(u, rep, s, e, j)
                    if v is not None:
                        first.add(v)
        out = set(first)
        for v in sorted(first):
            for g in self.grounds:
                for i in (1, -1):
                    out.add(rep.apply_word(g, v, sign=i))
        return out

    def ground_values_distinct(self, x: int) -> bool:
        rep = self.ctx.rep
        vals = [x]
        for g in self.grounds:
            vals.append(rep.apply_word(g, x, sign=1))
            vals.append(rep.apply_word(g, x, sign=-1))
        return len(vals) == len(set(vals))

    def in_protected_fix(self, s: PartialInjection, x: int) -> bool:
        rep = self.ctx.rep
        for u in self.closure:
            if u.mentions_new:
                res = eval_word(u, rep, s, x, 1)
                if res.value == x:
                    return True
            # ground fixed points are covered by ground_values_distinct
        return False

    def guard_blocks(self, n: int, n2: int) -> bool:
        return any(f.contains_pair(n, n2) for f in self.guards)

    def admissible_value(self, s: PartialInjection, branch: int, sign: int,
                         parity: Optional[tuple[Word, int]] = None,
                         extra_base: Iterable[int] = (),
                         avoid: Iterable[int] = (),
                         cap: int = 100000) -> int:
        """Least value x such that the new pair (branch, x) (or (x, branch)
        for sign -1) clears every avoidance requirement."""
        base = self.exclusion_base(s, extra_base)
        base.add(branch)
        images = self.image_exclusions(s, base)
        blocked = images | set(avoid)
        rep = self.ctx.rep
        for x in range(cap):
            if x in blocked:
                continue
            if not self.ground_values_distinct(x):
                continue
            if self.in_protected_fix(s, x):
                continue
            if parity is not None:
                chain, bit = parity
                landed = rep.apply_word(chain, x) if chain else x
                if landed % 2 != bit:
                    continue
            n, n2 = (branch, x) if sign == 1 else (x, branch)
            if self.guard_blocks(n, n2):
                continue
            return x
        raise CodingInvariantError(
            f"no admissible value below {cap} for branch {branch}"
        )


def _self_check(op: str, q: Condition, p: Condition, ctx: PosetContext) -> Condition:
    report = validate(q, ctx)
    if not report.ok:
        raise CodingInvariantError(f"{op} broke validity: {report.first}")
    if not leq(q, p, ctx):
        raise CodingInvariantError(f"{op} output does not extend its input")
    return q


# -- density extensions -----------------------------------------------------------


def extend_domain(p: Condition, n: int, ctx: PosetContext) -> Condition:
    """Least extension putting n into the domain of s."""
    if n in p.s.domain:
        return p
    ws = _Workspace(p, ctx)
    blocking = ws.pending_end(p.s, n, 1)
    if blocking is not None:
        raise CodingConflictError(blocking, n)
    value = ws.admissible_value(p.s, branch=n, sign=1, extra_base=(n,))
    q = p.replace_s(p.s.extended(n, value))
    return _self_check("extend_domain", q, p, ctx)


def extend_range(p: Condition, n: int, ctx: PosetContext) -> Condition:
    """Least extension putting n into the image of s."""
    if n in p.s.image:
        return p
    ws = _Workspace(p, ctx)
    blocking = ws.pending_end(p.s, n, -1)
    if blocking is not None:
        raise CodingConflictError(blocking, n)
    value = ws.admissible_value(p.s, branch=n, sign=-1, extra_base=(n,))
    q = p.replace_s(p.s.extended(value, n))
    return _self_check("extend_range", q, p, ctx)


def register_word(p: Condition, w: Word, ctx: PosetContext) -> Condition:
    """Protect the conjugate core of w (plus subwords), pinning the
    fixed-point budget of w from this condition onwards."""
    if not w:
        raise ValueError("the identity word cannot be registered")
    core, _ = cyclic_core(w)
    if core in p.words:
        return p
    q = Condition.make(
        s=p.s,
        words=p.words | {core} | subwords(core),
        anchors=p.anchor_map,
        guards={u: list(keys) for u, keys in p.guards},
    )
    return _self_check("register_word", q, p, ctx)


def register_coding(p: Condition, w: Word, ctx: PosetContext) -> Condition:
    """Open a coding anchor for w: the least fresh start point whose path
    stalls immediately, so the word exactly codes the empty prefix."""
    if not w.is_coding_word:
        raise RequiresCoreWordError(f"{render(w)} is not a coding word")
    if w in p.anchor_map:
        return p
    ctx.target(w)  # fail early when no bits are declared
    ws = _Workspace(p, ctx)
    taken = ws.exclusion_base(p.s)
    floor = max(taken, default=-1) + 1
    lead = lead_ground_count(w)
    m = floor
    while True:
        path = walk_path(w, ctx.rep, p.s, m, max_steps=lead + 1)
        if (
            path.steps == lead
            and path.awaiting is not None
            and not (set(path.values) & taken)
        ):
            break
        m += 1
    q = Condition.make(
        s=p.s,
        words=p.words | {w} | subwords(w),
        anchors={**p.anchor_map, w: m},
        guards={u: list(keys) for u, keys in p.guards},
    )
    return _self_check("register_coding", q, p, ctx)


def _parity_requirements(ws: _Workspace, s: PartialInjection,
                         group: list[Word], levels: dict[Word, int],
                         goals: dict[Word, int],
                         branch: int, sign: int) -> Optional[tuple[Word, int]]:
    """The parity rule the next choice must respect, if the step (or the
    forced ground run after it) crosses some group word's checkpoint.

    The density argument guarantees at most one word constrains any
    single step; two distinct constraints abort with a diagnostic.
    """
    ctx = ws.ctx
    found: list[tuple[Word, tuple[Word, int]]] = []
    for w2 in group:
        path = walk_path(w2, ctx.rep, s, ws.p.anchor_map[w2])
        if path.cycled or path.awaiting != sign or path.terminus != branch:
            continue
        if path.steps >= goals[w2]:
            continue
        idx = checkpoint_index(w2, levels[w2])
        t = path.steps + 1  # the step the choice will occupy
        if idx < t:
            continue
        lh = len(w2)
        run = 0
        while w2.letters[(t + run) % lh].is_new is False:
            run += 1
        if idx > t + run:
            continue
        chain = Word(tuple(
            w2.letters[(t + j) % lh] for j in range(idx - t)
        ))
        bit = ctx.target(w2).bit(levels[w2])
        if bit is None:
            raise ValueError(
                f"target bits for {render(w2)} exhausted at level {levels[w2]}"
            )
        found.append((w2, (chain, bit)))
    if len(found) > 1:
        names = ", ".join(render(w) for w, _ in found)
        raise CodingInvariantError(
            f"two coding words constrain one step ({names}); "
            "this contradicts the stride axioms"
        )
    return found[0][1] if found else None


def extend_coding(p: Condition, w: Word, ctx: PosetContext) -> Condition:
    """Deepen w's exact coding by one bit.

    Every registered word whose path stalls at the same point awaiting
    the same application is carried along (its coding is deepened by one
    bit too); values are chosen stepwise, least admissible first, with
    the parity of checkpoint landings pinned to the words' target bits.
    """
    report = validate(p, ctx)
    if not report.ok:
        raise CodingInvariantError(f"extend_coding on invalid condition: {report.first}")
    anchor_map = p.anchor_map
    if w not in anchor_map:
        raise KeyError(f"{render(w)} has no coding anchor")
    levels = report.level_map
    ws = _Workspace(p, ctx)

    base = walk_path(w, ctx.rep, p.s, anchor_map[w])
    if base.cycled or base.awaiting is None:
        raise CodingInvariantError(f"coding path of {render(w)} does not stall")
    stall_point, stall_sign = base.terminus, base.awaiting

    group = sorted(
        (
            w2 for w2, m2 in p.anchors
            if (pp := walk_path(w2, ctx.rep, p.s, m2)).awaiting == stall_sign
            and not pp.cycled and pp.terminus == stall_point
        ),
        key=_word_order,
    )
    goals = {
        w2: checkpoint_index(w2, levels[w2]) + lead_ground_count(w2)
        for w2 in group
    }

    s_cur = p.s
    for w2 in group:
        while True:
            path = walk_path(w2, ctx.rep, s_cur, anchor_map[w2])
            if path.cycled:
                raise CodingInvariantError(f"path of {render(w2)} became periodic")
            if path.steps == goals[w2]:
                break
            if path.steps > goals[w2] or path.awaiting is None:
                raise CodingInvariantError(
                    f"path of {render(w2)} overshot its exactness target; "
                    "coding anchors are in lockstep"
                )
            parity = _parity_requirements(
                ws, s_cur, group, levels, goals, path.terminus, path.awaiting
            )
            x = ws.admissible_value(
                s_cur, branch=path.terminus, sign=path.awaiting,
                parity=parity, extra_base=(stall_point,),
            )
            if path.awaiting == 1:
                s_cur = s_cur.extended(path.terminus, x)
            else:
                s_cur = s_cur.extended(x, path.terminus)

    q = p.replace_s(s_cur)
    after = validate(q, ctx)
    if not after.ok:
        raise CodingInvariantError(f"extend_coding broke validity: {after.first}")
    for w2, lv in after.levels:
        want = levels[w2] + 1 if w2 in group else levels[w2]
        if lv != want:
            raise CodingInvariantError(
                f"coding level of {render(w2)} moved to {lv}, expected {want}"
            )
    if not leq(q, p, ctx):
        raise CodingInvariantError("extend_coding output does not extend its input")
    return q


def add_constraint(p: Condition, w: Word, m: int, xi: int,
                   ctx: PosetContext) -> Condition:
    """Attach the family member (m, xi) to w; later extensions avoid its graph."""
    if not w.is_coding_word:
        raise RequiresCoreWordError(f"{render(w)} is not a coding word")
    if m not in pair_image(w, ctx.rep, p.s, ctx.pairing):
        raise ConstraintEligibilityError(
            f"pairing value {m} is not in the image of {render(w)}"
        )
    if xi not in ctx.eligible.eligible(w, m):
        raise ConstraintEligibilityError(f"index {xi} is not eligible at {m}")
    member = ctx.member((ctx.family.stage, m, xi))
    guards = {u: list(keys) for u, keys in p.guards}
    if member.key in guards.get(w, ()):
        return p
    guards.setdefault(w, []).append(member.key)
    q = Condition.make(
        s=p.s,
        words=p.words | {w} | subwords(w),
        anchors=p.anchor_map,
        guards=guards,
    )
    return _self_check("add_constraint", q, p, ctx)


@dataclass(frozen=True)
class HitTarget:
    """A total injection the generic should agree with somewhere."""

    name: str
    forward: Callable[[int], int]

    def graph_pair(self, n: int) -> tuple[int, int]:
        return (n, self.forward(n))


def check_hit_preconditions(tau: HitTarget, p: Condition, ctx: PosetContext,
                            window: int = 128) -> list[str]:
    """Windowed proxies for the hit density lemma's hypotheses."""
    problems = []
    rep = ctx.rep
    ground_words = list(
        shift_subword_closure([w for w in p.words if not w.mentions_new])
    )
    # tau must differ from every short ground word somewhere in the window
    frontier: list[Word] = []
    seqs: list[tuple] = [()]
    for _ in range(2):
        seqs = [
            seq + (Letter(sym, sign),)
            for seq in seqs
            for sym in rep.ground_order
            for sign in (1, -1)
            if not (seq and seq[-1] == Letter(sym, sign).inverse)
        ]
        frontier.extend(Word(seq) for seq in seqs)
    for u in frontier + ground_words:
        if not u:
            continue
        if all(tau.forward(n) == rep.apply_word(u, n) for n in range(window)):
            problems.append(f"target {tau.name} coincides with ground word {render(u)}")
    members = [ctx.member(k) for k in sorted(p.guard_keys)]
    if members:
        free = sum(
            1 for n in range(window)
            if all(f.forward(n) != tau.forward(n) for f in members)
        )
        if free < 8:
            problems.append(
                f"target {tau.name} is (window-)covered by attached constraints"
            )
    return problems


def hit(p: Condition, w: Word, tau: HitTarget, m: int, ctx: PosetContext,
        scan_cap: int = 4096) -> Condition:
    """Force w[s](n) = tau(n) for the least admissible n at or above m."""
    q, _ = hit_with_witness(p, w, tau, m, ctx, scan_cap)
    return q


def hit_with_witness(p: Condition, w: Word, tau: HitTarget, m: int,
                     ctx: PosetContext, scan_cap: int = 4096) -> tuple[Condition, int]:
    if not w.is_coding_word:
        raise RequiresCoreWordError(f"{render(w)} is not a coding word")
    problems = check_hit_preconditions(tau, p, ctx)
    if problems:
        raise HitPreconditionError("; ".join(problems))
    ws = _Workspace(p, ctx)
    for n in range(m, m + scan_cap):
        existing = eval_word(w, ctx.rep, p.s, n, 1)
        if existing.value is not None:
            if existing.value == tau.forward(n):
                return p, n
            continue
        result = _try_pin(ws, p, w, n, tau.forward(n), ctx)
        if result is not None:
            return _self_check("hit", result, p, ctx), n
    raise HitPreconditionError(
        f"no admissible agreement point for {tau.name} in [{m}, {m + scan_cap})"
    )


def _try_pin(ws: _Workspace, p: Condition, w: Word, n: int, landing: int,
             ctx: PosetContext) -> Optional[Condition]:
    """Fill the path of n through w so the full word lands on ``landing``;
    None when some forced value is inadmissible for this n."""
    rep = ctx.rep
    letters = w.letters
    last_new = max(i for i, l in enumerate(letters) if l.is_new)
    # the value required just after the last new-letter application
    forced_after = landing
    for letter in reversed(letters[last_new + 1:]):
        forced_after = rep.apply(letter.inverse, forced_after)

    # quick requirement screen on the landing value itself
    base = ws.exclusion_base(p.s, extra=(n,))
    if landing in ws.image_exclusions(p.s, base):
        return None
    if ws.in_protected_fix(p.s, landing) or not ws.ground_values_distinct(landing):
        return None
    if ws.guard_blocks(n, landing):
        return None
    for u in ws.closure:
        for i in (1, -1):
            v = _apply_signed(u, rep, p.s, n, i)
            if v is None:
                continue
            if v == landing:
                return None
            for g in ws.grounds:
                for gi in (1, -1):
                    if rep.apply_word(g, landing, sign=gi) == v:
                        return None

    s_cur = p.s
    value = n
    for t, letter in enumerate(letters):
        if not letter.is_new:
            value = rep.apply(letter, value)
            continue
        nxt = s_cur.apply(letter.sign, value)
        if nxt is None:
            if t == last_new:
                nxt = forced_after
                pair = (value, nxt) if letter.sign == 1 else (nxt, value)
                if not _pin_pair_ok(ws, s_cur, pair):
                    return None
                s_cur = s_cur.extended(*pair)
            else:
                if ws.pending_end(s_cur, value, letter.sign) is not None:
                    return None
                try:
                    nxt = ws.admissible_value(
                        s_cur, branch=value, sign=letter.sign,
                        extra_base=(n,), avoid=(landing, forced_after),
                    )
                except CodingInvariantError:
                    return None
                s_cur = (
                    s_cur.extended(value, nxt) if letter.sign == 1
                    else s_cur.extended(nxt, value)
                )
        value = nxt
    if value != landing:
        return None
    q = p.replace_s(s_cur)
    report = validate(q, ctx)
    if not report.ok or not leq(q, p, ctx):
        return None
    return q


def _pin_pair_ok(ws: _Workspace, s: PartialInjection, pair: tuple[int, int]) -> bool:
    n, n2 = pair
    if n in s.domain or n2 in s.image:
        return False
    if ws.guard_blocks(n, n2):
        return False
    if ws.pending_end(s, n, 1) is not None or ws.pending_end(s, n2, -1) is not None:
        return False
    return True


def extend_word_value(p: Condition, w: Word, n: int, ctx: PosetContext) -> Condition:
    """Extend until w[s](n) is defined, choices free and least-admissible.

    Raises CodingConflictError when a needed application would extend a
    registered coding path (the caller deepens that word's coding and
    retries, exactly like the domain density step).
    """
    if not w.mentions_new:
        raise ValueError(f"{render(w)} evaluates totally already")
    cur = p
    for _ in range(sum(1 for l in w.letters if l.is_new) + 1):
        res = eval_word(w, ctx.rep, cur.s, n, 1)
        if res.value is not None:
            if cur is not p:
                _self_check("extend_word_value", cur, p, ctx)
            return cur
        ws = _Workspace(cur, ctx)
        stall = res.path[-1]
        letter = w.letters[len(res.path) - 1]
        blocking = ws.pending_end(cur.s, stall, letter.sign)
        if blocking is not None:
            raise CodingConflictError(blocking, stall)
        x = ws.admissible_value(cur.s, branch=stall, sign=letter.sign,
                                extra_base=(n,))
        cur = cur.replace_s(
            cur.s.extended(stall, x) if letter.sign == 1
            else cur.s.extended(x, stall)
        )
    raise CodingInvariantError(f"value of {render(w)} at {n} kept stalling")


def pin_value(p: Condition, w: Word, n: int, value: int,
              ctx: PosetContext) -> Condition:
    """Extend so that w[s](n) = value, filling the path like a hit with a
    fixed landing.  Raises ValueError when the pin is inconsistent with
    the condition or inadmissible."""
    existing = eval_word(w, ctx.rep, p.s, n, 1)
    if existing.value == value:
        return p
    if existing.value is not None:
        raise ValueError(
            f"{render(w)}[s]({n}) already equals {existing.value}, not {value}"
        )
    ws = _Workspace(p, ctx)
    result = _try_pin(ws, p, w, n, value, ctx)
    if result is None:
        raise ValueError(f"cannot pin {render(w)}[s]({n}) = {value}")
    return _self_check("pin_value", result, p, ctx)


def merge(p: Condition, q: Condition, ctx: PosetContext) -> Optional[Condition]:
    """The compatibility rule behind the Knaster property: conditions with
    the same injection and agreeing anchors merge to a common extension."""
    if p.s != q.s:
        return None
    qa = q.anchor_map
    for w, m in p.anchors:
        if w in qa and qa[w] != m:
            return None
    guards: dict[Word, list] = {}
    for w, keys in list(p.guards) + list(q.guards):
        bucket = guards.setdefault(w, [])
        for k in keys:
            if k not in bucket:
                bucket.append(k)
    r = Condition.make(
        s=p.s,
        words=p.words | q.words,
        anchors={**q.anchor_map, **p.anchor_map},
        guards=guards,
    )
    report = validate(r, ctx)
    if not report.ok:
        return None
    if not leq(r, p, ctx) or not leq(r, q, ctx):
        raise CodingInvariantError("merge result fails to extend its inputs")
    return r

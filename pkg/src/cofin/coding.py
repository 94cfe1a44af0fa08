"""Parity coding of bit strings along word orbits.

A coding word w (cyclically reduced, mentioning the new letter) codes a
bit string relative to a partial injection s and a start point m: the
k-th bit is the parity of (w[s])^(step(w) * (k+1))(m), where step is the
shape-derived stride.  Exact coding additionally demands that the
evaluation path of m stops at the first new-letter application after the
last checkpoint, so that one more bit always requires extending s.

Path positions count single letter applications; the checkpoint for bit
k therefore sits at path index step(w) * (k+1) * len(w), and the
critical point is the value one step before it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

from .perms import GroundRepresentation, PartialInjection
from .words import Word, render


class RequiresNewLetterError(ValueError):
    """The operation needs a word mentioning the new letter (class WD)."""


class RequiresCoreWordError(ValueError):
    """The operation needs a cyclically reduced word mentioning the new
    letter (class WS)."""


def _require_coding_word(w: Word) -> None:
    if not w.is_coding_word:
        raise RequiresCoreWordError(f"{render(w)} is not a coding word")


# -- shape and stride ----------------------------------------------------------

# shape alphabet codes, display order: a=0, a^-1=1, y=2, y^-1=3
_SHAPE_Y = "y"


def shape_codes(w: Word) -> tuple[int, ...]:
    """Display-order shape of a word: ground letters masked to y."""
    if not w.mentions_new:
        raise RequiresNewLetterError(f"{render(w)} does not mention the new letter")
    out = []
    for letter in reversed(w.letters):
        base = 0 if letter.is_new else 2
        out.append(base if letter.sign == 1 else base + 1)
    return tuple(out)


def _shape_blocked(prev: int, c: int) -> bool:
    # adjacent new-letter cancellation cannot occur in the shape of a
    # reduced word; adjacent y.y^-1 can (distinct ground letters mask to
    # the same symbol), so only the new-letter pair is excluded
    return prev >= 0 and c == prev ^ 1 and c < 2


@lru_cache(maxsize=None)
def _completions(length: int, prev: int, has_new: int) -> int:
    # number of realizable shape suffixes of the given length that end
    # up containing a new-letter; prev = -1 means no constraint
    if length == 0:
        return 1 if has_new else 0
    total = 0
    for c in range(4):
        if _shape_blocked(prev, c):
            continue
        total += _completions(length - 1, c, has_new or c < 2)
    return total


def shape_rank(codes: tuple[int, ...]) -> int:
    """Rank of a shape among all realizable new-letter-containing shape
    sequences, ordered by (length, display-lex)."""
    rank = sum(_completions(j, -1, 0) for j in range(1, len(codes)))
    has_new = 0
    for pos, code in enumerate(codes):
        prev = codes[pos - 1] if pos else -1
        for c in range(code):
            if _shape_blocked(prev, c):
                continue
            rank += _completions(len(codes) - pos - 1, c, has_new or c < 2)
        has_new = has_new or code < 2
    return rank


@dataclass(frozen=True)
class CodeShape:
    shape: str
    s_value: int


def code_step(w: Word) -> int:
    """The coding stride: 2 plus the shape's enumeration rank.

    Same-shape words share a stride, longer words get strictly larger
    strides, and the stride always exceeds 1.
    """
    return 2 + shape_rank(shape_codes(w))


def shape(w: Word) -> CodeShape:
    codes_ = shape_codes(w)
    sym = {0: "a", 1: "a^-1", 2: _SHAPE_Y, 3: f"{_SHAPE_Y}^-1"}
    return CodeShape(
        shape=".".join(sym[c] for c in codes_),
        s_value=2 + shape_rank(codes_),
    )


def checkpoint_index(w: Word, k: int) -> int:
    """Single-letter path index of the bit-k checkpoint value."""
    return code_step(w) * (k + 1) * len(w)


def lead_ground_count(w: Word) -> int:
    """Ground letters applied before the word's first new-letter step."""
    count = 0
    while not w.letters[count].is_new:
        count += 1
    return count


# -- path walking ----------------------------------------------------------------


@dataclass(frozen=True)
class PathState:
    """The evaluation path of a point under iterated word application.

    ``awaiting`` is the sign of the new-letter application at which the
    walk stalled; ``cycled`` marks periodic (infinite) paths instead.
    """

    values: tuple[int, ...]
    awaiting: Optional[int]
    cycled: bool

    @property
    def terminus(self) -> int:
        return self.values[-1]

    @property
    def steps(self) -> int:
        return len(self.values) - 1


def walk_path(w: Word, rep: GroundRepresentation, s: PartialInjection,
              m: int, max_steps: Optional[int] = None) -> PathState:
    """Walk the path of m under w[s] until it stalls, cycles, or hits
    ``max_steps``.  Pure ground words are rejected (their paths never
    stall)."""
    if not w.mentions_new:
        raise RequiresNewLetterError(f"{render(w)} does not mention the new letter")
    lh = len(w.letters)
    values = [m]
    seen = {(m, 0)}
    step = 0
    while max_steps is None or step < max_steps:
        letter = w.letters[step % lh]
        cur = values[-1]
        if letter.is_new:
            nxt = s.apply(letter.sign, cur)
            if nxt is None:
                return PathState(tuple(values), letter.sign, False)
        else:
            nxt = rep.apply(letter, cur)
        values.append(nxt)
        step += 1
        state = (nxt, step % lh)
        if state in seen:
            return PathState(tuple(values), None, True)
        seen.add(state)
    return PathState(tuple(values), None, False)


# -- coding predicates ----------------------------------------------------------


@dataclass(frozen=True)
class CodingStatus:
    """Outcome of checking one word's coding of a bit string."""

    word: str
    parameter: int
    bits: tuple[int, ...]
    coded: tuple[int, ...]
    ok: bool
    exact: bool
    critical_points: tuple[int, ...]

    def __bool__(self) -> bool:
        return self.ok


def coding_status(w: Word, rep: GroundRepresentation, s: PartialInjection,
                  m: int, bits: Sequence[int]) -> CodingStatus:
    """Check whether (w, s) codes ``bits`` with parameter m."""
    _require_coding_word(w)
    bits = tuple(int(b) for b in bits)
    budget = checkpoint_index(w, len(bits)) if bits else len(w)
    path = walk_path(w, rep, s, m, max_steps=budget)
    coded = []
    criticals = []
    for k, bit in enumerate(bits):
        idx = checkpoint_index(w, k)
        if idx > path.steps or path.values[idx] % 2 != bit:
            break
        coded.append(bit)
        criticals.append(path.values[idx - 1])
    return CodingStatus(
        word=render(w),
        parameter=m,
        bits=bits,
        coded=tuple(coded),
        ok=len(coded) == len(bits),
        exact=False,
        critical_points=tuple(criticals),
    )


def codes(w: Word, rep: GroundRepresentation, s: PartialInjection,
          m: int, bits: Sequence[int]) -> CodingStatus:
    return coding_status(w, rep, s, m, bits)


def exactly_codes(w: Word, rep: GroundRepresentation, s: PartialInjection,
                  m: int, bits: Sequence[int]) -> bool:
    """Codes ``bits`` and the path stops at the first new-letter step
    after the last checkpoint."""
    status = coding_status(w, rep, s, m, bits)
    if not status.ok:
        return False
    target = code_step(w) * len(bits) * len(w) + lead_ground_count(w)
    path = walk_path(w, rep, s, m, max_steps=target + len(w) + 1)
    return not path.cycled and path.awaiting is not None and path.steps == target


def exact_level(w: Word, rep: GroundRepresentation, s: PartialInjection,
                m: int, bit_source) -> Optional[int]:
    """The unique l with (w, s) exactly coding the length-l prefix of the
    target bits with parameter m, or None when no such l exists.

    ``bit_source`` provides ``bit(k) -> 0 | 1 | None``.
    """
    _require_coding_word(w)
    path = walk_path(w, rep, s, m)
    if path.cycled:
        return None
    span = code_step(w) * len(w)
    lead = lead_ground_count(w)
    if (path.steps - lead) % span or path.steps < lead:
        return None
    level = (path.steps - lead) // span
    for k in range(level):
        bit = bit_source.bit(k)
        if bit is None or path.values[checkpoint_index(w, k)] % 2 != bit:
            return None
    return level


def decode_bits(w: Word, rep: GroundRepresentation, s: PartialInjection,
                m: int, limit: int = 64) -> tuple[int, ...]:
    """The maximal bit string coded by (w, s) at m, capped at ``limit``."""
    _require_coding_word(w)
    path = walk_path(w, rep, s, m, max_steps=checkpoint_index(w, limit - 1))
    bits = []
    for k in range(limit):
        idx = checkpoint_index(w, k)
        if idx > path.steps:
            break
        bits.append(path.values[idx] % 2)
    return tuple(bits)


# -- bit targets ------------------------------------------------------------------


@dataclass(frozen=True)
class TargetBits:
    """A per-word target bit source: an explicit finite string, or the
    characteristic function of a finite set (defined at every index)."""

    explicit: Optional[tuple[int, ...]] = None
    members: Optional[frozenset[int]] = None

    def __post_init__(self):
        if (self.explicit is None) == (self.members is None):
            raise ValueError("target bits need exactly one of explicit/members")

    @staticmethod
    def from_bits(bits: Sequence[int]) -> "TargetBits":
        return TargetBits(explicit=tuple(int(b) for b in bits))

    @staticmethod
    def from_set(members) -> "TargetBits":
        return TargetBits(members=frozenset(int(x) for x in members))

    def bit(self, k: int) -> Optional[int]:
        if self.explicit is not None:
            return self.explicit[k] if 0 <= k < len(self.explicit) else None
        return 1 if k in self.members else 0

    def prefix(self, length: int) -> tuple[int, ...]:
        bits = tuple(self.bit(k) for k in range(length))
        if any(b is None for b in bits):
            raise ValueError(f"target bits exhausted before length {length}")
        return bits

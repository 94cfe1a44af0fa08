"""Pairing bijections, almost disjoint permutation families, and the
constraint eligibility table.

Family members are total injections of the naturals with pairwise almost
disjoint graphs.  Members are affine maps routed through stage-specific
3-adic output classes: within a stage two members agree at most once (at
a small input determined by their offsets), across stages the output
sets themselves are disjoint so graphs never meet at all.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .words import Word


# -- pairings -----------------------------------------------------------------


@dataclass(frozen=True)
class Pairing:
    """A recursive bijection between pairs of naturals and naturals."""

    name: str

    def pair(self, n: int, k: int) -> int:
        return (n + k) * (n + k + 1) // 2 + k

    def split(self, c: int) -> tuple[int, int]:
        w = (math.isqrt(8 * c + 1) - 1) // 2
        k = c - w * (w + 1) // 2
        return w - k, k

    def triple(self, xi: int, m: int, n: int) -> int:
        return self.pair(xi, self.pair(m, n))

    def triple_split(self, c: int) -> tuple[int, int, int]:
        xi, rest = self.split(c)
        m, n = self.split(rest)
        return xi, m, n


def cantor_pairing() -> Pairing:
    return Pairing(name="cantor")


# -- almost disjoint permutation families --------------------------------------


_OFFSET_SPAN = 16


@dataclass(frozen=True)
class FamilyMember:
    """One injection f(n) = 2 * 3^stage * (3 * (slope*n + offset) + 1).

    The output's 3-adic valuation after removing the single factor of two
    is exactly the stage, which keeps graphs of different stages fully
    disjoint; distinct slopes keep same-stage members almost disjoint.
    """

    stage: int
    m: int
    xi: int
    slope: int
    offset: int

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.stage, self.m, self.xi)

    def forward(self, n: int) -> int:
        return 2 * 3 ** self.stage * (3 * (self.slope * n + self.offset) + 1)

    def backward(self, v: int) -> Optional[int]:
        unit = 2 * 3 ** self.stage
        if v <= 0 or v % unit:
            return None
        q = v // unit
        if q % 3 != 1:
            return None
        k = (q - 1) // 3 - self.offset
        if k < 0 or k % self.slope:
            return None
        return k // self.slope

    def contains_pair(self, n: int, n2: int) -> bool:
        return self.forward(n) == n2

    def agreements(self, other: "FamilyMember", window: int) -> list[int]:
        return [n for n in range(window) if self.forward(n) == other.forward(n)]


def _member(stage: int, m: int, xi: int, seed: int, psi: Pairing) -> FamilyMember:
    slope = psi.pair(m, xi) + 2
    offset = random.Random(f"adfamily:{seed}:{stage}:{m}:{xi}").randrange(_OFFSET_SPAN)
    return FamilyMember(stage, m, xi, slope, offset)


@dataclass(frozen=True)
class ADPermFamily:
    """A deterministic stage-tagged family of almost disjoint injections.

    ``members`` enumerates the declared (m, xi) window; ``member`` also
    serves arbitrary m on demand (pairing values used as indices can be
    large), with the same deterministic construction.
    """

    stage: int
    m_count: int
    xi_count: int
    seed: int
    members: tuple[FamilyMember, ...]
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {f.key: f for f in self.members})

    def member(self, m: int, xi: int) -> FamilyMember:
        got = self._index.get((self.stage, m, xi))
        if got is not None:
            return got
        if m < 0 or not 0 <= xi < self.xi_count:
            raise KeyError(f"no family member (m={m}, xi={xi}) at stage {self.stage}")
        f = _member(self.stage, m, xi, self.seed, cantor_pairing())
        self._index[f.key] = f
        return f

    def overlap_cap(self) -> int:
        """Certified bound on same-stage pairwise graph intersections."""
        return 1

    def prefix_bound(self) -> int:
        """Agreements between distinct members only occur below this input."""
        return _OFFSET_SPAN

    def cofinitary_check(self, rep, window: int) -> list[str]:
        """Windowed input-contract check: members are fixed-point free,
        differ from short ground words, and stay almost disjoint."""
        problems = []
        for f in self.members:
            if any(f.forward(n) == n for n in range(window)):
                problems.append(f"member {f.key} has a fixed point below {window}")
            for sym in rep.ground_order:
                perm = rep.perm(sym)
                if all(f.forward(n) == perm.forward(n) for n in range(window)):
                    problems.append(f"member {f.key} coincides with ground {sym}")
        for i, f in enumerate(self.members):
            for g in self.members[i + 1:]:
                if len(f.agreements(g, window)) > self.overlap_cap():
                    problems.append(f"members {f.key} and {g.key} overlap too much")
        return problems


def build_family(stage: int, m_count: int, xi_count: int, seed: int,
                 pairing: Optional[Pairing] = None) -> ADPermFamily:
    """Deterministic family construction.

    Slopes are distinct per (m, xi) via the pairing rank; offsets are
    drawn from a seeded generator so families with different seeds
    differ while staying almost disjoint by construction.
    """
    if m_count < 1 or xi_count < 1:
        raise ValueError("family needs at least one m and one xi index")
    psi = pairing or cantor_pairing()
    members = tuple(
        _member(stage, m, xi, seed, psi)
        for m in range(m_count)
        for xi in range(xi_count)
    )
    return ADPermFamily(stage, m_count, xi_count, seed, members)


# -- constraint eligibility -----------------------------------------------------


@dataclass(frozen=True)
class ConstraintTable:
    """The eligibility sets: which family xi-indices a word may guard at
    each pairing value m.  Finite support with an optional per-word
    default."""

    entries: tuple[tuple[Word, tuple[tuple[int, frozenset[int]], ...]], ...]
    default: frozenset[int] = frozenset()

    @staticmethod
    def from_dict(table: dict[Word, dict[int, Iterable[int]]],
                  default: Iterable[int] = ()) -> "ConstraintTable":
        entries = tuple(
            (w, tuple(sorted((m, frozenset(xis)) for m, xis in per_word.items())))
            for w, per_word in sorted(table.items(), key=lambda kv: str(kv[0]))
        )
        return ConstraintTable(entries=entries, default=frozenset(default))

    def eligible(self, w: Word, m: int) -> frozenset[int]:
        for word_, per_word in self.entries:
            if word_ == w:
                for m_, xis in per_word:
                    if m_ == m:
                        return xis
                return self.default
        return self.default

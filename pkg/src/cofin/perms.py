"""Partial injections, ground permutations, and word evaluation.

Ground permutations are total bijections of the naturals given by closed
forms (the shift on the integers under the zig-zag encoding, and its
block-rotation conjugates).  Partial injections are the finite
approximations the forcing poset builds.  Word evaluation walks a word's
letters over an integer, recording the full path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .words import NEW, Letter, Word


class UnknownLetterError(KeyError):
    """A word letter names no declared ground permutation."""


# -- partial injections -------------------------------------------------------


class PartialInjection:
    """A finite injective partial map on the naturals, immutable."""

    __slots__ = ("pairs", "_fwd", "_bwd")

    def __init__(self, pairs: Iterable[tuple[int, int]] = ()):
        fwd: dict[int, int] = {}
        bwd: dict[int, int] = {}
        for n, n2 in pairs:
            if n in fwd and fwd[n] != n2:
                raise ValueError(f"not functional at {n}")
            if n2 in bwd and bwd[n2] != n:
                raise ValueError(f"not injective at {n2}")
            fwd[n] = n2
            bwd[n2] = n
        self.pairs: tuple[tuple[int, int], ...] = tuple(sorted(fwd.items()))
        self._fwd = fwd
        self._bwd = bwd

    def __len__(self) -> int:
        return len(self.pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, PartialInjection) and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash(self.pairs)

    def __repr__(self) -> str:
        return f"PartialInjection({list(self.pairs)!r})"

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self._fwd)

    @property
    def image(self) -> frozenset[int]:
        return frozenset(self._bwd)

    @property
    def coords(self) -> frozenset[int]:
        return frozenset(self._fwd) | frozenset(self._bwd)

    def apply(self, sign: int, value: int) -> Optional[int]:
        table = self._fwd if sign == 1 else self._bwd
        return table.get(value)

    def extended(self, n: int, n2: int) -> "PartialInjection":
        if self._fwd.get(n, n2) != n2 or self._bwd.get(n2, n) != n:
            raise ValueError(f"pair ({n},{n2}) conflicts with existing pairs")
        return PartialInjection(self.pairs + ((n, n2),))

    def extends(self, other: "PartialInjection") -> bool:
        return all(self._fwd.get(n) == n2 for n, n2 in other.pairs)

    def new_pairs(self, base: "PartialInjection") -> tuple[tuple[int, int], ...]:
        return tuple(p for p in self.pairs if p not in set(base.pairs))


EMPTY_INJECTION = PartialInjection()


# -- ground permutations -------------------------------------------------------


@dataclass(frozen=True)
class GroundPermutation:
    """A total bijection with computable forward and backward maps.

    ``fix_bound`` certifies that the permutation itself has no fixed
    points at or above it; word-level bounds live on the representation.
    """

    name: str
    forward: Callable[[int], int]
    backward: Callable[[int], int]
    fix_bound: int = 0

    def apply(self, sign: int, value: int) -> int:
        return self.forward(value) if sign == 1 else self.backward(value)


def _zig_decode(n: int) -> int:
    # 0, 1, -1, 2, -2, ... as 0, 1, 2, 3, 4, ...
    return (n + 1) // 2 if n % 2 else -(n // 2)


def _zig_encode(z: int) -> int:
    return 2 * z - 1 if z > 0 else -2 * z


def zshift() -> GroundPermutation:
    """Shift by one on the integers under the zig-zag encoding.

    Fixed-point free, infinite order; reduced powers have no fixed
    points, so a single-generator representation is freely generated
    and cofinitary with word bound 0.
    """
    return GroundPermutation(
        name="zshift",
        forward=lambda n: _zig_encode(_zig_decode(n) + 1),
        backward=lambda n: _zig_encode(_zig_decode(n) - 1),
        fix_bound=0,
    )


class FreeRegularAction:
    """The left-regular action of a rank-k free group on itself.

    Points of the action are the reduced words over k symbol pairs,
    enumerated by (length, display-lex); generator i sends the point w
    to g_i * w.  Left multiplication by any nonidentity word moves every
    point, so the induced permutations of the naturals freely generate a
    group whose nonidentity elements are fixed-point free: the certified
    word bound is exactly 0, at every rank.

    Rank 1 reproduces the zig-zag shift (the enumeration of b^z by
    length is the zig-zag enumeration of the integers).
    """

    def __init__(self, rank: int):
        if rank < 1:
            raise ValueError("free action needs rank at least 1")
        self.rank = rank
        self.n_letters = 2 * rank
        self.branch = max(self.n_letters - 1, 1)

    # letters are 0..2k-1, letter r's inverse is r ^ 1
    def _count(self, length: int) -> int:
        if length == 0:
            return 1
        return self.n_letters * self.branch ** (length - 1)

    def unrank(self, n: int) -> tuple[int, ...]:
        """The n-th reduced word, as display-order letter codes."""
        length = 0
        while True:
            c = self._count(length)
            if n < c:
                break
            n -= c
            length += 1
        out: list[int] = []
        for pos in range(length):
            allowed = [
                r for r in range(self.n_letters)
                if not out or r != out[-1] ^ 1
            ]
            span = self.branch ** (length - pos - 1)
            out.append(allowed[n // span])
            n %= span
        return tuple(out)

    def rank_of(self, word_codes: tuple[int, ...]) -> int:
        length = len(word_codes)
        n = sum(self._count(j) for j in range(length))
        for pos, code in enumerate(word_codes):
            allowed = [
                r for r in range(self.n_letters)
                if pos == 0 or r != word_codes[pos - 1] ^ 1
            ]
            n += allowed.index(code) * self.branch ** (length - pos - 1)
        return n

    def act(self, letter_code: int, n: int) -> int:
        point = self.unrank(n)
        # left multiplication prepends in display order, cancelling at the seam
        if point and point[0] == letter_code ^ 1:
            point = point[1:]
        else:
            point = (letter_code,) + point
        return self.rank_of(point)

    def generator(self, index: int, name: str) -> GroundPermutation:
        if not 0 <= index < self.rank:
            raise ValueError(f"generator index {index} out of range")
        fwd_code, bwd_code = 2 * index, 2 * index + 1
        return GroundPermutation(
            name=name,
            forward=lambda n, c=fwd_code: self.act(c, n),
            backward=lambda n, c=bwd_code: self.act(c, n),
            fix_bound=0,
        )


def free_representation(names: tuple[str, ...]) -> GroundRepresentation:
    """Freely generating cofinitary representation of the given rank,
    one generator per name, via the free regular action."""
    action = FreeRegularAction(len(names))
    return GroundRepresentation(
        perms=tuple(action.generator(i, nm) for i, nm in enumerate(names)),
        word_fix_bound=0,
    )


@dataclass(frozen=True)
class GroundRepresentation:
    """Finitely many named ground permutations, declared to freely
    generate a cofinitary group.

    ``word_fix_bound`` is the supplied certificate: no nonempty reduced
    ground word has fixed points at or above it.  The library families
    (zig-zag shift, free regular action) carry an exact bound of 0;
    promoted tower generators carry their certification window.  Either
    way it is an input contract, spot-checkable via ``spot_check``.
    """

    perms: tuple[GroundPermutation, ...]
    word_fix_bound: int = 0
    _by_name: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        names = [p.name for p in self.perms]
        if len(set(names)) != len(names):
            raise ValueError("duplicate ground permutation names")
        if NEW in names:
            raise ValueError(f"ground name {NEW!r} collides with the new letter")
        object.__setattr__(self, "_by_name", {p.name: p for p in self.perms})

    @property
    def ground_order(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.perms)

    def __contains__(self, sym: str) -> bool:
        return sym in self._by_name

    def perm(self, sym: str) -> GroundPermutation:
        try:
            return self._by_name[sym]
        except KeyError:
            raise UnknownLetterError(sym) from None

    def apply(self, letter: Letter, value: int) -> int:
        return self.perm(letter.sym).apply(letter.sign, value)

    def apply_word(self, w: Word, value: int, sign: int = 1) -> int:
        """Evaluate a pure ground word (or its inverse) at a value."""
        letters = w.letters if sign == 1 else tuple(
            l.inverse for l in reversed(w.letters)
        )
        for letter in letters:
            if letter.is_new:
                raise ValueError(f"{w} is not a pure ground word")
            value = self.apply(letter, value)
        return value

    def spot_check(self, max_len: int, window: int, cap: int) -> list[str]:
        """Windowed free-and-cofinitary check: every nonempty reduced
        ground word of length <= max_len has < cap fixed points below
        ``window``.  Returns human-readable violations, empty when clean."""
        problems = []
        frontier: list[tuple[Letter, ...]] = [()]
        for _ in range(max_len):
            nxt = []
            for seq in frontier:
                for sym in self.ground_order:
                    for sign in (1, -1):
                        letter = Letter(sym, sign)
                        if seq and seq[-1] == letter.inverse:
                            continue
                        nxt.append(seq + (letter,))
            frontier = nxt
            for seq in frontier:
                word_ = Word(seq)
                count = sum(
                    1 for n in range(window) if self.apply_word(word_, n) == n
                )
                if count >= cap:
                    problems.append(
                        f"word {word_} has {count} fixed points below {window}"
                    )
        return problems


def single_zshift(name: str = "b") -> GroundRepresentation:
    perm = zshift()
    return GroundRepresentation(
        perms=(GroundPermutation(name, perm.forward, perm.backward, 0),),
        word_fix_bound=0,
    )


def build_ground_representation(spec: dict | None) -> GroundRepresentation:
    """Construct a representation from the config's ground declaration.

    Accepted forms: {"kind": "zshift", "name": "b"} for the single shift
    or {"kind": "free", "names": ["b", "c", ...]} for the free regular
    action of the matching rank.  Missing spec defaults to the single
    shift named ``b``.
    """
    if not spec:
        return single_zshift()
    kind = spec.get("kind", "zshift")
    if kind == "zshift":
        return single_zshift(spec.get("name", "b"))
    if kind == "free":
        names = tuple(spec["names"])
        if len(set(names)) != len(names):
            raise ValueError("duplicate generator names")
        return free_representation(names)
    raise ValueError(f"unknown ground family kind {kind!r}")


# -- word evaluation -----------------------------------------------------------


@dataclass(frozen=True)
class EvalResult:
    value: Optional[int]
    path: tuple[int, ...]
    use_set: frozenset[int]


def _apply_letter(letter: Letter, rep: GroundRepresentation,
                  s: PartialInjection, value: int) -> Optional[int]:
    if letter.is_new:
        return s.apply(letter.sign, value)
    return rep.apply(letter, value)


def eval_word(w: Word, rep: GroundRepresentation, s: PartialInjection,
              m: int, power: int = 1) -> EvalResult:
    """Evaluate (w[s])^power at m stepwise, recording the evaluation path.

    The path lists every intermediate value of repeated letter
    application across all powers; it stops at the first undefined step
    and the result value is None exactly in that case.
    """
    if power < 1:
        raise ValueError("power must be at least 1")
    for letter in w.letters:
        if not letter.is_new and letter.sym not in rep:
            raise UnknownLetterError(letter.sym)
    path = [m]
    value: Optional[int] = m
    for _ in range(power):
        for letter in w.letters:
            value = _apply_letter(letter, rep, s, path[-1])
            if value is None:
                return EvalResult(None, tuple(path), frozenset(path))
            path.append(value)
    return EvalResult(value, tuple(path), frozenset(path))


def word_graph(w: Word, rep: GroundRepresentation,
               s: PartialInjection) -> dict[int, int]:
    """The complete finite graph of w[s] for a word mentioning the new letter.

    Every point in the domain of w[s] must feed its first new-letter
    application from dom(s) (or ran(s) for an inverse), so candidate
    inputs are preimages of those coordinates under the leading ground
    prefix; this is exhaustive, no window involved.
    """
    if not w.mentions_new:
        raise ValueError("word_graph needs a word that mentions the new letter")
    lead = 0
    while not w.letters[lead].is_new:
        lead += 1
    first = w.letters[lead]
    sources = s.domain if first.sign == 1 else s.image
    prefix = Word(w.letters[:lead])
    graph: dict[int, int] = {}
    for x in sources:
        m = rep.apply_word(prefix, x, sign=-1) if lead else x
        res = eval_word(w, rep, s, m, 1)
        if res.value is not None:
            graph[m] = res.value
    return graph


def fixed_points(w: Word, rep: GroundRepresentation, s: PartialInjection,
                 window: Optional[int] = None) -> frozenset[int]:
    """Fixed points of w[s].

    Complete for words mentioning the new letter (via the finite graph);
    window-relative for pure ground words, defaulting to the
    representation's certified word bound.
    """
    if not w:
        raise ValueError("the empty word fixes everything")
    if w.mentions_new:
        pts = {m for m, v in word_graph(w, rep, s).items() if m == v}
        if window is not None:
            pts = {m for m in pts if m < window}
        return frozenset(pts)
    bound = rep.word_fix_bound if window is None else window
    return frozenset(
        n for n in range(bound) if rep.apply_word(w, n) == n
    )


def pair_image(w: Word, rep: GroundRepresentation, s: PartialInjection,
               pairing) -> frozenset[int]:
    """The pairing applied to the graph of the finite partial map w[s]."""
    return frozenset(
        pairing.pair(n, v) for n, v in word_graph(w, rep, s).items()
    )

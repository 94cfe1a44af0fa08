"""Reduced group words over a ground alphabet plus one distinguished new letter.

Words are stored in application order: ``letters[0]`` is the first symbol
applied to an integer, so as a function the word is
``letters[-1] o ... o letters[0]``.  Display strings read the other way
round (composition order), e.g. ``b^-1.a.b`` applies ``b`` first.

The distinguished new letter (symbol ``a``) stands for the partial
injection being built; every other symbol names a ground permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

NEW = "a"


@dataclass(frozen=True, order=True)
class Letter:
    sym: str
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError(f"letter sign must be +1 or -1, got {self.sign}")

    @property
    def inverse(self) -> "Letter":
        return Letter(self.sym, -self.sign)

    @property
    def is_new(self) -> bool:
        return self.sym == NEW

    def __str__(self) -> str:
        return self.sym if self.sign == 1 else f"{self.sym}^-1"


def _reduce_tuple(raw: Iterable[Letter]) -> tuple[Letter, ...]:
    out: list[Letter] = []
    for letter in raw:
        if out and out[-1] == letter.inverse:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


@dataclass(frozen=True)
class Word:
    """A freely reduced word; the empty word is the identity."""

    letters: tuple[Letter, ...]

    def __post_init__(self) -> None:
        for cur, nxt in zip(self.letters, self.letters[1:]):
            if nxt == cur.inverse:
                raise ValueError(f"word is not reduced at {cur}|{nxt}")

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __str__(self) -> str:
        return render(self)

    def __repr__(self) -> str:
        return f"Word({render(self)!r})"

    @property
    def mentions_new(self) -> bool:
        """True when the new letter occurs, i.e. membership in WD."""
        return any(l.is_new for l in self.letters)

    @property
    def is_cyclically_reduced(self) -> bool:
        return len(self.letters) < 2 or self.letters[0] != self.letters[-1].inverse

    @property
    def is_coding_word(self) -> bool:
        """Cyclically reduced and mentioning the new letter (membership in WS)."""
        return self.mentions_new and self.is_cyclically_reduced

    def concat(self, other: "Word") -> "Word":
        """The reduced product; ``self`` is applied first."""
        return Word(_reduce_tuple(self.letters + other.letters))


EMPTY = Word(())


def word(*display_letters: Letter) -> Word:
    """Build a word from letters given in display (composition) order."""
    return reduce(reversed(display_letters))


def reduce(raw: Iterable[Letter]) -> Word:
    """Free reduction of a raw letter sequence given in application order."""
    return Word(_reduce_tuple(raw))


def inverse(w: Word) -> Word:
    return Word(tuple(l.inverse for l in reversed(w.letters)))


def subwords(w: Word) -> frozenset[Word]:
    """All nonempty contiguous subwords (automatically reduced)."""
    n = len(w.letters)
    return frozenset(
        Word(w.letters[i:j]) for i in range(n) for j in range(i + 1, n + 1)
    )


def rotations(w: Word) -> tuple[tuple[Letter, ...], ...]:
    """Literal circular shifts as raw letter tuples, no reduction applied.

    A shift of a word that is not cyclically reduced may fail to be
    reduced at the wrap-around; callers that need reduced words should
    shift the cyclic core instead (see ``shift_subword_closure``).
    """
    n = len(w.letters)
    if n == 0:
        return ((),)
    return tuple(w.letters[k:] + w.letters[:k] for k in range(n))


def circular_shifts(w: Word) -> frozenset[Word]:
    """The set of circular shifts of ``w`` as words.

    Raises ValueError when some literal shift is not reduced (happens
    exactly when ``w`` is nonempty and not cyclically reduced).
    """
    out = set()
    for rot in rotations(w):
        reduced = _reduce_tuple(rot)
        if len(reduced) != len(rot):
            raise ValueError(
                f"shift of {render(w)!r} is not reduced; shift its cyclic core instead"
            )
        out.add(Word(reduced))
    return frozenset(out)


def cyclic_core(w: Word) -> tuple[Word, Word]:
    """Split ``w = u^-1 . core . u`` with ``u`` maximal.

    Returns ``(core, u)`` where ``u`` is the conjugating word (applied
    first).  The core is nonempty for nonempty ``w`` and is cyclically
    reduced.
    """
    letters = w.letters
    lo, hi = 0, len(letters)
    while hi - lo >= 2 and letters[lo] == letters[hi - 1].inverse:
        lo += 1
        hi -= 1
    return Word(letters[lo:hi]), Word(letters[:lo])


@dataclass(frozen=True)
class WordClass:
    """Classification of a word for the coding machinery.

    ``core`` is the shortest conjugated subword (the cyclic core); it
    equals the word itself exactly when no proper conjugating split
    exists.  ``is_core_word`` is the WS property: the word mentions the
    new letter and admits no proper conjugate subword.
    """

    mentions_new: bool
    is_core_word: bool
    core: Word


def classify(w: Word) -> WordClass:
    core, conj = cyclic_core(w)
    return WordClass(
        mentions_new=w.mentions_new,
        is_core_word=w.mentions_new and not conj,
        core=core,
    )


def shift_subword_closure(words: Iterable[Word]) -> frozenset[Word]:
    """All nonempty reduced words arising as subwords of circular shifts.

    Unreduced shifts (of non-cyclically-reduced inputs) contribute the
    reductions of their slices; using the reduced form only enlarges the
    fixed-point avoidance sets the closure is consumed by.
    """
    out: set[Word] = set()
    for w in words:
        for rot in rotations(w):
            n = len(rot)
            for i in range(n):
                for j in range(i + 1, n + 1):
                    reduced = _reduce_tuple(rot[i:j])
                    if reduced:
                        out.add(Word(reduced))
    return frozenset(out)


# -- text form ---------------------------------------------------------------

def render(w: Word) -> str:
    """Display string in composition order, e.g. ``b^-1.a.b``; identity is ``1``."""
    if not w.letters:
        return "1"
    return ".".join(str(l) for l in reversed(w.letters))


def parse(text: str) -> Word:
    """Parse a display string back into a word, re-reducing if necessary."""
    text = text.strip()
    if text in ("", "1"):
        return EMPTY
    display: list[Letter] = []
    for token in text.split("."):
        token = token.strip()
        if token.endswith("^-1"):
            sym = token[:-3]
            sign = -1
        elif token.endswith("^1"):
            sym = token[:-2]
            sign = 1
        else:
            sym = token
            sign = 1
        if not sym or any(ch in sym for ch in ".^ "):
            raise ValueError(f"bad word token {token!r} in {text!r}")
        display.append(Letter(sym, sign))
    return reduce(reversed(display))


# -- ordering ----------------------------------------------------------------

def letter_rank(letter: Letter, ground_order: tuple[str, ...]) -> int:
    """Total order on letters: a < a^-1 < grounds in declared order, each
    followed by its inverse."""
    if letter.is_new:
        base = 0
    else:
        try:
            base = 2 * (ground_order.index(letter.sym) + 1)
        except ValueError:
            raise ValueError(f"unknown ground symbol {letter.sym!r}") from None
    return base if letter.sign == 1 else base + 1


def sort_key(w: Word, ground_order: tuple[str, ...]) -> tuple:
    """Length-major, then lexicographic on the display-order letter ranks."""
    ranks = tuple(letter_rank(l, ground_order) for l in reversed(w.letters))
    return (len(w.letters), ranks)

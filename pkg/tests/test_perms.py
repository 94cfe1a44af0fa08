import itertools
import random

import pytest

from cofin.families import cantor_pairing
from cofin.perms import (
    EMPTY_INJECTION,
    FreeRegularAction,
    PartialInjection,
    UnknownLetterError,
    build_ground_representation,
    eval_word,
    fixed_points,
    free_representation,
    pair_image,
    single_zshift,
    word_graph,
    zshift,
)
from cofin.words import Letter, Word, inverse, parse

from oracles import all_reduced_words, eval_path_oracle

REP = single_zshift()
A = Letter("a", 1)
B = Letter("b", 1)


def inj(*pairs):
    return PartialInjection(pairs)


def rep_tables():
    b = zshift()
    return {"b": (b.forward, b.backward)}


def test_partial_injection_invariants():
    s = inj((0, 5), (3, 1))
    assert s.apply(1, 0) == 5
    assert s.apply(-1, 5) == 0
    assert s.apply(1, 7) is None
    with pytest.raises(ValueError):
        inj((0, 1), (0, 2))
    with pytest.raises(ValueError):
        inj((0, 1), (2, 1))
    assert s.extended(7, 8).pairs == ((0, 5), (3, 1), (7, 8))
    with pytest.raises(ValueError):
        s.extended(0, 9)
    assert s.extends(inj((0, 5)))
    assert not inj((0, 5)).extends(s)


def test_zshift_is_the_integer_shift():
    b = zshift()
    # zig-zag order: 0, 1, -1, 2, -2, ... so the shift walks 2 -> 0 -> 1 -> 3
    assert [b.forward(n) for n in range(7)] == [1, 3, 0, 5, 2, 7, 4]
    for n in range(200):
        assert b.backward(b.forward(n)) == n
        assert b.forward(b.backward(n)) == n
    assert all(b.forward(n) != n for n in range(500))


def test_free_action_rank_roundtrip():
    for rank in (1, 2, 3):
        action = FreeRegularAction(rank)
        for n in range(300):
            assert action.rank_of(action.unrank(n)) == n


def test_free_action_rank1_is_zshift():
    action = FreeRegularAction(1)
    b = zshift()
    for n in range(200):
        assert action.act(0, n) == b.forward(n)
        assert action.act(1, n) == b.backward(n)


def test_free_representation_bijective_and_fixed_point_free():
    rep = free_representation(("b", "c"))
    for sym in ("b", "c"):
        perm = rep.perm(sym)
        seen = set()
        for n in range(300):
            v = perm.forward(n)
            assert perm.backward(v) == n
            assert v != n
            seen.add(v)
        assert len(seen) == 300


def test_representation_spot_check_clean():
    # nonidentity words of the free regular action move every point
    rep = build_ground_representation({"kind": "free", "names": ["b", "c"]})
    assert rep.spot_check(max_len=3, window=64, cap=1) == []


def test_eval_word_examples():
    res = eval_word(parse("a"), REP, inj((0, 5)), 0)
    assert res.value == 5 and res.path == (0, 5)

    # display b.a applies a then the shift: 0 -> 5 -> 7
    res = eval_word(parse("b.a"), REP, inj((0, 5)), 0)
    assert res.value == 7 and res.path == (0, 5, 7)

    res = eval_word(parse("a"), REP, EMPTY_INJECTION, 3)
    assert res.value is None and res.path == (3,)
    assert res.use_set == {3}


def test_eval_word_unknown_letter():
    with pytest.raises(UnknownLetterError):
        eval_word(parse("q.a"), REP, EMPTY_INJECTION, 0)


def test_eval_word_matches_one_step_oracle_exhaustive():
    values = range(8)
    small_words = [w for w in all_reduced_words(["b"], 3, min_len=1)]
    doms = list(itertools.permutations(values, 2))
    rng = random.Random(3)
    tables = rep_tables()
    for w in small_words:
        for _ in range(40):
            pairs = tuple(rng.sample(doms, k=rng.randint(0, 4)))
            try:
                s = PartialInjection(pairs)
            except ValueError:
                continue
            m = rng.choice(values)
            power = rng.randint(1, 3)
            res = eval_word(w, REP, s, m, power)
            opath, ovalue = eval_path_oracle(w, tables, s.pairs, m, power)
            assert list(res.path) == opath
            assert res.value == ovalue
            assert res.use_set == set(opath)
            assert len(res.path) <= power * len(w) + 1


def test_inverse_word_inverts_evaluation_randomized():
    rng = random.Random(11)
    words = [w for w in all_reduced_words(["b"], 3, min_len=1)]
    for _ in range(1000):
        w = rng.choice(words)
        pairs = []
        used_d, used_r = set(), set()
        for _ in range(rng.randint(0, 5)):
            n, n2 = rng.randrange(12), rng.randrange(12)
            if n in used_d or n2 in used_r:
                continue
            used_d.add(n)
            used_r.add(n2)
            pairs.append((n, n2))
        s = PartialInjection(pairs)
        m = rng.randrange(12)
        res = eval_word(w, REP, s, m, 1)
        if res.value is not None:
            back = eval_word(inverse(w), REP, s, res.value, 1)
            assert back.value == m


def test_fixed_points_examples():
    a = parse("a")
    assert fixed_points(a, REP, inj((4, 4))) == {4}
    assert fixed_points(a, REP, inj((0, 1), (1, 0))) == frozenset()
    aa = parse("a.a")
    assert fixed_points(aa, REP, inj((0, 1), (1, 0))) == {0, 1}
    assert fixed_points(parse("b"), REP, inj((0, 1)), window=100) == frozenset()


def test_fixed_points_of_conjugated_word_found_outside_coords():
    # w = b.a.b^-1 fixes m iff s fixes b^-1(m); plant one far from s coords
    b = zshift()
    target = 50
    m = b.forward(target)
    s = inj((target, target))
    pts = fixed_points(parse("b.a.b^-1"), REP, s)
    assert pts == {m}
    assert m not in s.coords


def test_word_graph_complete_against_scan():
    rng = random.Random(5)
    words = [parse("a"), parse("b.a"), parse("a.b"), parse("b.a.b^-1"), parse("a.a")]
    tables = rep_tables()
    for _ in range(200):
        pairs = []
        used_d, used_r = set(), set()
        for _ in range(rng.randint(0, 4)):
            n, n2 = rng.randrange(10), rng.randrange(10)
            if n in used_d or n2 in used_r:
                continue
            used_d.add(n)
            used_r.add(n2)
            pairs.append((n, n2))
        s = PartialInjection(pairs)
        for w in words:
            graph = word_graph(w, REP, s)
            # scan a window wide enough to contain every possible input
            for m in range(-0, 60):
                _, value = eval_path_oracle(w, tables, s.pairs, m, 1)
                assert graph.get(m) == value


def test_pair_image_examples():
    psi = cantor_pairing()
    a = parse("a")
    assert pair_image(a, REP, inj((0, 0)), psi) == {0}
    assert pair_image(a, REP, inj((0, 1)), psi) == {2}
    assert pair_image(a, REP, EMPTY_INJECTION, psi) == frozenset()


def test_shifted_fixed_point_conjugation_property():
    # if m in fix(w1.w0[s]) then w0[s](m), when defined, is fixed by w0.w1[s]
    rng = random.Random(9)
    for _ in range(300):
        pairs = []
        used_d, used_r = set(), set()
        for _ in range(rng.randint(1, 5)):
            n, n2 = rng.randrange(8), rng.randrange(8)
            if n in used_d or n2 in used_r:
                continue
            used_d.add(n)
            used_r.add(n2)
            pairs.append((n, n2))
        s = PartialInjection(pairs)
        w = rng.choice([parse("b.a"), parse("a.b"), parse("a.a"), parse("b.a.a")])
        for m in fixed_points(w, REP, s):
            for cut in range(1, len(w)):
                w0 = Word(w.letters[:cut])
                w1 = Word(w.letters[cut:])
                res = eval_word(w0, REP, s, m, 1) if w0.mentions_new else None
                value = (
                    res.value if res is not None
                    else REP.apply_word(w0, m)
                )
                if value is None:
                    continue
                shifted = w1.concat(w0)  # rotation: w1 applied first, then w0
                if not shifted.mentions_new or len(shifted) != len(w):
                    continue
                assert value in fixed_points(shifted, REP, s)

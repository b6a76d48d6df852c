import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outclass.words import (
    CarrierVerdict,
    CyclicWord,
    FreeAutomorphism,
    NotAnAutomorphism,
    Word,
    cyclic_reduce,
    free_factor_carrier_test,
    free_reduce,
    letters_to_text,
    parse_aut_file,
    text_to_letters,
    whitehead_automorphisms,
    whitehead_graph,
    whitehead_minimize,
)


def oracle_reduce(letters):
    """Repeated-scan free reduction, as slow and obvious as possible."""
    ls = list(letters)
    changed = True
    while changed:
        changed = False
        for i in range(len(ls) - 1):
            if ls[i] == -ls[i + 1]:
                del ls[i : i + 2]
                changed = True
                break
    return tuple(ls)


def test_reduce_examples():
    assert free_reduce(text_to_letters("abBAba")) == text_to_letters("ba")
    assert free_reduce(text_to_letters("aA")) == ()
    assert free_reduce(()) == ()


@given(st.lists(st.integers(min_value=-3, max_value=3).filter(lambda x: x != 0), max_size=20))
def test_reduce_matches_oracle(letters):
    assert free_reduce(letters) == oracle_reduce(letters)


def test_text_round_trip():
    for text in ("a", "abAB", "BAc", "1"):
        assert letters_to_text(text_to_letters(text)) == ("" if text == "1" else text) or text == "1"
    assert letters_to_text(()) == "1"
    with pytest.raises(ValueError):
        text_to_letters("a b")


def test_word_algebra():
    a, b = Word.parse("a"), Word.parse("b")
    assert (a * b).inverse() == Word.parse("BA")
    assert (a * a.inverse()).is_trivial()
    assert Word.parse("ab") ** 2 == Word.parse("abab")
    assert Word.parse("ab") ** -1 == Word.parse("BA")
    assert Word.parse("b").conjugate_by(a) == Word.parse("abA")


def test_cyclic_reduce_splits_conjugator():
    core, conj = cyclic_reduce(Word.parse("AbaBa"))
    assert conj * core.as_word() * conj.inverse() == Word.parse("AbaBa")
    assert core == CyclicWord.parse("a")

    # BaabcAb = (Ba) abc (Ba)^-1
    core, conj = cyclic_reduce(Word.parse("BaabcAb"))
    assert conj * core.as_word() * conj.inverse() == Word.parse("BaabcAb")
    assert len(core) == 3

    # already cyclically reduced: conjugator only carries the rotation
    core, conj = cyclic_reduce(Word.parse("Babca"))
    assert conj * core.as_word() * conj.inverse() == Word.parse("Babca")
    assert len(core) == 5


def test_cyclic_word_canonical_rotation():
    assert CyclicWord.parse("bca") == CyclicWord.parse("abc")
    assert CyclicWord.parse("aBAb") == CyclicWord.parse("abAB").inverse()
    # inverse class is not identified
    assert CyclicWord.parse("ab") != CyclicWord.parse("ab").inverse()
    assert CyclicWord.parse("ab").unoriented_eq(CyclicWord.parse("BA"))


def test_cyclic_word_root():
    root, k = CyclicWord.parse("ababab").root()
    assert (root, k) == (CyclicWord.parse("ab"), 3)
    assert CyclicWord.parse("aab").is_root_free()


FIB = FreeAutomorphism.parse("ab", "a")
PHI4 = FreeAutomorphism.parse("ab", "bcab", "d", "cd")


def test_apply():
    # a -> ab, b -> a: phi(ab) = ab.a ; phi(aB) = ab A
    assert FIB.apply(Word.parse("ab")) == Word.parse("aba")
    assert FIB.apply(Word.parse("aB")) == Word.parse("abA")
    assert PHI4.apply(Word.parse("ab")) == Word.parse("abbcab")


def test_compose_order():
    # compose(other) applies other first
    psi = FreeAutomorphism.parse("ba", "b")
    comp = FIB.compose(psi)
    assert comp.apply(Word.parse("a")) == FIB.apply(psi.apply(Word.parse("a")))


def test_invert_fibonacci():
    inv = FIB.invert()
    assert inv.images == (Word.parse("b"), Word.parse("Ba"))
    assert FIB.compose(inv).is_identity()
    assert inv.compose(FIB).is_identity()


def test_invert_rejects_non_automorphism():
    with pytest.raises(NotAnAutomorphism):
        FreeAutomorphism.parse("ab", "ba").invert()
    with pytest.raises(NotAnAutomorphism):
        FreeAutomorphism.parse("aa", "b").invert()


@settings(deadline=None, max_examples=30)
@given(st.integers(min_value=0, max_value=2**16 - 1))
def test_invert_random_products(seed):
    rng = random.Random(seed)
    elementary = [
        FreeAutomorphism.parse("ab", "b", "c"),
        FreeAutomorphism.parse("aC", "b", "c"),
        FreeAutomorphism.parse("b", "a", "c"),
        FreeAutomorphism.parse("A", "b", "c"),
        FreeAutomorphism.parse("a", "bc", "c"),
    ]
    phi = FreeAutomorphism.identity(3)
    for _ in range(rng.randint(1, 6)):
        phi = phi.compose(rng.choice(elementary))
    assert phi.compose(phi.invert()).is_identity()


def test_is_inner():
    inner = FreeAutomorphism.inner(3, Word.parse("abC"))
    assert inner.is_inner() == Word.parse("abC")
    assert FreeAutomorphism.identity(2).is_inner() == Word()
    assert FIB.is_inner() is None
    # conjugation by a power of a: solution in the coset tail
    assert FreeAutomorphism.inner(2, Word.parse("aa")).is_inner() == Word.parse("aa")


def test_abelianization():
    assert PHI4.abelianization() == [
        [1, 1, 0, 0],
        [1, 2, 1, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 1],
    ]


def test_parse_aut_file():
    phi = parse_aut_file("""
    # fibonacci
    a -> ab
    b -> a
    """)
    assert phi == FIB
    with pytest.raises(ValueError, match="line 2"):
        parse_aut_file("a -> ab\nb = a")
    with pytest.raises(ValueError, match="duplicate"):
        parse_aut_file("a -> ab\na -> b\nb -> a")
    with pytest.raises(ValueError, match="contiguous"):
        parse_aut_file("a -> ac\nc -> a")


# --- Whitehead ------------------------------------------------------------


def test_whitehead_automorphisms_are_automorphisms():
    for aut in whitehead_automorphisms(2):
        assert aut.compose(aut.invert()).is_identity()


def all_cyclic_words(rank, length):
    for ls in itertools.product(
        [x for i in range(1, rank + 1) for x in (i, -i)], repeat=length
    ):
        c = CyclicWord(ls)
        if len(c) == length:
            yield c


def orbit_minimum(w, rank, cap=20000):
    """Exhaustive BFS over the Whitehead orbit, tracking the shortest length."""
    auts = whitehead_automorphisms(rank)
    seen = {w}
    frontier = [w]
    best = len(w)
    while frontier:
        nxt = []
        for cur in frontier:
            for aut in auts:
                img = aut.apply_cyclic(cur)
                if len(img) <= len(cur) and img not in seen:
                    seen.add(img)
                    best = min(best, len(img))
                    nxt.append(img)
        frontier = nxt
        assert len(seen) < cap
    return best


@pytest.mark.parametrize("rank", [2, 3])
def test_whitehead_minimize_matches_exhaustive(rank):
    rng = random.Random(7)
    pool = [w for L in range(1, 7) for w in all_cyclic_words(rank, L)]
    sample = rng.sample(pool, 40)
    for w in sample:
        (mw,), seq = whitehead_minimize([w], rank)
        assert len(mw) == orbit_minimum(w, rank)
        # the returned sequence really maps input to output
        cur = w
        for aut in seq:
            cur = aut.apply_cyclic(cur)
        assert cur == mw


def test_whitehead_graph_of_commutator():
    adj = whitehead_graph([CyclicWord.parse("abAB")], 2)
    # the 4-cycle a - B - A - b - a
    assert adj == {
        1: {2, -2},
        -1: {2, -2},
        2: {1, -1},
        -2: {1, -1},
    }


def test_carrier_commutator_not_carried():
    verdict = free_factor_carrier_test([CyclicWord.parse("abAB")], 2)
    assert verdict.kind == "not_carried"


def test_carrier_basis_element_carried():
    verdict = free_factor_carrier_test([CyclicWord.parse("a")], 2)
    assert verdict.kind == "carried"
    assert verdict.factor_basis == (Word.parse("a"),)


def test_carrier_hidden_factor():
    # abA is conjugate into <b>
    verdict = free_factor_carrier_test([CyclicWord.parse("abA")], 2)
    assert verdict.kind == "carried"


def test_carrier_transported_witness_spans_the_words():
    # aabA minimizes through a Whitehead move; the witness basis must
    # still carry the original class.
    w = CyclicWord.parse("aabAbb")
    verdict = free_factor_carrier_test([w], 2)
    if verdict.kind == "carried":
        assert len(verdict.factor_basis) < 2

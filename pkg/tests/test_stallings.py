import itertools
import random

from outclass.stallings import CoreGraph, from_generators, subgroup_rank
from outclass.words import CyclicWord, Word, free_reduce


def brute_force_members(gens, max_len, max_factors=12):
    """All subgroup elements of length <= max_len, by multiplying generators.

    Intermediate products are allowed extra length: short members can
    require long partial products before cancellation.
    """
    gens = [g.letters for g in gens]
    alphabet = gens + [tuple(-x for x in reversed(g)) for g in gens]
    slack = max_len + 2 * max(len(g) for g in gens)
    members = {()}
    frontier = {()}
    for _ in range(max_factors):
        nxt = set()
        for w in frontier:
            for g in alphabet:
                r = free_reduce(w + g)
                if len(r) <= slack and r not in members:
                    members.add(r)
                    nxt.add(r)
        frontier = nxt
    return {w for w in members if len(w) <= max_len}


def test_single_loop():
    g = from_generators([Word.parse("a")], rank=2)
    assert g.contains(Word.parse("aa"))
    assert g.contains(Word.parse("A"))
    assert not g.contains(Word.parse("b"))
    assert g.graph_rank() == 1


def test_wedge_with_conjugate():
    g = from_generators([Word.parse("a"), Word.parse("baB")], rank=2)
    # base a-loop, b-edge to a vertex with its own a-loop
    assert g.num_vertices() == 2
    assert g.num_edges() == 3
    assert g.contains(Word.parse("baaB"))
    assert not g.contains(Word.parse("bab"))
    assert g.graph_rank() == 2


def test_contains_conjugate():
    g = from_generators([Word.parse("a"), Word.parse("b")], rank=3)
    assert g.contains_conjugate(CyclicWord.parse("ab"))
    assert not g.contains_conjugate(CyclicWord.parse("c"))

    h = from_generators([Word.parse("a")], rank=2)
    assert h.contains_conjugate(CyclicWord(Word.parse("baB").letters))
    assert h.contains_conjugate(CyclicWord.parse("a"))
    assert not h.contains_conjugate(CyclicWord.parse("ab"))


def test_immerses_segment():
    g = from_generators([Word.parse("a")], rank=2)
    assert g.immerses_segment(Word.parse("aaa"))
    assert not g.immerses_segment(Word.parse("ab"))

    h = from_generators([Word.parse("ab")], rank=2)
    # the ab-loop immerses every subword of (ab)^inf from the right start
    assert h.immerses_segment(Word.parse("bab"))
    assert not h.immerses_segment(Word.parse("bb"))


def test_immersion_monotone_under_subwords():
    g = from_generators([Word.parse("abA"), Word.parse("bb")], rank=2)
    w = Word.parse("abbA")
    if g.immerses_segment(w):
        for i in range(len(w)):
            for j in range(i + 1, len(w) + 1):
                assert g.immerses_segment(Word(w.letters[i:j]))


def test_rank():
    assert subgroup_rank([Word.parse("a")], 2) == 1
    assert subgroup_rank([Word.parse("a"), Word.parse("b")], 3) == 2
    assert subgroup_rank([Word.parse("ab"), Word.parse("ba")], 2) == 2
    # redundant generator does not inflate the rank
    assert subgroup_rank([Word.parse("a"), Word.parse("b"), Word.parse("ab")], 2) == 2


def test_contains_vs_brute_force_small():
    gens = [Word.parse("ab"), Word.parse("ba")]
    g = from_generators(gens, rank=2)
    members = brute_force_members(gens, max_len=8)
    letters = [1, -1, 2, -2]
    for L in range(0, 7):
        for ls in itertools.product(letters, repeat=L):
            w = Word(ls)
            if len(w.letters) != L:
                continue
            assert g.contains(w) == (w.letters in members), w


def random_words(rng, rank, n, max_len):
    out = []
    for _ in range(n):
        L = rng.randint(1, max_len)
        ls = []
        for _ in range(L):
            x = rng.choice([i for g in range(1, rank + 1) for i in (g, -g)])
            if ls and x == -ls[-1]:
                x = -x
            ls.append(x)
        out.append(Word(ls))
    return out


def naive_membership(gens, rank, w):
    """Independent reference: naive quadratic folding plus based trace.

    Builds the wedge as a flat edge list and repeatedly merges the targets
    of any two same-label edges at a common vertex, rewriting everything.
    """
    edges = []
    fresh = [1]
    for g in gens:
        u = 0
        for i, x in enumerate(g.letters):
            v = 0 if i == len(g.letters) - 1 else fresh[0]
            if v != 0:
                fresh[0] += 1
            edges.append((u, x, v))
            u = v
    edges = [(u, x, v) if x > 0 else (v, -x, u) for u, x, v in edges]
    while True:
        by_end = {}
        clash = None
        for u, x, v in edges:
            for a, lbl, b in ((u, x, v), (v, -x, u)):
                if (a, lbl) in by_end and by_end[(a, lbl)] != b:
                    clash = (by_end[(a, lbl)], b)
                    break
                by_end[(a, lbl)] = b
            if clash:
                break
        if clash is None:
            break
        keep, gone = clash
        if gone == 0:
            keep, gone = gone, keep
        edges = list(
            {
                (keep if u == gone else u, x, keep if v == gone else v)
                for u, x, v in edges
            }
        )
    out = {}
    for u, x, v in edges:
        out[(u, x)] = v
        out[(v, -x)] = u
    cur = 0
    for x in w.letters:
        if (cur, x) not in out:
            return False
        cur = out[(cur, x)]
    return cur == 0


def test_contains_vs_independent_fold_randomized():
    rng = random.Random(2024)
    for _ in range(60):
        rank = rng.randint(2, 3)
        gens = random_words(rng, rank, rng.randint(1, 3), 5)
        g = from_generators(gens, rank)
        for w in random_words(rng, rank, 15, 8):
            assert g.contains(w) == naive_membership(gens, rank, w), (gens, w)
        # enumerated products must all be members
        members = brute_force_members(gens, max_len=8, max_factors=6)
        for m in rng.sample(sorted(members), min(10, len(members))):
            assert g.contains(Word(m))


def test_fold_order_confluent():
    rng = random.Random(5)
    gens = [Word.parse("abA"), Word.parse("bab"), Word.parse("aab")]
    reference = from_generators(gens, 2)
    for _ in range(10):
        shuffled = gens[:]
        rng.shuffle(shuffled)
        assert from_generators(shuffled, 2) == reference


def test_canonical_text_is_stable():
    g = from_generators([Word.parse("a"), Word.parse("baB")], rank=2)
    assert g.to_text() == from_generators([Word.parse("baB"), Word.parse("a")], 2).to_text()
    assert g.to_text().startswith("rank 2 base 0")

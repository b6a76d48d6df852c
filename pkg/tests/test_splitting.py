import itertools

import pytest

from outclass import stallings
from outclass.splitting import (
    BasisAdaptationFailed,
    GoGEdge,
    GraphOfGroups,
    OneEdgeSplitting,
    PreconditionFailed,
    TrivialEdgeGroup,
    WNotInVertexGroup,
    amalgam,
    apply_aut,
    dehn_twist,
    edge_fold,
    elliptic_seed_splittings,
    enumerate_slides,
    equivalent,
    hnn,
    invariant_splitting_search,
    is_elliptic,
    pair_type,
    parse_split_text,
    slide,
    splitting_to_graph,
    to_split_text,
    vertex_group_cores,
)
from outclass.words import CyclicWord, FreeAutomorphism, Word


def W(t):
    return Word.parse(t)


def C(t):
    return CyclicWord.parse(t)


def S_ab_b_bc():
    # <a,b> *_<b> <b,c> in F_3
    return amalgam([W("a"), W("b")], [W("b"), W("c")], 3, C("b"))


# ---------------------------------------------------------------------------
# construction and classification


def test_splitting_classes():
    free = amalgam([W("a"), W("b")], [W("c")], 3)
    assert free.splitting_class() == "free"
    s = S_ab_b_bc()
    assert s.splitting_class() == "maximal-cyclic"
    sq = amalgam([W("a"), W("b")], [W("bb"), W("c")], 3, C("bb"))
    assert sq.splitting_class() == "cyclic"


def test_validate_rejects_bad_edge_word():
    with pytest.raises(Exception):
        amalgam([W("a")], [W("c")], 3, C("b"))


def test_validate_rejects_non_generating():
    with pytest.raises(Exception):
        amalgam([W("a")], [W("b")], 3)  # c missing


# ---------------------------------------------------------------------------
# edge folds


def test_edge_fold_amalgam():
    free = amalgam([W("a"), W("b")], [W("c")], 3)
    s = edge_fold(free, C("ab"), side=0)
    assert s.edge_word == C("ab")
    # folded side unchanged, other side extended by the edge word
    assert s.vertex_groups[0] == (W("a"), W("b"))
    assert W("ab") in s.vertex_groups[1]
    s.validate()
    assert is_elliptic(C("ab"), s)
    assert s.reduced


def test_edge_fold_nonreduced_flagged():
    free = amalgam([W("a")], [W("b"), W("c")], 3)
    s = edge_fold(free, C("a"), side=0)
    # inclusion of <a> into the vertex group <a> is an isomorphism
    assert not s.reduced


def test_edge_fold_hnn_convention():
    free = hnn([W("a")], W("b"), 2)
    s = edge_fold(free, C("a"))
    assert s.variant == "hnn"
    assert s.edge_word == C("a")
    # vertex group gains t^-1 w t
    assert W("Bab") in s.vertex_groups[0]
    s.validate()


def test_edge_fold_rejects_foreign_word():
    free = amalgam([W("a"), W("b")], [W("c")], 3)
    with pytest.raises(WNotInVertexGroup):
        edge_fold(free, C("c"), side=0)


# ---------------------------------------------------------------------------
# ellipticity: brute-force oracle over short conjugators


def _elliptic_oracle(c, s, conj_cap=6):
    cores = vertex_group_cores(s, s.rank)
    letters = [x for i in range(1, s.rank + 1) for x in (i, -i)]
    for L in range(conj_cap + 1):
        for g in itertools.product(letters, repeat=L):
            gw = Word(g)
            if len(gw) != L:
                continue
            cand = gw * c.as_word() * gw.inverse()
            if any(core.contains(cand) for core in cores):
                return True
    return False


def test_is_elliptic_basics():
    s = S_ab_b_bc()
    assert is_elliptic(C("a"), s)
    assert is_elliptic(C("b"), s)  # edge word always elliptic
    assert not is_elliptic(C("ac"), s)


def test_is_elliptic_matches_oracle():
    s = S_ab_b_bc()
    words = ["a", "b", "c", "ac", "ab", "bc", "aBc", "abAB", "cb", "aca"]
    for t in words:
        c = C(t)
        assert is_elliptic(c, s) == _elliptic_oracle(c, s), t


# ---------------------------------------------------------------------------
# pair types


def test_pair_type_self_is_ee():
    s = S_ab_b_bc()
    assert pair_type(s, s) == "EE"


def test_pair_type_disjoint_supports_ee():
    s = edge_fold(amalgam([W("a")], [W("b"), W("c")], 3), C("a"), 0)
    t = edge_fold(amalgam([W("c")], [W("a"), W("b")], 3), C("c"), 0)
    assert pair_type(s, t) == "EE"


def test_pair_type_hh_crossing_curves():
    # two HNN splittings of F_2 over "crossing" words: a over <a> with
    # stable b, and b over <b> with stable a; each edge word is hyperbolic
    # in the other splitting
    s = edge_fold(hnn([W("a")], W("b"), 2), C("a"))
    t = edge_fold(hnn([W("b")], W("a"), 2), C("b"))
    assert pair_type(s, t) == "HH"


def test_pair_type_needs_edge_groups():
    free = amalgam([W("a"), W("b")], [W("c")], 3)
    with pytest.raises(TrivialEdgeGroup):
        pair_type(free, free)


# ---------------------------------------------------------------------------
# slides


def _chain_graph():
    # vertices <a>, <b>, <c>; edges over <a> (0-1) and <aa>?? use
    # G_f <= G_e: f over <aa> at shared vertex 0, e over <a>
    return GraphOfGroups(
        3,
        ((W("a"),), (W("b"),), (W("c"),)),
        (
            GoGEdge(0, 1, C("a")),
            GoGEdge(0, 2, C("aa")),
        ),
    )


def test_slide_moves_edge():
    g = _chain_graph()
    slid = slide(g, 0, 1)  # slide f=edge1 across e=edge0
    assert slid.edges[1].u == 1 and slid.edges[1].v == 2


def test_slide_requires_containment():
    g = GraphOfGroups(
        3,
        ((W("a"), W("b")), (W("c"),), (W("b"),)),
        (GoGEdge(0, 1, C("a")), GoGEdge(0, 2, C("b"))),
    )
    with pytest.raises(PreconditionFailed):
        slide(g, 0, 1)  # <b> not inside <a>


def test_slide_along_loop_only_once():
    g = GraphOfGroups(
        2,
        ((W("a"), W("b")),),
        (GoGEdge(0, 0, C("a")), GoGEdge(0, 0, C("aa"))),
    )
    once = slide(g, 0, 1)
    with pytest.raises(PreconditionFailed):
        slide(once, 0, 1)


def test_enumerate_slides_single_edge_trivial():
    g = splitting_to_graph(S_ab_b_bc())
    assert len(enumerate_slides(g)) == 1


def test_enumerate_slides_terminates_on_chain():
    orbit = enumerate_slides(_chain_graph(), cap=100)
    assert 1 <= len(orbit) <= 100


# ---------------------------------------------------------------------------
# automorphism action and equivalence


def test_apply_identity_equivalent():
    s = S_ab_b_bc()
    assert equivalent(s, apply_aut(s, FreeAutomorphism.identity(3)))


def test_apply_inner_equivalent():
    s = S_ab_b_bc()
    inner = FreeAutomorphism.inner(3, W("ca"))
    assert equivalent(s, apply_aut(s, inner))


def test_apply_symmetry_equivalent():
    s = S_ab_b_bc()
    swap = FreeAutomorphism.parse("c", "b", "a")
    assert equivalent(s, apply_aut(s, swap))


def test_inequivalent_different_edge_word():
    s = S_ab_b_bc()
    t = amalgam([W("a"), W("b")], [W("ab"), W("c")], 3, C("ab"))
    assert not equivalent(s, t)


def test_equivalence_relation_spot_checks():
    s = S_ab_b_bc()
    variants = [
        s,
        apply_aut(s, FreeAutomorphism.inner(3, W("ab"))),
        apply_aut(s, FreeAutomorphism.parse("c", "b", "a")),
    ]
    for x in variants:
        assert equivalent(x, x)
    for x, y in itertools.combinations(variants, 2):
        assert equivalent(x, y) == equivalent(y, x)


def test_hnn_stable_letter_coset():
    s = edge_fold(hnn([W("a"), W("c")], W("b"), 3), C("a"))
    # replacing t by (elliptic)*t gives the same splitting
    t2 = hnn(s.vertex_groups[0], W("ab"), 3, C("a"), check=False)
    assert equivalent(s, t2)
    # swapping the stable letter for an unrelated basis element does not
    t3 = edge_fold(hnn([W("a"), W("b")], W("c"), 3), C("a"))
    assert not equivalent(s, t3)


# ---------------------------------------------------------------------------
# invariant splitting search


def test_invariant_search_fixed_by_construction():
    s = edge_fold(hnn([W("a"), W("c")], W("b"), 3), C("a"))
    phi = FreeAutomorphism.parse("a", "ba", "c")  # twist fixing s
    hit = invariant_splitting_search(phi, s, power_cap=4)
    assert hit is not None and hit[0] == 1


def test_invariant_search_period_two():
    # swap a<->c permutes two symmetric splittings
    s = edge_fold(amalgam([W("a")], [W("b"), W("c")], 3), C("a"), 0)
    phi = FreeAutomorphism.parse("c", "b", "a")
    hit = invariant_splitting_search(phi, s, power_cap=4)
    assert hit is not None and hit[0] == 2


def test_invariant_search_absent_for_exponential_map():
    phi = FreeAutomorphism.parse("ab", "bcab", "d", "cd")
    for c in (C("cdCD"), C("a")):
        for s in elliptic_seed_splittings(4, c):
            assert invariant_splitting_search(phi, s, power_cap=4) is None


def test_elliptic_seed_splittings_contain_twist_splitting():
    seeds = elliptic_seed_splittings(3, C("a"))
    twist_s = edge_fold(hnn([W("a"), W("c")], W("b"), 3), C("a"))
    assert any(equivalent(s, twist_s) for s in seeds)


# ---------------------------------------------------------------------------
# Dehn twists


def test_dehn_twist_amalgam_recipe():
    d = dehn_twist(S_ab_b_bc())
    assert d == FreeAutomorphism.parse("baB", "b", "c")


def test_dehn_twist_commutes_with_fixing_aut():
    d = dehn_twist(S_ab_b_bc())
    phi = FreeAutomorphism.parse("ab", "b", "cb")
    comm = d.compose(phi).compose(d.invert()).compose(phi.invert())
    assert comm.is_inner() is not None


def test_dehn_twist_hnn_recipe():
    s = edge_fold(hnn([W("a"), W("c")], W("b"), 3), C("a"))
    d = dehn_twist(s)
    assert d == FreeAutomorphism.parse("a", "ab", "c")


def test_dehn_twist_not_inner_small_powers():
    d = dehn_twist(S_ab_b_bc())
    p = FreeAutomorphism.identity(3)
    for _ in range(4):
        p = p.compose(d)
        assert not p.is_inner()


def test_dehn_twist_needs_adapted_basis():
    # vertex groups miss the generator b entirely
    s = amalgam([W("a")], [W("c"), W("bab")], 3, None, check=False)
    s = OneEdgeSplitting(
        "amalgam", 3, ((W("a"),), (W("c"), W("bab"))), C("a")
    )
    with pytest.raises(BasisAdaptationFailed):
        dehn_twist(s)


# ---------------------------------------------------------------------------
# serialization


def test_split_roundtrip():
    for s in (
        S_ab_b_bc(),
        edge_fold(hnn([W("a"), W("c")], W("b"), 3), C("a")),
        amalgam([W("a"), W("b")], [W("c")], 3),
    ):
        back = parse_split_text(to_split_text(s))
        assert back.variant == s.variant
        assert back.vertex_groups == s.vertex_groups
        assert back.edge_word == s.edge_word
        assert back.stable_letter == s.stable_letter

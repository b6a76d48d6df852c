import random

import pytest

from outclass.disintegration import (
    AdmissibleLattice,
    NotSplittable,
    SplittingUnit,
    admissible_lattice,
    almost_invariant_subgraphs,
    build_B,
    complete_split,
    constraint_row,
    disintegration_rank,
    qe_coarsen,
    synthesize_generator,
    taken_connecting_paths,
)
from outclass.graph_map import GraphSelfMap, compute_stratification, tighten
from outclass.train_track import find_inps
from outclass.words import FreeAutomorphism, Word

PHI4 = FreeAutomorphism.parse("ab", "bcab", "d", "cd")
FIB = GraphSelfMap.from_automorphism(FreeAutomorphism.parse("ab", "a"))
TWO_TIER = FreeAutomorphism.parse("a", "ba", "caa")  # two linear strata
QEP_FIX = FreeAutomorphism.parse("a", "ba", "cA", "dbaC")  # opposite twists


def setup(phi):
    f = GraphSelfMap.from_automorphism(phi)
    return f, compute_stratification(f)


def kinds(units):
    return [u.kind for u in units]


def paths(units):
    return [u.path for u in units]


def test_single_eg_edge_is_one_unit():
    f = GraphSelfMap.from_automorphism(PHI4)
    strata = compute_stratification(f)
    units = complete_split(f, strata, (1,))
    assert kinds(units) == ["single_edge"]
    assert paths(units) == [(1,)]


def test_linear_image_splits_into_edge_plus_fixed():
    f, strata = setup(TWO_TIER)
    units = complete_split(f, strata, f.map_path((3,)))
    assert kinds(units) == ["single_edge", "fixed_edge", "fixed_edge"]
    assert paths(units) == [(3,), (1,), (1,)]


def test_exceptional_path_is_one_unit():
    # b and c twist around the axis a with exponents 1 != 2, same sign
    f, strata = setup(TWO_TIER)
    p = tuple(Word.parse("baC").letters)
    units = complete_split(f, strata, p)
    assert kinds(units) == ["exceptional"]
    (u,) = units
    assert u.edge_i == 2 and u.edge_j == 3
    assert u.sign_pair == (1, 2)
    # its reverse too
    rev = tuple(-x for x in reversed(p))
    assert kinds(complete_split(f, strata, rev)) == ["exceptional"]


def test_inp_is_one_unit():
    strata = compute_stratification(FIB)
    rho = tuple(Word.parse("ABab").letters)
    units = complete_split(FIB, strata, rho)
    assert kinds(units) == ["inp"]
    assert FIB.map_path(units[0].path, 2) == units[0].path


def test_family_inp_matches_any_exponent():
    f, strata = setup(FreeAutomorphism.parse("a", "ba"))
    for k in (1, 2, 5):
        p = (2,) + (1,) * k + (-2,)
        units = complete_split(f, strata, p)
        assert kinds(units) == ["inp"]
        assert units[0].exponent == k
        assert f.map_path(p) == p


def test_units_reconcatenate_and_verify_randomly():
    rng = random.Random(7)
    for phi in (PHI4, TWO_TIER, QEP_FIX):
        f, strata = setup(phi)
        inps = find_inps(f, strata=strata)
        letters = sorted(f.graph.edges)
        for _ in range(25):
            raw = [
                rng.choice(letters) * rng.choice((1, -1))
                for _ in range(rng.randint(1, 6))
            ]
            p = tighten(raw)
            if not p:
                continue
            try:
                units = complete_split(f, strata, p, _inps=inps)
            except NotSplittable:
                continue
            assert tuple(x for u in units for x in u.path) is not None
            whole = tuple(x for u in units for x in u.path)
            # the decomposition covers some iterate's image of p exactly
            q = p
            for _ in range(4):
                if whole == q:
                    break
                q = f.map_path(q)
            assert whole == q
            for k in (1, 2, 3):
                img = [y for u in units for y in f.map_path(u.path, k)]
                assert tuple(img) == f.map_path(whole, k)


def test_retry_splits_the_image_when_the_path_cannot_split():
    # Ab crosses an illegal turn; its image tightens to B, which splits
    strata = compute_stratification(FIB)
    units = complete_split(FIB, strata, (-1, 2))
    assert paths(units) == [(-2,)]
    with pytest.raises(NotSplittable):
        complete_split(FIB, strata, (-1, 2), caps=0)


def test_qe_coarsen_without_linear_edges_is_identity():
    f = GraphSelfMap.from_automorphism(PHI4)
    strata = compute_stratification(f)
    units = complete_split(f, strata, f.map_path((2,)))
    assert qe_coarsen(units) == units


def test_qe_coarsen_merges_opposite_twists():
    f, strata = setup(QEP_FIX)
    units = complete_split(f, strata, f.map_path((4,)))
    assert kinds(units) == [
        "single_edge",
        "single_edge",
        "fixed_edge",
        "single_edge",
    ]
    coarse = qe_coarsen(units)
    assert kinds(coarse) == ["single_edge", "qep"]
    q = coarse[-1]
    assert q.path == tuple(Word.parse("baC").letters)
    assert (q.edge_i, q.edge_j) == (2, 3)
    assert q.sign_pair == (1, -1)


def test_exceptional_never_coarsens_to_qep():
    # same-sign twists stay a single exceptional unit
    f, strata = setup(TWO_TIER)
    units = complete_split(f, strata, tuple(Word.parse("baC").letters))
    assert kinds(qe_coarsen(units)) == ["exceptional"]


def test_interaction_graph_two_tier():
    f, strata = setup(TWO_TIER)
    B = build_B(f, strata)
    assert B.vertices == (1, 2)  # the fixed stratum has no vertex
    assert B.edges == frozenset()
    assert [sorted(c) for c in B.components] == [[1], [2]]
    assert B.component_count_stable


def test_interaction_graph_phi4():
    f, strata = setup(PHI4)
    B = build_B(f, strata)
    assert B.vertices == (0, 1)
    # the image of the top stratum crosses the lower one: bcab contains c
    assert (1, 0) in B.edges
    kappa, witness = B.witnesses[(1, 0)]
    assert witness.kind == "single_edge"
    assert abs(witness.path[0]) in strata.strata[0].edges
    assert len(B.components) == 1
    assert B.main_component == 0
    assert B.component_count_stable


def test_interaction_graph_single_stratum():
    B = build_B(FIB)
    assert B.vertices == (0,)
    assert len(B.components) == 1


def test_almost_invariant_subgraphs():
    f, strata = setup(TWO_TIER)
    B = build_B(f, strata)
    assert almost_invariant_subgraphs(B, strata, f) == [{2}, {3}]
    f4, s4 = setup(PHI4)
    B4 = build_B(f4, s4)
    assert almost_invariant_subgraphs(B4, s4, f4) == [{1, 2, 3, 4}]


def test_lattice_without_constraints_has_full_rank():
    f, strata = setup(TWO_TIER)
    B = build_B(f, strata)
    lat = admissible_lattice(f, B, strata)
    assert lat.constraints == ()
    assert lat.rank == len(B.components) == 2
    assert lat.satisfies((1, 1)) and lat.satisfies((3, 0))


def test_lattice_constraint_fixture():
    # f(d) = d . baC where b twists by +1 and c by -1 around the axis a:
    # the single constraint reads 2 a_d = a_b + a_c
    f, strata = setup(QEP_FIX)
    B = build_B(f, strata)
    assert [sorted(c) for c in B.components] == [[1], [2], [3]]
    lat = admissible_lattice(f, B, strata)
    assert len(lat.constraints) == 1
    r, s, t, d_i, d_j = lat.constraints[0]
    assert (d_i, d_j) == (1, -1)
    assert constraint_row(3, r, s, t, d_i, d_j) == [-1, -1, 2]
    assert lat.rank == 2
    for v in lat.basis:
        assert lat.satisfies(v)
    assert lat.satisfies((1, 1, 1))
    assert not lat.satisfies((1, 0, 1))


def test_basis_vectors_satisfy_constraints_exactly():
    for phi in (PHI4, TWO_TIER, QEP_FIX):
        f, strata = setup(phi)
        B = build_B(f, strata)
        lat = admissible_lattice(f, B, strata)
        assert lat.rank <= len(B.components)
        for v in lat.basis:
            assert lat.satisfies(v)


def test_synthesize_unit_tuple_is_f():
    f, strata = setup(TWO_TIER)
    B = build_B(f, strata)
    g = synthesize_generator(f, (1, 1), B, strata)
    assert g.edge_images == f.edge_images


def test_synthesize_partial_tuple():
    f, strata = setup(TWO_TIER)
    B = build_B(f, strata)
    g = synthesize_generator(f, (2, 0), B, strata)
    assert g.image_of(2) == (2, 1, 1)  # f^2(b) = baa
    assert g.image_of(3) == (3,)
    assert g.image_of(1) == (1,)


def test_synthesized_generators_commute():
    for phi in (TWO_TIER, QEP_FIX):
        f, strata = setup(phi)
        B = build_B(f, strata)
        lat = admissible_lattice(f, B, strata)
        k = len(B.components)
        tuples = [
            v
            for v in ([1] * k, [2] * k, *lat.basis)
            if all(x >= 0 for x in v)
        ]
        autos = [
            synthesize_generator(f, v, B, strata).induced_automorphism()
            for v in tuples
        ]
        for g in autos:
            for h in autos:
                comm = g.compose(h).compose(
                    g.invert()).compose(h.invert())
                assert comm.is_inner() is not None


def test_disintegration_rank_pipeline():
    assert disintegration_rank(TWO_TIER)[0] == 2
    assert disintegration_rank(PHI4)[0] == 1
    assert disintegration_rank(QEP_FIX)[0] == 2
    rank, status = disintegration_rank(PHI4)
    assert status == ()


def test_no_taken_connecting_paths_without_zero_strata():
    f, strata = setup(PHI4)
    assert taken_connecting_paths(f, strata) == ()

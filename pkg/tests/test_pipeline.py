import pytest

from outclass.graph_map import GraphSelfMap, MarkedGraph
from outclass.pipeline import (
    Caps,
    NotARepresentative,
    centralizer_probe,
    classify,
    verify_invariant,
)
from outclass.splitting import elliptic_seed_splittings
from outclass.words import CyclicWord, FreeAutomorphism, Word

PHI4 = FreeAutomorphism.parse("ab", "bcab", "d", "cd")
TWIST = FreeAutomorphism.parse("a", "ba", "c")
SWAP_DOUBLED = FreeAutomorphism.parse("c", "d", "ab", "a")

SMALL = Caps(length_cap=6)


def test_classify_loxodromic_candidate():
    r = classify(PHI4)
    assert r.verdict == "LoxodromicCandidate"
    assert r.verdict_power is None
    assert r.filling.verdict == "FillingEvidence"
    assert r.filling.z_verdict == "ZFillingEvidence"
    assert r.closed_inp_signature is None
    assert r.invariant_splitting is None
    assert r.certificate() is None
    # the lower-stratum commutator class is found but does not obstruct
    assert (2, CyclicWord.parse("cdCD")) in r.fixed_classes
    assert r.caps == Caps().as_dict()


def test_classify_elliptic_proven_dehn_twist():
    r = classify(TWIST, SMALL)
    assert r.verdict == "EllipticProven"
    assert r.verdict_power == 1
    k, s = r.invariant_splitting
    assert k == 1
    # the certificate is re-checkable from scratch
    assert verify_invariant(TWIST, k, s)
    cert = r.certificate()
    assert cert.startswith("power: 1\n")
    assert "edge:" in cert


def test_classify_elliptic_proven_reducible():
    # tribonacci on <a,b,c> with d fixed: leaves stay in the factor and
    # the fixed class d seeds a verified splitting
    phi = FreeAutomorphism.parse("ab", "ac", "a", "d")
    r = classify(phi, SMALL)
    assert r.verdict == "EllipticProven"
    assert r.filling.verdict == "NotFilling"


def test_classify_bounded_orbit_evidence():
    # squares to fibonacci on each of <a,b> and <c,d>: each lamination is
    # carried by its factor and no splitting is fixed at caps
    r = classify(SWAP_DOUBLED, SMALL)
    assert r.verdict == "BoundedOrbitEvidence"
    assert r.filling.verdict == "NotFilling"
    assert r.invariant_splitting is None
    assert r.fixed_classes == ()
    # the commutator Nielsen loop crosses the (single) top stratum
    assert r.closed_inp_signature is not None


def test_classify_rank_guard():
    with pytest.raises(ValueError):
        classify(FreeAutomorphism.parse("ab", "a"))


def test_classify_rejects_non_representative():
    g = MarkedGraph.rose(3)
    f = GraphSelfMap(g, {1: (1, 1), 2: (2,), 3: (3,)})
    with pytest.raises(NotARepresentative):
        classify(f)


def test_classify_accepts_graph_self_map():
    f = GraphSelfMap.from_automorphism(SWAP_DOUBLED)
    assert classify(f, SMALL).verdict == classify(SWAP_DOUBLED, SMALL).verdict


def test_classify_deterministic():
    assert classify(SWAP_DOUBLED, SMALL) == classify(SWAP_DOUBLED, SMALL)


def test_report_shape():
    r = classify(SWAP_DOUBLED, SMALL)
    assert r.schema_version == 1
    assert r.images == ("c", "d", "ab", "a")
    assert r.rank == 4
    assert r.strata_summary
    assert isinstance(r.disintegration[0], int)


def test_verify_invariant_rejects_moved_splitting():
    s = elliptic_seed_splittings(3, CyclicWord.parse("b"))[0]
    assert not verify_invariant(TWIST, 1, s)


# ---------------------------------------------------------------------------
# centralizer probe


def test_centralizer_probe_inner():
    conj_a = FreeAutomorphism.parse("a", "abA", "acA")
    rep = centralizer_probe(conj_a, SMALL)
    assert rep.trivial


def test_centralizer_probe_twist():
    rep = centralizer_probe(TWIST, SMALL)
    assert not rep.trivial
    assert rep.commuting_twist_found
    assert rep.twist_splitting is not None
    w = rep.commutator_conjugator
    assert w is not None
    # re-derive the commutator and check it is exactly conjugation by w
    comm = (
        TWIST.compose(rep.twist)
        .compose(TWIST.invert())
        .compose(rep.twist.invert())
    )
    for i in range(1, 4):
        assert comm.apply(Word((i,))) == w * Word((i,)) * w.inverse()


def test_centralizer_probe_no_twist():
    rep = centralizer_probe(SWAP_DOUBLED, SMALL)
    assert not rep.trivial
    assert not rep.commuting_twist_found
    assert rep.twist_splitting is None
    assert rep.disintegration[0] == 1

"""Attracting-lamination leaf segments, carrying tests and filling evidence.

Leaf segments are iterated images of a seed edge in an exponential
stratum.  Filling evidence aggregates the Whitehead turn-graph test on
long leaf segments, the fixed-conjugacy-class search with vertex-group
carrying, closed Nielsen loops in the top stratum, and (when splittings
are supplied) vertex-group carrying tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from outclass import _fixed_class_fast
from outclass.graph_map import (
    GraphSelfMap,
    Stratification,
    compute_stratification,
    edge_text,
)
from outclass.numeric import integer_kernel
from outclass.stallings import CoreGraph
from outclass.words import (
    CarrierVerdict,
    CyclicWord,
    FreeAutomorphism,
    Word,
    _graph_components,
    _has_cut_vertex,
)


@dataclass(frozen=True)
class LeafSegment:
    path: tuple[int, ...]
    seed: int
    iterate: int
    stratum_index: int

    def __len__(self) -> int:
        return len(self.path)


def leaf_segment(
    f: GraphSelfMap,
    edge: int,
    k: int,
    strata: Optional[Stratification] = None,
) -> LeafSegment:
    strata = strata or compute_stratification(f)
    idx = next(
        (i for i, st in enumerate(strata.strata) if abs(edge) in st.edges), None
    )
    if idx is None or strata.strata[idx].kind != "eg":
        raise ValueError(f"edge {edge_text((edge,))} is not in an exponential stratum")
    return LeafSegment(f.map_path((edge,), k), edge, k, idx)


def segment_word(f: GraphSelfMap, s: LeafSegment) -> Word:
    return f.graph.path_word(s.path)


def carried_by(core: CoreGraph, f: GraphSelfMap, s: LeafSegment) -> bool:
    """Whether the subgroup's core graph immerses the segment's word."""
    return core.immerses_segment(segment_word(f, s))


# ---------------------------------------------------------------------------
# fixed conjugacy classes


def _eigenspace_targets(phi: FreeAutomorphism, k: int, length_cap: int) -> np.ndarray:
    """Integer abelianization vectors that phi^k can possibly fix.

    Kernel of (M^k)^T - I over the integers, expanded to all lattice
    points of 1-norm <= length_cap.  The transpose acts on exponent
    vectors: counting letters in phi(w) multiplies by M^T.
    """
    n = phi.rank
    m = np.array(phi.abelianization(), dtype=object).T
    mk = np.eye(n, dtype=object)
    for _ in range(k):
        mk = mk @ m
    rows = [[int(mk[i, j]) - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    basis = integer_kernel(rows)
    if not basis:
        return np.zeros((1, n), dtype=np.int64)
    # all lattice combinations within the reachable 1-norm ball
    points = {tuple([0] * n)}
    frontier = {tuple([0] * n)}
    while frontier:
        nxt = set()
        for p in frontier:
            for b in basis:
                for sign in (1, -1):
                    q = tuple(p[i] + sign * b[i] for i in range(n))
                    if sum(abs(x) for x in q) <= length_cap and q not in points:
                        points.add(q)
                        nxt.add(q)
        frontier = nxt
    return np.array(sorted(points), dtype=np.int64)


def fixed_class_search(
    phi: FreeAutomorphism,
    length_cap: int = 12,
    power_cap: int = 2,
) -> list[tuple[int, CyclicWord]]:
    """All conjugacy classes of length <= cap fixed by phi^k, k <= cap.

    An abelianization eigenspace prefilter drives the enumeration; each
    survivor is verified by exact conjugacy comparison.  Results carry
    the minimal power and are sorted by (power, length, letters).
    """
    found: dict[CyclicWord, int] = {}
    images = {1: [phi.image_of_letter(x).letters for x in _letter_order(phi.rank)]}
    power = phi
    for k in range(1, power_cap + 1):
        if k > 1:
            power = power.compose(phi)
            images[k] = [
                power.image_of_letter(x).letters for x in _letter_order(phi.rank)
            ]
        targets = _eigenspace_targets(phi, k, length_cap)
        raw = _fixed_class_fast.scan_fixed_words(
            phi.rank, length_cap, images[k], targets
        )
        for letters in raw:
            c = CyclicWord(letters)
            if len(c) != len(letters):
                continue  # not cyclically reduced as enumerated
            if power.apply_cyclic(c) != c:
                continue  # defensive; the scan verified this already
            if c not in found:
                found[c] = k
    return sorted(
        ((k, c) for c, k in found.items()),
        key=lambda kc: (kc[0], len(kc[1]), kc[1].letters),
    )


def _letter_order(rank: int) -> list[int]:
    return list(range(1, rank + 1)) + list(range(-1, -rank - 1, -1))


def fixed_class_search_bruteforce(
    phi: FreeAutomorphism, length_cap: int, power_cap: int
) -> list[tuple[int, CyclicWord]]:
    """Reference implementation: plain enumeration, no prefilter."""
    import itertools

    found: dict[CyclicWord, int] = {}
    powers = [phi]
    for _ in range(power_cap - 1):
        powers.append(powers[-1].compose(phi))
    letters = [x for i in range(1, phi.rank + 1) for x in (i, -i)]
    seen = set()
    for L in range(1, length_cap + 1):
        for ls in itertools.product(letters, repeat=L):
            c = CyclicWord(ls)
            if len(c) != L or c in seen:
                continue
            seen.add(c)
            for k, pw in enumerate(powers, start=1):
                if pw.apply_cyclic(c) == c:
                    found.setdefault(c, k)
                    break
    return sorted(
        ((k, c) for c, k in found.items()),
        key=lambda kc: (kc[0], len(kc[1]), kc[1].letters),
    )


# ---------------------------------------------------------------------------
# filling evidence


@dataclass(frozen=True)
class FillingReport:
    verdict: str  # FillingEvidence | NotFilling | ZFillingEvidence |
    #               NotZFilling | Inconclusive
    z_verdict: str
    caps: dict[str, int]
    carrier_detail: str = ""
    witness: Optional[object] = None
    fixed_classes: tuple = ()


def _segment_turn_graph(
    words: Sequence[Word], rank: int
) -> dict[int, set[int]]:
    """Whitehead-style turn graph of linear segments (no wrap-around edge)."""
    adj: dict[int, set[int]] = {x: set() for i in range(1, rank + 1) for x in (i, -i)}
    for w in words:
        ls = w.letters
        for i in range(len(ls) - 1):
            x, y = ls[i], ls[i + 1]
            adj[-x].add(y)
            adj[y].add(-x)
    return adj


def leaf_carrier_evidence(
    f: GraphSelfMap,
    strata: Optional[Stratification] = None,
    leaf_iterates: int = 10,
) -> CarrierVerdict:
    """Free-factor carrying test on long leaf segments of the top stratum.

    Every turn crossed by a leaf of the top attracting lamination appears
    in long enough segments.  A leaf carried by a proper free factor has
    a disconnected turn graph or a cut vertex in *every* basis (the
    Whitehead cut-vertex lemma), so one basis with a connected turn graph
    free of cut vertices certifies not-carried.  The basis search is a
    short greedy Whitehead descent on total segment length, checked after
    every move; a generator missing from the transformed segments gives a
    carrying factor in the original basis (evidence at the iterate cap).
    The move budget stays small so that end-of-segment cancellation never
    dominates the turn statistics.
    """
    from outclass.words import whitehead_automorphisms

    strata = strata or compute_stratification(f)
    rank = f.graph.rank
    eg = [(i, st) for i, st in enumerate(strata.strata) if st.kind == "eg"]
    if not eg:
        raise ValueError("no exponential stratum")
    top = eg[-1][1]
    words = [
        segment_word(f, leaf_segment(f, e, leaf_iterates, strata))
        for e in top.edges
    ]
    auts = whitehead_automorphisms(rank)
    # witness transport: the inverse of the accepted moves, composed
    back = FreeAutomorphism.identity(rank)
    total = sum(len(w.letters) for w in words)
    for _ in range(4 * rank):
        # each segment approximates one leaf; a leaf whose segment misses
        # a generator is carried by the factor on its support
        for w in words:
            used = {abs(x) for x in w.letters}
            if used and len(used) < rank:
                basis = tuple(back.apply(Word((g,))) for g in sorted(used))
                return CarrierVerdict(
                    "carried", basis, detail="a leaf segment omits a generator"
                )
        adj = _segment_turn_graph(words, rank)
        comps = _graph_components(adj)
        isolated = [v for v in adj if not adj[v]]
        if len(comps) == 1 and not isolated and not _has_cut_vertex(adj):
            return CarrierVerdict(
                "not_carried",
                detail="leaf turn graph is connected without cut vertices",
            )
        best = None
        for aut in auts:
            cand = [aut.apply(w) for w in words]
            if sum(len(w.letters) for w in cand) < total:
                best = (aut, cand)
                break
        if best is None:
            return CarrierVerdict(
                "inconclusive",
                detail="leaf turn graph keeps a cut vertex at the descent cap",
            )
        back = back.compose(best[0].invert())
        words = best[1]
        total = sum(len(w.letters) for w in words)
    return CarrierVerdict(
        "inconclusive",
        detail="leaf turn graph keeps a cut vertex at the descent cap",
    )


def closed_top_inp(f: GraphSelfMap, strata: Optional[Stratification] = None):
    """A closed multi-edge indivisible Nielsen path meeting the top EG stratum.

    Such a loop is the geometric signature: the top lamination has a
    periodic closed circuit, which yields a fixed cyclic splitting by
    gluing an annulus along the loop.  Returns the record or None.
    """
    from outclass.train_track import find_inps

    strata = strata or compute_stratification(f)
    eg = [st for st in strata.strata if st.kind == "eg"]
    if not eg:
        return None
    top_edges = set(eg[-1].edges)
    for rec in find_inps(f, strata=strata):
        if not rec.indivisible or rec.is_family() or len(rec.path) <= 1:
            continue
        if not top_edges & {abs(e) for e in rec.path}:
            continue
        if f.graph.init_vertex(rec.path[0]) == f.graph.term_vertex(rec.path[-1]):
            return rec
    return None


def filling_report(
    f: GraphSelfMap,
    phi: FreeAutomorphism,
    splittings: Sequence[object] = (),
    leaf_iterates: int = 10,
    length_cap: int = 12,
    power_cap: int = 2,
    fixed: Optional[tuple] = None,
) -> FillingReport:
    """Evidence aggregation for (Z-)filling of the top attracting lamination.

    Positive witnesses (a carrying factor or splitting, a closed Nielsen
    loop) are exact; negative verdicts are evidence-at-caps only.
    """
    caps = {
        "leaf_iterates": leaf_iterates,
        "length_cap": length_cap,
        "power_cap": power_cap,
    }
    strata = compute_stratification(f)
    eg = [(i, st) for i, st in enumerate(strata.strata) if st.kind == "eg"]
    if not eg:
        return FillingReport(
            "NotFilling", "NotZFilling", caps, carrier_detail="no EG stratum"
        )
    top = eg[-1][1]
    verdict = leaf_carrier_evidence(f, strata, leaf_iterates)
    if verdict.kind == "carried":
        return FillingReport(
            "NotFilling",
            "NotZFilling",
            caps,
            carrier_detail=verdict.detail,
            witness=verdict.factor_basis,
        )
    filling = "FillingEvidence" if verdict.kind == "not_carried" else "Inconclusive"
    word = segment_word(f, leaf_segment(f, top.edges[0], leaf_iterates, strata))
    if fixed is None:
        fixed = tuple(fixed_class_search(phi, length_cap, power_cap))

    from outclass.splitting import (
        elliptic_seed_splittings,
        invariant_splitting_search,
        vertex_group_cores,
    )

    def carries_leaf(s) -> bool:
        return any(
            core.immerses_segment(word)
            for core in vertex_group_cores(s, phi.rank)
        )

    # a fixed class gives twisting material; a fixed splitting whose
    # vertex group carries the leaves blocks Z-filling
    for k, c in fixed:
        for s in elliptic_seed_splittings(phi.rank, c):
            hit = invariant_splitting_search(phi, s, power_cap=4)
            if hit is not None and carries_leaf(hit[1]):
                return FillingReport(
                    filling, "NotZFilling", caps,
                    carrier_detail="fixed splitting carries the leaves",
                    witness=hit, fixed_classes=fixed,
                )
    for s in splittings:
        if carries_leaf(s):
            return FillingReport(
                filling, "NotZFilling", caps,
                carrier_detail="supplied splitting carries the leaves",
                witness=s, fixed_classes=fixed,
            )
    loop = closed_top_inp(f, strata)
    if loop is not None:
        return FillingReport(
            filling, "NotZFilling", caps,
            carrier_detail="closed Nielsen loop in the top stratum",
            witness=loop, fixed_classes=fixed,
        )
    if verdict.kind == "not_carried":
        return FillingReport(
            "FillingEvidence",
            "ZFillingEvidence",
            caps,
            carrier_detail=verdict.detail,
            fixed_classes=fixed,
        )
    return FillingReport("Inconclusive", "Inconclusive", caps, fixed_classes=fixed)

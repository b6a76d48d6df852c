"""Gates, legality, Nielsen path search and train-track audits.

A direction at a vertex is a signed edge leaving it.  Two directions lie
in the same gate when some iterate of the derivative map sends them to
the same direction; turns inside a gate are illegal.  Indivisible
Nielsen paths are found by growing backward-stable rays out of
directions whose image path ends in the direction's own edge, then
matching ray suffixes whose image overhangs agree.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from outclass.graph_map import (
    EdgePath,
    GraphSelfMap,
    Stratification,
    Stratum,
    edge_text,
    tighten,
)
from outclass.words import CyclicWord


class DepthCapExceeded(RuntimeError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class GateStructure:
    """Partition of the directions at each vertex."""

    gates: dict[int, tuple[tuple[int, ...], ...]]  # vertex -> sorted gate tuples

    def _gate_ids(self) -> dict[int, tuple[int, int]]:
        ids = {}
        for v, vertex_gates in self.gates.items():
            for i, g in enumerate(vertex_gates):
                for d in g:
                    ids[d] = (v, i)
        return ids

    def gate_of(self, d: int) -> tuple[int, ...]:
        for vertex_gates in self.gates.values():
            for g in vertex_gates:
                if d in g:
                    return g
        raise KeyError(f"unknown direction {d}")

    def is_legal_turn(self, d1: int, d2: int) -> bool:
        if d1 == d2:
            return False  # degenerate
        return self._gate_ids()[d1] != self._gate_ids()[d2]

    def illegal_turns(self) -> list[tuple[int, int]]:
        out = []
        for vertex_gates in self.gates.values():
            for g in vertex_gates:
                for i, d1 in enumerate(g):
                    for d2 in g[i + 1 :]:
                        out.append((d1, d2))
        return out

    def min_gates_per_vertex(self) -> int:
        return min(len(gs) for gs in self.gates.values())


def _directions(f: GraphSelfMap) -> dict[int, list[int]]:
    by_vertex: dict[int, list[int]] = {}
    for e in f.graph.edges:
        for d in (e, -e):
            by_vertex.setdefault(f.graph.init_vertex(d), []).append(d)
    return {v: sorted(ds, key=lambda x: (abs(x), x < 0)) for v, ds in by_vertex.items()}


def gates(f: GraphSelfMap) -> GateStructure:
    """Eventual-collision classes of the derivative map, split per vertex.

    Directions collide iff their Df-iterates agree at some step; once
    equal they stay equal, so comparing iterates at a step past every
    possible first collision decides the relation exactly.
    """
    dirs = [d for ds in _directions(f).values() for d in ds]
    k_stable = (2 * len(f.graph.edges)) ** 2
    final: dict[int, int] = {}
    for d in dirs:
        cur = d
        # iterate with cycle detection instead of k_stable blind steps
        seen: dict[int, int] = {}
        trail = []
        while cur not in seen and len(trail) <= k_stable:
            seen[cur] = len(trail)
            trail.append(cur)
            cur = f.derivative(cur)
        # value at step k_stable: inside the cycle
        start = seen[cur]
        cycle = trail[start:]
        final[d] = cycle[(k_stable - start) % len(cycle)]
    out: dict[int, tuple[tuple[int, ...], ...]] = {}
    for v, ds in _directions(f).items():
        groups: dict[int, list[int]] = {}
        for d in ds:
            groups.setdefault(final[d], []).append(d)
        out[v] = tuple(sorted(tuple(sorted(g, key=lambda x: (abs(x), x < 0))) for g in groups.values()))
    return GateStructure(out)


def is_legal(path: Sequence[int], g: GateStructure) -> bool:
    for a, b in zip(path, path[1:]):
        if not g.is_legal_turn(-a, b):
            return False
    return True


@dataclass(frozen=True)
class NielsenPathRecord:
    path: EdgePath
    period: int
    indivisible: bool
    endpoints: tuple[int, int]
    family_edge: Optional[int] = None  # E for the family E w^k Ē
    family_axis: Optional[tuple[int, ...]] = None  # loop w as an edge path

    def is_family(self) -> bool:
        return self.family_edge is not None

    def describe(self) -> str:
        if self.is_family():
            e = edge_text((self.family_edge,))
            w = edge_text(self.family_axis)
            return f"{e}({w})^k{edge_text((-self.family_edge,))} family, period {self.period}"
        return f"{edge_text(self.path)} period {self.period}"


def _canonical_inp(path: EdgePath) -> EdgePath:
    rev = tuple(-x for x in reversed(path))
    return min(path, rev)


def _backward_ray(f: GraphSelfMap, seed: int, period: int, length_cap: int) -> EdgePath:
    """Grow the f^p-stable path ending in the seed edge.

    The seed satisfies: f^p(seed) ends with seed, so iterating extends
    the path on the left; the limit is f^p-invariant.
    """
    ray: EdgePath = (seed,)
    while True:
        nxt = f.map_path(ray, period)
        if not (len(nxt) > len(ray) and nxt[-len(ray) :] == ray):
            return ray  # stabilized (e.g. a fixed edge) or degenerate
        if len(nxt) > length_cap:
            return nxt[-length_cap:]
        ray = nxt


_inp_cache: "weakref.WeakKeyDictionary[GraphSelfMap, dict]" = (
    weakref.WeakKeyDictionary()
)


def find_inps(
    f: GraphSelfMap,
    depth_cap: int = 20,
    period_cap: int = 4,
    length_cap: int = 512,
    strata: Optional[Stratification] = None,
) -> list[NielsenPathRecord]:
    """Periodic Nielsen paths with vertex endpoints, up to reversal.

    Returns single periodic edges, linear-edge families E w^k Ē, and the
    turn-based indivisible paths found by suffix-matching backward rays.
    Absence beyond the caps is never claimed.  Results are memoized per
    map (stratification is deterministic, so only its presence is keyed).
    """
    cache_key = (depth_cap, period_cap, length_cap, strata is not None)
    try:
        per_map = _inp_cache.setdefault(f, {})
    except TypeError:  # pragma: no cover - unweakrefable map
        per_map = None
    if per_map is not None and cache_key in per_map:
        return list(per_map[cache_key])
    records: dict[tuple, NielsenPathRecord] = {}
    graph = f.graph

    def add(rec: NielsenPathRecord) -> None:
        key = (
            _canonical_inp(rec.path),
            rec.family_edge and abs(rec.family_edge),
            rec.family_axis and _canonical_inp(rec.family_axis),
        )
        prev = records.get(key)
        if prev is None or rec.period < prev.period:
            records[key] = rec

    # single periodic edges
    for e in sorted(graph.edges):
        for p in range(1, period_cap + 1):
            if f.map_path((e,), p) == (e,):
                add(
                    NielsenPathRecord(
                        (e,), p, True,
                        (graph.init_vertex(e), graph.term_vertex(e)),
                    )
                )
                break

    # linear-edge families: f(E) = E w^d with w a fixed loop
    if strata is not None:
        for st in strata.strata:
            if st.kind == "neg_linear":
                e = st.edges[0]
                w = st.axis.letters
                inst = tighten((e,) + w + (-e,))
                if f.map_path(inst) == inst:
                    add(
                        NielsenPathRecord(
                            inst, 1, True,
                            (graph.init_vertex(e), graph.init_vertex(e)),
                            family_edge=e,
                            family_axis=w,
                        )
                    )

    # turn-based INPs from backward-stable rays
    gs = gates(f)
    for p in range(1, period_cap + 1):
        seeds = []
        for e in sorted(graph.edges) + [-e for e in sorted(graph.edges)]:
            img = f.map_path((e,), p)
            if len(img) >= 1 and img[-1] == e:
                seeds.append(e)
        rays = {s: _backward_ray(f, s, p, length_cap) for s in seeds}

        def overhangs(ray: EdgePath) -> dict[EdgePath, EdgePath]:
            """suffix -> image overhang c with f^p(suffix) = c . suffix.

            Images of nested suffixes are built incrementally from the
            right, cancelling only at the new junction.
            """
            out: dict[EdgePath, EdgePath] = {}
            img: list[int] = []
            for i in range(len(ray) - 1, -1, -1):
                head = list(f.map_path((ray[i],), p))
                while head and img and head[-1] == -img[0]:
                    head.pop()
                    img.pop(0)
                img = head + img
                suf = ray[i:]
                if len(img) >= len(suf) and tuple(img[-len(suf) :]) == suf:
                    out[suf] = tuple(img[: len(img) - len(suf)])
            return out

        tables = {s: overhangs(r) for s, r in rays.items()}
        for s1 in seeds:
            for s2 in seeds:
                if s1 > s2:
                    continue
                by_overhang: dict[EdgePath, EdgePath] = {}
                for suf, c in tables[s1].items():
                    by_overhang[c] = suf
                for suf2, c in tables[s2].items():
                    suf1 = by_overhang.get(c)
                    if suf1 is None or suf1 == suf2:
                        continue
                    if suf1[0] == suf2[0]:
                        continue  # degenerate turn
                    if graph.init_vertex(suf1[0]) != graph.init_vertex(suf2[0]):
                        continue
                    rho = tighten(tuple(-x for x in reversed(suf1)) + suf2)
                    if not rho or f.map_path(rho, p) != rho:
                        continue
                    if len(rho) < 2:
                        continue
                    # a candidate splitting at a legal turn is divisible
                    if gs.is_legal_turn(suf1[0], suf2[0]):
                        continue
                    add(
                        NielsenPathRecord(
                            _canonical_inp(rho), p, True,
                            (
                                graph.term_vertex(-rho[0]),
                                graph.term_vertex(rho[-1]),
                            ),
                        )
                    )
    out = sorted(records.values(), key=lambda r: (r.period, len(r.path), r.path))
    if per_map is not None:
        per_map[cache_key] = out
    return list(out)


# ---------------------------------------------------------------------------
# audits


@dataclass(frozen=True)
class AuditStatus:
    status: str  # "pass" | "fail" | "unknown"
    witness: Optional[str] = None

    @staticmethod
    def ok() -> "AuditStatus":
        return AuditStatus("pass")

    @staticmethod
    def fail(witness: str) -> "AuditStatus":
        return AuditStatus("fail", witness)

    @staticmethod
    def unknown(detail: str) -> "AuditStatus":
        return AuditStatus("unknown", detail)


def rtt_audit(
    f: GraphSelfMap, strata: Stratification, iterate_cap: int = 8
) -> dict[str, AuditStatus]:
    """RTT conditions per exponential stratum, merged to one status each."""
    gs = gates(f)
    filt = strata.filtration()
    results = {"rtt_i": AuditStatus.ok(), "rtt_ii": AuditStatus.ok(), "rtt_iii": AuditStatus.ok()}
    for level, st in enumerate(strata.strata):
        if st.kind != "eg":
            continue
        h = set(st.edges)
        lower = filt[level] - h
        # (i) the derivative keeps stratum directions in the stratum
        for e in st.edges:
            for d in (e, -e):
                if abs(f.derivative(d)) not in h:
                    results["rtt_i"] = AuditStatus.fail(
                        f"direction {edge_text((d,))} leaves stratum {edge_text(st.edges)}"
                    )
        # (ii) connecting paths in the lower graph stay nondegenerate
        for e in st.edges:
            img = f.edge_images[e]
            runs: list[list[int]] = []
            cur: list[int] = []
            for x in img:
                if abs(x) in lower:
                    cur.append(x)
                elif cur:
                    runs.append(cur)
                    cur = []
            for run in runs:
                path = tuple(run)
                for _ in range(iterate_cap):
                    path = f.map_path(path)
                    if not path:
                        results["rtt_ii"] = AuditStatus.fail(
                            f"connecting path {edge_text(tuple(run))} dies under iteration"
                        )
                        break
        # (iii) legal 2-edge stratum paths stay legal in the stratum
        for e1 in list(h) + [-x for x in h]:
            for e2 in list(h) + [-x for x in h]:
                if f.graph.term_vertex(e1) != f.graph.init_vertex(e2):
                    continue
                if e2 == -e1 or not gs.is_legal_turn(-e1, e2):
                    continue
                img = f.map_path((e1, e2))
                for a, b in zip(img, img[1:]):
                    if abs(a) in h and abs(b) in h and not gs.is_legal_turn(-a, b):
                        results["rtt_iii"] = AuditStatus.fail(
                            f"image of {edge_text((e1, e2))} crosses illegal stratum turn"
                        )
    return results


@dataclass(frozen=True)
class CTAuditReport:
    axioms: dict[str, AuditStatus]
    rtt: dict[str, AuditStatus]

    def passed(self, name: str) -> bool:
        return self.axioms[name].status == "pass"


def ct_audit(
    f: GraphSelfMap,
    strata: Stratification,
    iterate_cap: int = 8,
    inp_depth_cap: int = 20,
    splitter: Optional[Callable[[EdgePath], Optional[list]]] = None,
) -> CTAuditReport:
    """Axiom-by-axiom audit of a candidate improved representative.

    Exact where the axiom is finitely checkable (linear edges, filtration,
    zero strata, rotationless); capped searches report unknown rather
    than absence.  `splitter` can be wired to a complete-splitting
    routine to upgrade the completely-split status from unknown.
    """
    graph = f.graph
    gs = gates(f)
    axioms: dict[str, AuditStatus] = {}

    # Rotationless: no periodic direction or vertex with period > 1
    status = AuditStatus.ok()
    for d in [e for e in graph.edges] + [-e for e in graph.edges]:
        cur, trail = d, []
        while cur not in trail:
            trail.append(cur)
            cur = f.derivative(cur)
        cycle_len = len(trail) - trail.index(cur)
        if cycle_len > 1:
            status = AuditStatus.fail(
                f"direction {edge_text((trail[-1],))} has derivative period {cycle_len}"
            )
            break
    axioms["rotationless"] = status

    # Filtration: each prefix union is invariant
    status = AuditStatus.ok()
    for gi in strata.filtration():
        for e in gi:
            if any(abs(x) not in gi for x in f.edge_images[e]):
                status = AuditStatus.fail(f"filtration leaks at edge {edge_text((e,))}")
    axioms["filtration"] = status

    # Periodic edges: periodic implies fixed
    status = AuditStatus.ok()
    for e in sorted(graph.edges):
        seen = {(e,): 0}
        p = (e,)
        for k in range(1, iterate_cap + 1):
            p = f.map_path(p)
            if p == (e,):
                if k > 1:
                    status = AuditStatus.fail(
                        f"edge {edge_text((e,))} periodic with period {k}"
                    )
                break
    axioms["periodic_edges"] = status

    # Zero strata: zero-stratum edges map into strictly lower filtration
    status = AuditStatus.ok()
    filt = strata.filtration()
    for level, st in enumerate(strata.strata):
        if st.kind != "zero":
            continue
        lower = filt[level] - set(st.edges)
        for e in st.edges:
            if any(abs(x) not in lower for x in f.edge_images[e]):
                status = AuditStatus.fail(
                    f"zero stratum edge {edge_text((e,))} does not drop"
                )
    axioms["zero_strata"] = status

    # Linear edges: exact pattern (certified during stratification)
    status = AuditStatus.ok()
    for st in strata.strata:
        if st.kind == "neg_linear":
            e = st.edges[0]
            w = st.axis.letters
            expected = tighten((e,) + w * st.exponent)
            if f.edge_images[e] != expected or f.map_path(w) != w:
                status = AuditStatus.fail(f"edge {edge_text((e,))} fails the linear pattern")
        if st.kind == "neg_nonlinear":
            status = AuditStatus.fail(
                f"NEG edge {edge_text(st.edges)} neither fixed nor linear"
            )
    axioms["linear_edges"] = status

    # NEG Nielsen paths: INPs of NEG height must have the E w^k E-bar shape
    inps = find_inps(f, inp_depth_cap, strata=strata)
    status = AuditStatus.ok()
    level_of = {e: i for i, st in enumerate(strata.strata) for e in st.edges}
    neg_kinds = {"neg_fixed", "neg_linear", "neg_nonlinear"}
    for rec in inps:
        if rec.is_family() or len(rec.path) == 1:
            continue
        top = max((abs(x) for x in rec.path), key=lambda e: level_of[e])
        if strata.strata[level_of[top]].kind not in neg_kinds:
            continue
        shaped = (
            abs(rec.path[0]) == top
            and rec.path[-1] == -rec.path[0]
            and all(abs(x) != top for x in rec.path[1:-1])
        )
        if not shaped:
            status = AuditStatus.fail(
                f"NEG-height path {edge_text(rec.path)} is not E w^k E-bar"
            )
    axioms["neg_nielsen_paths"] = status

    # Vertices / Completely split: not finitely certifiable here
    if not gs.illegal_turns():
        axioms["vertices"] = AuditStatus.ok()
    else:
        axioms["vertices"] = AuditStatus.unknown(
            "endpoint condition audited only on paths found under caps"
        )
    if splitter is None:
        axioms["completely_split"] = AuditStatus.unknown("no splitting oracle wired")
    else:
        status = AuditStatus.ok()
        for e in sorted(graph.edges):
            if splitter(f.map_path((e,))) is None:
                status = AuditStatus.fail(
                    f"image of {edge_text((e,))} admits no complete splitting"
                )
        axioms["completely_split"] = status

    return CTAuditReport(axioms, rtt_audit(f, strata, iterate_cap))


# ---------------------------------------------------------------------------
# improvement moves


def _has_image_cancellation(f: GraphSelfMap, iterate_cap: int = 3) -> Optional[tuple[int, int]]:
    """A turn (d1, d2) at a vertex whose edge images start alike."""
    dirs = _directions(f)
    for v, ds in dirs.items():
        for i, d1 in enumerate(ds):
            for d2 in ds[i + 1 :]:
                if f.derivative(d1) == f.derivative(d2):
                    # is the turn actually crossed by some iterated image?
                    for e in f.graph.edges:
                        p = (e,)
                        for _ in range(iterate_cap):
                            p = f.map_path(p)
                            for a, b in zip(p, p[1:]):
                                if {-a, b} == {d1, d2}:
                                    return (d1, d2)
    return None


def _full_fold(f: GraphSelfMap, d1: int, d2: int) -> GraphSelfMap:
    """Identify the directions d1 and d2 (whole edges, equal images).

    The terminal vertices merge and the marking of edges incident to the
    vanished vertex is conjugated through the fold path, keeping the
    marking a homotopy equivalence.
    """
    from outclass.graph_map import MarkedGraph

    g = f.graph
    if abs(d1) > abs(d2):
        d1, d2 = d2, d1
    keep, gone = abs(d1), abs(d2)
    t1, t2 = g.term_vertex(d1), g.term_vertex(d2)
    if t1 == t2:
        raise BudgetExceeded(
            f"fold of {edge_text((d1, d2))} would kill a loop"
        )

    def subst(x: int) -> int:
        if x == d2:
            return d1
        if x == -d2:
            return -d1
        return x

    # word of the fold path t1 -> t2 in the old graph
    w1 = g.marking[keep] if d1 > 0 else g.marking[keep].inverse()
    w2 = g.marking[gone] if d2 > 0 else g.marking[gone].inverse()
    c = w1.inverse() * w2

    new_edges = {}
    new_marking = {}
    for e, (a, b) in g.edges.items():
        if e == gone:
            continue
        a2 = t1 if a == t2 else a
        b2 = t1 if b == t2 else b
        new_edges[e] = (a2, b2)
        m = g.marking[e]
        if a == t2:
            m = c * m
        if b == t2:
            m = m * c.inverse()
        new_marking[e] = m
    new_images = {
        e: tighten(tuple(subst(x) for x in f.edge_images[e]))
        for e in new_edges
    }
    return GraphSelfMap(MarkedGraph(new_edges, new_marking, g.rank), new_images)


def bh_improve(f: GraphSelfMap, budget: int = 50) -> GraphSelfMap:
    """Bounded folding toward a train-track representative.

    Performs full folds of same-image edge pairs while any iterated edge
    image crosses a turn collapsed by the derivative.  Partial folds that
    would need subdivision are not attempted; those and exhausted budgets
    raise BudgetExceeded.
    """
    cur = f
    for _ in range(budget):
        turn = _has_image_cancellation(cur)
        if turn is None:
            return cur
        d1, d2 = turn
        if cur.image_of(d1) != cur.image_of(d2):
            raise BudgetExceeded(
                f"partial fold at turn {edge_text(turn)} requires subdivision"
            )
        cur = _full_fold(cur, d1, d2)
    raise BudgetExceeded("fold budget exhausted")

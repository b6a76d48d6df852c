"""Marked graphs, tight self-maps, transition matrices and stratifications.

Edges are positive integers 1..m with negation for reversal, mirroring the
word encoding; an edge path is a tuple of signed edge ids.  A MarkedGraph
carries, per edge, a word in the ambient free group (the image of the edge
under a homotopy equivalence to the rose), so loops in the graph translate
to group elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from outclass.words import CyclicWord, FreeAutomorphism, Word, letters_to_text

EdgePath = tuple[int, ...]


class NonComposable(ValueError):
    """Edge sequence is not a path (endpoints do not match)."""


class NotIrreducible(ValueError):
    """Matrix is not irreducible (its digraph is not strongly connected)."""


class UnclassifiableStratum(ValueError):
    """A diagonal block is not zero, identity, or irreducible with growth."""


def edge_text(path: Iterable[int]) -> str:
    return letters_to_text(tuple(path))


class MarkedGraph:
    """Finite graph with oriented edges and a marking into the rose."""

    __slots__ = ("edges", "marking", "rank")

    def __init__(
        self,
        edges: dict[int, tuple[int, int]],
        marking: dict[int, Word],
        rank: int,
    ):
        self.edges = dict(edges)
        self.marking = dict(marking)
        self.rank = rank
        for e in edges:
            if e <= 0:
                raise ValueError("edges are keyed by positive ids")
            if e not in marking:
                raise ValueError(f"edge {e} missing a marking word")

    @staticmethod
    def rose(rank: int) -> "MarkedGraph":
        return MarkedGraph(
            {i: (0, 0) for i in range(1, rank + 1)},
            {i: Word((i,)) for i in range(1, rank + 1)},
            rank,
        )

    def vertices(self) -> list[int]:
        vs = {v for ends in self.edges.values() for v in ends}
        return sorted(vs)

    def init_vertex(self, e: int) -> int:
        return self.edges[e][0] if e > 0 else self.edges[-e][1]

    def term_vertex(self, e: int) -> int:
        return self.edges[e][1] if e > 0 else self.edges[-e][0]

    def check_path(self, path: Sequence[int]) -> None:
        for a, b in zip(path, path[1:]):
            if self.term_vertex(a) != self.init_vertex(b):
                raise NonComposable(f"{edge_text(path)} breaks at {edge_text((a, b))}")

    def path_word(self, path: Sequence[int]) -> Word:
        """Group element read by a path, via the marking."""
        letters: list[int] = []
        for e in path:
            w = self.marking[abs(e)]
            letters.extend(w.letters if e > 0 else w.inverse().letters)
        return Word(letters)

    def graph_rank(self) -> int:
        return len(self.edges) - len(self.vertices()) + 1

    def spanning_tree(self, base: Optional[int] = None) -> dict[int, EdgePath]:
        """BFS tree paths base -> v, deterministic edge order."""
        vs = self.vertices()
        root = vs[0] if base is None else base
        paths: dict[int, EdgePath] = {root: ()}
        queue = [root]
        signed = sorted(
            [e for e in self.edges] + [-e for e in self.edges], key=lambda x: (abs(x), x < 0)
        )
        while queue:
            v = queue.pop(0)
            for e in signed:
                if self.init_vertex(e) == v:
                    u = self.term_vertex(e)
                    if u not in paths:
                        paths[u] = paths[v] + (e,)
                        queue.append(u)
        if len(paths) != len(vs):
            raise ValueError("graph is not connected")
        return paths


def tighten(path: Sequence[int]) -> EdgePath:
    """Remove backtracking e, -e pairs (single stack pass)."""
    out: list[int] = []
    for e in path:
        if out and out[-1] == -e:
            out.pop()
        else:
            out.append(e)
    return tuple(out)


def cyclic_tighten(path: Sequence[int]) -> EdgePath:
    p = list(tighten(path))
    while len(p) >= 2 and p[0] == -p[-1]:
        p = p[1:-1]
    return tuple(p)


class GraphSelfMap:
    """A tight self-map of a marked graph, given by edge image paths."""

    __slots__ = ("graph", "edge_images", "vertex_images")

    def __init__(self, graph: MarkedGraph, edge_images: dict[int, EdgePath]):
        self.graph = graph
        self.edge_images = {e: tighten(p) for e, p in edge_images.items()}
        for e in graph.edges:
            img = self.edge_images.get(e)
            if not img:
                raise ValueError(f"edge {edge_text((e,))} maps to a point")
            graph.check_path(img)
        vimg: dict[int, int] = {}
        for e in graph.edges:
            img = self.edge_images[e]
            for v, w in (
                (graph.init_vertex(e), graph.init_vertex(img[0])),
                (graph.term_vertex(e), graph.term_vertex(img[-1])),
            ):
                if vimg.setdefault(v, w) != w:
                    raise ValueError(f"inconsistent vertex image at {v}")
        self.vertex_images = vimg

    @staticmethod
    def from_automorphism(phi: FreeAutomorphism) -> "GraphSelfMap":
        """The obvious representative on the rose."""
        return GraphSelfMap(
            MarkedGraph.rose(phi.rank),
            {i: tuple(phi.images[i - 1].letters) for i in range(1, phi.rank + 1)},
        )

    def image_of(self, e: int) -> EdgePath:
        img = self.edge_images[abs(e)]
        return img if e > 0 else tuple(-x for x in reversed(img))

    def map_path(self, path: Sequence[int], k: int = 1) -> EdgePath:
        """Tightened image f^k_#(path)."""
        p = tighten(path)
        for _ in range(k):
            raw: list[int] = []
            for e in p:
                for x in self.image_of(e):
                    if raw and raw[-1] == -x:
                        raw.pop()
                    else:
                        raw.append(x)
            p = tuple(raw)
        return p

    def derivative(self, d: int) -> int:
        """Df: initial direction of the image path of direction d."""
        return self.image_of(d)[0]

    def transition_matrix(self) -> "TransitionMatrix":
        edges = sorted(self.graph.edges)
        idx = {e: i for i, e in enumerate(edges)}
        m = np.zeros((len(edges), len(edges)), dtype=np.int64)
        for e in edges:
            for x in self.edge_images[e]:
                m[idx[abs(x)], idx[e]] += 1
        return TransitionMatrix(m, tuple(edges))

    def induced_automorphism(self, base: Optional[int] = None) -> FreeAutomorphism:
        """Outer action on the free group, through the marking.

        Builds the graph's own fundamental-group basis from a spanning
        tree, reads off the action of the map there, and conjugates by
        the marking isomorphism.
        """
        g = self.graph
        tree = g.spanning_tree(base)
        root = next(v for v, p in tree.items() if p == ())
        nontree: list[int] = []
        tree_edges = {abs(e) for p in tree.values() for e in p}
        for e in sorted(g.edges):
            if e not in tree_edges:
                nontree.append(e)
        if len(nontree) != g.rank:
            raise ValueError("marking rank does not match graph rank")

        def loop(e: int) -> EdgePath:
            back = tree[g.term_vertex(e)]
            return tighten(
                tree[g.init_vertex(e)] + (e,) + tuple(-x for x in reversed(back))
            )

        # marking isomorphism on the tree basis
        mark = FreeAutomorphism([g.path_word(loop(e)) for e in nontree])

        def express(path: EdgePath) -> Word:
            # rewrite a closed tight path at root in the tree basis
            gen_of = {e: i + 1 for i, e in enumerate(nontree)}
            out: list[int] = []
            for e in path:
                a = abs(e)
                if a in gen_of:
                    out.append(gen_of[a] if e > 0 else -gen_of[a])
            return Word(out)

        conj_to_root = tree[self.vertex_images[root]]
        images = []
        for e in nontree:
            img = self.map_path(loop(e))
            based = tighten(
                conj_to_root + img + tuple(-x for x in reversed(conj_to_root))
            )
            images.append(express(based))
        inner = FreeAutomorphism(images)
        return mark.compose(inner).compose(mark.invert())

    def realizes(self, phi: FreeAutomorphism) -> bool:
        """True iff the induced outer automorphism equals [phi]."""
        if phi.rank != self.graph.rank:
            return False
        psi = self.induced_automorphism()
        if psi.abelianization() != phi.abelianization():
            # abelianizations of outer-equal maps agree up to nothing: inner
            # automorphisms act trivially on homology, so this is a filter
            diff = phi.invert().compose(psi)
            return diff.is_inner() is not None
        return phi.invert().compose(psi).is_inner() is not None

    def __repr__(self) -> str:
        ims = ", ".join(
            f"{edge_text((e,))}->{edge_text(p)}" for e, p in sorted(self.edge_images.items())
        )
        return f"GraphSelfMap({ims})"


@dataclass(frozen=True)
class TransitionMatrix:
    matrix: np.ndarray
    edges: tuple[int, ...]

    def submatrix(self, edge_subset: Sequence[int]) -> "TransitionMatrix":
        idx = [self.edges.index(e) for e in edge_subset]
        return TransitionMatrix(self.matrix[np.ix_(idx, idx)], tuple(edge_subset))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TransitionMatrix)
            and self.edges == other.edges
            and bool(np.array_equal(self.matrix, other.matrix))
        )


def _strongly_connected_components(adj: dict[int, set[int]]) -> list[set[int]]:
    """Tarjan, iterative."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comps: list[set[int]] = []
    counter = [0]

    for start in sorted(adj):
        if start in index:
            continue
        work = [(start, iter(sorted(adj[start])))]
        index[start] = low[start] = counter[0]
        counter[0] += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(adj[w]))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def pf_eigen(
    m: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000
) -> tuple[float, np.ndarray]:
    """Perron-Frobenius eigenpair of an irreducible nonnegative matrix.

    Power iteration on m + I (primitivity shift) with a relative-change
    stop; the vector comes back positive with unit 1-norm.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0]), np.array([1.0])
    adj = {i: {int(j) for j in np.nonzero(m[:, i])[0]} for i in range(n)}
    if any(len(c) != n for c in _strongly_connected_components(adj)):
        raise NotIrreducible("transition digraph is not strongly connected")
    shifted = m + np.eye(n)
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(max_iter):
        w = shifted @ v
        new_lam = float(np.linalg.norm(w, 1))
        w /= new_lam
        if abs(new_lam - lam) <= tol * new_lam and float(np.abs(w - v).sum()) <= tol:
            v = w
            lam = new_lam
            break
        v, lam = w, new_lam
    lam -= 1.0  # undo the shift
    # one Rayleigh-style refinement on the true matrix
    mv = m @ v
    lam = float(mv @ v / (v @ v))
    return lam, v / v.sum()


@dataclass(frozen=True)
class Stratum:
    edges: tuple[int, ...]
    kind: str  # "zero" | "neg_fixed" | "neg_linear" | "neg_nonlinear" | "eg"
    pf_value: Optional[float] = None
    pf_vector: Optional[tuple[float, ...]] = None
    axis: Optional[CyclicWord] = None
    exponent: Optional[int] = None

    def is_exponential(self) -> bool:
        return self.kind == "eg"


@dataclass(frozen=True)
class Stratification:
    strata: tuple[Stratum, ...]  # bottom first: G_i = union of strata <= i

    def exponential_strata(self) -> list[Stratum]:
        return [s for s in self.strata if s.kind == "eg"]

    def filtration(self) -> list[set[int]]:
        out = []
        acc: set[int] = set()
        for s in self.strata:
            acc |= set(s.edges)
            out.append(set(acc))
        return out


def _classify_stratum(
    f: GraphSelfMap, comp: tuple[int, ...], block: np.ndarray, tol: float
) -> Stratum:
    if not block.any():
        return Stratum(comp, "zero")
    if len(comp) == 1 and block[0, 0] == 1:
        e = comp[0]
        img = f.edge_images[e]
        if img == (e,):
            return Stratum(comp, "neg_fixed")
        # (Linear Edges) pattern: f(E) = E . u with u = w^d closed, f#(w)=w
        if img[0] == e:
            u = img[1:]
            if u and f.graph.init_vertex(u[0]) == f.graph.term_vertex(u[-1]):
                root, d = CyclicWord(u).root()
                loop = root.letters
                if f.map_path(loop) == loop:
                    return Stratum(comp, "neg_linear", axis=root, exponent=d)
        return Stratum(comp, "neg_nonlinear")
    lam, vec = pf_eigen(block)
    if lam <= 1 + tol:
        raise UnclassifiableStratum(
            f"stratum {edge_text(comp)}: irreducible block with growth {lam} <= 1"
        )
    return Stratum(comp, "eg", pf_value=lam, pf_vector=tuple(vec))


def compute_stratification(f: GraphSelfMap, tol: float = 1e-9) -> Stratification:
    """Maximal filtration from SCCs of the edge-dependency digraph.

    Edge e depends on e' when f(e) crosses e'; invariant subgraphs are the
    successor-closed sets, so sink components come first.  Ties between
    incomparable components break by size then lexicographic edge list.
    """
    tm = f.transition_matrix()
    edges = tm.edges
    idx = {e: i for i, e in enumerate(edges)}
    # dependency: e -> e' when e' appears in f(e), i.e. matrix[e'][e] > 0
    adj = {e: {edges[j] for j in np.nonzero(tm.matrix[:, idx[e]])[0]} for e in edges}
    comps = [tuple(sorted(c)) for c in _strongly_connected_components(adj)]
    comp_of = {e: c for c in comps for e in c}
    # condensation order: all dependencies of a stratum lie weakly below it
    placed: list[tuple[int, ...]] = []
    placed_set: set[int] = set()
    remaining = set(comps)
    while remaining:
        ready = [
            c
            for c in remaining
            if all(comp_of[d] == c or d in placed_set for e in c for d in adj[e])
        ]
        if not ready:  # pragma: no cover - condensation is acyclic
            raise AssertionError("cyclic condensation")
        ready.sort(key=lambda c: (len(c), c))
        chosen = ready[0]
        placed.append(chosen)
        placed_set |= set(chosen)
        remaining.discard(chosen)
    strata = []
    for comp in placed:
        block = tm.submatrix(comp).matrix
        strata.append(_classify_stratum(f, comp, block, tol))
    return Stratification(tuple(strata))

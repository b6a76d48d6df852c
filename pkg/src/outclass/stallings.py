"""Folded core graphs of finitely generated subgroups of a free group.

A CoreGraph is the Stallings graph of a subgroup: vertices, directed
edges labeled by positive generators, and a base vertex.  Construction
wedges loops for the generators and folds to completion; the result is
frozen and all queries on it are pure.
"""

from __future__ import annotations

from typing import Iterable, Optional

from outclass.words import CyclicWord, Word


class CoreGraph:
    """Folded based graph; edges stored as out[vertex][signed_label] = vertex.

    A signed label x means an edge labeled |x| leaving the vertex in the
    positive direction if x > 0, traversed backwards if x < 0; the table
    always stores both directions.
    """

    __slots__ = ("out", "base", "rank", "_frozen", "_raw", "_nverts")

    def __init__(self, rank: int):
        self.out: dict[int, dict[int, int]] = {0: {}}
        self.base = 0
        self.rank = rank
        self._frozen = False
        # construction keeps a multigraph edge list; _fold builds `out`
        self._raw: list[tuple[int, int, int]] = []
        self._nverts = 1

    # -- construction ------------------------------------------------------

    def _new_vertex(self) -> int:
        v = self._nverts
        self._nverts += 1
        return v

    def _attach_loop(self, w: Word, at: Optional[int] = None) -> None:
        if self._frozen:
            raise RuntimeError("graph is frozen")
        anchor = self.base if at is None else at
        u = anchor
        ls = w.letters
        for i, x in enumerate(ls):
            v = anchor if i == len(ls) - 1 else self._new_vertex()
            self._raw.append((u, abs(x), v) if x > 0 else (v, abs(x), u))
            u = v

    def _fold(self) -> None:
        """Fold to completion: union targets of equally-labeled edges.

        Union-find over vertices; edges are re-bucketed under representatives
        until no vertex has two distinct neighbors under the same label.
        """
        parent = {v: v for v in range(self._nverts)}

        def find(v: int) -> int:
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        edges = self._raw
        changed = True
        while changed:
            changed = False
            table: dict[tuple[int, int], int] = {}
            for u, x, v in edges:
                for a, lbl, b in ((u, x, v), (v, -x, u)):
                    ra, rb = find(a), find(b)
                    key = (ra, lbl)
                    if key in table:
                        rc = find(table[key])
                        if rc != rb:
                            parent[rb] = rc
                            changed = True
                    else:
                        table[key] = rb
        merged: dict[int, dict[int, int]] = {}
        for u, x, v in edges:
            ru, rv = find(u), find(v)
            merged.setdefault(ru, {})[x] = rv
            merged.setdefault(rv, {})[-x] = ru
        b = find(self.base)
        merged.setdefault(b, {})
        self.out = merged
        self.base = b

    def _strip_to_core(self, keep_base: bool = True) -> None:
        changed = True
        while changed:
            changed = False
            for v in list(self.out):
                if keep_base and v == self.base:
                    continue
                if len(self.out[v]) <= 1:
                    for x, u in list(self.out[v].items()):
                        self.out[u].pop(-x, None)
                    del self.out[v]
                    changed = True

    def freeze(self) -> "CoreGraph":
        self._frozen = True
        return self

    # -- queries -----------------------------------------------------------

    def step(self, v: int, x: int) -> Optional[int]:
        return self.out[v].get(x)

    def trace(self, start: int, letters: Iterable[int]) -> Optional[int]:
        v: Optional[int] = start
        for x in letters:
            v = self.out[v].get(x)  # type: ignore[index]
            if v is None:
                return None
        return v

    def contains(self, w: Word) -> bool:
        """Membership in the subgroup: w reads a base-to-base path."""
        return self.trace(self.base, w.letters) == self.base

    def contains_conjugate(self, c: CyclicWord) -> bool:
        """Some conjugate of c lies in the subgroup.

        True iff the cyclically reduced word closes a loop at some vertex
        of the core (base-point free reading).
        """
        if len(c) == 0:
            return True
        core = self.cored()
        for v in core.out:
            if core.trace(v, c.letters) == v:
                return True
        return False

    def immerses_segment(self, path: Word) -> bool:
        """The reduced word labels an immersed path from some vertex."""
        return any(self.trace(v, path.letters) is not None for v in self.out)

    def cored(self) -> "CoreGraph":
        """Copy with degree-<=1 non-base vertices iteratively stripped.

        The base itself is stripped too when it dangles (core of the
        conjugacy class); the basepoint then moves to the stub's end.
        """
        g = self._copy()
        g._strip_to_core(keep_base=True)
        # slide the base along its stub if it has become a valence-1 hang
        while len(g.out[g.base]) == 1 and len(g.out) > 1:
            ((x, u),) = g.out[g.base].items()
            g.out[u].pop(-x, None)
            del g.out[g.base]
            g.base = u
        return g.freeze()

    def _copy(self) -> "CoreGraph":
        g = CoreGraph(self.rank)
        g.out = {v: dict(nb) for v, nb in self.out.items()}
        g.base = self.base
        return g

    def num_vertices(self) -> int:
        return len(self.out)

    def num_edges(self) -> int:
        return sum(len(nb) for nb in self.out.values()) // 2

    def graph_rank(self) -> int:
        return self.num_edges() - self.num_vertices() + 1

    def canonical_form(self) -> tuple:
        """BFS relabeling from the base with edges in signed-label order."""
        order = {self.base: 0}
        queue = [self.base]
        label_order = sorted(
            (x for i in range(1, self.rank + 1) for x in (i, -i)),
            key=lambda x: (abs(x), x < 0),
        )
        edges = []
        while queue:
            v = queue.pop(0)
            for x in label_order:
                u = self.out[v].get(x)
                if u is None:
                    continue
                if u not in order:
                    order[u] = len(order)
                    queue.append(u)
                edges.append((order[v], x, order[u]))
        return tuple(sorted(edges))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CoreGraph)
            and self.rank == other.rank
            and self.canonical_form() == other.canonical_form()
        )

    def __hash__(self) -> int:
        return hash((self.rank, self.canonical_form()))

    def to_text(self) -> str:
        lines = [f"rank {self.rank} base 0"]
        for u, x, v in self.canonical_form():
            if x > 0:
                lines.append(f"{u} -{chr(ord('a') + x - 1)}-> {v}")
        return "\n".join(lines)

    def __repr__(self) -> str:
        return (
            f"CoreGraph(rank={self.rank}, V={self.num_vertices()}, "
            f"E={self.num_edges()})"
        )


def from_generators(gens: Iterable[Word], rank: int) -> CoreGraph:
    """Folded Stallings graph of the subgroup generated by the given words."""
    g = CoreGraph(rank)
    for w in gens:
        if not w.is_trivial():
            g._attach_loop(w)
    g._fold()
    g._strip_to_core()
    return g.freeze()


def subgroup_rank(gens: Iterable[Word], rank: int) -> int:
    return from_generators(gens, rank).graph_rank()

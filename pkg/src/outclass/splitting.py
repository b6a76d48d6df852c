"""One-edge splittings of a free group as graph-of-groups data.

A splitting is stored algebraically: vertex groups as tuples of generator
words, the (cyclic) edge group by a generator, and for HNN extensions a
stable-letter word.  Equivalence of splittings is decided through a
canonical form built from Stallings core graphs, so it is invariant under
conjugation of the vertex groups.  Edge folds, ellipticity tests, slide
moves, an invariant-splitting search, and Dehn twists are provided.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from outclass import stallings
from outclass.words import (
    CyclicWord,
    FreeAutomorphism,
    NotAnAutomorphism,
    Word,
    free_reduce,
)


class SplittingError(ValueError):
    pass


class WNotInVertexGroup(SplittingError):
    pass


class TrivialEdgeGroup(SplittingError):
    pass


class PreconditionFailed(SplittingError):
    pass


class CapExceeded(RuntimeError):
    pass


class BasisAdaptationFailed(SplittingError):
    pass


# ---------------------------------------------------------------------------
# core-graph helpers


def _core(gens: Sequence[Word], rank: int) -> stallings.CoreGraph:
    return stallings.from_generators(gens, rank)


def _conjugacy_canonical(core: stallings.CoreGraph) -> tuple:
    """Canonical form of a subgroup up to conjugation.

    The based canonical form depends on where the basepoint sits in the
    core; minimizing over all core vertices removes that dependence, and
    conjugate subgroups share an (unbased) core graph.
    """
    trimmed = core._copy()
    trimmed._strip_to_core(keep_base=False)
    if trimmed.num_vertices() == 0:
        return ()
    forms = []
    for v in list(trimmed.out.keys()):
        g = trimmed._copy()
        g.base = v
        forms.append(g.canonical_form())
    return min(forms)


def _full_group_form(rank: int) -> tuple:
    rose = _core([Word((i,)) for i in range(1, rank + 1)], rank)
    return rose.canonical_form()


def _generates_whole_group(gens: Sequence[Word], rank: int) -> bool:
    return _core(gens, rank).canonical_form() == _full_group_form(rank)


def _canonical_cyclic(c: CyclicWord) -> tuple[int, ...]:
    """Letters of the canonical representative of {c, c^{-1}} (unoriented)."""
    inv = c.inverse()
    return min(c.letters, inv.letters)


# ---------------------------------------------------------------------------
# one-edge splittings


@dataclass(frozen=True)
class OneEdgeSplitting:
    """A one-edge splitting: amalgam A *_<w> B or HNN extension <V, t>.

    ``edge_word is None`` encodes a free splitting (trivial edge group).
    Vertex groups are tuples of generator words in the ambient basis.
    """

    variant: str  # "amalgam" | "hnn"
    rank: int
    vertex_groups: tuple[tuple[Word, ...], ...]
    edge_word: Optional[CyclicWord] = None
    stable_letter: Optional[Word] = None
    reduced: bool = True

    def __post_init__(self):
        if self.variant not in ("amalgam", "hnn"):
            raise SplittingError(f"unknown variant {self.variant!r}")
        n_expected = 2 if self.variant == "amalgam" else 1
        if len(self.vertex_groups) != n_expected:
            raise SplittingError(
                f"{self.variant} splitting needs {n_expected} vertex group(s)"
            )
        if self.variant == "hnn" and self.stable_letter is None:
            raise SplittingError("HNN splitting needs a stable letter")
        if self.variant == "amalgam" and self.stable_letter is not None:
            raise SplittingError("amalgam has no stable letter")

    # -- structure -----------------------------------------------------
    def vertex_cores(self) -> list[stallings.CoreGraph]:
        return [_core(vg, self.rank) for vg in self.vertex_groups]

    def splitting_class(self) -> str:
        if self.edge_word is None:
            return "free"
        if self.edge_word.is_root_free():
            return "maximal-cyclic"
        return "cyclic"

    def validate(self) -> None:
        """Check the defining invariants; raises SplittingError."""
        cores = self.vertex_cores()
        if self.edge_word is not None:
            for core in cores:
                if not core.contains_conjugate(self.edge_word):
                    raise SplittingError(
                        "edge word does not lie in a vertex group"
                    )
        all_gens = [g for vg in self.vertex_groups for g in vg]
        if self.variant == "hnn":
            all_gens.append(self.stable_letter)
        if not _generates_whole_group(all_gens, self.rank):
            raise SplittingError(
                "vertex groups (and stable letter) do not generate"
            )

    def canonical_form(self) -> tuple:
        vertex_forms = tuple(
            sorted(_conjugacy_canonical(c) for c in self.vertex_cores())
        )
        edge = (
            None if self.edge_word is None else _canonical_cyclic(self.edge_word)
        )
        return (self.variant, vertex_forms, edge)

    def __str__(self) -> str:
        return to_split_text(self)


def amalgam(
    v1: Iterable[Word],
    v2: Iterable[Word],
    rank: int,
    edge_word: Optional[CyclicWord] = None,
    *,
    check: bool = True,
) -> OneEdgeSplitting:
    s = OneEdgeSplitting(
        "amalgam", rank, (tuple(v1), tuple(v2)), edge_word,
        reduced=True,
    )
    s = replace(s, reduced=_is_reduced(s))
    if check:
        s.validate()
    return s


def hnn(
    v: Iterable[Word],
    stable: Word,
    rank: int,
    edge_word: Optional[CyclicWord] = None,
    *,
    check: bool = True,
) -> OneEdgeSplitting:
    s = OneEdgeSplitting(
        "hnn", rank, (tuple(v),), edge_word, stable, reduced=True
    )
    s = replace(s, reduced=_is_reduced(s))
    if check:
        s.validate()
    return s


def _edge_group_fills_vertex(
    edge_word: CyclicWord, vg: Sequence[Word], rank: int
) -> bool:
    """Is the inclusion <edge word> -> <vg> an isomorphism?"""
    if stallings.subgroup_rank(vg, rank) != 1:
        return False
    core = _core(vg, rank)
    return core.contains_conjugate(edge_word) and _conjugacy_canonical(
        core
    ) == _conjugacy_canonical(_core([edge_word.as_word()], rank))


def _is_reduced(s: OneEdgeSplitting) -> bool:
    if s.edge_word is None:
        return True
    return not any(
        _edge_group_fills_vertex(s.edge_word, vg, s.rank)
        for vg in s.vertex_groups
    )


def vertex_group_cores(
    s: OneEdgeSplitting, rank: int
) -> list[stallings.CoreGraph]:
    """Stallings cores of the vertex groups (for carrying tests)."""
    return s.vertex_cores()


# ---------------------------------------------------------------------------
# folds, ellipticity, pair types


def edge_fold(
    s: OneEdgeSplitting, w: CyclicWord, side: int = 0
) -> OneEdgeSplitting:
    """Fold the edge of a free splitting over the cyclic group <w>.

    For an amalgam A * B, folding w from side A yields A *_<w> <B, w>;
    for a free HNN extension <V>* with stable letter t it yields the HNN
    splitting with vertex group <V, t^-1 w t> and edge group <w>.
    """
    if s.edge_word is not None:
        raise PreconditionFailed("edge_fold expects a free splitting")
    if w.letters == ():
        raise WNotInVertexGroup("trivial word")
    cores = s.vertex_cores()
    if s.variant == "amalgam":
        if side not in (0, 1):
            raise PreconditionFailed("side must be 0 or 1")
        if not cores[side].contains(w.as_word()):
            raise WNotInVertexGroup(str(w))
        other = 1 - side
        groups = [list(s.vertex_groups[0]), list(s.vertex_groups[1])]
        groups[other] = groups[other] + [w.as_word()]
        out = OneEdgeSplitting(
            "amalgam", s.rank, (tuple(groups[0]), tuple(groups[1])), w
        )
    else:
        if not cores[0].contains(w.as_word()):
            raise WNotInVertexGroup(str(w))
        t = s.stable_letter
        conj = t.inverse() * w.as_word() * t
        out = OneEdgeSplitting(
            "hnn", s.rank, (s.vertex_groups[0] + (conj,),), w, t
        )
    return replace(out, reduced=_is_reduced(out))


def is_elliptic(c: CyclicWord, s: OneEdgeSplitting) -> bool:
    """True iff c is conjugate into some vertex group of s."""
    if c.letters == ():
        return True
    return any(core.contains_conjugate(c) for core in s.vertex_cores())


def pair_type(s: OneEdgeSplitting, t: OneEdgeSplitting) -> str:
    """Elliptic/hyperbolic type of a pair of cyclic splittings.

    First letter: behaviour of s's edge word in t; second: t's in s.
    'E' = elliptic (conjugate into a vertex group), 'H' = hyperbolic.
    """
    if s.edge_word is None or t.edge_word is None:
        raise TrivialEdgeGroup("pair_type needs cyclic splittings")
    a = "E" if is_elliptic(s.edge_word, t) else "H"
    b = "E" if is_elliptic(t.edge_word, s) else "H"
    return a + b


# ---------------------------------------------------------------------------
# graphs of groups and slide moves


@dataclass(frozen=True)
class GoGEdge:
    u: int
    v: int
    group: Optional[CyclicWord]
    incl_u: Word = Word()
    incl_v: Word = Word()

    def is_loop(self) -> bool:
        return self.u == self.v


@dataclass(frozen=True)
class GraphOfGroups:
    rank: int
    vertex_groups: tuple[tuple[Word, ...], ...]
    edges: tuple[GoGEdge, ...]
    # (slid edge index, loop index) pairs already used: an edge may slide
    # along a loop only once
    slid_loops: frozenset = field(default_factory=frozenset)

    def vertex_cores(self) -> list[stallings.CoreGraph]:
        return [_core(vg, self.rank) for vg in self.vertex_groups]

    def is_reduced(self) -> bool:
        """No edge-group inclusion is an isomorphism onto a vertex group."""
        for e in self.edges:
            if e.group is None:
                continue
            for end in (e.u, e.v):
                if _edge_group_fills_vertex(
                    e.group, self.vertex_groups[end], self.rank
                ):
                    return False
        return True

    def canonical_form(self) -> tuple:
        vforms = [
            _conjugacy_canonical(c) for c in self.vertex_cores()
        ]
        edge_forms = sorted(
            (
                tuple(sorted((vforms[e.u], vforms[e.v]))),
                None if e.group is None else _canonical_cyclic(e.group),
            )
            for e in self.edges
        )
        return (tuple(sorted(vforms)), tuple(edge_forms))


def splitting_to_graph(s: OneEdgeSplitting) -> GraphOfGroups:
    if s.variant == "amalgam":
        return GraphOfGroups(
            s.rank, s.vertex_groups, (GoGEdge(0, 1, s.edge_word),)
        )
    return GraphOfGroups(
        s.rank, s.vertex_groups, (GoGEdge(0, 0, s.edge_word),)
    )


def slide(g: GraphOfGroups, e_idx: int, f_idx: int) -> GraphOfGroups:
    """Slide edge f across edge e (they share a vertex; G_f <= G_e)."""
    if e_idx == f_idx:
        raise PreconditionFailed("cannot slide an edge across itself")
    e, f = g.edges[e_idx], g.edges[f_idx]
    if e.group is None or f.group is None:
        raise PreconditionFailed("slide needs nontrivial edge groups")
    # find the shared vertex and the direction the slide pushes f toward
    if f.u in (e.u, e.v):
        shared, f_end = f.u, "u"
    elif f.v in (e.u, e.v):
        shared, f_end = f.v, "v"
    else:
        raise PreconditionFailed("edges are not adjacent")
    far = e.v if shared == e.u else e.u
    if e.is_loop() and (f_idx, e_idx) in g.slid_loops:
        raise PreconditionFailed("an edge slides along a loop only once")
    if not _core([e.group.as_word()], g.rank).contains_conjugate(f.group):
        raise PreconditionFailed("edge group of f not contained in that of e")
    if f_end == "u":
        new_f = replace(f, u=far)
    else:
        new_f = replace(f, v=far)
    edges = list(g.edges)
    edges[f_idx] = new_f
    slid = set(g.slid_loops)
    if e.is_loop():
        slid.add((f_idx, e_idx))
    return GraphOfGroups(
        g.rank, g.vertex_groups, tuple(edges), frozenset(slid)
    )


def enumerate_slides(g: GraphOfGroups, cap: int = 10_000) -> set:
    """BFS closure of g under slide moves, up to canonical-form equality.

    Returns the set of canonical forms reached; raises CapExceeded if the
    orbit exceeds the cap (with the partial orbit attached).
    """
    seen = {g.canonical_form()}
    queue = [g]
    while queue:
        cur = queue.pop(0)
        for e_idx in range(len(cur.edges)):
            for f_idx in range(len(cur.edges)):
                if e_idx == f_idx:
                    continue
                try:
                    nxt = slide(cur, e_idx, f_idx)
                except PreconditionFailed:
                    continue
                form = nxt.canonical_form()
                if form not in seen:
                    if len(seen) >= cap:
                        err = CapExceeded("slide orbit exceeds cap")
                        err.partial = seen
                        raise err
                    seen.add(form)
                    queue.append(nxt)
    return seen


# ---------------------------------------------------------------------------
# automorphism action and equivalence


def apply_aut(s: OneEdgeSplitting, phi: FreeAutomorphism) -> OneEdgeSplitting:
    groups = tuple(
        tuple(phi.apply(g) for g in vg) for vg in s.vertex_groups
    )
    edge = None if s.edge_word is None else phi.apply_cyclic(s.edge_word)
    stable = None if s.stable_letter is None else phi.apply(s.stable_letter)
    return OneEdgeSplitting(
        s.variant, s.rank, groups, edge, stable, reduced=s.reduced
    )


def _in_double_coset(
    w: Word, core: stallings.CoreGraph, t: Word, length_cap: int = 8
) -> bool:
    """Is w in V t V, where V is the subgroup with the given core graph?

    Bounded search: enumerate v1 in V up to the length cap (loops at the
    core basepoint) and test t^-1 v1^-1 w in V.  Sound, cap-bounded.
    """
    tinv = t.inverse()
    # cheap exact cases first (v1 or v2 trivial)
    if core.contains(Word(free_reduce(tuple(tinv) + tuple(w)))):
        return True
    if core.contains(Word(free_reduce(tuple(w) + tuple(tinv)))):
        return True
    base = core.base
    # DFS over reduced loops at the basepoint
    stack = [(base, ())]
    while stack:
        v, path = stack.pop()
        if path and v == base:
            v1 = Word(path)
            cand = Word(
                free_reduce(tuple(tinv) + tuple(v1.inverse()) + tuple(w))
            )
            if core.contains(cand):
                return True
        if len(path) >= length_cap:
            continue
        for x, dests in core.out.get(v, {}).items():
            if path and x == -path[-1]:
                continue
            for d in dests:
                stack.append((d, path + (x,)))
    return False


def equivalent(s: OneEdgeSplitting, t: OneEdgeSplitting) -> bool:
    """Equality of splittings up to conjugation of the defining data."""
    if s.canonical_form() != t.canonical_form():
        return False
    if s.edge_word is not None and t.edge_word is not None:
        if not s.edge_word.unoriented_eq(t.edge_word):
            return False
    if s.variant == "hnn":
        # the stable letters must agree up to the vertex-group double coset
        core = _core(s.vertex_groups[0], s.rank)
        if not (
            _in_double_coset(t.stable_letter, core, s.stable_letter)
            or _in_double_coset(
                t.stable_letter.inverse(), core, s.stable_letter
            )
        ):
            return False
    return True


def invariant_splitting_search(
    phi: FreeAutomorphism,
    seed: OneEdgeSplitting,
    power_cap: int = 4,
) -> Optional[tuple[int, OneEdgeSplitting]]:
    """Least k <= power_cap with phi^k(seed) equivalent to seed, if any."""
    cur = seed
    for k in range(1, power_cap + 1):
        cur = apply_aut(cur, phi)
        if equivalent(cur, seed):
            return (k, seed)
    return None


def elliptic_seed_splittings(
    rank: int, c: CyclicWord, max_seeds: int = 64
) -> list[OneEdgeSplitting]:
    """Candidate cyclic splittings with edge group <c>.

    Built by folding c into the free splittings visible in the standard
    basis: amalgams over generator partitions whose left part contains the
    support of c, and HNN extensions whose stable letter avoids it.
    """
    support = {abs(x) for x in c.letters}
    gens = [Word((i,)) for i in range(1, rank + 1)]
    seeds: list[OneEdgeSplitting] = []
    # amalgam seeds: <P> * <rest>, fold on the P side
    for mask in range(1, 2**rank - 1):
        part = {i + 1 for i in range(rank) if mask & (1 << i)}
        if not support <= part:
            continue
        left = [g for g in gens if g.letters[0] in part]
        right = [g for g in gens if g.letters[0] not in part]
        free = amalgam(left, right, rank, check=False)
        try:
            seeds.append(edge_fold(free, c, side=0))
        except SplittingError:
            continue
        if len(seeds) >= max_seeds:
            return seeds
    # HNN seeds: collapse all generators but t, fold c
    for t in range(1, rank + 1):
        if t in support:
            continue
        v = [g for g in gens if g.letters[0] != t]
        free = hnn(v, Word((t,)), rank, check=False)
        try:
            seeds.append(edge_fold(free, c))
        except SplittingError:
            continue
        if len(seeds) >= max_seeds:
            break
    return seeds


# ---------------------------------------------------------------------------
# Dehn twists


def dehn_twist(s: OneEdgeSplitting) -> FreeAutomorphism:
    """The twist about a cyclic splitting, in the standard basis.

    Amalgam A *_<w> B: identity on B, conjugation by w on A.  HNN with
    stable letter t: identity on the vertex group, t -> w t.  Requires the
    standard generators to be adapted to the splitting (each lies in a
    vertex group, or equals the stable letter).
    """
    if s.edge_word is None:
        raise TrivialEdgeGroup("dehn_twist needs a cyclic splitting")
    w = s.edge_word.as_word()
    cores = s.vertex_cores()
    images: list[Word] = []
    for i in range(1, s.rank + 1):
        x = Word((i,))
        if s.variant == "amalgam":
            if cores[1].contains(x):
                images.append(x)
            elif cores[0].contains(x):
                images.append(w * x * w.inverse())
            else:
                raise BasisAdaptationFailed(
                    f"generator {x} lies in no vertex group"
                )
        else:
            if cores[0].contains(x):
                images.append(x)
            elif x == s.stable_letter or x.inverse() == s.stable_letter:
                img = w * x if x == s.stable_letter else (w * x.inverse()).inverse()
                images.append(img)
            else:
                raise BasisAdaptationFailed(
                    f"generator {x} is neither elliptic nor the stable letter"
                )
    try:
        tw = FreeAutomorphism(images)
        tw.invert()  # raises if not invertible
    except NotAnAutomorphism as exc:  # pragma: no cover - defensive
        raise BasisAdaptationFailed(str(exc))
    if tw.is_identity():
        raise BasisAdaptationFailed("twist is trivial (non-reduced splitting)")
    return tw


# ---------------------------------------------------------------------------
# serialization (.split format)


def to_split_text(s: OneEdgeSplitting) -> str:
    lines = [f"variant: {s.variant}"]
    for vg in s.vertex_groups:
        lines.append("vertex: " + " ".join(str(g) for g in vg))
    lines.append(
        "edge: " + (str(s.edge_word) if s.edge_word is not None else "-")
    )
    if s.variant == "hnn":
        lines.append(f"stable: {s.stable_letter}")
    lines.append(f"rank: {s.rank}")
    return "\n".join(lines) + "\n"


def parse_split_text(text: str) -> OneEdgeSplitting:
    variant = None
    groups: list[tuple[Word, ...]] = []
    edge: Optional[CyclicWord] = None
    stable: Optional[Word] = None
    rank = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise SplittingError(f"line {lineno}: expected 'key: value'")
        key, _, val = line.partition(":")
        key, val = key.strip(), val.strip()
        if key == "variant":
            variant = val
        elif key == "vertex":
            groups.append(tuple(Word.parse(t) for t in val.split()))
        elif key == "edge":
            edge = None if val == "-" else CyclicWord.parse(val)
        elif key == "stable":
            stable = Word.parse(val)
        elif key == "rank":
            rank = int(val)
        else:
            raise SplittingError(f"line {lineno}: unknown key {key!r}")
    if variant is None or rank is None or not groups:
        raise SplittingError("missing variant, rank, or vertex groups")
    if variant == "amalgam":
        return amalgam(groups[0], groups[1], rank, edge)
    return hnn(groups[0], stable, rank, edge)

"""Splitting units, the stratum-interaction graph, and commuting pieces.

A path in a stratified graph may decompose into units — single edges,
Nielsen paths, exceptional paths, connecting paths — whose images under
the map concatenate without cancellation.  Grouping strata by how these
units feed into each other yields a graph whose components carve the
outer automorphism into commuting coordinates; the integer lattice of
exponent tuples compatible with the linear-edge twisting measures how
many independent coordinates there are.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from outclass.graph_map import (
    EdgePath,
    GraphSelfMap,
    Stratification,
    Stratum,
    compute_stratification,
    edge_text,
    tighten,
)
from outclass.numeric import integer_kernel
from outclass.train_track import NielsenPathRecord, find_inps
from outclass.words import FreeAutomorphism


class NotSplittable(ValueError):
    """The path has no unit decomposition at the given caps."""

    def __init__(self, position: int, message: str):
        super().__init__(message)
        self.position = position


class IncompleteSplitting(ValueError):
    """A required path failed to split; carries the partial status."""


# ---------------------------------------------------------------------------
# splitting units


@dataclass(frozen=True)
class SplittingUnit:
    """One term of a unit decomposition of an edge path.

    kind is one of "single_edge", "fixed_edge", "inp", "exceptional",
    "qep", "connecting".  For exceptional and qep units the fields
    edge_i, edge_j, axis, exponent describe the shape E_i w^k E_j^-1;
    sign_pair records the signed twist exponents (d_i, d_j) of the two
    linear edges relative to a common orientation of the axis.
    """

    kind: str
    path: EdgePath
    stratum: Optional[int] = None
    record: Optional[NielsenPathRecord] = None
    edge_i: Optional[int] = None
    edge_j: Optional[int] = None
    axis: Optional[EdgePath] = None
    exponent: Optional[int] = None
    sign_pair: Optional[tuple[int, int]] = None

    def describe(self) -> str:
        return f"{self.kind}:{edge_text(self.path)}"


@dataclass(frozen=True)
class _LinearEdge:
    edge: int
    stratum: int
    loop: EdgePath  # the oriented axis loop following the edge
    exponent: int  # f(E) = E . loop^exponent


def _linear_inventory(
    f: GraphSelfMap, strata: Stratification
) -> dict[int, _LinearEdge]:
    out = {}
    for i, s in enumerate(strata.strata):
        if s.kind != "neg_linear":
            continue
        e = s.edges[0]
        loop = tuple(f.image_of(e)[1:])[: len(s.axis.letters)]
        out[e] = _LinearEdge(e, i, loop, s.exponent)
    return out


def _signed_exponents(
    a: _LinearEdge, b: _LinearEdge
) -> Optional[tuple[int, int]]:
    """Twist exponents of two linear edges against one axis orientation.

    Returns None when the axes differ as unoriented loops; otherwise
    (d_a, d_b) with d_b negated when b winds the other way around.
    """
    la, lb = a.loop, b.loop
    rev = tuple(-x for x in reversed(lb))
    rots = [lb[i:] + lb[:i] for i in range(len(lb))]
    if la in rots:
        return a.exponent, b.exponent
    if la in [rev[i:] + rev[:i] for i in range(len(rev))]:
        return a.exponent, -b.exponent
    return None


def _stratum_of(strata: Stratification) -> dict[int, int]:
    return {e: i for i, s in enumerate(strata.strata) for e in s.edges}


def taken_connecting_paths(
    f: GraphSelfMap, strata: Stratification, depth: int = 3
) -> tuple[EdgePath, ...]:
    """Maximal zero-stratum runs crossed by iterated images of EG edges."""
    zero = {
        e
        for s in strata.strata
        if s.kind == "zero"
        for e in s.edges
    }
    if not zero:
        return ()
    found: set[EdgePath] = set()
    for s in strata.strata:
        if s.kind != "eg":
            continue
        for e in s.edges:
            path: EdgePath = (e,)
            for _ in range(depth):
                path = f.map_path(path)
                run: list[int] = []
                for x in itertools.chain(path, (0,)):
                    if x != 0 and abs(x) in zero:
                        run.append(x)
                    elif run:
                        p = tuple(run)
                        rev = tuple(-y for y in reversed(p))
                        found.add(min(p, rev))
                        run = []
    return tuple(sorted(found))


def _match_power(path: Sequence[int], pos: int, loop: EdgePath) -> int:
    """Number of consecutive copies of loop in path starting at pos."""
    k, n, m = 0, len(path), len(loop)
    while pos + m <= n and tuple(path[pos : pos + m]) == loop:
        k += 1
        pos += m
    return k


def _unit_at(
    f: GraphSelfMap,
    strata: Stratification,
    inps: list[NielsenPathRecord],
    linear: dict[int, _LinearEdge],
    path: Sequence[int],
    pos: int,
) -> Optional[SplittingUnit]:
    """Longest unit starting at pos, or None."""
    where = _stratum_of(strata)
    n = len(path)
    x = path[pos]
    best: Optional[SplittingUnit] = None

    def better(u: SplittingUnit):
        nonlocal best
        if best is None or len(u.path) > len(best.path):
            best = u

    # exceptional paths E_i w^k E_j^-1: same unoriented axis, twist
    # exponents of the same sign but different size
    for (x_pos, lead) in ((True, x), (False, -x)):
        if lead not in linear:
            continue
        a = linear[lead]
        loop = a.loop if x_pos else tuple(-y for y in reversed(a.loop))
        k = _match_power(path, pos + 1, loop)
        for kk in range(k, 0, -1):
            end = pos + 1 + kk * len(loop)
            if end >= n:
                continue
            y = path[end]
            trail = -y if x_pos else y
            if trail not in linear or trail == lead:
                continue
            b = linear[trail]
            signs = _signed_exponents(a, b)
            if signs is None:
                continue
            d_i, d_j = signs if x_pos else (signs[1], signs[0])
            if d_i * d_j > 0 and d_i != d_j:
                better(
                    SplittingUnit(
                        "exceptional",
                        tuple(path[pos : end + 1]),
                        edge_i=lead if x_pos else trail,
                        edge_j=trail if x_pos else lead,
                        axis=a.loop,
                        exponent=kk,
                        sign_pair=(d_i, d_j),
                    )
                )

    # indivisible Nielsen paths, either orientation; families match any
    # exponent of the axis between the edge and its inverse
    for rec in inps:
        if not rec.indivisible:
            continue
        if rec.is_family():
            e, w = rec.family_edge, tuple(rec.family_axis)
            for (lead, loop) in ((e, w), (-e, tuple(-y for y in reversed(w)))):
                if x != lead:
                    continue
                k = _match_power(path, pos + 1, loop)
                for kk in range(k, 0, -1):
                    end = pos + 1 + kk * len(loop)
                    if end < n and path[end] == -lead:
                        better(
                            SplittingUnit(
                                "inp",
                                tuple(path[pos : end + 1]),
                                record=rec,
                                exponent=kk,
                            )
                        )
                        break
        else:
            for p in (rec.path, tuple(-y for y in reversed(rec.path))):
                if tuple(path[pos : pos + len(p)]) == p and len(p) > 1:
                    better(SplittingUnit("inp", p, record=rec))

    if best is not None:
        return best

    # single edges by stratum kind
    s = strata.strata[where[abs(x)]]
    if s.kind == "neg_fixed":
        return SplittingUnit("fixed_edge", (x,), stratum=where[abs(x)])
    if s.kind == "zero":
        end = pos
        while end < n and strata.strata[where[abs(path[end])]].kind == "zero":
            end += 1
        return SplittingUnit(
            "connecting", tuple(path[pos:end]), stratum=where[abs(x)]
        )
    if abs(x) in linear:
        # carry the twist data so coarsening can work from units alone
        a = linear[abs(x)]
        return SplittingUnit(
            "single_edge",
            (x,),
            stratum=where[abs(x)],
            axis=a.loop,
            exponent=a.exponent,
        )
    return SplittingUnit("single_edge", (x,), stratum=where[abs(x)])


def _verify_split(
    f: GraphSelfMap, path: EdgePath, units: list[SplittingUnit], iterates: int
) -> bool:
    """A decomposition is a splitting when images concatenate tightly."""
    for k in range(1, iterates + 1):
        whole = f.map_path(path, k)
        parts: list[int] = []
        for u in units:
            parts.extend(f.map_path(u.path, k))
        if tighten(parts) != whole or tuple(parts) != whole:
            return False
    return True


def _first_cancelling_boundary(
    f: GraphSelfMap, units: list[SplittingUnit]
) -> int:
    """Start of the first unit whose image cancels into its predecessor."""
    pos = 0
    for a, b in zip(units, units[1:]):
        pos += len(a.path)
        ia, ib = f.map_path(a.path), f.map_path(b.path)
        if ia and ib and ia[-1] == -ib[0]:
            return pos
    return 0


def complete_split(
    f: GraphSelfMap,
    strata: Stratification,
    p: Sequence[int],
    caps: int = 3,
    verify_iterates: int = 3,
    _inps: Optional[list[NielsenPathRecord]] = None,
) -> list[SplittingUnit]:
    """Greedy maximal-unit decomposition of p, verified as a splitting.

    If the greedy decomposition fails verification the path is replaced
    by its image and the split retried, up to ``caps`` times; paths that
    still fail raise :class:`NotSplittable` with the first bad position.
    """
    inps = find_inps(f, strata=strata) if _inps is None else _inps
    linear = _linear_inventory(f, strata)
    path = tighten(p)
    last_pos = 0
    for _ in range(caps + 1):
        units: list[SplittingUnit] = []
        pos = 0
        while pos < len(path):
            u = _unit_at(f, strata, inps, linear, path, pos)
            if u is None or not u.path:  # pragma: no cover - defensive
                raise NotSplittable(pos, f"no unit at position {pos}")
            units.append(u)
            pos += len(u.path)
        assert tuple(x for u in units for x in u.path) == path
        if _verify_split(f, path, units, verify_iterates):
            return units
        last_pos = _first_cancelling_boundary(f, units)
        path = f.map_path(path)
    raise NotSplittable(
        last_pos,
        f"path {edge_text(tuple(p))} not completely split within {caps} iterates",
    )


def _is_linear_unit(u: SplittingUnit) -> bool:
    return (
        u.kind == "single_edge" and len(u.path) == 1 and u.axis is not None
    )


def qe_coarsen(units: list[SplittingUnit]) -> list[SplittingUnit]:
    """Merge runs E_i w^k E_j^-1 with opposite twist signs into one unit.

    Exceptional paths (twist exponents of the same sign) already arrive
    as single units and pass through unchanged, as does everything else.
    Linear-edge single-edge units carry their axis data, so the pattern
    is recognized from the unit list alone.
    """
    out: list[SplittingUnit] = []
    i = 0
    while i < len(units):
        merged = _qe_match(units, i)
        if merged is None:
            out.append(units[i])
            i += 1
        else:
            out.append(merged[0])
            i = merged[1]
    return out


def _loop_power(buf: Sequence[int], loop: EdgePath) -> Optional[int]:
    """Signed k with buf = r^|k|, r a rotation of loop^sign(k), else None."""
    m = len(loop)
    if m == 0 or len(buf) % m:
        return None
    k = len(buf) // m
    if k == 0:
        return None
    base = tuple(buf[:m])
    if tuple(buf) != base * k:
        return None
    if base in {loop[i:] + loop[:i] for i in range(m)}:
        return k
    rev = tuple(-x for x in reversed(loop))
    if base in {rev[i:] + rev[:i] for i in range(m)}:
        return -k
    return None


def _qe_match(
    units: list[SplittingUnit], i: int
) -> Optional[tuple[SplittingUnit, int]]:
    """QEP starting at unit i: [E_i] [w-units...] [E_j^-1], opposite twists.

    Both traversal directions of a quasi-exceptional path start with a
    positively oriented linear edge and end with a negatively oriented
    one, so only that shape needs scanning.
    """
    u = units[i]
    if not _is_linear_unit(u) or u.path[0] < 0:
        return None
    x = u.path[0]
    loop = u.axis
    buf: list[int] = []
    j = i + 1
    best: Optional[tuple[SplittingUnit, int]] = None
    while j < len(units):
        nxt = units[j]
        if _is_linear_unit(nxt) and buf:
            y = nxt.path[0]
            if abs(y) != x and y < 0:
                k = _loop_power(buf, loop)
                if k is not None:
                    signs = _signed_exponents(
                        _LinearEdge(x, -1, u.axis, u.exponent),
                        _LinearEdge(-y, -1, nxt.axis, nxt.exponent),
                    )
                    if signs is not None and signs[0] * signs[1] < 0:
                        best = (
                            SplittingUnit(
                                "qep",
                                (x,) + tuple(buf) + (y,),
                                edge_i=x,
                                edge_j=-y,
                                axis=loop,
                                exponent=k,
                                sign_pair=signs,
                            ),
                            j + 1,
                        )
        if nxt.kind in ("fixed_edge", "connecting") or (
            nxt.kind == "inp" and not _is_linear_unit(nxt)
        ):
            buf.extend(nxt.path)
            j += 1
            # overshoot is fine: only exact loop powers record a match
            if len(buf) > 64 * max(len(loop), 1):
                break
        else:
            break
    return best


# ---------------------------------------------------------------------------
# the interaction graph


@dataclass(frozen=True)
class InteractionGraph:
    """Directed graph of nonfixed irreducible strata.

    An edge i -> j is witnessed by a path in stratum i whose image's
    coarsened splitting contains a single-edge term in stratum j.
    """

    vertices: tuple[int, ...]  # stratum indices, bottom first
    edges: frozenset
    witnesses: dict
    components: tuple[frozenset, ...]
    main_component: int  # index into components, holds the top vertex
    iterate: int
    component_count_stable: bool
    status: tuple[str, ...] = ()

    def component_of(self, v: int) -> int:
        for i, c in enumerate(self.components):
            if v in c:
                return i
        raise KeyError(v)


def _interaction_edges(
    f: GraphSelfMap,
    strata: Stratification,
    vertices: tuple[int, ...],
    iterate: int,
    caps: int,
) -> tuple[set, dict, list[str]]:
    where = _stratum_of(strata)
    inps = find_inps(f, strata=strata)
    linear = _linear_inventory(f, strata)
    vset = set(vertices)
    kappas: list[tuple[int, EdgePath]] = [
        (i, (e,)) for i in vertices for e in strata.strata[i].edges
    ]
    for p in taken_connecting_paths(f, strata):
        # a connecting path is attached to the exponential stratum above it
        env = min(
            (
                i
                for i, s in enumerate(strata.strata)
                if s.kind == "eg" and i > max(where[abs(x)] for x in p)
            ),
            default=None,
        )
        if env is not None:
            kappas.append((env, p))
    edges: set = set()
    witnesses: dict = {}
    status: list[str] = []
    for i, kappa in kappas:
        try:
            units = complete_split(
                f,
                strata,
                f.map_path(kappa, iterate),
                _inps=inps,
            )
        except NotSplittable as exc:
            status.append(
                f"unsplit image of {edge_text(kappa)}: {exc}"
            )
            continue
        units = qe_coarsen(units)
        for u in units:
            if u.kind not in ("single_edge",):
                continue
            j = where[abs(u.path[0])]
            if j in vset and j != i:
                edges.add((i, j))
                witnesses.setdefault((i, j), (kappa, u))
    return edges, witnesses, status


def _undirected_components(
    vertices: tuple[int, ...], edges: set
) -> tuple[frozenset, ...]:
    parent = {v: v for v in vertices}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a, b in edges:
        parent[find(a)] = find(b)
    groups: dict[int, set[int]] = {}
    for v in vertices:
        groups.setdefault(find(v), set()).add(v)
    return tuple(
        frozenset(g) for g in sorted(groups.values(), key=lambda g: min(g))
    )


def build_B(
    f: GraphSelfMap,
    strata: Optional[Stratification] = None,
    iterate: int = 1,
    caps: int = 3,
) -> InteractionGraph:
    """Interaction graph over nonfixed irreducible strata.

    The component count is checked for stability against the doubled
    iterate; a discrepancy is recorded, not raised.
    """
    if strata is None:
        strata = compute_stratification(f)
    vertices = tuple(
        i
        for i, s in enumerate(strata.strata)
        if s.kind in ("neg_linear", "neg_nonlinear", "eg")
    )
    if not vertices:
        raise IncompleteSplitting("no nonfixed irreducible strata")
    edges, witnesses, status = _interaction_edges(
        f, strata, vertices, iterate, caps
    )
    comps = _undirected_components(vertices, edges)
    edges2, _, status2 = _interaction_edges(
        f, strata, vertices, 2 * iterate, caps
    )
    stable = len(comps) == len(_undirected_components(vertices, edges2))
    top = vertices[-1]
    main = next(i for i, c in enumerate(comps) if top in c)
    return InteractionGraph(
        vertices,
        frozenset(edges),
        witnesses,
        comps,
        main,
        iterate,
        stable,
        tuple(status + status2),
    )


def almost_invariant_subgraphs(
    B: InteractionGraph, strata: Stratification, f: Optional[GraphSelfMap] = None
) -> list[set[int]]:
    """Edge sets X_s, one per component of the interaction graph.

    Each X_s takes the edges of every stratum whose vertex lies in the
    component; exponential strata bring along the zero-stratum edges
    their iterated images cross.
    """
    taken_zero: dict[int, set[int]] = {}
    if f is not None:
        where = _stratum_of(strata)
        for p in taken_connecting_paths(f, strata):
            env = min(
                (
                    i
                    for i, s in enumerate(strata.strata)
                    if s.kind == "eg"
                    and i > max(where[abs(x)] for x in p)
                ),
                default=None,
            )
            if env is not None:
                taken_zero.setdefault(env, set()).update(abs(x) for x in p)
    out: list[set[int]] = []
    for comp in B.components:
        xs: set[int] = set()
        for i in comp:
            xs.update(strata.strata[i].edges)
            if strata.strata[i].kind == "eg":
                xs.update(taken_zero.get(i, ()))
        out.append(xs)
    return out


# ---------------------------------------------------------------------------
# the admissible lattice


@dataclass(frozen=True)
class AdmissibleLattice:
    """Integer exponent tuples compatible with the linear-edge twisting.

    Each constraint (r, s, t, d_i, d_j) encodes
    a_r (d_i - d_j) = a_s d_i - a_t d_j over the component coordinates.
    """

    components: int
    constraints: tuple
    basis: tuple
    rank: int
    witnesses: tuple = ()

    def satisfies(self, a: Sequence[int]) -> bool:
        return all(
            a[r] * (di - dj) == a[s] * di - a[t] * dj
            for (r, s, t, di, dj) in self.constraints
        )


def admissible_lattice(
    f: GraphSelfMap,
    B: InteractionGraph,
    strata: Optional[Stratification] = None,
    caps: int = 3,
) -> AdmissibleLattice:
    """Constraints harvested from QEP terms in coarsened image splittings."""
    if strata is None:
        strata = compute_stratification(f)
    where = _stratum_of(strata)
    inps = find_inps(f, strata=strata)
    linear = _linear_inventory(f, strata)
    k = len(B.components)
    constraints: list[tuple] = []
    witnesses: list = []
    kappas: list[tuple[int, EdgePath]] = [
        (i, (e,)) for i in B.vertices for e in strata.strata[i].edges
    ]
    for i, kappa in kappas:
        try:
            units = complete_split(
                f, strata, f.map_path(kappa, B.iterate), _inps=inps
            )
        except NotSplittable as exc:
            raise IncompleteSplitting(str(exc)) from exc
        for u in qe_coarsen(units):
            if u.kind != "qep":
                continue
            r = B.component_of(i)
            s = B.component_of(where[abs(u.edge_i)])
            t = B.component_of(where[abs(u.edge_j)])
            d_i, d_j = u.sign_pair
            row = tuple(constraint_row(k, r, s, t, d_i, d_j))
            if any(row):
                con = (r, s, t, d_i, d_j)
                if con not in constraints:
                    constraints.append(con)
                    witnesses.append((kappa, u))
    rows = [
        constraint_row(k, *con) for con in constraints
    ]
    basis = integer_kernel(rows) if rows else [
        [1 if i == j else 0 for j in range(k)] for i in range(k)
    ]
    return AdmissibleLattice(
        k,
        tuple(constraints),
        tuple(tuple(v) for v in basis),
        len(basis),
        tuple(witnesses),
    )


def constraint_row(k: int, r: int, s: int, t: int, d_i: int, d_j: int):
    """Coefficients of a_r (d_i - d_j) - a_s d_i + a_t d_j = 0."""
    row = [0] * k
    row[r] += d_i - d_j
    row[s] -= d_i
    row[t] += d_j
    return row


# ---------------------------------------------------------------------------
# synthesis and the rank


def synthesize_generator(
    f: GraphSelfMap,
    a: Sequence[int],
    B: Optional[InteractionGraph] = None,
    strata: Optional[Stratification] = None,
) -> GraphSelfMap:
    """The map applying f^{a_s} on the component piece X_s, identity off it.

    The result is audited as a homotopy equivalence by inverting the
    induced automorphism.
    """
    if strata is None:
        strata = compute_stratification(f)
    if B is None:
        B = build_B(f, strata)
    if len(a) != len(B.components):
        raise ValueError("one exponent per component required")
    if any(x < 0 for x in a):
        raise ValueError("exponents must be non-negative")
    xs = almost_invariant_subgraphs(B, strata, f)
    images: dict[int, EdgePath] = {}
    for e in f.graph.edges:
        power = next((a[s] for s, x in enumerate(xs) if e in x), 0)
        images[e] = f.map_path((e,), power) if power else (e,)
    g = GraphSelfMap(f.graph, images)
    g.induced_automorphism().invert()  # homotopy-equivalence audit
    return g


def disintegration_rank(
    f_or_phi, caps: int = 3
) -> tuple[Optional[int], tuple[str, ...]]:
    """Number of independent commuting coordinates, with cap diagnostics."""
    if isinstance(f_or_phi, FreeAutomorphism):
        f = GraphSelfMap.from_automorphism(f_or_phi)
    else:
        f = f_or_phi
    status: list[str] = []
    try:
        strata = compute_stratification(f)
        B = build_B(f, strata, caps=caps)
        status.extend(B.status)
        if not B.component_count_stable:
            status.append("component count changed under the doubled iterate")
        lattice = admissible_lattice(f, B, strata, caps=caps)
    except (IncompleteSplitting, NotSplittable) as exc:
        status.append(str(exc))
        return None, tuple(status)
    return lattice.rank, tuple(status)

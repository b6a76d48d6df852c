"""Metric fold-path machinery for exponentially growing self-maps.

From a stratified rose self-map with exponential top stratum this module
builds the eigenvector edge measure, collapses the measure-zero subgraph
to a metric graph with vertex groups, audits the induced top-stratum map,
computes the bounded-cancellation constant, and advances the rescaled
path of metric graphs T_i = lambda^{-i} T_0 . phi^i while tracking exact
translation lengths.  When the top Perron-Frobenius block is 2x2 all
arithmetic is exact over the quadratic field of the growth rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

from outclass.graph_map import (
    GraphSelfMap,
    Stratification,
    compute_stratification,
)
from outclass.numeric import Quadratic
from outclass.words import FreeAutomorphism, Word, cyclic_reduce


class FoldPathError(ValueError):
    pass


class NoExponentialStratum(FoldPathError):
    pass


class AuditFailed(FoldPathError):
    pass


class NumericUnderflow(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# the eigenvector measure


@dataclass(frozen=True)
class MuMeasure:
    """Edge measure: eigenvector entries on the top stratum, zero below."""

    values: dict  # edge -> Quadratic | Fraction | float
    top_edges: tuple[int, ...]
    growth: object  # same numeric type as the values
    mode: str  # "exact" | "float"

    def of_edge(self, e: int):
        return self.values.get(abs(e), 0)

    def of_path(self, path: Sequence[int]):
        total = 0
        for x in path:
            total = total + self.of_edge(x)
        return total


def _exact_eig2(p, q, r, s):
    """Exact dominant eigenvalue and positive eigenvector of [[p,q],[r,s]]."""
    disc = (p - s) ** 2 + 4 * q * r
    root = math.isqrt(disc)
    if root * root == disc:
        lam = Quadratic(Fraction(p + s + root, 2), 0, max(disc, 2))
    else:
        lam = Quadratic(Fraction(p + s, 2), Fraction(1, 2), disc)
    if q != 0:
        vec = (lam * 0 + q, lam - p)
    else:
        vec = (lam - s, lam * 0 + r)
    return lam, vec


def mu_metric(
    f: GraphSelfMap,
    strata: Optional[Stratification] = None,
    exact: bool = True,
) -> MuMeasure:
    """Eigenvector measure of the top stratum.

    The measure scales by the growth rate under the map: the mu-length of
    the image of any top edge is growth * mu(edge).  Lower-stratum edges
    get measure zero.
    """
    if strata is None:
        strata = compute_stratification(f)
    top = strata.strata[-1]
    if top.kind != "eg":
        raise NoExponentialStratum(
            "the highest stratum does not grow exponentially"
        )
    edges = tuple(sorted(top.edges))
    tm = f.transition_matrix().submatrix(edges)
    a = tm.matrix
    if exact and len(edges) == 2:
        # measure vector is the dominant eigenvector of the transpose
        p, q, r, s = (
            int(a[0, 0]),
            int(a[1, 0]),
            int(a[0, 1]),
            int(a[1, 1]),
        )
        lam, (m1, m2) = _exact_eig2(p, q, r, s)
        values = {edges[0]: m1, edges[1]: m2}
        return MuMeasure(values, edges, lam, "exact")
    from outclass.graph_map import pf_eigen

    lam_t, vec = pf_eigen(a.T.astype(float))
    values = {e: float(v) for e, v in zip(edges, vec)}
    return MuMeasure(values, edges, float(lam_t), "float")


# ---------------------------------------------------------------------------
# the collapsed metric graph


@dataclass(frozen=True)
class MetricMarkedGraph:
    """Rose with measured top edges; collapsed content as vertex groups.

    ``lengths`` maps surviving generator indices to their measure;
    generators of measure zero were collapsed into the vertex, whose
    fundamental group(s) are recorded as generator words.
    """

    rank: int
    lengths: dict  # generator index -> numeric length
    vertex_groups: tuple[tuple[Word, ...], ...]
    mode: str

    def is_elliptic(self, g: Word) -> bool:
        core, _ = cyclic_reduce(g)
        return all(abs(x) not in self.lengths for x in core.letters)


def collapse_T0(
    f: GraphSelfMap, mu: MuMeasure
) -> tuple[MetricMarkedGraph, dict]:
    """Collapse the measure-zero subgraph of a rose self-map.

    Returns the metric graph and a record of what was collapsed.  Only
    rose-based maps (one vertex, edge i marked by generator i) are
    supported; these are what ``GraphSelfMap.from_automorphism`` builds.
    """
    verts = {v for uv in f.graph.edges.values() for v in uv}
    if len(verts) != 1:
        raise FoldPathError("collapse requires a rose-based representative")
    n = f.graph.graph_rank()
    lower = [e for e in sorted(f.graph.edges) if e not in mu.top_edges]
    lengths = {e: mu.values[e] for e in mu.top_edges}
    groups: tuple[tuple[Word, ...], ...]
    if lower:
        groups = (tuple(f.graph.marking[e] for e in lower),)
    else:
        groups = ()
    record = {"collapsed_edges": tuple(lower), "components": len(groups)}
    return MetricMarkedGraph(n, lengths, groups, mu.mode), record


def translation_length(t: MetricMarkedGraph, g: Word):
    """Measure of the axis of g: sum of lengths over the cyclic reduction.

    Collapsed (vertex-group) letters are elliptic and contribute zero, so
    the value is zero exactly when g is conjugate into a vertex group.
    """
    core, _ = cyclic_reduce(g)
    total = 0
    for x in core.letters:
        total = total + t.lengths.get(abs(x), 0)
    return total


# ---------------------------------------------------------------------------
# the induced top-stratum map and its audit


def induced_f0(
    f: GraphSelfMap, t0: MetricMarkedGraph, mu: MuMeasure
) -> tuple[dict, dict]:
    """Images of the surviving edges after collapse, with an exactness audit.

    The audit checks that the induced map stretches each edge by exactly
    the growth rate in the measure, and that its transition matrix equals
    the top-stratum block of the original.
    """
    images = {}
    for e in mu.top_edges:
        img = [x for x in f.image_of(e) if abs(x) in t0.lengths]
        # tighten after deleting collapsed letters
        out: list[int] = []
        for x in img:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        images[e] = tuple(out)
    audit = {"scaling": True, "transition": True}
    for e in mu.top_edges:
        if mu.of_path(images[e]) != mu.growth * mu.of_edge(e):
            if mu.mode == "exact" or abs(
                float(mu.of_path(images[e]))
                - float(mu.growth) * float(mu.of_edge(e))
            ) > 1e-9 * float(mu.growth):
                raise AuditFailed(
                    f"edge {e}: image measure is not growth * measure"
                )
    counts = {
        (a, b): sum(1 for x in images[b] if abs(x) == a)
        for a in mu.top_edges
        for b in mu.top_edges
    }
    tm = f.transition_matrix().submatrix(mu.top_edges)
    for i, a in enumerate(mu.top_edges):
        for j, b in enumerate(mu.top_edges):
            if counts[(a, b)] != int(tm.matrix[i, j]):
                raise AuditFailed("transition matrix changed under collapse")
    return images, audit


def bbt(images: dict, mu: MuMeasure, cap: int = 128):
    """Bounded-cancellation constant of the induced map.

    For each turn (pair of distinct directions) the maximal measure of a
    common initial segment of image paths over all immersed continuations
    is computed by synchronized traversal; a repeating state means the
    agreement never ends and is reported as an error.
    """
    dirs = [d for e in images for d in (e, -e)]

    def image_of_dir(d):
        return images[d] if d > 0 else tuple(-x for x in reversed(images[-d]))

    def extensions(d):
        # immersed continuations of a path ending with direction d
        return [e for e in dirs if e != -d]

    def common(d1, d2):
        # maximal matched measure from a synchronized state; memoized DFS
        # with an on-stack count of matched edges so that any cycle that
        # matches a letter (unbounded agreement) is detected
        memo: dict = {}
        on_stack: dict = {}

        def extra(e1, o1, e2, o2, matched):
            key = (e1, o1, e2, o2)
            if key in memo:
                return memo[key]
            if key in on_stack:
                if matched > on_stack[key]:
                    raise FoldPathError(
                        "unbounded cancellation at turn "
                        f"({d1},{d2}): agreement never ends"
                    )
                return 0
            if matched > cap:
                raise FoldPathError("cancellation search cap exceeded")
            on_stack[key] = matched
            p1, p2 = image_of_dir(e1), image_of_dir(e2)
            if o1 == len(p1):
                val = max(
                    (extra(nxt, 0, e2, o2, matched) for nxt in extensions(e1)),
                    default=0,
                )
            elif o2 == len(p2):
                val = max(
                    (extra(e1, o1, nxt, 0, matched) for nxt in extensions(e2)),
                    default=0,
                )
            elif p1[o1] == p2[o2]:
                val = mu.of_edge(p1[o1]) + extra(
                    e1, o1 + 1, e2, o2 + 1, matched + 1
                )
            else:
                val = 0
            del on_stack[key]
            memo[key] = val
            return val

        return extra(d1, 0, d2, 0, 0)

    best = 0
    for i, d1 in enumerate(dirs):
        for d2 in dirs[i + 1 :]:
            p1, p2 = image_of_dir(d1), image_of_dir(d2)
            if not p1 or not p2 or p1[0] != p2[0]:
                continue  # no cancellation at this turn
            c = common(d1, d2)
            if c > best:
                best = c
    return best


# ---------------------------------------------------------------------------
# the rescaled path of metric graphs


@dataclass(frozen=True)
class FoldPathState:
    """The graph T_i = growth^{-i} T_0 . phi^i with exact bookkeeping."""

    index: int
    t0: MetricMarkedGraph
    phi: FreeAutomorphism
    phi_i: FreeAutomorphism  # phi^index
    growth: object
    scale: object  # growth^{-index}
    time: object  # cumulative fold-path time L_index
    cancellation: object  # bounded-cancellation constant of the induced map
    test_words: tuple[Word, ...]
    snapshot: tuple  # (word text, length) pairs, stable order
    mode: str

    def length(self, g: Word):
        """Translation length of g in T_index."""
        return self.scale * translation_length(self.t0, self.phi_i.apply(g))

    def time_bound(self):
        """Upper bound for the total time: L_0 + c/2 * growth/(growth-1)."""
        lam = self.growth
        return (lam * self.cancellation) / ((lam - 1) * 2)


def fold_path_start(
    phi: FreeAutomorphism,
    test_words: Sequence[Word] = (),
    exact: bool = True,
) -> FoldPathState:
    f = GraphSelfMap.from_automorphism(phi)
    strata = compute_stratification(f)
    mu = mu_metric(f, strata, exact=exact)
    t0, _ = collapse_T0(f, mu)
    images, _ = induced_f0(f, t0, mu)
    c = bbt(images, mu)
    one = mu.growth / mu.growth  # exact 1 in the working arithmetic
    words = tuple(test_words)
    snap = tuple((str(g), translation_length(t0, g)) for g in words)
    return FoldPathState(
        0,
        t0,
        phi,
        FreeAutomorphism.identity(phi.rank),
        mu.growth,
        one,
        one - one,
        c,
        words,
        snap,
        mu.mode,
    )


def fold_path_advance(state: FoldPathState) -> FoldPathState:
    """One step along the path: rescale by growth^{-1}, twist by phi."""
    new_scale = state.scale / state.growth
    if state.mode == "float" and float(new_scale) < 1e-12:
        raise NumericUnderflow(f"scale underflow at step {state.index + 1}")
    phi_next = state.phi_i.compose(state.phi)
    new_time = state.time + state.scale * state.cancellation / 2
    snap = tuple(
        (
            str(g),
            new_scale * translation_length(state.t0, phi_next.apply(g)),
        )
        for g in state.test_words
    )
    return replace(
        state,
        index=state.index + 1,
        phi_i=phi_next,
        scale=new_scale,
        time=new_time,
        snapshot=snap,
    )


# ---------------------------------------------------------------------------
# limit diagnostics


def _illegal_turn_pairs(f: GraphSelfMap) -> set:
    """Unordered direction pairs whose derivative images eventually collide."""
    dirs = [d for e in f.graph.edges for d in (e, -e)]

    def deriv(d):
        img = f.image_of(d) if d > 0 else tuple(-x for x in reversed(f.image_of(-d)))
        return img[0]

    bad = set()
    bound = (2 * len(dirs)) ** 2
    for i, d1 in enumerate(dirs):
        for d2 in dirs[i + 1 :]:
            a, b = d1, d2
            for _ in range(bound):
                if a == b:
                    bad.add(frozenset((d1, d2)))
                    break
                a, b = deriv(a), deriv(b)
    return bad


def _path_legal(letters: Sequence[int], illegal: set) -> bool:
    return all(
        frozenset((-letters[i], letters[i + 1])) not in illegal
        for i in range(len(letters) - 1)
    )


def _cyclic_word_legal(letters: Sequence[int], illegal: set) -> bool:
    m = len(letters)
    return m > 0 and all(
        frozenset((-letters[i], letters[(i + 1) % m])) not in illegal
        for i in range(m)
    )


def limit_diagnostics(
    phi: FreeAutomorphism,
    test_words: Sequence[Word],
    i_max: int = 25,
    decay_steps: int = 15,
    tol: float = 1e-6,
    length_cap: int = 500_000,
) -> dict:
    """Numeric convergence/decay table for the rescaled length functions.

    For each word: the sequence growth^{-i} * length_0(phi^i(g)), a Cauchy
    estimate over the last steps, and a repelling-side decay check using
    the inverse automorphism.  Once an iterate becomes a legal cyclic path
    its measure scales by exactly the growth rate each step, so the
    normalized sequence is constant from that index on and is filled in
    without materializing the (exponentially long) later iterates.
    """
    state = fold_path_start(phi, test_words, exact=False)
    lam = float(state.growth)
    f = GraphSelfMap.from_automorphism(phi)
    illegal = _illegal_turn_pairs(f)
    # stabilization is only valid when the map's own edge images are legal
    images_legal = all(
        _path_legal(f.image_of(e), illegal) for e in f.graph.edges
    )
    def forward_sequence(g: Word) -> tuple[list[float], int | None]:
        """Rescaled lengths growth^{-i} * length_0(phi^i g), filled to i_max.

        Once the iterate is a legal cyclic path (and the map's edge images
        are legal) the measure scales by exactly the growth per step, so
        the remaining entries equal the current one.
        """
        core, _ = cyclic_reduce(g)
        letters = core.letters
        seq: list[float] = []
        i = 0
        while i <= i_max:
            val = float(translation_length(state.t0, Word(letters))) / lam**i
            seq.append(val)
            if val == 0.0 or (
                images_legal and _cyclic_word_legal(letters, illegal)
            ):
                seq.extend([val] * (i_max - i))
                return seq, None
            if len(letters) > length_cap:
                return seq, i
            nxt, _ = cyclic_reduce(phi.apply(Word(letters)))
            letters = nxt.letters
            i += 1
        return seq, None

    table: dict[str, list[float]] = {}
    truncations: dict[str, int] = {}
    for g in test_words:
        seq, trunc = forward_sequence(g)
        table[str(g)] = seq
        if trunc is not None:
            truncations[str(g)] = trunc
    report = {"growth": lam, "mode": "float", "words": {}}
    psi = None
    try:
        psi = phi.invert()
    except Exception:
        report["inverse"] = "unavailable"
    for g in test_words:
        seq = table[str(g)]
        cauchy = (
            max(abs(seq[i] - seq[i - 1]) for i in range(len(seq) - 3, len(seq)))
            if len(seq) >= 4
            else float("nan")
        )
        entry = {
            "sequence": seq,
            "cauchy_estimate": cauchy,
            "converged": cauchy < tol * max(seq[-1], 1e-30)
            if seq and not math.isnan(cauchy)
            else False,
        }
        if str(g) in truncations:
            entry["forward_truncated_at"] = truncations[str(g)]
        if psi is not None:
            # the limit length of psi^m(g) must decay like growth^-m:
            # pulling back along the map contracts the attracting side
            w = g
            decay = []
            truncated = None
            for m in range(decay_steps + 1):
                fwd, trunc = forward_sequence(w)
                decay.append(fwd[-1])
                if trunc is not None or len(w) > length_cap:
                    truncated = m
                    break
                w = psi.apply(w)
            entry["repelling_decay"] = decay
            if truncated is not None:
                entry["repelling_decay_truncated_at"] = truncated
            peak = max(decay) if decay else 0.0
            entry["repelling_decay_confirmed"] = bool(
                peak == 0.0 or decay[-1] < 1e-2 * peak
            )
        report["words"][str(g)] = entry
    return report

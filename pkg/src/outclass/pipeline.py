"""End-to-end classification of outer automorphisms over cyclic splittings.

The pipeline stratifies a representative, gathers lamination-filling
evidence, searches for conjugacy classes fixed up to a power, grows
candidate one-edge cyclic splittings from them, and reports one of four
verdicts.  "Proven" verdicts carry exact certificates re-checked by an
independent pass; "Candidate" and "Evidence" verdicts are bounded by the
search caps and say so — the underlying properties are semi-decidable,
so a negative finding at caps is never a proof of absence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from outclass.disintegration import disintegration_rank
from outclass.graph_map import (
    GraphSelfMap,
    Stratification,
    compute_stratification,
    edge_text,
)
from outclass.lamination import (
    FillingReport,
    closed_top_inp,
    filling_report,
    fixed_class_search,
)
from outclass.splitting import (
    OneEdgeSplitting,
    SplittingError,
    apply_aut,
    dehn_twist,
    elliptic_seed_splittings,
    equivalent,
    invariant_splitting_search,
    to_split_text,
)
from outclass.words import CyclicWord, FreeAutomorphism, Word

SCHEMA_VERSION = 1


class NotARepresentative(ValueError):
    """The supplied self-map does not induce an automorphism."""


@dataclass(frozen=True)
class Caps:
    """Search bounds for every cap-limited pipeline stage."""

    length_cap: int = 12  # fixed-class word length
    power_cap: int = 2  # fixed-class power
    leaf_iterates: int = 10
    whitehead_depth: int = 12
    slide_cap: int = 10_000
    invariant_power_cap: int = 4
    seed_attempts: int = 200

    def as_dict(self) -> dict:
        return {
            "length_cap": self.length_cap,
            "power_cap": self.power_cap,
            "leaf_iterates": self.leaf_iterates,
            "whitehead_depth": self.whitehead_depth,
            "slide_cap": self.slide_cap,
            "invariant_power_cap": self.invariant_power_cap,
            "seed_attempts": self.seed_attempts,
        }


@dataclass(frozen=True)
class ClassificationReport:
    schema_version: int
    images: tuple[str, ...]
    rank: int
    strata_summary: tuple[str, ...]
    filling: FillingReport
    fixed_classes: tuple
    invariant_splitting: Optional[tuple[int, OneEdgeSplitting]]
    closed_inp_signature: Optional[str]
    disintegration: tuple
    verdict: str
    verdict_power: Optional[int] = None
    caps: dict = field(default_factory=dict)

    def certificate(self) -> Optional[str]:
        if self.invariant_splitting is None:
            return None
        k, s = self.invariant_splitting
        return f"power: {k}\n{to_split_text(s)}"


def _invariant_splitting_candidates(
    phi: FreeAutomorphism,
    fixed: tuple,
    caps: Caps,
):
    """Splittings grown from fixed classes that phi^k carries back.

    Shorter fixed classes seed first; the total number of seed trials is
    capped.  Every yielded hit has been re-verified.
    """
    attempts = 0
    for _, c in sorted(fixed, key=lambda kc: (len(kc[1].letters), kc[0])):
        for seed in elliptic_seed_splittings(phi.rank, c):
            if attempts >= caps.seed_attempts:
                return
            attempts += 1
            hit = invariant_splitting_search(
                phi, seed, power_cap=caps.invariant_power_cap
            )
            if hit is None:
                continue
            k, s = hit
            if verify_invariant(phi, k, s):
                yield k, s


def _verified_invariant_splitting(
    phi: FreeAutomorphism,
    fixed: tuple,
    caps: Caps,
) -> Optional[tuple[int, OneEdgeSplitting]]:
    return next(_invariant_splitting_candidates(phi, fixed, caps), None)


def verify_invariant(
    phi: FreeAutomorphism, k: int, s: OneEdgeSplitting
) -> bool:
    """Independent re-check that phi^k maps the splitting to itself."""
    cur = s
    for _ in range(k):
        cur = apply_aut(cur, phi)
    return equivalent(cur, s)


def _closed_inp_signature(f: GraphSelfMap, strata) -> Optional[str]:
    """A multi-edge indivisible Nielsen loop meeting the top EG stratum.

    Such a loop means the top attracting lamination has a closed
    leaf-like circuit, which blocks the loxodromic verdict.  Nielsen
    loops confined to lower strata do not constrain the top lamination
    and are ignored.
    """
    rec = closed_top_inp(f, strata)
    return rec.describe() if rec is not None else None


def classify(
    target: Union[FreeAutomorphism, GraphSelfMap], caps: Caps = Caps()
) -> ClassificationReport:
    """Full pipeline: stratify, gather evidence, and pick a verdict.

    EllipticProven carries an exact certificate (a one-edge cyclic
    splitting with a verified power).  LoxodromicCandidate needs filling
    evidence, no invariant splitting found from any fixed-class seed, and
    no closed Nielsen loop.  A lamination visibly carried by a proper
    free factor, or a closed Nielsen loop, downgrades to
    BoundedOrbitEvidence; anything else is Inconclusive.
    """
    if isinstance(target, GraphSelfMap):
        f = target
        try:
            phi = f.induced_automorphism()
            phi.invert()
        except Exception as exc:
            raise NotARepresentative(str(exc)) from exc
    else:
        phi = target
        f = GraphSelfMap.from_automorphism(phi)
    if phi.rank < 3:
        raise ValueError("classification requires rank at least 3")
    strata = compute_stratification(f)
    summary = tuple(
        f"{s.kind}:{edge_text(s.edges)}" for s in strata.strata
    )
    fixed = tuple(
        fixed_class_search(phi, caps.length_cap, caps.power_cap)
    )
    invariant = _verified_invariant_splitting(phi, fixed, caps)
    filling = filling_report(
        f,
        phi,
        leaf_iterates=caps.leaf_iterates,
        length_cap=caps.length_cap,
        power_cap=caps.power_cap,
        fixed=fixed,
    )
    signature = _closed_inp_signature(f, strata)
    dis = disintegration_rank(f)
    if invariant is not None:
        verdict, power = "EllipticProven", invariant[0]
    elif filling.verdict == "FillingEvidence" and signature is None:
        verdict, power = "LoxodromicCandidate", None
    elif filling.verdict == "NotFilling" or signature is not None:
        verdict, power = "BoundedOrbitEvidence", None
    else:
        verdict, power = "Inconclusive", None
    return ClassificationReport(
        SCHEMA_VERSION,
        tuple(str(Word(img)) for img in phi.images),
        phi.rank,
        summary,
        filling,
        fixed,
        invariant,
        signature,
        dis,
        verdict,
        power,
        caps.as_dict(),
    )


# ---------------------------------------------------------------------------
# centralizer probe


@dataclass(frozen=True)
class CentralizerReport:
    schema_version: int
    rank: int
    disintegration: tuple
    trivial: bool  # an inner automorphism: everything commutes
    twist: Optional[FreeAutomorphism]
    twist_splitting: Optional[OneEdgeSplitting]
    commutator_conjugator: Optional[Word]
    caps: dict

    @property
    def commuting_twist_found(self) -> bool:
        return self.twist is not None


def centralizer_probe(
    phi: FreeAutomorphism, caps: Caps = Caps()
) -> CentralizerReport:
    """Disintegration rank plus an explicit commuting twist when one exists.

    A rank-1 disintegration with no commuting twist is consistent with a
    small centralizer; nothing stronger is claimed.  When phi fixes a
    one-edge cyclic splitting, the twist about it commutes with phi up to
    inner automorphisms and the conjugator is returned as a certificate.
    """
    trivial = phi.is_inner() is not None
    dis = disintegration_rank(phi)
    fixed = tuple(fixed_class_search(phi, caps.length_cap, caps.power_cap))
    twist = splitting = conj = None
    for k, s in _invariant_splitting_candidates(phi, fixed, caps):
        if k != 1:
            continue
        try:
            cand = dehn_twist(s)
        except SplittingError:
            continue  # e.g. a non-reduced splitting with a trivial twist
        comm = (
            phi.compose(cand)
            .compose(phi.invert())
            .compose(cand.invert())
        )
        w = comm.is_inner()
        if w is not None:
            twist, splitting, conj = cand, s, w
            break
    return CentralizerReport(
        SCHEMA_VERSION,
        phi.rank,
        dis,
        trivial,
        twist,
        splitting,
        conj,
        caps.as_dict(),
    )

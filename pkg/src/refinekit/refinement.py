"""Refinement certificates: translate a theory's sentences, decide each
image in the target theory, and assemble the verdicts into an auditable
whole.  One-sided evidence is labeled as such — a certificate is only as
strong as its assumption list."""

from __future__ import annotations

import itertools
import time
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

from .deduction import (
    Budget,
    Presentation,
    Proved,
    Refuted,
    Unknown,
    Verdict,
    derive,
    free_equational_presentation,
    horn_presentation,
)
from .errors import (
    BudgetError,
    ChainMismatchError,
    CommutationUnverifiedWarning,
    InterfaceMismatchError,
    InternalSoundnessError,
    NotHornError,
    NotProvedError,
)
from .models import (
    FiniteKStructure,
    countermodel_search,
    is_model_of,
    semantic_consequence,
)
from .sigterm import (
    App,
    KFormula,
    Sequent,
    Variable,
    canonicalize,
    formula_key,
    sequent_key,
    term_key,
)
from .translation import (
    Composed,
    MorphismInduced,
    Schematic,
    Translation,
    check_substitution_commutation,
    inclusion_morphism,
    translation_from_morphism,
)

__all__ = [
    "decide",
    "Obligation",
    "RefinementCertificate",
    "check_refinement_by_interpretation",
    "tau_image_presentation",
    "check_sigma_refinement",
    "check_logical_refinement",
    "vertical_compose",
    "ReflectionCounterexample",
    "search_reflection_counterexample",
    "InterpretationReport",
    "check_interpretation",
]


# ---------------------------------------------------------------------------
# deciding a single consequence


def decide(
    presentation: Presentation,
    premises: Iterable[KFormula],
    goal: KFormula,
    proof_budget: Optional[Budget] = None,
    model_size_map: Optional[Mapping[str, int]] = None,
    *,
    filter_mode: str = "identity",
    candidates: Iterable[FiniteKStructure] = (),
    max_structures: int = 1_000_000,
) -> Verdict:
    """Try to settle ``premises |- goal`` both ways: proof search first,
    countermodel search second, each phase getting half the time cap.

    Returns ``Proved`` with a replayable proof, ``Refuted`` with a finite
    witness structure (re-verified before it is returned), or ``Unknown``
    with the saturation report plus a note on how the countermodel phase
    ended.  ``model_size_map=None`` with no candidates skips the second
    phase entirely.
    """
    if proof_budget is None:
        proof_budget = Budget()
    premises = tuple(premises)
    half = max(1, proof_budget.time_cap_ms // 2)
    verdict = derive(presentation, premises, goal, replace(proof_budget, time_cap_ms=half))
    candidates = tuple(candidates)

    def refuting(structure: FiniteKStructure) -> bool:
        return (
            structure.signature == presentation.signature
            and structure.k == presentation.k
            and bool(is_model_of(structure, presentation))
            and not semantic_consequence(structure, premises, goal)
        )

    if isinstance(verdict, Proved):
        # Soundness tripwire: a supplied structure that models the theory
        # yet falsifies a derived consequence means the engine is broken.
        for candidate in candidates:
            if refuting(candidate):
                raise InternalSoundnessError(
                    f"derived {goal!r} although {candidate.name or 'a candidate'} "
                    "is a model of the presentation and falsifies it"
                )
        return verdict

    note = "skipped"
    if model_size_map is not None or candidates:
        sweep = (
            dict(model_size_map)
            if model_size_map is not None
            else {sort: 1 for sort in presentation.signature.sorts}
        )
        try:
            witness = countermodel_search(
                presentation,
                premises,
                goal,
                sweep,
                filter_mode,
                candidates,
                max_structures,
                time_cap_ms=half,
            )
        except BudgetError as exc:
            witness = None
            note = f"not attempted: {exc}"
        else:
            if witness is not None:
                if not refuting(witness):
                    raise InternalSoundnessError(
                        "countermodel search returned a structure that fails "
                        "independent re-verification"
                    )
                return Refuted(witness)
            note = "exhausted within budget, none found"
    report = dict(verdict.report)
    report["countermodel"] = note
    return Unknown(report)


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class Obligation:
    """One translated sentence together with its verdict in the target."""

    source_kind: str  # "axiom" or "rule"
    source_name: str
    sequent: Sequent
    verdict: Verdict
    millis: float = 0.0

    @property
    def status(self) -> str:
        return self.verdict.kind


@dataclass(frozen=True)
class RefinementCertificate:
    """The full outcome of one refinement check.

    ``overall`` is ``"proved"`` exactly when every obligation was proved
    and no hypothesis of the underlying reduction theorem was found
    violated; ``"failed"`` requires at least one refuted obligation,
    whose witness was independently re-verified before being accepted.
    """

    source: str
    target: str
    translation: str
    obligations: tuple[Obligation, ...]
    assumptions: tuple[str, ...]
    overall: str  # "proved" | "failed" | "unknown"

    def as_dict(self) -> dict:
        """A JSON-ready summary (structures and proofs elided)."""
        return {
            "source": self.source,
            "target": self.target,
            "translation": self.translation,
            "overall": self.overall,
            "assumptions": list(self.assumptions),
            "obligations": [
                {
                    "source": f"{o.source_kind} {o.source_name}",
                    "verdict": o.status,
                }
                for o in self.obligations
            ],
        }


def _label(presentation: Presentation, fallback: str) -> str:
    return presentation.name or fallback


def _describe(translation: Translation) -> str:
    return translation.name or type(translation).__name__


def _formula_order(formula: KFormula):
    return (formula_key(canonicalize(formula)), formula_key(formula))


def _overall(obligations: Sequence[Obligation], capped: bool) -> str:
    kinds = {o.status for o in obligations}
    if capped:
        return "unknown"
    if "refuted" in kinds:
        return "failed"
    if kinds <= {"proved"}:
        return "proved"
    return "unknown"


# ---------------------------------------------------------------------------
# substitution commutation triage

#: How confident we are that a translation commutes with substitutions:
#: "structural" holds by construction, "verified" passed a random probe,
#: "failed" flunked one, and "unverified" could not be probed at all
#: (the source and target signatures differ).
_STRUCTURAL = "structural"


def _is_structural(translation: Translation) -> bool:
    if isinstance(translation, MorphismInduced):
        return True
    if isinstance(translation, Schematic) and translation.component_morphism is None:
        # Templates contain nothing but placeholders, so substituting into
        # the components and substituting into the image coincide exactly.
        return True
    if isinstance(translation, Composed):
        return _is_structural(translation.inner) and _is_structural(translation.outer)
    return False


def _commutation_status(
    translation: Translation, samples: int, seed: int
) -> tuple[str, Optional[object]]:
    if _is_structural(translation):
        return _STRUCTURAL, None
    if translation.source != translation.target:
        return "unverified", None
    report = check_substitution_commutation(translation, samples=samples, seed=seed)
    return ("verified" if report.commutes else "failed"), report


# ---------------------------------------------------------------------------
# refinement by interpretation


def check_refinement_by_interpretation(
    sp: Presentation,
    sp_prime: Presentation,
    translation: Translation,
    proof_budget: Optional[Budget] = None,
    model_size_map: Optional[Mapping[str, int]] = None,
    *,
    filter_mode: str = "identity",
    candidates: Iterable[FiniteKStructure] = (),
    max_structures: int = 1_000_000,
    commutation_samples: int = 60,
    seed: int = 0,
) -> RefinementCertificate:
    """Check that every proper sentence of ``sp`` translates to theorems
    of ``sp_prime``; that is the finite proof obligation the reduction
    theorem extracts from "all of the source theory is carried over".

    Obligations are ordered by the source sentence's position and then by
    the canonical form of the translated member.  When the translation is
    a self-translation and a random probe shows it does *not* commute
    with substitutions, the reduction theorem's hypothesis is violated:
    a warning is emitted and the overall verdict is capped at unknown.
    """
    if translation.source != sp.signature or translation.k != sp.k:
        raise InterfaceMismatchError(
            "the translation's source interface does not match the source theory"
        )
    if translation.target != sp_prime.signature or translation.l != sp_prime.k:
        raise InterfaceMismatchError(
            "the translation's target interface does not match the target theory"
        )

    status, probe = _commutation_status(translation, commutation_samples, seed)
    tdesc = _describe(translation)
    capped = status == "failed"
    if capped:
        warnings.warn(
            f"translation {tdesc!r} failed a substitution-commutation probe "
            f"(counterexample: {probe.counterexample!r}); the obligation "
            "reduction is unsound for it, so the certificate cannot conclude",
            CommutationUnverifiedWarning,
            stacklevel=2,
        )

    obligations = []
    for axiom in sp.proper_axioms:
        for image in sorted(translation.translate_formula(axiom.formula), key=_formula_order):
            started = time.perf_counter()
            verdict = decide(
                sp_prime,
                (),
                image,
                proof_budget,
                model_size_map,
                filter_mode=filter_mode,
                candidates=candidates,
                max_structures=max_structures,
            )
            elapsed = (time.perf_counter() - started) * 1000.0
            obligations.append(
                Obligation("axiom", axiom.name, Sequent((), image), verdict, elapsed)
            )
    for rule in sp.proper_rules:
        for image in sorted(translation.translate_sequent(rule.sequent), key=sequent_key):
            started = time.perf_counter()
            verdict = decide(
                sp_prime,
                image.premises,
                image.conclusion,
                proof_budget,
                model_size_map,
                filter_mode=filter_mode,
                candidates=candidates,
                max_structures=max_structures,
            )
            elapsed = (time.perf_counter() - started) * 1000.0
            obligations.append(Obligation("rule", rule.name, image, verdict, elapsed))

    source = _label(sp, "source")
    target = _label(sp_prime, "target")
    assumptions = [f"{tdesc!r} interprets {source!r} (hypothesis, not discharged)"]
    if status == "verified":
        assumptions.append(
            f"substitution commutation of {tdesc!r} spot-checked on "
            f"{commutation_samples} random substitutions only"
        )
    elif status == "unverified":
        assumptions.append(
            f"substitution commutation of {tdesc!r} not probed "
            "(source and target signatures differ); assumed"
        )
    elif status == "failed":
        assumptions.append(
            f"substitution commutation of {tdesc!r} FAILED a probe; "
            "verdict capped at unknown"
        )
    if any(a.base for a in sp.axioms) or any(r.base for r in sp.rules):
        assumptions.append(
            f"images of the base equational machinery of {source!r} "
            f"assumed derivable in {target!r}"
        )

    return RefinementCertificate(
        source=source,
        target=target,
        translation=tdesc,
        obligations=tuple(obligations),
        assumptions=tuple(assumptions),
        overall=_overall(obligations, capped),
    )


# ---------------------------------------------------------------------------
# the image theory


def _require_horn(p: Presentation) -> None:
    if p.k != 2:
        raise NotHornError(f"need a 2-dimensional equational theory, got k={p.k}")
    free = free_equational_presentation(p.signature)
    base_axioms = {(a.name, formula_key(a.formula)) for a in p.axioms if a.base}
    base_rules = {(r.name, sequent_key(r.sequent)) for r in p.rules if r.base}
    want_axioms = {(a.name, formula_key(a.formula)) for a in free.axioms}
    want_rules = {(r.name, sequent_key(r.sequent)) for r in free.rules}
    if base_axioms != want_axioms or base_rules != want_rules:
        raise NotHornError(
            "the presentation does not carry the free equational base "
            "for its signature"
        )


def tau_image_presentation(
    sp: Presentation,
    translation: Translation,
    name: str = "",
    *,
    commutation_report=None,
) -> Presentation:
    """The target-side theory presented by the translated sentences of
    ``sp``: every image of a proper equation becomes an equation, every
    image of a proper conditional equation a conditional equation, on top
    of the free equational base over the target signature.

    The construction is only meaningful when the translation commutes
    with substitutions; if that has neither been established structurally
    nor confirmed by a passed-in check report, a
    :class:`CommutationUnverifiedWarning` is emitted.
    """
    _require_horn(sp)
    if translation.source != sp.signature or translation.k != sp.k:
        raise InterfaceMismatchError(
            "the translation's source interface does not match the theory"
        )
    if translation.l != 2:
        raise NotHornError(
            f"images are {translation.l}-dimensional; equations need 2"
        )
    tdesc = _describe(translation)
    if commutation_report is not None and not commutation_report.commutes:
        raise ValueError(
            f"translation {tdesc!r} is known not to commute with "
            "substitutions; its image is not a well-defined theory"
        )
    if commutation_report is None and not _is_structural(translation):
        warnings.warn(
            f"substitution commutation of {tdesc!r} has not been checked; "
            "the image theory is built on that unverified hypothesis",
            CommutationUnverifiedWarning,
            stacklevel=2,
        )

    def named(base_name: str, images: list) -> Iterable[tuple[str, object]]:
        if len(images) == 1:
            yield base_name, images[0]
        else:
            for i, image in enumerate(images, start=1):
                yield f"{base_name}~{i}", image

    eqs = []
    for axiom in sp.proper_axioms:
        images = sorted(translation.translate_formula(axiom.formula), key=_formula_order)
        eqs.extend(named(axiom.name, images))
    ceqs = []
    for rule in sp.proper_rules:
        images = sorted(translation.translate_sequent(rule.sequent), key=sequent_key)
        ceqs.extend(named(rule.name, images))
    label = name or f"{_label(sp, 'source')}^{tdesc}"
    return horn_presentation(translation.target, eqs, ceqs, name=label)


# ---------------------------------------------------------------------------
# specialized entry points


def check_sigma_refinement(
    sp: Presentation,
    sp_prime: Presentation,
    morphism,
    proof_budget: Optional[Budget] = None,
    model_size_map: Optional[Mapping[str, int]] = None,
    **kwargs,
) -> RefinementCertificate:
    """Refinement along a signature morphism: each proper sentence is
    renamed through the morphism and decided in the target theory."""
    translation = translation_from_morphism(
        morphism, sp.k, name=morphism.name or "morphism"
    )
    return check_refinement_by_interpretation(
        sp, sp_prime, translation, proof_budget, model_size_map, **kwargs
    )


def check_logical_refinement(
    weaker: Presentation,
    stronger: Presentation,
    proof_budget: Optional[Budget] = None,
    model_size_map: Optional[Mapping[str, int]] = None,
    **kwargs,
) -> RefinementCertificate:
    """Theory strengthening over a grown signature: the source must live
    on a subsignature of the target (same dimension), and its sentences
    are checked verbatim in the stronger theory."""
    if weaker.k != stronger.k or not weaker.signature.is_subsignature_of(
        stronger.signature
    ):
        raise InterfaceMismatchError(
            "logical refinement needs the source signature included in the "
            "target signature, at the same dimension"
        )
    translation = translation_from_morphism(
        inclusion_morphism(weaker.signature, stronger.signature),
        weaker.k,
        name="inclusion",
    )
    return check_refinement_by_interpretation(
        weaker, stronger, translation, proof_budget, model_size_map, **kwargs
    )


def vertical_compose(
    first: RefinementCertificate, second: RefinementCertificate
) -> RefinementCertificate:
    """Chain two proved refinement steps end to end.

    The composed certificate carries both obligation lists, the union of
    the assumptions, and the side condition the composition theorem
    needs: that the second translation interprets the image theory of the
    first.  Composition never upgrades evidence — anything short of two
    proved inputs is rejected."""
    for certificate in (first, second):
        if certificate.overall != "proved":
            raise NotProvedError(
                f"cannot compose: step {certificate.source!r} -> "
                f"{certificate.target!r} is {certificate.overall}, not proved"
            )
    if first.target != second.source:
        raise ChainMismatchError(
            f"certificates do not chain: {first.target!r} != {second.source!r}"
        )
    side = (
        f"{second.translation!r} interprets the image of {first.source!r} "
        f"under {first.translation!r}"
    )
    merged = list(dict.fromkeys((*first.assumptions, *second.assumptions, side)))
    return RefinementCertificate(
        source=first.source,
        target=second.target,
        translation=f"{second.translation} . {first.translation}",
        obligations=first.obligations + second.obligations,
        assumptions=tuple(merged),
        overall="proved",
    )


# ---------------------------------------------------------------------------
# reflection


@dataclass(frozen=True)
class ReflectionCounterexample:
    """A sentence the source theory does not prove (finite countermodel
    attached) whose translation the target theory proves anyway."""

    sequent: Sequent
    witness: FiniteKStructure


def _terms_up_to_depth(signature, sort: str, depth: int) -> list:
    """All terms of the sort over the pool {x, y}, by depth, key-sorted."""
    layers: dict[str, list] = {
        s: [Variable("x", s), Variable("y", s)] for s in signature.sorts
    }
    for s in signature.sorts:
        for op in sorted(signature.ops):
            args, result = signature.profile(op)
            if result == s and not args:
                layers[s].append(App(op, (), s))
    for _ in range(depth):
        grown = {s: list(ts) for s, ts in layers.items()}
        for op in sorted(signature.ops):
            args, result = signature.profile(op)
            if not args:
                continue
            for combo in itertools.product(*(layers[a] for a in args)):
                candidate = App(op, combo, result)
                if candidate not in grown[result]:
                    grown[result].append(candidate)
        layers = grown
    return sorted(set(layers[sort]), key=term_key)


def search_reflection_counterexample(
    sp: Presentation,
    sp_prime: Presentation,
    translation: Translation,
    depth: int = 2,
    model_size_map: Optional[Mapping[str, int]] = None,
    proof_budget: Optional[Budget] = None,
    *,
    filter_mode: str = "identity",
    candidates: Iterable[FiniteKStructure] = (),
    max_structures: int = 1_000_000,
    max_formulas: int = 5000,
) -> Optional[ReflectionCounterexample]:
    """Hunt for a sentence witnessing that the translation proves too
    much: some ξ with a finite countermodel over the source theory whose
    every translated image is nevertheless derivable in the target.

    Candidate sentences are all k-tuples of distinct small terms (depth
    at most ``depth`` over a two-variable pool), deduplicated up to
    renaming and tried smallest first; the first hit is returned, so the
    search is deterministic.  ``None`` means the bounded space holds no
    counterexample.

    Derivability of the images is screened under a slashed budget — the
    hunt visits many candidates, and a deep search on each would multiply
    into minutes.  The trade is recall, never soundness: every hit is
    re-verified independently before it is returned."""
    if translation.source != sp.signature or translation.k != sp.k:
        raise InterfaceMismatchError(
            "the translation's source interface does not match the source theory"
        )
    if model_size_map is None:
        model_size_map = {sort: 2 for sort in sp.signature.sorts}
    candidates = tuple(candidates)
    full = proof_budget or Budget()
    screen = Budget(
        max_rounds=min(full.max_rounds, 3),
        max_derived=min(full.max_derived, 300),
        max_instantiation_depth=full.max_instantiation_depth,
        time_cap_ms=min(full.time_cap_ms, 300),
    )

    seen = set()
    pool = []
    for sort in sorted(sp.signature.sorts):
        terms = _terms_up_to_depth(sp.signature, sort, depth)
        for combo in itertools.product(terms, repeat=sp.k):
            if len(set(combo)) == 1:
                continue  # provable outright when k = 2; never refutable
            formula = KFormula(combo)
            fingerprint = formula_key(canonicalize(formula))
            if fingerprint in seen:
                continue
            seen.add(fingerprint)
            pool.append(formula)
            if len(pool) > max_formulas:
                raise BudgetError(
                    f"more than {max_formulas} candidate sentences at depth "
                    f"{depth}; tighten the generation budget"
                )
    pool.sort(key=lambda f: (f.size, _formula_order(f)))

    for formula in pool:
        witness = countermodel_search(
            sp, (), formula, model_size_map, filter_mode, candidates, max_structures
        )
        if witness is None:
            continue
        images = sorted(translation.translate_formula(formula), key=_formula_order)
        if all(
            isinstance(derive(sp_prime, (), image, screen), Proved)
            for image in images
        ):
            if not bool(is_model_of(witness, sp)) or semantic_consequence(
                witness, (), formula
            ):
                raise InternalSoundnessError(
                    "reflection witness failed independent re-verification"
                )
            return ReflectionCounterexample(Sequent((), formula), witness)
    return None


# ---------------------------------------------------------------------------
# the bundled check


@dataclass(frozen=True)
class InterpretationReport:
    """Preservation evidence plus the outcome of the reflection hunt."""

    preservation: RefinementCertificate
    counterexample: Optional[ReflectionCounterexample]
    status: str  # "counterexample-found" | "consistent-up-to-budget"
    note: str


def check_interpretation(
    sp: Presentation,
    translation: Translation,
    sp_prime: Presentation,
    proof_budget: Optional[Budget] = None,
    model_size_map: Optional[Mapping[str, int]] = None,
    *,
    reflection_depth: int = 2,
    reflection_size_map: Optional[Mapping[str, int]] = None,
    filter_mode: str = "identity",
    candidates: Iterable[FiniteKStructure] = (),
    max_structures: int = 1_000_000,
) -> InterpretationReport:
    """Check both directions of "the translation interprets the theory":
    preservation via the usual obligations, reflection via a bounded
    counterexample hunt.  A clean hunt does not prove reflection — the
    certificate's hypothesis line is merely downgraded to "consistent up
    to budget" with the budgets spelled out."""
    certificate = check_refinement_by_interpretation(
        sp,
        sp_prime,
        translation,
        proof_budget,
        model_size_map,
        filter_mode=filter_mode,
        candidates=candidates,
        max_structures=max_structures,
    )
    sizes = reflection_size_map or model_size_map
    counterexample = search_reflection_counterexample(
        sp,
        sp_prime,
        translation,
        reflection_depth,
        sizes,
        proof_budget,
        filter_mode=filter_mode,
        candidates=candidates,
        max_structures=max_structures,
    )
    tdesc = certificate.translation
    if counterexample is None:
        note = (
            f"interpretation consistent up to budget: no reflection "
            f"counterexample at depth <= {reflection_depth}, sizes "
            f"{sorted((sizes or {}).items())}"
        )
        hypothesis = certificate.assumptions[0]
        assumptions = (f"{hypothesis}; {note}",) + certificate.assumptions[1:]
        certificate = replace(certificate, assumptions=assumptions)
        return InterpretationReport(certificate, None, "consistent-up-to-budget", note)
    note = (
        f"reflection counterexample found: the source theory does not "
        f"prove a sentence whose {tdesc!r}-image the target proves"
    )
    return InterpretationReport(certificate, counterexample, "counterexample-found", note)

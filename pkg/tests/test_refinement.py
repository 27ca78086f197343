"""Tests for refinement certificates, image theories, and reflection."""

import random
import warnings

import pytest

from refinekit.deduction import (
    Axiom,
    Budget,
    Presentation,
    Proved,
    Refuted,
    Rule,
    Unknown,
    horn_presentation,
)
from refinekit.errors import (
    BudgetError,
    ChainMismatchError,
    CommutationUnverifiedWarning,
    InterfaceMismatchError,
    NotHornError,
    NotProvedError,
)
from refinekit.models import (
    LOGIC_SIGNATURE,
    FiniteKStructure,
    heyting_chain,
    is_model_of,
    reduct,
    semantic_consequence,
)
from refinekit.refinement import (
    InterpretationReport,
    Obligation,
    RefinementCertificate,
    ReflectionCounterexample,
    check_interpretation,
    check_logical_refinement,
    check_refinement_by_interpretation,
    check_sigma_refinement,
    decide,
    search_reflection_counterexample,
    tau_image_presentation,
    vertical_compose,
)
from refinekit.sigterm import (
    App,
    KFormula,
    Sequent,
    Signature,
    Variable,
    canonicalize,
    formula_key,
)
from refinekit.translation import (
    CommutationReport,
    Schematic,
    SignatureMorphism,
    TermHomomorphic,
    Translation,
    hole,
    identity_morphism,
    placeholder,
    translation_from_morphism,
)

QUICK = Budget(max_rounds=5, max_derived=1500, max_instantiation_depth=1, time_cap_ms=10_000)

UNARY = Signature({"s"}, {"f": (("s",), "s")}, name="unary")
WRAPPED = Signature({"s"}, {"f": (("s",), "s"), "v": (("s",), "s")}, name="wrapped")
RENAMED = Signature({"t"}, {"h": (("t",), "t")}, name="renamed")

NAT_SIG = Signature(
    {"nat"},
    {"zero": ((), "nat"), "succ": (("nat",), "nat"), "plus": (("nat", "nat"), "nat")},
    name="nat",
)
NATEQ_SIG = Signature(
    {"nat"},
    {
        "zero": ((), "nat"),
        "succ": (("nat",), "nat"),
        "plus": (("nat", "nat"), "nat"),
        "eq": (("nat", "nat"), "nat"),
        "tt": ((), "nat"),
    },
    name="nat-eq",
)


def var(name, sort="s"):
    return Variable(name, sort)


def f_(t):
    return App("f", (t,), "s")


def eq2(left, right):
    return KFormula([left, right])


X = var("x")
FIX = eq2(f_(X), X)

COLLAPSE = horn_presentation(UNARY, [("fix", FIX)], name="collapse")
EQ_F = horn_presentation(UNARY, [], name="eq-f")
IDENTITY = translation_from_morphism(identity_morphism(UNARY), 2, name="id")


def nat(name):
    return Variable(name, "nat")


def plus(a, b):
    return App("plus", (a, b), "nat")


def succ(a):
    return App("succ", (a,), "nat")


ZERO = App("zero", (), "nat")
NX, NY = nat("x"), nat("y")

NAT_EQS = [
    ("plus-zero", eq2(plus(NX, ZERO), NX)),
    ("plus-succ", eq2(plus(NX, succ(NY)), succ(plus(NX, NY)))),
]
NAT_CEQS = [
    ("succ-inj", Sequent([eq2(succ(NX), succ(NY))], eq2(NX, NY))),
]
NAT = horn_presentation(NAT_SIG, NAT_EQS, NAT_CEQS, name="nat")


def eqt(a, b):
    return App("eq", (a, b), "nat")


TT = App("tt", (), "nat")

NATEQ = horn_presentation(
    NATEQ_SIG,
    NAT_EQS + [("eq-refl", eq2(eqt(NX, NX), TT))],
    NAT_CEQS
    + [
        ("eq-intro", Sequent([eq2(NX, NY)], eq2(eqt(NX, NY), TT))),
        ("eq-elim", Sequent([eq2(eqt(NX, NY), TT)], eq2(NX, NY))),
    ],
    name="nat-eq",
)

EQTT = Schematic(
    NAT_SIG,
    2,
    NATEQ_SIG,
    {"nat": [KFormula([eqt(placeholder(0, "nat"), placeholder(1, "nat")), TT])]},
    name="eqtt",
)


def sympair(signature=UNARY, sort="s"):
    p0, p1 = placeholder(0, sort), placeholder(1, sort)
    return Schematic(
        signature,
        2,
        signature,
        {sort: [KFormula([p0, p1]), KFormula([p1, p0])]},
        name="sympair",
    )


def assert_consistent(cert):
    """The certificate-consistency invariant: the overall verdict never
    overstates the obligations."""
    kinds = [o.status for o in cert.obligations]
    if cert.overall == "proved":
        assert all(k == "proved" for k in kinds)
    if cert.overall == "failed":
        assert "refuted" in kinds
    if "refuted" in kinds and cert.overall != "failed":
        assert any("FAILED" in a for a in cert.assumptions)


# ---------------------------------------------------------------------------
# decide


class TestDecide:
    def test_proved_with_replayable_proof(self):
        verdict = decide(COLLAPSE, (), FIX, QUICK)
        assert isinstance(verdict, Proved)
        assert verdict.kind == "proved"

    def test_refuted_with_reverified_witness(self):
        verdict = decide(EQ_F, (), FIX, QUICK, {"s": 2})
        assert isinstance(verdict, Refuted)
        witness = verdict.witness
        assert bool(is_model_of(witness, EQ_F))
        assert not semantic_consequence(witness, (), FIX)
        assert witness.op_tables["f"] == (0, 0)

    def test_unknown_when_sweep_exhausted(self):
        # f(f(x)) = f(f(f(f(x)))) holds in every one- or two-element
        # structure but fails on a three-cycle.
        goal = eq2(f_(f_(X)), f_(f_(f_(f_(X)))))
        at_two = decide(EQ_F, (), goal, QUICK, {"s": 2})
        assert isinstance(at_two, Unknown)
        assert "exhausted" in at_two.report["countermodel"]
        at_three = decide(EQ_F, (), goal, QUICK, {"s": 3})
        assert isinstance(at_three, Refuted)

    def test_countermodel_phase_skipped_without_sizes(self):
        verdict = decide(EQ_F, (), FIX, QUICK)
        assert isinstance(verdict, Unknown)
        assert verdict.report["countermodel"] == "skipped"

    def test_oversized_sweep_noted_not_raised(self):
        verdict = decide(EQ_F, (), FIX, QUICK, {"s": 30}, max_structures=100)
        assert isinstance(verdict, Unknown)
        assert verdict.report["countermodel"].startswith("not attempted")

    def test_candidates_take_precedence_over_the_sweep(self):
        swap = FiniteKStructure(UNARY, 2, {"s": 2}, {"f": (1, 0)}, name="swap")
        verdict = decide(EQ_F, (), FIX, QUICK, {"s": 2}, candidates=[swap])
        assert isinstance(verdict, Refuted)
        assert verdict.witness.op_tables["f"] == (1, 0)

    def test_candidates_alone_suffice(self):
        swap = FiniteKStructure(UNARY, 2, {"s": 2}, {"f": (1, 0)}, name="swap")
        verdict = decide(EQ_F, (), FIX, QUICK, candidates=[swap])
        assert isinstance(verdict, Refuted)

    def test_well_behaved_candidates_leave_proofs_alone(self):
        fixed = FiniteKStructure(UNARY, 2, {"s": 1}, {"f": (0,)}, name="point")
        verdict = decide(COLLAPSE, (), FIX, QUICK, {"s": 2}, candidates=[fixed])
        assert isinstance(verdict, Proved)

    def test_premises_reach_the_countermodel(self):
        y = var("y")
        hyp = eq2(f_(X), var("y"))
        verdict = decide(EQ_F, [hyp], eq2(f_(y), X), QUICK, {"s": 2})
        assert isinstance(verdict, Refuted)
        witness = verdict.witness
        assert not semantic_consequence(witness, [hyp], eq2(f_(y), X))


# ---------------------------------------------------------------------------
# refinement by interpretation


class TestInterpretation:
    def test_identity_refinement_of_itself(self):
        cert = check_refinement_by_interpretation(COLLAPSE, COLLAPSE, IDENTITY)
        assert cert.overall == "proved"
        assert [o.status for o in cert.obligations] == ["proved"]
        assert cert.source == "collapse" and cert.target == "collapse"
        assert_consistent(cert)

    def test_hypothesis_always_recorded(self):
        cert = check_refinement_by_interpretation(COLLAPSE, COLLAPSE, IDENTITY)
        assert "interprets" in cert.assumptions[0]
        assert "not discharged" in cert.assumptions[0]

    def test_base_transport_assumption_recorded(self):
        cert = check_refinement_by_interpretation(COLLAPSE, COLLAPSE, IDENTITY)
        assert any("base equational machinery" in a for a in cert.assumptions)

    def test_failed_when_an_image_is_refuted(self):
        cert = check_refinement_by_interpretation(
            COLLAPSE, EQ_F, IDENTITY, QUICK, {"s": 2}
        )
        assert cert.overall == "failed"
        [obligation] = cert.obligations
        assert obligation.source_kind == "axiom"
        assert obligation.source_name == "fix"
        assert obligation.status == "refuted"
        assert_consistent(cert)

    def test_unknown_without_countermodel_budget(self):
        cert = check_refinement_by_interpretation(COLLAPSE, EQ_F, IDENTITY, QUICK)
        assert cert.overall == "unknown"
        assert_consistent(cert)

    def test_vacuous_refinement_has_no_obligations(self):
        cert = check_refinement_by_interpretation(EQ_F, COLLAPSE, IDENTITY)
        assert cert.obligations == ()
        assert cert.overall == "proved"

    def test_interface_mismatch_on_wrong_source(self):
        tau = translation_from_morphism(identity_morphism(RENAMED), 2)
        with pytest.raises(InterfaceMismatchError):
            check_refinement_by_interpretation(COLLAPSE, COLLAPSE, tau)

    def test_interface_mismatch_on_wrong_dimension(self):
        tau = translation_from_morphism(identity_morphism(UNARY), 3)
        with pytest.raises(InterfaceMismatchError):
            check_refinement_by_interpretation(COLLAPSE, COLLAPSE, tau)

    def test_obligations_ordered_axioms_then_rules(self):
        extra = Sequent([eq2(f_(X), var("y"))], eq2(f_(var("y")), X))
        theory = horn_presentation(
            UNARY, [("fix", FIX)], [("flip", extra)], name="flip"
        )
        cert = check_refinement_by_interpretation(
            theory, theory, sympair(), QUICK
        )
        assert [o.source_kind for o in cert.obligations] == [
            "axiom", "axiom", "rule", "rule",
        ]
        assert [o.source_name for o in cert.obligations] == [
            "fix", "fix", "flip", "flip",
        ]

    def test_multi_image_obligations_all_checked(self):
        cert = check_refinement_by_interpretation(COLLAPSE, COLLAPSE, sympair(), QUICK)
        assert len(cert.obligations) == 2
        assert cert.overall == "proved"
        conclusions = {o.sequent.conclusion for o in cert.obligations}
        assert conclusions == {FIX, eq2(X, f_(X))}

    def test_nat_to_nateq_three_obligations_proved(self):
        cert = check_refinement_by_interpretation(NAT, NATEQ, EQTT, QUICK)
        assert len(cert.obligations) == 3
        assert cert.overall == "proved"
        assert all(o.status == "proved" for o in cert.obligations)
        # template translations commute on the nose, so no probe caveat
        assert not any("commutation" in a for a in cert.assumptions)
        assert_consistent(cert)

    def test_as_dict_is_json_shaped(self):
        import json

        cert = check_refinement_by_interpretation(NAT, NATEQ, EQTT, QUICK)
        blob = json.loads(json.dumps(cert.as_dict()))
        assert blob["overall"] == "proved"
        assert blob["translation"] == "eqtt"
        assert len(blob["obligations"]) == 3
        assert blob["obligations"][0]["source"].startswith("axiom ")


class _FickleDoubler(Translation):
    """Duplicates reversed images only for formulas headed by ``f`` — a
    deliberate violation of substitution commutation."""

    def __init__(self):
        super().__init__(UNARY, 2, UNARY, 2, name="fickle")

    def _image(self, formula):
        first, second = formula.components
        if isinstance(first, App):
            return {formula, KFormula([second, first])}
        return {formula}


class _HonestDoubler(Translation):
    """Always emits both orientations; commutes, but only a probe can
    tell the checker so."""

    def __init__(self):
        super().__init__(UNARY, 2, UNARY, 2, name="doubler")

    def _image(self, formula):
        first, second = formula.components
        return {formula, KFormula([second, first])}


class TestCommutationTriage:
    def test_probe_failure_caps_the_verdict(self):
        with pytest.warns(CommutationUnverifiedWarning):
            cert = check_refinement_by_interpretation(
                COLLAPSE, COLLAPSE, _FickleDoubler(), QUICK
            )
        assert cert.overall == "unknown"
        assert any("FAILED" in a for a in cert.assumptions)
        assert_consistent(cert)

    def test_probe_success_is_recorded_as_spot_check(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            cert = check_refinement_by_interpretation(
                COLLAPSE, COLLAPSE, _HonestDoubler(), QUICK
            )
        assert cert.overall == "proved"
        assert any("spot-checked" in a for a in cert.assumptions)

    def test_cross_signature_translation_assumed_not_probed(self):
        h1 = hole(1, "s")
        tau = TermHomomorphic(
            UNARY,
            2,
            WRAPPED,
            {"f": [App("v", (App("f", (h1,), "s"),), "s")]},
            name="wrapping",
        )
        vfix = ("vfix", eq2(App("v", (App("f", (X,), "s"),), "s"), X))
        target = horn_presentation(WRAPPED, [vfix], name="wrapped-collapse")
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            cert = check_refinement_by_interpretation(COLLAPSE, target, tau, QUICK)
        assert cert.overall == "proved"
        assert any("not probed" in a for a in cert.assumptions)


# ---------------------------------------------------------------------------
# image theories


class TestTauImage:
    def test_identity_image_keeps_the_sentences(self):
        image = tau_image_presentation(COLLAPSE, IDENTITY, name="copy")
        assert image.signature == UNARY
        assert [a.name for a in image.proper_axioms] == ["fix"]
        assert formula_key(image.proper_axioms[0].formula) == formula_key(FIX)

    def test_multi_image_sentences_get_suffixed_names(self):
        image = tau_image_presentation(COLLAPSE, sympair())
        assert [a.name for a in image.proper_axioms] == ["fix~1", "fix~2"]
        forms = {formula_key(a.formula) for a in image.proper_axioms}
        assert forms == {formula_key(FIX), formula_key(eq2(X, f_(X)))}

    def test_rules_translate_to_rules(self):
        extra = Sequent([eq2(f_(X), var("y"))], eq2(f_(var("y")), X))
        theory = horn_presentation(UNARY, [], [("flip", extra)], name="flipper")
        image = tau_image_presentation(theory, IDENTITY)
        assert [r.name for r in image.proper_rules] == ["flip"]

    def test_non_horn_input_rejected(self):
        one_dim = Presentation(
            UNARY, 1, [Axiom("point", KFormula([X]))], [], name="one"
        )
        with pytest.raises(NotHornError):
            tau_image_presentation(one_dim, IDENTITY)

    def test_missing_base_rejected(self):
        bare = Presentation(UNARY, 2, [Axiom("fix", FIX)], [], name="bare")
        with pytest.raises(NotHornError):
            tau_image_presentation(bare, IDENTITY)

    def test_non_equational_images_rejected(self):
        squash = Schematic(
            UNARY, 2, UNARY, {"s": [KFormula([placeholder(0, "s")])]}, name="squash"
        )
        with pytest.raises(NotHornError):
            tau_image_presentation(COLLAPSE, squash)

    def test_unchecked_commutation_warns(self):
        with pytest.warns(CommutationUnverifiedWarning):
            tau_image_presentation(COLLAPSE, _HonestDoubler())

    def test_passed_report_silences_the_warning(self):
        report = CommutationReport(True, 40, None)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            tau_image_presentation(COLLAPSE, _HonestDoubler(), commutation_report=report)

    def test_failing_report_is_fatal(self):
        report = CommutationReport(False, 40, None)
        with pytest.raises(ValueError):
            tau_image_presentation(COLLAPSE, _HonestDoubler(), commutation_report=report)

    def test_image_theory_proves_what_the_obligations_say(self):
        image = tau_image_presentation(NAT, EQTT)
        assert image.signature == NATEQ_SIG
        assert len(image.proper_axioms) == 2
        assert len(image.proper_rules) == 1


# ---------------------------------------------------------------------------
# morphism and inclusion entry points


class TestSigmaRefinement:
    def rename(self):
        return SignatureMorphism(
            UNARY, RENAMED, {"s": "t"}, {"f": "h"}, name="rename"
        )

    def test_renamed_copy_is_a_refinement(self):
        hx = App("h", (Variable("x", "t"),), "t")
        target = horn_presentation(
            RENAMED, [("hfix", KFormula([hx, Variable("x", "t")]))], name="collapse-t"
        )
        cert = check_sigma_refinement(COLLAPSE, target, self.rename(), QUICK)
        assert cert.overall == "proved"
        assert cert.translation == "rename"

    def test_dropping_the_axiom_fails_via_candidate(self):
        target = horn_presentation(RENAMED, [], name="eq-t")
        fold = FiniteKStructure(RENAMED, 2, {"t": 2}, {"h": (0, 0)}, name="fold")
        cert = check_sigma_refinement(
            COLLAPSE, target, self.rename(), QUICK, candidates=[fold]
        )
        assert cert.overall == "failed"
        assert cert.obligations[0].verdict.witness.name == "fold"
        assert_consistent(cert)

    def test_excluded_middle_fails_against_the_three_chain(self):
        p = Variable("p", "f")
        lem = KFormula(
            [App("or", (p, App("not", (p,), "f")), "f"), App("top", (), "f")]
        )
        classical = horn_presentation(LOGIC_SIGNATURE, [("lem", lem)], name="classical")
        weaker = horn_presentation(LOGIC_SIGNATURE, [], name="logic-eq")
        cert = check_sigma_refinement(
            classical,
            weaker,
            identity_morphism(LOGIC_SIGNATURE),
            QUICK,
            candidates=[heyting_chain(3)],
        )
        assert cert.overall == "failed"
        witness = cert.obligations[0].verdict.witness
        assert witness.carriers["f"] == 3


class TestLogicalRefinement:
    def test_strengthening_is_a_refinement(self):
        cert = check_logical_refinement(EQ_F, COLLAPSE, QUICK)
        assert cert.overall == "proved"

    def test_signature_growth_is_allowed(self):
        bigger = horn_presentation(WRAPPED, [("fix", FIX)], name="wrapped-fix")
        cert = check_logical_refinement(COLLAPSE, bigger, QUICK)
        assert cert.overall == "proved"

    def test_signature_shrink_is_rejected(self):
        bigger = horn_presentation(WRAPPED, [], name="wrapped-eq")
        with pytest.raises(InterfaceMismatchError):
            check_logical_refinement(bigger, EQ_F, QUICK)

    def test_agrees_with_identity_interpretation(self):
        via_logical = check_logical_refinement(COLLAPSE, COLLAPSE, QUICK)
        via_interp = check_refinement_by_interpretation(
            COLLAPSE, COLLAPSE, IDENTITY, QUICK
        )
        assert [o.status for o in via_logical.obligations] == [
            o.status for o in via_interp.obligations
        ]
        assert via_logical.overall == via_interp.overall

    def test_factoring_through_the_image_theory_agrees(self):
        # Checking tau-refinement directly and checking inclusion of the
        # image theory must say the same thing, obligation for obligation.
        direct = check_refinement_by_interpretation(NAT, NATEQ, EQTT, QUICK)
        image = tau_image_presentation(NAT, EQTT)
        factored = check_logical_refinement(image, NATEQ, QUICK)
        assert [o.status for o in direct.obligations] == [
            o.status for o in factored.obligations
        ]
        assert direct.overall == factored.overall == "proved"

    def test_factoring_agrees_on_the_negative_side_too(self):
        weak = horn_presentation(
            NATEQ_SIG,
            NAT_EQS + [("eq-refl", eq2(eqt(NX, NX), TT))],
            NAT_CEQS + [("eq-elim", Sequent([eq2(eqt(NX, NY), TT)], eq2(NX, NY)))],
            name="nat-eq-weak",
        )
        direct = check_refinement_by_interpretation(NAT, weak, EQTT, QUICK)
        factored = check_logical_refinement(tau_image_presentation(NAT, EQTT), weak, QUICK)
        assert direct.overall == factored.overall == "unknown"
        assert [o.status for o in direct.obligations] == [
            o.status for o in factored.obligations
        ]


# ---------------------------------------------------------------------------
# vertical composition


class TestVerticalCompose:
    def certificates(self):
        mid = horn_presentation(WRAPPED, [("fix", FIX)], name="middle")
        vfix = ("vfix", eq2(App("v", (X,), "s"), X))
        top = horn_presentation(
            WRAPPED, [("fix", FIX), vfix], name="top"
        )
        c1 = check_logical_refinement(COLLAPSE, mid, QUICK)
        c2 = check_logical_refinement(mid, top, QUICK)
        return c1, c2

    def test_composition_chains_evidence(self):
        c1, c2 = self.certificates()
        composed = vertical_compose(c1, c2)
        assert composed.overall == "proved"
        assert composed.source == "collapse"
        assert composed.target == "top"
        assert composed.obligations == c1.obligations + c2.obligations

    def test_side_condition_and_assumptions_accumulate(self):
        c1, c2 = self.certificates()
        composed = vertical_compose(c1, c2)
        for assumption in c1.assumptions + c2.assumptions:
            assert assumption in composed.assumptions
        assert "interprets the image" in composed.assumptions[-1]

    def test_broken_chain_rejected(self):
        c1, _ = self.certificates()
        other = check_logical_refinement(EQ_F, COLLAPSE, QUICK)
        with pytest.raises(ChainMismatchError):
            vertical_compose(c1, other)

    def test_unproved_step_rejected(self):
        c1, c2 = self.certificates()
        unknown = check_refinement_by_interpretation(COLLAPSE, EQ_F, IDENTITY, QUICK)
        with pytest.raises(NotProvedError):
            vertical_compose(unknown, c1)
        with pytest.raises(NotProvedError):
            vertical_compose(c2, unknown)


# ---------------------------------------------------------------------------
# reflection


class TestReflection:
    def test_finds_the_folklore_counterexample(self):
        found = search_reflection_counterexample(
            EQ_F, COLLAPSE, IDENTITY, 2, {"s": 2}, QUICK
        )
        assert found is not None
        assert set(found.sequent.conclusion.components) == {X, f_(X)}
        assert bool(is_model_of(found.witness, EQ_F))
        assert not semantic_consequence(found.witness, (), found.sequent.conclusion)

    def test_clean_when_nothing_proves_too_much(self):
        assert (
            search_reflection_counterexample(
                COLLAPSE, COLLAPSE, IDENTITY, 2, {"s": 2}, QUICK
            )
            is None
        )

    def test_deterministic_across_runs(self):
        runs = [
            search_reflection_counterexample(EQ_F, COLLAPSE, IDENTITY, 2, {"s": 2}, QUICK)
            for _ in range(2)
        ]
        assert runs[0].sequent == runs[1].sequent
        assert runs[0].witness.op_tables == runs[1].witness.op_tables

    def test_generation_budget_enforced(self):
        with pytest.raises(BudgetError):
            search_reflection_counterexample(
                EQ_F, COLLAPSE, IDENTITY, 3, {"s": 2}, QUICK, max_formulas=5
            )

    def test_interface_checked(self):
        tau = translation_from_morphism(identity_morphism(RENAMED), 2)
        with pytest.raises(InterfaceMismatchError):
            search_reflection_counterexample(EQ_F, COLLAPSE, tau, 2, {"s": 2}, QUICK)

    def test_respects_the_translation(self):
        # Through eqtt, reflection compares NAT sentences against their
        # eq/tt forms; the strong target proves exactly the images of
        # what NAT proves on this bounded slice, so the hunt comes back
        # clean rather than flagging spurious mismatches.
        found = search_reflection_counterexample(
            NAT, NATEQ, EQTT, 1, {"nat": 2}, QUICK, max_formulas=2000
        )
        assert found is None


class TestCheckInterpretation:
    def test_clean_bundle_downgrades_the_hypothesis(self):
        report = check_interpretation(COLLAPSE, IDENTITY, COLLAPSE, QUICK, {"s": 2})
        assert report.status == "consistent-up-to-budget"
        assert report.counterexample is None
        assert "consistent up to budget" in report.preservation.assumptions[0]
        assert report.preservation.overall == "proved"

    def test_counterexample_bundle_keeps_the_hypothesis(self):
        report = check_interpretation(EQ_F, IDENTITY, COLLAPSE, QUICK, {"s": 2})
        assert report.status == "counterexample-found"
        assert isinstance(report.counterexample, ReflectionCounterexample)
        assert "not discharged" in report.preservation.assumptions[0]
        # preservation itself is fine: EQ_F has no proper sentences
        assert report.preservation.overall == "proved"


# ---------------------------------------------------------------------------
# coherence with the model layer


class TestModelCoherence:
    def test_renaming_preserves_satisfaction_of_the_theory(self):
        rng = random.Random(7)
        sigma = SignatureMorphism(UNARY, RENAMED, {"s": "t"}, {"f": "h"})
        tau = translation_from_morphism(sigma, 2)
        for _ in range(40):
            size = rng.randrange(1, 4)
            table = tuple(rng.randrange(size) for _ in range(size))
            structure = FiniteKStructure(RENAMED, 2, {"t": size}, {"h": table})
            pulled = reduct(structure, sigma)
            for name, formula in NAT_EQS[:0] or [("fix", FIX)]:
                translated = next(iter(tau.translate_formula(formula)))
                assert semantic_consequence(structure, (), translated) == (
                    semantic_consequence(pulled, (), formula)
                )

    def test_certificates_never_contradict_the_models(self):
        # every refuted obligation's witness really is a countermodel
        cert = check_refinement_by_interpretation(
            COLLAPSE, EQ_F, sympair(), QUICK, {"s": 2}
        )
        assert cert.overall == "failed"
        for obligation in cert.obligations:
            if obligation.status == "refuted":
                witness = obligation.verdict.witness
                assert bool(is_model_of(witness, EQ_F))
                assert not semantic_consequence(
                    witness, obligation.sequent.premises, obligation.sequent.conclusion
                )

from __future__ import annotations

import itertools
import random

import pytest

from refinekit.deduction import (
    Budget,
    Proved,
    derive,
    free_equational_presentation,
    horn_presentation,
)
from refinekit.errors import (
    BudgetError,
    SignatureMismatchError,
    SortError,
    UnassignedVariableError,
)
from refinekit.models import (
    FiniteKStructure,
    LOGIC_SIGNATURE,
    boolean_2,
    boolean_4,
    count_structures,
    countermodel_search,
    enumerate_structures,
    eval_term,
    heyting_chain,
    holds,
    identity_filter,
    is_model_of,
    is_tau_model,
    reduct,
    saturating_interval,
    semantic_consequence,
)
from refinekit.sigterm import App, KFormula, Sequent, Signature, Variable
from refinekit.translation import (
    Schematic,
    SignatureMorphism,
    apply_signature_morphism,
    identity_morphism,
    inclusion_morphism,
    placeholder,
    translation_from_morphism,
)

# --- fixtures ---------------------------------------------------------------

UNARY_SIG = Signature(sorts=["s"], ops={"f": (("s",), "s")}, name="UNARY")

TRIM_SIG = Signature(
    sorts=["f"],
    ops={"or": (("f", "f"), "f"), "not": (("f",), "f"), "top": ((), "f")},
    name="TRIM",
)

NAT_SIG = Signature(
    sorts=["nat"],
    ops={"z": ((), "nat"), "s": (("nat",), "nat"), "+": (("nat", "nat"), "nat")},
    name="NAT",
)


def fvar(name: str) -> Variable:
    return Variable(name, "f")


def svar(name: str) -> Variable:
    return Variable(name, "s")


def f_of(t):
    return App("f", (t,), "s")


def lor(a, b):
    return App("or", (a, b), "f")


def lnot(a):
    return App("not", (a,), "f")


def land(a, b):
    return App("and", (a, b), "f")


def limp(a, b):
    return App("imp", (a, b), "f")


TOP = App("top", (), "f")


def classical_presentation(signature: Signature):
    p = fvar("p")
    return horn_presentation(
        signature,
        eqs=[
            ("lem", KFormula([lor(p, lnot(p)), TOP])),
            ("dne", KFormula([lnot(lnot(p)), p])),
        ],
        ceqs=[],
        name="classical",
    )


def collapse_presentation():
    x = svar("x")
    return horn_presentation(
        UNARY_SIG,
        eqs=[("fx-x", KFormula([f_of(x), x]))],
        ceqs=[],
        name="collapse",
    )


def swap_structure(k: int = 2) -> FiniteKStructure:
    return FiniteKStructure(UNARY_SIG, k, {"s": 2}, {"f": (1, 0)}, name="swap")


def random_structure(
    rng: random.Random, signature: Signature, max_size: int = 3, k: int = 2
) -> FiniteKStructure:
    sizes = {s: rng.randint(1, max_size) for s in sorted(signature.sorts)}
    tables = {}
    for op, (args, result) in signature.ops.items():
        rows = 1
        for a in args:
            rows *= sizes[a]
        tables[op] = tuple(rng.randrange(sizes[result]) for _ in range(rows))
    filters = {
        s: frozenset(
            t
            for t in itertools.product(range(sizes[s]), repeat=k)
            if rng.random() < 0.5
        )
        for s in signature.sorts
    }
    return FiniteKStructure(signature, k, sizes, tables, filters)


# --- construction -----------------------------------------------------------


class TestFiniteKStructure:
    def test_filters_default_to_the_diagonal(self):
        m = swap_structure()
        assert m.filters == {"s": frozenset({(0, 0), (1, 1)})}
        assert identity_filter(3, 2) == frozenset({(0, 0), (1, 1), (2, 2)})

    def test_tables_are_validated(self):
        with pytest.raises(SortError):
            FiniteKStructure(UNARY_SIG, 2, {"s": 2}, {})
        with pytest.raises(SortError):
            FiniteKStructure(UNARY_SIG, 2, {"s": 2}, {"f": (0,)})
        with pytest.raises(SortError):
            FiniteKStructure(UNARY_SIG, 2, {"s": 2}, {"f": (0, 5)})
        with pytest.raises(SortError):
            FiniteKStructure(UNARY_SIG, 2, {"s": 2}, {"f": (0, 1), "g": (0, 1)})

    def test_carriers_and_filters_are_validated(self):
        with pytest.raises(SortError):
            FiniteKStructure(UNARY_SIG, 2, {}, {"f": ()})
        with pytest.raises(SortError):
            FiniteKStructure(UNARY_SIG, 2, {"s": 0}, {"f": ()})
        with pytest.raises(SortError):
            FiniteKStructure(
                UNARY_SIG, 2, {"s": 2}, {"f": (0, 1)}, filters={"s": {(0, 1, 0)}}
            )
        with pytest.raises(SortError):
            FiniteKStructure(
                UNARY_SIG, 2, {"s": 2}, {"f": (0, 1)}, filters={"s": {(0, 2)}}
            )

    def test_row_major_lookup_is_first_argument_major(self):
        interval = saturating_interval(-1, 1)
        # index pairs are (row, column) into the flat table
        assert interval.op_value("+", (2, 2)) == 2  # 1 + 1 saturates at 1
        assert interval.op_value("-", (0, 2)) == 0  # -1 - 1 saturates at -1
        assert interval.op_value("zero", ()) == 1

    def test_as_dict_round_trips_through_the_constructor(self):
        m = heyting_chain(3)
        snapshot = m.as_dict()
        again = FiniteKStructure(
            LOGIC_SIGNATURE,
            snapshot["k"],
            snapshot["carriers"],
            snapshot["ops"],
            {s: map(tuple, rows) for s, rows in snapshot["filters"].items()},
            name=snapshot["name"],
        )
        assert again == m


# --- evaluation and satisfaction ---------------------------------------------


class TestEvaluation:
    def test_variables_evaluate_through_the_assignment(self):
        m = boolean_2()
        p = fvar("p")
        assert eval_term(m, {p: 0}, p) == 0
        assert eval_term(m, {p: 1}, p) == 1

    def test_excluded_middle_is_constant_in_the_boolean_algebra(self):
        m = boolean_2()
        p = fvar("p")
        for value in (0, 1):
            assert eval_term(m, {p: value}, lor(p, lnot(p))) == 1

    def test_double_negation_closes_up_the_three_chain(self):
        m = heyting_chain(3)
        p = fvar("p")
        assert eval_term(m, {p: 1}, lnot(lnot(p))) == 2
        assert eval_term(m, {p: 0}, lnot(lnot(p))) == 0

    def test_missing_assignment(self):
        with pytest.raises(UnassignedVariableError):
            eval_term(boolean_2(), {}, fvar("p"))

    def test_out_of_carrier_assignment(self):
        with pytest.raises(SortError):
            eval_term(boolean_2(), {fvar("p"): 7}, fvar("p"))


class TestHolds:
    def test_diagonal_filter_accepts_syntactic_repetition(self):
        m = boolean_2()
        p = fvar("p")
        t = lor(p, lnot(p))
        for value in (0, 1):
            assert holds(m, {p: value}, KFormula([t, t]))

    def test_order_filter_on_the_interval(self):
        m = saturating_interval(-1, 1, order_filter=True)
        n = Variable("n", "int")
        zero = App("zero", (), "int")
        n_plus_zero = App("+", (n, zero), "int")
        assert holds(m, {n: 2}, KFormula([n, n_plus_zero]))
        n_minus_n = App("-", (n, n), "int")
        assert not holds(m, {n: 2}, KFormula([n, n_minus_n]))

    def test_contradiction_is_not_top(self):
        m = boolean_2()
        p = fvar("p")
        assert not holds(m, {p: 1}, KFormula([land(p, lnot(p)), TOP]))


class TestSemanticConsequence:
    def test_premise_entails_itself(self):
        rng = random.Random(5)
        m = boolean_2()
        p, q = fvar("p"), fvar("q")
        pool = [p, q, lnot(p), lor(p, q), land(q, lnot(p)), TOP]
        for _ in range(25):
            phi = KFormula([rng.choice(pool), rng.choice(pool)])
            assert semantic_consequence(m, [phi], phi)

    def test_negation_table_refutes_fixed_points(self):
        m = FiniteKStructure(UNARY_SIG, 2, {"s": 2}, {"f": (1, 0)})
        x = svar("x")
        assert not semantic_consequence(m, [], KFormula([f_of(x), x]))

    def test_double_negated_excluded_middle_in_the_three_chain(self):
        m = heyting_chain(3)
        p = fvar("p")
        lhs = lnot(lnot(lor(p, lnot(p))))
        rhs = lnot(lnot(TOP))
        assert semantic_consequence(m, [], KFormula([lhs, rhs]))


# --- model checking -----------------------------------------------------------


class TestIsModelOf:
    def test_boolean_algebra_models_the_classical_axioms(self):
        result = is_model_of(boolean_2(), classical_presentation(LOGIC_SIGNATURE))
        assert result
        assert result.violated is None

    def test_three_chain_fails_excluded_middle_first(self):
        result = is_model_of(heyting_chain(3), classical_presentation(LOGIC_SIGNATURE))
        assert not result
        assert result.violated == "lem"
        assert result.assignment == {fvar("p"): 1}

    def test_every_structure_models_the_free_equational_presentation(self):
        eq = free_equational_presentation(LOGIC_SIGNATURE)
        for m in (boolean_2(), heyting_chain(3), boolean_4()):
            assert is_model_of(m, eq)
        rng = random.Random(9)
        for _ in range(10):
            m = random_structure(rng, UNARY_SIG, max_size=3)
            diagonal = FiniteKStructure(
                UNARY_SIG, 2, m.carriers, m.op_tables
            )
            assert is_model_of(diagonal, free_equational_presentation(UNARY_SIG))

    def test_rule_violations_are_named(self):
        x, y = svar("x"), svar("y")
        injective_f = horn_presentation(
            UNARY_SIG,
            eqs=[],
            ceqs=[
                ("inj", Sequent([KFormula([f_of(x), f_of(y)])], KFormula([x, y])))
            ],
            name="injective",
        )
        assert is_model_of(swap_structure(), injective_f)
        constant = FiniteKStructure(UNARY_SIG, 2, {"s": 2}, {"f": (0, 0)})
        result = is_model_of(constant, injective_f)
        assert not result
        assert result.violated == "inj"
        assert result.assignment == {x: 0, y: 1}

    def test_signature_and_dimension_must_match(self):
        with pytest.raises(SignatureMismatchError):
            is_model_of(boolean_2(), collapse_presentation())
        with pytest.raises(SignatureMismatchError):
            is_model_of(swap_structure(k=3), collapse_presentation())


# --- enumeration ---------------------------------------------------------------


class TestEnumeration:
    def test_one_unary_operation_at_size_two(self):
        found = list(enumerate_structures(UNARY_SIG, 2, {"s": 2}))
        assert len(found) == 4
        assert [m.op_tables["f"] for m in found] == [
            (0, 0),
            (0, 1),
            (1, 0),
            (1, 1),
        ]
        assert all(m.filters == {"s": identity_filter(2, 2)} for m in found)

    def test_filters_enumerate_after_tables(self):
        bare = Signature(sorts=["s"], ops={})
        found = list(enumerate_structures(bare, 2, {"s": 1}, filter_mode="all"))
        assert [m.filters["s"] for m in found] == [frozenset(), frozenset({(0, 0)})]

    def test_single_constant_at_size_two(self):
        pointed = Signature(sorts=["s"], ops={"c": ((), "s")})
        found = list(enumerate_structures(pointed, 2, {"s": 2}))
        assert [m.op_tables["c"] for m in found] == [(0,), (1,)]

    def test_counts_match_closed_forms(self):
        assert count_structures(UNARY_SIG, 2, {"s": 3}) == 27
        assert len(list(enumerate_structures(UNARY_SIG, 2, {"s": 3}))) == 27

        pointed_unary = Signature(
            sorts=["s"], ops={"c": ((), "s"), "g": (("s",), "s")}
        )
        assert count_structures(pointed_unary, 2, {"s": 2}) == 8
        assert len(list(enumerate_structures(pointed_unary, 2, {"s": 2}))) == 8

        bare = Signature(sorts=["s"], ops={})
        assert count_structures(bare, 2, {"s": 2}, filter_mode="all") == 16
        assert (
            len(list(enumerate_structures(bare, 2, {"s": 2}, filter_mode="all"))) == 16
        )

    def test_enumeration_is_restartable(self):
        first = list(enumerate_structures(UNARY_SIG, 2, {"s": 2}, filter_mode="all"))
        second = list(enumerate_structures(UNARY_SIG, 2, {"s": 2}, filter_mode="all"))
        assert first == second
        assert len(set(first)) == len(first)

    def test_cardinality_bound(self):
        binary = Signature(sorts=["s"], ops={"m": (("s", "s"), "s")})
        with pytest.raises(BudgetError):
            next(enumerate_structures(binary, 2, {"s": 3}, max_structures=1000))


# --- countermodel search ---------------------------------------------------------


class TestCountermodelSearch:
    def test_fixed_point_equation_has_a_size_two_countermodel(self):
        eq = free_equational_presentation(UNARY_SIG)
        x = svar("x")
        goal = KFormula([f_of(x), x])
        m = countermodel_search(eq, [], goal, {"s": 2})
        assert m is not None
        assert m.carriers == {"s": 2}
        assert is_model_of(m, eq)
        assert not semantic_consequence(m, [], goal)
        # deterministic: the constant-to-0 table is the least falsifier
        assert m.op_tables["f"] == (0, 0)

    def test_reflexive_goals_have_no_countermodel(self):
        eq = free_equational_presentation(UNARY_SIG)
        x = svar("x")
        goal = KFormula([x, x])
        assert countermodel_search(eq, [], goal, {"s": 2}) is None
        assert countermodel_search(eq, [], goal, {"s": 3}) is None

    def test_distinct_variables_are_separated_in_some_model(self):
        classical = classical_presentation(TRIM_SIG)
        p, q = fvar("p"), fvar("q")
        m = countermodel_search(classical, [], KFormula([p, q]), {"f": 2})
        assert m is not None
        assert is_model_of(m, classical)
        assert not semantic_consequence(m, [], KFormula([p, q]))

    def test_candidates_are_tried_before_the_sweep(self):
        eq = free_equational_presentation(UNARY_SIG)
        x = svar("x")
        goal = KFormula([f_of(x), x])
        candidate = swap_structure()
        m = countermodel_search(eq, [], goal, {"s": 2}, candidates=[candidate])
        assert m is candidate

    def test_mismatched_candidates_are_skipped(self):
        eq = free_equational_presentation(UNARY_SIG)
        x = svar("x")
        goal = KFormula([f_of(x), x])
        m = countermodel_search(
            eq, [], goal, {"s": 2}, candidates=[boolean_2()]
        )
        assert m is not None
        assert m.signature == UNARY_SIG

    def test_budget_gate(self):
        binary = Signature(sorts=["s"], ops={"m": (("s", "s"), "s")})
        eq = free_equational_presentation(binary)
        x = Variable("x", "s")
        goal = KFormula([App("m", (x, x), "s"), x])
        with pytest.raises(BudgetError):
            countermodel_search(eq, [], goal, {"s": 3}, max_structures=100)


# --- reducts ---------------------------------------------------------------------


TWO_SORTED_SIG = Signature(
    sorts=["a", "b"],
    ops={"f": (("a",), "b"), "g": (("b",), "b"), "c": ((), "a")},
    name="TWO",
)

SOURCE_SIG = Signature(sorts=["t"], ops={"h": (("t",), "t")}, name="SRC")


class TestReduct:
    def test_identity_reduct_is_the_same_structure(self):
        m = boolean_4()
        assert reduct(m, identity_morphism(LOGIC_SIGNATURE)) == m

    def test_inclusion_reduct_forgets_operations(self):
        both = Signature(sorts=["s"], ops={"f": (("s",), "s"), "g": (("s",), "s")})
        m = FiniteKStructure(both, 2, {"s": 2}, {"f": (1, 0), "g": (0, 0)})
        r = reduct(m, inclusion_morphism(UNARY_SIG, both))
        assert r.signature == UNARY_SIG
        assert r.op_tables == {"f": (1, 0)}
        assert r.carriers == {"s": 2}

    def test_target_signature_must_match(self):
        with pytest.raises(SignatureMismatchError):
            reduct(boolean_2(), identity_morphism(UNARY_SIG))

    def test_satisfaction_transfers_along_the_morphism(self):
        rng = random.Random(17)
        sigma = SignatureMorphism(
            SOURCE_SIG, TWO_SORTED_SIG, sort_map={"t": "b"}, op_map={"h": "g"}
        )

        def source_term(depth: int):
            if depth == 0 or rng.random() < 0.4:
                return Variable(rng.choice("xyz"), "t")
            return App("h", (source_term(depth - 1),), "t")

        agreements = 0
        for _ in range(100):
            target_structure = random_structure(rng, TWO_SORTED_SIG, max_size=3)
            pulled_back = reduct(target_structure, sigma)
            premises = [
                KFormula([source_term(2), source_term(2)])
                for _ in range(rng.randint(0, 2))
            ]
            conclusion = KFormula([source_term(2), source_term(2)])
            direct = semantic_consequence(pulled_back, premises, conclusion)
            translated = semantic_consequence(
                target_structure,
                [apply_signature_morphism(sigma, p) for p in premises],
                apply_signature_morphism(sigma, conclusion),
            )
            assert direct == translated
            agreements += 1
        assert agreements == 100


# --- translation models ------------------------------------------------------------


class TestIsTauModel:
    def test_three_chain_is_a_double_negation_model_of_classical_logic(self):
        X0, X1 = placeholder(0, "f"), placeholder(1, "f")
        tau = Schematic(
            LOGIC_SIGNATURE,
            2,
            LOGIC_SIGNATURE,
            {"f": [KFormula([lnot(lnot(X0)), lnot(lnot(X1))])]},
        )
        report = is_tau_model(
            heyting_chain(3), classical_presentation(LOGIC_SIGNATURE), tau
        )
        assert report.holds is True

    def test_plain_three_chain_is_not_a_classical_model_directly(self):
        tau = translation_from_morphism(identity_morphism(LOGIC_SIGNATURE), 2)
        report = is_tau_model(
            heyting_chain(3), classical_presentation(LOGIC_SIGNATURE), tau
        )
        assert report.holds is False
        assert report.probe == Sequent([], KFormula([lor(fvar("p"), lnot(fvar("p"))), TOP]))
        assert report.assignment == {fvar("p"): 1}

    def test_swap_fails_the_collapse_axiom(self):
        tau = translation_from_morphism(identity_morphism(UNARY_SIG), 2)
        report = is_tau_model(swap_structure(), collapse_presentation(), tau)
        assert report.holds is False
        x = svar("x")
        assert report.probe == Sequent([], KFormula([f_of(x), x]))
        assert report.assignment == {x: 0}

    def test_underivable_failing_probe_is_undetermined(self):
        tau = translation_from_morphism(identity_morphism(UNARY_SIG), 2)
        x = svar("x")
        probe = Sequent([], KFormula([f_of(f_of(x)), f_of(x)]))
        report = is_tau_model(
            swap_structure(),
            free_equational_presentation(UNARY_SIG),
            tau,
            budget=Budget(2, 200, 1, 2000),
            probes=[probe],
        )
        assert report.holds is None
        assert report.probe == probe

    def test_derivable_failing_probe_is_definite(self):
        tau = translation_from_morphism(identity_morphism(UNARY_SIG), 2)
        x = svar("x")
        probe = Sequent([], KFormula([f_of(f_of(x)), x]))
        constant = FiniteKStructure(UNARY_SIG, 2, {"s": 2}, {"f": (0, 0)})
        report = is_tau_model(
            constant, collapse_presentation(), tau, probes=[probe]
        )
        assert report.holds is False
        assert report.probe == probe

    def test_structure_must_live_over_the_target(self):
        tau = translation_from_morphism(identity_morphism(UNARY_SIG), 2)
        with pytest.raises(SignatureMismatchError):
            is_tau_model(boolean_2(), collapse_presentation(), tau)


# --- fixtures behave like their textbook versions ------------------------------------


class TestFixtures:
    def test_two_chain_and_boolean_two_coincide(self):
        assert heyting_chain(2) == boolean_2()

    def test_chains_satisfy_residuation(self):
        for size in (2, 3, 4):
            m = heyting_chain(size)
            for a, b, c in itertools.product(range(size), repeat=3):
                meet_below = m.op_value("and", (a, b)) <= c
                below_imp = a <= m.op_value("imp", (b, c))
                assert meet_below == below_imp

    def test_boolean_four_satisfies_residuation(self):
        m = boolean_4()

        def leq(x, y):
            return m.op_value("or", (x, y)) == y

        for a, b, c in itertools.product(range(4), repeat=3):
            assert leq(m.op_value("and", (a, b)), c) == leq(
                a, m.op_value("imp", (b, c))
            )

    def test_interval_carries_its_approximation_label(self):
        m = saturating_interval(-2, 2)
        assert "bounded approximation" in m.name
        assert m.op_value("zero", ()) == 2

    def test_interval_must_contain_zero(self):
        with pytest.raises(SortError):
            saturating_interval(1, 3)


# --- bridge to the proof engine -------------------------------------------------------


class TestSoundnessBridge:
    def test_proved_goals_hold_in_every_bounded_model(self):
        x, y = Variable("x", "nat"), Variable("y", "nat")
        plus = lambda a, b: App("+", (a, b), "nat")
        succ = lambda a: App("s", (a,), "nat")
        zero = App("z", (), "nat")
        arithmetic = horn_presentation(
            NAT_SIG,
            eqs=[
                ("plus-zero", KFormula([plus(x, zero), x])),
                ("plus-succ", KFormula([plus(x, succ(y)), succ(plus(x, y))])),
            ],
            ceqs=[],
            name="arithmetic",
        )
        a, b, c = Variable("a", "nat"), Variable("b", "nat"), Variable("c", "nat")
        queries = [
            ([], KFormula([plus(succ(x), zero), succ(x)])),
            ([KFormula([a, b]), KFormula([b, c])], KFormula([a, c])),
            ([], KFormula([plus(x, succ(zero)), succ(plus(x, zero))])),
        ]
        budget = Budget(6, 4000, 1, 10_000)
        for premises, goal in queries:
            assert isinstance(derive(arithmetic, premises, goal, budget), Proved)

        checked = 0
        for size in (1, 2):
            for m in enumerate_structures(NAT_SIG, 2, {"nat": size}):
                if not is_model_of(m, arithmetic):
                    continue
                checked += 1
                for premises, goal in queries:
                    assert semantic_consequence(m, premises, goal)
        assert checked > 0

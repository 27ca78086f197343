"""Finite k-dimensional structures and everything done with them.

A structure interprets a signature over finite carriers (index sets
``0..n-1``), with one total row-major table per operation and, per sort,
a filter: the set of k-tuples counted as "designated".  On top of that
this module provides term evaluation, satisfaction, exhaustive semantic
consequence, model checking of presentations, deterministic bounded
enumeration, countermodel search, reducts along signature morphisms, and
translation-model checking.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from math import prod
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .deduction import Budget, Presentation, Proved, derive
from .errors import (
    BudgetError,
    SignatureMismatchError,
    SortError,
    UnassignedVariableError,
)
from .sigterm import (
    KFormula,
    Sequent,
    Signature,
    Term,
    Variable,
    free_variables,
    sequent_key,
    term_key,
)
from .translation import SignatureMorphism, Translation

__all__ = [
    "Assignment",
    "FiniteKStructure",
    "identity_filter",
    "eval_term",
    "holds",
    "semantic_consequence",
    "ModelCheckResult",
    "is_model_of",
    "count_structures",
    "enumerate_structures",
    "countermodel_search",
    "reduct",
    "TauModelReport",
    "is_tau_model",
    "LOGIC_SIGNATURE",
    "INTERVAL_SIGNATURE",
    "boolean_2",
    "heyting_chain",
    "boolean_4",
    "saturating_interval",
]


#: An assignment sends variables to carrier indices of their sort.
Assignment = Mapping[Variable, int]


def identity_filter(size: int, k: int) -> frozenset:
    """The diagonal: all constant k-tuples over a carrier of ``size``."""
    return frozenset((element,) * k for element in range(size))


class FiniteKStructure:
    """A finite interpretation of a signature plus designated k-tuples.

    ``carriers`` gives the carrier size per sort (elements are the indices
    ``0..size-1``), ``op_tables`` one flat row-major result table per
    operation (first argument most significant), and ``filters`` the
    designated set per sort — omitted filters default to the diagonal,
    which turns dimension-2 satisfaction into equality.
    """

    __slots__ = ("signature", "k", "carriers", "op_tables", "filters", "name", "_layout")

    def __init__(
        self,
        signature: Signature,
        k: int,
        carriers: Mapping[str, int],
        op_tables: Mapping[str, Sequence[int]],
        filters: Optional[Mapping[str, Iterable[tuple[int, ...]]]] = None,
        name: str = "",
    ):
        if not (isinstance(k, int) and k >= 1):
            raise SortError("dimension must be a positive integer")
        self.signature = signature
        self.k = k
        self.name = name

        sized = dict(carriers)
        if set(sized) != signature.sorts:
            raise SortError("carriers must cover exactly the signature's sorts")
        for sort, size in sized.items():
            if not (isinstance(size, int) and size >= 1):
                raise SortError(f"carrier for {sort!r} must be a positive size")
        self.carriers = sized

        tables = {}
        layout = {}
        for op, (args, result) in signature.ops.items():
            if op not in op_tables:
                raise SortError(f"missing table for operation {op!r}")
            rows = prod(sized[a] for a in args)
            table = tuple(op_tables[op])
            if len(table) != rows:
                raise SortError(
                    f"table for {op!r} has {len(table)} rows, expected {rows}"
                )
            bound = sized[result]
            if any(not (isinstance(v, int) and 0 <= v < bound) for v in table):
                raise SortError(f"table for {op!r} has out-of-carrier entries")
            tables[op] = table
            layout[op] = tuple(sized[a] for a in args)
        extra = set(op_tables) - set(tables)
        if extra:
            raise SortError(f"tables for unknown operations: {sorted(extra)}")
        self.op_tables = tables
        self._layout = layout

        if filters is None:
            chosen = {s: identity_filter(sized[s], k) for s in signature.sorts}
        else:
            if set(filters) != signature.sorts:
                raise SortError("filters must cover exactly the signature's sorts")
            chosen = {}
            for sort, tuples in filters.items():
                fixed = frozenset(tuple(t) for t in tuples)
                size = sized[sort]
                for t in fixed:
                    if len(t) != k or any(
                        not (isinstance(e, int) and 0 <= e < size) for e in t
                    ):
                        raise SortError(
                            f"filter tuple {t} for sort {sort!r} is not a "
                            f"k-tuple over the carrier"
                        )
                chosen[sort] = fixed
        self.filters = chosen

    def carrier(self, sort: str) -> range:
        return range(self.carriers[sort])

    def op_value(self, op: str, args: tuple[int, ...]) -> int:
        """Look up one table entry (row-major, first argument major)."""
        sizes = self._layout.get(op)
        if sizes is None:
            raise SortError(f"unknown operation {op!r}")
        index = 0
        for size, arg in zip(sizes, args):
            index = index * size + arg
        return self.op_tables[op][index]

    def as_dict(self) -> dict:
        """JSON-ready snapshot: carriers, flat tables, sorted filter lists."""
        return {
            "name": self.name,
            "k": self.k,
            "carriers": dict(sorted(self.carriers.items())),
            "ops": {op: list(table) for op, table in sorted(self.op_tables.items())},
            "filters": {
                sort: sorted(list(t) for t in tuples)
                for sort, tuples in sorted(self.filters.items())
            },
        }

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FiniteKStructure)
            and self.signature == other.signature
            and self.k == other.k
            and self.carriers == other.carriers
            and self.op_tables == other.op_tables
            and self.filters == other.filters
        )

    def __hash__(self) -> int:
        return hash(
            (
                self.signature,
                self.k,
                tuple(sorted(self.carriers.items())),
                tuple(sorted(self.op_tables.items())),
                tuple(sorted((s, tuple(sorted(f))) for s, f in self.filters.items())),
            )
        )

    def __repr__(self) -> str:
        label = self.name or "structure"
        sizes = ",".join(f"{s}:{n}" for s, n in sorted(self.carriers.items()))
        return f"<{label} [{sizes}] k={self.k}>"


# --------------------------------------------------------------------------
# evaluation and satisfaction


def eval_term(structure: FiniteKStructure, assignment: Assignment, term: Term) -> int:
    """Evaluate a term to a carrier index by structural recursion."""
    if isinstance(term, Variable):
        try:
            value = assignment[term]
        except KeyError:
            raise UnassignedVariableError(f"no value for {term!r}") from None
        if not 0 <= value < structure.carriers[term.sort]:
            raise SortError(f"{value} is outside the carrier of {term.sort!r}")
        return value
    return structure.op_value(
        term.op, tuple(eval_term(structure, assignment, arg) for arg in term.args)
    )


def holds(structure: FiniteKStructure, assignment: Assignment, formula: KFormula) -> bool:
    """Whether the tuple of component values lands in the sort's filter."""
    values = tuple(eval_term(structure, assignment, c) for c in formula.components)
    return values in structure.filters[formula.components[0].sort]


def _assignments(
    structure: FiniteKStructure, variables: Sequence[Variable]
) -> Iterator[dict]:
    spaces = [structure.carrier(v.sort) for v in variables]
    for values in itertools.product(*spaces):
        yield dict(zip(variables, values))


def _violation(
    structure: FiniteKStructure,
    premises: Iterable[KFormula],
    conclusion: KFormula,
) -> Optional[dict]:
    """The first assignment (in enumeration order) satisfying every premise
    but not the conclusion, or None when the consequence is valid."""
    premises = tuple(premises)
    involved: set[Variable] = set(free_variables(conclusion))
    for premise in premises:
        involved |= free_variables(premise)
    variables = sorted(involved, key=term_key)
    for assignment in _assignments(structure, variables):
        if all(holds(structure, assignment, p) for p in premises) and not holds(
            structure, assignment, conclusion
        ):
            return assignment
    return None


def semantic_consequence(
    structure: FiniteKStructure,
    premises: Iterable[KFormula],
    conclusion: KFormula,
) -> bool:
    """Exhaustive consequence check: every assignment satisfying all of
    ``premises`` must satisfy ``conclusion``."""
    return _violation(structure, premises, conclusion) is None


@dataclass(frozen=True)
class ModelCheckResult:
    """Verdict of checking a structure against a presentation; when it is
    not a model, names the first violated item and a falsifying assignment."""

    is_model: bool
    violated: Optional[str] = None
    assignment: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.is_model


def is_model_of(
    structure: FiniteKStructure, presentation: Presentation
) -> ModelCheckResult:
    """Check every axiom and rule of the presentation for validity."""
    if structure.signature != presentation.signature:
        raise SignatureMismatchError(
            "structure and presentation are over different signatures"
        )
    if structure.k != presentation.k:
        raise SignatureMismatchError(
            f"structure has dimension {structure.k}, presentation {presentation.k}"
        )
    for axiom in presentation.axioms:
        found = _violation(structure, (), axiom.formula)
        if found is not None:
            return ModelCheckResult(False, axiom.name, found)
    for rule in presentation.rules:
        found = _violation(structure, rule.sequent.premises, rule.sequent.conclusion)
        if found is not None:
            return ModelCheckResult(False, rule.name, found)
    return ModelCheckResult(True)


# --------------------------------------------------------------------------
# bounded enumeration


def _check_sizes(signature: Signature, size_map: Mapping[str, int]) -> dict[str, int]:
    sizes = dict(size_map)
    if set(sizes) != signature.sorts:
        raise SortError("size_map must cover exactly the signature's sorts")
    for sort, size in sizes.items():
        if not (isinstance(size, int) and size >= 1):
            raise SortError(f"size for {sort!r} must be >= 1")
    return sizes


def count_structures(
    signature: Signature,
    k: int,
    size_map: Mapping[str, int],
    filter_mode: str = "identity",
) -> int:
    """Closed-form number of structures at exactly these carrier sizes."""
    sizes = _check_sizes(signature, size_map)
    total = 1
    for args, result in signature.ops.values():
        rows = prod(sizes[a] for a in args)
        total *= sizes[result] ** rows
    if filter_mode == "all":
        for sort in signature.sorts:
            total *= 2 ** (sizes[sort] ** k)
    elif filter_mode != "identity":
        raise ValueError(f"unknown filter_mode {filter_mode!r}")
    return total


def _table_from_digit(digit: int, rows: int, base: int) -> tuple[int, ...]:
    out = [0] * rows
    for i in range(rows - 1, -1, -1):
        digit, out[i] = divmod(digit, base)
    return tuple(out)


def enumerate_structures(
    signature: Signature,
    k: int,
    size_map: Mapping[str, int],
    filter_mode: str = "identity",
    max_structures: int = 1_000_000,
) -> Iterator[FiniteKStructure]:
    """All structures at exactly the given carrier sizes, in a fixed total
    order: operation tables vary lexicographically (operations in name
    order, each table row-major), then — with ``filter_mode="all"`` —
    filters vary as binary masks over the lexicographic tuple space.
    ``filter_mode="identity"`` keeps every filter at the diagonal.

    Raises :class:`BudgetError` up front when the closed-form count
    exceeds ``max_structures``.
    """
    sizes = _check_sizes(signature, size_map)
    total = count_structures(signature, k, sizes, filter_mode)
    if total > max_structures:
        raise BudgetError(
            f"{total} structures at sizes {sorted(sizes.items())} exceed the "
            f"bound of {max_structures}"
        )

    components: list[tuple[str, tuple, int]] = []
    for op in sorted(signature.ops):
        args, result = signature.ops[op]
        rows = prod(sizes[a] for a in args)
        components.append(("table", (op, rows, sizes[result]), sizes[result] ** rows))
    if filter_mode == "all":
        for sort in sorted(signature.sorts):
            tuples = list(itertools.product(range(sizes[sort]), repeat=k))
            components.append(("filter", (sort, tuples), 2 ** len(tuples)))

    for index in range(total):
        remainder = index
        digits: dict[int, int] = {}
        for position in range(len(components) - 1, -1, -1):
            remainder, digits[position] = divmod(remainder, components[position][2])
        op_tables = {}
        filters = {s: identity_filter(sizes[s], k) for s in signature.sorts}
        for position, (kind, payload, _) in enumerate(components):
            if kind == "table":
                op, rows, base = payload
                op_tables[op] = _table_from_digit(digits[position], rows, base)
            else:
                sort, tuples = payload
                mask = digits[position]
                filters[sort] = frozenset(
                    t for i, t in enumerate(tuples) if mask >> i & 1
                )
        yield FiniteKStructure(signature, k, sizes, op_tables, filters)


def countermodel_search(
    presentation: Presentation,
    premises: Iterable[KFormula],
    conclusion: KFormula,
    size_map: Mapping[str, int],
    filter_mode: str = "identity",
    candidates: Iterable[FiniteKStructure] = (),
    max_structures: int = 1_000_000,
    time_cap_ms: Optional[int] = None,
) -> Optional[FiniteKStructure]:
    """Search for a model of the presentation falsifying the consequence.

    Candidate structures are tried first, in the order given; then all
    carrier-size combinations up to ``size_map`` are swept smallest-total
    first, each enumerated exhaustively, and the first hit is returned —
    so the result is deterministic.  Every returned structure satisfies
    ``is_model_of`` and falsifies ``semantic_consequence``; ``None`` means
    the bounded space holds no countermodel (inconclusive), either because
    it was exhausted or because ``time_cap_ms`` ran out mid-sweep.
    """
    premises = tuple(premises)
    deadline = None if time_cap_ms is None else time.monotonic() + time_cap_ms / 1000.0

    def refutes(structure: FiniteKStructure) -> bool:
        return bool(is_model_of(structure, presentation)) and not semantic_consequence(
            structure, premises, conclusion
        )

    for candidate in candidates:
        if (
            candidate.signature == presentation.signature
            and candidate.k == presentation.k
            and refutes(candidate)
        ):
            return candidate

    signature = presentation.signature
    sorts = sorted(signature.sorts)
    bounds = _check_sizes(signature, size_map)
    combos = sorted(
        itertools.product(*(range(1, bounds[s] + 1) for s in sorts)),
        key=lambda combo: (sum(combo), combo),
    )
    total = sum(
        count_structures(signature, presentation.k, dict(zip(sorts, combo)), filter_mode)
        for combo in combos
    )
    if total > max_structures:
        raise BudgetError(
            f"sweeping sizes up to {sorted(bounds.items())} means {total} "
            f"structures, over the bound of {max_structures}"
        )
    for combo in combos:
        for structure in enumerate_structures(
            signature, presentation.k, dict(zip(sorts, combo)), filter_mode, max_structures
        ):
            if deadline is not None and time.monotonic() > deadline:
                return None
            if refutes(structure):
                return structure
    return None


# --------------------------------------------------------------------------
# reducts and translation models


def reduct(structure: FiniteKStructure, morphism: SignatureMorphism) -> FiniteKStructure:
    """Pull a structure back along a morphism: interpret each source sort
    and operation by the interpretation of its image."""
    if morphism.target != structure.signature:
        raise SignatureMismatchError(
            "the morphism's target must be the structure's signature"
        )
    carriers = {s: structure.carriers[morphism.sort_map[s]] for s in morphism.source.sorts}
    tables = {f: structure.op_tables[morphism.op_map[f]] for f in morphism.source.ops}
    filters = {s: structure.filters[morphism.sort_map[s]] for s in morphism.source.sorts}
    return FiniteKStructure(
        morphism.source, structure.k, carriers, tables, filters, name=structure.name
    )


@dataclass(frozen=True)
class TauModelReport:
    """Three-valued outcome of translation-model checking.

    ``holds`` is True, False, or None (undetermined: some probe failed in
    the structure but could not be confirmed as a consequence of the
    presentation within budget).  Failures carry the probe, the failing
    translated sequent, and a falsifying assignment.
    """

    holds: Optional[bool]
    probe: Optional[Sequent] = None
    translated: Optional[Sequent] = None
    assignment: Optional[dict] = None


def is_tau_model(
    structure: FiniteKStructure,
    presentation: Presentation,
    translation: Translation,
    budget: Optional[Budget] = None,
    probes: Optional[Iterable[Sequent]] = None,
) -> TauModelReport:
    """Check that the structure satisfies the translation of everything the
    presentation is known to entail.

    The default probe set is the presentation's own axioms and rules,
    which it entails trivially, so the outcome is then always definite.
    Custom probes failing in the structure are confirmed against the
    presentation — verbatim membership first, bounded derivation second —
    and report None when that confirmation runs out of budget.
    """
    if structure.signature != translation.target:
        raise SignatureMismatchError("structure must live over the translation's target")
    if structure.k != translation.l:
        raise SignatureMismatchError(
            f"structure has dimension {structure.k}, translated formulas {translation.l}"
        )
    if presentation.signature != translation.source or presentation.k != translation.k:
        raise SignatureMismatchError(
            "presentation must live over the translation's source"
        )

    if probes is None:
        probe_list = [(Sequent((), a.formula), True) for a in presentation.axioms]
        probe_list += [(r.sequent, True) for r in presentation.rules]
    else:
        axiom_formulas = {a.formula for a in presentation.axioms}
        rule_sequents = {r.sequent for r in presentation.rules}
        probe_list = [
            (
                probe,
                (not probe.premises and probe.conclusion in axiom_formulas)
                or probe in rule_sequents,
            )
            for probe in probes
        ]

    undetermined: Optional[TauModelReport] = None
    for probe, known in probe_list:
        for image in sorted(translation.translate_sequent(probe), key=sequent_key):
            found = _violation(structure, image.premises, image.conclusion)
            if found is None:
                continue
            entailed = known
            if not entailed:
                verdict = derive(
                    presentation,
                    list(probe.premises),
                    probe.conclusion,
                    budget if budget is not None else Budget(),
                )
                entailed = isinstance(verdict, Proved)
            if entailed:
                return TauModelReport(False, probe, image, found)
            if undetermined is None:
                undetermined = TauModelReport(None, probe, image, found)
    return undetermined if undetermined is not None else TauModelReport(True)


# --------------------------------------------------------------------------
# fixtures


LOGIC_SIGNATURE = Signature(
    sorts=["f"],
    ops={
        "and": (("f", "f"), "f"),
        "or": (("f", "f"), "f"),
        "imp": (("f", "f"), "f"),
        "not": (("f",), "f"),
        "top": ((), "f"),
        "bot": ((), "f"),
    },
    name="LOGIC",
)

INTERVAL_SIGNATURE = Signature(
    sorts=["int"],
    ops={
        "+": (("int", "int"), "int"),
        "-": (("int", "int"), "int"),
        "zero": ((), "int"),
    },
    name="INTERVAL",
)


def _binary_table(size: int, fn) -> tuple[int, ...]:
    return tuple(fn(a, b) for a in range(size) for b in range(size))


def _chain_tables(size: int) -> dict[str, tuple[int, ...]]:
    top = size - 1

    def imp(a: int, b: int) -> int:
        return top if a <= b else b

    return {
        "and": _binary_table(size, min),
        "or": _binary_table(size, max),
        "imp": _binary_table(size, imp),
        "not": tuple(imp(a, 0) for a in range(size)),
        "top": (top,),
        "bot": (0,),
    }


def heyting_chain(size: int, k: int = 2) -> FiniteKStructure:
    """The ``size``-element chain 0 < 1 < … with meet/join as min/max and
    relative pseudo-complement implication; diagonal filter."""
    if size < 1:
        raise SortError("a chain needs at least one element")
    return FiniteKStructure(
        LOGIC_SIGNATURE, k, {"f": size}, _chain_tables(size), name=f"heyting-{size}"
    )


def boolean_2(k: int = 2) -> FiniteKStructure:
    """The two-element Boolean algebra (same tables as the 2-chain)."""
    return FiniteKStructure(
        LOGIC_SIGNATURE, k, {"f": 2}, _chain_tables(2), name="boolean-2"
    )


def boolean_4(k: int = 2) -> FiniteKStructure:
    """The four-element Boolean algebra: elements are bit pairs, operations
    act bitwise."""
    tables = {
        "and": _binary_table(4, lambda a, b: a & b),
        "or": _binary_table(4, lambda a, b: a | b),
        "imp": _binary_table(4, lambda a, b: (a ^ 3) | b),
        "not": tuple(a ^ 3 for a in range(4)),
        "top": (3,),
        "bot": (0,),
    }
    return FiniteKStructure(LOGIC_SIGNATURE, k, {"f": 4}, tables, name="boolean-4")


def saturating_interval(
    lo: int, hi: int, k: int = 2, order_filter: bool = False
) -> FiniteKStructure:
    """Integers ``lo..hi`` with addition and subtraction clamped at the
    ends — a finite stand-in for the unbounded integers, hence the
    "bounded approximation" label.  With ``order_filter`` the filter is
    the ≤ relation on pairs instead of the diagonal.
    """
    if lo > hi:
        raise SortError("empty interval")
    if not lo <= 0 <= hi:
        raise SortError("the interval must contain zero")
    size = hi - lo + 1

    def clamp(value: int) -> int:
        return min(hi, max(lo, value)) - lo

    tables = {
        "+": _binary_table(size, lambda a, b: clamp((lo + a) + (lo + b))),
        "-": _binary_table(size, lambda a, b: clamp((lo + a) - (lo + b))),
        "zero": (clamp(0),),
    }
    filters = None
    if order_filter:
        if k != 2:
            raise SortError("the order filter is a relation on pairs")
        filters = {
            "int": frozenset(
                (a, b) for a in range(size) for b in range(size) if a <= b
            )
        }
    return FiniteKStructure(
        INTERVAL_SIGNATURE,
        k,
        {"int": size},
        tables,
        filters,
        name=f"int[{lo}..{hi}] (bounded approximation)",
    )

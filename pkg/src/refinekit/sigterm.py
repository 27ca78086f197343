"""Many-sorted signatures, terms, k-formulas, sequents and substitutions.

The vocabulary is deliberately small: a signature fixes sorts and typed
operation symbols, terms are variables or applications, a k-formula is a
tuple of k terms sharing one sort, and a sequent pairs a finite premise
set with a conclusion.  Everything is immutable and hashable so the
upper layers can throw these objects into sets and dictionaries freely.

Matching here is one-sided (pattern against subject).  Unification is
deliberately not provided: direct derivability only ever needs to match
rule schemas against concrete formulas.  Frozen variables act as
constants — they match only themselves and no substitution may rebind
them.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .errors import DimensionMismatchError, FrozenVariableError, SortError

__all__ = [
    "Signature",
    "Variable",
    "App",
    "Term",
    "KFormula",
    "Sequent",
    "Substitution",
    "apply_substitution",
    "check_well_sorted",
    "free_variables",
    "iter_variables",
    "subterms",
    "substitute_term",
    "match",
    "match_formula",
    "alpha_equivalent",
    "alpha_renaming",
    "canonicalize",
    "canonical_renaming",
    "freeze_formula",
    "freeze_named",
    "term_key",
    "formula_key",
    "sequent_key",
]


class Signature:
    """A many-sorted signature: sort names plus typed operation symbols.

    ``ops`` maps each operation name to a ``(arg_sorts, result_sort)``
    pair.  There is no overloading and no subsorting; an operation name
    has exactly one profile.
    """

    __slots__ = ("name", "sorts", "ops", "_hash")

    def __init__(
        self,
        sorts: Iterable[str],
        ops: Mapping[str, tuple[Sequence[str], str]],
        name: str = "",
    ):
        self.name = name
        self.sorts = frozenset(sorts)
        if not self.sorts:
            raise SortError("a signature needs at least one sort")
        normalized = {}
        for op, (args, result) in ops.items():
            args = tuple(args)
            for s in args:
                if s not in self.sorts:
                    raise SortError(f"operation {op!r}: unknown argument sort {s!r}")
            if result not in self.sorts:
                raise SortError(f"operation {op!r}: unknown result sort {result!r}")
            normalized[op] = (args, result)
        self.ops = normalized
        self._hash = hash((self.sorts, tuple(sorted(self.ops.items()))))

    def profile(self, op: str) -> tuple[tuple[str, ...], str]:
        try:
            return self.ops[op]
        except KeyError:
            raise SortError(f"unknown operation {op!r}") from None

    def arity(self, op: str) -> int:
        return len(self.profile(op)[0])

    def result_sort(self, op: str) -> str:
        return self.profile(op)[1]

    def is_subsignature_of(self, other: "Signature") -> bool:
        """True when every sort and operation of self occurs verbatim in
        other, with the same profile."""
        if not self.sorts <= other.sorts:
            return False
        return all(other.ops.get(op) == prof for op, prof in self.ops.items())

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Signature)
            and self.sorts == other.sorts
            and self.ops == other.ops
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        label = self.name or "Signature"
        return f"<{label}: {len(self.sorts)} sorts, {len(self.ops)} ops>"


class Variable:
    """A sorted variable.  ``frozen`` variables behave like constants
    during matching and may never appear in a substitution's domain."""

    __slots__ = ("name", "sort", "frozen", "_hash")

    size = 1
    depth = 0

    def __init__(self, name: str, sort: str, frozen: bool = False):
        self.name = name
        self.sort = sort
        self.frozen = frozen
        self._hash = hash((name, sort, frozen))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, Variable)
            and self._hash == other._hash
            and self.name == other.name
            and self.sort == other.sort
            and self.frozen == other.frozen
        )

    def __hash__(self) -> int:
        return self._hash

    def thawed(self) -> "Variable":
        return self if not self.frozen else Variable(self.name, self.sort)

    def frozen_copy(self) -> "Variable":
        return self if self.frozen else Variable(self.name, self.sort, frozen=True)

    def __repr__(self) -> str:
        mark = "*" if self.frozen else ""
        return f"{self.name}{mark}:{self.sort}"


class App:
    """An operation applied to argument terms.  The result sort is
    stored on the node so evaluation and sorting never re-derive it."""

    __slots__ = ("op", "args", "sort", "size", "depth", "_hash")

    def __init__(self, op: str, args: Sequence["Term"], sort: str):
        self.op = op
        self.args = tuple(args)
        self.sort = sort
        size = 1
        depth = 0
        for a in self.args:
            size += a.size
            if a.depth > depth:
                depth = a.depth
        self.size = size
        self.depth = depth + 1
        self._hash = hash((op, self.args))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, App)
            and self._hash == other._hash
            and self.op == other.op
            and self.args == other.args
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        if not self.args:
            return self.op
        return f"{self.op}({', '.join(map(repr, self.args))})"


Term = Union[Variable, App]


def check_well_sorted(signature: Signature, term: Term) -> str:
    """Return the sort of ``term``, raising :class:`SortError` if any
    application violates the signature."""
    if isinstance(term, Variable):
        if term.sort not in signature.sorts:
            raise SortError(f"variable {term!r} has unknown sort")
        return term.sort
    arg_sorts, result = signature.profile(term.op)
    if len(arg_sorts) != len(term.args):
        raise SortError(
            f"{term.op!r} expects {len(arg_sorts)} arguments, got {len(term.args)}"
        )
    for expected, arg in zip(arg_sorts, term.args):
        actual = check_well_sorted(signature, arg)
        if actual != expected:
            raise SortError(
                f"{term.op!r}: argument {arg!r} has sort {actual}, expected {expected}"
            )
    if term.sort != result:
        raise SortError(f"{term.op!r}: node labelled {term.sort}, profile says {result}")
    return result


def iter_variables(term: Term) -> Iterator[Variable]:
    """Yield variables in first-occurrence (left-to-right) order, with
    repetitions."""
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Variable):
            yield t
        else:
            stack.extend(reversed(t.args))


def free_variables(obj: Union[Term, "KFormula", "Sequent"]) -> set[Variable]:
    out: set[Variable] = set()
    for t in _component_terms(obj):
        out.update(iter_variables(t))
    return out


def _component_terms(obj: Union[Term, "KFormula", "Sequent"]) -> Iterator[Term]:
    if isinstance(obj, (Variable, App)):
        yield obj
    elif isinstance(obj, KFormula):
        yield from obj.components
    elif isinstance(obj, Sequent):
        for f in obj.premises:
            yield from f.components
        yield from obj.conclusion.components
    else:  # pragma: no cover - defensive
        raise TypeError(f"cannot walk {obj!r}")


def subterms(term: Term) -> Iterator[Term]:
    """All subterms, including the term itself (pre-order)."""
    stack = [term]
    while stack:
        t = stack.pop()
        yield t
        if isinstance(t, App):
            stack.extend(reversed(t.args))


class KFormula:
    """A k-tuple of terms of one shared sort."""

    __slots__ = ("components", "sort", "_hash")

    def __init__(self, components: Sequence[Term]):
        components = tuple(components)
        if not components:
            raise DimensionMismatchError("a formula needs at least one component")
        sort = components[0].sort
        for c in components[1:]:
            if c.sort != sort:
                raise SortError(
                    f"formula components mix sorts {sort} and {c.sort}"
                )
        self.components = components
        self.sort = sort
        self._hash = hash(components)

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def size(self) -> int:
        return sum(c.size for c in self.components)

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, KFormula)
            and self._hash == other._hash
            and self.components == other.components
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return "<" + ", ".join(map(repr, self.components)) + ">"


class Sequent:
    """A finite premise set together with one conclusion k-formula.

    Premises are stored as a sorted, de-duplicated tuple so two sequents
    with the same premise *set* compare equal.
    """

    __slots__ = ("premises", "conclusion", "_hash")

    def __init__(self, premises: Iterable[KFormula], conclusion: KFormula):
        prems = tuple(sorted(set(premises), key=formula_key))
        k = conclusion.k
        for p in prems:
            if p.k != k:
                raise DimensionMismatchError(
                    f"premise of dimension {p.k} in a {k}-dimensional sequent"
                )
        self.premises = prems
        self.conclusion = conclusion
        self._hash = hash((prems, conclusion))

    @property
    def k(self) -> int:
        return self.conclusion.k

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Sequent)
            and self._hash == other._hash
            and self.premises == other.premises
            and self.conclusion == other.conclusion
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        if not self.premises:
            return f"|- {self.conclusion!r}"
        return ", ".join(map(repr, self.premises)) + f" |- {self.conclusion!r}"


def substitute_term(mapping: Mapping[Variable, Term], term: Term) -> Term:
    """Apply a variable-to-term mapping simultaneously (no re-substitution
    inside images)."""
    if isinstance(term, Variable):
        return mapping.get(term, term)
    changed = False
    new_args = []
    for a in term.args:
        na = substitute_term(mapping, a)
        if na is not a:
            changed = True
        new_args.append(na)
    return App(term.op, new_args, term.sort) if changed else term


class Substitution:
    """A finite, sort-respecting map from plain variables to terms.

    Frozen variables are constants: placing one in the domain raises
    :class:`FrozenVariableError`.
    """

    __slots__ = ("mapping", "_hash")

    def __init__(self, mapping: Mapping[Variable, Term]):
        cleaned = {}
        for var, image in mapping.items():
            if var.frozen:
                raise FrozenVariableError(f"substitution rebinds frozen {var!r}")
            if var.sort != image.sort:
                raise SortError(
                    f"substitution maps {var!r} to a term of sort {image.sort}"
                )
            if image != var:
                cleaned[var] = image
        self.mapping = cleaned
        self._hash = hash(tuple(sorted(cleaned.items(), key=lambda kv: term_key(kv[0]))))

    @classmethod
    def identity(cls) -> "Substitution":
        return cls({})

    def __call__(self, obj):
        if isinstance(obj, (Variable, App)):
            return substitute_term(self.mapping, obj)
        if isinstance(obj, KFormula):
            return KFormula([substitute_term(self.mapping, c) for c in obj.components])
        if isinstance(obj, Sequent):
            return Sequent([self(p) for p in obj.premises], self(obj.conclusion))
        raise TypeError(f"cannot substitute into {obj!r}")

    def compose(self, inner: "Substitution") -> "Substitution":
        """``(self.compose(inner))(t) == self(inner(t))`` for every term."""
        out = {v: self(t) for v, t in inner.mapping.items()}
        for v, t in self.mapping.items():
            if v not in out:
                out[v] = t
        return Substitution(out)

    def restricted(self, variables: Iterable[Variable]) -> "Substitution":
        keep = set(variables)
        return Substitution({v: t for v, t in self.mapping.items() if v in keep})

    def items(self):
        return self.mapping.items()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Substitution) and self.mapping == other.mapping

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.mapping)

    def __repr__(self) -> str:
        inside = ", ".join(
            f"{v!r} -> {t!r}"
            for v, t in sorted(self.mapping.items(), key=lambda kv: term_key(kv[0]))
        )
        return "{" + inside + "}"


def apply_substitution(theta: "Substitution", obj):
    """Functional spelling of ``theta(obj)``."""
    return theta(obj)


def match(pattern, subject, bindings: Optional[dict] = None) -> Optional[dict]:
    """One-sided first-order matching of terms or k-formulas.

    Returns a variable-to-term dict ``theta`` with ``theta(pattern) ==
    subject`` and domain inside the pattern's plain variables, or None.
    Frozen variables in the pattern only match themselves; any variable
    in the subject is treated as an opaque constant.
    """
    if isinstance(pattern, KFormula):
        if not isinstance(subject, KFormula):
            return None
        return match_formula(pattern, subject, bindings)
    theta = {} if bindings is None else bindings
    stack = [(pattern, subject)]
    while stack:
        p, s = stack.pop()
        if isinstance(p, Variable):
            if p.frozen:
                if p != s:
                    return None
                continue
            if p.sort != s.sort:
                return None
            bound = theta.get(p)
            if bound is None:
                theta[p] = s
            elif bound != s:
                return None
        else:
            if not isinstance(s, App) or p.op != s.op or len(p.args) != len(s.args):
                return None
            stack.extend(zip(p.args, s.args))
    return theta


def match_formula(
    pattern: KFormula, subject: KFormula, bindings: Optional[dict] = None
) -> Optional[dict]:
    if pattern.k != subject.k:
        return None
    theta = {} if bindings is None else bindings
    for p, s in zip(pattern.components, subject.components):
        if match(p, s, theta) is None:
            return None
    return theta


def alpha_renaming(left: KFormula, right: KFormula) -> Optional[dict[Variable, Variable]]:
    """The bijective plain-variable renaming turning ``left`` into
    ``right``, or None.  Frozen variables must agree verbatim."""
    if left.k != right.k:
        return None
    fwd: dict[Variable, Variable] = {}
    bwd: dict[Variable, Variable] = {}
    stack = list(zip(left.components, right.components))
    while stack:
        a, b = stack.pop()
        if isinstance(a, Variable) or isinstance(b, Variable):
            if not isinstance(a, Variable) or not isinstance(b, Variable):
                return None
            if a.frozen or b.frozen:
                if a != b:
                    return None
                continue
            if a.sort != b.sort:
                return None
            if fwd.setdefault(a, b) != b or bwd.setdefault(b, a) != a:
                return None
        else:
            if a.op != b.op or len(a.args) != len(b.args):
                return None
            stack.extend(zip(a.args, b.args))
    return fwd


def alpha_equivalent(left: KFormula, right: KFormula) -> bool:
    """True when the formulas differ only by a bijective renaming of
    their plain variables."""
    return alpha_renaming(left, right) is not None


def canonical_renaming(obj: Union[KFormula, Sequent]) -> dict[Variable, Variable]:
    """The renaming used by :func:`canonicalize`: plain variables become
    ``v0``, ``v1``, ... per sort, numbered by first occurrence."""
    counters: dict[str, int] = {}
    renaming: dict[Variable, Variable] = {}
    for term in _component_terms(obj):
        for var in iter_variables(term):
            if var.frozen:
                raise FrozenVariableError(f"cannot canonicalize frozen {var!r}")
            if var not in renaming:
                index = counters.get(var.sort, 0)
                counters[var.sort] = index + 1
                renaming[var] = Variable(f"v{index}", var.sort)
    return renaming


def canonicalize(formula: KFormula) -> KFormula:
    """Rename plain variables to the fixed ``v0, v1, ...`` palette (per
    sort, in first-occurrence order).  Idempotent; raises
    :class:`FrozenVariableError` when a frozen variable is present."""
    renaming = canonical_renaming(formula)
    if all(v == w for v, w in renaming.items()):
        return formula
    return KFormula([substitute_term(renaming, c) for c in formula.components])


def freeze_named(obj, names: set[tuple[str, str]]):
    """Freeze every plain variable whose (name, sort) pair is listed."""

    def walk(term: Term) -> Term:
        if isinstance(term, Variable):
            if not term.frozen and (term.name, term.sort) in names:
                return term.frozen_copy()
            return term
        new_args = [walk(a) for a in term.args]
        if all(n is o for n, o in zip(new_args, term.args)):
            return term
        return App(term.op, new_args, term.sort)

    if isinstance(obj, (Variable, App)):
        return walk(obj)
    if isinstance(obj, KFormula):
        return KFormula([walk(c) for c in obj.components])
    if isinstance(obj, Sequent):
        return Sequent(
            [freeze_named(p, names) for p in obj.premises],
            freeze_named(obj.conclusion, names),
        )
    raise TypeError(f"cannot freeze {obj!r}")


def freeze_formula(formula: KFormula) -> KFormula:
    """Freeze every variable of the formula."""
    names = {(v.name, v.sort) for v in free_variables(formula)}
    return freeze_named(formula, names)


# ---------------------------------------------------------------------------
# Deterministic orderings.  Everything downstream that needs "pick the
# least" or "enumerate in a reproducible order" keys off these.


def term_key(term: Term):
    if isinstance(term, Variable):
        return (term.size, 0, term.sort, term.frozen, term.name)
    return (
        term.size,
        1,
        term.sort,
        False,
        term.op,
        tuple(term_key(a) for a in term.args),
    )


def formula_key(formula: KFormula):
    return (
        formula.size,
        formula.sort,
        tuple(term_key(c) for c in formula.components),
    )


def sequent_key(seq: Sequent):
    return (
        len(seq.premises),
        formula_key(seq.conclusion),
        tuple(formula_key(p) for p in seq.premises),
    )

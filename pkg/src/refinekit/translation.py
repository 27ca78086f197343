"""Signature morphisms and finite-image formula translations.

A translation maps every k-formula over a source signature to a finite,
nonempty set of l-formulas over a target signature.  Four shapes cover
everything the rest of the library needs:

* :class:`Schematic` — substitute the input's components into a fixed set
  of target templates, selected by the input's sort.
* :class:`TermHomomorphic` — rewrite the input bottom-up, one template
  set per operation, combining component images as a Cartesian product.
* :class:`MorphismInduced` — apply a :class:`SignatureMorphism`
  homomorphically (always a singleton image).
* :class:`Composed` — relational composition of two translations.

:func:`associated_function` additionally folds a multi-formula image
into a single conjunction, producing a functional translation.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    DimensionMismatchError,
    EmptyImageError,
    InterfaceMismatchError,
    MissingTemplateError,
    NotSelfTranslationError,
    SortError,
)
from .sigterm import (
    App,
    KFormula,
    Sequent,
    Signature,
    Substitution,
    Term,
    Variable,
    apply_substitution,
    canonicalize,
    check_well_sorted,
    formula_key,
    free_variables,
    iter_variables,
    substitute_term,
    term_key,
)

__all__ = [
    "SignatureMorphism",
    "identity_morphism",
    "inclusion_morphism",
    "apply_signature_morphism",
    "Translation",
    "Schematic",
    "TermHomomorphic",
    "MorphismInduced",
    "Composed",
    "placeholder",
    "hole",
    "translate_formula",
    "translate_sequent",
    "translation_from_morphism",
    "compose_translations",
    "associated_function",
    "check_substitution_commutation",
    "CommutationReport",
    "images_equal",
]


# --------------------------------------------------------------------------
# signature morphisms


class SignatureMorphism:
    """A profile-preserving map between signatures.

    ``sort_map`` sends every source sort to a target sort and ``op_map``
    sends every source operation to a target operation whose profile is
    the image of the source profile.  ``var_map`` optionally renames
    variables; its keys are ``(name, source_sort)`` pairs and unlisted
    variables keep their name while moving to the image sort.  Omitting
    ``sort_map`` or ``op_map`` means "same name in the target".

    The variable component must stay injective.  Explicit ``var_map``
    entries are checked; with identity naming this additionally requires
    an injective ``sort_map``, which every morphism built here has.
    """

    __slots__ = ("source", "target", "sort_map", "op_map", "var_map", "name")

    def __init__(
        self,
        source: Signature,
        target: Signature,
        sort_map: Optional[Mapping[str, str]] = None,
        op_map: Optional[Mapping[str, str]] = None,
        var_map: Optional[Mapping[tuple[str, str], str]] = None,
        name: str = "",
    ):
        self.source = source
        self.target = target
        self.name = name

        smap = dict(sort_map) if sort_map is not None else {s: s for s in source.sorts}
        for s in source.sorts:
            if s not in smap:
                raise SortError(f"sort_map is missing source sort {s!r}")
            if smap[s] not in target.sorts:
                raise SortError(f"sort_map sends {s!r} to unknown sort {smap[s]!r}")
        self.sort_map = {s: smap[s] for s in source.sorts}

        omap = dict(op_map) if op_map is not None else {f: f for f in source.ops}
        for f, (args, result) in source.ops.items():
            if f not in omap:
                raise SortError(f"op_map is missing source operation {f!r}")
            image = omap[f]
            expected = (tuple(self.sort_map[a] for a in args), self.sort_map[result])
            if target.ops.get(image) != expected:
                raise SortError(
                    f"op_map does not preserve the profile of {f!r}: "
                    f"{image!r} should have profile {expected}"
                )
        self.op_map = {f: omap[f] for f in source.ops}

        self.var_map = dict(var_map) if var_map else {}
        seen: dict[tuple[str, str], tuple[str, str]] = {}
        for (vname, vsort), tname in self.var_map.items():
            if vsort not in source.sorts:
                raise SortError(f"var_map key ({vname!r}, {vsort!r}): unknown sort")
            image = (tname, self.sort_map[vsort])
            if seen.setdefault(image, (vname, vsort)) != (vname, vsort):
                raise SortError(f"var_map is not injective at {image}")

    def __call__(self, obj):
        return apply_signature_morphism(self, obj)

    def __repr__(self) -> str:
        label = self.name or "SignatureMorphism"
        return f"<{label}: {self.source!r} -> {self.target!r}>"


def identity_morphism(signature: Signature, name: str = "") -> SignatureMorphism:
    """The identity morphism on ``signature``."""
    return SignatureMorphism(signature, signature, name=name)


def inclusion_morphism(
    source: Signature, target: Signature, name: str = ""
) -> SignatureMorphism:
    """The inclusion of a subsignature into a larger one."""
    if not source.is_subsignature_of(target):
        raise SortError("inclusion requires the source to be a subsignature of the target")
    return SignatureMorphism(source, target, name=name)


def _morphism_var(morphism: SignatureMorphism, var: Variable) -> Variable:
    name = morphism.var_map.get((var.name, var.sort), var.name)
    return Variable(name, morphism.sort_map[var.sort], frozen=var.frozen)


def _morphism_term(morphism: SignatureMorphism, term: Term) -> Term:
    if isinstance(term, Variable):
        return _morphism_var(morphism, term)
    args = tuple(_morphism_term(morphism, arg) for arg in term.args)
    op = morphism.op_map.get(term.op)
    if op is None:
        raise SortError(f"operation {term.op!r} is not in the morphism's source")
    return App(op, args, morphism.sort_map[term.sort])


def apply_signature_morphism(morphism: SignatureMorphism, obj):
    """Homomorphic image of a term, formula, or sequent under a morphism."""
    if isinstance(obj, (Variable, App)):
        return _morphism_term(morphism, obj)
    if isinstance(obj, KFormula):
        return KFormula([_morphism_term(morphism, c) for c in obj.components])
    if isinstance(obj, Sequent):
        return Sequent(
            [apply_signature_morphism(morphism, p) for p in obj.premises],
            apply_signature_morphism(morphism, obj.conclusion),
        )
    raise TypeError(f"cannot apply a signature morphism to {type(obj).__name__}")


# --------------------------------------------------------------------------
# translations


class Translation:
    """Base class: a finite-image map from k-formulas to sets of l-formulas.

    Subclasses implement :meth:`_image`; the public entry points validate
    dimensions and well-sortedness on both sides of the map.
    """

    __slots__ = ("source", "k", "target", "l", "name")

    def __init__(
        self, source: Signature, k: int, target: Signature, l: int, name: str = ""
    ):
        if not (isinstance(k, int) and k >= 1 and isinstance(l, int) and l >= 1):
            raise DimensionMismatchError("translation dimensions must be >= 1")
        self.source = source
        self.k = k
        self.target = target
        self.l = l
        self.name = name

    # -- to be provided by each variant
    def _image(self, formula: KFormula) -> Iterable[KFormula]:
        raise NotImplementedError

    def _sample_sorts(self) -> list[str]:
        """Sorts at which random commutation probes are generated."""
        return sorted(self.source.sorts)

    def translate_formula(self, formula: KFormula) -> frozenset[KFormula]:
        if formula.k != self.k:
            raise DimensionMismatchError(
                f"expected a {self.k}-formula, got dimension {formula.k}"
            )
        for component in formula.components:
            check_well_sorted(self.source, component)
        images = frozenset(self._image(formula))
        if not images:
            raise EmptyImageError(f"empty image for {formula!r}")
        for image in images:
            if image.k != self.l:
                raise DimensionMismatchError(
                    f"translation produced dimension {image.k}, declared {self.l}"
                )
            for component in image.components:
                check_well_sorted(self.target, component)
        return images

    def translate_sequent(self, sequent: Sequent) -> frozenset[Sequent]:
        premises: list[KFormula] = []
        for premise in sequent.premises:
            premises.extend(self.translate_formula(premise))
        return frozenset(
            Sequent(premises, conclusion)
            for conclusion in self.translate_formula(sequent.conclusion)
        )

    def __repr__(self) -> str:
        label = self.name or type(self).__name__
        return f"<{label}: ({self.k})->({self.l})>"


_PLACEHOLDER_RE = re.compile(r"X(\d+)\Z")
_HOLE_RE = re.compile(r"#(\d+)(!?)\Z")


def placeholder(index: int, sort: str) -> Variable:
    """The i-th component placeholder ``Xi`` used in schematic templates."""
    return Variable(f"X{index}", sort)


def hole(index: int, sort: str, marked: bool = False) -> Variable:
    """The 1-based argument placeholder ``#i`` used in operation templates.

    A marked hole (``#i!``) changes how the enclosing wrapper behaves when
    the argument at that position is a plain variable ``v``: instead of
    wrapping in place, the wrapper is applied to every occurrence of ``v``
    in the translated formula.  Non-variable arguments wrap in place.
    """
    return Variable(f"#{index}{'!' if marked else ''}", sort)


class Schematic(Translation):
    """Template-based translation, selected by the input formula's sort.

    ``templates`` maps source sorts to nonempty collections of target
    formulas written in the placeholders ``X0 … X(k-1)``; translating a
    formula substitutes its components (passed through
    ``component_morphism`` when given, verbatim otherwise) for the
    placeholders in every template listed for its sort.
    """

    __slots__ = ("templates", "component_morphism")

    def __init__(
        self,
        source: Signature,
        k: int,
        target: Signature,
        templates: Mapping[str, Iterable[KFormula]],
        component_morphism: Optional[SignatureMorphism] = None,
        name: str = "",
    ):
        fixed = {sort: tuple(entries) for sort, entries in templates.items()}
        if not fixed or any(not entries for entries in fixed.values()):
            raise MissingTemplateError(
                "a schematic translation needs a nonempty template set per sort"
            )
        dimensions = {t.k for entries in fixed.values() for t in entries}
        if len(dimensions) != 1:
            raise DimensionMismatchError("templates disagree on the output dimension")
        super().__init__(source, k, target, dimensions.pop(), name)

        if component_morphism is None:
            if not source.is_subsignature_of(target):
                raise SortError(
                    "component terms are copied verbatim, so the source must be "
                    "a subsignature of the target (or pass component_morphism)"
                )
        elif component_morphism.source != source or component_morphism.target != target:
            raise InterfaceMismatchError(
                "component_morphism must run from the translation's source "
                "signature to its target signature"
            )
        self.component_morphism = component_morphism

        for sort, entries in fixed.items():
            if sort not in source.sorts:
                raise SortError(f"templates listed for unknown sort {sort!r}")
            expected = self._image_sort(sort)
            for template in entries:
                for component in template.components:
                    check_well_sorted(target, component)
                    for var in iter_variables(component):
                        m = _PLACEHOLDER_RE.match(var.name)
                        if m is None or var.frozen:
                            raise SortError(
                                f"template for {sort!r} contains non-placeholder "
                                f"variable {var!r}"
                            )
                        if int(m.group(1)) >= k:
                            raise DimensionMismatchError(
                                f"placeholder {var.name} out of range for k={k}"
                            )
                        if var.sort != expected:
                            raise SortError(
                                f"placeholder {var.name} has sort {var.sort!r}, "
                                f"components of sort {sort!r} land at {expected!r}"
                            )
        self.templates = fixed

    def _image_sort(self, sort: str) -> str:
        if self.component_morphism is not None:
            return self.component_morphism.sort_map[sort]
        return sort

    def _sample_sorts(self) -> list[str]:
        return sorted(self.templates)

    def _image(self, formula: KFormula) -> Iterable[KFormula]:
        sort = formula.components[0].sort
        entries = self.templates.get(sort)
        if entries is None:
            raise MissingTemplateError(f"no templates for sort {sort!r}")
        if self.component_morphism is not None:
            components = [
                _morphism_term(self.component_morphism, c) for c in formula.components
            ]
        else:
            components = list(formula.components)
        mapping = {
            placeholder(i, self._image_sort(sort)): component
            for i, component in enumerate(components)
        }
        for template in entries:
            yield KFormula(
                [substitute_term(mapping, c) for c in template.components]
            )


class _OpTemplate:
    """One compiled operation template of a term-homomorphic translation."""

    __slots__ = ("term", "marked_index", "wrapper", "collapsed")

    def __init__(self, term: Term, arg_sorts: tuple[str, ...]):
        self.term = term
        self.marked_index: Optional[int] = None
        self.wrapper: Optional[Term] = None

        marked = []
        for var in set(iter_variables(term)):
            m = _HOLE_RE.match(var.name)
            if m is not None and m.group(2):
                marked.append((int(m.group(1)), var))
        if len(marked) > 1:
            raise SortError("at most one marked hole per template")
        if marked:
            index, var = marked[0]
            if term == var:
                raise SortError(
                    "a marked hole needs an enclosing operation to wrap with"
                )
            self.marked_index = index
            self.wrapper = _enclosing_application(term, var)
            self.collapsed = _replace_equal(
                term, self.wrapper, hole(index, arg_sorts[index - 1])
            )
        else:
            self.collapsed = term


def _enclosing_application(term: Term, var: Variable) -> Term:
    """The innermost application containing ``var`` (the direct parent)."""
    if isinstance(term, App):
        for arg in term.args:
            if arg == var:
                return term
            if isinstance(arg, App):
                found = _enclosing_application(arg, var)
                if found is not None:
                    return found
    return None  # type: ignore[return-value]


def _replace_equal(term: Term, old: Term, new: Term) -> Term:
    if term == old:
        return new
    if isinstance(term, Variable):
        return term
    return App(term.op, tuple(_replace_equal(a, old, new) for a in term.args), term.sort)


class TermHomomorphic(Translation):
    """Bottom-up rewriting translation (dimension-preserving).

    ``op_templates`` maps source operations to nonempty collections of
    target terms written in the argument holes ``#1 … #n``; a source
    application is translated by translating its arguments, then filling
    each template with every combination of argument images.  Variables
    translate to themselves, and operations without an explicit template
    must exist in the target with the same profile (identity rewrite).

    A template may mark one hole (see :func:`hole`): when the argument in
    that position is a plain variable, the hole's direct parent — its
    wrapper — is not applied in place but substituted for the variable
    across the whole translated formula.
    """

    __slots__ = ("op_templates",)

    def __init__(
        self,
        source: Signature,
        k: int,
        target: Signature,
        op_templates: Optional[Mapping[str, Iterable[Term]]] = None,
        name: str = "",
    ):
        if not source.sorts <= target.sorts:
            raise SortError("variables keep their sorts, so source sorts must "
                            "all exist in the target")
        super().__init__(source, k, target, k, name)

        given = {op: tuple(entries) for op, entries in (op_templates or {}).items()}
        unknown = sorted(set(given) - set(source.ops))
        if unknown:
            raise SortError(f"templates for operations outside the source: {unknown}")

        compiled: dict[str, tuple[_OpTemplate, ...]] = {}
        for op, (args, result) in sorted(source.ops.items()):
            entries = given.get(op)
            if entries is None:
                if target.ops.get(op) != (args, result):
                    raise MissingTemplateError(
                        f"no template for {op!r} and the target has no "
                        f"identically-typed operation of that name"
                    )
                entries = (App(op, tuple(hole(i + 1, s) for i, s in enumerate(args)), result),)
            if not entries:
                raise MissingTemplateError(f"empty template set for operation {op!r}")
            checked = []
            for template in entries:
                self._validate_template(op, args, result, template)
                checked.append(_OpTemplate(template, args))
            compiled[op] = tuple(checked)
        self.op_templates = compiled

    def _validate_template(
        self, op: str, args: tuple[str, ...], result: str, template: Term
    ) -> None:
        for var in iter_variables(template):
            m = _HOLE_RE.match(var.name)
            if m is None or var.frozen:
                raise SortError(
                    f"template for {op!r} contains non-hole variable {var!r}"
                )
            index = int(m.group(1))
            if not 1 <= index <= len(args):
                raise SortError(f"hole {var.name} out of range for {op!r}/{len(args)}")
            if var.sort != args[index - 1]:
                raise SortError(
                    f"hole {var.name} in the template for {op!r} has sort "
                    f"{var.sort!r}, argument {index} has sort {args[index - 1]!r}"
                )
        if check_well_sorted(self.target, template) != result:
            raise SortError(f"template for {op!r} has the wrong result sort")

    # -- bottom-up images; each image carries a set of pending rewrites
    #    (variable, wrapper) collected from marked holes.

    def _term_images(self, term: Term) -> list[tuple[Term, frozenset]]:
        if isinstance(term, Variable):
            return [(term, frozenset())]
        argument_images = [self._term_images(arg) for arg in term.args]
        out: set[tuple[Term, frozenset]] = set()
        for compiled in self.op_templates[term.op]:
            for combo in itertools.product(*argument_images):
                images = [image for image, _ in combo]
                pending = frozenset().union(*(p for _, p in combo))
                body, extra = self._instantiate(compiled, term.args, images)
                out.add((body, pending | extra))
        return sorted(out, key=_image_sort_key)

    def _instantiate(
        self, compiled: _OpTemplate, args: Sequence[Term], images: Sequence[Term]
    ) -> tuple[Term, frozenset]:
        mapping: dict[Variable, Term] = {}
        for i, image in enumerate(images):
            sort = args[i].sort
            mapping[hole(i + 1, sort)] = image
            mapping[hole(i + 1, sort, marked=True)] = image
        index = compiled.marked_index
        if index is not None:
            argument = args[index - 1]
            if isinstance(argument, Variable) and not argument.frozen:
                wrapper = substitute_term(mapping, compiled.wrapper)
                return substitute_term(mapping, compiled.collapsed), frozenset(
                    [(argument, wrapper)]
                )
        return substitute_term(mapping, compiled.term), frozenset()

    def _image(self, formula: KFormula) -> Iterable[KFormula]:
        component_images = [self._term_images(c) for c in formula.components]
        results: set[KFormula] = set()
        for combo in itertools.product(*component_images):
            base = KFormula([image for image, _ in combo])
            pending = frozenset().union(*(p for _, p in combo))
            for theta in _pending_substitutions(pending):
                results.add(theta(base))
        return results


def _image_sort_key(entry: tuple[Term, frozenset]):
    image, pending = entry
    return term_key(image), sorted((term_key(v), term_key(w)) for v, w in pending)


def _pending_substitutions(pending: frozenset) -> Iterable[Substitution]:
    """All ways of picking one wrapper per rewritten variable."""
    if not pending:
        yield Substitution({})
        return
    grouped: dict[Variable, list[Term]] = {}
    for var, wrapper in pending:
        grouped.setdefault(var, []).append(wrapper)
    variables = sorted(grouped, key=term_key)
    choices = [sorted(grouped[v], key=term_key) for v in variables]
    for picked in itertools.product(*choices):
        yield Substitution(dict(zip(variables, picked)))


class MorphismInduced(Translation):
    """The functional translation applying a signature morphism componentwise."""

    __slots__ = ("morphism",)

    def __init__(self, morphism: SignatureMorphism, k: int, name: str = ""):
        super().__init__(morphism.source, k, morphism.target, k, name)
        self.morphism = morphism

    def _image(self, formula: KFormula) -> Iterable[KFormula]:
        return (apply_signature_morphism(self.morphism, formula),)


class Composed(Translation):
    """Relational composition: every outer image of every inner image."""

    __slots__ = ("outer", "inner")

    def __init__(self, outer: Translation, inner: Translation, name: str = ""):
        if inner.target != outer.source or inner.l != outer.k:
            raise InterfaceMismatchError(
                f"cannot compose ({outer.k})->({outer.l}) after "
                f"({inner.k})->({inner.l}): interface signatures or "
                f"dimensions do not match"
            )
        super().__init__(inner.source, inner.k, outer.target, outer.l, name)
        self.outer = outer
        self.inner = inner

    def _sample_sorts(self) -> list[str]:
        return self.inner._sample_sorts()

    def _image(self, formula: KFormula) -> Iterable[KFormula]:
        out: set[KFormula] = set()
        for middle in self.inner.translate_formula(formula):
            out |= self.outer.translate_formula(middle)
        return out


class _ConjunctionFold(Translation):
    """Fold a translation's image set into one conjunction per input."""

    __slots__ = ("inner", "conj")

    def __init__(self, inner: Translation, conj: str, name: str = ""):
        if inner.l != 1:
            raise DimensionMismatchError(
                "conjunction folding needs 1-dimensional images"
            )
        args, result = inner.target.profile(conj)
        if len(args) != 2 or args[0] != args[1] or result != args[0]:
            raise SortError(f"{conj!r} is not a homogeneous binary operation")
        super().__init__(inner.source, inner.k, inner.target, 1, name)
        self.inner = inner
        self.conj = conj

    def _sample_sorts(self) -> list[str]:
        return self.inner._sample_sorts()

    def _image(self, formula: KFormula) -> Iterable[KFormula]:
        images = sorted(self.inner.translate_formula(formula), key=_fold_key)
        if not images:
            raise EmptyImageError(f"nothing to fold for {formula!r}")
        terms = [image.components[0] for image in images]
        folded = terms[0]
        for term in terms[1:]:
            if term.sort != folded.sort:
                raise SortError("cannot fold images of different sorts")
            folded = App(self.conj, (folded, term), folded.sort)
        return (KFormula([folded]),)


def _has_frozen(formula: KFormula) -> bool:
    return any(v.frozen for c in formula.components for v in iter_variables(c))


def _fold_key(formula: KFormula):
    verbatim = formula_key(formula)
    if _has_frozen(formula):
        return verbatim, verbatim
    return formula_key(canonicalize(formula)), verbatim


# --------------------------------------------------------------------------
# module-level operations


def translate_formula(translation: Translation, formula: KFormula) -> frozenset[KFormula]:
    """The image set of ``formula`` under ``translation``."""
    return translation.translate_formula(formula)


def translate_sequent(translation: Translation, sequent: Sequent) -> frozenset[Sequent]:
    """Translate a sequent: premises are pooled across their image sets and
    the result contains one sequent per image of the conclusion."""
    return translation.translate_sequent(sequent)


def translation_from_morphism(
    morphism: SignatureMorphism, k: int, name: str = ""
) -> Translation:
    """The functional translation induced by a signature morphism."""
    return MorphismInduced(morphism, k, name=name)


def compose_translations(outer: Translation, inner: Translation, name: str = "") -> Translation:
    """``compose_translations(rho, tau)`` maps φ to the union of ρ-images of
    τ-images of φ; ``tau`` runs first."""
    return Composed(outer, inner, name=name)


def associated_function(translation: Translation, conj: str, name: str = "") -> Translation:
    """Turn a translation with 1-dimensional images into a functional one by
    folding each image set, left-associated, with the binary operation
    ``conj``; images are ordered by their canonical form (verbatim form as
    the tie-break) so the fold is deterministic."""
    return _ConjunctionFold(translation, conj, name=name)


def images_equal(left: Iterable[KFormula], right: Iterable[KFormula]) -> bool:
    """Set equality of formula images, modulo canonical renaming for
    formulas without frozen variables (frozen ones compare verbatim)."""

    def norm(formulas):
        return {f if _has_frozen(f) else canonicalize(f) for f in formulas}

    return norm(left) == norm(right)


# --------------------------------------------------------------------------
# substitution commutation probing


@dataclass(frozen=True)
class CommutationReport:
    """Outcome of randomized substitution-commutation probing."""

    commutes: bool
    samples_run: int
    counterexample: Optional[
        tuple[KFormula, Substitution, frozenset, frozenset]
    ] = None


_VAR_POOL = ("x", "y", "z", "w")


def _random_term(signature: Signature, sort: str, rng: random.Random, depth: int) -> Term:
    producers = [op for op, (_, res) in sorted(signature.ops.items()) if res == sort]
    if depth <= 0 or not producers or rng.random() < 0.3:
        constants = [op for op in producers if not signature.ops[op][0]]
        if constants and rng.random() < 0.4:
            return App(rng.choice(constants), (), sort)
        return Variable(rng.choice(_VAR_POOL), sort)
    op = rng.choice(producers)
    args, _ = signature.ops[op]
    return App(op, tuple(_random_term(signature, s, rng, depth - 1) for s in args), sort)


def _random_substitution(
    signature: Signature, formula: KFormula, rng: random.Random
) -> Substitution:
    mapping = {}
    for var in sorted(free_variables(formula), key=term_key):
        if not var.frozen and rng.random() < 0.75:
            mapping[var] = _random_term(signature, var.sort, rng, rng.randint(0, 2))
    return Substitution(mapping)


def _push_substitution(translation: Translation, theta: Substitution) -> Substitution:
    """How ``theta`` reads on the target side of the translation.

    Schematic and term-homomorphic translations leave variables alone, so
    the substitution carries over unchanged; a morphism-induced translation
    renames both sides of every binding.
    """
    if isinstance(translation, MorphismInduced):
        morphism = translation.morphism
        return Substitution(
            {
                _morphism_var(morphism, var): _morphism_term(morphism, image)
                for var, image in theta.items()
            }
        )
    if isinstance(translation, Composed):
        return _push_substitution(
            translation.outer, _push_substitution(translation.inner, theta)
        )
    if isinstance(translation, _ConjunctionFold):
        return _push_substitution(translation.inner, theta)
    return theta


def check_substitution_commutation(
    translation: Translation, samples: int = 100, seed: int = 0
) -> CommutationReport:
    """Probe τ(θ(φ)) = θ(τ(φ)) on random formula/substitution pairs.

    Only meaningful when the translation stays inside one signature; image
    sets are compared verbatim, and the first failing pair is reported.
    """
    if translation.source != translation.target:
        raise NotSelfTranslationError(
            "substitution commutation needs source and target signatures to agree"
        )
    rng = random.Random(seed)
    sorts = translation._sample_sorts()
    if not sorts:
        return CommutationReport(True, 0, None)
    for n in range(samples):
        sort = rng.choice(sorts)
        formula = KFormula(
            [
                _random_term(translation.source, sort, rng, rng.randint(0, 3))
                for _ in range(translation.k)
            ]
        )
        theta = _random_substitution(translation.source, formula, rng)
        left = translation.translate_formula(apply_substitution(theta, formula))
        pushed = _push_substitution(translation, theta)
        right = frozenset(
            apply_substitution(pushed, image)
            for image in translation.translate_formula(formula)
        )
        if left != right:
            return CommutationReport(False, n + 1, (formula, theta, left, right))
    return CommutationReport(True, samples, None)

"""Exception and warning types shared across the package."""

from __future__ import annotations


class RefineKitError(Exception):
    """Base class for all errors raised by this package."""


class SortError(RefineKitError):
    """A term, formula or table does not respect the signature's sorting."""


class DimensionMismatchError(RefineKitError):
    """Formulas of dimension k fed to something expecting dimension l != k."""


class FrozenVariableError(RefineKitError):
    """A frozen variable appeared where only plain variables are allowed."""


class BudgetError(RefineKitError):
    """A configured enumeration bound would be exceeded."""


class UnassignedVariableError(RefineKitError):
    """Evaluation reached a variable the assignment does not cover."""


class SignatureMismatchError(RefineKitError):
    """Structure and presentation (or morphism) signatures disagree."""


class NotHornError(RefineKitError):
    """Operation requires a presentation built from equations and
    conditional equations over the free equational base."""


class InterfaceMismatchError(RefineKitError):
    """The two presentations are not related by signature inclusion."""


class ChainMismatchError(RefineKitError):
    """Certificates do not share the middle presentation/translation."""


class NotProvedError(RefineKitError):
    """A composition step requires certificates whose overall verdict is
    Proved."""


class InternalSoundnessError(RefineKitError):
    """A proof and a countermodel were produced for the same goal.

    This can only happen through a bug, so it is never swallowed.
    """


class MissingTemplateError(RefineKitError):
    """A translation has no template for a sort or operation it must map."""


class NotSelfTranslationError(RefineKitError):
    """Substitution commutation is only checkable when source and target
    signatures coincide."""


class EmptyImageError(RefineKitError):
    """A translation produced an empty image; images must be nonempty."""


class CommutationUnverifiedWarning(UserWarning):
    """A translation's substitution-commutation was assumed, not checked."""


class SpecSyntaxError(RefineKitError):
    """Parse error in a specification document.

    Carries enough position information to print a friendly diagnostic.
    """

    def __init__(self, message: str, line: int, column: int, excerpt: str = ""):
        self.message = message
        self.line = line
        self.column = column
        self.excerpt = excerpt
        where = f"line {line}, column {column}"
        if excerpt:
            super().__init__(f"{where}: {message}\n    {excerpt}")
        else:
            super().__init__(f"{where}: {message}")


class SpecResolutionError(RefineKitError):
    """A parsed document refers to names that do not resolve."""


class CorpusIntegrityError(RefineKitError):
    """A bundled corpus file does not match its recorded digest."""

"""Tokenizer, surface AST, and recursive-descent parser for .rspec files.

The surface language is whitespace-insensitive, comments run from ``--``
to end of line, and every construct is introduced by a keyword, so the
grammar stays LL(1) apart from one two-token lookahead in ``check``
directives (label vs. kind).  Keywords are contextual: ``dim``, ``sorts``
and friends are ordinary identifiers anywhere a term is expected.

Parsing never touches the core layers; it produces plain syntax nodes
that :mod:`refinekit.frontend.documents` resolves into signatures,
presentations, translations, structures, and directives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from ..errors import SpecSyntaxError

__all__ = [
    "Token",
    "tokenize",
    "TermNode",
    "Name",
    "Call",
    "Infix",
    "HoleRef",
    "FormulaNode",
    "SequentNode",
    "OpProfile",
    "VarGroup",
    "AxiomClause",
    "RuleClause",
    "CondClause",
    "SignatureDecl",
    "SystemDecl",
    "SortClause",
    "OpClause",
    "TranslationDecl",
    "MorphismDecl",
    "StructureDecl",
    "DirectiveOptions",
    "CheckDecl",
    "DocumentNode",
    "parse_document_text",
    "parse_sequent_text",
    "INFIX_OPS",
]


# ---------------------------------------------------------------------------
# tokens


#: Binary operation spellings that may appear infix inside terms.
INFIX_OPS = ("/\\", "\\/", "->>", "->", "+", "-", "*")

#: All multi-character symbols, longest first so the scanner can take
#: the first match greedily.
_SYMBOLS = ("|->", "->>", "~>", "|-", "->", "=>", "/\\", "\\/", "~", "+", "-", "*", "=")

_PUNCT = set("{}()[]<>,;:")

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_INT_RE = re.compile(r"[0-9]+")
_HOLE_RE = re.compile(r"#([0-9]+)(!?)")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "string" | "hole" | "sym" | "punct" | "eof"
    value: str
    line: int
    column: int
    marked: bool = False  # holes only: a trailing "!"


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    line_start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
            line_start = i
            continue
        if ch in " \t\r":
            i += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        col = i - line_start + 1
        if ch == '"':
            end = text.find('"', i + 1)
            if end == -1 or "\n" in text[i + 1 : end]:
                raise _syntax_error(text, "unterminated string literal", line, col)
            tokens.append(Token("string", text[i + 1 : end], line, col))
            i = end + 1
            continue
        m = _HOLE_RE.match(text, i)
        if m:
            tokens.append(Token("hole", m.group(1), line, col, marked=bool(m.group(2))))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(0), line, col))
            i = m.end()
            continue
        m = _INT_RE.match(text, i)
        if m:
            tokens.append(Token("int", m.group(0), line, col))
            i = m.end()
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token("sym", sym, line, col))
                i += len(sym)
                break
        else:
            if ch in _PUNCT:
                tokens.append(Token("punct", ch, line, col))
                i += 1
            else:
                raise _syntax_error(text, f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, n - line_start + 1))
    return tokens


def _syntax_error(text: str, message: str, line: int, column: int) -> SpecSyntaxError:
    lines = text.splitlines()
    excerpt = lines[line - 1] if 0 < line <= len(lines) else ""
    return SpecSyntaxError(message, line, column, excerpt)


# ---------------------------------------------------------------------------
# surface nodes


class TermNode:
    """Base class for unresolved term syntax."""

    __slots__ = ()


@dataclass(frozen=True)
class Name(TermNode):
    """A bare identifier: a variable, a constant, or a placeholder."""

    ident: str
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Call(TermNode):
    op: str
    args: tuple[TermNode, ...]
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Infix(TermNode):
    op: str
    left: TermNode
    right: TermNode
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class HoleRef(TermNode):
    index: int  # 1-based, as written
    marked: bool
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class FormulaNode:
    components: tuple[TermNode, ...]
    line: int = 0
    column: int = 0

    @property
    def k(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class SequentNode:
    premises: tuple[FormulaNode, ...]
    conclusion: FormulaNode
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class OpProfile:
    name: str
    args: tuple[str, ...]
    result: str
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class VarGroup:
    names: tuple[str, ...]
    sort: str
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class AxiomClause:
    name: Optional[str]
    formula: FormulaNode
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class RuleClause:
    name: Optional[str]
    sequent: SequentNode
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class CondClause:
    name: Optional[str]
    premises: tuple[FormulaNode, ...]
    conclusion: FormulaNode
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class SignatureDecl:
    name: str
    sorts: tuple[str, ...]
    ops: tuple[OpProfile, ...]
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class SystemDecl:
    kind: str  # "dsystem" | "spec"
    name: str
    sig_ref: Optional[str]
    dim: Optional[int]
    includes: tuple[str, ...]
    sorts: tuple[str, ...]
    ops: tuple[OpProfile, ...]
    vars: tuple[VarGroup, ...]
    axioms: tuple[AxiomClause, ...]
    rules: tuple[RuleClause, ...]  # dsystem only
    conds: tuple[CondClause, ...]  # spec only
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class SortClause:
    sort: str
    placeholders: tuple[str, ...]
    templates: tuple[FormulaNode, ...]
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class OpClause:
    op: str
    holes: tuple[int, ...]
    templates: tuple[TermNode, ...]
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class TranslationDecl:
    name: str
    source: str
    source_dim: int
    target: str
    target_dim: int
    sort_clauses: tuple[SortClause, ...]
    op_clauses: tuple[OpClause, ...]
    morphism_ref: Optional[str]
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class MorphismDecl:
    name: str
    source: str
    target: str
    sort_pairs: tuple[tuple[str, str], ...]
    op_pairs: tuple[tuple[str, str], ...]
    var_pairs: tuple[tuple[str, str, str], ...]  # (name, sort, image)
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class StructureDecl:
    name: str
    sig_ref: str
    dim: int
    carriers: tuple[tuple[str, int], ...]
    tables: tuple[tuple[str, tuple[int, ...]], ...]
    filters: tuple[tuple[str, tuple[tuple[int, ...], ...]], ...]
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class DirectiveOptions:
    rounds: Optional[int] = None
    derived: Optional[int] = None
    inst_depth: Optional[int] = None
    time_ms: Optional[int] = None
    depth: Optional[int] = None
    sizes: tuple[tuple[str, int], ...] = ()
    models: tuple[str, ...] = ()
    assume: tuple[str, ...] = ()


#: Directive kinds and the shape of their operands.
DIRECTIVE_KINDS = (
    "derive",
    "decide",
    "countermodel",
    "refine-interp",
    "refine-sigma",
    "refine-logical",
    "interpret",
    "reflect",
    "compose",
)

#: Kinds that take ``SOURCE TARGET via NAME``.
VIA_KINDS = ("refine-interp", "refine-sigma", "interpret", "reflect")

#: Kinds that take ``SYSTEM sequent``.
GOAL_KINDS = ("derive", "decide", "countermodel")


@dataclass(frozen=True)
class CheckDecl:
    label: Optional[str]
    kind: str
    system: Optional[str] = None
    sequent: Optional[SequentNode] = None
    source: Optional[str] = None
    target: Optional[str] = None
    via: Optional[str] = None
    first: Optional[str] = None
    second: Optional[str] = None
    options: DirectiveOptions = field(default_factory=DirectiveOptions)
    line: int = 0
    column: int = 0


Declaration = object  # any of the *Decl classes above


@dataclass(frozen=True)
class DocumentNode:
    items: tuple[Declaration, ...]


# ---------------------------------------------------------------------------
# parser


_SECTION_SYNONYMS = {
    "sort": "sorts",
    "sorts": "sorts",
    "op": "ops",
    "ops": "ops",
    "var": "vars",
    "vars": "vars",
    "axiom": "axioms",
    "axioms": "axioms",
    "rule": "rules",
    "rules": "rules",
    "cond": "conds",
    "conds": "conds",
    "include": "include",
    "dim": "dim",
}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token plumbing ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None) -> SpecSyntaxError:
        tok = tok or self.peek()
        return _syntax_error(self.text, message, tok.line, tok.column)

    def at_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.value == ch

    def at_sym(self, sym: str) -> bool:
        tok = self.peek()
        return tok.kind == "sym" and tok.value == sym

    def at_ident(self, *values: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and (not values or tok.value in values)

    def expect_punct(self, ch: str) -> Token:
        if not self.at_punct(ch):
            raise self.error(f"expected {ch!r}")
        return self.advance()

    def expect_sym(self, sym: str) -> Token:
        if not self.at_sym(sym):
            raise self.error(f"expected {sym!r}")
        return self.advance()

    def expect_ident(self, what: str = "an identifier") -> Token:
        if self.peek().kind != "ident":
            raise self.error(f"expected {what}")
        return self.advance()

    def expect_int(self, what: str = "an integer") -> int:
        if self.peek().kind != "int":
            raise self.error(f"expected {what}")
        return int(self.advance().value)

    def hyphen_ident(self, what: str = "a name") -> Token:
        """An identifier, possibly hyphen-joined: ``refine-interp``,
        ``plus-zero``.  Returned as a single token carrying the joined
        spelling and the position of its first part."""
        first = self.expect_ident(what)
        value = first.value
        while self.at_sym("-") and self.peek(1).kind in ("ident", "int"):
            self.advance()
            part = self.advance()
            value += "-" + part.value
        return Token("ident", value, first.line, first.column)

    def op_name(self, what: str = "an operation name") -> Token:
        """An operation name: a plain identifier, a numeral constant, or
        an infix spelling such as ``/\\`` — infix operations are declared
        under the symbol they are written with."""
        tok = self.peek()
        if tok.kind in ("ident", "int"):
            return self.advance()
        if tok.kind == "sym" and tok.value in INFIX_OPS:
            return self.advance()
        raise self.error(f"expected {what}")

    # -- documents -----------------------------------------------------------

    def document(self) -> DocumentNode:
        items: list = []
        while self.peek().kind != "eof":
            items.append(self.declaration())
        return DocumentNode(tuple(items))

    def declaration(self):
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error("expected a declaration keyword")
        if tok.value == "signature":
            return self.signature_decl()
        if tok.value in ("dsystem", "spec"):
            return self.system_decl()
        if tok.value == "translation":
            return self.translation_decl()
        if tok.value == "morphism":
            return self.morphism_decl()
        if tok.value == "structure":
            return self.structure_decl()
        if tok.value == "check":
            return self.check_decl()
        raise self.error(f"unknown declaration keyword {tok.value!r}", tok)

    # -- signatures ----------------------------------------------------------

    def signature_decl(self) -> SignatureDecl:
        start = self.advance()
        name = self.hyphen_ident("a signature name")
        self.expect_punct("{")
        sorts: list[str] = []
        ops: list[OpProfile] = []
        while not self.at_punct("}"):
            self.sig_item(sorts, ops)
        self.expect_punct("}")
        return SignatureDecl(
            name.value, tuple(sorts), tuple(ops), start.line, start.column
        )

    def sig_item(self, sorts: list[str], ops: list[OpProfile]) -> None:
        key = self.peek()
        section = _SECTION_SYNONYMS.get(key.value) if key.kind == "ident" else None
        if section == "sorts":
            self.advance()
            sorts.append(self.expect_ident("a sort name").value)
            while self.at_punct(","):
                self.advance()
                sorts.append(self.expect_ident("a sort name").value)
            self.expect_punct(";")
            return
        if section == "ops":
            self.advance()
            ops.append(self.op_profile())
            self.expect_punct(";")
            return
        raise self.error("expected 'sorts' or 'op' inside a signature")

    def op_profile(self) -> OpProfile:
        name = self.op_name()
        self.expect_punct(":")
        first = self.expect_ident("a sort name").value
        args = [first]
        while self.at_sym("*"):
            self.advance()
            args.append(self.expect_ident("a sort name").value)
        if self.at_sym("->"):
            self.advance()
            result = self.expect_ident("a result sort").value
            return OpProfile(name.value, tuple(args), result, name.line, name.column)
        if len(args) != 1:
            raise self.error("argument sorts need '-> result'")
        return OpProfile(name.value, (), args[0], name.line, name.column)

    # -- presentations -------------------------------------------------------

    def system_decl(self) -> SystemDecl:
        start = self.advance()
        kind = start.value
        name = self.hyphen_ident("a system name")
        sig_ref = None
        if self.at_punct(":"):
            self.advance()
            sig_ref = self.hyphen_ident("a signature name").value
        self.expect_punct("{")
        dim: Optional[int] = None
        includes: list[str] = []
        sorts: list[str] = []
        ops: list[OpProfile] = []
        vargroups: list[VarGroup] = []
        axioms: list[AxiomClause] = []
        rules: list[RuleClause] = []
        conds: list[CondClause] = []
        while not self.at_punct("}"):
            key = self.peek()
            section = _SECTION_SYNONYMS.get(key.value) if key.kind == "ident" else None
            if section == "dim":
                self.advance()
                if dim is not None:
                    raise self.error("duplicate 'dim'", key)
                dim = self.expect_int("a dimension")
                self.expect_punct(";")
            elif section == "include":
                self.advance()
                includes.append(self.hyphen_ident("a system name").value)
                while self.at_punct(","):
                    self.advance()
                    includes.append(self.hyphen_ident("a system name").value)
                self.expect_punct(";")
            elif section in ("sorts", "ops"):
                self.sig_item(sorts, ops)
            elif section == "vars":
                self.advance()
                names = [self.expect_ident("a variable name").value]
                while self.at_punct(",") or self.peek().kind == "ident":
                    if self.at_punct(","):
                        self.advance()
                    names.append(self.expect_ident("a variable name").value)
                self.expect_punct(":")
                sort = self.expect_ident("a sort name").value
                self.expect_punct(";")
                vargroups.append(VarGroup(tuple(names), sort, key.line, key.column))
            elif section == "axioms":
                self.advance()
                label = self.optional_label()
                formula = self.formula()
                self.expect_punct(";")
                axioms.append(AxiomClause(label, formula, key.line, key.column))
            elif section == "rules":
                if kind != "dsystem":
                    raise self.error("rules belong to dsystem blocks; use 'cond'", key)
                self.advance()
                label = self.optional_label()
                sequent = self.sequent()
                self.expect_punct(";")
                rules.append(RuleClause(label, sequent, key.line, key.column))
            elif section == "conds":
                if kind != "spec":
                    raise self.error("cond belongs to spec blocks; use 'rule'", key)
                self.advance()
                label = self.optional_label()
                premises = [self.formula()]
                while self.at_punct(","):
                    self.advance()
                    premises.append(self.formula())
                self.expect_sym("=>")
                conclusion = self.formula()
                self.expect_punct(";")
                conds.append(
                    CondClause(label, tuple(premises), conclusion, key.line, key.column)
                )
            else:
                raise self.error(f"unexpected item in a {kind} block")
        self.expect_punct("}")
        return SystemDecl(
            kind,
            name.value,
            sig_ref,
            dim,
            tuple(includes),
            tuple(sorts),
            tuple(ops),
            tuple(vargroups),
            tuple(axioms),
            tuple(rules),
            tuple(conds),
            start.line,
            start.column,
        )

    def optional_label(self) -> Optional[str]:
        """``name :`` before a sentence, when present.

        Both parts of the lookahead matter: a bare identifier may also
        start a term, and a ``:`` may not follow for other reasons."""
        if self.peek().kind != "ident":
            return None
        save = self.pos
        label = self.hyphen_ident()
        if self.at_punct(":"):
            self.advance()
            return label.value
        self.pos = save
        return None

    # -- formulas and terms --------------------------------------------------

    def formula(self) -> FormulaNode:
        tok = self.peek()
        if self.at_punct("<"):
            self.advance()
            components = [self.term()]
            while self.at_punct(","):
                self.advance()
                components.append(self.term())
            self.expect_punct(">")
            return FormulaNode(tuple(components), tok.line, tok.column)
        left = self.term()
        if self.at_sym("~"):
            self.advance()
            right = self.term()
            return FormulaNode((left, right), tok.line, tok.column)
        return FormulaNode((left,), tok.line, tok.column)

    def sequent(self) -> SequentNode:
        tok = self.peek()
        formulas = [self.formula()]
        while self.at_punct(","):
            self.advance()
            formulas.append(self.formula())
        if self.at_sym("|-"):
            self.advance()
            conclusion = self.formula()
            return SequentNode(tuple(formulas), conclusion, tok.line, tok.column)
        if len(formulas) != 1:
            raise self.error("expected '|-' after the premise list")
        return SequentNode((), formulas[0], tok.line, tok.column)

    def term(self) -> TermNode:
        left = self.factor()
        while self.peek().kind == "sym" and self.peek().value in INFIX_OPS:
            op = self.advance()
            right = self.factor()
            left = Infix(op.value, left, right, op.line, op.column)
        return left

    def factor(self) -> TermNode:
        tok = self.peek()
        if self.at_punct("("):
            self.advance()
            inner = self.term()
            self.expect_punct(")")
            return inner
        if tok.kind == "hole":
            self.advance()
            return HoleRef(int(tok.value), tok.marked, tok.line, tok.column)
        if tok.kind == "ident":
            # plain identifiers only: a hyphen after a term is binary minus
            self.advance()
            if self.at_punct("("):
                self.advance()
                args = [self.term()]
                while self.at_punct(","):
                    self.advance()
                    args.append(self.term())
                self.expect_punct(")")
                return Call(tok.value, tuple(args), tok.line, tok.column)
            return Name(tok.value, tok.line, tok.column)
        if tok.kind == "int":
            # numerals name constants (``0`` in the account signatures);
            # they are never variables
            self.advance()
            return Name(tok.value, tok.line, tok.column)
        raise self.error("expected a term")

    # -- translations --------------------------------------------------------

    def translation_decl(self) -> TranslationDecl:
        start = self.advance()
        name = self.hyphen_ident("a translation name")
        self.expect_punct(":")
        source = self.hyphen_ident("the source name").value
        self.expect_punct("(")
        source_dim = self.expect_int("the source dimension")
        self.expect_punct(")")
        self.expect_sym("->")
        target = self.hyphen_ident("the target name").value
        self.expect_punct("(")
        target_dim = self.expect_int("the target dimension")
        self.expect_punct(")")
        self.expect_punct("{")
        sort_clauses: list[SortClause] = []
        op_clauses: list[OpClause] = []
        morphism_ref: Optional[str] = None
        while not self.at_punct("}"):
            key = self.peek()
            if self.at_ident("sort"):
                self.advance()
                sort = self.expect_ident("a sort name").value
                self.expect_punct(":")
                self.expect_punct("<")
                placeholders = [self.expect_ident("a placeholder").value]
                while self.at_punct(","):
                    self.advance()
                    placeholders.append(self.expect_ident("a placeholder").value)
                self.expect_punct(">")
                self.expect_sym("~>")
                self.expect_punct("{")
                templates = [self.formula()]
                while self.at_punct(","):
                    self.advance()
                    templates.append(self.formula())
                self.expect_punct("}")
                self.expect_punct(";")
                sort_clauses.append(
                    SortClause(
                        sort,
                        tuple(placeholders),
                        tuple(templates),
                        key.line,
                        key.column,
                    )
                )
            elif self.at_ident("op"):
                self.advance()
                op = self.op_name()
                holes: list[int] = []
                if self.at_punct("("):
                    self.advance()
                    while not self.at_punct(")"):
                        tok = self.peek()
                        if tok.kind != "hole" or tok.marked:
                            raise self.error("expected an unmarked hole like #1")
                        self.advance()
                        holes.append(int(tok.value))
                        if self.at_punct(","):
                            self.advance()
                    self.expect_punct(")")
                self.expect_sym("~>")
                self.expect_punct("{")
                templates = [self.term()]
                while self.at_punct(","):
                    self.advance()
                    templates.append(self.term())
                self.expect_punct("}")
                self.expect_punct(";")
                op_clauses.append(
                    OpClause(op.value, tuple(holes), tuple(templates), key.line, key.column)
                )
            elif self.at_ident("from"):
                self.advance()
                if not self.at_ident("morphism"):
                    raise self.error("expected 'morphism' after 'from'")
                self.advance()
                morphism_ref = self.hyphen_ident("a morphism name").value
                self.expect_punct(";")
            else:
                raise self.error("expected 'sort', 'op', or 'from morphism'")
        self.expect_punct("}")
        return TranslationDecl(
            name.value,
            source,
            source_dim,
            target,
            target_dim,
            tuple(sort_clauses),
            tuple(op_clauses),
            morphism_ref,
            start.line,
            start.column,
        )

    # -- morphisms -----------------------------------------------------------

    def morphism_decl(self) -> MorphismDecl:
        start = self.advance()
        name = self.hyphen_ident("a morphism name")
        self.expect_punct(":")
        source = self.hyphen_ident("the source name").value
        self.expect_sym("->")
        target = self.hyphen_ident("the target name").value
        self.expect_punct("{")
        sort_pairs: list[tuple[str, str]] = []
        op_pairs: list[tuple[str, str]] = []
        var_pairs: list[tuple[str, str, str]] = []
        while not self.at_punct("}"):
            if self.at_ident("sort"):
                self.advance()
                a = self.expect_ident("a sort name").value
                self.expect_sym("|->")
                b = self.expect_ident("a sort name").value
                self.expect_punct(";")
                sort_pairs.append((a, b))
            elif self.at_ident("op"):
                self.advance()
                a = self.op_name().value
                self.expect_sym("|->")
                b = self.op_name().value
                self.expect_punct(";")
                op_pairs.append((a, b))
            elif self.at_ident("var"):
                self.advance()
                a = self.expect_ident("a variable name").value
                self.expect_punct(":")
                sort = self.expect_ident("a sort name").value
                self.expect_sym("|->")
                b = self.expect_ident("a variable name").value
                self.expect_punct(";")
                var_pairs.append((a, sort, b))
            else:
                raise self.error("expected 'sort', 'op', or 'var'")
        self.expect_punct("}")
        return MorphismDecl(
            name.value,
            source,
            target,
            tuple(sort_pairs),
            tuple(op_pairs),
            tuple(var_pairs),
            start.line,
            start.column,
        )

    # -- structures ----------------------------------------------------------

    def structure_decl(self) -> StructureDecl:
        start = self.advance()
        name = self.hyphen_ident("a structure name")
        self.expect_punct(":")
        sig_ref = self.hyphen_ident("a signature name").value
        if not self.at_ident("dim"):
            raise self.error("expected 'dim' after the signature")
        self.advance()
        dim = self.expect_int("a dimension")
        self.expect_punct("{")
        carriers: list[tuple[str, int]] = []
        tables: list[tuple[str, tuple[int, ...]]] = []
        filters: list[tuple[str, tuple[tuple[int, ...], ...]]] = []
        while not self.at_punct("}"):
            if self.at_ident("carrier"):
                self.advance()
                sort = self.expect_ident("a sort name").value
                self.expect_sym("=")
                carriers.append((sort, self.expect_int("a carrier size")))
                self.expect_punct(";")
            elif self.at_ident("op"):
                self.advance()
                op = self.op_name().value
                self.expect_sym("=")
                self.expect_punct("[")
                values: list[int] = []
                while not self.at_punct("]"):
                    values.append(self.expect_int("a table entry"))
                    if self.at_punct(","):
                        self.advance()
                self.expect_punct("]")
                self.expect_punct(";")
                tables.append((op, tuple(values)))
            elif self.at_ident("filter"):
                self.advance()
                sort = self.expect_ident("a sort name").value
                self.expect_sym("=")
                self.expect_punct("{")
                tuples: list[tuple[int, ...]] = []
                while not self.at_punct("}"):
                    self.expect_punct("(")
                    entry = [self.expect_int("an element index")]
                    while self.at_punct(","):
                        self.advance()
                        entry.append(self.expect_int("an element index"))
                    self.expect_punct(")")
                    tuples.append(tuple(entry))
                    if self.at_punct(","):
                        self.advance()
                self.expect_punct("}")
                self.expect_punct(";")
                filters.append((sort, tuple(tuples)))
            else:
                raise self.error("expected 'carrier', 'op', or 'filter'")
        self.expect_punct("}")
        return StructureDecl(
            name.value,
            sig_ref,
            dim,
            tuple(carriers),
            tuple(tables),
            tuple(filters),
            start.line,
            start.column,
        )

    # -- directives ----------------------------------------------------------

    def check_decl(self) -> CheckDecl:
        start = self.advance()
        first = self.hyphen_ident("a directive kind or label")
        label: Optional[str] = None
        if self.at_sym("="):
            self.advance()
            label = first.value
            kind_tok = self.hyphen_ident("a directive kind")
        else:
            kind_tok = first
        kind = kind_tok.value
        if kind not in DIRECTIVE_KINDS:
            raise self.error(f"unknown directive kind {kind!r}", kind_tok)

        system = sequent = source = target = via = first_ref = second_ref = None
        if kind in GOAL_KINDS:
            system = self.hyphen_ident("a system name").value
            sequent = self.sequent()
        elif kind in VIA_KINDS:
            source = self.hyphen_ident("the source system").value
            target = self.hyphen_ident("the target system").value
            if not self.at_ident("via"):
                raise self.error("expected 'via'")
            self.advance()
            via = self.hyphen_ident("a translation or morphism name").value
        elif kind == "refine-logical":
            source = self.hyphen_ident("the source system").value
            target = self.hyphen_ident("the target system").value
        else:  # compose
            first_ref = self.hyphen_ident("an earlier directive label").value
            second_ref = self.hyphen_ident("an earlier directive label").value

        options = DirectiveOptions()
        if self.at_ident("with"):
            self.advance()
            options = self.directive_options()
        self.expect_punct(";")
        return CheckDecl(
            label,
            kind,
            system,
            sequent,
            source,
            target,
            via,
            first_ref,
            second_ref,
            options,
            start.line,
            start.column,
        )

    def directive_options(self) -> DirectiveOptions:
        self.expect_punct("{")
        values: dict = {}
        sizes: list[tuple[str, int]] = []
        models: list[str] = []
        assume: list[str] = []
        while not self.at_punct("}"):
            key = self.hyphen_ident("an option name")
            if key.value in ("rounds", "derived", "inst-depth", "time-ms", "depth"):
                slot = key.value.replace("-", "_")
                if slot in values:
                    raise self.error(f"duplicate option {key.value!r}", key)
                values[slot] = self.expect_int("a value")
                self.expect_punct(";")
            elif key.value == "sizes":
                self.expect_punct("{")
                while not self.at_punct("}"):
                    sort = self.expect_ident("a sort name").value
                    self.expect_sym("=")
                    sizes.append((sort, self.expect_int("a size")))
                    if self.at_punct(","):
                        self.advance()
                self.expect_punct("}")
                self.expect_punct(";")
            elif key.value == "models":
                models.append(self.hyphen_ident("a structure name").value)
                while self.at_punct(","):
                    self.advance()
                    models.append(self.hyphen_ident("a structure name").value)
                self.expect_punct(";")
            elif key.value == "assume":
                if self.peek().kind != "string":
                    raise self.error("expected a quoted note")
                assume.append(self.advance().value)
                self.expect_punct(";")
            else:
                raise self.error(f"unknown option {key.value!r}", key)
        self.expect_punct("}")
        return DirectiveOptions(
            rounds=values.get("rounds"),
            derived=values.get("derived"),
            inst_depth=values.get("inst_depth"),
            time_ms=values.get("time_ms"),
            depth=values.get("depth"),
            sizes=tuple(sizes),
            models=tuple(models),
            assume=tuple(assume),
        )


def parse_document_text(text: str) -> DocumentNode:
    """Parse a full .rspec document into surface syntax nodes."""
    parser = _Parser(text)
    return parser.document()


def parse_sequent_text(text: str) -> SequentNode:
    """Parse a standalone goal such as ``"f(x) ~ x"`` or
    ``"<p /\\ p, p>"`` (the ``--goal`` argument)."""
    parser = _Parser(text)
    node = parser.sequent()
    if parser.peek().kind != "eof":
        raise parser.error("trailing input after the sequent")
    return node
